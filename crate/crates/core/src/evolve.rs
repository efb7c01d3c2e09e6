//! Circuit-to-MPS evolution machinery for the training engine.
//!
//! Three pieces live here:
//!
//! * ascending layer application with per-split rank bookkeeping — every
//!   split can be recorded into a [`RankPlan`] and replayed later, so a
//!   finite-difference probe can re-evaluate the loss with the forward
//!   pass's truncation decisions frozen;
//! * descending adjoint layer application, used to pull the target state
//!   backwards through the layers above the one being optimized;
//! * the staircase environment contraction, which yields `∂c/∂Ĝ^[m]` for
//!   every gate of one layer in a single left-to-right pass.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{lq_positive, svd};
use crate::mps::{apply_gate_to_block, MatrixProductState};
use crate::tensor::{contract, ComplexTensor};

/// Kept rank of every split performed during one evolution, in order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RankPlan {
    pub kept: Vec<usize>,
}

/// Result of evolving a state through a whole circuit.
#[derive(Debug, Clone)]
pub struct EvolveOutcome {
    pub psi: MatrixProductState,
    pub truncation_error: f64,
    pub plan: RankPlan,
}

enum Keep {
    Cap(usize),
    Pinned(usize),
}

/// SVD split of a two-site block `(l,2,2,r)`; the Schmidt weights move into
/// the right factor. Returns `(left, right, discarded weight, kept rank)`.
fn split_block_right(
    theta: ComplexTensor,
    keep: Keep,
) -> Result<(ComplexTensor, ComplexTensor, f64, usize)> {
    let dims = theta.shape().to_vec();
    let (l, r) = (dims[0], dims[3]);
    let m = theta.into_reshaped(vec![l * 2, 2 * r])?;
    let f = svd(&m)?;
    let k = match keep {
        Keep::Cap(chi) => chi.min(f.s.len()).max(1),
        Keep::Pinned(k) => {
            if k > f.s.len() {
                return Err(Error::State(format!(
                    "replay plan wants rank {k} but only {} Schmidt values exist",
                    f.s.len()
                )));
            }
            k
        }
    };
    let trunc: f64 = f.s[k..].iter().map(|x| x * x).sum();
    let rows = f.u.shape()[0];
    let mut left = ComplexTensor::zeros(vec![rows, k]);
    for row in 0..rows {
        for col in 0..k {
            left.data_mut()[row * k + col] = f.u.get(&[row, col]);
        }
    }
    let mut right = ComplexTensor::from_parts(vec![k, 2 * r], f.vh.data()[..k * 2 * r].to_vec());
    for (i, &sigma) in f.s[..k].iter().enumerate() {
        for j in 0..2 * r {
            right.data_mut()[i * 2 * r + j] *= sigma;
        }
    }
    Ok((
        left.into_reshaped(vec![l, 2, k])?,
        right.into_reshaped(vec![k, 2, r])?,
        trunc,
        k,
    ))
}

/// Split moving the weights into the left factor. Uses an exact LQ when the
/// block rank already fits under `chi`, otherwise a truncated SVD.
fn split_block_left(
    theta: ComplexTensor,
    chi: usize,
) -> Result<(ComplexTensor, ComplexTensor, f64)> {
    let dims = theta.shape().to_vec();
    let (l, r) = (dims[0], dims[3]);
    let full = (l * 2).min(2 * r);
    let m = theta.into_reshaped(vec![l * 2, 2 * r])?;
    if full <= chi {
        let (lf, q) = lq_positive(&m)?;
        let k = q.shape()[0];
        return Ok((
            lf.into_reshaped(vec![l, 2, k])?,
            q.into_reshaped(vec![k, 2, r])?,
            0.0,
        ));
    }
    let f = svd(&m)?;
    let k = chi.min(f.s.len()).max(1);
    let trunc: f64 = f.s[k..].iter().map(|x| x * x).sum();
    let rows = f.u.shape()[0];
    let mut left = ComplexTensor::zeros(vec![rows, k]);
    for row in 0..rows {
        for col in 0..k {
            left.data_mut()[row * k + col] = f.u.get(&[row, col]) * f.s[col];
        }
    }
    let right = ComplexTensor::from_parts(vec![k, 2 * r], f.vh.data()[..k * 2 * r].to_vec());
    Ok((
        left.into_reshaped(vec![l, 2, k])?,
        right.into_reshaped(vec![k, 2, r])?,
        trunc,
    ))
}

/// One ascending stair pass. The center is moved to site 0 first and ends
/// at site N−1. When `replay` is set, each split keeps exactly the recorded
/// rank; otherwise ranks are capped at `chi` and appended to `plan`.
pub fn apply_layer(
    psi: &mut MatrixProductState,
    gates: &[ComplexTensor],
    chi: usize,
    plan: &mut RankPlan,
    replay: Option<(&RankPlan, &mut usize)>,
) -> Result<f64> {
    let n = psi.n_sites();
    if gates.len() != n - 1 {
        return Err(Error::Argument(format!(
            "layer has {} gates for {} sites",
            gates.len(),
            n
        )));
    }
    psi.gauge_to(0)?;
    let mut total = 0.0;
    let mut cursor_holder = replay;
    for (site, gate) in gates.iter().enumerate() {
        let theta = psi.two_site_block(site)?;
        let theta = apply_gate_to_block(gate, &theta)?;
        let keep = match &mut cursor_holder {
            Some((recorded, cursor)) => {
                let k = *recorded.kept.get(**cursor).ok_or_else(|| {
                    Error::State("replay plan exhausted before the evolution finished".into())
                })?;
                **cursor += 1;
                Keep::Pinned(k)
            }
            None => Keep::Cap(chi),
        };
        let (left, right, trunc, kept) = split_block_right(theta, keep)?;
        if cursor_holder.is_none() {
            plan.kept.push(kept);
        }
        psi.set_pair(site, left, right, site + 1)?;
        total += trunc;
    }
    Ok(total)
}

/// One descending pass applying gate adjoints: realizes `U_layer†|ψ⟩`. The
/// center is moved to site N−1 first and ends at site 0. Splits are exact
/// (LQ) whenever the block rank fits under `chi_back`.
pub fn apply_layer_adjoint(
    psi: &mut MatrixProductState,
    gates: &[ComplexTensor],
    chi_back: usize,
) -> Result<f64> {
    let n = psi.n_sites();
    if gates.len() != n - 1 {
        return Err(Error::Argument(format!(
            "layer has {} gates for {} sites",
            gates.len(),
            n
        )));
    }
    psi.gauge_to(n - 1)?;
    let mut total = 0.0;
    for site in (0..n - 1).rev() {
        let theta = psi.two_site_block(site)?;
        let theta = crate::mps::apply_gate_adjoint_to_block(&gates[site], &theta)?;
        let (left, right, trunc) = split_block_left(theta, chi_back)?;
        psi.set_pair(site, left, right, site)?;
        total += trunc;
    }
    Ok(total)
}

/// Evolve `psi0` through every layer of `unitaries` at bond cap `chi`.
/// With `replay`, all split ranks are pinned to the recorded plan.
pub fn evolve_circuit(
    psi0: &MatrixProductState,
    unitaries: &[Vec<ComplexTensor>],
    chi: usize,
    replay: Option<&RankPlan>,
) -> Result<EvolveOutcome> {
    let mut psi = psi0.clone();
    let mut plan = RankPlan::default();
    let mut cursor = 0usize;
    let mut total = 0.0;
    for layer in unitaries {
        let rep = replay.map(|p| (p, &mut cursor));
        total += apply_layer(&mut psi, layer, chi, &mut plan, rep)?;
    }
    if let Some(p) = replay {
        plan = p.clone();
    }
    Ok(EvolveOutcome {
        psi,
        truncation_error: total,
        plan,
    })
}

/// Gate environments of one stair layer.
///
/// For `c = ⟨τ| Ĝ_{N−2}…Ĝ_0 |ψ⟩` returns `c` and, for every gate `m`, the
/// 4×4 tensor `E^[m] = ∂c/∂Ĝ^[m]` — the contraction of the whole sandwich
/// with gate `m` removed, indexed `[(out pair), (in pair)]`. Splits of the
/// working ket use bond cap `chi`; where they truncate, the discarded
/// subspace is treated as frozen, matching the loss's forward pass.
pub fn layer_environments(
    tau: &MatrixProductState,
    psi: &MatrixProductState,
    gates: &[ComplexTensor],
    chi: usize,
) -> Result<(Complex64, Vec<ComplexTensor>)> {
    let n = psi.n_sites();
    if tau.n_sites() != n || gates.len() != n - 1 {
        return Err(Error::Argument(
            "environment contraction needs matching chain and layer sizes".into(),
        ));
    }
    let mut work = psi.clone();
    work.gauge_to(0)?;
    let b: Vec<ComplexTensor> = tau.site_tensors().iter().map(|t| t.conj()).collect();

    // right environments R[j], legs (β: τ bond j, y: intermediate gate leg
    // at site j+1, α: ψ bond j+1); R[N−2] = conj(B_{N−1}) with a trivial α
    let mut r_env: Vec<Option<ComplexTensor>> = vec![None; n - 1];
    let last_b = &b[n - 1]; // (β, q, 1)
    r_env[n - 2] = Some(last_b.reshape(vec![last_b.shape()[0], 2, 1])?);
    for j in (1..n - 1).rev() {
        let g4 = gates[j].reshape(vec![2, 2, 2, 2])?; // (p, y, p', q')
        let r = r_env[j].take().expect("right env built in order");
        // ψ_{j+1} (u, w, a) × R (β, y, a) -> (u, w, β, y)
        let t1 = contract(work.site(j + 1), &r, &[(2, 2)])?;
        // gate (p, y, p', w) × t1 over (y, w) -> (p, p', u, β)
        let t2 = contract(&g4, &t1, &[(1, 3), (3, 1)])?;
        // conj(B_j) (c, p, β) × t2 over (p, β) -> (c, p', u)
        let t3 = contract(&b[j], &t2, &[(1, 0), (2, 3)])?;
        r_env[j - 1] = Some(t3);
        r_env[j] = Some(r);
    }

    let mut envs = Vec::with_capacity(n - 1);
    // two-leg left environment (β̃: τ bond, ã: gated-ket bond)
    let mut l2 = ComplexTensor::identity(1);
    for site in 0..n - 1 {
        let theta = work.two_site_block(site)?; // (ã, s, t, α)
        let t1 = contract(&l2, &theta, &[(1, 0)])?; // (β̃, s, t, α)
        let env = if site < n - 2 {
            let r = r_env[site].as_ref().expect("right env");
            let t2 = contract(&t1, r, &[(3, 2)])?; // (β̃, s, t, β, q)
            // conj(B_site) (β̃, p, β) × t2 -> (p, q, s, t)
            contract(&b[site], &t2, &[(0, 0), (2, 3)])?.permute(&[0, 3, 1, 2])?
        } else {
            // final gate: both bra tensors contract directly
            let t2 = contract(&b[site], &t1, &[(0, 0)])?; // (p, β, s, t, α=1)
            let t3 = contract(&b[site + 1], &t2, &[(0, 1), (2, 4)])?; // (q, p, s, t)
            t3.permute(&[1, 0, 2, 3])?
        };
        envs.push(env.into_reshaped(vec![4, 4])?);

        // advance the working ket through the true gate
        let gated = apply_gate_to_block(&gates[site], &theta)?;
        let (left, right, _, _) = split_block_right(gated, Keep::Cap(chi))?;
        work.set_pair(site, left, right, site + 1)?;
        // absorb site into l2: (β̃, ã) × conj(B) (β̃, p, β') × ket (ã, p, ã')
        let t = contract(&l2, work.site(site), &[(1, 0)])?; // (β̃, p, ã')
        l2 = contract(&b[site], &t, &[(0, 0), (1, 1)])?; // (β', ã')
    }
    // c = l2 · conj(B_{N−1}) · ket_{N−1}
    let t = contract(&l2, work.site(n - 1), &[(1, 0)])?; // (β̃, p, 1)
    let c = contract(&b[n - 1], &t, &[(0, 0), (1, 1)])?.scalar()?;
    Ok((c, envs))
}

/// Sanity hook used by tests: elementwise `Σ E∘G` must reproduce `c` for
/// every gate of the layer.
pub fn env_gate_contraction(env: &ComplexTensor, gate: &ComplexTensor) -> Complex64 {
    env.data()
        .iter()
        .zip(gate.data())
        .map(|(e, g)| e * g)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::StairCircuit;
    use crate::mps::{overlap, test_gates, MatrixProductState};
    use crate::tensor::C_ONE;

    fn random_layer(n_sites: usize, seed: u64) -> Vec<ComplexTensor> {
        (0..n_sites - 1)
            .map(|i| test_gates::random_unitary(seed + i as u64))
            .collect()
    }

    #[test]
    fn apply_layer_matches_circuit_path() {
        let psi0 = MatrixProductState::random_mps(6, 4, 3).unwrap();
        let layer = random_layer(6, 50);
        let c = StairCircuit::from_latent_layers(6, vec![layer.clone()], vec![]).unwrap();
        let (via_circuit, e1) = c.apply_circuit_mps(&psi0, 64, 0.0).unwrap();
        let mut psi = psi0.clone();
        let mut plan = RankPlan::default();
        let e2 = apply_layer(&mut psi, &layer, 64, &mut plan, None).unwrap();
        assert!((e1 - e2).abs() < 1e-15);
        assert!((overlap(&via_circuit, &psi).unwrap().norm() - 1.0).abs() < 1e-10);
        assert_eq!(plan.kept.len(), 5);
    }

    #[test]
    fn adjoint_pass_is_the_adjoint() {
        // ⟨U†τ | ψ⟩ = ⟨τ | Uψ⟩ with exact splits
        let tau = MatrixProductState::random_mps(6, 4, 7).unwrap();
        let psi = MatrixProductState::random_mps(6, 4, 8).unwrap();
        let layer = random_layer(6, 90);
        let mut evolved = psi.clone();
        let mut plan = RankPlan::default();
        apply_layer(&mut evolved, &layer, 256, &mut plan, None).unwrap();
        let lhs = overlap(&tau, &evolved).unwrap();
        let mut back = tau.clone();
        apply_layer_adjoint(&mut back, &layer, 256).unwrap();
        let rhs = overlap(&back, &psi).unwrap();
        assert!((lhs - rhs).norm() < 1e-12, "{lhs} vs {rhs}");
    }

    #[test]
    fn adjoint_undoes_the_layer() {
        let psi = MatrixProductState::random_mps(7, 4, 21).unwrap();
        let layer = random_layer(7, 60);
        let mut evolved = psi.clone();
        let mut plan = RankPlan::default();
        apply_layer(&mut evolved, &layer, 256, &mut plan, None).unwrap();
        apply_layer_adjoint(&mut evolved, &layer, 256).unwrap();
        assert!((overlap(&psi, &evolved).unwrap().norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn replay_reproduces_recorded_forward() {
        let psi0 = MatrixProductState::random_mps(8, 2, 11).unwrap();
        let layers: Vec<Vec<ComplexTensor>> =
            vec![random_layer(8, 100), random_layer(8, 200)];
        // chi 6 forces genuine truncation (second layer wants rank up to 16)
        let base = evolve_circuit(&psi0, &layers, 6, None).unwrap();
        assert!(base.truncation_error > 1e-12);
        let replayed = evolve_circuit(&psi0, &layers, 6, Some(&base.plan)).unwrap();
        assert!((base.truncation_error - replayed.truncation_error).abs() < 1e-15);
        for (a, b) in base.psi.site_tensors().iter().zip(replayed.psi.site_tensors()) {
            assert_eq!(a.data(), b.data());
        }
        // pinning a smaller rank than the forward kept must change the state
        let mut squeezed = base.plan.clone();
        let widest = squeezed.kept.iter().copied().max().unwrap();
        assert!(widest > 1);
        for k in squeezed.kept.iter_mut() {
            *k = (*k).min(widest - 1);
        }
        let other = evolve_circuit(&psi0, &layers, 6, Some(&squeezed)).unwrap();
        assert!(other.truncation_error > base.truncation_error);
    }

    #[test]
    fn environments_match_dense_basis_oracle() {
        // N=4, one layer: E^[m] entry (a,b) equals the dense overlap with
        // gate m replaced by the matrix unit e_{ab}
        let n = 4;
        let psi0 = MatrixProductState::random_mps(n, 2, 31).unwrap();
        let tau = MatrixProductState::random_mps(n, 4, 32).unwrap();
        let gates = random_layer(n, 300);
        let (c, envs) = layer_environments(&tau, &psi0, &gates, 64).unwrap();

        let tv = tau.to_statevector().unwrap();
        let dense_apply = |mats: &[ComplexTensor]| {
            let mut v = psi0.to_statevector().unwrap();
            for (site, g) in mats.iter().enumerate() {
                v = crate::circuit::apply_gate_statevector(&v, g, site, n);
            }
            v
        };
        let dot = |a: &ComplexTensor, b: &ComplexTensor| -> Complex64 {
            a.data().iter().zip(b.data()).map(|(x, y)| x.conj() * y).sum()
        };
        let c_dense = dot(&tv, &dense_apply(&gates));
        assert!((c - c_dense).norm() < 1e-12, "c {c} vs dense {c_dense}");

        for m in 0..n - 1 {
            assert!((env_gate_contraction(&envs[m], &gates[m]) - c).norm() < 1e-12);
            for a in 0..4 {
                for bcol in 0..4 {
                    let mut unit = ComplexTensor::zeros(vec![4, 4]);
                    unit.data_mut()[a * 4 + bcol] = C_ONE;
                    let mut mats = gates.clone();
                    mats[m] = unit;
                    let want = dot(&tv, &dense_apply(&mats));
                    let got = envs[m].get(&[a, bcol]);
                    assert!(
                        (got - want).norm() < 1e-12,
                        "gate {m} entry ({a},{bcol}): {got} vs {want}"
                    );
                }
            }
        }
    }

    #[test]
    fn environments_are_deterministic() {
        let psi0 = MatrixProductState::random_mps(6, 4, 41).unwrap();
        let tau = MatrixProductState::random_mps(6, 4, 42).unwrap();
        let gates = random_layer(6, 400);
        let (c1, e1) = layer_environments(&tau, &psi0, &gates, 16).unwrap();
        let (c2, e2) = layer_environments(&tau, &psi0, &gates, 16).unwrap();
        assert_eq!(c1, c2);
        for (a, b) in e1.iter().zip(&e2) {
            assert_eq!(a.data(), b.data());
        }
    }

    #[test]
    fn identity_layer_environment_reduces_to_plain_overlap() {
        let psi0 = MatrixProductState::random_mps(5, 4, 51).unwrap();
        let tau = MatrixProductState::random_mps(5, 4, 52).unwrap();
        let gates: Vec<ComplexTensor> = (0..4).map(|_| ComplexTensor::identity(4)).collect();
        let (c, envs) = layer_environments(&tau, &psi0, &gates, 64).unwrap();
        let plain = overlap(&tau, &psi0).unwrap();
        assert!((c - plain).norm() < 1e-12);
        for e in &envs {
            assert!((env_gate_contraction(e, &ComplexTensor::identity(4)) - c).norm() < 1e-12);
        }
    }
}
