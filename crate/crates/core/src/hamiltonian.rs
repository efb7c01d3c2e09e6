//! Open spin-1/2 chains: Heisenberg and XY models.
//!
//! `H = Σ_{n=1}^{N−1} (Ŝx_n Ŝx_{n+1} + Ŝy_n Ŝy_{n+1} [+ Ŝz_n Ŝz_{n+1}])`
//! with `Ŝ = σ/2` and unit couplings; the Ŝz·Ŝz term is present for the
//! Heisenberg model only. Three representations are provided and cross-check
//! each other: a matrix product operator (for DMRG), a dense matrix (small
//! N), and a matrix-free statevector action (iterative ED up to N = 14).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eigh_hermitian, lanczos_lowest, LanczosOptions};
use crate::tensor::{contract, ComplexTensor, C_ZERO};

/// Largest chain the exact solver accepts.
pub const EXACT_SITE_LIMIT: usize = 14;
/// Largest chain expanded to a dense Hamiltonian matrix.
const DENSE_SITE_LIMIT: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "heisenberg")]
    Heisenberg,
    #[serde(rename = "xy")]
    Xy,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelKind::Heisenberg => write!(f, "heisenberg"),
            ModelKind::Xy => write!(f, "xy"),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SpinChainModel {
    pub kind: ModelKind,
    pub n_sites: usize,
}

impl SpinChainModel {
    pub fn new(kind: ModelKind, n_sites: usize) -> Result<Self> {
        if n_sites < 2 {
            return Err(Error::Argument(format!(
                "spin chain needs at least 2 sites, got {n_sites}"
            )));
        }
        Ok(Self { kind, n_sites })
    }
}

/// Operator chain with site tensors shaped `(w_{n−1}, s_out, s_in, w_n)`,
/// boundary widths 1.
#[derive(Debug, Clone)]
pub struct MatrixProductOperator {
    site_tensors: Vec<ComplexTensor>,
}

impl MatrixProductOperator {
    pub fn n_sites(&self) -> usize {
        self.site_tensors.len()
    }

    pub fn site(&self, n: usize) -> &ComplexTensor {
        &self.site_tensors[n]
    }

    /// Interior bond width.
    pub fn bond_width(&self) -> usize {
        self.site_tensors[0].shape()[3]
    }

    /// Contract the whole chain into a `2^N × 2^N` matrix (N ≤ 10).
    pub fn to_dense_matrix(&self) -> Result<ComplexTensor> {
        let n = self.n_sites();
        if n > DENSE_SITE_LIMIT {
            return Err(Error::Capacity(format!(
                "dense operator expansion limited to {DENSE_SITE_LIMIT} sites, got {n}"
            )));
        }
        // acc legs: (out, in, right bond)
        let mut acc = ComplexTensor::identity(1).into_reshaped(vec![1, 1, 1])?;
        for w in &self.site_tensors {
            let d = acc.shape()[0];
            let wr = w.shape()[3];
            // (O, I, w) × (w, s, t, w') -> (O, I, s, t, w') -> (O, s, I, t, w')
            acc = contract(&acc, w, &[(2, 0)])?
                .permute(&[0, 2, 1, 3, 4])?
                .into_reshaped(vec![d * 2, d * 2, wr])?;
        }
        let dim = acc.shape()[0];
        acc.into_reshaped(vec![dim, dim])
    }
}

fn spin_ops() -> [ComplexTensor; 4] {
    let h = 0.5;
    let sx = ComplexTensor::new(
        vec![2, 2],
        vec![
            C_ZERO,
            Complex64::new(h, 0.0),
            Complex64::new(h, 0.0),
            C_ZERO,
        ],
    )
    .unwrap();
    let sy = ComplexTensor::new(
        vec![2, 2],
        vec![
            C_ZERO,
            Complex64::new(0.0, -h),
            Complex64::new(0.0, h),
            C_ZERO,
        ],
    )
    .unwrap();
    let sz = ComplexTensor::new(
        vec![2, 2],
        vec![
            Complex64::new(h, 0.0),
            C_ZERO,
            C_ZERO,
            Complex64::new(-h, 0.0),
        ],
    )
    .unwrap();
    let id = ComplexTensor::identity(2);
    [sx, sy, sz, id]
}

/// Standard lower-triangular nearest-neighbour MPO; bond width 5
/// (Heisenberg) or 4 (XY).
pub fn build_mpo(model: &SpinChainModel) -> MatrixProductOperator {
    let [sx, sy, sz, id] = spin_ops();
    let couplings: Vec<&ComplexTensor> = match model.kind {
        ModelKind::Heisenberg => vec![&sx, &sy, &sz],
        ModelKind::Xy => vec![&sx, &sy],
    };
    let w = couplings.len() + 2;
    // bulk tensor W[a][b]: W[0][0] = I, W[1+c][0] = op_c, W[w−1][1+c] = op_c,
    // W[w−1][w−1] = I
    let mut bulk = ComplexTensor::zeros(vec![w, 2, 2, w]);
    let put = |t: &mut ComplexTensor, a: usize, b: usize, op: &ComplexTensor| {
        for s in 0..2 {
            for u in 0..2 {
                let off = ((a * 2 + s) * 2 + u) * w + b;
                t.data_mut()[off] = op.get(&[s, u]);
            }
        }
    };
    put(&mut bulk, 0, 0, &id);
    for (c, op) in couplings.iter().enumerate() {
        put(&mut bulk, 1 + c, 0, op);
        put(&mut bulk, w - 1, 1 + c, op);
    }
    put(&mut bulk, w - 1, w - 1, &id);

    // boundaries select row w−1 on the left and column 0 on the right
    let first = ComplexTensor::from_parts(
        vec![1, 2, 2, w],
        bulk.data()[(w - 1) * 4 * w..].to_vec(),
    );
    let mut last = ComplexTensor::zeros(vec![w, 2, 2, 1]);
    for a in 0..w {
        for s in 0..2 {
            for u in 0..2 {
                last.data_mut()[(a * 2 + s) * 2 + u] = bulk.get(&[a, s, u, 0]);
            }
        }
    }

    let mut tensors = vec![first];
    for _ in 1..model.n_sites - 1 {
        tensors.push(bulk.clone());
    }
    tensors.push(last);
    MatrixProductOperator {
        site_tensors: tensors,
    }
}

/// Index of the bit carrying site `n` (site 1 is the most significant bit).
fn bit_of_site(n: usize, n_sites: usize) -> usize {
    n_sites - 1 - n
}

/// `out ← H·v` on dense amplitudes, built bond by bond from Eq. couplings —
/// independent of the MPO path.
pub fn apply_hamiltonian_dense(
    model: &SpinChainModel,
    v: &[Complex64],
    out: &mut [Complex64],
) {
    let n = model.n_sites;
    debug_assert_eq!(v.len(), 1usize << n);
    out.fill(C_ZERO);
    let heis = model.kind == ModelKind::Heisenberg;
    for bond in 0..n - 1 {
        let b1 = bit_of_site(bond, n);
        let b2 = bit_of_site(bond + 1, n);
        let mask = (1usize << b1) | (1usize << b2);
        for (idx, &amp) in v.iter().enumerate() {
            let s1 = (idx >> b1) & 1;
            let s2 = (idx >> b2) & 1;
            if s1 == s2 {
                if heis {
                    out[idx] += 0.25 * amp;
                }
            } else {
                if heis {
                    out[idx] -= 0.25 * amp;
                }
                out[idx ^ mask] += 0.5 * amp;
            }
        }
    }
}

/// Dense Hamiltonian matrix from the bond couplings directly (N ≤ 10).
pub fn dense_hamiltonian(model: &SpinChainModel) -> Result<ComplexTensor> {
    let n = model.n_sites;
    if n > DENSE_SITE_LIMIT {
        return Err(Error::Capacity(format!(
            "dense Hamiltonian limited to {DENSE_SITE_LIMIT} sites, got {n}"
        )));
    }
    let dim = 1usize << n;
    let mut h = ComplexTensor::zeros(vec![dim, dim]);
    let mut col = vec![C_ZERO; dim];
    let mut out = vec![C_ZERO; dim];
    for j in 0..dim {
        col.fill(C_ZERO);
        col[j] = Complex64::new(1.0, 0.0);
        apply_hamiltonian_dense(model, &col, &mut out);
        for i in 0..dim {
            h.data_mut()[i * dim + j] = out[i];
        }
    }
    Ok(h)
}

/// Lowest eigenpair of the chain Hamiltonian. Dense diagonalization up to
/// N = 10, matrix-free Lanczos up to N = 14. The returned vector is
/// normalized with its largest-magnitude amplitude rotated to the positive
/// real axis.
pub fn exact_ground_state(model: &SpinChainModel) -> Result<(f64, ComplexTensor)> {
    let n = model.n_sites;
    if n > EXACT_SITE_LIMIT {
        return Err(Error::Capacity(format!(
            "exact diagonalization limited to {EXACT_SITE_LIMIT} sites, got {n}"
        )));
    }
    let dim = 1usize << n;
    let (energy, mut vec) = if n <= DENSE_SITE_LIMIT {
        let h = dense_hamiltonian(model)?;
        let (vals, vecs) = eigh_hermitian(&h)?;
        let ground: Vec<Complex64> = (0..dim).map(|i| vecs.get(&[i, 0])).collect();
        (vals[0], ground)
    } else {
        let opts = LanczosOptions {
            max_iter: 300,
            tol: 1e-12,
        };
        let apply = |x: &[Complex64], y: &mut [Complex64]| {
            apply_hamiltonian_dense(model, x, y);
        };
        lanczos_lowest(dim, apply, None, &opts)?
    };
    fix_global_phase(&mut vec);
    ComplexTensor::new(vec![dim], vec).map(|t| (energy, t))
}

/// Rotate so the largest-|amplitude| entry is real positive.
pub fn fix_global_phase(v: &mut [Complex64]) {
    let mut best = 0usize;
    let mut mag = 0.0f64;
    for (i, z) in v.iter().enumerate() {
        let m = z.norm();
        if m > mag {
            mag = m;
            best = i;
        }
    }
    if mag > 0.0 {
        let phase = v[best].conj() / mag;
        for z in v.iter_mut() {
            *z *= phase;
        }
    }
}

/// Exact XY-chain ground energy from the Jordan-Wigner free-fermion
/// spectrum: `Σ_k cos(πk/(N+1))` over modes with negative energy.
pub fn xy_exact_energy(n_sites: usize) -> f64 {
    let n = n_sites as f64;
    (1..=n_sites)
        .map(|k| (std::f64::consts::PI * k as f64 / (n + 1.0)).cos())
        .filter(|&e| e < 0.0)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dagger;

    fn heis(n: usize) -> SpinChainModel {
        SpinChainModel::new(ModelKind::Heisenberg, n).unwrap()
    }

    fn xy(n: usize) -> SpinChainModel {
        SpinChainModel::new(ModelKind::Xy, n).unwrap()
    }

    #[test]
    fn model_rejects_single_site() {
        assert!(SpinChainModel::new(ModelKind::Heisenberg, 1).is_err());
    }

    #[test]
    fn mpo_bond_widths() {
        assert_eq!(build_mpo(&heis(6)).bond_width(), 5);
        assert_eq!(build_mpo(&xy(6)).bond_width(), 4);
    }

    #[test]
    fn heisenberg_two_site_spectrum() {
        let h = build_mpo(&heis(2)).to_dense_matrix().unwrap();
        let (vals, _) = eigh_hermitian(&h).unwrap();
        assert!((vals[0] + 0.75).abs() < 1e-12);
        for v in &vals[1..] {
            assert!((v - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn xy_two_site_ground_energy() {
        let h = build_mpo(&xy(2)).to_dense_matrix().unwrap();
        let (vals, _) = eigh_hermitian(&h).unwrap();
        assert!((vals[0] + 0.5).abs() < 1e-12);
    }

    #[test]
    fn mpo_matches_direct_hamiltonian() {
        for model in [heis(3), heis(5), xy(3), xy(6)] {
            let a = build_mpo(&model).to_dense_matrix().unwrap();
            let b = dense_hamiltonian(&model).unwrap();
            let d = a.add(&b.scaled(Complex64::new(-1.0, 0.0))).unwrap();
            assert!(d.max_abs() < 1e-12, "{model:?}: {}", d.max_abs());
        }
    }

    #[test]
    fn hamiltonian_is_hermitian_at_n8() {
        let h = build_mpo(&heis(8)).to_dense_matrix().unwrap();
        let diff = h.add(&dagger(&h).unwrap().scaled(Complex64::new(-1.0, 0.0))).unwrap();
        assert!(diff.max_abs() < 1e-14);
    }

    #[test]
    fn exact_ground_small_chains() {
        let (e, _) = exact_ground_state(&heis(2)).unwrap();
        assert!((e + 0.75).abs() < 1e-12);
        let (e, _) = exact_ground_state(&xy(2)).unwrap();
        assert!((e + 0.5).abs() < 1e-12);
    }

    #[test]
    fn exact_ground_residual_n8() {
        let model = heis(8);
        let (e, v) = exact_ground_state(&model).unwrap();
        let mut hv = vec![C_ZERO; v.len()];
        apply_hamiltonian_dense(&model, v.data(), &mut hv);
        let res: f64 = hv
            .iter()
            .zip(v.data())
            .map(|(h, x)| (h - e * x).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(res < 1e-10, "residual {res}");
        // phase convention
        let mut mag = 0.0;
        let mut lead = C_ZERO;
        for z in v.data() {
            if z.norm() > mag {
                mag = z.norm();
                lead = *z;
            }
        }
        assert!(lead.im.abs() < 1e-12 && lead.re > 0.0);
    }

    #[test]
    fn lanczos_path_matches_free_fermions_at_n11() {
        let (e, v) = exact_ground_state(&xy(11)).unwrap();
        let want = xy_exact_energy(11);
        assert!((e - want).abs() < 1e-9, "{e} vs {want}");
        assert!((v.frobenius_norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn capacity_guard_above_14() {
        assert!(matches!(
            exact_ground_state(&heis(15)),
            Err(Error::Capacity(_))
        ));
    }

    #[test]
    fn xy_free_fermion_energy_small_cases() {
        // N=2: modes cos(π/3)=0.5, cos(2π/3)=−0.5 → ground −0.5
        assert!((xy_exact_energy(2) + 0.5).abs() < 1e-14);
        let h = build_mpo(&xy(6)).to_dense_matrix().unwrap();
        let (vals, _) = eigh_hermitian(&h).unwrap();
        assert!((vals[0] - xy_exact_energy(6)).abs() < 1e-12);
    }
}
