//! Gradient-descent training of stair circuits against a target MPS.
//!
//! The loss is the negative logarithmic fidelity per site,
//! `F = −(1/N)·ln|⟨target|Û|ψ₀⟩|`. Its gradient with respect to a latent
//! gate factors into three parts, all assembled here:
//!
//! 1. the overlap's derivative with respect to the *projected* unitary —
//!    the environment tensor `E^[m]` from [`crate::evolve`], with the
//!    forward pass's truncation projectors held fixed;
//! 2. the real-log-modulus rule `∂F/∂c̄ = −1/(2N c̄)`;
//! 3. the differential of the SVD projection `G̃ → W = UV†`, with a
//!    Lorentzian broadening `δ` regularizing near-degenerate pairs of
//!    singular values.
//!
//! Layers are optimized one at a time (Gauss–Seidel within an epoch): the
//! ket below the active layer and the target pulled back through the
//! adjoints of the layers above it form a sandwich whose contraction gives
//! every gate environment of the layer in one pass.

use std::time::Instant;

use num_complex::Complex64;

use crate::circuit::StairCircuit;
use crate::error::{Error, Result};
use crate::evolve::{
    apply_layer, apply_layer_adjoint, evolve_circuit, layer_environments, RankPlan,
};
use crate::linalg::{dagger, matmul, project_to_unitary, svd};
use crate::mps::{overlap, MatrixProductState};
use crate::rng::{complex_normal, seeded_rng};
use crate::tensor::ComplexTensor;

/// Overlap moduli below this are treated as an orthogonal pair: the log
/// loss is undefined there.
pub const OVERLAP_FLOOR: f64 = 1e-300;

/// Optimizer used for the latent updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    /// Adam with bias correction (default).
    Adam,
    /// Plain gradient descent.
    Sgd,
}

/// Hyperparameters of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Initial learning rate η₀.
    pub eta0: f64,
    /// Halvings applied across one stage: η(t) = η₀·0.5^⌊k·t/epochs⌋.
    pub lr_halvings: u32,
    /// Epoch budget per stage.
    pub epochs_per_stage: usize,
    /// Convergence window w (epochs).
    pub window: usize,
    /// Relative tolerance τ on the loss change across the window.
    pub rel_tol: f64,
    /// Bond cap for ket evolution; `None` resolves to
    /// `min(4^{n_L}, 2·χ_target)` per stage.
    pub chi_evolve: Option<usize>,
    /// Bond cap for pulling the target back through adjoint layers;
    /// `None` resolves to `4·χ_target`.
    pub chi_back: Option<usize>,
    /// Lorentzian broadening δ of the projection differential.
    pub svd_broadening: f64,
    /// Perturbation scale for a freshly appended layer.
    pub epsilon_new_layer: f64,
    /// Seed for the first layer; appended layers and re-perturbations
    /// derive their seeds from it.
    pub seed: u64,
    /// Update rule.
    pub optimizer: OptimizerKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            eta0: 1e-2,
            lr_halvings: 2,
            epochs_per_stage: 1000,
            window: 50,
            rel_tol: 1e-5,
            chi_evolve: None,
            chi_back: None,
            svd_broadening: 1e-12,
            epsilon_new_layer: 0.01,
            seed: 0,
            optimizer: OptimizerKind::Adam,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta0 > 0.0) || !(self.rel_tol > 0.0) {
            return Err(Error::Argument(
                "learning rate and tolerance must be positive".into(),
            ));
        }
        if !(self.svd_broadening > 0.0) || !(self.epsilon_new_layer > 0.0) {
            return Err(Error::Argument(
                "broadening and layer perturbation must be positive".into(),
            ));
        }
        if self.epochs_per_stage == 0 || self.window == 0 {
            return Err(Error::Argument(
                "epoch budget and window must be at least 1".into(),
            ));
        }
        if let Some(chi) = self.chi_evolve {
            if chi < 4 {
                return Err(Error::Argument(format!(
                    "chi_evolve must be at least 4, got {chi}"
                )));
            }
        }
        if let Some(chi) = self.chi_back {
            if chi < 4 {
                return Err(Error::Argument(format!(
                    "chi_back must be at least 4, got {chi}"
                )));
            }
        }
        Ok(())
    }

    /// Learning rate at epoch `t` of a stage.
    pub fn eta_at(&self, t: usize) -> f64 {
        let halvings = (self.lr_halvings as usize).saturating_mul(t) / self.epochs_per_stage;
        self.eta0 * 0.5_f64.powi(halvings.min(i32::MAX as usize) as i32)
    }

    /// Evolution bond cap for a stage with `n_layers` layers against a
    /// target of bond dimension `chi_target`.
    pub fn resolved_chi_evolve(&self, n_layers: usize, chi_target: usize) -> usize {
        if let Some(chi) = self.chi_evolve {
            return chi;
        }
        let exact = if n_layers >= 16 {
            usize::MAX
        } else {
            4usize.pow(n_layers as u32)
        };
        exact.min(2 * chi_target).max(4)
    }

    /// Adjoint-chain bond cap against a target of bond dimension
    /// `chi_target`.
    pub fn resolved_chi_back(&self, chi_target: usize) -> usize {
        self.chi_back.unwrap_or(4 * chi_target).max(4)
    }
}

/// Per-epoch training metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    /// Epoch counter (global across stages in a grown run).
    pub epoch: usize,
    /// Stage (layer count) the epoch belongs to.
    pub n_layers: usize,
    /// Negative logarithmic fidelity per site after the epoch's updates.
    pub loss_f: f64,
    /// Mean bond entropy of the evolved state.
    pub avg_entropy: f64,
    /// Per-bond entropies S_1..S_{N−1} of the evolved state.
    pub bond_entropies: Vec<f64>,
    /// Total discarded Schmidt weight of the epoch's final forward pass.
    pub truncation_error: f64,
    /// Learning rate used this epoch.
    pub eta: f64,
    /// Wall-clock duration of the epoch in milliseconds.
    pub wall_ms: u64,
}

impl MetricsRecord {
    pub fn csv_header() -> &'static str {
        "epoch,n_layers,loss_F,avg_entropy,trunc_err,eta,wall_ms"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            self.epoch,
            self.n_layers,
            self.loss_f,
            self.avg_entropy,
            self.truncation_error,
            self.eta,
            self.wall_ms
        )
    }
}

/// Everything the loss forward pass produces.
#[derive(Debug, Clone)]
pub struct LossReport {
    pub loss_f: f64,
    pub overlap: Complex64,
    pub truncation_error: f64,
    pub plan: RankPlan,
    pub psi: MatrixProductState,
}

fn nlf_from_overlap(c: Complex64, n_sites: usize) -> Result<f64> {
    let modulus = c.norm();
    if !(modulus >= OVERLAP_FLOOR) {
        return Err(Error::Orthogonality(format!(
            "overlap modulus {modulus:.3e} below {OVERLAP_FLOOR:.0e}; loss undefined"
        )));
    }
    let f = -modulus.ln() / n_sites as f64;
    if f < 0.0 {
        // |c| ≤ 1 structurally; rounding can push it past 1 by O(ε)
        if f > -1e-10 {
            return Ok(0.0);
        }
        return Err(Error::Numerical(format!(
            "overlap modulus {modulus:.17e} exceeds 1; states not normalized"
        )));
    }
    Ok(f)
}

/// Loss forward pass over explicit unitaries, optionally replaying a
/// recorded truncation plan (used by finite-difference probes).
pub fn circuit_loss(
    target: &MatrixProductState,
    unitaries: &[Vec<ComplexTensor>],
    psi0: &MatrixProductState,
    chi_evolve: usize,
    replay: Option<&RankPlan>,
) -> Result<LossReport> {
    if target.n_sites() != psi0.n_sites() {
        return Err(Error::Argument(format!(
            "target has {} sites, initial state {}",
            target.n_sites(),
            psi0.n_sites()
        )));
    }
    let out = evolve_circuit(psi0, unitaries, chi_evolve, replay)?;
    let c = overlap(target, &out.psi)?;
    let loss_f = nlf_from_overlap(c, target.n_sites())?;
    Ok(LossReport {
        loss_f,
        overlap: c,
        truncation_error: out.truncation_error,
        plan: out.plan,
        psi: out.psi,
    })
}

/// Negative logarithmic fidelity per site of the circuit's preparation.
/// Returns `(F, overlap, truncation_error)`.
pub fn negative_log_fidelity(
    target: &MatrixProductState,
    circuit: &StairCircuit,
    psi0: &MatrixProductState,
    chi_evolve: usize,
) -> Result<(f64, Complex64, f64)> {
    target.check_normalized()?;
    let unis = circuit.gate_unitaries()?;
    let report = circuit_loss(target, unis, psi0, chi_evolve, None)?;
    Ok((report.loss_f, report.overlap, report.truncation_error))
}

/// Differential of the unitary projection, pulled back from the overlap
/// environment. Returns `∂F/∂Re G̃ + i·∂F/∂Im G̃` for one latent.
pub(crate) fn polar_pullback(
    latent: &ComplexTensor,
    env: &ComplexTensor,
    c: Complex64,
    n_sites: usize,
    delta: f64,
) -> Result<ComplexTensor> {
    let f = svd(latent)?;
    let d = f.s.len();
    // M = ∂F/∂conj(W) = −conj(E) / (2 N conj(c))
    let scale = Complex64::new(-1.0, 0.0) / (2.0 * n_sites as f64 * c.conj());
    let m = env.conj().scaled(scale);
    let v = dagger(&f.vh)?;
    let mp = matmul(&matmul(&dagger(&f.u)?, &m)?, &v)?;
    let mut t = ComplexTensor::zeros(vec![d, d]);
    for i in 0..d {
        for j in 0..d {
            let b = if i == j {
                1.0 / (2.0 * f.s[i])
            } else {
                let d2 = f.s[j] * f.s[j] - f.s[i] * f.s[i];
                (f.s[j] - f.s[i]) * d2 / (d2 * d2 + delta * delta)
            };
            t.data_mut()[i * d + j] = mp.get(&[i, j]) * b;
        }
    }
    let mut q = ComplexTensor::zeros(vec![d, d]);
    for i in 0..d {
        for j in 0..d {
            q.data_mut()[i * d + j] = t.get(&[i, j]) - t.get(&[j, i]).conj();
        }
    }
    let gamma = matmul(&f.u, &matmul(&q, &f.vh)?)?.scaled(Complex64::new(2.0, 0.0));
    Ok(gamma)
}

fn min_sigma_gap(latent: &ComplexTensor) -> f64 {
    match svd(latent) {
        Ok(f) => {
            let mut gap = f64::INFINITY;
            for i in 0..f.s.len() {
                for j in i + 1..f.s.len() {
                    gap = gap.min((f.s[i] * f.s[i] - f.s[j] * f.s[j]).abs());
                }
            }
            gap
        }
        Err(_) => f64::NAN,
    }
}

/// Gradient of the loss with respect to every latent gate of one layer.
///
/// `chi_evolve` caps the ket chain below the active layer, `chi_back` the
/// adjoint target chain above it; `delta` is the projection broadening.
pub fn loss_gradient(
    target: &MatrixProductState,
    circuit: &StairCircuit,
    psi0: &MatrixProductState,
    active_layer: usize,
    chi_evolve: usize,
    chi_back: usize,
    delta: f64,
) -> Result<Vec<ComplexTensor>> {
    if active_layer >= circuit.n_layers() {
        return Err(Error::Argument(format!(
            "active layer {active_layer} out of range for {} layers",
            circuit.n_layers()
        )));
    }
    let unis = circuit.gate_unitaries()?;
    let mut psi = psi0.clone();
    let mut plan = RankPlan::default();
    for layer in &unis[..active_layer] {
        apply_layer(&mut psi, layer, chi_evolve, &mut plan, None)?;
    }
    let mut tau = target.clone();
    for layer in unis[active_layer + 1..].iter().rev() {
        apply_layer_adjoint(&mut tau, layer, chi_back)?;
    }
    let (c, envs) = layer_environments(&tau, &psi, &unis[active_layer], chi_evolve)?;
    if !(c.norm() >= OVERLAP_FLOOR) {
        return Err(Error::Orthogonality(format!(
            "overlap modulus {:.3e} below {OVERLAP_FLOOR:.0e}; gradient undefined",
            c.norm()
        )));
    }
    let n = circuit.n_sites();
    let mut grads = Vec::with_capacity(envs.len());
    for (site, env) in envs.iter().enumerate() {
        let latent = circuit.latent(active_layer, site);
        let g = polar_pullback(latent, env, c, n, delta)?;
        if g.check_finite().is_err() {
            return Err(Error::Numerical(format!(
                "non-finite gradient at layer {active_layer}, gate {site} \
                 (min singular-value gap {:.3e})",
                min_sigma_gap(latent)
            )));
        }
        grads.push(g);
    }
    Ok(grads)
}

/// Adam moments for the latents of one layer, stored per gate with the
/// real and imaginary channels tracked independently.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<ComplexTensor>,
    v: Vec<ComplexTensor>,
    t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(n_gates: usize) -> Self {
        Self {
            m: vec![ComplexTensor::zeros(vec![4, 4]); n_gates],
            v: vec![ComplexTensor::zeros(vec![4, 4]); n_gates],
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }
}

/// One Adam update over a layer's latents; parameters are treated as
/// independent reals (Re and Im channels).
pub fn adam_step(
    state: &mut AdamState,
    latents: &[ComplexTensor],
    grads: &[ComplexTensor],
    eta: f64,
) -> Result<Vec<ComplexTensor>> {
    if latents.len() != state.m.len() || grads.len() != latents.len() {
        return Err(Error::Argument(format!(
            "Adam state tracks {} gates, got {} latents / {} gradients",
            state.m.len(),
            latents.len(),
            grads.len()
        )));
    }
    state.t += 1;
    let bc1 = 1.0 - state.beta1.powi(state.t as i32);
    let bc2 = 1.0 - state.beta2.powi(state.t as i32);
    let mut out = Vec::with_capacity(latents.len());
    for (gate, (latent, grad)) in latents.iter().zip(grads).enumerate() {
        if latent.shape() != grad.shape() {
            return Err(Error::Dimension(format!(
                "gradient shape {:?} does not match latent {:?}",
                grad.shape(),
                latent.shape()
            )));
        }
        let mut data = latent.data().to_vec();
        for (i, slot) in data.iter_mut().enumerate() {
            let g = grad.data()[i];
            let m = &mut state.m[gate].data_mut()[i];
            let v = &mut state.v[gate].data_mut()[i];
            m.re = state.beta1 * m.re + (1.0 - state.beta1) * g.re;
            m.im = state.beta1 * m.im + (1.0 - state.beta1) * g.im;
            v.re = state.beta2 * v.re + (1.0 - state.beta2) * g.re * g.re;
            v.im = state.beta2 * v.im + (1.0 - state.beta2) * g.im * g.im;
            slot.re -= eta * (m.re / bc1) / ((v.re / bc2).sqrt() + state.eps);
            slot.im -= eta * (m.im / bc1) / ((v.im / bc2).sqrt() + state.eps);
        }
        out.push(ComplexTensor::new(latent.shape().to_vec(), data)?);
    }
    Ok(out)
}

/// Plain gradient-descent update.
pub fn descent_step(
    latents: &[ComplexTensor],
    grads: &[ComplexTensor],
    eta: f64,
) -> Result<Vec<ComplexTensor>> {
    latents
        .iter()
        .zip(grads)
        .map(|(latent, grad)| {
            let data = latent
                .data()
                .iter()
                .zip(grad.data())
                .map(|(x, g)| x - g * eta)
                .collect();
            ComplexTensor::new(latent.shape().to_vec(), data)
        })
        .collect()
}

const PERTURB_SALT: u64 = 0x7065_7274;

/// Keep a stepped latent full-rank by nudging it with small noise when an
/// update lands on a numerically rank-deficient point.
fn ensure_full_rank(
    latent: ComplexTensor,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<ComplexTensor> {
    if crate::circuit::latent_is_full_rank(&latent)? {
        return Ok(latent);
    }
    let mut fixed = latent;
    for _ in 0..64 {
        let data = fixed
            .data()
            .iter()
            .map(|z| z + complex_normal(rng).scale(1e-8))
            .collect();
        fixed = ComplexTensor::new(vec![4, 4], data)?;
        if crate::circuit::latent_is_full_rank(&fixed)? {
            return Ok(fixed);
        }
    }
    Err(Error::Rank(
        "could not restore a full-rank latent after an optimizer step".into(),
    ))
}

struct StageEngine<'a> {
    target: &'a MatrixProductState,
    psi0: &'a MatrixProductState,
    config: &'a TrainConfig,
    chi_evolve: usize,
    chi_back: usize,
}

impl StageEngine<'_> {
    /// Run one stage over mutable latents/unitaries, appending one record
    /// per epoch to `records` (which survives an abort).
    fn run(
        &self,
        latents: &mut [Vec<ComplexTensor>],
        unis: &mut [Vec<ComplexTensor>],
        records: &mut Vec<MetricsRecord>,
    ) -> Result<()> {
        let n = self.target.n_sites();
        let n_layers = latents.len();
        let n_gates = n - 1;
        let mut adam: Vec<AdamState> = (0..n_layers).map(|_| AdamState::new(n_gates)).collect();
        let mut rng = seeded_rng(self.config.seed ^ PERTURB_SALT);
        let mut history: Vec<f64> = Vec::with_capacity(self.config.epochs_per_stage);
        for t in 0..self.config.epochs_per_stage {
            let tick = Instant::now();
            let eta = self.config.eta_at(t);

            // target pulled back through the adjoints of the layers above
            // each active layer, deepest first
            let mut tau_stack: Vec<MatrixProductState> = Vec::with_capacity(n_layers);
            {
                let mut cur = self.target.clone();
                for l in (0..n_layers).rev() {
                    tau_stack.push(cur.clone());
                    if l > 0 {
                        apply_layer_adjoint(&mut cur, &unis[l], self.chi_back)?;
                    }
                }
                tau_stack.reverse();
            }

            let mut psi = self.psi0.clone();
            let mut epoch_trunc = 0.0;
            for l in 0..n_layers {
                let (c, envs) =
                    layer_environments(&tau_stack[l], &psi, &unis[l], self.chi_evolve)?;
                if !(c.norm() >= OVERLAP_FLOOR) {
                    return Err(Error::Orthogonality(format!(
                        "epoch {t}, layer {l}: overlap collapsed to {:.3e}",
                        c.norm()
                    )));
                }
                let mut grads = Vec::with_capacity(envs.len());
                for (site, env) in envs.iter().enumerate() {
                    let g =
                        polar_pullback(&latents[l][site], env, c, n, self.config.svd_broadening)?;
                    if g.check_finite().is_err() {
                        return Err(Error::Numerical(format!(
                            "epoch {t}: non-finite gradient at layer {l}, gate {site} \
                             (min singular-value gap {:.3e})",
                            min_sigma_gap(&latents[l][site])
                        )));
                    }
                    grads.push(g);
                }
                let stepped = match self.config.optimizer {
                    OptimizerKind::Adam => adam_step(&mut adam[l], &latents[l], &grads, eta)?,
                    OptimizerKind::Sgd => descent_step(&latents[l], &grads, eta)?,
                };
                for (site, latent) in stepped.into_iter().enumerate() {
                    let latent = ensure_full_rank(latent, &mut rng)?;
                    unis[l][site] = project_to_unitary(&latent)?;
                    latents[l][site] = latent;
                }
                let mut plan = RankPlan::default();
                epoch_trunc += apply_layer(&mut psi, &unis[l], self.chi_evolve, &mut plan, None)?;
            }

            let c = overlap(self.target, &psi)?;
            let loss_f = nlf_from_overlap(c, n)?;
            let entropies = psi.normalized()?.bond_entropies()?;
            let avg = entropies.iter().sum::<f64>() / entropies.len() as f64;
            records.push(MetricsRecord {
                epoch: t,
                n_layers,
                loss_f,
                avg_entropy: avg,
                bond_entropies: entropies,
                truncation_error: epoch_trunc,
                eta,
                wall_ms: tick.elapsed().as_millis() as u64,
            });
            history.push(loss_f);
            if t >= self.config.window {
                let past = history[t - self.config.window];
                let rel = (loss_f - past).abs() / past.abs().max(1e-30);
                if rel < self.config.rel_tol {
                    break;
                }
            }
        }
        Ok(())
    }
}

fn extract_latents(circuit: &StairCircuit) -> Vec<Vec<ComplexTensor>> {
    circuit
        .layers()
        .iter()
        .map(|layer| layer.iter().map(|g| g.matrix().clone()).collect())
        .collect()
}

/// Train every layer of `circuit` against `target` for one stage.
/// Returns the updated circuit and one metrics record per epoch run.
pub fn train_stage(
    target: &MatrixProductState,
    circuit: &StairCircuit,
    psi0: &MatrixProductState,
    config: &TrainConfig,
    stage: usize,
) -> Result<(StairCircuit, Vec<MetricsRecord>)> {
    let mut records = Vec::new();
    let trained = train_stage_into(target, circuit, psi0, config, stage, &mut records)?;
    Ok((trained, records))
}

/// [`train_stage`] with caller-owned record storage, so a numerical abort
/// preserves the partial log.
pub fn train_stage_into(
    target: &MatrixProductState,
    circuit: &StairCircuit,
    psi0: &MatrixProductState,
    config: &TrainConfig,
    stage: usize,
    records: &mut Vec<MetricsRecord>,
) -> Result<StairCircuit> {
    config.validate()?;
    if circuit.n_layers() != stage {
        return Err(Error::Argument(format!(
            "stage {stage} expects a circuit with {stage} layers, got {}",
            circuit.n_layers()
        )));
    }
    if target.n_sites() != circuit.n_sites() || psi0.n_sites() != circuit.n_sites() {
        return Err(Error::Argument(format!(
            "site counts differ: target {}, circuit {}, initial state {}",
            target.n_sites(),
            circuit.n_sites(),
            psi0.n_sites()
        )));
    }
    target.check_normalized()?;
    psi0.check_normalized()?;
    let chi_target = target.max_internal_bond().max(1);
    let engine = StageEngine {
        target,
        psi0,
        config,
        chi_evolve: config.resolved_chi_evolve(stage, chi_target),
        chi_back: config.resolved_chi_back(chi_target),
    };
    let mut latents = extract_latents(circuit);
    let mut unis: Vec<Vec<ComplexTensor>> = circuit.gate_unitaries()?.to_vec();
    engine.run(&mut latents, &mut unis, records)?;
    StairCircuit::from_latent_layers(
        circuit.n_sites(),
        latents,
        circuit.seed_history().to_vec(),
    )
}

/// Full growth protocol: train one layer, then repeatedly append an
/// identity-perturbed layer and retrain, up to `n_final_layers`. Records
/// carry global epoch numbers across stages.
pub fn grow_and_train(
    target: &MatrixProductState,
    psi0: &MatrixProductState,
    n_final_layers: usize,
    config: &TrainConfig,
) -> Result<(StairCircuit, Vec<MetricsRecord>)> {
    let mut records = Vec::new();
    let circuit = grow_and_train_into(target, psi0, n_final_layers, config, &mut records)?;
    Ok((circuit, records))
}

/// [`grow_and_train`] with caller-owned record storage.
pub fn grow_and_train_into(
    target: &MatrixProductState,
    psi0: &MatrixProductState,
    n_final_layers: usize,
    config: &TrainConfig,
    records: &mut Vec<MetricsRecord>,
) -> Result<StairCircuit> {
    grow_and_train_observed(target, psi0, n_final_layers, config, records, |_, _, _| {
        Ok(())
    })
}

/// Growth protocol with a callback invoked after every completed stage —
/// the hook for per-stage checkpointing and incremental metric flushes.
/// The callback receives the stage number, the circuit trained so far, and
/// the full record log.
pub fn grow_and_train_observed(
    target: &MatrixProductState,
    psi0: &MatrixProductState,
    n_final_layers: usize,
    config: &TrainConfig,
    records: &mut Vec<MetricsRecord>,
    mut after_stage: impl FnMut(usize, &StairCircuit, &[MetricsRecord]) -> Result<()>,
) -> Result<StairCircuit> {
    if n_final_layers == 0 {
        return Err(Error::Argument("growth needs at least one layer".into()));
    }
    config.validate()?;
    let mut circuit = StairCircuit::init_first_layer(target.n_sites(), config.seed)?;
    let mut epoch_base = 0usize;
    for stage in 1..=n_final_layers {
        if stage > 1 {
            circuit = circuit.append_identity_layer(
                config.epsilon_new_layer,
                config.seed.wrapping_add(stage as u64),
            )?;
        }
        let before = records.len();
        let result = train_stage_into(target, &circuit, psi0, config, stage, records);
        for (i, rec) in records[before..].iter_mut().enumerate() {
            rec.epoch = epoch_base + i;
        }
        circuit = result?;
        epoch_base = records.last().map(|r| r.epoch + 1).unwrap_or(epoch_base);
        after_stage(stage, &circuit, records)?;
    }
    Ok(circuit)
}
