//! The stair circuit: layers of two-qubit gates on ascending neighbour
//! pairs `(0,1), (1,2), …, (N−2,N−1)`.
//!
//! Gates are parametrized by unconstrained 4×4 latent matrices; the gate
//! actually applied is the unitary polar projection of its latent. Circuits
//! are immutable values — "editing" a latent produces a new circuit — and
//! the projected unitaries are computed once per circuit value and cached.

use std::path::Path;
use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_json_file, write_json_file};
use crate::linalg::project_to_unitary;
use crate::mps::MatrixProductState;
use crate::rng::{complex_normal_vec, seeded_rng};
use crate::tensor::{ComplexTensor, C_ZERO};

/// Current checkpoint schema version.
pub const CHECKPOINT_VERSION: u32 = 1;
/// The one supported gate layout.
pub const LAYOUT_NAME: &str = "stair-ascending";
/// Default size of the random perturbation when a new layer is appended.
pub const DEFAULT_EPSILON_NEW_LAYER: f64 = 0.01;

/// Relative rank floor below which a latent is considered degenerate.
const RANK_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone)]
pub struct LatentGate {
    matrix: ComplexTensor,
    site: usize,
    layer: usize,
}

impl LatentGate {
    /// Wrap a 4×4 latent, re-perturbing it (deterministically from the
    /// matrix itself being replaced by caller-provided randomness) is the
    /// caller's job; this constructor only enforces shape and rank.
    pub fn new(matrix: ComplexTensor, site: usize, layer: usize) -> Result<Self> {
        if matrix.shape() != [4, 4] {
            return Err(Error::Dimension(format!(
                "latent gate must be 4×4, got {:?}",
                matrix.shape()
            )));
        }
        if !latent_is_full_rank(&matrix)? {
            return Err(Error::Rank(format!(
                "latent at layer {layer}, site {site} is numerically rank-deficient"
            )));
        }
        Ok(Self {
            matrix,
            site,
            layer,
        })
    }

    pub fn matrix(&self) -> &ComplexTensor {
        &self.matrix
    }

    pub fn site(&self) -> usize {
        self.site
    }

    pub fn layer(&self) -> usize {
        self.layer
    }
}

pub(crate) fn latent_is_full_rank(matrix: &ComplexTensor) -> Result<bool> {
    let f = crate::linalg::svd(matrix)?;
    let smax = f.s.first().copied().unwrap_or(0.0);
    let smin = f.s.last().copied().unwrap_or(0.0);
    Ok(smax > 0.0 && smin > RANK_FLOOR * smax)
}

#[derive(Debug)]
pub struct StairCircuit {
    n_sites: usize,
    layers: Vec<Vec<LatentGate>>,
    seed_history: Vec<u64>,
    unitary_cache: OnceLock<Vec<Vec<ComplexTensor>>>,
}

impl Clone for StairCircuit {
    fn clone(&self) -> Self {
        Self {
            n_sites: self.n_sites,
            layers: self.layers.clone(),
            seed_history: self.seed_history.clone(),
            // the cache belongs to the value; cloning a projected circuit
            // keeps the projections
            unitary_cache: self.unitary_cache.clone(),
        }
    }
}

impl StairCircuit {
    /// One layer of random latents, entries i.i.d. complex standard normal.
    pub fn init_first_layer(n_sites: usize, seed: u64) -> Result<Self> {
        if n_sites < 2 {
            return Err(Error::Argument(format!(
                "circuit needs at least 2 sites, got {n_sites}"
            )));
        }
        let mut rng = seeded_rng(seed);
        let mut gates = Vec::with_capacity(n_sites - 1);
        for site in 0..n_sites - 1 {
            let matrix = draw_full_rank_latent(&mut rng, |v| {
                ComplexTensor::new(vec![4, 4], v)
            })?;
            gates.push(LatentGate::new(matrix, site, 0)?);
        }
        Ok(Self {
            n_sites,
            layers: vec![gates],
            seed_history: vec![seed],
            unitary_cache: OnceLock::new(),
        })
    }

    /// Append a near-identity layer `I₄ + ε·R`; earlier layers are kept
    /// verbatim, so previously trained gates keep their values.
    pub fn append_identity_layer(&self, epsilon: f64, seed: u64) -> Result<Self> {
        if epsilon <= 0.0 {
            return Err(Error::Argument(format!(
                "perturbation must be positive, got {epsilon}"
            )));
        }
        let mut rng = seeded_rng(seed);
        let layer = self.layers.len();
        let mut gates = Vec::with_capacity(self.n_sites - 1);
        for site in 0..self.n_sites - 1 {
            let matrix = draw_full_rank_latent(&mut rng, |v| {
                let mut m = ComplexTensor::identity(4);
                for (slot, r) in m.data_mut().iter_mut().zip(v) {
                    *slot += epsilon * r;
                }
                Ok(m)
            })?;
            gates.push(LatentGate::new(matrix, site, layer)?);
        }
        let mut layers = self.layers.clone();
        layers.push(gates);
        let mut seed_history = self.seed_history.clone();
        seed_history.push(seed);
        Ok(Self {
            n_sites: self.n_sites,
            layers,
            seed_history,
            unitary_cache: OnceLock::new(),
        })
    }

    /// Build from explicit latent layers (checkpoint load, tests).
    pub fn from_latent_layers(
        n_sites: usize,
        latents: Vec<Vec<ComplexTensor>>,
        seed_history: Vec<u64>,
    ) -> Result<Self> {
        if n_sites < 2 {
            return Err(Error::Argument("circuit needs at least 2 sites".into()));
        }
        if latents.is_empty() {
            return Err(Error::Argument("circuit needs at least one layer".into()));
        }
        let mut layers = Vec::with_capacity(latents.len());
        for (li, layer) in latents.into_iter().enumerate() {
            if layer.len() != n_sites - 1 {
                return Err(Error::Dimension(format!(
                    "layer {li} has {} gates, expected {}",
                    layer.len(),
                    n_sites - 1
                )));
            }
            let mut gates = Vec::with_capacity(layer.len());
            for (site, matrix) in layer.into_iter().enumerate() {
                gates.push(LatentGate::new(matrix, site, li)?);
            }
            layers.push(gates);
        }
        Ok(Self {
            n_sites,
            layers,
            seed_history,
            unitary_cache: OnceLock::new(),
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[Vec<LatentGate>] {
        &self.layers
    }

    pub fn latent(&self, layer: usize, site: usize) -> &ComplexTensor {
        self.layers[layer][site].matrix()
    }

    pub fn seed_history(&self) -> &[u64] {
        &self.seed_history
    }

    /// New circuit with one latent replaced; the projection cache does not
    /// carry over.
    pub fn with_updated_latent(
        &self,
        layer: usize,
        site: usize,
        matrix: ComplexTensor,
    ) -> Result<Self> {
        if layer >= self.layers.len() || site >= self.n_sites - 1 {
            return Err(Error::Argument(format!(
                "no gate at layer {layer}, site {site}"
            )));
        }
        let mut layers = self.layers.clone();
        layers[layer][site] = LatentGate::new(matrix, site, layer)?;
        Ok(Self {
            n_sites: self.n_sites,
            layers,
            seed_history: self.seed_history.clone(),
            unitary_cache: OnceLock::new(),
        })
    }

    /// New circuit with a whole layer of latents replaced.
    pub fn with_updated_layer(&self, layer: usize, latents: Vec<ComplexTensor>) -> Result<Self> {
        if layer >= self.layers.len() {
            return Err(Error::Argument(format!("no layer {layer}")));
        }
        if latents.len() != self.n_sites - 1 {
            return Err(Error::Dimension(format!(
                "layer needs {} gates, got {}",
                self.n_sites - 1,
                latents.len()
            )));
        }
        let mut layers = self.layers.clone();
        layers[layer] = latents
            .into_iter()
            .enumerate()
            .map(|(site, m)| LatentGate::new(m, site, layer))
            .collect::<Result<_>>()?;
        Ok(Self {
            n_sites: self.n_sites,
            layers,
            seed_history: self.seed_history.clone(),
            unitary_cache: OnceLock::new(),
        })
    }

    /// Projected unitaries for every gate, layer-major. Computed once per
    /// circuit value.
    pub fn gate_unitaries(&self) -> Result<&[Vec<ComplexTensor>]> {
        if self.unitary_cache.get().is_none() {
            let mut all = Vec::with_capacity(self.layers.len());
            for layer in &self.layers {
                let mut us = Vec::with_capacity(layer.len());
                for gate in layer {
                    let u = project_to_unitary(gate.matrix()).map_err(|e| match e {
                        Error::DegenerateProjection(msg) => Error::DegenerateProjection(format!(
                            "layer {}, site {}: {msg}",
                            gate.layer(),
                            gate.site()
                        )),
                        other => other,
                    })?;
                    us.push(u);
                }
                all.push(us);
            }
            let _ = self.unitary_cache.set(all);
        }
        Ok(self.unitary_cache.get().expect("cache populated above"))
    }

    /// Run the circuit on an MPS: layers in order, sites ascending within
    /// each layer. Returns the evolved state and the summed discarded
    /// Schmidt weight.
    pub fn apply_circuit_mps(
        &self,
        psi0: &MatrixProductState,
        chi_max: usize,
        cutoff: f64,
    ) -> Result<(MatrixProductState, f64)> {
        if psi0.n_sites() != self.n_sites {
            return Err(Error::Argument(format!(
                "state has {} sites, circuit expects {}",
                psi0.n_sites(),
                self.n_sites
            )));
        }
        let unitaries = self.gate_unitaries()?;
        let mut psi = psi0.clone();
        let mut total = 0.0;
        for layer in unitaries {
            for (site, u) in layer.iter().enumerate() {
                total += psi.apply_two_qubit_gate_in_place(u, site, chi_max, cutoff)?;
            }
        }
        Ok((psi, total))
    }

    /// Dense oracle: run the circuit on a `2^N` statevector.
    pub fn apply_circuit_statevector(&self, v: &ComplexTensor) -> Result<ComplexTensor> {
        if self.n_sites > crate::mps::STATEVECTOR_SITE_LIMIT {
            return Err(Error::Capacity(format!(
                "dense circuit application limited to {} sites, circuit has {}",
                crate::mps::STATEVECTOR_SITE_LIMIT,
                self.n_sites
            )));
        }
        let dim = 1usize << self.n_sites;
        if v.shape() != [dim] {
            return Err(Error::Dimension(format!(
                "statevector must have shape [{dim}], got {:?}",
                v.shape()
            )));
        }
        let unitaries = self.gate_unitaries()?;
        let mut state = v.clone();
        for layer in unitaries {
            for (site, u) in layer.iter().enumerate() {
                state = apply_gate_statevector(&state, u, site, self.n_sites);
            }
        }
        Ok(state)
    }
}

/// Draw a latent through `build`, re-perturbing in the (measure-zero) event
/// the draw is numerically rank-deficient.
fn draw_full_rank_latent<F>(rng: &mut rand_chacha::ChaCha8Rng, build: F) -> Result<ComplexTensor>
where
    F: Fn(Vec<Complex64>) -> Result<ComplexTensor>,
{
    let mut matrix = build(complex_normal_vec(rng, 16))?;
    for _ in 0..64 {
        if latent_is_full_rank(&matrix)? {
            return Ok(matrix);
        }
        // nudge with a fresh draw at small amplitude
        let noise = complex_normal_vec(rng, 16);
        for (slot, n) in matrix.data_mut().iter_mut().zip(noise) {
            *slot += 1e-8 * n;
        }
    }
    Err(Error::Rank("could not draw a full-rank latent".into()))
}

/// Apply a 4×4 gate to qubits `(n, n+1)` of a dense statevector; site 1 is
/// the most significant bit.
pub fn apply_gate_statevector(
    state: &ComplexTensor,
    gate: &ComplexTensor,
    n: usize,
    n_sites: usize,
) -> ComplexTensor {
    let dim = state.len();
    let shift = n_sites - n - 2;
    let mut out = ComplexTensor::zeros(vec![dim]);
    for idx in 0..dim {
        let src_pair = (idx >> shift) & 0b11;
        let rest = idx & !(0b11 << shift);
        let amp = state.data()[idx];
        if amp == C_ZERO {
            continue;
        }
        for dst_pair in 0..4usize {
            let g = gate.get(&[dst_pair, src_pair]);
            if g != C_ZERO {
                out.data_mut()[rest | (dst_pair << shift)] += g * amp;
            }
        }
    }
    out
}

/// Real-parameter count convention of the circuit family: complex entries,
/// 16 per gate, `16·(N−1)·N_L`.
pub fn circuit_param_count(n_sites: usize, n_layers: usize) -> Result<u64> {
    if n_sites < 2 || n_layers == 0 {
        return Err(Error::Argument(format!(
            "invalid circuit size N={n_sites}, layers={n_layers}"
        )));
    }
    Ok(16 * (n_sites as u64 - 1) * n_layers as u64)
}

/// Circuit-to-MPS parameter ratio `r` and its one-layer value `r₀`.
pub fn compression_ratio(n_sites: usize, chi: usize, n_layers: usize) -> Result<(f64, f64)> {
    let mps = crate::mps::mps_param_count(n_sites, chi)? as f64;
    let r = circuit_param_count(n_sites, n_layers)? as f64 / mps;
    let r0 = circuit_param_count(n_sites, 1)? as f64 / mps;
    Ok((r, r0))
}

// ---------------------------------------------------------------------------
// checkpoint format

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GateRecord {
    site: usize,
    latent: Vec<(f64, f64)>,
    unitary: Vec<(f64, f64)>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointFile {
    version: u32,
    n_sites: usize,
    layers: Vec<Vec<GateRecord>>,
    layout: String,
    seed_history: Vec<u64>,
}

fn pairs(t: &ComplexTensor) -> Vec<(f64, f64)> {
    t.data().iter().map(|z| (z.re, z.im)).collect()
}

fn tensor_4x4(pairs: &[(f64, f64)], what: &str) -> Result<ComplexTensor> {
    if pairs.len() != 16 {
        return Err(Error::Format(format!(
            "{what} must hold 16 complex entries, got {}",
            pairs.len()
        )));
    }
    ComplexTensor::new(
        vec![4, 4],
        pairs.iter().map(|&(re, im)| Complex64::new(re, im)).collect(),
    )
}

pub fn save_checkpoint(circuit: &StairCircuit, path: &Path) -> Result<()> {
    let unitaries = circuit.gate_unitaries()?;
    let layers = circuit
        .layers()
        .iter()
        .zip(unitaries)
        .map(|(gates, us)| {
            gates
                .iter()
                .zip(us)
                .map(|(g, u)| GateRecord {
                    site: g.site(),
                    latent: pairs(g.matrix()),
                    unitary: pairs(u),
                })
                .collect()
        })
        .collect();
    let file = CheckpointFile {
        version: CHECKPOINT_VERSION,
        n_sites: circuit.n_sites(),
        layers,
        layout: LAYOUT_NAME.to_string(),
        seed_history: circuit.seed_history().to_vec(),
    };
    write_json_file(path, &file)
}

pub fn load_checkpoint(path: &Path) -> Result<StairCircuit> {
    let file: CheckpointFile = read_json_file(path)?;
    if file.version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!(
            "{}: checkpoint version {} is not supported (expected {CHECKPOINT_VERSION})",
            path.display(),
            file.version
        )));
    }
    if file.layout != LAYOUT_NAME {
        return Err(Error::Format(format!(
            "{}: unknown layout {:?} (expected {LAYOUT_NAME:?})",
            path.display(),
            file.layout
        )));
    }
    let mut latents = Vec::with_capacity(file.layers.len());
    for (li, layer) in file.layers.iter().enumerate() {
        let mut row = Vec::with_capacity(layer.len());
        for (si, rec) in layer.iter().enumerate() {
            if rec.site != si {
                return Err(Error::Format(format!(
                    "{}: layer {li} gate {si} is labelled site {}, expected ascending stair order",
                    path.display(),
                    rec.site
                )));
            }
            let latent = tensor_4x4(&rec.latent, "latent")?;
            let stored_u = tensor_4x4(&rec.unitary, "unitary")?;
            let projected = project_to_unitary(&latent)?;
            let diff = projected
                .add(&stored_u.scaled(Complex64::new(-1.0, 0.0)))?
                .max_abs();
            if diff > 1e-10 {
                return Err(Error::Format(format!(
                    "{}: layer {li}, site {si}: stored unitary deviates from the latent's projection by {diff:.3e}",
                    path.display()
                )));
            }
            row.push(latent);
        }
        latents.push(row);
    }
    StairCircuit::from_latent_layers(file.n_sites, latents, file.seed_history)
}
