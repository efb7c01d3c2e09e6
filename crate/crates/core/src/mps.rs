//! Open-boundary matrix product states for qubit chains.
//!
//! Site `n` holds a rank-3 tensor with legs `(left bond, physical, right
//! bond)`; the physical extent is always 2 and the outermost bonds have
//! extent 1. A mixed-canonical gauge is tracked through `center`: tensors
//! left of the center are column-isometric, tensors right of it are
//! row-isometric, so local quantities (Schmidt spectra, two-site updates)
//! never require contracting the whole chain.
//!
//! All public operations are pure: they return new states and leave their
//! inputs untouched.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{lq_positive, qr_positive, svd, truncated_svd, unitarity_defect};
use crate::rng::{complex_normal_vec, seeded_rng};
use crate::tensor::{contract, ComplexTensor, C_ONE};

/// Sites beyond this cannot be expanded to a dense statevector.
pub const STATEVECTOR_SITE_LIMIT: usize = 20;

/// Squared Schmidt coefficients below this are dropped from entropies.
const ENTROPY_WEIGHT_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone)]
pub struct MatrixProductState {
    site_tensors: Vec<ComplexTensor>,
    center: Option<usize>,
    max_bond: usize,
}

impl MatrixProductState {
    /// Build from explicit site tensors, validating the chain structure.
    pub fn from_tensors(site_tensors: Vec<ComplexTensor>, max_bond: usize) -> Result<Self> {
        if site_tensors.len() < 2 {
            return Err(Error::Argument(format!(
                "an MPS needs at least 2 sites, got {}",
                site_tensors.len()
            )));
        }
        if max_bond == 0 {
            return Err(Error::Argument("max_bond must be positive".into()));
        }
        let n = site_tensors.len();
        for (i, t) in site_tensors.iter().enumerate() {
            let s = t.shape();
            if t.rank() != 3 || s[1] != 2 {
                return Err(Error::Dimension(format!(
                    "site {i} must have shape (left, 2, right), got {s:?}"
                )));
            }
            t.check_finite()?;
        }
        if site_tensors[0].shape()[0] != 1 || site_tensors[n - 1].shape()[2] != 1 {
            return Err(Error::Dimension("boundary bonds must have extent 1".into()));
        }
        for i in 0..n - 1 {
            let r = site_tensors[i].shape()[2];
            let l = site_tensors[i + 1].shape()[0];
            if r != l {
                return Err(Error::Dimension(format!(
                    "bond mismatch between sites {i} and {}: {r} vs {l}",
                    i + 1
                )));
            }
        }
        Ok(Self {
            site_tensors,
            center: None,
            max_bond,
        })
    }

    /// Computational-basis product state `|b_1 b_2 … b_N⟩`.
    pub fn product_state(bits: &[u8]) -> Result<Self> {
        if bits.len() < 2 {
            return Err(Error::Argument(format!(
                "product state needs at least 2 sites, got {}",
                bits.len()
            )));
        }
        let mut tensors = Vec::with_capacity(bits.len());
        for &b in bits {
            if b > 1 {
                return Err(Error::Argument(format!("bit value {b} is not 0 or 1")));
            }
            let mut t = ComplexTensor::zeros(vec![1, 2, 1]);
            t.data_mut()[b as usize] = C_ONE;
            tensors.push(t);
        }
        let mut psi = Self::from_tensors(tensors, 1)?;
        psi.center = Some(0);
        Ok(psi)
    }

    /// All-zeros reference state `|0…0⟩`.
    pub fn all_zeros(n_sites: usize) -> Result<Self> {
        Self::product_state(&vec![0u8; n_sites])
    }

    /// GHZ state `(|0…0⟩ + |1…1⟩)/√2`.
    pub fn ghz_state(n_sites: usize) -> Result<Self> {
        if n_sites < 2 {
            return Err(Error::Argument("GHZ needs at least 2 sites".into()));
        }
        let w = Complex64::new(1.0 / 2.0_f64.sqrt(), 0.0);
        let mut first = ComplexTensor::zeros(vec![1, 2, 2]);
        first.data_mut()[0] = w; // s=0 -> bond 0
        first.data_mut()[3] = w; // s=1 -> bond 1
        let mut mid = ComplexTensor::zeros(vec![2, 2, 2]);
        mid.data_mut()[0] = C_ONE; // (0,0,0)
        mid.data_mut()[7] = C_ONE; // (1,1,1)
        let mut last = ComplexTensor::zeros(vec![2, 2, 1]);
        last.data_mut()[0] = C_ONE; // (0,0)
        last.data_mut()[3] = C_ONE; // (1,1)
        let mut tensors = vec![first];
        for _ in 1..n_sites - 1 {
            tensors.push(mid.clone());
        }
        tensors.push(last);
        let mut psi = Self::from_tensors(tensors, 2)?;
        psi.center = Some(0);
        Ok(psi)
    }

    /// Factorize a dense statevector (site 1 most significant) into an
    /// MPS by successive truncated SVDs. Returns the state and the total
    /// discarded Schmidt weight.
    pub fn from_statevector(
        vector: &ComplexTensor,
        chi_max: usize,
        cutoff: f64,
    ) -> Result<(Self, f64)> {
        let dim = vector.len();
        if vector.rank() != 1 || dim < 4 || !dim.is_power_of_two() {
            return Err(Error::Argument(format!(
                "statevector must be a rank-1 power-of-two vector of at least 4 amplitudes, \
                 got shape {:?}",
                vector.shape()
            )));
        }
        let n_sites = dim.trailing_zeros() as usize;
        let mut rest = dim / 2;
        let mut m = vector.reshape(vec![2, rest])?;
        let mut tensors = Vec::with_capacity(n_sites);
        let mut l = 1usize;
        let mut trunc = 0.0;
        for _ in 0..n_sites - 1 {
            let f = truncated_svd(&m, chi_max, cutoff)?;
            let k = f.s.len();
            tensors.push(f.u.into_reshaped(vec![l, 2, k])?);
            trunc += f.truncation_error;
            let mut sv = f.vh;
            for (i, &sigma) in f.s.iter().enumerate() {
                for j in 0..rest {
                    sv.data_mut()[i * rest + j] *= sigma;
                }
            }
            rest /= 2;
            m = sv.into_reshaped(vec![k * 2, rest])?;
            l = k;
        }
        tensors.push(m.into_reshaped(vec![l, 2, 1])?);
        let mut psi = Self::from_tensors(tensors, chi_max.max(1))?;
        psi.center = Some(n_sites - 1);
        Ok((psi, trunc))
    }

    /// Random MPS with i.i.d. complex-normal entries, bond extents
    /// `min(chi, 2^n, 2^{N−n})`, normalized. Deterministic in `seed`.
    pub fn random_mps(n_sites: usize, chi: usize, seed: u64) -> Result<Self> {
        if n_sites < 2 {
            return Err(Error::Argument("random MPS needs at least 2 sites".into()));
        }
        if chi == 0 {
            return Err(Error::Argument("bond cap must be positive".into()));
        }
        let mut rng = seeded_rng(seed);
        let mut tensors = Vec::with_capacity(n_sites);
        for n in 0..n_sites {
            let l = natural_bond(chi, n, n_sites);
            let r = natural_bond(chi, n + 1, n_sites);
            let data = complex_normal_vec(&mut rng, l * 2 * r);
            tensors.push(ComplexTensor::new(vec![l, 2, r], data)?);
        }
        let psi = Self::from_tensors(tensors, chi)?;
        psi.normalized()
    }

    pub fn n_sites(&self) -> usize {
        self.site_tensors.len()
    }

    pub fn site(&self, n: usize) -> &ComplexTensor {
        &self.site_tensors[n]
    }

    pub fn site_tensors(&self) -> &[ComplexTensor] {
        &self.site_tensors
    }

    pub fn into_tensors(self) -> Vec<ComplexTensor> {
        self.site_tensors
    }

    pub fn center(&self) -> Option<usize> {
        self.center
    }

    pub fn max_bond(&self) -> usize {
        self.max_bond
    }

    /// Extent of internal bond `n` (1-based: bond `n` sits between sites
    /// `n−1` and `n`).
    pub fn bond_dim(&self, n: usize) -> usize {
        assert!(n >= 1 && n < self.n_sites());
        self.site_tensors[n].shape()[0]
    }

    /// Largest internal bond extent.
    pub fn max_internal_bond(&self) -> usize {
        (1..self.n_sites()).map(|n| self.bond_dim(n)).max().unwrap_or(1)
    }

    /// ⟨ψ|ψ⟩^(1/2).
    pub fn norm(&self) -> Result<f64> {
        if let Some(c) = self.center {
            return Ok(self.site_tensors[c].frobenius_norm());
        }
        let ip = overlap(self, self)?;
        Ok(ip.re.max(0.0).sqrt())
    }

    /// Same state scaled to unit norm, canonical center established.
    pub fn normalized(&self) -> Result<Self> {
        let mut out = self.clone();
        let k = out.center.unwrap_or(0);
        out.gauge_to(k)?;
        let nrm = out.site_tensors[k].frobenius_norm();
        if nrm < 1e-300 || !nrm.is_finite() {
            return Err(Error::State(format!("cannot normalize state with norm {nrm}")));
        }
        let inv = Complex64::new(1.0 / nrm, 0.0);
        out.site_tensors[k] = out.site_tensors[k].scaled(inv);
        Ok(out)
    }

    /// Mixed-canonical form with the given center. The state itself is
    /// unchanged (exact gauge transformation).
    pub fn canonicalize(&self, center: usize) -> Result<Self> {
        if center >= self.n_sites() {
            return Err(Error::Argument(format!(
                "center {center} out of range for {} sites",
                self.n_sites()
            )));
        }
        let mut out = self.clone();
        out.gauge_to(center)?;
        Ok(out)
    }

    /// In-place gauge move. Uses single-site QR/LQ steps when the current
    /// center is known, otherwise a full two-sided sweep.
    pub(crate) fn gauge_to(&mut self, k: usize) -> Result<()> {
        let n = self.n_sites();
        assert!(k < n);
        match self.center {
            Some(c) if c == k => Ok(()),
            Some(c) if c < k => {
                for site in c..k {
                    self.push_center_right(site)?;
                }
                self.center = Some(k);
                Ok(())
            }
            Some(c) => {
                for site in (k + 1..=c).rev() {
                    self.push_center_left(site)?;
                }
                self.center = Some(k);
                Ok(())
            }
            None => {
                for site in 0..k {
                    self.push_center_right(site)?;
                }
                for site in (k + 1..n).rev() {
                    self.push_center_left(site)?;
                }
                self.center = Some(k);
                Ok(())
            }
        }
    }

    /// QR-split site `c`, absorbing the triangular factor into site `c+1`.
    fn push_center_right(&mut self, c: usize) -> Result<()> {
        let s = self.site_tensors[c].shape().to_vec();
        let m = self.site_tensors[c].reshape(vec![s[0] * 2, s[2]])?;
        let (q, r) = qr_positive(&m)?;
        let k = q.shape()[1];
        self.site_tensors[c] = q.into_reshaped(vec![s[0], 2, k])?;
        self.site_tensors[c + 1] = contract(&r, &self.site_tensors[c + 1], &[(1, 0)])?;
        Ok(())
    }

    /// LQ-split site `c`, absorbing the triangular factor into site `c−1`.
    fn push_center_left(&mut self, c: usize) -> Result<()> {
        let s = self.site_tensors[c].shape().to_vec();
        let m = self.site_tensors[c].reshape(vec![s[0], 2 * s[2]])?;
        let (l, q) = lq_positive(&m)?;
        let k = q.shape()[0];
        self.site_tensors[c] = q.into_reshaped(vec![k, 2, s[2]])?;
        self.site_tensors[c - 1] = contract(&self.site_tensors[c - 1], &l, &[(2, 0)])?;
        Ok(())
    }

    /// Schmidt entropy across bond `n` (1-based, between sites `n−1` and
    /// `n`). Requires a normalized state.
    pub fn bond_entropy(&self, n: usize) -> Result<f64> {
        self.check_bond_index(n)?;
        self.check_normalized()?;
        let gauged = self.canonicalize(n)?;
        let s = gauged.site_tensors[n].shape().to_vec();
        let m = gauged.site_tensors[n].reshape(vec![s[0], 2 * s[2]])?;
        let f = svd(&m)?;
        Ok(schmidt_entropy(&f.s))
    }

    /// All bond entropies `S_1 … S_{N−1}` in one canonical sweep.
    pub fn bond_entropies(&self) -> Result<Vec<f64>> {
        self.check_normalized()?;
        let mut work = self.canonicalize(0)?;
        let n = work.n_sites();
        let mut out = Vec::with_capacity(n - 1);
        for site in 0..n - 1 {
            let s = work.site_tensors[site].shape().to_vec();
            let m = work.site_tensors[site].reshape(vec![s[0] * 2, s[2]])?;
            let f = svd(&m)?;
            out.push(schmidt_entropy(&f.s));
            let k = f.s.len();
            work.site_tensors[site] = f.u.into_reshaped(vec![s[0], 2, k])?;
            let mut sv = f.vh;
            for (i, &sigma) in f.s.iter().enumerate() {
                let row = sv.shape()[1];
                for j in 0..row {
                    sv.data_mut()[i * row + j] *= sigma;
                }
            }
            work.site_tensors[site + 1] = contract(&sv, &work.site_tensors[site + 1], &[(1, 0)])?;
        }
        Ok(out)
    }

    /// Mean of all bond entropies.
    pub fn average_entropy(&self) -> Result<f64> {
        let s = self.bond_entropies()?;
        Ok(s.iter().sum::<f64>() / s.len() as f64)
    }

    /// Apply a 4×4 unitary to sites `(n, n+1)`, splitting with a truncated
    /// SVD. Returns the updated state (center at `n+1`) and the discarded
    /// Schmidt weight.
    pub fn apply_two_qubit_gate(
        &self,
        gate: &ComplexTensor,
        n: usize,
        chi_max: usize,
        cutoff: f64,
    ) -> Result<(Self, f64)> {
        let mut out = self.clone();
        let err = out.apply_two_qubit_gate_in_place(gate, n, chi_max, cutoff)?;
        Ok((out, err))
    }

    pub(crate) fn apply_two_qubit_gate_in_place(
        &mut self,
        gate: &ComplexTensor,
        n: usize,
        chi_max: usize,
        cutoff: f64,
    ) -> Result<f64> {
        if n + 1 >= self.n_sites() {
            return Err(Error::Argument(format!(
                "gate site {n} out of range for {} sites",
                self.n_sites()
            )));
        }
        if gate.shape() != [4, 4] {
            return Err(Error::Gate(format!(
                "two-qubit gate must be 4×4, got {:?}",
                gate.shape()
            )));
        }
        let defect = unitarity_defect(gate)?;
        if defect > 1e-10 {
            return Err(Error::Gate(format!(
                "gate is not unitary (defect {defect:.3e})"
            )));
        }
        self.gauge_to(n)?;
        let theta = self.two_site_block(n)?;
        let theta = apply_gate_to_block(gate, &theta)?;
        let err = self.split_two_site_block(n, theta, chi_max, cutoff)?;
        Ok(err)
    }

    /// Contract sites `n` and `n+1` into a block with legs `(l, s, t, r)`.
    pub(crate) fn two_site_block(&self, n: usize) -> Result<ComplexTensor> {
        contract(&self.site_tensors[n], &self.site_tensors[n + 1], &[(2, 0)])
    }

    /// Split a two-site block back into sites `n`, `n+1` with a truncated
    /// SVD; center lands on `n+1`. Returns the discarded weight.
    pub(crate) fn split_two_site_block(
        &mut self,
        n: usize,
        theta: ComplexTensor,
        chi_max: usize,
        cutoff: f64,
    ) -> Result<f64> {
        let shape = theta.shape().to_vec();
        let (l, r) = (shape[0], shape[3]);
        let m = theta.into_reshaped(vec![l * 2, 2 * r])?;
        let f = truncated_svd(&m, chi_max, cutoff)?;
        let k = f.s.len();
        self.site_tensors[n] = f.u.into_reshaped(vec![l, 2, k])?;
        let mut sv = f.vh;
        for (i, &sigma) in f.s.iter().enumerate() {
            for j in 0..2 * r {
                sv.data_mut()[i * 2 * r + j] *= sigma;
            }
        }
        self.site_tensors[n + 1] = sv.into_reshaped(vec![k, 2, r])?;
        self.center = Some(n + 1);
        self.max_bond = self.max_bond.max(k);
        Ok(f.truncation_error)
    }

    /// Install split factors at sites `n`, `n+1` after an external split.
    /// `center` names the factor carrying the Schmidt weights (`n` or
    /// `n+1`).
    pub(crate) fn set_pair(
        &mut self,
        n: usize,
        left: ComplexTensor,
        right: ComplexTensor,
        center: usize,
    ) -> Result<()> {
        debug_assert!(center == n || center == n + 1);
        if left.rank() != 3 || right.rank() != 3 || left.shape()[2] != right.shape()[0] {
            return Err(Error::Dimension(format!(
                "split factors {:?} / {:?} do not join at sites {n}, {}",
                left.shape(),
                right.shape(),
                n + 1
            )));
        }
        let k = left.shape()[2];
        self.site_tensors[n] = left;
        self.site_tensors[n + 1] = right;
        self.center = Some(center);
        self.max_bond = self.max_bond.max(k);
        Ok(())
    }

    /// Dense amplitudes, site 1 most significant. Guarded to N ≤ 20.
    pub fn to_statevector(&self) -> Result<ComplexTensor> {
        let n = self.n_sites();
        if n > STATEVECTOR_SITE_LIMIT {
            return Err(Error::Capacity(format!(
                "statevector expansion limited to {STATEVECTOR_SITE_LIMIT} sites, state has {n}"
            )));
        }
        let first = &self.site_tensors[0];
        let mut acc = first.reshape(vec![2, first.shape()[2]])?;
        for t in &self.site_tensors[1..] {
            let d = acc.shape()[0];
            let r = t.shape()[2];
            acc = contract(&acc, t, &[(1, 0)])?.into_reshaped(vec![d * 2, r])?;
        }
        acc.into_reshaped(vec![1usize << n])
    }

    fn check_bond_index(&self, n: usize) -> Result<()> {
        if n == 0 || n >= self.n_sites() {
            return Err(Error::Argument(format!(
                "bond index {n} out of range 1..{}",
                self.n_sites() - 1
            )));
        }
        Ok(())
    }

    pub(crate) fn check_normalized(&self) -> Result<()> {
        let nrm = self.norm()?;
        if (nrm - 1.0).abs() > 1e-6 {
            return Err(Error::State(format!(
                "entropy requires a normalized state, norm is {nrm:.9}"
            )));
        }
        Ok(())
    }
}

/// ⟨bra|ket⟩ by a left-to-right transfer-matrix contraction, O(N·χ³).
pub fn overlap(bra: &MatrixProductState, ket: &MatrixProductState) -> Result<Complex64> {
    if bra.n_sites() != ket.n_sites() {
        return Err(Error::Argument(format!(
            "overlap of chains with {} and {} sites",
            bra.n_sites(),
            ket.n_sites()
        )));
    }
    let mut env = ComplexTensor::identity(1);
    for (b, k) in bra.site_tensors().iter().zip(ket.site_tensors()) {
        let t = contract(&env, k, &[(1, 0)])?; // (bra_bond, s, ket_bond')
        env = contract(&b.conj(), &t, &[(0, 0), (1, 1)])?; // (bra_bond', ket_bond')
    }
    env.scalar()
}

/// Number of real parameters in an MPS of `n_sites` qubits at uniform
/// internal bond `chi`: `4χ + 2(N−2)χ²`.
pub fn mps_param_count(n_sites: usize, chi: usize) -> Result<u64> {
    if n_sites < 2 {
        return Err(Error::Argument("parameter count needs N ≥ 2".into()));
    }
    if chi == 0 {
        return Err(Error::Argument("bond dimension must be positive".into()));
    }
    let chi = chi as u64;
    Ok(4 * chi + 2 * (n_sites as u64 - 2) * chi * chi)
}

/// Bond extent `min(chi, 2^n, 2^{N−n})` without overflowing the shifts.
fn natural_bond(chi: usize, n: usize, n_sites: usize) -> usize {
    let e = n.min(n_sites - n);
    if e as u32 >= usize::BITS - 1 {
        chi
    } else {
        chi.min(1usize << e)
    }
}

/// −Σ λ² ln λ² over the normalized squared Schmidt spectrum.
fn schmidt_entropy(sigmas: &[f64]) -> f64 {
    let total: f64 = sigmas.iter().map(|s| s * s).sum();
    if total <= 0.0 {
        return 0.0;
    }
    let mut acc = 0.0;
    for s in sigmas {
        let w = s * s / total;
        if w >= ENTROPY_WEIGHT_FLOOR {
            acc -= w * w.ln();
        }
    }
    acc
}

/// Apply a 4×4 gate to a two-site block `(l, s, t, r)`.
pub(crate) fn apply_gate_to_block(
    gate: &ComplexTensor,
    theta: &ComplexTensor,
) -> Result<ComplexTensor> {
    let g = gate.reshape(vec![2, 2, 2, 2])?;
    // (p,q,s,t) × (l,s,t,r) over (s,t) -> (p,q,l,r) -> (l,p,q,r)
    contract(&g, theta, &[(2, 1), (3, 2)])?.permute(&[2, 0, 1, 3])
}

/// Apply the adjoint of a 4×4 gate to a two-site block.
pub(crate) fn apply_gate_adjoint_to_block(
    gate: &ComplexTensor,
    theta: &ComplexTensor,
) -> Result<ComplexTensor> {
    let gh = crate::linalg::dagger(gate)?;
    apply_gate_to_block(&gh, theta)
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dagger;
    use crate::tensor::C_ZERO;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() < tol, "{a} vs {b}");
    }

    /// Dense oracle: apply a 4×4 gate to qubits (n, n+1) of a statevector
    /// with site 1 most significant.
    fn apply_gate_dense(
        state: &ComplexTensor,
        gate: &ComplexTensor,
        n: usize,
        n_sites: usize,
    ) -> ComplexTensor {
        let dim = state.len();
        let mut out = ComplexTensor::zeros(vec![dim]);
        let shift = n_sites - n - 2; // bits below the acted pair
        for idx in 0..dim {
            let pair = (idx >> shift) & 0b11;
            let rest = idx & !(0b11 << shift);
            let mut acc = C_ZERO;
            for src in 0..4usize {
                let g = gate.get(&[pair, src]);
                if g != C_ZERO {
                    acc += g * state.data()[rest | (src << shift)];
                }
            }
            out.data_mut()[idx] = acc;
        }
        out
    }

    fn statevector_overlap(a: &ComplexTensor, b: &ComplexTensor) -> Complex64 {
        a.data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| x.conj() * y)
            .sum()
    }

    #[test]
    fn product_state_amplitudes() {
        let sv = MatrixProductState::product_state(&[0, 0])
            .unwrap()
            .to_statevector()
            .unwrap();
        assert_eq!(sv.data()[0], C_ONE);
        assert!(sv.data()[1..].iter().all(|&z| z == C_ZERO));

        let sv = MatrixProductState::product_state(&[0, 1])
            .unwrap()
            .to_statevector()
            .unwrap();
        assert_eq!(sv.data()[1], C_ONE);

        let sv = MatrixProductState::product_state(&[0, 1, 0])
            .unwrap()
            .to_statevector()
            .unwrap();
        assert_eq!(sv.data()[2], C_ONE);
    }

    #[test]
    fn product_state_has_zero_entropy() {
        let psi = MatrixProductState::product_state(&[1, 0, 1, 1]).unwrap();
        for s in psi.bond_entropies().unwrap() {
            assert!(s.abs() < 1e-14);
        }
        assert!(psi.average_entropy().unwrap().abs() < 1e-14);
    }

    #[test]
    fn product_state_rejects_short_or_bad_bits() {
        assert!(MatrixProductState::product_state(&[0]).is_err());
        assert!(MatrixProductState::product_state(&[0, 2]).is_err());
    }

    #[test]
    fn random_mps_chi_one_is_product() {
        let psi = MatrixProductState::random_mps(8, 1, 5).unwrap();
        for s in psi.bond_entropies().unwrap() {
            assert!(s.abs() < 1e-12);
        }
    }

    #[test]
    fn random_mps_is_normalized_and_deterministic() {
        let a = MatrixProductState::random_mps(8, 4, 99).unwrap();
        assert_close(a.norm().unwrap(), 1.0, 1e-10);
        let b = MatrixProductState::random_mps(8, 4, 99).unwrap();
        let c = MatrixProductState::random_mps(8, 4, 100).unwrap();
        assert_close(overlap(&a, &b).unwrap().norm(), 1.0, 1e-10);
        assert!(overlap(&a, &c).unwrap().norm() < 0.999);
    }

    #[test]
    fn random_mps_bond_profile() {
        let psi = MatrixProductState::random_mps(8, 4, 1).unwrap();
        let dims: Vec<usize> = (1..8).map(|n| psi.bond_dim(n)).collect();
        assert_eq!(dims, vec![2, 4, 4, 4, 4, 4, 2]);
    }

    #[test]
    fn random_mps_midchain_entropy_bounded() {
        let psi = MatrixProductState::random_mps(48, 32, 7).unwrap();
        let s24 = psi.bond_entropy(24).unwrap();
        assert!(s24 > 0.0 && s24 <= 32f64.ln() + 1e-12, "S_24 = {s24}");
    }

    #[test]
    fn canonicalize_preserves_state() {
        let psi = MatrixProductState::random_mps(8, 4, 3).unwrap();
        let sv = psi.to_statevector().unwrap();
        let can = psi.canonicalize(3).unwrap();
        let sv2 = can.to_statevector().unwrap();
        let ip = statevector_overlap(&sv, &sv2);
        assert_close(ip.norm(), 1.0, 1e-10);
        // positive-diagonal gauge makes a repeat canonicalization a no-op
        let again = can.canonicalize(3).unwrap();
        for (a, b) in can.site_tensors().iter().zip(again.site_tensors()) {
            let d = a.add(&b.scaled(Complex64::new(-1.0, 0.0))).unwrap();
            assert!(d.max_abs() < 1e-10);
        }
        let e1 = can.bond_entropies().unwrap();
        let e2 = again.bond_entropies().unwrap();
        for (x, y) in e1.iter().zip(&e2) {
            assert_close(*x, *y, 1e-12);
        }
    }

    #[test]
    fn canonicalize_sets_isometries() {
        let psi = MatrixProductState::random_mps(7, 4, 11).unwrap();
        let k = 3;
        let can = psi.canonicalize(k).unwrap();
        for n in 0..k {
            let t = can.site(n);
            let s = t.shape().to_vec();
            let m = t.reshape(vec![s[0] * 2, s[2]]).unwrap();
            assert!(unitarity_defect(&m).unwrap() < 1e-10, "site {n} not left-isometric");
        }
        for n in k + 1..7 {
            let t = can.site(n);
            let s = t.shape().to_vec();
            let m = t.reshape(vec![s[0], 2 * s[2]]).unwrap();
            assert!(
                unitarity_defect(&dagger(&m).unwrap()).unwrap() < 1e-10,
                "site {n} not right-isometric"
            );
        }
    }

    #[test]
    fn overlap_matches_statevector_oracle() {
        let a = MatrixProductState::random_mps(6, 4, 17).unwrap();
        let b = MatrixProductState::random_mps(6, 4, 18).unwrap();
        let fast = overlap(&a, &b).unwrap();
        let dense = statevector_overlap(&a.to_statevector().unwrap(), &b.to_statevector().unwrap());
        assert!((fast - dense).norm() < 1e-10);
        assert_close(overlap(&a, &a).unwrap().re, 1.0, 1e-10);
        let p0 = MatrixProductState::product_state(&[0, 0]).unwrap();
        let p1 = MatrixProductState::product_state(&[0, 1]).unwrap();
        assert!(overlap(&p0, &p1).unwrap().norm() < 1e-14);
    }

    #[test]
    fn overlap_rejects_length_mismatch() {
        let a = MatrixProductState::random_mps(4, 2, 0).unwrap();
        let b = MatrixProductState::random_mps(5, 2, 0).unwrap();
        assert!(overlap(&a, &b).is_err());
    }

    #[test]
    fn bell_state_entropy_is_ln2() {
        // CNOT·(H⊗I)|00⟩ = (|00⟩+|11⟩)/√2
        let psi = MatrixProductState::product_state(&[0, 0]).unwrap();
        let (psi, e1) = psi
            .apply_two_qubit_gate(&test_gates::hadamard_left(), 0, 4, 0.0)
            .unwrap();
        let (bell, e2) = psi.apply_two_qubit_gate(&test_gates::cnot(), 0, 4, 0.0).unwrap();
        assert!(e1 == 0.0 && e2 == 0.0);
        let sv = bell.to_statevector().unwrap();
        let w = 1.0 / 2.0_f64.sqrt();
        assert!((sv.data()[0] - Complex64::new(w, 0.0)).norm() < 1e-12);
        assert!((sv.data()[3] - Complex64::new(w, 0.0)).norm() < 1e-12);
        assert_close(bell.bond_entropy(1).unwrap(), 2f64.ln(), 1e-10);
        assert_close(bell.average_entropy().unwrap(), 2f64.ln(), 1e-10);
    }

    #[test]
    fn ghz_entropies_are_ln2_on_every_bond() {
        let psi = MatrixProductState::ghz_state(6).unwrap();
        assert_close(psi.norm().unwrap(), 1.0, 1e-12);
        for s in psi.bond_entropies().unwrap() {
            assert_close(s, 2f64.ln(), 1e-10);
        }
        assert_close(psi.average_entropy().unwrap(), 2f64.ln(), 1e-10);
    }

    #[test]
    fn bond_entropy_matches_dense_schmidt() {
        let psi = MatrixProductState::random_mps(6, 4, 23).unwrap();
        let sv = psi.to_statevector().unwrap();
        for n in 1..6 {
            let rows = 1usize << n;
            let cols = 1usize << (6 - n);
            let m = sv.reshape(vec![rows, cols]).unwrap();
            let f = svd(&m).unwrap();
            let dense: f64 = f
                .s
                .iter()
                .map(|s| s * s)
                .filter(|&w| w >= 1e-15)
                .map(|w| -w * w.ln())
                .sum();
            assert_close(psi.bond_entropy(n).unwrap(), dense, 1e-10);
        }
    }

    #[test]
    fn bond_entropy_rejects_unnormalized() {
        let psi = MatrixProductState::random_mps(4, 2, 2).unwrap();
        let scaled: Vec<ComplexTensor> = psi
            .site_tensors()
            .iter()
            .map(|t| t.scaled(Complex64::new(1.01, 0.0)))
            .collect();
        let bad = MatrixProductState::from_tensors(scaled, 2).unwrap();
        assert!(matches!(bad.bond_entropy(1), Err(Error::State(_))));
    }

    #[test]
    fn identity_gate_is_a_no_op() {
        let psi = MatrixProductState::random_mps(5, 4, 31).unwrap();
        let (out, err) = psi
            .apply_two_qubit_gate(&ComplexTensor::identity(4), 2, 16, 0.0)
            .unwrap();
        assert_eq!(err, 0.0);
        assert_close(overlap(&psi, &out).unwrap().norm(), 1.0, 1e-12);
    }

    #[test]
    fn gate_application_matches_dense_oracle() {
        let psi = MatrixProductState::random_mps(6, 4, 37).unwrap();
        let gate = test_gates::random_unitary(71);
        for n in 0..5 {
            let (out, _) = psi.apply_two_qubit_gate(&gate, n, 16, 0.0).unwrap();
            let dense = apply_gate_dense(&psi.to_statevector().unwrap(), &gate, n, 6);
            let got = out.to_statevector().unwrap();
            let diff: f64 = got
                .data()
                .iter()
                .zip(dense.data())
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(diff < 1e-10, "site {n}: dense mismatch {diff}");
        }
    }

    #[test]
    fn non_unitary_gate_is_rejected() {
        let psi = MatrixProductState::random_mps(4, 2, 5).unwrap();
        let bad = ComplexTensor::identity(4).scaled(Complex64::new(1.5, 0.0));
        assert!(matches!(
            psi.apply_two_qubit_gate(&bad, 0, 8, 0.0),
            Err(Error::Gate(_))
        ));
    }

    #[test]
    fn unitary_gate_preserves_norm_without_truncation() {
        let psi = MatrixProductState::random_mps(6, 4, 43).unwrap();
        let gate = test_gates::random_unitary(44);
        let (out, err) = psi.apply_two_qubit_gate(&gate, 2, 64, 0.0).unwrap();
        assert_eq!(err, 0.0);
        assert_close(out.norm().unwrap(), 1.0, 1e-10);
    }

    #[test]
    fn truncation_error_is_monotone_in_chi() {
        let psi = MatrixProductState::random_mps(6, 4, 53).unwrap();
        let gate = test_gates::random_unitary(54);
        let mut prev = f64::INFINITY;
        for chi in 1..=8 {
            let (_, err) = psi.apply_two_qubit_gate(&gate, 2, chi, 0.0).unwrap();
            assert!(err <= prev + 1e-15, "chi={chi}: {err} > {prev}");
            prev = err;
        }
    }

    #[test]
    fn entropy_capped_by_bond_logarithm() {
        let psi = MatrixProductState::random_mps(9, 3, 61).unwrap();
        for n in 1..9 {
            let s = psi.bond_entropy(n).unwrap();
            let cap = (psi.bond_dim(n) as f64).ln();
            assert!(s <= cap + 1e-12, "bond {n}: S={s} > ln χ={cap}");
        }
    }

    #[test]
    fn statevector_guard_at_21_sites() {
        let psi = MatrixProductState::product_state(&vec![0u8; 21]).unwrap();
        assert!(matches!(psi.to_statevector(), Err(Error::Capacity(_))));
    }

    #[test]
    fn statevector_norm_of_random_mps() {
        let psi = MatrixProductState::random_mps(10, 8, 67).unwrap();
        let sv = psi.to_statevector().unwrap();
        assert_close(sv.frobenius_norm(), 1.0, 1e-10);
    }

    #[test]
    fn statevector_factorization_round_trips() {
        let mut rng = crate::rng::seeded_rng(301);
        let data = crate::rng::complex_normal_vec(&mut rng, 64);
        let norm = data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let v = ComplexTensor::new(vec![64], data)
            .unwrap()
            .scaled(Complex64::new(1.0 / norm, 0.0));
        let (psi, trunc) = MatrixProductState::from_statevector(&v, 64, 0.0).unwrap();
        assert!(trunc < 1e-14);
        assert_close(psi.norm().unwrap(), 1.0, 1e-12);
        let back = psi.to_statevector().unwrap();
        for (a, b) in v.data().iter().zip(back.data()) {
            assert!((a - b).norm() < 1e-12);
        }
        // truncating to a product state discards weight but tracks it
        let (trimmed, lost) = MatrixProductState::from_statevector(&v, 1, 0.0).unwrap();
        assert!(lost > 1e-3);
        assert_close(trimmed.norm().unwrap().powi(2) + lost, 1.0, 1e-10);
    }

    #[test]
    fn statevector_factorization_of_ghz_needs_bond_two() {
        let ghz = MatrixProductState::ghz_state(5).unwrap();
        let v = ghz.to_statevector().unwrap();
        let (psi, trunc) = MatrixProductState::from_statevector(&v, 16, 1e-14).unwrap();
        assert!(trunc < 1e-14);
        assert_eq!(psi.max_internal_bond(), 2);
        assert!((overlap(&ghz, &psi).unwrap().norm() - 1.0).abs() < 1e-12);
        assert!(MatrixProductState::from_statevector(
            &ComplexTensor::zeros(vec![6]),
            4,
            0.0
        )
        .is_err());
    }

    #[test]
    fn param_count_formula() {
        assert_eq!(mps_param_count(2, 1).unwrap(), 4);
        assert_eq!(mps_param_count(48, 64).unwrap(), 377_088);
        assert_eq!(mps_param_count(48, 32).unwrap(), 94_336);
        assert!(mps_param_count(1, 4).is_err());
        assert!(mps_param_count(4, 0).is_err());
    }

    #[test]
    fn gauge_invariance_of_overlap_and_entropy() {
        let psi = MatrixProductState::random_mps(7, 4, 73).unwrap();
        let phi = MatrixProductState::random_mps(7, 4, 74).unwrap();
        let base = overlap(&phi, &psi).unwrap();
        let base_s = psi.bond_entropies().unwrap();
        for k in [0usize, 2, 6] {
            let g = psi.canonicalize(k).unwrap();
            assert!((overlap(&phi, &g).unwrap() - base).norm() < 1e-10);
            let s = g.bond_entropies().unwrap();
            for (a, b) in s.iter().zip(&base_s) {
                assert_close(*a, *b, 1e-10);
            }
        }
    }
}
