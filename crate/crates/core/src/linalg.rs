//! Matrix factorizations and iterative eigensolvers on [`ComplexTensor`].
//!
//! Wraps LAPACK (through `ndarray-linalg`) for SVD, QR/LQ and Hermitian
//! eigendecomposition, and adds the pieces the rest of the crate is built
//! on: rank-capped SVD splits with an explicit discarded weight, the polar
//! projection onto the unitary group, a Lanczos ground-state solver, and a
//! central-difference gradient oracle.

use ndarray::Array2;
use ndarray_linalg::{Eigh, JobSvd, QR, SVDDC, UPLO};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tensor::{contract, ComplexTensor, C_ONE, C_ZERO};

/// Thin SVD `m = u · diag(s) · vh`, possibly rank-truncated.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    /// Column-isometric left factor.
    pub u: ComplexTensor,
    /// Singular values, descending, non-negative.
    pub s: Vec<f64>,
    /// Row-isometric right factor (already adjoint).
    pub vh: ComplexTensor,
    /// Sum of squared discarded singular values.
    pub truncation_error: f64,
}

/// Full (thin) SVD of a matrix tensor.
pub fn svd(m: &ComplexTensor) -> Result<SvdFactors> {
    let a = m.to_array2()?;
    let (u, s, vh) = a.svddc(JobSvd::Some).map_err(|e| {
        Error::Numerical(format!(
            "SVD did not converge (input Frobenius norm {:.6e}): {e}",
            m.frobenius_norm()
        ))
    })?;
    let u = u.ok_or_else(|| Error::Numerical("SVD returned no left factor".into()))?;
    let vh = vh.ok_or_else(|| Error::Numerical("SVD returned no right factor".into()))?;
    Ok(SvdFactors {
        u: ComplexTensor::from_array2(u),
        s: s.to_vec(),
        vh: ComplexTensor::from_array2(vh),
        truncation_error: 0.0,
    })
}

/// SVD truncated to at most `chi_max` values, also dropping anything below
/// `cutoff` relative to the largest value. Keeps at least one value and
/// reports the discarded weight `Σ s_i²`.
pub fn truncated_svd(m: &ComplexTensor, chi_max: usize, cutoff: f64) -> Result<SvdFactors> {
    if chi_max == 0 {
        return Err(Error::Argument("chi_max must be positive".into()));
    }
    if cutoff < 0.0 {
        return Err(Error::Argument(format!("negative cutoff {cutoff}")));
    }
    let full = svd(m)?;
    let s0 = full.s.first().copied().unwrap_or(0.0);
    let above = full.s.iter().filter(|&&x| x >= cutoff * s0).count();
    let keep = chi_max.min(above).min(full.s.len()).max(1);
    let discarded: f64 = full.s[keep..].iter().map(|x| x * x).sum();
    if keep == full.s.len() {
        return Ok(SvdFactors {
            truncation_error: discarded,
            ..full
        });
    }
    let rows = full.u.shape()[0];
    let cols = full.vh.shape()[1];
    let mut u = ComplexTensor::zeros(vec![rows, keep]);
    for r in 0..rows {
        for c in 0..keep {
            u.data_mut()[r * keep + c] = full.u.get(&[r, c]);
        }
    }
    let vh_trim = ComplexTensor::from_parts(
        vec![keep, cols],
        full.vh.data()[..keep * cols].to_vec(),
    );
    Ok(SvdFactors {
        u,
        s: full.s[..keep].to_vec(),
        vh: vh_trim,
        truncation_error: discarded,
    })
}

/// Polar projection: the unitary `W = U·V†` nearest to `latent`, i.e. the
/// maximizer of `Re Tr(latent†·Q)` over unitaries `Q`.
pub fn project_to_unitary(latent: &ComplexTensor) -> Result<ComplexTensor> {
    let shape = latent.shape();
    if latent.rank() != 2 || shape[0] != shape[1] {
        return Err(Error::Rank(format!(
            "unitary projection needs a square matrix, got {shape:?}"
        )));
    }
    let f = svd(latent)?;
    let smax = f.s.first().copied().unwrap_or(0.0);
    let smin = f.s.last().copied().unwrap_or(0.0);
    if smin <= 1e-14 * smax || smax == 0.0 {
        return Err(Error::DegenerateProjection(format!(
            "latent is numerically rank-deficient (s_min/s_max = {:.3e})",
            if smax > 0.0 { smin / smax } else { 0.0 }
        )));
    }
    matmul(&f.u, &f.vh)
}

/// Matrix product of two rank-2 tensors.
pub fn matmul(a: &ComplexTensor, b: &ComplexTensor) -> Result<ComplexTensor> {
    contract(a, b, &[(1, 0)])
}

/// Conjugate transpose of a matrix tensor.
pub fn dagger(m: &ComplexTensor) -> Result<ComplexTensor> {
    m.conj().permute(&[1, 0])
}

/// Max-entry deviation of `m†m` from the identity.
pub fn unitarity_defect(m: &ComplexTensor) -> Result<f64> {
    let g = matmul(&dagger(m)?, m)?;
    let n = g.shape()[0];
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let want = if i == j { C_ONE } else { C_ZERO };
            worst = worst.max((g.get(&[i, j]) - want).norm());
        }
    }
    Ok(worst)
}

/// Thin QR with the gauge fixed so `diag(R)` is real and non-negative.
/// Returns `(q, r)` with `q` column-isometric, `m = q·r`.
pub fn qr_positive(m: &ComplexTensor) -> Result<(ComplexTensor, ComplexTensor)> {
    let a = m.to_array2()?;
    let (q, r) = a
        .qr()
        .map_err(|e| Error::Numerical(format!("QR failed: {e}")))?;
    let (mut q, mut r) = (q, r);
    fix_qr_gauge(&mut q, &mut r);
    Ok((ComplexTensor::from_array2(q), ComplexTensor::from_array2(r)))
}

/// Thin LQ with `diag(L)` real and non-negative. Returns `(l, q)` with `q`
/// row-isometric, `m = l·q`.
pub fn lq_positive(m: &ComplexTensor) -> Result<(ComplexTensor, ComplexTensor)> {
    let (qt, rt) = qr_positive(&dagger(m)?)?;
    Ok((dagger(&rt)?, dagger(&qt)?))
}

/// Rotate each Householder column/row pair so R's diagonal is non-negative.
fn fix_qr_gauge(q: &mut Array2<Complex64>, r: &mut Array2<Complex64>) {
    let k = q.ncols().min(r.nrows());
    for j in 0..k {
        let d = r[(j, j)];
        let mag = d.norm();
        if mag < f64::MIN_POSITIVE {
            continue;
        }
        let phase = d / mag;
        for x in q.column_mut(j).iter_mut() {
            *x *= phase;
        }
        let pc = phase.conj();
        for x in r.row_mut(j).iter_mut() {
            *x *= pc;
        }
    }
}

/// Full eigendecomposition of a Hermitian matrix. Eigenvalues ascending,
/// eigenvectors as columns of the returned matrix.
pub fn eigh_hermitian(m: &ComplexTensor) -> Result<(Vec<f64>, ComplexTensor)> {
    let shape = m.shape();
    if m.rank() != 2 || shape[0] != shape[1] {
        return Err(Error::Rank(format!("eigh needs a square matrix, got {shape:?}")));
    }
    let a = m.to_array2()?;
    let (vals, vecs) = a
        .eigh(UPLO::Lower)
        .map_err(|e| Error::Numerical(format!("Hermitian eigensolve failed: {e}")))?;
    Ok((vals.to_vec(), ComplexTensor::from_array2(vecs)))
}

#[derive(Debug, Clone, Copy)]
pub struct LanczosOptions {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tol: 1e-12,
        }
    }
}

/// Lowest eigenpair of a Hermitian operator given only its action
/// `y ← A·x`. Full reorthogonalization against the whole Krylov basis, so
/// the basis stays numerically orthonormal and no ghost eigenvalues appear.
pub fn lanczos_lowest<F>(
    dim: usize,
    mut apply: F,
    start: Option<&[Complex64]>,
    opts: &LanczosOptions,
) -> Result<(f64, Vec<Complex64>)>
where
    F: FnMut(&[Complex64], &mut [Complex64]),
{
    if dim == 0 {
        return Err(Error::Argument("empty operator".into()));
    }
    let mut v0 = match start {
        Some(s) if s.len() == dim => s.to_vec(),
        Some(s) => {
            return Err(Error::Dimension(format!(
                "start vector length {} does not match dimension {dim}",
                s.len()
            )))
        }
        None => default_start(dim),
    };
    let n0 = vec_norm(&v0);
    if !n0.is_finite() || n0 < 1e-300 {
        v0 = default_start(dim);
    }
    normalize(&mut v0);

    let mut basis: Vec<Vec<Complex64>> = vec![v0];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = vec![C_ZERO; dim];
    let max_iter = opts.max_iter.min(dim);

    let mut best: Option<(f64, Vec<f64>)> = None;
    for k in 0..max_iter {
        let v = basis[k].clone();
        apply(&v, &mut w);
        let alpha = dot(&v, &w).re;
        alphas.push(alpha);
        axpy(&mut w, Complex64::new(-alpha, 0.0), &v);
        if k > 0 {
            let beta_prev = Complex64::new(-betas[k - 1], 0.0);
            let v_prev = basis[k - 1].clone();
            axpy(&mut w, beta_prev, &v_prev);
        }
        // two Gram-Schmidt sweeps against everything built so far
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &w);
                axpy(&mut w, -c, b);
            }
        }
        let (theta, tri_vec) = tridiag_lowest(&alphas, &betas)?;
        let beta = vec_norm(&w);
        if !beta.is_finite() {
            return Err(Error::Numerical("Lanczos recurrence produced non-finite norm".into()));
        }
        let residual = beta * tri_vec.last().copied().unwrap_or(1.0).abs();
        best = Some((theta, tri_vec));
        if residual <= opts.tol * theta.abs().max(1.0) || beta < 1e-14 || k + 1 == max_iter {
            break;
        }
        let mut next = w.clone();
        normalize(&mut next);
        betas.push(beta);
        basis.push(next);
    }

    let (theta, tri_vec) = best.expect("at least one Lanczos step ran");
    let mut ground = vec![C_ZERO; dim];
    for (coeff, b) in tri_vec.iter().zip(&basis) {
        axpy(&mut ground, Complex64::new(*coeff, 0.0), b);
    }
    normalize(&mut ground);
    Ok((theta, ground))
}

/// Lowest eigenpair of the symmetric tridiagonal matrix with diagonal
/// `alphas` and off-diagonal `betas`.
fn tridiag_lowest(alphas: &[f64], betas: &[f64]) -> Result<(f64, Vec<f64>)> {
    let k = alphas.len();
    if k == 1 {
        return Ok((alphas[0], vec![1.0]));
    }
    let mut t = Array2::<f64>::zeros((k, k));
    for i in 0..k {
        t[(i, i)] = alphas[i];
        if i + 1 < k {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let (vals, vecs) = t
        .eigh(UPLO::Lower)
        .map_err(|e| Error::Numerical(format!("tridiagonal eigensolve failed: {e}")))?;
    let mut lo = 0;
    for i in 1..k {
        if vals[i] < vals[lo] {
            lo = i;
        }
    }
    Ok((vals[lo], vecs.column(lo).to_vec()))
}

fn default_start(dim: usize) -> Vec<Complex64> {
    // fixed quasi-random direction: deterministic and unlikely to be
    // orthogonal to the ground state
    let mut v = Vec::with_capacity(dim);
    let mut x = 0.5f64;
    for _ in 0..dim {
        x = (x * 997.0 + 0.123_456_789).fract();
        v.push(Complex64::new(x + 0.1, 0.05 * (1.0 - x)));
    }
    v
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn vec_norm(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn normalize(a: &mut [Complex64]) {
    let n = vec_norm(a);
    if n > 0.0 {
        for z in a.iter_mut() {
            *z /= n;
        }
    }
}

fn axpy(y: &mut [Complex64], a: Complex64, x: &[Complex64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Central-difference gradient of a real loss with respect to the real and
/// imaginary parts of every entry of `point`. Returns `(d/dRe, d/dIm)` as
/// real-valued tensors of the same shape.
pub fn finite_difference_gradient<F>(
    mut loss: F,
    point: &ComplexTensor,
    h: f64,
) -> Result<(ComplexTensor, ComplexTensor)>
where
    F: FnMut(&ComplexTensor) -> Result<f64>,
{
    if h <= 0.0 {
        return Err(Error::Argument(format!("step must be positive, got {h}")));
    }
    let base = loss(point)?;
    if !base.is_finite() {
        return Err(Error::Numerical("loss is not finite at the base point".into()));
    }
    let mut d_re = ComplexTensor::zeros(point.shape().to_vec());
    let mut d_im = ComplexTensor::zeros(point.shape().to_vec());
    let mut probe = point.clone();
    for i in 0..point.len() {
        let orig = probe.data()[i];
        for (axis, out) in [(0usize, &mut d_re), (1usize, &mut d_im)] {
            let delta = if axis == 0 {
                Complex64::new(h, 0.0)
            } else {
                Complex64::new(0.0, h)
            };
            probe.data_mut()[i] = orig + delta;
            let plus = loss(&probe)?;
            probe.data_mut()[i] = orig - delta;
            let minus = loss(&probe)?;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::Numerical(format!(
                    "loss is not finite near component {i}"
                )));
            }
            out.data_mut()[i] = Complex64::new((plus - minus) / (2.0 * h), 0.0);
        }
        probe.data_mut()[i] = orig;
    }
    Ok((d_re, d_im))
}

/// Re-embed `(d/dRe, d/dIm)` as one complex tensor `d/dRe + i·d/dIm`.
pub fn gradient_pair_to_complex(d_re: &ComplexTensor, d_im: &ComplexTensor) -> Result<ComplexTensor> {
    let im_rot = d_im.scaled(Complex64::new(0.0, 1.0));
    d_re.add(&im_rot)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{complex_normal_vec, seeded_rng};
    use ndarray::Array1;

    fn random_matrix(rng: &mut impl rand::Rng, r: usize, c: usize) -> ComplexTensor {
        ComplexTensor::new(vec![r, c], complex_normal_vec(rng, r * c)).unwrap()
    }

    fn reconstruct(f: &SvdFactors) -> ComplexTensor {
        let k = f.s.len();
        let mut sm = ComplexTensor::zeros(vec![k, k]);
        for i in 0..k {
            sm.data_mut()[i * k + i] = Complex64::new(f.s[i], 0.0);
        }
        matmul(&matmul(&f.u, &sm).unwrap(), &f.vh).unwrap()
    }

    fn diag(values: &[f64]) -> ComplexTensor {
        let n = values.len();
        let mut m = ComplexTensor::zeros(vec![n, n]);
        for (i, &v) in values.iter().enumerate() {
            m.data_mut()[i * n + i] = Complex64::new(v, 0.0);
        }
        m
    }

    #[test]
    fn svd_of_identity_has_unit_spectrum() {
        let f = svd(&ComplexTensor::identity(4)).unwrap();
        assert_eq!(f.s.len(), 4);
        for s in &f.s {
            assert!((s - 1.0).abs() < 1e-14);
        }
        assert_eq!(f.truncation_error, 0.0);
    }

    #[test]
    fn svd_of_diag_3_0() {
        let f = svd(&diag(&[3.0, 0.0])).unwrap();
        assert!((f.s[0] - 3.0).abs() < 1e-14);
        assert!(f.s[1].abs() < 1e-14);
    }

    #[test]
    fn svd_reconstructs_random_matrix() {
        let mut rng = seeded_rng(7);
        for (r, c) in [(4, 4), (3, 6), (6, 3)] {
            let m = random_matrix(&mut rng, r, c);
            let f = svd(&m).unwrap();
            // descending spectrum, isometric factors
            for w in f.s.windows(2) {
                assert!(w[0] >= w[1]);
            }
            assert!(unitarity_defect(&f.u).unwrap() < 1e-12);
            assert!(unitarity_defect(&dagger(&f.vh).unwrap()).unwrap() < 1e-12);
            let diff = reconstruct(&f).add(&m.scaled(Complex64::new(-1.0, 0.0))).unwrap();
            assert!(diff.frobenius_norm() <= 1e-10 * m.frobenius_norm());
        }
    }

    #[test]
    fn truncated_svd_drops_below_cutoff() {
        let f = truncated_svd(&diag(&[1.0, 1e-8]), 2, 1e-6).unwrap();
        assert_eq!(f.s.len(), 1);
        assert!((f.s[0] - 1.0).abs() < 1e-12);
        assert!((f.truncation_error - 1e-16).abs() < 1e-22);
    }

    #[test]
    fn truncated_svd_respects_chi_max() {
        let f = truncated_svd(&ComplexTensor::identity(4), 2, 0.0).unwrap();
        assert_eq!(f.s.len(), 2);
        assert!((f.truncation_error - 2.0).abs() < 1e-12);
    }

    #[test]
    fn truncated_svd_error_matches_full_tail() {
        let mut rng = seeded_rng(21);
        let m = random_matrix(&mut rng, 8, 8);
        let full = svd(&m).unwrap();
        let tail: f64 = full.s[4..].iter().map(|x| x * x).sum();
        let t = truncated_svd(&m, 4, 0.0).unwrap();
        assert_eq!(t.s.len(), 4);
        assert!((t.truncation_error - tail).abs() < 1e-12 * tail.max(1.0));
    }

    #[test]
    fn truncated_svd_keeps_at_least_one() {
        let f = truncated_svd(&diag(&[1e-20, 1e-22]), 4, 0.5).unwrap();
        assert_eq!(f.s.len(), 1);
        assert!(truncated_svd(&diag(&[1.0]), 0, 0.0).is_err());
    }

    #[test]
    fn projection_of_identity_and_scaled_identity() {
        for scale in [1.0, 2.0] {
            let w = project_to_unitary(&ComplexTensor::identity(4).scaled(Complex64::new(scale, 0.0))).unwrap();
            let diff = w.add(&ComplexTensor::identity(4).scaled(Complex64::new(-1.0, 0.0))).unwrap();
            assert!(diff.max_abs() < 1e-12);
        }
    }

    #[test]
    fn projection_is_unitary_idempotent_and_scale_invariant() {
        let mut rng = seeded_rng(33);
        let g = random_matrix(&mut rng, 4, 4);
        let w = project_to_unitary(&g).unwrap();
        assert!(unitarity_defect(&w).unwrap() < 1e-12);
        let ww = project_to_unitary(&w).unwrap();
        assert!(ww.add(&w.scaled(Complex64::new(-1.0, 0.0))).unwrap().max_abs() < 1e-12);
        let ws = project_to_unitary(&g.scaled(Complex64::new(2.5, 0.0))).unwrap();
        assert!(ws.add(&w.scaled(Complex64::new(-1.0, 0.0))).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn projection_maximizes_similarity_over_random_unitaries() {
        let mut rng = seeded_rng(5);
        let g = random_matrix(&mut rng, 4, 4);
        let w = project_to_unitary(&g).unwrap();
        let score = |q: &ComplexTensor| {
            contract(&g.conj(), q, &[(0, 0), (1, 1)])
                .unwrap()
                .scalar()
                .unwrap()
                .re
        };
        let best = score(&w);
        for _ in 0..100 {
            let q = project_to_unitary(&random_matrix(&mut rng, 4, 4)).unwrap();
            assert!(score(&q) <= best + 1e-10);
        }
    }

    #[test]
    fn projection_rejects_rank_deficient_latent() {
        let out = project_to_unitary(&diag(&[1.0, 0.0]));
        assert!(matches!(out, Err(Error::DegenerateProjection(_))));
    }

    #[test]
    fn qr_positive_factorizes_with_nonnegative_diagonal() {
        let mut rng = seeded_rng(40);
        for (r, c) in [(4, 4), (6, 3), (3, 6)] {
            let m = random_matrix(&mut rng, r, c);
            let (q, rr) = qr_positive(&m).unwrap();
            let k = r.min(c);
            assert_eq!(q.shape(), &[r, k]);
            assert_eq!(rr.shape(), &[k, c]);
            assert!(unitarity_defect(&q).unwrap() < 1e-12);
            for j in 0..k {
                let d = rr.get(&[j, j]);
                assert!(d.im.abs() < 1e-12 && d.re >= -1e-12, "diag {d}");
            }
            let diff = matmul(&q, &rr).unwrap().add(&m.scaled(Complex64::new(-1.0, 0.0))).unwrap();
            assert!(diff.max_abs() < 1e-12 * m.max_abs().max(1.0));
        }
    }

    #[test]
    fn lq_positive_mirrors_qr() {
        let mut rng = seeded_rng(41);
        for (r, c) in [(3, 7), (7, 3), (4, 4)] {
            let m = random_matrix(&mut rng, r, c);
            let (l, q) = lq_positive(&m).unwrap();
            let k = r.min(c);
            assert_eq!(l.shape(), &[r, k]);
            assert_eq!(q.shape(), &[k, c]);
            assert!(unitarity_defect(&dagger(&q).unwrap()).unwrap() < 1e-12);
            for j in 0..k {
                let d = l.get(&[j, j]);
                assert!(d.im.abs() < 1e-12 && d.re >= -1e-12);
            }
            let diff = matmul(&l, &q).unwrap().add(&m.scaled(Complex64::new(-1.0, 0.0))).unwrap();
            assert!(diff.max_abs() < 1e-12 * m.max_abs().max(1.0));
        }
    }

    #[test]
    fn eigh_recovers_known_spectrum() {
        // pauli X has eigenvalues ±1
        let x = ComplexTensor::new(
            vec![2, 2],
            vec![C_ZERO, C_ONE, C_ONE, C_ZERO],
        )
        .unwrap();
        let (vals, vecs) = eigh_hermitian(&x).unwrap();
        assert!((vals[0] + 1.0).abs() < 1e-14);
        assert!((vals[1] - 1.0).abs() < 1e-14);
        assert!(unitarity_defect(&vecs).unwrap() < 1e-12);
    }

    #[test]
    fn lanczos_matches_dense_eigh_on_random_hermitian() {
        let mut rng = seeded_rng(55);
        let n = 40;
        let raw = random_matrix(&mut rng, n, n);
        let herm = raw.add(&dagger(&raw).unwrap()).unwrap().scaled(Complex64::new(0.5, 0.0));
        let (vals, _) = eigh_hermitian(&herm).unwrap();
        let a = herm.to_array2().unwrap();
        let apply = |x: &[Complex64], y: &mut [Complex64]| {
            let xv = Array1::from_vec(x.to_vec());
            let out = a.dot(&xv);
            y.copy_from_slice(out.as_slice().unwrap());
        };
        let (theta, vec) = lanczos_lowest(n, apply, None, &LanczosOptions::default()).unwrap();
        assert!((theta - vals[0]).abs() < 1e-9, "lanczos {theta} vs dense {}", vals[0]);
        // residual check ‖Av − θv‖
        let xv = Array1::from_vec(vec.clone());
        let av = a.dot(&xv);
        let res: f64 = av
            .iter()
            .zip(&vec)
            .map(|(ax, v)| (ax - theta * v).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(res < 1e-7, "residual {res}");
    }

    #[test]
    fn fd_gradient_of_linear_trace() {
        let loss = |t: &ComplexTensor| -> Result<f64> {
            Ok((0..t.shape()[0]).map(|i| t.get(&[i, i]).re).sum())
        };
        let (d_re, d_im) = finite_difference_gradient(loss, &ComplexTensor::identity(2), 1e-5).unwrap();
        let diff = d_re.add(&ComplexTensor::identity(2).scaled(Complex64::new(-1.0, 0.0))).unwrap();
        assert!(diff.max_abs() < 1e-9);
        assert!(d_im.max_abs() < 1e-9);
    }

    #[test]
    fn fd_gradient_of_modulus_squared() {
        let loss = |t: &ComplexTensor| -> Result<f64> { Ok(t.data()[0].norm_sqr()) };
        let p = ComplexTensor::new(vec![1], vec![Complex64::new(1.0, 1.0)]).unwrap();
        let (d_re, d_im) = finite_difference_gradient(loss, &p, 1e-5).unwrap();
        assert!((d_re.data()[0].re - 2.0).abs() < 1e-8);
        assert!((d_im.data()[0].re - 2.0).abs() < 1e-8);
    }
}
