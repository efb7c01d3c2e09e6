//! Dense complex tensors with a small, explicit operation set.
//!
//! A [`ComplexTensor`] is a row-major block of `Complex64` amplitudes plus a
//! shape. The only structural operations are reshape, axis permutation, and
//! pairwise contraction; contraction is implemented as permute-reshape-GEMM
//! so the heavy lifting lands in BLAS. Everything is a pure function of its
//! inputs — tensors are never mutated after construction.

use ndarray::{Array2, ShapeBuilder};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub const C_ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const C_ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexTensor {
    shape: Vec<usize>,
    data: Vec<Complex64>,
}

impl ComplexTensor {
    /// Construct from a shape and row-major data. Validates the element
    /// count and that every entry is finite.
    pub fn new(shape: Vec<usize>, data: Vec<Complex64>) -> Result<Self> {
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::Argument(format!("zero extent in shape {shape:?}")));
        }
        let expect: usize = shape.iter().product();
        if expect != data.len() {
            return Err(Error::Dimension(format!(
                "shape {shape:?} wants {expect} entries, got {}",
                data.len()
            )));
        }
        let t = Self { shape, data };
        t.check_finite()?;
        Ok(t)
    }

    /// Internal constructor for values produced by our own arithmetic.
    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<Complex64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self { shape, data }
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Self::from_parts(shape, vec![C_ZERO; len])
    }

    /// n-by-n identity matrix.
    pub fn identity(n: usize) -> Self {
        let mut data = vec![C_ZERO; n * n];
        for i in 0..n {
            data[i * n + i] = C_ONE;
        }
        Self::from_parts(vec![n, n], data)
    }

    /// Rank-0 tensor holding one scalar.
    pub fn scalar_tensor(z: Complex64) -> Self {
        Self::from_parts(vec![], vec![z])
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    /// Value of a rank-0 (or single-entry) tensor.
    pub fn scalar(&self) -> Result<Complex64> {
        if self.data.len() != 1 {
            return Err(Error::Rank(format!(
                "scalar() on tensor of shape {:?}",
                self.shape
            )));
        }
        Ok(self.data[0])
    }

    /// Entry at a full multi-index.
    pub fn get(&self, idx: &[usize]) -> Complex64 {
        assert_eq!(idx.len(), self.shape.len());
        let mut off = 0;
        for (i, (&ix, &ext)) in idx.iter().zip(&self.shape).enumerate() {
            assert!(ix < ext, "index {ix} out of range at axis {i}");
            off = off * ext + ix;
        }
        self.data[off]
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            Ok(())
        } else {
            Err(Error::Numerical("non-finite tensor entry".into()))
        }
    }

    /// Same data, new shape (element count must match).
    pub fn reshape(&self, shape: Vec<usize>) -> Result<Self> {
        let expect: usize = shape.iter().product();
        if expect != self.data.len() {
            return Err(Error::Dimension(format!(
                "cannot reshape {:?} ({} entries) to {shape:?}",
                self.shape,
                self.data.len()
            )));
        }
        Ok(Self::from_parts(shape, self.data.clone()))
    }

    pub fn into_reshaped(mut self, shape: Vec<usize>) -> Result<Self> {
        let expect: usize = shape.iter().product();
        if expect != self.data.len() {
            return Err(Error::Dimension(format!(
                "cannot reshape {:?} ({} entries) to {shape:?}",
                self.shape,
                self.data.len()
            )));
        }
        self.shape = shape;
        Ok(self)
    }

    /// Reorder axes: output axis `i` is input axis `axes[i]`.
    pub fn permute(&self, axes: &[usize]) -> Result<Self> {
        let r = self.rank();
        if axes.len() != r {
            return Err(Error::Argument(format!(
                "permutation {axes:?} does not match rank {r}"
            )));
        }
        let mut seen = vec![false; r];
        for &a in axes {
            if a >= r || seen[a] {
                return Err(Error::Argument(format!("invalid permutation {axes:?}")));
            }
            seen[a] = true;
        }
        if axes.iter().enumerate().all(|(i, &a)| i == a) {
            return Ok(self.clone());
        }
        let out_shape: Vec<usize> = axes.iter().map(|&a| self.shape[a]).collect();
        let in_strides = row_major_strides(&self.shape);
        // stride in the input for a unit step of each output axis
        let step: Vec<usize> = axes.iter().map(|&a| in_strides[a]).collect();
        let mut out = vec![C_ZERO; self.data.len()];
        let mut idx = vec![0usize; r];
        let mut src = 0usize;
        for slot in out.iter_mut() {
            *slot = self.data[src];
            for ax in (0..r).rev() {
                idx[ax] += 1;
                src += step[ax];
                if idx[ax] < out_shape[ax] {
                    break;
                }
                src -= step[ax] * out_shape[ax];
                idx[ax] = 0;
            }
        }
        Ok(Self::from_parts(out_shape, out))
    }

    pub fn conj(&self) -> Self {
        Self::from_parts(self.shape.clone(), self.data.iter().map(|z| z.conj()).collect())
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self::from_parts(self.shape.clone(), self.data.iter().map(|z| z * c).collect())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::Dimension(format!(
                "add of shapes {:?} and {:?}",
                self.shape, other.shape
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Self::from_parts(self.shape.clone(), data))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// View a rank-2 tensor as an `ndarray` matrix (copies).
    pub(crate) fn to_array2(&self) -> Result<Array2<Complex64>> {
        if self.rank() != 2 {
            return Err(Error::Rank(format!(
                "expected a matrix, got shape {:?}",
                self.shape
            )));
        }
        Array2::from_shape_vec((self.shape[0], self.shape[1]).strides((self.shape[1], 1)), self.data.clone())
            .map_err(|e| Error::Dimension(e.to_string()))
    }

    pub(crate) fn from_array2(a: Array2<Complex64>) -> Self {
        let (r, c) = a.dim();
        let data = if a.is_standard_layout() {
            a.into_raw_vec()
        } else {
            a.iter().copied().collect()
        };
        Self::from_parts(vec![r, c], data)
    }
}

fn row_major_strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

/// Contract `a` and `b` over the given `(axis_of_a, axis_of_b)` pairs.
///
/// Free axes keep their original relative order, `a`'s free axes first. The
/// paired axes must have equal extents. Implemented by permuting the
/// contracted axes to the boundary and calling GEMM.
pub fn contract(
    a: &ComplexTensor,
    b: &ComplexTensor,
    axis_pairs: &[(usize, usize)],
) -> Result<ComplexTensor> {
    for &(ia, ib) in axis_pairs {
        if ia >= a.rank() || ib >= b.rank() {
            return Err(Error::Argument(format!(
                "axis pair ({ia},{ib}) out of range for ranks {} and {}",
                a.rank(),
                b.rank()
            )));
        }
        if a.shape[ia] != b.shape[ib] {
            return Err(Error::Dimension(format!(
                "contracted axes differ: a[{ia}]={} vs b[{ib}]={}",
                a.shape[ia], b.shape[ib]
            )));
        }
    }
    let mut a_contracted = vec![false; a.rank()];
    let mut b_contracted = vec![false; b.rank()];
    for &(ia, ib) in axis_pairs {
        if a_contracted[ia] || b_contracted[ib] {
            return Err(Error::Argument("axis contracted twice".into()));
        }
        a_contracted[ia] = true;
        b_contracted[ib] = true;
    }
    let a_free: Vec<usize> = (0..a.rank()).filter(|&i| !a_contracted[i]).collect();
    let b_free: Vec<usize> = (0..b.rank()).filter(|&i| !b_contracted[i]).collect();

    let mut a_perm = a_free.clone();
    a_perm.extend(axis_pairs.iter().map(|&(ia, _)| ia));
    let mut b_perm: Vec<usize> = axis_pairs.iter().map(|&(_, ib)| ib).collect();
    b_perm.extend(b_free.iter().copied());

    let m: usize = a_free.iter().map(|&i| a.shape[i]).product();
    let k: usize = axis_pairs.iter().map(|&(ia, _)| a.shape[ia]).product();
    let n: usize = b_free.iter().map(|&i| b.shape[i]).product();

    let pa = a.permute(&a_perm)?.into_reshaped(vec![m, k])?.to_array2()?;
    let pb = b.permute(&b_perm)?.into_reshaped(vec![k, n])?.to_array2()?;
    let prod = pa.dot(&pb);

    let mut out_shape: Vec<usize> = a_free.iter().map(|&i| a.shape[i]).collect();
    out_shape.extend(b_free.iter().map(|&i| b.shape[i]));
    ComplexTensor::from_array2(prod).into_reshaped(out_shape)
}
