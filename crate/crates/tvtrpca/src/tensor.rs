//! Third-order tensor storage and block-circulant algebra.
//!
//! A [`Tensor3`] is a dense real `M x N x T` array. Frames (frontal slices,
//! fixed `t`) are the unit of most algorithms here, so storage is
//! frame-major: entry `(m, n, t)` lives at `t*M*N + m*N + n`. That layout is
//! also the on-disk order of the raw tensor file format.
//!
//! [`CTensor3`] is the complex counterpart; it holds DFTs of real tensors
//! taken along the third dimension as well as complex factor tensors.
//!
//! `bcirc`/`bstack`/`fold` materialize the block-circulant view that defines
//! the t-product. `bcirc` costs `O(M*N*T^2)` memory and exists for oracle
//! checks at small sizes; production paths stay in the Fourier domain.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense real `M x N x T` tensor, frame-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    m: usize,
    n: usize,
    t: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(m: usize, n: usize, t: usize) -> Self {
        assert!(m > 0 && n > 0 && t > 0, "tensor dims must be positive");
        Self {
            m,
            n,
            t,
            data: vec![0.0; m * n * t],
        }
    }

    /// Build from a closure over `(m, n, t)` indices.
    pub fn from_fn(m: usize, n: usize, t: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut out = Self::zeros(m, n, t);
        for tt in 0..t {
            for mm in 0..m {
                for nn in 0..n {
                    out.data[(tt * m + mm) * n + nn] = f(mm, nn, tt);
                }
            }
        }
        out
    }

    /// Wrap an existing frame-major buffer.
    pub fn from_vec(m: usize, n: usize, t: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != m * n * t {
            return Err(Error::DimMismatch(format!(
                "buffer of {} values cannot hold a {m}x{n}x{t} tensor",
                data.len()
            )));
        }
        Ok(Self { m, n, t, data })
    }

    /// Identity tensor: first frontal slice is `I`, the rest are zero.
    pub fn identity(m: usize, t: usize) -> Self {
        let mut out = Self::zeros(m, m, t);
        for i in 0..m {
            out.data[i * m + i] = 1.0;
        }
        out
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.m, self.n, self.t)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    fn idx(&self, m: usize, n: usize, t: usize) -> usize {
        assert!(
            m < self.m && n < self.n && t < self.t,
            "index ({m},{n},{t}) out of range for {}x{}x{} tensor",
            self.m,
            self.n,
            self.t
        );
        (t * self.m + m) * self.n + n
    }

    #[inline]
    pub fn get(&self, m: usize, n: usize, t: usize) -> f64 {
        self.data[self.idx(m, n, t)]
    }

    #[inline]
    pub fn set(&mut self, m: usize, n: usize, t: usize, v: f64) {
        let i = self.idx(m, n, t);
        self.data[i] = v;
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Frontal slice `t` as a contiguous row-major `M x N` block.
    pub fn frame(&self, t: usize) -> &[f64] {
        assert!(t < self.t, "frame {t} out of range");
        let mn = self.m * self.n;
        &self.data[t * mn..(t + 1) * mn]
    }

    pub fn frame_mut(&mut self, t: usize) -> &mut [f64] {
        assert!(t < self.t, "frame {t} out of range");
        let mn = self.m * self.n;
        &mut self.data[t * mn..(t + 1) * mn]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            m: self.m,
            n: self.n,
            t: self.t,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.dims(), other.dims(), "zip_map dims differ");
        Self {
            m: self.m,
            n: self.n,
            t: self.t,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// `self += c * other`, in place.
    pub fn add_scaled(&mut self, other: &Self, c: f64) {
        assert_eq!(self.dims(), other.dims(), "add_scaled dims differ");
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
    }

    pub fn inner(&self, other: &Self) -> f64 {
        assert_eq!(self.dims(), other.dims(), "inner dims differ");
        self.data.iter().zip(&other.data).map(|(&a, &b)| a * b).sum()
    }

    pub fn sq_frobenius(&self) -> f64 {
        self.data.iter().map(|&v| v * v).sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.sq_frobenius().sqrt()
    }

    pub fn l1_norm(&self) -> f64 {
        self.data.iter().map(|&v| v.abs()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |acc, &v| acc.max(v.abs()))
    }

    pub fn is_all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Tensor conjugate transpose: transpose slice 1, and for `t >= 2` place
    /// the transpose of slice `T - t + 2` (1-based) at slice `t`.
    pub fn conj_transpose(&self) -> Tensor3 {
        let (m, n, t) = self.dims();
        Tensor3::from_fn(n, m, t, |i, j, tt| {
            let src_t = if tt == 0 { 0 } else { t - tt };
            self.get(j, i, src_t)
        })
    }

    /// Frontal slice `t` as a dense matrix.
    pub fn slice_matrix(&self, t: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.m, self.n, |i, j| self.get(i, j, t))
    }

    /// Block circulant matricization, `MT x NT`. Block `(i, j)` is frontal
    /// slice `(i - j) mod T`. Oracle-scale only.
    pub fn bcirc(&self) -> DMatrix<f64> {
        let (m, n, t) = self.dims();
        let mut out = DMatrix::zeros(m * t, n * t);
        for bi in 0..t {
            for bj in 0..t {
                let src = (bi + t - bj) % t;
                for i in 0..m {
                    for j in 0..n {
                        out[(bi * m + i, bj * n + j)] = self.get(i, j, src);
                    }
                }
            }
        }
        out
    }

    /// Block stacking matricization, `MT x N`: frontal slices stacked in order.
    pub fn bstack(&self) -> DMatrix<f64> {
        let (m, n, t) = self.dims();
        DMatrix::from_fn(m * t, n, |i, j| self.get(i % m, j, i / m))
    }

    /// Inverse of [`bstack`](Self::bstack): refold an `MT x N` matrix into an
    /// `M x N x T` tensor. The row count must be divisible by `m`.
    pub fn fold(mat: &DMatrix<f64>, m: usize) -> Result<Tensor3> {
        let (rows, n) = mat.shape();
        if m == 0 || rows % m != 0 {
            return Err(Error::DimMismatch(format!(
                "cannot fold {rows}x{n} matrix with frame height {m}"
            )));
        }
        let t = rows / m;
        Ok(Tensor3::from_fn(m, n, t, |i, j, tt| mat[(tt * m + i, j)]))
    }
}

/// Dense complex `M x N x T` tensor, frame-major storage. Holds DFTs of real
/// tensors along the third dimension and complex factor tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct CTensor3 {
    m: usize,
    n: usize,
    t: usize,
    data: Vec<Complex64>,
}

impl CTensor3 {
    pub fn zeros(m: usize, n: usize, t: usize) -> Self {
        assert!(m > 0 && n > 0 && t > 0, "tensor dims must be positive");
        Self {
            m,
            n,
            t,
            data: vec![Complex64::ZERO; m * n * t],
        }
    }

    pub fn from_real(x: &Tensor3) -> Self {
        let (m, n, t) = x.dims();
        Self {
            m,
            n,
            t,
            data: x.as_slice().iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.m, self.n, self.t)
    }

    #[inline]
    fn idx(&self, m: usize, n: usize, t: usize) -> usize {
        assert!(
            m < self.m && n < self.n && t < self.t,
            "index ({m},{n},{t}) out of range for {}x{}x{} tensor",
            self.m,
            self.n,
            self.t
        );
        (t * self.m + m) * self.n + n
    }

    #[inline]
    pub fn get(&self, m: usize, n: usize, t: usize) -> Complex64 {
        self.data[self.idx(m, n, t)]
    }

    #[inline]
    pub fn set(&mut self, m: usize, n: usize, t: usize, v: Complex64) {
        let i = self.idx(m, n, t);
        self.data[i] = v;
    }

    #[inline]
    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn frame(&self, t: usize) -> &[Complex64] {
        assert!(t < self.t, "frame {t} out of range");
        let mn = self.m * self.n;
        &self.data[t * mn..(t + 1) * mn]
    }

    pub fn frame_mut(&mut self, t: usize) -> &mut [Complex64] {
        assert!(t < self.t, "frame {t} out of range");
        let mn = self.m * self.n;
        &mut self.data[t * mn..(t + 1) * mn]
    }

    /// Frontal slice `t` as a dense complex matrix.
    pub fn slice_matrix(&self, t: usize) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.m, self.n, |i, j| self.get(i, j, t))
    }

    pub fn set_slice(&mut self, t: usize, mat: &DMatrix<Complex64>) {
        assert_eq!(mat.shape(), (self.m, self.n), "slice shape mismatch");
        for i in 0..self.m {
            for j in 0..self.n {
                self.set(i, j, t, mat[(i, j)]);
            }
        }
    }

    /// Write `conj(mat)` into slice `t` (mirror slice of a conjugate-symmetric
    /// transform).
    pub fn set_slice_conj(&mut self, t: usize, mat: &DMatrix<Complex64>) {
        assert_eq!(mat.shape(), (self.m, self.n), "slice shape mismatch");
        for i in 0..self.m {
            for j in 0..self.n {
                self.set(i, j, t, mat[(i, j)].conj());
            }
        }
    }

    /// Tensor conjugate transpose, slice-reversed Hermitian transpose.
    pub fn conj_transpose(&self) -> CTensor3 {
        let (m, n, t) = self.dims();
        let mut out = CTensor3::zeros(n, m, t);
        for tt in 0..t {
            let src_t = if tt == 0 { 0 } else { t - tt };
            for i in 0..n {
                for j in 0..m {
                    out.set(i, j, tt, self.get(j, i, src_t).conj());
                }
            }
        }
        out
    }

    /// Frobenius norm of the real part / imaginary part, `(re, im)`.
    pub fn split_norms(&self) -> (f64, f64) {
        let mut re = 0.0;
        let mut im = 0.0;
        for v in &self.data {
            re += v.re * v.re;
            im += v.im * v.im;
        }
        (re.sqrt(), im.sqrt())
    }

    /// Drop imaginary parts, failing loudly when they are too large to be
    /// rounding noise. `bound = 1e-9 * (1 + ||re||_F)`.
    pub fn into_real(self) -> Result<Tensor3> {
        let (re_norm, im_norm) = self.split_norms();
        let bound = 1e-9 * (1.0 + re_norm);
        if im_norm > bound {
            return Err(Error::ImaginaryResidue {
                residue: im_norm,
                bound,
            });
        }
        Ok(Tensor3 {
            m: self.m,
            n: self.n,
            t: self.t,
            data: self.data.into_iter().map(|v| v.re).collect(),
        })
    }

    pub fn sq_frobenius(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }
}
