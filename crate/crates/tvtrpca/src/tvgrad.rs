//! Circular finite-difference gradients, the TV/l1 norm, and the
//! FFT-diagonalized solve of the smoothing sub-problem.
//!
//! Forward differences with circular wrap in all three axes. The stacked
//! gradient operator `D` is circulant along each axis, so
//! `mu*I + nu*D^T D` is diagonalized by the 3-D DFT; its eigenvalues over the
//! frequency grid are precomputed once as a [`DtdSpectrum`] and the linear
//! solve reduces to an element-wise division between transforms.

use crate::error::{Error, Result};
use crate::fft::{fft3d, ifft3d};
use crate::tensor::Tensor3;

/// Per-axis scalar weights applied to the gradient stack.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradWeights {
    pub m: f64,
    pub n: f64,
    pub t: f64,
}

impl Default for GradWeights {
    fn default() -> Self {
        Self { m: 1.0, n: 1.0, t: 1.0 }
    }
}

impl GradWeights {
    pub fn validate(&self) -> Result<()> {
        if self.m > 0.0 && self.n > 0.0 && self.t > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "gradient weights must be positive: ({}, {}, {})",
                self.m, self.n, self.t
            )))
        }
    }
}

/// Weighted gradient stack `[w_m * grad_m h; w_n * grad_n h; w_t * grad_t h]`,
/// stored as an `M x N x 3T` tensor (three consecutive T-slabs).
#[derive(Debug, Clone, PartialEq)]
pub struct GradTensor {
    data: Tensor3,
    weights: GradWeights,
}

impl GradTensor {
    /// Zero stack for a base tensor of dims `(m, n, t)`.
    pub fn zeros(m: usize, n: usize, t: usize, weights: GradWeights) -> Self {
        Self {
            data: Tensor3::zeros(m, n, 3 * t),
            weights,
        }
    }

    /// Dims of the base tensor the stack was built from.
    pub fn base_dims(&self) -> (usize, usize, usize) {
        let (m, n, t3) = self.data.dims();
        (m, n, t3 / 3)
    }

    pub fn weights(&self) -> GradWeights {
        self.weights
    }

    /// The raw `M x N x 3T` stack.
    pub fn stack(&self) -> &Tensor3 {
        &self.data
    }

    /// Slab for one difference axis (0 = m, 1 = n, 2 = t) as a base-dims tensor.
    pub fn slab(&self, axis: usize) -> Tensor3 {
        assert!(axis < 3);
        let (m, n, t) = self.base_dims();
        Tensor3::from_fn(m, n, t, |i, j, tt| self.data.get(i, j, axis * t + tt))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            data: self.data.map(f),
            weights: self.weights,
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.weights, other.weights, "gradient weight mismatch");
        Self {
            data: self.data.zip_map(&other.data, f),
            weights: self.weights,
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

    pub fn add_scaled(&mut self, other: &Self, c: f64) {
        assert_eq!(self.weights, other.weights, "gradient weight mismatch");
        self.data.add_scaled(&other.data, c);
    }

    pub fn inner(&self, other: &Self) -> f64 {
        self.data.inner(&other.data)
    }

    pub fn l1_norm(&self) -> f64 {
        self.data.l1_norm()
    }

    pub fn frobenius(&self) -> f64 {
        self.data.frobenius()
    }

    pub fn is_all_finite(&self) -> bool {
        self.data.is_all_finite()
    }
}

/// Weighted circular forward-difference gradient of `h`.
pub fn grad(h: &Tensor3, weights: GradWeights) -> GradTensor {
    let (m, n, t) = h.dims();
    let data = Tensor3::from_fn(m, n, 3 * t, |i, j, slab_t| {
        let (axis, tt) = (slab_t / t, slab_t % t);
        match axis {
            0 => weights.m * (h.get((i + 1) % m, j, tt) - h.get(i, j, tt)),
            1 => weights.n * (h.get(i, (j + 1) % n, tt) - h.get(i, j, tt)),
            _ => weights.t * (h.get(i, j, (tt + 1) % t) - h.get(i, j, tt)),
        }
    });
    GradTensor { data, weights }
}

/// Adjoint of [`grad`]: `<grad(h), p> = <h, grad_adjoint(p)>` for all `h`.
/// Weighted negative circular divergence of the stack.
pub fn grad_adjoint(p: &GradTensor) -> Tensor3 {
    let (m, n, t) = p.base_dims();
    let w = p.weights;
    let d = &p.data;
    Tensor3::from_fn(m, n, t, |i, j, tt| {
        let dm = d.get((i + m - 1) % m, j, tt) - d.get(i, j, tt);
        let dn = d.get(i, (j + n - 1) % n, t + tt) - d.get(i, j, t + tt);
        let dt = d.get(i, j, 2 * t + (tt + t - 1) % t) - d.get(i, j, 2 * t + tt);
        w.m * dm + w.n * dn + w.t * dt
    })
}

/// TV/l1 norm: the l1 norm of the weighted gradient stack.
pub fn tv_l1(h: &Tensor3, weights: GradWeights) -> f64 {
    grad(h, weights).l1_norm()
}

/// Eigenvalues of `w_m^2 D_m^T D_m + w_n^2 D_n^T D_n + w_t^2 D_t^T D_t` over
/// the 3-D frequency grid. Entry `(wm, wn, wt)` equals
/// `w_m^2 |e^{2 pi i wm / M} - 1|^2 + ...` = `4 w^2 sin^2(pi w_k / K)` per axis.
#[derive(Debug, Clone)]
pub struct DtdSpectrum {
    data: Tensor3,
}

impl DtdSpectrum {
    pub fn data(&self) -> &Tensor3 {
        &self.data
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.data.dims()
    }
}

/// Precompute the difference-operator spectrum for the given base dims.
pub fn dtd_spectrum(dims: (usize, usize, usize), weights: GradWeights) -> DtdSpectrum {
    let (m, n, t) = dims;
    assert!(m > 0 && n > 0 && t > 0, "spectrum dims must be positive");
    let eig = |k: usize, len: usize, w: f64| {
        let s = (std::f64::consts::PI * k as f64 / len as f64).sin();
        4.0 * w * w * s * s
    };
    let data = Tensor3::from_fn(m, n, t, |i, j, tt| {
        eig(i, m, weights.m) + eig(j, n, weights.n) + eig(tt, t, weights.t)
    });
    DtdSpectrum { data }
}

/// Solve `(mu I + nu D^T D) h = k` with
/// `k = mu (r - e + y/mu) + nu grad_adjoint(t_split + z/nu)` via the 3-D DFT:
/// transform, divide element-wise by `mu + nu * spectrum`, transform back.
///
/// `nu = 0` short-circuits to `h = r - e + y/mu` exactly.
#[allow(clippy::too_many_arguments)]
pub fn solve_h(
    r: &Tensor3,
    e: &Tensor3,
    y: &Tensor3,
    t_split: &GradTensor,
    z: &GradTensor,
    mu: f64,
    nu: f64,
    spectrum: &DtdSpectrum,
) -> Result<Tensor3> {
    if !(mu > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "smoothing solve requires mu > 0, got {mu}"
        )));
    }
    if nu < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "smoothing solve requires nu >= 0, got {nu}"
        )));
    }
    // mu (r - e) + y == mu (r - e + y/mu), without dividing by mu
    let mut k = r.sub(e).scale(mu);
    k.add_scaled(y, 1.0);
    if nu == 0.0 {
        return Ok(k.scale(1.0 / mu));
    }
    if r.dims() != spectrum.dims() {
        return Err(Error::DimMismatch(format!(
            "spectrum dims {:?} do not match tensor dims {:?}",
            spectrum.dims(),
            r.dims()
        )));
    }
    // nu * grad_adjoint(t_split + z/nu) == grad_adjoint(nu*t_split + z)
    let mut q = t_split.scale(nu);
    q.add_scaled(z, 1.0);
    k.add_scaled(&grad_adjoint(&q), 1.0);

    let mut kf = fft3d(&k);
    let spec = spectrum.data.as_slice();
    for (v, &lambda) in kf.as_mut_slice().iter_mut().zip(spec) {
        *v /= mu + nu * lambda;
    }
    ifft3d(&kf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn lcg_tensor(m: usize, n: usize, t: usize, seed: u64) -> Tensor3 {
        let mut s = seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1);
        Tensor3::from_fn(m, n, t, |_, _, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
    }

    fn lcg_grad(m: usize, n: usize, t: usize, w: GradWeights, seed: u64) -> GradTensor {
        GradTensor {
            data: lcg_tensor(m, n, 3 * t, seed),
            weights: w,
        }
    }

    #[test]
    fn constant_tensor_has_zero_gradient() {
        let h = Tensor3::from_fn(3, 4, 2, |_, _, _| 0.37);
        let g = grad(&h, GradWeights::default());
        assert_eq!(g.l1_norm(), 0.0);
    }

    #[test]
    fn unit_spike_gradient_enumerated_by_hand() {
        // 2x2x2, single 1 at (0,0,0), unit weights
        let mut h = Tensor3::zeros(2, 2, 2);
        h.set(0, 0, 0, 1.0);
        let g = grad(&h, GradWeights::default());
        // m-slab: -1 where the difference leaves the spike, +1 entering it
        let dm = g.slab(0);
        assert_eq!(dm.get(0, 0, 0), -1.0);
        assert_eq!(dm.get(1, 0, 0), 1.0);
        assert_eq!(dm.get(0, 1, 0), 0.0);
        let dn = g.slab(1);
        assert_eq!(dn.get(0, 0, 0), -1.0);
        assert_eq!(dn.get(0, 1, 0), 1.0);
        let dt = g.slab(2);
        assert_eq!(dt.get(0, 0, 0), -1.0);
        assert_eq!(dt.get(0, 0, 1), 1.0);
        // everything else zero: total l1 mass is exactly 6
        assert_eq!(g.l1_norm(), 6.0);
    }

    #[test]
    fn ramp_in_m_only_touches_m_slab() {
        let h = Tensor3::from_fn(4, 3, 2, |i, _, _| i as f64);
        let g = grad(&h, GradWeights::default());
        assert_eq!(g.slab(1).l1_norm(), 0.0);
        assert_eq!(g.slab(2).l1_norm(), 0.0);
        assert!(g.slab(0).l1_norm() > 0.0);
    }

    #[test]
    fn circular_differences_sum_to_zero_along_their_axis() {
        let h = lcg_tensor(3, 4, 5, 1);
        let g = grad(&h, GradWeights { m: 1.3, n: 0.7, t: 2.1 });
        let (m, n, t) = h.dims();
        let dm = g.slab(0);
        for j in 0..n {
            for tt in 0..t {
                let sum: f64 = (0..m).map(|i| dm.get(i, j, tt)).sum();
                assert!(sum.abs() < 1e-12);
            }
        }
        let dn = g.slab(1);
        for i in 0..m {
            for tt in 0..t {
                let sum: f64 = (0..n).map(|j| dn.get(i, j, tt)).sum();
                assert!(sum.abs() < 1e-12);
            }
        }
        let dt = g.slab(2);
        for i in 0..m {
            for j in 0..n {
                let sum: f64 = (0..t).map(|tt| dt.get(i, j, tt)).sum();
                assert!(sum.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn adjoint_identity_holds() {
        for seed in 0..20 {
            let w = GradWeights { m: 1.0 + seed as f64 * 0.1, n: 0.8, t: 1.4 };
            let h = lcg_tensor(3, 3, 3, 10 + seed);
            let p = lcg_grad(3, 3, 3, w, 50 + seed);
            let lhs = grad(&h, w).inner(&p);
            let rhs = h.inner(&grad_adjoint(&p));
            let bound = 1e-12 * (1.0 + h.frobenius() * p.frobenius());
            assert!((lhs - rhs).abs() < bound, "adjoint violated: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn adjoint_of_zero_stack_is_zero() {
        let p = GradTensor::zeros(3, 4, 2, GradWeights::default());
        assert_eq!(grad_adjoint(&p).max_abs(), 0.0);
    }

    #[test]
    fn adjoint_of_constant_gradient_is_zero() {
        let h = Tensor3::from_fn(3, 3, 3, |_, _, _| 1.7);
        let p = grad(&h, GradWeights::default());
        assert_eq!(grad_adjoint(&p).max_abs(), 0.0);
    }

    #[test]
    fn tv_l1_examples() {
        let c = Tensor3::from_fn(3, 3, 3, |_, _, _| 0.4);
        assert_eq!(tv_l1(&c, GradWeights::default()), 0.0);

        // unit spike in 4x4x4: two unit differences per axis
        let mut h = Tensor3::zeros(4, 4, 4);
        h.set(1, 2, 3, 1.0);
        assert_eq!(tv_l1(&h, GradWeights::default()), 6.0);

        // positive homogeneity
        let x = lcg_tensor(3, 3, 3, 77);
        let a = tv_l1(&x, GradWeights::default());
        let b = tv_l1(&x.scale(2.5), GradWeights::default());
        assert!((b - 2.5 * a).abs() < 1e-10 * (1.0 + a));
    }

    #[test]
    fn spectrum_trivial_dims() {
        let s = dtd_spectrum((1, 1, 1), GradWeights::default());
        assert_eq!(s.data().get(0, 0, 0), 0.0);

        let s2 = dtd_spectrum((2, 1, 1), GradWeights::default());
        assert_eq!(s2.data().get(0, 0, 0), 0.0);
        assert!((s2.data().get(1, 0, 0) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn spectrum_zero_at_dc_and_nonnegative() {
        let s = dtd_spectrum((4, 5, 3), GradWeights { m: 1.1, n: 0.9, t: 2.0 });
        assert_eq!(s.data().get(0, 0, 0), 0.0);
        assert!(s.data().as_slice().iter().all(|&v| v >= 0.0));
    }

    /// Dense circulant forward-difference matrix for one axis acting on the
    /// frame-major vectorization, for oracle-scale checks.
    fn dense_diff(dims: (usize, usize, usize), axis: usize) -> DMatrix<f64> {
        let (m, n, t) = dims;
        let size = m * n * t;
        let idx = |i: usize, j: usize, tt: usize| (tt * m + i) * n + j;
        let mut d = DMatrix::zeros(size, size);
        for tt in 0..t {
            for i in 0..m {
                for j in 0..n {
                    let row = idx(i, j, tt);
                    let up = match axis {
                        0 => idx((i + 1) % m, j, tt),
                        1 => idx(i, (j + 1) % n, tt),
                        _ => idx(i, j, (tt + 1) % t),
                    };
                    d[(row, up)] += 1.0;
                    d[(row, idx(i, j, tt))] -= 1.0;
                }
            }
        }
        d
    }

    fn dense_dtd(dims: (usize, usize, usize), w: GradWeights) -> DMatrix<f64> {
        let dm = dense_diff(dims, 0);
        let dn = dense_diff(dims, 1);
        let dt = dense_diff(dims, 2);
        dm.transpose() * &dm * (w.m * w.m)
            + dn.transpose() * &dn * (w.n * w.n)
            + dt.transpose() * &dt * (w.t * w.t)
    }

    #[test]
    fn spectrum_matches_dense_circulant_eigenvalues() {
        let dims = (3, 3, 3);
        let w = GradWeights { m: 1.0, n: 1.3, t: 0.6 };
        let dense = dense_dtd(dims, w);
        let mut eigs: Vec<f64> = dense.symmetric_eigenvalues().iter().cloned().collect();
        let mut spec: Vec<f64> = dtd_spectrum(dims, w).data().as_slice().to_vec();
        eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        spec.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in eigs.iter().zip(&spec) {
            assert!((a - b).abs() < 1e-10, "eigenvalue mismatch: {a} vs {b}");
        }
    }

    #[test]
    fn solve_h_with_nu_zero_is_exact() {
        let r = lcg_tensor(3, 3, 3, 20);
        let e = lcg_tensor(3, 3, 3, 21);
        let y = lcg_tensor(3, 3, 3, 22);
        let w = GradWeights::default();
        let spec = dtd_spectrum((3, 3, 3), w);
        let ts = GradTensor::zeros(3, 3, 3, w);
        let z = GradTensor::zeros(3, 3, 3, w);
        let mu = 0.7;
        let h = solve_h(&r, &e, &y, &ts, &z, mu, 0.0, &spec).unwrap();
        let want = r.sub(&e).add(&y.scale(1.0 / mu));
        assert!(h.sub(&want).max_abs() < 1e-14);
    }

    #[test]
    fn solve_h_all_zero_inputs() {
        let z3 = Tensor3::zeros(2, 2, 2);
        let w = GradWeights::default();
        let spec = dtd_spectrum((2, 2, 2), w);
        let zg = GradTensor::zeros(2, 2, 2, w);
        let h = solve_h(&z3, &z3, &z3, &zg, &zg, 1.0, 1.0, &spec).unwrap();
        assert!(h.max_abs() < 1e-15);
    }

    #[test]
    fn solve_h_rejects_bad_mu() {
        let z3 = Tensor3::zeros(2, 2, 2);
        let w = GradWeights::default();
        let spec = dtd_spectrum((2, 2, 2), w);
        let zg = GradTensor::zeros(2, 2, 2, w);
        assert!(solve_h(&z3, &z3, &z3, &zg, &zg, 0.0, 1.0, &spec).is_err());
        assert!(solve_h(&z3, &z3, &z3, &zg, &zg, 1.0, -0.5, &spec).is_err());
    }

    #[test]
    fn solve_h_matches_dense_oracle() {
        let dims = (3, 3, 3);
        let w = GradWeights { m: 1.0, n: 1.0, t: 1.0 };
        let spec = dtd_spectrum(dims, w);
        for seed in 0..5 {
            let r = lcg_tensor(3, 3, 3, 30 + seed);
            let e = lcg_tensor(3, 3, 3, 40 + seed);
            let y = lcg_tensor(3, 3, 3, 50 + seed);
            let ts = lcg_grad(3, 3, 3, w, 60 + seed);
            let z = lcg_grad(3, 3, 3, w, 70 + seed);
            let (mu, nu) = (0.9, 1.7);
            let h = solve_h(&r, &e, &y, &ts, &z, mu, nu, &spec).unwrap();

            // dense route: assemble the full MNT x MNT operator and LU-solve
            let mut k = r.sub(&e).scale(mu);
            k.add_scaled(&y, 1.0);
            let mut q = ts.scale(nu);
            q.add_scaled(&z, 1.0);
            k.add_scaled(&grad_adjoint(&q), 1.0);
            let a = DMatrix::identity(27, 27) * mu + dense_dtd(dims, w) * nu;
            let rhs = nalgebra::DVector::from_column_slice(k.as_slice());
            let sol = a.lu().solve(&rhs).unwrap();
            let dense = Tensor3::from_vec(3, 3, 3, sol.as_slice().to_vec()).unwrap();

            let err = h.sub(&dense).frobenius() / (1.0 + dense.frobenius());
            assert!(err < 1e-8, "fft solve deviates from dense solve: {err}");
        }
    }

    #[test]
    fn solve_h_residual_is_small_via_operator_route() {
        let w = GradWeights::default();
        let spec = dtd_spectrum((4, 5, 3), w);
        let r = lcg_tensor(4, 5, 3, 80);
        let e = lcg_tensor(4, 5, 3, 81);
        let y = lcg_tensor(4, 5, 3, 82);
        let ts = lcg_grad(4, 5, 3, w, 83);
        let z = lcg_grad(4, 5, 3, w, 84);
        let (mu, nu) = (0.5, 2.0);
        let h = solve_h(&r, &e, &y, &ts, &z, mu, nu, &spec).unwrap();

        let mut k = r.sub(&e).scale(mu);
        k.add_scaled(&y, 1.0);
        let mut q = ts.scale(nu);
        q.add_scaled(&z, 1.0);
        k.add_scaled(&grad_adjoint(&q), 1.0);

        let mut lhs = grad_adjoint(&grad(&h, w)).scale(nu);
        lhs.add_scaled(&h, mu);
        let resid = lhs.sub(&k).frobenius() / (1.0 + k.frobenius());
        assert!(resid < 1e-8, "normal-equation residual {resid}");
    }

    #[test]
    fn solve_h_is_the_quadratic_minimizer() {
        // perturbing the solution never decreases the quadratic objective
        let w = GradWeights::default();
        let dims = (3, 3, 3);
        let spec = dtd_spectrum(dims, w);
        let r = lcg_tensor(3, 3, 3, 90);
        let e = lcg_tensor(3, 3, 3, 91);
        let y = lcg_tensor(3, 3, 3, 92);
        let ts = lcg_grad(3, 3, 3, w, 93);
        let z = lcg_grad(3, 3, 3, w, 94);
        let (mu, nu) = (1.1, 0.8);
        let h = solve_h(&r, &e, &y, &ts, &z, mu, nu, &spec).unwrap();

        let objective = |hh: &Tensor3| -> f64 {
            // mu/2 ||r - e - h + y/mu||^2 + nu/2 ||ts - grad(h) + z/nu||^2
            let a = r.sub(&e).sub(hh).add(&y.scale(1.0 / mu));
            let g = grad(hh, w);
            let b = ts.sub(&g).add(&z.scale(1.0 / nu));
            0.5 * mu * a.sq_frobenius() + 0.5 * nu * b.data.sq_frobenius()
        };
        let base = objective(&h);
        for seed in 0..50 {
            let dir = lcg_tensor(3, 3, 3, 200 + seed);
            let dir = dir.scale(1e-3 / dir.frobenius());
            assert!(objective(&h.add(&dir)) >= base - 1e-12);
        }
    }

    #[test]
    fn denominator_stays_positive_definite() {
        let w = GradWeights { m: 0.5, n: 1.5, t: 1.0 };
        let spec = dtd_spectrum((4, 4, 4), w);
        let (mu, nu) = (1e-3, 5.0);
        for &lambda in spec.data().as_slice() {
            assert!(mu + nu * lambda >= mu);
        }
    }
}
