//! ADMM loop splitting an observation tensor into static background `B`,
//! residual sparse term `R = E + H`, Gaussian noise `G`, dynamic background
//! `E` and TV-smooth foreground `H`.
//!
//! Objective:
//! `TNN(B) + l1*||R||_1 + l2/2*||G||_F^2 + l3*||E||_1 + l4*||T||_1`
//! subject to `O = B + R + G`, `R = E + H`, `T = grad(H)`. Each sub-problem
//! has a closed form: t-SVT for `B`, soft thresholding for `R`, `E`, `T`, a
//! scalar damping for `G`, and an FFT-diagonalized linear solve for `H`.

use crate::error::{Error, Result};
use crate::tensor::Tensor3;
use crate::tsvd::t_svt;
use crate::tvgrad::{dtd_spectrum, grad, solve_h, DtdSpectrum, GradTensor, GradWeights};

/// Solver parameters. Penalty defaults follow the usual inexact-ALM schedule
/// (`mu` and `nu` start small and grow geometrically up to a cap).
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub lambda4: f64,
    pub mu0: f64,
    pub nu0: f64,
    pub mu_max: f64,
    pub nu_max: f64,
    pub rho: f64,
    pub weights: GradWeights,
    pub epsilon: f64,
    pub imax: usize,
    /// Form the t-SVT target with `X/2` instead of `X/mu`. Kept only for
    /// comparing against the alternative scaling; the default is `X/mu`.
    pub b_multiplier_half: bool,
}

impl SolverConfig {
    /// Defaults for an `M x N x T` observation:
    /// `l1 = 0.3 / sqrt(max(M,N) * T)`, `l2 = 100 l1`, `l3 = 2.5 l1`,
    /// `l4 = 0.6 l1`, unit gradient weights.
    pub fn for_dims(m: usize, n: usize, t: usize) -> Self {
        let lambda1 = 0.3 / ((m.max(n) * t) as f64).sqrt();
        Self {
            lambda1,
            lambda2: 100.0 * lambda1,
            lambda3: 2.5 * lambda1,
            lambda4: 0.6 * lambda1,
            mu0: 1e-3,
            nu0: 1e-3,
            mu_max: 1e10,
            nu_max: 1e10,
            rho: 1.1,
            weights: GradWeights::default(),
            epsilon: 1e-7,
            imax: 500,
            b_multiplier_half: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("lambda3", self.lambda3),
            ("lambda4", self.lambda4),
            ("mu0", self.mu0),
            ("nu0", self.nu0),
            ("mu_max", self.mu_max),
            ("nu_max", self.nu_max),
            ("epsilon", self.epsilon),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if self.mu0 > self.mu_max {
            return Err(Error::InvalidParameter("mu0 exceeds mu_max".into()));
        }
        if self.nu0 > self.nu_max {
            return Err(Error::InvalidParameter("nu0 exceeds nu_max".into()));
        }
        if !(self.rho > 1.0) {
            return Err(Error::InvalidParameter(format!("rho must exceed 1, got {}", self.rho)));
        }
        if self.imax == 0 {
            return Err(Error::InvalidParameter("imax must be positive".into()));
        }
        self.weights.validate()
    }
}

/// All iterates, multipliers and penalties of the ADMM loop.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub b: Tensor3,
    pub r: Tensor3,
    pub g: Tensor3,
    pub e: Tensor3,
    pub h: Tensor3,
    pub tv: GradTensor,
    pub x: Tensor3,
    pub y: Tensor3,
    pub z: GradTensor,
    pub mu: f64,
    pub nu: f64,
    pub k: usize,
    pub residual: f64,
}

impl SolverState {
    /// Cold start: every iterate and multiplier is the zero tensor.
    pub fn init(dims: (usize, usize, usize), config: &SolverConfig) -> Self {
        let (m, n, t) = dims;
        let zero = || Tensor3::zeros(m, n, t);
        Self {
            b: zero(),
            r: zero(),
            g: zero(),
            e: zero(),
            h: zero(),
            tv: GradTensor::zeros(m, n, t, config.weights),
            x: zero(),
            y: zero(),
            z: GradTensor::zeros(m, n, t, config.weights),
            mu: config.mu0,
            nu: config.nu0,
            k: 0,
            residual: f64::INFINITY,
        }
    }

    fn all_finite(&self) -> Option<&'static str> {
        let checks: [(&'static str, bool); 9] = [
            ("background iterate", self.b.is_all_finite()),
            ("residual iterate", self.r.is_all_finite()),
            ("noise iterate", self.g.is_all_finite()),
            ("dynamic background iterate", self.e.is_all_finite()),
            ("foreground iterate", self.h.is_all_finite()),
            ("tv split iterate", self.tv.is_all_finite()),
            ("first multiplier", self.x.is_all_finite()),
            ("second multiplier", self.y.is_all_finite()),
            ("tv multiplier", self.z.is_all_finite()),
        ];
        checks.iter().find(|(_, ok)| !ok).map(|(name, _)| *name)
    }
}

/// Final layers plus convergence bookkeeping.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub background: Tensor3,
    pub dynamic_background: Tensor3,
    pub foreground: Tensor3,
    pub noise: Tensor3,
    pub iterations: usize,
    pub converged: bool,
    /// Relative constraint violation `||O-B-G-E-H||_F^2 / ||O||_F^2` per
    /// iteration.
    pub residual_history: Vec<f64>,
}

/// Element-wise soft threshold `sgn(v) * max(|v| - a, 0)`.
pub fn shrink(x: &Tensor3, a: f64) -> Tensor3 {
    debug_assert!(a >= 0.0);
    x.map(|v| shrink_scalar(v, a))
}

/// Soft threshold over a gradient stack.
pub fn shrink_grad(x: &GradTensor, a: f64) -> GradTensor {
    debug_assert!(a >= 0.0);
    x.map(|v| shrink_scalar(v, a))
}

#[inline]
pub fn shrink_scalar(v: f64, a: f64) -> f64 {
    v.signum() * (v.abs() - a).max(0.0)
}

/// `B` step: t-SVT of `O - R - G + X/mu` at threshold `1/mu`.
pub fn update_b(state: &SolverState, o: &Tensor3, config: &SolverConfig) -> Result<Tensor3> {
    let x_scale = if config.b_multiplier_half { 0.5 } else { 1.0 / state.mu };
    let mut a = o.sub(&state.r);
    a.add_scaled(&state.g, -1.0);
    a.add_scaled(&state.x, x_scale);
    t_svt(&a, 1.0 / state.mu)
}

/// `R` step: soft threshold of the averaged target at `lambda1 / (2 mu)`.
pub fn update_r(state: &SolverState, o: &Tensor3, config: &SolverConfig) -> Tensor3 {
    // Q = (O - B - G + E + H)/2 + (X - Y)/(2 mu)
    let mut q = o.sub(&state.b);
    q.add_scaled(&state.g, -1.0);
    q.add_scaled(&state.e, 1.0);
    q.add_scaled(&state.h, 1.0);
    let mut q = q.scale(0.5);
    q.add_scaled(&state.x, 0.5 / state.mu);
    q.add_scaled(&state.y, -0.5 / state.mu);
    shrink(&q, config.lambda1 / (2.0 * state.mu))
}

/// `G` step: `mu / (lambda2 + mu) * (O - B - R + X/mu)`, exact closed form.
pub fn update_g(state: &SolverState, o: &Tensor3, config: &SolverConfig) -> Tensor3 {
    let mut a = o.sub(&state.b);
    a.add_scaled(&state.r, -1.0);
    a.add_scaled(&state.x, 1.0 / state.mu);
    a.scale(state.mu / (config.lambda2 + state.mu))
}

/// `E` step: soft threshold of `R - H + Y/mu` at `lambda3 / mu`.
pub fn update_e(state: &SolverState, config: &SolverConfig) -> Tensor3 {
    let mut p = state.r.sub(&state.h);
    p.add_scaled(&state.y, 1.0 / state.mu);
    shrink(&p, config.lambda3 / state.mu)
}

/// `T` step: soft threshold of `grad(H) - Z/nu` at `lambda4 / nu`.
pub fn update_t(state: &SolverState, config: &SolverConfig) -> GradTensor {
    let mut w = grad(&state.h, config.weights);
    w.add_scaled(&state.z, -1.0 / state.nu);
    shrink_grad(&w, config.lambda4 / state.nu)
}

/// Multiplier ascent and penalty growth.
pub fn update_multipliers(state: &mut SolverState, o: &Tensor3, config: &SolverConfig) {
    let mut c1 = o.sub(&state.b);
    c1.add_scaled(&state.r, -1.0);
    c1.add_scaled(&state.g, -1.0);
    state.x.add_scaled(&c1, state.mu);

    let mut c2 = state.r.sub(&state.e);
    c2.add_scaled(&state.h, -1.0);
    state.y.add_scaled(&c2, state.mu);

    let mut c3 = state.tv.clone();
    c3.add_scaled(&grad(&state.h, config.weights), -1.0);
    state.z.add_scaled(&c3, state.nu);

    state.mu = (config.rho * state.mu).min(config.mu_max);
    state.nu = (config.rho * state.nu).min(config.nu_max);
}

/// Run the full loop on an observation with entries in `[0, 1]`.
///
/// Sub-problems execute in the order `B, R, G, E, H, T`, then multipliers.
/// Terminates when `||O-B-G-E-H||_F^2 <= epsilon * ||O||_F^2` or after
/// `imax` iterations; a non-finite iterate aborts with the iteration index.
pub fn run(o: &Tensor3, config: &SolverConfig) -> Result<Decomposition> {
    config.validate()?;
    if !o.is_all_finite() {
        return Err(Error::NonFinite { context: "observation", iteration: 0 });
    }
    let dims = o.dims();
    let spectrum: DtdSpectrum = dtd_spectrum(dims, config.weights);
    let mut state = SolverState::init(dims, config);
    let o_sq = o.sq_frobenius();
    let mut history = Vec::new();
    let mut converged = false;

    while state.k < config.imax {
        state.b = update_b(&state, o, config)?;
        state.r = update_r(&state, o, config);
        state.g = update_g(&state, o, config);
        state.e = update_e(&state, config);
        state.h = solve_h(
            &state.r,
            &state.e,
            &state.y,
            &state.tv,
            &state.z,
            state.mu,
            state.nu,
            &spectrum,
        )?;
        state.tv = update_t(&state, config);
        update_multipliers(&mut state, o, config);
        state.k += 1;

        if let Some(context) = state.all_finite() {
            return Err(Error::NonFinite { context, iteration: state.k });
        }

        let mut diff = o.sub(&state.b);
        diff.add_scaled(&state.g, -1.0);
        diff.add_scaled(&state.e, -1.0);
        diff.add_scaled(&state.h, -1.0);
        let diff_sq = diff.sq_frobenius();
        state.residual = if o_sq > 0.0 { diff_sq / o_sq } else { diff_sq };
        history.push(state.residual);

        if diff_sq <= config.epsilon * o_sq {
            converged = true;
            break;
        }
    }

    Ok(Decomposition {
        background: state.b,
        dynamic_background: state.e,
        foreground: state.h,
        noise: state.g,
        iterations: state.k,
        converged,
        residual_history: history,
    })
}
