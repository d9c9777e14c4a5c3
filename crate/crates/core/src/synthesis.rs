//! H-infinity output-feedback synthesis and event-threshold certification.
//!
//! The multiplicative estimator error `z_i = (1+Δ_i) y_i` is pulled out of
//! the loop as two disturbance channels: `w1 = Λ̲ z_p` (state-proportional)
//! and `w2 = Λ D` (constant, proportional to the set-point luminosities).
//! A central two-Riccati controller is synthesized for the resulting
//! generalized plant; its closed-loop gains bound the admissible
//! uncertainty `δ_z*`, which maps to the largest event threshold `h*`.

use num_complex::Complex64;
use thiserror::Error;

use crate::estimator::PixelBounds;
use crate::linalg::{self, from_rows, LinalgError, Matrix, StateSpace, Vector};
use crate::plant::{LtiPlant, SetPoint};

/// Default weight on the control-effort rows appended to the performance output.
pub const DEFAULT_EPSILON_U: f64 = 1e-4;
/// Default relative back-off of the controller's γ from the bisection optimum.
pub const DEFAULT_GAMMA_TOL: f64 = 1e-3;
/// Strictness factor applied to `δ_z*`.
pub const DELTA_SAFETY: f64 = 0.999;

const GAMMA_LO: f64 = 1e-6;
const GAMMA_HI: f64 = 1e6;
const GAMMA_ITERS: usize = 60;
const NORM_REL_TOL: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthesisError {
    #[error("invalid regularization weight {0}")]
    Regularization(f64),
    #[error("rank condition violated: {0}")]
    RankCondition(&'static str),
    #[error("no stabilizing controller with gamma <= {upper:e}")]
    Infeasible { upper: f64 },
    #[error("closed loop is not internally stable (spectral abscissa {0:.3e})")]
    Unstable(f64),
    #[error("closed-loop norm {norm} exceeds certified level {bound}")]
    NormCertificate { norm: f64, bound: f64 },
    #[error("DC gain mismatch between state-space and transfer composition: {0:.3e}")]
    CrossCheck(f64),
    #[error("degenerate gains: {0}")]
    Degenerate(&'static str),
    #[error("uncertainty bound {0} outside (0, 1)")]
    DeltaRange(f64),
    #[error("no positive threshold: delta_z* = {delta} does not exceed delta_q = {delta_q} of pixel {pixel}")]
    NoThreshold { delta: f64, delta_q: f64, pixel: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, SynthesisError>;

/// Generalized plant
///
/// ```text
/// ẋ   = A x + B1 w + B2 u
/// z   = C1 x + D11 w + D12 u      (r stacked copies of x, then ε_u·u)
/// z̄   = C2 x + D21 w + D22 u      (D21 = [blockdiag(c'), I_r])
/// ```
///
/// with `w = [w1; w2]`, `w1 ∈ ℝ^{nr}`, `w2 ∈ ℝ^r`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizedPlant {
    pub a: Matrix,
    pub b1: Matrix,
    pub b2: Matrix,
    pub c1: Matrix,
    pub c2: Matrix,
    pub d11: Matrix,
    pub d12: Matrix,
    pub d21: Matrix,
    pub d22: Matrix,
    /// Rows of `z` that are the (unregularized) performance output `z_p`.
    pub perf_rows: usize,
    pub w1_width: usize,
    pub w2_width: usize,
    /// `D_i = c'(x_d + δx_i)`
    pub d_vec: Vector,
    pub epsilon_u: f64,
}

impl GeneralizedPlant {
    pub fn states(&self) -> usize {
        self.a.nrows()
    }

    pub fn disturbances(&self) -> usize {
        self.b1.ncols()
    }

    pub fn controls(&self) -> usize {
        self.b2.ncols()
    }

    pub fn measurements(&self) -> usize {
        self.c2.nrows()
    }

    pub fn pixels(&self) -> usize {
        self.w2_width
    }

    /// Performance-row block of `C1` (the `C_{z_p}` stack).
    pub fn c_zp(&self) -> Matrix {
        self.c1.rows(0, self.perf_rows).into_owned()
    }

    /// `D_{z̄ w1}` block of `D21`.
    pub fn d_zbar_w1(&self) -> Matrix {
        self.d21.columns(0, self.w1_width).into_owned()
    }
}

pub fn build_generalized_plant(plant: &LtiPlant, setpoint: &SetPoint, epsilon_u: f64) -> Result<GeneralizedPlant> {
    if !(epsilon_u > 0.0) || !epsilon_u.is_finite() {
        return Err(SynthesisError::Regularization(epsilon_u));
    }
    let (n, m, r) = (plant.states(), plant.inputs(), plant.pixels());
    let nr = n * r;
    let eye_n = Matrix::identity(n, n);
    let c_row = Matrix::from_row_slice(1, n, plant.c().as_slice());

    let mut c_zp = Matrix::zeros(nr, n);
    let mut c_zbar = Matrix::zeros(r, n);
    let mut d_zw1 = Matrix::zeros(r, nr);
    for i in 0..r {
        c_zp.view_mut((i * n, 0), (n, n)).copy_from(&eye_n);
        c_zbar.view_mut((i, 0), (1, n)).copy_from(&c_row);
        d_zw1.view_mut((i, i * n), (1, n)).copy_from(&c_row);
    }
    let c1 = linalg::vstack(&[&c_zp, &Matrix::zeros(m, n)]);
    let d12 = linalg::vstack(&[&Matrix::zeros(nr, m), &(Matrix::identity(m, m) * epsilon_u)]);
    let d21 = linalg::hstack(&[&d_zw1, &Matrix::identity(r, r)]);
    let d_vec = Vector::from_iterator(
        r,
        plant.pixel_offsets().iter().map(|off| plant.c().dot(&(setpoint.xd() + off))),
    );
    Ok(GeneralizedPlant {
        a: plant.a().clone(),
        b1: Matrix::zeros(n, nr + r),
        b2: plant.b().clone(),
        c1,
        c2: c_zbar,
        d11: Matrix::zeros(nr + m, nr + r),
        d12,
        d21,
        d22: Matrix::zeros(r, m),
        perf_rows: nr,
        w1_width: nr,
        w2_width: r,
        d_vec,
        epsilon_u,
    })
}

/// Output-feedback controller `u = K z̄`.
#[derive(Debug, Clone, PartialEq)]
pub struct Controller {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
    pub d: Matrix,
    /// H-infinity level the controller was built for.
    pub gamma: f64,
    /// Smallest feasible level found by bisection.
    pub gamma_opt: f64,
    /// Independently computed closed-loop norm `‖T_{w→z}‖∞`.
    pub closed_loop_norm: f64,
}

impl Controller {
    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    /// Zero controller with a given number of states (all blocks zero).
    pub fn zero(states: usize, inputs: usize, outputs: usize) -> Self {
        Self {
            a: -Matrix::identity(states, states),
            b: Matrix::zeros(states, inputs),
            c: Matrix::zeros(outputs, states),
            d: Matrix::zeros(outputs, inputs),
            gamma: f64::NAN,
            gamma_opt: f64::NAN,
            closed_loop_norm: f64::NAN,
        }
    }
}

fn min_symmetric_eigenvalue(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().symmetric_eigen().eigenvalues.min()
}

fn spectral_radius(m: &Matrix) -> Result<f64> {
    Ok(linalg::eigenvalues(m)?.iter().map(|l| l.norm()).fold(0.0, f64::max))
}

struct Normalization {
    r12_inv: Matrix,
    r21_inv: Matrix,
}

fn check_rank_conditions(p: &GeneralizedPlant) -> Result<Normalization> {
    if p.d11.amax() > 0.0 {
        return Err(SynthesisError::RankCondition("D11 must be zero"));
    }
    if p.d22.amax() > 0.0 {
        return Err(SynthesisError::RankCondition("D22 must be zero"));
    }
    let r12 = p.d12.transpose() * &p.d12;
    let r21 = &p.d21 * p.d21.transpose();
    if linalg::rank(&p.d12, 1e-12) < p.controls() {
        return Err(SynthesisError::RankCondition("D12 must have full column rank"));
    }
    if linalg::rank(&p.d21, 1e-12) < p.measurements() {
        return Err(SynthesisError::RankCondition("D21 must have full row rank"));
    }
    Ok(Normalization {
        r12_inv: r12.try_inverse().ok_or(SynthesisError::RankCondition("D12'D12 singular"))?,
        r21_inv: r21.try_inverse().ok_or(SynthesisError::RankCondition("D21 D21' singular"))?,
    })
}

/// Central controller at level `gamma`, or `None` when the Riccati
/// conditions fail (no stabilizing solution, indefinite solution, or
/// spectral-radius coupling violated).
fn central_controller(p: &GeneralizedPlant, norm: &Normalization, gamma: f64) -> Option<(Matrix, Matrix, Matrix)> {
    let g2 = 1.0 / (gamma * gamma);
    let n = p.states();
    let (a, b1, b2, c1, c2) = (&p.a, &p.b1, &p.b2, &p.c1, &p.c2);
    let (d12, d21) = (&p.d12, &p.d21);

    let ax = a - b2 * &norm.r12_inv * d12.transpose() * c1;
    let gx = b2 * &norm.r12_inv * b2.transpose() - b1 * b1.transpose() * g2;
    let qx = c1.transpose() * (Matrix::identity(c1.nrows(), c1.nrows()) - d12 * &norm.r12_inv * d12.transpose()) * c1;
    let x = linalg::solve_riccati(&ax, &gx, &qx).ok()?;

    let ay = (a - b1 * d21.transpose() * &norm.r21_inv * c2).transpose();
    let gy = c2.transpose() * &norm.r21_inv * c2 - c1.transpose() * c1 * g2;
    let qy = b1 * (Matrix::identity(b1.ncols(), b1.ncols()) - d21.transpose() * &norm.r21_inv * d21) * b1.transpose();
    let y = linalg::solve_riccati(&ay, &gy, &qy).ok()?;

    let psd_tol = |m: &Matrix| -1e-9 * (1.0 + m.norm());
    if min_symmetric_eigenvalue(&x) < psd_tol(&x) || min_symmetric_eigenvalue(&y) < psd_tol(&y) {
        return None;
    }
    let coupling = spectral_radius(&(&x * &y)).ok()?;
    if coupling >= gamma * gamma * (1.0 - 1e-12) {
        return None;
    }

    let f = -&norm.r12_inv * (b2.transpose() * &x + d12.transpose() * c1);
    let l = -(&y * c2.transpose() + b1 * d21.transpose()) * &norm.r21_inv;
    let z = (Matrix::identity(n, n) - &y * &x * g2).try_inverse()?;
    let zl = &z * &l;
    let ak = a + b1 * b1.transpose() * &x * g2 + b2 * &f + &zl * (c2 + d21 * b1.transpose() * &x * g2);
    let bk = -zl;
    Some((ak, bk, f))
}

/// Lower linear fractional interconnection of `P` with `u = K z̄`, from
/// `w` to the full `z` (performance and regularization rows).
pub fn closed_loop(p: &GeneralizedPlant, k: &Controller) -> Result<StateSpace> {
    let (n, nk) = (p.states(), k.order());
    let mut a = Matrix::zeros(n + nk, n + nk);
    a.view_mut((0, 0), (n, n)).copy_from(&(&p.a + &p.b2 * &k.d * &p.c2));
    a.view_mut((0, n), (n, nk)).copy_from(&(&p.b2 * &k.c));
    a.view_mut((n, 0), (nk, n)).copy_from(&(&k.b * &p.c2));
    a.view_mut((n, n), (nk, nk)).copy_from(&k.a);
    let b = linalg::vstack(&[&(&p.b1 + &p.b2 * &k.d * &p.d21), &(&k.b * &p.d21)]);
    let c = linalg::hstack(&[&(&p.c1 + &p.d12 * &k.d * &p.c2), &(&p.d12 * &k.c)]);
    let d = &p.d11 + &p.d12 * &k.d * &p.d21;
    Ok(StateSpace::new(a, b, c, d)?)
}

/// γ-bisection over the central two-Riccati controller.
pub fn synthesize_controller(p: &GeneralizedPlant, gamma_tol: f64) -> Result<Controller> {
    let norm = check_rank_conditions(p)?;
    let gamma_tol = if gamma_tol > 0.0 { gamma_tol } else { DEFAULT_GAMMA_TOL };
    if central_controller(p, &norm, GAMMA_HI).is_none() {
        return Err(SynthesisError::Infeasible { upper: GAMMA_HI });
    }
    let (mut lo, mut hi) = (GAMMA_LO, GAMMA_HI);
    if central_controller(p, &norm, lo).is_some() {
        hi = lo;
    } else {
        for _ in 0..GAMMA_ITERS {
            let mid = (lo * hi).sqrt();
            if central_controller(p, &norm, mid).is_some() {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }
    let gamma_opt = hi;
    let mut gamma = gamma_opt * (1.0 + gamma_tol);
    let (ak, bk, ck) = loop {
        if let Some(k) = central_controller(p, &norm, gamma) {
            break k;
        }
        gamma *= 1.0 + gamma_tol;
        if gamma > GAMMA_HI {
            return Err(SynthesisError::Infeasible { upper: GAMMA_HI });
        }
    };
    let mut k = Controller {
        d: Matrix::zeros(ck.nrows(), bk.ncols()),
        a: ak,
        b: bk,
        c: ck,
        gamma,
        gamma_opt,
        closed_loop_norm: f64::NAN,
    };
    let cl = closed_loop(p, &k)?;
    let abscissa = linalg::spectral_abscissa(&cl.a)?;
    if abscissa >= 0.0 {
        return Err(SynthesisError::Unstable(abscissa));
    }
    let t_norm = linalg::hinf_norm(&cl, NORM_REL_TOL)?;
    let bound = gamma_opt * (1.0 + 2.0 * gamma_tol);
    if t_norm > bound * (1.0 + NORM_REL_TOL) {
        return Err(SynthesisError::NormCertificate { norm: t_norm, bound });
    }
    k.closed_loop_norm = t_norm;
    Ok(k)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopGains {
    /// `‖G_{w1 zp}(0)‖₂`
    pub g1_dc: f64,
    /// `‖G_{w2 zp}(0)‖₂`
    pub g2_dc: f64,
    /// `‖G_{w1 zp}‖∞`
    pub g1_hinf: f64,
    pub g1_dc_matrix: Matrix,
    pub g2_dc_matrix: Matrix,
}

/// Transfer matrices `(G_{w1 zp}(s), G_{w2 zp}(s))` by direct composition
/// `C_zp (I - E C_z̄)⁻¹ E [D_{z̄w1}, I]` with
/// `E(s) = (sI - A)⁻¹ B (C_c (sI - A_c)⁻¹ B_c + D_c)`.
pub fn transfer_by_composition(
    p: &GeneralizedPlant,
    k: &Controller,
    s: Complex64,
) -> Result<(linalg::CMatrix, linalg::CMatrix)> {
    let plant_tf = StateSpace::new(p.a.clone(), p.b2.clone(), Matrix::identity(p.states(), p.states()), Matrix::zeros(p.states(), p.controls()))?;
    let ctrl_tf = StateSpace::new(k.a.clone(), k.b.clone(), k.c.clone(), k.d.clone())?;
    let e = plant_tf.eval(s)? * ctrl_tf.eval(s)?;
    let n = p.states();
    let c_zbar = linalg::to_complex(&p.c2);
    let loop_inv = (linalg::CMatrix::identity(n, n) - &e * c_zbar)
        .try_inverse()
        .ok_or(LinalgError::Singular("I - E(s) C_zbar"))?;
    let base = linalg::to_complex(&p.c_zp()) * loop_inv * e;
    Ok((&base * linalg::to_complex(&p.d_zbar_w1()), base))
}

pub fn closed_loop_gains(p: &GeneralizedPlant, k: &Controller) -> Result<ClosedLoopGains> {
    let cl = closed_loop(p, k)?;
    let abscissa = linalg::spectral_abscissa(&cl.a)?;
    if abscissa >= 0.0 {
        return Err(SynthesisError::Unstable(abscissa));
    }
    let perf: Vec<usize> = (0..p.perf_rows).collect();
    let w1: Vec<usize> = (0..p.w1_width).collect();
    let w2: Vec<usize> = (p.w1_width..p.w1_width + p.w2_width).collect();
    let g1 = cl.select(&perf, &w1);
    let g2 = cl.select(&perf, &w2);
    let g1_dc_matrix = linalg::dc_gain(&g1)?;
    let g2_dc_matrix = linalg::dc_gain(&g2)?;

    let (e1, e2) = transfer_by_composition(p, k, Complex64::new(1e-9, 0.0))?;
    let mismatch = |ss: &Matrix, tf: &linalg::CMatrix| {
        let diff = (linalg::to_complex(ss) - tf).norm();
        diff / ss.norm().max(1e-300)
    };
    let worst = mismatch(&g1_dc_matrix, &e1).max(mismatch(&g2_dc_matrix, &e2));
    if worst > 1e-4 {
        return Err(SynthesisError::CrossCheck(worst));
    }

    Ok(ClosedLoopGains {
        g1_dc: linalg::spectral_norm(&g1_dc_matrix),
        g2_dc: linalg::spectral_norm(&g2_dc_matrix),
        g1_hinf: linalg::hinf_norm(&g1, NORM_REL_TOL)?,
        g1_dc_matrix,
        g2_dc_matrix,
    })
}

/// Largest tolerable relative output error:
/// `ε / (‖G2(0)‖ ‖D‖/√r + ε ‖G1(0)‖)`, capped by the small-gain bound
/// `1/‖G1‖∞`, times [`DELTA_SAFETY`].
pub fn max_uncertainty(gains: &ClosedLoopGains, d_vec: &Vector, r: usize, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(SynthesisError::Degenerate("epsilon must be positive"));
    }
    let denom = gains.g2_dc * d_vec.norm() / (r as f64).sqrt() + epsilon * gains.g1_dc;
    if !(denom > 0.0) || !denom.is_finite() {
        return Err(SynthesisError::Degenerate("zero denominator in the uncertainty bound"));
    }
    let mut delta = epsilon / denom;
    if gains.g1_hinf > 0.0 {
        delta = delta.min(1.0 / gains.g1_hinf);
    }
    Ok(delta * DELTA_SAFETY)
}

/// `‖G1‖∞ · δ < 1`
pub fn small_gain_check(gains: &ClosedLoopGains, delta: f64) -> bool {
    gains.g1_hinf * delta < 1.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold {
    pub h_star: f64,
    pub rho_star: f64,
    /// 0-based index of the pixel with the largest `M/m`.
    pub worst_pixel: usize,
}

/// `ρ* = √(max_i(M_i/m_i)·(1-δ)/(1+δ))`, `h* = -log_b ρ*`.
pub fn max_threshold(delta_z_star: f64, bounds: &[PixelBounds], base: f64) -> Result<Threshold> {
    if !(delta_z_star > 0.0 && delta_z_star < 1.0) {
        return Err(SynthesisError::DeltaRange(delta_z_star));
    }
    if !(base > 1.0) {
        return Err(SynthesisError::Degenerate("logarithm base must exceed 1"));
    }
    let (worst_pixel, worst) = bounds
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.spread().total_cmp(&b.1.spread()))
        .ok_or(SynthesisError::Degenerate("no pixels"))?;
    let rho2 = worst.spread() * (1.0 - delta_z_star) / (1.0 + delta_z_star);
    if rho2 >= 1.0 {
        return Err(SynthesisError::NoThreshold {
            delta: delta_z_star,
            delta_q: worst.delta_q(),
            pixel: worst_pixel,
        });
    }
    let rho_star = rho2.sqrt();
    // h* = log_b √(min(m/M)·(1+δ)/(1-δ))
    let h_star = 0.5 * ((1.0 + delta_z_star) / ((1.0 - delta_z_star) * worst.spread())).ln() / base.ln();
    Ok(Threshold { h_star, rho_star, worst_pixel })
}

/// Certification artifact: everything needed to re-derive `δ_z*` and `h*`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdReport {
    pub gamma: f64,
    pub gains: ClosedLoopGains,
    pub delta_z_star: f64,
    pub h_star: f64,
    pub rho_star: f64,
    pub worst_pixel: usize,
    /// `δ_z^i` of each pixel at `ρ*`.
    pub per_pixel_delta_z: Vec<f64>,
    pub small_gain_margin: f64,
    pub d_vec: Vector,
    pub epsilon: f64,
    pub base: f64,
}

impl ThresholdReport {
    pub fn norm_d(&self) -> f64 {
        self.d_vec.norm()
    }
}

pub fn certify(
    p: &GeneralizedPlant,
    k: &Controller,
    bounds: &[PixelBounds],
    epsilon: f64,
    base: f64,
) -> Result<ThresholdReport> {
    let gains = closed_loop_gains(p, k)?;
    let delta = max_uncertainty(&gains, &p.d_vec, p.pixels(), epsilon)?;
    let th = max_threshold(delta, bounds, base)?;
    Ok(ThresholdReport {
        gamma: k.gamma,
        per_pixel_delta_z: bounds.iter().map(|b| b.delta_z(th.rho_star)).collect(),
        small_gain_margin: 1.0 - gains.g1_hinf * delta,
        gains,
        delta_z_star: delta,
        h_star: th.h_star,
        rho_star: th.rho_star,
        worst_pixel: th.worst_pixel,
        d_vec: p.d_vec.clone(),
        epsilon,
        base,
    })
}

/// `‖x(∞)‖ ≤ ‖G2(0)‖ δ ‖D‖ / (√r (1 - ‖G1(0)‖ δ))`
pub fn steady_state_bound(gains: &ClosedLoopGains, delta: f64, d_vec: &Vector, r: usize) -> f64 {
    gains.g2_dc * delta * d_vec.norm() / ((r as f64).sqrt() * (1.0 - gains.g1_dc * delta))
}

/// Closed loop of `P`, `K` and a constant realization `Δ_i` of the
/// per-pixel multiplicative output error.
#[derive(Debug, Clone)]
pub struct PerturbedLoop {
    pub a: Matrix,
    pub b: Vector,
    pub plant_states: usize,
}

impl PerturbedLoop {
    pub fn is_stable(&self) -> Result<bool> {
        Ok(linalg::is_hurwitz(&self.a)?)
    }

    /// Equilibrium plant state `x(∞)` (requires stability).
    pub fn steady_state(&self) -> Result<Vector> {
        if !self.is_stable()? {
            return Err(SynthesisError::Unstable(linalg::spectral_abscissa(&self.a)?));
        }
        let xi = self.a.clone().lu().solve(&(-&self.b)).ok_or(LinalgError::Singular("perturbed loop"))?;
        Ok(xi.rows(0, self.plant_states).into_owned())
    }
}

/// Closes `w1 = Λ̲ z_p`, `w2 = Λ D` around the nominal closed loop.
pub fn perturbed_loop(p: &GeneralizedPlant, k: &Controller, deltas: &[f64]) -> Result<PerturbedLoop> {
    let (n, r) = (p.states(), p.pixels());
    if deltas.len() != r {
        return Err(SynthesisError::Degenerate("one uncertainty value per pixel required"));
    }
    let cl = closed_loop(p, k)?;
    let nr = p.w1_width;
    let lam1 = Matrix::from_diagonal(&Vector::from_iterator(nr, (0..nr).map(|j| deltas[j / n])));
    let lam2 = Matrix::from_diagonal(&Vector::from_column_slice(deltas));
    let c_p = cl.c.rows(0, p.perf_rows).into_owned();
    let d_p1 = cl.d.view((0, 0), (p.perf_rows, nr)).into_owned();
    let d_p2 = cl.d.view((0, nr), (p.perf_rows, r)).into_owned();
    let b1 = cl.b.columns(0, nr).into_owned();
    let b2 = cl.b.columns(nr, r).into_owned();
    let w2 = &lam2 * &p.d_vec;
    // z_p = (I - D_p1 Λ̲)⁻¹ (C_p ξ + D_p2 w2)
    let inv = (Matrix::identity(p.perf_rows, p.perf_rows) - &d_p1 * &lam1)
        .try_inverse()
        .ok_or(LinalgError::Singular("I - D Λ"))?;
    let a = &cl.a + &b1 * &lam1 * &inv * &c_p;
    let b = &b1 * &lam1 * &inv * &d_p2 * &w2 + &b2 * &w2;
    Ok(PerturbedLoop { a, b, plant_states: n })
}

/// Convenience for tests and examples: a 1x1 matrix.
pub fn scalar(v: f64) -> Matrix {
    from_rows(&[&[v]])
}
