//! Closed-loop hybrid simulation.
//!
//! Between events every controller input `z̄_i` is held constant, so the
//! augmented state `s = [x; x_c; z̄]` obeys the linear flow `ṡ = M s` with
//!
//! ```text
//!     | A  B C_c  B D_c |
//! M = | 0  A_c    B_c   |
//!     | 0  0      0     |
//! ```
//!
//! and is propagated exactly by `exp(M dt)`. Guard crossings inside a step
//! are localized by bisection on the same exact flow.

use thiserror::Error;

use crate::dvs::{apply_event, DvsCamera, DvsError, EventKind, PixelState, Polarity, RetinalEvent};
use crate::estimator::{
    output_estimate, update_estimate, EstimatorGains, EstimatorState, PixelBounds,
};
use crate::linalg::{self, LinalgError, Matrix, Vector};
use crate::plant::{LtiPlant, SetPoint};
use crate::synthesis::Controller;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid simulation setting: {0}")]
    Config(String),
    #[error("pixel {pixel}: initial reference q0 = {q0} is inconsistent with y0 = {y0} and bounds [{m}, {big_m}]")]
    Initialization { pixel: usize, y0: f64, q0: f64, m: f64, big_m: f64 },
    #[error("event accumulation at t = {t}: {events} events within one step")]
    Zeno { t: f64, events: usize },
    #[error("state became non-finite at t = {0}")]
    NonFinite(f64),
    #[error(transparent)]
    Dvs(#[from] DvsError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, SimError>;

#[derive(Debug, Clone, PartialEq)]
pub enum Q0Policy {
    /// `q_i(0) = y_i(0)`
    EqualToY0,
    /// `q_i(0) = (m_i + M_i)/2`
    Midpoint,
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    pub zeno_band: f64,
    pub q0_policy: Q0Policy,
    /// Record every `sample_stride`-th step.
    pub sample_stride: usize,
    pub bisect_tol: f64,
    pub max_events_per_step: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            horizon: 5.0,
            zeno_band: 1e-4,
            q0_policy: Q0Policy::EqualToY0,
            sample_stride: 10,
            bisect_tol: 1e-10,
            max_events_per_step: 10_000,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(SimError::Config(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("dt", self.dt)?;
        positive("horizon", self.horizon)?;
        positive("bisect_tol", self.bisect_tol)?;
        if !(self.zeno_band >= 0.0) {
            return Err(SimError::Config(format!("zeno_band must be non-negative, got {}", self.zeno_band)));
        }
        if self.sample_stride == 0 || self.max_events_per_step == 0 {
            return Err(SimError::Config("sample_stride and max_events_per_step must be positive".into()));
        }
        Ok(())
    }
}

/// Full hybrid state at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridState {
    pub t: f64,
    /// Shifted plant state `x = xᵒ - x_d`.
    pub x: Vector,
    pub xc: Vector,
    pub q: Vec<f64>,
    pub q_hat: Vec<f64>,
    pub zbar: Vec<f64>,
    pub in_band: Vec<bool>,
    pub event_count: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub x: Vector,
    pub xo: Vector,
    pub xc: Vector,
    pub u: Vector,
    pub uo: Vector,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub zbar: Vec<f64>,
    pub q: Vec<f64>,
    pub q_hat: Vec<f64>,
    pub in_band: Vec<bool>,
    /// `‖xᵒ - x_d‖₂`
    pub err: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub events: Vec<RetinalEvent>,
    pub final_state: HybridState,
    pub rho: f64,
}

impl Trajectory {
    pub fn event_count(&self) -> usize {
        self.events.iter().filter(|e| matches!(e.kind, EventKind::Polarity(_))).count()
    }

    pub fn sign_flips(&self) -> usize {
        self.events.len() - self.event_count()
    }
}

/// Maximum and mean of `‖xᵒ(t) - x_d‖` over samples with `t ≥ from`.
pub fn steady_state_error(traj: &Trajectory, from: f64) -> (f64, f64) {
    let errs: Vec<f64> = traj.samples.iter().filter(|s| s.t >= from).map(|s| s.err).collect();
    if errs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let max = errs.iter().copied().fold(0.0, f64::max);
    (max, errs.iter().sum::<f64>() / errs.len() as f64)
}

/// Localized events stop once they are this far (relatively) past the guard.
const GUARD_OVERSHOOT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Crossing {
    Event(Polarity),
    EnterBand,
    ExitBand,
}

struct Loop<'a> {
    plant: &'a LtiPlant,
    k: &'a Controller,
    camera: &'a DvsCamera,
    gains: &'a [EstimatorGains],
    /// `c'(x_d + δx_i)`
    d_vec: Vec<f64>,
    n: usize,
    nk: usize,
    flow: Matrix,
    band: f64,
}

impl Loop<'_> {
    fn y(&self, s: &Vector, i: usize) -> f64 {
        self.plant.c().dot(&s.rows(0, self.n)) + self.d_vec[i]
    }

    fn crossing(&self, s: &Vector, i: usize, q: f64, in_band: bool) -> Option<Crossing> {
        let y = self.y(s, i);
        if in_band {
            return (y.abs() > self.band).then_some(Crossing::ExitBand);
        }
        if y.abs() <= self.band {
            return Some(Crossing::EnterBand);
        }
        let ratio = y / q;
        let rho = self.camera.rho();
        if ratio >= 1.0 / rho {
            Some(Crossing::Event(Polarity::On))
        } else if ratio <= rho {
            Some(Crossing::Event(Polarity::Off))
        } else {
            None
        }
    }

    /// Relative distance past the guard boundary at a firing state.
    fn overshoot(&self, s: &Vector, i: usize, q: f64, in_band: bool) -> f64 {
        let y = self.y(s, i);
        let rho = self.camera.rho();
        match self.crossing(s, i, q, in_band) {
            Some(Crossing::Event(Polarity::On)) => y / q * rho - 1.0,
            Some(Crossing::Event(Polarity::Off)) => 1.0 - y / (q * rho),
            Some(Crossing::EnterBand) => 1.0 - y.abs() / self.band,
            Some(Crossing::ExitBand) => y.abs() / self.band - 1.0,
            None => 0.0,
        }
    }

    fn propagate(&self, s: &Vector, tau: f64) -> Result<Vector> {
        Ok(linalg::matrix_exponential(&self.flow, tau)? * s)
    }

    fn pack(&self, x: &Vector, xc: &Vector, zbar: &[f64]) -> Vector {
        let mut s = Vector::zeros(self.n + self.nk + zbar.len());
        s.rows_mut(0, self.n).copy_from(x);
        s.rows_mut(self.n, self.nk).copy_from(xc);
        for (j, z) in zbar.iter().enumerate() {
            s[self.n + self.nk + j] = *z;
        }
        s
    }

    fn zbar_of(&self, q_hat: f64, i: usize) -> f64 {
        output_estimate(&EstimatorState::new(q_hat), &self.gains[i]) - self.d_vec[i]
    }

    fn control(&self, s: &Vector) -> Vector {
        let r = self.d_vec.len();
        &self.k.c * s.rows(self.n, self.nk) + &self.k.d * s.rows(self.n + self.nk, r)
    }
}

#[allow(clippy::too_many_arguments)]
pub fn simulate(
    plant: &LtiPlant,
    setpoint: &SetPoint,
    camera: &DvsCamera,
    bounds: &[PixelBounds],
    gains: &[EstimatorGains],
    k: &Controller,
    x0: &Vector,
    cfg: &SimConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    let (n, r, nk) = (plant.states(), plant.pixels(), k.order());
    if bounds.len() != r || gains.len() != r {
        return Err(SimError::Config(format!("expected {r} pixel bounds and gains")));
    }
    if x0.len() != n || k.b.ncols() != r || k.c.nrows() != plant.inputs() {
        return Err(SimError::Config("initial state or controller dimensions do not match the plant".into()));
    }
    let xd = setpoint.xd();
    let mut flow = Matrix::zeros(n + nk + r, n + nk + r);
    flow.view_mut((0, 0), (n, n)).copy_from(plant.a());
    flow.view_mut((0, n), (n, nk)).copy_from(&(plant.b() * &k.c));
    flow.view_mut((0, n + nk), (n, r)).copy_from(&(plant.b() * &k.d));
    flow.view_mut((n, n), (nk, nk)).copy_from(&k.a);
    flow.view_mut((n, n + nk), (nk, r)).copy_from(&k.b);
    let sys = Loop {
        plant,
        k,
        camera,
        gains,
        d_vec: plant.pixel_offsets().iter().map(|o| plant.c().dot(&(xd + o))).collect(),
        n,
        nk,
        flow,
        band: cfg.zeno_band,
    };

    let x_init = x0 - xd;
    let y0: Vec<f64> = (0..r).map(|i| plant.c().dot(&(x0 + &plant.pixel_offsets()[i]))).collect();
    let q0: Vec<f64> = match &cfg.q0_policy {
        Q0Policy::EqualToY0 => y0.clone(),
        Q0Policy::Midpoint => bounds.iter().map(|b| b.midpoint()).collect(),
        Q0Policy::Explicit(v) if v.len() == r => v.clone(),
        Q0Policy::Explicit(v) => {
            return Err(SimError::Config(format!("explicit q0 has {} entries, expected {r}", v.len())));
        }
    };
    let mut pixels = Vec::with_capacity(r);
    for i in 0..r {
        let b = &bounds[i];
        if !crate::dvs::validate_initialization(y0[i], q0[i], b.m(), b.big_m(), camera) {
            return Err(SimError::Initialization { pixel: i, y0: y0[i], q0: q0[i], m: b.m(), big_m: b.big_m() });
        }
        pixels.push(PixelState::new(q0[i])?);
    }
    let mut est: Vec<EstimatorState> = gains.iter().map(EstimatorState::initial).collect();
    let zbar: Vec<f64> = (0..r).map(|i| sys.zbar_of(est[i].q_hat(), i)).collect();
    let mut s = sys.pack(&x_init, &Vector::zeros(nk), &zbar);
    let mut in_band: Vec<bool> = (0..r).map(|i| sys.y(&s, i).abs() <= sys.band).collect();
    let mut event_count = vec![0usize; r];
    let mut events = Vec::new();

    let steps = (cfg.horizon / cfg.dt).round().max(1.0) as usize;
    let phi = linalg::matrix_exponential(&sys.flow, cfg.dt)?;
    let mut samples = Vec::with_capacity(steps / cfg.sample_stride + 2);
    let record = |t: f64, s: &Vector, pixels: &[PixelState], est: &[EstimatorState], in_band: &[bool]| {
        let x = s.rows(0, n).into_owned();
        let u = sys.control(s);
        Sample {
            t,
            xo: &x + xd,
            err: x.norm(),
            uo: plant.to_original_control(&u, xd),
            u,
            xc: s.rows(n, nk).into_owned(),
            y: (0..r).map(|i| sys.y(s, i)).collect(),
            z: (0..r).map(|i| output_estimate(&est[i], &gains[i])).collect(),
            zbar: s.rows(n + nk, r).iter().copied().collect(),
            q: pixels.iter().map(|p| p.q()).collect(),
            q_hat: est.iter().map(|e| e.q_hat()).collect(),
            in_band: in_band.to_vec(),
            x,
        }
    };
    samples.push(record(0.0, &s, &pixels, &est, &in_band));

    let mut t = 0.0;
    for step in 1..=steps {
        let t_end = step as f64 * cfg.dt;
        let mut step_events = 0usize;
        loop {
            let remaining = t_end - t;
            let s_end = if (remaining - cfg.dt).abs() <= 1e-15 * t_end.max(1.0) {
                &phi * &s
            } else {
                sys.propagate(&s, remaining)?
            };
            if !s_end.iter().all(|v| v.is_finite()) {
                return Err(SimError::NonFinite(t));
            }
            // earliest crossing, ties to the lower pixel index
            let mut first: Option<(f64, usize, Vector)> = None;
            for i in 0..r {
                if sys.crossing(&s_end, i, pixels[i].q(), in_band[i]).is_none() {
                    continue;
                }
                let (mut lo, mut hi) = (0.0, remaining);
                let mut s_hi = s_end.clone();
                for _ in 0..200 {
                    if hi - lo <= cfg.bisect_tol
                        && sys.overshoot(&s_hi, i, pixels[i].q(), in_band[i]) <= GUARD_OVERSHOOT
                    {
                        break;
                    }
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    let s_mid = sys.propagate(&s, mid)?;
                    if sys.crossing(&s_mid, i, pixels[i].q(), in_band[i]).is_some() {
                        hi = mid;
                        s_hi = s_mid;
                    } else {
                        lo = mid;
                    }
                }
                if first.as_ref().is_none_or(|(tau, _, _)| hi < *tau) {
                    first = Some((hi, i, s_hi));
                }
            }
            let Some((tau, i, s_hit)) = first else {
                s = s_end;
                t = t_end;
                break;
            };
            s = s_hit;
            t += tau;
            // all guards that hold at this instant are resolved before flowing on
            let mut j = i;
            loop {
                step_events += 1;
                if step_events > cfg.max_events_per_step {
                    return Err(SimError::Zeno { t, events: step_events });
                }
                let y = sys.y(&s, j);
                match sys.crossing(&s, j, pixels[j].q(), in_band[j]) {
                    Some(Crossing::Event(p)) => {
                        let before = pixels[j].q();
                        pixels[j] = apply_event(pixels[j], p, camera);
                        est[j] = update_estimate(est[j], p, camera.rho());
                        s[n + nk + j] = sys.zbar_of(est[j].q_hat(), j);
                        event_count[j] += 1;
                        events.push(RetinalEvent {
                            t,
                            pixel: j,
                            kind: EventKind::Polarity(p),
                            y,
                            q_before: before,
                            q_after: pixels[j].q(),
                        });
                    }
                    Some(Crossing::EnterBand) => in_band[j] = true,
                    Some(Crossing::ExitBand) => {
                        in_band[j] = false;
                        if y.signum() != pixels[j].q().signum() {
                            let before = pixels[j].q();
                            pixels[j] = pixels[j].flipped();
                            est[j] = est[j].flipped();
                            s[n + nk + j] = sys.zbar_of(est[j].q_hat(), j);
                            events.push(RetinalEvent {
                                t,
                                pixel: j,
                                kind: EventKind::SignFlip,
                                y,
                                q_before: before,
                                q_after: pixels[j].q(),
                            });
                        }
                    }
                    None => {}
                }
                match (0..r).find(|&l| sys.crossing(&s, l, pixels[l].q(), in_band[l]).is_some()) {
                    Some(l) => j = l,
                    None => break,
                }
            }
            if t >= t_end {
                break;
            }
        }
        if step % cfg.sample_stride == 0 || step == steps {
            samples.push(record(t_end, &s, &pixels, &est, &in_band));
        }
    }

    let final_state = HybridState {
        t,
        x: s.rows(0, n).into_owned(),
        xc: s.rows(n, nk).into_owned(),
        q: pixels.iter().map(|p| p.q()).collect(),
        q_hat: est.iter().map(|e| e.q_hat()).collect(),
        zbar: s.rows(n + nk, r).iter().copied().collect(),
        in_band,
        event_count,
    };
    Ok(Trajectory { samples, events, final_state, rho: camera.rho() })
}
