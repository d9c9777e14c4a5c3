//! End-to-end experiment: plant → set-point → generalized plant →
//! controller → threshold certificate → hybrid simulation.

use std::fmt;

use thiserror::Error;

use crate::config::{ExperimentConfig, PixelBoundSpec};
use crate::dvs::DvsCamera;
use crate::estimator::{init_gains, EstimatorGains, PixelBounds};
use crate::linalg::Vector;
use crate::plant::{LtiPlant, SetPoint};
use crate::sim::{simulate, steady_state_error, Trajectory};
use crate::synthesis::{self, Controller, GeneralizedPlant, ThresholdReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Pixels,
    Plant,
    SetPoint,
    Bounds,
    Synthesis,
    Threshold,
    Camera,
    Simulation,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Pixels => "pixel selection",
            Stage::Plant => "plant",
            Stage::SetPoint => "set-point",
            Stage::Bounds => "pixel bounds",
            Stage::Synthesis => "synthesis",
            Stage::Threshold => "threshold",
            Stage::Camera => "camera",
            Stage::Simulation => "simulation",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{stage} stage failed: {message}")]
pub struct PipelineError {
    pub stage: Stage,
    pub message: String,
}

fn at<E: fmt::Display>(stage: Stage) -> impl FnOnce(E) -> PipelineError {
    move |e| PipelineError { stage, message: e.to_string() }
}

pub type Result<T> = std::result::Result<T, PipelineError>;

/// Validated plant and sensor setup for one pixel subset.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub plant: LtiPlant,
    pub setpoint: SetPoint,
    pub x0: Vector,
    pub bounds: Vec<PixelBounds>,
    /// 0-based indices into the configured pixel list.
    pub pixels: Vec<usize>,
}

/// Checks a 0-based pixel subset against the configured pixel count.
pub fn check_subset(subset: &[usize], available: usize) -> Result<()> {
    let fail = |message: String| Err(PipelineError { stage: Stage::Pixels, message });
    if subset.is_empty() {
        return fail("empty pixel subset".into());
    }
    for (k, &i) in subset.iter().enumerate() {
        if i >= available {
            return fail(format!("pixel {} does not exist ({available} configured)", i + 1));
        }
        if subset[..k].contains(&i) {
            return fail(format!("pixel {} listed twice", i + 1));
        }
    }
    Ok(())
}

pub fn prepare(cfg: &ExperimentConfig, subset: Option<&[usize]>) -> Result<Experiment> {
    let all: Vec<usize> = (0..cfg.pixels()).collect();
    let pixels = subset.map(<[usize]>::to_vec).unwrap_or(all);
    check_subset(&pixels, cfg.pixels())?;
    let full = LtiPlant::new(cfg.a.clone(), cfg.b.clone(), cfg.c.clone(), cfg.offsets.clone()).map_err(at(Stage::Plant))?;
    let plant = full.with_pixels(&pixels).map_err(at(Stage::Plant))?;
    let setpoint = SetPoint::new(&plant, cfg.xd.clone()).map_err(at(Stage::SetPoint))?;
    let bounds = pixels
        .iter()
        .map(|&i| match &cfg.bounds {
            PixelBoundSpec::DeltaY(dy) => PixelBounds::around(cfg.c.dot(&(&cfg.x0 + &cfg.offsets[i])), *dy),
            PixelBoundSpec::Explicit { m, big_m } => PixelBounds::new(m[i], big_m[i]),
        })
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(at(Stage::Bounds))?;
    Ok(Experiment { plant, setpoint, x0: cfg.x0.clone(), bounds, pixels })
}

#[derive(Debug, Clone)]
pub struct Certified {
    pub experiment: Experiment,
    pub generalized: GeneralizedPlant,
    pub controller: Controller,
    pub report: ThresholdReport,
}

pub fn synthesize(cfg: &ExperimentConfig, subset: Option<&[usize]>) -> Result<(Experiment, GeneralizedPlant, Controller)> {
    let exp = prepare(cfg, subset)?;
    let gp = synthesis::build_generalized_plant(&exp.plant, &exp.setpoint, cfg.epsilon_u).map_err(at(Stage::Synthesis))?;
    let k = synthesis::synthesize_controller(&gp, cfg.gamma_tol).map_err(at(Stage::Synthesis))?;
    Ok((exp, gp, k))
}

pub fn certify(cfg: &ExperimentConfig, subset: Option<&[usize]>) -> Result<Certified> {
    let (experiment, generalized, controller) = synthesize(cfg, subset)?;
    let report = synthesis::certify(&generalized, &controller, &experiment.bounds, cfg.epsilon, cfg.base)
        .map_err(at(Stage::Threshold))?;
    Ok(Certified { experiment, generalized, controller, report })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub h_used: f64,
    /// Start of the window over which the steady-state error is taken.
    pub window_start: f64,
    pub err_max: f64,
    pub err_mean: f64,
    pub events: usize,
    pub sign_flips: usize,
    pub epsilon: f64,
    /// `err_max < ε`
    pub pass: bool,
}

impl RunSummary {
    pub fn verdict(&self) -> &'static str {
        if self.pass {
            "PASS"
        } else {
            "FAIL"
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub certified: Certified,
    pub camera: DvsCamera,
    pub gains: Vec<EstimatorGains>,
    pub trajectory: Trajectory,
    pub summary: RunSummary,
}

/// Simulates a certified loop at threshold `h` (default `h_fraction·h*`).
pub fn run_certified(cfg: &ExperimentConfig, certified: Certified, h: Option<f64>) -> Result<PipelineResult> {
    let h_used = h.unwrap_or(cfg.h_fraction * certified.report.h_star);
    let camera = DvsCamera::new(h_used, cfg.base).map_err(at(Stage::Camera))?;
    let exp = &certified.experiment;
    let gains = exp
        .bounds
        .iter()
        .map(|b| init_gains(b, camera.rho()))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(at(Stage::Camera))?;
    let trajectory = simulate(
        &exp.plant,
        &exp.setpoint,
        &camera,
        &exp.bounds,
        &gains,
        &certified.controller,
        &exp.x0,
        &cfg.sim,
    )
    .map_err(at(Stage::Simulation))?;
    let window_start = 0.5 * cfg.sim.horizon;
    let (err_max, err_mean) = steady_state_error(&trajectory, window_start);
    let summary = RunSummary {
        h_used,
        window_start,
        err_max,
        err_mean,
        events: trajectory.event_count(),
        sign_flips: trajectory.sign_flips(),
        epsilon: cfg.epsilon,
        pass: err_max < cfg.epsilon,
    };
    Ok(PipelineResult { certified, camera, gains, trajectory, summary })
}

pub fn run_pipeline(cfg: &ExperimentConfig, subset: Option<&[usize]>, h: Option<f64>) -> Result<PipelineResult> {
    let certified = certify(cfg, subset)?;
    run_certified(cfg, certified, h)
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub pixels: Vec<usize>,
    pub outcome: Result<PipelineResult>,
}

impl SweepRow {
    pub fn r(&self) -> usize {
        self.pixels.len()
    }
}

/// Runs each subset independently and concurrently; failures are recorded
/// per row.
pub fn sweep(cfg: &ExperimentConfig, subsets: &[Vec<usize>], h: Option<f64>) -> Vec<SweepRow> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = subsets
            .iter()
            .map(|subset| scope.spawn(move || run_pipeline(cfg, Some(subset), h)))
            .collect();
        subsets
            .iter()
            .zip(handles)
            .map(|(subset, handle)| SweepRow {
                pixels: subset.clone(),
                outcome: handle.join().unwrap_or_else(|_| {
                    Err(PipelineError { stage: Stage::Simulation, message: "worker panicked".into() })
                }),
            })
            .collect()
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FormulaCheck {
    pub name: String,
    pub expected: f64,
    pub computed: f64,
}

impl FormulaCheck {
    pub const TOL: f64 = 1e-12;

    pub fn pass(&self) -> bool {
        (self.expected - self.computed).abs() <= Self::TOL
    }
}

/// Closed-form estimator and threshold formulas against hand-evaluated
/// values.
pub fn verify_formulas() -> Vec<FormulaCheck> {
    let mut out = Vec::new();
    let mut check = |name: String, expected: f64, computed: f64| out.push(FormulaCheck { name, expected, computed });

    // (m, M, ρ, q̂0, δq, λ, δz, λ̄), values by hand as exact fractions
    let cases: [(f64, f64, f64, f64, f64, f64, f64, f64); 5] = [
        (1.0, 1.4, 0.5, 2.8 / 2.4, 0.4 / 2.4, 1.2 / 1.65, 1.15 / 1.65, 1.4 / 1.65),
        (1.0, 1.0, 0.5, 1.0, 0.0, 1.0 / 1.25, 0.75 / 1.25, 1.0 / 1.25),
        (2.0, 3.0, 0.8, 12.0 / 5.0, 1.0 / 5.0, 4.0 / 4.28, 1.72 / 4.28, 9.6 / 4.28),
        (0.5, 2.0, 0.9, 2.0 / 2.5, 1.5 / 2.5, 2.25 / 2.405, 1.595 / 2.405, 1.8 / 2.405),
        (0.1, 0.3, 0.25, 0.06 / 0.4, 0.2 / 0.4, 0.1 / 0.30625, 0.29375 / 0.30625, 0.015 / 0.30625),
    ];
    for (m, big_m, rho, q0, dq, lam, dz, lb) in cases {
        let b = PixelBounds::new(m, big_m).expect("valid bounds");
        let g = init_gains(&b, rho).expect("valid rho");
        let tag = format!("m={m}, M={big_m}, rho={rho}");
        check(format!("q_hat0 [{tag}]"), q0, g.q_hat0);
        check(format!("delta_q [{tag}]"), dq, g.delta_q);
        check(format!("lambda [{tag}]"), lam, g.lambda);
        check(format!("delta_z [{tag}]"), dz, g.delta_z);
        check(format!("lambda_bar [{tag}]"), lb, g.lambda_bar);
    }
    // harmonic-mean gain at m = M
    for (rho, expected) in [(0.5, 0.8), (0.8, 1.6 / 1.64), (0.25, 0.5 / 1.0625)] {
        let g = init_gains(&PixelBounds::new(1.3, 1.3).expect("valid bounds"), rho).expect("valid rho");
        check(format!("lambda_hm [rho={rho}]"), expected, g.lambda);
    }
    // h* = log_b √(min(m/M)·(1+δ)/(1-δ))
    let h_cases: [(f64, f64, f64, f64); 4] = [
        (1.0, 1.0, 0.35, 0.5 * (1.35f64 / 0.65).ln()),
        (1.0, 1.4, 0.35, 0.5 * (1.35f64 / (0.65 * 1.4)).ln()),
        (1.0, 1.0, 0.6, 0.5 * 4f64.ln() / 2f64.ln()),
        (1.0, 1.5, 0.5, 0.5 * 2f64.ln() / 10f64.ln()),
    ];
    for ((m, big_m, delta, expected), base) in h_cases.into_iter().zip([std::f64::consts::E, std::f64::consts::E, 2.0, 10.0]) {
        let b = PixelBounds::new(m, big_m).expect("valid bounds");
        let th = synthesis::max_threshold(delta, &[b], base).expect("positive threshold");
        check(format!("h_star [m={m}, M={big_m}, delta={delta}, b={base}]"), expected, th.h_star);
    }
    out
}
