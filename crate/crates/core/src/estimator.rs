//! Controller-side reconstruction of the unknown pixel output.
//!
//! The controller mirrors each pixel's reference update on an estimate
//! `q̂` initialised from the bounds `m ≤ q(0) ≤ M`, and holds
//! `z = λ q̂` between events. With the gains of [`init_gains`] the
//! relative error obeys `|z - y| ≤ δ_z |y|` whenever `ρ y ≤ q ≤ y/ρ`.

use thiserror::Error;

use crate::dvs::Polarity;
use crate::linalg::Vector;
use crate::plant::{LtiPlant, PlantError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("pixel bounds must satisfy 0 < m <= M, got m = {m}, M = {big_m}")]
    Bounds { m: f64, big_m: f64 },
    #[error("rho must lie in (0, 1), got {0}")]
    Rho(f64),
    #[error("target relative error must lie in (0, 1), got {0}")]
    DeltaBar(f64),
    #[error("grid needs at least 1000 points per axis, got {0}")]
    Grid(usize),
    #[error("infeasible: delta_bar = {delta_bar} does not exceed delta_q = {delta_q}")]
    Infeasible { delta_bar: f64, delta_q: f64 },
}

/// Bounds `m ≤ q(0) ≤ M` on a pixel's unknown initial reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelBounds {
    m: f64,
    big_m: f64,
}

impl PixelBounds {
    pub fn new(m: f64, big_m: f64) -> Result<Self, EstimatorError> {
        if !(m > 0.0 && m <= big_m && big_m.is_finite()) {
            return Err(EstimatorError::Bounds { m, big_m });
        }
        Ok(Self { m, big_m })
    }

    /// `[y0 - dy, y0 + dy]`
    pub fn around(y0: f64, dy: f64) -> Result<Self, EstimatorError> {
        Self::new(y0 - dy, y0 + dy)
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn big_m(&self) -> f64 {
        self.big_m
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.m + self.big_m)
    }

    /// `M / m ≥ 1`
    pub fn spread(&self) -> f64 {
        self.big_m / self.m
    }

    /// `q̂(0) = 2mM/(M+m)`, the harmonic mean.
    pub fn q_hat0(&self) -> f64 {
        2.0 * self.m * self.big_m / (self.big_m + self.m)
    }

    /// `δ_q = (M-m)/(M+m)`
    pub fn delta_q(&self) -> f64 {
        (self.big_m - self.m) / (self.big_m + self.m)
    }

    /// `δ_z(ρ) = (M - mρ²)/(M + mρ²)`
    pub fn delta_z(&self, rho: f64) -> f64 {
        let mr2 = self.m * rho * rho;
        (self.big_m - mr2) / (self.big_m + mr2)
    }

    /// `λ̄(ρ) = 2mMρ/(M + mρ²)`
    pub fn lambda_bar(&self, rho: f64) -> f64 {
        2.0 * self.m * self.big_m * rho / (self.big_m + self.m * rho * rho)
    }

    /// Worst-case relative error of `z = λ̄ ρ^{-Σp}` for a given `(ρ, λ̄)`:
    /// `max{1 - λ̄ρ/M, λ̄/(mρ) - 1}`.
    pub fn relative_error(&self, rho: f64, lambda_bar: f64) -> f64 {
        (1.0 - lambda_bar * rho / self.big_m).max(lambda_bar / (self.m * rho) - 1.0)
    }

    /// Smallest `ρ` with `δ_z(ρ) ≤ δ̄`: `√((M/m)(1-δ̄)/(1+δ̄))`.
    pub fn rho_for_delta(&self, delta_bar: f64) -> f64 {
        (self.spread() * (1.0 - delta_bar) / (1.0 + delta_bar)).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorGains {
    pub q_hat0: f64,
    pub delta_q: f64,
    pub lambda: f64,
    pub delta_z: f64,
    pub lambda_bar: f64,
}

pub fn init_gains(bounds: &PixelBounds, rho: f64) -> Result<EstimatorGains, EstimatorError> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(EstimatorError::Rho(rho));
    }
    let (m, big_m) = (bounds.m, bounds.big_m);
    let denom = big_m + m * rho * rho;
    let q_hat0 = bounds.q_hat0();
    let lambda = (big_m + m) * rho / denom;
    Ok(EstimatorGains {
        q_hat0,
        delta_q: bounds.delta_q(),
        lambda,
        delta_z: (big_m - m * rho * rho) / denom,
        lambda_bar: 2.0 * m * big_m * rho / denom,
    })
}

/// Controller-side copy of a pixel's trigger reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorState {
    q_hat: f64,
}

impl EstimatorState {
    pub fn new(q_hat: f64) -> Self {
        Self { q_hat }
    }

    pub fn initial(gains: &EstimatorGains) -> Self {
        Self { q_hat: gains.q_hat0 }
    }

    pub fn q_hat(&self) -> f64 {
        self.q_hat
    }

    pub(crate) fn flipped(self) -> Self {
        Self { q_hat: -self.q_hat }
    }
}

/// `q̂⁺ = q̂·ρ^{-p}`
pub fn update_estimate(state: EstimatorState, polarity: Polarity, rho: f64) -> EstimatorState {
    EstimatorState { q_hat: state.q_hat * polarity.factor(rho) }
}

/// `z = λ q̂`
pub fn output_estimate(state: &EstimatorState, gains: &EstimatorGains) -> f64 {
    gains.lambda * state.q_hat
}

/// `z̄_i = z_i - c'(x_d + δx_i)`, the controller input for pixel `i`.
pub fn shift_output(z: f64, plant: &LtiPlant, xd: &Vector, pixel: usize) -> Result<f64, PlantError> {
    let offset = plant.pixel_offset(pixel)?;
    Ok(z - plant.c().dot(xd) - plant.c().dot(offset))
}

/// Multiplicative slack on sector checks for numerically localized events.
pub const SECTOR_SLACK: f64 = 1e-9;

/// `ρ y ≤ q ≤ y/ρ`, evaluated on magnitudes with matching signs.
pub fn sector_check(y: f64, q: f64, rho: f64) -> bool {
    if y == 0.0 || q == 0.0 || y.signum() != q.signum() {
        return false;
    }
    let (y, q) = (y.abs(), q.abs());
    rho * y <= q * (1.0 + SECTOR_SLACK) && q <= y / rho * (1.0 + SECTOR_SLACK)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOptimum {
    pub rho_star: f64,
    pub lambda_bar_star: f64,
    pub rho_step: f64,
    pub lambda_step: f64,
}

/// Exhaustive search for the smallest `ρ` (and a matching `λ̄`) such that
/// the worst-case relative error stays below `δ̄`, over the grid
/// `ρ_k = k/N_ρ`, `λ̄_j = 2M j/N_λ`. Independent of the closed forms.
pub fn brute_force_rho_lambda(
    bounds: &PixelBounds,
    delta_bar: f64,
    rho_points: usize,
    lambda_points: usize,
) -> Result<GridOptimum, EstimatorError> {
    if !(delta_bar > 0.0 && delta_bar < 1.0) {
        return Err(EstimatorError::DeltaBar(delta_bar));
    }
    for n in [rho_points, lambda_points] {
        if n < 1000 {
            return Err(EstimatorError::Grid(n));
        }
    }
    let rho_step = 1.0 / rho_points as f64;
    let lambda_step = 2.0 * bounds.big_m / lambda_points as f64;
    for k in 1..rho_points {
        let rho = k as f64 * rho_step;
        let feasible: Vec<f64> = (1..=lambda_points)
            .map(|j| j as f64 * lambda_step)
            .filter(|&lb| bounds.relative_error(rho, lb) <= delta_bar)
            .collect();
        if !feasible.is_empty() {
            // report the grid point with the smallest worst-case error
            let lambda_bar_star = feasible
                .iter()
                .copied()
                .min_by(|a, b| bounds.relative_error(rho, *a).total_cmp(&bounds.relative_error(rho, *b)))
                .expect("non-empty");
            return Ok(GridOptimum { rho_star: rho, lambda_bar_star, rho_step, lambda_step });
        }
    }
    Err(EstimatorError::Infeasible { delta_bar, delta_q: bounds.delta_q() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dvs::{apply_event, DvsCamera, PixelState};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn known_initial_reference_gives_harmonic_gain() {
        let g = init_gains(&PixelBounds::new(1.0, 1.0).unwrap(), 0.5).unwrap();
        assert_eq!(g.q_hat0, 1.0);
        assert_eq!(g.delta_q, 0.0);
        assert!((g.lambda - 0.8).abs() < 1e-15);
        assert!((g.lambda - 2.0 * 0.5 / 1.25).abs() < 1e-15);
        assert!((g.delta_z - 0.6).abs() < 1e-15);
    }

    #[test]
    fn gains_for_uncertain_reference() {
        let g = init_gains(&PixelBounds::new(1.0, 1.4).unwrap(), 0.5).unwrap();
        assert!((g.q_hat0 - 7.0 / 6.0).abs() < 1e-15);
        assert!((g.delta_q - 1.0 / 6.0).abs() < 1e-15);
        assert!((g.lambda - 1.2 / 1.65).abs() < 1e-15);
        assert!((g.delta_z - 1.15 / 1.65).abs() < 1e-15);
        assert!((g.lambda_bar - 1.4 / 1.65).abs() < 1e-15);
        assert!((g.lambda * g.q_hat0 - g.lambda_bar).abs() < 1e-15);
    }

    #[test]
    fn vanishing_threshold_limit() {
        let g = init_gains(&PixelBounds::new(2.0, 2.0).unwrap(), 1.0 - 1e-9).unwrap();
        assert!((g.lambda - 1.0).abs() < 1e-12);
        assert!(g.delta_z < 1e-8);
        assert!(matches!(init_gains(&PixelBounds::new(1.0, 2.0).unwrap(), 1.0), Err(EstimatorError::Rho(_))));
    }

    #[test]
    fn bounds_validation() {
        assert!(PixelBounds::new(0.0, 1.0).is_err());
        assert!(PixelBounds::new(2.0, 1.0).is_err());
        assert!(PixelBounds::new(1.0, 1.0).is_ok());
    }

    #[test]
    fn delta_z_decreasing_with_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let m = rng.random_range(0.1..2.0);
            let b = PixelBounds::new(m, m * rng.random_range(1.0..2.0)).unwrap();
            let mut prev = f64::INFINITY;
            for k in 1..1000 {
                let d = b.delta_z(k as f64 / 1000.0);
                assert!(d < prev);
                prev = d;
            }
            assert!((b.delta_z(1e-9) - 1.0).abs() < 1e-12);
            assert!((b.delta_z(1.0 - 1e-12) - b.delta_q()).abs() < 1e-10);
        }
    }

    #[test]
    fn estimate_updates_match_sensor_and_product_form() {
        let cam = DvsCamera::new(1.0, 2.0).unwrap();
        let est = update_estimate(EstimatorState::new(2.0), Polarity::On, cam.rho());
        assert_eq!(est.q_hat(), apply_event(PixelState::new(2.0).unwrap(), Polarity::On, &cam).q());
        assert_eq!(update_estimate(EstimatorState::new(2.0), Polarity::Off, 0.5).q_hat(), 1.0);

        let rho = 0.87;
        let mut s = EstimatorState::new(1.3);
        for k in 0..20 {
            s = update_estimate(s, if k % 2 == 0 { Polarity::On } else { Polarity::Off }, rho);
        }
        assert!((s.q_hat() - 1.3).abs() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut s = EstimatorState::new(1.3);
        let mut net = 0i32;
        for _ in 0..1000 {
            let p = if rng.random_bool(0.5) { Polarity::On } else { Polarity::Off };
            net += p.sign();
            s = update_estimate(s, p, rho);
        }
        let product = 1.3 * rho.powi(-net);
        assert!((s.q_hat() - product).abs() <= 1e-12 * product.max(1.0));
    }

    #[test]
    fn output_estimate_examples() {
        let b = PixelBounds::new(1.0, 1.4).unwrap();
        let g = init_gains(&b, 0.5).unwrap();
        assert!((output_estimate(&EstimatorState::initial(&g), &g) - 1.4 / 1.65).abs() < 1e-15);
        let b = PixelBounds::new(0.7, 0.7).unwrap();
        let g = init_gains(&b, 0.8).unwrap();
        let z = output_estimate(&EstimatorState::new(0.7), &g);
        assert!((z - 2.0 * 0.8 / (1.0 + 0.64) * 0.7).abs() < 1e-15);
    }

    #[test]
    fn relative_error_sandwich_over_random_sector_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10_000 {
            let m = rng.random_range(0.05..3.0);
            let b = PixelBounds::new(m, m * rng.random_range(1.0..1.8)).unwrap();
            let rho = rng.random_range(0.05..0.999);
            let g = init_gains(&b, rho).unwrap();
            let y = rng.random_range(0.01..10.0);
            // any q in the sector and any admissible q(0)
            let q = y * rng.random_range(rho..1.0 / rho);
            let q0 = rng.random_range(b.m()..=b.big_m());
            let delta_q = g.q_hat0 / q0 - 1.0;
            assert!(delta_q.abs() <= g.delta_q * (1.0 + 1e-12) + 1e-15);
            let z = g.lambda * (1.0 + delta_q) * q;
            assert!((1.0 - g.delta_z) * y <= z * (1.0 + 1e-12));
            assert!(z <= (1.0 + g.delta_z) * y * (1.0 + 1e-12));
        }
    }

    #[test]
    fn shift_output_examples() {
        use crate::linalg::from_rows;
        let s5 = 5f64.sqrt();
        let plant = LtiPlant::new(
            from_rows(&[&[2.0, 10.0], &[0.0, 5.0]]),
            from_rows(&[&[1.0], &[1.0]]),
            Vector::from_vec(vec![2.0 / s5, 1.0 / s5]),
            vec![Vector::zeros(2)],
        )
        .unwrap();
        assert_eq!(shift_output(0.3, &plant, &Vector::zeros(2), 0).unwrap(), 0.3);
        let xd = Vector::from_vec(vec![-0.2321, 0.0928]);
        let offset = 0.3 - shift_output(0.3, &plant, &xd, 0).unwrap();
        assert!((offset - (2.0 * -0.2321 + 0.0928) / s5).abs() < 1e-15);
        assert!((offset + 0.166086).abs() < 2e-5);
        // exact estimate reads the shifted state
        let x = Vector::from_vec(vec![0.1, -0.2]);
        let y = plant.luminosity_output(&xd, &x, 0).unwrap();
        assert!((shift_output(y, &plant, &xd, 0).unwrap() - plant.c().dot(&x)).abs() < 1e-15);
    }

    #[test]
    fn sector_examples() {
        assert!(sector_check(1.0, 1.0, 0.5));
        assert!(sector_check(1.0, 2.0, 0.5));
        assert!(!sector_check(1.0, 2.01, 0.5));
        assert!(!sector_check(1.0, 0.49, 0.5));
        assert!(sector_check(-1.0, -1.5, 0.5));
        assert!(!sector_check(-1.0, 1.0, 0.5));
    }

    #[test]
    fn grid_optimum_for_reference_case() {
        let b = PixelBounds::new(1.0, 1.4).unwrap();
        let opt = brute_force_rho_lambda(&b, 0.35, 1000, 1000).unwrap();
        let rho = b.rho_for_delta(0.35);
        assert!((rho - 0.8211).abs() < 1e-4);
        assert!(opt.rho_star >= rho && opt.rho_star - rho <= opt.rho_step);
        assert!((opt.lambda_bar_star - b.lambda_bar(rho)).abs() <= opt.lambda_step);
    }

    #[test]
    fn grid_with_exact_reference() {
        let b = PixelBounds::new(1.0, 1.0).unwrap();
        let opt = brute_force_rho_lambda(&b, 0.2, 1000, 1000).unwrap();
        let rho = ((1.0 - 0.2) / 1.2f64).sqrt();
        assert!(opt.rho_star >= rho && opt.rho_star - rho <= opt.rho_step);
    }

    #[test]
    fn grid_reports_infeasible_target() {
        let b = PixelBounds::new(1.0, 1.4).unwrap();
        let err = brute_force_rho_lambda(&b, 0.1, 1000, 1000).unwrap_err();
        assert!(matches!(err, EstimatorError::Infeasible { .. }));
        assert!(matches!(brute_force_rho_lambda(&b, 0.3, 10, 1000), Err(EstimatorError::Grid(10))));
    }
}
