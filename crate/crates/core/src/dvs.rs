//! Dynamic vision sensor pixel model.
//!
//! A pixel keeps a trigger reference `q` and fires when the logarithmic
//! distance `τ = log_b|y| - log_b|q|` reaches the threshold `h`, i.e. when
//! `|y/q| ≥ 1/ρ` (ON) or `|y/q| ≤ ρ` (OFF) with `ρ = b^{-h}`. Each event
//! resets the reference multiplicatively, `q⁺ = q·ρ^{-p}`.
//!
//! The reference carries the sign of the luminosity it tracks. For
//! physical (positive) luminosity it never changes sign; for signed
//! outputs the simulator flips it when the output leaves the zero band
//! on the opposite side (see [`EventKind::SignFlip`]).

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DvsError {
    #[error("event threshold must be positive and finite, got {0}")]
    Threshold(f64),
    #[error("logarithm base must exceed 1, got {0}")]
    Base(f64),
    #[error("luminosity must be nonzero and finite, got {0}")]
    Luminosity(f64),
    #[error("trigger reference must be nonzero and finite, got {0}")]
    Reference(f64),
    #[error("polarity must be -1 or +1, got {0}")]
    Polarity(i32),
}

/// `ρ = b^{-h}`.
pub fn rho_from_threshold(h: f64, base: f64) -> Result<f64, DvsError> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(DvsError::Threshold(h));
    }
    if !(base > 1.0) || !base.is_finite() {
        return Err(DvsError::Base(base));
    }
    Ok(base.powf(-h))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DvsCamera {
    threshold: f64,
    base: f64,
    rho: f64,
}

impl DvsCamera {
    pub fn new(threshold: f64, base: f64) -> Result<Self, DvsError> {
        let rho = rho_from_threshold(threshold, base)?;
        if !(rho > 0.0 && rho < 1.0) {
            // h so large that b^{-h} underflows
            return Err(DvsError::Threshold(threshold));
        }
        Ok(Self { threshold, base, rho })
    }

    /// Natural-log camera.
    pub fn natural(threshold: f64) -> Result<Self, DvsError> {
        Self::new(threshold, std::f64::consts::E)
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarity {
    On,
    Off,
}

impl Polarity {
    pub fn sign(self) -> i32 {
        match self {
            Polarity::On => 1,
            Polarity::Off => -1,
        }
    }

    /// `ρ^{-p}`
    pub fn factor(self, rho: f64) -> f64 {
        match self {
            Polarity::On => 1.0 / rho,
            Polarity::Off => rho,
        }
    }
}

impl TryFrom<i32> for Polarity {
    type Error = DvsError;

    fn try_from(p: i32) -> Result<Self, DvsError> {
        match p {
            1 => Ok(Polarity::On),
            -1 => Ok(Polarity::Off),
            other => Err(DvsError::Polarity(other)),
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:+}", self.sign())
    }
}

/// Per-pixel trigger reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelState {
    q: f64,
}

impl PixelState {
    pub fn new(q: f64) -> Result<Self, DvsError> {
        if q == 0.0 || !q.is_finite() {
            return Err(DvsError::Reference(q));
        }
        Ok(Self { q })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub(crate) fn flipped(self) -> Self {
        Self { q: -self.q }
    }
}

/// Result of evaluating the trigger condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trigger {
    /// `None` when the state is outside the guard set.
    pub polarity: Option<Polarity>,
    pub tau: f64,
}

pub fn evaluate_trigger(y: f64, pixel: &PixelState, camera: &DvsCamera) -> Result<Trigger, DvsError> {
    if y == 0.0 || !y.is_finite() {
        return Err(DvsError::Luminosity(y));
    }
    let ratio = (y / pixel.q).abs();
    let tau = (y.abs().ln() - pixel.q.abs().ln()) / camera.base.ln();
    let polarity = if ratio >= 1.0 / camera.rho {
        Some(Polarity::On)
    } else if ratio <= camera.rho {
        Some(Polarity::Off)
    } else {
        None
    };
    Ok(Trigger { polarity, tau })
}

/// `q⁺ = q·ρ^{-p}`.
pub fn apply_event(pixel: PixelState, polarity: Polarity, camera: &DvsCamera) -> PixelState {
    PixelState { q: pixel.q * polarity.factor(camera.rho) }
}

/// Initial reference bounds and ratio condition:
/// `0 < m ≤ q0 ≤ M` and `ρ < |y0/q0| < 1/ρ`.
pub fn validate_initialization(y0: f64, q0: f64, m: f64, big_m: f64, camera: &DvsCamera) -> bool {
    if !(m > 0.0 && m <= big_m && q0 >= m && q0 <= big_m) {
        return false;
    }
    let ratio = (y0 / q0).abs();
    ratio > camera.rho && ratio < 1.0 / camera.rho
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventKind {
    Polarity(Polarity),
    /// The output left the zero band with the opposite sign; the reference
    /// (and the controller's estimate of it) change sign, magnitude kept.
    SignFlip,
}

impl EventKind {
    /// Column value for the event log: `+1`/`-1`, `0` for a sign flip.
    pub fn code(&self) -> i32 {
        match self {
            EventKind::Polarity(p) => p.sign(),
            EventKind::SignFlip => 0,
        }
    }
}

/// One logged pixel event (pixel index is 0-based).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetinalEvent {
    pub t: f64,
    pub pixel: usize,
    pub kind: EventKind,
    pub y: f64,
    pub q_before: f64,
    pub q_after: f64,
}
