//! The controlled LTI plant `ẋ = A x + B u` with pixel-wise luminosity
//! outputs `y_i = c'(x + x_d + δx_i)` in set-point-shifted coordinates.

use num_complex::Complex64;
use thiserror::Error;

use crate::linalg::{self, CMatrix, LinalgError, Matrix, Vector};

/// Singular values below this fraction of the largest count as zero in
/// rank (PBH, range) tests.
pub const RANK_REL_TOL: f64 = 1e-8;

/// Relative tolerance of the set-point range test, measured against
/// `‖A‖·‖x_d‖`. Set-points are usually quoted to a handful of significant
/// digits, so an exact rank test would reject them; accepted set-points
/// are then snapped onto the exact subspace (see [`SetPoint::new`]).
pub const SETPOINT_REL_TOL: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlantError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("plant needs at least one pixel")]
    NoPixels,
    #[error("(A, B) is not stabilizable; uncontrollable unstable modes: {0:?}")]
    NotStabilizable(Vec<Complex64>),
    #[error("(A, c') is not detectable; unobservable unstable modes: {0:?}")]
    NotDetectable(Vec<Complex64>),
    #[error("set-point is not stabilizable (relative range residual {residual:.3e})")]
    SetPointNotStabilizable { residual: f64 },
    #[error("pixel index {index} out of range for {count} pixels")]
    PixelIndex { index: usize, count: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Outcome of the PBH stabilizability/detectability tests.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub eigenvalues: Vec<Complex64>,
    pub uncontrollable_unstable: Vec<Complex64>,
    pub unobservable_unstable: Vec<Complex64>,
}

impl ValidationReport {
    pub fn stabilizable(&self) -> bool {
        self.uncontrollable_unstable.is_empty()
    }

    pub fn detectable(&self) -> bool {
        self.unobservable_unstable.is_empty()
    }

    pub fn is_valid(&self) -> bool {
        self.stabilizable() && self.detectable()
    }
}

/// PBH rank tests on every eigenvalue with non-negative real part.
///
/// Never panics; dimension problems come back as `Err`, rank failures as
/// entries in the report.
pub fn validate_system(a: &Matrix, b: &Matrix, c: &Vector) -> Result<ValidationReport, PlantError> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || c.len() != n {
        return Err(PlantError::Dimension(format!(
            "A {:?}, B {:?}, c has {} entries",
            a.shape(),
            b.shape(),
            c.len()
        )));
    }
    let eigenvalues = linalg::eigenvalues(a)?;
    let ac = linalg::to_complex(a);
    let bc = linalg::to_complex(b);
    let cc = linalg::to_complex(&Matrix::from_row_slice(1, n, c.as_slice()));
    let mut report = ValidationReport {
        eigenvalues: eigenvalues.clone(),
        uncontrollable_unstable: Vec::new(),
        unobservable_unstable: Vec::new(),
    };
    for &l in eigenvalues.iter().filter(|l| l.re >= 0.0) {
        let shifted = &ac - CMatrix::identity(n, n) * l;
        let mut ctrl = CMatrix::zeros(n, n + b.ncols());
        ctrl.view_mut((0, 0), (n, n)).copy_from(&shifted);
        ctrl.view_mut((0, n), (n, b.ncols())).copy_from(&bc);
        if linalg::complex_rank(&ctrl, RANK_REL_TOL) < n {
            report.uncontrollable_unstable.push(l);
        }
        let mut obs = CMatrix::zeros(n + 1, n);
        obs.view_mut((0, 0), (n, n)).copy_from(&shifted);
        obs.view_mut((n, 0), (1, n)).copy_from(&cc);
        if linalg::complex_rank(&obs, RANK_REL_TOL) < n {
            report.unobservable_unstable.push(l);
        }
    }
    Ok(report)
}

/// Plant `(A, B, c)` with the pixel offsets `δx_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiPlant {
    a: Matrix,
    b: Matrix,
    c: Vector,
    pixel_offsets: Vec<Vector>,
    b_pinv: Matrix,
}

impl LtiPlant {
    /// Validates dimensions, stabilizability and detectability.
    pub fn new(a: Matrix, b: Matrix, c: Vector, pixel_offsets: Vec<Vector>) -> Result<Self, PlantError> {
        if pixel_offsets.is_empty() {
            return Err(PlantError::NoPixels);
        }
        let n = a.nrows();
        if let Some((i, _)) = pixel_offsets.iter().enumerate().find(|(_, d)| d.len() != n) {
            return Err(PlantError::Dimension(format!("pixel offset {} has wrong length", i + 1)));
        }
        let report = validate_system(&a, &b, &c)?;
        if !report.stabilizable() {
            return Err(PlantError::NotStabilizable(report.uncontrollable_unstable));
        }
        if !report.detectable() {
            return Err(PlantError::NotDetectable(report.unobservable_unstable));
        }
        let b_pinv = linalg::pseudo_inverse(&b)?;
        Ok(Self { a, b, c, pixel_offsets, b_pinv })
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn c(&self) -> &Vector {
        &self.c
    }

    /// `B†`
    pub fn b_pinv(&self) -> &Matrix {
        &self.b_pinv
    }

    pub fn pixel_offsets(&self) -> &[Vector] {
        &self.pixel_offsets
    }

    pub fn pixel_offset(&self, i: usize) -> Result<&Vector, PlantError> {
        self.pixel_offsets
            .get(i)
            .ok_or(PlantError::PixelIndex { index: i, count: self.pixel_offsets.len() })
    }

    pub fn states(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn pixels(&self) -> usize {
        self.pixel_offsets.len()
    }

    /// Same dynamics restricted to a subset of pixels (0-based indices).
    pub fn with_pixels(&self, indices: &[usize]) -> Result<Self, PlantError> {
        let offsets = indices
            .iter()
            .map(|&i| self.pixel_offset(i).cloned())
            .collect::<Result<Vec<_>, _>>()?;
        if offsets.is_empty() {
            return Err(PlantError::NoPixels);
        }
        Ok(Self { pixel_offsets: offsets, ..self.clone() })
    }

    fn controllability_matrix(&self) -> Matrix {
        let n = self.states();
        let mut blocks = Vec::with_capacity(n);
        let mut block = self.b.clone();
        for _ in 0..n {
            blocks.push(block.clone());
            block = &self.a * block;
        }
        let refs: Vec<&Matrix> = blocks.iter().collect();
        linalg::hstack(&refs)
    }

    /// Relative residuals of the two set-point conditions: distance of
    /// `A x_d` from `range(B)` and of `x_d` from the reachable subspace.
    fn setpoint_residuals(&self, xd: &Vector) -> (f64, f64) {
        let scale = (linalg::spectral_norm(&self.a) * xd.norm()).max(f64::MIN_POSITIVE);
        let axd = &self.a * xd;
        let drift = (&axd - &self.b * (&self.b_pinv * &axd)).norm() / scale;

        let ctrb = self.controllability_matrix();
        let reach = if linalg::rank(&ctrb, RANK_REL_TOL) == self.states() {
            0.0
        } else {
            let pinv = linalg::pseudo_inverse(&ctrb).unwrap_or_else(|_| Matrix::zeros(0, 0));
            (xd - &ctrb * (pinv * xd)).norm() / xd.norm().max(f64::MIN_POSITIVE)
        };
        (drift, reach)
    }

    /// `x_d` is stabilizable iff `A x_d ∈ range(B)` and `x_d` lies in the
    /// reachable subspace, both up to [`SETPOINT_REL_TOL`].
    pub fn check_setpoint_stabilizable(&self, xd: &Vector) -> bool {
        if xd.len() != self.states() || xd.iter().any(|v| !v.is_finite()) {
            return false;
        }
        if xd.norm() == 0.0 {
            return true;
        }
        let (drift, reach) = self.setpoint_residuals(xd);
        drift <= SETPOINT_REL_TOL && reach <= SETPOINT_REL_TOL
    }

    /// Orthonormal basis of the stabilizable set-point subspace
    /// `{x : A x ∈ range(B)} ∩ range([B, AB, …, A^{n-1}B])`.
    pub fn setpoint_subspace(&self) -> Matrix {
        let n = self.states();
        let eye = Matrix::identity(n, n);
        let off_range_b = &eye - &self.b * &self.b_pinv;
        let ctrb = self.controllability_matrix();
        let off_reach = &eye - &ctrb * linalg::pseudo_inverse(&ctrb).unwrap_or_else(|_| Matrix::zeros(ctrb.ncols(), n));
        let stacked = linalg::vstack(&[&(off_range_b * &self.a), &off_reach]);
        linalg::null_space(&stacked, RANK_REL_TOL)
    }

    /// `c'(x + x_d + δx_i)` for the shifted state `x`.
    pub fn luminosity_output(&self, xd: &Vector, x: &Vector, pixel: usize) -> Result<f64, PlantError> {
        let offset = self.pixel_offset(pixel)?;
        Ok(self.c.dot(x) + self.c.dot(xd) + self.c.dot(offset))
    }

    /// `u° = u - B† A x_d`.
    pub fn to_original_control(&self, u: &Vector, xd: &Vector) -> Vector {
        u - &self.b_pinv * (&self.a * xd)
    }
}

/// A stabilizable set-point.
#[derive(Debug, Clone, PartialEq)]
pub struct SetPoint {
    xd: Vector,
    requested: Vector,
}

impl SetPoint {
    /// Accepts `requested` if it passes the (tolerant) stabilizability test
    /// and stores its orthogonal projection onto the exact set-point
    /// subspace, so the input shift cancels the drift `A x_d` exactly.
    pub fn new(plant: &LtiPlant, requested: Vector) -> Result<Self, PlantError> {
        if requested.len() != plant.states() {
            return Err(PlantError::Dimension(format!(
                "set-point has {} entries, plant has {} states",
                requested.len(),
                plant.states()
            )));
        }
        if !plant.check_setpoint_stabilizable(&requested) {
            let (drift, reach) = plant.setpoint_residuals(&requested);
            return Err(PlantError::SetPointNotStabilizable { residual: drift.max(reach) });
        }
        let basis = plant.setpoint_subspace();
        let xd = &basis * (basis.transpose() * &requested);
        Ok(Self { xd, requested })
    }

    pub fn origin(plant: &LtiPlant) -> Self {
        let z = Vector::zeros(plant.states());
        Self { xd: z.clone(), requested: z }
    }

    /// The set-point actually used (projected).
    pub fn xd(&self) -> &Vector {
        &self.xd
    }

    pub fn requested(&self) -> &Vector {
        &self.requested
    }

    /// Distance between the requested and the projected set-point.
    pub fn projection_distance(&self) -> f64 {
        (&self.xd - &self.requested).norm()
    }
}
