//! Dense real linear algebra used throughout the crate.
//!
//! Thin wrappers over `nalgebra` for the factorizations, plus the pieces
//! nalgebra does not ship: a stabilizing Riccati solver (matrix-sign
//! iteration with Newton refinement), Lyapunov solves, and system-level
//! gains of a [`StateSpace`] realization (DC gain, H-infinity norm).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;
pub type CMatrix = DMatrix<Complex64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("{0} did not converge")]
    NoConvergence(&'static str),
    #[error("singular matrix in {0}")]
    Singular(&'static str),
    #[error("no stabilizing Riccati solution: Hamiltonian has eigenvalues on the imaginary axis")]
    ImaginaryAxisEigenvalues,
    #[error("system matrix is not Hurwitz (spectral abscissa {0:.3e})")]
    NotHurwitz(f64),
}

pub type Result<T> = std::result::Result<T, LinalgError>;

fn ensure_square(m: &Matrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(LinalgError::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    Ok(m.nrows())
}

fn ensure_finite(m: &Matrix) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(LinalgError::NonFinite)
    }
}

/// Builds a matrix from row slices. Panics on ragged input, so only use it
/// with literal data.
pub fn from_rows(rows: &[&[f64]]) -> Matrix {
    let nr = rows.len();
    let nc = rows.first().map_or(0, |r| r.len());
    assert!(rows.iter().all(|r| r.len() == nc), "ragged rows");
    Matrix::from_fn(nr, nc, |i, j| rows[i][j])
}

pub fn to_complex(m: &Matrix) -> CMatrix {
    m.map(|v| Complex64::new(v, 0.0))
}

/// Stacks matrices vertically. All blocks must share a column count.
pub fn vstack(blocks: &[&Matrix]) -> Matrix {
    let cols = blocks.first().map_or(0, |b| b.ncols());
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = Matrix::zeros(rows, cols);
    let mut r0 = 0;
    for b in blocks {
        assert_eq!(b.ncols(), cols, "vstack column mismatch");
        out.view_mut((r0, 0), (b.nrows(), cols)).copy_from(*b);
        r0 += b.nrows();
    }
    out
}

/// Stacks matrices horizontally. All blocks must share a row count.
pub fn hstack(blocks: &[&Matrix]) -> Matrix {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Matrix::zeros(rows, cols);
    let mut c0 = 0;
    for b in blocks {
        assert_eq!(b.nrows(), rows, "hstack row mismatch");
        out.view_mut((0, c0), (rows, b.ncols())).copy_from(*b);
        c0 += b.ncols();
    }
    out
}

/// `e^{M t}` by Padé scaling-and-squaring.
pub fn matrix_exponential(m: &Matrix, t: f64) -> Result<Matrix> {
    ensure_square(m)?;
    ensure_finite(m)?;
    if !t.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    if m.nrows() == 0 {
        return Ok(m.clone());
    }
    Ok((m * t).exp())
}

/// All eigenvalues of a general real matrix, via the real Schur form.
pub fn eigenvalues(m: &Matrix) -> Result<Vec<Complex64>> {
    let n = ensure_square(m)?;
    ensure_finite(m)?;
    if n == 0 {
        return Ok(Vec::new());
    }
    if let Some(schur) = m.clone().try_schur(f64::EPSILON, 1000 * n.max(10)) {
        return Ok(schur.complex_eigenvalues().iter().copied().collect());
    }
    // The unshifted-exceptional QR iteration can cycle; an orthogonal
    // similarity keeps the spectrum and breaks the cycle.
    for k in 1..=4 {
        let q = fixed_orthogonal(n, k);
        let rotated = q.transpose() * m * &q;
        if let Some(schur) = rotated.try_schur(f64::EPSILON, 1000 * n.max(10)) {
            return Ok(schur.complex_eigenvalues().iter().copied().collect());
        }
    }
    Err(LinalgError::NoConvergence("Schur eigenvalue iteration"))
}

/// Deterministic orthogonal matrix: Q factor of a fixed well-conditioned
/// pseudo-random matrix.
fn fixed_orthogonal(n: usize, seed: usize) -> Matrix {
    let m = Matrix::from_fn(n, n, |i, j| {
        let v = ((i * 7 + j * 13 + seed * 29) as f64 * 0.618_033_988_749_895).fract();
        v - 0.5 + if i == j { 2.0 } else { 0.0 }
    });
    m.qr().q()
}

/// Largest real part of the spectrum; `-inf` for an empty matrix.
pub fn spectral_abscissa(m: &Matrix) -> Result<f64> {
    Ok(eigenvalues(m)?.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max))
}

pub fn is_hurwitz(m: &Matrix) -> Result<bool> {
    Ok(spectral_abscissa(m)? < 0.0)
}

pub fn singular_values(m: &Matrix) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

pub fn complex_singular_values(m: &CMatrix) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Induced 2-norm (largest singular value). Zero for empty matrices.
pub fn spectral_norm(m: &Matrix) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Numerical rank: singular values at or below `rel_tol * sigma_max` count as zero.
pub fn rank(m: &Matrix, rel_tol: f64) -> usize {
    let sv = singular_values(m);
    let Some(&smax) = sv.first() else { return 0 };
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

pub fn complex_rank(m: &CMatrix, rel_tol: f64) -> usize {
    let sv = complex_singular_values(m);
    let Some(&smax) = sv.first() else { return 0 };
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// Moore-Penrose inverse. Singular values below `max(r,c) * eps * sigma_max`
/// are treated as zero.
pub fn pseudo_inverse(m: &Matrix) -> Result<Matrix> {
    ensure_finite(m)?;
    if m.is_empty() {
        return Ok(Matrix::zeros(m.ncols(), m.nrows()));
    }
    let smax = spectral_norm(m);
    if smax == 0.0 {
        return Ok(Matrix::zeros(m.ncols(), m.nrows()));
    }
    let eps = (m.nrows().max(m.ncols()) as f64) * f64::EPSILON * smax;
    m.clone()
        .svd(true, true)
        .pseudo_inverse(eps)
        .map_err(|_| LinalgError::NoConvergence("SVD"))
}

/// Orthonormal basis for the null space of `m` (columns of the result).
pub fn null_space(m: &Matrix, rel_tol: f64) -> Matrix {
    let n = m.ncols();
    if m.nrows() == 0 {
        return Matrix::identity(n, n);
    }
    // pad to at least n rows so the SVD yields a full V
    let padded = if m.nrows() < n { vstack(&[m, &Matrix::zeros(n - m.nrows(), n)]) } else { m.clone() };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let smax = svd.singular_values.max();
    let cols: Vec<Vector> = (0..n)
        .filter(|&k| smax == 0.0 || svd.singular_values[k] <= rel_tol * smax)
        .map(|k| v_t.row(k).transpose())
        .collect();
    if cols.is_empty() {
        Matrix::zeros(n, 0)
    } else {
        Matrix::from_columns(&cols)
    }
}

/// Symmetric square root of a symmetric positive definite matrix and its inverse.
pub fn spd_sqrt_and_inv_sqrt(m: &Matrix) -> Result<(Matrix, Matrix)> {
    ensure_square(m)?;
    let eig = m.clone().symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
        return Err(LinalgError::Singular("symmetric square root"));
    }
    let q = &eig.eigenvectors;
    let s = Matrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
    let si = Matrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    Ok((q * s * q.transpose(), q * si * q.transpose()))
}

fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// Solves `A' X + X A + Q = 0` by a Kronecker-product linear solve.
/// Intended for the small orders used here (n up to a few dozen).
pub fn solve_lyapunov(a: &Matrix, q: &Matrix) -> Result<Matrix> {
    let n = ensure_square(a)?;
    if q.shape() != (n, n) {
        return Err(LinalgError::Dimension(format!("Q is {:?}, expected {n}x{n}", q.shape())));
    }
    let eye = Matrix::identity(n, n);
    let at = a.transpose();
    // vec(A'X) = (I ⊗ A') vec X, vec(XA) = (A' ⊗ I) vec X, column-major vec
    let kron = eye.kronecker(&at) + at.kronecker(&eye);
    let rhs = -Vector::from_column_slice(q.as_slice());
    let sol = kron.lu().solve(&rhs).ok_or(LinalgError::Singular("Lyapunov operator"))?;
    Ok(Matrix::from_column_slice(n, n, sol.as_slice()))
}

/// Residual `A'X + XA - XGX + Q`.
pub fn riccati_residual(a: &Matrix, g: &Matrix, q: &Matrix, x: &Matrix) -> Matrix {
    a.transpose() * x + x * a - x * g * x + q
}

/// Matrix sign function by scaled Newton iteration.
fn matrix_sign(h: &Matrix) -> Result<Matrix> {
    let n = h.nrows();
    let mut z = h.clone();
    let mut scaling = true;
    let mut last_diff = f64::INFINITY;
    for _ in 0..200 {
        let zi = z.clone().try_inverse().ok_or(LinalgError::ImaginaryAxisEigenvalues)?;
        let mu = if scaling {
            let det = z.determinant().abs();
            if det.is_finite() && det > 0.0 {
                det.powf(-1.0 / n as f64)
            } else {
                1.0
            }
        } else {
            1.0
        };
        let next = (&z * mu + zi / mu) * 0.5;
        let diff = (&next - &z).norm();
        let size = next.norm();
        z = next;
        if !size.is_finite() {
            return Err(LinalgError::ImaginaryAxisEigenvalues);
        }
        if diff <= 1e-3 * size {
            scaling = false;
        }
        if diff <= 1e-13 * size {
            return Ok(z);
        }
        // rounding floor reached on an ill-conditioned Hamiltonian
        if !scaling && diff <= 1e-7 * size && diff >= 0.5 * last_diff {
            return Ok(z);
        }
        if !scaling {
            last_diff = diff;
        }
    }
    Err(LinalgError::NoConvergence("matrix sign iteration"))
}

/// Stabilizing solution of the symmetric Riccati equation
/// `A'X + XA - XGX + Q = 0` (G, Q symmetric, either may be indefinite),
/// i.e. the solution with `A - GX` Hurwitz.
///
/// Computed from the stable invariant subspace of the Hamiltonian
/// `[A, -G; -Q, -A']` via the matrix sign function, then polished with
/// Newton steps on the residual.
pub fn solve_riccati(a: &Matrix, g: &Matrix, q: &Matrix) -> Result<Matrix> {
    let n = ensure_square(a)?;
    for (name, m) in [("G", g), ("Q", q)] {
        if m.shape() != (n, n) {
            return Err(LinalgError::Dimension(format!("{name} is {:?}, expected {n}x{n}", m.shape())));
        }
        ensure_finite(m)?;
    }
    ensure_finite(a)?;
    if n == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    // X = σ X̃ balances the off-diagonal blocks: A'X̃ + X̃A - X̃(σG)X̃ + Q/σ = 0
    let (gn, qn) = (g.norm(), q.norm());
    let sigma = if gn > 0.0 && qn > 0.0 { (qn / gn).sqrt() } else { 1.0 };
    let mut h = Matrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(a);
    h.view_mut((0, n), (n, n)).copy_from(&(-g * sigma));
    h.view_mut((n, 0), (n, n)).copy_from(&(-q / sigma));
    h.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));

    let hnorm = h.norm().max(1.0);
    let eigs = eigenvalues(&h)?;
    if eigs.iter().any(|l| l.re.abs() <= 1e-9 * hnorm) {
        return Err(LinalgError::ImaginaryAxisEigenvalues);
    }

    let s = matrix_sign(&h)?;
    // (S + I) [I; X] = 0
    let eye = Matrix::identity(n, n);
    let s11 = s.view((0, 0), (n, n)).into_owned();
    let s12 = s.view((0, n), (n, n)).into_owned();
    let s21 = s.view((n, 0), (n, n)).into_owned();
    let s22 = s.view((n, n), (n, n)).into_owned();
    let lhs = vstack(&[&s12, &(s22 + &eye)]);
    let rhs = -vstack(&[&(s11 + &eye), &s21]);
    let svd = lhs.svd(true, true);
    let smax = svd.singular_values.max();
    if svd.singular_values.min() <= 1e-12 * smax {
        return Err(LinalgError::Singular("Riccati invariant subspace"));
    }
    let mut x = symmetrize(
        &svd.solve(&rhs, 0.0).map_err(|_| LinalgError::NoConvergence("least-squares solve"))?,
    ) * sigma;

    // Newton refinement: (A - GX)' dX + dX (A - GX) = -R(X)
    let mut res_norm = riccati_residual(a, g, q, &x).norm();
    for _ in 0..6 {
        if res_norm <= 1e-14 * (1.0 + x.norm()).powi(2) {
            break;
        }
        let ac = a - g * &x;
        let res = riccati_residual(a, g, q, &x);
        let Ok(dx) = solve_lyapunov(&ac, &res) else { break };
        let cand = symmetrize(&(&x + dx));
        let cand_res = riccati_residual(a, g, q, &cand).norm();
        if !(cand_res < res_norm) {
            break;
        }
        x = cand;
        res_norm = cand_res;
    }

    if !is_hurwitz(&(a - g * &x))? {
        return Err(LinalgError::ImaginaryAxisEigenvalues);
    }
    Ok(x)
}

/// Continuous algebraic Riccati equation `A'X + XA - XBR⁻¹B'X + Q = 0`,
/// stabilizing solution.
pub fn solve_care(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix) -> Result<Matrix> {
    let n = ensure_square(a)?;
    let m = ensure_square(r)?;
    if b.shape() != (n, m) {
        return Err(LinalgError::Dimension(format!("B is {:?}, expected {n}x{m}", b.shape())));
    }
    let r_inv = r.clone().try_inverse().ok_or(LinalgError::Singular("R"))?;
    let g = symmetrize(&(b * r_inv * b.transpose()));
    solve_riccati(a, &g, &symmetrize(q))
}

/// State-space realization `(A, B, C, D)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
    pub d: Matrix,
}

impl StateSpace {
    pub fn new(a: Matrix, b: Matrix, c: Matrix, d: Matrix) -> Result<Self> {
        let n = ensure_square(&a)?;
        if b.nrows() != n || c.ncols() != n || d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(LinalgError::Dimension(format!(
                "A {:?}, B {:?}, C {:?}, D {:?}",
                a.shape(),
                b.shape(),
                c.shape(),
                d.shape()
            )));
        }
        for m in [&a, &b, &c, &d] {
            ensure_finite(m)?;
        }
        Ok(Self { a, b, c, d })
    }

    /// Pure feedthrough `y = D u`.
    pub fn static_gain(d: Matrix) -> Self {
        let (p, m) = d.shape();
        Self { a: Matrix::zeros(0, 0), b: Matrix::zeros(0, m), c: Matrix::zeros(p, 0), d }
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn is_stable(&self) -> Result<bool> {
        is_hurwitz(&self.a)
    }

    /// Transfer matrix `C (sI - A)⁻¹ B + D` at a complex frequency.
    pub fn eval(&self, s: Complex64) -> Result<CMatrix> {
        let n = self.order();
        let d = to_complex(&self.d);
        if n == 0 {
            return Ok(d);
        }
        let si_a = CMatrix::identity(n, n) * s - to_complex(&self.a);
        let x = si_a
            .lu()
            .solve(&to_complex(&self.b))
            .ok_or(LinalgError::Singular("resolvent (sI - A)"))?;
        Ok(to_complex(&self.c) * x + d)
    }

    /// Largest singular value of the frequency response at `j·omega`.
    pub fn sigma_max_at(&self, omega: f64) -> Result<f64> {
        Ok(complex_singular_values(&self.eval(Complex64::new(0.0, omega))?)
            .first()
            .copied()
            .unwrap_or(0.0))
    }

    /// Keeps the selected output rows and input columns.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        Self {
            a: self.a.clone(),
            b: self.b.select_columns(cols),
            c: self.c.select_rows(rows),
            d: self.d.select_rows(rows).select_columns(cols),
        }
    }
}

fn ensure_stable(sys: &StateSpace) -> Result<()> {
    let abscissa = spectral_abscissa(&sys.a)?;
    if sys.order() > 0 && abscissa >= 0.0 {
        return Err(LinalgError::NotHurwitz(abscissa));
    }
    Ok(())
}

/// Steady-state gain `D - C A⁻¹ B` of a stable system.
pub fn dc_gain(sys: &StateSpace) -> Result<Matrix> {
    ensure_stable(sys)?;
    if sys.order() == 0 {
        return Ok(sys.d.clone());
    }
    let x = sys.a.clone().lu().solve(&sys.b).ok_or(LinalgError::Singular("A in DC gain"))?;
    Ok(&sys.d - &sys.c * x)
}

/// H-infinity norm of a stable system, to relative accuracy `rel_tol`.
///
/// Two-step level-set iteration: for a candidate level γ the Hamiltonian
/// `H(γ)` has imaginary-axis eigenvalues exactly at the frequencies where
/// `σ_max(G(jω)) = γ`; evaluating σ_max between consecutive crossings
/// raises the lower bound until no crossing remains.
pub fn hinf_norm(sys: &StateSpace, rel_tol: f64) -> Result<f64> {
    Ok(hinf_norm_with_frequency(sys, rel_tol)?.0)
}

/// As [`hinf_norm`], also returning a frequency at which the peak is attained.
pub fn hinf_norm_with_frequency(sys: &StateSpace, rel_tol: f64) -> Result<(f64, f64)> {
    ensure_stable(sys)?;
    let d_norm = spectral_norm(&sys.d);
    if sys.order() == 0 || sys.inputs() == 0 || sys.outputs() == 0 {
        return Ok((d_norm, f64::INFINITY));
    }
    let rel_tol = rel_tol.max(1e-12);

    // initial lower bound from DC, infinity and the pole frequencies
    let mut candidates = vec![0.0];
    for l in eigenvalues(&sys.a)? {
        let w = l.norm();
        if w > 0.0 {
            candidates.push(l.im.abs());
            candidates.push(w);
        }
    }
    let (mut lb, mut peak_w) = (d_norm, f64::INFINITY);
    for &w in &candidates {
        let s = sys.sigma_max_at(w)?;
        if s > lb {
            lb = s;
            peak_w = w;
        }
    }
    if lb == 0.0 {
        return Ok((0.0, 0.0));
    }

    let n = sys.order();
    let (a, b, c, d) = (&sys.a, &sys.b, &sys.c, &sys.d);
    for _ in 0..100 {
        let gamma = (1.0 + 2.0 * rel_tol) * lb;
        let r = Matrix::identity(d.ncols(), d.ncols()) * gamma * gamma - d.transpose() * d;
        let Some(r_inv) = r.try_inverse() else { break };
        let s = Matrix::identity(d.nrows(), d.nrows()) * gamma * gamma - d * d.transpose();
        let Some(s_inv) = s.try_inverse() else { break };
        let a11 = a + b * &r_inv * d.transpose() * c;
        let mut h = Matrix::zeros(2 * n, 2 * n);
        h.view_mut((0, 0), (n, n)).copy_from(&a11);
        h.view_mut((0, n), (n, n)).copy_from(&(b * &r_inv * b.transpose() * gamma));
        h.view_mut((n, 0), (n, n)).copy_from(&(-(c.transpose() * &s_inv * c) * gamma));
        h.view_mut((n, n), (n, n)).copy_from(&(-a11.transpose()));

        let tol = 1e-8 * h.norm().max(1.0);
        let mut omegas: Vec<f64> = eigenvalues(&h)?
            .into_iter()
            .filter(|l| l.re.abs() <= tol && l.im >= 0.0)
            .map(|l| l.im)
            .collect();
        if omegas.is_empty() {
            break;
        }
        omegas.sort_by(f64::total_cmp);
        let probes: Vec<f64> = if omegas.len() == 1 {
            omegas.clone()
        } else {
            omegas.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
        };
        let mut improved = false;
        for w in probes {
            let s = sys.sigma_max_at(w)?;
            if s > lb * (1.0 + 1e-14) {
                lb = s;
                peak_w = w;
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }
    Ok(((1.0 + rel_tol) * lb, peak_w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> Matrix {
        Matrix::from_fn(r, c, |_, _| rng.random_range(-scale..scale))
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let e = matrix_exponential(&Matrix::zeros(3, 3), 4.2).unwrap();
        assert_relative_eq!(e, Matrix::identity(3, 3), epsilon = 1e-15);
    }

    #[test]
    fn exp_of_diagonal_matches_scalar_exp() {
        let m = Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 2.0]));
        let e = matrix_exponential(&m, 1.0).unwrap();
        assert!((e[(0, 0)] - std::f64::consts::E).abs() < 1e-9);
        assert!((e[(1, 1)] - 7.38905609893065).abs() < 1e-9);
        assert!(e[(0, 1)].abs() < 1e-15 && e[(1, 0)].abs() < 1e-15);
    }

    #[test]
    fn exp_rejects_non_square() {
        assert!(matches!(
            matrix_exponential(&Matrix::zeros(2, 3), 1.0),
            Err(LinalgError::NotSquare { rows: 2, cols: 3 })
        ));
    }

    #[test]
    fn exp_semigroup_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let mut m = random_matrix(&mut rng, 5, 5, 1.0);
            let nrm = spectral_norm(&m);
            m *= 2.0 * rng.random_range(0.1..1.0) / nrm;
            let (t1, t2) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
            let whole = matrix_exponential(&m, t1 + t2).unwrap();
            let split = matrix_exponential(&m, t1).unwrap() * matrix_exponential(&m, t2).unwrap();
            assert!((whole - split).amax() < 1e-10);
        }
    }

    #[test]
    fn eigenvalues_of_known_matrices() {
        let e = eigenvalues(&Matrix::identity(3, 3)).unwrap();
        assert!(e.iter().all(|l| (l - Complex64::new(1.0, 0.0)).norm() < 1e-12));

        let mut e = eigenvalues(&from_rows(&[&[2.0, 10.0], &[0.0, 5.0]])).unwrap();
        e.sort_by(|a, b| a.re.total_cmp(&b.re));
        assert!((e[0].re - 2.0).abs() < 1e-12 && (e[1].re - 5.0).abs() < 1e-12);

        // companion matrix of s^2 + 1
        let e = eigenvalues(&from_rows(&[&[0.0, -1.0], &[1.0, 0.0]])).unwrap();
        assert!(e.iter().all(|l| l.re.abs() < 1e-12 && (l.im.abs() - 1.0).abs() < 1e-12));
        assert!((e[0].im + e[1].im).abs() < 1e-12);
    }

    #[test]
    fn eigenvalue_residuals_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..8 {
            let m = random_matrix(&mut rng, n, n, 3.0);
            let scale = spectral_norm(&m);
            for l in eigenvalues(&m).unwrap() {
                // smallest singular value of (M - λI) is the best eigenpair residual
                let shifted = to_complex(&m) - CMatrix::identity(n, n) * l;
                let smin = *complex_singular_values(&shifted).last().unwrap();
                assert!(smin <= 1e-8 * scale, "n={n} residual {smin}");
            }
        }
    }

    #[test]
    fn scalar_care_has_closed_form() {
        let one = Matrix::from_element(1, 1, 1.0);
        let x = solve_care(&one, &one, &one, &one).unwrap();
        assert!((x[(0, 0)] - (1.0 + 2f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn care_with_hurwitz_a_and_zero_q_is_zero() {
        let a = from_rows(&[&[-1.0, 2.0], &[0.0, -3.0]]);
        let b = from_rows(&[&[1.0], &[0.5]]);
        let x = solve_care(&a, &b, &Matrix::zeros(2, 2), &Matrix::identity(1, 1)).unwrap();
        assert!(x.amax() < 1e-12);
    }

    #[test]
    fn care_reports_missing_stabilizing_solution() {
        // uncontrollable mode on the imaginary axis
        let a = from_rows(&[&[0.0, 1.0], &[-1.0, 0.0]]);
        let b = Matrix::zeros(2, 1);
        let err = solve_care(&a, &b, &Matrix::identity(2, 2), &Matrix::identity(1, 1)).unwrap_err();
        assert_eq!(err, LinalgError::ImaginaryAxisEigenvalues);
    }

    #[test]
    fn lyapunov_solution_satisfies_equation() {
        let a = from_rows(&[&[-1.0, 3.0], &[0.0, -2.0]]);
        let q = from_rows(&[&[2.0, 0.5], &[0.5, 1.0]]);
        let x = solve_lyapunov(&a, &q).unwrap();
        assert!((a.transpose() * &x + &x * &a + &q).amax() < 1e-12);
    }

    #[test]
    fn dc_gain_examples() {
        let sys = StateSpace::new(
            Matrix::from_element(1, 1, -2.0),
            Matrix::from_element(1, 1, 1.0),
            Matrix::from_element(1, 1, 1.0),
            Matrix::zeros(1, 1),
        )
        .unwrap();
        assert!((dc_gain(&sys).unwrap()[(0, 0)] - 0.5).abs() < 1e-15);

        let d = from_rows(&[&[1.0, 2.0]]);
        let sys = StateSpace::new(
            from_rows(&[&[-1.0, 0.0], &[1.0, -3.0]]),
            Matrix::identity(2, 2),
            Matrix::zeros(1, 2),
            d.clone(),
        )
        .unwrap();
        assert_eq!(dc_gain(&sys).unwrap(), d);
    }

    #[test]
    fn dc_gain_rejects_unstable() {
        let sys = StateSpace::new(
            Matrix::from_element(1, 1, 1.0),
            Matrix::from_element(1, 1, 1.0),
            Matrix::from_element(1, 1, 1.0),
            Matrix::zeros(1, 1),
        )
        .unwrap();
        assert!(matches!(dc_gain(&sys), Err(LinalgError::NotHurwitz(_))));
        assert!(matches!(hinf_norm(&sys, 1e-3), Err(LinalgError::NotHurwitz(_))));
    }

    #[test]
    fn dc_gain_matches_low_frequency_response() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let a = random_matrix(&mut rng, 4, 4, 1.0) - Matrix::identity(4, 4) * 5.0;
            let sys = StateSpace::new(
                a,
                random_matrix(&mut rng, 4, 2, 1.0),
                random_matrix(&mut rng, 3, 4, 1.0),
                random_matrix(&mut rng, 3, 2, 1.0),
            )
            .unwrap();
            let g0 = dc_gain(&sys).unwrap();
            let g = sys.eval(Complex64::new(1e-9, 0.0)).unwrap().map(|z| z.re);
            assert!((&g0 - g).norm() <= 1e-6 * g0.norm());
        }
    }

    #[test]
    fn hinf_norm_examples() {
        let d = from_rows(&[&[3.0, 0.0], &[0.0, -4.0]]);
        assert!((hinf_norm(&StateSpace::static_gain(d), 1e-3).unwrap() - 4.0).abs() < 1e-12);

        let first = StateSpace::new(
            Matrix::from_element(1, 1, -1.0),
            Matrix::from_element(1, 1, 1.0),
            Matrix::from_element(1, 1, 1.0),
            Matrix::zeros(1, 1),
        )
        .unwrap();
        assert!((hinf_norm(&first, 1e-3).unwrap() - 1.0).abs() <= 1e-3);

        // 1/(s^2 + 0.1 s + 1), peak 1/(d sqrt(1 - d^2/4)) with d = 0.1
        let resonant = StateSpace::new(
            from_rows(&[&[0.0, 1.0], &[-1.0, -0.1]]),
            from_rows(&[&[0.0], &[1.0]]),
            from_rows(&[&[1.0, 0.0]]),
            Matrix::zeros(1, 1),
        )
        .unwrap();
        let exact = 1.0 / (0.1 * (1.0f64 - 0.0025).sqrt());
        let (norm, w) = hinf_norm_with_frequency(&resonant, 1e-3).unwrap();
        assert!((norm - exact).abs() <= 1e-3 * exact, "{norm} vs {exact}");
        assert!((w - 0.995f64.sqrt()).abs() < 1e-2);
    }

    #[test]
    fn hinf_norm_dominates_grid_and_dc() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let a = random_matrix(&mut rng, 4, 4, 2.0) - Matrix::identity(4, 4) * 4.5;
            if !is_hurwitz(&a).unwrap() {
                continue;
            }
            let sys = StateSpace::new(
                a,
                random_matrix(&mut rng, 4, 2, 1.0),
                random_matrix(&mut rng, 2, 4, 1.0),
                random_matrix(&mut rng, 2, 2, 0.2),
            )
            .unwrap();
            let norm = hinf_norm(&sys, 1e-4).unwrap();
            let grid_max = (0..4000)
                .map(|k| 10f64.powf(-3.0 + 6.0 * k as f64 / 3999.0))
                .map(|w| sys.sigma_max_at(w).unwrap())
                .fold(spectral_norm(&dc_gain(&sys).unwrap()), f64::max);
            assert!(norm >= grid_max * (1.0 - 1e-9), "{norm} < {grid_max}");
            assert!(norm <= grid_max * (1.0 + 2e-3), "{norm} ≫ {grid_max}");
        }
    }

    #[test]
    fn norms_and_pseudo_inverse() {
        assert_eq!(spectral_norm(&Matrix::identity(3, 3)), 1.0);
        let d = from_rows(&[&[3.0, 0.0], &[0.0, -4.0]]);
        assert!((spectral_norm(&d) - 4.0).abs() < 1e-14);
        let p = pseudo_inverse(&from_rows(&[&[1.0], &[1.0]])).unwrap();
        assert!((p - from_rows(&[&[0.5, 0.5]])).amax() < 1e-15);
    }

    #[test]
    fn null_space_of_rank_one() {
        let m = from_rows(&[&[1.0, 2.5], &[-1.0, -2.5]]);
        let ns = null_space(&m, 1e-10);
        assert_eq!(ns.ncols(), 1);
        assert!((&m * &ns).amax() < 1e-12);
    }
}
