use proptest::prelude::*;

use dvsreg::dvs::{DvsCamera, Polarity};
use dvsreg::estimator::{init_gains, update_estimate, EstimatorState, PixelBounds};
use dvsreg::linalg::{self, Matrix, Vector};
use dvsreg::plant::LtiPlant;

fn square(n: usize, scale: f64) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-scale..scale, n * n).prop_map(move |v| Matrix::from_vec(n, n, v))
}

fn bounds() -> impl Strategy<Value = PixelBounds> {
    (0.1f64..5.0, 1.0f64..2.0).prop_map(|(m, k)| PixelBounds::new(m, m * k).unwrap())
}

proptest! {
    #[test]
    fn exponential_semigroup(a in square(4, 1.5), s in 0.0f64..1.0, t in 0.0f64..1.0) {
        let lhs = linalg::matrix_exponential(&a, s + t).unwrap();
        let rhs = linalg::matrix_exponential(&a, s).unwrap() * linalg::matrix_exponential(&a, t).unwrap();
        prop_assert!((&lhs - &rhs).norm() <= 1e-10 * (1.0 + lhs.norm()));
    }

    #[test]
    fn penrose_identities(rows in 1usize..5, cols in 1usize..5, seed in prop::collection::vec(-2.0f64..2.0, 16)) {
        let a = Matrix::from_fn(rows, cols, |i, j| seed[i * 4 + j]);
        let p = linalg::pseudo_inverse(&a).unwrap();
        let tol = 1e-9 * (1.0 + a.norm() * p.norm()).powi(2);
        prop_assert!((&a * &p * &a - &a).norm() <= tol);
        prop_assert!((&p * &a * &p - &p).norm() <= tol);
        let ap = &a * &p;
        let pa = &p * &a;
        prop_assert!((&ap - ap.transpose()).norm() <= tol);
        prop_assert!((&pa - pa.transpose()).norm() <= tol);
    }

    #[test]
    fn care_solution_is_stabilizing(a in square(3, 1.0), b in prop::collection::vec(-1.0f64..1.0, 3)) {
        let b = Matrix::from_vec(3, 1, b);
        prop_assume!(linalg::rank(&linalg::hstack(&[&b, &(&a * &b), &(&a * &a * &b)]), 1e-6) == 3);
        let q = Matrix::identity(3, 3);
        let r = Matrix::identity(1, 1);
        let x = linalg::solve_care(&a, &b, &q, &r).unwrap();
        let g = &b * b.transpose();
        let res = linalg::riccati_residual(&a, &g, &q, &x).norm();
        let scale = q.norm() + 2.0 * a.norm() * x.norm() + g.norm() * x.norm().powi(2);
        prop_assert!(res <= 1e-10 * scale);
        prop_assert!((&x - x.transpose()).norm() <= 1e-10 * x.norm());
        prop_assert!(linalg::is_hurwitz(&(&a - &g * &x)).unwrap());
    }

    #[test]
    fn luminosity_is_affine_with_gradient_c(
        c in prop::collection::vec(-1.0f64..1.0, 2),
        x in prop::collection::vec(-1.0f64..1.0, 2),
        dx in prop::collection::vec(-1.0f64..1.0, 2),
        t in -3.0f64..3.0,
    ) {
        let plant = LtiPlant::new(
            Matrix::from_vec(2, 2, vec![0.0, 0.0, 1.0, 0.0]),
            Matrix::from_vec(2, 1, vec![0.0, 1.0]),
            Vector::from_vec(c.clone()),
            vec![Vector::from_vec(vec![0.3, -0.1])],
        ).unwrap();
        let xd = Vector::zeros(2);
        let (x, dx) = (Vector::from_vec(x), Vector::from_vec(dx));
        let y0 = plant.luminosity_output(&xd, &x, 0).unwrap();
        let y1 = plant.luminosity_output(&xd, &(&x + &dx * t), 0).unwrap();
        let expected = t * Vector::from_vec(c).dot(&dx);
        prop_assert!((y1 - y0 - expected).abs() <= 1e-12 * (1.0 + expected.abs()));
    }

    #[test]
    fn delta_z_increases_as_rho_falls(b in bounds(), r1 in 0.05f64..0.95, r2 in 0.05f64..0.95) {
        let (lo, hi) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
        prop_assume!(hi - lo > 1e-9);
        prop_assert!(b.delta_z(lo) >= b.delta_z(hi));
        let g = init_gains(&b, lo).unwrap();
        prop_assert!((g.delta_z - b.delta_z(lo)).abs() <= 1e-12);
    }

    #[test]
    fn lambda_bar_is_lambda_times_q_hat0(b in bounds(), rho in 0.05f64..0.95) {
        let g = init_gains(&b, rho).unwrap();
        prop_assert!((g.lambda_bar - g.lambda * g.q_hat0).abs() <= 1e-12 * g.lambda_bar);
        prop_assert!((g.lambda_bar - b.lambda_bar(rho)).abs() <= 1e-12 * g.lambda_bar);
    }

    #[test]
    fn estimate_stays_proportional_to_reference(
        h in 0.01f64..0.5,
        q0 in 0.1f64..3.0,
        pattern in prop::collection::vec(any::<bool>(), 0..40),
    ) {
        let camera = DvsCamera::natural(h).unwrap();
        let rho = camera.rho();
        let mut q = q0;
        let mut est = EstimatorState::new(1.7 * q0);
        for on in pattern {
            let p = if on { Polarity::On } else { Polarity::Off };
            q *= p.factor(rho);
            est = update_estimate(est, p, rho);
            prop_assert!((est.q_hat() / q - 1.7).abs() <= 1e-9);
        }
    }
}
