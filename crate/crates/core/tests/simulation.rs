use std::path::PathBuf;

use dvsreg::config::load_config;
use dvsreg::pipeline;

#[test]
fn final_state_is_insensitive_to_step_refinement() {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../experiments/paper_sec4.cfg");
    let mut cfg = load_config(path).unwrap();
    cfg.sim.horizon = 0.05;
    let cert = pipeline::certify(&cfg, Some(&[0, 1, 2])).unwrap();
    let coarse = pipeline::run_certified(&cfg, cert.clone(), None).unwrap();
    cfg.sim.dt /= 10.0;
    cfg.sim.sample_stride *= 10;
    let fine = pipeline::run_certified(&cfg, cert, None).unwrap();

    assert_eq!(coarse.trajectory.events.len(), fine.trajectory.events.len());
    for (a, b) in coarse.trajectory.events.iter().zip(&fine.trajectory.events) {
        assert_eq!((a.pixel, a.kind), (b.pixel, b.kind));
        assert!((a.t - b.t).abs() < 1e-8, "event time {} vs {}", a.t, b.t);
    }
    let (xa, xb) = (&coarse.trajectory.final_state.x, &fine.trajectory.final_state.x);
    assert!((xa - xb).norm() < 1e-6, "final state moved by {}", (xa - xb).norm());
    let (ea, eb) = (coarse.trajectory.samples.last().unwrap().err, fine.trajectory.samples.last().unwrap().err);
    assert!((ea - eb).abs() < 1e-6);
}

#[test]
fn every_subset_size_is_certified_and_regulated() {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../experiments/paper_sec4.cfg");
    let mut cfg = load_config(path).unwrap();
    cfg.sim.horizon = 1.0;
    let rows = pipeline::sweep(&cfg, &[vec![0], vec![0, 1, 2]], None);
    for row in rows {
        let res = row.outcome.as_ref().unwrap();
        assert!(res.certified.report.h_star > 0.0);
        assert!(res.trajectory.event_count() > 0);
    }
}
