//! Static SVG figures: regulation error over time and the phase portrait.

use std::path::Path;

use anyhow::{anyhow, Result};
use plotters::prelude::*;

use dvsreg::linalg::Vector;
use dvsreg::sim::Trajectory;

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    let pad = 0.05 * (hi - lo).abs().max(1e-9);
    (lo - pad, hi + pad)
}

pub fn error_plot(path: &Path, traj: &Trajectory, epsilon: f64) -> Result<()> {
    let t_end = traj.samples.last().map_or(1.0, |s| s.t);
    let e_max = traj.samples.iter().map(|s| s.err).fold(epsilon, f64::max);
    let root = SVGBackend::new(path, (720, 420)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| anyhow!("{e}"))?;
    let mut chart = ChartBuilder::on(&root)
        .margin(20)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(0.0..t_end, 0.0..e_max * 1.05)
        .map_err(|e| anyhow!("{e}"))?;
    chart
        .configure_mesh()
        .x_desc("t [s]")
        .y_desc("||xo(t) - xd||")
        .draw()
        .map_err(|e| anyhow!("{e}"))?;
    chart
        .draw_series(LineSeries::new(traj.samples.iter().map(|s| (s.t, s.err)), &BLUE))
        .map_err(|e| anyhow!("{e}"))?;
    chart
        .draw_series(LineSeries::new([(0.0, epsilon), (t_end, epsilon)], &RED))
        .map_err(|e| anyhow!("{e}"))?;
    root.present().map_err(|e| anyhow!("{e}"))?;
    Ok(())
}

pub fn phase_plot(path: &Path, traj: &Trajectory, xd: &Vector) -> Result<()> {
    if xd.len() < 2 {
        return Ok(());
    }
    let pts: Vec<(f64, f64)> = traj.samples.iter().map(|s| (s.xo[0], s.xo[1])).collect();
    let (x_lo, x_hi) = pts.iter().fold((xd[0], xd[0]), |(lo, hi), p| (lo.min(p.0), hi.max(p.0)));
    let (y_lo, y_hi) = pts.iter().fold((xd[1], xd[1]), |(lo, hi), p| (lo.min(p.1), hi.max(p.1)));
    let (x_lo, x_hi) = padded(x_lo, x_hi);
    let (y_lo, y_hi) = padded(y_lo, y_hi);
    let root = SVGBackend::new(path, (520, 520)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| anyhow!("{e}"))?;
    let mut chart = ChartBuilder::on(&root)
        .margin(20)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(x_lo..x_hi, y_lo..y_hi)
        .map_err(|e| anyhow!("{e}"))?;
    chart
        .configure_mesh()
        .x_desc("xo1")
        .y_desc("xo2")
        .draw()
        .map_err(|e| anyhow!("{e}"))?;
    chart.draw_series(LineSeries::new(pts, &BLUE)).map_err(|e| anyhow!("{e}"))?;
    chart
        .draw_series([Circle::new((xd[0], xd[1]), 4, RED.filled())])
        .map_err(|e| anyhow!("{e}"))?;
    root.present().map_err(|e| anyhow!("{e}"))?;
    Ok(())
}
