//! Flat-file artifacts: `report.txt` (key = value), trajectory, event and
//! sweep CSVs.

use std::io::{self, Write};

use crate::config::ExperimentConfig;
use crate::pipeline::{Certified, PipelineResult, RunSummary, SweepRow};
use crate::sim::Trajectory;

fn list(values: impl IntoIterator<Item = f64>) -> String {
    let items: Vec<String> = values.into_iter().map(|v| format!("{v:.12e}")).collect();
    format!("[{}]", items.join(", "))
}

/// Certificate part of the report: every quantity needed to re-derive
/// `δ_z*` and `h*` by hand.
pub fn write_certificate(w: &mut impl Write, cfg: &ExperimentConfig, cert: &Certified) -> io::Result<()> {
    let rep = &cert.report;
    let exp = &cert.experiment;
    let pixels: Vec<String> = exp.pixels.iter().map(|i| (i + 1).to_string()).collect();
    writeln!(w, "pixels = [{}]", pixels.join(", "))?;
    writeln!(w, "r = {}", exp.pixels.len())?;
    writeln!(w, "base = {:.15}", cfg.base)?;
    writeln!(w, "base_source = {}", if cfg.base_defaulted { "default" } else { "config" })?;
    writeln!(w, "xd_requested = {}", list(exp.setpoint.requested().iter().copied()))?;
    writeln!(w, "xd = {}", list(exp.setpoint.xd().iter().copied()))?;
    writeln!(w, "xd_projection = {:.6e}", exp.setpoint.projection_distance())?;
    writeln!(w, "epsilon = {}", cfg.epsilon)?;
    writeln!(w, "epsilon_u = {:e}", cfg.epsilon_u)?;
    writeln!(w, "gamma = {:.12}", cert.controller.gamma)?;
    writeln!(w, "gamma_opt = {:.12}", cert.controller.gamma_opt)?;
    writeln!(w, "closed_loop_hinf = {:.12}", cert.controller.closed_loop_norm)?;
    writeln!(w, "controller_order = {}", cert.controller.order())?;
    writeln!(w, "G1_dc = {:.12}", rep.gains.g1_dc)?;
    writeln!(w, "G2_dc = {:.12}", rep.gains.g2_dc)?;
    writeln!(w, "G1_hinf = {:.12}", rep.gains.g1_hinf)?;
    writeln!(w, "D = {}", list(rep.d_vec.iter().copied()))?;
    writeln!(w, "norm_D = {:.12}", rep.norm_d())?;
    writeln!(w, "delta_z_star = {:.12}", rep.delta_z_star)?;
    writeln!(w, "small_gain_margin = {:.12}", rep.small_gain_margin)?;
    writeln!(w, "m = {}", list(exp.bounds.iter().map(|b| b.m())))?;
    writeln!(w, "M = {}", list(exp.bounds.iter().map(|b| b.big_m())))?;
    writeln!(w, "worst_pixel = {}", exp.pixels[rep.worst_pixel] + 1)?;
    writeln!(w, "rho_star = {:.12}", rep.rho_star)?;
    writeln!(w, "h_star = {:.12}", rep.h_star)?;
    writeln!(w, "per_pixel_delta_z = {}", list(rep.per_pixel_delta_z.iter().copied()))?;
    Ok(())
}

pub fn write_summary(w: &mut impl Write, s: &RunSummary) -> io::Result<()> {
    writeln!(w, "h_used = {:.12}", s.h_used)?;
    writeln!(w, "window_start = {}", s.window_start)?;
    writeln!(w, "err_max = {:.9}", s.err_max)?;
    writeln!(w, "err_mean = {:.9}", s.err_mean)?;
    writeln!(w, "events = {}", s.events)?;
    writeln!(w, "sign_flips = {}", s.sign_flips)?;
    writeln!(w, "verdict = {}", s.verdict())?;
    Ok(())
}

pub fn write_report(w: &mut impl Write, cfg: &ExperimentConfig, result: &PipelineResult) -> io::Result<()> {
    write_certificate(w, cfg, &result.certified)?;
    writeln!(w, "rho_used = {:.12}", result.camera.rho())?;
    write_summary(w, &result.summary)
}

pub fn write_trajectory(w: &mut impl Write, traj: &Trajectory) -> io::Result<()> {
    let Some(first) = traj.samples.first() else {
        return Ok(());
    };
    let (n, m, r) = (first.x.len(), first.u.len(), first.y.len());
    let mut header: Vec<String> = vec!["t".into()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.extend((1..=n).map(|i| format!("xo{i}")));
    header.extend((1..=m).map(|i| format!("u{i}")));
    header.push("err".into());
    for i in 1..=r {
        header.extend([format!("y_{i}"), format!("z_{i}"), format!("zbar_{i}"), format!("q_{i}")]);
    }
    writeln!(w, "{}", header.join(","))?;
    for s in &traj.samples {
        let mut row: Vec<f64> = vec![s.t];
        row.extend(s.x.iter());
        row.extend(s.xo.iter());
        row.extend(s.u.iter());
        row.push(s.err);
        for i in 0..r {
            row.extend([s.y[i], s.z[i], s.zbar[i], s.q[i]]);
        }
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.9}")).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

/// Pixel indices are written 1-based; polarity `0` marks a sign flip.
pub fn write_events(w: &mut impl Write, traj: &Trajectory) -> io::Result<()> {
    writeln!(w, "t,pixel,polarity,q_before,q_after")?;
    for e in &traj.events {
        writeln!(w, "{:.9},{},{},{:.9},{:.9}", e.t, e.pixel + 1, e.kind.code(), e.q_before, e.q_after)?;
    }
    Ok(())
}

/// Failed rows keep their `r` and carry `NaN` in the numeric columns.
pub fn write_sweep(w: &mut impl Write, rows: &[SweepRow]) -> io::Result<()> {
    writeln!(w, "r,h_star,err_max,err_mean,events")?;
    for row in rows {
        match &row.outcome {
            Ok(res) => writeln!(
                w,
                "{},{:.9},{:.9},{:.9},{}",
                row.r(),
                res.certified.report.h_star,
                res.summary.err_max,
                res.summary.err_mean,
                res.summary.events
            )?,
            Err(_) => writeln!(w, "{},NaN,NaN,NaN,NaN", row.r())?,
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dvs::{EventKind, Polarity, RetinalEvent};
    use crate::linalg::Vector;
    use crate::sim::{HybridState, Sample};

    fn tiny() -> Trajectory {
        let sample = Sample {
            t: 0.5,
            x: Vector::from_vec(vec![1.0, 2.0]),
            xo: Vector::from_vec(vec![1.5, 2.5]),
            xc: Vector::zeros(1),
            u: Vector::from_vec(vec![-1.0]),
            uo: Vector::from_vec(vec![-2.0]),
            y: vec![0.1, 0.2],
            z: vec![0.11, 0.21],
            zbar: vec![0.01, 0.02],
            q: vec![0.1, -0.2],
            q_hat: vec![0.1, -0.2],
            in_band: vec![false, false],
            err: 5f64.sqrt(),
        };
        Trajectory {
            samples: vec![sample],
            events: vec![
                RetinalEvent { t: 0.25, pixel: 1, kind: EventKind::Polarity(Polarity::Off), y: 0.1, q_before: 0.2, q_after: 0.1 },
                RetinalEvent { t: 0.3, pixel: 0, kind: EventKind::SignFlip, y: -1e-4, q_before: 0.1, q_after: -0.1 },
            ],
            final_state: HybridState {
                t: 0.5,
                x: Vector::zeros(2),
                xc: Vector::zeros(1),
                q: vec![],
                q_hat: vec![],
                zbar: vec![],
                in_band: vec![],
                event_count: vec![],
            },
            rho: 0.5,
        }
    }

    #[test]
    fn trajectory_header_and_precision() {
        let mut buf = Vec::new();
        write_trajectory(&mut buf, &tiny()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,x1,x2,xo1,xo2,u1,err,y_1,z_1,zbar_1,q_1,y_2,z_2,zbar_2,q_2");
        let row = lines.next().unwrap();
        assert!(row.starts_with("0.500000000,1.000000000,2.000000000,1.500000000"));
        assert!(row.contains(",2.236067977,"));
        assert_eq!(row.split(',').count(), 15);
    }

    #[test]
    fn event_rows() {
        let mut buf = Vec::new();
        write_events(&mut buf, &tiny()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,pixel,polarity,q_before,q_after");
        assert_eq!(lines[1], "0.250000000,2,-1,0.200000000,0.100000000");
        assert_eq!(lines[2], "0.300000000,1,0,0.100000000,-0.100000000");
    }
}
