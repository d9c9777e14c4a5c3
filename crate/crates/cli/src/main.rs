use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use dvsreg::config::{load_config, ExperimentConfig};
use dvsreg::output;
use dvsreg::pipeline::{self, PipelineResult};

mod plots;

/// Event-based set-point regulation: synthesis, threshold certification
/// and hybrid simulation.
#[derive(Parser, Debug)]
#[command(name = "dvsreg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// Experiment configuration (TOML)
    #[arg(long, global = true, default_value = "experiments/paper_sec4.cfg")]
    config: PathBuf,
    /// Output directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Pixel subset, 1-based: "1,2,3" or "1..9"
    #[arg(long, global = true)]
    pixels: Option<String>,
    /// Event threshold override (default: h_fraction * h*)
    #[arg(long, global = true)]
    h: Option<f64>,
    /// Also write SVG plots
    #[arg(long, global = true)]
    plots: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize the H-infinity controller
    Synth,
    /// Certify the maximum event threshold h*
    Threshold,
    /// Simulate the closed loop
    Simulate,
    /// Full pipeline: synthesis, certificate, simulation and report
    Run,
    /// Run several pixel subsets concurrently
    Sweep {
        /// Subsets separated by ';'
        #[arg(long, default_value = "1;1,2,3;1..9")]
        subsets: String,
    },
    /// Check the closed-form estimator and threshold formulas
    Verify,
}

fn parse_pixels(spec: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let one = |s: &str| -> Result<usize> {
            let i: usize = s.trim().parse().with_context(|| format!("bad pixel index {s:?}"))?;
            if i == 0 {
                bail!("pixel indices are 1-based");
            }
            Ok(i - 1)
        };
        match part.split_once("..") {
            Some((lo, hi)) => {
                let (lo, hi) = (one(lo)?, one(hi)?);
                if lo > hi {
                    bail!("empty pixel range {part:?}");
                }
                out.extend(lo..=hi);
            }
            None => out.push(one(part)?),
        }
    }
    if out.is_empty() {
        bail!("empty pixel subset {spec:?}");
    }
    Ok(out)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    Ok(BufWriter::new(File::create(&path).with_context(|| format!("cannot create {}", path.display()))?))
}

fn write_run_artifacts(dir: &Path, cfg: &ExperimentConfig, res: &PipelineResult, plots: bool) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let mut w = create(dir, "report.txt")?;
    output::write_report(&mut w, cfg, res)?;
    w.flush()?;
    let mut w = create(dir, "trajectory.csv")?;
    output::write_trajectory(&mut w, &res.trajectory)?;
    w.flush()?;
    let mut w = create(dir, "events.csv")?;
    output::write_events(&mut w, &res.trajectory)?;
    w.flush()?;
    if plots {
        plots::error_plot(&dir.join("error.svg"), &res.trajectory, cfg.epsilon)?;
        plots::phase_plot(&dir.join("phase.svg"), &res.trajectory, res.certified.experiment.setpoint.xd())?;
    }
    Ok(())
}

fn print_summary(res: &PipelineResult) {
    let rep = &res.certified.report;
    let s = &res.summary;
    println!("gamma = {:.6}", res.certified.controller.gamma);
    println!("delta_z_star = {:.6}", rep.delta_z_star);
    println!("h_star = {:.6}", rep.h_star);
    println!("h_used = {:.6}", s.h_used);
    println!("events = {} (sign flips {})", s.events, s.sign_flips);
    println!("err_max = {:.6} (t >= {}), epsilon = {}", s.err_max, s.window_start, s.epsilon);
    println!("verdict = {}", s.verdict());
}

fn run(cli: Cli) -> Result<bool> {
    let c = &cli.common;
    if let Command::Verify = cli.command {
        let checks = pipeline::verify_formulas();
        let mut ok = true;
        for chk in &checks {
            let pass = chk.pass();
            ok &= pass;
            println!(
                "{} {}: expected {:.15} got {:.15}",
                if pass { "PASS" } else { "FAIL" },
                chk.name,
                chk.expected,
                chk.computed
            );
        }
        println!("{} of {} formula checks passed", checks.iter().filter(|c| c.pass()).count(), checks.len());
        return Ok(ok);
    }

    let cfg = load_config(&c.config)?;
    let subset = c.pixels.as_deref().map(parse_pixels).transpose()?;
    let subset = subset.as_deref();
    fs::create_dir_all(&c.out).with_context(|| format!("cannot create {}", c.out.display()))?;

    match cli.command {
        Command::Verify => unreachable!(),
        Command::Synth => {
            let (_, _, k) = pipeline::synthesize(&cfg, subset)?;
            let mut w = create(&c.out, "controller.txt")?;
            writeln!(w, "gamma = {:.12}", k.gamma)?;
            writeln!(w, "gamma_opt = {:.12}", k.gamma_opt)?;
            writeln!(w, "closed_loop_hinf = {:.12}", k.closed_loop_norm)?;
            for (name, m) in [("Ac", &k.a), ("Bc", &k.b), ("Cc", &k.c), ("Dc", &k.d)] {
                let rows: Vec<String> = m
                    .row_iter()
                    .map(|r| format!("[{}]", r.iter().map(|v| format!("{v:.12e}")).collect::<Vec<_>>().join(", ")))
                    .collect();
                writeln!(w, "{name} = [{}]", rows.join(", "))?;
            }
            w.flush()?;
            println!("gamma = {:.6} (optimum {:.6}), closed-loop norm {:.6}", k.gamma, k.gamma_opt, k.closed_loop_norm);
            Ok(true)
        }
        Command::Threshold => {
            let cert = pipeline::certify(&cfg, subset)?;
            let mut w = create(&c.out, "report.txt")?;
            output::write_certificate(&mut w, &cfg, &cert)?;
            w.flush()?;
            println!("delta_z_star = {:.6}", cert.report.delta_z_star);
            println!("h_star = {:.6}", cert.report.h_star);
            Ok(true)
        }
        Command::Simulate | Command::Run => {
            let res = pipeline::run_pipeline(&cfg, subset, c.h)?;
            write_run_artifacts(&c.out, &cfg, &res, c.plots)?;
            print_summary(&res);
            Ok(res.summary.pass)
        }
        Command::Sweep { ref subsets } => {
            let sets = subsets.split(';').map(parse_pixels).collect::<Result<Vec<_>>>()?;
            let rows = pipeline::sweep(&cfg, &sets, c.h);
            let mut all_pass = true;
            for (k, row) in rows.iter().enumerate() {
                match &row.outcome {
                    Ok(res) => {
                        let dir = c.out.join(format!("subset{}_r{}", k + 1, row.r()));
                        write_run_artifacts(&dir, &cfg, res, c.plots)?;
                        all_pass &= res.summary.pass;
                        println!(
                            "r = {}: h_star = {:.6}, err_max = {:.6}, events = {}, {}",
                            row.r(),
                            res.certified.report.h_star,
                            res.summary.err_max,
                            res.summary.events,
                            res.summary.verdict()
                        );
                    }
                    Err(e) => {
                        all_pass = false;
                        println!("r = {}: {e}", row.r());
                    }
                }
            }
            let mut w = create(&c.out, "sweep.csv")?;
            output::write_sweep(&mut w, &rows)?;
            w.flush()?;
            Ok(all_pass)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
