//! Command-line front end.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::channel::{self, AlignedChannel, ChannelSpec, PowerConstraint};
use crate::enhance;
use crate::error::{Error, Result};
use crate::io;
use crate::sdp;
use crate::tracer::{self, ConstraintKind, GridFrontier, TraceConfig};

#[derive(Debug, Parser)]
#[command(name = "mimo-secrecy", version, about = "Secrecy capacity regions of two-receiver Gaussian broadcast channels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CommandArgs,
}

#[derive(Debug, Subcommand)]
pub enum CommandArgs {
    /// Trace the region boundary to CSV.
    Region(CommonArgs),
    /// Secrecy capacity without a common message.
    Wiretap(CommonArgs),
    /// Solve, certify and enhance at a common-rate target.
    EnhanceVerify(CommonArgs),
    /// Square, perturb, align and restrict to range(S).
    Reduce(CommonArgs),
    /// Compare the traced boundary with brute-force grids.
    OracleCompare(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long = "gamma0-samples", default_value_t = 201)]
    pub gamma0_samples: usize,
    #[arg(long = "alpha-tol", default_value_t = 1e-6)]
    pub alpha_tol: f64,
    #[arg(long)]
    pub plot: bool,
    /// Common-rate target in bits (enhance-verify); overrides the file's R0.
    #[arg(long)]
    pub r0: Option<f64>,
    /// Perturbation size for non-square or singular channels.
    #[arg(long, default_value_t = 1e-3)]
    pub eps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Region,
    Wiretap,
    EnhanceVerify,
    Reduce,
    OracleCompare,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub input_path: PathBuf,
    pub output_dir: PathBuf,
    pub trace: TraceConfig,
    pub emit_plot: bool,
    pub r0: Option<f64>,
    pub eps: f64,
}

impl RunConfig {
    pub fn from_cli(cli: Cli) -> Self {
        let (command, a) = match cli.command {
            CommandArgs::Region(a) => (Command::Region, a),
            CommandArgs::Wiretap(a) => (Command::Wiretap, a),
            CommandArgs::EnhanceVerify(a) => (Command::EnhanceVerify, a),
            CommandArgs::Reduce(a) => (Command::Reduce, a),
            CommandArgs::OracleCompare(a) => (Command::OracleCompare, a),
        };
        RunConfig {
            command,
            input_path: a.input,
            output_dir: a.out,
            trace: TraceConfig {
                gamma0_samples: a.gamma0_samples,
                alpha_bisect_tol: a.alpha_tol,
                ..TraceConfig::default()
            },
            emit_plot: a.plot,
            r0: a.r0,
            eps: a.eps,
        }
    }
}

/// Files written and the line printed on success.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub summary: String,
    pub files: Vec<PathBuf>,
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("json");
    text.push('\n');
    io::write_atomic(path, text.as_bytes())
}

pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.trace.validate().map_err(|e| Error::Parse { key: "--gamma0-samples/--alpha-tol".into(), msg: e.to_string() })?;
    if !(cfg.eps > 0.0) || !cfg.eps.is_finite() {
        return Err(Error::Parse { key: "--eps".into(), msg: format!("must be positive, got {}", cfg.eps) });
    }
    let file = io::parse_channel_document(&cfg.input_path)?;
    fs::create_dir_all(&cfg.output_dir)?;
    match cfg.command {
        Command::Region => region(cfg, &file.spec),
        Command::Wiretap => wiretap(cfg, &file.spec),
        Command::EnhanceVerify => enhance_verify(cfg, &file),
        Command::Reduce => reduce(cfg, &file),
        Command::OracleCompare => oracle_compare(cfg, &file.spec),
    }
}

fn region(cfg: &RunConfig, spec: &ChannelSpec) -> Result<RunOutcome> {
    let trace_cfg = TraceConfig { keep_witnesses: true, ..cfg.trace.clone() };
    let b = tracer::trace_boundary(spec, &trace_cfg)?;
    let csv = cfg.output_dir.join("boundary.csv");
    io::emit_boundary_csv(&b, &csv)?;
    let mut files = vec![csv.clone(), io::witness_path(&csv)];
    if cfg.emit_plot {
        let plot = cfg.output_dir.join("plot.gp");
        io::emit_plot_script(&[PathBuf::from("boundary.csv")], &plot)?;
        files.push(plot);
    }
    let r0_max = b.points.iter().map(|p| p.r0).fold(0.0, f64::max);
    let r1_max = b.points.iter().map(|p| p.r1).fold(0.0, f64::max);
    Ok(RunOutcome {
        summary: format!("points {} max_R0 {r0_max:.6} max_R1 {r1_max:.6}", b.points.len()),
        files,
    })
}

fn wiretap(cfg: &RunConfig, spec: &ChannelSpec) -> Result<RunOutcome> {
    let (c, w) = tracer::wiretap_capacity(spec, &cfg.trace)?;
    let path = cfg.output_dir.join("wiretap.json");
    write_json(&path, &json!({ "capacity_bits": c, "witness": w }))?;
    Ok(RunOutcome { summary: format!("capacity {c:.6}"), files: vec![path] })
}

fn matrix_power(spec: &ChannelSpec) -> Result<&crate::linalg::SymMatrix> {
    spec.power()
        .as_matrix()
        .ok_or_else(|| Error::InvalidInput("this command needs a matrix constraint S".into()))
}

/// Aligned channel for `spec`: direct when both channel matrices are square
/// and invertible, otherwise after squaring and an `eps` perturbation.
pub fn aligned_for(spec: &ChannelSpec, eps: f64) -> Result<(AlignedChannel, Option<f64>)> {
    matrix_power(spec)?;
    if spec.is_square() {
        if let Ok(ch) = channel::align(spec) {
            return Ok((ch, None));
        }
    }
    let square = channel::squarify(spec);
    let bar = channel::perturb(&square, eps)?;
    let gap = channel::gap_region_bound(&square, &bar)?;
    Ok((channel::align(&bar)?, Some(gap)))
}

fn enhance_verify(cfg: &RunConfig, file: &io::ChannelFile) -> Result<RunOutcome> {
    let (ch, gap) = match &file.aligned {
        Some(ch) => (ch.clone(), None),
        None => aligned_for(&file.spec, cfg.eps)?,
    };
    let r0 = cfg.r0.or(file.r0).unwrap_or(0.0);
    let report = enhance::verify_enhancement_chain(&ch, r0)?;
    let cert_path = cfg.output_dir.join("certificate.json");
    let mut cert_text = report.certificate.to_json();
    cert_text.push('\n');
    io::write_atomic(&cert_path, cert_text.as_bytes())?;
    let report_path = cfg.output_dir.join("enhancement_report.json");
    let mut value = serde_json::to_value(&report).expect("json");
    value["perturbation_gap_bound"] = json!(gap);
    write_json(&report_path, &value)?;
    if let Some(f) = report.failures().first() {
        return Err(Error::Enhancement { check: f.name, violation: f.value });
    }
    let c = &report.certificate;
    Ok(RunOutcome {
        summary: format!(
            "R1* {:.6} mu1 {:.6} mu2 {:.6} stationarity {:.3e} slackness {:.3e}",
            report.r1_star, c.mu1, c.mu2, c.residual_stationarity, c.residual_slackness
        ),
        files: vec![cert_path, report_path],
    })
}

fn reduce(cfg: &RunConfig, file: &io::ChannelFile) -> Result<RunOutcome> {
    let (ch, gap) = match &file.aligned {
        Some(ch) => (ch.clone(), None),
        None => aligned_for(&file.spec, cfg.eps)?,
    };
    let red = channel::reduce_rank_deficient_s(&ch)?;
    let path = cfg.output_dir.join("reduced.json");
    write_json(
        &path,
        &json!({
            "t": ch.t(),
            "rank": red.channel.t(),
            "eps": gap.map(|_| cfg.eps),
            "perturbation_gap_bound": gap,
            "aligned": { "N1": ch.n1, "N2": ch.n2, "S": ch.s },
            "reduced": { "N1": red.channel.n1, "N2": red.channel.n2, "S": red.channel.s },
            "basis": red.basis,
        }),
    )?;
    Ok(RunOutcome { summary: format!("rank {} of {}", red.channel.t(), ch.t()), files: vec![path] })
}

const ORACLE_GRID: usize = 101;
const SPECTRAL_GRID: usize = 201;
const SPECTRAL_ANGLES: usize = 720;
const ENVELOPE_SLACK: f64 = 1e-6;

fn oracle_compare(cfg: &RunConfig, spec: &ChannelSpec) -> Result<RunOutcome> {
    let b = tracer::trace_boundary(spec, &cfg.trace)?;
    let (h1, h2) = (spec.h1(), spec.h2());
    let (hv1, hv2) = (h1.row(0).to_vec(), h2.row(0).to_vec());
    let mut lattice_dev: Option<f64> = None;
    let mut spectral_dev: Option<f64> = None;
    let mut segment_points = 0usize;
    if let (PowerConstraint::Matrix(s), true) = (spec.power(), spec.t() <= 2) {
        let lattice = GridFrontier::compute(h1, h2, s, ORACLE_GRID)?;
        let spectral = GridFrontier::compute_spectral(h1, h2, s, SPECTRAL_GRID, SPECTRAL_ANGLES)?;
        // the envelope absorbs the vertical segment at the largest R0, which
        // has no matched-R0 comparison against a grid
        let traced = GridFrontier::from_corners(b.points.iter().map(|p| (p.r0, p.r1)).collect());
        let r0_top = b.points.iter().map(|p| p.r0).fold(0.0, f64::max);
        let (mut dl, mut ds) = (0.0f64, 0.0f64);
        for p in &b.points {
            if p.r0 > r0_top - ENVELOPE_SLACK {
                segment_points += 1;
                continue;
            }
            let env = traced.max_r1_at(p.r0 - ENVELOPE_SLACK).unwrap_or(p.r1);
            if let Some(r1) = lattice.max_r1_at(p.r0) {
                dl = dl.max((env - r1).abs());
            }
            if let Some(r1) = spectral.max_r1_at(p.r0) {
                ds = ds.max((env - r1).abs());
            }
        }
        lattice_dev = Some(dl);
        spectral_dev = Some(ds);
    }
    // brute-force feasibility just beyond each traced alpha
    let mut disagreements = 0usize;
    let mut checked = 0usize;
    if spec.t() <= 2 {
        let grid_n = match ConstraintKind::of(spec.power()) {
            ConstraintKind::MatrixPower => 21,
            ConstraintKind::TotalPower => 7,
        };
        for p in b.points.iter().step_by((b.points.len() / 10).max(1)) {
            let beyond = p.alpha * 1.01 + 1e-6;
            let prob = tracer::boundary_problem(&hv1, &hv2, spec.power(), beyond, p.gamma0)?;
            let r = sdp::brute_force_feasible(&prob, grid_n)?;
            checked += 1;
            if r.is_feasible() {
                disagreements += 1;
            }
        }
    }
    let path = cfg.output_dir.join("oracle_report.json");
    write_json(
        &path,
        &json!({
            "points": b.points.len(),
            "lattice_grid_n": ORACLE_GRID,
            "spectral_grid": [SPECTRAL_GRID, SPECTRAL_ANGLES],
            "segment_points": segment_points,
            "max_deviation_lattice_bits": lattice_dev,
            "max_deviation_spectral_bits": spectral_dev,
            "brute_force_checked": checked,
            "brute_force_disagreements": disagreements,
        }),
    )?;
    if disagreements > 0 {
        return Err(Error::Internal(format!(
            "brute force found {disagreements} feasible points beyond the traced boundary"
        )));
    }
    let summary = match (lattice_dev, spectral_dev) {
        (Some(l), Some(d)) => format!("max_deviation {d:.6e} lattice {l:.6e}"),
        _ => format!("brute_force_checked {checked}"),
    };
    Ok(RunOutcome { summary, files: vec![path] })
}

/// Runs the command line and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { crate::error::Category::Parse.exit_code() } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let cfg = RunConfig::from_cli(cli);
    match run(&cfg) {
        Ok(out) => {
            println!("{}", out.summary);
            0
        }
        Err(e) => {
            let cat = e.category();
            eprintln!("error[{}]: {}", cat.as_str(), e);
            cat.exit_code()
        }
    }
}
