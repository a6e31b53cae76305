//! Command-line front end of the `icf` binary.
//!
//! Exit codes: 0 success, 1 a verdict failed, 2 convexity or the ambient
//! chart was lost, 3 configuration error.

mod config;
mod init;
mod svg;

pub use config::{parse_grid, ExperimentConfig, CONFIG_FORMAT_VERSION, SPHERICAL_HORIZON};
pub use init::{legendre, InitialData};
pub use svg::render as render_svg;

use std::ffi::OsString;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::curvfn::{boundary_decay_scan, verify_properties, CurvatureFunction};
use crate::diagnostics::{
    check_monotone_q, check_pinch_bound, fit_decay, pinching_bound_constant, write_records_csv, DecayOutcome,
    RunSummary, Verdicts, SUMMARY_FORMAT_VERSION,
};
use crate::error::{IcfError, Result};
use crate::flow::{duality_residual_from_states, run, FlowConfig, Termination};
use crate::hypersurface::{load_state, save_state, Ambient, SupportState};
use crate::oracle::{blowup_time, chart_support, fd_check, sphere_radius};
use crate::sphgrid::SphereGrid;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERDICT: i32 = 1;
pub const EXIT_DEGENERATE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;

/// Tolerances of the run verdicts.
pub const MONOTONE_Q_TOL: f64 = 1e-6;
pub const PINCH_TOL: f64 = 1e-4;
/// Smallest acceptable observed order in `icf duality`.
pub const MIN_DUALITY_ORDER: f64 = 1.5;
const FD_TOL: f64 = 1e-6;
const CONFIG_FILE: &str = "config.txt";

#[derive(Debug, Parser)]
#[command(name = "icf", version, about = "Inverse curvature flows of convex surfaces in space forms")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
#[allow(clippy::large_enum_variant)]
pub enum Command {
    /// Evolve initial data and write diagnostics.
    Run(RunArgs),
    /// Check structural properties of a curvature function.
    Verify(VerifyArgs),
    /// Dual-flow residuals of saved spherical runs.
    Duality(DualityArgs),
    /// Exact radius of an evolving geodesic sphere.
    Oracle(OracleArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Config file of `key = value` lines; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// euclidean, hyperbolic or spherical.
    #[arg(long)]
    pub space: Option<String>,
    #[arg(long)]
    pub f: Option<String>,
    #[arg(long)]
    pub alpha: Option<String>,
    /// sphere:R | spheroid:A,B,C | perturbed-sphere:R,EPS,MODE
    #[arg(long)]
    pub init: Option<String>,
    /// Grid size, e.g. 128x64.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub t_end: Option<String>,
    #[arg(long)]
    pub cfl: Option<String>,
    #[arg(long)]
    pub snap_every: Option<String>,
    #[arg(long)]
    pub step_cap: Option<String>,
    #[arg(long)]
    pub record_every_step: bool,
    #[arg(long)]
    pub normalized: bool,
    #[arg(long)]
    pub unsafe_alpha: bool,
    /// Output stem: writes STEM.csv and STEM.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write STEM.svg.
    #[arg(long)]
    pub svg: bool,
    /// Also write snapshots to STEM_states/.
    #[arg(long)]
    pub save_states: bool,
    /// Print the effective configuration and exit.
    #[arg(long)]
    pub print_config: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub f: String,
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct DualityArgs {
    /// State directories written by `icf run --save-states`.
    #[arg(required = true)]
    pub dirs: Vec<PathBuf>,
    /// Override the curvature function recorded with the states.
    #[arg(long)]
    pub f: Option<String>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub space: String,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Initial geodesic radius.
    #[arg(long)]
    pub r0: f64,
    #[arg(long)]
    pub t: f64,
    #[arg(long, default_value_t = 2)]
    pub n: usize,
}

/// Parses arguments, runs the command and returns the exit code.
pub fn main_entry<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return EXIT_CONFIG;
    }
    let outcome = match cli.command {
        Command::Run(a) => cmd_run(&a),
        Command::Verify(a) => cmd_verify(&a),
        Command::Duality(a) => cmd_duality(&a),
        Command::Oracle(a) => cmd_oracle(&a),
    };
    outcome.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        exit_code_for(&e)
    })
}

pub fn exit_code_for(err: &IcfError) -> i32 {
    match err {
        IcfError::ConvexityLost { .. } | IcfError::StateInvalid { .. } | IcfError::Domain(_) => EXIT_DEGENERATE,
        _ => EXIT_CONFIG,
    }
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("ICF_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| IcfError::Config(format!("ICF_THREADS must be a positive integer, got '{v}'")))?;
    // a pool may already exist when called twice in one process; keep it
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Defaults, then the config file, then flags.
pub fn resolve_run_config(args: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::parse_text(
            &fs::read_to_string(p).map_err(|e| IcfError::Config(format!("cannot read {}: {e}", p.display())))?,
        )?,
        None => ExperimentConfig::default(),
    };
    let pairs = [
        ("space", &args.space),
        ("f", &args.f),
        ("alpha", &args.alpha),
        ("init", &args.init),
        ("grid", &args.grid),
        ("t_end", &args.t_end),
        ("cfl", &args.cfl),
        ("snap_every", &args.snap_every),
        ("step_cap", &args.step_cap),
    ];
    for (key, value) in pairs {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    cfg.record_every_step |= args.record_every_step;
    cfg.normalized |= args.normalized;
    cfg.unsafe_alpha |= args.unsafe_alpha;
    cfg.svg |= args.svg;
    cfg.save_states |= args.save_states;
    if let Some(o) = &args.out {
        cfg.out = Some(o.clone());
    }
    Ok(cfg)
}

/// Flow configuration described by an experiment.
pub fn flow_config(cfg: &ExperimentConfig) -> Result<FlowConfig> {
    let f = CurvatureFunction::construct(&cfg.f, 2)?;
    let mut flow = FlowConfig::new(cfg.space, f, cfg.alpha, cfg.effective_t_end());
    flow.cfl = cfg.cfl;
    flow.stop = cfg.stop_rules();
    flow.snap_every = Some(cfg.effective_snap_every());
    flow.record_every_step = cfg.record_every_step;
    flow.normalized = cfg.normalized;
    flow.unsafe_alpha = cfg.unsafe_alpha;
    flow.keep_states = cfg.svg || cfg.save_states;
    flow.validate()?;
    Ok(flow)
}

fn with_suffix(stem: &Path, suffix: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn cmd_run(args: &RunArgs) -> Result<i32> {
    let cfg = resolve_run_config(args)?;
    if args.print_config {
        print!("{cfg}");
        return Ok(EXIT_OK);
    }
    let flow = flow_config(&cfg)?;
    let grid = Arc::new(SphereGrid::new(cfg.grid.0, cfg.grid.1)?);
    let initial = cfg.init.build(cfg.space, grid)?;
    let result = run(&flow, &initial)?;

    let records = &result.records;
    let asserted = cfg.space == Ambient::Euclidean && !cfg.unsafe_alpha;
    let verdicts = Verdicts {
        monotone_q: check_monotone_q(records, MONOTONE_Q_TOL).pass,
        pinch_bound: check_pinch_bound(records, PINCH_TOL),
        asserted,
    };
    let decay_rate = match cfg.space {
        Ambient::Hyperbolic => match fit_decay(records, cfg.space) {
            Ok(DecayOutcome::Fitted(fit)) => Some(fit.rate),
            _ => None,
        },
        _ => None,
    };
    let first = records.first().expect("runs record their initial state");
    let last = records.last().expect("runs record their final state");
    let summary = RunSummary {
        format_version: SUMMARY_FORMAT_VERSION,
        termination: result.termination.to_string(),
        t_final: result.final_state.t,
        steps: result.steps,
        t_star_estimate: result.t_star_estimate,
        decay_rate,
        pinch_initial: first.pinch,
        pinch_max: records.iter().map(|r| r.pinch).fold(f64::NEG_INFINITY, f64::max),
        q_initial: first.q,
        q_final: last.q,
        verdicts: verdicts.clone(),
        failure: result.failure.clone(),
    };

    let stem = cfg.out.clone().unwrap_or_else(|| PathBuf::from("icf_run"));
    if let Some(parent) = stem.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    write_records_csv(records, BufWriter::new(fs::File::create(with_suffix(&stem, ".csv"))?))?;
    serde_json::to_writer_pretty(fs::File::create(with_suffix(&stem, ".json"))?, &summary)?;
    if cfg.svg {
        fs::write(with_suffix(&stem, ".svg"), render_svg(&result.snapshots, records))?;
    }
    if cfg.save_states {
        let dir = with_suffix(&stem, "_states");
        fs::create_dir_all(&dir)?;
        fs::write(dir.join(CONFIG_FILE), cfg.to_string())?;
        for (k, st) in result.snapshots.iter().enumerate() {
            save_state(st, &dir.join(format!("snap_{k:05}")))?;
        }
    }

    println!("termination  {}", summary.termination);
    println!("t_final      {}", summary.t_final);
    println!("steps        {}", summary.steps);
    if let Some(t) = summary.t_star_estimate {
        println!("T_star       {t}");
    }
    if let Some(r) = summary.decay_rate {
        println!("decay_rate   {r}");
    }
    println!("pinch        {} -> max {}", summary.pinch_initial, summary.pinch_max);
    println!("q            {} -> {}", summary.q_initial, summary.q_final);
    if let Some(msg) = &summary.failure {
        eprintln!("run stopped: {msg}");
    }

    Ok(match result.termination {
        Termination::ConvexityLost | Termination::DomainViolation => EXIT_DEGENERATE,
        Termination::StepCap => {
            eprintln!("warning: step cap reached at t = {}", summary.t_final);
            if asserted && !(verdicts.monotone_q && verdicts.pinch_bound) { EXIT_VERDICT } else { EXIT_OK }
        }
        _ if asserted && !(verdicts.monotone_q && verdicts.pinch_bound) => EXIT_VERDICT,
        _ => EXIT_OK,
    })
}

fn cmd_verify(args: &VerifyArgs) -> Result<i32> {
    let f = CurvatureFunction::parse(&args.f, args.n)?;
    let report = verify_properties(&f, args.samples, args.seed)?;
    print!("{report}");

    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut fd_worst = 0.0f64;
    let mut involution_worst = 0.0f64;
    let twice = f.dual().dual();
    for _ in 0..200 {
        let p: Vec<f64> = (0..args.n).map(|_| 10f64.powf(rng.gen_range(-1.0..1.0))).collect();
        fd_worst = fd_worst.max(fd_check(&f, &p, 1e-5)?.max());
        let (a, b) = (f.value(&p)?, twice.value(&p)?);
        involution_worst = involution_worst.max((a - b).abs() / a.abs());
    }
    let mark = |ok: bool| if ok { "pass" } else { "FAIL" };
    let fd_ok = fd_worst <= FD_TOL;
    let involution_ok = involution_worst <= 1e-12;
    println!("  {:<34} {fd_worst:>14.6e}  {}", "finite-difference deviation", mark(fd_ok));
    println!("  {:<34} {involution_worst:>14.6e}  {}", "dual involution residual", mark(involution_ok));

    let decay = boundary_decay_scan(&f, 256)?;
    println!("  dual boundary behaviour: {} (worst relative limit {:.3e})", decay.verdict, decay.worst_relative_limit);
    match pinching_bound_constant(&f, 4.0)? {
        crate::diagnostics::PinchingBound::Bounded { constant, .. } => {
            println!("  pinching constant for C = 4: {constant:.6}");
        }
        crate::diagnostics::PinchingBound::Unbounded { last_sup, .. } => {
            println!("  pinching constant for C = 4: unbounded (sup reached {last_sup:.3e})");
        }
    }
    let ok = report.passed() && fd_ok && involution_ok;
    println!("{}", if ok { "all checks passed" } else { "some checks FAILED" });
    Ok(if ok { EXIT_OK } else { EXIT_VERDICT })
}

fn load_run_dir(dir: &Path, f_override: Option<&str>) -> Result<(Vec<SupportState>, CurvatureFunction)> {
    let spec = match f_override {
        Some(s) => s.to_string(),
        None => {
            let text = fs::read_to_string(dir.join(CONFIG_FILE))
                .map_err(|e| IcfError::Config(format!("cannot read {}: {e}", dir.join(CONFIG_FILE).display())))?;
            ExperimentConfig::parse_text(&text)?.f.to_string()
        }
    };
    let mut stems: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| IcfError::Config(format!("cannot read {}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|x| x == "json")
                && p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("snap_"))
        })
        .map(|p| p.with_extension(""))
        .collect();
    stems.sort();
    let states = stems.iter().map(|s| load_state(s)).collect::<Result<Vec<_>>>()?;
    Ok((states, CurvatureFunction::parse(&spec, 2)?))
}

fn cmd_duality(args: &DualityArgs) -> Result<i32> {
    let mut levels = Vec::new();
    for dir in &args.dirs {
        let (states, f) = load_run_dir(dir, args.f.as_deref())?;
        let ni = states.first().map(|s| s.grid().ni()).unwrap_or(0);
        let nj = states.first().map(|s| s.grid().nj()).unwrap_or(0);
        let res = duality_residual_from_states(&states, &f)?;
        println!("{} ({ni}x{nj})", dir.display());
        println!("  {:>12}  {:>14}", "t", "max |R|");
        for p in &res {
            println!("  {:>12.6}  {:>14.6e}", p.t, p.max_abs);
        }
        levels.push((ni, res));
    }
    if levels.len() < 2 {
        eprintln!("warning: a single resolution was given; the convergence order is not computable");
        return Ok(EXIT_OK);
    }
    levels.sort_by_key(|(ni, _)| *ni);
    // compare only at times every resolution has
    let same = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(1.0);
    let common: Vec<f64> = levels[0]
        .1
        .iter()
        .map(|p| p.t)
        .filter(|t| levels.iter().all(|(_, r)| r.iter().any(|p| same(p.t, *t))))
        .collect();
    if common.is_empty() {
        return Err(IcfError::InsufficientData("the runs share no snapshot times".into()));
    }
    let errors: Vec<(usize, f64)> = levels
        .iter()
        .map(|(ni, res)| {
            let e = res
                .iter()
                .filter(|p| common.iter().any(|t| same(p.t, *t)))
                .map(|p| p.max_abs)
                .fold(0.0, f64::max);
            (*ni, e)
        })
        .collect();
    let mut min_order = f64::INFINITY;
    println!("observed order at {} common times", common.len());
    for w in errors.windows(2) {
        let ((n0, e0), (n1, e1)) = (w[0], w[1]);
        let order = (e0 / e1).ln() / (n1 as f64 / n0 as f64).ln();
        min_order = min_order.min(order);
        println!("  {n0} -> {n1}: {e0:.3e} -> {e1:.3e}, order {order:.3}");
    }
    Ok(if min_order >= MIN_DUALITY_ORDER { EXIT_OK } else { EXIT_VERDICT })
}

fn cmd_oracle(args: &OracleArgs) -> Result<i32> {
    let space: Ambient = args.space.parse()?;
    let as_config = |e: IcfError| match e {
        IcfError::Domain(m) => IcfError::Config(m),
        other => other,
    };
    let r = sphere_radius(space, args.alpha, args.r0, args.t, args.n).map_err(as_config)?;
    println!("radius         {r}");
    println!("chart_support  {}", chart_support(space, r));
    if space == Ambient::Spherical && args.alpha == 1.0 {
        println!("T_star         {}", blowup_time(args.r0, args.n).map_err(as_config)?);
    }
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(extra: &[&str]) -> RunArgs {
        let mut v = vec!["icf", "run"];
        v.extend_from_slice(extra);
        match Cli::try_parse_from(v).unwrap().command {
            Command::Run(a) => a,
            _ => unreachable!(),
        }
    }

    #[test]
    fn flags_override_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.cfg");
        fs::write(&path, "space = hyperbolic\nalpha = 0.5\ngrid = 32x16\n").unwrap();
        let cfg = resolve_run_config(&args(&["--config", path.to_str().unwrap(), "--alpha", "1", "--svg"])).unwrap();
        assert_eq!(cfg.space, Ambient::Hyperbolic);
        assert_eq!(cfg.alpha, 1.0);
        assert_eq!(cfg.grid, (32, 16));
        assert!(cfg.svg);
    }

    #[test]
    fn alpha_range_is_a_config_error() {
        let cfg = resolve_run_config(&args(&["--alpha", "1.5"])).unwrap();
        let err = flow_config(&cfg).unwrap_err();
        assert_eq!(exit_code_for(&err), EXIT_CONFIG);
        assert!(err.to_string().contains("unsafe-alpha"));
    }

    #[test]
    fn error_classes_map_to_exit_codes() {
        let lost = IcfError::ConvexityLost { i: 0, j: 0, t: 0.0, min_radius: -1.0 };
        assert_eq!(exit_code_for(&lost), EXIT_DEGENERATE);
        assert_eq!(exit_code_for(&IcfError::Config("x".into())), EXIT_CONFIG);
    }

    #[test]
    fn suffixes_keep_dots_in_stems() {
        assert_eq!(with_suffix(Path::new("out/run.v2"), ".csv"), PathBuf::from("out/run.v2.csv"));
    }
}
