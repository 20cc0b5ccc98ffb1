//! `normhol`: run orbit, holonomy, tube and Coxeter analyses and emit a JSON report.
//!
//! Exit codes: 0 when every requested analysis passes, 1 when any fails or
//! errors (the report is still written), 2 for configuration errors.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use normhol_core::scenario::{run_scenario, to_json_17, Analysis, Report, ScenarioConfig};
use normhol_core::Error;
use rayon::prelude::*;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "normhol", version, about = "Normal holonomy of orbits of SO(r) on traceless symmetric matrices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON scenario file; flags given on the command line override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, env = "NORMHOL_SEED")]
    seed: Option<u64>,
    /// Leave wall-clock timings out of the report.
    #[arg(long)]
    no_timings: bool,
}

#[derive(Args, Clone)]
struct Target {
    /// `sl-so:<r>` or `product:sl-so:<a>,sl-so:<b>,...`.
    #[arg(long)]
    rep: Option<String>,
    /// `veronese`, `diag:[...]`, `matrix:[[...]]` or `random-regular:<seed>`, one per block.
    #[arg(long)]
    point: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a list of analyses on one orbit.
    Analyze {
        #[command(flatten)]
        target: Target,
        /// Comma-separated: orbit, holonomy, bound, tube, coxeter, veronese-facts, transport.
        #[arg(long = "do", value_delimiter = ',')]
        analyses: Vec<Analysis>,
        #[command(flatten)]
        common: Common,
    },
    /// Check the Veronese facts for V^n.
    VerifyVeronese {
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Compare tube spectra from the formula and from the parametrized patch.
    TubeSpectrum {
        #[command(flatten)]
        target: Target,
        #[command(flatten)]
        common: Common,
    },
    /// Curvature normals and their reflection group.
    Coxeter {
        #[command(flatten)]
        target: Target,
        #[command(flatten)]
        common: Common,
    },
    /// Audit stepped normal parallel transport against the exact solution.
    TransportAudit {
        #[command(flatten)]
        target: Target,
        #[arg(long)]
        step: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Run the same analyses over several Veronese orbits or base points.
    Sweep {
        /// Veronese dimensions, as `a..b` (inclusive) or a comma list.
        #[arg(long, conflicts_with = "points")]
        n: Option<String>,
        #[arg(long)]
        rep: Option<String>,
        /// Base points separated by `;`, used with `--rep`.
        #[arg(long, requires = "rep")]
        points: Option<String>,
        #[arg(long = "do", value_delimiter = ',', required = true)]
        analyses: Vec<Analysis>,
        #[command(flatten)]
        common: Common,
    },
}

fn config_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("normhol: {msg}");
    ExitCode::from(2)
}

fn load_config(common: &Common, target: &Target, defaults: (&str, &str)) -> Result<ScenarioConfig, Error> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            ScenarioConfig::from_json(&text)?
        }
        None => ScenarioConfig::new(defaults.0, defaults.1, Vec::new(), 0),
    };
    if let Some(rep) = &target.rep {
        cfg.representation = rep.clone();
    }
    if let Some(point) = &target.point {
        cfg.point = point.clone();
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if cfg.output.is_none() {
        cfg.output = common.out.as_ref().map(|p| p.display().to_string());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn render(report: &Report, no_timings: bool) -> String {
    if no_timings {
        report.body_json()
    } else {
        report.full_json()
    }
}

fn emit(text: &str, out: Option<&str>) -> Result<(), String> {
    match out {
        Some(path) => fs::write(path, format!("{text}\n")).map_err(|e| format!("{path}: {e}")),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn run_one(cfg: ScenarioConfig, common: &Common) -> ExitCode {
    let report = match run_scenario(&cfg) {
        Ok(r) => r,
        Err(e) => return config_error(e),
    };
    if let Err(e) = emit(&render(&report, common.no_timings), cfg.output.as_deref()) {
        eprintln!("normhol: {e}");
        return ExitCode::from(1);
    }
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        eprintln!("normhol: failed {:?}, errored {:?}", report.summary.failed, report.summary.errored);
        ExitCode::from(1)
    }
}

fn single(common: Common, target: Target, defaults: (&str, &str), analyses: Vec<Analysis>, edit: impl FnOnce(&mut ScenarioConfig)) -> ExitCode {
    match load_config(&common, &target, defaults) {
        Ok(mut cfg) => {
            if !analyses.is_empty() || common.config.is_none() {
                cfg.analyses = analyses;
            }
            edit(&mut cfg);
            if let Err(e) = cfg.validate() {
                return config_error(e);
            }
            run_one(cfg, &common)
        }
        Err(e) => config_error(e),
    }
}

fn parse_n_list(spec: &str) -> Result<Vec<usize>, String> {
    let bad = || format!("bad --n value {spec:?}, expected a..b or a comma list");
    if let Some((a, b)) = spec.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    spec.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect()
}

fn sweep(n: Option<String>, rep: Option<String>, points: Option<String>, analyses: Vec<Analysis>, common: Common) -> ExitCode {
    let targets: Vec<(String, String)> = match (n, rep, points) {
        (Some(n), _, None) => match parse_n_list(&n) {
            Ok(ns) => ns.into_iter().map(|k| (format!("sl-so:{}", k + 1), "veronese".to_string())).collect(),
            Err(e) => return config_error(e),
        },
        (None, Some(rep), Some(points)) => {
            points.split(';').map(|p| (rep.clone(), p.trim().to_string())).collect()
        }
        _ => return config_error("sweep needs --n, or --rep with --points"),
    };
    let seed = common.seed.unwrap_or(0);
    let mut configs = Vec::with_capacity(targets.len());
    for (rep, point) in targets {
        let mut cfg = ScenarioConfig::new(&rep, &point, analyses.clone(), seed);
        cfg.output = common.out.as_ref().map(|p| p.display().to_string());
        if let Err(e) = cfg.validate() {
            return config_error(e);
        }
        configs.push(cfg);
    }
    // Scenarios are independent; results are collected in input order.
    let reports: Vec<Result<Report, Error>> = configs.par_iter().map(run_scenario).collect();
    let mut runs = Vec::with_capacity(reports.len());
    let mut passed = true;
    for r in reports {
        match r {
            Ok(report) => {
                passed &= report.passed();
                let mut v = serde_json::to_value(&report).expect("report serializes");
                if !common.no_timings {
                    v["timings_ms"] = serde_json::to_value(&report.timings_ms).expect("timings serialize");
                }
                runs.push(v);
            }
            Err(e) => return config_error(e),
        }
    }
    let doc = json!({
        "schema_version": normhol_core::scenario::SCHEMA_VERSION,
        "tool_version": normhol_core::scenario::TOOL_VERSION,
        "runs": Value::Array(runs),
        "passed": passed,
    });
    let out = common.out.as_ref().map(|p| p.display().to_string());
    if let Err(e) = emit(&to_json_17(&doc), out.as_deref()) {
        eprintln!("normhol: {e}");
        return ExitCode::from(1);
    }
    if passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Analyze { target, analyses, common } => {
            if common.config.is_none() && (target.rep.is_none() || target.point.is_none()) {
                return config_error("analyze needs --rep and --point, or --config");
            }
            single(common, target, ("", ""), analyses, |_| {})
        }
        Command::VerifyVeronese { n, common } => {
            let target = Target { rep: Some(format!("sl-so:{}", n + 1)), point: Some("veronese".into()) };
            single(common, target, ("", ""), vec![Analysis::VeroneseFacts], |_| {})
        }
        Command::TubeSpectrum { target, common } => {
            single(common, target, ("sl-so:4", "veronese"), vec![Analysis::Tube], |_| {})
        }
        Command::Coxeter { target, common } => {
            single(common, target, ("sl-so:3", "diag:[0.7, -0.1, -0.6]"), vec![Analysis::Coxeter], |_| {})
        }
        Command::TransportAudit { target, step, common } => {
            single(common, target, ("sl-so:4", "veronese"), vec![Analysis::Transport], |cfg| {
                if let Some(h) = step {
                    cfg.transport_step = h;
                }
            })
        }
        Command::Sweep { n, rep, points, analyses, common } => sweep(n, rep, points, analyses, common),
    }
}
