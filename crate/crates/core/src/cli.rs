//! The `starqc` command line.
//!
//! Exit codes: 0 pass (or, for `falsify`, a witness was found), 1 property
//! failure, 2 unreadable or malformed config, 3 expression build failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::applib::{
    self, cfmm_solve_output, cfmm_validate_trade, CfmmState, CorpusBudgets, ProspectParams,
    RatioParams,
};
use crate::config::{self, ConfigError, Loaded};
use crate::par::{self, Exec};
use crate::verify::{
    check_star_inequality_with, check_sublevel_star_with, falsify_minimizer_with,
    falsify_quasiconvex_with, Campaign, VerifyError,
};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_PROPERTY: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_BUILD: i32 = 3;

const PLOT_GRID_CAP: usize = 4_000_000;

#[derive(Debug, Parser)]
#[command(
    name = "starqc",
    version,
    about = "Certify and falsify star quasiconvex functions"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Expression config: a JSON file path or inline JSON.
    #[arg(long)]
    pub config: String,
    #[command(flatten)]
    pub run: RunOpts,
}

#[derive(Debug, Args)]
pub struct RunOpts {
    #[arg(long, env = "STARQC_SEED")]
    pub seed: Option<u64>,
    /// Sampled points (or pairs, for quasiconvexity).
    #[arg(long, default_value_t = 2000, value_parser = clap::value_parser!(u64).range(1..))]
    pub points: u64,
    #[arg(long, default_value_t = 21, value_parser = clap::value_parser!(u64).range(2..))]
    pub lambdas: u64,
    /// Also write the JSON report here (for `plot`, the output directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run campaigns on the calling thread.
    #[arg(long)]
    pub sequential: bool,
}

impl RunOpts {
    fn exec(&self) -> Exec {
        if self.sequential {
            Exec::Sequential
        } else {
            Exec::Parallel
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Property {
    Quasiconvex,
    Minimizer,
    Star,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Demo {
    Prospect,
    Cfmm,
    Ratio,
    Corpus,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Derive the certificate and check the star inequality.
    Certify(Common),
    /// Search for a counterexample; exit 0 when one is found.
    Falsify {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        property: Property,
    },
    /// Write grid and sublevel-set membership CSVs of a 2-D expression.
    Plot {
        #[command(flatten)]
        common: Common,
        /// Grid points per axis.
        #[arg(long, default_value_t = 101, value_parser = clap::value_parser!(u64).range(3..))]
        grid: u64,
        /// Comma-separated sublevel heights.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        deltas: Vec<f64>,
    },
    /// Run an end-to-end scenario.
    Demo {
        #[arg(value_enum)]
        name: Demo,
        #[command(flatten)]
        run: RunOpts,
    },
}

struct Failure {
    code: i32,
    message: String,
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure {
            code: if e.is_parse() { EXIT_PARSE } else { EXIT_BUILD },
            message: e.to_string(),
        }
    }
}

impl From<VerifyError> for Failure {
    fn from(e: VerifyError) -> Self {
        build_failure(e.to_string())
    }
}

impl From<applib::ApplibError> for Failure {
    fn from(e: applib::ApplibError) -> Self {
        build_failure(e.to_string())
    }
}

fn build_failure(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_BUILD,
        message: message.into(),
    }
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure {
        code: EXIT_PARSE,
        message: format!("cannot write {}: {e}", path.display()),
    }
}

struct Outcome {
    code: i32,
    report: Value,
}

/// Parses `args` (program name first) and runs the command, writing the
/// JSON report to `out` and diagnostics to `err`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_PARSE
            } else {
                EXIT_PASS
            };
            let _ = if e.use_stderr() {
                write!(err, "{e}")
            } else {
                write!(out, "{e}")
            };
            return code;
        }
    };
    let (result, out_path) = match &cli.command {
        Command::Certify(c) => (certify(c), c.run.out.clone()),
        Command::Falsify { common, property } => {
            (falsify(common, *property), common.run.out.clone())
        }
        Command::Plot {
            common,
            grid,
            deltas,
        } => (plot(common, *grid as usize, deltas), None),
        Command::Demo { name, run } => (demo(*name, run), run.out.clone()),
    };
    match result {
        Ok(outcome) => {
            let text = serde_json::to_string_pretty(&outcome.report).expect("report serializes");
            let _ = writeln!(out, "{text}");
            if let Some(path) = out_path {
                if let Err(e) = fs::write(&path, format!("{text}\n")) {
                    let f = io_failure(&path, e);
                    let _ = writeln!(err, "error: {}", f.message);
                    return f.code;
                }
            }
            outcome.code
        }
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn load(common: &Common) -> Result<(Loaded, u64, Campaign), Failure> {
    let loaded = config::load(&common.config)?;
    let seed = common.run.seed.or(loaded.seed).unwrap_or(0);
    let campaign = Campaign {
        exec: common.run.exec(),
        probes: loaded.probes.clone(),
    };
    Ok((loaded, seed, campaign))
}

fn certify(common: &Common) -> Result<Outcome, Failure> {
    let (loaded, seed, campaign) = load(common)?;
    let cert = loaded.cert.ok_or_else(|| {
        build_failure("the expression carries no certificate and no claim was given")
    })?;
    let report = check_star_inequality_with(
        &campaign,
        &loaded.expr,
        &cert,
        common.run.points as usize,
        common.run.lambdas as usize,
        seed,
    )?;
    Ok(Outcome {
        code: if report.passed {
            EXIT_PASS
        } else {
            EXIT_PROPERTY
        },
        report: json!({
            "command": "certify",
            "expression": loaded.expr.describe(),
            "certificate": cert,
            "rule_chain": loaded.expr.rule_chain(),
            "report": report,
        }),
    })
}

fn falsify(common: &Common, property: Property) -> Result<Outcome, Failure> {
    let (loaded, seed, campaign) = load(common)?;
    let points = common.run.points as usize;
    let lambdas = common.run.lambdas as usize;
    let cert = || {
        loaded
            .cert
            .clone()
            .ok_or_else(|| build_failure("this property needs a certificate or a claim"))
    };
    let (name, witness) = match property {
        Property::Quasiconvex => (
            "quasiconvex",
            falsify_quasiconvex_with(&campaign, &loaded.expr, points, lambdas, seed),
        ),
        Property::Minimizer => (
            "minimizer",
            falsify_minimizer_with(&campaign, &loaded.expr, &cert()?.xbar, points, seed),
        ),
        Property::Star => (
            "star",
            check_star_inequality_with(&campaign, &loaded.expr, &cert()?, points, lambdas, seed)?
                .witness,
        ),
    };
    Ok(Outcome {
        code: if witness.is_some() {
            EXIT_PASS
        } else {
            EXIT_PROPERTY
        },
        report: json!({
            "command": "falsify",
            "property": name,
            "expression": loaded.expr.describe(),
            "seed": seed,
            "found": witness.is_some(),
            "witness": witness,
        }),
    })
}

fn delta_file_name(delta: f64) -> String {
    format!("sublevel_delta_{delta}.csv")
}

fn write_csv(
    path: &Path,
    header: &[&str],
    rows: impl Iterator<Item = Vec<f64>>,
) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_failure(path, e))?;
    w.write_record(header).map_err(|e| io_failure(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| io_failure(path, e))?;
    }
    w.flush().map_err(|e| io_failure(path, e))
}

fn plot(common: &Common, grid: usize, deltas: &[f64]) -> Result<Outcome, Failure> {
    let (loaded, _, campaign) = load(common)?;
    let e = &loaded.expr;
    if e.dim() != 2 {
        return Err(build_failure(format!(
            "plot needs a 2-dimensional expression, got dimension {}",
            e.dim()
        )));
    }
    let deltas = if deltas.is_empty() {
        loaded.deltas.clone()
    } else {
        deltas.to_vec()
    };
    if deltas.is_empty() {
        return Err(Failure {
            code: EXIT_PARSE,
            message: "no sublevel heights: pass --deltas or set \"deltas\" in the config".into(),
        });
    }
    let dir = common.run.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).map_err(|err| io_failure(&dir, err))?;

    let points = e.domain().flat().grid(grid, PLOT_GRID_CAP);
    let values = par::map(campaign.exec, &points, |p| e.eval(p));
    let grid_path = dir.join("grid.csv");
    write_csv(
        &grid_path,
        &["x1", "x2", "h"],
        points
            .iter()
            .zip(&values)
            .map(|(p, v)| vec![p[0], p[1], *v]),
    )?;
    let mut files = Vec::new();
    for &delta in &deltas {
        let path = dir.join(delta_file_name(delta));
        let members = points
            .iter()
            .zip(&values)
            .filter(|(_, v)| **v <= delta)
            .map(|(p, _)| vec![p[0], p[1]]);
        write_csv(&path, &["x1", "x2"], members)?;
        let count = values.iter().filter(|v| **v <= delta).count();
        files.push(json!({"delta": delta, "file": path.display().to_string(), "members": count}));
    }
    let star = match &loaded.cert {
        Some(cert) => Some(check_sublevel_star_with(
            &campaign, e, &cert.xbar, &deltas, grid,
        )?),
        None => None,
    };
    let code = match &star {
        Some(r) if !r.passed => EXIT_PROPERTY,
        _ => EXIT_PASS,
    };
    Ok(Outcome {
        code,
        report: json!({
            "command": "plot",
            "expression": e.describe(),
            "grid": grid_path.display().to_string(),
            "grid_per_axis": e.domain().flat().grid_resolution(grid, PLOT_GRID_CAP),
            "sublevel_sets": files,
            "star_shaped": star,
        }),
    })
}

fn demo(name: Demo, run: &RunOpts) -> Result<Outcome, Failure> {
    let seed = run.seed.unwrap_or(0);
    let exec = run.exec();
    match name {
        Demo::Prospect => demo_prospect(run, seed, exec),
        Demo::Cfmm => demo_cfmm(seed),
        Demo::Ratio => demo_ratio(run, seed, exec),
        Demo::Corpus => demo_corpus(seed, exec),
    }
}

fn demo_prospect(run: &RunOpts, seed: u64, exec: Exec) -> Result<Outcome, Failure> {
    let v = applib::prospect_value(&ProspectParams::uniform(2, -5.0, 5.0)?)?;
    let cert = v
        .certificate()
        .cloned()
        .expect("prospect value is certified");
    let campaign = Campaign {
        exec,
        probes: Vec::new(),
    };
    let star = check_star_inequality_with(
        &campaign,
        &v,
        &cert,
        run.points as usize,
        run.lambdas as usize,
        seed,
    )?;
    let deltas = [-4.0, 0.0, 2.0];
    let sublevel = check_sublevel_star_with(&campaign, &v, &cert.xbar, &deltas, 201)?;
    let passed = star.passed && sublevel.passed;
    Ok(Outcome {
        code: if passed { EXIT_PASS } else { EXIT_PROPERTY },
        report: json!({
            "demo": "prospect",
            "certificate": cert,
            "rule_chain": v.rule_chain(),
            "star_inequality": star,
            "sublevel_star": sublevel,
            "passed": passed,
        }),
    })
}

fn demo_cfmm(seed: u64) -> Result<Outcome, Failure> {
    const TRADES: usize = 100;
    let fee = 0.997;
    let mut reserves = vec![100.0, 100.0];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut validated = 0;
    let mut first_failure = Value::Null;
    for k in 0..TRADES {
        let state = CfmmState::geometric(reserves.clone(), fee)?;
        let pay = rng.gen_range(0..2);
        let receive = 1 - pay;
        let amount = rng.gen_range(0.001..0.2) * reserves[pay];
        let delta = cfmm_solve_output(&state, pay, amount, receive)?;
        let mut x = vec![0.0; 2];
        let mut y = vec![0.0; 2];
        x[receive] = delta;
        y[pay] = amount;
        if cfmm_validate_trade(&state, &x, &y)? {
            validated += 1;
        } else if first_failure.is_null() {
            first_failure = json!({"trade": k, "reserves": reserves, "pay": y, "receive": x});
        }
        reserves[pay] += amount;
        reserves[receive] -= delta;
    }
    let passed = validated == TRADES;
    Ok(Outcome {
        code: if passed { EXIT_PASS } else { EXIT_PROPERTY },
        report: json!({
            "demo": "cfmm",
            "fee": fee,
            "trades": TRADES,
            "validated": validated,
            "final_reserves": reserves,
            "first_failure": first_failure,
            "passed": passed,
        }),
    })
}

fn demo_ratio(run: &RunOpts, seed: u64, exec: Exec) -> Result<Outcome, Failure> {
    let params = RatioParams::unit(2, 3);
    let e = applib::ratio_log_expr(&params)?;
    let cert = e.certificate().cloned().expect("ratio model is certified");
    let report = check_star_inequality_with(
        &Campaign {
            exec,
            probes: Vec::new(),
        },
        &e,
        &cert,
        run.points as usize,
        run.lambdas as usize,
        seed,
    )?;
    Ok(Outcome {
        code: if report.passed {
            EXIT_PASS
        } else {
            EXIT_PROPERTY
        },
        report: json!({
            "demo": "ratio",
            "benefit_factors": params.alphas.len(),
            "risk_factors": params.betas.len(),
            "certificate": cert,
            "rule_chain": e.rule_chain(),
            "report": report,
        }),
    })
}

fn demo_corpus(seed: u64, exec: Exec) -> Result<Outcome, Failure> {
    let budgets = CorpusBudgets::default();
    let mut entries = Vec::new();
    let mut all = true;
    for entry in applib::builtin_corpus()? {
        let outcome = applib::check_entry(&entry, &budgets, seed, exec)?;
        all &= outcome.matches;
        entries.push(json!({
            "name": outcome.name,
            "matches": outcome.matches,
            "expected": outcome.expected,
            "star_passed": outcome.star.passed,
            "quasiconvex_witness": outcome.quasiconvex_witness,
            "sublevel_passed": outcome.cross.sublevel.passed,
            "ray_passed": outcome.cross.ray.passed,
        }));
    }
    Ok(Outcome {
        code: if all { EXIT_PASS } else { EXIT_PROPERTY },
        report: json!({
            "demo": "corpus",
            "seed": seed,
            "entries": entries,
            "passed": all,
        }),
    })
}
