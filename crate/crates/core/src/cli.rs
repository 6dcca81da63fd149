//! Command-line front end: parameter ingestion from flags and key=value
//! config files, the solve/taylor/sweep subcommands, and CSV/JSON emission.
//!
//! Exit codes: 0 ok, 2 invalid parameters, 3 unstable, 4 no convergence or
//! numerical failure, 5 truncation overflow, 6 oracle mismatch under
//! --verify.

use std::collections::HashMap;
use std::fs;
use std::io::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::Error;
use crate::metrics;
use crate::model::ModelParams;
use crate::oracle;
use crate::rate_matrix::{algorithm1, IterationSchedule};
use crate::stationary::{self, StationaryDist};
use crate::taylor;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_UNSTABLE: i32 = 3;
pub const EXIT_NO_CONVERGENCE: i32 = 4;
pub const EXIT_TRUNCATION_OVERFLOW: i32 = 5;
pub const EXIT_ORACLE_MISMATCH: i32 = 6;

#[derive(Debug, Parser)]
#[command(
    name = "retrial-qbd",
    about = "Stationary analysis of a multiserver retrial queue with a guard channel",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for the stationary distribution and performance report.
    Solve(SolveArgs),
    /// Relative error of the 1/n series against the converged rate rows
    /// over a load grid.
    Taylor(TaylorArgs),
    /// Blocking/occupancy metrics over a grid of c and mu values.
    Sweep(SweepArgs),
}

/// Model parameters; either (lambda1, lambda2) or (rho, ratio21) with
/// lambda = rho c nu split by lambda2/lambda1 = ratio21.
#[derive(Debug, Args, Default, Clone)]
pub struct ParamArgs {
    /// Key=value config file; command-line flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of channels, including the guard channel.
    #[arg(long)]
    pub c: Option<usize>,
    /// High-priority (handover) arrival rate.
    #[arg(long)]
    pub lambda1: Option<f64>,
    /// Fresh-call arrival rate.
    #[arg(long)]
    pub lambda2: Option<f64>,
    /// Per-customer retrial rate.
    #[arg(long)]
    pub mu: Option<f64>,
    /// Per-channel service rate.
    #[arg(long)]
    pub nu: Option<f64>,
    /// Traffic intensity lambda/(c nu); alternative to lambda1/lambda2.
    #[arg(long)]
    pub rho: Option<f64>,
    /// lambda2/lambda1 ratio used with --rho.
    #[arg(long)]
    pub ratio21: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Convergence tolerance for the rate-row iteration.
    #[arg(long, default_value_t = 1e-13)]
    pub eps_rate: f64,
    /// Tail-mass tolerance for the truncation point.
    #[arg(long, default_value_t = 1e-10)]
    pub eps_trunc: f64,
    /// Fixed truncation point, overriding the tail-mass rule.
    #[arg(long)]
    pub n_max: Option<usize>,
    /// Output format: csv (n,phase,probability) or json summary.
    #[arg(long, default_value = "csv")]
    pub format: String,
    /// Output path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Cross-check against the dense truncated-generator solve; exit 6 on
    /// disagreement beyond 1e-8 total variation.
    #[arg(long)]
    pub verify: bool,
    /// Emit the dense reference solution instead of the fast path.
    #[arg(long)]
    pub oracle: bool,
}

#[derive(Debug, Args)]
pub struct TaylorArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Orbit level the series is evaluated at.
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// Comma-separated load grid; each entry replaces --rho.
    #[arg(long, default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")]
    pub rho_grid: String,
    /// Highest expansion order; one error column per order 1..=m_max.
    #[arg(long, default_value_t = 3)]
    pub m_max: usize,
    #[arg(long, default_value_t = 1e-13)]
    pub eps_rate: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Comma-separated channel counts.
    #[arg(long)]
    pub c_grid: Option<String>,
    /// Comma-separated retrial rates.
    #[arg(long)]
    pub mu_grid: Option<String>,
    #[arg(long, default_value_t = 1e-13)]
    pub eps_rate: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub eps_trunc: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// 12 significant digits, plain scientific notation.
pub fn fmt_sig(v: f64) -> String {
    format!("{v:.11e}")
}

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::InvalidParameter { .. } | Error::WrongServerCount(_) => EXIT_INVALID,
        Error::SizeBudgetExceeded { .. } => EXIT_INVALID,
        Error::Unstable(_) => EXIT_UNSTABLE,
        Error::TruncationOverflow { .. } => EXIT_TRUNCATION_OVERFLOW,
        Error::NoConvergence { .. }
        | Error::NumericalBreakdown(_)
        | Error::BoundaryResidualTooLarge { .. }
        | Error::SingularSystem => EXIT_NO_CONVERGENCE,
    }
}

fn parse_config_file(path: &PathBuf) -> Result<HashMap<String, String>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("cannot read {path:?}: {e}"))?;
    let mut map = HashMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("{path:?}:{}: expected key=value", lineno + 1))?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

impl ParamArgs {
    /// Merges the config file (if any) under the flags and resolves to model
    /// parameters. Exactly one of the two parameterizations must be used.
    pub fn resolve(&self) -> Result<ModelParams, Error> {
        let mut merged = self.clone();
        if let Some(path) = &self.config {
            let map = parse_config_file(path).map_err(|reason| Error::InvalidParameter {
                field: "config",
                reason,
            })?;
            let get_f64 = |map: &HashMap<String, String>, key: &'static str| -> Result<Option<f64>, Error> {
                map.get(key)
                    .map(|v| {
                        v.parse::<f64>().map_err(|_| Error::InvalidParameter {
                            field: key,
                            reason: format!("not a number: {v}"),
                        })
                    })
                    .transpose()
            };
            if merged.c.is_none() {
                merged.c = map
                    .get("c")
                    .map(|v| {
                        v.parse::<usize>().map_err(|_| Error::InvalidParameter {
                            field: "c",
                            reason: format!("not an integer: {v}"),
                        })
                    })
                    .transpose()?;
            }
            merged.lambda1 = merged.lambda1.or(get_f64(&map, "lambda1")?);
            merged.lambda2 = merged.lambda2.or(get_f64(&map, "lambda2")?);
            merged.mu = merged.mu.or(get_f64(&map, "mu")?);
            merged.nu = merged.nu.or(get_f64(&map, "nu")?);
            merged.rho = merged.rho.or(get_f64(&map, "rho")?);
            merged.ratio21 = merged.ratio21.or(get_f64(&map, "ratio21")?);
            for key in map.keys() {
                if !["c", "lambda1", "lambda2", "mu", "nu", "rho", "ratio21"]
                    .contains(&key.as_str())
                {
                    return Err(Error::InvalidParameter {
                        field: "config",
                        reason: format!("unknown key `{key}`"),
                    });
                }
            }
        }

        let missing = |field: &'static str| Error::InvalidParameter {
            field,
            reason: "required but not given".into(),
        };
        let c = merged.c.ok_or_else(|| missing("c"))?;
        let mu = merged.mu.ok_or_else(|| missing("mu"))?;
        let nu = merged.nu.ok_or_else(|| missing("nu"))?;
        match (merged.rho, merged.lambda1, merged.lambda2) {
            (Some(rho), None, None) => {
                let ratio21 = merged.ratio21.ok_or_else(|| missing("ratio21"))?;
                ModelParams::from_rho(c, rho, ratio21, mu, nu)
            }
            (None, Some(l1), Some(l2)) => {
                if merged.ratio21.is_some() {
                    return Err(Error::InvalidParameter {
                        field: "ratio21",
                        reason: "only valid together with rho".into(),
                    });
                }
                ModelParams::new(c, l1, l2, mu, nu)
            }
            _ => Err(Error::InvalidParameter {
                field: "rho",
                reason: "give either rho+ratio21 or lambda1+lambda2, not a mixture".into(),
            }),
        }
    }
}

fn parse_grid<T: std::str::FromStr>(spec: &str, field: &'static str) -> Result<Vec<T>, Error> {
    spec.split(',')
        .map(|tok| {
            tok.trim().parse::<T>().map_err(|_| Error::InvalidParameter {
                field,
                reason: format!("bad grid entry `{tok}`"),
            })
        })
        .collect()
}

fn write_output(out: &Option<PathBuf>, content: &str) -> Result<(), Error> {
    match out {
        Some(path) => fs::write(path, content).map_err(|e| Error::InvalidParameter {
            field: "out",
            reason: format!("cannot write {path:?}: {e}"),
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(content.as_bytes())
                .map_err(|e| Error::InvalidParameter {
                    field: "out",
                    reason: format!("stdout: {e}"),
                })
        }
    }
}

fn distribution_csv(dist: &StationaryDist) -> String {
    let mut csv = String::from("n,phase,probability\n");
    for (n, level) in dist.levels.iter().enumerate() {
        for (i, p) in level.iter().enumerate() {
            csv.push_str(&format!("{n},{i},{}\n", fmt_sig(*p)));
        }
    }
    csv
}

fn total_variation(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let mut tv = 0.0;
    for (la, lb) in a.iter().zip(b) {
        for (x, y) in la.iter().zip(lb) {
            tv += (x - y).abs();
        }
    }
    0.5 * tv
}

fn cmd_solve(args: &SolveArgs) -> Result<(), Error> {
    let params = args.params.resolve()?;
    if args.format != "csv" && args.format != "json" {
        return Err(Error::InvalidParameter {
            field: "format",
            reason: format!("expected csv or json, got {}", args.format),
        });
    }
    let schedule = IterationSchedule::doubling(args.eps_rate, 40);
    let n_trunc = match args.n_max {
        Some(n) if n >= 1 => n,
        Some(n) => {
            return Err(Error::InvalidParameter {
                field: "n_max",
                reason: format!("must be at least 1, got {n}"),
            })
        }
        None => stationary::truncation_point(&params, args.eps_trunc)?.max(1),
    };

    if args.oracle {
        crate::model::check_stability(&params)?;
        let pi = oracle::truncated_generator_solve(&params, n_trunc)?;
        let content = if args.format == "csv" {
            let mut csv = String::from("n,phase,probability\n");
            for (n, level) in pi.iter().enumerate() {
                for (i, p) in level.iter().enumerate() {
                    csv.push_str(&format!("{n},{i},{}\n", fmt_sig(*p)));
                }
            }
            csv
        } else {
            let c = params.c;
            let total: f64 = pi.iter().flatten().sum();
            let low: f64 = pi.iter().map(|l| l[c - 1] + l[c]).sum();
            let high: f64 = pi.iter().map(|l| l[c]).sum();
            let mean: f64 = pi
                .iter()
                .flat_map(|l| l.iter().enumerate())
                .map(|(i, v)| i as f64 * v)
                .sum();
            let summary = serde_json::json!({
                "N": n_trunc,
                "total_mass_check": total,
                "blocking_low": low,
                "blocking_high": high,
                "mean_busy": mean,
                "little_error": (params.lambda() / params.nu - mean).abs(),
                "oracle": true,
            });
            format!("{}\n", serde_json::to_string_pretty(&summary).unwrap())
        };
        return write_output(&args.out, &content);
    }

    let dist = stationary::solve_truncated(&params, n_trunc, &schedule)?;

    if args.verify {
        let reference = oracle::truncated_generator_solve(&params, n_trunc)?;
        let tv = total_variation(&dist.levels, &reference);
        if tv > 1e-8 {
            return Err(Error::NumericalBreakdown(format!(
                "oracle mismatch: total variation {tv:.3e} > 1e-8"
            )));
        }
    }

    let content = if args.format == "csv" {
        distribution_csv(&dist)
    } else {
        let report = metrics::report(&params, &dist);
        let mut value = serde_json::to_value(&report).unwrap();
        let map = value.as_object_mut().unwrap();
        map.insert("N".into(), serde_json::json!(dist.n_trunc));
        map.insert(
            "total_mass_check".into(),
            serde_json::json!(dist.total_mass()),
        );
        format!("{}\n", serde_json::to_string_pretty(&value).unwrap())
    };
    write_output(&args.out, &content)
}

fn cmd_taylor(args: &TaylorArgs) -> Result<(), Error> {
    if args.m_max < 1 {
        return Err(Error::InvalidParameter {
            field: "m_max",
            reason: "need at least one expansion order".into(),
        });
    }
    let rhos: Vec<f64> = parse_grid(&args.rho_grid, "rho_grid")?;
    let base = &args.params;
    let ratio21 = base.ratio21.unwrap_or(4.0);
    let schedule = IterationSchedule::doubling(args.eps_rate, 40);

    let mut csv = String::from("rho");
    for m in 1..=args.m_max {
        csv.push_str(&format!(",err_m{m}"));
    }
    csv.push('\n');

    for &rho in &rhos {
        let params = ModelParams::from_rho(
            base.c.unwrap_or(5),
            rho,
            ratio21,
            base.mu.unwrap_or(1.0),
            base.nu.unwrap_or(1.0),
        )?;
        let exact = algorithm1(&params, args.n, &schedule)?;
        // the m-term approximation keeps coefficients up to order m - 1
        let table = taylor::build_table(&params, args.m_max - 1)?;
        csv.push_str(&format!("{rho}"));
        for m in 1..=args.m_max {
            let approx = table.eval_rows(args.n, m - 1);
            csv.push_str(&format!(",{}", fmt_sig(taylor::relative_error(&approx, &exact))));
        }
        csv.push('\n');
    }
    write_output(&args.out, &csv)
}

fn configured_pool() -> Result<rayon::ThreadPool, Error> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(spec) = std::env::var("RETRIAL_QBD_THREADS") {
        let n: usize = spec.parse().map_err(|_| Error::InvalidParameter {
            field: "RETRIAL_QBD_THREADS",
            reason: format!("not an integer: {spec}"),
        })?;
        if n >= 1 {
            builder = builder.num_threads(n);
        }
    }
    builder.build().map_err(|e| Error::InvalidParameter {
        field: "RETRIAL_QBD_THREADS",
        reason: e.to_string(),
    })
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), Error> {
    use rayon::prelude::*;

    let base = &args.params;
    let cs: Vec<usize> = match &args.c_grid {
        Some(spec) => parse_grid(spec, "c_grid")?,
        None => vec![base.c.ok_or(Error::InvalidParameter {
            field: "c",
            reason: "required (or give --c-grid)".into(),
        })?],
    };
    let mus: Vec<f64> = match &args.mu_grid {
        Some(spec) => parse_grid(spec, "mu_grid")?,
        None => vec![base.mu.ok_or(Error::InvalidParameter {
            field: "mu",
            reason: "required (or give --mu-grid)".into(),
        })?],
    };
    let rho = base.rho.ok_or(Error::InvalidParameter {
        field: "rho",
        reason: "sweeps use the rho+ratio21 parameterization".into(),
    })?;
    let ratio21 = base.ratio21.ok_or(Error::InvalidParameter {
        field: "ratio21",
        reason: "sweeps use the rho+ratio21 parameterization".into(),
    })?;
    let nu = base.nu.unwrap_or(1.0);

    let mut points: Vec<(usize, f64)> = Vec::new();
    for &c in &cs {
        for &mu in &mus {
            points.push((c, mu));
        }
    }

    let schedule = IterationSchedule::doubling(args.eps_rate, 40);
    let pool = configured_pool()?;
    let mut rows: Vec<(usize, String)> = pool.install(|| {
        points
            .par_iter()
            .enumerate()
            .map(|(idx, &(c, mu))| {
                let line = match ModelParams::from_rho(c, rho, ratio21, mu, nu)
                    .and_then(|p| {
                        stationary::algorithm2(&p, args.eps_trunc, &schedule)
                            .map(|d| (p, d))
                    }) {
                    Ok((p, dist)) => {
                        let (low, high) = metrics::blocking(&dist);
                        format!(
                            "{c},{},{rho},{},{},{},{},ok",
                            fmt_sig(mu),
                            fmt_sig(low),
                            fmt_sig(high),
                            fmt_sig(metrics::mean_busy(&dist)),
                            fmt_sig(metrics::little_error(&p, &dist)),
                        )
                    }
                    Err(err) => format!("{c},{},{rho},,,,,{err}", fmt_sig(mu)),
                };
                (idx, line)
            })
            .collect()
    });
    rows.sort_by_key(|(idx, _)| *idx);

    let mut csv =
        String::from("c,mu,rho,blocking_low,blocking_high,mean_busy,little_error,status\n");
    for (_, line) in rows {
        csv.push_str(&line);
        csv.push('\n');
    }
    write_output(&args.out, &csv)
}

/// Executes a parsed command and maps errors to documented exit codes. A
/// machine-readable error record goes to stderr on failure.
pub fn run(cli: &Cli) -> i32 {
    let (result, is_verify) = match &cli.command {
        Command::Solve(args) => (cmd_solve(args), args.verify),
        Command::Taylor(args) => (cmd_taylor(args), false),
        Command::Sweep(args) => (cmd_sweep(args), false),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(err) => {
            let code = match &err {
                Error::NumericalBreakdown(msg) if is_verify && msg.starts_with("oracle mismatch") => {
                    EXIT_ORACLE_MISMATCH
                }
                other => exit_code_for(other),
            };
            let record = serde_json::json!({ "error": err.to_string(), "code": code });
            eprintln!("{record}");
            code
        }
    }
}
