//! Command-line front end: plot-ready CSV/JSON datasets and verification
//! runs.
//!
//! Every emitted cell is either a finite positive number or empty with a
//! machine-readable reason; output is byte-identical across runs and worker
//! thread counts.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::bounds::{BoundModel, Family};
use crate::error::{Error, Result};
use crate::estimates;
use crate::index_sets;
use crate::polytope::{self, VolumeMethod};
use crate::presets;
use crate::tails;

#[derive(Parser, Debug)]
#[command(
    name = "qopt",
    about = "Quasi-optimal index sets, exact truncation tails and sharpness estimates",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct CommonOpts {
    /// Model file path or preset name (p1..p6)
    #[arg(long)]
    model: Option<String>,

    /// Output file (stdout when omitted); a JSON config sidecar is written
    /// next to it
    #[arg(long)]
    out: Option<PathBuf>,

    #[arg(long, value_enum, default_value = "csv")]
    format: OutputFormat,

    /// Enumeration tolerance
    #[arg(long, default_value_t = tails::DEFAULT_TOL)]
    tol: f64,

    /// Seed for sampled property checks
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Worker threads (0 = library default)
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact tails and every applicable estimate over a cardinality ladder
    Tail {
        #[command(flatten)]
        common: CommonOpts,

        /// Explicit cardinalities, comma separated
        #[arg(long = "M", value_delimiter = ',')]
        m_list: Vec<u64>,

        /// Level range J1..J2; cardinalities are the superlevel counts
        #[arg(long, conflicts_with = "m_list")]
        levels: Option<String>,

        #[arg(long, value_delimiter = ',', default_values_t = vec![0.3, 1.0, 4.0])]
        eps: Vec<f64>,

        #[arg(long, value_delimiter = ',', default_values_t = vec![0.3, 0.5, 0.7, 0.9])]
        p: Vec<f64>,

        #[arg(long, default_value_t = estimates::XI_MAX)]
        xi: f64,
    },
    /// Theoretical minimum cardinalities over an epsilon grid
    Mincard {
        #[command(flatten)]
        common: CommonOpts,

        #[arg(long, value_delimiter = ',',
              default_values_t = vec![0.1, 0.2, 0.3, 0.5, 1.0, 2.0, 4.0])]
        eps: Vec<f64>,
    },
    /// The tail sum_{j>=J} j^N e^{-j}: exact value, asymptotic and
    /// pre-asymptotic bounds
    Sumjn {
        #[command(flatten)]
        common: CommonOpts,

        #[arg(long, default_value_t = 20)]
        n: u32,

        /// J range J1..J2
        #[arg(long, default_value = "1..40")]
        levels: String,
    },
    /// Fit and print the Ehrhart quasi-polynomial of a homogeneous model
    Ehrhart {
        #[command(flatten)]
        common: CommonOpts,

        /// Held-out verification points (at least 2q are always used)
        #[arg(long, default_value_t = 8)]
        max_verify: u32,
    },
    /// Limiting-set volume
    Volume {
        #[command(flatten)]
        common: CommonOpts,

        /// analytic | scaling (default: analytic when available)
        #[arg(long)]
        method: Option<String>,
    },
    /// Run the cross-module verification suite on the built-in presets
    Check {
        #[command(flatten)]
        common: CommonOpts,
    },
}

pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let common = match &cli.command {
        Command::Tail { common, .. }
        | Command::Mincard { common, .. }
        | Command::Sumjn { common, .. }
        | Command::Ehrhart { common, .. }
        | Command::Volume { common, .. }
        | Command::Check { common } => common,
    };
    let threads = common.threads;
    if threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Argument(format!("thread pool: {e}")))?;
        pool.install(|| dispatch_inner(&cli))
    } else {
        dispatch_inner(&cli)
    }
}

fn dispatch_inner(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Tail {
            common,
            m_list,
            levels,
            eps,
            p,
            xi,
        } => cmd_tail(common, m_list, levels.as_deref(), eps, p, *xi),
        Command::Mincard { common, eps } => cmd_mincard(common, eps),
        Command::Sumjn { common, n, levels } => cmd_sumjn(common, *n, levels),
        Command::Ehrhart { common, max_verify } => cmd_ehrhart(common, *max_verify),
        Command::Volume { common, method } => cmd_volume(common, method.as_deref()),
        Command::Check { common } => cmd_check(common),
    }
}

fn load_model(common: &CommonOpts) -> Result<BoundModel> {
    let source = common
        .model
        .as_deref()
        .ok_or_else(|| Error::Argument("--model is required".into()))?;
    if let Some(json) = presets::preset_json(source) {
        return BoundModel::from_json(json);
    }
    let text = fs::read_to_string(source)
        .map_err(|e| Error::Argument(format!("cannot read model {source:?}: {e}")))?;
    BoundModel::from_json(&text)
}

fn parse_level_range(s: &str) -> Result<(u32, u32)> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| Error::Argument(format!("bad level range {s:?}; expected J1..J2")))?;
    let lo: u32 = a
        .trim()
        .parse()
        .map_err(|_| Error::Argument(format!("bad level bound {a:?}")))?;
    let hi: u32 = b
        .trim()
        .parse()
        .map_err(|_| Error::Argument(format!("bad level bound {b:?}")))?;
    if lo > hi {
        return Err(Error::Argument("level range must be ascending".into()));
    }
    Ok((lo, hi))
}

/// Deterministic cell formatting: fixed scientific notation, never NaN/Inf.
fn fmt_cell(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.12e}")
    } else {
        String::new()
    }
}

fn fmt_eps(e: f64) -> String {
    // trims trailing zeros so column names read upper_eps_0.3
    let s = format!("{e}");
    s
}

struct Sink {
    out: Option<PathBuf>,
    buf: Vec<u8>,
}

impl Sink {
    fn new(common: &CommonOpts) -> Sink {
        Sink {
            out: common.out.clone(),
            buf: Vec::new(),
        }
    }

    fn finish(self, config_json: &serde_json::Value) -> Result<()> {
        if let Some(path) = &self.out {
            fs::write(path, &self.buf)?;
            let sidecar = path.with_extension(format!(
                "{}config.json",
                path.extension()
                    .map(|e| format!("{}.", e.to_string_lossy()))
                    .unwrap_or_default()
            ));
            fs::write(&sidecar, serde_json::to_string_pretty(config_json)? + "\n")?;
        } else {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(&self.buf)?;
        }
        Ok(())
    }
}

impl Write for Sink {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.buf.write(buf)
    }
    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

/// One estimate cell: a value or a short machine-readable refusal.
enum Cell {
    Value(f64),
    Skip(&'static str),
}

impl Cell {
    fn from_result(r: Result<f64>) -> Cell {
        match r {
            Ok(v) if v.is_finite() => Cell::Value(v),
            Ok(_) => Cell::Skip("nonfinite"),
            Err(Error::Domain(_)) => Cell::Skip("out_of_regime"),
            Err(_) => Cell::Skip("error"),
        }
    }
}

struct TailRow {
    m: u64,
    cells: Vec<(String, Cell)>,
}

fn cmd_tail(
    common: &CommonOpts,
    m_list: &[u64],
    levels: Option<&str>,
    eps: &[f64],
    p_grid: &[f64],
    xi: f64,
) -> Result<()> {
    let model = load_model(common)?;
    let n = model.dimension() as u32;

    let ms: Vec<u64> = if !m_list.is_empty() {
        let mut v = m_list.to_vec();
        v.sort_unstable();
        v.dedup();
        v
    } else {
        let (lo, hi) = parse_level_range(levels.unwrap_or("1..10"))?;
        let mut v = Vec::new();
        for j in lo..=hi {
            v.push(index_sets::count_superlevel(
                &model,
                j as f64,
                index_sets::DEFAULT_MEMBER_CEILING,
            )?);
        }
        v.dedup();
        v
    };
    if ms.iter().any(|&m| m == 0) {
        return Err(Error::Argument("cardinalities must be >= 1".into()));
    }

    // shared, M-independent quantities
    let volp = match polytope::volume(&model, VolumeMethod::AnalyticSimplex, 1e-9) {
        Ok(ls) => Some(ls.volume),
        Err(_) => polytope::volume(&model, VolumeMethod::LatticeScaling, 1e-3)
            .ok()
            .map(|ls| ls.volume),
    };
    let qp = polytope::ehrhart_fit(&model, 8).ok();
    let q = qp.as_ref().map(|qp| qp.q);
    let homogeneous = matches!(model.family(), Family::WeightedLinear)
        || (matches!(model.family(), Family::SupAffine)
            && model.affine_terms().iter().all(|t| t.offset == 0.0));
    let sigma = if homogeneous {
        index_sets::count_superlevel(&model, 1.0, index_sets::DEFAULT_MEMBER_CEILING).ok()
    } else {
        None
    };
    let preasym_cap = if homogeneous {
        index_sets::count_superlevel(&model, n as f64, index_sets::DEFAULT_MEMBER_CEILING).ok()
    } else {
        None
    };
    let is_wl = matches!(model.family(), Family::WeightedLinear);
    let isotropic_lambda = if is_wl
        && model
            .lambda()
            .windows(2)
            .all(|w| (w[0] - w[1]).abs() < 1e-15)
    {
        Some(model.lambda()[0])
    } else {
        None
    };
    let tol = common.tol;
    let pf = model.prefactor();

    let rows: Vec<TailRow> = ms
        .par_iter()
        .map(|&m| -> Result<TailRow> {
            let mut cells: Vec<(String, Cell)> = Vec::new();
            let exact = tails::exact_tail(&model, m, tol)?;
            cells.push(("exact".into(), Cell::Value(exact.tail)));
            for &e in eps {
                let cell = match volp {
                    Some(v) => Cell::from_result(
                        estimates::upper_asymptotic(m, n, v, e, false).map(|x| pf * x),
                    ),
                    None => Cell::Skip("no_volume"),
                };
                cells.push((format!("upper_eps_{}", fmt_eps(e)), cell));
            }
            let lower = match (volp, q) {
                (Some(v), Some(q)) => {
                    Cell::from_result(estimates::lower_asymptotic(m, n, v, q).map(|x| pf * x))
                }
                (None, _) => Cell::Skip("no_volume"),
                (_, None) => Cell::Skip("no_ehrhart_period"),
            };
            cells.push(("lower".into(), lower));
            for &p in p_grid {
                let cell = if is_wl {
                    Cell::from_result(estimates::stechkin(m, model.lambda(), p).map(|x| pf * x))
                } else {
                    Cell::Skip("needs_weighted_linear")
                };
                cells.push((format!("stechkin_p_{}", fmt_eps(p)), cell));
            }
            let optim = if is_wl {
                Cell::from_result(estimates::stechkin_optimized(m, model.lambda(), xi).map(|x| pf * x))
            } else {
                Cell::Skip("needs_weighted_linear")
            };
            cells.push(("optim_xi".into(), optim));
            let preasym = match (sigma, preasym_cap) {
                (Some(s), Some(cap)) if m <= cap => Cell::from_result(
                    estimates::pre_asymptotic_tail_bound(m, n, s).map(|x| pf * x),
                ),
                (Some(_), Some(_)) => Cell::Skip("out_of_regime"),
                _ => Cell::Skip("needs_homogeneous_model"),
            };
            cells.push(("preasym".into(), preasym));
            let complex = match isotropic_lambda {
                Some(l) => Cell::from_result(estimates::complex_bound(m, n, l).map(|x| pf * x)),
                None => Cell::Skip("needs_isotropic_model"),
            };
            cells.push(("complex".into(), complex));
            Ok(TailRow { m, cells })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut sink = Sink::new(common);
    match common.format {
        OutputFormat::Csv => {
            let names: Vec<&str> = rows[0].cells.iter().map(|(n, _)| n.as_str()).collect();
            writeln!(sink, "M,{},reason", names.join(","))?;
            for row in &rows {
                let mut reasons = Vec::new();
                let mut fields = vec![row.m.to_string()];
                for (name, cell) in &row.cells {
                    match cell {
                        Cell::Value(v) => fields.push(fmt_cell(*v)),
                        Cell::Skip(r) => {
                            fields.push(String::new());
                            reasons.push(format!("{name}:{r}"));
                        }
                    }
                }
                fields.push(reasons.join(";"));
                writeln!(sink, "{}", fields.join(","))?;
            }
        }
        OutputFormat::Json => {
            let objs: Vec<serde_json::Value> = rows
                .iter()
                .map(|row| {
                    let mut o = serde_json::Map::new();
                    o.insert("M".into(), row.m.into());
                    for (name, cell) in &row.cells {
                        match cell {
                            Cell::Value(v) => o.insert(name.clone(), (*v).into()),
                            Cell::Skip(r) => o.insert(name.clone(), serde_json::json!({"skip": r})),
                        };
                    }
                    o.into()
                })
                .collect();
            writeln!(sink, "{}", serde_json::to_string_pretty(&objs)?)?;
        }
    }
    sink.finish(&serde_json::json!({
        "command": "tail",
        "model": common.model,
        "M": ms,
        "eps": eps,
        "p": p_grid,
        "xi": xi,
        "tol": tol,
        "seed": common.seed,
    }))
}

fn cmd_mincard(common: &CommonOpts, eps: &[f64]) -> Result<()> {
    let model = load_model(common)?;
    let qp = polytope::ehrhart_fit(&model, 8)?;
    let rows: Vec<(f64, estimates::MinCardinality)> = eps
        .iter()
        .map(|&e| estimates::min_cardinality(&model, e, &qp).map(|mc| (e, mc)))
        .collect::<Result<Vec<_>>>()?;

    let mut sink = Sink::new(common);
    match common.format {
        OutputFormat::Csv => {
            writeln!(sink, "eps,delta_eps,J_eps,M_eps,Jp_eps,Mp_eps,rate_factor")?;
            for (e, mc) in &rows {
                writeln!(
                    sink,
                    "{},{},{},{},{},{},{}",
                    fmt_eps(*e),
                    mc.delta_eps,
                    fmt_cell(mc.j_eps),
                    mc.m_eps,
                    fmt_cell(mc.jp_eps),
                    mc.mp_eps,
                    fmt_cell(mc.rate_factor)
                )?;
            }
        }
        OutputFormat::Json => {
            let objs: Vec<serde_json::Value> = rows
                .iter()
                .map(|(e, mc)| {
                    serde_json::json!({
                        "eps": e,
                        "delta_eps": mc.delta_eps,
                        "J_eps": mc.j_eps,
                        "M_eps": mc.m_eps.to_string(),
                        "Jp_eps": mc.jp_eps,
                        "Mp_eps": mc.mp_eps.to_string(),
                        "rate_factor": mc.rate_factor,
                    })
                })
                .collect();
            writeln!(sink, "{}", serde_json::to_string_pretty(&objs)?)?;
        }
    }
    sink.finish(&serde_json::json!({
        "command": "mincard",
        "model": common.model,
        "eps": eps,
    }))
}

fn cmd_sumjn(common: &CommonOpts, n: u32, levels: &str) -> Result<()> {
    let (lo, hi) = parse_level_range(levels)?;
    let rows: Vec<(u32, f64, Cell, Cell)> = (lo.max(1)..=hi)
        .map(|j| -> Result<_> {
            let exact = estimates::sum_jn_exact(j, n)?;
            let asym = Cell::from_result(estimates::sum_jn_bound(j, n, n as f64 + 1.0));
            let preasym = Cell::from_result(estimates::pre_asymptotic_sum_bound(j, n));
            Ok((j, exact, asym, preasym))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut sink = Sink::new(common);
    match common.format {
        OutputFormat::Csv => {
            writeln!(sink, "J,exact,asym_bound,preasym_bound,reason")?;
            for (j, exact, asym, preasym) in &rows {
                let mut reasons = Vec::new();
                let a = match asym {
                    Cell::Value(v) => fmt_cell(*v),
                    Cell::Skip(r) => {
                        reasons.push(format!("asym_bound:{r}"));
                        String::new()
                    }
                };
                let p = match preasym {
                    Cell::Value(v) => fmt_cell(*v),
                    Cell::Skip(r) => {
                        reasons.push(format!("preasym_bound:{r}"));
                        String::new()
                    }
                };
                writeln!(sink, "{j},{},{a},{p},{}", fmt_cell(*exact), reasons.join(";"))?;
            }
        }
        OutputFormat::Json => {
            let objs: Vec<serde_json::Value> = rows
                .iter()
                .map(|(j, exact, asym, preasym)| {
                    let cell = |c: &Cell| match c {
                        Cell::Value(v) => serde_json::json!(v),
                        Cell::Skip(r) => serde_json::json!({ "skip": r }),
                    };
                    serde_json::json!({
                        "J": j,
                        "exact": exact,
                        "asym_bound": cell(asym),
                        "preasym_bound": cell(preasym),
                    })
                })
                .collect();
            writeln!(sink, "{}", serde_json::to_string_pretty(&objs)?)?;
        }
    }
    sink.finish(&serde_json::json!({
        "command": "sumjn",
        "N": n,
        "levels": levels,
    }))
}

fn cmd_ehrhart(common: &CommonOpts, max_verify: u32) -> Result<()> {
    let model = load_model(common)?;
    let qp = polytope::ehrhart_fit(&model, max_verify)?;
    let mut sink = Sink::new(common);
    writeln!(sink, "{}", qp.to_json())?;
    sink.finish(&serde_json::json!({
        "command": "ehrhart",
        "model": common.model,
        "max_verify": max_verify,
    }))
}

fn cmd_volume(common: &CommonOpts, method: Option<&str>) -> Result<()> {
    let model = load_model(common)?;
    let ls = match method {
        Some("analytic") => polytope::volume(&model, VolumeMethod::AnalyticSimplex, common.tol)?,
        Some("scaling") => {
            let tol = if common.tol < 1e-6 { 1e-3 } else { common.tol };
            polytope::volume(&model, VolumeMethod::LatticeScaling, tol)?
        }
        Some(other) => {
            return Err(Error::Argument(format!(
                "unknown method {other:?}; expected analytic or scaling"
            )))
        }
        None => polytope::volume(&model, VolumeMethod::AnalyticSimplex, common.tol).or_else(
            |_| {
                let tol = if common.tol < 1e-6 { 1e-3 } else { common.tol };
                polytope::volume(&model, VolumeMethod::LatticeScaling, tol)
            },
        )?,
    };
    let mut sink = Sink::new(common);
    writeln!(sink, "{}", serde_json::to_string_pretty(&ls)?)?;
    sink.finish(&serde_json::json!({
        "command": "volume",
        "model": common.model,
        "method": method,
    }))
}

struct CheckOutcome {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn cmd_check(common: &CommonOpts) -> Result<()> {
    let mut outcomes: Vec<CheckOutcome> = Vec::new();
    let mut record = |name: &'static str, r: Result<String>| match r {
        Ok(detail) => outcomes.push(CheckOutcome {
            name,
            passed: true,
            detail,
        }),
        Err(e) => outcomes.push(CheckOutcome {
            name,
            passed: false,
            detail: e.to_string(),
        }),
    };

    record("presets_parse", (|| {
        for name in presets::PRESET_NAMES {
            presets::preset(name)?;
        }
        Ok(format!("{} presets", presets::PRESET_NAMES.len()))
    })());

    record("ehrhart_volume_consistency", (|| {
        for name in ["p1", "p2"] {
            let m = presets::preset(name)?;
            let qp = polytope::ehrhart_fit(&m, 8)?;
            let v = polytope::volume(&m, VolumeMethod::AnalyticSimplex, 1e-9)?;
            if (qp.volume - v.volume).abs() > 1e-9 * v.volume {
                return Err(Error::Consistency(format!(
                    "{name}: Ehrhart leading {} vs analytic {}",
                    qp.volume, v.volume
                )));
            }
        }
        Ok("p1, p2".into())
    })());

    record("tail_sandwich_spot", (|| {
        let m = presets::preset("p2")?;
        let volp = 1.0 / 192.0;
        let qp = polytope::ehrhart_fit(&m, 8)?;
        for j in [20u32, 30] {
            let count =
                index_sets::count_superlevel(&m, j as f64, index_sets::DEFAULT_MEMBER_CEILING)?;
            let t = tails::exact_tail(&m, count, tails::DEFAULT_TOL)?;
            let up = estimates::upper_asymptotic(count, 4, volp, 0.3, false)?;
            let low = estimates::lower_asymptotic(count, 4, volp, qp.q)?;
            if !(low <= t.tail && t.tail <= up) {
                return Err(Error::Consistency(format!(
                    "sandwich failed at J = {j}: {low} <= {} <= {up}",
                    t.tail
                )));
            }
        }
        Ok("J in {20, 30}".into())
    })());

    record("sum_jn_sandwich", (|| {
        for n in [1u32, 4, 8] {
            let j0 = estimates::sum_jn_threshold(n, 2.0).ceil() as u32;
            for j in j0..j0 + 4 {
                let exact = estimates::sum_jn_exact(j, n)?;
                let upper = estimates::sum_jn_bound(j, n, 2.0)?;
                let jf = j as f64;
                let lower =
                    ((n as f64) * jf.ln() - jf).exp() * std::f64::consts::E / (std::f64::consts::E - 1.0);
                if !(lower <= exact && exact <= upper) {
                    return Err(Error::Consistency(format!(
                        "N = {n}, J = {j}: {lower} <= {exact} <= {upper} failed"
                    )));
                }
            }
        }
        Ok("N in {1, 4, 8}".into())
    })());

    record("polylog_closed_forms", (|| {
        let e = std::f64::consts::E;
        let cases = [
            (1u32, 1.0 / e, e / (e - 1.0).powi(2)),
            (2, 0.5, 6.0),
        ];
        for (n, z, expected) in cases {
            let v = estimates::polylog_neg(n, z)?;
            if (v - expected).abs() > 1e-13 * expected {
                return Err(Error::Consistency(format!(
                    "Li_-{n}({z}) = {v}, expected {expected}"
                )));
            }
        }
        Ok("N in {1, 2}".into())
    })());

    let all_passed = outcomes.iter().all(|o| o.passed);
    let report: Vec<serde_json::Value> = outcomes
        .iter()
        .map(|o| {
            serde_json::json!({
                "check": o.name,
                "status": if o.passed { "pass" } else { "fail" },
                "detail": o.detail,
            })
        })
        .collect();
    let mut sink = Sink::new(common);
    writeln!(sink, "{}", serde_json::to_string_pretty(&report)?)?;
    sink.finish(&serde_json::json!({"command": "check"}))?;
    if all_passed {
        Ok(())
    } else {
        Err(Error::Consistency("verification suite reported failures".into()))
    }
}
