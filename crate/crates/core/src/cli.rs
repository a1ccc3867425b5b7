//! The `lecam` command-line interface.
//!
//! Weights are always given as integer counts `N p_i` (`--Np 5,5`). Scan
//! commands reuse the counts as relative weights and rescale them to each
//! population size, which must then be a multiple of their sum.
//!
//! Exit codes: 0 success, 2 usage, 3 validation, 4 resource cap.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::distances::{
    hellinger_discrete, tail_probability_check, bound_parts, tv_discrete, tv_gaussian_pair_mc, tv_jittered_pair,
    tv_jittered_vs_gaussian, tv_monte_carlo, tv_monte_carlo_discrete, TvMethod, TvMethodTag, TvResult,
    DEFAULT_QUAD_ORDER,
};
use crate::expansion::{expand, residual_scan, ExpansionOrder, DEFAULT_GAMMA};
use crate::fit::{fit_log_log, FitOutcome, MIN_FIT_POINTS};
use crate::gaussian::{build_gaussian, independent_gaussian};
use crate::kernels::{data_processing_check, deficiency_upper_bounds, tv_correlated_vs_independent, tv_vst_mc};
use crate::lattice::{validate_params, ExperimentParams, LatticePoint};
use crate::pmf::DiscreteLaw;
use crate::report::{format_float, to_json, write_csv, ScanRecord};
use crate::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_CAP: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{0}")]
    Core(#[from] Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(e) if e.is_resource_cap() => EXIT_CAP,
            CliError::Core(_) => EXIT_VALIDATION,
            CliError::Io(_) => EXIT_VALIDATION,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "lecam", version, about = "Distances between hypergeometric, multinomial and normal experiments")]
pub struct Cli {
    /// Worker threads for parallel evaluation (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Log-probability and probability of one lattice point.
    Pmf(PmfArgs),
    /// Exact log-ratio ln(P/Q) and its first- and second-order expansions.
    Ratio(PointArgs),
    /// Expansion residuals along a family of growing populations.
    ExpansionScan(ExpansionScanArgs),
    /// Total-variation distance between two laws.
    Tv(TvArgs),
    /// Explicit ingredients of the jittered-hypergeometric TV bound.
    BoundParts(ParamArgs),
    /// Exact hypergeometric tail probabilities against their tail terms.
    TailCheck(TailArgs),
    /// Deficiency upper bounds along a sequence of sample sizes.
    LecamScan(LecamScanArgs),
    /// TV before and after rounding the Gaussian (data processing).
    DpiCheck(DpiArgs),
}

#[derive(Debug, Args)]
pub struct ParamArgs {
    /// Population size N.
    #[arg(long = "N")]
    pub population: u64,
    /// Sample size n.
    #[arg(long = "n")]
    pub sample: u64,
    /// Category counts N*p_i, all d+1 of them (or the first d).
    #[arg(long = "Np", value_delimiter = ',', required = true)]
    pub counts: Vec<u64>,
    /// Print JSON instead of text.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DistArg {
    Hyper,
    Multi,
}

impl From<DistArg> for DiscreteLaw {
    fn from(d: DistArg) -> Self {
        match d {
            DistArg::Hyper => DiscreteLaw::Hypergeometric,
            DistArg::Multi => DiscreteLaw::Multinomial,
        }
    }
}

#[derive(Debug, Args)]
pub struct PmfArgs {
    #[arg(long, value_enum)]
    pub dist: DistArg,
    /// Population size N (defaults to the sum of --Np).
    #[arg(long = "N")]
    pub population: Option<u64>,
    #[arg(long = "n")]
    pub sample: u64,
    #[arg(long = "Np", value_delimiter = ',', required = true)]
    pub counts: Vec<u64>,
    /// The first d coordinates of k.
    #[arg(long, value_delimiter = ',', required = true)]
    pub k: Vec<u64>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct PointArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, value_delimiter = ',', required = true)]
    pub k: Vec<u64>,
}

#[derive(Debug, Args)]
pub struct ExpansionScanArgs {
    /// Population sizes, each a multiple of the sum of --Np.
    #[arg(long = "N", value_delimiter = ',', required = true)]
    pub populations: Vec<u64>,
    #[arg(long = "n")]
    pub sample: u64,
    /// Relative integer weights.
    #[arg(long = "Np", value_delimiter = ',', required = true)]
    pub counts: Vec<u64>,
    /// Fixed first d coordinates of k.
    #[arg(long, value_delimiter = ',', required = true)]
    pub k: Vec<u64>,
    /// Expansion order, 1 or 2.
    #[arg(long, default_value_t = 1)]
    pub order: u32,
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    pub gamma: f64,
    /// CSV output path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Exact,
    Quad,
    Mc,
}

#[derive(Debug, Args)]
pub struct TvArgs {
    /// Pair `a-b` with a, b in {hyper, multi, jitterhyper, jittermulti,
    /// gauss, indepgauss}.
    #[arg(long)]
    pub pair: String,
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    #[arg(long = "quad-order", default_value_t = DEFAULT_QUAD_ORDER)]
    pub quad_order: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TailArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// 1-based category index; all categories when omitted.
    #[arg(long)]
    pub i: Option<usize>,
}

#[derive(Debug, Args)]
pub struct LecamScanArgs {
    /// Sample sizes.
    #[arg(long = "n", value_delimiter = ',', required = true)]
    pub samples_n: Vec<u64>,
    /// Population rule, e.g. `n^3`, `2*n^3` or `n^3/d^2`; rounded up to a
    /// multiple of the weight sum.
    #[arg(long = "N-rule", default_value = "n^3")]
    pub rule: String,
    /// Relative integer weights.
    #[arg(long = "Np", value_delimiter = ',', required = true)]
    pub counts: Vec<u64>,
    #[arg(long, value_enum, default_value_t = MethodArg::Quad)]
    pub method: MethodArg,
    #[arg(long = "quad-order", default_value_t = DEFAULT_QUAD_ORDER)]
    pub quad_order: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also measure the correlated-vs-independent Gaussian gap and the
    /// square-root map gap by Monte Carlo.
    #[arg(long)]
    pub gaussian_gaps: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct DpiArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long = "quad-order", default_value_t = DEFAULT_QUAD_ORDER)]
    pub quad_order: usize,
}

/// Formats `v` with 15 significant digits.
pub fn sig15(v: f64) -> String {
    if !v.is_finite() {
        return format_float(v);
    }
    if v == 0.0 {
        return "0".into();
    }
    let mag = v.abs().log10().floor() as i32;
    if (-5..15).contains(&mag) {
        format!("{:.*}", (14 - mag).max(0) as usize, v)
    } else {
        format!("{v:.14e}")
    }
}

fn params_of(a: &ParamArgs) -> CliResult<ExperimentParams> {
    let d = a.counts.len().saturating_sub(1);
    Ok(validate_params(a.population, a.sample, d, &a.counts)?)
}

fn point_of(params: &ExperimentParams, k: &[u64]) -> CliResult<LatticePoint> {
    if k.len() != params.dim() {
        return Err(Error::InvalidArgument(format!("--k needs {} coordinates, got {}", params.dim(), k.len())).into());
    }
    Ok(params.point(k)?)
}

fn family_member(weights: &[u64], population: u64, sample: u64) -> CliResult<ExperimentParams> {
    Ok(ExperimentParams::rescaled(weights, population, sample)?)
}

fn write_records(records: &[ScanRecord], path: Option<&PathBuf>) -> CliResult<()> {
    if let Some(path) = path {
        write_csv(records, BufWriter::new(File::create(path)?))?;
    }
    Ok(())
}

fn print_fit<W: Write>(out: &mut W, label: &str, fit: &CliResult<FitOutcome>) -> CliResult<()> {
    match fit {
        Ok(FitOutcome::Fitted(f)) => writeln!(
            out,
            "{label}: slope {} (intercept {}, r^2 {}, {} points)",
            sig15(f.slope),
            sig15(f.intercept),
            sig15(f.r_squared),
            f.points_used
        )?,
        Ok(FitOutcome::Degenerate) => writeln!(out, "{label}: degenerate: residuals identically 0")?,
        Err(e) => writeln!(out, "{label}: not fitted ({e})")?,
    }
    Ok(())
}

fn fit_json(fit: &CliResult<FitOutcome>) -> serde_json::Value {
    match fit {
        Ok(FitOutcome::Fitted(f)) => serde_json::to_value(f).unwrap(),
        Ok(FitOutcome::Degenerate) => json!("degenerate"),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

fn cmd_pmf<W: Write>(a: &PmfArgs, out: &mut W) -> CliResult<()> {
    let population = a.population.unwrap_or_else(|| a.counts.iter().sum());
    let d = a.counts.len().saturating_sub(1);
    let params = validate_params(population, a.sample, d, &a.counts)?;
    if a.k.len() != params.dim() {
        return Err(Error::InvalidArgument(format!("--k needs {} coordinates, got {}", params.dim(), a.k.len())).into());
    }
    let law = DiscreteLaw::from(a.dist);
    let log_prob = match LatticePoint::new(a.k.clone(), a.sample) {
        Ok(k) => law.log_pmf(&params, &k).ln(),
        Err(_) => f64::NEG_INFINITY,
    };
    let prob = log_prob.exp();
    if a.json {
        writeln!(
            out,
            "{}",
            json!({ "dist": law.name(), "log_prob": format_float(log_prob), "prob": prob })
        )?;
    } else {
        writeln!(out, "log_prob {}", sig15(log_prob))?;
        writeln!(out, "prob {}", sig15(prob))?;
    }
    Ok(())
}

fn cmd_ratio<W: Write>(a: &PointArgs, out: &mut W) -> CliResult<()> {
    let params = params_of(&a.params)?;
    let k = point_of(&params, &a.k)?;
    let e = expand(&params, &k)?;
    if a.params.json {
        writeln!(out, "{}", serde_json::to_string(&e).unwrap())?;
    } else {
        for (name, v) in [
            ("exact", e.exact),
            ("order1", e.order1),
            ("order2", e.order2),
            ("residual1", e.residual1),
            ("residual2", e.residual2),
        ] {
            writeln!(out, "{name} {}", sig15(v))?;
        }
    }
    Ok(())
}

fn cmd_expansion_scan<W: Write>(a: &ExpansionScanArgs, out: &mut W) -> CliResult<()> {
    if a.populations.len() < MIN_FIT_POINTS {
        return Err(CliError::Usage(format!(
            "expansion-scan needs at least {MIN_FIT_POINTS} population sizes, got {}",
            a.populations.len()
        )));
    }
    let order = ExpansionOrder::from_int(a.order)?;
    let family = a
        .populations
        .iter()
        .map(|&pop| family_member(&a.counts, pop, a.sample))
        .collect::<CliResult<Vec<_>>>()?;
    let scan = residual_scan(&family, |p| p.point(&a.k), order, a.gamma)?;
    write_records(&scan.records, a.out.as_ref())?;
    let fit: CliResult<FitOutcome> = Ok(scan.fit);
    if a.json {
        writeln!(
            out,
            "{}",
            json!({ "records": serde_json::from_str::<serde_json::Value>(&to_json(&scan.records)).unwrap(), "fit": fit_json(&fit) })
        )?;
    } else {
        for r in &scan.records {
            writeln!(out, "N {} |residual{}| {}", r.population, order.as_int(), sig15(r.value))?;
        }
        print_fit(out, "fit ln|residual| vs ln N", &fit)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Discrete(DiscreteLaw),
    Jittered(DiscreteLaw),
    Gauss,
    IndepGauss,
}

fn parse_side(s: &str) -> CliResult<Side> {
    Ok(match s {
        "hyper" => Side::Discrete(DiscreteLaw::Hypergeometric),
        "multi" => Side::Discrete(DiscreteLaw::Multinomial),
        "jitterhyper" => Side::Jittered(DiscreteLaw::Hypergeometric),
        "jittermulti" => Side::Jittered(DiscreteLaw::Multinomial),
        "gauss" => Side::Gauss,
        "indepgauss" => Side::IndepGauss,
        other => return Err(CliError::Usage(format!("unknown law {other:?} in --pair"))),
    })
}

fn tv_for_pair(params: &ExperimentParams, a: &TvArgs) -> CliResult<TvResult> {
    let (left, right) = a
        .pair
        .split_once('-')
        .ok_or_else(|| CliError::Usage("--pair must look like a-b".into()))?;
    let (left, right) = (parse_side(left)?, parse_side(right)?);
    let mc = TvMethod::MonteCarlo {
        samples: a.samples,
        seed: a.seed,
    };
    let zero = |method| TvResult {
        value: 0.0,
        method,
        error_estimate: 0.0,
    };
    use Side::*;
    let result = match (left, right, a.method) {
        (l, r, _) if l == r => zero(TvMethodTag::ExactDiscrete),
        (Discrete(x), Discrete(y), None | Some(MethodArg::Exact)) => tv_discrete(params, x, y)?,
        (Jittered(x), Jittered(y), None | Some(MethodArg::Exact)) => tv_discrete(params, x, y)?,
        (Jittered(x), Jittered(y), Some(MethodArg::Quad)) => tv_jittered_pair(params, x, y, a.quad_order)?,
        (Jittered(x), Jittered(y), Some(MethodArg::Mc)) => match mc {
            TvMethod::MonteCarlo { samples, seed } => tv_monte_carlo_discrete(params, x, y, samples, seed)?,
            _ => unreachable!(),
        },
        (Jittered(x), Gauss, m) | (Gauss, Jittered(x), m) => {
            let g = build_gaussian(params)?;
            match m {
                None | Some(MethodArg::Quad) => tv_jittered_vs_gaussian(params, x, &g, a.quad_order)?,
                Some(MethodArg::Mc) => tv_monte_carlo(params, x, &g, a.samples, a.seed)?,
                Some(MethodArg::Exact) => {
                    return Err(CliError::Usage("no exact method for a jittered law against a Gaussian".into()))
                }
            }
        }
        (Gauss, IndepGauss, None | Some(MethodArg::Mc)) => {
            tv_gaussian_pair_mc(&build_gaussian(params)?, &independent_gaussian(params)?, a.samples, a.seed)?
        }
        (IndepGauss, Gauss, None | Some(MethodArg::Mc)) => {
            tv_gaussian_pair_mc(&independent_gaussian(params)?, &build_gaussian(params)?, a.samples, a.seed)?
        }
        (l, r, m) => {
            return Err(CliError::Usage(format!(
                "unsupported pair/method combination: {l:?} vs {r:?} with {m:?}"
            )))
        }
    };
    Ok(result)
}

fn cmd_tv<W: Write>(a: &TvArgs, out: &mut W) -> CliResult<()> {
    let params = params_of(&a.params)?;
    let tv = tv_for_pair(&params, a)?;
    if a.params.json {
        writeln!(out, "{}", serde_json::to_string(&tv).unwrap())?;
    } else {
        writeln!(out, "value {}", sig15(tv.value))?;
        writeln!(out, "method {}", tv.method.as_str())?;
        writeln!(out, "error_estimate {}", sig15(tv.error_estimate))?;
    }
    Ok(())
}

fn cmd_bound_parts<W: Write>(a: &ParamArgs, out: &mut W) -> CliResult<()> {
    let params = params_of(a)?;
    let parts = bound_parts(&params)?;
    let hellinger = hellinger_discrete(&params);
    if a.json {
        let mut v = serde_json::to_value(&parts).unwrap();
        if let Ok(h) = &hellinger {
            v["hellinger"] = serde_json::to_value(h).unwrap();
        }
        writeln!(out, "{v}")?;
    } else {
        writeln!(out, "nu {:?}", parts.nu)?;
        writeln!(
            out,
            "tail_terms [{}]",
            parts.tail_terms.iter().map(|&t| sig15(t)).collect::<Vec<_>>().join(", ")
        )?;
        writeln!(out, "tail_sum {}", sig15(parts.tail_sum))?;
        writeln!(out, "n2_over_N {}", sig15(parts.n2_over_n_pop))?;
        writeln!(out, "gaussian_term_scale {}", sig15(parts.gaussian_term_scale))?;
        match hellinger {
            Ok(h) => {
                writeln!(out, "hellinger_sq {}", sig15(h.h2))?;
                writeln!(out, "hellinger_tv_bound {}", sig15(h.tv_bound))?;
            }
            Err(e) => writeln!(out, "hellinger: {e}")?,
        }
    }
    Ok(())
}

fn cmd_tail_check<W: Write>(a: &TailArgs, out: &mut W) -> CliResult<()> {
    let params = params_of(&a.params)?;
    let coords: Vec<usize> = match a.i {
        Some(0) => return Err(CliError::Usage("--i is 1-based".into())),
        Some(i) => vec![i - 1],
        None => (0..=params.dim()).collect(),
    };
    let mut rows = Vec::new();
    for i in coords {
        let t = tail_probability_check(&params, i)?;
        if a.params.json {
            let mut v = serde_json::to_value(t).unwrap();
            v["i"] = json!(i + 1);
            v["holds"] = json!(t.empirical <= t.bound);
            rows.push(v);
        } else {
            writeln!(
                out,
                "i {} nu {} threshold {} empirical {} bound {} holds {}",
                i + 1,
                t.nu,
                sig15(t.threshold),
                sig15(t.empirical),
                sig15(t.bound),
                t.empirical <= t.bound
            )?;
        }
    }
    if a.params.json {
        writeln!(out, "{}", serde_json::Value::Array(rows))?;
    }
    Ok(())
}

/// `[C*]n^E[/d^F]`, with `n^1` / `d^1` written as `n` / `d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopulationRule {
    pub coefficient: f64,
    pub n_power: u32,
    pub d_power: u32,
}

impl PopulationRule {
    pub fn parse(s: &str) -> CliResult<Self> {
        let bad = || CliError::Usage(format!("cannot parse population rule {s:?}"));
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let (num, den) = match compact.split_once('/') {
            Some((a, b)) => (a.to_string(), Some(b.to_string())),
            None => (compact, None),
        };
        let power = |term: &str, var: char| -> Option<u32> {
            let rest = term.strip_prefix(var)?;
            if rest.is_empty() {
                Some(1)
            } else {
                rest.strip_prefix('^')?.parse().ok()
            }
        };
        let (coefficient, n_term) = match num.split_once('*') {
            Some((c, t)) => (c.parse::<f64>().map_err(|_| bad())?, t.to_string()),
            None => (1.0, num),
        };
        let n_power = power(&n_term, 'n').ok_or_else(bad)?;
        let d_power = match den {
            Some(t) => power(&t, 'd').ok_or_else(bad)?,
            None => 0,
        };
        if !(coefficient > 0.0) {
            return Err(bad());
        }
        Ok(Self {
            coefficient,
            n_power,
            d_power,
        })
    }

    /// Smallest multiple of `step` that is at least the rule's value.
    pub fn population(&self, n: u64, d: usize, step: u64) -> u64 {
        let raw = self.coefficient * (n as f64).powi(self.n_power as i32) / (d as f64).powi(self.d_power as i32);
        let at_least = raw.ceil().max(1.0) as u64;
        at_least.div_ceil(step) * step
    }
}

fn cmd_lecam_scan<W: Write>(a: &LecamScanArgs, out: &mut W) -> CliResult<()> {
    if a.samples_n.is_empty() {
        return Err(CliError::Usage("empty --n list".into()));
    }
    let rule = PopulationRule::parse(&a.rule)?;
    let step: u64 = a.counts.iter().sum();
    let d = a.counts.len().saturating_sub(1);
    let method = match a.method {
        MethodArg::Quad => TvMethod::Quadrature { order: a.quad_order },
        MethodArg::Mc => TvMethod::MonteCarlo {
            samples: a.samples,
            seed: a.seed,
        },
        MethodArg::Exact => return Err(CliError::Usage("lecam-scan supports --method quad or mc".into())),
    };
    let mut records = Vec::new();
    let mut fit_n = Vec::new();
    let mut fit_le_cam = Vec::new();
    let mut fit_multi = Vec::new();
    for &n in &a.samples_n {
        let population = rule.population(n, d, step);
        let params = family_member(&a.counts, population, n.min(population))?;
        let report = if n > population {
            Err(Error::SampleExceedsPopulation { population, sample: n })
        } else {
            deficiency_upper_bounds(&params, method)
        };
        match report {
            Ok(r) => {
                let m = r.delta_p_to_q.method.as_str();
                for (name, tv) in [
                    ("delta_p_to_q", r.delta_p_to_q),
                    ("delta_q_to_p", r.delta_q_to_p),
                    ("tv_hyper_multi", r.jitter_gap),
                    ("tv_multi_gauss", r.multinomial_gap),
                ] {
                    records.push(ScanRecord::new(&params, name, tv.value, tv.error_estimate, tv.method.as_str()));
                }
                let err = r.delta_p_to_q.error_estimate;
                records.push(ScanRecord::new(&params, "le_cam_upper", r.le_cam_upper, err, m));
                records.push(ScanRecord::new(&params, "budget", r.budget, 0.0, "exact"));
                records.push(ScanRecord::new(&params, "constant_proxy", r.constant_proxy(&params), 0.0, m));
                if a.gaussian_gaps {
                    let seed = a.seed.wrapping_add(n);
                    let corr = tv_correlated_vs_independent(&params, a.samples, seed)?;
                    records.push(ScanRecord::new(&params, "tv_q_qbar", corr.value, corr.error_estimate, "monte-carlo"));
                    let vst = tv_vst_mc(&params, a.samples, seed ^ 0x5eed)?;
                    records.push(ScanRecord::new(&params, "tv_vst", vst.value, vst.error_estimate, "monte-carlo"));
                }
                fit_n.push(n as f64);
                fit_le_cam.push(r.le_cam_upper);
                fit_multi.push(r.multinomial_gap.value);
            }
            Err(Error::Regime { .. } | Error::SampleExceedsPopulation { .. }) => {
                records.push(ScanRecord::new(&params, "regime_violation", f64::NAN, f64::NAN, "flagged"));
            }
            Err(e) => return Err(e.into()),
        }
    }
    write_records(&records, a.out.as_ref())?;
    let fit_le: CliResult<FitOutcome> = fit_log_log(&fit_n, &fit_le_cam, 0.0).map_err(Into::into);
    let fit_mg: CliResult<FitOutcome> = fit_log_log(&fit_n, &fit_multi, 0.0).map_err(Into::into);
    if a.json {
        writeln!(
            out,
            "{}",
            json!({
                "records": serde_json::from_str::<serde_json::Value>(&to_json(&records)).unwrap(),
                "fit_le_cam_upper": fit_json(&fit_le),
                "fit_tv_multi_gauss": fit_json(&fit_mg),
            })
        )?;
    } else {
        for r in &records {
            writeln!(
                out,
                "N {} n {} {} {} (error {}, {})",
                r.population,
                r.sample,
                r.quantity,
                sig15(r.value),
                sig15(r.error),
                r.method
            )?;
        }
        print_fit(out, "fit ln le_cam_upper vs ln n", &fit_le)?;
        print_fit(out, "fit ln TV(jittered multinomial, Gaussian) vs ln n", &fit_mg)?;
    }
    Ok(())
}

fn cmd_dpi_check<W: Write>(a: &DpiArgs, out: &mut W) -> CliResult<()> {
    let params = params_of(&a.params)?;
    let c = data_processing_check(&params, a.quad_order)?;
    if a.params.json {
        let mut v = serde_json::to_value(c).unwrap();
        v["slack"] = json!(c.slack());
        writeln!(out, "{v}")?;
    } else {
        writeln!(out, "tv_before {}", sig15(c.tv_before))?;
        writeln!(out, "tv_after {}", sig15(c.tv_after))?;
        writeln!(out, "slack {}", sig15(c.slack()))?;
        writeln!(out, "error {}", sig15(c.error))?;
    }
    Ok(())
}

fn dispatch<W: Write>(cli: &Cli, out: &mut W) -> CliResult<()> {
    match &cli.command {
        Command::Pmf(a) => cmd_pmf(a, out),
        Command::Ratio(a) => cmd_ratio(a, out),
        Command::ExpansionScan(a) => cmd_expansion_scan(a, out),
        Command::Tv(a) => cmd_tv(a, out),
        Command::BoundParts(a) => cmd_bound_parts(a, out),
        Command::TailCheck(a) => cmd_tail_check(a, out),
        Command::LecamScan(a) => cmd_lecam_scan(a, out),
        Command::DpiCheck(a) => cmd_dpi_check(a, out),
    }
}

/// Runs a parsed command, writing its report to `out`.
pub fn run<W: Write + Send>(cli: &Cli, out: &mut W) -> CliResult<()> {
    match cli.jobs {
        Some(0) => Err(CliError::Usage("--jobs must be positive".into())),
        Some(jobs) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build()
                .map_err(|e| CliError::Usage(e.to_string()))?;
            pool.install(|| dispatch(cli, out))
        }
        None => dispatch(cli, out),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let mut buf = Vec::new();
    let result = run(&cli, &mut buf);
    let mut stdout = std::io::stdout().lock();
    let _ = stdout.write_all(&buf).and_then(|_| stdout.flush());
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
