//! Command-line surface: TOML run configuration, subcommand orchestration,
//! and CSV/JSON export of draws, summaries, diagnostics, and grids.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::data::{self, DesignInfo};
use crate::error::{Error, Result};
use crate::evidence::{
    bayes_factor, build_lognc_grid, marginal_likelihood, rmap_posterior, LogNcGrid,
};
use crate::formula::parse_formula;
use crate::glm::{Dataset, Family, Link, Role};
use crate::model::ModelSpec;
use crate::priors::{
    build_target, BhmHyper, BuiltTarget, CpHyper, InitialPriorHyper, PriorSpec,
};
use crate::sampler::{diagnostics, sample, summarize, Diagnostics, Draws, SamplerConfig, DEFAULT_PROBS};
use crate::survival::{choose_breaks, expand_poisson, Breaks};

#[derive(Parser)]
#[command(name = "hdprior", version, about = "Bayesian GLMs with historical-data borrowing priors")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample the posterior for the configured prior and write draws/summary.
    Fit(CommonArgs),
    /// Estimate the normalized power prior log normalizing constant grid.
    Lognc(CommonArgs),
    /// Robust meta-analytic fit: hierarchical/vague mixture with updated weight.
    Rmap(CommonArgs),
    /// Log marginal likelihood of the configured prior via bridge sampling.
    Evidence(CommonArgs),
    /// Log Bayes factor between two link functions over an a0 grid.
    Bf(CommonArgs),
    /// Expand survival data into a piecewise-exponential Poisson data set.
    Survexpand(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override the configured random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Cap worker threads (sampler chains, grid points).
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory (default: current directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn main() -> std::process::ExitCode {
    let cli = Cli::parse();
    let (name, args) = match &cli.command {
        Cmd::Fit(a) => ("fit", a),
        Cmd::Lognc(a) => ("lognc", a),
        Cmd::Rmap(a) => ("rmap", a),
        Cmd::Evidence(a) => ("evidence", a),
        Cmd::Bf(a) => ("bf", a),
        Cmd::Survexpand(a) => ("survexpand", a),
    };
    match run(name, args) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hdprior {name}: {e}");
            std::process::ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Spec(_) | Error::Formula { .. } => 2,
        Error::Data(_) | Error::Shape(_) | Error::Domain(_) | Error::Io(_) => 3,
        Error::Init(_) | Error::NonConvergence(_) | Error::Singular(_) => 4,
        Error::Evidence(_) => 5,
    }
}

// ---- configuration ----

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    model: ModelConfig,
    data: DataConfig,
    #[serde(default)]
    prior: Option<PriorConfig>,
    #[serde(default)]
    sampler: SamplerSection,
    #[serde(default)]
    lognc: LogncSection,
    #[serde(default)]
    bf: Option<BfSection>,
    #[serde(default)]
    survexpand: Option<SurvSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelConfig {
    formula: String,
    family: String,
    link: String,
    #[serde(default)]
    standardize: bool,
    #[serde(default)]
    offset_column: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DataConfig {
    current: PathBuf,
    #[serde(default)]
    historical: Vec<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum A0Setting {
    Rule(String),
    Values(Vec<f64>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PriorConfig {
    #[serde(rename = "type")]
    kind: String,
    #[serde(default)]
    a0: Option<A0Setting>,
    #[serde(default = "one")]
    a0_shape1: f64,
    #[serde(default = "one")]
    a0_shape2: f64,
    /// NPP: lognc grid CSVs written by the `lognc` subcommand, one per
    /// historical data set, in order.
    #[serde(default)]
    lognc_grid: Vec<PathBuf>,
    #[serde(default)]
    k: Option<usize>,
    #[serde(default)]
    prob_conc: Option<Vec<f64>>,
    #[serde(default)]
    w: Option<f64>,
    #[serde(default)]
    coef_mean: f64,
    #[serde(default = "ten")]
    coef_sd: f64,
    #[serde(default = "ten")]
    disp_scale: f64,
    #[serde(default)]
    bhm: Option<BhmHyper>,
    #[serde(default)]
    cp: Option<CpHyper>,
}

fn one() -> f64 {
    1.0
}
fn ten() -> f64 {
    10.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct SamplerSection {
    chains: usize,
    iter_warmup: usize,
    iter_sampling: usize,
    seed: u64,
    target_accept: f64,
    max_tree_depth: usize,
}

impl Default for SamplerSection {
    fn default() -> Self {
        let c = SamplerConfig::default();
        SamplerSection {
            chains: c.chains,
            iter_warmup: c.iter_warmup,
            iter_sampling: c.iter_sampling,
            seed: c.seed,
            target_accept: c.target_accept,
            max_tree_depth: c.max_tree_depth,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct LogncSection {
    grid_points: usize,
    loess_span: f64,
}

impl Default for LogncSection {
    fn default() -> Self {
        LogncSection { grid_points: 21, loess_span: 0.75 }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BfSection {
    link2: String,
    #[serde(default)]
    a0_grid: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SurvSection {
    time_column: String,
    event_column: String,
    #[serde(default)]
    covariates: Vec<String>,
    #[serde(default)]
    cuts: Option<Vec<f64>>,
    #[serde(default)]
    intervals: Option<usize>,
    #[serde(default = "default_expanded_name")]
    output: String,
}

fn default_expanded_name() -> String {
    "expanded.csv".to_string()
}

fn parse_family(name: &str) -> Result<Family> {
    Ok(match name {
        "gaussian" => Family::Gaussian,
        "binomial" => Family::Binomial,
        "poisson" => Family::Poisson,
        "gamma" => Family::Gamma,
        "inverse_gaussian" => Family::InverseGaussian,
        _ => return Err(Error::Config(format!("unknown family {name:?}"))),
    })
}

fn parse_link(name: &str) -> Result<Link> {
    Ok(match name {
        "identity" => Link::Identity,
        "log" => Link::Log,
        "logit" => Link::Logit,
        "probit" => Link::Probit,
        "cloglog" => Link::Cloglog,
        "cauchit" => Link::Cauchit,
        "inverse" => Link::Inverse,
        "inverse_squared" => Link::InverseSquared,
        "sqrt" => Link::Sqrt,
        _ => return Err(Error::Config(format!("unknown link {name:?}"))),
    })
}

/// Default discounting rule: half the current/historical sample-size ratio.
pub fn a0_half_ratio(n_current: usize, n_historical: usize) -> f64 {
    0.5 * n_current as f64 / n_historical as f64
}

fn initial_hyper(prior: &PriorConfig, p: usize) -> InitialPriorHyper {
    InitialPriorHyper {
        mu0: vec![prior.coef_mean; p],
        sigma0: vec![prior.coef_sd; p],
        alpha0: 0.0,
        gamma0: prior.disp_scale,
    }
}

fn resolve_a0(prior: &PriorConfig, datasets: &[Dataset]) -> Result<Vec<f64>> {
    let n_cur = datasets[0].n();
    let hist = &datasets[1..];
    match &prior.a0 {
        None => Err(Error::Config("prior type \"pp\" requires an `a0` setting".into())),
        Some(A0Setting::Rule(r)) if r == "auto-half-ratio" => {
            Ok(hist.iter().map(|d| a0_half_ratio(n_cur, d.n())).collect())
        }
        Some(A0Setting::Rule(r)) => Err(Error::Config(format!("unknown a0 rule {r:?}"))),
        Some(A0Setting::Values(v)) => {
            if v.len() != hist.len() {
                return Err(Error::Config(format!(
                    "a0 has {} entries for {} historical data sets",
                    v.len(),
                    hist.len()
                )));
            }
            Ok(v.clone())
        }
    }
}

fn build_prior_spec(cfg: &RunConfig, datasets: &[Dataset], p: usize) -> Result<PriorSpec> {
    let prior = cfg
        .prior
        .as_ref()
        .ok_or_else(|| Error::Config("missing [prior] section".into()))?;
    let hyper = initial_hyper(prior, p);
    Ok(match prior.kind.as_str() {
        "initial" => PriorSpec::Initial { hyper },
        "pp" => PriorSpec::Pp { a0: resolve_a0(prior, datasets)?, hyper },
        "npp" => {
            if prior.lognc_grid.len() != datasets.len() - 1 {
                return Err(Error::Config(format!(
                    "npp needs one lognc_grid CSV per historical data set ({} given, {} needed)",
                    prior.lognc_grid.len(),
                    datasets.len() - 1
                )));
            }
            let lognc = prior
                .lognc_grid
                .iter()
                .map(|path| {
                    let f = std::fs::File::open(path)
                        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                    LogNcGrid::read_csv(f)?.interpolant()
                })
                .collect::<Result<Vec<_>>>()?;
            PriorSpec::Npp {
                a0_shape1: prior.a0_shape1,
                a0_shape2: prior.a0_shape2,
                lognc,
                hyper,
            }
        }
        "napp" => PriorSpec::Napp { a0_shape1: prior.a0_shape1, a0_shape2: prior.a0_shape2 },
        "bhm" => PriorSpec::Bhm { hyper: prior.bhm.clone().unwrap_or_default() },
        "cp" => PriorSpec::Cp { hyper: prior.cp.clone().unwrap_or_default() },
        "leap" => {
            let k = prior.k.ok_or_else(|| Error::Config("leap requires `k`".into()))?;
            let prob_conc = prior.prob_conc.clone().unwrap_or_else(|| vec![1.0; k]);
            PriorSpec::Leap { k, prob_conc, hyper }
        }
        "rmap" => {
            let w = prior.w.ok_or_else(|| Error::Config("rmap requires `w`".into()))?;
            PriorSpec::Rmap { w, bhm: prior.bhm.clone().unwrap_or_default(), vague: hyper }
        }
        other => return Err(Error::Config(format!("unknown prior type {other:?}"))),
    })
}

// ---- run orchestration ----

struct Loaded {
    config: RunConfig,
    resolved: toml::Value,
    model: ModelSpec,
    datasets: Vec<Dataset>,
    #[allow(dead_code)]
    info: DesignInfo,
    sampler: SamplerConfig,
}

fn load(args: &CommonArgs, needs_data: bool) -> Result<Loaded> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| Error::Config(format!("{}: {e}", args.config.display())))?;
    let config: RunConfig =
        toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
    let mut resolved: toml::Value =
        toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;

    let mut sampler = SamplerConfig {
        chains: config.sampler.chains,
        iter_warmup: config.sampler.iter_warmup,
        iter_sampling: config.sampler.iter_sampling,
        seed: config.sampler.seed,
        target_accept: config.sampler.target_accept,
        max_tree_depth: config.sampler.max_tree_depth,
        ..SamplerConfig::default()
    };
    if let Some(seed) = args.seed {
        sampler.seed = seed;
    }
    if let Some(t) = resolved.as_table_mut() {
        t.insert("resolved_seed".into(), toml::Value::Integer(sampler.seed as i64));
    }
    sampler.validate()?;

    let family = parse_family(&config.model.family)?;
    let link = parse_link(&config.model.link)?;
    let formula = parse_formula(&config.model.formula)?;
    let (datasets, info, model);
    if needs_data {
        let mut paths = vec![config.data.current.clone()];
        paths.extend(config.data.historical.iter().cloned());
        let (mut ds, design) =
            data::load_datasets(&paths, &formula, config.model.offset_column.as_deref())?;
        if config.model.standardize {
            data::standardize(&mut ds, &design)?;
        }
        model = ModelSpec::new(family, link, design.coef_names.clone());
        datasets = ds;
        info = design;
    } else {
        model = ModelSpec::new(family, link, Vec::new());
        datasets = Vec::new();
        info = DesignInfo { coef_names: Vec::new(), continuous: Vec::new() };
    }
    Ok(Loaded { config, resolved, model, datasets, info, sampler })
}

/// Tracks files created by one run so a failure leaves no partial outputs.
struct Outputs {
    dir: PathBuf,
    created: Vec<PathBuf>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Outputs> {
        std::fs::create_dir_all(dir)?;
        Ok(Outputs { dir: dir.to_path_buf(), created: Vec::new() })
    }

    fn create(&mut self, name: &str) -> Result<std::fs::File> {
        let path = self.dir.join(name);
        let f = std::fs::File::create(&path)?;
        self.created.push(path);
        Ok(f)
    }

    fn cleanup(&self) {
        for p in &self.created {
            let _ = std::fs::remove_file(p);
        }
    }
}

fn run(command: &str, args: &CommonArgs) -> Result<()> {
    if let Some(n) = args.threads {
        // best effort: a later duplicate initialization is not an error we
        // want to surface to the user
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let out_dir = args.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let mut out = Outputs::new(&out_dir)?;
    let started = Instant::now();
    let result = dispatch(command, args, &mut out, started);
    if result.is_err() {
        out.cleanup();
    }
    result
}

fn dispatch(command: &str, args: &CommonArgs, out: &mut Outputs, started: Instant) -> Result<()> {
    match command {
        "fit" => run_fit(args, out, started),
        "lognc" => run_lognc(args, out, started),
        "rmap" => run_rmap(args, out, started),
        "evidence" => run_evidence(args, out, started),
        "bf" => run_bf(args, out, started),
        "survexpand" => run_survexpand(args, out),
        _ => unreachable!("clap restricts the subcommand set"),
    }
}

fn write_draws_csv(out: &mut Outputs, draws: &Draws) -> Result<()> {
    let mut f = std::io::BufWriter::new(out.create("draws.csv")?);
    write!(f, "chain,iteration")?;
    for name in &draws.names {
        write!(f, ",{name}")?;
    }
    writeln!(f)?;
    let k = draws.n_params();
    for c in 0..draws.chains {
        for i in 0..draws.iter_sampling {
            write!(f, "{},{}", c + 1, i + 1)?;
            let row = c * draws.iter_sampling + i;
            for j in 0..k {
                write!(f, ",{}", draws.constrained[row * k + j])?;
            }
            writeln!(f)?;
        }
    }
    f.flush()?;
    Ok(())
}

fn write_summary_csv(out: &mut Outputs, draws: &Draws) -> Result<()> {
    let mut f = std::io::BufWriter::new(out.create("summary.csv")?);
    writeln!(f, "variable,mean,sd,q2.5,q50,q97.5")?;
    for row in summarize(draws, &DEFAULT_PROBS)? {
        writeln!(
            f,
            "{},{},{},{},{},{}",
            row.name, row.mean, row.sd, row.quantiles[0], row.quantiles[1], row.quantiles[2]
        )?;
    }
    f.flush()?;
    Ok(())
}

fn toml_to_json(v: &toml::Value) -> serde_json::Value {
    serde_json::to_value(v).unwrap_or(serde_json::Value::Null)
}

fn write_diagnostics_json(
    out: &mut Outputs,
    command: &str,
    loaded: &Loaded,
    diag: Option<&Diagnostics>,
    draws: Option<&Draws>,
    extra: serde_json::Value,
    started: Instant,
) -> Result<()> {
    let mut doc = serde_json::json!({
        "command": command,
        "seed": loaded.sampler.seed,
        "wall_time_s": started.elapsed().as_secs_f64(),
        "config": toml_to_json(&loaded.resolved),
    });
    if let Some(d) = diag {
        let pairs = |vals: &[f64]| -> serde_json::Value {
            d.names
                .iter()
                .cloned()
                .zip(vals.iter().map(|&v| serde_json::json!(v)))
                .collect::<serde_json::Map<_, _>>()
                .into()
        };
        doc["rhat"] = pairs(&d.rhat);
        doc["ess_bulk"] = pairs(&d.ess_bulk);
        doc["divergences"] = d.divergences.into();
    }
    if let Some(d) = draws {
        doc["step_size"] = serde_json::json!(d.step_size);
        doc["accept_stat"] = serde_json::json!(d.accept_stat);
    }
    if let serde_json::Value::Object(m) = extra {
        for (k, v) in m {
            doc[k] = v;
        }
    }
    let mut f = out.create("diagnostics.json")?;
    serde_json::to_writer_pretty(&mut f, &doc)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    writeln!(f)?;
    Ok(())
}

fn run_fit(args: &CommonArgs, out: &mut Outputs, started: Instant) -> Result<()> {
    let loaded = load(args, true)?;
    let spec = build_prior_spec(&loaded.config, &loaded.datasets, loaded.model.p())?;
    if let PriorSpec::Rmap { .. } = spec {
        return run_rmap(args, out, started);
    }
    let BuiltTarget::Single(target) = build_target(&spec, &loaded.model, &loaded.datasets)? else {
        return Err(Error::Config("fit expected a single target".into()));
    };
    let draws = sample(target.as_ref(), &loaded.sampler)?;
    let diag = diagnostics(&draws)?;
    write_draws_csv(out, &draws)?;
    write_summary_csv(out, &draws)?;
    write_diagnostics_json(out, "fit", &loaded, Some(&diag), Some(&draws), serde_json::json!({}), started)
}

fn run_rmap(args: &CommonArgs, out: &mut Outputs, started: Instant) -> Result<()> {
    let loaded = load(args, true)?;
    let spec = build_prior_spec(&loaded.config, &loaded.datasets, loaded.model.p())?;
    let PriorSpec::Rmap { w, bhm, vague } = spec else {
        return Err(Error::Config("rmap requires prior type \"rmap\"".into()));
    };
    let result = rmap_posterior(&loaded.model, &loaded.datasets, w, &bhm, &vague, &loaded.sampler)?;
    let diag = diagnostics(&result.draws)?;
    write_draws_csv(out, &result.draws)?;
    write_summary_csv(out, &result.draws)?;
    let extra = serde_json::json!({
        "prior_weight": w,
        "gamma_tilde": result.gamma_tilde,
        "informative_picks": result.informative_picks,
        "log_z_informative": result.log_z_informative,
        "log_z_vague": result.log_z_vague,
    });
    write_diagnostics_json(out, "rmap", &loaded, Some(&diag), Some(&result.draws), extra, started)
}

fn run_lognc(args: &CommonArgs, out: &mut Outputs, started: Instant) -> Result<()> {
    let loaded = load(args, true)?;
    if loaded.datasets.len() < 2 {
        return Err(Error::Config("lognc requires at least one historical data set".into()));
    }
    let prior = loaded.config.prior.as_ref();
    let hyper = prior
        .map(|p| initial_hyper(p, loaded.model.p()))
        .unwrap_or_else(|| InitialPriorHyper::default_for(loaded.model.p()));
    let section = &loaded.config.lognc;
    if section.grid_points < 5 {
        return Err(Error::Config("lognc.grid_points must be at least 5".into()));
    }
    let a0: Vec<f64> = (0..section.grid_points)
        .map(|i| i as f64 / (section.grid_points - 1) as f64)
        .collect();
    let grids = build_lognc_grid(
        &loaded.model,
        &loaded.datasets[1..],
        &a0,
        &hyper,
        &loaded.sampler,
        section.loess_span,
    )?;
    let mut reliable = Vec::new();
    for (h, grid) in grids.iter().enumerate() {
        grid.write_csv(out.create(&format!("lognc_h{}.csv", h + 1))?)?;
        let mut plot = out.create(&format!("lognc_plot_h{}.csv", h + 1))?;
        writeln!(plot, "a0,value")?;
        for (a, v) in grid.a0_values.iter().zip(&grid.lognc_smooth) {
            writeln!(plot, "{a},{v}")?;
        }
        if !grid.reliable {
            eprintln!(
                "hdprior lognc: warning: grid for historical data set {} has max R-hat > 1.05",
                h + 1
            );
        }
        reliable.push(grid.reliable);
    }
    let extra = serde_json::json!({ "grid_reliable": reliable });
    write_diagnostics_json(out, "lognc", &loaded, None, None, extra, started)
}

fn run_evidence(args: &CommonArgs, out: &mut Outputs, started: Instant) -> Result<()> {
    let loaded = load(args, true)?;
    let spec = build_prior_spec(&loaded.config, &loaded.datasets, loaded.model.p())?;
    let log_z = marginal_likelihood(&spec, &loaded.model, &loaded.datasets, &loaded.sampler)?;
    let mut f = out.create("evidence.csv")?;
    writeln!(f, "prior,log_marginal_likelihood")?;
    writeln!(f, "{},{log_z}", loaded.config.prior.as_ref().map_or("?", |p| p.kind.as_str()))?;
    let extra = serde_json::json!({ "log_marginal_likelihood": log_z });
    write_diagnostics_json(out, "evidence", &loaded, None, None, extra, started)
}

fn run_bf(args: &CommonArgs, out: &mut Outputs, started: Instant) -> Result<()> {
    let loaded = load(args, true)?;
    let Some(section) = &loaded.config.bf else {
        return Err(Error::Config("missing [bf] section".into()));
    };
    let link2 = parse_link(&section.link2)?;
    let a0_grid = section
        .a0_grid
        .clone()
        .unwrap_or_else(|| (0..=10).map(|i| i as f64 / 10.0).collect());
    if a0_grid.iter().any(|a| !(0.0..=1.0).contains(a)) {
        return Err(Error::Config("bf.a0_grid values must lie in [0, 1]".into()));
    }
    let prior = loaded
        .config
        .prior
        .as_ref()
        .ok_or_else(|| Error::Config("missing [prior] section".into()))?;
    let hyper = initial_hyper(prior, loaded.model.p());
    let n_hist = loaded.datasets.len() - 1;
    if n_hist == 0 {
        return Err(Error::Config("bf requires at least one historical data set".into()));
    }
    let model2 = ModelSpec::new(loaded.model.family, link2, loaded.model.coef_names.clone());

    let mut f = out.create("bf.csv")?;
    writeln!(f, "a0,value")?;
    let mut table = Vec::new();
    for (i, &a0) in a0_grid.iter().enumerate() {
        let spec = PriorSpec::Pp { a0: vec![a0; n_hist], hyper: hyper.clone() };
        let mut cfg = loaded.sampler.clone();
        cfg.seed = loaded.sampler.seed.wrapping_add(1 + 2 * i as u64);
        let z1 = marginal_likelihood(&spec, &loaded.model, &loaded.datasets, &cfg)?;
        cfg.seed = loaded.sampler.seed.wrapping_add(2 + 2 * i as u64);
        let z2 = marginal_likelihood(&spec, &model2, &loaded.datasets, &cfg)?;
        let bf = bayes_factor(z1, z2);
        writeln!(f, "{a0},{}", bf.log_bf)?;
        table.push(serde_json::json!({ "a0": a0, "log_bf": bf.log_bf, "label": bf.label }));
    }
    let extra = serde_json::json!({ "links": [loaded.config.model.link, section.link2], "bf": table });
    write_diagnostics_json(out, "bf", &loaded, None, None, extra, started)
}

fn run_survexpand(args: &CommonArgs, out: &mut Outputs) -> Result<()> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| Error::Config(format!("{}: {e}", args.config.display())))?;
    let config: RunConfig = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
    let Some(section) = &config.survexpand else {
        return Err(Error::Config("missing [survexpand] section".into()));
    };
    let records = data::load_survival(
        &config.data.current,
        &section.time_column,
        &section.event_column,
        &section.covariates,
    )?;
    let breaks = match (&section.cuts, section.intervals) {
        (Some(cuts), None) => Breaks::new(cuts.clone())?,
        (None, Some(j)) => {
            let times: Vec<f64> = records.iter().map(|r| r.time).collect();
            let events: Vec<bool> = records.iter().map(|r| r.event).collect();
            choose_breaks(&times, &events, j)?
        }
        _ => {
            return Err(Error::Config(
                "survexpand needs exactly one of `cuts` or `intervals`".into(),
            ))
        }
    };
    let (dataset, rows) = expand_poisson(&records, &breaks, Role::Current)?;
    let j_total = breaks.intervals();
    let mut f = std::io::BufWriter::new(out.create(&section.output)?);
    write!(f, "subject,interval,y,offset")?;
    for j in 1..=j_total {
        write!(f, ",interval_{j}")?;
    }
    for c in &section.covariates {
        write!(f, ",{c}")?;
    }
    writeln!(f)?;
    for (r, row) in rows.iter().enumerate() {
        write!(f, "{},{},{},{}", row.subject + 1, row.interval, row.delta, row.log_risk)?;
        for j in 0..j_total + section.covariates.len() {
            write!(f, ",{}", dataset.x[(r, j)])?;
        }
        writeln!(f)?;
    }
    f.flush()?;
    Ok(())
}
