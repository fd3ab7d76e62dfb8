//! Normalizing-constant machinery: iterative bridge sampling, the normalized
//! power prior log-normalizing-constant grid, robust meta-analytic mixing,
//! marginal likelihoods, and Bayes factors.

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::glm::Dataset;
use crate::model::ModelSpec;
use crate::priors::{
    build_prior_target, build_target, BhmHyper, BhmTarget, BuiltTarget, InitialPriorHyper,
    LogTarget, PpTarget, PriorSpec,
};
use crate::sampler::{diagnostics, sample, Draws, SamplerConfig};
use crate::smooth::{loess_fit, Interpolant};
use crate::transforms::sigmoid;

const BRIDGE_TOL: f64 = 1e-10;
const BRIDGE_MAX_ITER: usize = 1000;

/// Splitmix-style stream derivation so sub-runs get decorrelated seeds.
fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn with_seed(config: &SamplerConfig, tag: u64) -> SamplerConfig {
    SamplerConfig { seed: derive_seed(config.seed, tag), ..config.clone() }
}

fn log_sum_exp_slice(v: impl Iterator<Item = f64>) -> f64 {
    let vals: Vec<f64> = v.collect();
    let m = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + vals.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn log_add(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        m + ((a - m).exp() + (b - m).exp()).ln()
    }
}

#[derive(Debug, Clone)]
pub struct BridgeResult {
    pub log_evidence: f64,
    pub iterations: usize,
    pub rel_change: f64,
    pub converged: bool,
    pub proposal_mean: DVector<f64>,
    /// Lower Cholesky factor of the proposal covariance.
    pub proposal_chol: DMatrix<f64>,
}

struct MvnProposal {
    mean: DVector<f64>,
    chol: DMatrix<f64>, // lower factor
    log_norm: f64,
}

impl MvnProposal {
    fn fit(rows: &[&[f64]]) -> Result<Self> {
        let dim = rows[0].len();
        let n = rows.len() as f64;
        let mut mean = DVector::zeros(dim);
        for r in rows {
            for j in 0..dim {
                mean[j] += r[j];
            }
        }
        mean /= n;
        let mut cov = DMatrix::zeros(dim, dim);
        for r in rows {
            for a in 0..dim {
                for b in a..dim {
                    cov[(a, b)] += (r[a] - mean[a]) * (r[b] - mean[b]);
                }
            }
        }
        for a in 0..dim {
            for b in 0..a {
                cov[(a, b)] = cov[(b, a)];
            }
        }
        cov /= n - 1.0;
        let chol = match cov.clone().cholesky() {
            Some(c) => c,
            None => (cov + DMatrix::identity(dim, dim) * 1e-8)
                .cholesky()
                .ok_or_else(|| Error::Singular("bridge proposal covariance is singular".into()))?,
        };
        let l = chol.l();
        let log_det_half: f64 = l.diagonal().iter().map(|d| d.ln()).sum();
        Ok(MvnProposal {
            mean,
            log_norm: -0.5 * dim as f64 * (2.0 * std::f64::consts::PI).ln() - log_det_half,
            chol: l,
        })
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let d = DVector::from_column_slice(x) - &self.mean;
        // solve L z = d by forward substitution
        let dim = d.len();
        let mut z = d;
        for i in 0..dim {
            for j in 0..i {
                let zj = z[j];
                z[i] -= self.chol[(i, j)] * zj;
            }
            z[i] /= self.chol[(i, i)];
        }
        self.log_norm - 0.5 * z.norm_squared()
    }

    fn draw(&self, rng: &mut ChaCha20Rng) -> Vec<f64> {
        let dim = self.mean.len();
        let z = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        (&self.mean + &self.chol * z).iter().copied().collect()
    }
}

/// Meng–Wong iterative bridge estimate of the target's log normalizing
/// constant. Even-indexed draws fit the moment-matched normal proposal;
/// odd-indexed draws enter the numerator.
pub fn bridge_sample(draws: &Draws, target: &dyn LogTarget, seed: u64) -> Result<BridgeResult> {
    let n = draws.n_draws();
    if n < 1000 {
        return Err(Error::Evidence(format!(
            "bridge sampling needs at least 1000 draws, got {n}"
        )));
    }
    let fit_rows: Vec<&[f64]> = (0..n).step_by(2).map(|i| draws.unconstrained_row(i)).collect();
    let num_rows: Vec<&[f64]> = (1..n).step_by(2).map(|i| draws.unconstrained_row(i)).collect();
    let proposal = MvnProposal::fit(&fit_rows)?;

    let l1: Vec<f64> = num_rows
        .iter()
        .map(|r| target.log_density_grad(r).0 - proposal.log_density(r))
        .collect();
    let mut rng = ChaCha20Rng::seed_from_u64(derive_seed(seed, 0xB51D));
    let l2: Vec<f64> = (0..num_rows.len())
        .map(|_| {
            let x = proposal.draw(&mut rng);
            target.log_density_grad(&x).0 - proposal.log_density(&x)
        })
        .collect();

    let n1 = l1.len() as f64;
    let n2 = l2.len() as f64;
    let ls1 = (n1 / (n1 + n2)).ln();
    let ls2 = (n2 / (n1 + n2)).ln();

    // simple importance-sampling start
    let mut log_r = log_sum_exp_slice(l2.iter().copied()) - n2.ln();
    let mut iterations = 0;
    let mut rel_change = f64::INFINITY;
    let mut converged = false;
    while iterations < BRIDGE_MAX_ITER {
        iterations += 1;
        let num = log_sum_exp_slice(l2.iter().map(|&l| l - log_add(ls1 + l, ls2 + log_r))) - n2.ln();
        let den = log_sum_exp_slice(l1.iter().map(|&l| -log_add(ls1 + l, ls2 + log_r))) - n1.ln();
        let next = num - den;
        rel_change = (next - log_r).abs() / next.abs().max(1.0);
        log_r = next;
        if rel_change < BRIDGE_TOL {
            converged = true;
            break;
        }
    }
    if !log_r.is_finite() {
        return Err(Error::Evidence("bridge estimate did not stay finite".into()));
    }
    Ok(BridgeResult {
        log_evidence: log_r,
        iterations,
        rel_change,
        converged,
        proposal_mean: proposal.mean,
        proposal_chol: proposal.chol,
    })
}

// ---- NPP normalizing-constant grid ----

#[derive(Debug, Clone)]
pub struct LogNcPoint {
    pub a0: f64,
    pub lognc: f64,
    pub min_ess_bulk: f64,
    pub max_rhat: f64,
}

/// Log normalizing constant of the power prior at one fixed a0; exact zero at
/// a0 = 0 where the initial prior is already normalized.
pub fn npp_lognc(
    model: &ModelSpec,
    hist: &Dataset,
    a0: f64,
    hyper: &InitialPriorHyper,
    config: &SamplerConfig,
) -> Result<LogNcPoint> {
    if !(0.0..=1.0).contains(&a0) {
        return Err(Error::Domain("a0 must lie in [0, 1]".into()));
    }
    if a0 == 0.0 {
        return Ok(LogNcPoint { a0, lognc: 0.0, min_ess_bulk: f64::INFINITY, max_rhat: 1.0 });
    }
    let target = PpTarget::new(model.clone(), None, vec![(hist.clone(), a0)], hyper.clone())?;
    let draws = sample(&target, config)?;
    let diag = diagnostics(&draws)?;
    let bridge = bridge_sample(&draws, &target, config.seed)?;
    if !bridge.converged {
        return Err(Error::Evidence("bridge iteration did not converge".into()));
    }
    Ok(LogNcPoint {
        a0,
        lognc: bridge.log_evidence,
        min_ess_bulk: diag.min_ess_bulk(),
        max_rhat: diag.max_rhat(),
    })
}

#[derive(Debug, Clone)]
pub struct LogNcGrid {
    pub a0_values: Vec<f64>,
    pub lognc_raw: Vec<f64>,
    pub lognc_smooth: Vec<f64>,
    pub min_ess_bulk: Vec<f64>,
    pub max_rhat: Vec<f64>,
    /// False when any grid point shows max R-hat > 1.05.
    pub reliable: bool,
}

impl LogNcGrid {
    pub fn interpolant(&self) -> Result<Interpolant> {
        Interpolant::new(self.a0_values.clone(), self.lognc_smooth.clone())
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["a0", "lognc_raw", "lognc_smooth", "min_ess_bulk", "max_rhat"])
            .map_err(csv_err)?;
        for i in 0..self.a0_values.len() {
            w.write_record([
                self.a0_values[i].to_string(),
                self.lognc_raw[i].to_string(),
                self.lognc_smooth[i].to_string(),
                self.min_ess_bulk[i].to_string(),
                self.max_rhat[i].to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(input: R) -> Result<LogNcGrid> {
        let mut reader = csv::Reader::from_reader(input);
        let mut grid = LogNcGrid {
            a0_values: Vec::new(),
            lognc_raw: Vec::new(),
            lognc_smooth: Vec::new(),
            min_ess_bulk: Vec::new(),
            max_rhat: Vec::new(),
            reliable: true,
        };
        for record in reader.records() {
            let r = record.map_err(csv_err)?;
            if r.len() != 5 {
                return Err(Error::Data("grid CSV rows need 5 columns".into()));
            }
            let field = |i: usize| -> Result<f64> {
                r[i].trim()
                    .parse()
                    .map_err(|_| Error::Data(format!("bad numeric field {:?} in grid CSV", &r[i])))
            };
            grid.a0_values.push(field(0)?);
            grid.lognc_raw.push(field(1)?);
            grid.lognc_smooth.push(field(2)?);
            grid.min_ess_bulk.push(field(3)?);
            grid.max_rhat.push(field(4)?);
        }
        grid.reliable = grid.max_rhat.iter().all(|&r| r <= 1.05);
        validate_a0_grid(&grid.a0_values)?;
        Ok(grid)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Data(format!("csv: {e}"))
}

pub fn default_a0_grid() -> Vec<f64> {
    (0..21).map(|i| i as f64 / 20.0).collect()
}

fn validate_a0_grid(a0: &[f64]) -> Result<()> {
    if a0.len() < 5 {
        return Err(Error::Spec("a0 grid needs at least 5 points".into()));
    }
    if a0[0] != 0.0 || *a0.last().unwrap() != 1.0 {
        return Err(Error::Spec("a0 grid must start at 0 and end at 1".into()));
    }
    if a0.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Spec("a0 grid must be strictly increasing".into()));
    }
    Ok(())
}

/// LOESS-smooth raw grid values, then pin the exact identity log Z(0) = 0
/// back onto the smoothed curve (the raw value there is exact, not noisy).
pub(crate) fn smooth_lognc(a0: &[f64], raw: &[f64], span: f64) -> Result<Vec<f64>> {
    let mut smooth = loess_fit(a0, raw, span, 1)?;
    smooth[0] = 0.0;
    Ok(smooth)
}

/// Algorithm: per historical data set, estimate the power-prior log
/// normalizing constant on the a0 grid, then smooth with LOESS.
pub fn build_lognc_grid(
    model: &ModelSpec,
    hist: &[Dataset],
    a0_grid: &[f64],
    hyper: &InitialPriorHyper,
    config: &SamplerConfig,
    loess_span: f64,
) -> Result<Vec<LogNcGrid>> {
    validate_a0_grid(a0_grid)?;
    if hist.is_empty() {
        return Err(Error::Spec("at least one historical data set required".into()));
    }
    hist.iter()
        .enumerate()
        .map(|(h, data)| {
            let points: Vec<Result<LogNcPoint>> = a0_grid
                .par_iter()
                .enumerate()
                .map(|(i, &a0)| {
                    let cfg = with_seed(config, (h as u64) << 32 | i as u64);
                    npp_lognc(model, data, a0, hyper, &cfg)
                })
                .collect();
            let points = points.into_iter().collect::<Result<Vec<_>>>()?;
            let raw: Vec<f64> = points.iter().map(|p| p.lognc).collect();
            let smooth = smooth_lognc(a0_grid, &raw, loess_span)?;
            let max_rhat: Vec<f64> = points.iter().map(|p| p.max_rhat).collect();
            Ok(LogNcGrid {
                a0_values: a0_grid.to_vec(),
                lognc_raw: raw,
                lognc_smooth: smooth,
                min_ess_bulk: points.iter().map(|p| p.min_ess_bulk).collect(),
                reliable: max_rhat.iter().all(|&r| r <= 1.05),
                max_rhat,
            })
        })
        .collect()
}

// ---- robust meta-analytic mixing ----

/// Updated mixture weight: gamma = w Z_I / (w Z_I + (1 - w) Z_V), in log space.
pub fn rmap_weight(w: f64, log_z_informative: f64, log_z_vague: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::Domain("prior weight w must lie in [0, 1]".into()));
    }
    if w == 0.0 || w == 1.0 {
        return Ok(w);
    }
    Ok(sigmoid((w / (1.0 - w)).ln() + log_z_informative - log_z_vague))
}

#[derive(Debug)]
pub struct RmapResult {
    /// Mixed draws restricted to the shared current-data parameters.
    pub draws: Draws,
    pub gamma_tilde: f64,
    pub informative_picks: usize,
    pub log_z_informative: f64,
    pub log_z_vague: f64,
}

fn restrict_columns(draws: &Draws, k: usize) -> Draws {
    let n = draws.n_draws();
    let full = draws.n_params();
    let mut constrained = Vec::with_capacity(n * k);
    for i in 0..n {
        constrained.extend_from_slice(&draws.constrained[i * full..i * full + k]);
    }
    Draws {
        names: draws.names[..k].to_vec(),
        chains: draws.chains,
        iter_sampling: draws.iter_sampling,
        unconstrained: constrained.clone(),
        dim: k,
        constrained,
        log_density: draws.log_density.clone(),
        divergent: draws.divergent.clone(),
        step_size: draws.step_size.clone(),
        accept_stat: draws.accept_stat.clone(),
        energy_error: draws.energy_error.clone(),
        max_depth_hits: draws.max_depth_hits.clone(),
    }
}

/// Robust meta-analytic posterior: sample the hierarchical (informative) and
/// vague posteriors, bridge-sample both constants, update the mixture weight,
/// then mix draw-by-draw on the shared parameters.
pub fn rmap_posterior(
    model: &ModelSpec,
    data: &[Dataset],
    w: f64,
    bhm: &BhmHyper,
    vague: &InitialPriorHyper,
    config: &SamplerConfig,
) -> Result<RmapResult> {
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::Domain("prior weight w must lie in [0, 1]".into()));
    }
    let Some((current, hist)) = data.split_first() else {
        return Err(Error::Spec("RMAP needs a current data set".into()));
    };
    if hist.is_empty() {
        return Err(Error::Spec("RMAP needs historical data".into()));
    }
    let k = model.p() + usize::from(model.dispersion_free());

    let informative = BhmTarget::new(model.clone(), Some(current.clone()), hist.to_vec(), bhm.clone())?;
    let vague_t = PpTarget::new(model.clone(), Some(current.clone()), Vec::new(), vague.clone())?;

    if w == 1.0 {
        let draws_i = sample(&informative, config)?;
        return Ok(RmapResult {
            draws: restrict_columns(&draws_i, k),
            gamma_tilde: 1.0,
            informative_picks: draws_i.n_draws(),
            log_z_informative: f64::NAN,
            log_z_vague: f64::NAN,
        });
    }
    if w == 0.0 {
        let draws_v = sample(&vague_t, &with_seed(config, 1))?;
        return Ok(RmapResult {
            draws: restrict_columns(&draws_v, k),
            gamma_tilde: 0.0,
            informative_picks: 0,
            log_z_informative: f64::NAN,
            log_z_vague: f64::NAN,
        });
    }

    let draws_i = sample(&informative, config)?;
    let draws_v = sample(&vague_t, &with_seed(config, 1))?;
    let log_z_i = bridge_sample(&draws_i, &informative, derive_seed(config.seed, 2))?.log_evidence;
    let log_z_v = bridge_sample(&draws_v, &vague_t, derive_seed(config.seed, 3))?.log_evidence;
    let gamma = rmap_weight(w, log_z_i, log_z_v)?;

    let part_i = restrict_columns(&draws_i, k);
    let part_v = restrict_columns(&draws_v, k);
    let n = part_i.n_draws();
    let mut mixed = part_i.clone();
    let mut rng = ChaCha20Rng::seed_from_u64(derive_seed(config.seed, 4));
    let mut picks = 0usize;
    for m in 0..n {
        if rng.gen::<f64>() < gamma {
            picks += 1;
        } else {
            mixed.constrained[m * k..(m + 1) * k]
                .copy_from_slice(&part_v.constrained[m * k..(m + 1) * k]);
            mixed.unconstrained[m * k..(m + 1) * k]
                .copy_from_slice(&part_v.unconstrained[m * k..(m + 1) * k]);
            mixed.log_density[m] = part_v.log_density[m];
            mixed.divergent[m] = part_v.divergent[m];
        }
    }
    Ok(RmapResult {
        draws: mixed,
        gamma_tilde: gamma,
        informative_picks: picks,
        log_z_informative: log_z_i,
        log_z_vague: log_z_v,
    })
}

// ---- marginal likelihood and Bayes factors ----

/// Two-step marginal likelihood: log Z(D) = log Ztilde(D) - log C, where C is
/// the prior's own normalizing constant (zero for normalized priors).
pub fn marginal_likelihood(
    spec: &PriorSpec,
    model: &ModelSpec,
    data: &[Dataset],
    config: &SamplerConfig,
) -> Result<f64> {
    let hist = data.get(1..).unwrap_or(&[]);
    let log_c = match build_prior_target(spec, model, hist)? {
        None => 0.0,
        Some(prior) => {
            let cfg = with_seed(config, 10);
            let draws = sample(prior.as_ref(), &cfg)?;
            let b = bridge_sample(&draws, prior.as_ref(), derive_seed(config.seed, 11))?;
            if !b.converged {
                return Err(Error::Evidence("prior-constant bridge did not converge".into()));
            }
            b.log_evidence
        }
    };
    let BuiltTarget::Single(post) = build_target(spec, model, data)? else {
        return Err(Error::Spec(
            "marginal likelihood is not defined for the RMAP pair directly".into(),
        ));
    };
    let draws = sample(post.as_ref(), config)?;
    let b = bridge_sample(&draws, post.as_ref(), derive_seed(config.seed, 12))?;
    if !b.converged {
        return Err(Error::Evidence("posterior bridge did not converge".into()));
    }
    Ok(b.log_evidence - log_c)
}

#[derive(Debug, Clone)]
pub struct BayesFactor {
    pub log_bf: f64,
    pub bf: f64,
    pub label: &'static str,
}

/// Kass-Raftery style label for the log Bayes factor of model 1 over model 2.
pub fn bayes_factor(log_z1: f64, log_z2: f64) -> BayesFactor {
    let log_bf = log_z1 - log_z2;
    let label = if log_bf < 0.0 {
        "negative"
    } else if log_bf < 3f64.ln() {
        "weak"
    } else if log_bf < 20f64.ln() {
        "substantial"
    } else if log_bf < 150f64.ln() {
        "strong"
    } else {
        "decisive"
    };
    BayesFactor { log_bf, bf: log_bf.exp(), label }
}

/// Beta-distribution shapes from a target mean and coefficient of variation:
/// alpha + beta = (1 - m) / (m c^2) - 1, alpha = m (alpha + beta).
pub fn solve_beta_hyper(mean: f64, cv: f64) -> Result<(f64, f64)> {
    if !(0.0 < mean && mean < 1.0) || cv <= 0.0 {
        return Err(Error::Domain("need mean in (0,1) and positive cv".into()));
    }
    let s = (1.0 - mean) / (mean * cv * cv) - 1.0;
    let alpha = mean * s;
    let beta = (1.0 - mean) * s;
    if alpha <= 0.0 || beta <= 0.0 {
        return Err(Error::Domain(format!(
            "mean {mean} and cv {cv} imply non-positive beta shapes"
        )));
    }
    Ok((alpha, beta))
}
