//! Unnormalized log posteriors (with gradients) on unconstrained coordinates
//! for the borrowing priors: power prior, normalized power prior, normalized
//! asymptotic power prior, hierarchical model, commensurate prior, latent
//! exchangeability prior, and the vague initial prior.

mod bhm;
mod cp;
mod leap;
mod napp;
mod npp;
mod pp;

pub use bhm::BhmTarget;
pub use cp::CpTarget;
pub use leap::{leap_log_density, LeapTarget};
pub use napp::{napp_log_density, NappTarget};
pub use npp::NppTarget;
pub use pp::{pp_log_kernel, PpTarget};

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::glm::{self, Dataset};
use crate::model::ModelSpec;
use crate::smooth::Interpolant;

/// Callable contract for the sampler and bridge estimator: unconstrained
/// vector in, log density and gradient out. The constrained view carries the
/// reporting names.
pub trait LogTarget: Send + Sync {
    fn dim(&self) -> usize;
    /// Log density and gradient; returns -inf with a zero gradient where the
    /// density underflows or leaves the numeric domain.
    fn log_density_grad(&self, u: &[f64]) -> (f64, Vec<f64>);
    /// Names of the constrained values, aligned with `constrain`.
    fn names(&self) -> Vec<String>;
    fn constrain(&self, u: &[f64]) -> Vec<f64>;
}

impl<T: LogTarget + ?Sized> LogTarget for std::sync::Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn log_density_grad(&self, u: &[f64]) -> (f64, Vec<f64>) {
        (**self).log_density_grad(u)
    }
    fn names(&self) -> Vec<String> {
        (**self).names()
    }
    fn constrain(&self, u: &[f64]) -> Vec<f64> {
        (**self).constrain(u)
    }
}

/// Vague initial prior: independent normals on coefficients and a
/// half-normal (truncated at zero) on the dispersion.
#[derive(Debug, Clone)]
pub struct InitialPriorHyper {
    pub mu0: Vec<f64>,
    pub sigma0: Vec<f64>,
    pub alpha0: f64,
    pub gamma0: f64,
}

impl InitialPriorHyper {
    pub fn default_for(p: usize) -> Self {
        InitialPriorHyper {
            mu0: vec![0.0; p],
            sigma0: vec![10.0; p],
            alpha0: 0.0,
            gamma0: 10.0,
        }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if self.mu0.len() != p || self.sigma0.len() != p {
            return Err(Error::Shape("initial prior hyperparameter length != p".into()));
        }
        if self.sigma0.iter().any(|&s| s <= 0.0) || self.gamma0 <= 0.0 {
            return Err(Error::Spec("prior scales must be strictly positive".into()));
        }
        Ok(())
    }
}

/// Hierarchical-model hyperparameters (scalars broadcast over coefficients).
#[derive(Debug, Clone, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BhmHyper {
    pub meta_mean_mean: f64,
    pub meta_mean_sd: f64,
    pub meta_sd_mean: f64,
    pub meta_sd_sd: f64,
    pub disp_mean: f64,
    pub disp_sd: f64,
    pub hist_disp_mean: f64,
    pub hist_disp_sd: f64,
}

impl Default for BhmHyper {
    fn default() -> Self {
        BhmHyper {
            meta_mean_mean: 0.0,
            meta_mean_sd: 10.0,
            meta_sd_mean: 0.0,
            meta_sd_sd: 1.0,
            disp_mean: 0.0,
            disp_sd: 10.0,
            hist_disp_mean: 0.0,
            hist_disp_sd: 10.0,
        }
    }
}

/// Commensurate-prior hyperparameters with the spike-and-slab mixture on the
/// commensurability precisions.
#[derive(Debug, Clone, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CpHyper {
    pub p_spike: f64,
    pub spike_mean: f64,
    pub spike_sd: f64,
    pub slab_mean: f64,
    pub slab_sd: f64,
    pub beta0_mean: f64,
    pub beta0_sd: f64,
    pub disp_mean: f64,
    pub disp_sd: f64,
    pub hist_disp_mean: f64,
    pub hist_disp_sd: f64,
}

impl Default for CpHyper {
    fn default() -> Self {
        CpHyper {
            p_spike: 0.1,
            spike_mean: 200.0,
            spike_sd: 0.1,
            slab_mean: 0.0,
            slab_sd: 5.0,
            beta0_mean: 0.0,
            beta0_sd: 10.0,
            disp_mean: 0.0,
            disp_sd: 10.0,
            hist_disp_mean: 0.0,
            hist_disp_sd: 10.0,
        }
    }
}

/// Tagged union over the implemented priors.
#[derive(Debug, Clone)]
pub enum PriorSpec {
    Initial {
        hyper: InitialPriorHyper,
    },
    Pp {
        a0: Vec<f64>,
        hyper: InitialPriorHyper,
    },
    Npp {
        a0_shape1: f64,
        a0_shape2: f64,
        /// Smoothed log normalizing constant per historical data set,
        /// as an interpolant over a0 in [0, 1].
        lognc: Vec<Interpolant>,
        hyper: InitialPriorHyper,
    },
    Napp {
        a0_shape1: f64,
        a0_shape2: f64,
    },
    Bhm {
        hyper: BhmHyper,
    },
    Cp {
        hyper: CpHyper,
    },
    Leap {
        k: usize,
        prob_conc: Vec<f64>,
        hyper: InitialPriorHyper,
    },
    Rmap {
        w: f64,
        bhm: BhmHyper,
        vague: InitialPriorHyper,
    },
}

/// Output of `build_target`: a single target, or the informative/vague pair
/// consumed by the robust meta-analytic mixing step.
pub enum BuiltTarget {
    Single(Box<dyn LogTarget>),
    Pair {
        informative: Box<dyn LogTarget>,
        vague: Box<dyn LogTarget>,
    },
}

fn split_data(data: &[Dataset]) -> Result<(Dataset, Vec<Dataset>)> {
    let Some((current, rest)) = data.split_first() else {
        return Err(Error::Spec("at least one (current) data set required".into()));
    };
    Ok((current.clone(), rest.to_vec()))
}

fn require_historical(hist: &[Dataset]) -> Result<()> {
    if hist.is_empty() {
        return Err(Error::Spec("this prior requires at least one historical data set".into()));
    }
    Ok(())
}

/// Build the unnormalized log-posterior target for a prior specification.
/// The first data set is current; the rest are historical.
pub fn build_target(spec: &PriorSpec, model: &ModelSpec, data: &[Dataset]) -> Result<BuiltTarget> {
    let (current, hist) = split_data(data)?;
    let p = model.p();
    let single = |t: Box<dyn LogTarget>| Ok(BuiltTarget::Single(t));
    match spec {
        PriorSpec::Initial { hyper } => {
            hyper.validate(p)?;
            single(Box::new(PpTarget::new(model.clone(), Some(current), Vec::new(), hyper.clone())?))
        }
        PriorSpec::Pp { a0, hyper } => {
            hyper.validate(p)?;
            require_historical(&hist)?;
            if a0.len() != hist.len() {
                return Err(Error::Shape("a0 length != number of historical data sets".into()));
            }
            let weighted = hist.into_iter().zip(a0.iter().copied()).collect();
            single(Box::new(PpTarget::new(model.clone(), Some(current), weighted, hyper.clone())?))
        }
        PriorSpec::Npp { a0_shape1, a0_shape2, lognc, hyper } => {
            hyper.validate(p)?;
            require_historical(&hist)?;
            single(Box::new(NppTarget::new(
                model.clone(),
                Some(current),
                hist,
                lognc.clone(),
                *a0_shape1,
                *a0_shape2,
                hyper.clone(),
            )?))
        }
        PriorSpec::Napp { a0_shape1, a0_shape2 } => {
            require_historical(&hist)?;
            let fits = hist
                .iter()
                .map(|d| glm::fit_mle(model.family, model.link, d))
                .collect::<Result<Vec<_>>>()?;
            single(Box::new(NappTarget::new(model.clone(), Some(current), fits, *a0_shape1, *a0_shape2)?))
        }
        PriorSpec::Bhm { hyper } => {
            require_historical(&hist)?;
            single(Box::new(BhmTarget::new(model.clone(), Some(current), hist, hyper.clone())?))
        }
        PriorSpec::Cp { hyper } => {
            require_historical(&hist)?;
            single(Box::new(CpTarget::new(model.clone(), Some(current), hist, hyper.clone())?))
        }
        PriorSpec::Leap { k, prob_conc, hyper } => {
            hyper.validate(p)?;
            require_historical(&hist)?;
            let stacked = Dataset::stack(&hist.iter().collect::<Vec<_>>(), crate::glm::Role::Historical(1))?;
            single(Box::new(LeapTarget::new(model.clone(), Some(current), stacked, *k, prob_conc.clone(), hyper.clone())?))
        }
        PriorSpec::Rmap { w, bhm, vague } => {
            vague.validate(p)?;
            require_historical(&hist)?;
            if !(0.0..=1.0).contains(w) {
                return Err(Error::Spec("RMAP weight w must lie in [0, 1]".into()));
            }
            let informative = BhmTarget::new(model.clone(), Some(current.clone()), hist, bhm.clone())?;
            let vague_t = PpTarget::new(model.clone(), Some(current), Vec::new(), vague.clone())?;
            Ok(BuiltTarget::Pair {
                informative: Box::new(informative),
                vague: Box::new(vague_t),
            })
        }
    }
}

/// Build the prior-kernel target (no current-data likelihood) whose
/// normalizing constant enters the two-step evidence computation.
/// Returns `None` for priors that are already normalized (Initial, NAPP).
pub fn build_prior_target(spec: &PriorSpec, model: &ModelSpec, historical: &[Dataset]) -> Result<Option<Box<dyn LogTarget>>> {
    match spec {
        PriorSpec::Initial { .. } | PriorSpec::Napp { .. } => Ok(None),
        PriorSpec::Pp { a0, hyper } => {
            require_historical(historical)?;
            if a0.len() != historical.len() {
                return Err(Error::Shape("a0 length != number of historical data sets".into()));
            }
            let weighted = historical.iter().cloned().zip(a0.iter().copied()).collect();
            Ok(Some(Box::new(PpTarget::new(model.clone(), None, weighted, hyper.clone())?)))
        }
        PriorSpec::Npp { a0_shape1, a0_shape2, lognc, hyper } => {
            require_historical(historical)?;
            Ok(Some(Box::new(NppTarget::new(
                model.clone(),
                None,
                historical.to_vec(),
                lognc.clone(),
                *a0_shape1,
                *a0_shape2,
                hyper.clone(),
            )?)))
        }
        PriorSpec::Bhm { hyper } => {
            require_historical(historical)?;
            Ok(Some(Box::new(BhmTarget::new(model.clone(), None, historical.to_vec(), hyper.clone())?)))
        }
        PriorSpec::Cp { hyper } => {
            require_historical(historical)?;
            Ok(Some(Box::new(CpTarget::new(model.clone(), None, historical.to_vec(), hyper.clone())?)))
        }
        PriorSpec::Leap { k, prob_conc, hyper } => {
            require_historical(historical)?;
            let stacked = Dataset::stack(&historical.iter().collect::<Vec<_>>(), crate::glm::Role::Historical(1))?;
            Ok(Some(Box::new(LeapTarget::new(model.clone(), None, stacked, *k, prob_conc.clone(), hyper.clone())?)))
        }
        PriorSpec::Rmap { .. } => Err(Error::Spec(
            "RMAP evidence is assembled from its informative and vague components".into(),
        )),
    }
}

// ---- shared density helpers ----

pub(crate) fn ln_normal(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * (2.0 * std::f64::consts::PI).ln() - sd.ln() - 0.5 * z * z
}

pub(crate) fn ln_std_normal_cdf(x: f64) -> f64 {
    // stable for the range of loc/scale ratios used here
    (0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)).ln()
}

/// Normal truncated from below at zero, normalization included.
pub(crate) fn ln_half_normal(x: f64, loc: f64, scale: f64) -> f64 {
    ln_normal(x, loc, scale) - ln_std_normal_cdf(loc / scale)
}

/// Contribution of a half-normal prior on phi = exp(tau), including the
/// log-Jacobian; returns (value, d/d tau).
pub(crate) fn half_normal_on_exp(tau: f64, loc: f64, scale: f64) -> (f64, f64) {
    let phi = tau.exp();
    let value = ln_half_normal(phi, loc, scale) + tau;
    let grad = -(phi - loc) / (scale * scale) * phi + 1.0;
    (value, grad)
}

pub(crate) fn ln_beta_pdf_from_logs(log_a: f64, log_1ma: f64, shape1: f64, shape2: f64) -> f64 {
    // guard the exponents so the uniform case stays finite at the endpoints
    let mut lp = -statrs::function::beta::ln_beta(shape1, shape2);
    if shape1 != 1.0 {
        lp += (shape1 - 1.0) * log_a;
    }
    if shape2 != 1.0 {
        lp += (shape2 - 1.0) * log_1ma;
    }
    lp
}

/// Log-likelihood and (beta, tau) gradient for one data set, mapping domain
/// failures to None so targets can report -inf.
pub(crate) fn glm_eval(model: &ModelSpec, beta: &DVector<f64>, phi: f64, data: &Dataset) -> Option<(f64, DVector<f64>)> {
    let ll = glm::log_likelihood(model.family, model.link, beta, phi, data).ok()?;
    let grad = glm::log_likelihood_grad(model.family, model.link, beta, phi, data).ok()?;
    if !ll.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return None;
    }
    Some((ll, grad))
}

pub(crate) fn neg_inf(dim: usize) -> (f64, Vec<f64>) {
    (f64::NEG_INFINITY, vec![0.0; dim])
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::LogTarget;

    /// Central finite-difference gradient check used across prior tests.
    pub fn check_gradient(target: &dyn LogTarget, u: &[f64], tol: f64) {
        let h = 1e-5;
        let (_, grad) = target.log_density_grad(u);
        for j in 0..target.dim() {
            let mut up = u.to_vec();
            let mut um = u.to_vec();
            up[j] += h;
            um[j] -= h;
            let (fp, _) = target.log_density_grad(&up);
            let (fm, _) = target.log_density_grad(&um);
            let fd = (fp - fm) / (2.0 * h);
            let denom = fd.abs().max(1.0);
            assert!(
                (grad[j] - fd).abs() / denom < tol,
                "gradient mismatch at coord {j}: analytic {} vs fd {fd}",
                grad[j]
            );
        }
    }
}
