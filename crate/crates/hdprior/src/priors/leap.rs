//! Latent exchangeability prior: the stacked historical observations come
//! from a K-component mixture over parameter sets, with the first component
//! shared with the current data. The mixture probabilities live on a simplex
//! sampled through the stick-breaking transform.

use nalgebra::DVector;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::glm::{self, Dataset};
use crate::model::ModelSpec;
use crate::transforms::stick_breaking;

use super::{glm_eval, half_normal_on_exp, ln_half_normal, ln_normal, neg_inf, InitialPriorHyper, LogTarget};

fn ln_dirichlet(log_gamma: &[f64], alpha: &[f64]) -> f64 {
    let sum_alpha: f64 = alpha.iter().sum();
    let mut lp = ln_gamma(sum_alpha);
    for (lg, a) in log_gamma.iter().zip(alpha) {
        lp += (a - 1.0) * lg - ln_gamma(*a);
    }
    lp
}

pub struct LeapTarget {
    model: ModelSpec,
    current: Option<Dataset>,
    /// All historical data stacked into one set.
    historical: Dataset,
    k: usize,
    prob_conc: Vec<f64>,
    hyper: InitialPriorHyper,
}

impl LeapTarget {
    pub fn new(
        model: ModelSpec,
        current: Option<Dataset>,
        historical: Dataset,
        k: usize,
        prob_conc: Vec<f64>,
        hyper: InitialPriorHyper,
    ) -> Result<Self> {
        hyper.validate(model.p())?;
        if k < 2 {
            return Err(Error::Spec("LEAP requires at least two mixture components".into()));
        }
        if prob_conc.len() != k || prob_conc.iter().any(|&a| a <= 0.0) {
            return Err(Error::Spec("Dirichlet concentration must be K positive values".into()));
        }
        Ok(LeapTarget { model, current, historical, k, prob_conc, hyper })
    }

    /// [beta_1(p) .. beta_K(p), tau_1..tau_K?, u_gamma(K-1)]
    fn tau_at(&self, k: usize) -> usize {
        self.k * self.model.p() + k
    }

    fn gamma_base(&self) -> usize {
        self.k * self.model.p() + if self.model.dispersion_free() { self.k } else { 0 }
    }
}

impl LogTarget for LeapTarget {
    fn dim(&self) -> usize {
        self.gamma_base() + self.k - 1
    }

    fn log_density_grad(&self, u: &[f64]) -> (f64, Vec<f64>) {
        let p = self.model.p();
        let free = self.model.dispersion_free();
        let n0 = self.historical.n();
        let simplex = stick_breaking(&u[self.gamma_base()..]);

        let betas: Vec<DVector<f64>> = (0..self.k)
            .map(|k| DVector::from_column_slice(&u[k * p..(k + 1) * p]))
            .collect();
        let taus: Vec<f64> = (0..self.k)
            .map(|k| if free { u[self.tau_at(k)] } else { 0.0 })
            .collect();

        let mut lp = 0.0;
        let mut grad = vec![0.0; self.dim()];

        if let Some(cur) = &self.current {
            let Some((ll, g)) = glm_eval(&self.model, &betas[0], taus[0].exp(), cur) else {
                return neg_inf(self.dim());
            };
            lp += ll;
            for j in 0..p {
                grad[j] += g[j];
            }
            if free {
                grad[self.tau_at(0)] += g[p];
            }
        }

        // per-row component log densities on the stacked historical data
        let mut rows = Vec::with_capacity(self.k);
        for k in 0..self.k {
            match glm::log_likelihood_rows(self.model.family, self.model.link, &betas[k], taus[k].exp(), &self.historical) {
                Ok(r) if r.iter().all(|v| v.is_finite()) => rows.push(r),
                _ => return neg_inf(self.dim()),
            }
        }
        // log-sum-exp mixture term and posterior membership weights
        let mut weights = vec![vec![0.0; n0]; self.k];
        let mut comp_resp = vec![0.0; self.k]; // sum_i w_ik / gamma_k
        for i in 0..n0 {
            let terms: Vec<f64> = (0..self.k).map(|k| simplex.log_gamma[k] + rows[k][i]).collect();
            let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if m == f64::NEG_INFINITY {
                return neg_inf(self.dim());
            }
            let lse = m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln();
            lp += lse;
            for k in 0..self.k {
                weights[k][i] = (terms[k] - lse).exp();
                comp_resp[k] += (rows[k][i] - lse).exp();
            }
        }
        for k in 0..self.k {
            let Ok(g) = glm::weighted_log_likelihood_grad(
                self.model.family,
                self.model.link,
                &betas[k],
                taus[k].exp(),
                &self.historical,
                Some(&weights[k]),
            ) else {
                return neg_inf(self.dim());
            };
            for j in 0..p {
                grad[k * p + j] += g[j];
            }
            if free {
                grad[self.tau_at(k)] += g[p];
            }
        }

        // Dirichlet density on gamma plus the stick-breaking Jacobian
        lp += ln_dirichlet(&simplex.log_gamma, &self.prob_conc) + simplex.log_jac;
        for k in 0..self.k {
            let mut s = comp_resp[k];
            if self.prob_conc[k] != 1.0 {
                s += (self.prob_conc[k] - 1.0) * (-simplex.log_gamma[k]).exp();
            }
            for (m, d) in simplex.dgamma_du[k].iter().enumerate() {
                grad[self.gamma_base() + m] += s * d;
            }
        }
        for (m, d) in simplex.dlogjac_du.iter().enumerate() {
            grad[self.gamma_base() + m] += d;
        }

        // i.i.d. initial priors on every component's parameter set
        for k in 0..self.k {
            for j in 0..p {
                let (m0, s0) = (self.hyper.mu0[j], self.hyper.sigma0[j]);
                lp += ln_normal(betas[k][j], m0, s0);
                grad[k * p + j] += -(betas[k][j] - m0) / (s0 * s0);
            }
            if free {
                let (v, g) = half_normal_on_exp(taus[k], self.hyper.alpha0, self.hyper.gamma0);
                lp += v;
                grad[self.tau_at(k)] += g;
            }
        }
        if !lp.is_finite() {
            return neg_inf(self.dim());
        }
        (lp, grad)
    }

    fn names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for k in 1..=self.k {
            for c in &self.model.coef_names {
                names.push(if k == 1 { c.clone() } else { format!("{c}_comp_{k}") });
            }
        }
        if self.model.dispersion_free() {
            for k in 1..=self.k {
                names.push(if k == 1 { "phi".into() } else { format!("phi_comp_{k}") });
            }
        }
        for k in 1..=self.k {
            names.push(format!("gamma_{k}"));
        }
        names
    }

    fn constrain(&self, u: &[f64]) -> Vec<f64> {
        let base = self.gamma_base();
        let mut out = u[..self.k * self.model.p()].to_vec();
        if self.model.dispersion_free() {
            out.extend(u[self.k * self.model.p()..base].iter().map(|t| t.exp()));
        }
        out.extend(stick_breaking(&u[base..]).gamma);
        out
    }
}

/// LEAP log density on the natural scale: current likelihood at the first
/// component, mixture likelihood of the stacked historical data, Dirichlet
/// density on the simplex, and the initial priors on each component. No
/// transform Jacobians.
#[allow(clippy::too_many_arguments)]
pub fn leap_log_density(
    model: &ModelSpec,
    betas: &[DVector<f64>],
    phis: &[f64],
    gamma: &[f64],
    current: Option<&Dataset>,
    historical: &Dataset,
    prob_conc: &[f64],
    hyper: &InitialPriorHyper,
) -> Result<f64> {
    let k = betas.len();
    if k < 2 {
        return Err(Error::Spec("LEAP requires at least two mixture components".into()));
    }
    if phis.len() != k || gamma.len() != k || prob_conc.len() != k {
        return Err(Error::Shape("component counts do not agree".into()));
    }
    hyper.validate(model.p())?;
    let mut lp = 0.0;
    if let Some(cur) = current {
        lp += glm::log_likelihood(model.family, model.link, &betas[0], phis[0], cur)?;
    }
    let rows: Vec<Vec<f64>> = betas
        .iter()
        .zip(phis)
        .map(|(b, &phi)| glm::log_likelihood_rows(model.family, model.link, b, phi, historical))
        .collect::<Result<_>>()?;
    for i in 0..historical.n() {
        let terms: Vec<f64> = (0..k).map(|c| gamma[c].ln() + rows[c][i]).collect();
        let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        lp += m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln();
    }
    let log_gamma: Vec<f64> = gamma.iter().map(|g| g.ln()).collect();
    lp += ln_dirichlet(&log_gamma, prob_conc);
    for (b, &phi) in betas.iter().zip(phis) {
        for j in 0..model.p() {
            lp += ln_normal(b[j], hyper.mu0[j], hyper.sigma0[j]);
        }
        if model.dispersion_free() {
            lp += ln_half_normal(phi, hyper.alpha0, hyper.gamma0);
        }
    }
    Ok(lp)
}
