//! Commensurate prior: historical data sets share one coefficient vector
//! beta0; each current coefficient is normal around its historical
//! counterpart with precision tau_j, and the tau_j carry a smooth
//! spike-and-slab half-normal mixture (no discrete indicator).

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::glm::Dataset;
use crate::model::ModelSpec;

use super::{glm_eval, half_normal_on_exp, ln_half_normal, ln_normal, neg_inf, CpHyper, LogTarget};

/// Log density of the two-component half-normal mixture at tau > 0 and the
/// derivative of the log density with respect to tau.
pub(crate) fn spike_slab_ln_density(tau: f64, hy: &CpHyper) -> (f64, f64) {
    let l_spike = if hy.p_spike > 0.0 {
        hy.p_spike.ln() + ln_half_normal(tau, hy.spike_mean, hy.spike_sd)
    } else {
        f64::NEG_INFINITY
    };
    let l_slab = if hy.p_spike < 1.0 {
        (1.0 - hy.p_spike).ln() + ln_half_normal(tau, hy.slab_mean, hy.slab_sd)
    } else {
        f64::NEG_INFINITY
    };
    let m = l_spike.max(l_slab);
    if m == f64::NEG_INFINITY {
        return (f64::NEG_INFINITY, 0.0);
    }
    let value = m + ((l_spike - m).exp() + (l_slab - m).exp()).ln();
    let w_spike = (l_spike - value).exp();
    let w_slab = (l_slab - value).exp();
    let dln = w_spike * (-(tau - hy.spike_mean) / (hy.spike_sd * hy.spike_sd))
        + w_slab * (-(tau - hy.slab_mean) / (hy.slab_sd * hy.slab_sd));
    (value, dln)
}

pub struct CpTarget {
    model: ModelSpec,
    current: Option<Dataset>,
    historical: Vec<Dataset>,
    hyper: CpHyper,
}

impl CpTarget {
    pub fn new(
        model: ModelSpec,
        current: Option<Dataset>,
        historical: Vec<Dataset>,
        hyper: CpHyper,
    ) -> Result<Self> {
        if historical.is_empty() {
            return Err(Error::Spec("commensurate prior requires historical data".into()));
        }
        if !(0.0..=1.0).contains(&hyper.p_spike) {
            return Err(Error::Spec("p_spike must lie in [0, 1]".into()));
        }
        for s in [hyper.spike_sd, hyper.slab_sd, hyper.beta0_sd, hyper.disp_sd, hyper.hist_disp_sd] {
            if s <= 0.0 {
                return Err(Error::Spec("commensurate prior scales must be positive".into()));
            }
        }
        Ok(CpTarget { model, current, historical, hyper })
    }

    /// [beta(p), beta0(p), ln tau(p), tau_phi?, tau_phi0(H)?]
    fn n_free_disp(&self) -> usize {
        if self.model.dispersion_free() {
            1 + self.historical.len()
        } else {
            0
        }
    }
}

impl LogTarget for CpTarget {
    fn dim(&self) -> usize {
        3 * self.model.p() + self.n_free_disp()
    }

    fn log_density_grad(&self, u: &[f64]) -> (f64, Vec<f64>) {
        let p = self.model.p();
        let hy = &self.hyper;
        let free = self.model.dispersion_free();
        let beta = DVector::from_column_slice(&u[..p]);
        let beta0 = DVector::from_column_slice(&u[p..2 * p]);

        let mut lp = 0.0;
        let mut grad = vec![0.0; self.dim()];

        if let Some(cur) = &self.current {
            let phi = if free { u[3 * p].exp() } else { 1.0 };
            let Some((ll, g)) = glm_eval(&self.model, &beta, phi, cur) else {
                return neg_inf(self.dim());
            };
            lp += ll;
            for j in 0..p {
                grad[j] += g[j];
            }
            if free {
                grad[3 * p] += g[p];
            }
        }
        for (h, data) in self.historical.iter().enumerate() {
            let t = 3 * p + 1 + h;
            let phi = if free { u[t].exp() } else { 1.0 };
            let Some((ll, g)) = glm_eval(&self.model, &beta0, phi, data) else {
                return neg_inf(self.dim());
            };
            lp += ll;
            for j in 0..p {
                grad[p + j] += g[j];
            }
            if free {
                grad[t] += g[p];
            }
        }

        for j in 0..p {
            let tau = u[2 * p + j].exp();
            let diff = beta[j] - beta0[j];
            // beta_j | beta0_j, tau_j ~ N(beta0_j, 1/tau_j)
            lp += ln_normal(beta[j], beta0[j], tau.sqrt().recip());
            grad[j] += -tau * diff;
            grad[p + j] += tau * diff;
            grad[2 * p + j] += 0.5 - 0.5 * tau * diff * diff;
            // spike-and-slab mixture on tau_j, plus the exp Jacobian
            let (v, dln) = spike_slab_ln_density(tau, hy);
            lp += v + u[2 * p + j];
            grad[2 * p + j] += tau * dln + 1.0;
            // vague prior on the shared historical coefficients
            lp += ln_normal(beta0[j], hy.beta0_mean, hy.beta0_sd);
            grad[p + j] += -(beta0[j] - hy.beta0_mean) / (hy.beta0_sd * hy.beta0_sd);
        }
        if free {
            let (v, g) = half_normal_on_exp(u[3 * p], hy.disp_mean, hy.disp_sd);
            lp += v;
            grad[3 * p] += g;
            for h in 0..self.historical.len() {
                let (v, g) = half_normal_on_exp(u[3 * p + 1 + h], hy.hist_disp_mean, hy.hist_disp_sd);
                lp += v;
                grad[3 * p + 1 + h] += g;
            }
        }
        if !lp.is_finite() {
            return neg_inf(self.dim());
        }
        (lp, grad)
    }

    fn names(&self) -> Vec<String> {
        let mut names = self.model.coef_names.clone();
        names.extend(self.model.coef_names.iter().map(|c| format!("{c}_hist")));
        names.extend(self.model.coef_names.iter().map(|c| format!("comm_{c}")));
        if self.model.dispersion_free() {
            names.push("phi".into());
            for h in 1..=self.historical.len() {
                names.push(format!("phi_hist_{h}"));
            }
        }
        names
    }

    fn constrain(&self, u: &[f64]) -> Vec<f64> {
        let p = self.model.p();
        let mut out = u[..2 * p].to_vec();
        out.extend(u[2 * p..3 * p].iter().map(|t| t.exp()));
        if self.model.dispersion_free() {
            out.extend(u[3 * p..].iter().map(|t| t.exp()));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glm::{Family, Link, Role};
    use crate::priors::testutil::check_gradient;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use rand::prelude::*;

    fn toy(seed: u64, n: usize, role: Role, gaussian: bool) -> Dataset {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, 2, |_, j| if j == 0 { 1.0 } else { rng.gen_range(-1.0..1.0) });
        let y = DVector::from_fn(n, |_, _| {
            if gaussian {
                rng.gen_range(-1.0..1.0)
            } else {
                f64::from(rng.gen_bool(0.5))
            }
        });
        Dataset::new(y, x, None, role).unwrap()
    }

    #[test]
    fn p_spike_one_collapses_to_spike() {
        let hy = CpHyper { p_spike: 1.0, ..CpHyper::default() };
        let (v, _) = spike_slab_ln_density(3.0, &hy);
        assert_relative_eq!(v, ln_half_normal(3.0, 200.0, 0.1), epsilon = 1e-12);
    }

    #[test]
    fn spike_dominates_at_its_center() {
        let hy = CpHyper::default();
        let (v, _) = spike_slab_ln_density(200.0, &hy);
        // slab contribution exp(-800) is far below machine precision
        assert_relative_eq!(v, 0.1f64.ln() + ln_half_normal(200.0, 200.0, 0.1), epsilon = 1e-12);
    }

    #[test]
    fn conditional_on_beta_is_normal_pdf() {
        // without current data beta enters only through its conditional prior
        let hist = toy(1, 12, Role::Historical(1), false);
        let t = CpTarget::new(
            ModelSpec::unnamed(Family::Binomial, Link::Logit, 2),
            None,
            vec![hist],
            CpHyper::default(),
        )
        .unwrap();
        let base = vec![0.1, -0.3, 0.4, 0.2, -0.5, 0.7];
        let mut moved = base.clone();
        moved[0] = 1.1;
        let (l0, _) = t.log_density_grad(&base);
        let (l1, _) = t.log_density_grad(&moved);
        let tau = (-0.5f64).exp();
        let sd = tau.sqrt().recip();
        let want = ln_normal(1.1, 0.4, sd) - ln_normal(0.1, 0.4, sd);
        assert_relative_eq!(l1 - l0, want, epsilon = 1e-10);
    }

    #[test]
    fn gradients_match_fd() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for gaussian in [true, false] {
            let cur = toy(3, 15, Role::Current, gaussian);
            let hist = toy(4, 12, Role::Historical(1), gaussian);
            let (family, link) = if gaussian {
                (Family::Gaussian, Link::Identity)
            } else {
                (Family::Binomial, Link::Logit)
            };
            let t = CpTarget::new(ModelSpec::unnamed(family, link, 2), Some(cur), vec![hist], CpHyper::default()).unwrap();
            for _ in 0..20 {
                let u: Vec<f64> = (0..t.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                check_gradient(&t, &u, 1e-5);
            }
        }
    }
}
