//! Bayesian hierarchical model: current and historical coefficients drawn
//! around shared meta-analytic means with half-normal meta-SDs. Coefficients
//! are sampled non-centered (beta = mu + sigma * z) to avoid the funnel at
//! small sigma; constrained output is reported on the natural scale.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::glm::Dataset;
use crate::model::ModelSpec;

use super::{glm_eval, half_normal_on_exp, ln_normal, neg_inf, BhmHyper, LogTarget};

pub struct BhmTarget {
    model: ModelSpec,
    current: Option<Dataset>,
    historical: Vec<Dataset>,
    hyper: BhmHyper,
}

/// Index layout over the unconstrained vector:
/// [mu(p), lsig(p), z(p)?, z0_1(p), .., z0_H(p), tau?, tau0_1.., tau0_H]
/// where the z and tau blocks for the current data set are present only when
/// a current data set is attached.
struct Layout {
    p: usize,
    h: usize,
    has_current: bool,
    free: bool,
}

impl Layout {
    fn mu(&self, j: usize) -> usize {
        j
    }
    fn lsig(&self, j: usize) -> usize {
        self.p + j
    }
    fn z(&self, j: usize) -> usize {
        2 * self.p + j
    }
    fn z0(&self, h: usize, j: usize) -> usize {
        (2 + usize::from(self.has_current) + h) * self.p + j
    }
    fn tau(&self) -> usize {
        (2 + usize::from(self.has_current) + self.h) * self.p
    }
    fn tau0(&self, h: usize) -> usize {
        self.tau() + usize::from(self.has_current) + h
    }
    fn dim(&self) -> usize {
        let blocks = 2 + usize::from(self.has_current) + self.h;
        blocks * self.p + usize::from(self.free) * (usize::from(self.has_current) + self.h)
    }
}

impl BhmTarget {
    pub fn new(
        model: ModelSpec,
        current: Option<Dataset>,
        historical: Vec<Dataset>,
        hyper: BhmHyper,
    ) -> Result<Self> {
        if historical.is_empty() {
            return Err(Error::Spec("hierarchical model requires historical data".into()));
        }
        let p = model.p();
        if current.as_ref().map_or(false, |d| d.p() != p)
            || historical.iter().any(|d| d.p() != p)
        {
            return Err(Error::Shape("design-matrix width does not match the model".into()));
        }
        for s in [hyper.meta_mean_sd, hyper.meta_sd_sd, hyper.disp_sd, hyper.hist_disp_sd] {
            if s <= 0.0 {
                return Err(Error::Spec("hierarchical prior scales must be positive".into()));
            }
        }
        Ok(BhmTarget { model, current, historical, hyper })
    }

    fn layout(&self) -> Layout {
        Layout {
            p: self.model.p(),
            h: self.historical.len(),
            has_current: self.current.is_some(),
            free: self.model.dispersion_free(),
        }
    }

    fn coef(&self, u: &[f64], lay: &Layout, z_at: impl Fn(usize) -> usize) -> DVector<f64> {
        DVector::from_fn(lay.p, |j, _| u[lay.mu(j)] + u[lay.lsig(j)].exp() * u[z_at(j)])
    }
}

impl LogTarget for BhmTarget {
    fn dim(&self) -> usize {
        self.layout().dim()
    }

    fn log_density_grad(&self, u: &[f64]) -> (f64, Vec<f64>) {
        let lay = self.layout();
        let p = lay.p;
        let hy = &self.hyper;
        let mut lp = 0.0;
        let mut grad = vec![0.0; lay.dim()];

        // one likelihood term per attached data set, gradient chained through
        // beta = mu + sigma * z
        let add_block = |lp: &mut f64,
                             grad: &mut [f64],
                             data: &Dataset,
                             z_at: &dyn Fn(usize) -> usize,
                             tau_at: Option<usize>|
         -> bool {
            let beta = DVector::from_fn(p, |j, _| u[lay.mu(j)] + u[lay.lsig(j)].exp() * u[z_at(j)]);
            let phi = tau_at.map_or(1.0, |t| u[t].exp());
            let Some((ll, g)) = glm_eval(&self.model, &beta, phi, data) else {
                return false;
            };
            *lp += ll;
            for j in 0..p {
                let sigma = u[lay.lsig(j)].exp();
                grad[lay.mu(j)] += g[j];
                grad[lay.lsig(j)] += sigma * u[z_at(j)] * g[j];
                grad[z_at(j)] += sigma * g[j];
            }
            if let Some(t) = tau_at {
                grad[t] += g[p];
            }
            true
        };

        if let Some(cur) = &self.current {
            let tau_at = lay.free.then(|| lay.tau());
            if !add_block(&mut lp, &mut grad, cur, &|j| lay.z(j), tau_at) {
                return neg_inf(lay.dim());
            }
        }
        for (h, data) in self.historical.iter().enumerate() {
            let tau_at = lay.free.then(|| lay.tau0(h));
            if !add_block(&mut lp, &mut grad, data, &|j| lay.z0(h, j), tau_at) {
                return neg_inf(lay.dim());
            }
        }

        // hierarchy priors
        for j in 0..p {
            let mu = u[lay.mu(j)];
            lp += ln_normal(mu, hy.meta_mean_mean, hy.meta_mean_sd);
            grad[lay.mu(j)] += -(mu - hy.meta_mean_mean) / (hy.meta_mean_sd * hy.meta_mean_sd);
            let (v, g) = half_normal_on_exp(u[lay.lsig(j)], hy.meta_sd_mean, hy.meta_sd_sd);
            lp += v;
            grad[lay.lsig(j)] += g;
            if lay.has_current {
                let z = u[lay.z(j)];
                lp += ln_normal(z, 0.0, 1.0);
                grad[lay.z(j)] += -z;
            }
            for h in 0..lay.h {
                let z = u[lay.z0(h, j)];
                lp += ln_normal(z, 0.0, 1.0);
                grad[lay.z0(h, j)] += -z;
            }
        }
        if lay.free {
            if lay.has_current {
                let (v, g) = half_normal_on_exp(u[lay.tau()], hy.disp_mean, hy.disp_sd);
                lp += v;
                grad[lay.tau()] += g;
            }
            for h in 0..lay.h {
                let (v, g) = half_normal_on_exp(u[lay.tau0(h)], hy.hist_disp_mean, hy.hist_disp_sd);
                lp += v;
                grad[lay.tau0(h)] += g;
            }
        }
        if !lp.is_finite() {
            return neg_inf(lay.dim());
        }
        (lp, grad)
    }

    fn names(&self) -> Vec<String> {
        let lay = self.layout();
        let mut names = Vec::new();
        if lay.has_current {
            names.extend(self.model.coef_names.iter().cloned());
            if lay.free {
                names.push("phi".into());
            }
        }
        for h in 1..=lay.h {
            for c in &self.model.coef_names {
                names.push(format!("{c}_hist_{h}"));
            }
            if lay.free {
                names.push(format!("phi_hist_{h}"));
            }
        }
        for c in &self.model.coef_names {
            names.push(format!("meta_mean_{c}"));
        }
        for c in &self.model.coef_names {
            names.push(format!("meta_sd_{c}"));
        }
        names
    }

    fn constrain(&self, u: &[f64]) -> Vec<f64> {
        let lay = self.layout();
        let mut out = Vec::new();
        if lay.has_current {
            out.extend(self.coef(u, &lay, |j| lay.z(j)).iter().copied());
            if lay.free {
                out.push(u[lay.tau()].exp());
            }
        }
        for h in 0..lay.h {
            out.extend(self.coef(u, &lay, |j| lay.z0(h, j)).iter().copied());
            if lay.free {
                out.push(u[lay.tau0(h)].exp());
            }
        }
        for j in 0..lay.p {
            out.push(u[lay.mu(j)]);
        }
        for j in 0..lay.p {
            out.push(u[lay.lsig(j)].exp());
        }
        out
    }
}
