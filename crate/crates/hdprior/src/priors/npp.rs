//! Normalized power prior: random discounting parameters on the logit scale,
//! with the per-dataset log normalizing constant looked up by linear
//! interpolation over a precomputed grid.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::glm::Dataset;
use crate::model::ModelSpec;
use crate::smooth::Interpolant;
use crate::transforms::logit_constrain;

use super::{glm_eval, half_normal_on_exp, ln_beta_pdf_from_logs, ln_normal, neg_inf, InitialPriorHyper, LogTarget};

pub struct NppTarget {
    model: ModelSpec,
    current: Option<Dataset>,
    historical: Vec<Dataset>,
    lognc: Vec<Interpolant>,
    a0_shape1: f64,
    a0_shape2: f64,
    hyper: InitialPriorHyper,
}

impl NppTarget {
    pub fn new(
        model: ModelSpec,
        current: Option<Dataset>,
        historical: Vec<Dataset>,
        lognc: Vec<Interpolant>,
        a0_shape1: f64,
        a0_shape2: f64,
        hyper: InitialPriorHyper,
    ) -> Result<Self> {
        hyper.validate(model.p())?;
        if a0_shape1 <= 0.0 || a0_shape2 <= 0.0 {
            return Err(Error::Spec("beta prior shapes must be positive".into()));
        }
        if lognc.len() != historical.len() {
            return Err(Error::Spec(
                "one normalizing-constant grid per historical data set required".into(),
            ));
        }
        for itp in &lognc {
            let knots = itp.knots();
            if knots[0] != 0.0 || *knots.last().unwrap() != 1.0 {
                return Err(Error::Spec("lognc grid must cover a0 in [0, 1]".into()));
            }
        }
        Ok(NppTarget {
            model,
            current,
            historical,
            lognc,
            a0_shape1,
            a0_shape2,
            hyper,
        })
    }

    fn n_hist(&self) -> usize {
        self.historical.len()
    }
}

impl LogTarget for NppTarget {
    fn dim(&self) -> usize {
        self.model.p() + usize::from(self.model.dispersion_free()) + self.n_hist()
    }

    fn log_density_grad(&self, u: &[f64]) -> (f64, Vec<f64>) {
        let p = self.model.p();
        let free = self.model.dispersion_free();
        let base = p + usize::from(free);
        let beta = DVector::from_column_slice(&u[..p]);
        let tau = if free { u[p] } else { 0.0 };
        let phi = tau.exp();

        let mut lp = 0.0;
        let mut grad = vec![0.0; self.dim()];

        if let Some(cur) = &self.current {
            let Some((ll, g)) = glm_eval(&self.model, &beta, phi, cur) else {
                return neg_inf(self.dim());
            };
            lp += ll;
            for j in 0..g.len() {
                grad[j] += g[j];
            }
        }

        for (h, data) in self.historical.iter().enumerate() {
            let (a, log_jac, djac) = logit_constrain(u[base + h]);
            let da_du = a * (1.0 - a);
            let Some((ll, g)) = glm_eval(&self.model, &beta, phi, data) else {
                return neg_inf(self.dim());
            };
            let (nc, slope) = match self.lognc[h].eval_with_slope(a) {
                Ok(v) => v,
                Err(_) => return neg_inf(self.dim()),
            };
            lp += a * ll - nc;
            for j in 0..g.len() {
                grad[j] += a * g[j];
            }
            // beta prior on a0 plus the logit Jacobian
            let log_a = -crate::transforms::softplus(-u[base + h]);
            let log_1ma = -crate::transforms::softplus(u[base + h]);
            lp += ln_beta_pdf_from_logs(log_a, log_1ma, self.a0_shape1, self.a0_shape2) + log_jac;
            grad[base + h] += (ll - slope) * da_du
                + (self.a0_shape1 - 1.0) * (1.0 - a)
                - (self.a0_shape2 - 1.0) * a
                + djac;
        }

        for j in 0..p {
            let (m, s) = (self.hyper.mu0[j], self.hyper.sigma0[j]);
            lp += ln_normal(beta[j], m, s);
            grad[j] += -(beta[j] - m) / (s * s);
        }
        if free {
            let (v, g) = half_normal_on_exp(tau, self.hyper.alpha0, self.hyper.gamma0);
            lp += v;
            grad[p] += g;
        }
        if !lp.is_finite() {
            return neg_inf(self.dim());
        }
        (lp, grad)
    }

    fn names(&self) -> Vec<String> {
        let mut names = self.model.coef_names.clone();
        if self.model.dispersion_free() {
            names.push("phi".into());
        }
        for h in 0..self.n_hist() {
            names.push(format!("a0_hist_{}", h + 1));
        }
        names
    }

    fn constrain(&self, u: &[f64]) -> Vec<f64> {
        let p = self.model.p();
        let free = self.model.dispersion_free();
        let base = p + usize::from(free);
        let mut out = u[..p].to_vec();
        if free {
            out.push(u[p].exp());
        }
        for h in 0..self.n_hist() {
            out.push(logit_constrain(u[base + h]).0);
        }
        out
    }
}
