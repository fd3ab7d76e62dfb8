//! Normalized asymptotic power prior: a multivariate normal built from the
//! historical MLE and expected Fisher information in (beta, tau) coordinates,
//! scaled by the discounting parameter, normalized in closed form.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::glm::{Dataset, MleFit};
use crate::model::ModelSpec;
use crate::transforms::logit_constrain;

use super::{glm_eval, ln_beta_pdf_from_logs, neg_inf, LogTarget};

/// Per-historical-dataset pieces of the asymptotic normal.
struct NormalKernel {
    theta_hat: DVector<f64>,
    info: DMatrix<f64>,
    half_log_det_info: f64,
}

impl NormalKernel {
    fn from_fit(fit: &MleFit) -> Result<Self> {
        let chol = fit
            .info
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Singular("historical Fisher information is singular".into()))?;
        let half_log_det_info: f64 = chol.l().diagonal().iter().map(|d| d.ln()).sum();
        let mut theta_hat = fit.beta_hat.iter().copied().collect::<Vec<_>>();
        if fit.info.nrows() == fit.beta_hat.len() + 1 {
            theta_hat.push(fit.phi_hat.ln());
        }
        Ok(NormalKernel {
            theta_hat: DVector::from_vec(theta_hat),
            info: fit.info.clone(),
            half_log_det_info,
        })
    }

    /// log N(theta | theta_hat, a^{-1} I^{-1}) and its theta-gradient.
    fn log_density(&self, theta: &DVector<f64>, a: f64) -> (f64, DVector<f64>) {
        let d = self.theta_hat.len() as f64;
        let diff = theta - &self.theta_hat;
        let i_diff = &self.info * &diff;
        let quad = diff.dot(&i_diff);
        let lp = -0.5 * d * (2.0 * std::f64::consts::PI).ln() + self.half_log_det_info
            + 0.5 * d * a.ln()
            - 0.5 * a * quad;
        (lp, -a * i_diff)
    }
}

pub struct NappTarget {
    model: ModelSpec,
    current: Option<Dataset>,
    kernels: Vec<NormalKernel>,
    a0_shape1: f64,
    a0_shape2: f64,
}

impl NappTarget {
    pub fn new(
        model: ModelSpec,
        current: Option<Dataset>,
        fits: Vec<MleFit>,
        a0_shape1: f64,
        a0_shape2: f64,
    ) -> Result<Self> {
        if a0_shape1 <= 0.0 || a0_shape2 <= 0.0 {
            return Err(Error::Spec("beta prior shapes must be positive".into()));
        }
        let dim_theta = model.p() + usize::from(model.dispersion_free());
        let kernels = fits
            .iter()
            .map(NormalKernel::from_fit)
            .collect::<Result<Vec<_>>>()?;
        if kernels.iter().any(|k| k.theta_hat.len() != dim_theta) {
            return Err(Error::Shape("MLE fit dimension does not match the model".into()));
        }
        Ok(NappTarget { model, current, kernels, a0_shape1, a0_shape2 })
    }

    fn dim_theta(&self) -> usize {
        self.model.p() + usize::from(self.model.dispersion_free())
    }
}

impl LogTarget for NappTarget {
    fn dim(&self) -> usize {
        self.dim_theta() + self.kernels.len()
    }

    fn log_density_grad(&self, u: &[f64]) -> (f64, Vec<f64>) {
        let p = self.model.p();
        let dt = self.dim_theta();
        let theta = DVector::from_column_slice(&u[..dt]);
        let beta = DVector::from_column_slice(&u[..p]);
        let phi = if self.model.dispersion_free() { u[p].exp() } else { 1.0 };

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

        for (h, kernel) in self.kernels.iter().enumerate() {
            let uh = u[dt + h];
            let (a, log_jac, djac) = logit_constrain(uh);
            let (lk, gk) = kernel.log_density(&theta, a);
            lp += lk;
            for j in 0..dt {
                grad[j] += gk[j];
            }
            let log_a = -crate::transforms::softplus(-uh);
            let log_1ma = -crate::transforms::softplus(uh);
            lp += ln_beta_pdf_from_logs(log_a, log_1ma, self.a0_shape1, self.a0_shape2) + log_jac;
            let diff = &theta - &kernel.theta_hat;
            let quad = diff.dot(&(&kernel.info * &diff));
            let d = kernel.theta_hat.len() as f64;
            grad[dt + h] += (0.5 * d / a - 0.5 * quad) * a * (1.0 - a)
                + (self.a0_shape1 - 1.0) * (1.0 - a)
                - (self.a0_shape2 - 1.0) * a
                + djac;
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
        for h in 0..self.kernels.len() {
            names.push(format!("a0_hist_{}", h + 1));
        }
        names
    }

    fn constrain(&self, u: &[f64]) -> Vec<f64> {
        let p = self.model.p();
        let dt = self.dim_theta();
        let mut out = u[..p].to_vec();
        if self.model.dispersion_free() {
            out.push(u[p].exp());
        }
        for h in 0..self.kernels.len() {
            out.push(logit_constrain(u[dt + h]).0);
        }
        out
    }
}

/// Sum over historical data sets of the asymptotic normal log density plus
/// the beta prior density on each fixed discounting parameter.
pub fn napp_log_density(
    theta: &DVector<f64>,
    a0: &[f64],
    fits: &[MleFit],
    a0_shape1: f64,
    a0_shape2: f64,
) -> Result<f64> {
    if a0.len() != fits.len() {
        return Err(Error::Shape("one a0 per historical fit required".into()));
    }
    let mut lp = 0.0;
    for (fit, &a) in fits.iter().zip(a0) {
        if !(0.0 < a && a <= 1.0) {
            return Err(Error::Domain("a0 must lie in (0, 1]".into()));
        }
        let kernel = NormalKernel::from_fit(fit)?;
        lp += kernel.log_density(theta, a).0;
        lp += ln_beta_pdf_from_logs(a.ln(), (-a).ln_1p(), a0_shape1, a0_shape2);
    }
    Ok(lp)
}
