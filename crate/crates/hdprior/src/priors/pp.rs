//! Power-prior target: current likelihood plus discounted historical
//! likelihoods and the vague initial prior. With no historical data sets this
//! is the initial-prior target; without a current data set it is the
//! power-prior kernel itself (used for prior normalizing constants).

use nalgebra::DVector;

use crate::error::Result;
use crate::glm::Dataset;
use crate::model::ModelSpec;

use super::{glm_eval, half_normal_on_exp, ln_normal, neg_inf, InitialPriorHyper, LogTarget};
use crate::error::Error;

pub struct PpTarget {
    model: ModelSpec,
    current: Option<Dataset>,
    historical: Vec<(Dataset, f64)>,
    hyper: InitialPriorHyper,
}

impl PpTarget {
    pub fn new(
        model: ModelSpec,
        current: Option<Dataset>,
        historical: Vec<(Dataset, f64)>,
        hyper: InitialPriorHyper,
    ) -> Result<Self> {
        hyper.validate(model.p())?;
        if historical.iter().any(|&(_, a)| !(0.0..=1.0).contains(&a)) {
            return Err(Error::Spec("discounting parameters must lie in [0, 1]".into()));
        }
        Ok(PpTarget { model, current, historical, hyper })
    }
}

impl LogTarget for PpTarget {
    fn dim(&self) -> usize {
        self.model.p() + usize::from(self.model.dispersion_free())
    }

    fn log_density_grad(&self, u: &[f64]) -> (f64, Vec<f64>) {
        let p = self.model.p();
        let free = self.model.dispersion_free();
        let beta = DVector::from_column_slice(&u[..p]);
        let tau = if free { u[p] } else { 0.0 };
        let phi = tau.exp();

        let mut lp = 0.0;
        let mut grad = vec![0.0; self.dim()];

        let add_data = |lp: &mut f64, grad: &mut [f64], data: &Dataset, w: f64| -> bool {
            if w == 0.0 {
                return true;
            }
            let Some((ll, g)) = glm_eval(&self.model, &beta, phi, data) else {
                return false;
            };
            *lp += w * ll;
            for j in 0..g.len() {
                grad[j] += w * g[j];
            }
            true
        };

        if let Some(cur) = &self.current {
            if !add_data(&mut lp, &mut grad, cur, 1.0) {
                return neg_inf(self.dim());
            }
        }
        for (data, a0) in &self.historical {
            if !add_data(&mut lp, &mut grad, data, *a0) {
                return neg_inf(self.dim());
            }
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
        names
    }

    fn constrain(&self, u: &[f64]) -> Vec<f64> {
        let p = self.model.p();
        let mut out = u[..p].to_vec();
        if self.model.dispersion_free() {
            out.push(u[p].exp());
        }
        out
    }
}

/// Power-prior kernel: discounted historical log-likelihoods plus the log
/// initial prior (half-normal normalization included), without current data.
pub fn pp_log_kernel(
    model: &ModelSpec,
    beta: &DVector<f64>,
    tau: f64,
    a0: &[f64],
    historical: &[Dataset],
    hyper: &InitialPriorHyper,
) -> Result<f64> {
    let weighted = historical.iter().cloned().zip(a0.iter().copied()).collect();
    let target = PpTarget::new(model.clone(), None, weighted, hyper.clone())?;
    let mut u = beta.iter().copied().collect::<Vec<_>>();
    if model.dispersion_free() {
        u.push(tau);
    }
    // kernel is stated on (beta, phi): remove the tau-Jacobian the target adds
    let (lp, _) = target.log_density_grad(&u);
    Ok(if model.dispersion_free() { lp - tau } else { lp })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glm::{Family, Link, Role};
    use crate::priors::testutil::check_gradient;
    use crate::priors::{ln_half_normal, ln_normal};
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use rand::prelude::*;

    fn toy_data(seed: u64, n: usize, role: Role) -> Dataset {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, 2, |_, j| if j == 0 { 1.0 } else { rng.gen_range(-1.0..1.0) });
        let y = DVector::from_fn(n, |_, _| f64::from(rng.gen_bool(0.4)));
        Dataset::new(y, x, None, role).unwrap()
    }

    fn model() -> ModelSpec {
        ModelSpec::unnamed(Family::Binomial, Link::Logit, 2)
    }

    #[test]
    fn kernel_at_zero_matches_direct_density() {
        let hist = toy_data(1, 12, Role::Historical(1));
        let m = ModelSpec::unnamed(Family::Gaussian, Link::Identity, 2);
        let hyper = InitialPriorHyper::default_for(2);
        let beta = DVector::zeros(2);
        let got = pp_log_kernel(&m, &beta, 0.0, &[0.0], std::slice::from_ref(&hist), &hyper).unwrap();
        let want = 2.0 * ln_normal(0.0, 0.0, 10.0) + ln_half_normal(1.0, 0.0, 10.0);
        assert_relative_eq!(got, want, epsilon = 1e-12);
    }

    #[test]
    fn half_normal_factor_is_twice_normal() {
        assert_relative_eq!(
            ln_half_normal(1.0, 0.0, 10.0),
            2f64.ln() + ln_normal(1.0, 0.0, 10.0),
            epsilon = 1e-12
        );
    }

    #[test]
    fn kernel_linear_in_a0() {
        let hist = toy_data(2, 10, Role::Historical(1));
        let m = model();
        let hyper = InitialPriorHyper::default_for(2);
        let beta = DVector::from_row_slice(&[0.3, -0.2]);
        let hs = std::slice::from_ref(&hist);
        let k0 = pp_log_kernel(&m, &beta, 0.0, &[0.0], hs, &hyper).unwrap();
        let k1 = pp_log_kernel(&m, &beta, 0.0, &[1.0], hs, &hyper).unwrap();
        let kh = pp_log_kernel(&m, &beta, 0.0, &[0.5], hs, &hyper).unwrap();
        assert_relative_eq!(kh, 0.5 * (k0 + k1), epsilon = 1e-10);
    }

    #[test]
    fn a0_zero_equals_initial_target() {
        let cur = toy_data(3, 15, Role::Current);
        let hist = toy_data(4, 20, Role::Historical(1));
        let hyper = InitialPriorHyper::default_for(2);
        let initial = PpTarget::new(model(), Some(cur.clone()), Vec::new(), hyper.clone()).unwrap();
        let pp = PpTarget::new(model(), Some(cur), vec![(hist, 0.0)], hyper).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let u: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let (a, _) = initial.log_density_grad(&u);
            let (b, _) = pp.log_density_grad(&u);
            assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn a0_one_equals_pooled_initial_target() {
        let cur = toy_data(6, 15, Role::Current);
        let hist = toy_data(7, 20, Role::Historical(1));
        let pooled = Dataset::stack(&[&cur, &hist], Role::Current).unwrap();
        let hyper = InitialPriorHyper::default_for(2);
        let pp = PpTarget::new(model(), Some(cur), vec![(hist, 1.0)], hyper.clone()).unwrap();
        let initial_pooled = PpTarget::new(model(), Some(pooled), Vec::new(), hyper).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let u: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let (a, _) = pp.log_density_grad(&u);
            let (b, _) = initial_pooled.log_density_grad(&u);
            assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn gradient_matches_fd() {
        let cur = toy_data(9, 10, Role::Current);
        let hist = toy_data(10, 14, Role::Historical(1));
        let pp = PpTarget::new(model(), Some(cur), vec![(hist, 0.4)], InitialPriorHyper::default_for(2)).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let u: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.5..1.5)).collect();
            check_gradient(&pp, &u, 1e-5);
        }
    }
}
