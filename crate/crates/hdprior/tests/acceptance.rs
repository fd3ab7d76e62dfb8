//! Acceptance suite: one test per criterion, each printing a single
//! `criterion N: PASS/FAIL/SKIP` line. Criterion 11 needs externally supplied
//! ACTG CSVs and is skipped (with a note) when `HDPRIOR_ACTG_DIR` is unset.

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Gamma as GammaDist, Poisson, StandardNormal};

use hdprior::cli::a0_half_ratio;
use hdprior::data;
use hdprior::evidence::{
    build_lognc_grid, marginal_likelihood, npp_lognc, rmap_posterior, rmap_weight,
    solve_beta_hyper, bayes_factor,
};
use hdprior::formula::parse_formula;
use hdprior::glm::{fit_mle, log_likelihood, Dataset, Family, Link, MleFit, Role};
use hdprior::model::ModelSpec;
use hdprior::priors::{
    build_target, BhmHyper, BuiltTarget, CpHyper, InitialPriorHyper, LogTarget, PpTarget,
    PriorSpec,
};
use hdprior::sampler::{diagnostics, sample, Draws, SamplerConfig};
use hdprior::smooth::Interpolant;
use hdprior::survival::{
    choose_breaks, expand_poisson, piecewise_exponential_loglik, Breaks, SurvivalRecord,
};

fn criterion(n: usize, desc: &str, f: impl FnOnce() + std::panic::UnwindSafe) {
    match std::panic::catch_unwind(f) {
        Ok(()) => println!("criterion {n}: PASS - {desc}"),
        Err(e) => {
            println!("criterion {n}: FAIL - {desc}");
            std::panic::resume_unwind(e);
        }
    }
}

// ---- shared synthetic data ----

fn gen_dataset(family: Family, n: usize, seed: u64, role: Role) -> Dataset {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut x = DMatrix::zeros(n, 2);
    let mut y = DVector::zeros(n);
    for i in 0..n {
        let xi: f64 = rng.sample(StandardNormal);
        x[(i, 0)] = 1.0;
        x[(i, 1)] = xi;
        let eta = 0.2 + 0.4 * xi;
        y[i] = match family {
            Family::Gaussian => eta + rng.sample::<f64, _>(StandardNormal),
            Family::Binomial => f64::from(rng.gen::<f64>() < 1.0 / (1.0 + (-eta).exp())),
            Family::Poisson => rng.sample(Poisson::new(eta.exp()).unwrap()),
            Family::Gamma => rng.sample(GammaDist::new(2.0, eta.exp() / 2.0).unwrap()),
            Family::InverseGaussian => unreachable!(),
        };
    }
    Dataset::new(y, x, None, role).unwrap()
}

fn model_for(family: Family) -> ModelSpec {
    let link = match family {
        Family::Gaussian => Link::Identity,
        Family::Binomial => Link::Logit,
        _ => Link::Log,
    };
    ModelSpec::unnamed(family, link, 2)
}

fn check_gradient(target: &dyn LogTarget, u: &[f64], tol: f64) {
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
        assert!(
            (grad[j] - fd).abs() / fd.abs().max(1.0) <= tol,
            "coord {j}: analytic {} vs finite difference {fd}",
            grad[j]
        );
    }
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

fn config(chains: usize, warmup: usize, sampling: usize, seed: u64) -> SamplerConfig {
    SamplerConfig { chains, iter_warmup: warmup, iter_sampling: sampling, seed, ..SamplerConfig::default() }
}

fn mcse(draws: &Draws, j: usize, ess: f64) -> f64 {
    let col = draws.param(j);
    let n = col.len() as f64;
    let mean = col.iter().sum::<f64>() / n;
    let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (var / ess).sqrt()
}

#[test]
fn criterion_01_gradient_suite() {
    criterion(1, "prior-target gradients match finite differences", || {
        let families = [Family::Gaussian, Family::Binomial, Family::Poisson, Family::Gamma];
        let knots: Vec<f64> = (0..6).map(|i| i as f64 / 5.0).collect();
        for (fi, &family) in families.iter().enumerate() {
            let model = model_for(family);
            let current = gen_dataset(family, 25, 100 + fi as u64, Role::Current);
            let hist = gen_dataset(family, 25, 200 + fi as u64, Role::Historical(1));
            let data = vec![current, hist];
            let hyper = InitialPriorHyper::default_for(2);
            let lognc_vals: Vec<f64> = knots.iter().map(|a| -3.0 * a + 0.5 * a * a).collect();
            let specs: Vec<PriorSpec> = vec![
                PriorSpec::Initial { hyper: hyper.clone() },
                PriorSpec::Pp { a0: vec![0.5], hyper: hyper.clone() },
                PriorSpec::Npp {
                    a0_shape1: 2.0,
                    a0_shape2: 3.0,
                    lognc: vec![Interpolant::new(knots.clone(), lognc_vals).unwrap()],
                    hyper: hyper.clone(),
                },
                PriorSpec::Napp { a0_shape1: 2.0, a0_shape2: 2.0 },
                PriorSpec::Bhm { hyper: BhmHyper::default() },
                PriorSpec::Cp { hyper: CpHyper::default() },
                PriorSpec::Leap { k: 2, prob_conc: vec![1.0, 1.0], hyper: hyper.clone() },
            ];
            for (si, spec) in specs.iter().enumerate() {
                let BuiltTarget::Single(target) = build_target(spec, &model, &data).unwrap() else {
                    unreachable!()
                };
                let mut rng = ChaCha20Rng::seed_from_u64(900 + (fi * 10 + si) as u64);
                for _ in 0..20 {
                    let u: Vec<f64> =
                        (0..target.dim()).map(|_| rng.gen_range(-0.6..0.6)).collect();
                    check_gradient(target.as_ref(), &u, 1e-5);
                }
            }
        }
    });
}

#[test]
fn criterion_02_a0_endpoint_reductions() {
    criterion(2, "PP(0) equals Initial and PP(1) equals pooled-Initial pointwise", || {
        for (fi, family) in [Family::Gaussian, Family::Binomial].into_iter().enumerate() {
            let model = model_for(family);
            let current = gen_dataset(family, 30, 300 + fi as u64, Role::Current);
            let hist = gen_dataset(family, 20, 400 + fi as u64, Role::Historical(1));
            let hyper = InitialPriorHyper::default_for(2);

            let pp0 = PpTarget::new(
                model.clone(),
                Some(current.clone()),
                vec![(hist.clone(), 0.0)],
                hyper.clone(),
            )
            .unwrap();
            let initial =
                PpTarget::new(model.clone(), Some(current.clone()), Vec::new(), hyper.clone())
                    .unwrap();

            let pooled = Dataset::stack(&[&current, &hist], Role::Current).unwrap();
            let pp1 =
                PpTarget::new(model.clone(), Some(current.clone()), vec![(hist, 1.0)], hyper.clone())
                    .unwrap();
            let pooled_initial =
                PpTarget::new(model.clone(), Some(pooled), Vec::new(), hyper).unwrap();

            let mut rng = ChaCha20Rng::seed_from_u64(7 + fi as u64);
            for _ in 0..50 {
                let u: Vec<f64> = (0..pp0.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let d0 = (pp0.log_density_grad(&u).0 - initial.log_density_grad(&u).0).abs();
                let d1 = (pp1.log_density_grad(&u).0 - pooled_initial.log_density_grad(&u).0).abs();
                assert!(d0 <= 1e-10 && d1 <= 1e-10, "d0={d0} d1={d1}");
            }
        }
    });
}

#[test]
fn criterion_03_conjugate_gaussian_oracle() {
    criterion(3, "PP gaussian posterior and evidence match the conjugate closed form", || {
        let (n, n0, p, a0) = (50usize, 50usize, 3usize, 0.5f64);
        let mut rng = ChaCha20Rng::seed_from_u64(31);
        let mut make = |n: usize, role| {
            let mut x = DMatrix::zeros(n, p);
            let mut y = DVector::zeros(n);
            for i in 0..n {
                x[(i, 0)] = 1.0;
                x[(i, 1)] = rng.sample::<f64, _>(StandardNormal);
                x[(i, 2)] = rng.sample::<f64, _>(StandardNormal);
                y[i] = 0.5 + 0.7 * x[(i, 1)] - 0.4 * x[(i, 2)]
                    + rng.sample::<f64, _>(StandardNormal);
            }
            Dataset::new(y, x, None, role).unwrap()
        };
        let current = make(n, Role::Current);
        let hist = make(n0, Role::Historical(1));

        // weighted normal equations: current weight 1, historical weight a0
        let xtwx = current.x.transpose() * &current.x + (hist.x.transpose() * &hist.x) * a0;
        let xtwy = current.x.transpose() * &current.y + (hist.x.transpose() * &hist.y) * a0;
        let sum_w = n as f64 + a0 * n0 as f64;
        let beta_w = xtwx.clone().try_inverse().unwrap() * &xtwy;
        let ssr = {
            let rc = &current.y - &current.x * &beta_w;
            let rh = &hist.y - &hist.x * &beta_w;
            rc.norm_squared() + a0 * rh.norm_squared()
        };
        let phi_hat = ssr / sum_w;

        // pin the dispersion at its weighted MLE so beta is exactly conjugate
        let sigma0 = 10.0;
        let hyper = InitialPriorHyper {
            mu0: vec![0.0; p],
            sigma0: vec![sigma0; p],
            alpha0: phi_hat,
            gamma0: 0.01,
        };
        let prec_a = &xtwx / phi_hat + DMatrix::identity(p, p) / (sigma0 * sigma0);
        let b = &xtwy / phi_hat;
        let cov = prec_a.clone().try_inverse().unwrap();
        let mean = &cov * &b;

        let spec = PriorSpec::Pp { a0: vec![a0], hyper };
        let data = vec![current.clone(), hist.clone()];
        let model = ModelSpec::unnamed(Family::Gaussian, Link::Identity, p);
        let BuiltTarget::Single(target) = build_target(&spec, &model, &data).unwrap() else {
            unreachable!()
        };
        let draws = sample(target.as_ref(), &config(4, 1000, 2500, 33)).unwrap();
        let diag = diagnostics(&draws).unwrap();
        let n_draws = draws.n_draws() as f64;
        let cols: Vec<Vec<f64>> = (0..p).map(|j| draws.param(j)).collect();
        for j in 0..p {
            let m = cols[j].iter().sum::<f64>() / n_draws;
            let tol = 3.0 * mcse(&draws, j, diag.ess_bulk[j]);
            assert!((m - mean[j]).abs() <= tol, "mean[{j}]: {m} vs {} (tol {tol})", mean[j]);
        }
        for i in 0..p {
            for j in i..p {
                let mi = cols[i].iter().sum::<f64>() / n_draws;
                let mj = cols[j].iter().sum::<f64>() / n_draws;
                let cij = cols[i]
                    .iter()
                    .zip(&cols[j])
                    .map(|(a, b)| (a - mi) * (b - mj))
                    .sum::<f64>()
                    / (n_draws - 1.0);
                let ess = diag.ess_bulk[i].min(diag.ess_bulk[j]);
                let tol = 3.0 * (cov[(i, i)] * cov[(j, j)]).sqrt() * (2.0 / ess).sqrt();
                assert!(
                    (cij - cov[(i, j)]).abs() <= tol,
                    "cov[{i},{j}]: {cij} vs {} (tol {tol})",
                    cov[(i, j)]
                );
            }
        }

        // analytic evidence, conditional on the pinned dispersion: the joint
        // weighted integral minus the power prior's own normalizing constant
        let two_pi = 2.0 * std::f64::consts::PI;
        let weighted_log_integral = |xtwx: &DMatrix<f64>, xtwy: &DVector<f64>, ytwy: f64, sw: f64| {
            let a = xtwx / phi_hat + DMatrix::identity(p, p) / (sigma0 * sigma0);
            let bb = xtwy / phi_hat;
            let ainv = a.clone().try_inverse().unwrap();
            -0.5 * sw * (two_pi * phi_hat).ln() - ytwy / (2.0 * phi_hat)
                - 0.5 * p as f64 * (two_pi * sigma0 * sigma0).ln()
                + 0.5 * bb.dot(&(&ainv * &bb))
                + 0.5 * p as f64 * two_pi.ln()
                - 0.5 * a.determinant().ln()
        };
        let ytwy = current.y.norm_squared() + a0 * hist.y.norm_squared();
        let log_joint = weighted_log_integral(&xtwx, &xtwy, ytwy, sum_w);
        let log_c = weighted_log_integral(
            &((hist.x.transpose() * &hist.x) * a0),
            &((hist.x.transpose() * &hist.y) * a0),
            a0 * hist.y.norm_squared(),
            a0 * n0 as f64,
        );
        let log_z_true = log_joint - log_c;
        let log_z = marginal_likelihood(&spec, &model, &data, &config(4, 1000, 2500, 35)).unwrap();
        assert!((log_z - log_z_true).abs() <= 0.05, "{log_z} vs {log_z_true}");
    });
}

#[test]
fn criterion_04_logistic_quadrature_oracle() {
    criterion(4, "logistic marginal likelihoods match 2-D quadrature", || {
        let model = ModelSpec::unnamed(Family::Binomial, Link::Logit, 2);
        let current = gen_dataset(Family::Binomial, 30, 41, Role::Current);
        let hist = gen_dataset(Family::Binomial, 30, 42, Role::Historical(1));
        let hyper = InitialPriorHyper::default_for(2);
        let sigma0 = 10.0;

        let log_quad = |a0: f64, include_current: bool| -> f64 {
            // Simpson product rule over beta in [-12, 12]^2
            let (lo, hi, m) = (-12.0, 12.0, 240usize);
            let h = (hi - lo) / m as f64;
            let wt = |k: usize| -> f64 {
                if k == 0 || k == m {
                    1.0
                } else if k % 2 == 1 {
                    4.0
                } else {
                    2.0
                }
            };
            let mut total = 0.0f64;
            for i in 0..=m {
                let b0 = lo + i as f64 * h;
                for j in 0..=m {
                    let b1 = lo + j as f64 * h;
                    let beta = DVector::from_row_slice(&[b0, b1]);
                    let mut lp = if include_current {
                        match log_likelihood(model.family, model.link, &beta, 1.0, &current) {
                            Ok(v) => v,
                            Err(_) => continue,
                        }
                    } else {
                        0.0
                    };
                    if a0 > 0.0 {
                        match log_likelihood(model.family, model.link, &beta, 1.0, &hist) {
                            Ok(v) => lp += a0 * v,
                            Err(_) => continue,
                        }
                    }
                    lp += -((2.0 * std::f64::consts::PI).sqrt() * sigma0).ln().mul_add(2.0, 0.0)
                        - 0.5 * (b0 * b0 + b1 * b1) / (sigma0 * sigma0);
                    total += wt(i) * wt(j) * lp.exp();
                }
            }
            (total * h * h / 9.0).ln()
        };

        let cfg = |seed| config(4, 800, 2500, seed);
        let z = marginal_likelihood(
            &PriorSpec::Initial { hyper: hyper.clone() },
            &model,
            &[current.clone()],
            &cfg(43),
        )
        .unwrap();
        let truth = log_quad(0.0, true);
        assert!((z - truth).abs() <= 0.02, "initial: {z} vs {truth}");

        let data = vec![current.clone(), hist.clone()];
        for (k, a0) in [0.25, 0.5, 1.0].into_iter().enumerate() {
            let z = marginal_likelihood(
                &PriorSpec::Pp { a0: vec![a0], hyper: hyper.clone() },
                &model,
                &data,
                &cfg(50 + k as u64),
            )
            .unwrap();
            // two-step normalization: joint integral over the prior constant
            let truth = log_quad(a0, true) - log_quad(a0, false);
            assert!((z - truth).abs() <= 0.02, "pp a0={a0}: {z} vs {truth}");
        }
    });
}

#[test]
fn criterion_05_npp_grid_conjugate_curve() {
    criterion(5, "NPP lognc grid matches the analytic conjugate gaussian curve", || {
        let n = 20usize;
        let mut rng = ChaCha20Rng::seed_from_u64(51);
        let mut y = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mean = y.sum() / n as f64;
        for v in y.iter_mut() {
            *v -= mean; // exact centering keeps the analytic curve mildly curved
        }
        let x = DMatrix::from_element(n, 1, 1.0);
        let hist = Dataset::new(y.clone(), x, None, Role::Historical(1)).unwrap();
        let model = ModelSpec::unnamed(Family::Gaussian, Link::Identity, 1);

        let sigma0 = 0.2;
        let phi_pin = y.norm_squared() / n as f64;
        let hyper = InitialPriorHyper {
            mu0: vec![0.0],
            sigma0: vec![sigma0],
            alpha0: phi_pin,
            gamma0: 0.01,
        };
        let a0: Vec<f64> = (0..21).map(|i| i as f64 / 20.0).collect();
        let grids = build_lognc_grid(
            &model,
            std::slice::from_ref(&hist),
            &a0,
            &hyper,
            &config(4, 1000, 2500, 55),
            0.75,
        )
        .unwrap();
        let grid = &grids[0];
        assert_eq!(grid.lognc_smooth[0], 0.0);
        let two_pi = 2.0 * std::f64::consts::PI;
        for (i, &a) in a0.iter().enumerate() {
            let truth = -0.5 * a * n as f64 * (two_pi * phi_pin).ln()
                - a * y.norm_squared() / (2.0 * phi_pin)
                - 0.5 * (1.0 + a * n as f64 * sigma0 * sigma0 / phi_pin).ln();
            assert!(
                (grid.lognc_smooth[i] - truth).abs() <= 0.05,
                "a0={a}: {} vs {truth}",
                grid.lognc_smooth[i]
            );
        }
    });
}

struct FixedA0Napp {
    fit: MleFit,
    theta_hat: DVector<f64>,
    a0: f64,
}

impl LogTarget for FixedA0Napp {
    fn dim(&self) -> usize {
        self.theta_hat.len()
    }
    fn log_density_grad(&self, u: &[f64]) -> (f64, Vec<f64>) {
        let theta = DVector::from_column_slice(u);
        let lp = hdprior::priors::napp_log_density(&theta, &[self.a0], std::slice::from_ref(&self.fit), 1.0, 1.0)
            .unwrap();
        let grad = -(&self.fit.info * (&theta - &self.theta_hat)) * self.a0;
        (lp, grad.iter().copied().collect())
    }
    fn names(&self) -> Vec<String> {
        (0..self.dim()).map(|j| format!("t{j}")).collect()
    }
    fn constrain(&self, u: &[f64]) -> Vec<f64> {
        u.to_vec()
    }
}

#[test]
fn criterion_06_napp_exact_normal() {
    criterion(6, "fixed-a0 NAPP is exactly normal with matching sampled moments", || {
        let hist = gen_dataset(Family::Gaussian, 60, 61, Role::Historical(1));
        let fit = fit_mle(Family::Gaussian, Link::Identity, &hist).unwrap();
        let mut theta_hat: Vec<f64> = fit.beta_hat.iter().copied().collect();
        theta_hat.push(fit.phi_hat.ln());
        let theta_hat = DVector::from_vec(theta_hat);
        let a0 = 0.6;
        let target = FixedA0Napp { fit, theta_hat: theta_hat.clone(), a0 };

        // exact normality: log-density differences equal the quadratic form
        let mut rng = ChaCha20Rng::seed_from_u64(62);
        let quad = |theta: &DVector<f64>| {
            let d = theta - &theta_hat;
            -0.5 * a0 * d.dot(&(&target.fit.info * &d))
        };
        for _ in 0..5 {
            let t1 = DVector::from_fn(target.dim(), |_, _| rng.gen_range(-1.0..1.0));
            let t2 = DVector::from_fn(target.dim(), |_, _| rng.gen_range(-1.0..1.0));
            let lhs = target.log_density_grad(t1.as_slice()).0
                - target.log_density_grad(t2.as_slice()).0;
            let rhs = quad(&t1) - quad(&t2);
            assert!((lhs - rhs).abs() <= 1e-10, "{lhs} vs {rhs}");
        }

        let cov_true = (target.fit.info.clone() * a0).try_inverse().unwrap();
        let draws = sample(&target, &config(4, 800, 2500, 63)).unwrap();
        let diag = diagnostics(&draws).unwrap();
        let n = draws.n_draws() as f64;
        for j in 0..target.dim() {
            let col = draws.param(j);
            let m = col.iter().sum::<f64>() / n;
            let v = col.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
            let tol_m = 3.0 * mcse(&draws, j, diag.ess_bulk[j]);
            let tol_v = 3.0 * cov_true[(j, j)] * (2.0 / diag.ess_bulk[j]).sqrt();
            assert!((m - theta_hat[j]).abs() <= tol_m, "mean[{j}]");
            assert!((v - cov_true[(j, j)]).abs() <= tol_v, "var[{j}]: {v} vs {}", cov_true[(j, j)]);
        }
    });
}

#[test]
fn criterion_07_rmap_weight_and_mixing() {
    criterion(7, "RMAP weight identities and Bernoulli mixing fraction", || {
        assert_eq!(rmap_weight(0.0, 2.0, -1.0).unwrap(), 0.0);
        assert_eq!(rmap_weight(1.0, -2.0, 5.0).unwrap(), 1.0);
        assert!((rmap_weight(0.5, 3.3, 3.3).unwrap() - 0.5).abs() <= 1e-14);
        assert!((rmap_weight(0.1, 9f64.ln(), 0.0).unwrap() - 0.5).abs() <= 1e-14);

        let model = ModelSpec::unnamed(Family::Binomial, Link::Logit, 1);
        let mk = |seed, n, role| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let y = DVector::from_fn(n, |_, _| f64::from(rng.gen::<f64>() < 0.45));
            Dataset::new(y, DMatrix::from_element(n, 1, 1.0), None, role).unwrap()
        };
        let data = vec![mk(71, 40, Role::Current), mk(72, 50, Role::Historical(1))];
        let r = rmap_posterior(
            &model,
            &data,
            0.3,
            &BhmHyper::default(),
            &InitialPriorHyper::default_for(1),
            &config(4, 1000, 2500, 73),
        )
        .unwrap();
        let n = r.draws.n_draws() as u64;
        assert_eq!(n, 10_000);

        // exact central 99% binomial interval around gamma_tilde, via a direct
        // scan of the binomial CDF in log space
        let ln_pmf = |k: u64| {
            use statrs::function::gamma::ln_gamma;
            let (nf, kf, p) = (n as f64, k as f64, r.gamma_tilde);
            ln_gamma(nf + 1.0) - ln_gamma(kf + 1.0) - ln_gamma(nf - kf + 1.0)
                + kf * p.ln()
                + (nf - kf) * (1.0 - p).ln()
        };
        let mut cdf = 0.0;
        let (mut lo, mut hi) = (None, None);
        for k in 0..=n {
            cdf += ln_pmf(k).exp();
            if lo.is_none() && cdf >= 0.005 {
                lo = Some(k);
            }
            if hi.is_none() && cdf >= 0.995 {
                hi = Some(k);
                break;
            }
        }
        let (lo, hi) = (lo.unwrap(), hi.unwrap());
        let k = r.informative_picks as u64;
        assert!(
            (lo..=hi).contains(&k),
            "picks {k} outside [{lo}, {hi}] for gamma {}",
            r.gamma_tilde
        );
    });
}

#[test]
fn criterion_08_survival_equivalence() {
    criterion(8, "Poisson expansion equals piecewise-exponential likelihood", || {
        let mut rng = ChaCha20Rng::seed_from_u64(81);
        let records: Vec<SurvivalRecord> = (0..15)
            .map(|_| {
                SurvivalRecord::new(
                    rng.gen_range(0.1..4.0),
                    rng.gen::<f64>() < 0.7,
                    vec![rng.sample(StandardNormal), rng.sample(StandardNormal)],
                )
                .unwrap()
            })
            .collect();
        let times: Vec<f64> = records.iter().map(|r| r.time).collect();
        let events: Vec<bool> = records.iter().map(|r| r.event).collect();
        let breaks = choose_breaks(&times, &events, 3).unwrap();
        let j_total = breaks.intervals();
        let (expanded, _) = expand_poisson(&records, &breaks, Role::Current).unwrap();

        let mut diffs = Vec::new();
        for _ in 0..10 {
            let log_lambda: Vec<f64> = (0..j_total).map(|_| rng.gen_range(-1.5..0.5)).collect();
            let beta: Vec<f64> = (0..2).map(|_| rng.gen_range(-0.8..0.8)).collect();
            let coef =
                DVector::from_vec(log_lambda.iter().chain(&beta).copied().collect::<Vec<_>>());
            let pois = log_likelihood(Family::Poisson, Link::Log, &coef, 1.0, &expanded).unwrap();
            let direct = piecewise_exponential_loglik(&records, &breaks, &log_lambda, &beta);
            diffs.push(pois - direct);
        }
        // the two likelihoods agree up to a parameter-free constant
        for d in &diffs {
            assert!((d - diffs[0]).abs() <= 1e-8, "{diffs:?}");
        }

        // J=1, no covariates: hazard MLE is events / exposure
        let simple: Vec<SurvivalRecord> = (0..20)
            .map(|_| {
                SurvivalRecord::new(rng.gen_range(0.2..3.0), rng.gen::<f64>() < 0.6, vec![]).unwrap()
            })
            .collect();
        let b1 = Breaks::new(vec![]).unwrap();
        let (d1, _) = expand_poisson(&simple, &b1, Role::Current).unwrap();
        let fit = fit_mle(Family::Poisson, Link::Log, &d1).unwrap();
        let events: f64 = simple.iter().filter(|r| r.event).count() as f64;
        let exposure: f64 = simple.iter().map(|r| r.time).sum();
        assert!((fit.beta_hat[0].exp() - events / exposure).abs() <= 1e-10);
    });
}

struct StdNormal5;

impl LogTarget for StdNormal5 {
    fn dim(&self) -> usize {
        5
    }
    fn log_density_grad(&self, u: &[f64]) -> (f64, Vec<f64>) {
        (-0.5 * u.iter().map(|x| x * x).sum::<f64>(), u.iter().map(|x| -x).collect())
    }
    fn names(&self) -> Vec<String> {
        (0..5).map(|j| format!("z{j}")).collect()
    }
    fn constrain(&self, u: &[f64]) -> Vec<f64> {
        u.to_vec()
    }
}

#[test]
fn criterion_09_sampler_calibration() {
    criterion(9, "NUTS calibration on a 5-D normal and ESS on an AR(1) chain", || {
        let draws = sample(&StdNormal5, &config(4, 1000, 4000, 91)).unwrap();
        let diag = diagnostics(&draws).unwrap();
        assert!(diag.min_ess_bulk() >= 10_000.0, "ess {}", diag.min_ess_bulk());
        assert!(diag.max_rhat() < 1.01, "rhat {}", diag.max_rhat());
        for j in 0..5 {
            let mut col = draws.param(j);
            col.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let n = col.len() as f64;
            let ks = col
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    let f = std_normal_cdf(v);
                    (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
                })
                .fold(0.0f64, f64::max);
            assert!(ks < 0.02, "KS for marginal {j}: {ks}");
        }

        // AR(1) chains with known effective sample size
        let (chains, iters, rho) = (4usize, 20_000usize, 0.9f64);
        let mut rng = ChaCha20Rng::seed_from_u64(92);
        let mut flat = Vec::with_capacity(chains * iters);
        for _ in 0..chains {
            let mut v = 0.0;
            for _ in 0..iters {
                v = rho * v + (1.0 - rho * rho).sqrt() * rng.sample::<f64, _>(StandardNormal);
                flat.push(v);
            }
        }
        let synthetic = Draws {
            names: vec!["v".into()],
            chains,
            iter_sampling: iters,
            unconstrained: flat.clone(),
            dim: 1,
            constrained: flat,
            log_density: vec![0.0; chains * iters],
            divergent: vec![false; chains * iters],
            step_size: vec![1.0; chains],
            accept_stat: vec![1.0; chains],
            energy_error: vec![0.0; chains],
            max_depth_hits: vec![0; chains],
        };
        let d = diagnostics(&synthetic).unwrap();
        let want = (chains * iters) as f64 * (1.0 - rho) / (1.0 + rho);
        assert!(
            (d.ess_bulk[0] - want).abs() <= 0.25 * want,
            "AR(1) ess {} vs {want}",
            d.ess_bulk[0]
        );
    });
}

#[test]
fn criterion_10_elicitation_helpers() {
    criterion(10, "beta-prior elicitation and the a0 sizing rule", || {
        let (a, b) = solve_beta_hyper(0.1113, 1.0).unwrap();
        assert!((a - 0.77).abs() <= 0.01, "alpha {a}");
        assert!((b - 6.21).abs() <= 0.01, "beta {b}");
        assert!((a0_half_ratio(183, 822) - 0.111).abs() <= 0.001);
    });
}

#[test]
fn criterion_11_actg_reference_values() {
    let Ok(dir) = std::env::var("HDPRIOR_ACTG_DIR") else {
        println!(
            "criterion 11: SKIP - set HDPRIOR_ACTG_DIR to a directory containing \
             actg036.csv (current) and actg019.csv (historical) with columns \
             outcome, age, race, treatment, cd4"
        );
        return;
    };
    criterion(11, "ACTG lognc, posterior, and Bayes-factor reference values", || {
        let dir = std::path::PathBuf::from(dir);
        let formula = parse_formula("outcome ~ age + race + treatment + cd4").unwrap();
        let (mut datasets, info) =
            data::load_datasets(&[dir.join("actg036.csv"), dir.join("actg019.csv")], &formula, None)
                .unwrap();
        data::standardize(&mut datasets, &info).unwrap();
        let model = ModelSpec::new(Family::Binomial, Link::Logit, info.coef_names.clone());
        let p = model.p();
        let hyper = InitialPriorHyper::default_for(p);

        // normalizing-constant reference points
        for (a0, want) in [(0.05, -19.658), (0.10, -30.372)] {
            let pt = npp_lognc(&model, &datasets[1], a0, &hyper, &config(4, 2000, 2500, 111))
                .unwrap();
            assert!((pt.lognc - want).abs() <= 0.5, "lognc({a0}) = {} vs {want}", pt.lognc);
        }

        // hierarchical-model posterior vs reference summaries (current coefficients)
        let spec = PriorSpec::Bhm { hyper: BhmHyper::default() };
        let BuiltTarget::Single(target) = build_target(&spec, &model, &datasets).unwrap() else {
            unreachable!()
        };
        let draws = sample(target.as_ref(), &config(4, 1000, 2500, 112)).unwrap();
        let reference = [
            ("intercept", -4.130, 0.906),
            ("age", 0.262, 0.261),
            ("race", 1.012, 0.903),
            ("treatment", -0.644, 0.430),
            ("cd4", -1.247, 0.369),
        ];
        for (name, want_mean, want_sd) in reference {
            let col = draws
                .param_by_name(name)
                .or_else(|| draws.param_by_name(&format!("{name}:1")))
                .unwrap_or_else(|| panic!("no column for {name}"));
            let n = col.len() as f64;
            let m = col.iter().sum::<f64>() / n;
            assert!(
                (m - want_mean).abs() <= 0.1 * want_sd,
                "{name}: mean {m} vs {want_mean} (sd {want_sd})"
            );
        }

        // logit-vs-probit discounting curve
        let model_probit = ModelSpec::new(Family::Binomial, Link::Probit, info.coef_names.clone());
        let mut over_log3 = Vec::new();
        for (k, a0) in [0.05, 0.1, 0.25, 0.5, 1.0].into_iter().enumerate() {
            let spec = PriorSpec::Pp { a0: vec![a0], hyper: hyper.clone() };
            let z1 = marginal_likelihood(&spec, &model, &datasets, &config(2, 1000, 1500, 120 + k as u64))
                .unwrap();
            let z2 = marginal_likelihood(
                &spec,
                &model_probit,
                &datasets,
                &config(2, 1000, 1500, 140 + k as u64),
            )
            .unwrap();
            let bf = bayes_factor(z1, z2);
            assert!(bf.log_bf > 0.0, "log BF at a0={a0} is {}", bf.log_bf);
            if bf.log_bf > 3f64.ln() {
                over_log3.push(a0);
            }
        }
        assert!(over_log3.iter().all(|&a| a < 0.1), "substantial evidence at {over_log3:?}");
    });
}
