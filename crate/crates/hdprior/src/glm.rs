//! Exponential-family GLM log-likelihoods, gradients, IRLS fitting, and
//! expected Fisher information.
//!
//! Log-likelihoods are fully normalized (the `c(y, phi)` terms are kept)
//! because evidence computations compare models across families and links.
//! The dispersion is handled internally on the `tau = log(phi)` scale.

use nalgebra::{DMatrix, DVector};
use statrs::function::gamma::{digamma, ln_gamma};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Gaussian,
    Binomial,
    Poisson,
    Gamma,
    InverseGaussian,
}

impl Family {
    /// Binomial and Poisson have phi known and equal to 1.
    pub fn dispersion_fixed(self) -> bool {
        matches!(self, Family::Binomial | Family::Poisson)
    }

    /// Variance function V(mu).
    pub fn variance(self, mu: f64) -> f64 {
        match self {
            Family::Gaussian => 1.0,
            Family::Binomial => mu * (1.0 - mu),
            Family::Poisson => mu,
            Family::Gamma => mu * mu,
            Family::InverseGaussian => mu * mu * mu,
        }
    }

    /// Open interval of admissible means.
    fn mean_in_domain(self, mu: f64) -> bool {
        match self {
            Family::Gaussian => mu.is_finite(),
            Family::Binomial => mu > 0.0 && mu < 1.0,
            Family::Poisson | Family::Gamma | Family::InverseGaussian => {
                mu > 0.0 && mu.is_finite()
            }
        }
    }

    pub fn check_response(self, y: &[f64]) -> Result<()> {
        let ok = match self {
            Family::Gaussian => y.iter().all(|v| v.is_finite()),
            Family::Binomial => y.iter().all(|&v| v == 0.0 || v == 1.0),
            Family::Poisson => y.iter().all(|&v| v >= 0.0 && v.fract() == 0.0),
            Family::Gamma | Family::InverseGaussian => y.iter().all(|&v| v > 0.0),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("response out of range for {self:?}")))
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Family::Gaussian),
            "binomial" => Ok(Family::Binomial),
            "poisson" => Ok(Family::Poisson),
            "gamma" => Ok(Family::Gamma),
            "inverse_gaussian" => Ok(Family::InverseGaussian),
            _ => Err(Error::Spec(format!("unknown family `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    Identity,
    Log,
    Logit,
    Probit,
    Cloglog,
    Cauchit,
    Inverse,
    InverseSquared,
    Sqrt,
}

const MU_EPS: f64 = 1e-12;

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

impl Link {
    /// Inverse link g^{-1}(eta).
    pub fn inverse(self, eta: f64) -> f64 {
        match self {
            Link::Identity => eta,
            Link::Log => eta.exp(),
            Link::Logit => 1.0 / (1.0 + (-eta).exp()),
            Link::Probit => std_normal_cdf(eta),
            Link::Cloglog => {
                let mu = 1.0 - (-eta.exp()).exp();
                mu.clamp(MU_EPS, 1.0 - MU_EPS)
            }
            Link::Cauchit => 0.5 + eta.atan() / std::f64::consts::PI,
            Link::Inverse => 1.0 / eta,
            Link::InverseSquared => 1.0 / eta.sqrt(),
            Link::Sqrt => eta * eta,
        }
    }

    /// d mu / d eta evaluated at eta (mu passed to avoid recomputation).
    pub fn dmu_deta(self, eta: f64, mu: f64) -> f64 {
        match self {
            Link::Identity => 1.0,
            Link::Log => mu,
            Link::Logit => mu * (1.0 - mu),
            Link::Probit => std_normal_pdf(eta),
            Link::Cloglog => (eta - eta.exp()).exp(),
            Link::Cauchit => 1.0 / (std::f64::consts::PI * (1.0 + eta * eta)),
            Link::Inverse => -mu * mu,
            Link::InverseSquared => -0.5 * mu * mu * mu,
            Link::Sqrt => 2.0 * eta,
        }
    }

    /// Link function g(mu), used for IRLS starting values.
    pub fn apply(self, mu: f64) -> f64 {
        match self {
            Link::Identity => mu,
            Link::Log => mu.ln(),
            Link::Logit => (mu / (1.0 - mu)).ln(),
            Link::Probit => {
                use statrs::distribution::ContinuousCDF;
                statrs::distribution::Normal::new(0.0, 1.0)
                    .unwrap()
                    .inverse_cdf(mu)
            }
            Link::Cloglog => (-(1.0 - mu).ln()).ln(),
            Link::Cauchit => (std::f64::consts::PI * (mu - 0.5)).tan(),
            Link::Inverse => 1.0 / mu,
            Link::InverseSquared => 1.0 / (mu * mu),
            Link::Sqrt => mu.sqrt(),
        }
    }

    /// Admissible pairs follow the `stats::glm` link lists.
    pub fn admissible_for(self, family: Family) -> bool {
        use Link::*;
        match family {
            Family::Gaussian => matches!(self, Identity | Log | Inverse),
            Family::Binomial => matches!(self, Logit | Probit | Cloglog | Cauchit | Log),
            Family::Poisson => matches!(self, Log | Identity | Sqrt),
            Family::Gamma => matches!(self, Inverse | Identity | Log),
            Family::InverseGaussian => {
                matches!(self, InverseSquared | Inverse | Identity | Log)
            }
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Link::Identity),
            "log" => Ok(Link::Log),
            "logit" => Ok(Link::Logit),
            "probit" => Ok(Link::Probit),
            "cloglog" => Ok(Link::Cloglog),
            "cauchit" => Ok(Link::Cauchit),
            "inverse" => Ok(Link::Inverse),
            "inverse_squared" => Ok(Link::InverseSquared),
            "sqrt" => Ok(Link::Sqrt),
            _ => Err(Error::Spec(format!("unknown link `{s}`"))),
        }
    }
}

/// Role tag distinguishing the current data set from historical ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Current,
    Historical(usize),
}

/// Response vector, design matrix, and offset for one data set.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
    pub offset: DVector<f64>,
    pub role: Role,
}

impl Dataset {
    pub fn new(y: DVector<f64>, x: DMatrix<f64>, offset: Option<DVector<f64>>, role: Role) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::Shape("empty data set".into()));
        }
        if x.nrows() != n {
            return Err(Error::Shape(format!(
                "X has {} rows but y has {} entries",
                x.nrows(),
                n
            )));
        }
        let offset = offset.unwrap_or_else(|| DVector::zeros(n));
        if offset.len() != n {
            return Err(Error::Shape("offset length mismatch".into()));
        }
        if y.iter().chain(x.iter()).chain(offset.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite value in data set".into()));
        }
        Ok(Dataset { y, x, offset, role })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Stack several data sets (used by LEAP and pooled-data checks).
    pub fn stack(parts: &[&Dataset], role: Role) -> Result<Dataset> {
        let p = parts[0].p();
        if parts.iter().any(|d| d.p() != p) {
            return Err(Error::Shape("stacked data sets differ in column count".into()));
        }
        let n: usize = parts.iter().map(|d| d.n()).sum();
        let mut y = DVector::zeros(n);
        let mut x = DMatrix::zeros(n, p);
        let mut offset = DVector::zeros(n);
        let mut row = 0;
        for d in parts {
            for i in 0..d.n() {
                y[row] = d.y[i];
                offset[row] = d.offset[i];
                for j in 0..p {
                    x[(row, j)] = d.x[(i, j)];
                }
                row += 1;
            }
        }
        Dataset::new(y, x, Some(offset), role)
    }
}

/// Maximum-likelihood fit. `info` is the expected Fisher information in
/// (beta, tau = log phi) coordinates; (p+1)x(p+1) when dispersion is free.
#[derive(Debug, Clone)]
pub struct MleFit {
    pub beta_hat: DVector<f64>,
    pub phi_hat: f64,
    pub info: DMatrix<f64>,
    pub converged: bool,
    pub iterations: usize,
}

fn check_pair(family: Family, link: Link) -> Result<()> {
    if !link.admissible_for(family) {
        return Err(Error::Domain(format!(
            "link {link:?} is not admissible for family {family:?}"
        )));
    }
    Ok(())
}

fn means(family: Family, link: Link, beta: &DVector<f64>, data: &Dataset) -> Result<(DVector<f64>, DVector<f64>)> {
    if beta.len() != data.p() {
        return Err(Error::Shape(format!(
            "beta has {} entries but X has {} columns",
            beta.len(),
            data.p()
        )));
    }
    let eta = &data.x * beta + &data.offset;
    let mut mu = DVector::zeros(data.n());
    for i in 0..data.n() {
        if !eta[i].is_finite() {
            return Err(Error::Domain("non-finite linear predictor".into()));
        }
        let m = link.inverse(eta[i]);
        if !family.mean_in_domain(m) {
            return Err(Error::Domain(format!(
                "mean {m} outside domain of {family:?} at row {i}"
            )));
        }
        mu[i] = m;
    }
    Ok((eta, mu))
}

/// Fully normalized log density of one observation.
pub fn log_density(family: Family, y: f64, mu: f64, phi: f64) -> f64 {
    use std::f64::consts::PI;
    match family {
        Family::Gaussian => -0.5 * (2.0 * PI * phi).ln() - (y - mu).powi(2) / (2.0 * phi),
        Family::Binomial => {
            if y > 0.5 {
                mu.ln()
            } else {
                (1.0 - mu).ln()
            }
        }
        Family::Poisson => y * mu.ln() - mu - ln_gamma(y + 1.0),
        Family::Gamma => {
            let nu = 1.0 / phi;
            nu * (nu * y / mu).ln() - y.ln() - ln_gamma(nu) - nu * y / mu
        }
        Family::InverseGaussian => {
            -0.5 * (2.0 * PI * phi * y.powi(3)).ln() - (y - mu).powi(2) / (2.0 * phi * mu * mu * y)
        }
    }
}

/// d log f / d tau at fixed mu, for free-dispersion families.
fn dlogf_dtau(family: Family, y: f64, mu: f64, phi: f64) -> f64 {
    match family {
        Family::Gaussian => -0.5 + (y - mu).powi(2) / (2.0 * phi),
        Family::Gamma => {
            let nu = 1.0 / phi;
            -nu * ((nu * y / mu).ln() + 1.0 - digamma(nu) - y / mu)
        }
        Family::InverseGaussian => -0.5 + (y - mu).powi(2) / (2.0 * phi * mu * mu * y),
        _ => 0.0,
    }
}

fn check_phi(family: Family, phi: f64) -> Result<()> {
    if family.dispersion_fixed() && phi != 1.0 {
        return Err(Error::Domain(format!("phi must be 1 for {family:?}")));
    }
    if phi <= 0.0 || !phi.is_finite() {
        return Err(Error::Domain("phi must be positive and finite".into()));
    }
    Ok(())
}

/// Sum of fully normalized per-observation log densities.
pub fn log_likelihood(family: Family, link: Link, beta: &DVector<f64>, phi: f64, data: &Dataset) -> Result<f64> {
    check_pair(family, link)?;
    check_phi(family, phi)?;
    let (_, mu) = means(family, link, beta, data)?;
    let mut total = 0.0;
    for i in 0..data.n() {
        total += log_density(family, data.y[i], mu[i], phi);
    }
    if !total.is_finite() {
        return Err(Error::Domain("non-finite log-likelihood".into()));
    }
    Ok(total)
}

/// Per-row log densities (needed by mixture priors).
pub fn log_likelihood_rows(family: Family, link: Link, beta: &DVector<f64>, phi: f64, data: &Dataset) -> Result<Vec<f64>> {
    check_pair(family, link)?;
    check_phi(family, phi)?;
    let (_, mu) = means(family, link, beta, data)?;
    Ok((0..data.n())
        .map(|i| log_density(family, data.y[i], mu[i], phi))
        .collect())
}

/// Gradient of the log-likelihood with respect to (beta, tau), where the tau
/// coordinate is present only when the dispersion is free. Each row may carry
/// a weight (all 1.0 for the plain gradient); weighted rows also scale the
/// returned log-likelihood contributions.
pub fn weighted_log_likelihood_grad(
    family: Family,
    link: Link,
    beta: &DVector<f64>,
    phi: f64,
    data: &Dataset,
    weights: Option<&[f64]>,
) -> Result<DVector<f64>> {
    check_pair(family, link)?;
    check_phi(family, phi)?;
    let (eta, mu) = means(family, link, beta, data)?;
    let p = data.p();
    let free = !family.dispersion_fixed();
    let mut grad = DVector::zeros(p + usize::from(free));
    for i in 0..data.n() {
        let w = weights.map_or(1.0, |ws| ws[i]);
        if w == 0.0 {
            continue;
        }
        let v = family.variance(mu[i]);
        let d = link.dmu_deta(eta[i], mu[i]);
        let score_eta = w * (data.y[i] - mu[i]) / (phi * v) * d;
        for j in 0..p {
            grad[j] += score_eta * data.x[(i, j)];
        }
        if free {
            grad[p] += w * dlogf_dtau(family, data.y[i], mu[i], phi);
        }
    }
    Ok(grad)
}

pub fn log_likelihood_grad(family: Family, link: Link, beta: &DVector<f64>, phi: f64, data: &Dataset) -> Result<DVector<f64>> {
    weighted_log_likelihood_grad(family, link, beta, phi, data, None)
}

/// Trigamma via recurrence plus asymptotic series.
fn trigamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 6.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    acc + inv * (1.0 + 0.5 * inv + inv2 * (1.0 / 6.0 - inv2 * (1.0 / 30.0 - inv2 / 42.0)))
}

/// Expected Fisher information in (beta, tau) coordinates.
pub fn expected_information(family: Family, link: Link, beta: &DVector<f64>, phi: f64, data: &Dataset) -> Result<DMatrix<f64>> {
    check_pair(family, link)?;
    check_phi(family, phi)?;
    let (eta, mu) = means(family, link, beta, data)?;
    let p = data.p();
    let free = !family.dispersion_fixed();
    let dim = p + usize::from(free);
    let mut info = DMatrix::zeros(dim, dim);
    for i in 0..data.n() {
        let v = family.variance(mu[i]);
        let d = link.dmu_deta(eta[i], mu[i]);
        let w = d * d / (phi * v);
        for j in 0..p {
            for k in j..p {
                info[(j, k)] += w * data.x[(i, j)] * data.x[(i, k)];
            }
        }
    }
    for j in 0..p {
        for k in 0..j {
            info[(j, k)] = info[(k, j)];
        }
    }
    if free {
        let n = data.n() as f64;
        // E[-d^2 logf / d tau^2]; the beta-tau cross terms vanish.
        info[(p, p)] = match family {
            Family::Gaussian | Family::InverseGaussian => n / 2.0,
            Family::Gamma => {
                let nu = 1.0 / phi;
                n * (nu * nu * trigamma(nu) - nu)
            }
            _ => unreachable!(),
        };
    }
    Ok(info)
}

/// IRLS with gradient sup-norm tolerance 1e-8, at most 100 iterations.
pub fn fit_mle(family: Family, link: Link, data: &Dataset) -> Result<MleFit> {
    check_pair(family, link)?;
    family.check_response(data.y.as_slice())?;
    let n = data.n();
    let p = data.p();
    if n <= p {
        return Err(Error::Shape(format!("n = {n} must exceed p = {p}")));
    }

    // Starting means as in glm.fit.
    let mut eta = DVector::zeros(n);
    for i in 0..n {
        let mu0 = match family {
            Family::Binomial => (data.y[i] + 0.5) / 2.0,
            Family::Poisson => data.y[i] + 0.1,
            Family::Gaussian => data.y[i],
            Family::Gamma | Family::InverseGaussian => data.y[i].max(1e-3),
        };
        eta[i] = link.apply(mu0);
    }

    let mut beta = DVector::zeros(p);
    let mut converged = false;
    let mut iterations = 0;
    for iter in 0..100 {
        iterations = iter + 1;
        let mut xtwx = DMatrix::zeros(p, p);
        let mut xtwz = DVector::zeros(p);
        let mut grad_norm = 0.0f64;
        let mut grad = DVector::<f64>::zeros(p);
        for i in 0..n {
            let mu = link.inverse(eta[i]);
            if !family.mean_in_domain(mu) {
                return Err(Error::NonConvergence(format!(
                    "fitted mean left the domain at row {i}"
                )));
            }
            let d = link.dmu_deta(eta[i], mu);
            let v = family.variance(mu);
            let w = d * d / v;
            let z = (eta[i] - data.offset[i]) + (data.y[i] - mu) / d;
            for j in 0..p {
                let xw = data.x[(i, j)] * w;
                xtwz[j] += xw * z;
                for k in j..p {
                    xtwx[(j, k)] += xw * data.x[(i, k)];
                }
            }
            let s = (data.y[i] - mu) / v * d;
            for j in 0..p {
                grad[j] += s * data.x[(i, j)];
            }
        }
        for j in 0..p {
            for k in 0..j {
                xtwx[(j, k)] = xtwx[(k, j)];
            }
            grad_norm = grad_norm.max(grad[j].abs());
        }
        let chol = xtwx
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Singular("X'WX is rank deficient".into()))?;
        beta = chol.solve(&xtwz);
        if beta.norm() > 1e6 {
            return Err(Error::NonConvergence(
                "coefficients diverged (possible separation)".into(),
            ));
        }
        eta = &data.x * &beta + &data.offset;
        if grad_norm <= 1e-8 && iter > 0 {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence(format!(
            "IRLS did not reach tolerance in {iterations} iterations"
        )));
    }

    // Degenerate fits (e.g. Poisson with all-zero responses) push the mean to
    // the boundary; the MLE does not exist there.
    let mut mu_hat = DVector::zeros(n);
    for i in 0..n {
        let mu = link.inverse(eta[i]);
        mu_hat[i] = mu;
        let at_boundary = match family {
            Family::Gaussian => false,
            Family::Binomial => mu < 1e-8 || mu > 1.0 - 1e-8,
            _ => mu < 1e-8,
        };
        if at_boundary {
            return Err(Error::NonConvergence(
                "fitted mean at the boundary of its domain".into(),
            ));
        }
    }

    let phi_hat = match family {
        Family::Binomial | Family::Poisson => 1.0,
        Family::Gaussian => {
            (0..n).map(|i| (data.y[i] - mu_hat[i]).powi(2)).sum::<f64>() / n as f64
        }
        Family::InverseGaussian => {
            (0..n)
                .map(|i| (data.y[i] - mu_hat[i]).powi(2) / (mu_hat[i].powi(2) * data.y[i]))
                .sum::<f64>()
                / n as f64
        }
        Family::Gamma => profile_gamma_dispersion(&mu_hat, &data.y)?,
    };

    let info = expected_information(family, link, &beta, phi_hat, data)?;
    Ok(MleFit {
        beta_hat: beta,
        phi_hat,
        info,
        converged,
        iterations,
    })
}

/// ML dispersion for the gamma family: bisection on the tau-score of the
/// profile log-likelihood (beta does not depend on phi in a GLM).
fn profile_gamma_dispersion(mu: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
    let score = |tau: f64| -> f64 {
        let phi = tau.exp();
        (0..y.len())
            .map(|i| dlogf_dtau(Family::Gamma, y[i], mu[i], phi))
            .sum()
    };
    let (mut lo, mut hi) = (-30.0, 30.0);
    let (slo, shi) = (score(lo), score(hi));
    if slo.signum() == shi.signum() {
        return Err(Error::NonConvergence(
            "gamma dispersion score has no sign change".into(),
        ));
    }
    // score is decreasing in tau
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if score(mid) * slo > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}
