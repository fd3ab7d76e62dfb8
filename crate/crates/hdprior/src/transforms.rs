//! Transforms between unconstrained sampling coordinates and constrained
//! parameter values, with log-Jacobians and their gradients.

pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// logit transform for a value in (0, 1): value, log-Jacobian, d(logJ)/du.
pub fn logit_constrain(u: f64) -> (f64, f64, f64) {
    let a = sigmoid(u);
    // ln a + ln(1-a), computed stably
    let log_jac = -softplus(-u) - softplus(u);
    (a, log_jac, 1.0 - 2.0 * a)
}

/// Result of the stick-breaking map from K-1 free coordinates to a K-simplex.
pub struct Simplex {
    pub gamma: Vec<f64>,
    pub log_gamma: Vec<f64>,
    pub log_jac: f64,
    /// d gamma_k / d u_j, K x (K-1), row-major by k.
    pub dgamma_du: Vec<Vec<f64>>,
    pub dlogjac_du: Vec<f64>,
}

/// Stick-breaking with the shifted-logit centering, so u = 0 maps to the
/// uniform simplex point.
pub fn stick_breaking(u: &[f64]) -> Simplex {
    let km1 = u.len();
    let k = km1 + 1;
    let mut gamma = vec![0.0; k];
    let mut log_gamma = vec![0.0; k];
    let mut log_jac = 0.0;
    let mut dgamma_du = vec![vec![0.0; km1]; k];
    let mut dlogjac_du = vec![0.0; km1];

    let mut remaining = 1.0f64;
    let mut log_remaining = 0.0f64;
    let mut drem = vec![0.0; km1];
    for j in 0..km1 {
        let shift = ((k - 1 - j) as f64).ln();
        let z = sigmoid(u[j] - shift);
        let log_z = -softplus(-(u[j] - shift));
        let log_1mz = -softplus(u[j] - shift);

        log_gamma[j] = log_remaining + log_z;
        gamma[j] = log_gamma[j].exp();
        log_jac += log_z + log_1mz + log_remaining;

        // d gamma_j = z * d remaining + remaining * z(1-z) e_j
        for t in 0..km1 {
            dgamma_du[j][t] = z * drem[t];
        }
        dgamma_du[j][j] += remaining * z * (1.0 - z);

        // d logjac: (1-2z) on coordinate j, plus d log remaining
        dlogjac_du[j] += 1.0 - 2.0 * z;
        if remaining > 0.0 {
            for t in 0..km1 {
                dlogjac_du[t] += drem[t] / remaining;
            }
        }

        for t in 0..km1 {
            drem[t] -= dgamma_du[j][t];
        }
        remaining -= gamma[j];
        log_remaining += log_1mz;
    }
    gamma[k - 1] = remaining.max(0.0);
    log_gamma[k - 1] = log_remaining;
    dgamma_du[k - 1].copy_from_slice(&drem);

    Simplex {
        gamma,
        log_gamma,
        log_jac,
        dgamma_du,
        dlogjac_du,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn uniform_simplex_at_zero() {
        for k in 2..6 {
            let u = vec![0.0; k - 1];
            let s = stick_breaking(&u);
            for g in &s.gamma {
                assert_relative_eq!(*g, 1.0 / k as f64, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn simplex_sums_to_one() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let u: Vec<f64> = (0..4).map(|_| rng.gen_range(-6.0..6.0)).collect();
            let s = stick_breaking(&u);
            assert_relative_eq!(s.gamma.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
            assert!(s.gamma.iter().all(|&g| g >= 0.0));
        }
    }

    #[test]
    fn stick_breaking_gradients_match_fd() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let h = 1e-6;
        for _ in 0..20 {
            let u: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let s = stick_breaking(&u);
            for t in 0..3 {
                let mut up = u.clone();
                let mut um = u.clone();
                up[t] += h;
                um[t] -= h;
                let sp = stick_breaking(&up);
                let sm = stick_breaking(&um);
                for k in 0..4 {
                    let fd = (sp.gamma[k] - sm.gamma[k]) / (2.0 * h);
                    assert_relative_eq!(s.dgamma_du[k][t], fd, epsilon = 1e-6);
                }
                let fdj = (sp.log_jac - sm.log_jac) / (2.0 * h);
                assert_relative_eq!(s.dlogjac_du[t], fdj, epsilon = 1e-5);
            }
        }
    }

    #[test]
    fn logit_round_trip() {
        for &u in &[-20.0, -3.0, 0.0, 0.4, 7.0] {
            let (a, _, _) = logit_constrain(u);
            let back = (a / (1.0 - a)).ln();
            assert_relative_eq!(back, u, epsilon = 1e-9);
        }
    }
}
