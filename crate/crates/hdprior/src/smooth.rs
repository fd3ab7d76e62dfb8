//! LOESS smoothing and clamped piecewise-linear interpolation for the
//! normalizing-constant grid.

use crate::error::{Error, Result};

/// Strictly ascending knots with values; no extrapolation.
#[derive(Debug, Clone)]
pub struct Interpolant {
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl Interpolant {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 || knots.len() != values.len() {
            return Err(Error::Shape("interpolant needs >= 2 matching knots/values".into()));
        }
        if knots.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain("knots must be strictly ascending".into()));
        }
        Ok(Interpolant { knots, values })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Piecewise-linear value at `q`; exact at knots.
    pub fn eval(&self, q: f64) -> Result<f64> {
        Ok(self.eval_with_slope(q)?.0)
    }

    /// Value and segment slope at `q`. Knot points use the left-limit slope.
    pub fn eval_with_slope(&self, q: f64) -> Result<(f64, f64)> {
        let (lo, hi) = (self.knots[0], *self.knots.last().unwrap());
        if q < lo || q > hi {
            return Err(Error::Domain(format!("query {q} outside [{lo}, {hi}]")));
        }
        // segment index: left-open segments so a knot takes the slope to its left
        let k = match self.knots.binary_search_by(|x| x.partial_cmp(&q).unwrap()) {
            Ok(i) => i.max(1),
            Err(i) => i,
        };
        let (x0, x1) = (self.knots[k - 1], self.knots[k]);
        let (y0, y1) = (self.values[k - 1], self.values[k]);
        let slope = (y1 - y0) / (x1 - x0);
        Ok((y0 + slope * (q - x0), slope))
    }
}

fn tricube(u: f64) -> f64 {
    if u >= 1.0 {
        0.0
    } else {
        let t = 1.0 - u * u * u;
        t * t * t
    }
}

/// Tricube-weighted local polynomial regression, fitted at each input x.
/// Neighborhood size is `ceil(span * n)`.
pub fn loess_fit(x: &[f64], y: &[f64], span: f64, degree: usize) -> Result<Vec<f64>> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::Shape("x and y lengths differ".into()));
    }
    if degree > 2 {
        return Err(Error::Spec("degree must be 0, 1, or 2".into()));
    }
    if n < 3.max(degree + 2) {
        return Err(Error::Shape(format!("need at least {} points", 3.max(degree + 2))));
    }
    if !(0.0..=1.0).contains(&span) || span == 0.0 {
        return Err(Error::Spec("span must lie in (0, 1]".into()));
    }
    for w in 0..n {
        for v in (w + 1)..n {
            if x[w] == x[v] {
                return Err(Error::Domain("x values must be distinct".into()));
            }
        }
    }

    let q = ((span * n as f64).ceil() as usize).clamp(degree + 1, n);
    let mut fitted = Vec::with_capacity(n);
    let mut dists: Vec<(f64, usize)> = Vec::with_capacity(n);
    for i in 0..n {
        dists.clear();
        dists.extend((0..n).map(|j| ((x[j] - x[i]).abs(), j)));
        dists.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let neighborhood = &dists[..q];
        let dmax = neighborhood.last().unwrap().0;
        let weights: Vec<(usize, f64)> = neighborhood
            .iter()
            .map(|&(d, j)| {
                let w = if dmax == 0.0 { 1.0 } else { tricube(d / dmax) };
                (j, w)
            })
            .filter(|&(_, w)| w > 0.0)
            .collect();
        fitted.push(local_poly(x, y, &weights, x[i], degree));
    }
    Ok(fitted)
}

/// Weighted polynomial fit evaluated at x0, centered for conditioning.
/// Falls back to lower degrees when the local design is singular.
fn local_poly(x: &[f64], y: &[f64], weights: &[(usize, f64)], x0: f64, degree: usize) -> f64 {
    for deg in (0..=degree).rev() {
        let m = deg + 1;
        let mut ata = nalgebra::DMatrix::<f64>::zeros(m, m);
        let mut atb = nalgebra::DVector::<f64>::zeros(m);
        for &(j, w) in weights {
            let dx = x[j] - x0;
            let pows = [1.0, dx, dx * dx];
            for a in 0..m {
                atb[a] += w * pows[a] * y[j];
                for b in a..m {
                    ata[(a, b)] += w * pows[a] * pows[b];
                }
            }
        }
        for a in 0..m {
            for b in 0..a {
                ata[(a, b)] = ata[(b, a)];
            }
        }
        if let Some(chol) = ata.clone().cholesky() {
            let coef = chol.solve(&atb);
            if coef.iter().all(|c| c.is_finite()) {
                return coef[0];
            }
        }
    }
    // degree-0 with all-positive weights cannot be singular, but keep a guard
    let (sw, swy) = weights
        .iter()
        .fold((0.0, 0.0), |(sw, swy), &(j, w)| (sw + w, swy + w * y[j]));
    swy / sw
}
