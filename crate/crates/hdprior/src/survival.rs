//! Piecewise-exponential proportional hazards via the Poisson data expansion:
//! each subject contributes one Poisson row per interval at risk, with an
//! interval dummy and a log risk-time offset.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::glm::{Dataset, Role};

#[derive(Debug, Clone)]
pub struct SurvivalRecord {
    pub time: f64,
    pub event: bool,
    pub covariates: Vec<f64>,
}

impl SurvivalRecord {
    pub fn new(time: f64, event: bool, covariates: Vec<f64>) -> Result<Self> {
        if time <= 0.0 || !time.is_finite() {
            return Err(Error::Domain(format!("event time must be positive, got {time}")));
        }
        Ok(SurvivalRecord { time, event, covariates })
    }
}

/// Cut points 0 = s_0 < s_1 < ... < s_{J-1}; the last interval is open to
/// infinity, so there are `cuts.len() + 1` intervals.
#[derive(Debug, Clone)]
pub struct Breaks {
    cuts: Vec<f64>,
}

impl Breaks {
    pub fn new(cuts: Vec<f64>) -> Result<Self> {
        if cuts.iter().any(|&c| c <= 0.0 || !c.is_finite()) {
            return Err(Error::Domain("cut points must be positive and finite".into()));
        }
        if cuts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain("cut points must be strictly increasing".into()));
        }
        Ok(Breaks { cuts })
    }

    pub fn cuts(&self) -> &[f64] {
        &self.cuts
    }

    pub fn intervals(&self) -> usize {
        self.cuts.len() + 1
    }

    fn lower(&self, j: usize) -> f64 {
        if j == 0 {
            0.0
        } else {
            self.cuts[j - 1]
        }
    }

    fn upper(&self, j: usize) -> f64 {
        if j < self.cuts.len() {
            self.cuts[j]
        } else {
            f64::INFINITY
        }
    }

    /// 1-based index of the interval (s_{j-1}, s_j] containing y.
    fn containing(&self, y: f64) -> usize {
        let mut j = 1;
        while j <= self.cuts.len() && y > self.cuts[j - 1] {
            j += 1;
        }
        j
    }
}

/// Time at risk in interval j (1-based): [min{y, s_j} - s_{j-1}]_+ .
pub fn risk_time(y: f64, j: usize, breaks: &Breaks) -> f64 {
    let lo = breaks.lower(j - 1);
    let hi = breaks.upper(j - 1);
    (y.min(hi) - lo).max(0.0)
}

/// Long-format expansion row, kept for CSV export alongside the Dataset.
#[derive(Debug, Clone)]
pub struct ExpandedRow {
    pub subject: usize,
    pub interval: usize,
    pub delta: f64,
    pub log_risk: f64,
}

/// Expand survival records into a Poisson/log Dataset with interval dummies
/// and log risk-time offsets. Intervals are left-open right-closed, so a
/// subject's terminal interval always has positive risk time.
pub fn expand_poisson(records: &[SurvivalRecord], breaks: &Breaks, role: Role) -> Result<(Dataset, Vec<ExpandedRow>)> {
    if records.is_empty() {
        return Err(Error::Shape("no survival records".into()));
    }
    let p = records[0].covariates.len();
    if records.iter().any(|r| r.covariates.len() != p) {
        return Err(Error::Shape("covariate lengths differ across records".into()));
    }
    let j_total = breaks.intervals();
    let mut rows = Vec::new();
    for (i, rec) in records.iter().enumerate() {
        let terminal = breaks.containing(rec.time);
        for j in 1..=terminal {
            let r = risk_time(rec.time, j, breaks);
            if r <= 0.0 {
                return Err(Error::Domain(format!(
                    "zero risk time for subject {i} in interval {j}"
                )));
            }
            rows.push(ExpandedRow {
                subject: i,
                interval: j,
                delta: f64::from(rec.event && j == terminal),
                log_risk: r.ln(),
            });
        }
    }
    let n = rows.len();
    let mut y = DVector::zeros(n);
    let mut x = DMatrix::zeros(n, j_total + p);
    let mut offset = DVector::zeros(n);
    for (r, row) in rows.iter().enumerate() {
        y[r] = row.delta;
        offset[r] = row.log_risk;
        x[(r, row.interval - 1)] = 1.0;
        for (c, &v) in records[row.subject].covariates.iter().enumerate() {
            x[(r, j_total + c)] = v;
        }
    }
    let data = Dataset::new(y, x, Some(offset), role)?;
    Ok((data, rows))
}

/// Cut points at type-7 quantiles k/J of the observed event times.
pub fn choose_breaks(times: &[f64], events: &[bool], j: usize) -> Result<Breaks> {
    if j == 0 {
        return Err(Error::Spec("J must be at least 1".into()));
    }
    if j == 1 {
        return Breaks::new(Vec::new());
    }
    let mut event_times: Vec<f64> = times
        .iter()
        .zip(events)
        .filter(|&(_, &e)| e)
        .map(|(&t, _)| t)
        .collect();
    event_times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut distinct = event_times.clone();
    distinct.dedup();
    if distinct.len() < j {
        return Err(Error::Data(format!(
            "need at least {j} distinct event times for J = {j}"
        )));
    }
    let mut cuts: Vec<f64> = (1..j)
        .map(|k| quantile_type7(&event_times, k as f64 / j as f64))
        .collect();
    cuts.dedup();
    Breaks::new(cuts)
}

pub(crate) fn quantile_type7(sorted: &[f64], prob: f64) -> f64 {
    let n = sorted.len();
    let h = (n as f64 - 1.0) * prob;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Direct piecewise-exponential log-likelihood (hazard^delta times survivor),
/// used as the equivalence oracle for the Poisson expansion.
pub fn piecewise_exponential_loglik(
    records: &[SurvivalRecord],
    breaks: &Breaks,
    log_lambda: &[f64],
    beta: &[f64],
) -> f64 {
    let mut total = 0.0;
    for rec in records {
        let lin: f64 = rec.covariates.iter().zip(beta).map(|(x, b)| x * b).sum();
        let terminal = breaks.containing(rec.time);
        if rec.event {
            total += log_lambda[terminal - 1] + lin;
        }
        for j in 1..=terminal {
            let r = risk_time(rec.time, j, breaks);
            total -= log_lambda[j - 1].exp() * lin.exp() * r;
        }
    }
    total
}
