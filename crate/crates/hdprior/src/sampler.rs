//! Dynamic Hamiltonian Monte Carlo: multinomial No-U-Turn sampling with dual
//! averaging of the step size and windowed diagonal mass-matrix adaptation,
//! plus split-R-hat / bulk-ESS diagnostics and posterior summaries.

use rand::prelude::*;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::priors::LogTarget;
use crate::survival::quantile_type7;

const DIVERGENCE_THRESHOLD: f64 = 1000.0;

#[derive(Debug, Clone)]
pub struct SamplerConfig {
    pub chains: usize,
    pub iter_warmup: usize,
    pub iter_sampling: usize,
    pub seed: u64,
    pub target_accept: f64,
    pub max_tree_depth: usize,
    pub init_radius: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            chains: 4,
            iter_warmup: 1000,
            iter_sampling: 2500,
            seed: 1,
            target_accept: 0.8,
            max_tree_depth: 10,
            init_radius: 2.0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 || self.iter_warmup == 0 || self.iter_sampling == 0 {
            return Err(Error::Spec("chain and iteration counts must be at least 1".into()));
        }
        if !(0.0 < self.target_accept && self.target_accept < 1.0) {
            return Err(Error::Spec("target_accept must lie in (0, 1)".into()));
        }
        if self.max_tree_depth == 0 || self.init_radius <= 0.0 {
            return Err(Error::Spec("max_tree_depth and init_radius must be positive".into()));
        }
        Ok(())
    }
}

/// Posterior draws, chain-major: draw index = chain * iter_sampling + i.
#[derive(Debug, Clone, PartialEq)]
pub struct Draws {
    pub names: Vec<String>,
    pub chains: usize,
    pub iter_sampling: usize,
    /// Unconstrained sampler coordinates, (chains * iter_sampling) x dim.
    pub unconstrained: Vec<f64>,
    pub dim: usize,
    /// Constrained values aligned with `names`.
    pub constrained: Vec<f64>,
    pub log_density: Vec<f64>,
    pub divergent: Vec<bool>,
    /// Per-chain adapted step size, mean acceptance statistic, mean absolute
    /// Hamiltonian error, and tree-depth saturation count.
    pub step_size: Vec<f64>,
    pub accept_stat: Vec<f64>,
    pub energy_error: Vec<f64>,
    pub max_depth_hits: Vec<usize>,
}

impl Draws {
    pub fn n_draws(&self) -> usize {
        self.chains * self.iter_sampling
    }

    pub fn n_params(&self) -> usize {
        self.names.len()
    }

    pub fn divergences(&self) -> usize {
        self.divergent.iter().filter(|&&d| d).count()
    }

    /// Constrained column for one parameter, all chains concatenated.
    pub fn param(&self, j: usize) -> Vec<f64> {
        let k = self.n_params();
        (0..self.n_draws()).map(|i| self.constrained[i * k + j]).collect()
    }

    pub fn param_by_name(&self, name: &str) -> Option<Vec<f64>> {
        self.names.iter().position(|n| n == name).map(|j| self.param(j))
    }

    /// One chain's values for one parameter.
    pub fn chain_param(&self, chain: usize, j: usize) -> Vec<f64> {
        let k = self.n_params();
        (0..self.iter_sampling)
            .map(|i| self.constrained[(chain * self.iter_sampling + i) * k + j])
            .collect()
    }

    pub fn unconstrained_row(&self, i: usize) -> &[f64] {
        &self.unconstrained[i * self.dim..(i + 1) * self.dim]
    }
}

// ---- Hamiltonian dynamics ----

#[derive(Clone)]
struct State {
    q: Vec<f64>,
    p: Vec<f64>,
    grad: Vec<f64>,
    lp: f64,
}

fn kinetic(p: &[f64], inv_mass: &[f64]) -> f64 {
    p.iter().zip(inv_mass).map(|(pi, m)| 0.5 * pi * pi * m).sum()
}

fn hamiltonian(s: &State, inv_mass: &[f64]) -> f64 {
    -s.lp + kinetic(&s.p, inv_mass)
}

fn leapfrog(target: &dyn LogTarget, s: &State, eps: f64, inv_mass: &[f64]) -> State {
    let dim = s.q.len();
    let mut p = s.p.clone();
    for j in 0..dim {
        p[j] += 0.5 * eps * s.grad[j];
    }
    let mut q = s.q.clone();
    for j in 0..dim {
        q[j] += eps * inv_mass[j] * p[j];
    }
    let (lp, grad) = target.log_density_grad(&q);
    for j in 0..dim {
        p[j] += 0.5 * eps * grad[j];
    }
    State { q, p, grad, lp }
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        m + ((a - m).exp() + (b - m).exp()).ln()
    }
}

/// No-U-turn condition across a pair of boundary states; `span` is the
/// mass-weighted position difference plus-minus-minus.
fn turning(minus: &State, plus: &State, inv_mass: &[f64]) -> bool {
    let mut dot_minus = 0.0;
    let mut dot_plus = 0.0;
    for j in 0..minus.q.len() {
        let span = plus.q[j] - minus.q[j];
        dot_minus += span * inv_mass[j] * minus.p[j];
        dot_plus += span * inv_mass[j] * plus.p[j];
    }
    dot_minus < 0.0 || dot_plus < 0.0
}

struct Subtree {
    /// Endpoint nearest the growth edge and the far endpoint, in growth order.
    inner: State,
    outer: State,
    proposal: State,
    log_sum_weight: f64,
    sum_accept: f64,
    /// Accumulated |H(after step) - H(before step)| over leapfrog steps.
    sum_step_err: f64,
    n_leapfrog: usize,
    divergent: bool,
    turning: bool,
}

#[allow(clippy::too_many_arguments)]
fn build_tree(
    target: &dyn LogTarget,
    depth: usize,
    edge: &State,
    dir: f64,
    h0: f64,
    eps: f64,
    inv_mass: &[f64],
    rng: &mut ChaCha20Rng,
) -> Subtree {
    if depth == 0 {
        let h_edge = hamiltonian(edge, inv_mass);
        let s = leapfrog(target, edge, dir * eps, inv_mass);
        let h = hamiltonian(&s, inv_mass);
        let dh = h - h0;
        let step_err = (h - h_edge).abs();
        let divergent = !dh.is_finite() || dh > DIVERGENCE_THRESHOLD;
        let log_weight = if divergent { f64::NEG_INFINITY } else { -dh };
        return Subtree {
            inner: s.clone(),
            outer: s.clone(),
            proposal: s,
            log_sum_weight: log_weight,
            sum_accept: (-dh).exp().min(1.0),
            sum_step_err: if step_err.is_finite() { step_err } else { DIVERGENCE_THRESHOLD },
            n_leapfrog: 1,
            divergent,
            turning: false,
        };
    }

    let first = build_tree(target, depth - 1, edge, dir, h0, eps, inv_mass, rng);
    if first.divergent || first.turning {
        return first;
    }
    let mut second = build_tree(target, depth - 1, &first.outer, dir, h0, eps, inv_mass, rng);
    second.n_leapfrog += first.n_leapfrog;
    second.sum_accept += first.sum_accept;
    second.sum_step_err += first.sum_step_err;
    if second.divergent || second.turning {
        return second;
    }

    let total = log_sum_exp(first.log_sum_weight, second.log_sum_weight);
    let take_second =
        total > f64::NEG_INFINITY && rng.gen::<f64>().ln() < second.log_sum_weight - total;
    let proposal = if take_second { second.proposal } else { first.proposal };
    let (minus, plus) = if dir > 0.0 {
        (&first.inner, &second.outer)
    } else {
        (&second.outer, &first.inner)
    };
    let is_turning = turning(minus, plus, inv_mass);
    Subtree {
        inner: first.inner,
        outer: second.outer,
        proposal,
        log_sum_weight: total,
        sum_accept: second.sum_accept,
        sum_step_err: second.sum_step_err,
        n_leapfrog: second.n_leapfrog,
        divergent: false,
        turning: is_turning,
    }
}

struct Transition {
    state: State,
    accept_stat: f64,
    /// Mean |H(after step) - H(before step)| across the trajectory's
    /// leapfrog steps.
    energy_error: f64,
    divergent: bool,
    depth_saturated: bool,
}

fn nuts_transition(
    target: &dyn LogTarget,
    current: &State,
    eps: f64,
    inv_mass: &[f64],
    max_depth: usize,
    rng: &mut ChaCha20Rng,
) -> Transition {
    let dim = current.q.len();
    let mut start = current.clone();
    for j in 0..dim {
        let z: f64 = rng.sample(StandardNormal);
        start.p[j] = z / inv_mass[j].sqrt();
    }
    let h0 = hamiltonian(&start, inv_mass);

    let mut minus = start.clone();
    let mut plus = start.clone();
    let mut proposal = start.clone();
    let mut log_sum_weight = 0.0f64;
    let mut sum_accept = 0.0;
    let mut sum_step_err = 0.0;
    let mut n_leapfrog = 0usize;
    let mut divergent = false;
    let mut depth = 0usize;

    while depth < max_depth {
        let dir: f64 = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        let edge = if dir > 0.0 { plus.clone() } else { minus.clone() };
        let tree = build_tree(target, depth, &edge, dir, h0, eps, inv_mass, rng);
        sum_accept += tree.sum_accept;
        sum_step_err += tree.sum_step_err;
        n_leapfrog += tree.n_leapfrog;
        if tree.divergent {
            divergent = true;
            break;
        }
        if tree.turning {
            break;
        }
        // biased progressive sampling toward the new subtree
        if rng.gen::<f64>().ln() < tree.log_sum_weight - log_sum_weight {
            proposal = tree.proposal.clone();
        }
        log_sum_weight = log_sum_exp(log_sum_weight, tree.log_sum_weight);
        if dir > 0.0 {
            plus = tree.outer;
        } else {
            minus = tree.outer;
        }
        depth += 1;
        if turning(&minus, &plus, inv_mass) {
            break;
        }
    }

    Transition {
        state: proposal,
        accept_stat: if n_leapfrog > 0 { sum_accept / n_leapfrog as f64 } else { 0.0 },
        energy_error: if n_leapfrog > 0 { sum_step_err / n_leapfrog as f64 } else { 0.0 },
        divergent,
        depth_saturated: depth == max_depth,
    }
}

// ---- step-size adaptation ----

struct DualAveraging {
    mu: f64,
    log_eps: f64,
    log_eps_bar: f64,
    h_bar: f64,
    m: f64,
    delta: f64,
}

impl DualAveraging {
    fn new(eps0: f64, delta: f64) -> Self {
        DualAveraging {
            mu: (10.0 * eps0).ln(),
            log_eps: eps0.ln(),
            log_eps_bar: 0.0,
            h_bar: 0.0,
            m: 0.0,
            delta,
        }
    }

    fn update(&mut self, accept: f64) {
        const GAMMA: f64 = 0.05;
        const T0: f64 = 10.0;
        const KAPPA: f64 = 0.75;
        self.m += 1.0;
        let w = 1.0 / (self.m + T0);
        self.h_bar = (1.0 - w) * self.h_bar + w * (self.delta - accept);
        self.log_eps = self.mu - self.m.sqrt() / GAMMA * self.h_bar;
        let wk = self.m.powf(-KAPPA);
        self.log_eps_bar = wk * self.log_eps + (1.0 - wk) * self.log_eps_bar;
    }

    fn eps(&self) -> f64 {
        self.log_eps.exp()
    }

    fn adapted(&self) -> f64 {
        self.log_eps_bar.exp()
    }
}

fn find_reasonable_epsilon(
    target: &dyn LogTarget,
    state: &State,
    inv_mass: &[f64],
    rng: &mut ChaCha20Rng,
) -> f64 {
    let mut s = state.clone();
    for j in 0..s.q.len() {
        let z: f64 = rng.sample(StandardNormal);
        s.p[j] = z / inv_mass[j].sqrt();
    }
    let h0 = hamiltonian(&s, inv_mass);
    let mut eps = 1.0f64;
    let log_accept = |eps: f64| {
        let next = leapfrog(target, &s, eps, inv_mass);
        let dh = hamiltonian(&next, inv_mass) - h0;
        if dh.is_finite() {
            -dh
        } else {
            f64::NEG_INFINITY
        }
    };
    let half_ln = 0.5f64.ln();
    let dir: f64 = if log_accept(eps) > half_ln { 1.0 } else { -1.0 };
    for _ in 0..100 {
        let next = eps * 2.0f64.powf(dir);
        let la = log_accept(next);
        if (dir > 0.0 && la <= half_ln) || (dir < 0.0 && la > half_ln) {
            break;
        }
        eps = next;
        if !(1e-10..=1e10).contains(&eps) {
            break;
        }
    }
    eps
}

// ---- mass-matrix adaptation (Welford accumulator over warmup windows) ----

struct Welford {
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Welford {
    fn new(dim: usize) -> Self {
        Welford { n: 0, mean: vec![0.0; dim], m2: vec![0.0; dim] }
    }

    fn push(&mut self, x: &[f64]) {
        self.n += 1;
        for j in 0..x.len() {
            let d = x[j] - self.mean[j];
            self.mean[j] += d / self.n as f64;
            self.m2[j] += d * (x[j] - self.mean[j]);
        }
    }

    /// Regularized variance estimate shrunk toward unit scale.
    fn inv_mass(&self) -> Option<Vec<f64>> {
        if self.n < 2 {
            return None;
        }
        let n = self.n as f64;
        Some(
            self.m2
                .iter()
                .map(|m2| {
                    let var = m2 / (n - 1.0);
                    (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0))
                })
                .collect(),
        )
    }
}

/// Warmup phases: step-size-only buffers around doubling variance windows.
fn window_ends(iter_warmup: usize) -> (usize, usize, Vec<usize>) {
    let (init, term) = if iter_warmup >= 150 {
        (75, 50)
    } else {
        ((iter_warmup * 15 / 100).max(1), (iter_warmup * 10 / 100).max(1))
    };
    let mut ends = Vec::new();
    if iter_warmup > init + term {
        let last = iter_warmup - term;
        let mut size = 25.min(last - init);
        let mut pos = init;
        loop {
            let mut end = pos + size;
            // absorb a final stub window that could not double again
            if end + 2 * size > last {
                end = last;
            }
            ends.push(end.min(last));
            if end >= last {
                break;
            }
            pos = end;
            size *= 2;
        }
    }
    (init, term, ends)
}

struct ChainResult {
    unconstrained: Vec<f64>,
    constrained: Vec<f64>,
    log_density: Vec<f64>,
    divergent: Vec<bool>,
    step_size: f64,
    accept_stat: f64,
    energy_error: f64,
    max_depth_hits: usize,
}

fn init_state(
    target: &dyn LogTarget,
    radius: f64,
    rng: &mut ChaCha20Rng,
) -> Result<State> {
    let dim = target.dim();
    for _ in 0..100 {
        let q: Vec<f64> = (0..dim).map(|_| rng.gen_range(-radius..=radius)).collect();
        let (lp, grad) = target.log_density_grad(&q);
        if lp.is_finite() && grad.iter().all(|g| g.is_finite()) {
            return Ok(State { q, p: vec![0.0; dim], grad, lp });
        }
    }
    Err(Error::Init(
        "no finite log density found in 100 initialization attempts".into(),
    ))
}

fn run_chain(target: &dyn LogTarget, config: &SamplerConfig, chain: usize) -> Result<ChainResult> {
    let dim = target.dim();
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    rng.set_stream(chain as u64 + 1);

    let mut state = init_state(target, config.init_radius, &mut rng)?;
    let mut inv_mass = vec![1.0; dim];
    let eps0 = find_reasonable_epsilon(target, &state, &inv_mass, &mut rng);
    let mut da = DualAveraging::new(eps0, config.target_accept);
    let (init_buffer, _, ends) = window_ends(config.iter_warmup);
    let mut window_iter = ends.iter().copied().peekable();
    let mut welford = Welford::new(dim);

    for it in 0..config.iter_warmup {
        let t = nuts_transition(target, &state, da.eps(), &inv_mass, config.max_tree_depth, &mut rng);
        state = t.state;
        da.update(t.accept_stat);
        if it >= init_buffer && window_iter.peek().is_some() {
            welford.push(&state.q);
        }
        if window_iter.peek() == Some(&(it + 1)) {
            window_iter.next();
            if let Some(m) = welford.inv_mass() {
                inv_mass = m;
                welford = Welford::new(dim);
                let eps = find_reasonable_epsilon(target, &state, &inv_mass, &mut rng);
                da = DualAveraging::new(eps, config.target_accept);
            }
        }
    }
    let eps = if config.iter_warmup > 0 { da.adapted() } else { da.eps() };

    let mut out = ChainResult {
        unconstrained: Vec::with_capacity(config.iter_sampling * dim),
        constrained: Vec::new(),
        log_density: Vec::with_capacity(config.iter_sampling),
        divergent: Vec::with_capacity(config.iter_sampling),
        step_size: eps,
        accept_stat: 0.0,
        energy_error: 0.0,
        max_depth_hits: 0,
    };
    for _ in 0..config.iter_sampling {
        let t = nuts_transition(target, &state, eps, &inv_mass, config.max_tree_depth, &mut rng);
        state = t.state;
        out.unconstrained.extend_from_slice(&state.q);
        out.constrained.extend(target.constrain(&state.q));
        out.log_density.push(state.lp);
        out.divergent.push(t.divergent);
        out.accept_stat += t.accept_stat;
        out.energy_error += t.energy_error;
        out.max_depth_hits += usize::from(t.depth_saturated);
    }
    out.accept_stat /= config.iter_sampling as f64;
    out.energy_error /= config.iter_sampling as f64;
    Ok(out)
}

/// Run NUTS over all chains (in parallel) and merge by chain index.
pub fn sample(target: &dyn LogTarget, config: &SamplerConfig) -> Result<Draws> {
    config.validate()?;
    if target.dim() == 0 {
        return Err(Error::Spec("target dimension must be at least 1".into()));
    }
    let results: Vec<Result<ChainResult>> = (0..config.chains)
        .into_par_iter()
        .map(|c| run_chain(target, config, c))
        .collect();

    let mut draws = Draws {
        names: target.names(),
        chains: config.chains,
        iter_sampling: config.iter_sampling,
        unconstrained: Vec::new(),
        dim: target.dim(),
        constrained: Vec::new(),
        log_density: Vec::new(),
        divergent: Vec::new(),
        step_size: Vec::new(),
        accept_stat: Vec::new(),
        energy_error: Vec::new(),
        max_depth_hits: Vec::new(),
    };
    for r in results {
        let r = r?;
        draws.unconstrained.extend(r.unconstrained);
        draws.constrained.extend(r.constrained);
        draws.log_density.extend(r.log_density);
        draws.divergent.extend(r.divergent);
        draws.step_size.push(r.step_size);
        draws.accept_stat.push(r.accept_stat);
        draws.energy_error.push(r.energy_error);
        draws.max_depth_hits.push(r.max_depth_hits);
    }
    Ok(draws)
}

// ---- diagnostics ----

#[derive(Debug, Clone)]
pub struct Diagnostics {
    pub names: Vec<String>,
    pub rhat: Vec<f64>,
    pub ess_bulk: Vec<f64>,
    pub divergences: usize,
    pub accept_stat: Vec<f64>,
}

impl Diagnostics {
    pub fn max_rhat(&self) -> f64 {
        self.rhat.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_ess_bulk(&self) -> f64 {
        self.ess_bulk.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Average rank with ties, mapped through the normal quantile function:
/// z = Phi^{-1}((r - 3/8) / (S + 1/4)).
fn rank_normalize(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    use statrs::distribution::{ContinuousCDF, Normal};
    let normal = Normal::new(0.0, 1.0).unwrap();
    let total: usize = chains.iter().map(|c| c.len()).sum();
    let mut indexed: Vec<(usize, usize, f64)> = Vec::with_capacity(total);
    for (c, chain) in chains.iter().enumerate() {
        for (i, &v) in chain.iter().enumerate() {
            indexed.push((c, i, v));
        }
    }
    indexed.sort_by(|a, b| a.2.partial_cmp(&b.2).unwrap());
    let mut ranks = vec![vec![0.0; chains[0].len()]; chains.len()];
    let mut pos = 0;
    while pos < total {
        let mut end = pos + 1;
        while end < total && indexed[end].2 == indexed[pos].2 {
            end += 1;
        }
        let avg_rank = (pos + 1 + end) as f64 / 2.0; // mean of ranks pos+1..=end
        for item in &indexed[pos..end] {
            ranks[item.0][item.1] = avg_rank;
        }
        pos = end;
    }
    ranks
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|r| normal.inverse_cdf((r - 0.375) / (total as f64 + 0.25)))
                .collect()
        })
        .collect()
}

fn split_halves(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(2 * chains.len());
    for c in chains {
        let half = c.len() / 2;
        out.push(c[..half].to_vec());
        out.push(c[c.len() - half..].to_vec());
    }
    out
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sample_var(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

fn split_rhat(split: &[Vec<f64>]) -> f64 {
    let n = split[0].len();
    let chain_means: Vec<f64> = split.iter().map(|c| mean(c)).collect();
    let chain_vars: Vec<f64> = split.iter().map(|c| sample_var(c)).collect();
    let w = mean(&chain_vars);
    let b = n as f64 * sample_var(&chain_means);
    let var_plus = (n as f64 - 1.0) / n as f64 * w + b / n as f64;
    (var_plus / w).sqrt()
}

/// Split R-hat and bulk ESS on rank-normalized scores. The reported R-hat is
/// the larger of the rank-normalized and raw-scale statistics: rank
/// normalization is robust to heavy tails but compresses pure location
/// shifts between chains.
fn rhat_ess(chains: &[Vec<f64>]) -> (f64, f64) {
    let split = split_halves(chains);
    let n = split[0].len();
    let m = split.len();
    let z = rank_normalize(&split);

    let chain_means: Vec<f64> = z.iter().map(|c| mean(c)).collect();
    let chain_vars: Vec<f64> = z.iter().map(|c| sample_var(c)).collect();
    let w = mean(&chain_vars);
    let b = n as f64 * sample_var(&chain_means);
    let var_plus = (n as f64 - 1.0) / n as f64 * w + b / n as f64;
    let rhat = (var_plus / w).sqrt().max(split_rhat(&split));

    // Geyer initial monotone sequence on the mean within-chain autocovariance
    let acov = |chain: &[f64], lag: usize| -> f64 {
        let cm = mean(chain);
        (0..n - lag).map(|i| (chain[i] - cm) * (chain[i + lag] - cm)).sum::<f64>() / n as f64
    };
    let mut tau = 0.0;
    let mut prev_pair = f64::INFINITY;
    let mut lag = 0;
    while lag + 1 < n {
        let rho_even = 1.0 - (w - z.iter().map(|c| acov(c, lag)).sum::<f64>() / m as f64) / var_plus;
        let rho_odd =
            1.0 - (w - z.iter().map(|c| acov(c, lag + 1)).sum::<f64>() / m as f64) / var_plus;
        let mut pair = rho_even + rho_odd;
        if pair <= 0.0 {
            break;
        }
        if pair > prev_pair {
            pair = prev_pair;
        }
        tau += 2.0 * pair;
        prev_pair = pair;
        lag += 2;
    }
    let tau = (tau - 1.0).max(1.0 / (m * n) as f64);
    let ess = (m * n) as f64 / tau;
    (rhat, ess)
}

pub fn diagnostics(draws: &Draws) -> Result<Diagnostics> {
    if draws.iter_sampling / 2 < 4 {
        return Err(Error::Spec("diagnostics need at least 4 draws per half-chain".into()));
    }
    let mut rhat = Vec::with_capacity(draws.n_params());
    let mut ess = Vec::with_capacity(draws.n_params());
    for j in 0..draws.n_params() {
        let chains: Vec<Vec<f64>> = (0..draws.chains).map(|c| draws.chain_param(c, j)).collect();
        if chains.iter().all(|c| c.iter().all(|&v| v == c[0])) {
            // constant parameter: no variance to diagnose
            rhat.push(1.0);
            ess.push(f64::NAN);
            continue;
        }
        let (r, e) = rhat_ess(&chains);
        rhat.push(r);
        ess.push(e);
    }
    Ok(Diagnostics {
        names: draws.names.clone(),
        rhat,
        ess_bulk: ess,
        divergences: draws.divergences(),
        accept_stat: draws.accept_stat.clone(),
    })
}

// ---- summaries ----

#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub quantiles: Vec<f64>,
}

pub const DEFAULT_PROBS: [f64; 3] = [0.025, 0.5, 0.975];

pub fn summarize(draws: &Draws, probs: &[f64]) -> Result<Vec<SummaryRow>> {
    if draws.n_draws() == 0 {
        return Err(Error::Spec("cannot summarize empty draws".into()));
    }
    let mut rows = Vec::with_capacity(draws.n_params());
    for j in 0..draws.n_params() {
        let col = draws.param(j);
        let m = mean(&col);
        let sd = if col.len() > 1 { sample_var(&col).sqrt() } else { 0.0 };
        let mut sorted = col;
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let quantiles = probs.iter().map(|&p| quantile_type7(&sorted, p)).collect();
        rows.push(SummaryRow { name: draws.names[j].clone(), mean: m, sd, quantiles });
    }
    Ok(rows)
}
