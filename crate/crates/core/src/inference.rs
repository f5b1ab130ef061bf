//! Random-walk Metropolis over the joint parameter space.
//!
//! The sampler works on an unconstrained vector: positive quantities on the
//! log scale, fractions on the logit scale. The log target is a sum of terms
//! (prior, budding, one per flow time point) and every proposal block lists
//! the terms it touches, so a per-time update recomputes only that time.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::budding::{budding_log_likelihood, BuddingDataset};
use crate::error::{CloccsError, Result};
use crate::flow::{FlowDataset, FlowEvaluator, FlowHyper, FlowPerTime, FlowShared};
use crate::population::{CloccsParams, ModelConfig};
use crate::prior::{FullParams, PhaseBlock, Prior, SubmodelSpec};

/// Attempts at finding a finite starting point.
pub const INIT_ATTEMPTS: usize = 10_000;

/// Log target written as a sum of separately computable terms.
pub trait Target {
    fn dim(&self) -> usize;

    fn names(&self) -> Vec<String>;

    fn n_terms(&self) -> usize;

    /// Proposal blocks in sweep order, each a list of coordinates.
    fn blocks(&self) -> Vec<Vec<usize>>;

    /// Terms that depend on the coordinates of `block`.
    fn affected_terms(&self, block: usize) -> Vec<usize>;

    /// Values of the listed terms at unconstrained point `x`.
    fn eval_terms(&self, x: &[f64], terms: &[usize]) -> Vec<f64>;

    fn initial_point(&self, rng: &mut ChaCha8Rng) -> Result<Vec<f64>>;

    /// Starting proposal SD per coordinate.
    fn initial_scales(&self) -> Vec<f64> {
        vec![0.1; self.dim()]
    }

    /// Unconstrained point to reported coordinates.
    fn to_natural(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }

    fn from_natural(&self, v: &[f64]) -> Vec<f64> {
        v.to_vec()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let all: Vec<usize> = (0..self.n_terms()).collect();
        self.eval_terms(x, &all).iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Blocking {
    /// Joint proposals within parameter groups, adapted covariance.
    #[default]
    Grouped,
    /// One coordinate at a time.
    SingleSite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    /// Total sweeps including burn-in.
    pub iterations: usize,
    pub thin: usize,
    pub burn_in: usize,
    pub seed: u64,
    /// Sweeps between acceptance-rate adjustments during burn-in.
    pub adapt_window: usize,
    pub accept_low: f64,
    pub accept_high: f64,
    pub blocking: Blocking,
    /// Starting proposal SDs on the unconstrained scale; target defaults if `None`.
    pub scales: Option<Vec<f64>>,
}

impl SamplerConfig {
    pub fn paper() -> Self {
        Self {
            iterations: 400_000,
            thin: 4,
            burn_in: 100_000,
            seed: 1,
            adapt_window: 50,
            accept_low: 0.2,
            accept_high: 0.5,
            blocking: Blocking::Grouped,
            scales: None,
        }
    }

    pub fn reduced() -> Self {
        Self {
            iterations: 50_000,
            burn_in: 10_000,
            ..Self::paper()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations <= self.burn_in {
            return Err(CloccsError::Config(format!(
                "iterations ({}) must exceed burn_in ({})",
                self.iterations, self.burn_in
            )));
        }
        if self.thin == 0 || self.adapt_window == 0 {
            return Err(CloccsError::Config("thin and adapt_window must be at least 1".into()));
        }
        if !(0.0 < self.accept_low && self.accept_low < self.accept_high && self.accept_high < 1.0) {
            return Err(CloccsError::Config(
                "acceptance band must satisfy 0 < low < high < 1".into(),
            ));
        }
        if let Some(s) = &self.scales {
            if s.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                return Err(CloccsError::Config("proposal scales must be positive".into()));
            }
        }
        Ok(())
    }
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self::paper()
    }
}

/// Multiplier for a block's proposal scale after a window with acceptance `rate`.
pub fn adapt_scale(rate: f64, low: f64, high: f64) -> f64 {
    if rate < low {
        (rate / (low + 0.1)).max(0.25)
    } else if rate > high {
        (rate / (high - 0.15)).min(3.0)
    } else {
        1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockAcceptance {
    pub label: String,
    /// Accepted fraction after burn-in.
    pub rate: f64,
}

/// Saved draws in reported coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub names: Vec<String>,
    pub draws: Vec<Vec<f64>>,
    pub log_posterior: Vec<f64>,
    pub acceptance: Vec<BlockAcceptance>,
    pub seed: u64,
}

impl Chain {
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.draws.iter().map(|r| r[j]).collect()
    }

    pub fn column_by_name(&self, name: &str) -> Option<Vec<f64>> {
        self.names.iter().position(|n| n == name).map(|j| self.column(j))
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }
}

struct BlockState {
    coords: Vec<usize>,
    terms: Vec<usize>,
    chol: DMatrix<f64>,
    scale: f64,
    window_accepts: usize,
    accepts: usize,
    tries: usize,
    sum: DVector<f64>,
    outer: DMatrix<f64>,
    samples: usize,
    cov_accepts: usize,
}

impl BlockState {
    fn reset_moments(&mut self) {
        self.sum.fill(0.0);
        self.outer.fill(0.0);
        self.samples = 0;
        self.cov_accepts = 0;
    }

    fn refit_covariance(&mut self) {
        let d = self.coords.len();
        if self.samples < (10 * d).max(50) || self.cov_accepts < 5 * d {
            return;
        }
        let n = self.samples as f64;
        let mean = &self.sum / n;
        let mut cov = (&self.outer - &mean * mean.transpose() * n) / (n - 1.0);
        for i in 0..d {
            let v = cov[(i, i)];
            if !(v > 0.0 && v.is_finite()) {
                return;
            }
            cov[(i, i)] = v * (1.0 + 1e-10);
        }
        if let Some(ch) = cov.cholesky() {
            self.chol = ch.l();
            self.scale = 2.38 / (d as f64).sqrt();
        }
    }
}

/// Runs one chain. `init` is an unconstrained starting point; a prior draw is used if `None`.
pub fn run_chain<T: Target + ?Sized>(target: &T, config: &SamplerConfig, init: Option<Vec<f64>>) -> Result<Chain> {
    config.validate()?;
    let dim = target.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut x = match init {
        Some(v) => v,
        None => target.initial_point(&mut rng)?,
    };
    if x.len() != dim {
        return Err(CloccsError::InvalidParameter(format!(
            "starting point has {} coordinates, target has {dim}",
            x.len()
        )));
    }
    let all_terms: Vec<usize> = (0..target.n_terms()).collect();
    let mut terms = target.eval_terms(&x, &all_terms);
    if !terms.iter().sum::<f64>().is_finite() {
        return Err(CloccsError::Numerical(
            "starting point has non-finite log posterior".into(),
        ));
    }
    let init_scales = match &config.scales {
        Some(s) if s.len() == dim => s.clone(),
        Some(s) => {
            return Err(CloccsError::Config(format!(
                "{} proposal scales given for {dim} parameters",
                s.len()
            )))
        }
        None => target.initial_scales(),
    };

    let groups = target.blocks();
    let mut blocks: Vec<BlockState> = Vec::new();
    let mut labels: Vec<String> = Vec::new();
    let names = target.names();
    for (gi, group) in groups.iter().enumerate() {
        let affected = target.affected_terms(gi);
        let split: Vec<Vec<usize>> = match config.blocking {
            Blocking::Grouped => vec![group.clone()],
            Blocking::SingleSite => group.iter().map(|&c| vec![c]).collect(),
        };
        for coords in split {
            let d = coords.len();
            let chol = DMatrix::from_diagonal(&DVector::from_iterator(d, coords.iter().map(|&c| init_scales[c])));
            labels.push(coords.iter().map(|&c| names[c].as_str()).collect::<Vec<_>>().join("+"));
            blocks.push(BlockState {
                coords,
                terms: affected.clone(),
                chol,
                scale: 1.0,
                window_accepts: 0,
                accepts: 0,
                tries: 0,
                sum: DVector::zeros(d),
                outer: DMatrix::zeros(d, d),
                samples: 0,
                cov_accepts: 0,
            });
        }
    }

    let cov_interval = (config.burn_in / 10).max(200);
    let cov_start = cov_interval;
    let mut draws = Vec::with_capacity((config.iterations - config.burn_in) / config.thin + 1);
    let mut log_post = Vec::with_capacity(draws.capacity());
    let mut proposal = x.clone();
    let mut z = DVector::<f64>::zeros(0);

    for it in 0..config.iterations {
        let burning = it < config.burn_in;
        if it == config.burn_in {
            for b in &mut blocks {
                b.accepts = 0;
                b.tries = 0;
            }
        }
        for b in &mut blocks {
            let d = b.coords.len();
            if z.len() != d {
                z = DVector::zeros(d);
            }
            for zi in z.iter_mut() {
                *zi = rng.sample(StandardNormal);
            }
            let step = &b.chol * &z * b.scale;
            proposal.copy_from_slice(&x);
            for (k, &c) in b.coords.iter().enumerate() {
                proposal[c] += step[k];
            }
            let new_terms = target.eval_terms(&proposal, &b.terms);
            let old: f64 = b.terms.iter().map(|&t| terms[t]).sum();
            let new: f64 = new_terms.iter().sum();
            let log_u: f64 = rng.random::<f64>().ln();
            b.tries += 1;
            if new.is_finite() && log_u < new - old {
                for &c in &b.coords {
                    x[c] = proposal[c];
                }
                for (&t, v) in b.terms.iter().zip(new_terms) {
                    terms[t] = v;
                }
                b.accepts += 1;
                b.window_accepts += 1;
                b.cov_accepts += 1;
            }
            if burning && it >= cov_start / 2 {
                let v = DVector::from_iterator(d, b.coords.iter().map(|&c| x[c]));
                b.outer += &v * v.transpose();
                b.sum += v;
                b.samples += 1;
            }
        }
        if burning {
            if (it + 1) % config.adapt_window == 0 {
                for b in &mut blocks {
                    let rate = b.window_accepts as f64 / config.adapt_window as f64;
                    b.scale *= adapt_scale(rate, config.accept_low, config.accept_high);
                    b.window_accepts = 0;
                }
            }
            if (it + 1) >= cov_start && (it + 1) % cov_interval == 0 && it + 1 < config.burn_in {
                for b in &mut blocks {
                    b.refit_covariance();
                    b.reset_moments();
                }
            }
        } else if (it - config.burn_in + 1).is_multiple_of(config.thin) {
            draws.push(target.to_natural(&x));
            log_post.push(terms.iter().sum());
        }
    }

    let acceptance = blocks
        .iter()
        .zip(labels)
        .map(|(b, label)| BlockAcceptance {
            label,
            rate: if b.tries > 0 {
                b.accepts as f64 / b.tries as f64
            } else {
                0.0
            },
        })
        .collect();
    Ok(Chain {
        names,
        draws,
        log_posterior: log_post,
        acceptance,
        seed: config.seed,
    })
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub parameter: String,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary {
    pub rows: Vec<SummaryRow>,
}

impl PosteriorSummary {
    pub fn get(&self, name: &str) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.parameter == name)
    }
}

fn summary_row(name: &str, mut values: Vec<f64>) -> SummaryRow {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.sort_by(f64::total_cmp);
    SummaryRow {
        parameter: name.to_string(),
        mean,
        lower: quantile(&values, 0.025),
        upper: quantile(&values, 0.975),
    }
}

/// Means and 95% equal-tailed intervals per column, plus `start_mean` (= -mu0).
pub fn summarize(chain: &Chain) -> Result<PosteriorSummary> {
    if chain.is_empty() {
        return Err(CloccsError::Validation("cannot summarize an empty chain".into()));
    }
    let mut rows: Vec<SummaryRow> = chain
        .names
        .iter()
        .enumerate()
        .map(|(j, n)| summary_row(n, chain.column(j)))
        .collect();
    if let Some(mu0) = chain.column_by_name("mu0") {
        rows.push(summary_row("start_mean", mu0.into_iter().map(|v| -v).collect()));
    }
    Ok(PosteriorSummary { rows })
}

/// Effective sample size by Geyer's initial positive sequence; 0 for a constant series.
pub fn effective_sample_size(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 4 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let c0 = centered.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if !(c0 > 0.0) {
        return 0.0;
    }
    let rho = |k: usize| -> f64 {
        centered[..n - k]
            .iter()
            .zip(&centered[k..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n as f64
            / c0
    };
    let mut sum_pairs = 0.0;
    let mut m = 0;
    while 2 * m + 1 < n {
        let gamma = rho(2 * m) + rho(2 * m + 1);
        if gamma <= 0.0 {
            break;
        }
        sum_pairs += gamma;
        m += 1;
    }
    let tau = (2.0 * sum_pairs - 1.0).max(1.0);
    n as f64 / tau
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    Identity,
    Log,
    Logit,
}

impl Transform {
    pub fn forward(self, v: f64) -> f64 {
        match self {
            Self::Identity => v,
            Self::Log => v.ln(),
            Self::Logit => (v / (1.0 - v)).ln(),
        }
    }

    pub fn inverse(self, y: f64) -> f64 {
        match self {
            Self::Identity => y,
            Self::Log => y.exp(),
            Self::Logit => 1.0 / (1.0 + (-y).exp()),
        }
    }

    /// ln |dv/dy| at unconstrained `y`.
    pub fn ln_jacobian(self, y: f64) -> f64 {
        match self {
            Self::Identity => 0.0,
            Self::Log => y,
            Self::Logit => -softplus(-y) - softplus(y),
        }
    }
}

fn softplus(y: f64) -> f64 {
    if y > 0.0 {
        y + (-y).exp().ln_1p()
    } else {
        y.exp().ln_1p()
    }
}

/// Unnormalized log posterior on the natural scale.
pub fn log_posterior(
    p: &FullParams,
    budding: Option<&BuddingDataset>,
    flow: Option<&FlowDataset>,
    prior: &Prior,
    config: ModelConfig,
    sub: SubmodelSpec,
) -> f64 {
    let lp = prior.log_prior(p, sub);
    if !lp.is_finite() {
        return f64::NEG_INFINITY;
    }
    let mut total = lp;
    if let Some(data) = budding {
        let Some(beta) = p.beta else {
            return f64::NEG_INFINITY;
        };
        total += budding_log_likelihood(&p.theta, beta, data, config);
    }
    if let Some(data) = flow {
        let Some(shared) = p.shared else {
            return f64::NEG_INFINITY;
        };
        if p.per_time.len() != data.len() {
            return f64::NEG_INFINITY;
        }
        for (rec, pt) in data.records().iter().zip(&p.per_time) {
            total += FlowEvaluator::new(&p.theta, &shared, pt, rec.time(), config).log_likelihood(rec);
        }
    }
    if total.is_nan() {
        f64::NEG_INFINITY
    } else {
        total
    }
}

#[derive(Debug, Clone, Default)]
struct Slots {
    mu0: Option<usize>,
    sigma0: Option<usize>,
    sigmav: usize,
    lambda: usize,
    delta: Option<usize>,
    beta: Option<usize>,
    gamma1: Option<usize>,
    gamma2: Option<usize>,
    hyper: Option<usize>,
    per_time: Option<usize>,
}

/// The CLOCCS posterior for a given data combination and submodel.
#[derive(Debug, Clone)]
pub struct CloccsModel {
    prior: Prior,
    config: ModelConfig,
    sub: SubmodelSpec,
    budding: Option<BuddingDataset>,
    flow: Option<FlowDataset>,
    names: Vec<String>,
    transforms: Vec<Transform>,
    slots: Slots,
}

const HYPER_NAMES: [&str; 6] = [
    "mu_tau",
    "sigma2_tau",
    "mu_alpha1",
    "sigma2_alpha1",
    "mu_alpha2",
    "sigma2_alpha2",
];

impl CloccsModel {
    pub fn new(
        prior: Prior,
        config: ModelConfig,
        sub: SubmodelSpec,
        budding: Option<BuddingDataset>,
        flow: Option<FlowDataset>,
    ) -> Result<Self> {
        let budding = budding.filter(|d| !d.is_empty());
        let flow = flow.filter(|d| !d.is_empty());
        if budding.is_none() && flow.is_none() {
            return Err(CloccsError::Validation(
                "at least one non-empty dataset is required".into(),
            ));
        }
        let mut names = Vec::new();
        let mut transforms = Vec::new();
        let mut push = |name: &str, tr: Transform| {
            names.push(name.to_string());
            transforms.push(tr);
            names.len() - 1
        };
        let mut slots = Slots::default();
        if !sub.fix_mu0 {
            slots.mu0 = Some(push("mu0", Transform::Log));
        }
        if !sub.fix_sigma0 {
            slots.sigma0 = Some(push("sigma0", Transform::Log));
        }
        slots.sigmav = push("sigmav", Transform::Log);
        slots.lambda = push("lambda", Transform::Log);
        if !sub.fix_delta {
            slots.delta = Some(push("delta", Transform::Log));
        }
        if budding.is_some() {
            slots.beta = Some(push("beta", Transform::Logit));
        }
        if let Some(f) = &flow {
            slots.gamma1 = Some(push("gamma1", Transform::Logit));
            slots.gamma2 = Some(push("gamma2", Transform::Logit));
            for (k, n) in HYPER_NAMES.iter().enumerate() {
                let i = push(
                    n,
                    if k % 2 == 0 {
                        Transform::Identity
                    } else {
                        Transform::Log
                    },
                );
                slots.hyper.get_or_insert(i);
            }
            for i in 0..f.len() {
                let first = push(&format!("alpha1_{i}"), Transform::Identity);
                slots.per_time.get_or_insert(first);
                push(&format!("alpha2_{i}"), Transform::Log);
                push(&format!("tau_{i}"), Transform::Log);
            }
        }
        Ok(Self {
            prior,
            config,
            sub,
            budding,
            flow,
            names,
            transforms,
            slots,
        })
    }

    pub fn prior(&self) -> &Prior {
        &self.prior
    }

    pub fn config(&self) -> ModelConfig {
        self.config
    }

    pub fn submodel(&self) -> SubmodelSpec {
        self.sub
    }

    pub fn budding(&self) -> Option<&BuddingDataset> {
        self.budding.as_ref()
    }

    pub fn flow(&self) -> Option<&FlowDataset> {
        self.flow.as_ref()
    }

    pub fn phase(&self) -> PhaseBlock {
        match (self.budding.is_some(), self.flow.is_some()) {
            (true, true) => PhaseBlock::Joint,
            (true, false) => PhaseBlock::Budding,
            _ => PhaseBlock::Flow,
        }
    }

    fn n_flow(&self) -> usize {
        self.flow.as_ref().map_or(0, |f| f.len())
    }

    fn flow_term_base(&self) -> usize {
        1 + usize::from(self.budding.is_some())
    }

    /// Parameters from a vector in reported coordinates.
    pub fn decode(&self, v: &[f64]) -> FullParams {
        let s = &self.slots;
        let sq = |i: Option<usize>| i.map_or(0.0, |i| v[i] * v[i]);
        let theta = CloccsParams {
            mu0: s.mu0.map_or(0.0, |i| v[i]),
            sigma0_sq: sq(s.sigma0),
            sigmav_sq: v[s.sigmav] * v[s.sigmav],
            lambda: v[s.lambda],
            delta: s.delta.map_or(0.0, |i| v[i]),
        };
        let shared = match (s.gamma1, s.gamma2) {
            (Some(a), Some(b)) => Some(FlowShared {
                gamma1: v[a],
                gamma2: v[b],
            }),
            _ => None,
        };
        let hyper = s.hyper.map(|h| FlowHyper {
            mu_tau: v[h],
            sigma2_tau: v[h + 1],
            mu_a1: v[h + 2],
            sigma2_a1: v[h + 3],
            mu_a2: v[h + 4],
            sigma2_a2: v[h + 5],
        });
        let per_time = match s.per_time {
            Some(p0) => (0..self.n_flow())
                .map(|i| FlowPerTime {
                    alpha1: v[p0 + 3 * i],
                    alpha2: v[p0 + 3 * i + 1],
                    tau: v[p0 + 3 * i + 2],
                })
                .collect(),
            None => Vec::new(),
        };
        FullParams {
            theta,
            beta: s.beta.map(|i| v[i]),
            shared,
            hyper,
            per_time,
        }
    }

    /// Vector in reported coordinates for `p`; inverse of [`decode`](Self::decode).
    pub fn encode(&self, p: &FullParams) -> Result<Vec<f64>> {
        let s = &self.slots;
        let mut v = vec![0.0; self.names.len()];
        if let Some(i) = s.mu0 {
            v[i] = p.theta.mu0;
        }
        if let Some(i) = s.sigma0 {
            v[i] = p.theta.sigma0_sq.sqrt();
        }
        v[s.sigmav] = p.theta.sigmav_sq.sqrt();
        v[s.lambda] = p.theta.lambda;
        if let Some(i) = s.delta {
            v[i] = p.theta.delta;
        }
        if let Some(i) = s.beta {
            v[i] = p
                .beta
                .ok_or_else(|| CloccsError::InvalidParameter("beta missing".into()))?;
        }
        if let (Some(a), Some(b)) = (s.gamma1, s.gamma2) {
            let g = p
                .shared
                .ok_or_else(|| CloccsError::InvalidParameter("gamma1/gamma2 missing".into()))?;
            v[a] = g.gamma1;
            v[b] = g.gamma2;
        }
        if let Some(h) = s.hyper {
            let hy = p
                .hyper
                .ok_or_else(|| CloccsError::InvalidParameter("hyperparameters missing".into()))?;
            v[h..h + 6].copy_from_slice(&[hy.mu_tau, hy.sigma2_tau, hy.mu_a1, hy.sigma2_a1, hy.mu_a2, hy.sigma2_a2]);
        }
        if let Some(p0) = s.per_time {
            if p.per_time.len() != self.n_flow() {
                return Err(CloccsError::InvalidParameter(format!(
                    "{} per-time parameter sets for {} flow time points",
                    p.per_time.len(),
                    self.n_flow()
                )));
            }
            for (i, pt) in p.per_time.iter().enumerate() {
                v[p0 + 3 * i..p0 + 3 * i + 3].copy_from_slice(&[pt.alpha1, pt.alpha2, pt.tau]);
            }
        }
        Ok(v)
    }

    /// Log posterior at a point in reported coordinates.
    pub fn log_posterior_natural(&self, v: &[f64]) -> f64 {
        log_posterior(
            &self.decode(v),
            self.budding.as_ref(),
            self.flow.as_ref(),
            &self.prior,
            self.config,
            self.sub,
        )
    }

    /// Log likelihood (no prior) at a point in reported coordinates.
    pub fn log_likelihood_natural(&self, v: &[f64]) -> f64 {
        let p = self.decode(v);
        let lp = self.prior.log_prior(&p, self.sub);
        if !lp.is_finite() {
            return f64::NEG_INFINITY;
        }
        self.log_posterior_natural(v) - lp
    }

    /// Coordinates of the structural and beta parameters, the first
    /// hyperparameter and the first per-time parameter.
    pub(crate) fn layout(&self) -> (Vec<usize>, Option<usize>, Option<usize>) {
        let s = &self.slots;
        let mut core: Vec<usize> = [
            s.mu0,
            s.sigma0,
            Some(s.sigmav),
            Some(s.lambda),
            s.delta,
            s.beta,
            s.gamma1,
            s.gamma2,
        ]
        .into_iter()
        .flatten()
        .collect();
        core.sort_unstable();
        (core, s.hyper, s.per_time)
    }

    pub(crate) fn budding_term(&self) -> Option<usize> {
        self.budding.is_some().then_some(1)
    }

    /// Coordinates of gamma1 and gamma2 when flow data is present.
    pub(crate) fn phase_coords(&self) -> Option<[usize; 2]> {
        Some([self.slots.gamma1?, self.slots.gamma2?])
    }

    pub(crate) fn flow_term(&self, i: usize) -> usize {
        self.flow_term_base() + i
    }

    /// Prior draw for this model's parameter set, in reported coordinates.
    pub fn sample_prior_natural(&self, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        let p = self.prior.sample(Some(self.phase()), self.n_flow(), self.sub, rng)?;
        self.encode(&p)
    }
}

impl Target for CloccsModel {
    fn dim(&self) -> usize {
        self.names.len()
    }

    fn names(&self) -> Vec<String> {
        self.names.clone()
    }

    fn n_terms(&self) -> usize {
        self.flow_term_base() + self.n_flow()
    }

    fn blocks(&self) -> Vec<Vec<usize>> {
        let s = &self.slots;
        let mut structural: Vec<usize> = [
            s.mu0,
            s.sigma0,
            Some(s.sigmav),
            Some(s.lambda),
            s.delta,
            s.gamma1,
            s.gamma2,
        ]
        .into_iter()
        .flatten()
        .collect();
        structural.sort_unstable();
        let mut out = vec![structural];
        if let Some(b) = s.beta {
            out.push(vec![b]);
        }
        if let Some(h) = s.hyper {
            out.push((h..h + 6).collect());
        }
        if let Some(p0) = s.per_time {
            for i in 0..self.n_flow() {
                out.push((p0 + 3 * i..p0 + 3 * i + 3).collect());
            }
        }
        out
    }

    fn affected_terms(&self, block: usize) -> Vec<usize> {
        let all: Vec<usize> = (0..self.n_terms()).collect();
        let has_beta = self.slots.beta.is_some();
        let has_hyper = self.slots.hyper.is_some();
        if block == 0 {
            // gamma1/gamma2 live here but never touch the budding term; the
            // structural parameters touch everything.
            return all;
        }
        let mut k = 1;
        if has_beta {
            if block == k {
                return vec![0, 1];
            }
            k += 1;
        }
        if has_hyper {
            if block == k {
                return vec![0];
            }
            k += 1;
        }
        vec![0, self.flow_term_base() + (block - k)]
    }

    fn eval_terms(&self, x: &[f64], terms: &[usize]) -> Vec<f64> {
        let mut jac = 0.0;
        let v: Vec<f64> = x
            .iter()
            .zip(&self.transforms)
            .map(|(&y, tr)| {
                jac += tr.ln_jacobian(y);
                tr.inverse(y)
            })
            .collect();
        let p = self.decode(&v);
        let lp = self.prior.log_prior(&p, self.sub);
        if !(lp.is_finite() && jac.is_finite()) {
            return vec![f64::NEG_INFINITY; terms.len()];
        }
        let base = self.flow_term_base();
        terms
            .iter()
            .map(|&t| {
                let val = if t == 0 {
                    lp + jac
                } else if t < base {
                    match (self.budding.as_ref(), p.beta) {
                        (Some(d), Some(beta)) => budding_log_likelihood(&p.theta, beta, d, self.config),
                        _ => f64::NEG_INFINITY,
                    }
                } else {
                    let i = t - base;
                    match (self.flow.as_ref(), p.shared) {
                        (Some(f), Some(shared)) => {
                            let rec = &f.records()[i];
                            FlowEvaluator::new(&p.theta, &shared, &p.per_time[i], rec.time(), self.config)
                                .log_likelihood(rec)
                        }
                        _ => f64::NEG_INFINITY,
                    }
                };
                if val.is_nan() {
                    f64::NEG_INFINITY
                } else {
                    val
                }
            })
            .collect()
    }

    fn initial_point(&self, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        for _ in 0..INIT_ATTEMPTS {
            let v = self.sample_prior_natural(rng)?;
            let x = self.from_natural(&v);
            if self.log_density(&x).is_finite() {
                return Ok(x);
            }
        }
        Err(CloccsError::Numerical(format!(
            "no prior draw with finite posterior in {INIT_ATTEMPTS} attempts"
        )))
    }

    fn initial_scales(&self) -> Vec<f64> {
        self.names
            .iter()
            .map(|n| match n.as_str() {
                "lambda" => 0.01,
                "mu0" | "delta" | "beta" | "gamma1" | "gamma2" => 0.05,
                "sigma0" | "sigmav" => 0.1,
                n if n.starts_with("sigma2_") => 0.3,
                n if n.starts_with("mu_") => 0.05,
                n if n.starts_with("alpha1_") => 0.005,
                n if n.starts_with("alpha2_") => 0.01,
                n if n.starts_with("tau_") => 0.02,
                _ => 0.05,
            })
            .collect()
    }

    fn to_natural(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.transforms).map(|(&y, tr)| tr.inverse(y)).collect()
    }

    fn from_natural(&self, v: &[f64]) -> Vec<f64> {
        v.iter().zip(&self.transforms).map(|(&y, tr)| tr.forward(y)).collect()
    }
}
