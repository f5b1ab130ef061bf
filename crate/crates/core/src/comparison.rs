//! Marginal likelihoods by importance sampling, log Bayes factors over the
//! nested submodel lattice, and budding-curve RMSE.
//!
//! Importance densities are multivariate t fits to a chain, built in the
//! sampler's unconstrained coordinates so that every draw lands in the
//! support; the target density there already carries the Jacobian.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use statrs::function::gamma::ln_gamma;

use crate::budding::{fitted_budding_curve, BuddingDataset};
use crate::error::{CloccsError, Result};
use crate::inference::{run_chain, summarize, Chain, CloccsModel, PosteriorSummary, SamplerConfig, Target};
use crate::population::{CloccsParams, ModelConfig};
use crate::prior::{Prior, SubmodelSpec};
use crate::start::{search_start, StartSearch};

pub const IMPORTANCE_DF: f64 = 100.0;
pub const MAX_JITTER: f64 = 1e-10;
pub const DEFAULT_IMPORTANCE_DRAWS: usize = 10_000;
pub const DEFAULT_RMSE_DRAWS: usize = 1000;

/// Multivariate Student t with `df` degrees of freedom, parameterized by its
/// mean and covariance.
#[derive(Debug, Clone)]
pub struct MultivariateT {
    mean: DVector<f64>,
    /// Lower Cholesky factor of the scale matrix `cov * (df - 2) / df`.
    chol: DMatrix<f64>,
    df: f64,
    ln_norm: f64,
    jitter: f64,
}

impl MultivariateT {
    /// Fails if `df <= 2` or the covariance stays singular after a relative
    /// diagonal jitter of [`MAX_JITTER`].
    pub fn new(mean: Vec<f64>, cov: DMatrix<f64>, df: f64) -> Result<Self> {
        let d = mean.len();
        if !(df > 2.0) {
            return Err(CloccsError::InvalidParameter(format!(
                "t degrees of freedom must exceed 2, got {df}"
            )));
        }
        if d == 0 || cov.nrows() != d || cov.ncols() != d {
            return Err(CloccsError::InvalidParameter(format!(
                "covariance is {}x{} for a mean of length {d}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(CloccsError::Numerical("non-finite mean or covariance".into()));
        }
        let scale = cov * ((df - 2.0) / df);
        for jitter in [0.0, 1e-12, 1e-11, MAX_JITTER] {
            let mut m = scale.clone();
            for i in 0..d {
                m[(i, i)] *= 1.0 + jitter;
            }
            if let Some(ch) = m.cholesky() {
                let l = ch.l();
                let ln_det_half: f64 = l.diagonal().iter().map(|v| v.ln()).sum();
                let ln_norm = ln_gamma(0.5 * (df + d as f64))
                    - ln_gamma(0.5 * df)
                    - 0.5 * d as f64 * (df * std::f64::consts::PI).ln()
                    - ln_det_half;
                return Ok(Self {
                    mean: DVector::from_vec(mean),
                    chol: l,
                    df,
                    ln_norm,
                    jitter,
                });
            }
        }
        Err(CloccsError::Numerical("covariance is not positive definite".into()))
    }

    /// Moment-matched fit to a set of points.
    pub fn from_draws(draws: &[Vec<f64>], df: f64) -> Result<Self> {
        let n = draws.len();
        let d = draws.first().map_or(0, |v| v.len());
        if n <= d + 1 {
            return Err(CloccsError::InvalidParameter(format!(
                "{n} draws cannot fix a {d}-dimensional covariance"
            )));
        }
        let mut mean = vec![0.0; d];
        for v in draws {
            for (m, x) in mean.iter_mut().zip(v) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut cov = DMatrix::zeros(d, d);
        for v in draws {
            let c = DVector::from_iterator(d, v.iter().zip(&mean).map(|(x, m)| x - m));
            cov += &c * c.transpose();
        }
        cov /= (n - 1) as f64;
        Self::new(mean, cov, df)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn df(&self) -> f64 {
        self.df
    }

    /// Relative diagonal jitter that was needed for the factorization.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn mean(&self) -> &[f64] {
        self.mean.as_slice()
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        &self.chol * self.chol.transpose() * (self.df / (self.df - 2.0))
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        let diff = DVector::from_iterator(d, x.iter().zip(self.mean.iter()).map(|(a, b)| a - b));
        let z = self
            .chol
            .solve_lower_triangular(&diff)
            .expect("Cholesky factor has a positive diagonal");
        let q = z.norm_squared();
        self.ln_norm - 0.5 * (self.df + d as f64) * (q / self.df).ln_1p()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let d = self.dim();
        let z = DVector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let u: f64 = ChiSquared::new(self.df).expect("df > 2").sample(rng);
        let x = &self.mean + &self.chol * z * (self.df / u).sqrt();
        x.as_slice().to_vec()
    }
}

/// An importance-sampling estimate of a log marginal likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalEstimate {
    pub log_ml: f64,
    /// Variance of the weights normalized to mean one.
    pub weight_variance: f64,
    /// `(sum w)^2 / sum w^2`.
    pub ess: f64,
    pub n_draws: usize,
    /// Delta-method standard error of `log_ml`.
    pub mc_se: f64,
}

/// Importance-sampling estimate of the normalizing constant of `target`'s
/// density, using `n` draws from `q`.
pub fn estimate_log_marginal<T: Target + ?Sized>(
    target: &T,
    q: &MultivariateT,
    n: usize,
    seed: u64,
) -> Result<MarginalEstimate> {
    if n < 2 {
        return Err(CloccsError::InvalidParameter(
            "at least two importance draws are needed".into(),
        ));
    }
    if q.dim() != target.dim() {
        return Err(CloccsError::InvalidParameter(format!(
            "importance density has dimension {}, target {}",
            q.dim(),
            target.dim()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let log_w: Vec<f64> = (0..n)
        .map(|_| {
            let x = q.sample(&mut rng);
            let lp = target.log_density(&x);
            if lp.is_nan() {
                f64::NEG_INFINITY
            } else {
                lp - q.log_density(&x)
            }
        })
        .collect();
    weights_to_estimate(&log_w)
}

/// Log-mean-exp of log importance weights with the weight diagnostics.
pub fn weights_to_estimate(log_w: &[f64]) -> Result<MarginalEstimate> {
    let n = log_w.len();
    let top = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Err(CloccsError::Numerical(
            "every importance weight is zero; the importance density misses the posterior".into(),
        ));
    }
    let (s1, s2) = log_w.iter().fold((0.0, 0.0), |(a, b), &lw| {
        let w = (lw - top).exp();
        (a + w, b + w * w)
    });
    let nf = n as f64;
    let weight_variance = (nf * s2 / (s1 * s1) - 1.0).max(0.0);
    Ok(MarginalEstimate {
        log_ml: top + (s1 / nf).ln(),
        weight_variance,
        ess: s1 * s1 / s2,
        n_draws: n,
        mc_se: (weight_variance / (nf - 1.0)).sqrt(),
    })
}

/// `ln p(y | larger) - ln p(y | smaller)`.
pub fn log_bayes_factor(larger: &MarginalEstimate, smaller: &MarginalEstimate) -> f64 {
    larger.log_ml - smaller.log_ml
}

/// Monte Carlo standard error of a log Bayes factor from independent runs.
pub fn combined_se(a: &MarginalEstimate, b: &MarginalEstimate) -> f64 {
    a.mc_se.hypot(b.mc_se)
}

/// Mean and SD over draws of the RMSE, in percentage points, between the
/// fitted budding curve and the observed percent budded.
pub fn budding_rmse(draws: &[(CloccsParams, f64)], data: &BuddingDataset, config: ModelConfig) -> Result<(f64, f64)> {
    if draws.is_empty() {
        return Err(CloccsError::InvalidParameter("no posterior draws for RMSE".into()));
    }
    if data.is_empty() {
        return Err(CloccsError::InvalidParameter("empty budding dataset".into()));
    }
    let times: Vec<f64> = data.records().iter().map(|r| r.time()).collect();
    let observed: Vec<f64> = data.records().iter().map(|r| 100.0 * r.fraction()).collect();
    let values: Vec<f64> = draws
        .iter()
        .map(|(theta, beta)| {
            let fit = fitted_budding_curve(theta, *beta, &times, config);
            let sse: f64 = fit.iter().zip(&observed).map(|(p, o)| (100.0 * p - o).powi(2)).sum();
            (sse / times.len() as f64).sqrt()
        })
        .collect();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok((mean, sd))
}

/// Up to `n` evenly spaced `(theta, beta)` draws from a budding chain.
pub fn thin_budding_draws(model: &CloccsModel, chain: &Chain, n: usize) -> Result<Vec<(CloccsParams, f64)>> {
    if chain.is_empty() || n == 0 {
        return Err(CloccsError::InvalidParameter("no posterior draws for RMSE".into()));
    }
    let k = n.min(chain.len());
    (0..k)
        .map(|i| {
            let p = model.decode(&chain.draws[i * chain.len() / k]);
            let beta = p
                .beta
                .ok_or_else(|| CloccsError::InvalidParameter("chain has no beta column".into()))?;
            Ok((p.theta, beta))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonSettings {
    pub sampler: SamplerConfig,
    pub importance_draws: usize,
    pub rmse_draws: usize,
    /// Start each chain from a searched mode instead of a prior draw.
    pub start: Option<StartSearch>,
}

impl Default for ComparisonSettings {
    fn default() -> Self {
        Self {
            sampler: SamplerConfig::default(),
            importance_draws: DEFAULT_IMPORTANCE_DRAWS,
            rmse_draws: DEFAULT_RMSE_DRAWS,
            start: Some(StartSearch::default()),
        }
    }
}

/// Everything computed for one submodel.
#[derive(Debug, Clone)]
pub struct ModelResult {
    pub submodel: SubmodelSpec,
    pub estimate: MarginalEstimate,
    pub rmse_mean: f64,
    pub rmse_sd: f64,
    pub summary: PosteriorSummary,
    pub jitter: f64,
}

/// Fits one submodel to budding data and estimates its marginal likelihood.
pub fn evaluate_submodel(
    prior: &Prior,
    config: ModelConfig,
    data: &BuddingDataset,
    submodel: SubmodelSpec,
    settings: &ComparisonSettings,
    seed: u64,
) -> Result<ModelResult> {
    let model = CloccsModel::new(prior.clone(), config, submodel, Some(data.clone()), None)?;
    let sampler = SamplerConfig {
        seed,
        ..settings.sampler.clone()
    };
    let init = match &settings.start {
        Some(s) => Some(search_start(&model, s, seed)?),
        None => None,
    };
    let chain = run_chain(&model, &sampler, init)?;
    let points: Vec<Vec<f64>> = chain.draws.iter().map(|v| model.from_natural(v)).collect();
    let q = MultivariateT::from_draws(&points, IMPORTANCE_DF)?;
    let estimate = estimate_log_marginal(&model, &q, settings.importance_draws, seed.wrapping_add(1))?;
    let draws = thin_budding_draws(&model, &chain, settings.rmse_draws)?;
    let (rmse_mean, rmse_sd) = budding_rmse(&draws, data, config)?;
    Ok(ModelResult {
        submodel,
        estimate,
        rmse_mean,
        rmse_sd,
        summary: summarize(&chain)?,
        jitter: q.jitter(),
    })
}

/// Results for a set of nested submodels.
#[derive(Debug, Clone)]
pub struct ComparisonTable {
    pub models: Vec<ModelResult>,
}

impl ComparisonTable {
    /// `(lBF, MC SE)` of model `larger` over model `smaller`, when `larger`
    /// nests `smaller`.
    pub fn lbf(&self, larger: usize, smaller: usize) -> Option<(f64, f64)> {
        let a = self.models.get(larger)?;
        let b = self.models.get(smaller)?;
        a.submodel.nests(&b.submodel).then(|| {
            (
                log_bayes_factor(&a.estimate, &b.estimate),
                combined_se(&a.estimate, &b.estimate),
            )
        })
    }
}

/// Runs [`evaluate_submodel`] over `submodels` with per-model seeds derived
/// from `settings.sampler.seed`.
pub fn compare_submodels(
    prior: &Prior,
    config: ModelConfig,
    data: &BuddingDataset,
    submodels: &[SubmodelSpec],
    settings: &ComparisonSettings,
) -> Result<ComparisonTable> {
    let models = submodels
        .iter()
        .enumerate()
        .map(|(i, &sub)| {
            let seed = settings.sampler.seed.wrapping_add(1000 * i as u64);
            evaluate_submodel(prior, config, data, sub, settings, seed)
        })
        .collect::<Result<_>>()?;
    Ok(ComparisonTable { models })
}
