//! Lifeline position of a randomly sampled cell as a mixture over cohorts.
//!
//! Every cell descends from a founder whose "absolute" position
//! `x = P0 + V t` is normal with mean `-mu0 + t` and variance
//! `sigma0^2 + t^2 sigmav^2`. A cell of cohort `{g, r}` sits at
//! `x - g delta - r lambda` and exists once that quantity has reached
//! `-delta`. All cohort laws are therefore shifted, truncated copies of the
//! same founder normal, which is what the helpers on [`CohortMixture`] use.

use crate::error::{CloccsError, Result};
use crate::normal;

/// Population dynamics parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloccsParams {
    /// Mean length of the recovery period Gr, minutes.
    pub mu0: f64,
    /// Variance of the starting position, minutes^2.
    pub sigma0_sq: f64,
    /// Variance of the velocity, (lifeline units / minute)^2.
    pub sigmav_sq: f64,
    /// Cell-cycle length, minutes.
    pub lambda: f64,
    /// Daughter-specific offset Gd, minutes.
    pub delta: f64,
}

impl CloccsParams {
    pub fn new(mu0: f64, sigma0_sq: f64, sigmav_sq: f64, lambda: f64, delta: f64) -> Result<Self> {
        let p = Self {
            mu0,
            sigma0_sq,
            sigmav_sq,
            lambda,
            delta,
        };
        p.validate()?;
        if !(sigma0_sq > 0.0) {
            return Err(CloccsError::InvalidParameter(format!(
                "sigma0_sq must be positive, got {sigma0_sq}"
            )));
        }
        Ok(p)
    }

    /// Starting positions collapse to a point mass at `-mu0` (the sigma0^2 = 0 submodels).
    pub fn new_point_start(mu0: f64, sigmav_sq: f64, lambda: f64, delta: f64) -> Result<Self> {
        let p = Self {
            mu0,
            sigma0_sq: 0.0,
            sigmav_sq,
            lambda,
            delta,
        };
        p.validate()?;
        Ok(p)
    }

    /// Checks the invariants shared by the full model and every submodel.
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &str, v: f64| Err(CloccsError::InvalidParameter(format!("{name} out of range: {v}")));
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return bad("lambda", self.lambda);
        }
        if !(self.sigma0_sq >= 0.0) || !self.sigma0_sq.is_finite() {
            return bad("sigma0_sq", self.sigma0_sq);
        }
        if !(self.sigmav_sq >= 0.0) || !self.sigmav_sq.is_finite() {
            return bad("sigmav_sq", self.sigmav_sq);
        }
        if !(self.delta >= 0.0) || !self.delta.is_finite() {
            return bad("delta", self.delta);
        }
        if !(self.mu0 >= 0.0) || !self.mu0.is_finite() {
            return bad("mu0", self.mu0);
        }
        Ok(())
    }

    /// Standard deviation of every cohort's position at time `t`.
    #[inline]
    pub fn position_sd(&self, t: f64) -> f64 {
        (self.sigma0_sq + t * t * self.sigmav_sq).sqrt()
    }

    /// Mean founder position `-mu0 + t`.
    #[inline]
    pub fn founder_mean(&self, t: f64) -> f64 {
        -self.mu0 + t
    }

    /// Mean starting position reported next to `mu0` in summaries.
    pub fn start_mean(&self) -> f64 {
        -self.mu0
    }

    /// P(V < 0) = Phi(-1 / sigma_v); the normal velocity law keeps this mass.
    pub fn negative_velocity_prob(&self) -> f64 {
        if self.sigmav_sq > 0.0 {
            normal::cdf(-1.0 / self.sigmav_sq.sqrt())
        } else {
            0.0
        }
    }
}

/// `{g, r}`: generation and reproductive instance of a cohort.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CohortIndex {
    pub g: u32,
    pub r: u32,
}

impl CohortIndex {
    pub const FOUNDERS: CohortIndex = CohortIndex { g: 0, r: 0 };

    pub fn new(g: u32, r: u32) -> Result<Self> {
        let c = Self { g, r };
        if c.is_valid() {
            Ok(c)
        } else {
            Err(CloccsError::InvalidCohort { g, r })
        }
    }

    #[inline]
    pub fn is_valid(&self) -> bool {
        (self.g == 0 && self.r == 0) || (0 < self.g && self.g <= self.r)
    }

    #[inline]
    pub fn is_founder(&self) -> bool {
        self.g == 0 && self.r == 0
    }
}

impl std::fmt::Display for CohortIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{{{},{}}}", self.g, self.r)
    }
}

/// Truncation depth of the cohort enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    /// Largest reproductive instance R.
    pub max_instance: u32,
    /// Number of cell cycles C summed in per-cycle expressions.
    pub cycles: u32,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            max_instance: 6,
            cycles: 8,
        }
    }
}

impl ModelConfig {
    pub fn new(max_instance: u32, cycles: u32) -> Result<Self> {
        if max_instance < 1 {
            return Err(CloccsError::InvalidParameter("R must be at least 1".into()));
        }
        if cycles < max_instance {
            return Err(CloccsError::InvalidParameter(format!(
                "C ({cycles}) must be at least R ({max_instance})"
            )));
        }
        Ok(Self { max_instance, cycles })
    }

    pub fn contains(&self, c: CohortIndex) -> bool {
        c.is_valid() && c.r <= self.max_instance
    }
}

/// Law of a cohort's position: normal, truncated below at `left_limit`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CohortPositionLaw {
    pub mean: f64,
    pub sd: f64,
    pub left_limit: f64,
}

impl CohortPositionLaw {
    /// Mass of the untruncated normal above the left limit.
    pub fn retained_mass(&self) -> f64 {
        normal::sf_at(self.left_limit, self.mean, self.sd)
    }

    /// Density of the truncated law at `p`.
    pub fn density(&self, p: f64) -> f64 {
        if p < self.left_limit {
            return 0.0;
        }
        let z = self.retained_mass();
        if z <= 0.0 {
            return 0.0;
        }
        normal::pdf_at(p, self.mean, self.sd) / z
    }
}

/// All cohorts `{0,0}` then `{g,r}` with `0 < g <= r <= R`, r ascending then g ascending.
pub fn enumerate_cohorts(config: ModelConfig) -> Vec<CohortIndex> {
    let mut out = vec![CohortIndex::FOUNDERS];
    for r in 1..=config.max_instance {
        for g in 1..=r {
            out.push(CohortIndex { g, r });
        }
    }
    out
}

/// n choose k as f64 (exact for the small arguments used here).
pub fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as f64
}

/// Number of distinct lineages feeding a cohort: `C(r-1, g-1)`, or 1 for founders.
pub fn lineage_multiplicity(c: CohortIndex) -> Result<u64> {
    if !c.is_valid() {
        return Err(CloccsError::InvalidCohort { g: c.g, r: c.r });
    }
    if c.is_founder() {
        return Ok(1);
    }
    Ok(binomial(c.r - 1, c.g - 1) as u64)
}

fn multiplicity(c: CohortIndex) -> f64 {
    if c.is_founder() {
        1.0
    } else {
        binomial(c.r - 1, c.g - 1)
    }
}

/// Offset subtracted from the founder position to obtain a cohort position.
#[inline]
pub(crate) fn cohort_shift(theta: &CloccsParams, c: CohortIndex) -> f64 {
    c.g as f64 * theta.delta + c.r as f64 * theta.lambda
}

pub fn cohort_position_law(theta: &CloccsParams, c: CohortIndex, t: f64) -> CohortPositionLaw {
    let mean = theta.founder_mean(t) - cohort_shift(theta, c);
    let left_limit = if c.is_founder() {
        f64::NEG_INFINITY
    } else {
        -theta.delta
    };
    CohortPositionLaw {
        mean,
        sd: theta.position_sd(t),
        left_limit,
    }
}

/// Founder-coordinate threshold a founder must pass for cohort `c` to exist.
#[inline]
pub(crate) fn birth_threshold(theta: &CloccsParams, c: CohortIndex) -> f64 {
    if c.is_founder() {
        f64::NEG_INFINITY
    } else {
        c.r as f64 * theta.lambda + (c.g as f64 - 1.0) * theta.delta
    }
}

/// Mass under cohort `c`'s position distribution at time `t`.
pub fn cohort_mass(theta: &CloccsParams, c: CohortIndex, t: f64) -> f64 {
    if c.is_founder() {
        return 1.0;
    }
    if !c.is_valid() {
        return 0.0;
    }
    let thr = birth_threshold(theta, c);
    normal::sf_at(thr, theta.founder_mean(t), theta.position_sd(t)) * multiplicity(c)
}

/// Total cohort mass Q(t): expected population size per founder.
pub fn population_mass(theta: &CloccsParams, config: ModelConfig, t: f64) -> f64 {
    CohortMixture::new(theta, config, t).total_mass()
}

/// Probability that a randomly sampled cell belongs to cohort `c`.
pub fn cohort_weight(theta: &CloccsParams, config: ModelConfig, c: CohortIndex, t: f64) -> f64 {
    if !config.contains(c) {
        return 0.0;
    }
    cohort_mass(theta, c, t) / population_mass(theta, config, t)
}

/// Density of lifeline position at time `t` (mixture over cohorts).
pub fn position_density(theta: &CloccsParams, config: ModelConfig, t: f64, p: f64) -> f64 {
    CohortMixture::new(theta, config, t).density(p)
}

/// One cohort's entry in a [`CohortMixture`].
#[derive(Debug, Clone, Copy)]
pub struct CohortTerm {
    pub cohort: CohortIndex,
    /// `C(r-1, g-1)`.
    pub multiplicity: f64,
    /// Unnormalized mass M(g, r, t).
    pub mass: f64,
    /// Shift `g delta + r lambda` from founder coordinates.
    pub shift: f64,
}

/// Cohort masses at one time point, sharing the founder normal.
#[derive(Debug, Clone)]
pub struct CohortMixture {
    pub theta: CloccsParams,
    pub t: f64,
    /// Founder mean `-mu0 + t`.
    pub mean: f64,
    pub sd: f64,
    pub terms: Vec<CohortTerm>,
    total: f64,
}

impl CohortMixture {
    pub fn new(theta: &CloccsParams, config: ModelConfig, t: f64) -> Self {
        let mean = theta.founder_mean(t);
        let sd = theta.position_sd(t);
        let mut terms = Vec::with_capacity(1 + (config.max_instance * (config.max_instance + 1) / 2) as usize);
        for c in enumerate_cohorts(config) {
            let multiplicity = multiplicity(c);
            let mass = if c.is_founder() {
                1.0
            } else {
                normal::sf_at(birth_threshold(theta, c), mean, sd) * multiplicity
            };
            terms.push(CohortTerm {
                cohort: c,
                multiplicity,
                mass,
                shift: cohort_shift(theta, c),
            });
        }
        let total = terms.iter().map(|c| c.mass).sum();
        Self {
            theta: *theta,
            t,
            mean,
            sd,
            terms,
            total,
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.total
    }

    pub fn weights(&self) -> Vec<(CohortIndex, f64)> {
        self.terms.iter().map(|c| (c.cohort, c.mass / self.total)).collect()
    }

    /// Mixture density of cohort positions at `p`.
    ///
    /// Weight times truncated density collapses to
    /// `multiplicity * phi / Q`, so no truncation normalizer is divided out.
    pub fn density(&self, p: f64) -> f64 {
        let mut acc = 0.0;
        for c in &self.terms {
            if !c.cohort.is_founder() && p < -self.theta.delta {
                continue;
            }
            if c.mass == 0.0 {
                continue;
            }
            let x = p + c.shift;
            acc += c.multiplicity * density_or_atom(x, self.mean, self.sd);
        }
        acc / self.total
    }
}

fn density_or_atom(x: f64, mean: f64, sd: f64) -> f64 {
    if sd > 0.0 {
        normal::pdf_at(x, mean, sd)
    } else if x == mean {
        f64::INFINITY
    } else {
        0.0
    }
}
