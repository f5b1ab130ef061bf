//! Forward simulation of the branching population and of the two assays.
//!
//! Founders start at `P0 ~ N(-mu0, sigma0^2)` with velocity `V ~ N(1, sigma_v^2)`.
//! A cell in cohort `{g, r}` divides each time its position passes `k lambda`;
//! the daughter joins `{g + 1, r + k}`, starts at `-delta` and inherits `V`.
//! Nothing here uses the closed-form cohort masses, so the simulator serves as
//! an independent check on them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::budding::{design_grid, BuddingDataset, BuddingRecord};
use crate::error::{CloccsError, Result};
use crate::flow::{expected_fluorescence, FlowDataset, FlowHyper, FlowPerTime, FlowRecord, FlowShared, CHANNELS};
use crate::population::{enumerate_cohorts, CloccsParams, CohortIndex, ModelConfig};

/// Founders per RNG substream.
pub const STREAM_BLOCK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Founder {
    pub start: f64,
    pub velocity: f64,
}

impl Founder {
    pub fn draw<R: Rng + ?Sized>(theta: &CloccsParams, rng: &mut R) -> Self {
        let z0: f64 = rng.sample(StandardNormal);
        let zv: f64 = rng.sample(StandardNormal);
        Self {
            start: -theta.mu0 + theta.sigma0_sq.sqrt() * z0,
            velocity: 1.0 + theta.sigmav_sq.sqrt() * zv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimCell {
    pub cohort: CohortIndex,
    pub velocity: f64,
    /// Position extrapolated back to t = 0; the position at `t` is
    /// `start_offset + velocity * t`.
    pub start_offset: f64,
    /// Minutes after release at which the cell was born (0 for founders).
    pub birth_time: f64,
}

impl SimCell {
    #[inline]
    pub fn position(&self, t: f64) -> f64 {
        self.start_offset + self.velocity * t
    }

    /// Alive at `t`: born strictly before `t`, founders always.
    #[inline]
    pub fn alive_at(&self, t: f64) -> bool {
        self.cohort.is_founder() || self.birth_time < t
    }
}

/// Every cell descended from `founder` (founder included) born before `horizon`.
pub fn lineage_tree(founder: Founder, theta: &CloccsParams, config: ModelConfig, horizon: f64) -> Vec<SimCell> {
    let root = SimCell {
        cohort: CohortIndex::FOUNDERS,
        velocity: founder.velocity,
        start_offset: founder.start,
        birth_time: 0.0,
    };
    let mut out = vec![root];
    let mut next = 0;
    while next < out.len() {
        let cell = out[next];
        next += 1;
        if !(cell.velocity > 0.0) {
            continue;
        }
        for k in 1..=(config.max_instance - cell.cohort.r) {
            let target = k as f64 * theta.lambda;
            let crossing = ((target - cell.start_offset) / cell.velocity).max(0.0);
            if !(crossing < horizon) {
                break;
            }
            out.push(SimCell {
                cohort: CohortIndex {
                    g: cell.cohort.g + 1,
                    r: cell.cohort.r + k,
                },
                velocity: cell.velocity,
                start_offset: cell.start_offset - theta.delta - target,
                birth_time: crossing,
            });
        }
    }
    out
}

/// Position of cohort `c` in the list from [`enumerate_cohorts`].
pub fn cohort_slot(c: CohortIndex) -> usize {
    if c.is_founder() {
        0
    } else {
        (c.r * (c.r - 1) / 2 + c.g) as usize
    }
}

/// Cells alive at each time in `t_grid`, for `n_founders` simulated lineages.
pub fn simulate_lineage_population(
    theta: &CloccsParams,
    config: ModelConfig,
    t_grid: &[f64],
    n_founders: usize,
    seed: u64,
) -> Vec<Vec<SimCell>> {
    let horizon = t_grid.iter().copied().fold(0.0, f64::max);
    let mut out = vec![Vec::new(); t_grid.len()];
    for_each_founder(theta, n_founders, seed, |founder| {
        let tree = lineage_tree(founder, theta, config, horizon);
        for (cells, &t) in out.iter_mut().zip(t_grid) {
            cells.extend(tree.iter().filter(|c| c.alive_at(t)).copied());
        }
    });
    out
}

fn for_each_founder(theta: &CloccsParams, n: usize, seed: u64, mut f: impl FnMut(Founder)) {
    let mut done = 0;
    let mut stream = 0u64;
    while done < n {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let take = STREAM_BLOCK.min(n - done);
        for _ in 0..take {
            f(Founder::draw(theta, &mut rng));
        }
        done += take;
        stream += 1;
    }
}

/// Monte Carlo estimate and its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub se: f64,
}

/// Streaming sums for a ratio of per-founder totals.
#[derive(Debug, Clone, Copy, Default)]
struct RatioSums {
    y: f64,
    yy: f64,
    xy: f64,
}

impl RatioSums {
    fn add(&mut self, y: f64, x: f64) {
        self.y += y;
        self.yy += y * y;
        self.xy += x * y;
    }

    /// Delta-method SE of `sum y / sum x` over `n` independent founders.
    fn estimate(&self, x: &MeanSums, n: f64) -> McEstimate {
        let r = self.y / x.sum;
        let resid = self.yy - 2.0 * r * self.xy + r * r * x.sum_sq;
        let xbar = x.sum / n;
        McEstimate {
            value: r,
            se: (resid.max(0.0) / (n * (n - 1.0))).sqrt() / xbar,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct MeanSums {
    sum: f64,
    sum_sq: f64,
}

impl MeanSums {
    fn estimate(&self, n: f64) -> McEstimate {
        let mean = self.sum / n;
        let var = (self.sum_sq - n * mean * mean) / (n - 1.0);
        McEstimate {
            value: mean,
            se: (var.max(0.0) / n).sqrt(),
        }
    }
}

impl McEstimate {
    /// Whether `model` lies within `k` standard errors. The SE is floored at
    /// the compound-Poisson value for events arriving in clusters of up to
    /// `cluster` cells, so rare events with no hits are judged sensibly.
    pub fn agrees_with(&self, model: f64, k: f64, cluster: f64, n_cells: f64) -> bool {
        let floor = (cluster * model.abs() / n_cells).sqrt();
        (self.value - model).abs() <= k * self.se.max(floor)
    }
}

/// Per-time summary of a simulated population.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationCensus {
    pub t: f64,
    pub founders: usize,
    /// Cells per founder.
    pub growth: McEstimate,
    /// Share of cells in each cohort, in [`enumerate_cohorts`] order.
    pub cohort_proportions: Vec<(CohortIndex, McEstimate)>,
    pub budded_fraction: McEstimate,
}

/// Whether a cell at position `p` carries a bud.
#[inline]
pub fn is_budded(p: f64, beta: f64, lambda: f64, config: ModelConfig) -> bool {
    if p <= 0.0 {
        return false;
    }
    let c = (p / lambda).ceil() - 1.0;
    if c > config.cycles as f64 {
        return false;
    }
    p > (c + beta) * lambda
}

/// Streams `n_founders` lineages and tallies cohort shares, budded fractions
/// and population growth at each time, with delta-method standard errors.
pub fn census(
    theta: &CloccsParams,
    beta: f64,
    config: ModelConfig,
    t_grid: &[f64],
    n_founders: usize,
    seed: u64,
) -> Result<Vec<PopulationCensus>> {
    if n_founders < 2 {
        return Err(CloccsError::InvalidParameter(
            "census needs at least two founders".into(),
        ));
    }
    let cohorts = enumerate_cohorts(config);
    let horizon = t_grid.iter().copied().fold(0.0, f64::max);
    let mut sizes = vec![MeanSums::default(); t_grid.len()];
    let mut shares = vec![vec![RatioSums::default(); cohorts.len()]; t_grid.len()];
    let mut budded = vec![RatioSums::default(); t_grid.len()];
    let mut counts = vec![0.0; cohorts.len()];
    for_each_founder(theta, n_founders, seed, |founder| {
        let tree = lineage_tree(founder, theta, config, horizon);
        for (ti, &t) in t_grid.iter().enumerate() {
            counts.iter_mut().for_each(|c| *c = 0.0);
            let mut n_cells = 0.0;
            let mut n_budded = 0.0;
            for cell in tree.iter().filter(|c| c.alive_at(t)) {
                counts[cohort_slot(cell.cohort)] += 1.0;
                n_cells += 1.0;
                if is_budded(cell.position(t), beta, theta.lambda, config) {
                    n_budded += 1.0;
                }
            }
            sizes[ti].sum += n_cells;
            sizes[ti].sum_sq += n_cells * n_cells;
            for (s, &c) in shares[ti].iter_mut().zip(&counts) {
                s.add(c, n_cells);
            }
            budded[ti].add(n_budded, n_cells);
        }
    });
    let n = n_founders as f64;
    Ok(t_grid
        .iter()
        .enumerate()
        .map(|(ti, &t)| PopulationCensus {
            t,
            founders: n_founders,
            growth: sizes[ti].estimate(n),
            cohort_proportions: cohorts
                .iter()
                .zip(&shares[ti])
                .map(|(&c, s)| (c, s.estimate(&sizes[ti], n)))
                .collect(),
            budded_fraction: budded[ti].estimate(&sizes[ti], n),
        })
        .collect())
}

/// One cell drawn uniformly from the population at time `t`.
///
/// Founders are drawn fresh and accepted in proportion to their family
/// size (at most `2^R`), then one family member is chosen uniformly.
pub fn sample_cell<R: Rng + ?Sized>(theta: &CloccsParams, config: ModelConfig, t: f64, rng: &mut R) -> SimCell {
    let bound = (1u64 << config.max_instance) as f64;
    loop {
        let founder = Founder::draw(theta, rng);
        let tree = lineage_tree(founder, theta, config, t);
        let n_alive = tree.iter().filter(|c| c.alive_at(t)).count();
        if rng.random::<f64>() * bound < n_alive as f64 {
            let pick = rng.random_range(0..n_alive);
            return *tree.iter().filter(|c| c.alive_at(t)).nth(pick).expect("pick < n_alive");
        }
    }
}

/// Budded counts from `n_per_time` uniformly sampled cells at each time.
pub fn synth_budding_dataset<R: Rng + ?Sized>(
    theta: &CloccsParams,
    beta: f64,
    t_grid: &[f64],
    n_per_time: u64,
    config: ModelConfig,
    rng: &mut R,
) -> Result<BuddingDataset> {
    let records = t_grid
        .iter()
        .map(|&t| {
            let budded = (0..n_per_time)
                .filter(|_| {
                    is_budded(
                        sample_cell(theta, config, t, rng).position(t),
                        beta,
                        theta.lambda,
                        config,
                    )
                })
                .count() as u64;
            BuddingRecord::new(t, budded, n_per_time)
        })
        .collect::<Result<Vec<_>>>()?;
    BuddingDataset::new(records)
}

/// Channel for a log2 fluorescence value.
#[inline]
pub fn channel_of(f: f64) -> usize {
    let k = f.exp2().round();
    if k.is_nan() {
        return 1;
    }
    k.clamp(1.0, CHANNELS as f64) as usize
}

/// Log2 fluorescence of a sampled cell at time `t`.
pub fn simulate_fluorescence<R: Rng + ?Sized>(
    cell: &SimCell,
    t: f64,
    shared: &FlowShared,
    per_time: &FlowPerTime,
    lambda: f64,
    rng: &mut R,
) -> f64 {
    let noise = Normal::new(0.0, per_time.tau).expect("positive tau");
    expected_fluorescence(shared, per_time, lambda, cell.position(t)) + noise.sample(rng)
}

/// Channel histograms from `n_per_time` sampled cells at each time.
pub fn synth_flow_dataset<R: Rng + ?Sized>(
    theta: &CloccsParams,
    shared: &FlowShared,
    per_time: &[FlowPerTime],
    t_grid: &[f64],
    n_per_time: u64,
    config: ModelConfig,
    rng: &mut R,
) -> Result<FlowDataset> {
    if per_time.len() != t_grid.len() {
        return Err(CloccsError::InvalidParameter(format!(
            "{} per-time parameter sets for {} times",
            per_time.len(),
            t_grid.len()
        )));
    }
    let records = t_grid
        .iter()
        .zip(per_time)
        .map(|(&t, pt)| {
            let mut counts = vec![0u64; CHANNELS];
            for _ in 0..n_per_time {
                let cell = sample_cell(theta, config, t, rng);
                let f = simulate_fluorescence(&cell, t, shared, pt, theta.lambda, rng);
                counts[channel_of(f) - 1] += 1;
            }
            FlowRecord::new(t, counts)
        })
        .collect::<Result<Vec<_>>>()?;
    FlowDataset::new(records)
}

/// Ground truth and design for `simulate`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulateSettings {
    pub mu0: f64,
    pub sigma0: f64,
    pub sigmav: f64,
    pub lambda: f64,
    pub delta: f64,
    pub beta: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    /// Per-time flow parameters are drawn from these hyperparameters.
    pub hyper: FlowHyper,
    pub grid_start: f64,
    pub grid_step: f64,
    pub grid_points: usize,
    pub budding_cells: u64,
    pub flow_cells: u64,
}

impl Default for SimulateSettings {
    fn default() -> Self {
        Self {
            mu0: 94.0,
            sigma0: 18.0,
            sigmav: 0.025,
            lambda: 79.5,
            delta: 44.0,
            beta: 0.15,
            gamma1: 0.05,
            gamma2: 0.35,
            hyper: FlowHyper {
                mu_tau: -2.094,
                sigma2_tau: 0.031,
                mu_a1: 8.237,
                sigma2_a1: 0.038,
                mu_a2: 1.038,
                sigma2_a2: 0.01,
            },
            grid_start: 30.0,
            grid_step: 8.0,
            grid_points: 32,
            budding_cells: 200,
            flow_cells: 10_000,
        }
    }
}

/// Draws per-time flow parameters from the hierarchical prior given fixed
/// hyperparameters; `alpha2` is redrawn until positive.
pub fn draw_per_time<R: Rng + ?Sized>(hyper: &FlowHyper, n: usize, rng: &mut R) -> Result<Vec<FlowPerTime>> {
    hyper.validate()?;
    let normal = |m: f64, v: f64| Normal::new(m, v.sqrt()).map_err(|e| CloccsError::InvalidParameter(e.to_string()));
    let (ln_tau, a1, a2) = (
        normal(hyper.mu_tau, hyper.sigma2_tau)?,
        normal(hyper.mu_a1, hyper.sigma2_a1)?,
        normal(hyper.mu_a2, hyper.sigma2_a2)?,
    );
    (0..n)
        .map(|_| {
            let tau = ln_tau.sample(rng).exp();
            let alpha1 = a1.sample(rng);
            let mut alpha2 = a2.sample(rng);
            let mut tries = 0;
            while alpha2 <= 0.0 {
                tries += 1;
                if tries > 10_000 {
                    return Err(CloccsError::InvalidParameter(
                        "alpha2 hyperparameters put no mass above 0".into(),
                    ));
                }
                alpha2 = a2.sample(rng);
            }
            FlowPerTime::new(alpha1, alpha2, tau)
        })
        .collect()
}

/// Synthetic assays and the per-time flow parameters used to make them.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub budding: BuddingDataset,
    pub flow: FlowDataset,
    pub per_time: Vec<FlowPerTime>,
}

impl SimulateSettings {
    pub fn theta(&self) -> Result<CloccsParams> {
        CloccsParams::new(
            self.mu0,
            self.sigma0 * self.sigma0,
            self.sigmav * self.sigmav,
            self.lambda,
            self.delta,
        )
    }

    pub fn shared(&self) -> Result<FlowShared> {
        FlowShared::new(self.gamma1, self.gamma2)
    }

    pub fn grid(&self) -> Vec<f64> {
        design_grid(self.grid_start, self.grid_step, self.grid_points)
    }

    /// Budding counts and flow histograms on the design grid.
    pub fn generate(&self, config: ModelConfig, seed: u64) -> Result<SyntheticData> {
        if !(0.0 < self.beta && self.beta < 1.0) {
            return Err(CloccsError::InvalidParameter(format!(
                "beta must lie in (0, 1), got {}",
                self.beta
            )));
        }
        let theta = self.theta()?;
        let shared = self.shared()?;
        let grid = self.grid();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let per_time = draw_per_time(&self.hyper, grid.len(), &mut rng)?;
        let budding = synth_budding_dataset(&theta, self.beta, &grid, self.budding_cells, config, &mut rng)?;
        let flow = synth_flow_dataset(&theta, &shared, &per_time, &grid, self.flow_cells, config, &mut rng)?;
        Ok(SyntheticData {
            budding,
            flow,
            per_time,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::budding::budded_prob;
    use crate::population::{cohort_weight, lineage_multiplicity, population_mass};

    fn theta() -> CloccsParams {
        CloccsParams::new(94.0, 18.0 * 18.0, 0.025 * 0.025, 79.5, 44.0).unwrap()
    }

    #[test]
    fn deterministic_first_division() {
        let th = CloccsParams::new(50.0, 1e-12, 0.0, 80.0, 30.0).unwrap();
        let f = Founder {
            start: -50.0,
            velocity: 1.0,
        };
        let tree = lineage_tree(f, &th, ModelConfig::default(), 1000.0);
        let first = tree.iter().find(|c| c.cohort == CohortIndex { g: 1, r: 1 }).unwrap();
        assert!((first.birth_time - 130.0).abs() < 1e-12);
        assert!((first.position(130.0) + 30.0).abs() < 1e-12);
        // Daughter's first division: -30 + s = 80.
        let second = tree.iter().find(|c| c.cohort == CohortIndex { g: 2, r: 2 }).unwrap();
        assert!((second.birth_time - 240.0).abs() < 1e-12);
    }

    #[test]
    fn tree_counts_match_lineage_multiplicities() {
        let th = theta();
        let cfg = ModelConfig::default();
        let f = Founder {
            start: 0.0,
            velocity: 1.0,
        };
        let tree = lineage_tree(f, &th, cfg, 1e6);
        assert_eq!(tree.len(), 1 << cfg.max_instance);
        for c in enumerate_cohorts(cfg) {
            let n = tree.iter().filter(|x| x.cohort == c).count() as u64;
            assert_eq!(n, lineage_multiplicity(c).unwrap(), "{c}");
        }
        let stalled = Founder {
            start: 500.0,
            velocity: -0.1,
        };
        assert_eq!(lineage_tree(stalled, &th, cfg, 1e6).len(), 1);
    }

    #[test]
    fn daughters_inherit_velocity() {
        let th = theta();
        let f = Founder {
            start: -10.0,
            velocity: 1.03,
        };
        for c in lineage_tree(f, &th, ModelConfig::default(), 2000.0) {
            assert_eq!(c.velocity, 1.03);
        }
    }

    #[test]
    fn mean_founder_position() {
        let th = theta();
        let t = 120.0;
        let cells = simulate_lineage_population(&th, ModelConfig::default(), &[t], 20_000, 3);
        let founders: Vec<f64> = cells[0]
            .iter()
            .filter(|c| c.cohort.is_founder())
            .map(|c| c.position(t))
            .collect();
        assert_eq!(founders.len(), 20_000);
        let n = founders.len() as f64;
        let mean = founders.iter().sum::<f64>() / n;
        let sd = th.position_sd(t);
        assert!((mean - th.founder_mean(t)).abs() < 3.0 * sd / n.sqrt());
    }

    #[test]
    fn census_agrees_with_closed_forms() {
        let th = theta();
        let cfg = ModelConfig::default();
        let times = [100.0, 220.0];
        let est = census(&th, 0.15, cfg, &times, 100_000, 17).unwrap();
        for e in &est {
            let q = population_mass(&th, cfg, e.t);
            let n_cells = e.growth.value * e.founders as f64;
            let excess = McEstimate {
                value: e.growth.value - 1.0,
                se: e.growth.se,
            };
            assert!(
                excess.agrees_with(q - 1.0, 4.0, 64.0, e.founders as f64),
                "growth {} vs {q}",
                e.growth.value
            );
            for (c, p) in &e.cohort_proportions {
                let w = cohort_weight(&th, cfg, *c, e.t);
                let m = lineage_multiplicity(*c).unwrap() as f64;
                assert!(p.agrees_with(w, 4.0, m, n_cells), "{c} at {}: {} vs {w}", e.t, p.value);
            }
            let b = budded_prob(&th, 0.15, e.t, cfg);
            assert!(e.budded_fraction.agrees_with(b, 4.0, 64.0, n_cells));
        }
    }

    #[test]
    fn budding_extremes() {
        let th = theta();
        let cfg = ModelConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..2000 {
            let c = sample_cell(&th, cfg, 200.0, &mut rng);
            let p = c.position(200.0);
            if p > 0.0 && p < (cfg.cycles as f64 + 1.0) * th.lambda {
                assert!(is_budded(p, 1e-12, th.lambda, cfg));
            }
            assert!(!is_budded(p, 1.0 - 1e-12, th.lambda, cfg) || (p / th.lambda).fract() > 1.0 - 1e-9);
        }
    }

    #[test]
    fn synthetic_budding_tracks_model() {
        let th = theta();
        let cfg = ModelConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let times = [60.0, 130.0, 200.0];
        let data = synth_budding_dataset(&th, 0.15, &times, 4000, cfg, &mut rng).unwrap();
        for rec in data.records() {
            let p = budded_prob(&th, 0.15, rec.time(), cfg);
            let se = (p * (1.0 - p) / rec.total as f64).sqrt();
            assert!(
                (rec.fraction() - p).abs() < 4.0 * se + 1e-9,
                "t={}: {} vs {p}",
                rec.time(),
                rec.fraction()
            );
        }
    }

    #[test]
    fn degenerate_flow_hits_one_channel() {
        let th = CloccsParams::new(300.0, 1e-6, 0.0, 80.0, 40.0).unwrap();
        let sh = FlowShared::new(0.05, 0.35).unwrap();
        let pt = FlowPerTime::new(8.2, 1.0, 1e-9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = synth_flow_dataset(&th, &sh, &[pt], &[10.0], 500, ModelConfig::default(), &mut rng).unwrap();
        let rec = &d.records()[0];
        let k = (8.2f64).exp2().round() as usize;
        assert_eq!(rec.counts()[k - 1], 500);
    }

    #[test]
    fn channel_clamping() {
        assert_eq!(channel_of(-3.0), 1);
        assert_eq!(channel_of(11.0), 1024);
        assert_eq!(channel_of(8.0), 256);
        assert_eq!(channel_of(f64::NAN), 1);
    }

    #[test]
    fn seeded_runs_repeat() {
        let th = theta();
        let a = census(&th, 0.2, ModelConfig::default(), &[150.0], 5000, 9).unwrap();
        let b = census(&th, 0.2, ModelConfig::default(), &[150.0], 5000, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn generate_follows_the_design_and_seed() {
        let settings = SimulateSettings {
            grid_points: 4,
            budding_cells: 50,
            flow_cells: 300,
            ..SimulateSettings::default()
        };
        let cfg = ModelConfig::default();
        let a = settings.generate(cfg, 5).unwrap();
        assert_eq!(a.budding.times(), vec![30.0, 38.0, 46.0, 54.0]);
        assert_eq!(a.flow.times(), a.budding.times());
        assert!(a.budding.records().iter().all(|r| r.total == 50));
        assert!(a.flow.records().iter().all(|r| r.total() == 300));
        assert_eq!(a.per_time.len(), 4);
        assert_eq!(settings.generate(cfg, 5).unwrap(), a);
        assert_ne!(settings.generate(cfg, 6).unwrap(), a);
        let bad = SimulateSettings { beta: 1.5, ..settings };
        assert!(bad.generate(cfg, 5).is_err());
    }

    #[test]
    fn per_time_draws_are_valid() {
        let hyper = SimulateSettings::default().hyper;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts = draw_per_time(&hyper, 500, &mut rng).unwrap();
        assert!(pts.iter().all(|p| p.alpha2 > 0.0 && p.tau > 0.0));
        let mean_a1 = pts.iter().map(|p| p.alpha1).sum::<f64>() / 500.0;
        assert!((mean_a1 - hyper.mu_a1).abs() < 4.0 * (hyper.sigma2_a1 / 500.0).sqrt());
    }
}
