//! DNA-content sampling model.
//!
//! Expected log2 fluorescence is flat at `alpha1` through G1, ramps linearly
//! across S phase (`gamma1` to `gamma2` of each cycle) and is flat at
//! `alpha1 + alpha2` through G2/M. Observations add normal noise with SD `tau`.
//! The density of an observation integrates the noise law against the cohort
//! position mixture in closed form.

use std::collections::BTreeMap;

use crate::budding::TAIL_Z;
use crate::error::{CloccsError, Result};
use crate::normal;
use crate::population::{
    cohort_position_law, enumerate_cohorts, CloccsParams, CohortIndex, CohortMixture, ModelConfig,
};
use crate::quadrature::{self, Estimate, Tolerance};

pub const CHANNELS: usize = 1024;

/// S-phase segments with less founder mass than this are dropped.
pub const SEGMENT_MASS_FLOOR: f64 = 1e-16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowShared {
    pub gamma1: f64,
    pub gamma2: f64,
}

impl FlowShared {
    pub fn new(gamma1: f64, gamma2: f64) -> Result<Self> {
        if !(0.0 < gamma1 && gamma1 < gamma2 && gamma2 < 1.0) {
            return Err(CloccsError::InvalidParameter(format!(
                "need 0 < gamma1 < gamma2 < 1, got gamma1={gamma1}, gamma2={gamma2}"
            )));
        }
        Ok(Self { gamma1, gamma2 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowPerTime {
    pub alpha1: f64,
    pub alpha2: f64,
    pub tau: f64,
}

impl FlowPerTime {
    pub fn new(alpha1: f64, alpha2: f64, tau: f64) -> Result<Self> {
        if !(tau > 0.0) || !(alpha2 > 0.0) || !alpha1.is_finite() || !tau.is_finite() || !alpha2.is_finite() {
            return Err(CloccsError::InvalidParameter(format!(
                "need tau > 0 and alpha2 > 0, got alpha1={alpha1}, alpha2={alpha2}, tau={tau}"
            )));
        }
        Ok(Self { alpha1, alpha2, tau })
    }
}

/// Population-level means and variances of the per-time flow parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowHyper {
    pub mu_tau: f64,
    pub sigma2_tau: f64,
    pub mu_a1: f64,
    pub sigma2_a1: f64,
    pub mu_a2: f64,
    pub sigma2_a2: f64,
}

impl FlowHyper {
    pub fn validate(&self) -> Result<()> {
        if self.sigma2_tau > 0.0 && self.sigma2_a1 > 0.0 && self.sigma2_a2 > 0.0 {
            Ok(())
        } else {
            Err(CloccsError::InvalidParameter("hyper variances must be positive".into()))
        }
    }
}

/// log2 value of 1-based channel `k`.
#[inline]
pub fn channel_value(k: usize) -> f64 {
    (k as f64).log2()
}

/// Channel counts observed at one time point.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowRecord {
    time: f64,
    counts: Vec<u64>,
    occupied: Vec<(f64, f64)>,
}

impl FlowRecord {
    pub fn new(time: f64, counts: Vec<u64>) -> Result<Self> {
        if !(time.is_finite() && time >= 0.0) {
            return Err(CloccsError::Validation(format!(
                "time must be finite and >= 0, got {time}"
            )));
        }
        if counts.len() != CHANNELS {
            return Err(CloccsError::Validation(format!(
                "expected {CHANNELS} channels, got {}",
                counts.len()
            )));
        }
        if counts.iter().all(|&c| c == 0) {
            return Err(CloccsError::Validation(format!("no cells recorded at t={time}")));
        }
        let occupied = counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| (channel_value(i + 1), c as f64))
            .collect();
        Ok(Self { time, counts, occupied })
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Counts for channels 1..=1024 (index 0 is channel 1).
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// `(log2 value, count)` for every non-empty channel.
    pub fn occupied(&self) -> &[(f64, f64)] {
        &self.occupied
    }

    /// One log2 value per recorded cell.
    pub fn cells(&self) -> impl Iterator<Item = f64> + '_ {
        self.counts
            .iter()
            .enumerate()
            .flat_map(|(i, &c)| std::iter::repeat_n(channel_value(i + 1), c as usize))
    }

    /// Observed density on the log2 scale at each channel value:
    /// normalized count times the Jacobian `k ln 2`.
    pub fn observed_log2_density(&self) -> Vec<(f64, f64)> {
        let n = self.total() as f64;
        self.counts
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let k = (i + 1) as f64;
                (channel_value(i + 1), c as f64 / n * k * std::f64::consts::LN_2)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FlowDataset {
    records: Vec<FlowRecord>,
}

impl FlowDataset {
    pub fn new(records: Vec<FlowRecord>) -> Result<Self> {
        for w in records.windows(2) {
            if !(w[1].time > w[0].time) {
                return Err(CloccsError::Validation(format!(
                    "flow times must be strictly increasing ({} then {})",
                    w[0].time, w[1].time
                )));
            }
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[FlowRecord] {
        &self.records
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.time).collect()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Expected log2 DNA content of a cell at lifeline position `p`.
///
/// Positions before the first cycle (Gr, Gd) carry G1 content.
pub fn expected_fluorescence(shared: &FlowShared, per_time: &FlowPerTime, lambda: f64, p: f64) -> f64 {
    let FlowShared { gamma1, gamma2 } = *shared;
    if p < gamma1 * lambda {
        return per_time.alpha1;
    }
    let c = (p / lambda).floor();
    let frac = p / lambda - c;
    if frac < gamma1 {
        per_time.alpha1
    } else if frac < gamma2 {
        let omega1 = per_time.alpha2 / (lambda * (gamma2 - gamma1));
        let omega0 = (per_time.alpha1 * (gamma2 - gamma1) - per_time.alpha2 * (gamma1 + c)) / (gamma2 - gamma1);
        omega1 * p + omega0
    } else {
        per_time.alpha1 + per_time.alpha2
    }
}

/// Density of one observation given membership in cohort `c` (the
/// truncated-normal convolution, evaluated term by term over cycles `0..=C`).
pub fn flow_component_density(
    theta: &CloccsParams,
    shared: &FlowShared,
    per_time: &FlowPerTime,
    c: CohortIndex,
    f: f64,
    t: f64,
    config: ModelConfig,
) -> f64 {
    let law = cohort_position_law(theta, c, t);
    let retained = law.retained_mass();
    if retained <= 0.0 {
        return 0.0;
    }
    let (m, s) = (law.mean, law.sd);
    let lambda = theta.lambda;
    let FlowShared { gamma1, gamma2 } = *shared;
    let FlowPerTime { alpha1, alpha2, tau } = *per_time;
    let omega1 = alpha2 / (lambda * (gamma2 - gamma1));
    let var_pos = s * s;
    let v = tau * tau / (omega1 * omega1);

    let mut g1 = normal::mass_between(law.left_limit, gamma1 * lambda, m, s);
    let mut g2 = 0.0;
    let mut sblock = 0.0;
    let joint_sd = (var_pos + v).sqrt();
    let post_sd = (var_pos * v / (var_pos + v)).sqrt();
    let inv_norm = 1.0 / (omega1 * omega1 * var_pos + tau * tau).sqrt();
    for ci in 0..=config.cycles {
        let cf = ci as f64;
        if ci >= 1 {
            g1 += normal::mass_between(cf * lambda, (cf + gamma1) * lambda, m, s);
        }
        g2 += normal::mass_between((cf + gamma2) * lambda, (cf + 1.0) * lambda, m, s);
        let omega0 = (alpha1 * (gamma2 - gamma1) - alpha2 * (gamma1 + cf)) / (gamma2 - gamma1);
        let u = f / omega1 - omega0 / omega1;
        let post_mean = (var_pos * u + v * m) / (var_pos + v);
        let ds = normal::mass_between((cf + gamma1) * lambda, (cf + gamma2) * lambda, post_mean, post_sd);
        if ds > 0.0 {
            sblock += normal::pdf((u - m) / joint_sd) * inv_norm * ds;
        }
    }
    let star =
        normal::pdf((f - alpha1) / tau) / tau * g1 + normal::pdf((f - alpha1 - alpha2) / tau) / tau * g2 + sblock;
    star / retained
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    lo: f64,
    hi: f64,
    weight: f64,
}

/// Precomputed observation density for one time point.
///
/// All cohorts share the founder normal, so every S-phase segment is an
/// interval in founder coordinates; segments from different cohorts that
/// land on the same interval are merged.
#[derive(Debug, Clone)]
pub struct FlowEvaluator {
    alpha1: f64,
    alpha2: f64,
    tau: f64,
    omega1: f64,
    mean: f64,
    shrink: f64,
    joint_sd: f64,
    post_sd: f64,
    inv_norm: f64,
    g1: f64,
    g2: f64,
    inv_total: f64,
    segments: Vec<Segment>,
}

impl FlowEvaluator {
    pub fn new(theta: &CloccsParams, shared: &FlowShared, per_time: &FlowPerTime, t: f64, config: ModelConfig) -> Self {
        let mix = CohortMixture::new(theta, config, t);
        Self::from_mixture(&mix, shared, per_time, config)
    }

    pub fn from_mixture(mix: &CohortMixture, shared: &FlowShared, per_time: &FlowPerTime, config: ModelConfig) -> Self {
        let lambda = mix.theta.lambda;
        let delta = mix.theta.delta;
        let FlowShared { gamma1, gamma2 } = *shared;
        let (m, s) = (mix.mean, mix.sd);
        let (lo_win, hi_win) = (m - TAIL_Z * s, m + TAIL_Z * s);
        let cycles = config.cycles as f64;

        let mut g1 = 0.0;
        let mut g2 = 0.0;
        let mut merged: BTreeMap<(u32, u32), f64> = BTreeMap::new();
        for term in &mix.terms {
            if term.mass == 0.0 {
                continue;
            }
            let sh = term.shift;
            let left = if term.cohort.is_founder() {
                f64::NEG_INFINITY
            } else {
                sh - delta
            };
            g1 += term.multiplicity * normal::mass_between(left, sh + gamma1 * lambda, m, s);
            let first = ((lo_win - sh) / lambda - 1.0).floor().max(0.0);
            let last = ((hi_win - sh) / lambda).ceil().min(cycles);
            let mut c = first;
            while c <= last {
                if c >= 1.0 {
                    g1 += term.multiplicity * normal::mass_between(sh + c * lambda, sh + (c + gamma1) * lambda, m, s);
                }
                g2 +=
                    term.multiplicity * normal::mass_between(sh + (c + gamma2) * lambda, sh + (c + 1.0) * lambda, m, s);
                let smass = normal::mass_between(sh + (c + gamma1) * lambda, sh + (c + gamma2) * lambda, m, s);
                if smass >= SEGMENT_MASS_FLOOR {
                    let k = term.cohort.r + c as u32;
                    *merged.entry((term.cohort.g, k)).or_insert(0.0) += term.multiplicity;
                }
                c += 1.0;
            }
        }
        let segments = merged
            .into_iter()
            .map(|((g, k), weight)| {
                let base = g as f64 * delta + k as f64 * lambda;
                Segment {
                    lo: base + gamma1 * lambda,
                    hi: base + gamma2 * lambda,
                    weight,
                }
            })
            .collect();

        let FlowPerTime { alpha1, alpha2, tau } = *per_time;
        let omega1 = alpha2 / (lambda * (gamma2 - gamma1));
        let var_pos = s * s;
        let v = tau * tau / (omega1 * omega1);
        Self {
            alpha1,
            alpha2,
            tau,
            omega1,
            mean: m,
            shrink: var_pos / (var_pos + v),
            joint_sd: (var_pos + v).sqrt(),
            post_sd: (var_pos * v / (var_pos + v)).sqrt(),
            inv_norm: 1.0 / (omega1 * omega1 * var_pos + tau * tau).sqrt(),
            g1,
            g2,
            inv_total: 1.0 / mix.total_mass(),
            segments,
        }
    }

    /// Observation density at log2 fluorescence `f`.
    pub fn density(&self, f: f64) -> f64 {
        let inv_tau = 1.0 / self.tau;
        let mut acc = normal::pdf((f - self.alpha1) * inv_tau) * inv_tau * self.g1
            + normal::pdf((f - self.alpha1 - self.alpha2) * inv_tau) * inv_tau * self.g2;
        let ramp = (f - self.alpha1) / self.omega1;
        // A segment can add at most its joint-density factor; skip it when
        // that bound is below the plateau terms' rounding.
        let floor = 1e-18 * acc;
        if self.post_sd > 0.0 {
            let inv_joint = 1.0 / self.joint_sd;
            let inv_post = 1.0 / self.post_sd;
            let e = ramp * inv_joint;
            let c = self.shrink * ramp * inv_post;
            let keep = 1.0 - self.shrink;
            for seg in &self.segments {
                let off = seg.lo - self.mean;
                let bound = seg.weight * normal::pdf(off * inv_joint + e) * self.inv_norm;
                if bound <= floor {
                    continue;
                }
                let z_lo = keep * off * inv_post - c;
                let z_hi = z_lo + (seg.hi - seg.lo) * inv_post;
                acc += bound * normal::interval(z_lo, z_hi);
            }
        } else {
            for seg in &self.segments {
                let u = seg.lo + ramp;
                if seg.lo < u && u <= seg.hi {
                    acc += seg.weight * normal::pdf((u - self.mean) / self.joint_sd) * self.inv_norm;
                }
            }
        }
        acc * self.inv_total
    }

    /// Sum of `count * ln density` over a record's occupied channels.
    pub fn log_likelihood(&self, record: &FlowRecord) -> f64 {
        let mut acc = 0.0;
        for &(f, n) in record.occupied() {
            acc += n * self.density(f).ln();
        }
        acc
    }

    pub fn segment_count(&self) -> usize {
        self.segments.len()
    }
}

/// Density of a log2 fluorescence observation at time `t`.
pub fn flow_density(
    theta: &CloccsParams,
    shared: &FlowShared,
    per_time: &FlowPerTime,
    f: f64,
    t: f64,
    config: ModelConfig,
) -> f64 {
    FlowEvaluator::new(theta, shared, per_time, t, config).density(f)
}

/// Log-likelihood of one time point's histogram.
pub fn flow_record_log_likelihood(
    theta: &CloccsParams,
    shared: &FlowShared,
    per_time: &FlowPerTime,
    record: &FlowRecord,
    config: ModelConfig,
) -> f64 {
    FlowEvaluator::new(theta, shared, per_time, record.time(), config).log_likelihood(record)
}

/// Log-likelihood of a flow dataset; `per_time[i]` belongs to record `i`.
pub fn flow_log_likelihood(
    theta: &CloccsParams,
    shared: &FlowShared,
    per_time: &[FlowPerTime],
    data: &FlowDataset,
    config: ModelConfig,
) -> Result<f64> {
    if per_time.len() != data.len() {
        return Err(CloccsError::InvalidParameter(format!(
            "{} per-time parameter sets for {} flow time points",
            per_time.len(),
            data.len()
        )));
    }
    Ok(data
        .records()
        .iter()
        .zip(per_time)
        .map(|(rec, pt)| flow_record_log_likelihood(theta, shared, pt, rec, config))
        .sum())
}

fn cohort_breakpoints(lo: f64, hi: f64, shared: &FlowShared, lambda: f64, config: ModelConfig) -> Vec<f64> {
    let top = (config.cycles as f64 + 1.0) * lambda;
    let hi = hi.min(top);
    let mut pts = vec![lo];
    for c in 0..=config.cycles {
        let cf = c as f64;
        for x in [
            cf * lambda,
            (cf + shared.gamma1) * lambda,
            (cf + shared.gamma2) * lambda,
        ] {
            if x > lo && x < hi {
                pts.push(x);
            }
        }
    }
    pts.push(hi);
    pts
}

/// Direct numerical integration of the noise law against one cohort's
/// truncated position law over `[left limit, (C + 1) lambda]`.
pub fn flow_component_density_quadrature(
    theta: &CloccsParams,
    shared: &FlowShared,
    per_time: &FlowPerTime,
    c: CohortIndex,
    f: f64,
    t: f64,
    config: ModelConfig,
    tol: Tolerance,
) -> Result<Estimate> {
    let law = cohort_position_law(theta, c, t);
    if law.retained_mass() <= 0.0 {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
            intervals: 0,
        });
    }
    let lo = law.left_limit.max(law.mean - 40.0 * law.sd);
    let hi = law.mean + 40.0 * law.sd;
    if !(hi > lo) {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
            intervals: 0,
        });
    }
    let breaks = cohort_breakpoints(lo, hi, shared, theta.lambda, config);
    let tau = per_time.tau;
    quadrature::integrate_pieces(
        |p| {
            let e = expected_fluorescence(shared, per_time, theta.lambda, p);
            normal::pdf((f - e) / tau) / tau * law.density(p)
        },
        &breaks,
        tol,
    )
}

/// Cohort-weighted quadrature of the observation density; the independent
/// check on [`flow_density`].
pub fn flow_density_quadrature(
    theta: &CloccsParams,
    shared: &FlowShared,
    per_time: &FlowPerTime,
    f: f64,
    t: f64,
    config: ModelConfig,
    tol: Tolerance,
) -> Result<Estimate> {
    let mix = CohortMixture::new(theta, config, t);
    let mut total = Estimate {
        value: 0.0,
        error: 0.0,
        intervals: 0,
    };
    for (c, (_, w)) in enumerate_cohorts(config).into_iter().zip(mix.weights()) {
        if w == 0.0 {
            continue;
        }
        let e = flow_component_density_quadrature(theta, shared, per_time, c, f, t, config, tol)?;
        total.value += w * e.value;
        total.error += w * e.error;
        total.intervals += e.intervals;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (CloccsParams, FlowShared, FlowPerTime) {
        (
            CloccsParams::new(94.0, 18.0 * 18.0, 0.025 * 0.025, 79.5, 44.0).unwrap(),
            FlowShared::new(0.05, 0.35).unwrap(),
            FlowPerTime::new(8.2, 1.0, 0.12).unwrap(),
        )
    }

    #[test]
    fn expected_curve_junctions() {
        let (th, sh, pt) = setup();
        let l = th.lambda;
        assert!((expected_fluorescence(&sh, &pt, l, sh.gamma1 * l) - pt.alpha1).abs() < 1e-12);
        assert!((expected_fluorescence(&sh, &pt, l, sh.gamma2 * l - 1e-9) - (pt.alpha1 + pt.alpha2)).abs() < 1e-9);
        assert_eq!(expected_fluorescence(&sh, &pt, l, sh.gamma2 * l), pt.alpha1 + pt.alpha2);
        let mid = 0.5 * (sh.gamma1 + sh.gamma2) * l;
        assert!((expected_fluorescence(&sh, &pt, l, mid) - (pt.alpha1 + 0.5 * pt.alpha2)).abs() < 1e-12);
        assert_eq!(expected_fluorescence(&sh, &pt, l, -30.0), pt.alpha1);
        for c in 0..=8 {
            let cf = c as f64;
            let at1 = expected_fluorescence(&sh, &pt, l, (cf + sh.gamma1) * l);
            let at2 = expected_fluorescence(&sh, &pt, l, (cf + sh.gamma2) * l - 1e-10);
            assert!((at1 - pt.alpha1).abs() < 1e-9, "c={c}");
            assert!((at2 - pt.alpha1 - pt.alpha2).abs() < 1e-9, "c={c}");
        }
    }

    #[test]
    fn far_tail_is_negligible() {
        let (th, sh, pt) = setup();
        let cfg = ModelConfig::default();
        let d = flow_component_density(
            &th,
            &sh,
            &pt,
            CohortIndex::FOUNDERS,
            pt.alpha1 - 12.0 * pt.tau,
            0.0,
            cfg,
        );
        assert!(d < 1e-30);
    }

    #[test]
    fn g1_plateau_reduces_to_noise_law() {
        let th = CloccsParams::new(100.0, 1e-4, 0.0, 80.0, 40.0).unwrap();
        let (_, sh, pt) = setup();
        let cfg = ModelConfig::default();
        for &f in &[8.0, 8.2, 8.35] {
            let d = flow_component_density(&th, &sh, &pt, CohortIndex::FOUNDERS, f, 0.0, cfg);
            let want = normal::pdf_at(f, pt.alpha1, pt.tau);
            assert!((d - want).abs() < 1e-12 * want);
            assert!((flow_density(&th, &sh, &pt, f, 0.0, cfg) - want).abs() < 1e-12 * want);
        }
    }

    #[test]
    fn evaluator_matches_literal_cohort_sum() {
        let (th, sh, pt) = setup();
        let cfg = ModelConfig::default();
        for &t in &[30.0, 110.0, 190.0, 286.0] {
            let mix = CohortMixture::new(&th, cfg, t);
            let ev = FlowEvaluator::from_mixture(&mix, &sh, &pt, cfg);
            for i in 0..40 {
                let f = 7.5 + 0.06 * i as f64;
                let literal: f64 = enumerate_cohorts(cfg)
                    .into_iter()
                    .zip(mix.weights())
                    .filter(|(_, (_, w))| *w > 0.0)
                    .map(|(c, (_, w))| w * flow_component_density(&th, &sh, &pt, c, f, t, cfg))
                    .sum();
                let fast = ev.density(f);
                assert!(
                    (fast - literal).abs() <= 1e-12 * literal.max(1e-300),
                    "t={t} f={f}: {fast} vs {literal}"
                );
            }
        }
    }

    #[test]
    fn closed_form_matches_quadrature() {
        let (th, sh, pt) = setup();
        let cfg = ModelConfig::default();
        let tol = Tolerance {
            abs: 1e-16,
            rel: 1e-11,
            max_intervals: 4000,
        };
        for &(g, r) in &[(0, 0), (1, 1), (1, 2), (2, 3)] {
            let c = CohortIndex::new(g, r).unwrap();
            for &f in &[8.1, 8.6, 9.1] {
                let t = 260.0;
                let closed = flow_component_density(&th, &sh, &pt, c, f, t, cfg);
                let quad = flow_component_density_quadrature(&th, &sh, &pt, c, f, t, cfg, tol).unwrap();
                assert!(
                    (closed - quad.value).abs() / quad.value.max(1e-300) < 1e-6,
                    "{c} f={f}: {closed} vs {}",
                    quad.value
                );
            }
        }
    }

    #[test]
    fn likelihood_is_count_weighted() {
        let (th, sh, pt) = setup();
        let cfg = ModelConfig::default();
        let mut counts = vec![0u64; CHANNELS];
        counts[299] = 7;
        let rec = FlowRecord::new(120.0, counts).unwrap();
        let data = FlowDataset::new(vec![rec]).unwrap();
        let ll = flow_log_likelihood(&th, &sh, &[pt], &data, cfg).unwrap();
        let one = flow_density(&th, &sh, &pt, 300f64.log2(), 120.0, cfg).ln();
        assert!((ll - 7.0 * one).abs() < 1e-12 * ll.abs());
        assert_eq!(
            flow_log_likelihood(&th, &sh, &[], &FlowDataset::default(), cfg).unwrap(),
            0.0
        );
        assert!(flow_log_likelihood(&th, &sh, &[pt, pt], &data, cfg).is_err());
    }

    #[test]
    fn record_validation() {
        assert!(FlowRecord::new(1.0, vec![1; 1023]).is_err());
        assert!(FlowRecord::new(1.0, vec![0; 1024]).is_err());
        let a = FlowRecord::new(5.0, vec![1; 1024]).unwrap();
        let b = FlowRecord::new(1.0, vec![1; 1024]).unwrap();
        assert!(FlowDataset::new(vec![a.clone(), b.clone()]).is_err());
        assert!(FlowDataset::new(vec![b, a]).is_ok());
        assert!(FlowShared::new(0.3, 0.3).is_err());
        assert!(FlowPerTime::new(8.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn observed_density_integrates_to_one() {
        let mut counts = vec![0u64; CHANNELS];
        for (i, c) in counts.iter_mut().enumerate().skip(200).take(500) {
            *c = (i % 7) as u64 + 1;
        }
        let rec = FlowRecord::new(0.0, counts).unwrap();
        let dens = rec.observed_log2_density();
        let integral: f64 = dens
            .windows(2)
            .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
            .sum();
        assert!((integral - 1.0).abs() < 1e-3, "{integral}");
    }
}
