//! Deterministic starting-point search for [`CloccsModel`] chains.
//!
//! The posterior is sharply concentrated once a few thousand flow cells are
//! in play, so a random prior draw can sit far outside the region a
//! random-walk sampler reaches during burn-in. The search fits per-time flow
//! parameters against the histograms, locates the structural block from the
//! budding data when there is any, screens the phase fractions against the
//! flow data, and polishes everything with Nelder-Mead.

use argmin::core::{CostFunction, Error as ArgminError, Executor};
use argmin::solver::neldermead::NelderMead;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{CloccsError, Result};
use crate::flow::FlowRecord;
use crate::inference::{CloccsModel, Target};

/// Effort settings for [`search_start`].
#[derive(Debug, Clone, PartialEq)]
pub struct StartSearch {
    /// Prior draws scored before polishing.
    pub screen: usize,
    /// Best screened candidates that get polished.
    pub polish: usize,
    /// Nelder-Mead iteration cap for the structural block.
    pub max_iters: u64,
    /// Alternations between per-time and structural polishing.
    pub rounds: usize,
}

impl Default for StartSearch {
    fn default() -> Self {
        Self {
            screen: 200,
            polish: 3,
            max_iters: 1500,
            rounds: 2,
        }
    }
}

impl StartSearch {
    pub fn validate(&self) -> Result<()> {
        if self.screen == 0 || self.polish == 0 || self.rounds == 0 {
            return Err(CloccsError::Config(
                "start search needs screen, polish and rounds >= 1".into(),
            ));
        }
        Ok(())
    }
}

const BAD: f64 = 1e300;

/// Negative log density over a subset of coordinates, the rest held fixed.
struct Slice<'a> {
    model: &'a CloccsModel,
    base: Vec<f64>,
    coords: Vec<usize>,
    terms: Option<Vec<usize>>,
}

impl Slice<'_> {
    fn point(&self, sub: &[f64]) -> Vec<f64> {
        let mut x = self.base.clone();
        for (&c, &v) in self.coords.iter().zip(sub) {
            x[c] = v;
        }
        x
    }

    fn value(&self, sub: &[f64]) -> f64 {
        let x = self.point(sub);
        let lp = match &self.terms {
            Some(t) => self.model.eval_terms(&x, t).iter().sum(),
            None => self.model.log_density(&x),
        };
        if lp.is_finite() {
            -lp
        } else {
            BAD
        }
    }
}

impl CostFunction for Slice<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Self::Param) -> std::result::Result<f64, ArgminError> {
        Ok(self.value(p))
    }
}

/// Nelder-Mead over `coords`, keeping the start if nothing improves.
fn polish(
    model: &CloccsModel,
    x: &[f64],
    coords: &[usize],
    terms: Option<Vec<usize>>,
    step: f64,
    max_iters: u64,
) -> Result<Vec<f64>> {
    let slice = Slice {
        model,
        base: x.to_vec(),
        coords: coords.to_vec(),
        terms,
    };
    let start: Vec<f64> = coords.iter().map(|&c| x[c]).collect();
    let before = slice.value(&start);
    let mut simplex = vec![start.clone()];
    for k in 0..start.len() {
        let mut v = start.clone();
        v[k] += step;
        simplex.push(v);
    }
    let solver = NelderMead::new(simplex)
        .with_sd_tolerance(1e-9)
        .map_err(|e| CloccsError::Numerical(e.to_string()))?;
    let res = Executor::new(slice, solver)
        .configure(|s| s.max_iters(max_iters))
        .run()
        .map_err(|e| CloccsError::Numerical(e.to_string()))?;
    let best = res.state.best_param.clone().unwrap_or_else(|| start.clone());
    let after = res.state.best_cost;
    let slice = res.problem.problem.expect("problem is returned");
    if after < before {
        Ok(slice.point(&best))
    } else {
        Ok(x.to_vec())
    }
}

/// Highest point of a kernel-smoothed log2 histogram.
fn histogram_mode(record: &FlowRecord) -> f64 {
    let occ = record.occupied();
    let (lo, hi) = occ.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &(f, _)| {
        (a.min(f), b.max(f))
    });
    let bw = 0.05;
    let mut best = (f64::NEG_INFINITY, lo);
    let steps = ((hi - lo) / 0.01).ceil() as usize;
    for s in 0..=steps {
        let g = lo + s as f64 * 0.01;
        let d: f64 = occ
            .iter()
            .map(|&(f, n)| {
                let z = (f - g) / bw;
                if z.abs() < 6.0 {
                    n * (-0.5 * z * z).exp()
                } else {
                    0.0
                }
            })
            .sum();
        if d > best.0 {
            best = (d, g);
        }
    }
    best.1
}

/// Per-time flow parameters fitted one time point at a time.
fn fit_per_time(model: &CloccsModel, x: &mut [f64], p0: usize, from_data: bool) -> Result<()> {
    let Some(flow) = model.flow() else {
        return Ok(());
    };
    for (i, rec) in flow.records().iter().enumerate() {
        let coords = vec![p0 + 3 * i, p0 + 3 * i + 1, p0 + 3 * i + 2];
        let terms = vec![0, model.flow_term(i)];
        let mut candidates = Vec::new();
        if from_data {
            let m = histogram_mode(rec);
            // The tallest peak is either the G1 or the G2 peak.
            for a1 in [m, m - 1.0] {
                let mut y = x.to_vec();
                y[coords[0]] = a1;
                y[coords[1]] = 0.0;
                y[coords[2]] = (0.12f64).ln();
                candidates.push(y);
            }
        } else {
            candidates.push(x.to_vec());
        }
        let mut best: Option<(f64, Vec<f64>)> = None;
        for y in candidates {
            let y = polish(model, &y, &coords, Some(terms.clone()), 0.05, 400)?;
            let v: f64 = model.eval_terms(&y, &terms).iter().sum();
            if best.as_ref().is_none_or(|(b, _)| v > *b) {
                best = Some((v, y));
            }
        }
        if let Some((_, y)) = best {
            for &c in &coords {
                x[c] = y[c];
            }
        }
    }
    Ok(())
}

/// Outlying per-time alpha2 fits are reset to the median and the remaining
/// per-time coordinates refitted. Mostly-G1 histograms say nothing about
/// alpha2, and a free fit there collapses the G2 peak onto G1.
fn anchor_alpha2(model: &CloccsModel, x: &mut [f64], p0: usize, n: usize) -> Result<()> {
    let mut nat = model.to_natural(x);
    let mut a2: Vec<f64> = (0..n).map(|i| nat[p0 + 3 * i + 1]).collect();
    a2.sort_by(f64::total_cmp);
    let med = a2[n / 2];
    let mut dev: Vec<f64> = a2.iter().map(|v| (v - med).abs()).collect();
    dev.sort_by(f64::total_cmp);
    let band = 3.0 * (1.4826 * dev[n / 2]).max(0.02);
    let outliers: Vec<usize> = (0..n).filter(|&i| (nat[p0 + 3 * i + 1] - med).abs() > band).collect();
    for &i in &outliers {
        nat[p0 + 3 * i + 1] = med;
    }
    x.copy_from_slice(&model.from_natural(&nat));
    for i in outliers {
        let coords = vec![p0 + 3 * i, p0 + 3 * i + 2];
        let y = polish(model, x, &coords, Some(vec![0, model.flow_term(i)]), 0.05, 400)?;
        x.copy_from_slice(&y);
    }
    Ok(())
}

/// Hyperparameters set from the per-time moments, then polished against the
/// prior term alone.
fn fit_hyper(model: &CloccsModel, x: &mut Vec<f64>, h: usize, p0: usize, n: usize) -> Result<()> {
    let nat = model.to_natural(x);
    // (per-time offset, hyper offset): ln tau, alpha1, alpha2
    for (offset, slot) in [(2usize, h), (0, h + 2), (1, h + 4)] {
        let vals: Vec<f64> = (0..n)
            .map(|i| {
                let v = nat[p0 + 3 * i + offset];
                if offset == 2 {
                    v.ln()
                } else {
                    v
                }
            })
            .collect();
        let mean = vals.iter().sum::<f64>() / n as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        x[slot] = mean;
        x[slot + 1] = var.max(1e-4).ln();
    }
    let coords: Vec<usize> = (h..h + 6).collect();
    *x = polish(model, x, &coords, Some(vec![0]), 0.1, 2000)?;
    Ok(())
}

/// Per-time flow parameters and their hyperparameters given the rest of `x`.
/// `from_data` restarts the per-time fits from the histograms.
fn refit_flow(model: &CloccsModel, x: &mut Vec<f64>, from_data: bool) -> Result<()> {
    let (_, hyper, per_time) = model.layout();
    let (Some(p0), Some(n)) = (per_time, model.flow().map(|f| f.len())) else {
        return Ok(());
    };
    fit_per_time(model, x, p0, from_data)?;
    if let Some(h) = hyper {
        if from_data {
            anchor_alpha2(model, x, p0, n)?;
        }
        fit_hyper(model, x, h, p0, n)?;
    }
    Ok(())
}

/// Budding-only screening draws per joint screening draw.
const BUDDING_SCREEN: usize = 10;

/// Budding-only polishes per joint polish.
const BUDDING_POLISH: usize = 5;

/// Jitter of the wide screening draws, in unconstrained units.
const WIDE: f64 = 1.5;

/// Replaces `coords` of `x` with `n` prior draws and keeps the `keep` best
/// by the listed terms (the whole density when `terms` is `None`). The
/// unmodified `x` competes too. With `spread > 0` every other draw is
/// jittered by that many units in the unconstrained coordinates, which
/// reaches modes far out in the prior tails.
fn screen(
    model: &CloccsModel,
    x: &[f64],
    coords: &[usize],
    terms: Option<&[usize]>,
    n: usize,
    keep: usize,
    spread: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(f64, Vec<f64>)>> {
    let score = |y: &[f64]| match terms {
        Some(t) => model.eval_terms(y, t).iter().sum(),
        None => model.log_density(y),
    };
    let mut scored = vec![(score(x), x.to_vec())];
    for i in 0..n {
        let v = model.from_natural(&model.sample_prior_natural(rng)?);
        let mut y = x.to_vec();
        for &c in coords {
            y[c] = v[c];
            if spread > 0.0 && i % 2 == 1 {
                y[c] += spread * rng.sample::<f64, _>(StandardNormal);
            }
        }
        let lp = score(&y);
        if lp.is_finite() {
            scored.push((lp, y));
        }
    }
    scored.retain(|(lp, _)| lp.is_finite());
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    scored.truncate(keep);
    // Best last, so callers can pop it.
    scored.reverse();
    Ok(scored)
}

/// Searches for a high-posterior starting point in unconstrained coordinates.
pub fn search_start(model: &CloccsModel, search: &StartSearch, seed: u64) -> Result<Vec<f64>> {
    search.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (core, _, _) = model.layout();
    let mut x = model.initial_point(&mut rng)?;
    refit_flow(model, &mut x, true)?;

    let scored = match model.budding_term() {
        // The budding data alone locate the structural block far more cheaply
        // than the joint density; the phase fractions are screened afterwards.
        Some(bt) => {
            let terms = vec![0, bt];
            let screened = screen(
                model,
                &x,
                &core,
                Some(&terms),
                BUDDING_SCREEN * search.screen,
                BUDDING_POLISH * search.polish,
                WIDE,
                &mut rng,
            )?;
            let mut located: Vec<(f64, Vec<f64>)> = Vec::with_capacity(screened.len());
            for (_, y) in screened {
                let y = polish(model, &y, &core, Some(terms.clone()), 0.1, search.max_iters)?;
                let v: f64 = model.eval_terms(&y, &terms).iter().sum();
                // Candidates that polished into the same basin count once.
                if v.is_finite() && located.iter().all(|(w, _)| (w - v).abs() > 1e-3) {
                    located.push((v, y));
                }
            }
            located.sort_by(|a, b| b.0.total_cmp(&a.0));
            located.truncate(search.polish);
            let mut out = Vec::with_capacity(located.len());
            for (_, mut y) in located {
                if let Some(g) = model.phase_coords() {
                    refit_flow(model, &mut y, true)?;
                    if let Some((_, z)) = screen(model, &y, &g, None, search.screen, 1, 0.0, &mut rng)?.pop() {
                        y = z;
                    }
                    refit_flow(model, &mut y, false)?;
                }
                out.push((model.log_density(&y), y));
            }
            out
        }
        None => screen(model, &x, &core, None, search.screen, search.polish, 0.0, &mut rng)?,
    };

    let mut best: Option<(f64, Vec<f64>)> = None;
    for (_, y) in scored {
        let y = polish(model, &y, &core, None, 0.1, search.max_iters)?;
        let lp = model.log_density(&y);
        if best.as_ref().is_none_or(|(b, _)| lp > *b) {
            best = Some((lp, y));
        }
    }
    let (_, mut x) = best.ok_or_else(|| CloccsError::Numerical("start search found no finite point".into()))?;
    for _ in 0..search.rounds {
        refit_flow(model, &mut x, false)?;
        x = polish(model, &x, &core, None, 0.02, search.max_iters)?;
    }
    if !model.log_density(&x).is_finite() {
        return Err(CloccsError::Numerical(
            "start search ended at a non-finite point".into(),
        ));
    }
    Ok(x)
}
