//! Joint prior over the population, phase and flow-hierarchy parameters.
//!
//! Densities are on the natural scale of each parameter: `sigma0` and
//! `sigma_v` are standard deviations, `tau_i` is the noise SD (its prior is
//! normal on `ln tau_i`, so the density carries a `1 / tau_i` factor).

use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma, Normal, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal as StatrsNormal};
use statrs::function::beta::beta_reg;
use statrs::function::gamma::ln_gamma;

use crate::error::{CloccsError, Result};
use crate::flow::{FlowHyper, FlowPerTime, FlowShared};
use crate::normal;
use crate::population::CloccsParams;
use crate::quadrature::{self, Tolerance};

/// Rejection loops give up after this many tries.
pub const REJECTION_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaShape {
    pub a: f64,
    pub b: f64,
}

impl BetaShape {
    pub fn ln_pdf(&self, x: f64) -> f64 {
        if !(x > 0.0 && x < 1.0) {
            return f64::NEG_INFINITY;
        }
        (self.a - 1.0) * x.ln() + (self.b - 1.0) * (-x).ln_1p() - ln_beta_fn(self.a, self.b)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else if x >= 1.0 {
            1.0
        } else {
            beta_reg(self.a, self.b, x)
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let x: f64 = Gamma::new(self.a, 1.0).expect("valid shape").sample(rng);
        let y: f64 = Gamma::new(self.b, 1.0).expect("valid shape").sample(rng);
        x / (x + y)
    }
}

fn ln_beta_fn(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Inverse-gamma with shape `a` and scale `b` (mean `b / (a - 1)`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvGamma {
    pub shape: f64,
    pub scale: f64,
}

impl InvGamma {
    pub fn ln_pdf(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return f64::NEG_INFINITY;
        }
        self.shape * self.scale.ln() - ln_gamma(self.shape) - (self.shape + 1.0) * x.ln() - self.scale / x
    }

    pub fn mean(&self) -> f64 {
        self.scale / (self.shape - 1.0)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let g: f64 = Gamma::new(self.shape, 1.0 / self.scale)
            .expect("valid shape")
            .sample(rng);
        1.0 / g
    }
}

/// Normal / scaled-inverse-chi-square hyperprior for one per-time quantity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalInvChiSq {
    pub eta: f64,
    pub kappa: f64,
    pub nu: f64,
    pub gamma_sq: f64,
}

impl NormalInvChiSq {
    /// log p(mu, sigma2).
    pub fn ln_pdf(&self, mu: f64, sigma2: f64) -> f64 {
        if !(sigma2 > 0.0) {
            return f64::NEG_INFINITY;
        }
        let half_nu = 0.5 * self.nu;
        let ln_scaled = half_nu * (half_nu * self.gamma_sq).ln()
            - ln_gamma(half_nu)
            - (half_nu + 1.0) * sigma2.ln()
            - half_nu * self.gamma_sq / sigma2;
        ln_scaled + normal::ln_pdf_var(mu, self.eta, sigma2 / self.kappa)
    }

    /// Draws `sigma2 = nu gamma^2 / chi^2_nu`, then `mu | sigma2`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let chi: f64 = Gamma::new(0.5 * self.nu, 2.0).expect("valid shape").sample(rng);
        let sigma2 = self.nu * self.gamma_sq / chi;
        let z: f64 = rng.sample(StandardNormal);
        (self.eta + z * (sigma2 / self.kappa).sqrt(), sigma2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorSpec {
    pub lambda_mean: f64,
    pub lambda_sd: f64,
    pub mu0_mean: f64,
    pub delta_mean: f64,
    pub sigma0: InvGamma,
    pub sigmav: InvGamma,
    pub gamma1: BetaShape,
    pub beta: BetaShape,
    pub gamma2: BetaShape,
    pub tau: NormalInvChiSq,
    pub alpha1: NormalInvChiSq,
    pub alpha2: NormalInvChiSq,
}

impl Default for PriorSpec {
    fn default() -> Self {
        let hyper = |eta, gamma_sq| NormalInvChiSq {
            eta,
            kappa: 2.0,
            nu: 2.0,
            gamma_sq,
        };
        Self {
            lambda_mean: 78.2,
            lambda_sd: 18.2,
            mu0_mean: 78.2,
            delta_mean: 55.0,
            sigma0: InvGamma {
                shape: 2.0,
                scale: 78.2 / 3.0,
            },
            sigmav: InvGamma {
                shape: 12.0,
                scale: 1.0,
            },
            gamma1: BetaShape { a: 2.0, b: 18.0 },
            beta: BetaShape { a: 2.4, b: 17.6 },
            gamma2: BetaShape { a: 7.0, b: 13.0 },
            tau: hyper(-1.91, 0.13),
            alpha1: hyper(7.58, 0.065),
            alpha2: hyper(0.82, 0.0089),
        }
    }
}

impl PriorSpec {
    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("lambda_sd", self.lambda_sd),
            ("mu0_mean", self.mu0_mean),
            ("delta_mean", self.delta_mean),
            ("sigma0.shape", self.sigma0.shape),
            ("sigma0.scale", self.sigma0.scale),
            ("sigmav.shape", self.sigmav.shape),
            ("sigmav.scale", self.sigmav.scale),
            ("gamma1.a", self.gamma1.a),
            ("gamma1.b", self.gamma1.b),
            ("beta.a", self.beta.a),
            ("beta.b", self.beta.b),
            ("gamma2.a", self.gamma2.a),
            ("gamma2.b", self.gamma2.b),
            ("tau.kappa", self.tau.kappa),
            ("tau.nu", self.tau.nu),
            ("tau.gamma_sq", self.tau.gamma_sq),
            ("alpha1.kappa", self.alpha1.kappa),
            ("alpha1.nu", self.alpha1.nu),
            ("alpha1.gamma_sq", self.alpha1.gamma_sq),
            ("alpha2.kappa", self.alpha2.kappa),
            ("alpha2.nu", self.alpha2.nu),
            ("alpha2.gamma_sq", self.alpha2.gamma_sq),
        ];
        for (name, v) in pos {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CloccsError::Config(format!(
                    "prior constant {name} must be positive, got {v}"
                )));
            }
        }
        if !self.lambda_mean.is_finite() {
            return Err(CloccsError::Config("prior constant lambda_mean must be finite".into()));
        }
        Ok(())
    }
}

/// Parameters fixed at zero in a nested submodel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct SubmodelSpec {
    pub fix_mu0: bool,
    pub fix_sigma0: bool,
    pub fix_delta: bool,
}

impl SubmodelSpec {
    pub const FULL: Self = Self {
        fix_mu0: false,
        fix_sigma0: false,
        fix_delta: false,
    };

    /// Short name such as `full` or `mu0=delta=0`.
    pub fn label(&self) -> String {
        let fixed: Vec<&str> = [
            (self.fix_mu0, "mu0"),
            (self.fix_delta, "delta"),
            (self.fix_sigma0, "sigma0sq"),
        ]
        .into_iter()
        .filter_map(|(on, n)| on.then_some(n))
        .collect();
        if fixed.is_empty() {
            "full".to_string()
        } else {
            format!("{}=0", fixed.join("="))
        }
    }

    /// Submodel with the named parameters fixed at zero. Accepts `mu0`,
    /// `delta` and `sigma0` (or `sigma0sq`).
    pub fn from_fixed<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        let mut out = Self::FULL;
        for n in names {
            match n.as_ref().trim() {
                "mu0" => out.fix_mu0 = true,
                "delta" => out.fix_delta = true,
                "sigma0" | "sigma0sq" | "sigma0_sq" => out.fix_sigma0 = true,
                other => {
                    return Err(CloccsError::Config(format!(
                        "cannot fix `{other}`; expected mu0, delta or sigma0"
                    )))
                }
            }
        }
        Ok(out)
    }

    /// The eight nested models, full model first, then single, double and
    /// triple restrictions.
    pub fn lattice() -> [Self; 8] {
        let m = |a, b, c| Self {
            fix_mu0: a,
            fix_delta: b,
            fix_sigma0: c,
        };
        [
            m(false, false, false),
            m(true, false, false),
            m(false, true, false),
            m(false, false, true),
            m(true, true, false),
            m(true, false, true),
            m(false, true, true),
            m(true, true, true),
        ]
    }

    /// Whether `self` keeps every parameter `other` keeps.
    pub fn nests(&self, other: &Self) -> bool {
        (!self.fix_mu0 || other.fix_mu0)
            && (!self.fix_sigma0 || other.fix_sigma0)
            && (!self.fix_delta || other.fix_delta)
    }
}

/// Which of beta, gamma1, gamma2 the data inform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PhaseBlock {
    /// Budding only: gamma1, gamma2 integrated out of the ordering constraint.
    Budding,
    /// Flow only: beta integrated out.
    Flow,
    Joint,
}

impl PhaseBlock {
    pub fn has_beta(self) -> bool {
        matches!(self, Self::Budding | Self::Joint)
    }

    pub fn has_gammas(self) -> bool {
        matches!(self, Self::Flow | Self::Joint)
    }
}

/// One point of the joint parameter space.
#[derive(Debug, Clone, PartialEq)]
pub struct FullParams {
    pub theta: CloccsParams,
    pub beta: Option<f64>,
    pub shared: Option<FlowShared>,
    pub hyper: Option<FlowHyper>,
    pub per_time: Vec<FlowPerTime>,
}

/// Prior with its constrained-phase normalizer computed once.
#[derive(Debug, Clone)]
pub struct Prior {
    spec: PriorSpec,
    ln_order_prob: f64,
}

impl Prior {
    pub fn new(spec: PriorSpec) -> Result<Self> {
        spec.validate()?;
        let z = order_probability(&spec)?;
        if !(z > 0.0) {
            return Err(CloccsError::Numerical(format!(
                "ordering constraint has prior probability {z}"
            )));
        }
        Ok(Self {
            spec,
            ln_order_prob: z.ln(),
        })
    }

    pub fn spec(&self) -> &PriorSpec {
        &self.spec
    }

    /// P(gamma1 < beta < gamma2) under independent Beta marginals.
    pub fn order_probability(&self) -> f64 {
        self.ln_order_prob.exp()
    }

    pub fn ln_lambda(&self, lambda: f64) -> f64 {
        if !(lambda > 0.0) {
            return f64::NEG_INFINITY;
        }
        normal::ln_pdf_var(lambda, self.spec.lambda_mean, self.spec.lambda_sd * self.spec.lambda_sd)
    }

    pub fn ln_mu0(&self, mu0: f64) -> f64 {
        ln_exponential(mu0, self.spec.mu0_mean)
    }

    pub fn ln_delta(&self, delta: f64) -> f64 {
        ln_exponential(delta, self.spec.delta_mean)
    }

    pub fn ln_sigma0(&self, sigma0: f64) -> f64 {
        self.spec.sigma0.ln_pdf(sigma0)
    }

    pub fn ln_sigmav(&self, sigmav: f64) -> f64 {
        self.spec.sigmav.ln_pdf(sigmav)
    }

    /// Normalized prior on whichever of (gamma1, beta, gamma2) are present.
    pub fn ln_phase(&self, beta: Option<f64>, shared: Option<&FlowShared>) -> f64 {
        let s = &self.spec;
        let v = match (beta, shared) {
            (Some(b), Some(g)) => {
                if !(g.gamma1 < b && b < g.gamma2) {
                    return f64::NEG_INFINITY;
                }
                s.gamma1.ln_pdf(g.gamma1) + s.beta.ln_pdf(b) + s.gamma2.ln_pdf(g.gamma2)
            }
            (Some(b), None) => {
                let below = s.gamma1.cdf(b);
                let above = 1.0 - s.gamma2.cdf(b);
                s.beta.ln_pdf(b) + below.ln() + above.ln()
            }
            (None, Some(g)) => {
                if !(g.gamma1 < g.gamma2) {
                    return f64::NEG_INFINITY;
                }
                let between = s.beta.cdf(g.gamma2) - s.beta.cdf(g.gamma1);
                s.gamma1.ln_pdf(g.gamma1) + s.gamma2.ln_pdf(g.gamma2) + between.ln()
            }
            (None, None) => return 0.0,
        };
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v - self.ln_order_prob
        }
    }

    pub fn ln_hyper(&self, hyper: &FlowHyper) -> f64 {
        let s = &self.spec;
        s.tau.ln_pdf(hyper.mu_tau, hyper.sigma2_tau)
            + s.alpha1.ln_pdf(hyper.mu_a1, hyper.sigma2_a1)
            + s.alpha2.ln_pdf(hyper.mu_a2, hyper.sigma2_a2)
    }

    /// Density of one time point's flow parameters given the hyperparameters.
    /// `alpha2` is normal truncated to positive values.
    pub fn ln_per_time(&self, pt: &FlowPerTime, hyper: &FlowHyper) -> f64 {
        if !(pt.tau > 0.0 && pt.alpha2 > 0.0) {
            return f64::NEG_INFINITY;
        }
        let ln_tau = pt.tau.ln();
        normal::ln_pdf_var(ln_tau, hyper.mu_tau, hyper.sigma2_tau) - ln_tau
            + normal::ln_pdf_var(pt.alpha1, hyper.mu_a1, hyper.sigma2_a1)
            + normal::ln_pdf_var(pt.alpha2, hyper.mu_a2, hyper.sigma2_a2)
            - ln_positive_prob(hyper.mu_a2, hyper.sigma2_a2)
    }

    /// Full log prior; fixed submodel parameters contribute no factor.
    pub fn log_prior(&self, p: &FullParams, sub: SubmodelSpec) -> f64 {
        let th = &p.theta;
        if th.validate().is_err() {
            return f64::NEG_INFINITY;
        }
        let mut lp = self.ln_lambda(th.lambda) + self.ln_sigmav(th.sigmav_sq.sqrt());
        lp += if sub.fix_mu0 {
            zero_or_inf(th.mu0)
        } else {
            self.ln_mu0(th.mu0)
        };
        lp += if sub.fix_delta {
            zero_or_inf(th.delta)
        } else {
            self.ln_delta(th.delta)
        };
        lp += if sub.fix_sigma0 {
            zero_or_inf(th.sigma0_sq)
        } else {
            self.ln_sigma0(th.sigma0_sq.sqrt())
        };
        lp += self.ln_phase(p.beta, p.shared.as_ref());
        match &p.hyper {
            Some(h) => {
                lp += self.ln_hyper(h);
                for pt in &p.per_time {
                    lp += self.ln_per_time(pt, h);
                }
            }
            None if !p.per_time.is_empty() => return f64::NEG_INFINITY,
            None => {}
        }
        if lp.is_nan() {
            f64::NEG_INFINITY
        } else {
            lp
        }
    }

    /// Draws from the prior; fixed submodel parameters are set to zero.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        phase: Option<PhaseBlock>,
        n_times: usize,
        sub: SubmodelSpec,
        rng: &mut R,
    ) -> Result<FullParams> {
        let s = &self.spec;
        let lambda = (0..REJECTION_CAP)
            .map(|_| Normal::new(s.lambda_mean, s.lambda_sd).expect("valid sd").sample(rng))
            .find(|&l| l > 0.0)
            .ok_or_else(|| CloccsError::Numerical("no positive lambda draw".into()))?;
        let mu0 = if sub.fix_mu0 {
            0.0
        } else {
            Exp::new(1.0 / s.mu0_mean).expect("rate").sample(rng)
        };
        let delta = if sub.fix_delta {
            0.0
        } else {
            Exp::new(1.0 / s.delta_mean).expect("rate").sample(rng)
        };
        let sigma0 = if sub.fix_sigma0 { 0.0 } else { s.sigma0.sample(rng) };
        let sigmav = s.sigmav.sample(rng);
        let theta = CloccsParams {
            mu0,
            sigma0_sq: sigma0 * sigma0,
            sigmav_sq: sigmav * sigmav,
            lambda,
            delta,
        };

        let (beta, shared) = match phase {
            None => (None, None),
            Some(block) => {
                let (g1, b, g2) = self.sample_ordered_phase(rng)?;
                let beta = block.has_beta().then_some(b);
                let shared = block.has_gammas().then_some(FlowShared { gamma1: g1, gamma2: g2 });
                (beta, shared)
            }
        };

        let (hyper, per_time) = if n_times > 0 {
            let (mu_tau, sigma2_tau) = s.tau.sample(rng);
            let (mu_a1, sigma2_a1) = s.alpha1.sample(rng);
            let (mu_a2, sigma2_a2) = s.alpha2.sample(rng);
            let h = FlowHyper {
                mu_tau,
                sigma2_tau,
                mu_a1,
                sigma2_a1,
                mu_a2,
                sigma2_a2,
            };
            let per_time = (0..n_times)
                .map(|_| {
                    let z1: f64 = rng.sample(StandardNormal);
                    let z2: f64 = rng.sample(StandardNormal);
                    FlowPerTime {
                        alpha1: mu_a1 + z1 * sigma2_a1.sqrt(),
                        alpha2: sample_positive_normal(mu_a2, sigma2_a2.sqrt(), rng),
                        tau: (mu_tau + z2 * sigma2_tau.sqrt()).exp(),
                    }
                })
                .collect();
            (Some(h), per_time)
        } else {
            (None, Vec::new())
        };

        Ok(FullParams {
            theta,
            beta,
            shared,
            hyper,
            per_time,
        })
    }

    /// Rejection draw of `(gamma1, beta, gamma2)` with `gamma1 < beta < gamma2`.
    pub fn sample_ordered_phase<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(f64, f64, f64)> {
        let s = &self.spec;
        for _ in 0..REJECTION_CAP {
            let g1 = s.gamma1.sample(rng);
            let b = s.beta.sample(rng);
            let g2 = s.gamma2.sample(rng);
            if g1 < b && b < g2 {
                return Ok((g1, b, g2));
            }
        }
        Err(CloccsError::Numerical(format!(
            "no ordered (gamma1, beta, gamma2) draw after {REJECTION_CAP} attempts"
        )))
    }
}

fn zero_or_inf(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        f64::NEG_INFINITY
    }
}

fn ln_exponential(x: f64, mean: f64) -> f64 {
    if x < 0.0 || x.is_nan() {
        f64::NEG_INFINITY
    } else {
        -mean.ln() - x / mean
    }
}

/// ln P(X > 0) for X ~ N(mu, sigma2).
fn ln_positive_prob(mu: f64, sigma2: f64) -> f64 {
    normal::cdf(mu / sigma2.sqrt()).ln()
}

fn sample_positive_normal<R: Rng + ?Sized>(mu: f64, sd: f64, rng: &mut R) -> f64 {
    // X = mu - sd W with W standard normal truncated to W < mu / sd.
    let upper = normal::cdf(mu / sd);
    let std = StatrsNormal::new(0.0, 1.0).expect("standard normal");
    loop {
        let u: f64 = rng.random::<f64>() * upper;
        let w = std.inverse_cdf(u);
        let x = mu - sd * w;
        if x > 0.0 && x.is_finite() {
            return x;
        }
    }
}

/// P(gamma1 < beta < gamma2) = int Beta(b) F1(b) (1 - F2(b)) db.
pub fn order_probability(spec: &PriorSpec) -> Result<f64> {
    let tol = Tolerance {
        abs: 1e-14,
        rel: 1e-12,
        max_intervals: 4000,
    };
    let est = quadrature::integrate_finite(
        |b| {
            if b <= 0.0 || b >= 1.0 {
                return 0.0;
            }
            spec.beta.ln_pdf(b).exp() * spec.gamma1.cdf(b) * (1.0 - spec.gamma2.cdf(b))
        },
        0.0,
        1.0,
        tol,
    )?;
    Ok(est.value)
}

/// Lists every violated support condition by parameter name.
pub fn check_support(p: &FullParams) -> Vec<String> {
    let mut bad = Vec::new();
    let th = &p.theta;
    let mut need = |ok: bool, name: &str| {
        if !ok {
            bad.push(name.to_string());
        }
    };
    need(th.mu0 >= 0.0 && th.mu0.is_finite(), "mu0");
    need(th.sigma0_sq >= 0.0 && th.sigma0_sq.is_finite(), "sigma0");
    need(th.sigmav_sq >= 0.0 && th.sigmav_sq.is_finite(), "sigmav");
    need(th.lambda > 0.0 && th.lambda.is_finite(), "lambda");
    need(th.delta >= 0.0 && th.delta.is_finite(), "delta");
    if let Some(b) = p.beta {
        need(b > 0.0 && b < 1.0, "beta");
    }
    if let Some(g) = p.shared {
        need(g.gamma1 > 0.0 && g.gamma1 < 1.0, "gamma1");
        need(g.gamma2 > 0.0 && g.gamma2 < 1.0, "gamma2");
        need(g.gamma1 < g.gamma2, "gamma1<gamma2");
        if let Some(b) = p.beta {
            need(g.gamma1 < b && b < g.gamma2, "gamma1<beta<gamma2");
        }
    }
    if let Some(h) = p.hyper {
        need(h.sigma2_tau > 0.0, "sigma2_tau");
        need(h.sigma2_a1 > 0.0, "sigma2_alpha1");
        need(h.sigma2_a2 > 0.0, "sigma2_alpha2");
        need(
            h.mu_tau.is_finite() && h.mu_a1.is_finite() && h.mu_a2.is_finite(),
            "hyper means",
        );
    }
    for (i, pt) in p.per_time.iter().enumerate() {
        need(pt.tau > 0.0 && pt.tau.is_finite(), &format!("tau_{i}"));
        need(pt.alpha2 > 0.0 && pt.alpha2.is_finite(), &format!("alpha2_{i}"));
        need(pt.alpha1.is_finite(), &format!("alpha1_{i}"));
    }
    bad
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{Beta as SBeta, Continuous, Exp as SExp, Gamma as SGamma};

    fn draw(prior: &Prior, seed: u64) -> FullParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        prior
            .sample(Some(PhaseBlock::Joint), 4, SubmodelSpec::FULL, &mut rng)
            .unwrap()
    }

    #[test]
    fn ordering_violation_is_impossible() {
        let prior = Prior::new(PriorSpec::default()).unwrap();
        let mut p = draw(&prior, 1);
        p.beta = Some(0.1);
        p.shared = Some(FlowShared {
            gamma1: 0.2,
            gamma2: 0.4,
        });
        assert_eq!(prior.log_prior(&p, SubmodelSpec::FULL), f64::NEG_INFINITY);
        assert!(check_support(&p).contains(&"gamma1<beta<gamma2".to_string()));
    }

    #[test]
    fn lambda_at_its_mean() {
        let prior = Prior::new(PriorSpec::default()).unwrap();
        let want = -(18.2 * (2.0 * std::f64::consts::PI).sqrt()).ln();
        assert!((prior.ln_lambda(78.2) - want).abs() < 1e-14);
    }

    #[test]
    fn components_match_statrs() {
        let prior = Prior::new(PriorSpec::default()).unwrap();
        let e = SExp::new(1.0 / 78.2).unwrap();
        assert!((prior.ln_mu0(40.0) - e.ln_pdf(40.0)).abs() < 1e-12);
        let b = SBeta::new(2.4, 17.6).unwrap();
        assert!((PriorSpec::default().beta.ln_pdf(0.13) - b.ln_pdf(0.13)).abs() < 1e-10);
        // 1/X for X ~ Gamma(shape 12, rate 1): f(x) = g(1/x) / x^2.
        let g = SGamma::new(12.0, 1.0).unwrap();
        let x: f64 = 0.08;
        assert!((prior.ln_sigmav(x) - (g.ln_pdf(1.0 / x) - 2.0 * x.ln())).abs() < 1e-10);
    }

    #[test]
    fn density_ratio_factorizes() {
        let prior = Prior::new(PriorSpec::default()).unwrap();
        let a = draw(&prior, 2);
        let mut b = a.clone();
        b.theta.lambda += 3.0;
        b.theta.delta *= 1.5;
        let full = prior.log_prior(&b, SubmodelSpec::FULL) - prior.log_prior(&a, SubmodelSpec::FULL);
        let parts = prior.ln_lambda(b.theta.lambda) - prior.ln_lambda(a.theta.lambda) + prior.ln_delta(b.theta.delta)
            - prior.ln_delta(a.theta.delta);
        assert!((full - parts).abs() < 1e-10);
    }

    #[test]
    fn order_probability_matches_monte_carlo() {
        let spec = PriorSpec::default();
        let z = order_probability(&spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 400_000;
        let hits = (0..n)
            .filter(|_| {
                let g1 = spec.gamma1.sample(&mut rng);
                let b = spec.beta.sample(&mut rng);
                let g2 = spec.gamma2.sample(&mut rng);
                g1 < b && b < g2
            })
            .count() as f64;
        let p = hits / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((p - z).abs() < 4.0 * se, "mc {p} vs quad {z}");
    }

    #[test]
    fn marginal_phase_priors_are_normalized() {
        let prior = Prior::new(PriorSpec::default()).unwrap();
        let tol = Tolerance::default();
        let budding = quadrature::integrate_finite(|b| prior.ln_phase(Some(b), None).exp(), 0.0, 1.0, tol).unwrap();
        assert!((budding.value - 1.0).abs() < 1e-8, "{}", budding.value);
        let inner = |g1: f64| {
            quadrature::integrate_finite(
                |g2| {
                    if g2 <= g1 {
                        0.0
                    } else {
                        prior.ln_phase(None, Some(&FlowShared { gamma1: g1, gamma2: g2 })).exp()
                    }
                },
                g1,
                1.0,
                Tolerance {
                    abs: 1e-12,
                    rel: 1e-10,
                    max_intervals: 2000,
                },
            )
            .unwrap()
            .value
        };
        let flow = quadrature::integrate_finite(
            inner,
            0.0,
            1.0,
            Tolerance {
                abs: 1e-9,
                rel: 1e-9,
                max_intervals: 2000,
            },
        )
        .unwrap();
        assert!((flow.value - 1.0).abs() < 1e-6, "{}", flow.value);
    }

    #[test]
    fn truncated_alpha2_density_is_normalized() {
        let prior = Prior::new(PriorSpec::default()).unwrap();
        let h = FlowHyper {
            mu_tau: -2.0,
            sigma2_tau: 0.1,
            mu_a1: 8.0,
            sigma2_a1: 0.05,
            mu_a2: 0.3,
            sigma2_a2: 0.5,
        };
        let pt = |a2: f64| FlowPerTime {
            alpha1: 8.0,
            alpha2: a2,
            tau: (-2.0f64).exp(),
        };
        let base = normal::ln_pdf_var(-2.0, -2.0, 0.1) + 2.0 + normal::ln_pdf_var(8.0, 8.0, 0.05);
        let mass = quadrature::integrate(
            |a2| {
                if a2 <= 0.0 {
                    0.0
                } else {
                    (prior.ln_per_time(&pt(a2), &h) - base).exp()
                }
            },
            0.0,
            f64::INFINITY,
            Tolerance::default(),
        )
        .unwrap();
        assert!((mass.value - 1.0).abs() < 1e-9, "{}", mass.value);
    }

    #[test]
    fn draws_are_in_support_and_finite() {
        let prior = Prior::new(PriorSpec::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for phase in [PhaseBlock::Joint, PhaseBlock::Budding, PhaseBlock::Flow] {
            for _ in 0..2000 {
                let p = prior.sample(Some(phase), 3, SubmodelSpec::FULL, &mut rng).unwrap();
                assert!(check_support(&p).is_empty());
                assert!(prior.log_prior(&p, SubmodelSpec::FULL).is_finite());
            }
        }
        let sub = SubmodelSpec {
            fix_mu0: true,
            fix_sigma0: true,
            fix_delta: true,
        };
        let p = prior.sample(Some(PhaseBlock::Joint), 0, sub, &mut rng).unwrap();
        assert_eq!((p.theta.mu0, p.theta.sigma0_sq, p.theta.delta), (0.0, 0.0, 0.0));
        assert!(prior.log_prior(&p, sub).is_finite());
        assert_eq!(prior.log_prior(&p, SubmodelSpec::FULL), f64::NEG_INFINITY);
    }

    #[test]
    fn support_check_names_violations() {
        let prior = Prior::new(PriorSpec::default()).unwrap();
        let mut p = draw(&prior, 5);
        assert!(check_support(&p).is_empty());
        p.theta.delta = -1.0;
        assert_eq!(check_support(&p), vec!["delta".to_string()]);
        p.theta.delta = 10.0;
        let g = p.shared.unwrap().gamma1;
        p.shared = Some(FlowShared { gamma1: g, gamma2: g });
        assert!(check_support(&p).contains(&"gamma1<gamma2".to_string()));
    }

    #[test]
    fn exponential_and_inverse_gamma_moments() {
        let prior = Prior::new(PriorSpec::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 200_000;
        let draws: Vec<FullParams> = (0..n)
            .map(|_| prior.sample(None, 0, SubmodelSpec::FULL, &mut rng).unwrap())
            .collect();
        let mean = |f: &dyn Fn(&FullParams) -> f64| draws.iter().map(f).sum::<f64>() / n as f64;
        let m_mu0 = mean(&|p| p.theta.mu0);
        assert!((m_mu0 - 78.2).abs() < 3.0 * 78.2 / (n as f64).sqrt());
        let m_delta = mean(&|p| p.theta.delta);
        assert!((m_delta - 55.0).abs() < 3.0 * 55.0 / (n as f64).sqrt());
        // IG(12, 1): sd = 1 / (11 sqrt(10)).
        let m_sv = mean(&|p| p.theta.sigmav_sq.sqrt());
        assert!((m_sv - 1.0 / 11.0).abs() < 3.0 / (11.0 * 10f64.sqrt()) / (n as f64).sqrt());
        let mut mu0s: Vec<f64> = draws.iter().map(|p| p.theta.mu0).collect();
        mu0s.sort_by(f64::total_cmp);
        let q975 = mu0s[(0.975 * n as f64) as usize];
        assert!((q975 / (-78.2 * 0.025f64.ln()) - 1.0).abs() < 0.02);
    }

    #[test]
    fn scaled_inverse_chi_square_heavy_tail() {
        // nu = 2: sigma2 = gamma^2 / E with E ~ Exp(1), so P(sigma2 > q) = 1 - exp(-gamma^2 / q).
        let h = PriorSpec::default().tau;
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let n = 200_000;
        let mut s: Vec<f64> = (0..n).map(|_| h.sample(&mut rng).1).collect();
        s.sort_by(f64::total_cmp);
        for p in [0.5f64, 0.9, 0.99] {
            let want = -h.gamma_sq / p.ln();
            let got = s[(p * n as f64) as usize];
            assert!((got / want - 1.0).abs() < 0.05, "p={p}: {got} vs {want}");
        }
    }
}
