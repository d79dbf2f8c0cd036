//! Nested-logit mode choice: utilities, probabilities, simulated draws,
//! log-likelihood and maximum-likelihood re-estimation.
//!
//! The tree has three nests: non-motorised (walk, bike), auto (car, taxi)
//! and public transport (transit plus both operator options). Within nest
//! `m` the conditional probability is `exp(V_j/μ_m) / Σ exp(V_k/μ_m)` and
//! the nest is chosen with probability `exp(μ_m I_m) / Σ_s exp(μ_s I_s)`,
//! where `I_m = ln Σ_k exp(V_k/μ_m)`. With every `μ_m = 1` this collapses
//! to multinomial logit.

mod estimate;

pub use estimate::{estimate, Estimate, EstimationConfig, EstimationStatus};

use alloc::format;

use rand::Rng;

use crate::demand::{AltAttributes, ModeAttributes};
use crate::error::{Error, Result};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Mode {
    Walk,
    Bike,
    Car,
    Taxi,
    Transit,
    Rideshare,
    RideshareTransit,
}

impl Mode {
    pub const COUNT: usize = 7;

    /// Canonical order, also the order used by [`sample_choice`].
    pub const ALL: [Mode; Mode::COUNT] = [Mode::Walk, Mode::Bike, Mode::Car, Mode::Taxi, Mode::Transit, Mode::Rideshare, Mode::RideshareTransit];

    pub const fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Mode> {
        Mode::ALL.get(i).copied()
    }

    pub const fn nest(self) -> Nest {
        match self {
            Mode::Walk | Mode::Bike => Nest::NonMotorized,
            Mode::Car | Mode::Taxi => Nest::Auto,
            Mode::Transit | Mode::Rideshare | Mode::RideshareTransit => Nest::PublicTransport,
        }
    }

    pub const fn is_operator_option(self) -> bool {
        matches!(self, Mode::Rideshare | Mode::RideshareTransit)
    }

    pub const fn name(self) -> &'static str {
        match self {
            Mode::Walk => "walk",
            Mode::Bike => "bike",
            Mode::Car => "car",
            Mode::Taxi => "taxi",
            Mode::Transit => "transit",
            Mode::Rideshare => "r",
            Mode::RideshareTransit => "rt",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Nest {
    NonMotorized,
    Auto,
    PublicTransport,
}

impl Nest {
    pub const COUNT: usize = 3;
    pub const ALL: [Nest; Nest::COUNT] = [Nest::NonMotorized, Nest::Auto, Nest::PublicTransport];

    pub const fn index(self) -> usize {
        self as usize
    }

    pub fn members(self) -> impl Iterator<Item = Mode> + Clone {
        Mode::ALL.into_iter().filter(move |m| m.nest() == self)
    }
}

/// Taste coefficients, alternative-specific constants and nest scales.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NlParams {
    pub beta_ovtt: f64,
    pub beta_ivtt: f64,
    pub beta_cost: f64,
    pub asc: [f64; Mode::COUNT],
    pub mu: [f64; Nest::COUNT],
}

impl NlParams {
    /// Customer preferences used to simulate choices in the reference
    /// experiments.
    pub const fn reference_truth() -> Self {
        Self { beta_ovtt: -0.032, beta_ivtt: -0.023, beta_cost: -0.074, asc: [0.0; Mode::COUNT], mu: [1.0, 2.0, 2.0] }
    }

    /// The operator's starting guess before any data is collected.
    pub const fn reference_initial_guess() -> Self {
        Self { beta_ovtt: -0.2, beta_ivtt: -0.1, beta_cost: -0.1, asc: [0.0; Mode::COUNT], mu: [1.0, 1.0, 1.0] }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.beta_ovtt, self.beta_ivtt, self.beta_cost].iter().chain(self.asc.iter()).chain(self.mu.iter()).all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite(format!("NL parameters {self:?}")));
        }
        if self.mu.iter().any(|&m| !(m > 0.0)) {
            return Err(Error::InvalidConfig(format!("nest scales must be positive, got {:?}", self.mu)));
        }
        Ok(())
    }

    pub fn mu_of(&self, mode: Mode) -> f64 {
        self.mu[mode.nest().index()]
    }

    pub fn utility(&self, mode: Mode, attrs: &AltAttributes) -> f64 {
        systematic_utility(self, mode, attrs)
    }

    /// Utilities of the available alternatives.
    pub fn utilities(&self, attrs: &ModeAttributes) -> [Option<f64>; Mode::COUNT] {
        let mut out = [None; Mode::COUNT];
        for m in attrs.available() {
            out[m.index()] = Some(self.utility(m, attrs.get(m)));
        }
        out
    }

    pub fn probabilities(&self, attrs: &ModeAttributes) -> Result<[f64; Mode::COUNT]> {
        choice_probabilities(self, attrs)
    }

    /// Learned parameters in gap order: the three betas then the three μ.
    pub fn learned(&self) -> [f64; 6] {
        [self.beta_ovtt, self.beta_ivtt, self.beta_cost, self.mu[0], self.mu[1], self.mu[2]]
    }

    /// Sum of absolute differences over the learned parameters.
    pub fn gap(&self, truth: &NlParams) -> f64 {
        gap(&self.learned(), &truth.learned()).expect("same layout")
    }
}

/// `ASC_j + β_OVTT·OVTT + β_IVTT·IVTT + β_c·C`.
pub fn systematic_utility(params: &NlParams, mode: Mode, attrs: &AltAttributes) -> f64 {
    params.asc[mode.index()] + params.beta_ovtt * attrs.ovtt + params.beta_ivtt * attrs.ivtt + params.beta_cost * attrs.cost
}

/// `I_m = ln Σ exp(V_j / μ_m)`. `-inf` for an empty nest.
pub fn inclusive_value(mu: f64, utilities: &[f64]) -> f64 {
    math::log_sum_exp(utilities.iter().map(|v| v / mu))
}

/// `Σ |estimated − true|` over two parameter vectors of the same layout.
pub fn gap(estimated: &[f64], truth: &[f64]) -> Result<f64> {
    if estimated.len() != truth.len() {
        return Err(Error::LayoutMismatch(format!("{} vs {} parameters", estimated.len(), truth.len())));
    }
    Ok(estimated.iter().zip(truth).map(|(a, b)| math::abs(a - b)).sum())
}

/// Everything the probability and gradient formulas need for one choice
/// situation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NlEvaluation {
    pub utility: [Option<f64>; Mode::COUNT],
    pub prob: [f64; Mode::COUNT],
    pub log_prob: [f64; Mode::COUNT],
    /// `P(j | m)`.
    pub conditional: [f64; Mode::COUNT],
    pub nest_prob: [f64; Nest::COUNT],
    pub inclusive: [f64; Nest::COUNT],
    /// `Σ_k P(k|m) V_k` per nest.
    pub mean_utility: [f64; Nest::COUNT],
    pub mu: [f64; Nest::COUNT],
}

impl NlEvaluation {
    pub fn new(mu: &[f64; Nest::COUNT], utility: &[Option<f64>; Mode::COUNT]) -> Result<Self> {
        if utility.iter().all(Option::is_none) {
            return Err(Error::EmptyChoiceSet);
        }
        if utility.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("utilities {utility:?}")));
        }
        let mut conditional = [0.0; Mode::COUNT];
        let mut log_conditional = [f64::NEG_INFINITY; Mode::COUNT];
        let mut inclusive = [f64::NEG_INFINITY; Nest::COUNT];
        let mut mean_utility = [0.0; Nest::COUNT];
        let mut scaled_iv = [f64::NEG_INFINITY; Nest::COUNT];

        for nest in Nest::ALL {
            let n = nest.index();
            let mu_n = mu[n];
            let members = nest.members().filter_map(|m| utility[m.index()].map(|v| (m, v)));
            let iv = math::log_sum_exp(members.clone().map(|(_, v)| v / mu_n));
            if iv == f64::NEG_INFINITY {
                continue;
            }
            inclusive[n] = iv;
            scaled_iv[n] = mu_n * iv;
            for (m, v) in members {
                let lc = v / mu_n - iv;
                log_conditional[m.index()] = lc;
                conditional[m.index()] = math::exp(lc);
                mean_utility[n] += conditional[m.index()] * v;
            }
        }

        let top = math::log_sum_exp(scaled_iv.iter().copied());
        let mut nest_prob = [0.0; Nest::COUNT];
        let mut log_nest = [f64::NEG_INFINITY; Nest::COUNT];
        for n in 0..Nest::COUNT {
            if scaled_iv[n] > f64::NEG_INFINITY {
                log_nest[n] = scaled_iv[n] - top;
                nest_prob[n] = math::exp(log_nest[n]);
            }
        }
        let mut prob = [0.0; Mode::COUNT];
        let mut log_prob = [f64::NEG_INFINITY; Mode::COUNT];
        for m in Mode::ALL {
            if utility[m.index()].is_some() {
                let lp = log_conditional[m.index()] + log_nest[m.nest().index()];
                log_prob[m.index()] = lp;
                prob[m.index()] = conditional[m.index()] * nest_prob[m.nest().index()];
            }
        }
        Ok(Self { utility: *utility, prob, log_prob, conditional, nest_prob, inclusive, mean_utility, mu: *mu })
    }

    /// `∂ ln P_j / ∂ V_k`.
    pub fn dlogp_dv(&self, j: Mode, k: Mode) -> f64 {
        if self.utility[k.index()].is_none() {
            return 0.0;
        }
        let mu_m = self.mu[j.nest().index()];
        let mut d = -self.prob[k.index()];
        if j == k {
            d += 1.0 / mu_m;
        }
        if j.nest() == k.nest() {
            d += self.conditional[k.index()] * (1.0 - 1.0 / mu_m);
        }
        d
    }

    /// `∂ ln P_j / ∂ μ_n`.
    pub fn dlogp_dmu(&self, j: Mode, nest: Nest) -> f64 {
        let n = nest.index();
        if self.inclusive[n] == f64::NEG_INFINITY {
            return 0.0;
        }
        let mu_n = self.mu[n];
        let vbar = self.mean_utility[n];
        let mut d = -self.nest_prob[n] * (self.inclusive[n] - vbar / mu_n);
        if j.nest() == nest {
            let v_j = self.utility[j.index()].unwrap_or(0.0);
            d += (vbar - v_j) / (mu_n * mu_n) + self.inclusive[n] - vbar / mu_n;
        }
        d
    }
}

/// Nested-logit probabilities of every alternative; unavailable ones get 0.
pub fn choice_probabilities(params: &NlParams, attrs: &ModeAttributes) -> Result<[f64; Mode::COUNT]> {
    Ok(NlEvaluation::new(&params.mu, &params.utilities(attrs))?.prob)
}

/// Probabilities from precomputed utilities, for callers that adjust them.
pub fn probabilities_from_utilities(mu: &[f64; Nest::COUNT], utilities: &[Option<f64>; Mode::COUNT]) -> Result<[f64; Mode::COUNT]> {
    Ok(NlEvaluation::new(mu, utilities)?.prob)
}

/// Inverse-CDF draw over the alternatives in canonical order. Uses
/// exactly one uniform from `rng`.
pub fn sample_choice<R: Rng + ?Sized>(rng: &mut R, probabilities: &[f64; Mode::COUNT]) -> Result<Mode> {
    if probabilities.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::DegenerateProbabilities(format!("{probabilities:?}")));
    }
    let total: f64 = probabilities.iter().sum();
    if math::abs(total - 1.0) > 1e-9 {
        return Err(Error::DegenerateProbabilities(format!("sum is {total}")));
    }
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = None;
    for m in Mode::ALL {
        let p = probabilities[m.index()];
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = Some(m);
        if u < acc {
            return Ok(m);
        }
    }
    last.ok_or_else(|| Error::DegenerateProbabilities(format!("{probabilities:?}")))
}

/// A customer's reported choice with the attributes they saw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub attributes: ModeAttributes,
    pub chosen: Mode,
}

impl Observation {
    pub fn new(attributes: ModeAttributes, chosen: Mode) -> Result<Self> {
        if !attributes.is_available(chosen) {
            return Err(Error::InvalidConfig(format!("chosen mode {chosen:?} is not available")));
        }
        Ok(Self { attributes, chosen })
    }
}

/// `Σ_n ln P_n(chosen_n)`; `-inf` when a chosen alternative has zero
/// probability.
pub fn log_likelihood(params: &NlParams, observations: &[Observation]) -> Result<f64> {
    let mut ll = 0.0;
    for obs in observations {
        let eval = NlEvaluation::new(&params.mu, &params.utilities(&obs.attributes))?;
        let lp = eval.log_prob[obs.chosen.index()];
        if lp == f64::NEG_INFINITY {
            return Ok(f64::NEG_INFINITY);
        }
        ll += lp;
    }
    Ok(ll)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn attrs_from(rows: &[(f64, f64, f64, bool); 7]) -> ModeAttributes {
        let mut a = ModeAttributes::default();
        for (i, &(o, iv, c, av)) in rows.iter().enumerate() {
            a.0[i] = AltAttributes { ovtt: o, ivtt: iv, cost: c, available: av };
        }
        a
    }

    #[test]
    fn utility_examples() {
        let p = NlParams::reference_truth();
        assert_eq!(p.utility(Mode::Walk, &AltAttributes::new(0.0, 0.0, 0.0)), 0.0);
        let taxi = AltAttributes::new(5.0, 12.0, 10.8);
        assert!((p.utility(Mode::Taxi, &taxi) - (-1.2352)).abs() < 1e-12);
        let double = AltAttributes::new(5.0, 12.0, 21.6);
        assert!((p.utility(Mode::Taxi, &double) - p.utility(Mode::Taxi, &taxi) - (-0.074 * 10.8)).abs() < 1e-12);
    }

    #[test]
    fn inclusive_value_examples() {
        assert_eq!(inclusive_value(1.0, &[0.0]), 0.0);
        assert!((inclusive_value(1.0, &[0.0, 0.0]) - core::f64::consts::LN_2).abs() < 1e-15);
        let expected = (0.5f64.exp() + 1.0f64.exp()).ln();
        assert!((inclusive_value(2.0, &[1.0, 2.0]) - expected).abs() < 1e-14);
        assert!((expected - 1.474).abs() < 1e-3);
    }

    #[test]
    fn single_available_alternative_is_certain() {
        let mut a = ModeAttributes::default();
        a.set(Mode::Car, AltAttributes::new(0.0, 30.0, 4.0));
        let p = choice_probabilities(&NlParams::reference_truth(), &a).unwrap();
        assert_eq!(p[Mode::Car.index()], 1.0);
        assert_eq!(p.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn empty_choice_set_is_rejected() {
        let a = ModeAttributes::default();
        assert_eq!(choice_probabilities(&NlParams::reference_truth(), &a), Err(Error::EmptyChoiceSet));
    }

    #[test]
    fn two_nest_hand_example() {
        // Nest A = {walk}, nest B = {car, taxi}; V = 0 everywhere; μ = (1, 2).
        let mut a = ModeAttributes::default();
        a.set(Mode::Walk, AltAttributes::new(0.0, 0.0, 0.0));
        a.set(Mode::Car, AltAttributes::new(0.0, 0.0, 0.0));
        a.set(Mode::Taxi, AltAttributes::new(0.0, 0.0, 0.0));
        let mut params = NlParams::reference_truth();
        params.mu = [1.0, 2.0, 1.0];
        let p = choice_probabilities(&params, &a).unwrap();
        // I_A = 0, I_B = ln 2, μ_B I_B = 2 ln 2 → P(B) = 4/5.
        assert!((p[Mode::Walk.index()] - 0.2).abs() < 1e-15);
        assert!((p[Mode::Car.index()] - 0.4).abs() < 1e-15);
        assert!((p[Mode::Taxi.index()] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn sample_choice_edges() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let mut certain = [0.0; 7];
        certain[0] = 1.0;
        for _ in 0..100 {
            assert_eq!(sample_choice(&mut rng, &certain).unwrap(), Mode::Walk);
        }
        let mut nan = certain;
        nan[1] = f64::NAN;
        assert!(sample_choice(&mut rng, &nan).is_err());
        let short = [0.1; 7];
        assert!(sample_choice(&mut rng, &short).is_err());

        let mut uniform = [0.0; 7];
        uniform[..4].fill(0.25);
        let n = 100_000;
        let mut counts = [0usize; 7];
        for _ in 0..n {
            counts[sample_choice(&mut rng, &uniform).unwrap().index()] += 1;
        }
        for c in &counts[..4] {
            assert!((*c as f64 / n as f64 - 0.25).abs() < 0.02);
        }
        let mut a = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let mut b = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let sa: Vec<Mode> = (0..50).map(|_| sample_choice(&mut a, &uniform).unwrap()).collect();
        let sb: Vec<Mode> = (0..50).map(|_| sample_choice(&mut b, &uniform).unwrap()).collect();
        assert_eq!(sa, sb);
    }

    #[test]
    fn log_likelihood_examples() {
        let mut single = ModeAttributes::default();
        single.set(Mode::Bike, AltAttributes::new(0.0, 20.0, 0.0));
        let obs: Vec<Observation> = (0..10).map(|_| Observation::new(single, Mode::Bike).unwrap()).collect();
        assert_eq!(log_likelihood(&NlParams::reference_truth(), &obs).unwrap(), 0.0);

        let all = attrs_from(&[(0.0, 0.0, 0.0, true); 7]);
        let mut params = NlParams::reference_truth();
        params.mu = [1.0; 3];
        let obs: Vec<Observation> = (0..10).map(|i| Observation::new(all, Mode::ALL[i % 7]).unwrap()).collect();
        let ll = log_likelihood(&params, &obs).unwrap();
        assert!((ll - 10.0 * (1.0f64 / 7.0).ln()).abs() < 1e-12);
        assert!(Observation::new(single, Mode::Car).is_err());
    }

    #[test]
    fn gap_examples() {
        let truth = NlParams::reference_truth();
        assert_eq!(truth.gap(&truth), 0.0);
        let init = NlParams::reference_initial_guess();
        assert!((init.gap(&truth) - 2.271).abs() < 1e-12);
        let mut bumped = truth;
        bumped.beta_ivtt += 0.125;
        assert!((bumped.gap(&truth) - 0.125).abs() < 1e-15);
        assert!(gap(&[1.0, 2.0], &[1.0]).is_err());
    }

    fn arb_params() -> impl Strategy<Value = NlParams> {
        (-0.3..0.0f64, -0.3..0.0f64, -0.5..0.0f64, proptest::array::uniform7(-2.0..2.0f64), proptest::array::uniform3(0.2..4.0f64))
            .prop_map(|(o, i, c, asc, mu)| NlParams { beta_ovtt: o, beta_ivtt: i, beta_cost: c, asc, mu })
    }

    fn arb_attrs() -> impl Strategy<Value = ModeAttributes> {
        proptest::array::uniform7((0.0..60.0f64, 0.0..200.0f64, 0.0..30.0f64, proptest::bool::weighted(0.8)))
            .prop_filter("at least one available", |rows| rows.iter().any(|r| r.3))
            .prop_map(|rows| attrs_from(&rows))
    }

    fn ln_prob(params: &NlParams, attrs: &ModeAttributes, j: Mode) -> f64 {
        NlEvaluation::new(&params.mu, &params.utilities(attrs)).unwrap().log_prob[j.index()]
    }

    proptest! {
        #[test]
        fn probabilities_sum_to_one(params in arb_params(), attrs in arb_attrs()) {
            let p = choice_probabilities(&params, &attrs).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for m in Mode::ALL {
                if attrs.is_available(m) {
                    prop_assert!(p[m.index()] > 0.0 && p[m.index()] <= 1.0);
                } else {
                    prop_assert_eq!(p[m.index()], 0.0);
                }
            }
        }

        #[test]
        fn equal_scales_are_translation_invariant(mut params in arb_params(), attrs in arb_attrs(), shift in -5.0..5.0f64, mu in 0.3..3.0f64) {
            params.mu = [mu; 3];
            let base = choice_probabilities(&params, &attrs).unwrap();
            params.asc.iter_mut().for_each(|a| *a += shift);
            let moved = choice_probabilities(&params, &attrs).unwrap();
            for (a, b) in base.iter().zip(&moved) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn utility_gradient_matches_finite_differences(params in arb_params(), attrs in arb_attrs(), jj in 0usize..7, kk in 0usize..7) {
            let eval = NlEvaluation::new(&params.mu, &params.utilities(&attrs)).unwrap();
            let j = Mode::ALL[jj];
            let k = Mode::ALL[kk];
            prop_assume!(attrs.is_available(j) && attrs.is_available(k));
            let h = 1e-5;
            let mut up = params; up.asc[k.index()] += h;
            let mut dn = params; dn.asc[k.index()] -= h;
            let fd = (ln_prob(&up, &attrs, j) - ln_prob(&dn, &attrs, j)) / (2.0 * h);
            let an = eval.dlogp_dv(j, k);
            prop_assert!((fd - an).abs() <= 1e-5 * an.abs().max(1e-3), "fd {} an {}", fd, an);
        }

        #[test]
        fn scale_gradient_matches_finite_differences(params in arb_params(), attrs in arb_attrs(), jj in 0usize..7, nn in 0usize..3) {
            let eval = NlEvaluation::new(&params.mu, &params.utilities(&attrs)).unwrap();
            let j = Mode::ALL[jj];
            prop_assume!(attrs.is_available(j));
            let n = Nest::ALL[nn];
            let h = 1e-6;
            let mut up = params; up.mu[n.index()] += h;
            let mut dn = params; dn.mu[n.index()] -= h;
            let fd = (ln_prob(&up, &attrs, j) - ln_prob(&dn, &attrs, j)) / (2.0 * h);
            let an = eval.dlogp_dmu(j, n);
            prop_assert!((fd - an).abs() <= 1e-5 * an.abs().max(1e-3), "fd {} an {}", fd, an);
        }
    }
}
