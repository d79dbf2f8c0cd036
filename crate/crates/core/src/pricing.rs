//! Per-request price adjustments for the two operator options.
//!
//! The operator picks fare adjustments `δ = (δ_R, δ_RT)` maximizing the
//! expected profit `Σ_j P_j(δ)(f_j − c_j + δ_j)` under its nested-logit
//! estimate. In constrained mode every price is capped by the quantile
//! bound on willingness to pay; prices never drop below zero.

use alloc::vec::Vec;

use crate::choice::{Mode, Nest, NlEvaluation, NlParams};
use crate::demand::ModeAttributes;
use crate::error::{Error, Result};
use crate::math;

/// The two operator options, in the order used by every `[_; 2]` array here.
pub const OPTIONS: [Mode; 2] = [Mode::Rideshare, Mode::RideshareTransit];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum PricingMode {
    /// Base fares only.
    #[default]
    None,
    Constrained,
    Unconstrained,
}

impl PricingMode {
    pub const ALL: [PricingMode; 3] = [PricingMode::None, PricingMode::Constrained, PricingMode::Unconstrained];

    pub const fn name(self) -> &'static str {
        match self {
            PricingMode::None => "none",
            PricingMode::Constrained => "constrained",
            PricingMode::Unconstrained => "unconstrained",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PricingConfig {
    pub mode: PricingMode,
    /// Allowed probability that a price exceeds willingness to pay.
    pub alpha: f64,
    /// Standard deviation of willingness to pay around its reference cost.
    pub s: f64,
    pub starts: usize,
    pub step_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for PricingConfig {
    fn default() -> Self {
        Self { mode: PricingMode::Constrained, alpha: 0.05, s: 0.0, starts: 5, step_tolerance: 1e-8, max_iterations: 5000 }
    }
}

impl PricingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(alloc::format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.s >= 0.0) || !self.s.is_finite() {
            return Err(Error::InvalidConfig(alloc::format!("WTP std must be finite and >= 0, got {}", self.s)));
        }
        if self.starts == 0 || self.max_iterations == 0 || !(self.step_tolerance > 0.0) {
            return Err(Error::InvalidConfig("solver starts, iterations and tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Upper bound on a ticket price: `w + Z_{1−α}·s`.
pub fn price_cap(w: f64, s: f64, alpha: f64) -> f64 {
    if s == 0.0 {
        return w;
    }
    w + math::normal_quantile(1.0 - alpha) * s
}

/// Utility after a fare adjustment: `V + β_c·δ`.
pub fn adjusted_utility(v: f64, beta_cost: f64, delta: f64) -> f64 {
    v + beta_cost * delta
}

/// One operator option as quoted at base fare.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MenuItem {
    pub fare: f64,
    pub op_cost: f64,
    /// Systematic utility at δ = 0.
    pub utility: f64,
}

impl MenuItem {
    pub fn margin(&self, delta: f64) -> f64 {
        self.fare - self.op_cost + delta
    }
}

/// The options offered to one customer, indexed like [`OPTIONS`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Assortment {
    pub options: [Option<MenuItem>; 2],
}

impl Assortment {
    /// Builds the menu from the attributes of the operator options, which
    /// must already hold the base fares.
    pub fn from_attributes(params: &NlParams, attrs: &ModeAttributes, op_cost: [f64; 2]) -> Self {
        let mut options = [None; 2];
        for (i, mode) in OPTIONS.into_iter().enumerate() {
            let a = attrs.get(mode);
            if a.available {
                options[i] = Some(MenuItem { fare: a.cost, op_cost: op_cost[i], utility: params.utility(mode, a) });
            }
        }
        Self { options }
    }

    pub fn is_empty(&self) -> bool {
        self.options.iter().all(Option::is_none)
    }
}

/// The rest of the customer's choice set, as seen by the operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChoiceContext {
    pub mu: [f64; Nest::COUNT],
    pub beta_cost: f64,
    /// Utilities of the outside alternatives; operator slots are ignored.
    pub utilities: [Option<f64>; Mode::COUNT],
}

impl ChoiceContext {
    pub fn new(params: &NlParams, attrs: &ModeAttributes) -> Self {
        let mut utilities = params.utilities(attrs);
        for m in OPTIONS {
            utilities[m.index()] = None;
        }
        Self { mu: params.mu, beta_cost: params.beta_cost, utilities }
    }

    fn with_offers(&self, assortment: &Assortment, delta: &[f64; 2]) -> [Option<f64>; Mode::COUNT] {
        let mut u = self.utilities;
        for (i, mode) in OPTIONS.into_iter().enumerate() {
            u[mode.index()] = assortment.options[i].map(|o| adjusted_utility(o.utility, self.beta_cost, delta[i]));
        }
        u
    }
}

/// Choice probabilities of the two options at `delta`.
pub fn option_probabilities(delta: &[f64; 2], assortment: &Assortment, context: &ChoiceContext) -> Result<[f64; 2]> {
    let eval = NlEvaluation::new(&context.mu, &context.with_offers(assortment, delta))?;
    Ok(OPTIONS.map(|m| eval.prob[m.index()]))
}

/// Expected operator profit at `delta`.
pub fn expected_profit(delta: &[f64; 2], assortment: &Assortment, context: &ChoiceContext) -> Result<f64> {
    Ok(profit_and_gradient(delta, assortment, context)?.0)
}

/// Expected profit and its gradient in `delta`. Absent options get a zero
/// gradient entry.
pub fn profit_and_gradient(delta: &[f64; 2], assortment: &Assortment, context: &ChoiceContext) -> Result<(f64, [f64; 2])> {
    let eval = NlEvaluation::new(&context.mu, &context.with_offers(assortment, delta))?;
    let mut profit = 0.0;
    let mut grad = [0.0; 2];
    for (j, mj) in OPTIONS.into_iter().enumerate() {
        let Some(item) = assortment.options[j] else { continue };
        let p_j = eval.prob[mj.index()];
        let margin = item.margin(delta[j]);
        profit += p_j * margin;
        grad[j] += p_j;
        for (i, mi) in OPTIONS.into_iter().enumerate() {
            if assortment.options[i].is_some() {
                grad[i] += margin * p_j * context.beta_cost * eval.dlogp_dv(mj, mi);
            }
        }
    }
    Ok((profit, grad))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverStatus {
    /// Pricing disabled; base fares kept.
    Fixed,
    Converged,
    IterationLimit,
    /// Result of the exhaustive grid search.
    Grid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceSolution {
    pub delta: [f64; 2],
    /// Final ticket price `f + δ`; zero for absent options.
    pub price: [f64; 2],
    /// Price cap per option; infinite when uncapped.
    pub cap: [f64; 2],
    pub expected_profit: f64,
    pub active_upper: [bool; 2],
    pub active_lower: [bool; 2],
    /// Options that remain on offer. An option whose cap is negative
    /// cannot be priced and is withdrawn.
    pub offered: [bool; 2],
    pub status: SolverStatus,
    pub iterations: usize,
}

/// Feasible `δ` range per option and the resulting reduced assortment.
struct Problem {
    assortment: Assortment,
    lo: [f64; 2],
    hi: [f64; 2],
    cap: [f64; 2],
}

fn check_inputs(assortment: &Assortment, context: &ChoiceContext, config: &PricingConfig) -> Result<()> {
    config.validate()?;
    if assortment.is_empty() {
        return Err(Error::EmptyAssortment);
    }
    let finite = |x: f64| x.is_finite();
    for item in assortment.options.iter().flatten() {
        if !(finite(item.fare) && finite(item.op_cost) && finite(item.utility)) {
            return Err(Error::NonFinite(alloc::format!("menu item {item:?}")));
        }
    }
    if context.utilities.iter().flatten().any(|v| !v.is_finite()) || !context.beta_cost.is_finite() {
        return Err(Error::NonFinite("choice context".into()));
    }
    if config.mode == PricingMode::Unconstrained && context.beta_cost >= 0.0 {
        return Err(Error::UnboundedPricing(context.beta_cost));
    }
    Ok(())
}

fn problem(assortment: &Assortment, config: &PricingConfig, w: f64) -> Problem {
    let mut reduced = *assortment;
    let mut lo = [0.0; 2];
    let mut hi = [0.0; 2];
    let mut cap = [f64::INFINITY; 2];
    for i in 0..2 {
        let Some(item) = assortment.options[i] else { continue };
        lo[i] = -item.fare;
        if config.mode == PricingMode::Constrained {
            cap[i] = price_cap(w, config.s, config.alpha);
            if cap[i] < 0.0 {
                reduced.options[i] = None;
                continue;
            }
            hi[i] = cap[i] - item.fare;
        } else {
            hi[i] = f64::INFINITY;
        }
    }
    Problem { assortment: reduced, lo, hi, cap }
}

fn finish(p: &Problem, delta: [f64; 2], profit: f64, status: SolverStatus, iterations: usize) -> PriceSolution {
    let mut sol = PriceSolution {
        delta: [0.0; 2],
        price: [0.0; 2],
        cap: p.cap,
        expected_profit: profit,
        active_upper: [false; 2],
        active_lower: [false; 2],
        offered: [false; 2],
        status,
        iterations,
    };
    #[allow(clippy::needless_range_loop)]
    for i in 0..2 {
        let Some(item) = p.assortment.options[i] else { continue };
        sol.offered[i] = true;
        sol.delta[i] = delta[i];
        sol.price[i] = (item.fare + delta[i]).max(0.0);
        if sol.price[i] > p.cap[i] {
            sol.price[i] = p.cap[i];
        }
        sol.active_upper[i] = p.hi[i].is_finite() && delta[i] >= p.hi[i] - 1e-9;
        sol.active_lower[i] = delta[i] <= p.lo[i] + 1e-9;
    }
    sol
}

/// Base fares with no adjustment, used when pricing is off.
pub fn base_fares(assortment: &Assortment, context: &ChoiceContext) -> Result<PriceSolution> {
    if assortment.is_empty() {
        return Err(Error::EmptyAssortment);
    }
    let p = Problem { assortment: *assortment, lo: [f64::NEG_INFINITY; 2], hi: [f64::INFINITY; 2], cap: [f64::INFINITY; 2] };
    let profit = expected_profit(&[0.0; 2], assortment, context)?;
    Ok(finish(&p, [0.0; 2], profit, SolverStatus::Fixed, 0))
}

/// Profit-maximizing fare adjustments by multi-start projected gradient
/// ascent. `w` is the customer's reference cost for the price cap.
pub fn optimize(assortment: &Assortment, context: &ChoiceContext, config: &PricingConfig, w: f64) -> Result<PriceSolution> {
    check_inputs(assortment, context, config)?;
    if config.mode == PricingMode::None {
        return base_fares(assortment, context);
    }
    let p = problem(assortment, config, w);
    if p.assortment.is_empty() {
        return Ok(finish(&p, [0.0; 2], 0.0, SolverStatus::Converged, 0));
    }
    let active: Vec<usize> = (0..2).filter(|&i| p.assortment.options[i].is_some()).collect();

    let mut starts: Vec<[f64; 2]> = Vec::new();
    let pick = |f: &dyn Fn(usize) -> f64| -> [f64; 2] {
        let mut x = [0.0; 2];
        for &i in &active {
            x[i] = f(i);
        }
        x
    };
    if active.iter().all(|&i| p.hi[i].is_finite()) {
        starts.push(pick(&|i| 0.0f64.clamp(p.lo[i], p.hi[i])));
        starts.push(pick(&|i| p.hi[i]));
        starts.push(pick(&|i| 0.5 * (p.lo[i] + p.hi[i])));
        starts.push(pick(&|i| if i == 0 { p.hi[i] } else { p.lo[i] }));
        starts.push(pick(&|i| if i == 0 { p.lo[i] } else { p.hi[i] }));
    } else {
        let inv = 1.0 / math::abs(context.beta_cost);
        let guess = |i: usize, scale: f64| -> f64 {
            let item = p.assortment.options[i].expect("active");
            (item.op_cost - item.fare + scale * inv).max(p.lo[i])
        };
        starts.push(pick(&|i| 0.0f64.max(p.lo[i])));
        starts.push(pick(&|i| guess(i, 1.0)));
        starts.push(pick(&|i| guess(i, 2.0)));
        starts.push(pick(&|i| guess(i, 0.5)));
        starts.push(pick(&|i| guess(i, 4.0)));
    }
    starts.truncate(config.starts.max(1));

    let mut best: Option<([f64; 2], f64, SolverStatus, usize)> = None;
    for x0 in starts {
        let (x, f, status, iters) = ascend(&p, context, config, x0)?;
        if best.is_none_or(|b| f > b.1) {
            best = Some((x, f, status, iters));
        }
    }
    let (x, f, status, iters) = best.expect("at least one start");
    Ok(finish(&p, x, f, status, iters))
}

fn project(p: &Problem, x: [f64; 2]) -> [f64; 2] {
    let mut y = [0.0; 2];
    for i in 0..2 {
        if p.assortment.options[i].is_some() {
            y[i] = x[i].clamp(p.lo[i], p.hi[i]);
        }
    }
    y
}

fn ascend(p: &Problem, context: &ChoiceContext, config: &PricingConfig, x0: [f64; 2]) -> Result<([f64; 2], f64, SolverStatus, usize)> {
    let mut x = project(p, x0);
    let (mut f, mut g) = profit_and_gradient(&x, &p.assortment, context)?;
    let mut step = 1.0;
    let mut prev: Option<([f64; 2], [f64; 2])> = None;
    for iter in 0..config.max_iterations {
        if let Some((px, pg)) = prev {
            // Barzilai-Borwein step for ascent: s·s / −s·y.
            let s = [x[0] - px[0], x[1] - px[1]];
            let y = [g[0] - pg[0], g[1] - pg[1]];
            let sy = s[0] * y[0] + s[1] * y[1];
            let ss = s[0] * s[0] + s[1] * s[1];
            step = if sy < 0.0 { (ss / -sy).clamp(1e-6, 1e6) } else { (step * 2.0).min(1e6) };
        }
        let mut t = step;
        let mut accepted = None;
        for _ in 0..80 {
            let cand = project(p, [x[0] + t * g[0], x[1] + t * g[1]]);
            let d = [cand[0] - x[0], cand[1] - x[1]];
            let (fc, gc) = profit_and_gradient(&cand, &p.assortment, context)?;
            if fc >= f + 1e-4 * (g[0] * d[0] + g[1] * d[1]) {
                accepted = Some((cand, fc, gc, d));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, fc, gc, d)) = accepted else {
            return Ok((x, f, SolverStatus::Converged, iter));
        };
        prev = Some((x, g));
        step = t;
        x = cand;
        f = fc;
        g = gc;
        if math::sqrt(d[0] * d[0] + d[1] * d[1]) < config.step_tolerance {
            return Ok((x, f, SolverStatus::Converged, iter + 1));
        }
    }
    Ok((x, f, SolverStatus::IterationLimit, config.max_iterations))
}

/// Closed-form profit evaluation specialised to one assortment: only the
/// operator options move, so every other nest term is a constant.
struct Kernel {
    margins: [f64; 2],
    present: [bool; 2],
    log_a: [f64; 2],
    /// `β_c / μ` of the operator nest.
    slope: f64,
    mu: f64,
    /// Sum of `exp(V/μ − shift)` over the other members of the operator nest.
    s0: f64,
    shift: f64,
    /// Log of `Σ exp(μ_m I_m)` over the other nests.
    log_other: f64,
}

impl Kernel {
    fn new(assortment: &Assortment, context: &ChoiceContext) -> Self {
        let nest = Mode::Rideshare.nest();
        debug_assert_eq!(nest, Mode::RideshareTransit.nest());
        let mu = context.mu[nest.index()];
        let mut present = [false; 2];
        let mut margins = [0.0; 2];
        let mut scaled = [f64::NEG_INFINITY; 2];
        for i in 0..2 {
            if let Some(item) = assortment.options[i] {
                present[i] = true;
                margins[i] = item.fare - item.op_cost;
                scaled[i] = item.utility / mu;
            }
        }
        let others: Vec<f64> = nest.members().filter(|m| !OPTIONS.contains(m)).filter_map(|m| context.utilities[m.index()].map(|v| v / mu)).collect();
        let shift = others.iter().chain(scaled.iter()).copied().fold(f64::NEG_INFINITY, f64::max);
        let s0 = others.iter().map(|v| math::exp(v - shift)).sum();
        let log_a = scaled.map(|v| v - shift);
        let other_nests = Nest::ALL.into_iter().filter(|n| *n != nest).filter_map(|n| {
            let m = context.mu[n.index()];
            let iv = math::log_sum_exp(n.members().filter_map(|k| context.utilities[k.index()].map(|v| v / m)));
            (iv > f64::NEG_INFINITY).then_some(m * iv)
        });
        let log_other = math::log_sum_exp(other_nests.collect::<Vec<_>>());
        Self { margins, present, log_a, slope: context.beta_cost / mu, mu, s0, shift, log_other }
    }

    fn weight(&self, i: usize, delta: f64) -> f64 {
        if self.present[i] {
            math::exp(self.log_a[i] + self.slope * delta)
        } else {
            0.0
        }
    }

    /// Profit from precomputed option weights `e_i = exp(V_i(δ_i)/μ − shift)`.
    fn profit_from_weights(&self, e: [f64; 2], delta: [f64; 2]) -> f64 {
        let s = self.s0 + e[0] + e[1];
        let log_nest = self.mu * (math::ln(s) + self.shift);
        let p_nest = 1.0 / (1.0 + math::exp(self.log_other - log_nest));
        p_nest * (e[0] * (self.margins[0] + delta[0]) + e[1] * (self.margins[1] + delta[1])) / s
    }

    #[cfg(test)]
    fn profit(&self, delta: [f64; 2]) -> f64 {
        self.profit_from_weights([self.weight(0, delta[0]), self.weight(1, delta[1])], delta)
    }
}

/// Grid over `[lo, hi]` with the given step, always including `hi`.
fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = libm::floor((hi - lo) / step + 1e-9) as usize;
    let mut g: Vec<f64> = (0..=n).map(|k| lo + k as f64 * step).collect();
    if hi - g[n] > 1e-12 {
        g.push(hi);
    }
    g
}

fn best_on_grid(k: &Kernel, axes: &[Vec<f64>; 2]) -> ([f64; 2], f64) {
    let w: [Vec<f64>; 2] = [0, 1].map(|i| axes[i].iter().map(|&d| k.weight(i, d)).collect());
    let mut best = ([axes[0][0], axes[1][0]], f64::NEG_INFINITY);
    for (a, &d0) in axes[0].iter().enumerate() {
        for (b, &d1) in axes[1].iter().enumerate() {
            let f = k.profit_from_weights([w[0][a], w[1][b]], [d0, d1]);
            if f > best.1 {
                best = ([d0, d1], f);
            }
        }
    }
    best
}

/// Reference optimizer by grid search: an exhaustive 0.01 $ grid over the
/// feasible box, then a 0.0001 $ grid around the best point. Uncapped
/// options are first located on a coarse grid scaled by `1/|β_c|`.
pub fn brute_force_optimize(assortment: &Assortment, context: &ChoiceContext, config: &PricingConfig, w: f64) -> Result<PriceSolution> {
    check_inputs(assortment, context, config)?;
    if config.mode == PricingMode::None {
        return base_fares(assortment, context);
    }
    let p = problem(assortment, config, w);
    if p.assortment.is_empty() {
        return Ok(finish(&p, [0.0; 2], 0.0, SolverStatus::Grid, 0));
    }
    let k = Kernel::new(&p.assortment, context);
    let fixed = |i: usize, v: Vec<f64>| if p.assortment.options[i].is_some() { v } else { alloc::vec![0.0] };

    let mut lo = p.lo;
    let mut hi = p.hi;
    if hi.iter().any(|h| h.is_infinite()) {
        let inv = 1.0 / math::abs(context.beta_cost);
        let coarse = 0.05 * inv;
        for i in 0..2 {
            if hi[i].is_infinite() {
                hi[i] = lo[i] + 20.0 * inv + p.assortment.options[i].map_or(0.0, |o| o.op_cost);
            }
        }
        let axes = [0, 1].map(|i| fixed(i, grid(lo[i], hi[i], coarse)));
        let (x, _) = best_on_grid(&k, &axes);
        for i in 0..2 {
            lo[i] = (x[i] - coarse).max(p.lo[i]);
            hi[i] = (x[i] + coarse).min(p.hi[i]);
        }
    }
    let axes = [0, 1].map(|i| fixed(i, grid(lo[i], hi[i], 0.01)));
    let (x, _) = best_on_grid(&k, &axes);
    let axes = [0, 1].map(|i| fixed(i, grid((x[i] - 0.01).max(p.lo[i]), (x[i] + 0.01).min(p.hi[i]), 0.0001)));
    let (x, _) = best_on_grid(&k, &axes);
    let f = expected_profit(&x, &p.assortment, context)?;
    Ok(finish(&p, x, f, SolverStatus::Grid, 0))
}
