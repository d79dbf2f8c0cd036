//! Day-to-day simulation: serve a day of requests, re-estimate the choice
//! model on everything observed so far, repeat.
//!
//! Customers always decide with the true parameters; the operator prices
//! and learns with its estimate. Day 1 runs at base fares with the initial
//! guess. All random draws come from per-day streams, so experiments that
//! differ only in pricing mode or σ see the same requests.

mod day;

pub use day::{check_requests, day_requests, run_day, run_day_with_requests};

use alloc::vec::Vec;

use crate::choice::{estimate, EstimationConfig, EstimationStatus, Mode, NlParams, Observation};
use crate::demand::{FareSchedule, Horizon, ModeSettings, Request, WtpModel};
use crate::dispatch::{DispatchConfig, Event};
use crate::error::{Error, Result};
use crate::math;
use crate::network::{Network, NetworkConfig};
use crate::pricing::{PricingConfig, PricingMode};

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub network: NetworkConfig,
    pub lambda_per_hour: f64,
    pub days: u32,
    pub fleet_size: usize,
    pub capacity: usize,
    pub horizon: Horizon,
    pub dispatch: DispatchConfig,
    /// Pricing from day 2 on. The WTP spread `s` is taken from `wtp`.
    pub pricing: PricingConfig,
    pub fares: FareSchedule,
    pub wtp: WtpModel,
    pub modes: ModeSettings,
    pub truth: NlParams,
    pub initial: NlParams,
    pub estimation: EstimationConfig,
    pub seed: u64,
    /// Keep every pickup and dropoff event in the report.
    pub record_events: bool,
}

impl Default for Scenario {
    fn default() -> Self {
        let modes = ModeSettings::default();
        Self {
            network: NetworkConfig::default(),
            lambda_per_hour: 400.0,
            days: 20,
            fleet_size: 40,
            capacity: 10,
            horizon: Horizon::default(),
            dispatch: DispatchConfig::default(),
            pricing: PricingConfig::default(),
            fares: FareSchedule::default(),
            wtp: WtpModel { car_cost_per_km: modes.car_cost_per_km, sigma: 0.0 },
            modes,
            truth: NlParams::reference_truth(),
            initial: NlParams::reference_initial_guess(),
            estimation: EstimationConfig::default(),
            seed: 1,
            record_events: false,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        if !(self.lambda_per_hour > 0.0) || !self.lambda_per_hour.is_finite() {
            return Err(Error::InvalidConfig(alloc::format!("lambda must be positive, got {}", self.lambda_per_hour)));
        }
        if self.days == 0 {
            return Err(Error::InvalidConfig("days must be >= 1".into()));
        }
        if self.capacity == 0 {
            return Err(Error::InvalidConfig("vehicle capacity must be >= 1".into()));
        }
        if !(self.horizon.start <= self.horizon.end) {
            return Err(Error::InvalidConfig("horizon start is after its end".into()));
        }
        self.dispatch.validate()?;
        self.pricing_config(self.pricing.mode).validate()?;
        self.fares.validate()?;
        self.wtp.validate()?;
        self.modes.validate()?;
        self.truth.validate()?;
        self.initial.validate()?;
        if self.estimation.starts == 0 || self.estimation.max_iterations == 0 {
            return Err(Error::InvalidConfig("estimation needs at least one start and iteration".into()));
        }
        Ok(())
    }

    /// Pricing settings for a day run in `mode`.
    pub fn pricing_config(&self, mode: PricingMode) -> PricingConfig {
        PricingConfig { mode, s: self.wtp.s(), ..self.pricing }
    }
}

/// One offered, priced option.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceRecord {
    pub day: u32,
    pub request: usize,
    pub option: Mode,
    pub fare: f64,
    pub op_cost: f64,
    pub delta: f64,
    pub price: f64,
    pub cap: f64,
    pub wtp: f64,
    pub chosen: bool,
}

/// A customer who rode with the operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripRecord {
    pub request: usize,
    pub mode: Mode,
    pub vehicle: usize,
    pub requested_at: f64,
    pub quoted_ovtt: f64,
    pub quoted_ivtt: f64,
    pub price: f64,
    pub op_cost: f64,
    pub wtp: f64,
    pub pickup_time: Option<f64>,
    /// End of the ride leg.
    pub dropoff_time: Option<f64>,
    /// Arrival at the destination, including transit and egress for `RT`.
    pub arrival_time: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationRecord {
    pub day: u32,
    pub request: usize,
    pub observation: Observation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DayMetrics {
    pub day: u32,
    pub lambda: f64,
    pub pricing: PricingMode,
    pub n_requests: usize,
    pub mode_counts: [usize; Mode::COUNT],
    /// Shares over all arrivals.
    pub mode_share: [f64; Mode::COUNT],
    pub revenue: f64,
    pub operating_cost: f64,
    pub profit: f64,
    /// Mean wait until pickup of operator customers, minutes.
    pub wait_min: f64,
    /// Mean door-to-door journey time of operator customers, minutes.
    pub journey_min: f64,
    /// Total vehicle moving time over fleet size, minutes.
    pub vtl_min: f64,
    /// Gap of the parameters the operator used this day.
    pub gap: f64,
    pub offers: [usize; 2],
    /// Mean offered price per option.
    pub mean_offered_price: [f64; 2],
    /// Mean price paid by operator customers.
    pub mean_paid_price: f64,
    pub price_above_wtp: usize,
    pub pricing_fallbacks: usize,
    /// Outcome of the fit made after this day.
    pub estimation: Option<EstimationStatus>,
}

impl DayMetrics {
    fn new(day: u32, lambda: f64, pricing: PricingMode, gap: f64) -> Self {
        Self {
            day,
            lambda,
            pricing,
            n_requests: 0,
            mode_counts: [0; Mode::COUNT],
            mode_share: [0.0; Mode::COUNT],
            revenue: 0.0,
            operating_cost: 0.0,
            profit: 0.0,
            wait_min: 0.0,
            journey_min: 0.0,
            vtl_min: 0.0,
            gap,
            offers: [0; 2],
            mean_offered_price: [0.0; 2],
            mean_paid_price: 0.0,
            price_above_wtp: 0,
            pricing_fallbacks: 0,
            estimation: None,
        }
    }

    fn finish(&mut self, trips: &[TripRecord], prices: &[PriceRecord], n_requests: usize, travel_min: f64, fleet: usize) {
        self.n_requests = n_requests;
        if n_requests > 0 {
            for m in Mode::ALL {
                self.mode_share[m.index()] = self.mode_counts[m.index()] as f64 / n_requests as f64;
            }
        }
        self.profit = self.revenue - self.operating_cost;
        self.wait_min = mean(trips.iter().filter_map(|t| t.pickup_time.map(|p| p - t.requested_at)));
        self.journey_min = mean(trips.iter().filter_map(|t| t.arrival_time.map(|a| a - t.requested_at)));
        self.vtl_min = if fleet > 0 { travel_min / fleet as f64 } else { 0.0 };
        for (i, m) in crate::pricing::OPTIONS.into_iter().enumerate() {
            self.mean_offered_price[i] = mean(prices.iter().filter(|p| p.option == m).map(|p| p.price));
        }
        self.mean_paid_price = mean(trips.iter().map(|t| t.price));
    }

    /// Combined share of both operator options.
    pub fn operator_share(&self) -> f64 {
        self.mode_share[Mode::Rideshare.index()] + self.mode_share[Mode::RideshareTransit.index()]
    }
}

/// Everything produced by one day.
#[derive(Debug, Clone, PartialEq)]
pub struct DayOutput {
    pub metrics: DayMetrics,
    pub prices: Vec<PriceRecord>,
    pub observations: Vec<ObservationRecord>,
    pub trips: Vec<TripRecord>,
    /// Empty unless the scenario records events.
    pub events: Vec<Event>,
}

/// Mean of an iterator; zero when empty.
pub fn mean<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let (n, sum) = values.into_iter().fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Sample standard deviation; zero for fewer than two values.
pub fn std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values.iter().copied());
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    math::sqrt(ss / (values.len() - 1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        Self { mean: mean(values.iter().copied()), std: std_dev(values) }
    }
}

/// Across-day means and standard deviations.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Summary {
    pub profit: Stat,
    pub wait_min: Stat,
    pub journey_min: Stat,
    pub vtl_min: Stat,
    pub gap: Stat,
    pub mode_share: [Stat; Mode::COUNT],
    pub mean_paid_price: Stat,
}

impl Summary {
    pub fn of(days: &[DayMetrics]) -> Self {
        let col = |f: &dyn Fn(&DayMetrics) -> f64| Stat::of(&days.iter().map(f).collect::<Vec<_>>());
        Self {
            profit: col(&|d| d.profit),
            wait_min: col(&|d| d.wait_min),
            journey_min: col(&|d| d.journey_min),
            vtl_min: col(&|d| d.vtl_min),
            gap: col(&|d| d.gap),
            mode_share: Mode::ALL.map(|m| col(&|d| d.mode_share[m.index()])),
            mean_paid_price: col(&|d| d.mean_paid_price),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub scenario: Scenario,
    pub days: Vec<DayMetrics>,
    pub summary: Summary,
    /// Gap of the estimate in use on each day, followed by the gap of the
    /// final estimate.
    pub gap_series: Vec<f64>,
    pub final_estimate: NlParams,
    pub prices: Vec<PriceRecord>,
    pub trips: Vec<(u32, TripRecord)>,
    pub observations: Vec<ObservationRecord>,
    pub events: Vec<(u32, Event)>,
    /// Days whose fit failed; the previous estimate was kept.
    pub estimation_failures: Vec<u32>,
}

/// An experiment that can be advanced one day at a time.
pub struct Experiment {
    scenario: Scenario,
    network: Network,
    estimate: NlParams,
    history: Vec<Observation>,
    report: ExperimentReport,
}

impl Experiment {
    pub fn new(scenario: Scenario) -> Result<Self> {
        scenario.validate()?;
        let network = Network::build(&scenario.network)?;
        let report = ExperimentReport {
            scenario: scenario.clone(),
            days: Vec::new(),
            summary: Summary::default(),
            gap_series: Vec::new(),
            final_estimate: scenario.initial,
            prices: Vec::new(),
            trips: Vec::new(),
            observations: Vec::new(),
            events: Vec::new(),
            estimation_failures: Vec::new(),
        };
        Ok(Self { estimate: scenario.initial, scenario, network, history: Vec::new(), report })
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn days_done(&self) -> u32 {
        self.report.days.len() as u32
    }

    pub fn is_finished(&self) -> bool {
        self.days_done() >= self.scenario.days
    }

    pub fn estimate(&self) -> &NlParams {
        &self.estimate
    }

    /// Runs the next day and refits the choice model. Returns `None` once
    /// every day has run.
    pub fn step(&mut self) -> Result<Option<&DayMetrics>> {
        self.step_with(None)
    }

    /// Like [`Experiment::step`], but the day's customers are `requests`
    /// instead of a generated stream.
    pub fn step_with(&mut self, requests: Option<&[Request]>) -> Result<Option<&DayMetrics>> {
        if self.is_finished() {
            return Ok(None);
        }
        let day = self.days_done() + 1;
        let mode = if day == 1 { PricingMode::None } else { self.scenario.pricing.mode };
        let out = match requests {
            Some(r) => run_day_with_requests(&self.scenario, &self.network, day, &self.estimate, mode, r)?,
            None => run_day(&self.scenario, &self.network, day, &self.estimate, mode)?,
        };
        let mut metrics = out.metrics;
        self.history.extend(out.observations.iter().map(|o| o.observation));

        let start = if day == 1 { self.scenario.initial } else { self.estimate };
        match estimate(&self.history, &start, &self.scenario.estimation) {
            Ok(fit) => {
                metrics.estimation = Some(fit.status);
                if fit.status != EstimationStatus::NotIdentified {
                    self.estimate = fit.params;
                }
            }
            Err(_) => self.report.estimation_failures.push(day),
        }

        let r = &mut self.report;
        r.gap_series.push(metrics.gap);
        r.prices.extend(out.prices);
        r.trips.extend(out.trips.into_iter().map(|t| (day, t)));
        r.observations.extend(out.observations);
        r.events.extend(out.events.into_iter().map(|e| (day, e)));
        r.days.push(metrics);
        Ok(r.days.last())
    }

    pub fn finish(mut self) -> Result<ExperimentReport> {
        while self.step()?.is_some() {}
        let r = &mut self.report;
        r.summary = Summary::of(&r.days);
        r.final_estimate = self.estimate;
        r.gap_series.push(self.estimate.gap(&self.scenario.truth));
        Ok(self.report)
    }
}

pub fn run_experiment(scenario: &Scenario) -> Result<ExperimentReport> {
    Experiment::new(scenario.clone())?.finish()
}

/// Runs an experiment on recorded customers: `days[d - 1]` are the
/// requests of day `d`. Runs as many days as given, ignoring
/// `scenario.days`.
pub fn replay_experiment(scenario: &Scenario, days: &[Vec<Request>]) -> Result<ExperimentReport> {
    let mut e = Experiment::new(Scenario { days: days.len() as u32, ..scenario.clone() })?;
    for requests in days {
        e.step_with(Some(requests))?;
    }
    e.finish()
}

/// Reports for the same scenario under several pricing modes, on identical
/// request streams.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub reports: Vec<(PricingMode, ExperimentReport)>,
}

impl Comparison {
    pub fn get(&self, mode: PricingMode) -> Option<&ExperimentReport> {
        self.reports.iter().find(|(m, _)| *m == mode).map(|(_, r)| r)
    }

    /// Relative change of `metric` (mean over days) from `base` to `other`,
    /// in percent.
    pub fn delta_percent(&self, base: PricingMode, other: PricingMode, metric: impl Fn(&Summary) -> f64) -> Option<f64> {
        let b = metric(&self.get(base)?.summary);
        let o = metric(&self.get(other)?.summary);
        (b != 0.0).then(|| 100.0 * (o - b) / b)
    }
}

pub fn compare_modes(scenario: &Scenario, modes: &[PricingMode]) -> Result<Comparison> {
    let mut reports = Vec::with_capacity(modes.len());
    for &mode in modes {
        let mut s = scenario.clone();
        s.pricing.mode = mode;
        reports.push((mode, run_experiment(&s)?));
    }
    Ok(Comparison { reports })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispatch::StopKind;

    fn small(seed: u64) -> Scenario {
        Scenario { lambda_per_hour: 60.0, days: 3, fleet_size: 8, seed, record_events: true, ..Default::default() }
    }

    #[test]
    fn reference_defaults() {
        let s = Scenario::default();
        assert_eq!((s.fleet_size, s.capacity, s.days), (40, 10, 20));
        assert_eq!(s.pricing.alpha, 0.05);
        assert!((s.initial.gap(&s.truth) - 2.271).abs() < 1e-12);
        s.validate().unwrap();
    }

    #[test]
    fn days_are_deterministic() {
        let s = small(3);
        let net = Network::build(&s.network).unwrap();
        let a = run_day(&s, &net, 1, &s.initial, PricingMode::None).unwrap();
        let b = run_day(&s, &net, 1, &s.initial, PricingMode::None).unwrap();
        assert_eq!(a, b);
        assert_eq!(run_experiment(&s).unwrap(), run_experiment(&s).unwrap());
    }

    #[test]
    fn empty_fleet_serves_nobody() {
        let s = Scenario { fleet_size: 0, ..small(4) };
        let net = Network::build(&s.network).unwrap();
        let out = run_day(&s, &net, 1, &s.truth, PricingMode::Constrained).unwrap();
        assert_eq!(out.metrics.profit, 0.0);
        assert_eq!(out.metrics.operator_share(), 0.0);
        assert_eq!(out.metrics.vtl_min, 0.0);
        assert!(out.metrics.n_requests > 0);
    }

    #[test]
    fn single_day_is_the_warm_up() {
        let s = Scenario { days: 1, ..small(5) };
        let r = run_experiment(&s).unwrap();
        assert_eq!(r.days.len(), 1);
        assert_eq!(r.days[0].pricing, PricingMode::None);
        assert!((r.days[0].gap - 2.271).abs() < 1e-12);
        assert_eq!(r.gap_series.len(), 2);
        assert!(r.prices.iter().all(|p| p.delta == 0.0));
    }

    #[test]
    fn day_invariants() {
        let s = small(6);
        let r = run_experiment(&s).unwrap();
        for d in &r.days {
            let total: f64 = d.mode_share.iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
            let paid: f64 = r.trips.iter().filter(|(day, _)| *day == d.day).map(|(_, t)| t.price - t.op_cost).sum();
            let logged: f64 = r.prices.iter().filter(|p| p.day == d.day && p.chosen).map(|p| p.fare + p.delta - p.op_cost).sum();
            assert!((d.profit - paid).abs() < 1e-9);
            assert!((d.profit - logged).abs() < 1e-9);
            assert!(d.wait_min >= 0.0 && d.journey_min >= d.wait_min && d.vtl_min >= 0.0);
        }
        for (_, t) in &r.trips {
            let (p, a) = (t.pickup_time.unwrap(), t.arrival_time.unwrap());
            assert!(p >= t.requested_at && a >= p);
        }
        let mut picked = alloc::collections::BTreeSet::new();
        for (day, e) in &r.events {
            assert!(e.load <= s.capacity);
            match e.kind {
                StopKind::Pickup => assert!(picked.insert((*day, e.request))),
                StopKind::Dropoff => assert!(picked.contains(&(*day, e.request))),
            }
        }
        assert_eq!(picked.len(), r.trips.len());
    }

    #[test]
    fn pricing_mode_does_not_change_requests() {
        let s = small(7);
        let cmp = compare_modes(&s, &PricingMode::ALL).unwrap();
        let counts: Vec<Vec<usize>> = cmp.reports.iter().map(|(_, r)| r.days.iter().map(|d| d.n_requests).collect()).collect();
        assert!(counts.windows(2).all(|w| w[0] == w[1]));
        let same = compare_modes(&s, &[PricingMode::None, PricingMode::None]).unwrap();
        assert_eq!(same.reports[0].1, same.reports[1].1);
        let d = same.delta_percent(PricingMode::None, PricingMode::None, |s| s.profit.mean).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn invalid_scenarios_are_rejected() {
        assert!(Scenario { days: 0, ..Default::default() }.validate().is_err());
        assert!(Scenario { lambda_per_hour: -1.0, ..Default::default() }.validate().is_err());
        assert!(Experiment::new(Scenario { capacity: 0, ..Default::default() }).is_err());
    }

    #[test]
    fn stepping_matches_batch_run() {
        let s = small(8);
        let mut e = Experiment::new(s.clone()).unwrap();
        let mut n = 0;
        while e.step().unwrap().is_some() {
            n += 1;
        }
        assert_eq!(n, 3);
        assert_eq!(e.finish().unwrap(), run_experiment(&s).unwrap());
    }

    #[test]
    fn replaying_generated_requests_reproduces_the_run() {
        let s = small(11);
        let net = Network::build(&s.network).unwrap();
        let days: Vec<Vec<Request>> = (1..=s.days).map(|d| day_requests(&s, &net, d).unwrap()).collect();
        assert_eq!(replay_experiment(&s, &days).unwrap(), run_experiment(&s).unwrap());
    }

    #[test]
    fn bad_replay_requests_are_rejected() {
        let s = small(12);
        let net = Network::build(&s.network).unwrap();
        let good = day_requests(&s, &net, 1).unwrap();
        assert!(good.len() > 2);
        let mut dup = good.clone();
        dup[1].id = dup[0].id;
        assert!(check_requests(&s, &net, &dup).is_err());
        let mut late = good.clone();
        late[0].desired_pickup = s.horizon.end;
        assert!(check_requests(&s, &net, &late).is_err());
        let mut outside = good.clone();
        outside[0].origin = crate::network::Point::new(-1.0, 3.0);
        assert!(check_requests(&s, &net, &outside).is_err());
        let mut unordered = good;
        unordered.swap(0, 1);
        assert!(run_day_with_requests(&s, &net, 1, &s.truth, PricingMode::None, &unordered).is_err());
    }

    #[test]
    fn summary_stats() {
        assert_eq!(mean(Vec::<f64>::new()), 0.0);
        let s = Stat::of(&[1.0, 2.0, 3.0, 4.0]);
        assert!((s.mean - 2.5).abs() < 1e-15);
        assert!((s.std - 1.2909944487358056).abs() < 1e-12);
    }
}
