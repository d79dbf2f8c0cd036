//! One simulated operating day.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{DayMetrics, DayOutput, ObservationRecord, PriceRecord, Scenario, TripRecord};
use crate::choice::{sample_choice, Mode, NlParams, Observation};
use crate::demand::{generate_day, outside_mode_attributes, sample_wtp, AltAttributes, Request};
use crate::dispatch::{generate_offer_r, generate_offer_rt, Event, Fleet, Offer, StopKind};
use crate::error::{Error, Result};
use crate::network::Network;
use crate::pricing::{self, Assortment, ChoiceContext, PricingMode, OPTIONS};
use crate::rng::{stream, Stream};

struct Pending {
    trip: usize,
    mode: Mode,
    /// Transit time plus walking after the ride leg, for `RT`.
    tail_min: f64,
}

/// Runs day `day` with the operator's current estimate `estimate` and
/// pricing mode `mode`.
pub fn run_day(scenario: &Scenario, network: &Network, day: u32, estimate: &NlParams, mode: PricingMode) -> Result<DayOutput> {
    let requests = day_requests(scenario, network, day)?;
    run_day_with_requests(scenario, network, day, estimate, mode, &requests)
}

/// The request stream of day `day`, with sampled willingness to pay.
pub fn day_requests(scenario: &Scenario, network: &Network, day: u32) -> Result<Vec<Request>> {
    let mut arrivals = stream(scenario.seed, day, Stream::Arrivals);
    let mut wtp_rng = stream(scenario.seed, day, Stream::Wtp);
    let mut requests = generate_day(&mut arrivals, scenario.lambda_per_hour, scenario.horizon, network.region_size())?;
    for r in &mut requests {
        r.wtp = sample_wtp(&mut wtp_rng, r, &scenario.wtp);
    }
    Ok(requests)
}

/// Checks that `requests` can be replayed: unique ids, sorted pickup times
/// inside the horizon, endpoints inside the region and distinct.
pub fn check_requests(scenario: &Scenario, network: &Network, requests: &[Request]) -> Result<()> {
    let mut ids: Vec<usize> = requests.iter().map(|r| r.id).collect();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidConfig("duplicate request id".into()));
    }
    let h = scenario.horizon;
    let mut last = f64::NEG_INFINITY;
    for r in requests {
        if !(r.desired_pickup >= h.start && r.desired_pickup < h.end) {
            return Err(Error::InvalidConfig(format!("request {} at {} lies outside the horizon", r.id, r.desired_pickup)));
        }
        if r.desired_pickup < last {
            return Err(Error::InvalidConfig(format!("request {} is out of time order", r.id)));
        }
        last = r.desired_pickup;
        for p in [&r.origin, &r.destination] {
            if !network.contains(p) {
                return Err(Error::OutOfRegion { x: p.x, y: p.y, size: network.region_size() });
            }
        }
        if r.origin == r.destination {
            return Err(Error::InvalidConfig(format!("request {} has identical origin and destination", r.id)));
        }
        if !r.wtp.is_finite() {
            return Err(Error::InvalidConfig(format!("request {} has a non-finite willingness to pay", r.id)));
        }
    }
    Ok(())
}

/// Runs day `day` on a given request stream.
pub fn run_day_with_requests(
    scenario: &Scenario,
    network: &Network,
    day: u32,
    estimate: &NlParams,
    mode: PricingMode,
    requests: &[Request],
) -> Result<DayOutput> {
    check_requests(scenario, network, requests)?;
    let mut choice_rng = stream(scenario.seed, day, Stream::Choice);
    let horizon = scenario.horizon;

    let pricing_config = scenario.pricing_config(mode);
    let mut fleet = Fleet::new(&network.depots, scenario.fleet_size, scenario.capacity, scenario.dispatch.speed_kmh, horizon.start)?;
    let epoch = scenario.dispatch.relocation_interval_min;
    let mut next_epoch = horizon.start + epoch;
    let mut zone_demand = vec![0usize; network.zones.len()];

    let mut metrics = DayMetrics::new(day, scenario.lambda_per_hour, mode, estimate.gap(&scenario.truth));
    let mut prices = Vec::new();
    let mut observations = Vec::with_capacity(requests.len());
    let mut trips: Vec<TripRecord> = Vec::new();
    let mut events = Vec::new();
    let mut pending: BTreeMap<usize, Pending> = BTreeMap::new();

    for request in requests {
        while next_epoch <= request.desired_pickup {
            let evs = fleet.advance(next_epoch)?;
            absorb(evs, &pending, &mut trips, &mut events, scenario.record_events);
            fleet.relocate_idle(network, &zone_demand)?;
            zone_demand.iter_mut().for_each(|c| *c = 0);
            next_epoch += epoch;
        }
        let evs = fleet.advance(request.desired_pickup)?;
        absorb(evs, &pending, &mut trips, &mut events, scenario.record_events);
        zone_demand[network.zone_of(&request.origin)?] += 1;

        let mut attrs = outside_mode_attributes(request, network, &scenario.modes, &scenario.fares)?;
        let offers: [Option<Offer>; 2] = [
            generate_offer_r(request, &fleet, &scenario.fares, &scenario.dispatch)?,
            generate_offer_rt(request, &fleet, network, &scenario.fares, &scenario.dispatch, scenario.modes.walk_kmh)?,
        ];
        for (i, m) in OPTIONS.into_iter().enumerate() {
            if let Some(o) = &offers[i] {
                attrs.set(m, AltAttributes::new(o.ovtt, o.ivtt, o.fare));
            }
        }

        let w = scenario.wtp.reference_cost(request);
        let op_cost = [0, 1].map(|i| offers[i].as_ref().map_or(0.0, |o| o.op_cost));
        let assortment = Assortment::from_attributes(estimate, &attrs, op_cost);
        let mut solution = None;
        if !assortment.is_empty() {
            let context = ChoiceContext::new(estimate, &attrs);
            solution = Some(match pricing::optimize(&assortment, &context, &pricing_config, w) {
                Ok(s) => s,
                Err(_) => {
                    metrics.pricing_fallbacks += 1;
                    pricing::base_fares(&assortment, &context)?
                }
            });
        }

        // What the customer sees: withdrawn options vanish, prices adjust.
        if let Some(sol) = &solution {
            for (i, m) in OPTIONS.into_iter().enumerate() {
                if offers[i].is_none() {
                    continue;
                }
                if sol.offered[i] {
                    let mut a = *attrs.get(m);
                    a.cost = sol.price[i];
                    attrs.set(m, a);
                } else {
                    attrs.set(m, AltAttributes::UNAVAILABLE);
                }
            }
        }

        let probabilities = scenario.truth.probabilities(&attrs)?;
        let chosen = sample_choice(&mut choice_rng, &probabilities)?;
        metrics.mode_counts[chosen.index()] += 1;
        observations.push(ObservationRecord { day, request: request.id, observation: Observation::new(attrs, chosen)? });

        if let Some(sol) = &solution {
            for (i, m) in OPTIONS.into_iter().enumerate() {
                let Some(offer) = &offers[i] else { continue };
                if !sol.offered[i] {
                    continue;
                }
                prices.push(PriceRecord {
                    day,
                    request: request.id,
                    option: m,
                    fare: offer.fare,
                    op_cost: offer.op_cost,
                    delta: sol.delta[i],
                    price: sol.price[i],
                    cap: sol.cap[i],
                    wtp: request.wtp,
                    chosen: chosen == m,
                });
                metrics.offers[i] += 1;
            }
        }

        if let Some(k) = OPTIONS.iter().position(|&m| m == chosen) {
            let offer = offers[k].as_ref().expect("chosen options were offered");
            let price = solution.as_ref().map_or(offer.fare, |s| s.price[k]);
            fleet.commit(offer.vehicle, offer.stops.clone())?;
            let tail_min = offer.transfer.map_or(0.0, |t| t.route.total_time() + t.egress_min);
            pending.insert(request.id, Pending { trip: trips.len(), mode: chosen, tail_min });
            trips.push(TripRecord {
                request: request.id,
                mode: chosen,
                vehicle: offer.vehicle,
                requested_at: request.desired_pickup,
                quoted_ovtt: offer.ovtt,
                quoted_ivtt: offer.ivtt,
                price,
                op_cost: offer.op_cost,
                wtp: request.wtp,
                pickup_time: None,
                dropoff_time: None,
                arrival_time: None,
            });
            metrics.revenue += price;
            metrics.operating_cost += offer.op_cost;
            if price > request.wtp {
                metrics.price_above_wtp += 1;
            }
        }
    }

    let (evs, _) = fleet.finish_day()?;
    absorb(evs, &pending, &mut trips, &mut events, scenario.record_events);

    metrics.finish(&trips, &prices, requests.len(), fleet.total_travel_min(), scenario.fleet_size);
    Ok(DayOutput { metrics, prices, observations, trips, events })
}

fn absorb(evs: Vec<Event>, pending: &BTreeMap<usize, Pending>, trips: &mut [TripRecord], events: &mut Vec<Event>, record: bool) {
    for e in &evs {
        let Some(p) = pending.get(&e.request) else { continue };
        let t = &mut trips[p.trip];
        debug_assert_eq!(t.mode, p.mode);
        match e.kind {
            StopKind::Pickup => t.pickup_time = Some(e.time),
            StopKind::Dropoff => {
                t.dropoff_time = Some(e.time);
                t.arrival_time = Some(e.time + p.tail_min);
            }
        }
    }
    if record {
        events.extend(evs);
    }
}
