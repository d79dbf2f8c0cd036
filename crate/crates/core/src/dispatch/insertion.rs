//! Tour scheduling, the dispatch cost and cheapest insertion.

use alloc::format;
use alloc::vec::Vec;

use super::{DispatchConfig, Stop, StopKind, VehicleState};
use crate::error::{Error, Result};
use crate::network::Point;

/// Fills in `planned_time` for every stop, driving from `from` at `start`
/// without dwell times.
pub fn schedule(from: Point, start: f64, speed_kmh: f64, stops: &mut [Stop]) {
    let mut at = from;
    let mut t = start;
    for s in stops {
        t += 60.0 * at.distance(&s.location) / speed_kmh;
        s.planned_time = t;
        at = s.location;
    }
}

/// Kilometres driven along `stops` starting from `from`.
pub fn tour_km(from: Point, stops: &[Stop]) -> f64 {
    let mut at = from;
    let mut km = 0.0;
    for s in stops {
        km += at.distance(&s.location);
        at = s.location;
    }
    km
}

/// Checks precedence and the load profile of a tour for `vehicle`.
pub fn check_tour(vehicle: &VehicleState, stops: &[Stop]) -> Result<()> {
    let mut load = vehicle.onboard.len();
    let mut picked: Vec<usize> = Vec::new();
    for s in stops {
        match s.kind {
            StopKind::Pickup => {
                load += 1;
                if load > vehicle.capacity {
                    return Err(Error::InfeasibleTour(format!("load {load} exceeds capacity {}", vehicle.capacity)));
                }
                picked.push(s.request);
            }
            StopKind::Dropoff => {
                if !picked.contains(&s.request) && !vehicle.onboard.contains(&s.request) {
                    return Err(Error::InfeasibleTour(format!("request {} dropped off before pickup", s.request)));
                }
                load = load.checked_sub(1).ok_or_else(|| Error::InfeasibleTour("negative load".into()))?;
            }
        }
    }
    Ok(())
}

/// `γ T + (1 − γ)(β T² + Σ Y_n)` for already scheduled stops, where `T`
/// is the time to finish the tour and `Y_n` the journey time of each
/// passenger dropped off on it, measured from their request time.
pub fn scheduled_cost(now: f64, stops: &[Stop], config: &DispatchConfig) -> f64 {
    let Some(last) = stops.last() else { return 0.0 };
    let t = last.planned_time - now;
    let journeys: f64 = stops.iter().filter(|s| s.kind == StopKind::Dropoff).map(|s| s.planned_time - s.requested_at).sum();
    config.gamma * t + (1.0 - config.gamma) * (config.beta_delay * t * t + journeys)
}

/// Dispatch cost of driving `stops` from the vehicle's current state.
pub fn tour_cost(vehicle: &VehicleState, stops: &[Stop], config: &DispatchConfig) -> Result<f64> {
    check_tour(vehicle, stops)?;
    let mut s = stops.to_vec();
    schedule(vehicle.position, vehicle.clock, config.speed_kmh, &mut s);
    Ok(scheduled_cost(vehicle.clock, &s, config))
}

/// A request to be inserted into a tour.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewTrip {
    pub request: usize,
    pub pickup: Point,
    pub dropoff: Point,
    pub requested_at: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Insertion {
    /// Scheduled tour with the new stops in place.
    pub stops: Vec<Stop>,
    pub pickup_index: usize,
    pub dropoff_index: usize,
    pub marginal_cost: f64,
    pub added_km: f64,
    pub pickup_time: f64,
    pub dropoff_time: f64,
}

/// Cheapest insertion of `trip` into the vehicle's tour over every
/// order-preserving pickup/dropoff position pair. Ties go to the earliest
/// pickup position, then the earliest dropoff position. `None` when no
/// pair respects capacity.
pub fn insert_request(vehicle: &VehicleState, trip: &NewTrip, config: &DispatchConfig) -> Option<Insertion> {
    let base = &vehicle.tour;
    let n = base.len();
    let base_cost = scheduled_cost(vehicle.clock, base, config);
    let base_km = tour_km(vehicle.position, base);

    // Load just before position i of the base tour.
    let mut load_before = Vec::with_capacity(n + 1);
    let mut load = vehicle.onboard.len();
    load_before.push(load);
    for s in base {
        match s.kind {
            StopKind::Pickup => load += 1,
            StopKind::Dropoff => load -= 1,
        }
        load_before.push(load);
    }

    let pickup = Stop::new(StopKind::Pickup, trip.request, trip.pickup, trip.requested_at);
    let dropoff = Stop::new(StopKind::Dropoff, trip.request, trip.dropoff, trip.requested_at);
    let mut best: Option<Insertion> = None;
    let mut candidate = Vec::with_capacity(n + 2);
    for i in 0..=n {
        if load_before[i] + 1 > vehicle.capacity {
            continue;
        }
        for j in i..=n {
            // The new passenger rides over base stops i..j, which carry one
            // extra load.
            if j > i && load_before[j] + 1 > vehicle.capacity {
                break;
            }
            candidate.clear();
            candidate.extend_from_slice(&base[..i]);
            candidate.push(pickup);
            candidate.extend_from_slice(&base[i..j]);
            candidate.push(dropoff);
            candidate.extend_from_slice(&base[j..]);
            schedule(vehicle.position, vehicle.clock, config.speed_kmh, &mut candidate);
            let cost = scheduled_cost(vehicle.clock, &candidate, config) - base_cost;
            if best.as_ref().is_none_or(|b| cost < b.marginal_cost) {
                best = Some(Insertion {
                    stops: candidate.clone(),
                    pickup_index: i,
                    dropoff_index: j + 1,
                    marginal_cost: cost,
                    added_km: tour_km(vehicle.position, &candidate) - base_km,
                    pickup_time: candidate[i].planned_time,
                    dropoff_time: candidate[j + 1].planned_time,
                });
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispatch::VehicleStatus;
    use proptest::prelude::*;

    fn cfg() -> DispatchConfig {
        DispatchConfig::default()
    }

    fn vehicle_at(p: Point) -> VehicleState {
        VehicleState::new(0, p, 10, 0.0)
    }

    #[test]
    fn empty_tour_costs_nothing() {
        assert_eq!(tour_cost(&vehicle_at(Point::new(1.0, 1.0)), &[], &cfg()).unwrap(), 0.0);
    }

    #[test]
    fn single_trip_cost_example() {
        // 10 km at 25 km/h is 24 minutes.
        let v = vehicle_at(Point::new(0.0, 0.0));
        let stops = [Stop::new(StopKind::Pickup, 1, Point::new(0.0, 0.0), 0.0), Stop::new(StopKind::Dropoff, 1, Point::new(0.0, 10.0), 0.0)];
        let c = tour_cost(&v, &stops, &cfg()).unwrap();
        assert!((c - 26.88).abs() < 1e-9, "{c}");
        let pure = DispatchConfig { gamma: 1.0, ..cfg() };
        assert!((tour_cost(&v, &stops, &pure).unwrap() - 24.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_tours_are_rejected() {
        let v = vehicle_at(Point::new(0.0, 0.0));
        let backwards = [Stop::new(StopKind::Dropoff, 1, Point::new(0.0, 10.0), 0.0), Stop::new(StopKind::Pickup, 1, Point::new(0.0, 0.0), 0.0)];
        assert!(tour_cost(&v, &backwards, &cfg()).is_err());
        let mut small = VehicleState::new(0, Point::new(0.0, 0.0), 1, 0.0);
        small.status = VehicleStatus::Serving;
        let two = [
            Stop::new(StopKind::Pickup, 1, Point::new(0.0, 1.0), 0.0),
            Stop::new(StopKind::Pickup, 2, Point::new(0.0, 2.0), 0.0),
            Stop::new(StopKind::Dropoff, 1, Point::new(0.0, 3.0), 0.0),
            Stop::new(StopKind::Dropoff, 2, Point::new(0.0, 4.0), 0.0),
        ];
        assert!(tour_cost(&small, &two, &cfg()).is_err());
    }

    #[test]
    fn idle_vehicle_gets_direct_tour() {
        let v = vehicle_at(Point::new(2.0, 2.0));
        let trip = NewTrip { request: 7, pickup: Point::new(3.0, 2.0), dropoff: Point::new(3.0, 8.0), requested_at: 0.0 };
        let ins = insert_request(&v, &trip, &cfg()).unwrap();
        assert_eq!(ins.stops.len(), 2);
        assert_eq!((ins.pickup_index, ins.dropoff_index), (0, 1));
        assert!((ins.marginal_cost - tour_cost(&v, &ins.stops, &cfg()).unwrap()).abs() < 1e-12);
        assert!((ins.added_km - 7.0).abs() < 1e-12);
        assert!((ins.pickup_time - 2.4).abs() < 1e-12);
        assert!((ins.dropoff_time - 16.8).abs() < 1e-12);
    }

    #[test]
    fn full_vehicle_is_infeasible() {
        let mut v = VehicleState::new(0, Point::new(0.0, 0.0), 2, 0.0);
        v.onboard = alloc::vec![1, 2];
        v.tour = alloc::vec![Stop::new(StopKind::Dropoff, 1, Point::new(5.0, 0.0), 0.0), Stop::new(StopKind::Dropoff, 2, Point::new(6.0, 0.0), 0.0),];
        schedule(v.position, v.clock, 25.0, &mut v.tour);
        let trip = NewTrip { request: 3, pickup: Point::new(1.0, 0.0), dropoff: Point::new(2.0, 0.0), requested_at: 0.0 };
        let ins = insert_request(&v, &trip, &cfg()).unwrap();
        // Only after a dropoff is there room.
        assert!(ins.pickup_index >= 1);
        v.capacity = 2;
        v.tour.clear();
        v.onboard = alloc::vec![1, 2];
        assert!(insert_request(&v, &trip, &cfg()).is_none());
    }

    /// Exhaustive oracle: every way of placing the two new stops among the
    /// existing ones, enumerated by slot pairs in the extended sequence.
    pub(crate) fn exhaustive(vehicle: &VehicleState, trip: &NewTrip, config: &DispatchConfig) -> Option<(f64, Vec<Stop>)> {
        let n = vehicle.tour.len() + 2;
        let base_cost = tour_cost(vehicle, &vehicle.tour, config).unwrap();
        let mut best: Option<(f64, usize, usize, Vec<Stop>)> = None;
        for p in 0..n {
            for d in p + 1..n {
                let mut seq = Vec::new();
                let mut old = vehicle.tour.iter();
                for slot in 0..n {
                    if slot == p {
                        seq.push(Stop::new(StopKind::Pickup, trip.request, trip.pickup, trip.requested_at));
                    } else if slot == d {
                        seq.push(Stop::new(StopKind::Dropoff, trip.request, trip.dropoff, trip.requested_at));
                    } else {
                        seq.push(*old.next().unwrap());
                    }
                }
                let Ok(c) = tour_cost(vehicle, &seq, config) else { continue };
                let c = c - base_cost;
                if best.as_ref().is_none_or(|b| c < b.0) {
                    best = Some((c, p, d, seq));
                }
            }
        }
        best.map(|(c, _, _, mut s)| {
            schedule(vehicle.position, vehicle.clock, config.speed_kmh, &mut s);
            (c, s)
        })
    }

    pub(crate) fn arb_vehicle() -> impl Strategy<Value = (VehicleState, NewTrip)> {
        let pt = || (0.0f64..20.0, 0.0f64..20.0).prop_map(|(x, y)| Point::new(x, y));
        (pt(), 1usize..5, prop::collection::vec((pt(), pt(), any::<bool>()), 0..=4), pt(), pt(), 0.0f64..30.0).prop_map(|(pos, cap, reqs, o, d, now)| {
            let mut v = VehicleState::new(0, pos, cap, now);
            let mut tour = Vec::new();
            for (k, (a, b, onboard)) in reqs.into_iter().enumerate() {
                let t = now - 5.0 * k as f64;
                if onboard && v.onboard.len() < cap {
                    v.onboard.push(k);
                    tour.push(Stop::new(StopKind::Dropoff, k, b, t));
                } else {
                    tour.push(Stop::new(StopKind::Pickup, k, a, t));
                    tour.push(Stop::new(StopKind::Dropoff, k, b, t));
                }
            }
            // Keep the tour feasible by serving pending pickups in order.
            tour.sort_by_key(|s| (s.request, s.kind == StopKind::Dropoff));
            let mut feasible = Vec::new();
            let mut pending: Vec<Stop> = tour;
            let mut load = v.onboard.len();
            while !pending.is_empty() {
                let idx = pending
                    .iter()
                    .position(|s| match s.kind {
                        StopKind::Pickup => load < cap,
                        StopKind::Dropoff => v.onboard.contains(&s.request) || feasible.iter().any(|f: &Stop| f.request == s.request),
                    })
                    .unwrap();
                let s = pending.remove(idx);
                match s.kind {
                    StopKind::Pickup => load += 1,
                    StopKind::Dropoff => load -= 1,
                }
                feasible.push(s);
            }
            schedule(pos, now, 25.0, &mut feasible);
            v.tour = feasible;
            v.status = if v.tour.is_empty() { VehicleStatus::Idle } else { VehicleStatus::Serving };
            (v, NewTrip { request: 99, pickup: o, dropoff: d, requested_at: now })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn insertion_matches_exhaustive((v, trip) in arb_vehicle(), gamma in 0.0f64..=1.0, beta in 0.0f64..0.05) {
            let config = DispatchConfig { gamma, beta_delay: beta, ..cfg() };
            let got = insert_request(&v, &trip, &config);
            let want = exhaustive(&v, &trip, &config);
            match (got, want) {
                (None, None) => {}
                (Some(g), Some((c, s))) => {
                    prop_assert!((g.marginal_cost - c).abs() < 1e-9);
                    prop_assert_eq!(g.stops, s);
                }
                (g, w) => prop_assert!(false, "mismatch {:?} vs {:?}", g.is_some(), w.is_some()),
            }
        }

        #[test]
        fn pure_time_marginal_cost_is_non_negative((v, trip) in arb_vehicle()) {
            let config = DispatchConfig { gamma: 1.0, beta_delay: 0.0, ..cfg() };
            if let Some(ins) = insert_request(&v, &trip, &config) {
                prop_assert!(ins.marginal_cost >= -1e-9);
                prop_assert!(check_tour(&v, &ins.stops).is_ok());
                prop_assert!(ins.stops.windows(2).all(|w| w[0].planned_time <= w[1].planned_time));
            }
        }
    }
}
