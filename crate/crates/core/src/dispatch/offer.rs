//! Quotes for the door-to-door (`R`) and ride-to-transit (`RT`) services.

use alloc::vec::Vec;

use super::{insert_request, DispatchConfig, Fleet, Insertion, NewTrip, Stop};
use crate::demand::{FareSchedule, Request};
use crate::error::Result;
use crate::network::{Network, Point, RouteSummary};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OfferKind {
    R,
    Rt,
}

/// The transit part of an `RT` quote.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferPlan {
    pub entry: usize,
    pub exit: usize,
    pub entry_location: Point,
    pub route: RouteSummary,
    pub egress_min: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Offer {
    pub kind: OfferKind,
    /// Base fare before any price adjustment.
    pub fare: f64,
    pub op_cost: f64,
    pub ovtt: f64,
    pub ivtt: f64,
    pub vehicle: usize,
    /// The vehicle's tour if the offer is accepted.
    pub stops: Vec<Stop>,
    pub marginal_cost: f64,
    pub added_km: f64,
    pub pickup_time: f64,
    /// Drop-off of the ride leg: the destination for `R`, the entry
    /// station for `RT`.
    pub dropoff_time: f64,
    pub transfer: Option<TransferPlan>,
    /// Station pairs examined; zero for `R`.
    pub pairs_evaluated: usize,
}

impl Offer {
    /// Quoted door-to-door time.
    pub fn door_to_door(&self) -> f64 {
        self.ovtt + self.ivtt
    }
}

/// Cheapest insertion over the vehicles within the service radius of
/// `pickup`; ties go to the lower vehicle id.
fn best_vehicle(fleet: &Fleet, trip: &NewTrip, config: &DispatchConfig) -> Option<(usize, Insertion)> {
    let mut best: Option<(usize, Insertion)> = None;
    for v in &fleet.vehicles {
        if v.position.distance(&trip.pickup) > config.service_radius_km {
            continue;
        }
        let Some(ins) = insert_request(v, trip, config) else { continue };
        if best.as_ref().is_none_or(|(_, b)| ins.marginal_cost < b.marginal_cost) {
            best = Some((v.id, ins));
        }
    }
    best
}

/// Door-to-door quote, or `None` if no vehicle in range can take it.
pub fn generate_offer_r(request: &Request, fleet: &Fleet, fares: &FareSchedule, config: &DispatchConfig) -> Result<Option<Offer>> {
    let trip = NewTrip { request: request.id, pickup: request.origin, dropoff: request.destination, requested_at: request.desired_pickup };
    let Some((vehicle, ins)) = best_vehicle(fleet, &trip, config) else { return Ok(None) };
    Ok(Some(Offer {
        kind: OfferKind::R,
        fare: fares.rideshare_fare(request.trip_km())?,
        op_cost: fares.avg_op_cost_per_km * ins.added_km,
        ovtt: ins.pickup_time - fleet.now,
        ivtt: ins.dropoff_time - ins.pickup_time,
        vehicle,
        stops: ins.stops,
        marginal_cost: ins.marginal_cost,
        added_km: ins.added_km,
        pickup_time: ins.pickup_time,
        dropoff_time: ins.dropoff_time,
        transfer: None,
        pairs_evaluated: 0,
    }))
}

/// Ride to one of the `k` stations nearest the origin, transit to one of
/// the `k` stations nearest the destination, then walk. The pair with the
/// shortest door-to-door time wins; ties keep the earlier pair.
pub fn generate_offer_rt(
    request: &Request,
    fleet: &Fleet,
    network: &Network,
    fares: &FareSchedule,
    config: &DispatchConfig,
    walk_kmh: f64,
) -> Result<Option<Offer>> {
    let k = config.station_candidates;
    let entries = network.nearest_stations(&request.origin, k);
    let exits = network.nearest_stations(&request.destination, k);
    let mut pairs = 0;
    let mut best: Option<(f64, usize, Insertion, TransferPlan)> = None;
    for &entry in &entries {
        let entry_location = network.station(entry)?.location;
        let trip = NewTrip { request: request.id, pickup: request.origin, dropoff: entry_location, requested_at: request.desired_pickup };
        let leg = best_vehicle(fleet, &trip, config);
        for &exit in &exits {
            pairs += 1;
            if exit == entry {
                continue;
            }
            let Some((vehicle, ins)) = &leg else { continue };
            let Some(route) = network.transit.route_summary(entry, exit)? else { continue };
            let exit_location = network.station(exit)?.location;
            let egress_min = 60.0 * exit_location.distance(&request.destination) / walk_kmh;
            let total = ins.dropoff_time - fleet.now + route.total_time() + egress_min;
            if best.as_ref().is_none_or(|b| total < b.0) {
                best = Some((total, *vehicle, ins.clone(), TransferPlan { entry, exit, entry_location, route, egress_min }));
            }
        }
    }
    let Some((_, vehicle, ins, plan)) = best else { return Ok(None) };
    Ok(Some(Offer {
        kind: OfferKind::Rt,
        fare: fares.rideshare_transit_fare(request.origin.distance(&plan.entry_location))?,
        op_cost: fares.avg_op_cost_per_km * ins.added_km,
        ovtt: ins.pickup_time - fleet.now + plan.route.wait_time + plan.egress_min,
        ivtt: ins.dropoff_time - ins.pickup_time + plan.route.in_vehicle_time,
        vehicle,
        stops: ins.stops,
        marginal_cost: ins.marginal_cost,
        added_km: ins.added_km,
        pickup_time: ins.pickup_time,
        dropoff_time: ins.dropoff_time,
        transfer: Some(plan),
        pairs_evaluated: pairs,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispatch::tour_cost;
    use crate::network::NetworkConfig;

    fn request(o: Point, d: Point, t: f64) -> Request {
        Request { id: 1, origin: o, destination: d, desired_pickup: t, wtp: 0.0 }
    }

    fn fares() -> FareSchedule {
        FareSchedule::with_markup(1.0, 0.5, 0.1)
    }

    #[test]
    fn single_idle_vehicle_gets_direct_tour() {
        let fleet = Fleet::new(&[Point::new(5.0, 5.0)], 1, 4, 25.0, 0.0).unwrap();
        let r = request(Point::new(5.0, 8.0), Point::new(5.0, 18.0), 0.0);
        let offer = generate_offer_r(&r, &fleet, &fares(), &DispatchConfig::default()).unwrap().unwrap();
        assert_eq!(offer.vehicle, 0);
        assert_eq!(offer.stops.len(), 2);
        assert!((offer.fare - 7.0).abs() < 1e-12);
        assert!((offer.added_km - 13.0).abs() < 1e-12);
        assert!((offer.op_cost - 6.5).abs() < 1e-12);
        assert!((offer.ovtt - 7.2).abs() < 1e-12);
        assert!((offer.ivtt - 24.0).abs() < 1e-12);
        let c = tour_cost(&fleet.vehicles[0], &offer.stops, &DispatchConfig::default()).unwrap();
        assert!((offer.marginal_cost - c).abs() < 1e-12);
    }

    #[test]
    fn closer_vehicle_wins() {
        let fleet = Fleet::new(&[Point::new(1.0, 5.0), Point::new(4.0, 5.0)], 2, 4, 25.0, 0.0).unwrap();
        let r = request(Point::new(5.0, 5.0), Point::new(9.0, 5.0), 0.0);
        let offer = generate_offer_r(&r, &fleet, &fares(), &DispatchConfig::default()).unwrap().unwrap();
        assert_eq!(offer.vehicle, 1);
        // Equidistant vehicles tie; the lower id wins.
        let fleet = Fleet::new(&[Point::new(3.0, 5.0), Point::new(7.0, 5.0)], 2, 4, 25.0, 0.0).unwrap();
        let r = request(Point::new(5.0, 5.0), Point::new(5.0, 9.0), 0.0);
        assert_eq!(generate_offer_r(&r, &fleet, &fares(), &DispatchConfig::default()).unwrap().unwrap().vehicle, 0);
    }

    #[test]
    fn no_vehicle_in_radius_means_no_offer() {
        let fleet = Fleet::new(&[Point::new(0.0, 0.0)], 1, 4, 25.0, 0.0).unwrap();
        let r = request(Point::new(10.0, 10.0), Point::new(12.0, 10.0), 0.0);
        assert!(generate_offer_r(&r, &fleet, &fares(), &DispatchConfig::default()).unwrap().is_none());
        let net = Network::build(&NetworkConfig::default()).unwrap();
        assert!(generate_offer_rt(&r, &fleet, &net, &fares(), &DispatchConfig::default(), 5.0).unwrap().is_none());
    }

    #[test]
    fn transfer_offer_searches_all_pairs() {
        let net = Network::build(&NetworkConfig::default()).unwrap();
        let fleet = Fleet::new(&net.depots, 16, 4, 25.0, 420.0).unwrap();
        let r = request(Point::new(3.0, 4.0), Point::new(16.0, 17.0), 420.0);
        let cfg = DispatchConfig::default();
        let offer = generate_offer_rt(&r, &fleet, &net, &fares(), &cfg, 5.0).unwrap().unwrap();
        assert_eq!(offer.pairs_evaluated, 16);
        let plan = offer.transfer.unwrap();
        assert_eq!(offer.stops.last().unwrap().location, plan.entry_location);
        let leg_km = r.origin.distance(&plan.entry_location);
        assert!((offer.fare - (1.0 + 0.6 * leg_km + 2.75)).abs() < 1e-12);
        assert!((offer.ovtt - (offer.pickup_time - 420.0 + plan.route.wait_time + plan.egress_min)).abs() < 1e-12);

        // Exhaustive check of the pair choice.
        let entries = net.nearest_stations(&r.origin, 4);
        let exits = net.nearest_stations(&r.destination, 4);
        let mut best = f64::INFINITY;
        for &e in &entries {
            let loc = net.transit.stations[e].location;
            let trip = NewTrip { request: 1, pickup: r.origin, dropoff: loc, requested_at: 420.0 };
            let leg = fleet
                .vehicles
                .iter()
                .filter(|v| v.position.distance(&r.origin) <= 5.0)
                .filter_map(|v| insert_request(v, &trip, &cfg))
                .min_by(|a, b| a.marginal_cost.total_cmp(&b.marginal_cost));
            let Some(leg) = leg else { continue };
            for &x in &exits {
                if x == e {
                    continue;
                }
                let Some(route) = net.transit.route_summary(e, x).unwrap() else { continue };
                let walk = 12.0 * net.transit.stations[x].location.distance(&r.destination);
                best = best.min(leg.dropoff_time - 420.0 + route.total_time() + walk);
            }
        }
        assert!((offer.door_to_door() - best).abs() < 1e-9);
    }

    #[test]
    fn single_candidate_pair() {
        let net = Network::build(&NetworkConfig::default()).unwrap();
        let fleet = Fleet::new(&net.depots, 16, 4, 25.0, 0.0).unwrap();
        let r = request(Point::new(10.5, 1.0), Point::new(10.5, 19.0), 0.0);
        let cfg = DispatchConfig { station_candidates: 1, ..Default::default() };
        let offer = generate_offer_rt(&r, &fleet, &net, &fares(), &cfg, 5.0).unwrap().unwrap();
        assert_eq!(offer.pairs_evaluated, 1);
        let plan = offer.transfer.unwrap();
        assert_eq!(plan.entry, net.nearest_stations(&r.origin, 1)[0]);
        assert_eq!(plan.exit, net.nearest_stations(&r.destination, 1)[0]);
    }
}
