//! Fleet state and operations: cheapest-insertion dispatch, quotes for the
//! two services, kinematic advance and idle-vehicle relocation.

mod insertion;
mod offer;

pub use insertion::{check_tour, insert_request, schedule, scheduled_cost, tour_cost, tour_km, Insertion, NewTrip};
pub use offer::{generate_offer_r, generate_offer_rt, Offer, OfferKind, TransferPlan};

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::network::{Network, Point};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispatchConfig {
    /// Weight of the system time in the dispatch cost.
    pub gamma: f64,
    /// Quadratic weight on tour duration, per minute.
    pub beta_delay: f64,
    pub service_radius_km: f64,
    pub relocation_interval_min: f64,
    pub speed_kmh: f64,
    /// Entry and exit stations searched for the transfer service.
    pub station_candidates: usize,
}

impl Default for DispatchConfig {
    fn default() -> Self {
        Self { gamma: 0.5, beta_delay: 0.01, service_radius_km: 5.0, relocation_interval_min: 15.0, speed_kmh: 25.0, station_candidates: 4 }
    }
}

impl DispatchConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(self.beta_delay >= 0.0) {
            return bad("beta_delay must be >= 0");
        }
        if !(self.service_radius_km > 0.0) || !(self.relocation_interval_min > 0.0) {
            return bad("service radius and relocation interval must be positive");
        }
        if !(self.speed_kmh > 0.0) {
            return Err(Error::NonPositiveSpeed(self.speed_kmh));
        }
        if self.station_candidates == 0 {
            return bad("station_candidates must be >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StopKind {
    Pickup,
    Dropoff,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stop {
    pub kind: StopKind,
    pub request: usize,
    pub location: Point,
    pub requested_at: f64,
    pub planned_time: f64,
}

impl Stop {
    pub fn new(kind: StopKind, request: usize, location: Point, requested_at: f64) -> Self {
        Self { kind, request, location, requested_at, planned_time: requested_at }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VehicleStatus {
    Idle,
    Serving,
    Relocating { target: Point, zone: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleState {
    pub id: usize,
    pub position: Point,
    /// Time at which `position` is valid.
    pub clock: f64,
    /// Remaining stops with planned times.
    pub tour: Vec<Stop>,
    /// Requests currently on board.
    pub onboard: Vec<usize>,
    pub capacity: usize,
    pub depot: Point,
    pub status: VehicleStatus,
    /// Minutes spent moving, including relocation and depot returns.
    pub travel_min: f64,
    pub travel_km: f64,
}

impl VehicleState {
    pub fn new(id: usize, depot: Point, capacity: usize, clock: f64) -> Self {
        Self {
            id,
            position: depot,
            clock,
            tour: Vec::new(),
            onboard: Vec::new(),
            capacity,
            depot,
            status: VehicleStatus::Idle,
            travel_min: 0.0,
            travel_km: 0.0,
        }
    }

    /// Idle or relocating with nothing to serve.
    pub fn is_free(&self) -> bool {
        self.tour.is_empty() && !matches!(self.status, VehicleStatus::Serving)
    }

    fn drive(&mut self, to: Point, minutes: f64) {
        self.travel_km += self.position.distance(&to);
        self.travel_min += minutes;
        self.position = to;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub vehicle: usize,
    pub kind: StopKind,
    pub request: usize,
    pub location: Point,
    /// Passengers on board right after the event.
    pub load: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Relocation {
    pub vehicle: usize,
    pub zone: usize,
    pub target: Point,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fleet {
    pub vehicles: Vec<VehicleState>,
    pub now: f64,
    pub speed_kmh: f64,
}

impl Fleet {
    /// `size` vehicles placed round-robin on the depots.
    pub fn new(depots: &[Point], size: usize, capacity: usize, speed_kmh: f64, start: f64) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidConfig("vehicle capacity must be >= 1".into()));
        }
        if size > 0 && depots.is_empty() {
            return Err(Error::InvalidConfig("fleet needs at least one depot".into()));
        }
        if !(speed_kmh > 0.0) {
            return Err(Error::NonPositiveSpeed(speed_kmh));
        }
        let vehicles = (0..size).map(|i| VehicleState::new(i, depots[i % depots.len()], capacity, start)).collect();
        Ok(Self { vehicles, now: start, speed_kmh })
    }

    /// Moves every vehicle to time `to`, returning the stops served on the
    /// way in `(time, vehicle)` order.
    pub fn advance(&mut self, to: f64) -> Result<Vec<Event>> {
        if to < self.now {
            return Err(Error::TimeRegression { now: self.now, to });
        }
        let mut events = Vec::new();
        let speed = self.speed_kmh;
        for v in &mut self.vehicles {
            advance_vehicle(v, to, speed, &mut events)?;
        }
        self.now = to;
        events.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.vehicle.cmp(&b.vehicle)));
        Ok(events)
    }

    /// Installs a quoted tour on its vehicle. Relocation is abandoned.
    pub fn commit(&mut self, vehicle: usize, stops: Vec<Stop>) -> Result<()> {
        let v = self.vehicles.get_mut(vehicle).ok_or_else(|| Error::InfeasibleTour(format!("unknown vehicle {vehicle}")))?;
        if v.clock != self.now {
            return Err(Error::InfeasibleTour(format!("vehicle {vehicle} is not at the fleet clock")));
        }
        check_tour(v, &stops)?;
        v.tour = stops;
        v.status = if v.tour.is_empty() { VehicleStatus::Idle } else { VehicleStatus::Serving };
        Ok(())
    }

    /// Serves every committed stop, then drives each vehicle back to its
    /// depot. Returns the remaining events and the time the last vehicle
    /// is home.
    pub fn finish_day(&mut self) -> Result<(Vec<Event>, f64)> {
        let end = self.vehicles.iter().filter_map(|v| v.tour.last().map(|s| s.planned_time)).fold(self.now, f64::max);
        for v in &mut self.vehicles {
            if let VehicleStatus::Relocating { .. } = v.status {
                v.status = VehicleStatus::Idle;
            }
        }
        let events = self.advance(end)?;
        let mut home = end;
        for v in &mut self.vehicles {
            let minutes = 60.0 * v.position.distance(&v.depot) / self.speed_kmh;
            let depot = v.depot;
            v.drive(depot, minutes);
            v.clock = end + minutes;
            home = home.max(v.clock);
        }
        for v in &mut self.vehicles {
            v.clock = home;
        }
        self.now = home;
        Ok((events, home))
    }

    /// Total minutes driven by all vehicles.
    pub fn total_travel_min(&self) -> f64 {
        self.vehicles.iter().map(|v| v.travel_min).sum()
    }

    /// Directs free vehicles toward zones with more recent demand than
    /// supply. See [`relocation_plan`].
    pub fn relocate_idle(&mut self, network: &Network, recent_demand: &[usize]) -> Result<Vec<Relocation>> {
        let plan = relocation_plan(self, network, recent_demand)?;
        for r in &plan {
            let v = &mut self.vehicles[r.vehicle];
            v.status = VehicleStatus::Relocating { target: r.target, zone: r.zone };
        }
        Ok(plan)
    }
}

fn advance_vehicle(v: &mut VehicleState, to: f64, speed: f64, events: &mut Vec<Event>) -> Result<()> {
    while let Some(next) = v.tour.first().copied() {
        if next.planned_time > to {
            break;
        }
        let minutes = next.planned_time - v.clock;
        v.drive(next.location, minutes);
        v.clock = next.planned_time;
        match next.kind {
            StopKind::Pickup => {
                v.onboard.push(next.request);
                if v.onboard.len() > v.capacity {
                    return Err(Error::InfeasibleTour(format!("vehicle {} over capacity", v.id)));
                }
            }
            StopKind::Dropoff => {
                let pos = v
                    .onboard
                    .iter()
                    .position(|&r| r == next.request)
                    .ok_or_else(|| Error::InfeasibleTour(format!("request {} dropped off before pickup", next.request)))?;
                v.onboard.remove(pos);
            }
        }
        events.push(Event { time: next.planned_time, vehicle: v.id, kind: next.kind, request: next.request, location: next.location, load: v.onboard.len() });
        v.tour.remove(0);
    }

    let dt = to - v.clock;
    if let Some(next) = v.tour.first() {
        let remaining = next.planned_time - v.clock;
        let target = v.position.lerp(&next.location, if remaining > 0.0 { dt / remaining } else { 1.0 });
        v.drive(target, dt);
    } else {
        match v.status {
            VehicleStatus::Serving => v.status = VehicleStatus::Idle,
            VehicleStatus::Relocating { target, .. } => {
                let needed = 60.0 * v.position.distance(&target) / speed;
                if needed <= dt {
                    v.drive(target, needed);
                    v.status = VehicleStatus::Idle;
                } else {
                    let p = v.position.lerp(&target, dt / needed);
                    v.drive(p, dt);
                }
            }
            VehicleStatus::Idle => {}
        }
    }
    v.clock = to;
    Ok(())
}

/// Greedy relocation. A zone scores its recent requests minus the free
/// vehicles in it (relocating vehicles count at their target). Repeatedly
/// the best-scoring zone with a positive score takes the nearest free
/// vehicle from a zone with a negative score; ties go to the lowest id.
pub fn relocation_plan(fleet: &Fleet, network: &Network, recent_demand: &[usize]) -> Result<Vec<Relocation>> {
    let zones = network.zones.len();
    if recent_demand.len() != zones {
        return Err(Error::LayoutMismatch(format!("{} demand counts for {zones} zones", recent_demand.len())));
    }
    let mut home = Vec::new();
    let mut score: Vec<i64> = recent_demand.iter().map(|&d| d as i64).collect();
    for v in fleet.vehicles.iter().filter(|v| v.is_free()) {
        let zone = match v.status {
            VehicleStatus::Relocating { zone, .. } => zone,
            _ => network.zone_of(&v.position)?,
        };
        score[zone] -= 1;
        home.push((v.id, zone));
    }
    let mut moved = vec![false; home.len()];
    let mut plan = Vec::new();
    loop {
        let (best_zone, best_score) = score.iter().enumerate().fold((0, i64::MIN), |acc, (z, &s)| if s > acc.1 { (z, s) } else { acc });
        if best_score <= 0 {
            break;
        }
        let target = network.zones[best_zone].centroid;
        let pick = home
            .iter()
            .enumerate()
            .filter(|(k, (_, zone))| !moved[*k] && score[*zone] < 0)
            .map(|(k, &(id, zone))| (fleet.vehicles[id].position.distance(&target), id, k, zone))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let Some((_, id, k, zone)) = pick else { break };
        moved[k] = true;
        score[zone] += 1;
        score[best_zone] -= 1;
        plan.push(Relocation { vehicle: id, zone: best_zone, target });
    }
    Ok(plan)
}
