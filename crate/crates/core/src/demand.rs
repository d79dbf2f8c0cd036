//! Request generation, willingness-to-pay draws, tariffs and the attribute
//! table the choice model sees for every mode.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use crate::choice::Mode;
use crate::error::{Error, Result};
use crate::math;
use crate::network::{travel_time, Network, Point};

#[derive(Debug, Clone, PartialEq)]
pub struct Request {
    pub id: usize,
    pub origin: Point,
    pub destination: Point,
    /// Clock minutes (7:00 is 420).
    pub desired_pickup: f64,
    /// Sampled willingness to pay, $.
    pub wtp: f64,
}

impl Request {
    pub fn trip_km(&self) -> f64 {
        self.origin.distance(&self.destination)
    }
}

/// Clock interval in minutes, `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Horizon {
    pub start: f64,
    pub end: f64,
}

impl Horizon {
    pub const fn new(start: f64, end: f64) -> Self {
        Self { start, end }
    }

    pub fn minutes(&self) -> f64 {
        self.end - self.start
    }
}

impl Default for Horizon {
    fn default() -> Self {
        Self::new(7.0 * 60.0, 9.0 * 60.0)
    }
}

/// Poisson arrivals at `lambda_per_hour` over `horizon`, with origins and
/// destinations uniform over the square region. Requests come out sorted
/// by pickup time and carry `wtp = 0` until [`sample_wtp`] fills it.
pub fn generate_day<R: Rng + ?Sized>(rng: &mut R, lambda_per_hour: f64, horizon: Horizon, region_size_km: f64) -> Result<Vec<Request>> {
    if !(lambda_per_hour > 0.0) || !lambda_per_hour.is_finite() {
        return Err(Error::InvalidConfig(alloc::format!("arrival rate must be positive, got {lambda_per_hour}")));
    }
    if !(horizon.start <= horizon.end) {
        return Err(Error::InvalidConfig(alloc::format!("horizon start {} is after its end {}", horizon.start, horizon.end)));
    }
    if !(region_size_km > 0.0) {
        return Err(Error::InvalidConfig(alloc::format!("region size must be positive, got {region_size_km}")));
    }
    let gaps = Exp::new(lambda_per_hour / 60.0).expect("positive rate");
    let mut requests = Vec::new();
    let mut t = horizon.start;
    loop {
        t += gaps.sample(rng);
        if t >= horizon.end {
            break;
        }
        let origin = Point::new(rng.random::<f64>() * region_size_km, rng.random::<f64>() * region_size_km);
        let destination = loop {
            let d = Point::new(rng.random::<f64>() * region_size_km, rng.random::<f64>() * region_size_km);
            if d != origin {
                break d;
            }
        };
        requests.push(Request { id: requests.len(), origin, destination, desired_pickup: t, wtp: 0.0 });
    }
    Ok(requests)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WtpModel {
    pub car_cost_per_km: f64,
    /// Variance of the WTP noise, $².
    pub sigma: f64,
}

impl WtpModel {
    pub fn s(&self) -> f64 {
        math::sqrt(self.sigma)
    }

    /// Perceived cost of the reference product: the car trip.
    pub fn reference_cost(&self, request: &Request) -> f64 {
        self.car_cost_per_km * request.trip_km()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0) || !(self.car_cost_per_km >= 0.0) {
            return Err(Error::InvalidConfig(alloc::format!("invalid WTP model {self:?}")));
        }
        Ok(())
    }
}

/// `ϖ = w + ε`, with `ε ~ N(0, s²)` drawn as `s · z` so that the stream of
/// standard-normal draws does not depend on `s`.
pub fn sample_wtp<R: Rng + ?Sized>(rng: &mut R, request: &Request, model: &WtpModel) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    model.reference_cost(request) + model.s() * z
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FareSchedule {
    pub base_fare: f64,
    /// θ, $/km.
    pub per_km: f64,
    /// c̄, $/km.
    pub avg_op_cost_per_km: f64,
    pub transit_fare: f64,
    pub taxi_flag: f64,
    pub taxi_per_km: f64,
}

impl FareSchedule {
    /// Schedule with θ = c̄ + markup.
    pub fn with_markup(base_fare: f64, avg_op_cost_per_km: f64, markup_per_km: f64) -> Self {
        Self { base_fare, per_km: avg_op_cost_per_km + markup_per_km, avg_op_cost_per_km, transit_fare: 2.75, taxi_flag: 3.0, taxi_per_km: 1.56 }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.base_fare, self.per_km, self.avg_op_cost_per_km, self.transit_fare, self.taxi_flag, self.taxi_per_km];
        if all.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidConfig(alloc::format!("fare schedule entries must be finite and >= 0: {self:?}")));
        }
        Ok(())
    }

    /// `f₀ + θ·d`.
    pub fn rideshare_fare(&self, distance_km: f64) -> Result<f64> {
        if !(distance_km >= 0.0) {
            return Err(Error::NegativeDistance(distance_km));
        }
        Ok(self.base_fare + self.per_km * distance_km)
    }

    /// Rideshare leg fare plus one transit ticket.
    pub fn rideshare_transit_fare(&self, leg_km: f64) -> Result<f64> {
        Ok(self.rideshare_fare(leg_km)? + self.transit_fare)
    }

    pub fn taxi_fare(&self, distance_km: f64) -> f64 {
        self.taxi_flag + self.taxi_per_km * distance_km
    }
}

impl Default for FareSchedule {
    fn default() -> Self {
        Self::with_markup(1.0, DEFAULT_AVG_OP_COST_PER_KM, 0.1)
    }
}

/// Default c̄ in $/km. See the README for how it was chosen.
pub const DEFAULT_AVG_OP_COST_PER_KM: f64 = 0.03;

/// Speeds and outside-mode settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeSettings {
    pub walk_kmh: f64,
    pub bike_kmh: f64,
    pub car_kmh: f64,
    pub taxi_wait_min: f64,
    pub car_cost_per_km: f64,
    /// Nearest entry and exit stations searched per trip.
    pub station_candidates: usize,
}

impl Default for ModeSettings {
    fn default() -> Self {
        Self { walk_kmh: 5.0, bike_kmh: 16.0, car_kmh: 25.0, taxi_wait_min: 5.0, car_cost_per_km: 0.33, station_candidates: 4 }
    }
}

impl ModeSettings {
    pub fn validate(&self) -> Result<()> {
        for s in [self.walk_kmh, self.bike_kmh, self.car_kmh] {
            if !(s > 0.0) {
                return Err(Error::NonPositiveSpeed(s));
            }
        }
        if !(self.taxi_wait_min >= 0.0) || !(self.car_cost_per_km >= 0.0) || self.station_candidates == 0 {
            return Err(Error::InvalidConfig(alloc::format!("invalid mode settings {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AltAttributes {
    pub ovtt: f64,
    pub ivtt: f64,
    pub cost: f64,
    pub available: bool,
}

impl AltAttributes {
    pub const UNAVAILABLE: AltAttributes = AltAttributes { ovtt: 0.0, ivtt: 0.0, cost: 0.0, available: false };

    pub fn new(ovtt: f64, ivtt: f64, cost: f64) -> Self {
        Self { ovtt, ivtt, cost, available: true }
    }
}

/// Attributes of all seven alternatives, indexed by [`Mode`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ModeAttributes(pub [AltAttributes; Mode::COUNT]);

impl ModeAttributes {
    pub fn get(&self, mode: Mode) -> &AltAttributes {
        &self.0[mode.index()]
    }

    pub fn set(&mut self, mode: Mode, attrs: AltAttributes) {
        self.0[mode.index()] = attrs;
    }

    pub fn is_available(&self, mode: Mode) -> bool {
        self.0[mode.index()].available
    }

    pub fn available(&self) -> impl Iterator<Item = Mode> + '_ {
        Mode::ALL.into_iter().filter(|m| self.is_available(*m))
    }
}

/// Best entry/exit station pair for a walk-transit-walk trip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitOption {
    pub entry: usize,
    pub exit: usize,
    pub access_min: f64,
    pub egress_min: f64,
    pub wait_min: f64,
    pub in_vehicle_min: f64,
}

impl TransitOption {
    pub fn door_to_door(&self) -> f64 {
        self.access_min + self.wait_min + self.in_vehicle_min + self.egress_min
    }
}

/// Searches the `k` nearest entry and exit stations for the quickest
/// walk-transit-walk trip. Pairs with `entry == exit` are skipped.
pub fn best_transit_option(network: &Network, origin: &Point, destination: &Point, settings: &ModeSettings) -> Option<TransitOption> {
    let k = settings.station_candidates;
    let entries = network.nearest_stations(origin, k);
    let exits = network.nearest_stations(destination, k);
    let mut best: Option<TransitOption> = None;
    for &entry in &entries {
        let entry_loc = network.transit.stations[entry].location;
        let access = 60.0 * origin.distance(&entry_loc) / settings.walk_kmh;
        for &exit in &exits {
            if entry == exit {
                continue;
            }
            let Ok(Some(route)) = network.transit.route_summary(entry, exit) else { continue };
            let exit_loc = network.transit.stations[exit].location;
            let option = TransitOption {
                entry,
                exit,
                access_min: access,
                egress_min: 60.0 * exit_loc.distance(destination) / settings.walk_kmh,
                wait_min: route.wait_time,
                in_vehicle_min: route.in_vehicle_time,
            };
            if best.is_none_or(|b| option.door_to_door() < b.door_to_door()) {
                best = Some(option);
            }
        }
    }
    best
}

/// Attributes for walk, bike, car, taxi and transit. The two operator
/// options are left unavailable; the dispatcher fills them in.
pub fn outside_mode_attributes(request: &Request, network: &Network, settings: &ModeSettings, fares: &FareSchedule) -> Result<ModeAttributes> {
    let (o, d) = (&request.origin, &request.destination);
    let km = request.trip_km();
    let mut attrs = ModeAttributes([AltAttributes::UNAVAILABLE; Mode::COUNT]);
    attrs.set(Mode::Walk, AltAttributes::new(0.0, travel_time(o, d, settings.walk_kmh)?, 0.0));
    attrs.set(Mode::Bike, AltAttributes::new(0.0, travel_time(o, d, settings.bike_kmh)?, 0.0));
    attrs.set(Mode::Car, AltAttributes::new(0.0, travel_time(o, d, settings.car_kmh)?, settings.car_cost_per_km * km));
    attrs.set(Mode::Taxi, AltAttributes::new(settings.taxi_wait_min, travel_time(o, d, settings.car_kmh)?, fares.taxi_fare(km)));
    if let Some(t) = best_transit_option(network, o, d, settings) {
        attrs.set(Mode::Transit, AltAttributes::new(t.access_min + t.wait_min + t.egress_min, t.in_vehicle_min, fares.transit_fare));
    }
    Ok(attrs)
}
