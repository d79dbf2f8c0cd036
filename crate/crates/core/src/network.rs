//! Synthetic study region: a square tiled into zones with a depot at each
//! zone centroid, plus a frequency-based transit network of straight and
//! ring lines.

use alloc::collections::BinaryHeap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Euclidean distance in km.
    pub fn distance(&self, other: &Point) -> f64 {
        math::hypot(self.x - other.x, self.y - other.y)
    }

    /// Point at fraction `t` of the way from `self` to `other`.
    pub fn lerp(&self, other: &Point, t: f64) -> Point {
        Point::new(self.x + (other.x - self.x) * t, self.y + (other.y - self.y) * t)
    }
}

/// Minutes needed to cover the straight line between `a` and `b`.
pub fn travel_time(a: &Point, b: &Point, speed_kmh: f64) -> Result<f64> {
    if !(speed_kmh > 0.0) {
        return Err(Error::NonPositiveSpeed(speed_kmh));
    }
    Ok(60.0 * a.distance(b) / speed_kmh)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Zone {
    pub id: usize,
    pub centroid: Point,
    pub min: Point,
    pub max: Point,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub region_size_km: f64,
    pub zone_count: usize,
    pub station_spacing_km: f64,
    /// Candidate stations of different lines closer than this are merged
    /// when they sit on a crossing.
    pub station_merge_km: f64,
    /// Half-widths of the square ring lines centred on the region.
    pub ring_half_widths_km: Vec<f64>,
    pub transit_speed_kmh: f64,
    pub boarding_wait_min: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            region_size_km: 20.0,
            zone_count: 16,
            station_spacing_km: 2.0,
            station_merge_km: 0.1,
            ring_half_widths_km: vec![5.0, 8.0],
            transit_speed_kmh: 60.0,
            boarding_wait_min: 5.0,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.region_size_km > 0.0) {
            return bad(format!("region size must be positive, got {}", self.region_size_km));
        }
        let side = zones_per_side(self.zone_count);
        if side.is_none() {
            return bad(format!("zone count {} is not a positive perfect square", self.zone_count));
        }
        if !(self.station_spacing_km > 0.0) {
            return bad(format!("station spacing must be positive, got {}", self.station_spacing_km));
        }
        if self.station_spacing_km > self.region_size_km {
            return bad(format!("station spacing {} km exceeds region size {} km", self.station_spacing_km, self.region_size_km));
        }
        if !(self.station_merge_km >= 0.0) || self.station_merge_km >= self.station_spacing_km {
            return bad(format!("station merge distance must be in [0, spacing), got {}", self.station_merge_km));
        }
        for &h in &self.ring_half_widths_km {
            if !(h > 0.0 && h < self.region_size_km / 2.0) {
                return bad(format!("ring half-width {h} km does not fit inside the region"));
            }
        }
        if !(self.transit_speed_kmh > 0.0) {
            return Err(Error::NonPositiveSpeed(self.transit_speed_kmh));
        }
        if !(self.boarding_wait_min >= 0.0) {
            return bad(format!("boarding wait must be non-negative, got {}", self.boarding_wait_min));
        }
        Ok(())
    }
}

fn zones_per_side(count: usize) -> Option<usize> {
    if count == 0 {
        return None;
    }
    let side = math::sqrt(count as f64) as usize;
    (side.saturating_sub(1)..=side + 1).find(|s| s * s == count)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineShape {
    Open,
    Ring,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub id: usize,
    pub name: String,
    pub shape: LineShape,
    /// Polyline vertices. Rings do not repeat the first vertex.
    pub vertices: Vec<Point>,
    /// Station ids in travel order with their arc position along the line.
    pub stops: Vec<(usize, f64)>,
    pub length_km: f64,
}

impl Line {
    fn segments(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        let count = match self.shape {
            LineShape::Open => n.saturating_sub(1),
            LineShape::Ring => n,
        };
        (0..count).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Point at arc length `s` from the first vertex.
    pub fn point_at(&self, s: f64) -> Point {
        let mut remaining = s;
        let mut last = self.vertices[0];
        for (a, b) in self.segments() {
            let len = a.distance(&b);
            if remaining <= len {
                return a.lerp(&b, if len > 0.0 { remaining / len } else { 0.0 });
            }
            remaining -= len;
            last = b;
        }
        last
    }

    /// Shortest distance from `p` to the polyline.
    pub fn distance_to(&self, p: &Point) -> f64 {
        self.segments().map(|(a, b)| point_segment_distance(p, &a, &b)).fold(f64::INFINITY, f64::min)
    }

    fn arc_of(&self, p: &Point) -> f64 {
        let mut acc = 0.0;
        let mut best = (f64::INFINITY, 0.0);
        for (a, b) in self.segments() {
            let len = a.distance(&b);
            let t = project_onto_segment(p, &a, &b);
            let d = p.distance(&a.lerp(&b, t));
            if d < best.0 - 1e-12 {
                best = (d, acc + t * len);
            }
            acc += len;
        }
        best.1
    }
}

fn project_onto_segment(p: &Point, a: &Point, b: &Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return 0.0;
    }
    (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0)
}

fn point_segment_distance(p: &Point, a: &Point, b: &Point) -> f64 {
    p.distance(&a.lerp(b, project_onto_segment(p, a, b)))
}

fn segment_intersection(p: Point, p2: Point, q: Point, q2: Point) -> Option<Point> {
    let r = (p2.x - p.x, p2.y - p.y);
    let s = (q2.x - q.x, q2.y - q.y);
    let denom = r.0 * s.1 - r.1 * s.0;
    if math::abs(denom) < 1e-12 {
        return None;
    }
    let qp = (q.x - p.x, q.y - p.y);
    let t = (qp.0 * s.1 - qp.1 * s.0) / denom;
    let u = (qp.0 * r.1 - qp.1 * r.0) / denom;
    const EPS: f64 = 1e-9;
    if (-EPS..=1.0 + EPS).contains(&t) && (-EPS..=1.0 + EPS).contains(&u) {
        Some(p.lerp(&p2, t.clamp(0.0, 1.0)))
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Station {
    pub id: usize,
    pub location: Point,
    /// Ids of the lines serving this station, ascending.
    pub lines: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitLeg {
    pub line: usize,
    pub from: usize,
    pub to: usize,
    pub distance_km: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitItinerary {
    pub entry: usize,
    pub exit: usize,
    pub wait_time: f64,
    pub in_vehicle_time: f64,
    pub n_boardings: usize,
    pub legs: Vec<TransitLeg>,
}

impl TransitItinerary {
    pub fn total_time(&self) -> f64 {
        self.wait_time + self.in_vehicle_time
    }
}

/// Times of the best itinerary between two stations, without the legs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RouteSummary {
    pub wait_time: f64,
    pub in_vehicle_time: f64,
    pub n_boardings: usize,
}

impl RouteSummary {
    pub fn total_time(&self) -> f64 {
        self.wait_time + self.in_vehicle_time
    }
}

#[derive(Debug, Clone, Copy)]
struct Edge {
    to: usize,
    minutes: f64,
    kind: EdgeKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EdgeKind {
    Board,
    Ride { line: usize },
    Alight,
}

/// Stations and lines, plus the boarding/ride graph used for routing.
///
/// Graph nodes `0..n_stations` are stations; each `(line, stop index)`
/// pair gets a platform node. Boarding a platform costs one boarding wait,
/// riding costs distance over transit speed, alighting is free.
#[derive(Debug, Clone)]
pub struct TransitNetwork {
    pub lines: Vec<Line>,
    pub stations: Vec<Station>,
    pub speed_kmh: f64,
    pub boarding_wait_min: f64,
    adjacency: Vec<Vec<Edge>>,
    summaries: Vec<Option<RouteSummary>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapEntry {
    cost: f64,
    boardings: usize,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on (cost, boardings, node)
        other.cost.total_cmp(&self.cost).then_with(|| other.boardings.cmp(&self.boardings)).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct ShortestPaths {
    cost: Vec<f64>,
    boardings: Vec<usize>,
    pred: Vec<Option<(usize, EdgeKind)>>,
}

impl TransitNetwork {
    fn new(lines: Vec<Line>, stations: Vec<Station>, speed_kmh: f64, boarding_wait_min: f64) -> Self {
        let n_stations = stations.len();
        let mut adjacency: Vec<Vec<Edge>> = vec![Vec::new(); n_stations];
        for line in &lines {
            let base = adjacency.len();
            let k = line.stops.len();
            adjacency.extend((0..k).map(|_| Vec::new()));
            for (i, &(station, _)) in line.stops.iter().enumerate() {
                adjacency[station].push(Edge { to: base + i, minutes: boarding_wait_min, kind: EdgeKind::Board });
                adjacency[base + i].push(Edge { to: station, minutes: 0.0, kind: EdgeKind::Alight });
            }
            let pairs = match line.shape {
                LineShape::Open => k.saturating_sub(1),
                LineShape::Ring if k > 1 => k,
                LineShape::Ring => 0,
            };
            for i in 0..pairs {
                let j = (i + 1) % k;
                let (_, arc_a) = line.stops[i];
                let (_, arc_b) = line.stops[j];
                let mut dist = arc_b - arc_a;
                if dist <= 0.0 {
                    dist += line.length_km;
                }
                let minutes = 60.0 * dist / speed_kmh;
                let ride = EdgeKind::Ride { line: line.id };
                adjacency[base + i].push(Edge { to: base + j, minutes, kind: ride });
                adjacency[base + j].push(Edge { to: base + i, minutes, kind: ride });
            }
        }

        let mut net = Self { lines, stations, speed_kmh, boarding_wait_min, adjacency, summaries: Vec::new() };
        let mut summaries = vec![None; n_stations * n_stations];
        for src in 0..n_stations {
            let sp = net.shortest_paths(src);
            for dst in 0..n_stations {
                if sp.cost[dst].is_finite() {
                    let boardings = sp.boardings[dst];
                    let wait = boardings as f64 * boarding_wait_min;
                    summaries[src * n_stations + dst] =
                        Some(RouteSummary { wait_time: wait, in_vehicle_time: (sp.cost[dst] - wait).max(0.0), n_boardings: boardings });
                }
            }
        }
        net.summaries = summaries;
        net
    }

    fn shortest_paths(&self, source: usize) -> ShortestPaths {
        let n = self.adjacency.len();
        let mut cost = vec![f64::INFINITY; n];
        let mut boardings = vec![usize::MAX; n];
        let mut pred = vec![None; n];
        let mut heap = BinaryHeap::new();
        cost[source] = 0.0;
        boardings[source] = 0;
        heap.push(HeapEntry { cost: 0.0, boardings: 0, node: source });
        while let Some(HeapEntry { cost: c, boardings: b, node }) = heap.pop() {
            if c > cost[node] || (c == cost[node] && b > boardings[node]) {
                continue;
            }
            for e in &self.adjacency[node] {
                let nc = c + e.minutes;
                let nb = b + usize::from(e.kind == EdgeKind::Board);
                let better = nc < cost[e.to] - 1e-12 || (math::abs(nc - cost[e.to]) <= 1e-12 && nb < boardings[e.to]);
                if better {
                    cost[e.to] = nc;
                    boardings[e.to] = nb;
                    pred[e.to] = Some((node, e.kind));
                    heap.push(HeapEntry { cost: nc, boardings: nb, node: e.to });
                }
            }
        }
        ShortestPaths { cost, boardings, pred }
    }

    fn check_station(&self, id: usize) -> Result<()> {
        if id < self.stations.len() {
            Ok(())
        } else {
            Err(Error::UnknownStation(id))
        }
    }

    /// Precomputed best-itinerary times. `None` if no path exists.
    pub fn route_summary(&self, entry: usize, exit: usize) -> Result<Option<RouteSummary>> {
        self.check_station(entry)?;
        self.check_station(exit)?;
        Ok(self.summaries[entry * self.stations.len() + exit])
    }

    /// Minimum-time itinerary from `entry` to `exit`, with its legs.
    ///
    /// `Ok(None)` means the stations are not connected. `entry == exit`
    /// yields the empty itinerary with zero boardings.
    pub fn transit_route(&self, entry: usize, exit: usize) -> Result<Option<TransitItinerary>> {
        self.check_station(entry)?;
        self.check_station(exit)?;
        let sp = self.shortest_paths(entry);
        if !sp.cost[exit].is_finite() {
            return Ok(None);
        }

        // Walk predecessors back to the entry, collecting ride edges.
        let mut rides: Vec<(usize, usize, usize)> = Vec::new(); // (line, from node, to node)
        let mut node = exit;
        while let Some((prev, kind)) = sp.pred[node] {
            if let EdgeKind::Ride { line } = kind {
                rides.push((line, prev, node));
            }
            node = prev;
        }
        rides.reverse();

        let mut legs: Vec<TransitLeg> = Vec::new();
        let mut in_vehicle = 0.0;
        let mut last_line = None;
        for (line, from, to) in rides {
            let d = self.platform_distance(line, from, to);
            in_vehicle += 60.0 * d / self.speed_kmh;
            let from_station = self.platform_station(from);
            let to_station = self.platform_station(to);
            match legs.last_mut() {
                Some(leg) if last_line == Some(line) && leg.to == from_station => {
                    leg.to = to_station;
                    leg.distance_km += d;
                }
                _ => legs.push(TransitLeg { line, from: from_station, to: to_station, distance_km: d }),
            }
            last_line = Some(line);
        }
        let n_boardings = sp.boardings[exit];
        Ok(Some(TransitItinerary { entry, exit, wait_time: n_boardings as f64 * self.boarding_wait_min, in_vehicle_time: in_vehicle, n_boardings, legs }))
    }

    fn platform_base(&self, line: usize) -> usize {
        self.stations.len() + self.lines[..line].iter().map(|l| l.stops.len()).sum::<usize>()
    }

    fn platform_station(&self, node: usize) -> usize {
        let mut base = self.stations.len();
        for line in &self.lines {
            if node < base + line.stops.len() {
                return line.stops[node - base].0;
            }
            base += line.stops.len();
        }
        unreachable!("node {node} is not a platform")
    }

    fn platform_distance(&self, line: usize, from: usize, to: usize) -> f64 {
        let base = self.platform_base(line);
        let l = &self.lines[line];
        let (i, j) = (from - base, to - base);
        let (a, b) = (l.stops[i].1, l.stops[j].1);
        let direct = math::abs(b - a);
        match l.shape {
            LineShape::Open => direct,
            LineShape::Ring => {
                // Adjacent stops only; pick the arc the edge represents.
                let k = l.stops.len();
                if (i + 1) % k == j || (j + 1) % k == i {
                    let forward = if (i + 1) % k == j { b - a } else { a - b };
                    if forward > 0.0 {
                        forward
                    } else {
                        forward + l.length_km
                    }
                } else {
                    direct
                }
            }
        }
    }
}

/// Zones, depots and the transit network for one configuration.
#[derive(Debug, Clone)]
pub struct Network {
    pub config: NetworkConfig,
    pub zones: Vec<Zone>,
    pub zones_per_side: usize,
    pub depots: Vec<Point>,
    pub transit: TransitNetwork,
}

impl Network {
    pub fn build(config: &NetworkConfig) -> Result<Self> {
        config.validate()?;
        let size = config.region_size_km;
        let side = zones_per_side(config.zone_count).expect("validated");
        let zone_size = size / side as f64;

        // Zone ids run along y first: id = ix * side + iy.
        let mut zones = Vec::with_capacity(config.zone_count);
        for ix in 0..side {
            for iy in 0..side {
                let min = Point::new(ix as f64 * zone_size, iy as f64 * zone_size);
                let max = Point::new(min.x + zone_size, min.y + zone_size);
                zones.push(Zone { id: ix * side + iy, centroid: Point::new(min.x + zone_size / 2.0, min.y + zone_size / 2.0), min, max });
            }
        }
        let depots = zones.iter().map(|z| z.centroid).collect();
        let (lines, stations) = layout_lines(config);
        let transit = TransitNetwork::new(lines, stations, config.transit_speed_kmh, config.boarding_wait_min);
        Ok(Self { config: config.clone(), zones, zones_per_side: side, depots, transit })
    }

    pub fn region_size(&self) -> f64 {
        self.config.region_size_km
    }

    pub fn contains(&self, p: &Point) -> bool {
        let s = self.region_size();
        (0.0..=s).contains(&p.x) && (0.0..=s).contains(&p.y)
    }

    /// Zone containing `p`; points on a shared edge go to the lower id.
    pub fn zone_of(&self, p: &Point) -> Result<usize> {
        if !self.contains(p) {
            return Err(Error::OutOfRegion { x: p.x, y: p.y, size: self.region_size() });
        }
        let zone_size = self.region_size() / self.zones_per_side as f64;
        let index = |v: f64| -> usize {
            let c = libm::ceil(v / zone_size) as usize;
            c.saturating_sub(1).min(self.zones_per_side - 1)
        };
        Ok(index(p.x) * self.zones_per_side + index(p.y))
    }

    /// The `k` stations closest to `p`, nearest first, ties by id. Returns
    /// every station when `k` exceeds the station count.
    pub fn nearest_stations(&self, p: &Point, k: usize) -> Vec<usize> {
        let mut ranked: Vec<(f64, usize)> = self.transit.stations.iter().map(|s| (s.location.distance(p), s.id)).collect();
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        ranked.into_iter().take(k).map(|(_, id)| id).collect()
    }

    pub fn station(&self, id: usize) -> Result<&Station> {
        self.transit.stations.get(id).ok_or(Error::UnknownStation(id))
    }

    pub fn transit_route(&self, entry: usize, exit: usize) -> Result<Option<TransitItinerary>> {
        self.transit.transit_route(entry, exit)
    }
}

fn line_geometry(config: &NetworkConfig) -> Vec<(String, LineShape, Vec<Point>)> {
    let s = config.region_size_km;
    let c = s / 2.0;
    let mut lines = vec![
        (String::from("North-South"), LineShape::Open, vec![Point::new(c, 0.0), Point::new(c, s)]),
        (String::from("East-West"), LineShape::Open, vec![Point::new(0.0, c), Point::new(s, c)]),
        (String::from("Northeast-Southwest"), LineShape::Open, vec![Point::new(s, s), Point::new(0.0, 0.0)]),
        (String::from("Northwest-Southeast"), LineShape::Open, vec![Point::new(0.0, s), Point::new(s, 0.0)]),
    ];
    for (i, &h) in config.ring_half_widths_km.iter().enumerate() {
        lines.push((
            format!("Ring-{}", i + 1),
            LineShape::Ring,
            vec![Point::new(c - h, c - h), Point::new(c + h, c - h), Point::new(c + h, c + h), Point::new(c - h, c + h)],
        ));
    }
    lines
}

fn layout_lines(config: &NetworkConfig) -> (Vec<Line>, Vec<Station>) {
    let mut lines: Vec<Line> = line_geometry(config)
        .into_iter()
        .enumerate()
        .map(|(id, (name, shape, vertices))| {
            let mut line = Line { id, name, shape, vertices, stops: Vec::new(), length_km: 0.0 };
            line.length_km = line.segments().map(|(a, b)| a.distance(&b)).sum();
            line
        })
        .collect();

    let mut stations: Vec<Station> = Vec::new();
    let merge = config.station_merge_km;

    // Crossings first, so that they become shared stations exactly on
    // both lines.
    let mut crossings: Vec<Point> = Vec::new();
    for i in 0..lines.len() {
        for j in (i + 1)..lines.len() {
            for (a, a2) in lines[i].segments() {
                for (b, b2) in lines[j].segments() {
                    if let Some(p) = segment_intersection(a, a2, b, b2) {
                        if !crossings.iter().any(|q| q.distance(&p) <= merge) {
                            crossings.push(p);
                        }
                    }
                }
            }
        }
    }
    for p in crossings {
        let serving: Vec<usize> = lines.iter().filter(|l| l.distance_to(&p) < 1e-9).map(|l| l.id).collect();
        stations.push(Station { id: stations.len(), location: p, lines: serving });
    }

    for line in lines.iter_mut() {
        let spacing = config.station_spacing_km;
        let mut arcs: Vec<f64> = Vec::new();
        let mut s = 0.0;
        let mut i = 0usize;
        while s < line.length_km - 1e-9 {
            arcs.push(s);
            i += 1;
            s = i as f64 * spacing;
        }
        if line.shape == LineShape::Open {
            arcs.push(line.length_km);
        }

        let mut stops: Vec<(usize, f64)> = Vec::new();
        // Crossing stations already on this line.
        for st in stations.iter().filter(|st| st.lines.contains(&line.id)) {
            stops.push((st.id, line.arc_of(&st.location)));
        }
        for arc in arcs {
            let p = line.point_at(arc);
            let on_line_nearby = stops.iter().any(|&(id, _)| stations[id].location.distance(&p) <= merge);
            if on_line_nearby {
                continue;
            }
            let id = stations.len();
            stations.push(Station { id, location: p, lines: vec![line.id] });
            stops.push((id, arc));
        }
        stops.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        stops.dedup_by_key(|s| s.0);
        if line.shape == LineShape::Ring && stops.len() > 1 {
            let first = stops[0].0;
            if stops.last().map(|s| s.0) == Some(first) {
                stops.pop();
            }
        }
        line.stops = stops;
    }

    for st in stations.iter_mut() {
        st.lines.sort_unstable();
        st.lines.dedup();
    }
    (lines, stations)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> Network {
        Network::build(&NetworkConfig::default()).unwrap()
    }

    #[test]
    fn reference_depots_are_zone_centroids() {
        let net = reference();
        assert_eq!(net.depots.len(), 16);
        assert_eq!(net.depots[0], Point::new(2.5, 2.5));
        assert_eq!(net.depots[1], Point::new(2.5, 7.5));
        assert_eq!(net.depots[15], Point::new(17.5, 17.5));
        for (z, d) in net.zones.iter().zip(&net.depots) {
            assert_eq!(z.centroid, *d);
        }
    }

    #[test]
    fn four_zone_region() {
        let cfg = NetworkConfig { region_size_km: 10.0, zone_count: 4, ring_half_widths_km: vec![3.0], ..Default::default() };
        let net = Network::build(&cfg).unwrap();
        assert_eq!(net.depots, vec![Point::new(2.5, 2.5), Point::new(2.5, 7.5), Point::new(7.5, 2.5), Point::new(7.5, 7.5)]);
    }

    #[test]
    fn build_rejects_bad_configs() {
        let non_square = NetworkConfig { zone_count: 15, ..Default::default() };
        assert!(matches!(Network::build(&non_square), Err(Error::InvalidConfig(_))));
        let wide = NetworkConfig { station_spacing_km: 25.0, ..Default::default() };
        assert!(matches!(Network::build(&wide), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn travel_time_examples() {
        let o = Point::new(0.0, 0.0);
        assert!((travel_time(&o, &Point::new(0.0, 5.0), 25.0).unwrap() - 12.0).abs() < 1e-12);
        assert!((travel_time(&o, &Point::new(3.0, 4.0), 5.0).unwrap() - 60.0).abs() < 1e-12);
        assert_eq!(travel_time(&o, &o, 5.0).unwrap(), 0.0);
        assert!(travel_time(&o, &o, 0.0).is_err());
    }

    #[test]
    fn zone_lookup_and_boundaries() {
        let net = reference();
        assert_eq!(net.zone_of(&Point::new(0.0, 0.0)).unwrap(), 0);
        assert_eq!(net.zone_of(&Point::new(17.5, 17.5)).unwrap(), 15);
        assert_eq!(net.zone_of(&Point::new(5.0, 5.0)).unwrap(), 0);
        assert_eq!(net.zone_of(&Point::new(5.0, 7.0)).unwrap(), 1);
        assert_eq!(net.zone_of(&Point::new(20.0, 20.0)).unwrap(), 15);
        assert!(net.zone_of(&Point::new(-0.1, 3.0)).is_err());
    }

    #[test]
    fn every_station_lies_on_its_lines() {
        let net = reference();
        assert_eq!(net.transit.lines.len(), 6);
        for st in &net.transit.stations {
            assert!(!st.lines.is_empty(), "station {} has no line", st.id);
            for &l in &st.lines {
                let d = net.transit.lines[l].distance_to(&st.location);
                assert!(d < 1e-9, "station {} is {d} km off line {l}", st.id);
                assert!(net.transit.lines[l].stops.iter().any(|s| s.0 == st.id));
            }
        }
        // The centre is a shared station of the four radial lines.
        let centre = net.nearest_stations(&Point::new(10.0, 10.0), 1)[0];
        assert_eq!(net.transit.stations[centre].lines, vec![0, 1, 2, 3]);
    }

    #[test]
    fn network_is_connected() {
        let net = reference();
        let n = net.transit.stations.len();
        for a in 0..n {
            for b in 0..n {
                assert!(net.transit.route_summary(a, b).unwrap().is_some(), "{a}->{b}");
            }
        }
    }

    #[test]
    fn nearest_station_ties_go_to_lower_id() {
        let net = reference();
        let a = net.transit.stations[0].location;
        let near = net.nearest_stations(&a, 1);
        assert_eq!(near, vec![0]);
        // Find two stations on the same axis-aligned line 2 km apart and query their midpoint.
        let line = &net.transit.lines[0];
        let (s1, s2) = (line.stops[0].0, line.stops[1].0);
        let p1 = net.transit.stations[s1].location;
        let p2 = net.transit.stations[s2].location;
        let mid = p1.lerp(&p2, 0.5);
        let got = net.nearest_stations(&mid, 2);
        assert_eq!(got[0], s1.min(s2));
        assert!(net.nearest_stations(&mid, 10_000).len() == net.transit.stations.len());
    }

    #[test]
    fn same_station_route_is_degenerate() {
        let net = reference();
        let it = net.transit_route(3, 3).unwrap().unwrap();
        assert_eq!((it.wait_time, it.in_vehicle_time, it.n_boardings), (0.0, 0.0, 0));
        assert!(it.legs.is_empty());
    }

    #[test]
    fn single_line_ride_ten_km() {
        let net = reference();
        // North-South line: stations at (10, 0) and (10, 10).
        let a = net.nearest_stations(&Point::new(10.0, 0.0), 1)[0];
        let b = net.nearest_stations(&Point::new(10.0, 10.0), 1)[0];
        let it = net.transit_route(a, b).unwrap().unwrap();
        assert!((it.wait_time - 5.0).abs() < 1e-12);
        assert!((it.in_vehicle_time - 10.0).abs() < 1e-9);
        assert_eq!(it.n_boardings, 1);
        assert_eq!(it.legs.len(), 1);
        assert!(net.transit_route(a, 10_000).is_err());
    }

    #[test]
    fn transfer_costs_a_second_wait() {
        let net = reference();
        // (10, 0) on North-South to (0, 10) on East-West: transfer at the centre.
        let a = net.nearest_stations(&Point::new(10.0, 0.0), 1)[0];
        let b = net.nearest_stations(&Point::new(0.0, 10.0), 1)[0];
        let it = net.transit_route(a, b).unwrap().unwrap();
        assert_eq!(it.n_boardings, 2);
        assert!((it.wait_time - 10.0).abs() < 1e-12);
        let sum: f64 = it.legs.iter().map(|l| l.distance_km).sum();
        assert!((it.in_vehicle_time - 60.0 * sum / 60.0).abs() < 1e-9);
        let s = net.transit.route_summary(a, b).unwrap().unwrap();
        assert!((s.total_time() - it.total_time()).abs() < 1e-9);
    }
}
