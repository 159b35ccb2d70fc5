//! Hexagonal macro layout, microcell placement, random-waypoint mobility and
//! Euclidean target-cell prediction.

use std::fmt;

use rand::Rng;
use thiserror::Error;

use crate::radio::{CellKind, TxConfig};

pub const DEFAULT_CELL_RADIUS_M: f64 = 2000.0;
pub const DEFAULT_N_MACRO: usize = 4;
pub const DEFAULT_MICRO_PER_CELL: usize = 15;
pub const DEFAULT_V_MIN_KMH: f64 = 0.0;
pub const DEFAULT_V_MAX_KMH: f64 = 30.0;
pub const DEFAULT_PREDICTION_HORIZON_S: f64 = 5.0;

const SQRT3: f64 = 1.732_050_807_568_877_2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TopologyError {
    #[error("need at least one macrocell, got {0}")]
    NoMacrocells(usize),
    #[error("cell radius must be positive, got {0}")]
    BadRadius(f64),
    #[error("no candidate cells to predict from")]
    NoCandidates,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellId(pub u32);

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct UeId(pub u32);

impl fmt::Display for UeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub min: Point,
    pub max: Point,
}

impl BoundingBox {
    pub fn contains(&self, p: &Point) -> bool {
        (self.min.x..=self.max.x).contains(&p.x) && (self.min.y..=self.max.y).contains(&p.y)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        Point::new(rng.random_range(self.min.x..=self.max.x), rng.random_range(self.min.y..=self.max.y))
    }

    /// Mirrors a point that left the box back inside it.
    pub fn reflect(&self, p: Point) -> Point {
        fn fold(v: f64, lo: f64, hi: f64) -> f64 {
            let v = if v < lo { 2.0 * lo - v } else if v > hi { 2.0 * hi - v } else { v };
            v.clamp(lo, hi)
        }
        Point::new(fold(p.x, self.min.x, self.max.x), fold(p.y, self.min.y, self.max.y))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSite {
    pub id: CellId,
    pub kind: CellKind,
    pub position: Point,
    pub tx: TxConfig,
    /// LTE-U gateway controlling this microcell; `None` for macro sites.
    pub gateway_id: Option<u32>,
    /// Macro cell whose hexagon contains this microcell.
    pub parent: Option<CellId>,
}

/// Flat-top hexagonal macro layout; neighbouring sites are `sqrt(3) * radius`
/// apart.
#[derive(Debug, Clone, PartialEq)]
pub struct HexGrid {
    pub cell_radius_m: f64,
    pub macros: Vec<CellSite>,
    pub micros: Vec<CellSite>,
    pub bbox: BoundingBox,
}

impl HexGrid {
    pub fn sites(&self) -> impl Iterator<Item = &CellSite> {
        self.macros.iter().chain(self.micros.iter())
    }

    pub fn site(&self, id: CellId) -> Option<&CellSite> {
        self.sites().find(|s| s.id == id)
    }

    pub fn in_hexagon(&self, center: &Point, p: &Point) -> bool {
        point_in_hexagon(center, self.cell_radius_m, p)
    }
}

/// Point-in-hexagon test for a flat-top hexagon of circumradius `radius`.
pub fn point_in_hexagon(center: &Point, radius: f64, p: &Point) -> bool {
    let dx = (p.x - center.x).abs();
    let dy = (p.y - center.y).abs();
    let eps = 1e-9 * radius;
    dy <= SQRT3 / 2.0 * radius + eps && SQRT3 * dx + dy <= SQRT3 * radius + eps
}

fn axial_center(q: i64, r: i64, radius: f64) -> Point {
    Point::new(radius * 1.5 * q as f64, radius * SQRT3 * (r as f64 + q as f64 / 2.0))
}

/// Sites fill hex rings outward from the origin in a fixed order.
pub fn build_hex_grid(n_macro: usize, radius_m: f64, macro_tx: TxConfig) -> Result<HexGrid, TopologyError> {
    if n_macro == 0 {
        return Err(TopologyError::NoMacrocells(n_macro));
    }
    if !(radius_m.is_finite() && radius_m > 0.0) {
        return Err(TopologyError::BadRadius(radius_m));
    }
    const DIRS: [(i64, i64); 6] = [(1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1)];
    let mut coords = vec![(0i64, 0i64)];
    let mut ring = 1i64;
    while coords.len() < n_macro {
        let (mut q, mut r) = (DIRS[4].0 * ring, DIRS[4].1 * ring);
        for dir in DIRS {
            for _ in 0..ring {
                coords.push((q, r));
                q += dir.0;
                r += dir.1;
            }
        }
        ring += 1;
    }
    coords.truncate(n_macro);

    let macros: Vec<CellSite> = coords
        .iter()
        .enumerate()
        .map(|(i, &(q, r))| CellSite {
            id: CellId(i as u32),
            kind: CellKind::Macro,
            position: axial_center(q, r, radius_m),
            tx: macro_tx,
            gateway_id: None,
            parent: None,
        })
        .collect();

    let half_h = SQRT3 / 2.0 * radius_m;
    let (mut min, mut max) = (Point::new(f64::MAX, f64::MAX), Point::new(f64::MIN, f64::MIN));
    for s in &macros {
        min.x = min.x.min(s.position.x - radius_m);
        max.x = max.x.max(s.position.x + radius_m);
        min.y = min.y.min(s.position.y - half_h);
        max.y = max.y.max(s.position.y + half_h);
    }
    Ok(HexGrid { cell_radius_m: radius_m, macros, micros: Vec::new(), bbox: BoundingBox { min, max } })
}

/// `per_cell` microcells uniformly inside each macro hexagon (rejection
/// sampling). Ids continue after the macro ids; each macro cell's microcells
/// share one gateway, numbered like the macro cell.
pub fn place_microcells<R: Rng + ?Sized>(
    grid: &HexGrid,
    per_cell: usize,
    micro_tx: TxConfig,
    rng: &mut R,
) -> Vec<CellSite> {
    let r = grid.cell_radius_m;
    let half_h = SQRT3 / 2.0 * r;
    let mut next_id = grid.macros.len() as u32;
    let mut out = Vec::with_capacity(per_cell * grid.macros.len());
    for m in &grid.macros {
        for _ in 0..per_cell {
            let position = loop {
                let p = Point::new(
                    m.position.x + rng.random_range(-r..=r),
                    m.position.y + rng.random_range(-half_h..=half_h),
                );
                if point_in_hexagon(&m.position, r, &p) {
                    break p;
                }
            };
            out.push(CellSite {
                id: CellId(next_id),
                kind: CellKind::Micro,
                position,
                tx: micro_tx,
                gateway_id: Some(m.id.0),
                parent: Some(m.id),
            });
            next_id += 1;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrafficClass {
    RealTime,
    NonRealTime,
}

impl TrafficClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            TrafficClass::RealTime => "real_time",
            TrafficClass::NonRealTime => "non_real_time",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobilityConfig {
    pub v_min_kmh: f64,
    pub v_max_kmh: f64,
}

impl Default for MobilityConfig {
    fn default() -> Self {
        MobilityConfig { v_min_kmh: DEFAULT_V_MIN_KMH, v_max_kmh: DEFAULT_V_MAX_KMH }
    }
}

impl MobilityConfig {
    fn draw_speed<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.v_max_kmh > self.v_min_kmh {
            rng.random_range(self.v_min_kmh..=self.v_max_kmh)
        } else {
            self.v_min_kmh
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UeState {
    pub id: UeId,
    pub position: Point,
    pub waypoint: Point,
    pub speed_kmh: f64,
    /// Velocity vector in km/h; its norm equals `speed_kmh`.
    pub velocity_kmh: (f64, f64),
    pub serving: CellId,
    pub traffic: TrafficClass,
    pub battery_hours: f64,
}

impl UeState {
    /// Random start: position, waypoint, speed, traffic class and battery.
    pub fn spawn<R: Rng + ?Sized>(
        id: UeId,
        bbox: &BoundingBox,
        mobility: &MobilityConfig,
        serving: CellId,
        rng: &mut R,
    ) -> Self {
        let position = bbox.sample(rng);
        let waypoint = bbox.sample(rng);
        let speed_kmh = mobility.draw_speed(rng);
        let traffic = if rng.random_bool(0.5) { TrafficClass::RealTime } else { TrafficClass::NonRealTime };
        let battery_hours = rng.random_range(0.0..=10.0);
        let mut ue = UeState {
            id,
            position,
            waypoint,
            speed_kmh,
            velocity_kmh: (0.0, 0.0),
            serving,
            traffic,
            battery_hours,
        };
        ue.aim();
        ue
    }

    fn aim(&mut self) {
        let (dx, dy) = (self.waypoint.x - self.position.x, self.waypoint.y - self.position.y);
        let d = dx.hypot(dy);
        self.velocity_kmh = if d > 0.0 { (self.speed_kmh * dx / d, self.speed_kmh * dy / d) } else { (0.0, 0.0) };
    }
}

/// Random-waypoint step: move toward the waypoint; on arrival draw a new
/// waypoint in the box and a new speed.
pub fn step_ue<R: Rng + ?Sized>(
    ue: &mut UeState,
    dt_s: f64,
    bbox: &BoundingBox,
    mobility: &MobilityConfig,
    rng: &mut R,
) {
    let travel = ue.speed_kmh / 3.6 * dt_s;
    if travel.is_nan() || travel <= 0.0 {
        return;
    }
    let (dx, dy) = (ue.waypoint.x - ue.position.x, ue.waypoint.y - ue.position.y);
    let remaining = dx.hypot(dy);
    if remaining <= travel {
        ue.position = ue.waypoint;
        ue.waypoint = bbox.sample(rng);
        ue.speed_kmh = mobility.draw_speed(rng);
    } else {
        ue.position = Point::new(ue.position.x + dx / remaining * travel, ue.position.y + dy / remaining * travel);
    }
    ue.position = bbox.reflect(ue.position);
    ue.aim();
}

/// Projects the UE `horizon_s` ahead along its velocity and returns the
/// candidate closest to that point; ties go to the lowest id.
pub fn predict_target_cell(
    position: Point,
    velocity_kmh: (f64, f64),
    candidates: &[(CellId, Point)],
    horizon_s: f64,
) -> Result<CellId, TopologyError> {
    let ahead = Point::new(
        position.x + velocity_kmh.0 / 3.6 * horizon_s,
        position.y + velocity_kmh.1 / 3.6 * horizon_s,
    );
    candidates
        .iter()
        .map(|(id, p)| (p.distance(&ahead), *id))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(_, id)| id)
        .ok_or(TopologyError::NoCandidates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid(n: usize) -> HexGrid {
        build_hex_grid(n, DEFAULT_CELL_RADIUS_M, TxConfig::macro_default()).unwrap()
    }

    #[test]
    fn hex_grid_layouts() {
        let g = grid(1);
        assert_eq!(g.macros.len(), 1);
        assert_eq!(g.macros[0].position, Point::new(0.0, 0.0));

        let g = grid(2);
        let d = g.macros[0].position.distance(&g.macros[1].position);
        assert!((d - 2000.0 * 3f64.sqrt()).abs() < 1e-6);
        assert!((d - 3464.1).abs() < 0.1);

        for n in [4, 7, 19] {
            let g = grid(n);
            assert_eq!(g.macros.len(), n);
            for (i, a) in g.macros.iter().enumerate() {
                for b in &g.macros[i + 1..] {
                    assert!(a.position.distance(&b.position) >= 2000.0 * 3f64.sqrt() - 1e-6);
                }
            }
        }
        assert!(build_hex_grid(0, 2000.0, TxConfig::macro_default()).is_err());
        assert!(build_hex_grid(3, -1.0, TxConfig::macro_default()).is_err());
    }

    #[test]
    fn microcells_per_cell_and_determinism() {
        let g = grid(4);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(place_microcells(&g, 0, TxConfig::micro_default(), &mut rng).is_empty());
        let a = place_microcells(&g, 15, TxConfig::micro_default(), &mut ChaCha8Rng::seed_from_u64(9));
        let b = place_microcells(&g, 15, TxConfig::micro_default(), &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a.len(), 60);
        assert_eq!(a, b);
        for m in &a {
            let parent = g.site(m.parent.unwrap()).unwrap();
            assert!(g.in_hexagon(&parent.position, &m.position));
            assert_eq!(m.gateway_id, Some(parent.id.0));
        }
        let ids: Vec<u32> = a.iter().map(|s| s.id.0).collect();
        assert_eq!(ids, (4..64).collect::<Vec<_>>());
    }

    fn ue_at(p: Point, wp: Point, speed: f64) -> UeState {
        let mut ue = UeState {
            id: UeId(0),
            position: p,
            waypoint: wp,
            speed_kmh: speed,
            velocity_kmh: (0.0, 0.0),
            serving: CellId(0),
            traffic: TrafficClass::RealTime,
            battery_hours: 5.0,
        };
        ue.aim();
        ue
    }

    #[test]
    fn stationary_ue_does_not_move() {
        let g = grid(1);
        let mut ue = ue_at(Point::new(10.0, 10.0), Point::new(500.0, 10.0), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        step_ue(&mut ue, 1.0, &g.bbox, &MobilityConfig::default(), &mut rng);
        assert_eq!(ue.position, Point::new(10.0, 10.0));
    }

    #[test]
    fn thirty_six_kmh_moves_ten_metres_per_second() {
        let g = grid(1);
        let mut ue = ue_at(Point::new(0.0, 0.0), Point::new(500.0, 0.0), 36.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        step_ue(&mut ue, 1.0, &g.bbox, &MobilityConfig::default(), &mut rng);
        assert!((ue.position.x - 10.0).abs() < 1e-9);
        assert_eq!(ue.position.y, 0.0);
        assert!((ue.velocity_kmh.0 - 36.0).abs() < 1e-9);
    }

    #[test]
    fn arrival_draws_new_waypoint_and_trajectories_repeat() {
        let g = grid(4);
        let mob = MobilityConfig::default();
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut ue = UeState::spawn(UeId(1), &g.bbox, &mob, CellId(0), &mut rng);
            let mut trace = Vec::new();
            for _ in 0..20_000 {
                step_ue(&mut ue, 0.5, &g.bbox, &mob, &mut rng);
                assert!(g.bbox.contains(&ue.position));
                let v = ue.velocity_kmh.0.hypot(ue.velocity_kmh.1);
                assert!(v == 0.0 || (v - ue.speed_kmh).abs() < 1e-9);
                trace.push(ue.position);
            }
            trace
        };
        assert_eq!(run(5), run(5));
        assert_ne!(run(5), run(6));
    }

    #[test]
    fn prediction_examples() {
        let a = (CellId(1), Point::new(0.0, 0.0));
        let b = (CellId(2), Point::new(1000.0, 0.0));
        // stationary: nearest by current position
        assert_eq!(predict_target_cell(Point::new(400.0, 0.0), (0.0, 0.0), &[a, b], 5.0).unwrap(), CellId(1));
        // midpoint heading to B
        assert_eq!(predict_target_cell(Point::new(500.0, 0.0), (36.0, 0.0), &[a, b], 5.0).unwrap(), CellId(2));
        // exact tie goes to the lower id, regardless of order
        assert_eq!(predict_target_cell(Point::new(500.0, 0.0), (0.0, 0.0), &[b, a], 5.0).unwrap(), CellId(1));
        assert_eq!(predict_target_cell(Point::new(0.0, 0.0), (0.0, 0.0), &[], 5.0), Err(TopologyError::NoCandidates));
    }

    #[test]
    fn reflection_folds_back_inside() {
        let bb = BoundingBox { min: Point::new(0.0, 0.0), max: Point::new(10.0, 10.0) };
        assert_eq!(bb.reflect(Point::new(-2.0, 12.0)), Point::new(2.0, 8.0));
    }

    proptest! {
        #[test]
        fn prediction_is_translation_invariant(
            cells in proptest::collection::vec((-5000i32..5000, -5000i32..5000), 1..8),
            pos in (-5000i32..5000, -5000i32..5000),
            vel in (-60i32..60, -60i32..60),
            shift in (-100_000i32..100_000, -100_000i32..100_000),
        ) {
            let cands: Vec<(CellId, Point)> = cells
                .iter()
                .enumerate()
                .map(|(i, &(x, y))| (CellId(i as u32), Point::new(x as f64, y as f64)))
                .collect();
            let moved: Vec<(CellId, Point)> = cands
                .iter()
                .map(|(id, p)| (*id, Point::new(p.x + shift.0 as f64, p.y + shift.1 as f64)))
                .collect();
            let v = (vel.0 as f64 * 3.6, vel.1 as f64 * 3.6);
            let p = Point::new(pos.0 as f64, pos.1 as f64);
            let q = Point::new(p.x + shift.0 as f64, p.y + shift.1 as f64);
            // skip near-ties, where rounding after the shift may legitimately flip the order
            let ahead = Point::new(p.x + v.0 / 3.6 * 5.0, p.y + v.1 / 3.6 * 5.0);
            let mut d: Vec<f64> = cands.iter().map(|(_, c)| c.distance(&ahead)).collect();
            d.sort_by(f64::total_cmp);
            prop_assume!(d.len() == 1 || d[1] - d[0] > 1e-6);
            prop_assert_eq!(
                predict_target_cell(p, v, &cands, 5.0).unwrap(),
                predict_target_cell(q, v, &moved, 5.0).unwrap()
            );
        }
    }
}
