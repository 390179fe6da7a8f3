//! Node layouts and vehicle kinematics.
//!
//! Vehicles are placed per lane by a Poisson process with a configured
//! linear density and move at constant speed along a wrap-around (torus)
//! road, which keeps the density stationary over time. Fixed nodes
//! (Wi-Fi APs, clients, tagged probe receivers) are placed verbatim.

use serde::{Deserialize, Serialize};

use crate::rng::RngStream;
use crate::time::SimTime;

pub const LANE_WIDTH_M: f64 = 4.0;

/// Lower clamp applied to distances used in propagation queries, so the
/// path-loss model has no singularity at d -> 0.
pub const MIN_PROPAGATION_DISTANCE_M: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScenarioKind {
    HighwayFast,
    UrbanFast,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        assert!(x.is_finite() && y.is_finite(), "positions must be finite");
        Position { x, y }
    }

    pub fn euclidean(self, other: Position) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        (dx * dx + dy * dy).sqrt()
    }
}

/// Roles a fixed (non-vehicle) node can play; the world maps these onto
/// protocol stacks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FixedRole {
    WifiAp,
    WifiClient,
    /// Receive-only node at which delivery metrics are observed.
    ProbeRx,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedNode {
    pub role: FixedRole,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub road_length_m: f64,
    pub lane_count: u32,
    /// Vehicles per km, summed over all lanes.
    pub density_per_km: f64,
    /// Speed magnitude per lane; `None` picks the kind's default.
    pub speed_kmh: Option<f64>,
    pub fixed_nodes: Vec<FixedNode>,
    /// Urban grid pitch between street centerlines.
    pub block_size_m: f64,
    /// Half-width of a street corridor for line-of-sight tests.
    pub street_halfwidth_m: f64,
}

impl Scenario {
    pub fn highway_fast(road_length_m: f64, density_per_km: f64) -> Self {
        Scenario {
            kind: ScenarioKind::HighwayFast,
            road_length_m,
            lane_count: 6,
            density_per_km,
            speed_kmh: None,
            fixed_nodes: Vec::new(),
            block_size_m: 250.0,
            street_halfwidth_m: 15.0,
        }
    }

    pub fn urban_fast(road_length_m: f64, density_per_km: f64) -> Self {
        Scenario { kind: ScenarioKind::UrbanFast, ..Self::highway_fast(road_length_m, density_per_km) }
    }

    pub fn speed_mps(&self) -> f64 {
        let kmh = self.speed_kmh.unwrap_or(match self.kind {
            ScenarioKind::HighwayFast => 140.0,
            ScenarioKind::UrbanFast => 60.0,
        });
        kmh / 3.6
    }

    fn lane_y(&self, lane: u32) -> f64 {
        (lane as f64 - (self.lane_count.max(1) as f64 - 1.0) / 2.0) * LANE_WIDTH_M
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Vehicle {
    pub lane: u32,
    pub x0: f64,
    pub y: f64,
    /// Signed speed along x; sign encodes travel direction.
    pub speed_mps: f64,
}

/// Built node layout: vehicles first, then fixed nodes, in a stable order.
#[derive(Debug, Clone)]
pub struct NodeSet {
    pub scenario: Scenario,
    pub vehicles: Vec<Vehicle>,
    pub fixed: Vec<FixedNode>,
}

/// Draw from Poisson(lambda) by inversion of exponential gaps.
fn poisson_count(rng: &mut RngStream, lambda: f64) -> usize {
    if lambda <= 0.0 {
        return 0;
    }
    let mut total = 0.0;
    let mut n = 0;
    loop {
        total += rng.exponential(1.0);
        if total > lambda {
            return n;
        }
        n += 1;
    }
}

/// Place vehicles and fixed nodes for the scenario.
pub fn build(scenario: &Scenario, rng: &mut RngStream) -> NodeSet {
    assert!(scenario.road_length_m >= 0.0);
    let mut vehicles = Vec::new();
    let lanes = scenario.lane_count.max(1);
    let per_lane_mean = scenario.density_per_km * (scenario.road_length_m / 1000.0) / lanes as f64;
    let speed = scenario.speed_mps();
    for lane in 0..lanes {
        // Half the lanes run in each direction.
        let dir = if lane < lanes / 2 { 1.0 } else { -1.0 };
        let count = poisson_count(rng, per_lane_mean);
        for _ in 0..count {
            vehicles.push(Vehicle {
                lane,
                x0: rng.uniform_range(0.0, scenario.road_length_m),
                y: scenario.lane_y(lane),
                speed_mps: speed * dir,
            });
        }
    }
    NodeSet { scenario: scenario.clone(), vehicles, fixed: scenario.fixed_nodes.clone() }
}

impl NodeSet {
    pub fn len(&self) -> usize {
        self.vehicles.len() + self.fixed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Position of node `idx` (vehicles first, then fixed nodes) at time t.
    /// Vehicles wrap at the road ends; fixed nodes are stationary.
    pub fn position_at(&self, idx: usize, t: SimTime) -> Position {
        if idx < self.vehicles.len() {
            let v = &self.vehicles[idx];
            let len = self.scenario.road_length_m;
            let x = if len > 0.0 {
                (v.x0 + v.speed_mps * t.as_secs_f64()).rem_euclid(len)
            } else {
                v.x0
            };
            Position::new(x, v.y)
        } else {
            let f = &self.fixed[idx - self.vehicles.len()];
            Position::new(f.x, f.y)
        }
    }

    /// Euclidean distance between two nodes at time t, lower-clamped at 1 m
    /// for propagation queries.
    pub fn distance(&self, a: usize, b: usize, t: SimTime) -> f64 {
        let d = self.position_at(a, t).euclidean(self.position_at(b, t));
        d.max(MIN_PROPAGATION_DISTANCE_M)
    }

    /// Line-of-sight test. Highway layouts are always LOS. Urban layouts
    /// are LOS only when both endpoints share a street corridor of the
    /// Manhattan grid; anything else crosses a building block.
    pub fn is_los(&self, a: Position, b: Position) -> bool {
        match self.scenario.kind {
            ScenarioKind::HighwayFast => true,
            ScenarioKind::UrbanFast => {
                let pitch = self.scenario.block_size_m;
                let hw = self.scenario.street_halfwidth_m;
                let band = |v: f64| -> Option<i64> {
                    let k = (v / pitch).round();
                    if (v - k * pitch).abs() <= hw {
                        Some(k as i64)
                    } else {
                        None
                    }
                };
                let same_h = match (band(a.y), band(b.y)) {
                    (Some(ka), Some(kb)) => ka == kb,
                    _ => false,
                };
                let same_v = match (band(a.x), band(b.x)) {
                    (Some(ka), Some(kb)) => ka == kb,
                    _ => false,
                };
                same_h || same_v
            }
        }
    }
}
