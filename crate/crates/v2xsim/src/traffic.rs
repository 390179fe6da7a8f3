//! Application packet generation: periodic basic-safety messages and
//! aperiodic advanced-application traffic.

use serde::{Deserialize, Serialize};

use crate::engine::NodeId;
use crate::rng::RngStream;
use crate::time::{SimDuration, SimTime};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CommType {
    Broadcast,
    Groupcast { group: u32 },
    Unicast { peer: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TrafficKind {
    /// Fixed-rate, fixed-size stream (basic safety messages).
    Periodic { rate_hz: f64, size_bytes: u32 },
    /// Base offset plus exponential inter-arrival, uniform size range.
    Aperiodic { base_ms: f64, exp_mean_ms: f64, size_min: u32, size_max: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrafficProfile {
    pub kind: TrafficKind,
    pub priority: u8,
    pub comm_type: CommType,
    pub latency_budget_ms: f64,
}

impl TrafficProfile {
    /// 10 Hz, 300-byte broadcast safety stream with a 100 ms budget.
    pub fn bsm() -> Self {
        TrafficProfile {
            kind: TrafficKind::Periodic { rate_hz: 10.0, size_bytes: 300 },
            priority: 3,
            comm_type: CommType::Broadcast,
            latency_budget_ms: 100.0,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match self.kind {
            TrafficKind::Periodic { rate_hz, size_bytes } => {
                if rate_hz <= 0.0 {
                    return Err("periodic rate must be > 0".into());
                }
                check_size(size_bytes)?;
            }
            TrafficKind::Aperiodic { base_ms, exp_mean_ms, size_min, size_max } => {
                if base_ms < 0.0 || exp_mean_ms <= 0.0 {
                    return Err("aperiodic timing parameters must be positive".into());
                }
                if size_min > size_max {
                    return Err("size range inverted".into());
                }
                check_size(size_min)?;
                check_size(size_max)?;
            }
        }
        if self.latency_budget_ms <= 0.0 {
            return Err("latency budget must be > 0".into());
        }
        Ok(())
    }
}

fn check_size(bytes: u32) -> Result<(), String> {
    if !(50..=12_000).contains(&bytes) {
        return Err(format!("payload size {bytes} outside [50, 12000] bytes"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PacketId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Packet {
    pub id: PacketId,
    pub origin: NodeId,
    pub gen_time: SimTime,
    pub size_bytes: u32,
    pub priority: u8,
    pub comm_type: CommType,
    pub latency_budget: SimDuration,
}

/// Time of the first arrival for a profile. Periodic streams start with a
/// uniform jitter over one period so that nodes are phase-decorrelated.
pub fn first_arrival(profile: &TrafficProfile, rng: &mut RngStream, t0: SimTime) -> SimTime {
    match profile.kind {
        TrafficKind::Periodic { rate_hz, .. } => {
            let period_ns = (1e9 / rate_hz).round();
            t0 + SimDuration::nanos(rng.uniform_range(0.0, period_ns) as u64)
        }
        TrafficKind::Aperiodic { .. } => next_arrival(profile, rng, t0),
    }
}

/// Time of the arrival following one at `t`.
pub fn next_arrival(profile: &TrafficProfile, rng: &mut RngStream, t: SimTime) -> SimTime {
    match profile.kind {
        TrafficKind::Periodic { rate_hz, .. } => {
            t + SimDuration::nanos((1e9 / rate_hz).round() as u64)
        }
        TrafficKind::Aperiodic { base_ms, exp_mean_ms, .. } => {
            let gap_ms = base_ms + rng.exponential(exp_mean_ms);
            t + SimDuration::nanos((gap_ms * 1e6).round() as u64)
        }
    }
}

/// Payload size of the next packet.
pub fn packet_size(profile: &TrafficProfile, rng: &mut RngStream) -> u32 {
    match profile.kind {
        TrafficKind::Periodic { size_bytes, .. } => size_bytes,
        TrafficKind::Aperiodic { size_min, size_max, .. } => {
            rng.uniform_int(size_min as u64, size_max as u64) as u32
        }
    }
}
