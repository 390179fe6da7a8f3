//! Shared radio medium: on-air transmissions, interference accounting,
//! clear-channel assessment and 802.11-style capture.
//!
//! A transmission contributes interference only on channels with finite
//! adjacent-channel attenuation and only during its [start, end) span.
//! Sidelink transmissions carry a sub-channel mask; resources of the same
//! carrier with disjoint masks are orthogonal.

use std::collections::BTreeMap;

use crate::engine::NodeId;
use crate::radio::{
    db_to_lin, lin_to_db, noise_floor_dbm, path_loss_db, AcirTable, ChannelDef, Mcs, PathLossParams,
    RatClass,
};
use crate::scenario::{NodeSet, Position};
use crate::sidelink::grid::SciRecord;
use crate::time::{SimDuration, SimTime};
use crate::traffic::Packet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TxId(pub u64);

/// PHY families; frames are decodable only within their own family on a
/// co-located channel. Everything else is energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhyFamily {
    /// 10 MHz 802.11 OFDM (802.11p and 802.11bd share preambles).
    Ofdm10,
    /// 20 MHz Wi-Fi OFDM.
    Ofdm20,
    /// LTE sidelink (C-V2X).
    SidelinkLte,
    /// NR sidelink.
    SidelinkNr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NgvFormat {
    Legacy11p,
    InteropAppend,
    ParityAppend,
    NgvOnly,
}

#[derive(Debug, Clone)]
pub struct NgvFrameInfo {
    pub format: NgvFormat,
    pub legacy_mcs: Mcs,
    pub ngv_mcs: Option<Mcs>,
    /// Duration of the legacy-decodable portion (preamble + SIG + 11p data).
    pub legacy_duration: SimDuration,
    /// Retransmission copy k of K (1-based).
    pub copy_index: u8,
    pub copies: u8,
    /// Capability mark in the MAC header identifying an NGV-origin frame.
    pub origin_ngv_marked: bool,
    pub dcm: bool,
}

#[derive(Debug, Clone)]
pub struct SidelinkFrameInfo {
    pub rat: RatClass,
    pub mcs: Mcs,
    pub sci: SciRecord,
    /// PSCCH span when control and data are time-multiplexed (NR);
    /// zero for frequency-multiplexed control (C-V2X).
    pub control_duration: SimDuration,
    pub copy_index: u8,
    pub copies: u8,
    /// HARQ process id when feedback is enabled.
    pub harq_process: Option<u64>,
}

#[derive(Debug, Clone)]
pub enum FrameKind {
    Dsrc { mcs: Mcs },
    Ngv(NgvFrameInfo),
    Sidelink(SidelinkFrameInfo),
    /// PSFCH ACK/NACK addressed to the HARQ transmitter.
    NrFeedback { to: NodeId, process: u64, ack: bool },
    /// Pre-emption indication claiming a reserved resource.
    NrPreemption { slot: u64, subchannel: u8, victim: NodeId, priority: u8 },
    /// Mode 2(d) grant map broadcast by the scheduling UE.
    NrGrant { period_start_slot: u64, grants: Vec<(NodeId, u64, u8)> },
    WifiData { to: NodeId, mpdu_count: u32 },
    WifiAck { to: NodeId },
}

#[derive(Debug, Clone)]
pub struct FrameDescriptor {
    pub kind: FrameKind,
    pub family: PhyFamily,
    pub packet: Option<Packet>,
}

/// An on-air (or recently ended) emission.
#[derive(Debug, Clone)]
pub struct TransmissionRecord {
    pub id: TxId,
    pub tx_node: NodeId,
    pub channel: ChannelDef,
    /// Bitmask of occupied sub-channels within `channel`; 0 = whole channel.
    pub subchannel_mask: u8,
    pub power_dbm: f64,
    pub start: SimTime,
    pub end: SimTime,
    pub frame: FrameDescriptor,
    /// Transmitter position frozen at start.
    pub tx_pos: Position,
    /// Preamble outcome per capture receiver, fixed at start.
    pub fates: Vec<(NodeId, PreambleFate)>,
}

/// What happened at a capture (802.11-family) receiver when the frame began.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PreambleFate {
    /// Receiver synchronized to this frame.
    Locked,
    /// Receiver was locked onto an earlier frame; this one is interference.
    Blocked,
    /// Preamble SINR too low to synchronize.
    PreambleFail,
    /// Receiver was transmitting.
    HalfDuplex,
}

#[derive(Debug, Clone, Copy)]
struct CaptureRx {
    node: NodeId,
    family: PhyFamily,
    channel: ChannelDef,
}

#[derive(Debug, Clone, Copy)]
struct Lock {
    tx: TxId,
    until: SimTime,
}

#[derive(Debug, Clone)]
struct Listener {
    node: NodeId,
    channel: ChannelDef,
    threshold_dbm: f64,
    /// (tx, linear mW at this listener), only entries above a floor.
    contributions: Vec<(TxId, f64)>,
    busy: bool,
}

/// Radio parameters shared by interference queries.
#[derive(Debug, Clone)]
pub struct MediumParams {
    pub acir: AcirTable,
    pub path_loss: PathLossParams,
    pub noise_figure_db: f64,
    /// Instantaneous SINR needed to synchronize to a preamble.
    pub preamble_threshold_db: f64,
    /// Transmit power bounds enforced on every record.
    pub power_bounds_dbm: (f64, f64),
}

impl Default for MediumParams {
    fn default() -> Self {
        MediumParams {
            acir: AcirTable::default(),
            path_loss: PathLossParams::default(),
            noise_figure_db: 9.0,
            preamble_threshold_db: 0.0,
            power_bounds_dbm: (-10.0, 33.0),
        }
    }
}

/// A CCA edge to deliver to a MAC state machine.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CcaEdge {
    pub node: NodeId,
    pub busy: bool,
}

pub struct Medium {
    pub params: MediumParams,
    records: Vec<TransmissionRecord>,
    listeners: Vec<Listener>,
    capture_rxs: Vec<CaptureRx>,
    locks: BTreeMap<NodeId, Lock>,
    tx_counter: u64,
    /// Count of in-flight transmissions per node.
    transmitting: BTreeMap<NodeId, u32>,
}

/// How long ended records are retained for overlap queries. Longer than any
/// frame plus the longest A-MPDU burst.
const RETENTION: SimDuration = SimDuration::millis(24);

/// Contributions below this are dropped from CCA sums (thermal floor is
/// around -95 dBm; -130 dBm is far below any threshold in use).
const CCA_FLOOR_DBM: f64 = -130.0;

impl Medium {
    pub fn new(params: MediumParams) -> Self {
        Medium {
            params,
            records: Vec::new(),
            listeners: Vec::new(),
            capture_rxs: Vec::new(),
            locks: BTreeMap::new(),
            tx_counter: 0,
            transmitting: BTreeMap::new(),
        }
    }

    /// Register a CSMA-style clear-channel listener.
    pub fn add_listener(&mut self, node: NodeId, channel: ChannelDef, threshold_dbm: f64) {
        self.listeners.push(Listener { node, channel, threshold_dbm, contributions: Vec::new(), busy: false });
    }

    pub fn set_listener_threshold(&mut self, node: NodeId, threshold_dbm: f64) {
        for l in &mut self.listeners {
            if l.node == node {
                l.threshold_dbm = threshold_dbm;
            }
        }
    }

    /// Register an 802.11-family receiver that locks onto preambles.
    pub fn add_capture_rx(&mut self, node: NodeId, family: PhyFamily, channel: ChannelDef) {
        self.capture_rxs.push(CaptureRx { node, family, channel });
    }

    pub fn is_transmitting(&self, node: NodeId) -> bool {
        self.transmitting.get(&node).copied().unwrap_or(0) > 0
    }

    /// Did `node` transmit at any point during the window?
    pub fn transmitted_during(&self, node: NodeId, start: SimTime, end: SimTime) -> bool {
        self.records.iter().any(|r| r.tx_node == node && r.start < end && r.end > start)
    }

    fn rx_power_dbm(
        &self,
        tx: &TransmissionRecord,
        rx_pos: Position,
        nodes: &NodeSet,
    ) -> f64 {
        let los = nodes.is_los(tx.tx_pos, rx_pos);
        let d = tx.tx_pos.euclidean(rx_pos);
        tx.power_dbm - path_loss_db(d, tx.channel.center_ghz(), los, &self.params.path_loss)
    }

    /// Leakage factor from an interferer onto a victim resource.
    fn coupling(
        &self,
        victim_channel: &ChannelDef,
        victim_mask: u8,
        tx: &TransmissionRecord,
    ) -> f64 {
        let same_carrier = (tx.channel.center_mhz - victim_channel.center_mhz).abs() < 1e-6
            && (tx.channel.bandwidth_mhz - victim_channel.bandwidth_mhz).abs() < 1e-6;
        if same_carrier && victim_mask != 0 && tx.subchannel_mask != 0 {
            // Orthogonal sub-channels of the same carrier do not interfere.
            if victim_mask & tx.subchannel_mask == 0 {
                return 0.0;
            }
            return 1.0;
        }
        self.params.acir.leakage_factor(victim_channel.separation_mhz(&tx.channel))
    }

    /// Start a transmission. Returns the id plus any CCA edges caused by it.
    pub fn start_transmission(
        &mut self,
        nodes: &NodeSet,
        now: SimTime,
        tx_node: NodeId,
        channel: ChannelDef,
        subchannel_mask: u8,
        power_dbm: f64,
        duration: SimDuration,
        frame: FrameDescriptor,
    ) -> (TxId, Vec<CcaEdge>) {
        let (lo, hi) = self.params.power_bounds_dbm;
        assert!(
            power_dbm >= lo && power_dbm <= hi,
            "tx power {power_dbm} dBm outside configured bounds [{lo}, {hi}]"
        );
        assert!(duration > SimDuration::ZERO, "transmissions must have positive duration");
        self.prune(now);
        let id = TxId(self.tx_counter);
        self.tx_counter += 1;
        let tx_pos = nodes.position_at(tx_node.index(), now);
        let mut record = TransmissionRecord {
            id,
            tx_node,
            channel,
            subchannel_mask,
            power_dbm,
            start: now,
            end: now + duration,
            frame,
            tx_pos,
            fates: Vec::new(),
        };
        *self.transmitting.entry(tx_node).or_insert(0) += 1;

        // Capture fates for same-family receivers, against the medium as it
        // stands (the new frame itself excluded).
        let mut fates = Vec::new();
        for cap in &self.capture_rxs {
            if cap.node == tx_node || cap.family != record.frame.family {
                continue;
            }
            if (cap.channel.center_mhz - channel.center_mhz).abs() > 1e-6 {
                continue;
            }
            let fate = if self.is_transmitting(cap.node) {
                PreambleFate::HalfDuplex
            } else if self.locks.get(&cap.node).map(|l| l.until > now).unwrap_or(false) {
                PreambleFate::Blocked
            } else {
                let rx_pos = nodes.position_at(cap.node.index(), now);
                let sinr = self.instant_sinr_db(nodes, now, &record, rx_pos);
                if sinr >= self.params.preamble_threshold_db {
                    self.locks.insert(cap.node, Lock { tx: id, until: record.end });
                    PreambleFate::Locked
                } else {
                    PreambleFate::PreambleFail
                }
            };
            fates.push((cap.node, fate));
        }
        record.fates = fates;

        // CCA listener updates.
        let mut edges = Vec::new();
        for li in 0..self.listeners.len() {
            let l = &self.listeners[li];
            if l.node == tx_node {
                continue;
            }
            let factor = self.coupling(&l.channel, 0, &record);
            if factor <= 0.0 {
                continue;
            }
            let rx_pos = nodes.position_at(l.node.index(), now);
            let p_dbm = self.rx_power_dbm(&record, rx_pos, nodes) + lin_to_db(factor);
            if p_dbm < CCA_FLOOR_DBM {
                continue;
            }
            let l = &mut self.listeners[li];
            l.contributions.push((id, db_to_lin(p_dbm)));
            let sum: f64 = l.contributions.iter().map(|c| c.1).sum();
            let busy = lin_to_db(sum) >= l.threshold_dbm;
            if busy != l.busy {
                l.busy = busy;
                edges.push(CcaEdge { node: l.node, busy });
            }
        }

        self.records.push(record);
        (id, edges)
    }

    /// Close out a transmission at its end time. Returns the finished
    /// record and any CCA edges caused by its disappearance.
    pub fn end_transmission(&mut self, now: SimTime, id: TxId) -> (TransmissionRecord, Vec<CcaEdge>) {
        let record = self
            .records
            .iter()
            .find(|r| r.id == id)
            .cloned()
            .expect("ending unknown transmission");
        debug_assert_eq!(record.end, now, "transmission ended at the wrong time");
        if let Some(n) = self.transmitting.get_mut(&record.tx_node) {
            *n = n.saturating_sub(1);
        }
        if let Some(lock) = self.locks.get(&record.tx_node).copied() {
            let _ = lock;
        }
        // Drop locks held on this frame.
        self.locks.retain(|_, l| l.tx != id || l.until > now);

        let mut edges = Vec::new();
        for l in &mut self.listeners {
            let before = l.contributions.len();
            l.contributions.retain(|c| c.0 != id);
            if l.contributions.len() != before {
                let sum: f64 = l.contributions.iter().map(|c| c.1).sum();
                let busy = !l.contributions.is_empty() && lin_to_db(sum) >= l.threshold_dbm;
                if busy != l.busy {
                    l.busy = busy;
                    edges.push(CcaEdge { node: l.node, busy });
                }
            }
        }
        (record, edges)
    }

    fn prune(&mut self, now: SimTime) {
        let cutoff = SimTime(now.as_nanos().saturating_sub(RETENTION.as_nanos()));
        self.records.retain(|r| r.end >= cutoff);
    }

    pub fn record(&self, id: TxId) -> Option<&TransmissionRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    /// Receiver lock state (for tests and receiver-availability audits).
    pub fn locked_tx(&self, node: NodeId, now: SimTime) -> Option<TxId> {
        self.locks.get(&node).filter(|l| l.until > now).map(|l| l.tx)
    }

    /// Instantaneous SINR of `wanted` at a receiver position, using the
    /// transmissions on air at time `t`.
    pub fn instant_sinr_db(
        &self,
        nodes: &NodeSet,
        t: SimTime,
        wanted: &TransmissionRecord,
        rx_pos: Position,
    ) -> f64 {
        let s_dbm = self.rx_power_dbm(wanted, rx_pos, nodes);
        let mut interference = 0.0;
        for r in &self.records {
            if r.id == wanted.id || r.tx_node == wanted.tx_node {
                continue;
            }
            if !(r.start <= t && r.end > t) {
                continue;
            }
            let factor = self.coupling(&wanted.channel, wanted.subchannel_mask, r);
            if factor <= 0.0 {
                continue;
            }
            interference += db_to_lin(self.rx_power_dbm(r, rx_pos, nodes)) * factor;
        }
        let noise = db_to_lin(noise_floor_dbm(wanted.channel.bandwidth_mhz, self.params.noise_figure_db));
        s_dbm - lin_to_db(noise + interference)
    }

    /// Time-averaged SINR of `wanted` over a window, weighting each
    /// interferer by its overlap with the window.
    pub fn windowed_sinr_db(
        &self,
        nodes: &NodeSet,
        wanted: &TransmissionRecord,
        rx_pos: Position,
        window_start: SimTime,
        window_end: SimTime,
    ) -> f64 {
        debug_assert!(window_end > window_start);
        let s_dbm = self.rx_power_dbm(wanted, rx_pos, nodes);
        let window_ns = (window_end.as_nanos() - window_start.as_nanos()) as f64;
        let mut interference = 0.0;
        for r in &self.records {
            if r.id == wanted.id || r.tx_node == wanted.tx_node {
                continue;
            }
            let ov_start = r.start.max(window_start);
            let ov_end = r.end.min(window_end);
            if ov_end <= ov_start {
                continue;
            }
            let factor = self.coupling(&wanted.channel, wanted.subchannel_mask, r);
            if factor <= 0.0 {
                continue;
            }
            let frac = (ov_end.as_nanos() - ov_start.as_nanos()) as f64 / window_ns;
            interference += db_to_lin(self.rx_power_dbm(r, rx_pos, nodes)) * factor * frac;
        }
        let noise = db_to_lin(noise_floor_dbm(wanted.channel.bandwidth_mhz, self.params.noise_figure_db));
        s_dbm - lin_to_db(noise + interference)
    }

    /// Mean received power of a record at a position (for sensing).
    pub fn sensed_power_dbm(&self, nodes: &NodeSet, r: &TransmissionRecord, rx_pos: Position) -> f64 {
        self.rx_power_dbm(r, rx_pos, nodes)
    }

    /// Aggregate received power on `channel` at `pos`, ACIR-weighted, at
    /// time t. Excludes `exclude`'s own transmissions.
    pub fn channel_power_dbm(
        &self,
        nodes: &NodeSet,
        t: SimTime,
        pos: Position,
        channel: &ChannelDef,
        exclude: NodeId,
    ) -> f64 {
        let mut sum = 0.0;
        for r in &self.records {
            if r.tx_node == exclude || !(r.start <= t && r.end > t) {
                continue;
            }
            let factor = self.coupling(channel, 0, r);
            if factor <= 0.0 {
                continue;
            }
            sum += db_to_lin(self.rx_power_dbm(r, pos, nodes)) * factor;
        }
        if sum <= 0.0 {
            f64::NEG_INFINITY
        } else {
            lin_to_db(sum)
        }
    }

    /// Clear-channel assessment at an arbitrary node: busy iff the summed
    /// received power meets the threshold (boundary inclusive).
    pub fn cca_busy(
        &self,
        nodes: &NodeSet,
        t: SimTime,
        node: NodeId,
        channel: &ChannelDef,
        threshold_dbm: f64,
    ) -> bool {
        let pos = nodes.position_at(node.index(), t);
        self.channel_power_dbm(nodes, t, pos, channel, node) >= threshold_dbm
    }

    /// Cached busy state of a registered listener.
    pub fn listener_busy(&self, node: NodeId) -> bool {
        self.listeners.iter().any(|l| l.node == node && l.busy)
    }

    /// All records overlapping a window (active and recently ended).
    pub fn overlapping(&self, start: SimTime, end: SimTime) -> impl Iterator<Item = &TransmissionRecord> {
        self.records.iter().filter(move |r| r.start < end && r.end > start)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{build, FixedNode, FixedRole, Scenario};

    fn probe_nodes(xs: &[f64]) -> NodeSet {
        let mut sc = Scenario::highway_fast(10_000.0, 0.0);
        sc.fixed_nodes =
            xs.iter().map(|&x| FixedNode { role: FixedRole::ProbeRx, x, y: 0.0 }).collect();
        let mut rng = crate::rng::RngStream::new(1, NodeId(0), crate::rng::StreamPurpose::Placement);
        build(&sc, &mut rng)
    }

    fn frame() -> FrameDescriptor {
        FrameDescriptor { kind: FrameKind::Dsrc { mcs: Mcs::Qpsk12 }, family: PhyFamily::Ofdm10, packet: None }
    }

    #[test]
    fn no_transmissions_means_idle() {
        let nodes = probe_nodes(&[0.0, 100.0]);
        let medium = Medium::new(MediumParams::default());
        assert!(!medium.cca_busy(&nodes, SimTime::ZERO, NodeId(0), &ChannelDef::its_10mhz(172), -85.0));
    }

    #[test]
    fn cca_boundary_is_inclusive_and_monotone_in_threshold() {
        let nodes = probe_nodes(&[0.0, 100.0]);
        let mut medium = Medium::new(MediumParams::default());
        let ch = ChannelDef::its_10mhz(172);
        let (_, _) = medium.start_transmission(
            &nodes,
            SimTime::ZERO,
            NodeId(0),
            ch,
            0,
            23.0,
            SimDuration::millis(1),
            frame(),
        );
        let t = SimTime(10);
        let pos = nodes.position_at(1, t);
        let p = medium.channel_power_dbm(&nodes, t, pos, &ch, NodeId(1));
        // Exactly at the received power the channel reads busy.
        assert!(medium.cca_busy(&nodes, t, NodeId(1), &ch, p));
        assert!(medium.cca_busy(&nodes, t, NodeId(1), &ch, p - 5.0));
        assert!(!medium.cca_busy(&nodes, t, NodeId(1), &ch, p + 0.1));
        // Lowering the threshold never turns busy into idle.
        assert!(medium.cca_busy(&nodes, t, NodeId(1), &ch, -82.0) || !medium.cca_busy(&nodes, t, NodeId(1), &ch, -65.0));
    }

    #[test]
    fn equal_power_interferer_drives_sinr_to_zero() {
        let nodes = probe_nodes(&[0.0, 200.0, 100.0]);
        let mut medium = Medium::new(MediumParams::default());
        let ch = ChannelDef::its_10mhz(172);
        let (id, _) = medium.start_transmission(
            &nodes, SimTime::ZERO, NodeId(0), ch, 0, 23.0, SimDuration::millis(1), frame(),
        );
        let (_, _) = medium.start_transmission(
            &nodes, SimTime::ZERO, NodeId(1), ch, 0, 23.0, SimDuration::millis(1), frame(),
        );
        let wanted = medium.record(id).unwrap().clone();
        let rx_pos = nodes.position_at(2, SimTime::ZERO);
        // Both transmitters are 100 m from the receiver at equal power, and
        // noise is negligible next to the interference.
        let sinr = medium.instant_sinr_db(&nodes, SimTime(10), &wanted, rx_pos);
        assert!(sinr.abs() < 0.1, "expected ~0 dB, got {sinr}");
    }

    #[test]
    fn infinite_acir_leaves_sinr_interference_free() {
        let nodes = probe_nodes(&[0.0, 200.0, 100.0]);
        let mut medium = Medium::new(MediumParams::default());
        let ch = ChannelDef::its_10mhz(172);
        let far = ChannelDef::its_10mhz(184); // 50 MHz separation: beyond the table
        let (id, _) = medium.start_transmission(
            &nodes, SimTime::ZERO, NodeId(0), ch, 0, 23.0, SimDuration::millis(1), frame(),
        );
        let clean = {
            let wanted = medium.record(id).unwrap().clone();
            medium.instant_sinr_db(&nodes, SimTime(10), &wanted, nodes.position_at(2, SimTime::ZERO))
        };
        medium.start_transmission(
            &nodes, SimTime::ZERO, NodeId(1), far, 0, 23.0, SimDuration::millis(1), frame(),
        );
        let with_far = {
            let wanted = medium.record(id).unwrap().clone();
            medium.instant_sinr_db(&nodes, SimTime(10), &wanted, nodes.position_at(2, SimTime::ZERO))
        };
        assert_eq!(clean, with_far);
    }

    #[test]
    fn adding_an_interferer_never_raises_sinr() {
        let nodes = probe_nodes(&[0.0, 350.0, 100.0]);
        let mut medium = Medium::new(MediumParams::default());
        let ch = ChannelDef::its_10mhz(172);
        let adj = ChannelDef::its_10mhz(174);
        let (id, _) = medium.start_transmission(
            &nodes, SimTime::ZERO, NodeId(0), ch, 0, 23.0, SimDuration::millis(1), frame(),
        );
        let before = {
            let wanted = medium.record(id).unwrap().clone();
            medium.instant_sinr_db(&nodes, SimTime(10), &wanted, nodes.position_at(2, SimTime::ZERO))
        };
        medium.start_transmission(
            &nodes, SimTime::ZERO, NodeId(1), adj, 0, 23.0, SimDuration::millis(1), frame(),
        );
        let after = {
            let wanted = medium.record(id).unwrap().clone();
            medium.instant_sinr_db(&nodes, SimTime(10), &wanted, nodes.position_at(2, SimTime::ZERO))
        };
        assert!(after <= before);
    }

    #[test]
    fn windowed_interference_weights_by_overlap() {
        let nodes = probe_nodes(&[0.0, 200.0, 100.0]);
        let mut medium = Medium::new(MediumParams::default());
        let ch = ChannelDef::its_10mhz(172);
        let (id, _) = medium.start_transmission(
            &nodes, SimTime::ZERO, NodeId(0), ch, 0, 23.0, SimDuration::millis(2), frame(),
        );
        // Interferer covers only a quarter of the wanted frame.
        medium.start_transmission(
            &nodes, SimTime::ZERO, NodeId(1), ch, 0, 23.0, SimDuration::micros(500), frame(),
        );
        let wanted = medium.record(id).unwrap().clone();
        let rx = nodes.position_at(2, SimTime::ZERO);
        let avg = medium.windowed_sinr_db(&nodes, &wanted, rx, wanted.start, wanted.end);
        // Equal powers, quarter overlap: SINR ~= -10*log10(0.25) = 6.02 dB.
        assert!((avg - 6.02).abs() < 0.15, "got {avg}");
    }

    #[test]
    fn orthogonal_subchannels_do_not_interfere() {
        let nodes = probe_nodes(&[0.0, 200.0, 100.0]);
        let mut medium = Medium::new(MediumParams::default());
        let ch = ChannelDef::its_10mhz(172);
        let mk_frame = |mask: u8| FrameDescriptor {
            kind: FrameKind::Dsrc { mcs: Mcs::Qpsk12 },
            family: PhyFamily::SidelinkLte,
            packet: None,
        };
        let (id, _) = medium.start_transmission(
            &nodes, SimTime::ZERO, NodeId(0), ch, 0b01, 23.0, SimDuration::millis(1), mk_frame(0b01),
        );
        medium.start_transmission(
            &nodes, SimTime::ZERO, NodeId(1), ch, 0b10, 23.0, SimDuration::millis(1), mk_frame(0b10),
        );
        let wanted = medium.record(id).unwrap().clone();
        let rx = nodes.position_at(2, SimTime::ZERO);
        let sinr = medium.windowed_sinr_db(&nodes, &wanted, rx, wanted.start, wanted.end);
        // Only noise remains: 23 - PL(100) - (-95).
        let expected = 23.0 - path_loss_db(100.0, ch.center_ghz(), true, &PathLossParams::default()) + 95.0;
        assert!((sinr - expected).abs() < 0.01, "sinr {sinr} expected {expected}");
    }

    #[test]
    fn capture_locks_first_decodable_preamble() {
        let nodes = probe_nodes(&[0.0, 60.0, 30.0]);
        let mut medium = Medium::new(MediumParams::default());
        let ch = ChannelDef::its_10mhz(172);
        medium.add_capture_rx(NodeId(2), PhyFamily::Ofdm10, ch);
        let (a, _) = medium.start_transmission(
            &nodes, SimTime::ZERO, NodeId(0), ch, 0, 23.0, SimDuration::micros(500), frame(),
        );
        assert_eq!(medium.locked_tx(NodeId(2), SimTime(1)), Some(a));
        let (b, _) = medium.start_transmission(
            &nodes, SimTime(100_000), NodeId(1), ch, 0, 23.0, SimDuration::micros(500), frame(),
        );
        // Still locked to the first frame; the second is marked blocked.
        assert_eq!(medium.locked_tx(NodeId(2), SimTime(100_001)), Some(a));
        let rec_b = medium.record(b).unwrap();
        assert_eq!(rec_b.fates, vec![(NodeId(2), PreambleFate::Blocked)]);
    }

    #[test]
    fn half_duplex_receiver_cannot_lock() {
        let nodes = probe_nodes(&[0.0, 60.0]);
        let mut medium = Medium::new(MediumParams::default());
        let ch = ChannelDef::its_10mhz(172);
        medium.add_capture_rx(NodeId(1), PhyFamily::Ofdm10, ch);
        medium.start_transmission(
            &nodes, SimTime::ZERO, NodeId(1), ch, 0, 23.0, SimDuration::millis(1), frame(),
        );
        let (b, _) = medium.start_transmission(
            &nodes, SimTime(10_000), NodeId(0), ch, 0, 23.0, SimDuration::micros(500), frame(),
        );
        let rec = medium.record(b).unwrap();
        assert_eq!(rec.fates, vec![(NodeId(1), PreambleFate::HalfDuplex)]);
    }
}
