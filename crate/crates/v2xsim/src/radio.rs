//! Propagation, channel arithmetic and abstract frame-error decisions.
//!
//! The PHY is abstracted: path loss gives mean received power, interference
//! is summed with adjacent-channel attenuation, and decode outcomes are
//! drawn from PER-vs-SINR curves. Link-level mechanisms (coding, diversity,
//! combining) enter as dB offsets on the SINR before the curve lookup.

use serde::{Deserialize, Serialize};

use crate::rng::RngStream;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn lin_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// Thermal noise floor in dBm for the given bandwidth and noise figure.
pub fn noise_floor_dbm(bandwidth_mhz: f64, noise_figure_db: f64) -> f64 {
    -174.0 + 10.0 * (bandwidth_mhz * 1e6).log10() + noise_figure_db
}

// ---------------------------------------------------------------------------
// Channels
// ---------------------------------------------------------------------------

/// A radio channel in the 5.9 GHz ITS band (or the adjacent U-NII space).
/// ITS channels sit on a 5 MHz raster: center(ch) = 5000 + 5*ch MHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelDef {
    pub center_mhz: f64,
    pub bandwidth_mhz: f64,
}

impl ChannelDef {
    pub fn its_10mhz(channel: u32) -> Self {
        ChannelDef { center_mhz: 5000.0 + 5.0 * channel as f64, bandwidth_mhz: 10.0 }
    }

    pub fn wifi_20mhz(channel: u32) -> Self {
        ChannelDef { center_mhz: 5000.0 + 5.0 * channel as f64, bandwidth_mhz: 20.0 }
    }

    pub fn center_ghz(&self) -> f64 {
        self.center_mhz / 1000.0
    }

    /// Frequency separation between channel edges: |center gap| minus half
    /// the summed bandwidths, floored at zero (overlapping channels).
    pub fn separation_mhz(&self, other: &ChannelDef) -> f64 {
        let gap = (self.center_mhz - other.center_mhz).abs();
        (gap - (self.bandwidth_mhz + other.bandwidth_mhz) / 2.0).max(0.0)
    }
}

/// Adjacent-channel interference attenuation, keyed by frequency
/// separation. Separations beyond the last entry are treated as infinite
/// attenuation (no interference contribution).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcirTable {
    /// (separation MHz, attenuation dB), ascending separation.
    pub entries: Vec<(f64, f64)>,
}

impl Default for AcirTable {
    fn default() -> Self {
        AcirTable { entries: vec![(0.0, 0.0), (10.0, 25.0), (20.0, 40.0)] }
    }
}

impl AcirTable {
    /// Attenuation in dB for a given separation; `None` means infinite.
    pub fn attenuation_db(&self, separation_mhz: f64) -> Option<f64> {
        let mut result = None;
        for &(sep, att) in &self.entries {
            if separation_mhz >= sep - 1e-9 {
                result = Some(att);
            } else {
                break;
            }
        }
        // Past the table's reach the leakage is taken as negligible.
        if separation_mhz > self.entries.last().map(|e| e.0).unwrap_or(0.0) + 1e-9 {
            return None;
        }
        result
    }

    /// Multiplicative factor applied to interference power.
    pub fn leakage_factor(&self, separation_mhz: f64) -> f64 {
        match self.attenuation_db(separation_mhz) {
            Some(att) => db_to_lin(-att),
            None => 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.entries.is_empty() {
            return Err("acir table must not be empty".into());
        }
        if self.entries[0].0 != 0.0 || self.entries[0].1 != 0.0 {
            return Err("acir table must start at (0 MHz, 0 dB)".into());
        }
        for w in self.entries.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err("acir separations must be strictly increasing".into());
            }
            if w[1].1 < w[0].1 {
                return Err("acir attenuation must be nondecreasing in separation".into());
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Path loss
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossParams {
    /// Effective antenna height (height above ground minus 1 m).
    pub eff_antenna_height_m: f64,
    /// Fixed excess applied when the link is non line-of-sight.
    pub nlos_excess_db: f64,
}

impl Default for PathLossParams {
    fn default() -> Self {
        PathLossParams { eff_antenna_height_m: 0.5, nlos_excess_db: 20.0 }
    }
}

/// WINNER+ B1 LOS, short-range branch (below the breakpoint distance).
pub fn b1_los_below_breakpoint_db(d_m: f64, fc_ghz: f64) -> f64 {
    22.7 * d_m.log10() + 41.0 + 20.0 * (fc_ghz / 5.0).log10()
}

/// WINNER+ B1 LOS, long-range branch (beyond the breakpoint distance).
pub fn b1_los_beyond_breakpoint_db(d_m: f64, fc_ghz: f64, h_tx_m: f64, h_rx_m: f64) -> f64 {
    40.0 * d_m.log10() + 9.45 - 17.3 * h_tx_m.log10() - 17.3 * h_rx_m.log10()
        + 2.7 * (fc_ghz / 5.0).log10()
}

/// Breakpoint distance for the two-slope model.
pub fn breakpoint_m(fc_ghz: f64, h_tx_m: f64, h_rx_m: f64) -> f64 {
    4.0 * h_tx_m * h_rx_m * fc_ghz * 1e9 / SPEED_OF_LIGHT
}

/// Mean path loss in dB at distance `d_m` (clamped to >= 1 m).
pub fn path_loss_db(d_m: f64, fc_ghz: f64, los: bool, params: &PathLossParams) -> f64 {
    let d = d_m.max(crate::scenario::MIN_PROPAGATION_DISTANCE_M);
    let h = params.eff_antenna_height_m;
    let bp = breakpoint_m(fc_ghz, h, h);
    let base = if d <= bp {
        b1_los_below_breakpoint_db(d, fc_ghz)
    } else {
        b1_los_beyond_breakpoint_db(d, fc_ghz, h, h)
    };
    if los {
        base
    } else {
        base + params.nlos_excess_db
    }
}

// ---------------------------------------------------------------------------
// Modulation and coding
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Mcs {
    Bpsk12,
    Bpsk34,
    Qpsk12,
    Qpsk34,
    Qam16_12,
    Qam16_34,
    Qam64_23,
    Qam64_34,
}

impl Mcs {
    /// Data bits per OFDM symbol in a 10 MHz 802.11 channel (48 data
    /// sub-carriers at half the 20 MHz symbol rate).
    pub fn bits_per_symbol_10mhz(self) -> u32 {
        match self {
            Mcs::Bpsk12 => 24,
            Mcs::Bpsk34 => 36,
            Mcs::Qpsk12 => 48,
            Mcs::Qpsk34 => 72,
            Mcs::Qam16_12 => 96,
            Mcs::Qam16_34 => 144,
            Mcs::Qam64_23 => 192,
            Mcs::Qam64_34 => 216,
        }
    }

    pub fn bits_per_symbol_20mhz(self) -> u32 {
        self.bits_per_symbol_10mhz() * 2
    }

    /// Bits per sub-carrier per symbol after coding (modulation order times
    /// code rate); drives sidelink resource-block capacity.
    pub fn spectral_efficiency(self) -> f64 {
        match self {
            Mcs::Bpsk12 => 0.5,
            Mcs::Bpsk34 => 0.75,
            Mcs::Qpsk12 => 1.0,
            Mcs::Qpsk34 => 1.5,
            Mcs::Qam16_12 => 2.0,
            Mcs::Qam16_34 => 3.0,
            Mcs::Qam64_23 => 4.0,
            Mcs::Qam64_34 => 4.5,
        }
    }

    /// Midpoint of the default PER ramp for this MCS.
    pub fn default_sinr_threshold_db(self) -> f64 {
        match self {
            Mcs::Bpsk12 => 2.0,
            Mcs::Bpsk34 => 4.0,
            Mcs::Qpsk12 => 5.0,
            Mcs::Qpsk34 => 8.0,
            Mcs::Qam16_12 => 11.0,
            Mcs::Qam16_34 => 15.0,
            Mcs::Qam64_23 => 20.0,
            Mcs::Qam64_34 => 22.0,
        }
    }

    pub fn parse(s: &str) -> Option<Mcs> {
        Some(match s {
            "bpsk12" => Mcs::Bpsk12,
            "bpsk34" => Mcs::Bpsk34,
            "qpsk12" => Mcs::Qpsk12,
            "qpsk34" => Mcs::Qpsk34,
            "qam16_12" => Mcs::Qam16_12,
            "qam16_34" => Mcs::Qam16_34,
            "qam64_23" => Mcs::Qam64_23,
            "qam64_34" => Mcs::Qam64_34,
            _ => return None,
        })
    }
}

/// Receiver technology classes, used to label PER curves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RatClass {
    Dsrc,
    Ngv,
    Cv2x,
    NrV2x,
    Wifi,
}

impl RatClass {
    pub fn parse(s: &str) -> Option<RatClass> {
        Some(match s {
            "dsrc" => RatClass::Dsrc,
            "ngv" => RatClass::Ngv,
            "cv2x" => RatClass::Cv2x,
            "nrv2x" => RatClass::NrV2x,
            "wifi" => RatClass::Wifi,
            _ => return None,
        })
    }
}

/// Which part of a frame a curve describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FramePortion {
    /// The data payload (or the whole frame for single-portion formats).
    Data,
    /// Control preceding the data: SCI on the sidelink, SIG fields in 802.11.
    Control,
}

// ---------------------------------------------------------------------------
// PER curves
// ---------------------------------------------------------------------------

/// Piecewise-linear PER-vs-SINR curve (interpolated in the dB domain).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerCurve {
    /// (SINR dB, PER), ascending in SINR, nonincreasing in PER.
    pub points: Vec<(f64, f64)>,
}

impl PerCurve {
    /// Threshold ramp: PER falls 1 -> 0 linearly over `span_db` centered on
    /// `center_db`.
    pub fn ramp(center_db: f64, span_db: f64) -> Self {
        PerCurve { points: vec![(center_db - span_db / 2.0, 1.0), (center_db + span_db / 2.0, 0.0)] }
    }

    /// Hard step at `threshold_db`: PER 1 below, 0 at or above.
    pub fn step(threshold_db: f64) -> Self {
        PerCurve { points: vec![(threshold_db - 1e-9, 1.0), (threshold_db, 0.0)] }
    }

    pub fn per(&self, sinr_db: f64) -> f64 {
        let pts = &self.points;
        if pts.is_empty() {
            return 1.0;
        }
        if sinr_db <= pts[0].0 {
            return pts[0].1;
        }
        if sinr_db >= pts[pts.len() - 1].0 {
            return pts[pts.len() - 1].1;
        }
        for w in pts.windows(2) {
            let (x0, y0) = w[0];
            let (x1, y1) = w[1];
            if sinr_db <= x1 {
                let f = (sinr_db - x0) / (x1 - x0);
                return y0 + f * (y1 - y0);
            }
        }
        pts[pts.len() - 1].1
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.points.is_empty() {
            return Err("per curve needs at least one point".into());
        }
        for &(_, p) in &self.points {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("PER {p} outside [0,1]"));
            }
        }
        for w in self.points.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err("per curve SINR points must be strictly increasing".into());
            }
            if w[1].1 > w[0].1 {
                return Err("per curve must be nonincreasing in PER".into());
            }
        }
        Ok(())
    }
}

/// Curve registry keyed by (RAT, MCS, portion), with threshold-ramp
/// defaults for any label that was not overridden.
#[derive(Debug, Clone, Default)]
pub struct PerTable {
    overrides: std::collections::BTreeMap<(RatClass, Mcs, FramePortion), PerCurve>,
    /// Ramp width for default curves.
    pub default_span_db: f64,
}

impl PerTable {
    pub fn new() -> Self {
        PerTable { overrides: Default::default(), default_span_db: 4.0 }
    }

    pub fn set(&mut self, rat: RatClass, mcs: Mcs, portion: FramePortion, curve: PerCurve) {
        self.overrides.insert((rat, mcs, portion), curve);
    }

    pub fn curve(&self, rat: RatClass, mcs: Mcs, portion: FramePortion) -> PerCurve {
        if let Some(c) = self.overrides.get(&(rat, mcs, portion)) {
            return c.clone();
        }
        match portion {
            FramePortion::Data => PerCurve::ramp(mcs.default_sinr_threshold_db(), self.default_span_db),
            // Control fields are coded far more robustly than data.
            FramePortion::Control => PerCurve::ramp(0.0, self.default_span_db),
        }
    }

    /// Load override rows from CSV text: `rat,mcs,sinr_db,per` per row,
    /// multiple rows per curve. A leading header row is allowed.
    pub fn load_csv(&mut self, text: &str) -> Result<(), String> {
        let mut staged: std::collections::BTreeMap<(RatClass, Mcs), Vec<(f64, f64)>> =
            Default::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 4 {
                return Err(format!("line {}: expected 4 columns, got {}", lineno + 1, cols.len()));
            }
            if lineno == 0 && cols[0].eq_ignore_ascii_case("rat") {
                continue;
            }
            let rat = RatClass::parse(cols[0])
                .ok_or_else(|| format!("line {}: unknown rat '{}'", lineno + 1, cols[0]))?;
            let mcs = Mcs::parse(cols[1])
                .ok_or_else(|| format!("line {}: unknown mcs '{}'", lineno + 1, cols[1]))?;
            let sinr: f64 = cols[2]
                .parse()
                .map_err(|_| format!("line {}: bad sinr '{}'", lineno + 1, cols[2]))?;
            let per: f64 =
                cols[3].parse().map_err(|_| format!("line {}: bad per '{}'", lineno + 1, cols[3]))?;
            staged.entry((rat, mcs)).or_default().push((sinr, per));
        }
        for ((rat, mcs), mut points) in staged {
            points.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let curve = PerCurve { points };
            curve.validate().map_err(|e| format!("curve ({rat:?},{mcs:?}): {e}"))?;
            self.set(rat, mcs, FramePortion::Data, curve);
        }
        Ok(())
    }
}

/// Decode decision: success with probability 1 - PER(sinr + gain), drawn
/// from the receiver's stream.
pub fn decide_reception(sinr_db: f64, curve: &PerCurve, gain_db: f64, rng: &mut RngStream) -> bool {
    let per = curve.per(sinr_db + gain_db);
    if per <= 0.0 {
        return true;
    }
    if per >= 1.0 {
        return false;
    }
    !rng.bernoulli(per)
}
