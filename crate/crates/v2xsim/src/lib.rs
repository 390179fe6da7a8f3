//! Discrete-event simulator for 5.9 GHz V2X radio access technologies
//! (802.11p, 802.11bd, C-V2X sidelink mode 4, NR V2X sidelink mode 2) and
//! their coexistence with Wi-Fi.

pub mod config;
pub mod engine;
pub mod medium;
pub mod metrics;
pub mod radio;
pub mod rng;
pub mod scenario;
pub mod time;
pub mod traffic;
pub mod world;

pub mod mac {
    pub mod csma;
    pub mod dsrc;
    pub mod ngv;
    pub mod wifi;
}

pub mod sidelink {
    pub mod cv2x;
    pub mod grid;
    pub mod nrv2x;
}

pub use engine::NodeId;
pub use time::{SimDuration, SimTime};
