//! Slot-level multi-cell downlink simulator.

mod channel;
mod events;
mod frame;
mod harq;
mod olla;
mod sched;
mod traffic;
mod world;

pub use channel::{
    bessel_j0, sinr_from_powers, Channel, ChannelParams, TopologyParams, UePlacement,
};
pub use events::{
    parse_event, Event, EventLog, Meta, PacketRecord, PacketStatus, SlotRecord, TxRecord,
};
pub use frame::{FramePattern, SlotKind};
pub use harq::{segment_tb, CbgFeedback, CbgState, HarqProcess, MAX_CB_BITS};
pub use olla::{olla_update, OllaMode, OllaParams};
pub use sched::{pf_select, PfCandidate};
pub use traffic::{generate_traffic, sample_trunc_gaussian, TruncGaussianParams, XrPacket};
pub use world::{simulate, RunSummary, World};

use serde::{Deserialize, Serialize};

/// Link adaptation and HARQ variant.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Baseline CQI, one HARQ bit per TB, TB OLLA.
    BaselineTb,
    /// Baseline CQI, per-CBG HARQ, TB OLLA.
    BaselineCbg,
    /// Enhanced CQI, per-CBG HARQ, per-CBG OLLA.
    #[default]
    EcqiCbg,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::BaselineTb, Scheme::BaselineCbg, Scheme::EcqiCbg];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::BaselineTb => "baseline_tb",
            Scheme::BaselineCbg => "baseline_cbg",
            Scheme::EcqiCbg => "ecqi_cbg",
        }
    }

    pub fn cbg_harq(self) -> bool {
        self != Scheme::BaselineTb
    }

    pub fn uses_ecqi(self) -> bool {
        self == Scheme::EcqiCbg
    }

    pub fn olla_mode(self) -> OllaMode {
        if self.uses_ecqi() {
            OllaMode::CbgEolla
        } else {
            OllaMode::TbOlla
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| crate::Error::domain(format!("unknown scheme {s:?}")))
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}
