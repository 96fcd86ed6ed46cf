//! TB segmentation and HARQ process state.

use crate::link::CbgLayout;
use crate::{Error, Result};

/// Largest code block in bits.
pub const MAX_CB_BITS: u64 = 8448;

/// `C = ceil(tb / 8448)`, `M = min(F, C)` and the CB-to-CBG grouping.
pub fn segment_tb(tb_size_bits: u64, max_cbgs: usize) -> Result<(usize, usize, CbgLayout)> {
    if tb_size_bits == 0 {
        return Err(Error::domain("empty transport block"));
    }
    if max_cbgs == 0 {
        return Err(Error::domain("at least one CBG is needed"));
    }
    let c = tb_size_bits.div_ceil(MAX_CB_BITS) as usize;
    let m = max_cbgs.min(c);
    Ok((c, m, CbgLayout::new(c, m)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CbgState {
    Pending,
    Acked,
    Nacked,
}

/// Per-CBG ACK/NACK bits for one HARQ attempt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CbgFeedback {
    pub process_id: u64,
    pub ue: usize,
    /// `true` is ACK; one entry per CBG.
    pub acks: Vec<bool>,
    /// Uplink slot in which the gNB receives the bits.
    pub deliver_slot: u64,
    /// Attempt number the feedback refers to, starting at 1.
    pub attempt: u32,
}

impl CbgFeedback {
    pub fn all_acked(&self) -> bool {
        self.acks.iter().all(|&a| a)
    }
}

/// One transport block in flight.
#[derive(Debug, Clone, PartialEq)]
pub struct HarqProcess {
    pub id: u64,
    pub ue: usize,
    pub tb_size_bits: u64,
    pub mcs: usize,
    pub layout: CbgLayout,
    pub attempts: u32,
    pub cbg_state: Vec<CbgState>,
    /// CBs whose CRC has passed in some attempt.
    pub cb_ok: Vec<bool>,
    /// Chase-combined linear SINR per CB.
    pub acc_sinr: Vec<f64>,
    /// Resource elements of the first transmission.
    pub first_res: f64,
    pub first_slot: u64,
    /// `(packet index, bits)` carried by the TB.
    pub segments: Vec<(usize, u64)>,
    /// Slot from which a retransmission may be scheduled.
    pub ready_slot: Option<u64>,
}

impl HarqProcess {
    pub fn new(
        id: u64,
        ue: usize,
        tb_size_bits: u64,
        mcs: usize,
        layout: CbgLayout,
        first_res: f64,
        first_slot: u64,
        segments: Vec<(usize, u64)>,
    ) -> Self {
        let c = layout.num_cbs();
        let m = layout.num_cbgs();
        Self {
            id,
            ue,
            tb_size_bits,
            mcs,
            layout,
            attempts: 0,
            cbg_state: vec![CbgState::Pending; m],
            cb_ok: vec![false; c],
            acc_sinr: vec![0.0; c],
            first_res,
            first_slot,
            segments,
            ready_slot: None,
        }
    }

    pub fn num_cbs(&self) -> usize {
        self.layout.num_cbs()
    }

    /// CBs sent in the next attempt: members of CBGs not yet acknowledged,
    /// or every CB when `whole_tb` is set.
    pub fn cbs_to_send(&self, whole_tb: bool) -> Vec<usize> {
        if whole_tb {
            return (0..self.num_cbs()).collect();
        }
        self.layout
            .ranges()
            .zip(&self.cbg_state)
            .filter(|(_, s)| **s != CbgState::Acked)
            .flat_map(|(r, _)| r)
            .collect()
    }

    /// Adds one attempt's linear SINR to a CB.
    pub fn combine(&mut self, cb: usize, sinr_linear: f64) {
        self.acc_sinr[cb] += sinr_linear;
    }

    /// ACK bit per CBG from the CB decoding state.
    pub fn cbg_acks(&self) -> Vec<bool> {
        self.layout
            .ranges()
            .map(|r| self.cb_ok[r].iter().all(|&ok| ok))
            .collect()
    }

    pub fn apply_feedback(&mut self, acks: &[bool]) {
        for (s, &a) in self.cbg_state.iter_mut().zip(acks) {
            *s = if a { CbgState::Acked } else { CbgState::Nacked };
        }
    }

    pub fn is_complete(&self) -> bool {
        self.cb_ok.iter().all(|&ok| ok)
    }
}
