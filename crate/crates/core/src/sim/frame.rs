//! TDD slot pattern.

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotKind {
    Downlink,
    Special,
    Uplink,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FramePattern {
    slots: Vec<SlotKind>,
    downlink_data_symbols: u32,
    special_data_symbols: u32,
}

impl FramePattern {
    /// Parses a pattern such as `DDDSU`. Data symbols exclude the control
    /// symbols at the start of every downlink-carrying slot.
    pub fn new(
        pattern: &str,
        symbols_per_slot: u32,
        special_dl_symbols: u32,
        control_symbols: u32,
    ) -> Result<Self> {
        let slots = pattern
            .chars()
            .map(|c| match c {
                'D' => Ok(SlotKind::Downlink),
                'S' => Ok(SlotKind::Special),
                'U' => Ok(SlotKind::Uplink),
                other => Err(Error::domain(format!(
                    "unknown slot type {other:?} in {pattern:?}"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        if slots.is_empty() {
            return Err(Error::domain("empty frame pattern"));
        }
        if !slots.contains(&SlotKind::Uplink) {
            return Err(Error::domain(
                "frame pattern needs an uplink slot for feedback",
            ));
        }
        if !slots.iter().any(|s| *s != SlotKind::Uplink) {
            return Err(Error::domain("frame pattern has no downlink slot"));
        }
        if special_dl_symbols > symbols_per_slot
            || control_symbols >= special_dl_symbols.min(symbols_per_slot)
        {
            return Err(Error::domain(format!(
                "{control_symbols} control symbols leave no data in a {special_dl_symbols}-symbol special slot"
            )));
        }
        Ok(Self {
            slots,
            downlink_data_symbols: symbols_per_slot - control_symbols,
            special_data_symbols: special_dl_symbols - control_symbols,
        })
    }

    pub fn period(&self) -> usize {
        self.slots.len()
    }

    pub fn kind(&self, slot: u64) -> SlotKind {
        self.slots[(slot % self.slots.len() as u64) as usize]
    }

    /// Downlink data symbols in `slot` (zero in uplink slots).
    pub fn data_symbols(&self, slot: u64) -> u32 {
        match self.kind(slot) {
            SlotKind::Downlink => self.downlink_data_symbols,
            SlotKind::Special => self.special_data_symbols,
            SlotKind::Uplink => 0,
        }
    }

    /// First uplink slot strictly after `slot`.
    pub fn next_uplink_after(&self, slot: u64) -> u64 {
        self.next_uplink_from(slot + 1)
    }

    /// First uplink slot at or after `slot`.
    pub fn next_uplink_from(&self, slot: u64) -> u64 {
        (slot..)
            .find(|&s| self.kind(s) == SlotKind::Uplink)
            .expect("pattern has an uplink slot")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dddsu() {
        let f = FramePattern::new("DDDSU", 14, 10, 1).unwrap();
        assert_eq!(f.period(), 5);
        assert_eq!(f.kind(4), SlotKind::Uplink);
        assert_eq!(f.kind(9), SlotKind::Uplink);
        assert_eq!(f.data_symbols(0), 13);
        assert_eq!(f.data_symbols(3), 9);
        assert_eq!(f.data_symbols(4), 0);
        assert_eq!(f.next_uplink_after(0), 4);
        assert_eq!(f.next_uplink_after(4), 9);
        assert_eq!(f.next_uplink_from(4), 4);
    }

    #[test]
    fn invalid_patterns() {
        assert!(FramePattern::new("DDDSX", 14, 10, 1).is_err());
        assert!(FramePattern::new("DDDD", 14, 10, 1).is_err());
        assert!(FramePattern::new("UUU", 14, 10, 1).is_err());
        assert!(FramePattern::new("", 14, 10, 1).is_err());
        assert!(FramePattern::new("DSU", 14, 10, 10).is_err());
    }
}
