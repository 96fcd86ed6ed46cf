//! Line-delimited event log.
//!
//! Every line is a record type followed by `key=value` fields:
//!
//! ```text
//! meta scheme=ecqi_cbg load=4 seed=1 cells=3 prbs=51 slot_ms=0.5 horizon_ms=2000 warmup_ms=100 pdb_ms=10
//! tx slot=12 cell=0 ue=3 harq=17 attempt=1 mcs=14 prbs=20 tbs=54321 cbgs=11101111
//! pkt ue=3 cell=0 frame=5 arrival_ms=83.1 size=148000 status=delivered delivered_ms=90.5
//! slot slot=12 cell=0 used=40 total=51
//! ```
//!
//! `cbgs` lists one ACK (`1`) or NACK (`0`) per CBG. Packets still in flight
//! when the run ends are not logged.

use std::fmt;
use std::io::{BufRead, Write};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Meta {
    pub scheme: String,
    pub load: usize,
    pub seed: u64,
    pub cells: usize,
    pub prbs: usize,
    pub slot_ms: f64,
    pub horizon_ms: f64,
    pub warmup_ms: f64,
    pub pdb_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TxRecord {
    pub slot: u64,
    pub cell: usize,
    pub ue: usize,
    pub harq: u64,
    pub attempt: u32,
    pub mcs: usize,
    pub prbs: usize,
    pub tbs: u64,
    pub cbg_acks: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PacketStatus {
    Delivered { at_ms: f64 },
    Dropped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PacketRecord {
    pub ue: usize,
    pub cell: usize,
    pub frame: u64,
    pub arrival_ms: f64,
    pub size_bits: u64,
    pub status: PacketStatus,
}

impl PacketRecord {
    pub fn delay_ms(&self) -> Option<f64> {
        match self.status {
            PacketStatus::Delivered { at_ms } => Some(at_ms - self.arrival_ms),
            PacketStatus::Dropped => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotRecord {
    pub slot: u64,
    pub cell: usize,
    pub used: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    Meta(Meta),
    Tx(TxRecord),
    Packet(PacketRecord),
    Slot(SlotRecord),
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Event::Meta(m) => write!(
                f,
                "meta scheme={} load={} seed={} cells={} prbs={} slot_ms={} horizon_ms={} warmup_ms={} pdb_ms={}",
                m.scheme, m.load, m.seed, m.cells, m.prbs, m.slot_ms, m.horizon_ms, m.warmup_ms, m.pdb_ms
            ),
            Event::Tx(t) => {
                let bits: String = t.cbg_acks.iter().map(|&a| if a { '1' } else { '0' }).collect();
                write!(
                    f,
                    "tx slot={} cell={} ue={} harq={} attempt={} mcs={} prbs={} tbs={} cbgs={}",
                    t.slot, t.cell, t.ue, t.harq, t.attempt, t.mcs, t.prbs, t.tbs, bits
                )
            }
            Event::Packet(p) => {
                write!(
                    f,
                    "pkt ue={} cell={} frame={} arrival_ms={} size={} ",
                    p.ue, p.cell, p.frame, p.arrival_ms, p.size_bits
                )?;
                match p.status {
                    PacketStatus::Delivered { at_ms } => write!(f, "status=delivered delivered_ms={at_ms}"),
                    PacketStatus::Dropped => write!(f, "status=dropped"),
                }
            }
            Event::Slot(s) => write!(
                f,
                "slot slot={} cell={} used={} total={}",
                s.slot, s.cell, s.used, s.total
            ),
        }
    }
}

/// A parsed log, split by record type in file order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventLog {
    pub meta: Option<Meta>,
    pub tx: Vec<TxRecord>,
    pub packets: Vec<PacketRecord>,
    pub slots: Vec<SlotRecord>,
}

impl EventLog {
    pub fn push(&mut self, e: Event) {
        match e {
            Event::Meta(m) => self.meta = Some(m),
            Event::Tx(t) => self.tx.push(t),
            Event::Packet(p) => self.packets.push(p),
            Event::Slot(s) => self.slots.push(s),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.tx.is_empty() && self.packets.is_empty() && self.slots.is_empty()
    }

    pub fn parse<R: BufRead>(reader: R) -> Result<Self> {
        let mut log = EventLog::default();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            log.push(parse_event(&line).map_err(|msg| Error::EventLog { line: i + 1, msg })?);
        }
        Ok(log)
    }

    pub fn parse_str(s: &str) -> Result<Self> {
        Self::parse(s.as_bytes())
    }

    /// Writes the log back in canonical order: meta, packets, tx, slots.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        if let Some(m) = &self.meta {
            writeln!(w, "{}", Event::Meta(m.clone()))?;
        }
        for t in &self.tx {
            writeln!(w, "{}", Event::Tx(t.clone()))?;
        }
        for p in &self.packets {
            writeln!(w, "{}", Event::Packet(p.clone()))?;
        }
        for s in &self.slots {
            writeln!(w, "{}", Event::Slot(*s))?;
        }
        Ok(())
    }
}

struct Fields<'a> {
    pairs: Vec<(&'a str, &'a str)>,
}

impl<'a> Fields<'a> {
    fn get(&self, key: &str) -> std::result::Result<&'a str, String> {
        self.pairs
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
            .ok_or_else(|| format!("missing field `{key}`"))
    }

    fn num<T: std::str::FromStr>(&self, key: &str) -> std::result::Result<T, String> {
        let v = self.get(key)?;
        v.parse()
            .map_err(|_| format!("field `{key}` has invalid value {v:?}"))
    }
}

/// Parses one record line.
pub fn parse_event(line: &str) -> std::result::Result<Event, String> {
    let mut parts = line.split_whitespace();
    let kind = parts.next().ok_or("empty record")?;
    let pairs = parts
        .map(|p| {
            p.split_once('=')
                .ok_or_else(|| format!("expected key=value, got {p:?}"))
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let f = Fields { pairs };
    Ok(match kind {
        "meta" => Event::Meta(Meta {
            scheme: f.get("scheme")?.to_string(),
            load: f.num("load")?,
            seed: f.num("seed")?,
            cells: f.num("cells")?,
            prbs: f.num("prbs")?,
            slot_ms: f.num("slot_ms")?,
            horizon_ms: f.num("horizon_ms")?,
            warmup_ms: f.num("warmup_ms")?,
            pdb_ms: f.num("pdb_ms")?,
        }),
        "tx" => {
            let cbg_acks = f
                .get("cbgs")?
                .chars()
                .map(|c| match c {
                    '1' => Ok(true),
                    '0' => Ok(false),
                    _ => Err(format!("invalid CBG bit {c:?}")),
                })
                .collect::<std::result::Result<Vec<_>, _>>()?;
            if cbg_acks.is_empty() {
                return Err("empty CBG bit string".into());
            }
            Event::Tx(TxRecord {
                slot: f.num("slot")?,
                cell: f.num("cell")?,
                ue: f.num("ue")?,
                harq: f.num("harq")?,
                attempt: f.num("attempt")?,
                mcs: f.num("mcs")?,
                prbs: f.num("prbs")?,
                tbs: f.num("tbs")?,
                cbg_acks,
            })
        }
        "pkt" => {
            let status = match f.get("status")? {
                "delivered" => PacketStatus::Delivered {
                    at_ms: f.num("delivered_ms")?,
                },
                "dropped" => PacketStatus::Dropped,
                other => return Err(format!("unknown packet status {other:?}")),
            };
            Event::Packet(PacketRecord {
                ue: f.num("ue")?,
                cell: f.num("cell")?,
                frame: f.num("frame")?,
                arrival_ms: f.num("arrival_ms")?,
                size_bits: f.num("size")?,
                status,
            })
        }
        "slot" => {
            let s = SlotRecord {
                slot: f.num("slot")?,
                cell: f.num("cell")?,
                used: f.num("used")?,
                total: f.num("total")?,
            };
            if s.used > s.total {
                return Err(format!("{} used PRBs exceed {} total", s.used, s.total));
            }
            Event::Slot(s)
        }
        other => return Err(format!("unknown record type {other:?}")),
    })
}
