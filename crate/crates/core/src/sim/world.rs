//! The slot-ordered state machine of one simulation run.

use std::collections::VecDeque;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{EsmKind, SimConfig};
use crate::ecqi::{baseline_cqi, ecqi, EcqiConfig};
use crate::link::{
    bler, effective_sinr, linear_to_db, CbSinrProfile, CbgLayout, EsmMethod, McsTable,
};
use crate::sim::events::{Event, Meta, PacketRecord, PacketStatus, SlotRecord, TxRecord};
use crate::sim::{
    generate_traffic, olla_update, pf_select, segment_tb, CbgFeedback, Channel, FramePattern,
    HarqProcess, PfCandidate, Scheme, XrPacket,
};
use crate::Result;

/// Time constant of the proportional-fair throughput average.
const PF_WINDOW_MS: f64 = 100.0;

const STREAM_TOPOLOGY: u64 = 0;
const STREAM_TRAFFIC: u64 = 1;
const STREAM_CHANNEL: u64 = 2;
const STREAM_DECODE: u64 = 3;

fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Counters gathered during a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunSummary {
    pub slots: u64,
    pub transmissions: u64,
    pub first_transmissions: u64,
    /// First transmissions with at least one failed CBG.
    pub first_tx_failures: u64,
    pub cbgs_first_tx: u64,
    pub cbgs_failed_first_tx: u64,
    pub packets_delivered: u64,
    pub packets_dropped: u64,
    pub harq_exhausted: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum PacketState {
    Pending,
    Delivered,
    Dropped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Report {
    index: usize,
}

struct UeState {
    cell: usize,
    packets: Vec<XrPacket>,
    state: Vec<PacketState>,
    acked_bits: Vec<u64>,
    next_arrival: usize,
    queue: VecDeque<usize>,
    queued_bits: u64,
    report: Report,
    pending_reports: VecDeque<(u64, Report)>,
    olla_offset_db: f64,
    pf_avg: f64,
    harq: Vec<HarqProcess>,
    feedback: VecDeque<CbgFeedback>,
}

enum AllocKind {
    New,
    Retx(u64),
}

struct Allocation {
    ue: usize,
    prbs: Vec<usize>,
    kind: AllocKind,
}

/// Simulator state between slots.
pub struct World {
    cfg: SimConfig,
    scheme: Scheme,
    table: McsTable,
    frame: FramePattern,
    channel: Channel,
    ues: Vec<UeState>,
    /// PRB activity of every cell in the latest downlink slot.
    last_usage: Vec<Vec<bool>>,
    rng_channel: ChaCha8Rng,
    rng_decode: ChaCha8Rng,
    next_harq_id: u64,
    report_period_slots: u64,
    report_delay_slots: u64,
    tx_processing_ms: f64,
    cbg_olla_target: f64,
    ecqi_cfg: EcqiConfig,
    summary: RunSummary,
    events: Vec<Event>,
}

impl World {
    pub fn new(cfg: &SimConfig) -> Result<Self> {
        cfg.validate()?;
        let cfg = cfg.clone();
        let frame = cfg.frame.pattern()?;
        let table = cfg.link.table();
        let slot_ms = cfg.frame.slot_ms;
        let mut rng_topo = rng_stream(cfg.seed, STREAM_TOPOLOGY);
        let mut rng_traffic = rng_stream(cfg.seed, STREAM_TRAFFIC);
        let mut rng_channel = rng_stream(cfg.seed, STREAM_CHANNEL);
        let rng_decode = rng_stream(cfg.seed, STREAM_DECODE);

        let mut channel = Channel::drop_ues(
            &cfg.topology,
            &cfg.channel,
            cfg.carrier.prbs,
            cfg.carrier.scs_khz,
            slot_ms,
            &mut rng_topo,
        )?;
        // Fresh fading draws come from the channel stream so that topology
        // and fading stay independent.
        channel.evolve(&mut rng_channel);

        let period = 1000.0 / cfg.traffic.fps;
        let size_bits = cfg.traffic.size_bits();
        let mut ues = Vec::with_capacity(channel.num_ues());
        for p in channel.placements() {
            let phase = rng_traffic.gen_range(0.0..period);
            let mut packets = generate_traffic(
                cfg.traffic.fps,
                &cfg.traffic.jitter_ms,
                &size_bits,
                cfg.traffic.pdb_ms,
                cfg.horizon_ms,
                &mut rng_traffic,
            )?;
            for pk in &mut packets {
                pk.arrival_ms += phase;
                pk.deadline_ms += phase;
            }
            packets.retain(|pk| pk.arrival_ms < cfg.horizon_ms);
            packets.sort_by(|a, b| a.arrival_ms.total_cmp(&b.arrival_ms));
            let n = packets.len();
            ues.push(UeState {
                cell: p.serving_cell,
                packets,
                state: vec![PacketState::Pending; n],
                acked_bits: vec![0; n],
                next_arrival: 0,
                queue: VecDeque::new(),
                queued_bits: 0,
                report: Report {
                    index: table.len() / 2,
                },
                pending_reports: VecDeque::new(),
                olla_offset_db: cfg.olla.initial_db,
                pf_avg: 0.0,
                harq: Vec::new(),
                feedback: VecDeque::new(),
            });
        }

        let cells = channel.num_cells();
        let prbs = cfg.carrier.prbs;
        let ecqi_cfg = EcqiConfig {
            max_cbgs: cfg.ecqi.max_cbgs,
            ..cfg.ecqi.clone()
        };
        let mut world = Self {
            scheme: cfg.scheme,
            report_period_slots: ((cfg.cqi.period_ms / slot_ms).round() as u64).max(1),
            report_delay_slots: (cfg.cqi.delay_ms / slot_ms).ceil() as u64,
            tx_processing_ms: cfg.frame.tx_processing_symbols as f64 * slot_ms
                / cfg.frame.symbols_per_slot as f64,
            cbg_olla_target: cfg.cbg_olla_target(),
            table,
            frame,
            channel,
            ues,
            last_usage: vec![vec![true; prbs]; cells],
            rng_channel,
            rng_decode,
            next_harq_id: 0,
            ecqi_cfg,
            summary: RunSummary::default(),
            events: Vec::new(),
            cfg,
        };
        // Initial reports assume a fully loaded network and apply at once.
        let full_symbols = world.cfg.frame.symbols_per_slot - world.cfg.frame.control_symbols;
        for u in 0..world.ues.len() {
            let r = world.measure(u)?;
            world.ues[u].report = r;
            let mcs = world.selected_mcs(u);
            world.ues[u].pf_avg = world.bits_per_prb(mcs, full_symbols) * prbs as f64;
        }
        Ok(world)
    }

    pub fn meta(&self) -> Meta {
        Meta {
            scheme: self.scheme.name().to_string(),
            load: self.cfg.topology.ues_per_cell,
            seed: self.cfg.seed,
            cells: self.channel.num_cells(),
            prbs: self.cfg.carrier.prbs,
            slot_ms: self.cfg.frame.slot_ms,
            horizon_ms: self.cfg.horizon_ms,
            warmup_ms: self.cfg.warmup_ms,
            pdb_ms: self.cfg.traffic.pdb_ms,
        }
    }

    pub fn summary(&self) -> RunSummary {
        self.summary
    }

    /// Number of slots covering the horizon.
    pub fn horizon_slots(&self) -> u64 {
        (self.cfg.horizon_ms / self.cfg.frame.slot_ms).ceil() as u64
    }

    /// Events emitted since the last call.
    pub fn drain_events(&mut self) -> Vec<Event> {
        std::mem::take(&mut self.events)
    }

    fn bits_per_prb(&self, mcs: usize, symbols: u32) -> f64 {
        let e = &self.table.entries()[mcs];
        12.0 * symbols as f64 * e.modulation_order as f64 * e.code_rate
    }

    fn esm(&self, mcs: usize) -> EsmMethod<'_> {
        let q = self.table.entries()[mcs].modulation_order;
        match self.cfg.link.esm {
            EsmKind::Eesm => EsmMethod::Eesm {
                beta: self.cfg.link.eesm_beta.for_order(q),
            },
            EsmKind::Mmib => EsmMethod::Mmib(self.cfg.link.mi_curve(q).expect("validated curve")),
        }
    }

    /// MCS the gNB uses for `ue`: the reported entry moved down by the OLLA
    /// offset along the BLER midpoints.
    fn selected_mcs(&self, ue: usize) -> usize {
        let u = &self.ues[ue];
        let mid = self.table.entries()[u.report.index].bler_midpoint_db;
        self.table.index_at_or_below(mid - u.olla_offset_db)
    }

    /// CQI measurement of `ue` against the latest interference pattern.
    fn measure(&self, ue: usize) -> Result<Report> {
        let sinr = self.channel.sinr_all(ue, &self.last_usage);
        let method = self.esm(self.ues[ue].report.index);
        let c = self.cfg.link.report_cbs;
        let chunks = CbgLayout::new(sinr.len(), c)?;
        let per_cb = chunks
            .ranges()
            .map(|r| effective_sinr(&sinr[r], method).map(linear_to_db))
            .collect::<Result<Vec<_>>>()?;
        let index = if self.scheme.uses_ecqi() {
            let m = self.ecqi_cfg.max_cbgs.min(c);
            let profile = CbSinrProfile::new(per_cb, CbgLayout::new(c, m)?)?;
            ecqi(&profile, &self.table, &self.ecqi_cfg)?.index
        } else {
            let wideband = linear_to_db(effective_sinr(&sinr, method)?);
            baseline_cqi(wideband, &self.table, self.cfg.cqi.target_tbep, c).index
        };
        Ok(Report { index })
    }

    fn emit_packet(&mut self, ue: usize, p: usize, status: PacketStatus) {
        let u = &self.ues[ue];
        let pk = &u.packets[p];
        match status {
            PacketStatus::Delivered { .. } => self.summary.packets_delivered += 1,
            PacketStatus::Dropped => self.summary.packets_dropped += 1,
        }
        self.events.push(Event::Packet(PacketRecord {
            ue,
            cell: u.cell,
            frame: pk.frame_index,
            arrival_ms: pk.arrival_ms,
            size_bits: pk.size_bits,
            status,
        }));
    }

    fn drop_packet(&mut self, ue: usize, p: usize) {
        if self.ues[ue].state[p] != PacketState::Pending {
            return;
        }
        let u = &mut self.ues[ue];
        u.state[p] = PacketState::Dropped;
        u.queued_bits -= u.packets[p].remaining_bits;
        u.packets[p].remaining_bits = 0;
        u.queue.retain(|&q| q != p);
        self.emit_packet(ue, p, PacketStatus::Dropped);
    }

    /// Advances the world through `slot`.
    pub fn step_slot(&mut self, slot: u64) -> Result<()> {
        let slot_ms = self.cfg.frame.slot_ms;
        let t0 = slot as f64 * slot_ms;
        self.channel.evolve(&mut self.rng_channel);

        self.deliver_feedback(slot);
        for u in &mut self.ues {
            while u.pending_reports.front().is_some_and(|(s, _)| *s <= slot) {
                u.report = u.pending_reports.pop_front().expect("front exists").1;
            }
        }

        for u in &mut self.ues {
            while u.next_arrival < u.packets.len()
                && u.packets[u.next_arrival].arrival_ms + self.tx_processing_ms <= t0
            {
                let p = u.next_arrival;
                u.queue.push_back(p);
                u.queued_bits += u.packets[p].remaining_bits;
                u.next_arrival += 1;
            }
        }

        if self.cfg.traffic.discard_expired {
            for ue in 0..self.ues.len() {
                let expired: Vec<usize> = self.ues[ue]
                    .queue
                    .iter()
                    .copied()
                    .filter(|&p| self.ues[ue].packets[p].deadline_ms <= t0)
                    .collect();
                for p in expired {
                    self.drop_packet(ue, p);
                }
            }
        }

        if slot % self.report_period_slots == 0 {
            let deliver = self.frame.next_uplink_from(slot + self.report_delay_slots);
            for ue in 0..self.ues.len() {
                let r = self.measure(ue)?;
                self.ues[ue].pending_reports.push_back((deliver, r));
            }
        }

        let mut scheduled_bits = vec![0.0; self.ues.len()];
        let symbols = self.frame.data_symbols(slot);
        if symbols > 0 {
            let cells = self.channel.num_cells();
            let prbs = self.cfg.carrier.prbs;
            let mut usage = vec![vec![false; prbs]; cells];
            let mut allocs = Vec::new();
            for cell in 0..cells {
                let a = self.schedule(cell, slot, symbols);
                for x in &a {
                    for &k in &x.prbs {
                        usage[cell][k] = true;
                    }
                }
                allocs.push(a);
            }
            for (cell, cell_allocs) in allocs.into_iter().enumerate() {
                for a in cell_allocs {
                    let bits = self.transmit(cell, slot, symbols, a, &usage)?;
                    scheduled_bits[bits.0] += bits.1;
                }
                let used = usage[cell].iter().filter(|&&b| b).count();
                self.events.push(Event::Slot(SlotRecord {
                    slot,
                    cell,
                    used,
                    total: prbs,
                }));
            }
            self.last_usage = usage;
        }

        let alpha = (slot_ms / PF_WINDOW_MS).min(1.0);
        for (u, bits) in self.ues.iter_mut().zip(scheduled_bits) {
            u.pf_avg = (1.0 - alpha) * u.pf_avg + alpha * bits;
            // Keep the ratio finite for UEs that have been idle for long.
            u.pf_avg = u.pf_avg.max(1e-9);
        }
        self.summary.slots += 1;
        Ok(())
    }

    fn deliver_feedback(&mut self, slot: u64) {
        let params = self.cfg.olla.clone();
        let mode = self.scheme.olla_mode();
        let max_attempts = self.cfg.harq.max_attempts;
        for u in &mut self.ues {
            while u.feedback.front().is_some_and(|f| f.deliver_slot <= slot) {
                let fb = u.feedback.pop_front().expect("front exists");
                if fb.attempt == 1 {
                    u.olla_offset_db = olla_update(
                        u.olla_offset_db,
                        &fb.acks,
                        mode,
                        &params,
                        self.cbg_olla_target,
                    );
                }
                let Some(pos) = u.harq.iter().position(|h| h.id == fb.process_id) else {
                    continue;
                };
                let h = &mut u.harq[pos];
                h.apply_feedback(&fb.acks);
                if fb.all_acked() || h.attempts >= max_attempts {
                    u.harq.remove(pos);
                } else {
                    h.ready_slot = Some(slot + 1);
                }
            }
        }
    }

    fn schedule(&self, cell: usize, slot: u64, symbols: u32) -> Vec<Allocation> {
        let prbs = self.cfg.carrier.prbs;
        let mut free: Vec<bool> = vec![true; prbs];
        let mut n_free = prbs;
        let mut allocs = Vec::new();
        let mut busy = vec![false; self.ues.len()];
        let per_prb_res = 12.0 * symbols as f64;

        // Pending retransmissions first, oldest first.
        let mut ready: Vec<(u64, u64, usize)> = Vec::new();
        for (ue, u) in self.ues.iter().enumerate().filter(|(_, u)| u.cell == cell) {
            for h in &u.harq {
                if h.ready_slot.is_some_and(|r| r <= slot) {
                    ready.push((h.first_slot, h.id, ue));
                }
            }
        }
        ready.sort_unstable();
        for (_, id, ue) in ready {
            if busy[ue] {
                continue;
            }
            let h = self.ues[ue]
                .harq
                .iter()
                .find(|h| h.id == id)
                .expect("ready process");
            let share = h.cbs_to_send(!self.scheme.cbg_harq()).len() as f64 / h.num_cbs() as f64;
            let need = ((h.first_res * share / per_prb_res).ceil() as usize).max(1);
            if need > n_free {
                continue;
            }
            let taken: Vec<usize> = (0..prbs).filter(|&k| free[k]).take(need).collect();
            for &k in &taken {
                free[k] = false;
            }
            n_free -= need;
            busy[ue] = true;
            allocs.push(Allocation {
                ue,
                prbs: taken,
                kind: AllocKind::Retx(id),
            });
        }

        // New data, PRB by PRB.
        let mut demand: Vec<f64> = vec![0.0; self.ues.len()];
        let mut rate: Vec<f64> = vec![0.0; self.ues.len()];
        let mut new_prbs: Vec<Vec<usize>> = vec![Vec::new(); self.ues.len()];
        for (ue, u) in self.ues.iter().enumerate() {
            if u.cell == cell && !busy[ue] && u.queued_bits > 0 {
                demand[ue] = u.queued_bits as f64;
                rate[ue] = self.bits_per_prb(self.selected_mcs(ue), symbols);
            }
        }
        for k in 0..prbs {
            if !free[k] {
                continue;
            }
            let cands: Vec<PfCandidate> = (0..self.ues.len())
                .filter(|&ue| demand[ue] > 0.0)
                .map(|ue| PfCandidate {
                    ue,
                    rate: rate[ue],
                    avg_throughput: self.ues[ue].pf_avg,
                })
                .collect();
            let Some(ue) = pf_select(&cands) else { break };
            new_prbs[ue].push(k);
            demand[ue] -= rate[ue];
        }
        for (ue, p) in new_prbs.into_iter().enumerate() {
            if !p.is_empty() {
                allocs.push(Allocation {
                    ue,
                    prbs: p,
                    kind: AllocKind::New,
                });
            }
        }
        allocs.sort_by_key(|a| a.ue);
        allocs
    }

    /// Sends one allocation; returns `(ue, new-data bits)`.
    fn transmit(
        &mut self,
        cell: usize,
        slot: u64,
        symbols: u32,
        alloc: Allocation,
        usage: &[Vec<bool>],
    ) -> Result<(usize, f64)> {
        let ue = alloc.ue;
        let n_prb = alloc.prbs.len();
        let mut new_bits = 0.0;
        let pos = match alloc.kind {
            AllocKind::Retx(id) => self.ues[ue]
                .harq
                .iter()
                .position(|h| h.id == id)
                .expect("scheduled process"),
            AllocKind::New => {
                let mcs = self.selected_mcs(ue);
                let cap = (n_prb as f64 * self.bits_per_prb(mcs, symbols)).floor() as u64;
                let u = &mut self.ues[ue];
                let tbs = cap.min(u.queued_bits).max(1);
                let mut segments = Vec::new();
                let mut left = tbs;
                while left > 0 {
                    let Some(&p) = u.queue.front() else { break };
                    let take = left.min(u.packets[p].remaining_bits);
                    u.packets[p].remaining_bits -= take;
                    left -= take;
                    segments.push((p, take));
                    if u.packets[p].remaining_bits == 0 {
                        u.queue.pop_front();
                    }
                }
                let tbs = tbs - left;
                u.queued_bits -= tbs;
                new_bits = tbs as f64;
                let f = if self.scheme.cbg_harq() {
                    self.ecqi_cfg.max_cbgs
                } else {
                    1
                };
                let (_, _, layout) = segment_tb(tbs, f)?;
                let res = 12.0 * symbols as f64 * n_prb as f64;
                let id = self.next_harq_id;
                self.next_harq_id += 1;
                u.harq.push(HarqProcess::new(
                    id, ue, tbs, mcs, layout, res, slot, segments,
                ));
                u.harq.len() - 1
            }
        };

        let whole_tb = !self.scheme.cbg_harq();
        let (cbs, mcs) = {
            let h = &self.ues[ue].harq[pos];
            (h.cbs_to_send(whole_tb), h.mcs)
        };
        let entry = self.table.entries()[mcs].clone();
        let method = self.esm(mcs);
        let prb_sinr: Vec<f64> = alloc
            .prbs
            .iter()
            .map(|&k| self.channel.sinr(ue, k, |c, p| usage[c][p]))
            .collect();
        let k = cbs.len();
        let mut cb_sinr = Vec::with_capacity(k);
        for j in 0..k {
            let lo = j * n_prb / k;
            let hi = ((j + 1) * n_prb / k).max(lo + 1).min(n_prb);
            cb_sinr.push(effective_sinr(&prb_sinr[lo..hi], method)?);
        }

        let h = &mut self.ues[ue].harq[pos];
        for (&cb, &s) in cbs.iter().zip(&cb_sinr) {
            h.combine(cb, s);
            if !h.cb_ok[cb] {
                let p = bler(linear_to_db(h.acc_sinr[cb]), &entry);
                h.cb_ok[cb] = self.rng_decode.gen::<f64>() >= p;
            }
        }
        h.attempts += 1;
        h.ready_slot = None;
        let acks = h.cbg_acks();
        let attempt = h.attempts;
        let (id, tbs, complete) = (h.id, h.tb_size_bits, h.is_complete());
        let exhausted = !complete && attempt >= self.cfg.harq.max_attempts;
        let segments = if complete || exhausted {
            h.segments.clone()
        } else {
            Vec::new()
        };

        self.summary.transmissions += 1;
        if attempt == 1 {
            self.summary.first_transmissions += 1;
            self.summary.cbgs_first_tx += acks.len() as u64;
            let failed = acks.iter().filter(|a| !**a).count() as u64;
            self.summary.cbgs_failed_first_tx += failed;
            if failed > 0 {
                self.summary.first_tx_failures += 1;
            }
        }
        self.events.push(Event::Tx(TxRecord {
            slot,
            cell,
            ue,
            harq: id,
            attempt,
            mcs,
            prbs: n_prb,
            tbs,
            cbg_acks: acks.clone(),
        }));
        let deliver_slot = self.frame.next_uplink_after(slot);
        self.ues[ue].feedback.push_back(CbgFeedback {
            process_id: id,
            ue,
            acks,
            deliver_slot,
            attempt,
        });

        let done_ms = (slot + 1) as f64 * self.cfg.frame.slot_ms;
        if complete {
            for (p, bits) in segments {
                let u = &mut self.ues[ue];
                if u.state[p] != PacketState::Pending {
                    continue;
                }
                u.acked_bits[p] += bits;
                if u.acked_bits[p] == u.packets[p].size_bits {
                    u.state[p] = PacketState::Delivered;
                    self.emit_packet(ue, p, PacketStatus::Delivered { at_ms: done_ms });
                }
            }
        } else if exhausted {
            self.summary.harq_exhausted += 1;
            for (p, _) in segments {
                self.drop_packet(ue, p);
            }
        }
        Ok((ue, new_bits))
    }

    /// Logs the outcome of packets whose deadline passed without delivery.
    /// Packets that could still make their deadline are left out.
    pub fn finish(&mut self) {
        let end = self.horizon_slots() as f64 * self.cfg.frame.slot_ms;
        for ue in 0..self.ues.len() {
            for p in 0..self.ues[ue].packets.len() {
                let u = &self.ues[ue];
                if u.state[p] == PacketState::Pending
                    && u.packets[p].arrival_ms < end
                    && u.packets[p].deadline_ms <= end
                {
                    self.drop_packet(ue, p);
                }
            }
        }
    }

    /// Measured SINR in dB per PRB of `ue` under the latest interference.
    pub fn prb_sinr_db(&self, ue: usize) -> Vec<f64> {
        self.channel
            .sinr_all(ue, &self.last_usage)
            .into_iter()
            .map(linear_to_db)
            .collect()
    }

    pub fn channel(&self) -> &Channel {
        &self.channel
    }

    pub fn olla_offset_db(&self, ue: usize) -> f64 {
        self.ues[ue].olla_offset_db
    }
}

/// Runs the whole horizon and writes the event log to `out`.
pub fn simulate<W: Write>(cfg: &SimConfig, mut out: W) -> Result<RunSummary> {
    let mut world = World::new(cfg)?;
    writeln!(out, "{}", Event::Meta(world.meta()))?;
    for slot in 0..world.horizon_slots() {
        world.step_slot(slot)?;
        for e in world.drain_events() {
            writeln!(out, "{e}")?;
        }
    }
    world.finish();
    for e in world.drain_events() {
        writeln!(out, "{e}")?;
    }
    out.flush()?;
    Ok(world.summary())
}
