//! Command-bus timing model for one pseudo-channel.
//!
//! Issue rules:
//!
//! * One command bus. Every command occupies one slot: multi-bank compute
//!   takes tCCDL, single-bank compute with a bus operand and READ/WRITE
//!   take tCCDS, single-bank commands without a bus operand take
//!   tCCDS / `cmd_bw_multiplier`, and ACT takes `act_slot_ns`.
//! * Two commands keep their stream order when they target a common bank
//!   and one of them is an ACT or a multi-bank command, when both are
//!   multi-bank compute (FIFO), when they share a register of a common PIM
//!   unit, or when both address the same bank/row/column. Everything else
//!   may be reordered.
//! * A column command waits until each targeted bank has its row open and
//!   ready. An ACT waits for `last_act + tRC` and, with
//!   `precharge_after_column`, for `last_column_end + tRP`. The opened row
//!   becomes ready `act_slot + tRCD` after the ACT issues.
//! * Among commands whose predecessors have issued, the one that can start
//!   earliest goes next; ties go to the oldest.
//!
//! An even- or odd-scoped ACT only orders against commands on its own
//! parity, so it may overlap compute on the other parity.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sysmodel::{DerivedParams, SystemConfig};
use crate::trace::{stats, CommandKind, CommandStream, PimCommand, Scope, StreamStats};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BankState {
    pub open_row: Option<u32>,
    pub ready_time: f64,
    pub last_act: f64,
    pub last_col_end: f64,
}

impl BankState {
    fn closed() -> Self {
        Self {
            open_row: None,
            ready_time: 0.0,
            last_act: f64::NEG_INFINITY,
            last_col_end: f64::NEG_INFINITY,
        }
    }

    fn preopened(row: u32) -> Self {
        Self {
            open_row: Some(row),
            ..Self::closed()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    /// Per-pCH execution time; pCHs run in parallel so this is also the
    /// stack-level time under symmetric load.
    pub total_ns: f64,
    pub slot_busy_ns: f64,
    pub act_stall_ns: f64,
    pub command_counts: StreamStats,
    /// Bytes moved between banks and PIM units or over the bus, per ns, in
    /// one pCH.
    pub effective_bw: f64,
}

impl TimingReport {
    pub fn act_stall_share(&self) -> f64 {
        if self.total_ns > 0.0 {
            self.act_stall_ns / self.total_ns
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StallReason {
    None,
    /// Waiting for tRCD after an ACT.
    RowNotReady,
    /// Waiting for tRC or tRP before an ACT.
    ActSpacing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IssueEvent {
    pub time: f64,
    pub index: usize,
    pub kind: CommandKind,
    pub scope: Scope,
    pub row: u32,
    pub slot: f64,
    pub stall_ns: f64,
    pub reason: StallReason,
}

impl IssueEvent {
    pub fn to_line(&self) -> String {
        format!(
            "{:.4} #{} {} {} row={} stall={:.4} {:?}",
            self.time,
            self.index,
            self.kind.name(),
            self.scope,
            self.row,
            self.stall_ns,
            self.reason
        )
    }
}

pub fn slot_of(cmd: &PimCommand, d: &DerivedParams) -> f64 {
    match cmd.kind {
        CommandKind::Act if cmd.scope.is_multi() => d.slot_act,
        // a single-bank ACT is itself a no-data single-bank command
        CommandKind::Act => d.slot_act / d.cmd_bw_multiplier,
        CommandKind::Read | CommandKind::Write => d.slot_regular,
        _ if cmd.scope.is_multi() => d.slot_multibank,
        _ if cmd.carries_data => d.slot_regular,
        _ => d.slot_nodata,
    }
}

/// Bytes a command moves between banks and PIM units (or over the bus).
fn bytes_moved(cmd: &PimCommand, d: &DerivedParams) -> f64 {
    if cmd.is_act() {
        0.0
    } else if cmd.scope.is_multi() {
        let per_unit = d.banks_per_pim_unit.max(1) as u16;
        let mut units: Vec<u16> = cmd.scope.banks(d.banks_per_pch as u16).map(|b| b / per_unit).collect();
        units.dedup();
        (units.len() as u32 * d.word_bytes) as f64
    } else {
        d.word_bytes as f64
    }
}

/// Bytes the stream moves between banks and PIM units (or over the bus).
pub fn stream_bytes(stream: &CommandStream, cfg: &SystemConfig) -> f64 {
    let d = cfg.derive();
    stream.iter().map(|c| bytes_moved(c, &d)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Time(f64);

impl Eq for Time {}

impl PartialOrd for Time {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Time {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Direct successor lists of the issue-order constraints.
fn build_dependencies(stream: &CommandStream, d: &DerivedParams) -> Result<(Vec<Vec<usize>>, Vec<u32>)> {
    let n = stream.len();
    let banks = stream.meta.banks.max(d.banks_per_pch as u16) as usize;
    let per_unit = d.banks_per_pim_unit.max(1) as u16;
    let units = d.pim_units_per_pch.max(1) as usize;

    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut indeg = vec![0u32; n];
    let mut stamp = vec![usize::MAX; n];

    let mut last_act: Vec<Option<usize>> = vec![None; banks];
    let mut since_act: Vec<Vec<usize>> = vec![Vec::new(); banks];
    let mut last_multi: Vec<Option<usize>> = vec![None; banks];
    let mut singles_since_multi: Vec<Vec<usize>> = vec![Vec::new(); banks];
    let mut last_multi_compute: Option<usize> = None;
    let mut last_reg: HashMap<(usize, u8), usize> = HashMap::new();
    let mut last_addr: HashMap<(u16, u32, u32), usize> = HashMap::new();

    for (j, c) in stream.commands.iter().enumerate() {
        let mut preds: Vec<usize> = Vec::new();
        let mut add = |p: usize, preds: &mut Vec<usize>| {
            if stamp[p] != j {
                stamp[p] = j;
                preds.push(p);
            }
        };
        let targeted: Vec<u16> = c.scope.banks(banks as u16).collect();
        if let Scope::SingleBank(b) = c.scope {
            if b as usize >= banks {
                return Err(Error::Simulation {
                    index: j,
                    msg: format!("targets undefined bank {b}"),
                });
            }
        }
        for &b in &targeted {
            let b = b as usize;
            if c.is_act() {
                if let Some(p) = last_act[b] {
                    add(p, &mut preds);
                }
                for &p in &since_act[b] {
                    add(p, &mut preds);
                }
            } else if let Some(p) = last_act[b] {
                add(p, &mut preds);
            }
            if c.scope.is_multi() {
                if let Some(p) = last_multi[b] {
                    add(p, &mut preds);
                }
                for &p in &singles_since_multi[b] {
                    add(p, &mut preds);
                }
            } else if let Some(p) = last_multi[b] {
                add(p, &mut preds);
            }
        }
        if c.is_multibank_compute() {
            if let Some(p) = last_multi_compute {
                add(p, &mut preds);
            }
        }
        let unit_range = match c.scope {
            Scope::SingleBank(b) => {
                let u = (b / per_unit) as usize;
                u..u + 1
            }
            _ => 0..units,
        };
        let mut regs: Vec<u8> = [c.dst_reg, c.src_reg].into_iter().flatten().collect();
        regs.dedup();
        for &r in &regs {
            for u in unit_range.clone() {
                if let Some(&p) = last_reg.get(&(u, r)) {
                    add(p, &mut preds);
                }
            }
        }
        if let Scope::SingleBank(b) = c.scope {
            if !c.is_act() {
                if let Some(&p) = last_addr.get(&(b, c.row, c.col)) {
                    add(p, &mut preds);
                }
                last_addr.insert((b, c.row, c.col), j);
            }
        }

        for &p in &preds {
            succ[p].push(j);
        }
        indeg[j] = preds.len() as u32;

        // record j
        for &b in &targeted {
            let b = b as usize;
            if c.is_act() {
                last_act[b] = Some(j);
                since_act[b].clear();
            } else {
                since_act[b].push(j);
            }
            if c.scope.is_multi() {
                last_multi[b] = Some(j);
                singles_since_multi[b].clear();
            } else {
                singles_since_multi[b].push(j);
            }
        }
        if c.is_multibank_compute() {
            last_multi_compute = Some(j);
        }
        for &r in &regs {
            for u in unit_range.clone() {
                last_reg.insert((u, r), j);
            }
        }
    }
    Ok((succ, indeg))
}

struct Engine<'a> {
    stream: &'a CommandStream,
    d: DerivedParams,
    banks: Vec<BankState>,
}

impl Engine<'_> {
    /// Earliest start ignoring the bus, with the reason it exceeds zero.
    fn constraint(&self, j: usize) -> Result<(f64, StallReason)> {
        let c = &self.stream.commands[j];
        let nb = self.banks.len() as u16;
        let mut t = 0.0f64;
        if c.is_act() {
            for b in c.scope.banks(nb) {
                let s = &self.banks[b as usize];
                t = t.max(s.last_act + self.d.t_rc);
                if self.d.precharge_after_column {
                    t = t.max(s.last_col_end + self.d.t_rp);
                }
            }
            Ok((t, StallReason::ActSpacing))
        } else {
            for b in c.scope.banks(nb) {
                let s = &self.banks[b as usize];
                if s.open_row != Some(c.row) {
                    return Err(Error::Simulation {
                        index: j,
                        msg: format!(
                            "{} needs row {} open in bank {b} (open: {:?})",
                            c.kind.name(),
                            c.row,
                            s.open_row
                        ),
                    });
                }
                t = t.max(s.ready_time);
            }
            Ok((t, StallReason::RowNotReady))
        }
    }

    fn issue(&mut self, j: usize, start: f64, slot: f64) {
        let c = self.stream.commands[j];
        let nb = self.banks.len() as u16;
        for b in c.scope.banks(nb) {
            let s = &mut self.banks[b as usize];
            if c.is_act() {
                s.open_row = Some(c.row);
                s.last_act = start;
                s.ready_time = start + slot + self.d.t_rcd;
            } else {
                s.last_col_end = s.last_col_end.max(start + slot);
            }
        }
    }
}

pub fn simulate(stream: &CommandStream, cfg: &SystemConfig) -> Result<TimingReport> {
    run(stream, cfg, false).map(|(r, _)| r)
}

pub fn simulate_with_log(stream: &CommandStream, cfg: &SystemConfig) -> Result<(TimingReport, Vec<IssueEvent>)> {
    run(stream, cfg, true)
}

fn run(stream: &CommandStream, cfg: &SystemConfig, log: bool) -> Result<(TimingReport, Vec<IssueEvent>)> {
    let d = cfg.derive();
    if stream.meta.banks as u32 != d.banks_per_pch {
        return Err(Error::Simulation {
            index: 0,
            msg: format!(
                "stream built for {} banks, config has {}",
                stream.meta.banks, d.banks_per_pch
            ),
        });
    }
    let (succ, mut indeg) = build_dependencies(stream, &d)?;
    let init = match stream.meta.preopened_row {
        Some(r) => BankState::preopened(r),
        None => BankState::closed(),
    };
    let mut eng = Engine {
        stream,
        d,
        banks: vec![init; d.banks_per_pch as usize],
    };

    let n = stream.len();
    let mut pending: BinaryHeap<Reverse<(Time, usize, u8)>> = BinaryHeap::new();
    let mut available: BinaryHeap<Reverse<(usize, u8)>> = BinaryHeap::new();
    let reason_code = |r: StallReason| match r {
        StallReason::None => 0u8,
        StallReason::RowNotReady => 1,
        StallReason::ActSpacing => 2,
    };
    let decode = |c: u8| match c {
        1 => StallReason::RowNotReady,
        2 => StallReason::ActSpacing,
        _ => StallReason::None,
    };
    for j in 0..n {
        if indeg[j] == 0 {
            let (t, r) = eng.constraint(j)?;
            pending.push(Reverse((Time(t), j, reason_code(r))));
        }
    }

    let mut bus_free = 0.0f64;
    let mut busy = 0.0f64;
    let mut moved = 0.0f64;
    let mut issued = 0usize;
    let mut events = Vec::new();

    while issued < n {
        while let Some(Reverse((Time(t), j, r))) = pending.peek().copied() {
            if t <= bus_free {
                pending.pop();
                available.push(Reverse((j, r)));
            } else {
                break;
            }
        }
        let (j, start, reason) = if let Some(Reverse((j, _))) = available.pop() {
            (j, bus_free, StallReason::None)
        } else if let Some(Reverse((Time(t), j, r))) = pending.pop() {
            (j, t, decode(r))
        } else {
            return Err(Error::Simulation {
                index: issued,
                msg: "dependency cycle".into(),
            });
        };
        let cmd = &stream.commands[j];
        let slot = slot_of(cmd, &d);
        if log {
            events.push(IssueEvent {
                time: start,
                index: j,
                kind: cmd.kind,
                scope: cmd.scope,
                row: cmd.row,
                slot,
                stall_ns: start - bus_free,
                reason,
            });
        }
        eng.issue(j, start, slot);
        bus_free = start + slot;
        busy += slot;
        moved += bytes_moved(cmd, &d);
        issued += 1;
        for &s in &succ[j] {
            indeg[s] -= 1;
            if indeg[s] == 0 {
                let (t, r) = eng.constraint(s)?;
                pending.push(Reverse((Time(t), s, reason_code(r))));
            }
        }
    }

    let total = bus_free;
    let report = TimingReport {
        total_ns: total,
        slot_busy_ns: busy,
        act_stall_ns: (total - busy).max(0.0),
        command_counts: stats(stream),
        effective_bw: if total > 0.0 { moved / total } else { 0.0 },
    };
    Ok((report, events))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::StreamMeta;

    fn meta(cfg: &SystemConfig) -> StreamMeta {
        StreamMeta::new("t", 0, cfg)
    }

    #[test]
    fn empty_stream_takes_no_time() {
        let cfg = SystemConfig::default();
        let r = simulate(&CommandStream::new(meta(&cfg)), &cfg).unwrap();
        assert_eq!(r.total_ns, 0.0);
        assert_eq!(r.act_stall_ns, 0.0);
    }

    #[test]
    fn act_then_eight_macs() {
        let cfg = SystemConfig::default();
        let mut s = CommandStream::new(meta(&cfg));
        s.push(PimCommand::act(Scope::AllBank, 0));
        for c in 0..8 {
            s.push(PimCommand::mac(Scope::AllBank, 0, c, 0));
        }
        let r = simulate(&s, &cfg).unwrap();
        // tCCDS + tRCD + 8 * tCCDL
        let expected = 32.0 / 19.2 + 15.0 + 8.0 * 3.33;
        assert!((r.total_ns - expected).abs() < 1e-9, "{}", r.total_ns);
        assert!((r.total_ns - 43.3).abs() < 0.01);
        assert!((r.act_stall_ns - 15.0).abs() < 1e-9);
    }

    #[test]
    fn preopened_streaming_hits_multiplier() {
        let cfg = SystemConfig::default();
        let d = cfg.derive();
        let mut m = meta(&cfg);
        m.preopened_row = Some(0);
        let mut s = CommandStream::new(m);
        for k in 0..64u32 {
            let scope = if k % 2 == 0 { Scope::EvenBanks } else { Scope::OddBanks };
            s.push(PimCommand::load(scope, 0, k % 32, (k % 16) as u8));
        }
        let r = simulate(&s, &cfg).unwrap();
        assert!((r.total_ns - 64.0 * 3.33).abs() < 1e-9);
        assert_eq!(r.act_stall_ns, 0.0);
        // 8 units * 32 B / 3.33 ns = 76.8 GB/s = multiplier * per-pCH bandwidth
        assert!((r.effective_bw - 256.0 / 3.33).abs() < 1e-9);
        assert!((r.effective_bw / d.per_pch_bw - d.pim_bw_multiplier).abs() < 1e-9);
    }

    #[test]
    fn command_on_closed_row_is_an_error() {
        let cfg = SystemConfig::default();
        let mut s = CommandStream::new(meta(&cfg));
        s.push(PimCommand::mac(Scope::EvenBanks, 3, 0, 0));
        assert!(matches!(simulate(&s, &cfg), Err(Error::Simulation { index: 0, .. })));
    }

    #[test]
    fn undefined_bank_is_an_error() {
        let cfg = SystemConfig::default();
        let mut s = CommandStream::new(meta(&cfg));
        s.push(PimCommand::act(Scope::SingleBank(40), 0));
        assert!(simulate(&s, &cfg).is_err());
    }

    #[test]
    fn same_bank_acts_respect_trc() {
        let cfg = SystemConfig::default();
        let mut s = CommandStream::new(meta(&cfg));
        for row in 0..4 {
            s.push(PimCommand::act(Scope::SingleBank(2), row));
            s.push(PimCommand::read(2, row, 0));
        }
        let (_, log) = simulate_with_log(&s, &cfg).unwrap();
        let acts: Vec<f64> = log.iter().filter(|e| e.kind == CommandKind::Act).map(|e| e.time).collect();
        for w in acts.windows(2) {
            assert!(w[1] - w[0] >= 48.0 - 1e-9);
        }
    }

    #[test]
    fn single_bank_commands_reorder_across_banks() {
        let cfg = SystemConfig::default();
        let mut s = CommandStream::new(meta(&cfg));
        // bank 0 re-activates (must wait tRC) while bank 1 is ready sooner
        s.push(PimCommand::act(Scope::SingleBank(0), 0));
        s.push(PimCommand::act(Scope::SingleBank(0), 1));
        s.push(PimCommand::read(0, 1, 0));
        s.push(PimCommand::act(Scope::SingleBank(1), 0));
        s.push(PimCommand::read(1, 0, 0));
        let (_, log) = simulate_with_log(&s, &cfg).unwrap();
        let order: Vec<usize> = log.iter().map(|e| e.index).collect();
        assert_eq!(order, vec![0, 3, 4, 1, 2]);
    }

    #[test]
    fn parity_act_overlaps_other_parity() {
        let cfg = SystemConfig::default();
        let mut m = meta(&cfg);
        m.preopened_row = Some(0);
        let mut s = CommandStream::new(m);
        for c in 0..12 {
            s.push(PimCommand::load(Scope::EvenBanks, 0, c, c as u8));
        }
        s.push(PimCommand::act(Scope::EvenBanks, 1));
        for c in 0..12 {
            s.push(PimCommand::load(Scope::OddBanks, 0, c, c as u8));
        }
        s.push(PimCommand::load(Scope::EvenBanks, 1, 0, 0));
        let r = simulate(&s, &cfg).unwrap();
        // odd compute hides the even ACT entirely
        assert!(r.act_stall_ns.abs() < 1e-9, "{r:?}");
    }

    #[test]
    fn nodata_commands_use_multiplied_bandwidth() {
        let mut cfg = SystemConfig::default();
        cfg.pim.cmd_bw_multiplier = 4.0;
        let mut m = meta(&cfg);
        m.preopened_row = Some(0);
        let mut s = CommandStream::new(m);
        s.push(PimCommand::add(Scope::SingleBank(0), 0, 0, 0, None, true));
        s.push(PimCommand::store(Scope::SingleBank(0), 0, 0, 0));
        let r = simulate(&s, &cfg).unwrap();
        let t = 32.0 / 19.2;
        assert!((r.total_ns - (t + t / 4.0)).abs() < 1e-9);
    }
}
