//! Test-only helpers: random stream construction and an exhaustive
//! reference scheduler that shares no code with the crate's engine.
#![allow(dead_code)]

use pimsim::trace::{CommandKind, CommandStream, PimCommand, Scope, StreamMeta};
use pimsim::kernels::SkinnyGemmSpec;
use pimsim::SystemConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random stream in which every column command finds its row opened by an
/// earlier ACT (or by the preopened row).
pub fn random_stream(seed: u64, len: usize, cfg: &SystemConfig) -> CommandStream {
    random_stream_with(seed, len, cfg, false)
}

/// Like `random_stream`, but with `tagged` every multi-bank compute command
/// names a parity; all-bank scope is left to ACTs.
pub fn random_stream_with(seed: u64, len: usize, cfg: &SystemConfig, tagged: bool) -> CommandStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let banks = cfg.geometry.banks_per_pch as u16;
    let regs = cfg.pim.registers_per_alu.min(8) as u8;
    let mut meta = StreamMeta::new("random", len as u64, cfg);
    let preopen = rng.gen_bool(0.5);
    if preopen {
        meta.preopened_row = Some(0);
    }
    let mut open: Vec<Option<u32>> = vec![if preopen { Some(0) } else { None }; banks as usize];
    let mut cmds = Vec::with_capacity(len);
    let per_unit = cfg.geometry.banks_per_pim_unit() as u16;
    let mut written = vec![vec![false; regs as usize]; (banks / per_unit) as usize];
    while cmds.len() < len {
        let scope = match rng.gen_range(0..10) {
            0 => Scope::AllBank,
            1..=3 => Scope::EvenBanks,
            4..=6 => Scope::OddBanks,
            _ => Scope::SingleBank(rng.gen_range(0..banks)),
        };
        let banks_in: Vec<u16> = scope.banks(banks).collect();
        let first = open[banks_in[0] as usize];
        let uniform = first.is_some() && banks_in.iter().all(|&b| open[b as usize] == first);
        if !uniform || rng.gen_bool(0.15) || (tagged && scope == Scope::AllBank) {
            let row = rng.gen_range(0..4);
            cmds.push(PimCommand::act(scope, row));
            for &b in &banks_in {
                open[b as usize] = Some(row);
            }
            continue;
        }
        let row = first.unwrap();
        let col = rng.gen_range(0..32);
        let r = rng.gen_range(0..regs);
        let single = !scope.is_multi();
        let cmd = match rng.gen_range(0..6) {
            0 => PimCommand::load(scope, row, col, r),
            1 => PimCommand::add(scope, row, col, r, None, single && rng.gen_bool(0.5)),
            2 => PimCommand::mac(scope, row, col, r),
            3 => PimCommand::store(scope, row, col, r),
            4 if single => PimCommand::read(banks_in[0], row, col),
            5 if single => PimCommand::write(banks_in[0], row, col),
            _ => PimCommand::load(scope, row, col, r),
        };
        let units: Vec<usize> = match scope {
            Scope::SingleBank(b) => vec![(b / per_unit) as usize],
            _ => (0..written.len()).collect(),
        };
        // reading a register some unit has not written yet: load it instead
        let cmd = match cmd.reads_reg() {
            Some(x) if units.iter().any(|&u| !written[u][x as usize]) => PimCommand::load(scope, row, col, r),
            _ => cmd,
        };
        if let Some(w) = cmd.writes_reg() {
            for &u in &units {
                written[u][w as usize] = true;
            }
        }
        cmds.push(cmd);
    }
    CommandStream::with_commands(meta, cmds)
}

#[derive(Debug, Clone, Copy)]
struct RefBank {
    row: Option<u32>,
    ready: f64,
    act_at: f64,
    col_end: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefResult {
    pub total: f64,
    pub busy: f64,
    pub order: Vec<usize>,
    pub starts: Vec<f64>,
}

fn bank_set(s: Scope, n: u16) -> Vec<u16> {
    (0..n)
        .filter(|&b| match s {
            Scope::AllBank => true,
            Scope::EvenBanks => b % 2 == 0,
            Scope::OddBanks => b % 2 == 1,
            Scope::SingleBank(x) => x == b,
        })
        .collect()
}

fn multi(s: Scope) -> bool {
    !matches!(s, Scope::SingleBank(_))
}

fn compute(k: CommandKind) -> bool {
    matches!(
        k,
        CommandKind::PimLoad | CommandKind::PimAdd | CommandKind::PimMac | CommandKind::PimStore
    )
}

fn conflicts(a: &PimCommand, b: &PimCommand, nbanks: u16, per_unit: u16) -> bool {
    let ba = bank_set(a.scope, nbanks);
    let bb = bank_set(b.scope, nbanks);
    let share_bank = ba.iter().any(|x| bb.contains(x));
    let a_act = a.kind == CommandKind::Act;
    let b_act = b.kind == CommandKind::Act;
    if share_bank && (a_act || b_act || multi(a.scope) || multi(b.scope)) {
        return true;
    }
    if compute(a.kind) && multi(a.scope) && compute(b.kind) && multi(b.scope) {
        return true;
    }
    let ua: Vec<u16> = ba.iter().map(|x| x / per_unit).collect();
    let ub: Vec<u16> = bb.iter().map(|x| x / per_unit).collect();
    let share_unit = ua.iter().any(|x| ub.contains(x));
    let ra = [a.dst_reg, a.src_reg];
    let rb = [b.dst_reg, b.src_reg];
    let share_reg = ra.iter().flatten().any(|r| rb.iter().flatten().any(|q| q == r));
    if share_unit && share_reg {
        return true;
    }
    if let (Scope::SingleBank(x), Scope::SingleBank(y)) = (a.scope, b.scope) {
        if x == y && !a_act && !b_act && a.row == b.row && a.col == b.col {
            return true;
        }
    }
    false
}

/// Exhaustive list scheduler: at every step scan all unissued commands,
/// test readiness against every older unissued command, and issue the one
/// that can start first (oldest on ties).
pub fn reference_simulate(stream: &CommandStream, cfg: &SystemConfig) -> Result<RefResult, String> {
    let nb = cfg.geometry.banks_per_pch as u16;
    let per_unit = (cfg.geometry.banks_per_stack / cfg.geometry.pim_units_per_stack) as u16;
    let per_pch_bw = cfg.gpu.peak_bw_gbs / (cfg.geometry.banks_per_stack / nb as u32) as f64;
    let ccds = cfg.geometry.word_bytes as f64 / per_pch_bw;
    let act_slot = cfg.dram.act_slot_ns.unwrap_or(ccds);
    let trc = cfg.dram.t_ras + cfg.dram.t_rp;
    let slot = |c: &PimCommand| -> f64 {
        if c.kind == CommandKind::Act {
            if multi(c.scope) {
                act_slot
            } else {
                act_slot / cfg.pim.cmd_bw_multiplier
            }
        } else if c.kind == CommandKind::Read || c.kind == CommandKind::Write {
            ccds
        } else if multi(c.scope) {
            cfg.dram.t_ccdl
        } else if c.carries_data {
            ccds
        } else {
            ccds / cfg.pim.cmd_bw_multiplier
        }
    };
    let init = RefBank {
        row: stream.meta.preopened_row,
        ready: 0.0,
        act_at: f64::NEG_INFINITY,
        col_end: f64::NEG_INFINITY,
    };
    let mut banks = vec![init; nb as usize];
    let cmds = &stream.commands;
    let n = cmds.len();
    let mut issued = vec![false; n];
    let mut bus = 0.0f64;
    let mut busy = 0.0;
    let mut order = Vec::new();
    let mut starts = vec![0.0; n];
    for _ in 0..n {
        let mut best: Option<(f64, usize)> = None;
        for j in 0..n {
            if issued[j] {
                continue;
            }
            if (0..j).any(|i| !issued[i] && conflicts(&cmds[i], &cmds[j], nb, per_unit)) {
                continue;
            }
            let c = &cmds[j];
            let mut t = 0.0f64;
            for b in bank_set(c.scope, nb) {
                let s = banks[b as usize];
                if c.kind == CommandKind::Act {
                    t = t.max(s.act_at + trc);
                    if cfg.dram.precharge_after_column {
                        t = t.max(s.col_end + cfg.dram.t_rp);
                    }
                } else {
                    if s.row != Some(c.row) {
                        return Err(format!("command {j} on closed row"));
                    }
                    t = t.max(s.ready);
                }
            }
            let start = t.max(bus);
            if best.is_none_or(|(bs, _)| start < bs) {
                best = Some((start, j));
            }
        }
        let (start, j) = best.ok_or("stuck")?;
        let c = &cmds[j];
        let sl = slot(c);
        for b in bank_set(c.scope, nb) {
            let s = &mut banks[b as usize];
            if c.kind == CommandKind::Act {
                s.row = Some(c.row);
                s.act_at = start;
                s.ready = start + sl + cfg.dram.t_rcd;
            } else {
                s.col_end = s.col_end.max(start + sl);
            }
        }
        issued[j] = true;
        bus = start + sl;
        busy += sl;
        starts[j] = start;
        order.push(j);
    }
    Ok(RefResult {
        total: bus,
        busy,
        order,
        starts,
    })
}

/// Command counts of the sparsity-aware stream, enumerated from the skinny
/// values: per (slot, register group) that has a nonzero anywhere, the C
/// row ACTs, loads and stores stay; each k-chunk with a nonzero keeps its
/// ACT; each nonzero keeps one MAC per parity.
pub fn enumerate_counts(spec: &SkinnyGemmSpec, cfg: &SystemConfig) -> (u64, u64, u64, u64) {
    let a = spec.skinny();
    let banks = cfg.geometry.banks_per_stack as u64;
    let lanes = (cfg.geometry.word_bytes / cfg.gpu.elem_bytes) as u64;
    let slots = spec.m.div_ceil(lanes).div_ceil(banks);
    let half = cfg.pim.registers_per_alu / 2;
    let wpr = cfg.geometry.words_per_row() as u64;
    let chunk = spec.chunk_words;
    let (mut acts, mut macs, mut loads, mut stores) = (0u64, 0u64, 0u64, 0u64);
    for s in 0..slots {
        let mut g0 = 0;
        while g0 < spec.n {
            let cols: Vec<u32> = (g0..(g0 + half).min(spec.n)).collect();
            let nz = |k: u32| cols.iter().filter(|&&j| a.get(k, j) != 0.0).count() as u64;
            let total: u64 = (0..spec.k).map(nz).sum();
            if total > 0 {
                let mut rows: Vec<u64> = cols.iter().map(|&j| (s * spec.n as u64 + j as u64) / wpr).collect();
                rows.dedup();
                acts += 2 * rows.len() as u64;
                loads += 2 * cols.len() as u64;
                stores += 2 * cols.len() as u64;
                macs += 2 * total;
                let mut k0 = 0;
                while k0 < spec.k {
                    if (k0..(k0 + chunk).min(spec.k)).any(|k| nz(k) > 0) {
                        acts += 1;
                    }
                    k0 += chunk;
                }
            }
            g0 += half;
        }
    }
    (acts, macs, loads, stores)
}
