//! Push-style graph update: each source value is read once, then every
//! outgoing edge becomes a single-bank PIM_ADD (operand on the data bus)
//! followed by a PIM_STORE (no data) at the destination's word.
//!
//! Node values take one word each. Nodes are dealt to banks in decreasing
//! in-degree order, snaking across the stack, so update load is even per
//! bank. Inside a bank the row index advances fastest, cycling over
//! `PUSH_ROW_SPAN` rows, so back-to-back updates to a bank usually need a
//! fresh activation as they would for a million-node graph.

use crate::kernels::{GraphCsr, Imbalance, Layout, Placement};
use crate::sysmodel::SystemConfig;
use crate::trace::{CommandStream, PimCommand, Scope, StreamMeta};

pub const PUSH_ROW_SPAN: u32 = 64;

#[derive(Debug, Clone)]
pub struct PushOutput {
    /// One stream per pseudo-channel.
    pub streams: Vec<CommandStream>,
    pub placement: Placement,
    pub source_reads: u64,
    pub offloaded_edges: u64,
    pub imbalance: Imbalance,
}

impl PushOutput {
    pub fn busiest(&self) -> usize {
        (0..self.streams.len()).max_by_key(|&i| (self.streams[i].len(), std::cmp::Reverse(i))).unwrap_or(0)
    }
}

pub fn node_placement(graph: &GraphCsr, cfg: &SystemConfig, span: u32) -> Placement {
    let mut p = Placement::new(cfg);
    // whole rounds of node_slots
    let banks = cfg.geometry.banks_per_stack as u64;
    p.add("nodes", 0, Layout::RowFastest { span }, (graph.nodes as u64).div_ceil(banks) * banks);
    p
}

/// Word slot of every node in the node region: rank `r` in decreasing
/// in-degree order (ties by id) goes to round `r / B`, position `r % B`,
/// reversed on odd rounds, where `B` is the number of banks in the stack.
/// Within a round the position picks the pCH first, then the bank.
pub fn node_slots(graph: &GraphCsr, cfg: &SystemConfig) -> Vec<u64> {
    let banks = cfg.geometry.banks_per_stack as u64;
    let per_pch = cfg.geometry.banks_per_pch as u64;
    let npch = banks / per_pch;
    let deg = graph.in_degrees();
    let mut order: Vec<u32> = (0..graph.nodes).collect();
    order.sort_by_key(|&v| (std::cmp::Reverse(deg[v as usize]), v));
    let mut slots = vec![0u64; graph.nodes as usize];
    for (r, &v) in order.iter().enumerate() {
        let (round, pos) = (r as u64 / banks, r as u64 % banks);
        let pos = if round % 2 == 0 { pos } else { banks - 1 - pos };
        // pCH varies fastest so neighbouring ranks land on different buses
        let (pch, bank) = (pos % npch, pos / npch);
        slots[v as usize] = round * banks + pch * per_pch + bank;
    }
    slots
}

pub fn gen_push(graph: &GraphCsr, cfg: &SystemConfig, offload_mask: Option<&[bool]>) -> PushOutput {
    gen_push_with(graph, cfg, offload_mask, None, PUSH_ROW_SPAN)
}

/// `read_mask[v] = false` drops the READ of source `v` (its value is cached).
pub fn gen_push_with(
    graph: &GraphCsr,
    cfg: &SystemConfig,
    offload_mask: Option<&[bool]>,
    read_mask: Option<&[bool]>,
    span: u32,
) -> PushOutput {
    let placement = node_placement(graph, cfg, span);
    let slots = node_slots(graph, cfg);
    let npch = cfg.geometry.num_pch() as usize;
    let banks = cfg.geometry.banks_per_pch as usize;
    let mut streams: Vec<CommandStream> = (0..npch)
        .map(|_| CommandStream::new(StreamMeta::new("push", graph.edge_count(), cfg)))
        .collect();
    let mut open = vec![vec![None::<u32>; banks]; npch];
    let mut uses = vec![vec![0u32; banks]; npch];
    let regs = cfg.pim.registers_per_alu;
    let half = (regs / cfg.geometry.banks_per_pim_unit()).max(1);
    let mut source_reads = 0;
    let mut offloaded = 0;

    let mut touch = |streams: &mut Vec<CommandStream>, pch: usize, bank: u16, row: u32| {
        let slot = &mut open[pch][bank as usize];
        if *slot != Some(row) {
            streams[pch].push(PimCommand::act(Scope::SingleBank(bank), row));
            *slot = Some(row);
        }
    };

    let mut edge = 0usize;
    for u in 0..graph.nodes {
        if read_mask.is_none_or(|m| m[u as usize]) {
            let l = placement.locate(0, slots[u as usize]);
            touch(&mut streams, l.pch as usize, l.bank, l.row);
            streams[l.pch as usize].push(PimCommand::read(l.bank, l.row, l.col));
            source_reads += 1;
        }
        for &v in graph.neighbors(u) {
            let take = offload_mask.is_none_or(|m| m[edge]);
            edge += 1;
            if !take {
                continue;
            }
            let l = placement.locate(0, slots[v as usize]);
            let (p, b) = (l.pch as usize, l.bank);
            touch(&mut streams, p, b, l.row);
            let parity = b as u32 % 2;
            let reg = if regs >= 2 { parity * half + uses[p][b as usize] % half } else { 0 } as u8;
            uses[p][b as usize] += 1;
            let scope = Scope::SingleBank(b);
            streams[p].push(PimCommand::add(scope, l.row, l.col, reg, None, true));
            streams[p].push(PimCommand::store(scope, l.row, l.col, reg));
            offloaded += 1;
        }
    }
    let lens: Vec<f64> = streams.iter().map(|s| s.len() as f64).collect();
    let imbalance = Imbalance {
        max_share: lens.iter().cloned().fold(0.0, f64::max),
        mean_share: lens.iter().sum::<f64>() / lens.len().max(1) as f64,
    };
    PushOutput {
        streams,
        placement,
        source_reads,
        offloaded_edges: offloaded,
        imbalance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::synth_powerlaw_graph;
    use crate::trace::{stats, validate, CommandKind};

    fn non_act(out: &PushOutput) -> u64 {
        out.streams.iter().map(|s| s.iter().filter(|c| !c.is_act()).count() as u64).sum()
    }

    #[test]
    fn node_slots_are_a_permutation() {
        let g = synth_powerlaw_graph(3000, 20_000, 9).unwrap();
        let mut s = node_slots(&g, &SystemConfig::default());
        s.sort_unstable();
        s.dedup();
        assert_eq!(s.len(), 3000);
        assert!(*s.last().unwrap() < 3072);
    }

    #[test]
    fn lone_node_reads_its_source() {
        let g = GraphCsr::from_edges(1, &[]).unwrap();
        let out = gen_push(&g, &SystemConfig::default(), None);
        assert_eq!(non_act(&out), 1);
        assert_eq!(out.source_reads, 1);
    }

    #[test]
    fn star_graph() {
        let k = 40u32;
        let edges: Vec<(u32, u32)> = (1..=k).map(|d| (0, d)).collect();
        let g = GraphCsr::from_edges(k + 1, &edges).unwrap();
        let cfg = SystemConfig::default();
        let out = gen_push(&g, &cfg, None);
        let reads: u64 = out.streams.iter().map(|s| stats(s).kind(CommandKind::Read)).sum();
        let adds: u64 = out.streams.iter().map(|s| stats(s).kind(CommandKind::PimAdd)).sum();
        assert_eq!((reads, adds), (k as u64 + 1, k as u64));
        let star = out.streams.iter().flat_map(|s| s.iter()).filter(|c| c.kind == CommandKind::PimAdd);
        assert!(star.clone().all(|c| c.carries_data));
        for s in &out.streams {
            assert!(validate(s, &cfg).is_ok());
            assert!(s.iter().filter(|c| c.kind == CommandKind::PimStore).all(|c| !c.carries_data));
        }
    }

    #[test]
    fn masked_edges_emit_nothing() {
        let g = synth_powerlaw_graph(300, 2000, 4).unwrap();
        let cfg = SystemConfig::default();
        let mask: Vec<bool> = (0..g.edge_count()).map(|i| i % 3 == 0).collect();
        let out = gen_push(&g, &cfg, Some(&mask));
        let kept = mask.iter().filter(|&&m| m).count() as u64;
        assert_eq!(out.offloaded_edges, kept);
        assert_eq!(non_act(&out), out.source_reads + 2 * kept);
        for s in &out.streams {
            assert!(validate(s, &cfg).is_ok());
        }
    }
}
