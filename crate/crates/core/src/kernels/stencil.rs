//! Wave-simulation kernels at command-statistics fidelity.
//!
//! An element lives in one bank; every bank processes the element in the
//! same slot, so all compute is multi-bank and parity scoped. Per element
//! and parity the schedule issues `load_words` loads, the compute commands
//! and `store_words` stores, spread evenly over `rows_per_element` row
//! visits. If `live_registers` exceeds the registers a parity owns, every
//! excess value costs a store and a reload, the element takes
//! `ceil(live / available)` passes over its rows, and the two parities
//! interleave in short runs because neither can hold a long run of partial
//! results.
//!
//! The first row of the stream is already open: the kernel runs inside a
//! time-step loop and the previous step leaves it activated.

use serde::{Deserialize, Serialize};

use crate::kernels::{Layout, Placement};
use crate::sysmodel::SystemConfig;
use crate::trace::{CommandStream, Parity, PimCommand, Scope, StreamMeta};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StencilKernelSpec {
    pub elements: u64,
    pub points_per_element: u32,
    pub load_words: u32,
    pub store_words: u32,
    pub compute_cmds_per_element: u32,
    pub live_registers: u32,
    pub rows_per_element: u32,
    /// Target share of neighbour face pairs whose elements share a bank.
    pub neighbor_intra_bank_fraction: f64,
    /// Extra compute commands per intra-bank neighbour face (flux only).
    pub face_cmds: u32,
    /// Words of one face's data.
    pub face_words: u32,
}

impl StencilKernelSpec {
    /// Calibrated volume kernel: 729-point elements read and written once,
    /// low register pressure.
    pub fn volume() -> Self {
        StencilKernelSpec {
            elements: 4096,
            points_per_element: 729,
            load_words: 46,
            store_words: 46,
            compute_cmds_per_element: 108,
            live_registers: 8,
            rows_per_element: 17,
            neighbor_intra_bank_fraction: 1.0,
            face_cmds: 0,
            face_words: 0,
        }
    }

    /// Calibrated flux kernel: face-heavy, high register pressure.
    pub fn flux() -> Self {
        StencilKernelSpec {
            elements: 4096,
            points_per_element: 729,
            load_words: 46,
            store_words: 46,
            compute_cmds_per_element: 30,
            live_registers: 32,
            rows_per_element: 11,
            neighbor_intra_bank_fraction: 5.0 / 6.0,
            face_cmds: 2,
            face_words: 5,
        }
    }

    pub fn validate(&self) -> crate::Result<()> {
        if self.live_registers == 0 {
            return Err(crate::Error::Invariant("live_registers must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.neighbor_intra_bank_fraction) {
            return Err(crate::Error::Invariant(
                "neighbor_intra_bank_fraction: fraction out of range".into(),
            ));
        }
        if self.rows_per_element == 0 {
            return Err(crate::Error::Invariant("rows_per_element must be >= 1".into()));
        }
        Ok(())
    }
}

impl Default for StencilKernelSpec {
    fn default() -> Self {
        Self::volume()
    }
}

/// How the periodic element mesh is cut into per-bank tiles.
///
/// Each bank owns a `tile` block; the banks form a `grid` of tiles. A
/// dimension with a single tile wraps inside the tile, so its pairs are all
/// intra-bank. `local` means every bank holds an independent periodic
/// subdomain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeshTiling {
    pub tile: [u64; 3],
    pub grid: [u64; 3],
    pub local: bool,
}

fn factor_triples(n: u64) -> Vec<[u64; 3]> {
    let mut out = Vec::new();
    for a in 1..=n {
        if !n.is_multiple_of(a) {
            continue;
        }
        for b in 1..=n / a {
            if (n / a).is_multiple_of(b) {
                out.push([a, b, n / a / b]);
            }
        }
    }
    out
}

impl MeshTiling {
    /// Tiling over `banks` tiles of `slots` elements whose intra-bank pair
    /// share is closest to `target` (first found on ties).
    pub fn choose(slots: u64, banks: u64, target: f64) -> Self {
        let slots = slots.max(1);
        if target >= 1.0 {
            return MeshTiling {
                tile: [slots, 1, 1],
                grid: [1, 1, 1],
                local: true,
            };
        }
        let mut best: Option<(f64, MeshTiling)> = None;
        for grid in factor_triples(banks) {
            for tile in factor_triples(slots) {
                let t = MeshTiling { tile, grid, local: false };
                let err = (t.intra_fraction() - target).abs();
                if best.is_none_or(|(e, _)| err < e - 1e-12) {
                    best = Some((err, t));
                }
            }
        }
        best.map(|b| b.1).unwrap()
    }

    pub fn dims(&self) -> [u64; 3] {
        [0, 1, 2].map(|d| self.tile[d] * self.grid[d])
    }

    fn wraps(&self, d: usize) -> bool {
        self.local || self.grid[d] == 1
    }

    /// Intra-bank faces (of 6) of the element at tile position `p`.
    pub fn intra_faces(&self, p: [u64; 3]) -> u32 {
        let mut n = 0;
        for d in 0..3 {
            if self.wraps(d) {
                n += 2;
            } else {
                n += (p[d] > 0) as u32 + (p[d] + 1 < self.tile[d]) as u32;
            }
        }
        n
    }

    pub fn slot_position(&self, slot: u64) -> [u64; 3] {
        let [tx, ty, _] = self.tile;
        [slot % tx, (slot / tx) % ty, slot / (tx * ty)]
    }

    pub fn intra_fraction(&self) -> f64 {
        let slots: u64 = self.tile.iter().product();
        let faces: u64 = (0..slots).map(|s| self.intra_faces(self.slot_position(s)) as u64).sum();
        faces as f64 / (6 * slots) as f64
    }

    /// Global bank index and slot of the element at global coordinates.
    pub fn owner(&self, g: [u64; 3]) -> (u64, u64) {
        let t = [0, 1, 2].map(|d| g[d] / self.tile[d]);
        let l = [0, 1, 2].map(|d| g[d] % self.tile[d]);
        let bank = t[0] + self.grid[0] * (t[1] + self.grid[1] * t[2]);
        let slot = l[0] + self.tile[0] * (l[1] + self.tile[1] * l[2]);
        (bank, slot)
    }
}

#[derive(Debug, Clone)]
pub struct StencilOutput {
    pub stream: CommandStream,
    pub placement: Placement,
    pub tiling: MeshTiling,
    /// Inter-bank face traffic left to the GPU.
    pub gpu_residual_bytes: f64,
    pub intra_fraction: f64,
}

pub fn gen_wavesim_volume(spec: &StencilKernelSpec, cfg: &SystemConfig) -> StencilOutput {
    generate("wavesim-volume", spec, cfg, false)
}

pub fn gen_wavesim_flux(spec: &StencilKernelSpec, cfg: &SystemConfig) -> StencilOutput {
    generate("wavesim-flux", spec, cfg, true)
}

#[derive(Clone, Copy)]
enum Op {
    Load,
    Compute,
    Store,
}

fn generate(name: &str, spec: &StencilKernelSpec, cfg: &SystemConfig, flux: bool) -> StencilOutput {
    let banks_total = cfg.geometry.banks_per_stack as u64;
    let slots = spec.elements.div_ceil(banks_total);
    let tiling = MeshTiling::choose(slots, banks_total, if flux { spec.neighbor_intra_bank_fraction } else { 1.0 });
    let intra_fraction = if flux { tiling.intra_fraction() } else { 1.0 };

    let wpr = cfg.geometry.words_per_row();
    let rows = spec.rows_per_element.max(1);
    let mut placement = Placement::new(cfg);
    placement.add(
        "elements",
        0,
        Layout::Blocked {
            words_per_item: rows * wpr,
        },
        slots * banks_total,
    );

    let cap = (cfg.pim.registers_per_alu / cfg.geometry.banks_per_pim_unit()).max(1);
    let live = spec.live_registers.max(1);
    let excess = live.saturating_sub(cap);
    let passes = live.div_ceil(cap);
    let visits = rows * passes;

    let mut stream = CommandStream::new(StreamMeta::new(name, spec.elements, cfg));
    let parities = [Parity::Even, Parity::Odd];
    let mut first = true;
    let mut start_parity = 0usize;
    for s in 0..slots {
        let faces = if flux { tiling.intra_faces(tiling.slot_position(s)) } else { 0 };
        let compute = spec.compute_cmds_per_element + spec.face_cmds * faces;
        let mut ops = Vec::new();
        ops.extend(std::iter::repeat_n(Op::Load, spec.load_words as usize));
        ops.extend(std::iter::repeat_n(Op::Compute, compute as usize));
        for _ in 0..excess {
            ops.push(Op::Store);
            ops.push(Op::Load);
        }
        ops.extend(std::iter::repeat_n(Op::Store, spec.store_words as usize));
        let total = ops.len() as u64;
        let written = (spec.load_words.max(compute).max(excess.min(1))).clamp(1, cap);
        let base_row = (s * rows as u64) as u32;
        for v in 0..visits as u64 {
            let lo = (v * total / visits as u64) as usize;
            let hi = ((v + 1) * total / visits as u64) as usize;
            if lo == hi {
                continue;
            }
            let row = base_row + (v % rows as u64) as u32;
            if first {
                stream.meta.preopened_row = Some(row);
                first = false;
            } else {
                stream.push(PimCommand::act(Scope::AllBank, row));
            }
            let k = hi - lo;
            let run = if excess == 0 { k } else { (k * cap as usize / live as usize).max(1) };
            let mut next = [lo, lo];
            // short runs walk the bank pair back and forth: a visit starts
            // with the parity the previous one ended on
            let mut p = if excess == 0 { 0 } else { start_parity };
            while next[0] < hi || next[1] < hi {
                if next[p] < hi {
                    let end = (next[p] + run).min(hi);
                    for i in next[p]..end {
                        let scope = Scope::of_parity(parities[p]);
                        let col = (i as u32) % wpr;
                        let r = (p as u32 * cap + (i as u32) % cap) as u8;
                        let w = (p as u32 * cap + (i as u32) % written) as u8;
                        stream.push(match ops[i] {
                            Op::Load => PimCommand::load(scope, row, col, r),
                            Op::Compute => PimCommand::add(scope, row, col, r, None, false),
                            Op::Store => PimCommand::store(scope, row, col, w),
                        });
                    }
                    next[p] = end;
                    start_parity = p;
                }
                p ^= 1;
            }
        }
    }

    let gpu_residual_bytes = if flux {
        let inter_faces = (1.0 - intra_fraction) * 6.0 * (slots * banks_total) as f64;
        // the GPU fetches the neighbour's face for every inter-bank face
        inter_faces * (spec.face_words * cfg.geometry.word_bytes) as f64
    } else {
        0.0
    };
    StencilOutput {
        stream,
        placement,
        tiling,
        gpu_residual_bytes,
        intra_fraction,
    }
}
