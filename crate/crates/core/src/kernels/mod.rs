//! Kernel generators: data placement plus baseline pim-command orchestration
//! for each studied primitive.
//!
//! Generators emit the stream of one pseudo-channel. When the work is split
//! evenly every pCH runs the same stream and one simulation stands for the
//! stack; push is the exception and produces one stream per pCH.

pub mod graph;
pub mod push;
pub mod ssgemm;
pub mod stencil;
pub mod vector_sum;

use serde::{Deserialize, Serialize};

use crate::sysmodel::SystemConfig;

pub use graph::{road_lattice, scrambled_road, synth_powerlaw_graph, GraphCsr};
pub use push::{gen_push, gen_push_with, node_placement, node_slots, PushOutput, PUSH_ROW_SPAN};
pub use ssgemm::{gen_ssgemm, gen_ssgemm_with, SkinnyGemmSpec, SkinnyMatrix, SsgemmOutput};
pub use stencil::{gen_wavesim_flux, gen_wavesim_volume, MeshTiling, StencilKernelSpec, StencilOutput};
pub use vector_sum::gen_vector_sum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Location {
    pub pch: u32,
    pub bank: u16,
    pub row: u32,
    pub col: u32,
}

/// How a region's words (or items) are spread over the stack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Layout {
    /// Word `w` goes to bank `w % banks`, then pCH, then fills each bank's
    /// rows column by column.
    Striped,
    /// Same bank/pCH striping, but inside a bank the row index advances
    /// first, cycling over `span` rows.
    RowFastest { span: u32 },
    /// Item `i` owns `words_per_item` consecutive words inside one bank; items
    /// are striped over banks then pCHs.
    Blocked { words_per_item: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub name: String,
    pub base_row: u32,
    pub layout: Layout,
    /// Words (Striped/RowFastest) or items (Blocked) in the region.
    pub len: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub banks_per_pch: u16,
    pub num_pch: u32,
    pub words_per_row: u32,
    pub regions: Vec<Region>,
}

impl Placement {
    pub fn new(cfg: &SystemConfig) -> Self {
        Placement {
            banks_per_pch: cfg.geometry.banks_per_pch as u16,
            num_pch: cfg.geometry.num_pch(),
            words_per_row: cfg.geometry.words_per_row(),
            regions: Vec::new(),
        }
    }

    pub fn add(&mut self, name: &str, base_row: u32, layout: Layout, len: u64) -> usize {
        self.regions.push(Region {
            name: name.to_string(),
            base_row,
            layout,
            len,
        });
        self.regions.len() - 1
    }

    pub fn region(&self, name: &str) -> Option<usize> {
        self.regions.iter().position(|r| r.name == name)
    }

    fn banks_total(&self) -> u64 {
        self.banks_per_pch as u64 * self.num_pch as u64
    }

    fn spread(&self, i: u64) -> (u32, u16, u64) {
        let b = self.banks_per_pch as u64;
        let bank = (i % b) as u16;
        let pch = ((i / b) % self.num_pch as u64) as u32;
        (pch, bank, i / self.banks_total())
    }

    /// Location of word `offset` of the region (for Blocked regions,
    /// `offset = item * words_per_item + word`).
    pub fn locate(&self, region: usize, offset: u64) -> Location {
        let r = &self.regions[region];
        let wpr = self.words_per_row as u64;
        match r.layout {
            Layout::Striped => {
                let (pch, bank, local) = self.spread(offset);
                Location {
                    pch,
                    bank,
                    row: r.base_row + (local / wpr) as u32,
                    col: (local % wpr) as u32,
                }
            }
            Layout::RowFastest { span } => {
                let (pch, bank, local) = self.spread(offset);
                let span = span.max(1) as u64;
                let block = local / (span * wpr);
                let within = local % (span * wpr);
                Location {
                    pch,
                    bank,
                    row: r.base_row + (block * span + within % span) as u32,
                    col: (within / span) as u32,
                }
            }
            Layout::Blocked { words_per_item } => {
                let wpi = words_per_item as u64;
                let (pch, bank, slot) = self.spread(offset / wpi);
                let local = slot * wpi + offset % wpi;
                Location {
                    pch,
                    bank,
                    row: r.base_row + (local / wpr) as u32,
                    col: (local % wpr) as u32,
                }
            }
        }
    }

    /// Rows one bank needs for `words_per_bank` words of any layout.
    pub fn rows_for(&self, words_per_bank: u64) -> u32 {
        words_per_bank.div_ceil(self.words_per_row as u64) as u32
    }
}

/// Warning raised when per-pCH or per-bank work is not evenly divided.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Imbalance {
    pub max_share: f64,
    pub mean_share: f64,
}

impl Imbalance {
    pub fn ratio(&self) -> f64 {
        if self.mean_share == 0.0 {
            1.0
        } else {
            self.max_share / self.mean_share
        }
    }
}
