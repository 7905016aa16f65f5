//! Sparse skinny GEMM, `C[M x N] = A[M x K] * B[K x N]` with small N.
//!
//! A stays in memory. Each word holds 16 consecutive rows of A (an m-block)
//! for one k. A DRAM row holds a tile of `words_per_row / chunk_words`
//! m-blocks by `chunk_words` k-steps. Every bank works on its own m-block;
//! the skinny value `B[k][n]` is broadcast as the immediate of a multi-bank
//! PIM_MAC into accumulator `n`. A register file only holds one m-block's
//! accumulators per parity, so each activation serves one m-block's
//! `chunk_words` k-steps and the row is revisited for the others.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::kernels::{Layout, Placement};
use crate::sysmodel::SystemConfig;
use crate::trace::{CommandStream, Parity, PimCommand, Scope, StreamMeta};

/// k-steps per tile row; fixes the MACs issued per activation.
pub const DEFAULT_CHUNK_WORDS: u32 = 4;
pub const MAX_SKINNY_N: u32 = 16;

/// Skinny operand, stored k-major: `values[k * n + j] = B[k][j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkinnyMatrix {
    pub n: u32,
    pub k: u32,
    pub values: Vec<f32>,
}

impl SkinnyMatrix {
    pub fn dense(n: u32, k: u32) -> Self {
        SkinnyMatrix {
            n,
            k,
            values: vec![1.0; (n as usize) * (k as usize)],
        }
    }

    /// Row `k` is all zero with probability `row_sparsity`; entries of the
    /// remaining rows are zero with probability `element_sparsity`, except
    /// that such a row always keeps at least one nonzero. Row sparsity is
    /// then the same for every N.
    pub fn sample(n: u32, k: u32, row_sparsity: f64, element_sparsity: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = Vec::with_capacity((n as usize) * (k as usize));
        for _ in 0..k {
            if rng.gen_bool(row_sparsity.clamp(0.0, 1.0)) {
                values.extend(std::iter::repeat_n(0.0, n as usize));
            } else {
                let start = values.len();
                for _ in 0..n {
                    let zero = rng.gen_bool(element_sparsity.clamp(0.0, 1.0));
                    values.push(if zero { 0.0 } else { rng.gen_range(0.5f32..2.0) });
                }
                if n > 0 && values[start..].iter().all(|&v| v == 0.0) {
                    let j = rng.gen_range(0..n as usize);
                    values[start + j] = rng.gen_range(0.5f32..2.0);
                }
            }
        }
        SkinnyMatrix { n, k, values }
    }

    pub fn get(&self, k: u32, j: u32) -> f32 {
        self.values[k as usize * self.n as usize + j as usize]
    }

    pub fn row_is_zero(&self, k: u32) -> bool {
        (0..self.n).all(|j| self.get(k, j) == 0.0)
    }

    pub fn nonzeros(&self) -> u64 {
        self.values.iter().filter(|&&v| v != 0.0).count() as u64
    }

    pub fn zero_rows(&self) -> u64 {
        (0..self.k).filter(|&k| self.row_is_zero(k)).count() as u64
    }

    pub fn row_sparsity(&self) -> f64 {
        if self.k == 0 {
            0.0
        } else {
            self.zero_rows() as f64 / self.k as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SkinnyGemmSpec {
    pub m: u64,
    pub n: u32,
    pub k: u32,
    pub element_sparsity: f64,
    pub row_sparsity: f64,
    pub seed: u64,
    pub chunk_words: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<SkinnyMatrix>,
}

impl Default for SkinnyGemmSpec {
    fn default() -> Self {
        SkinnyGemmSpec {
            m: 8192,
            n: 8,
            k: 65_536,
            element_sparsity: 0.0,
            row_sparsity: 0.0,
            seed: 1,
            chunk_words: DEFAULT_CHUNK_WORDS,
            values: None,
        }
    }
}

impl SkinnyGemmSpec {
    /// Explicit values when given, otherwise a draw from the seeded model.
    pub fn skinny(&self) -> SkinnyMatrix {
        self.values.clone().unwrap_or_else(|| {
            SkinnyMatrix::sample(self.n, self.k, self.row_sparsity, self.element_sparsity, self.seed)
        })
    }
}

#[derive(Debug, Clone)]
pub struct SsgemmOutput {
    pub stream: CommandStream,
    pub placement: Placement,
    pub skinny: SkinnyMatrix,
    pub warnings: Vec<String>,
}

pub fn gen_ssgemm(spec: &SkinnyGemmSpec, cfg: &SystemConfig) -> SsgemmOutput {
    gen_ssgemm_with(spec, cfg, false)
}

/// `skip_zeros` drops every MAC whose broadcast operand is exactly zero and
/// every activation whose visit would issue nothing.
pub fn gen_ssgemm_with(spec: &SkinnyGemmSpec, cfg: &SystemConfig, skip_zeros: bool) -> SsgemmOutput {
    let skinny = spec.skinny();
    let mut warnings = Vec::new();
    if spec.n > MAX_SKINNY_N {
        warnings.push(format!("N = {} is outside the skinny regime (> {MAX_SKINNY_N})", spec.n));
    }
    let lanes = (cfg.geometry.word_bytes / cfg.gpu.elem_bytes) as u64;
    let banks_total = cfg.geometry.banks_per_stack as u64;
    let m_blocks = spec.m.div_ceil(lanes);
    let slots = m_blocks.div_ceil(banks_total);
    if !m_blocks.is_multiple_of(banks_total) {
        warnings.push(format!("{m_blocks} m-blocks do not divide evenly over {banks_total} banks"));
    }
    let wpr = cfg.geometry.words_per_row();
    let chunk = spec.chunk_words.clamp(1, wpr);
    let tile_m = (wpr / chunk) as u64;
    let k_chunks = (spec.k as u64).div_ceil(chunk as u64);

    let mut placement = Placement::new(cfg);
    let a_rows = (slots.div_ceil(tile_m) * k_chunks) as u32;
    placement.add("a", 0, Layout::Blocked { words_per_item: spec.k.max(1) }, m_blocks);
    let c_base = a_rows;
    placement.add("c", c_base, Layout::Blocked { words_per_item: spec.n.max(1) }, m_blocks);

    let mut stream = CommandStream::new(StreamMeta::new("ss-gemm", spec.m * spec.n as u64 * spec.k as u64, cfg));
    if spec.k == 0 || spec.n == 0 {
        return SsgemmOutput {
            stream,
            placement,
            skinny,
            warnings,
        };
    }
    let half = (cfg.pim.registers_per_alu / cfg.geometry.banks_per_pim_unit()).max(1);
    let parities = [Parity::Even, Parity::Odd];
    let reg = |p: usize, j: u32| (p as u32 * half + j) as u8;

    for s in 0..slots {
        let tile_row = (s / tile_m) * k_chunks;
        let tile_col = (s % tile_m) as u32 * chunk;
        let c_word = s * spec.n as u64;
        let mut g0 = 0;
        while g0 < spec.n {
            let group = (spec.n - g0).min(half);
            if skip_zeros && (0..spec.k).all(|k| (0..group).all(|j| skinny.get(k, g0 + j) == 0.0)) {
                g0 += group;
                continue;
            }
            let c_loc = |j: u32| {
                let w = c_word + (g0 + j) as u64;
                (c_base + (w / wpr as u64) as u32, (w % wpr as u64) as u32)
            };
            let mut c_open = None;
            for j in 0..group {
                let (row, col) = c_loc(j);
                if c_open != Some(row) {
                    stream.push(PimCommand::act(Scope::AllBank, row));
                    c_open = Some(row);
                }
                for (p, &par) in parities.iter().enumerate() {
                    stream.push(PimCommand::load(Scope::of_parity(par), row, col, reg(p, j)));
                }
            }
            for kc in 0..k_chunks {
                let row = (tile_row + kc) as u32;
                let k_lo = (kc * chunk as u64) as u32;
                let k_hi = (k_lo + chunk).min(spec.k);
                let live = |k: u32, j: u32| !skip_zeros || skinny.get(k, g0 + j) != 0.0;
                if !(k_lo..k_hi).any(|k| (0..group).any(|j| live(k, j))) {
                    continue;
                }
                stream.push(PimCommand::act(Scope::AllBank, row));
                for k in k_lo..k_hi {
                    let col = tile_col + (k - k_lo);
                    for j in (0..group).filter(|&j| live(k, j)) {
                        for (p, &par) in parities.iter().enumerate() {
                            stream.push(PimCommand::mac(Scope::of_parity(par), row, col, reg(p, j)));
                        }
                    }
                }
            }
            let mut c_open = None;
            for j in 0..group {
                let (row, col) = c_loc(j);
                if c_open != Some(row) {
                    stream.push(PimCommand::act(Scope::AllBank, row));
                    c_open = Some(row);
                }
                for (p, &par) in parities.iter().enumerate() {
                    stream.push(PimCommand::store(Scope::of_parity(par), row, col, reg(p, j)));
                }
            }
            g0 += group;
        }
    }
    SsgemmOutput {
        stream,
        placement,
        skinny,
        warnings,
    }
}
