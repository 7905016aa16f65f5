//! C = A + B over co-aligned fp16 vectors.
//!
//! Per register block: ACT(A row), loads, ACT(B row), adds, ACT(C row),
//! stores. A block covers `min(registers, words_per_row) / banks_per_unit`
//! columns of each bank, since the paired banks of a PIM unit split its
//! register file.

use crate::kernels::{Layout, Placement};
use crate::sysmodel::SystemConfig;
use crate::trace::{CommandStream, Parity, PimCommand, Scope, StreamMeta};

/// Columns of each bank handled per register block.
pub fn block_columns(cfg: &SystemConfig) -> u32 {
    let factor = cfg.pim.registers_per_alu.min(cfg.geometry.words_per_row());
    (factor / cfg.geometry.banks_per_pim_unit()).max(1)
}

/// Elements covered by one SIMD-wide step across the whole stack.
pub fn lanes_per_stack(cfg: &SystemConfig) -> u64 {
    let per_word = (cfg.geometry.word_bytes / cfg.gpu.elem_bytes) as u64;
    per_word * cfg.geometry.banks_per_stack as u64
}

pub fn gen_vector_sum(n: u64, cfg: &SystemConfig) -> (CommandStream, Placement) {
    let lanes = lanes_per_stack(cfg);
    let padded = n.div_ceil(lanes) * lanes;
    let words_per_bank = padded / lanes;
    let per_word = (cfg.geometry.word_bytes / cfg.gpu.elem_bytes) as u64;
    let mut placement = Placement::new(cfg);
    let rows = placement.rows_for(words_per_bank);
    let total_words = padded / per_word;
    let a = placement.add("a", 0, Layout::Striped, total_words);
    let b = placement.add("b", rows, Layout::Striped, total_words);
    let c = placement.add("c", 2 * rows, Layout::Striped, total_words);
    let base = |region: usize| placement.regions[region].base_row;

    let mut stream = CommandStream::new(StreamMeta::new("vector-sum", n, cfg));
    let wpr = cfg.geometry.words_per_row() as u64;
    let blk = block_columns(cfg) as u64;
    let parities = [Parity::Even, Parity::Odd];
    let reg = |p: usize, j: u64| (p as u64 * blk + j) as u8;
    let mut w = 0;
    while w < words_per_bank {
        let row = (w / wpr) as u32;
        let col0 = w % wpr;
        let span = blk.min(wpr - col0).min(words_per_bank - w);
        let cols = || (0..span).map(|j| (j, (col0 + j) as u32));

        stream.push(PimCommand::act(Scope::AllBank, base(a) + row));
        for (j, col) in cols() {
            for (p, &par) in parities.iter().enumerate() {
                stream.push(PimCommand::load(Scope::of_parity(par), base(a) + row, col, reg(p, j)));
            }
        }
        stream.push(PimCommand::act(Scope::AllBank, base(b) + row));
        for (j, col) in cols() {
            for (p, &par) in parities.iter().enumerate() {
                let r = reg(p, j);
                stream.push(PimCommand::add(Scope::of_parity(par), base(b) + row, col, r, None, false));
            }
        }
        stream.push(PimCommand::act(Scope::AllBank, base(c) + row));
        for (j, col) in cols() {
            for (p, &par) in parities.iter().enumerate() {
                stream.push(PimCommand::store(Scope::of_parity(par), base(c) + row, col, reg(p, j)));
            }
        }
        w += span;
    }
    (stream, placement)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{stats, validate, CommandKind};

    #[test]
    fn empty_input_gives_empty_stream() {
        let cfg = SystemConfig::default();
        assert!(gen_vector_sum(0, &cfg).0.is_empty());
    }

    #[test]
    fn one_register_block_opens_three_rows_per_bank() {
        let cfg = SystemConfig::default();
        let n = lanes_per_stack(&cfg) * block_columns(&cfg) as u64;
        let (s, _) = gen_vector_sum(n, &cfg);
        let st = stats(&s);
        assert!(st.rows_activated.iter().all(|&r| r == 3));
        assert_eq!(st.multibank(CommandKind::PimLoad), 16);
        assert!(validate(&s, &cfg).is_ok());
    }

    #[test]
    fn one_row_buffer_per_bank() {
        // 32 words per bank: four 8-column register blocks, three rows each;
        // a 64-entry file halves the block count
        let cfg = SystemConfig::default();
        let n = lanes_per_stack(&cfg) * 32;
        let st = stats(&gen_vector_sum(n, &cfg).0);
        assert!(st.rows_activated.iter().all(|&r| r == 12));
        let mut big = cfg;
        big.pim.registers_per_alu = 64;
        let st = stats(&gen_vector_sum(n, &big).0);
        assert!(st.rows_activated.iter().all(|&r| r == 6));
    }

    #[test]
    fn counts_scale_linearly() {
        let cfg = SystemConfig::default();
        let unit = lanes_per_stack(&cfg) * 32;
        let base = stats(&gen_vector_sum(unit, &cfg).0).total;
        for k in [2u64, 3, 7] {
            assert_eq!(stats(&gen_vector_sum(unit * k, &cfg).0).total, base * k);
        }
    }

    #[test]
    fn partial_sizes_are_padded() {
        let cfg = SystemConfig::default();
        let (s, _) = gen_vector_sum(1, &cfg);
        assert_eq!(stats(&s).multibank(CommandKind::PimStore), 2);
    }
}
