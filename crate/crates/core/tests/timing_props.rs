mod common;

use common::{random_stream, reference_simulate};
use pimsim::timing::{simulate, simulate_with_log};
use pimsim::trace::{CommandKind, PimCommand};
use pimsim::SystemConfig;
use proptest::prelude::*;

fn configs() -> Vec<SystemConfig> {
    let base = SystemConfig::default();
    let mut mult = base;
    mult.pim.cmd_bw_multiplier = 4.0;
    let mut no_pre = base;
    no_pre.dram.precharge_after_column = false;
    let mut zero_act = base;
    zero_act.dram.act_slot_ns = Some(0.0);
    vec![base, mult, no_pre, zero_act]
}

#[test]
fn engine_matches_reference_scheduler() {
    for (ci, cfg) in configs().iter().enumerate() {
        for seed in 0..150u64 {
            let len = 1 + (seed as usize * 37) % 200;
            let s = random_stream(seed * 7 + ci as u64, len, cfg);
            let (r, log) = simulate_with_log(&s, cfg).unwrap();
            let reference = reference_simulate(&s, cfg).unwrap();
            let order: Vec<usize> = log.iter().map(|e| e.index).collect();
            assert_eq!(order, reference.order, "cfg {ci} seed {seed}");
            assert_eq!(r.total_ns, reference.total, "cfg {ci} seed {seed}");
            assert_eq!(r.slot_busy_ns, reference.busy);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(250))]

    #[test]
    fn busy_time_is_a_lower_bound(seed in any::<u64>(), len in 0usize..300) {
        let cfg = SystemConfig::default();
        let s = random_stream(seed, len, &cfg);
        let r = simulate(&s, &cfg).unwrap();
        prop_assert!(r.total_ns + 1e-9 >= r.slot_busy_ns);
        prop_assert!((r.total_ns - (r.slot_busy_ns + r.act_stall_ns)).abs() < 1e-6);
        if r.act_stall_ns < 1e-9 {
            prop_assert!((r.total_ns - r.slot_busy_ns).abs() < 1e-6);
        }
    }

    #[test]
    fn same_bank_acts_are_trc_apart(seed in any::<u64>(), len in 1usize..300) {
        let cfg = SystemConfig::default();
        let s = random_stream(seed, len, &cfg);
        let (_, log) = simulate_with_log(&s, &cfg).unwrap();
        let mut last = [f64::NEG_INFINITY; 16];
        for e in log.iter().filter(|e| e.kind == CommandKind::Act) {
            for b in e.scope.banks(16) {
                prop_assert!(e.time - last[b as usize] >= 48.0 - 1e-9);
                last[b as usize] = e.time;
            }
        }
    }

    #[test]
    fn appending_never_shortens(seed in any::<u64>(), len in 1usize..250) {
        let cfg = SystemConfig::default();
        let s = random_stream(seed, len + 1, &cfg);
        let mut prefix = s.clone();
        prefix.commands.pop();
        let a = simulate(&prefix, &cfg).unwrap().total_ns;
        let b = simulate(&s, &cfg).unwrap().total_ns;
        prop_assert!(b + 1e-9 >= a, "prefix {} full {}", a, b);
    }

    #[test]
    fn slower_timing_never_shortens(seed in any::<u64>(), len in 1usize..250, which in 0usize..4, bump in 0.1f64..20.0) {
        let cfg = SystemConfig::default();
        let s = random_stream(seed, len, &cfg);
        let mut slow = cfg;
        match which {
            0 => slow.dram.t_rp += bump,
            1 => slow.dram.t_ras += bump,
            2 => slow.dram.t_rcd += bump,
            _ => slow.dram.t_ccdl += bump.min(3.0),
        }
        let a = simulate(&s, &cfg).unwrap().total_ns;
        let b = simulate(&s, &slow).unwrap().total_ns;
        prop_assert!(b + 1e-9 >= a, "base {} slow {}", a, b);
    }
}

#[test]
fn post_schedule_order_respects_registers() {
    use pimsim::trace::{validate, CommandStream};
    let cfg = SystemConfig::default();
    for seed in 0..200 {
        let s = random_stream(seed, 150, &cfg);
        if validate(&s, &cfg).is_err() {
            continue;
        }
        let (_, log) = simulate_with_log(&s, &cfg).unwrap();
        let reordered: Vec<PimCommand> = log.iter().map(|e| s.commands[e.index]).collect();
        let r = CommandStream::with_commands(s.meta.clone(), reordered);
        assert!(validate(&r, &cfg).is_ok(), "seed {seed}");
    }
}
