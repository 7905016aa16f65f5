//! Prints the figure-reproduction rows used to calibrate the kernel
//! defaults. Run with `cargo run --release --example calibrate [figN ...]`.

use std::time::Instant;

use pimsim::harness::{reproduce, Figure};
use pimsim::SystemConfig;

fn main() {
    let cfg = SystemConfig::default();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let figs = if args.is_empty() {
        vec!["fig5".to_string(), "fig7".into(), "fig8".into(), "fig9".into()]
    } else {
        args
    };
    if figs.iter().any(|f| f == "aggregate") {
        let a = pimsim::harness::aggregate(&cfg).expect("aggregate");
        for (id, b, o) in &a.pairs {
            println!("{id:<44} baseline {b:>7.3}  optimized {o:>7.3}");
        }
        println!("mean baseline {:.3} optimized {:.3}", a.baseline_mean, a.optimized_mean);
        return;
    }
    for f in figs {
        let t = Instant::now();
        let rows = reproduce(Figure::parse(&f).expect("figure"), &cfg).expect("reproduce");
        println!("== {f} ({:.2}s)", t.elapsed().as_secs_f64());
        for r in rows {
            println!(
                "{:<44} speedup {:>7.3}  act_share {:>6.3}  cmds {:>9}  {}",
                r.id,
                r.speedup,
                r.act_stall_share,
                r.commands,
                r.warnings.join("; ")
            );
        }
    }
}
