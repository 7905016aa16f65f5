use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::harness::experiment::{run, Experiment, Optimization, Primitive, ResultRow, DESK_GRAPHS};
use crate::sysmodel::SystemConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// Baseline PIM vs GPU for every primitive.
    Fig5,
    /// Wavesim: activation scheduling and register count.
    Fig7,
    /// ss-gemm: sparsity-aware PIM.
    Fig8,
    /// Push: cache-aware offload and command bandwidth.
    Fig9,
}

impl Figure {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "fig5" => Figure::Fig5,
            "fig7" => Figure::Fig7,
            "fig8" => Figure::Fig8,
            "fig9" => Figure::Fig9,
            other => return Err(Error::Experiment(format!("unknown figure `{other}`"))),
        })
    }

    pub fn experiments(self) -> Vec<Experiment> {
        use Optimization::*;
        use Primitive::*;
        let mut v = Vec::new();
        match self {
            Figure::Fig5 => {
                v.push(Experiment::new(VectorSum).id("fig5/vector-sum"));
                v.push(Experiment::new(WavesimVolume).id("fig5/wavesim-volume"));
                v.push(Experiment::new(WavesimFlux).id("fig5/wavesim-flux"));
                for n in [2u32, 4, 8, 16] {
                    let mut e = Experiment::new(SsGemm).id(format!("fig5/ss-gemm/N={n:02}"));
                    e.knobs.n = Some(n);
                    v.push(e);
                }
                for g in DESK_GRAPHS {
                    let mut e = Experiment::new(Push).id(format!("fig5/push/{g}"));
                    e.knobs.graph = Some(g.to_string());
                    v.push(e);
                }
            }
            Figure::Fig7 => {
                for p in [WavesimVolume, WavesimFlux] {
                    for regs in [16u32, 32, 64] {
                        for arch in [false, true] {
                            let tag = if arch { "arch-aware" } else { "baseline" };
                            let mut e = Experiment::new(p).id(format!("fig7/{}/{tag}/r{regs:02}", p.name()));
                            if arch {
                                e = e.with(ArchAware);
                            }
                            e.knobs.registers_per_alu = Some(regs);
                            v.push(e);
                        }
                    }
                }
            }
            Figure::Fig8 => {
                for n in [2u32, 4, 8, 16] {
                    for sparse in [false, true] {
                        let tag = if sparse { "sparsity-aware" } else { "baseline" };
                        let mut e = Experiment::new(SsGemm).id(format!("fig8/N={n:02}/{tag}"));
                        if sparse {
                            e = e.with(SparsityAware);
                        }
                        e.knobs.n = Some(n);
                        v.push(e);
                    }
                }
            }
            Figure::Fig9 => {
                for g in DESK_GRAPHS {
                    let base = |tag: &str| {
                        let mut e = Experiment::new(Push).id(format!("fig9/{g}/{tag}"));
                        e.knobs.graph = Some(g.to_string());
                        e
                    };
                    v.push(base("1-baseline"));
                    v.push(base("2-cache-aware-gpu").with(CacheAwareGpu));
                    v.push(base("3-cache-aware-pim").with(CacheAwarePim));
                    let mut e = base("4-cache-aware-pim-cmd4").with(CacheAwarePim);
                    e.knobs.cmd_bw_multiplier = Some(4.0);
                    v.push(e);
                }
            }
        }
        v
    }
}

pub fn reproduce(fig: Figure, cfg: &SystemConfig) -> Result<Vec<ResultRow>> {
    fig.experiments().par_iter().map(|e| run(e, cfg)).collect()
}

/// Mean speedups over the figure-5 configurations, baseline PIM and the best
/// optimized PIM variant the other figures run for the same configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    /// `(config, baseline speedup, optimized speedup)`
    pub pairs: Vec<(String, f64, f64)>,
    pub baseline_mean: f64,
    pub optimized_mean: f64,
}

/// Rows from figures 7-9 that optimize the figure-5 row `id`. Cache-aware
/// GPU rows are excluded since they are not PIM executions.
fn optimized_prefixes(id: &str) -> Vec<String> {
    let tail = id.trim_start_matches("fig5/");
    match tail.split('/').collect::<Vec<_>>().as_slice() {
        ["wavesim-volume"] | ["wavesim-flux"] => vec![format!("fig7/{tail}/arch-aware/")],
        ["ss-gemm", n] => vec![format!("fig8/{n}/sparsity-aware")],
        ["push", g] => vec![format!("fig9/{g}/3-"), format!("fig9/{g}/4-")],
        _ => Vec::new(),
    }
}

pub fn aggregate(cfg: &SystemConfig) -> Result<Aggregate> {
    let figs = [Figure::Fig5, Figure::Fig7, Figure::Fig8, Figure::Fig9];
    let all: Vec<Experiment> = figs.iter().flat_map(|f| f.experiments()).collect();
    let rows: Vec<ResultRow> = all.par_iter().map(|e| run(e, cfg)).collect::<Result<_>>()?;
    Ok(aggregate_rows(&rows))
}

pub fn aggregate_rows(rows: &[ResultRow]) -> Aggregate {
    let mut pairs = Vec::new();
    for base in rows.iter().filter(|r| r.id.starts_with("fig5/")) {
        let prefixes = optimized_prefixes(&base.id);
        let best = rows
            .iter()
            .filter(|r| prefixes.iter().any(|p| r.id.starts_with(p.as_str())))
            .map(|r| r.speedup)
            .fold(base.speedup, f64::max);
        pairs.push((base.id.clone(), base.speedup, best));
    }
    let n = pairs.len().max(1) as f64;
    Aggregate {
        baseline_mean: pairs.iter().map(|p| p.1).sum::<f64>() / n,
        optimized_mean: pairs.iter().map(|p| p.2).sum::<f64>() / n,
        pairs,
    }
}
