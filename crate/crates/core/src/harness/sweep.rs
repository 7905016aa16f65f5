use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::harness::experiment::{run, Experiment, ResultRow};
use crate::sysmodel::SystemConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Knob {
    Registers,
    CmdBandwidth,
    ElementSparsity,
    N,
    CacheCapacity,
    Graph,
}

impl Knob {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "registers_per_alu" | "registers" => Knob::Registers,
            "cmd_bw_multiplier" => Knob::CmdBandwidth,
            "element_sparsity" => Knob::ElementSparsity,
            "N" | "n" => Knob::N,
            "cache_capacity" | "cache" => Knob::CacheCapacity,
            "graph" => Knob::Graph,
            other => return Err(Error::Experiment(format!("unknown knob `{other}`"))),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Knob::Registers => "registers_per_alu",
            Knob::CmdBandwidth => "cmd_bw_multiplier",
            Knob::ElementSparsity => "element_sparsity",
            Knob::N => "N",
            Knob::CacheCapacity => "cache_capacity",
            Knob::Graph => "graph",
        }
    }

    pub fn apply(self, exp: &mut Experiment, value: &str) -> Result<()> {
        let bad = |e: &dyn std::fmt::Display| Error::Experiment(format!("{}: bad value `{value}`: {e}", self.name()));
        let k = &mut exp.knobs;
        match self {
            Knob::Registers => k.registers_per_alu = Some(value.parse().map_err(|e| bad(&e))?),
            Knob::CmdBandwidth => k.cmd_bw_multiplier = Some(value.parse().map_err(|e| bad(&e))?),
            Knob::ElementSparsity => {
                let v: f64 = value.parse().map_err(|e| bad(&e))?;
                if !(0.0..=1.0).contains(&v) {
                    return Err(bad(&"fraction out of range"));
                }
                k.element_sparsity = Some(v)
            }
            Knob::N => k.n = Some(value.parse().map_err(|e| bad(&e))?),
            Knob::CacheCapacity => k.cache_capacity = Some(value.parse().map_err(|e| bad(&e))?),
            Knob::Graph => k.graph = Some(value.to_string()),
        }
        Ok(())
    }
}

/// One row per value, in the order given; points run in parallel.
pub fn sweep(base: &Experiment, knob: Knob, values: &[String], cfg: &SystemConfig) -> Result<Vec<ResultRow>> {
    let exps: Vec<Experiment> = values
        .iter()
        .map(|v| {
            let mut e = base.clone();
            knob.apply(&mut e, v)?;
            e.id = format!("{}/{}={}", base.id, knob.name(), v);
            Ok(e)
        })
        .collect::<Result<_>>()?;
    exps.par_iter().map(|e| run(e, cfg)).collect()
}
