//! PIM-amenability test: two numeric heuristics (roofline position and
//! memory residency) and two categorical ones (operand locality and aligned
//! data parallelism) folded into a verdict.
//!
//! Descriptors use the same TOML dialect as the system config:
//!
//! ```toml
//! name = "vector-sum"
//! ops = 1048576
//! mem_bytes = 6291456
//! onchip_accesses = 0
//! interaction = "localized-multi-operand"
//! alignment = "co-alignable"
//! ```

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sysmodel::{DerivedParams, SystemConfig};

/// Peak fp16 rate of the MI250-class reference GPU, in ops per second.
pub const REFERENCE_PEAK_OPS: f64 = 45e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interaction {
    SingleOperand,
    CommutativeReduction,
    LocalizedMultiOperand,
    Neighbor,
    Irregular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alignment {
    CoAlignable,
    InducibleByLayout,
    Irregular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadDescriptor {
    pub name: String,
    pub ops: f64,
    pub mem_bytes: f64,
    #[serde(default)]
    pub onchip_accesses: f64,
    pub interaction: Interaction,
    pub alignment: Alignment,
}

impl WorkloadDescriptor {
    pub fn from_toml_str(source: &str) -> Result<Self> {
        toml::from_str(source).map_err(|e| Error::ConfigParse {
            path: "<descriptor>".into(),
            msg: e.message().to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::ConfigParse { msg, .. } => Error::ConfigParse {
                path: path.display().to_string(),
                msg,
            },
            other => other,
        })
    }
}

/// Tri-state outcome of one heuristic, ordered worst to best.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Fail,
    Conditional,
    Pass,
}

impl Outcome {
    fn from_bool(b: bool) -> Self {
        if b {
            Outcome::Pass
        } else {
            Outcome::Fail
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    NotAmenable,
    ConditionallyAmenable,
    Amenable,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::NotAmenable => "not-amenable",
            Verdict::ConditionallyAmenable => "conditionally-amenable",
            Verdict::Amenable => "amenable",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmenabilityReport {
    pub name: String,
    pub op_byte: f64,
    pub machine_balance: f64,
    pub bw_limited: bool,
    pub mem_vs_onchip_ratio: f64,
    pub pim_bw_multiplier: f64,
    pub mem_residency_pass: bool,
    pub operand_locality: Outcome,
    pub aligned_parallelism: Outcome,
    pub operand_locality_pass: bool,
    pub aligned_parallelism_pass: bool,
    pub verdict: Verdict,
}

impl AmenabilityReport {
    pub fn to_text(&self) -> String {
        let mark = |b: bool| if b { "pass" } else { "fail" };
        let o = |x: Outcome| match x {
            Outcome::Pass => "pass",
            Outcome::Conditional => "conditional",
            Outcome::Fail => "fail",
        };
        format!(
            "workload: {}\n  op/byte            {:.4} (machine balance {:.2}) -> {}\n  memory residency   ratio {:.3} vs multiplier {:.3} -> {}\n  operand locality   {}\n  aligned parallelism {}\n  verdict: {}\n",
            self.name,
            self.op_byte,
            self.machine_balance,
            mark(self.bw_limited),
            self.mem_vs_onchip_ratio,
            self.pim_bw_multiplier,
            mark(self.mem_residency_pass),
            o(self.operand_locality),
            o(self.aligned_parallelism),
            self.verdict
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub fn op_byte_ratio(w: &WorkloadDescriptor) -> Result<f64> {
    if w.mem_bytes <= 0.0 {
        return Err(Error::UndefinedRatio(w.name.clone()));
    }
    Ok(w.ops / w.mem_bytes)
}

fn machine_balance(cfg: &SystemConfig, peak_ops_per_s: f64) -> f64 {
    // GB/s -> B/s
    peak_ops_per_s / (cfg.gpu.effective_bw() * 1e9)
}

pub fn roofline_check(w: &WorkloadDescriptor, cfg: &SystemConfig, peak_ops_per_s: f64) -> bool {
    if w.ops <= 0.0 {
        return true;
    }
    match op_byte_ratio(w) {
        Ok(r) => r < machine_balance(cfg, peak_ops_per_s),
        Err(_) => false,
    }
}

pub fn residency_check(w: &WorkloadDescriptor, derived: &DerivedParams) -> (f64, bool) {
    let mem_accesses = w.mem_bytes / derived.word_bytes as f64;
    let ratio = mem_accesses / w.onchip_accesses.max(1.0);
    (ratio, ratio > derived.pim_bw_multiplier)
}

pub fn locality_outcome(i: Interaction) -> Outcome {
    match i {
        Interaction::SingleOperand | Interaction::CommutativeReduction | Interaction::LocalizedMultiOperand => {
            Outcome::Pass
        }
        Interaction::Neighbor => Outcome::Conditional,
        Interaction::Irregular => Outcome::Fail,
    }
}

pub fn alignment_outcome(a: Alignment) -> Outcome {
    match a {
        Alignment::CoAlignable => Outcome::Pass,
        Alignment::InducibleByLayout => Outcome::Conditional,
        Alignment::Irregular => Outcome::Fail,
    }
}

/// Folds four heuristic outcomes into a verdict. Any failure is fatal; any
/// conditional outcome (only the categorical heuristics produce one)
/// downgrades to conditionally-amenable.
pub fn combine(outcomes: [Outcome; 4]) -> Verdict {
    match outcomes.iter().min().copied().unwrap_or(Outcome::Pass) {
        Outcome::Pass => Verdict::Amenable,
        Outcome::Conditional => Verdict::ConditionallyAmenable,
        Outcome::Fail => Verdict::NotAmenable,
    }
}

pub fn amenability_report(w: &WorkloadDescriptor, cfg: &SystemConfig, peak_ops_per_s: f64) -> AmenabilityReport {
    let derived = cfg.derive();
    let op_byte = op_byte_ratio(w).unwrap_or(f64::INFINITY);
    let bw_limited = roofline_check(w, cfg, peak_ops_per_s);
    let (ratio, residency) = residency_check(w, &derived);
    let loc = locality_outcome(w.interaction);
    let ali = alignment_outcome(w.alignment);
    let verdict = combine([Outcome::from_bool(bw_limited), Outcome::from_bool(residency), loc, ali]);
    AmenabilityReport {
        name: w.name.clone(),
        op_byte,
        machine_balance: machine_balance(cfg, peak_ops_per_s),
        bw_limited,
        mem_vs_onchip_ratio: ratio,
        pim_bw_multiplier: derived.pim_bw_multiplier,
        mem_residency_pass: residency,
        operand_locality: loc,
        aligned_parallelism: ali,
        operand_locality_pass: loc == Outcome::Pass,
        aligned_parallelism_pass: ali == Outcome::Pass,
        verdict,
    }
}

/// n-element fp16 vector sum: one add per element, two reads and one write.
pub fn vector_sum_descriptor(n: u64) -> WorkloadDescriptor {
    WorkloadDescriptor {
        name: "vector-sum".into(),
        ops: n as f64,
        mem_bytes: 6.0 * n as f64,
        onchip_accesses: 0.0,
        interaction: Interaction::LocalizedMultiOperand,
        alignment: Alignment::CoAlignable,
    }
}

/// Push over `edges` updates: a 2-byte neighbour read-modify-write per add.
/// `hit_rate` is the fraction of updates absorbed on chip.
pub fn push_descriptor(edges: u64, hit_rate: f64, word_bytes: u32) -> WorkloadDescriptor {
    let mem_bytes = 4.0 * edges as f64;
    let mem_accesses = mem_bytes / word_bytes as f64;
    let onchip = if hit_rate >= 1.0 {
        f64::INFINITY
    } else {
        mem_accesses * hit_rate / (1.0 - hit_rate)
    };
    WorkloadDescriptor {
        name: "push".into(),
        ops: edges as f64,
        mem_bytes,
        onchip_accesses: onchip,
        interaction: Interaction::CommutativeReduction,
        alignment: Alignment::Irregular,
    }
}

/// Per-element op counts of the degree-2 DG kernels (729 points, fp16,
/// each point read and written once per pass).
pub const WAVESIM_VOLUME_OPS_PER_ELEMENT: f64 = 5016.0;
pub const WAVESIM_FLUX_OPS_PER_ELEMENT: f64 = 1254.0;
pub const WAVESIM_POINTS_PER_ELEMENT: f64 = 729.0;

pub fn wavesim_volume_descriptor(elements: u64) -> WorkloadDescriptor {
    WorkloadDescriptor {
        name: "wavesim-volume".into(),
        ops: WAVESIM_VOLUME_OPS_PER_ELEMENT * elements as f64,
        mem_bytes: WAVESIM_POINTS_PER_ELEMENT * 4.0 * elements as f64,
        onchip_accesses: 0.0,
        interaction: Interaction::LocalizedMultiOperand,
        alignment: Alignment::CoAlignable,
    }
}

pub fn wavesim_flux_descriptor(elements: u64) -> WorkloadDescriptor {
    WorkloadDescriptor {
        name: "wavesim-flux".into(),
        ops: WAVESIM_FLUX_OPS_PER_ELEMENT * elements as f64,
        mem_bytes: WAVESIM_POINTS_PER_ELEMENT * 4.0 * elements as f64,
        onchip_accesses: 0.0,
        interaction: Interaction::Neighbor,
        alignment: Alignment::CoAlignable,
    }
}

/// Dense M x K fp16 operand streamed once, skinny K x N and output M x N.
pub fn ssgemm_descriptor(m: u64, n: u64, k: u64) -> WorkloadDescriptor {
    let (m, n, k) = (m as f64, n as f64, k as f64);
    WorkloadDescriptor {
        name: format!("ss-gemm-n{}", n),
        ops: m * n * k,
        mem_bytes: 2.0 * (m * k + k * n + m * n),
        onchip_accesses: 0.0,
        interaction: Interaction::LocalizedMultiOperand,
        alignment: Alignment::InducibleByLayout,
    }
}

/// The built-in descriptors at their reference sizes.
pub fn builtin_descriptors(cfg: &SystemConfig) -> Vec<WorkloadDescriptor> {
    vec![
        vector_sum_descriptor(1 << 24),
        wavesim_volume_descriptor(65_536),
        wavesim_flux_descriptor(65_536),
        ssgemm_descriptor(1 << 16, 1, 1 << 16),
        ssgemm_descriptor(1 << 16, 4, 1 << 16),
        push_descriptor(10_000_000, 0.20, cfg.geometry.word_bytes),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg() -> SystemConfig {
        SystemConfig::default()
    }

    #[test]
    fn zero_bytes_is_undefined() {
        let mut w = vector_sum_descriptor(0);
        w.mem_bytes = 0.0;
        assert!(matches!(op_byte_ratio(&w), Err(Error::UndefinedRatio(_))));
    }

    #[test]
    fn roofline_boundary_is_strict() {
        let c = cfg();
        let balance = machine_balance(&c, 1e12);
        let mut w = vector_sum_descriptor(1);
        w.mem_bytes = 1.0;
        w.ops = balance;
        assert!(!roofline_check(&w, &c, 1e12));
        w.ops = balance * 0.999;
        assert!(roofline_check(&w, &c, 1e12));
        w.ops = 0.0;
        assert!(roofline_check(&w, &c, 1e12));
    }

    #[test]
    fn residency_boundary() {
        let mut d = cfg().derive();
        d.pim_bw_multiplier = 4.0;
        let mut w = vector_sum_descriptor(1);
        w.mem_bytes = 4096.0 * d.word_bytes as f64;
        w.onchip_accesses = 1024.0;
        assert_eq!(residency_check(&w, &d), (4.0, false));
        w.onchip_accesses = 0.0;
        assert!(residency_check(&w, &d).1);
    }

    #[test]
    fn high_locality_push_fails_residency() {
        let c = cfg();
        let w = push_descriptor(1_000_000, 0.57, 32);
        let (ratio, pass) = residency_check(&w, &c.derive());
        assert!((ratio - 0.43 / 0.57).abs() < 1e-9);
        assert!(!pass);
    }

    #[test]
    fn descriptor_toml_round_trip() {
        let w = wavesim_flux_descriptor(100);
        let text = toml::to_string(&w).unwrap();
        assert_eq!(WorkloadDescriptor::from_toml_str(&text).unwrap(), w);
        assert!(WorkloadDescriptor::from_toml_str("name = 1").is_err());
    }

    #[test]
    fn report_outputs() {
        let r = amenability_report(&vector_sum_descriptor(1024), &cfg(), REFERENCE_PEAK_OPS);
        assert!(r.to_text().contains("verdict: amenable"));
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["verdict"], "amenable");
    }

    fn outcome() -> impl Strategy<Value = Outcome> {
        prop_oneof![Just(Outcome::Fail), Just(Outcome::Conditional), Just(Outcome::Pass)]
    }

    proptest! {
        #[test]
        fn ratio_scale_invariant(ops in 0.0f64..1e9, bytes in 1.0f64..1e9, k in 1e-3f64..1e3) {
            let mut w = vector_sum_descriptor(1);
            w.ops = ops;
            w.mem_bytes = bytes;
            let a = op_byte_ratio(&w).unwrap();
            w.ops *= k;
            w.mem_bytes *= k;
            let b = op_byte_ratio(&w).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }

        #[test]
        fn verdict_is_monotone(o in proptest::array::uniform4(outcome()), i in 0usize..4) {
            let before = combine(o);
            let mut better = o;
            better[i] = Outcome::Pass;
            prop_assert!(combine(better) >= before);
        }
    }
}
