use std::fmt;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::{
    bytes_time, gpu_time, gpu_traffic_push, gpu_traffic_ssgemm_with, gpu_traffic_vector_sum, gpu_traffic_wavesim,
    push_meta_bytes,
};
use crate::error::{Error, Result};
use crate::kernels::{
    gen_push, gen_ssgemm_with, gen_vector_sum, gen_wavesim_flux, gen_wavesim_volume, scrambled_road, synth_powerlaw_graph,
    GraphCsr, SkinnyGemmSpec, StencilKernelSpec,
};
use crate::opt::{arch_aware_activation, cache_aware_pim, cache_classify, push_trace, split_plan, CacheModel};
use crate::sysmodel::SystemConfig;
use crate::timing::{simulate, stream_bytes, TimingReport};
use crate::trace::{CommandStream, StreamStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Primitive {
    VectorSum,
    WavesimVolume,
    WavesimFlux,
    SsGemm,
    Push,
}

impl Primitive {
    pub const ALL: [Primitive; 5] = [
        Primitive::VectorSum,
        Primitive::WavesimVolume,
        Primitive::WavesimFlux,
        Primitive::SsGemm,
        Primitive::Push,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Primitive::VectorSum => "vector-sum",
            Primitive::WavesimVolume => "wavesim-volume",
            Primitive::WavesimFlux => "wavesim-flux",
            Primitive::SsGemm => "ss-gemm",
            Primitive::Push => "push",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Experiment(format!("unknown primitive `{s}`")))
    }

    /// Desk-scale problem size: elements, stencil elements, or K.
    pub fn default_size(self) -> u64 {
        match self {
            Primitive::VectorSum => 1 << 24,
            Primitive::WavesimVolume | Primitive::WavesimFlux => 4096,
            Primitive::SsGemm => 65_536,
            Primitive::Push => 0,
        }
    }
}

impl fmt::Display for Primitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Optimization {
    ArchAware,
    SparsityAware,
    CacheAwarePim,
    /// Not a PIM variant: the GPU fetches 32 B sectors on misses.
    CacheAwareGpu,
}

impl Optimization {
    pub fn name(self) -> &'static str {
        match self {
            Optimization::ArchAware => "arch-aware",
            Optimization::SparsityAware => "sparsity-aware",
            Optimization::CacheAwarePim => "cache-aware-pim",
            Optimization::CacheAwareGpu => "cache-aware-gpu",
        }
    }
}

/// The desk-scale evaluation graphs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum GraphSpec {
    Road { width: u32, height: u32, seed: u64 },
    PowerLaw { nodes: u32, edges: u64, seed: u64 },
    File { path: PathBuf },
}

pub const DESK_GRAPHS: [&str; 3] = ["road", "powerlaw-10k", "powerlaw-100k"];

impl GraphSpec {
    pub fn named(name: &str) -> Result<Self> {
        Ok(match name {
            "road" => GraphSpec::Road {
                width: 200,
                height: 200,
                seed: 1,
            },
            "powerlaw-10k" => GraphSpec::PowerLaw {
                nodes: 10_000,
                edges: 100_000,
                seed: 1,
            },
            "powerlaw-100k" => GraphSpec::PowerLaw {
                nodes: 100_000,
                edges: 1_000_000,
                seed: 1,
            },
            other if other.starts_with("file:") => GraphSpec::File {
                path: PathBuf::from(&other[5..]),
            },
            other => return Err(Error::Experiment(format!("unknown graph `{other}`"))),
        })
    }

    pub fn label(&self) -> String {
        match self {
            GraphSpec::Road { width, height, .. } => format!("road-{width}x{height}"),
            GraphSpec::PowerLaw { nodes, edges, .. } => format!("powerlaw-{nodes}-{edges}"),
            GraphSpec::File { path } => format!("file:{}", path.display()),
        }
    }

    pub fn build(&self) -> Result<GraphCsr> {
        match self {
            GraphSpec::Road { width, height, seed } => Ok(scrambled_road(*width, *height, *seed)),
            GraphSpec::PowerLaw { nodes, edges, seed } => synth_powerlaw_graph(*nodes, *edges, *seed),
            GraphSpec::File { path } => GraphCsr::load(path),
        }
    }

    /// Cache capacity scaled to the desk graph so its hit rate lands near
    /// the measured GPU rates. Calibrated.
    pub fn desk_cache_bytes(&self) -> u64 {
        match self {
            GraphSpec::Road { .. } => 624 << 10,
            GraphSpec::PowerLaw { nodes: 10_000, .. } => 19 << 10,
            GraphSpec::PowerLaw { .. } => 928 << 10,
            GraphSpec::File { .. } => 4 << 20,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Knobs {
    pub registers_per_alu: Option<u32>,
    pub cmd_bw_multiplier: Option<f64>,
    pub element_sparsity: Option<f64>,
    pub row_sparsity: Option<f64>,
    pub n: Option<u32>,
    pub cache_capacity: Option<u64>,
    pub graph: Option<String>,
}

impl Knobs {
    fn describe(&self) -> String {
        let mut parts = Vec::new();
        if let Some(v) = self.registers_per_alu {
            parts.push(format!("registers={v}"));
        }
        if let Some(v) = self.cmd_bw_multiplier {
            parts.push(format!("cmd_bw={v}"));
        }
        if let Some(v) = self.element_sparsity {
            parts.push(format!("element_sparsity={v}"));
        }
        if let Some(v) = self.row_sparsity {
            parts.push(format!("row_sparsity={v}"));
        }
        if let Some(v) = self.n {
            parts.push(format!("N={v}"));
        }
        if let Some(v) = self.cache_capacity {
            parts.push(format!("cache={v}"));
        }
        if let Some(v) = &self.graph {
            parts.push(format!("graph={v}"));
        }
        parts.join(";")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    #[serde(default)]
    pub id: String,
    pub primitive: Primitive,
    #[serde(default)]
    pub size: Option<u64>,
    #[serde(default)]
    pub optimizations: Vec<Optimization>,
    #[serde(default)]
    pub knobs: Knobs,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_seed() -> u64 {
    1
}

impl Experiment {
    pub fn new(primitive: Primitive) -> Self {
        Experiment {
            id: primitive.name().to_string(),
            primitive,
            size: None,
            optimizations: Vec::new(),
            knobs: Knobs::default(),
            seed: 1,
        }
    }

    pub fn with(mut self, opt: Optimization) -> Self {
        self.optimizations.push(opt);
        self
    }

    pub fn id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn has(&self, o: Optimization) -> bool {
        self.optimizations.contains(&o)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::ConfigParse {
            path: "<experiment>".into(),
            msg: e.message().to_string(),
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("experiment serializes")
    }

    /// Config with the experiment's architecture knobs applied.
    pub fn system(&self, base: &SystemConfig) -> Result<SystemConfig> {
        let mut cfg = *base;
        if let Some(r) = self.knobs.registers_per_alu {
            cfg.pim.registers_per_alu = r;
        }
        if let Some(m) = self.knobs.cmd_bw_multiplier {
            cfg.pim.cmd_bw_multiplier = m;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn label(&self) -> String {
        let opts: Vec<&str> = self.optimizations.iter().map(|o| o.name()).collect();
        if opts.is_empty() {
            "baseline".into()
        } else {
            opts.join("+")
        }
    }
}

/// Calibrated element sparsity of the skinny operand inside nonzero rows.
pub const SSGEMM_ELEMENT_SPARSITY: f64 = 0.66;
/// Calibrated fraction of all-zero skinny rows (GPU-exploitable).
pub const SSGEMM_ROW_SPARSITY: f64 = 0.12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub id: String,
    pub primitive: Primitive,
    pub size: u64,
    pub config: String,
    pub knobs: String,
    pub gpu_ns: f64,
    /// Time of the evaluated configuration (PIM, or the cache-aware GPU).
    pub pim_ns: f64,
    pub speedup: f64,
    pub act_stall_share: f64,
    pub commands: u64,
    pub activations: u64,
    pub gpu_bw_gbs: f64,
    pub pim_bw_gbs: f64,
    pub warnings: Vec<String>,
}

/// Everything `run` produces, including the simulated streams.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub row: ResultRow,
    pub streams: Vec<CommandStream>,
    pub report: Option<TimingReport>,
}

fn simulate_checked(s: &CommandStream, cfg: &SystemConfig) -> Result<TimingReport> {
    crate::trace::ensure_valid(s, cfg)?;
    simulate(s, cfg)
}

struct Measured {
    gpu_ns: f64,
    gpu_bytes: f64,
    pim_ns: f64,
    report: Option<TimingReport>,
    streams: Vec<CommandStream>,
    size: u64,
    warnings: Vec<String>,
}

fn single(gpu_bytes: f64, extra_ns: f64, stream: CommandStream, cfg: &SystemConfig, size: u64) -> Result<Measured> {
    let report = simulate_checked(&stream, cfg)?;
    Ok(Measured {
        gpu_ns: bytes_time(gpu_bytes, cfg),
        gpu_bytes,
        pim_ns: report.total_ns + extra_ns,
        report: Some(report),
        streams: vec![stream],
        size,
        warnings: Vec::new(),
    })
}

pub fn run(exp: &Experiment, base: &SystemConfig) -> Result<ResultRow> {
    run_full(exp, base).map(|o| o.row)
}

pub fn run_full(exp: &Experiment, base: &SystemConfig) -> Result<RunOutput> {
    let cfg = exp.system(base)?;
    let size = exp.size.unwrap_or(exp.primitive.default_size());
    let arch = |s: CommandStream| -> Result<CommandStream> {
        if exp.has(Optimization::ArchAware) {
            arch_aware_activation(&s)
        } else {
            Ok(s)
        }
    };
    let m = match exp.primitive {
        Primitive::VectorSum => {
            let (s, _) = gen_vector_sum(size, &cfg);
            single(gpu_traffic_vector_sum(size, &cfg).mem_bytes, 0.0, arch(s)?, &cfg, size)?
        }
        Primitive::WavesimVolume => {
            let spec = StencilKernelSpec {
                elements: size,
                ..StencilKernelSpec::volume()
            };
            let out = gen_wavesim_volume(&spec, &cfg);
            single(gpu_traffic_wavesim(&spec, &cfg).mem_bytes, 0.0, arch(out.stream)?, &cfg, size)?
        }
        Primitive::WavesimFlux => {
            let spec = StencilKernelSpec {
                elements: size,
                ..StencilKernelSpec::flux()
            };
            let out = gen_wavesim_flux(&spec, &cfg);
            let residual = bytes_time(out.gpu_residual_bytes, &cfg);
            single(gpu_traffic_wavesim(&spec, &cfg).mem_bytes, residual, arch(out.stream)?, &cfg, size)?
        }
        Primitive::SsGemm => {
            let spec = SkinnyGemmSpec {
                n: exp.knobs.n.unwrap_or(8),
                k: size as u32,
                element_sparsity: exp.knobs.element_sparsity.unwrap_or(SSGEMM_ELEMENT_SPARSITY),
                row_sparsity: exp.knobs.row_sparsity.unwrap_or(SSGEMM_ROW_SPARSITY),
                seed: exp.seed,
                ..Default::default()
            };
            let out = gen_ssgemm_with(&spec, &cfg, exp.has(Optimization::SparsityAware));
            let gpu = gpu_traffic_ssgemm_with(&spec, &out.skinny, &cfg).mem_bytes;
            let mut m = single(gpu, 0.0, arch(out.stream)?, &cfg, size)?;
            m.warnings = out.warnings;
            m
        }
        Primitive::Push => run_push(exp, &cfg)?,
    };
    let report = m.report;
    let stats = report.as_ref().map(|r| r.command_counts.clone()).unwrap_or_else(|| {
        m.streams.iter().fold(StreamStats::default(), |acc, s| merge(acc, crate::trace::stats(s)))
    });
    // one stream stands for every pCH; push carries one stream per pCH
    let replicas = if m.streams.len() == 1 { cfg.geometry.num_pch() as f64 } else { 1.0 };
    let pim_bytes: f64 = m.streams.iter().map(|s| stream_bytes(s, &cfg)).sum::<f64>() * replicas;
    let row = ResultRow {
        id: exp.id.clone(),
        primitive: exp.primitive,
        size: m.size,
        config: exp.label(),
        knobs: exp.knobs.describe(),
        gpu_ns: m.gpu_ns,
        pim_ns: m.pim_ns,
        speedup: if m.pim_ns > 0.0 { m.gpu_ns / m.pim_ns } else { f64::INFINITY },
        act_stall_share: report.as_ref().map_or(0.0, |r| r.act_stall_share()),
        commands: stats.total,
        activations: stats.kind(crate::trace::CommandKind::Act),
        gpu_bw_gbs: if m.gpu_ns > 0.0 { m.gpu_bytes / m.gpu_ns } else { 0.0 },
        pim_bw_gbs: if m.pim_ns > 0.0 { pim_bytes / m.pim_ns } else { 0.0 },
        warnings: m.warnings,
    };
    Ok(RunOutput {
        row,
        streams: m.streams,
        report,
    })
}

fn merge(mut a: StreamStats, b: StreamStats) -> StreamStats {
    if a.rows_activated.is_empty() {
        return b;
    }
    for (x, y) in a.counts.iter_mut().zip(b.counts.iter()) {
        for (p, q) in x.iter_mut().zip(y.iter()) {
            *p += q;
        }
    }
    for (p, q) in a.rows_activated.iter_mut().zip(b.rows_activated.iter()) {
        *p += q;
    }
    a.data_bytes += b.data_bytes;
    a.no_data_commands += b.no_data_commands;
    a.total += b.total;
    a
}

fn run_push(exp: &Experiment, cfg: &SystemConfig) -> Result<Measured> {
    let gspec = GraphSpec::named(exp.knobs.graph.as_deref().unwrap_or("powerlaw-10k"))?;
    let graph = gspec.build()?;
    let model = CacheModel::with_capacity(exp.knobs.cache_capacity.unwrap_or(gspec.desk_cache_bytes()));
    model.validate()?;
    let plan = cache_classify(&push_trace(&graph, cfg), &model);
    let (_, updates) = split_plan(&graph, &plan);
    let hit_rate = if updates.is_empty() {
        0.0
    } else {
        updates.iter().filter(|&&m| !m).count() as f64 / updates.len() as f64
    };
    let gpu_bytes = gpu_traffic_push(&graph, hit_rate, 64, cfg).mem_bytes;
    let gpu_ns = bytes_time(gpu_bytes, cfg);
    let mut warnings = vec![format!("update hit rate {:.3}", hit_rate)];

    if exp.has(Optimization::CacheAwareGpu) {
        let t = gpu_time(&gpu_traffic_push(&graph, hit_rate, 32, cfg), cfg);
        return Ok(Measured {
            gpu_ns,
            gpu_bytes,
            pim_ns: t,
            report: None,
            streams: Vec::new(),
            size: graph.edge_count(),
            warnings,
        });
    }
    let (out, side_bytes) = if exp.has(Optimization::CacheAwarePim) {
        let ca = cache_aware_pim(&graph, &model, cfg);
        (ca.push, ca.gpu_side_bytes)
    } else {
        (gen_push(&graph, cfg, None), push_meta_bytes(&graph))
    };
    if out.imbalance.ratio() > 1.05 {
        warnings.push(format!("per-pCH load imbalance {:.2}x", out.imbalance.ratio()));
    }
    let reports: Vec<TimingReport> = out
        .streams
        .par_iter()
        .map(|s| simulate_checked(s, cfg))
        .collect::<Result<Vec<_>>>()?;
    let worst = (0..reports.len())
        .max_by(|&a, &b| reports[a].total_ns.total_cmp(&reports[b].total_ns).then(b.cmp(&a)))
        .unwrap_or(0);
    let pim_ns = reports.get(worst).map_or(0.0, |r| r.total_ns) + bytes_time(side_bytes, cfg);
    Ok(Measured {
        gpu_ns,
        gpu_bytes,
        pim_ns,
        report: reports.into_iter().nth(worst),
        streams: out.streams,
        size: graph.edge_count(),
        warnings,
    })
}
