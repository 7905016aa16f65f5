//! Analytical GPU model: time is the bytes crossing the memory interface
//! over the effective bandwidth. Every byte crosses once except wavesim
//! (no reuse across time steps) and push (reuse follows cache hits).

use serde::{Deserialize, Serialize};

use crate::kernels::{GraphCsr, SkinnyGemmSpec, SkinnyMatrix, StencilKernelSpec};
use crate::sysmodel::SystemConfig;

/// Per-edge topology and bookkeeping bytes the GPU streams in a push pass
/// (CSR offsets and destination ids, frontier state). Calibrated.
pub const PUSH_META_BYTES_PER_EDGE: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpuWorkload {
    pub label: String,
    pub mem_bytes: f64,
}

impl GpuWorkload {
    pub fn new(label: impl Into<String>, mem_bytes: f64) -> Self {
        GpuWorkload {
            label: label.into(),
            mem_bytes,
        }
    }
}

/// Nanoseconds; GB/s is bytes per nanosecond.
pub fn gpu_time(w: &GpuWorkload, cfg: &SystemConfig) -> f64 {
    bytes_time(w.mem_bytes, cfg)
}

pub fn bytes_time(bytes: f64, cfg: &SystemConfig) -> f64 {
    if bytes == 0.0 {
        0.0
    } else {
        bytes / cfg.gpu.effective_bw()
    }
}

pub fn gpu_traffic_vector_sum(n: u64, cfg: &SystemConfig) -> GpuWorkload {
    GpuWorkload::new("vector-sum", 3.0 * n as f64 * cfg.gpu.elem_bytes as f64)
}

/// Dense operand once minus the columns whose skinny row is all zero, the
/// skinny matrix once, the output once.
pub fn gpu_traffic_ssgemm(spec: &SkinnyGemmSpec, cfg: &SystemConfig) -> GpuWorkload {
    let skinny = spec.skinny();
    gpu_traffic_ssgemm_with(spec, &skinny, cfg)
}

pub fn gpu_traffic_ssgemm_with(spec: &SkinnyGemmSpec, skinny: &SkinnyMatrix, cfg: &SystemConfig) -> GpuWorkload {
    let e = cfg.gpu.elem_bytes as f64;
    let (m, n, k) = (spec.m as f64, spec.n as f64, spec.k as f64);
    let rs = skinny.row_sparsity();
    let bytes = e * m * k * (1.0 - rs) + e * k * n + e * m * n;
    GpuWorkload::new(format!("ss-gemm-n{}", spec.n), bytes)
}

/// Misses fill and write back one access each; sources stream once.
pub fn gpu_traffic_push(graph: &GraphCsr, hit_rate: f64, access_bytes: u32, cfg: &SystemConfig) -> GpuWorkload {
    let e = graph.edge_count() as f64;
    let updates = e * (1.0 - hit_rate) * access_bytes as f64 * 2.0;
    let bytes = updates + push_source_bytes(graph, cfg) + push_meta_bytes(graph);
    GpuWorkload::new(format!("push-{access_bytes}B"), bytes)
}

pub fn push_source_bytes(graph: &GraphCsr, cfg: &SystemConfig) -> f64 {
    graph.nodes as f64 * cfg.geometry.word_bytes as f64
}

pub fn push_meta_bytes(graph: &GraphCsr) -> f64 {
    graph.edge_count() as f64 * PUSH_META_BYTES_PER_EDGE
}

/// All element data read and written once per pass.
pub fn gpu_traffic_wavesim(spec: &StencilKernelSpec, cfg: &SystemConfig) -> GpuWorkload {
    let words = (spec.load_words + spec.store_words) as f64;
    GpuWorkload::new("wavesim", spec.elements as f64 * words * cfg.geometry.word_bytes as f64)
}

/// One field pass over the nodal data of every element, read plus write.
pub fn wavesim_field_bytes(spec: &StencilKernelSpec, cfg: &SystemConfig) -> f64 {
    2.0 * spec.elements as f64 * spec.points_per_element as f64 * cfg.gpu.elem_bytes as f64
}
