//! Set-associative LRU cache and the offline locality predictor built on it.

use serde::{Deserialize, Serialize};

use crate::baseline::push_meta_bytes;
use crate::error::{Error, Result};
use crate::kernels::{gen_push_with, GraphCsr, PushOutput, PUSH_ROW_SPAN};
use crate::sysmodel::SystemConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CacheModel {
    pub capacity_bytes: u64,
    pub associativity: u32,
    pub line_bytes: u32,
}

impl Default for CacheModel {
    fn default() -> Self {
        CacheModel {
            capacity_bytes: 4 << 20,
            associativity: 16,
            line_bytes: 64,
        }
    }
}

impl CacheModel {
    pub fn with_capacity(capacity_bytes: u64) -> Self {
        CacheModel {
            capacity_bytes,
            ..Default::default()
        }
    }

    pub fn sets(&self) -> u64 {
        self.capacity_bytes / (self.associativity as u64 * self.line_bytes as u64)
    }

    pub fn validate(&self) -> Result<()> {
        let way = self.associativity as u64 * self.line_bytes as u64;
        if self.associativity == 0 || self.line_bytes == 0 || self.capacity_bytes == 0 {
            return Err(Error::Invariant("cache geometry must be positive".into()));
        }
        if !self.capacity_bytes.is_multiple_of(way) {
            return Err(Error::Invariant(format!(
                "cache capacity {} not divisible by associativity x line ({way})",
                self.capacity_bytes
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LruCache {
    model: CacheModel,
    nsets: u64,
    // most recently used at the back
    sets: Vec<Vec<u64>>,
}

impl LruCache {
    pub fn new(model: CacheModel) -> Self {
        let nsets = model.sets().max(1);
        LruCache {
            model,
            nsets,
            sets: vec![Vec::with_capacity(model.associativity as usize); nsets as usize],
        }
    }

    /// Returns true on a hit.
    pub fn access(&mut self, addr: u64) -> bool {
        let line = addr / self.model.line_bytes as u64;
        let set = &mut self.sets[(line % self.nsets) as usize];
        if let Some(pos) = set.iter().position(|&t| t == line) {
            set.remove(pos);
            set.push(line);
            true
        } else {
            if set.len() == self.model.associativity as usize {
                set.remove(0);
            }
            set.push(line);
            false
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AccessClass {
    /// Served on chip by the GPU.
    Gpu,
    Pim,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffloadPlan {
    pub classes: Vec<AccessClass>,
    pub hits: u64,
    pub hit_rate: f64,
}

impl OffloadPlan {
    pub fn pim_count(&self) -> u64 {
        self.classes.len() as u64 - self.hits
    }

    pub fn gpu_count(&self) -> u64 {
        self.hits
    }

    /// One line per access: `1` for PIM, `0` for GPU.
    pub fn to_mask_text(&self) -> String {
        let mut s = String::with_capacity(self.classes.len() * 2);
        for c in &self.classes {
            s.push(if *c == AccessClass::Pim { '1' } else { '0' });
            s.push('\n');
        }
        s
    }

    pub fn from_mask_text(text: &str) -> Result<Self> {
        let mut classes = Vec::new();
        for (i, line) in text.lines().enumerate() {
            classes.push(match line.trim() {
                "1" => AccessClass::Pim,
                "0" => AccessClass::Gpu,
                other => return Err(Error::TraceParse { line: i + 1, msg: format!("bad mask entry `{other}`") }),
            });
        }
        let hits = classes.iter().filter(|&&c| c == AccessClass::Gpu).count() as u64;
        let hit_rate = if classes.is_empty() { 0.0 } else { hits as f64 / classes.len() as f64 };
        Ok(OffloadPlan { classes, hits, hit_rate })
    }
}

/// Hits go to the GPU, misses to PIM.
pub fn cache_classify(trace: &[u64], model: &CacheModel) -> OffloadPlan {
    let mut cache = LruCache::new(*model);
    let classes: Vec<AccessClass> = trace
        .iter()
        .map(|&a| if cache.access(a) { AccessClass::Gpu } else { AccessClass::Pim })
        .collect();
    let hits = classes.iter().filter(|&&c| c == AccessClass::Gpu).count() as u64;
    let hit_rate = if trace.is_empty() { 0.0 } else { hits as f64 / trace.len() as f64 };
    OffloadPlan { classes, hits, hit_rate }
}

/// Node-value addresses in push order: each source, then its destinations.
pub fn push_trace(graph: &GraphCsr, cfg: &SystemConfig) -> Vec<u64> {
    let w = cfg.geometry.word_bytes as u64;
    let mut t = Vec::with_capacity(graph.nodes as usize + graph.dests.len());
    for u in 0..graph.nodes {
        t.push(u as u64 * w);
        t.extend(graph.neighbors(u).iter().map(|&v| v as u64 * w));
    }
    t
}

#[derive(Debug, Clone)]
pub struct CacheAwarePush {
    pub push: PushOutput,
    pub plan: OffloadPlan,
    /// Per edge: true when the update goes to PIM.
    pub update_mask: Vec<bool>,
    /// Fraction of destination updates that hit.
    pub update_hit_rate: f64,
    pub gpu_side_bytes: f64,
}

/// Split the trace into source and update classifications.
pub fn split_plan(graph: &GraphCsr, plan: &OffloadPlan) -> (Vec<bool>, Vec<bool>) {
    let mut reads = Vec::with_capacity(graph.nodes as usize);
    let mut updates = Vec::with_capacity(graph.dests.len());
    let mut i = 0;
    for u in 0..graph.nodes {
        reads.push(plan.classes[i] == AccessClass::Pim);
        i += 1;
        for _ in graph.neighbors(u) {
            updates.push(plan.classes[i] == AccessClass::Pim);
            i += 1;
        }
    }
    (reads, updates)
}

/// Offloads only the updates the cache model predicts to miss; hits are
/// absorbed on chip and cost no memory traffic. The GPU still streams the
/// graph topology over the same interface.
pub fn cache_aware_pim(graph: &GraphCsr, model: &CacheModel, cfg: &SystemConfig) -> CacheAwarePush {
    let plan = cache_classify(&push_trace(graph, cfg), model);
    let (reads, updates) = split_plan(graph, &plan);
    let push = gen_push_with(graph, cfg, Some(&updates), Some(&reads), PUSH_ROW_SPAN);
    let misses = updates.iter().filter(|&&m| m).count();
    let update_hit_rate = if updates.is_empty() { 0.0 } else { 1.0 - misses as f64 / updates.len() as f64 };
    CacheAwarePush {
        push,
        plan,
        update_mask: updates,
        update_hit_rate,
        gpu_side_bytes: push_meta_bytes(graph),
    }
}
