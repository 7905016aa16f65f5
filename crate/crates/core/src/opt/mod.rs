//! Stream and offload transformations: parity-split activation, host-side
//! zero skipping for ss-gemm, and cache-guided selective push offload.

pub mod arch_aware;
pub mod cache;
pub mod sparsity;

pub use arch_aware::arch_aware_activation;
pub use cache::{
    cache_aware_pim, cache_classify, push_trace, split_plan, AccessClass, CacheAwarePush, CacheModel, LruCache, OffloadPlan,
};
pub use sparsity::sparsity_filter;
