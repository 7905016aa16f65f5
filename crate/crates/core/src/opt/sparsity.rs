use crate::kernels::{gen_ssgemm_with, SkinnyGemmSpec};
use crate::sysmodel::SystemConfig;
use crate::trace::CommandStream;

/// The ss-gemm stream with every zero-operand MAC skipped (exact zero only),
/// along with activations whose row visit would issue nothing.
pub fn sparsity_filter(spec: &SkinnyGemmSpec, cfg: &SystemConfig) -> CommandStream {
    gen_ssgemm_with(spec, cfg, true).stream
}
