//! Parameter-count comparison between regular and depth-separable convolution.

/// Bias-free parameter counts for one convolution layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DscParamCount {
    /// Regular convolution: dk^2 * M * N.
    pub regular: u64,
    /// Depth-separable: M * dk^2 + M * N.
    pub separable: u64,
    /// 100 * (1 - separable / regular). Negative when separable costs more.
    pub reduction_pct: f64,
}

/// Compares parameter counts for `in_ch` -> `out_ch` channels and a square
/// kernel of side `dk`.
pub fn dsc_param_count(in_ch: u64, out_ch: u64, dk: u64) -> DscParamCount {
    assert!(in_ch >= 1 && out_ch >= 1 && dk >= 1);
    let regular = dk * dk * in_ch * out_ch;
    let separable = in_ch * dk * dk + in_ch * out_ch;
    DscParamCount {
        regular,
        separable,
        reduction_pct: 100.0 * (1.0 - separable as f64 / regular as f64),
    }
}
