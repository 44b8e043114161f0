use super::lcs::lcs_len;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RougeL {
    pub p: f64,
    pub r: f64,
    pub f: f64,
}

pub const DEFAULT_BETA: f64 = 1.2;

/// LCS-based F-measure, `F = (1+β²)PR / (R + β²P)`.
pub fn rouge_l<T: PartialEq>(hyp: &[T], reference: &[T], beta: f64) -> RougeL {
    if hyp.is_empty() || reference.is_empty() {
        return RougeL::default();
    }
    let lcs = lcs_len(hyp, reference) as f64;
    let p = lcs / hyp.len() as f64;
    let r = lcs / reference.len() as f64;
    let b2 = beta * beta;
    let f = if lcs == 0.0 {
        0.0
    } else {
        (1.0 + b2) * p * r / (r + b2 * p)
    };
    RougeL { p, r, f }
}
