use crate::error::{Error, Result};

/// Dynamic time warping distance with unit-weight match/insert/delete steps
/// and local cost `|a_i - b_j|`, divided by `len(a) + len(b)`.
pub fn dtw(a: &[f64], b: &[f64]) -> Result<f64> {
    Ok(dtw_cost(a, b)? / (a.len() + b.len()) as f64)
}

/// Unnormalized minimum alignment cost.
pub fn dtw_cost(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("dtw input sequence"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("dtw input".into()));
    }
    let m = b.len();
    let mut prev = vec![f64::INFINITY; m];
    let mut cur = vec![0.0; m];
    for (i, &ai) in a.iter().enumerate() {
        for j in 0..m {
            let local = (ai - b[j]).abs();
            let best = match (i, j) {
                (0, 0) => 0.0,
                (0, _) => cur[j - 1],
                (_, 0) => prev[0],
                _ => prev[j - 1].min(prev[j]).min(cur[j - 1]),
            };
            cur[j] = local + best;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m - 1])
}
