use super::RiskError;

/// Number of sampled constraints that guarantees violation probability at
/// most `epsilon` with confidence `1 - beta_bar` for a program with `n_q`
/// decision variables: `⌈(n_q + ln(1/β̄)) / ε⌉`.
///
/// Both levels may equal 1. Values within `1e-9` of an integer are snapped
/// before the ceiling so that floating-point noise does not add a sample.
pub fn sample_bound(epsilon: f64, beta_bar: f64, n_q: u64) -> Result<u64, RiskError> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(RiskError::BadParams(format!("epsilon must lie in (0, 1], got {epsilon}")));
    }
    if !(beta_bar > 0.0 && beta_bar <= 1.0) {
        return Err(RiskError::BadParams(format!("beta must lie in (0, 1], got {beta_bar}")));
    }
    let raw = (n_q as f64 + (1.0 / beta_bar).ln()) / epsilon;
    let nearest = raw.round();
    let value = if (raw - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest
    } else {
        raw.ceil()
    };
    Ok(value as u64)
}
