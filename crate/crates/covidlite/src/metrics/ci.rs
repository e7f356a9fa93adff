//! Wilson score intervals for error proportions.

use super::MetricsError;

/// Two-sided normal quantiles for the supported confidence levels.
fn z_for(level: f64) -> Result<f64, MetricsError> {
    const TABLE: &[(f64, f64)] = &[
        (0.90, 1.6448536269514722),
        (0.95, 1.959963984540054),
        (0.99, 2.5758293035489004),
    ];
    TABLE
        .iter()
        .find(|(l, _)| (l - level).abs() < 1e-9)
        .map(|&(_, z)| z)
        .ok_or(MetricsError::UnsupportedLevel(level))
}

/// Wilson score interval on the proportion `errors / n`.
pub fn error_ci(errors: u64, n: u64, level: f64) -> Result<(f64, f64), MetricsError> {
    if n == 0 {
        return Err(MetricsError::Empty);
    }
    assert!(errors <= n, "more errors than samples");
    let z = z_for(level)?;
    let n = n as f64;
    let p = errors as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    Ok(((center - half).max(0.0), (center + half).min(1.0)))
}
