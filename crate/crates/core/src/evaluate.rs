//! Simulation-checked precision of generated designs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dispersion::{dispersion, label, DispersionConfig, LabelPolicy};
use crate::error::{invalid, Result};
use crate::unitcell::UnitCell;

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let center = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrecisionReport {
    pub requested: usize,
    pub simulated: usize,
    pub positives: usize,
    pub precision: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Designs whose simulation failed, excluded from the counts.
    pub failures: Vec<String>,
    /// Per design: label, or `None` on failure.
    pub labels: Vec<Option<u8>>,
}

impl PrecisionReport {
    pub fn from_labels(labels: Vec<Option<u8>>, failures: Vec<String>) -> Self {
        let simulated = labels.iter().flatten().count();
        let positives = labels.iter().flatten().filter(|&&l| l == 1).count();
        let (ci_low, ci_high) = wilson_interval(positives, simulated, 1.959963984540054);
        Self {
            requested: labels.len(),
            simulated,
            positives,
            precision: if simulated == 0 { 0.0 } else { positives as f64 / simulated as f64 },
            ci_low,
            ci_high,
            failures,
            labels,
        }
    }
}

/// Simulates every design and reports the fraction labeled positive.
pub fn evaluate_designs(cells: &[UnitCell], cfg: &DispersionConfig, policy: &LabelPolicy) -> Result<PrecisionReport> {
    if cells.is_empty() {
        return invalid("no designs to evaluate");
    }
    cfg.validate()?;
    let outcomes: Vec<std::result::Result<u8, String>> = cells
        .par_iter()
        .map(|c| dispersion(c, cfg).map(|r| label(&r, policy)).map_err(|e| e.to_string()))
        .collect();
    let mut failures = Vec::new();
    let labels = outcomes
        .into_iter()
        .enumerate()
        .map(|(i, o)| match o {
            Ok(l) => Some(l),
            Err(e) => {
                log::warn!("design {i} failed: {e}");
                failures.push(format!("{i}: {e}"));
                None
            }
        })
        .collect();
    Ok(PrecisionReport::from_labels(labels, failures))
}

/// Draws `n_samples` designs from `generator` (called with the draw index)
/// and evaluates them.
pub fn evaluate_sampler<G>(generator: G, cfg: &DispersionConfig, policy: &LabelPolicy, n_samples: usize) -> Result<PrecisionReport>
where
    G: Fn(u64) -> Result<UnitCell> + Sync,
{
    if n_samples == 0 {
        return invalid("n_samples must be >= 1");
    }
    let cells = (0..n_samples as u64)
        .into_par_iter()
        .map(&generator)
        .collect::<Result<Vec<_>>>()?;
    evaluate_designs(&cells, cfg, policy)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_reference_values() {
        // 8 of 10 at 95%: (0.4902, 0.9433)
        let (lo, hi) = wilson_interval(8, 10, 1.959963984540054);
        assert!((lo - 0.4902).abs() < 1e-4 && (hi - 0.9433).abs() < 1e-4);
        let (lo, hi) = wilson_interval(0, 0, 1.96);
        assert_eq!((lo, hi), (0.0, 1.0));
        let (_, hi) = wilson_interval(50, 50, 1.96);
        assert!(hi <= 1.0);
    }

    #[test]
    fn zero_samples_rejected() {
        let cfg = DispersionConfig::default();
        let p = LabelPolicy::intersect(10e3, 20e3).unwrap();
        assert!(evaluate_sampler(|_| UnitCell::soft(10), &cfg, &p, 0).is_err());
    }
}
