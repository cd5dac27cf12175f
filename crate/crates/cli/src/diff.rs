//! Difference metrics between two occupation time series.

use rtrg_core::evolution::EvolutionRun;

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq)]
pub struct DiffReport {
    /// `Σ_{j,t} |a−b| / (N_s·T)`
    pub mean_abs_diff: f64,
    /// `100 Σ|a−b| / Σ|b|`
    pub mean_pct_diff: f64,
    /// `100 mean(|a−b|/|b|)` over entries with `b ≠ 0`
    pub mean_pointwise_pct_diff: f64,
    pub max_abs_diff: f64,
    /// Mean |a−b| over sites, per step.
    pub per_step: Vec<f64>,
    /// |C̄_a − C̄_b| per step, `None` where either side is undefined.
    pub cbar_abs_diff: Vec<Option<f64>>,
}

impl DiffReport {
    pub fn mean_cbar_abs_diff(&self) -> Option<f64> {
        let v: Vec<f64> = self.cbar_abs_diff.iter().flatten().copied().collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}

/// Compare `a` against reference `b`.
pub fn diff(a: &EvolutionRun, b: &EvolutionRun) -> CliResult<DiffReport> {
    if a.series.len() != b.series.len() {
        return Err(CliError::Config(format!("series lengths differ: {} vs {}", a.series.len(), b.series.len())));
    }
    let (mut sum_abs, mut sum_ref, mut count, mut max_abs) = (0.0, 0.0, 0usize, 0.0f64);
    let (mut pw_sum, mut pw_count) = (0.0, 0usize);
    let mut per_step = Vec::with_capacity(a.series.len());
    let mut cbar_abs_diff = Vec::with_capacity(a.series.len());
    for (ra, rb) in a.series.iter().zip(&b.series) {
        if ra.n_expect.len() != rb.n_expect.len() {
            return Err(CliError::Config(format!(
                "step {}: {} sites vs {}",
                ra.step,
                ra.n_expect.len(),
                rb.n_expect.len()
            )));
        }
        let mut step_sum = 0.0;
        for (x, y) in ra.n_expect.iter().zip(&rb.n_expect) {
            let d = (x - y).abs();
            step_sum += d;
            sum_ref += y.abs();
            max_abs = max_abs.max(d);
            if *y != 0.0 {
                pw_sum += d / y.abs();
                pw_count += 1;
            }
        }
        sum_abs += step_sum;
        count += ra.n_expect.len();
        per_step.push(if ra.n_expect.is_empty() { 0.0 } else { step_sum / ra.n_expect.len() as f64 });
        cbar_abs_diff.push(match (ra.cbar, rb.cbar) {
            (Some(x), Some(y)) => Some((x - y).abs()),
            _ => None,
        });
    }
    Ok(DiffReport {
        mean_abs_diff: if count > 0 { sum_abs / count as f64 } else { 0.0 },
        mean_pct_diff: if sum_ref > 0.0 { 100.0 * sum_abs / sum_ref } else { 0.0 },
        mean_pointwise_pct_diff: if pw_count > 0 { 100.0 * pw_sum / pw_count as f64 } else { 0.0 },
        max_abs_diff: max_abs,
        per_step,
        cbar_abs_diff,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rtrg_core::evolution::StepRecord;

    fn run(rows: usize, sites: usize, offset: f64) -> EvolutionRun {
        let series = (0..rows)
            .map(|t| {
                let n = (0..sites).map(|j| 0.1 + 0.01 * j as f64 + 0.001 * t as f64 + offset).collect();
                StepRecord::from_occupations(t, t as f64, n, 1.0)
            })
            .collect();
        EvolutionRun { dt: 1.0, series, ..Default::default() }
    }

    #[test]
    fn identical_series() {
        let r = diff(&run(5, 4, 0.0), &run(5, 4, 0.0)).unwrap();
        assert_eq!(r.mean_abs_diff, 0.0);
        assert_eq!(r.max_abs_diff, 0.0);
        assert_eq!(r.mean_pct_diff, 0.0);
        assert!(r.per_step.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn constant_offset() {
        let r = diff(&run(100, 8, 0.01), &run(100, 8, 0.0)).unwrap();
        assert!((r.mean_abs_diff - 0.01).abs() < 1e-15);
        assert!((r.max_abs_diff - 0.01).abs() < 1e-15);
        assert_eq!(r.per_step.len(), 100);
    }

    #[test]
    fn shape_mismatch() {
        assert!(diff(&run(5, 4, 0.0), &run(6, 4, 0.0)).is_err());
        assert!(diff(&run(5, 4, 0.0), &run(5, 3, 0.0)).is_err());
    }

    #[test]
    fn missing_centres_are_skipped() {
        let mut a = run(3, 2, 0.0);
        a.series[1] = StepRecord::from_occupations(1, 1.0, vec![0.0, 0.0], 1.0);
        let r = diff(&a, &run(3, 2, 0.0)).unwrap();
        assert!(r.cbar_abs_diff[1].is_none());
        assert!(r.mean_cbar_abs_diff().is_some());
    }
}
