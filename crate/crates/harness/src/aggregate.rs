//! Cross-seed aggregation of evaluation curves.

use crate::error::{HarnessError, Result};
use crate::metrics::{sig6, MetricsRow};

pub const HEADER: &str = "step,n,mean,std,ci_low,ci_high";

/// 95% normal-approximation multiplier.
pub const Z95: f64 = 1.96;

#[derive(Clone, Debug, PartialEq)]
pub struct AggregateRow {
    pub step: u64,
    pub n: usize,
    pub mean: f64,
    /// Sample std and CI bounds; absent with a single seed.
    pub std: Option<f64>,
    pub ci: Option<(f64, f64)>,
}

impl AggregateRow {
    pub fn to_csv(&self) -> String {
        let o = |x: Option<f64>| x.map(sig6).unwrap_or_default();
        format!(
            "{},{},{},{},{},{}",
            self.step,
            self.n,
            sig6(self.mean),
            o(self.std),
            o(self.ci.map(|c| c.0)),
            o(self.ci.map(|c| c.1))
        )
    }
}

/// Mean and `mean ± 1.96·s/√n` of `eval_mean` at every evaluation step.
/// All runs must report the same steps.
pub fn aggregate(runs: &[Vec<MetricsRow>]) -> Result<Vec<AggregateRow>> {
    let first = runs
        .first()
        .ok_or_else(|| HarnessError::Config("aggregate needs at least one metrics file".into()))?;
    let steps: Vec<u64> = first.iter().map(|r| r.step).collect();
    let mut offending = std::collections::BTreeSet::new();
    for run in &runs[1..] {
        let other: Vec<u64> = run.iter().map(|r| r.step).collect();
        for s in steps.iter().filter(|s| !other.contains(s)) {
            offending.insert(*s);
        }
        for s in other.iter().filter(|s| !steps.contains(s)) {
            offending.insert(*s);
        }
    }
    if !offending.is_empty() {
        let list: Vec<String> = offending.iter().map(|s| s.to_string()).collect();
        return Err(HarnessError::Runtime(format!("evaluation steps differ across runs: {}", list.join(", "))));
    }
    Ok(steps
        .iter()
        .enumerate()
        .map(|(i, &step)| {
            let xs: Vec<f64> = runs.iter().map(|r| r[i].eval_mean).collect();
            let n = xs.len();
            let mean = xs.iter().sum::<f64>() / n as f64;
            if n < 2 {
                return AggregateRow {
                    step,
                    n,
                    mean,
                    std: None,
                    ci: None,
                };
            }
            let std = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
            let half = Z95 * std / (n as f64).sqrt();
            AggregateRow {
                step,
                n,
                mean,
                std: Some(std),
                ci: Some((mean - half, mean + half)),
            }
        })
        .collect())
}

pub fn to_csv(rows: &[AggregateRow]) -> String {
    let mut s = format!("{HEADER}\n");
    for r in rows {
        s.push_str(&r.to_csv());
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(points: &[(u64, f64)]) -> Vec<MetricsRow> {
        points
            .iter()
            .map(|&(step, eval_mean)| MetricsRow {
                step,
                eval_mean,
                ..Default::default()
            })
            .collect()
    }

    #[test]
    fn closed_form_interval() {
        let rows = aggregate(&[run(&[(10, 1.0)]), run(&[(10, 2.0)]), run(&[(10, 3.0)])]).unwrap();
        let r = &rows[0];
        assert_eq!((r.n, r.mean, r.std), (3, 2.0, Some(1.0)));
        let (lo, hi) = r.ci.unwrap();
        assert!((hi - 2.0 - 1.96 / 3f64.sqrt()).abs() < 1e-12);
        assert!((2.0 - lo - 1.1316).abs() < 1e-4);
    }

    #[test]
    fn identical_runs_have_zero_width() {
        let r = run(&[(5, 7.5), (10, 8.0)]);
        let rows = aggregate(&[r.clone(), r.clone(), r]).unwrap();
        assert!(rows.iter().all(|a| a.ci == Some((a.mean, a.mean))));
    }

    #[test]
    fn single_seed_leaves_interval_empty() {
        let rows = aggregate(&[run(&[(5, 1.0)])]).unwrap();
        assert_eq!(rows[0].to_csv(), "5,1,1.00000,,,");
    }

    #[test]
    fn misaligned_steps_are_listed() {
        let e = aggregate(&[run(&[(5, 1.0), (10, 1.0)]), run(&[(5, 1.0), (12, 1.0)])]).unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("10") && msg.contains("12"), "{msg}");
    }
}
