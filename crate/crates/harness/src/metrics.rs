//! Evaluation-point metrics rows and their CSV form.

use crate::error::{HarnessError, Result};

pub const HEADER: &str =
    "step,episodes,train_reward,eval_mean,eval_std,loss,policy_loss,value_loss,entropy,approx_kl,clip_fraction";

/// One row per evaluation point. Optional fields print as empty cells.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricsRow {
    pub step: u64,
    /// Training episodes finished so far.
    pub episodes: u64,
    /// Mean undiscounted return of training episodes finished since the
    /// previous row.
    pub train_reward: Option<f64>,
    pub eval_mean: f64,
    pub eval_std: f64,
    /// Mean TD loss since the previous row (DQN).
    pub loss: Option<f64>,
    /// Diagnostics of the latest update (PPO).
    pub policy_loss: Option<f64>,
    pub value_loss: Option<f64>,
    pub entropy: Option<f64>,
    pub approx_kl: Option<f64>,
    pub clip_fraction: Option<f64>,
}

/// Six significant digits, plain decimal where reasonable.
pub fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        // rounding can carry into a new digit (e.g. 9.999996 → 10.0000)
        let s = format!("{x:.decimals$}");
        let digits = s.chars().filter(|c| c.is_ascii_digit()).collect::<String>();
        if digits.trim_start_matches('0').len() > 6 && decimals > 0 {
            let d = decimals - 1;
            return format!("{x:.d$}");
        }
        s
    } else {
        format!("{x:.5e}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(sig6).unwrap_or_default()
}

impl MetricsRow {
    pub fn to_csv(&self) -> String {
        [
            self.step.to_string(),
            self.episodes.to_string(),
            opt(self.train_reward),
            sig6(self.eval_mean),
            sig6(self.eval_std),
            opt(self.loss),
            opt(self.policy_loss),
            opt(self.value_loss),
            opt(self.entropy),
            opt(self.approx_kl),
            opt(self.clip_fraction),
        ]
        .join(",")
    }

    pub fn from_csv(line: &str) -> Result<Self> {
        let cells: Vec<&str> = line.trim_end().split(',').collect();
        if cells.len() != 11 {
            return Err(HarnessError::Runtime(format!("metrics row has {} cells: {line:?}", cells.len())));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| HarnessError::Runtime(format!("bad metrics value {s:?}")))
        };
        let opt = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                num(s).map(Some)
            }
        };
        let int = |s: &str| -> Result<u64> {
            s.parse()
                .map_err(|_| HarnessError::Runtime(format!("bad metrics integer {s:?}")))
        };
        Ok(MetricsRow {
            step: int(cells[0])?,
            episodes: int(cells[1])?,
            train_reward: opt(cells[2])?,
            eval_mean: num(cells[3])?,
            eval_std: num(cells[4])?,
            loss: opt(cells[5])?,
            policy_loss: opt(cells[6])?,
            value_loss: opt(cells[7])?,
            entropy: opt(cells[8])?,
            approx_kl: opt(cells[9])?,
            clip_fraction: opt(cells[10])?,
        })
    }
}

pub fn parse_metrics(text: &str) -> Result<Vec<MetricsRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim_end() == HEADER => {}
        _ => return Err(HarnessError::Runtime("metrics file lacks the expected header".into())),
    }
    lines.filter(|l| !l.trim().is_empty()).map(MetricsRow::from_csv).collect()
}
