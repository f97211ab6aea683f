use std::f64::consts::PI;

use crate::error::{EnvError, Result};

pub const V_MIN: f64 = 0.05;
pub const V_MAX: f64 = 0.3;
pub const OMEGA_MAX: f64 = PI / 6.0;
/// Raw Gaussian actions are clipped to `[-CLIP, CLIP]` before mapping.
pub const CLIP: f64 = 3.0;

#[derive(Clone, Debug, PartialEq)]
pub enum ActionSpace {
    /// Lookup table of `(v, ω)` commands.
    Discrete(Vec<(f64, f64)>),
    /// Two raw values mapped linearly onto `[0.05, 0.3] × [−π/6, π/6]`.
    Continuous,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Action {
    Discrete(usize),
    Continuous([f64; 2]),
}

impl ActionSpace {
    /// Forward plus four turning commands.
    pub fn disc5() -> Self {
        ActionSpace::Discrete(vec![
            (0.3, 0.0),
            (0.05, -PI / 6.0),
            (0.05, -PI / 12.0),
            (0.05, PI / 12.0),
            (0.05, PI / 6.0),
        ])
    }

    /// Three gentle turns at full speed.
    pub fn disc3() -> Self {
        ActionSpace::Discrete(vec![(0.3, -0.3), (0.3, 0.0), (0.3, 0.3)])
    }

    /// `ω_n = −π/6 + πn/60`; full speed only when going straight.
    pub fn disc21() -> Self {
        ActionSpace::Discrete(
            (0..21)
                .map(|n| {
                    let omega = if n == 10 { 0.0 } else { -PI / 6.0 + PI * n as f64 / 60.0 };
                    (if n == 10 { 0.3 } else { 0.05 }, omega)
                })
                .collect(),
        )
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "disc3" => Ok(Self::disc3()),
            "disc5" => Ok(Self::disc5()),
            "disc21" => Ok(Self::disc21()),
            "continuous" => Ok(ActionSpace::Continuous),
            other => Err(EnvError::Config(format!(
                "unknown action space {other:?} (expected disc3, disc5, disc21 or continuous)"
            ))),
        }
    }

    /// Number of discrete actions, or `None` for the continuous space.
    pub fn num_actions(&self) -> Option<usize> {
        match self {
            ActionSpace::Discrete(table) => Some(table.len()),
            ActionSpace::Continuous => None,
        }
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self, ActionSpace::Continuous)
    }

    pub fn map_discrete(&self, index: usize) -> Result<(f64, f64)> {
        match self {
            ActionSpace::Discrete(table) => table.get(index).copied().ok_or_else(|| {
                EnvError::InvalidAction(format!("index {index} out of range for {} actions", table.len()))
            }),
            ActionSpace::Continuous => Err(EnvError::InvalidAction("discrete index for a continuous space".into())),
        }
    }

    pub fn map(&self, action: Action) -> Result<(f64, f64)> {
        match (self, action) {
            (ActionSpace::Discrete(_), Action::Discrete(i)) => self.map_discrete(i),
            (ActionSpace::Continuous, Action::Continuous(z)) => {
                if z.iter().all(|v| v.is_finite()) {
                    Ok(map_continuous(z))
                } else {
                    Err(EnvError::InvalidAction(format!("non-finite continuous action {z:?}")))
                }
            }
            _ => Err(EnvError::InvalidAction(format!("{action:?} does not match the action space"))),
        }
    }
}

/// Clips `z` to `[-3, 3]²` and maps it linearly onto the command box.
pub fn map_continuous(z: [f64; 2]) -> (f64, f64) {
    let a = z[0].clamp(-CLIP, CLIP);
    let b = z[1].clamp(-CLIP, CLIP);
    let v = V_MIN + (a + CLIP) / (2.0 * CLIP) * (V_MAX - V_MIN);
    let omega = b / CLIP * OMEGA_MAX;
    // rounding can push the endpoints one ulp outside the box
    (v.clamp(V_MIN, V_MAX), omega.clamp(-OMEGA_MAX, OMEGA_MAX))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn five_action_table() {
        let s = ActionSpace::disc5();
        assert_eq!(s.map_discrete(0).unwrap(), (0.3, 0.0));
        assert_eq!(s.map_discrete(1).unwrap(), (0.05, -PI / 6.0));
        assert!(matches!(s.map_discrete(5), Err(EnvError::InvalidAction(_))));
    }

    #[test]
    fn twenty_one_action_table() {
        let s = ActionSpace::disc21();
        assert_eq!(s.num_actions(), Some(21));
        assert_eq!(s.map_discrete(10).unwrap(), (0.3, 0.0));
        let (v0, w0) = s.map_discrete(0).unwrap();
        let (_, w20) = s.map_discrete(20).unwrap();
        assert_eq!(v0, 0.05);
        assert!((w0 + PI / 6.0).abs() < 1e-15 && (w20 - PI / 6.0).abs() < 1e-15);
    }

    #[test]
    fn three_action_table() {
        let s = ActionSpace::disc3();
        let w: Vec<f64> = (0..3).map(|i| s.map_discrete(i).unwrap().1).collect();
        assert_eq!(w, vec![-0.3, 0.0, 0.3]);
    }

    #[test]
    fn continuous_examples() {
        let close = |a: (f64, f64), b: (f64, f64)| (a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12;
        assert!(close(map_continuous([0.0, 0.0]), (0.175, 0.0)));
        assert!(close(map_continuous([3.0, 3.0]), (0.3, PI / 6.0)));
        assert!(close(map_continuous([-3.0, -3.0]), (0.05, -PI / 6.0)));
        assert!(close(map_continuous([4.5, -10.0]), (0.3, -PI / 6.0)));
        assert!(ActionSpace::Continuous.map(Action::Continuous([f64::NAN, 0.0])).is_err());
        assert!(ActionSpace::Continuous.map(Action::Discrete(0)).is_err());
    }

    #[test]
    fn names() {
        assert_eq!(ActionSpace::from_name("disc5").unwrap(), ActionSpace::disc5());
        assert!(ActionSpace::from_name("disc4").is_err());
    }
}
