use simworld::Frame;

use crate::error::{EnvError, Result};
use crate::FRAME_STACK;

/// Gray-to-depth image model used by the `depth_pred` and `fused` modes.
pub trait DepthPredictor: Send + Sync {
    /// Predicts a normalized depth frame with the size of `gray`.
    fn predict(&self, gray: &Frame) -> Frame;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SensorMode {
    Gray,
    /// Ground-truth depth.
    Depth,
    /// Model-predicted depth from the gray frame.
    DepthPred,
    /// Gray and predicted depth as two channels.
    Fused,
}

impl SensorMode {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "gray" => Ok(SensorMode::Gray),
            "depth" => Ok(SensorMode::Depth),
            "depth_pred" => Ok(SensorMode::DepthPred),
            "fused" => Ok(SensorMode::Fused),
            other => Err(EnvError::Config(format!(
                "unknown sensor mode {other:?} (expected gray, depth, depth_pred or fused)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SensorMode::Gray => "gray",
            SensorMode::Depth => "depth",
            SensorMode::DepthPred => "depth_pred",
            SensorMode::Fused => "fused",
        }
    }

    pub fn channels(self) -> usize {
        match self {
            SensorMode::Fused => 2,
            _ => 1,
        }
    }

    pub fn needs_model(self) -> bool {
        matches!(self, SensorMode::DepthPred | SensorMode::Fused)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ObservationSpec {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub stack: usize,
}

impl ObservationSpec {
    pub fn new(size: usize, mode: SensorMode) -> Self {
        ObservationSpec {
            width: size,
            height: size,
            channels: mode.channels(),
            stack: FRAME_STACK,
        }
    }

    /// Channels-first state shape `[C·stack, H, W]`.
    pub fn state_shape(&self) -> [usize; 3] {
        [self.channels * self.stack, self.height, self.width]
    }

    pub fn frame_len(&self) -> usize {
        self.channels * self.width * self.height
    }
}

fn require_model(mode: SensorMode, model: Option<&dyn DepthPredictor>) -> Result<&dyn DepthPredictor> {
    model.ok_or_else(|| EnvError::Config(format!("sensor mode {} requires a depth model", mode.name())))
}

/// Assembles one per-step frame (all channels, channels first) from the
/// rendered camera and depth images.
pub fn build_observation_frame(
    mode: SensorMode,
    gray: &Frame,
    depth: &Frame,
    model: Option<&dyn DepthPredictor>,
) -> Result<Vec<f32>> {
    let need = |m| require_model(mode, m);
    Ok(match mode {
        SensorMode::Gray => gray.data.clone(),
        SensorMode::Depth => depth.data.clone(),
        SensorMode::DepthPred => need(model)?.predict(gray).data,
        SensorMode::Fused => {
            let pred = need(model)?.predict(gray);
            let mut out = Vec::with_capacity(gray.data.len() * 2);
            out.extend_from_slice(&gray.data);
            out.extend_from_slice(&pred.data);
            out
        }
    })
}
