use std::collections::VecDeque;
use std::sync::Arc;

use nncore::Tensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use simworld::{
    center_deviation, check_collision, compute_reward, range_scan, render_camera, spawn, step_kinematics,
    CameraConfig, CdMode, GridMap, Pose, SpawnMode, DT, D_MAX, ROBOT_RADIUS,
};

use crate::action::{Action, ActionSpace};
use crate::error::{EnvError, Result};
use crate::observation::{build_observation_frame, DepthPredictor, ObservationSpec, SensorMode};
use crate::MAX_EPISODE_STEPS;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpisodeConfig {
    pub max_steps: usize,
    /// Discount factor, carried here for the learners.
    pub gamma: f64,
    pub sensor: SensorMode,
    pub cd_mode: CdMode,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig {
            max_steps: MAX_EPISODE_STEPS,
            gamma: 0.99,
            sensor: SensorMode::Gray,
            cd_mode: CdMode::Mean,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvConfig {
    pub episode: EpisodeConfig,
    pub actions: ActionSpace,
    /// Square observation edge in pixels.
    pub obs_size: usize,
    pub supersample: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            episode: EpisodeConfig::default(),
            actions: ActionSpace::disc5(),
            obs_size: 84,
            supersample: 1,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        let e = &self.episode;
        if e.max_steps < 1 {
            return Err(EnvError::Config("max_steps must be at least 1".into()));
        }
        if !(e.gamma > 0.0 && e.gamma <= 1.0) {
            return Err(EnvError::Config(format!("gamma must lie in (0, 1], got {}", e.gamma)));
        }
        if self.obs_size < 8 {
            return Err(EnvError::Config(format!("observation size {} is too small", self.obs_size)));
        }
        if self.supersample < 1 {
            return Err(EnvError::Config("supersample must be at least 1".into()));
        }
        if let ActionSpace::Discrete(table) = &self.actions {
            if table.is_empty() {
                return Err(EnvError::Config("discrete action table is empty".into()));
            }
        }
        Ok(())
    }

    pub fn observation_spec(&self) -> ObservationSpec {
        ObservationSpec::new(self.obs_size, self.episode.sensor)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepInfo {
    pub collided: bool,
    pub center_deviation: f64,
    pub v: f64,
    pub omega: f64,
    /// Step count after this step.
    pub t: usize,
}

#[derive(Clone, Debug)]
pub struct StepResult {
    pub state: Tensor,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// Serializable episode state, enough to continue an episode bit-exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvSnapshot {
    pub pose: Pose,
    pub t: usize,
    pub done: bool,
    pub started: bool,
    pub frames: Vec<Vec<f32>>,
    pub rng_seed: [u8; 32],
    pub rng_stream: u64,
    pub rng_word_pos: u128,
}

pub struct Env {
    map: Arc<GridMap>,
    config: EnvConfig,
    camera: CameraConfig,
    spec: ObservationSpec,
    model: Option<Arc<dyn DepthPredictor>>,
    rng: ChaCha8Rng,
    pose: Pose,
    t: usize,
    done: bool,
    started: bool,
    frames: VecDeque<Vec<f32>>,
}

impl Env {
    pub fn new(
        map: Arc<GridMap>,
        config: EnvConfig,
        seed: u64,
        model: Option<Arc<dyn DepthPredictor>>,
    ) -> Result<Env> {
        config.validate()?;
        if config.episode.sensor.needs_model() && model.is_none() {
            return Err(EnvError::Config(format!(
                "sensor mode {} requires a depth model",
                config.episode.sensor.name()
            )));
        }
        let camera = CameraConfig {
            supersample: config.supersample,
            ..CameraConfig::with_size(config.obs_size)
        };
        let spec = config.observation_spec();
        Ok(Env {
            map,
            camera,
            spec,
            model,
            rng: ChaCha8Rng::seed_from_u64(seed),
            pose: Pose::new(0.0, 0.0, 0.0),
            t: 0,
            done: false,
            started: false,
            frames: VecDeque::with_capacity(spec.stack),
            config,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn spec(&self) -> ObservationSpec {
        self.spec
    }

    pub fn map(&self) -> &GridMap {
        &self.map
    }

    pub fn action_space(&self) -> &ActionSpace {
        &self.config.actions
    }

    pub fn pose(&self) -> Pose {
        self.pose
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// True before the first reset and after an episode ends.
    pub fn needs_reset(&self) -> bool {
        !self.started || self.done
    }

    pub fn camera(&self) -> &CameraConfig {
        &self.camera
    }

    /// Spawns the robot and fills the stack with the first frame.
    pub fn reset(&mut self, mode: SpawnMode) -> Result<Tensor> {
        let pose = spawn(&self.map, &mut self.rng, mode, ROBOT_RADIUS)?;
        self.reset_to(pose)
    }

    /// Starts an episode at an explicit pose.
    pub fn reset_to(&mut self, pose: Pose) -> Result<Tensor> {
        self.pose = pose;
        self.t = 0;
        self.done = false;
        self.started = true;
        let frame = self.observe()?;
        self.frames.clear();
        for _ in 0..self.spec.stack {
            self.frames.push_back(frame.clone());
        }
        Ok(self.state())
    }

    pub fn step(&mut self, action: Action) -> Result<StepResult> {
        if !self.started {
            return Err(EnvError::NotReset);
        }
        if self.done {
            return Err(EnvError::EpisodeDone);
        }
        let (v, omega) = self.config.actions.map(action)?;
        self.pose = step_kinematics(self.pose, v, omega, DT);
        let collided = check_collision(&self.map, &self.pose, ROBOT_RADIUS);
        let scan = range_scan(&self.map, &self.pose, D_MAX);
        let cd = center_deviation(&scan, self.config.episode.cd_mode);
        let reward = compute_reward(collided, cd, v, omega);

        let frame = self.observe()?;
        self.frames.pop_front();
        self.frames.push_back(frame);
        self.t += 1;
        self.done = collided || self.t >= self.config.episode.max_steps;
        Ok(StepResult {
            state: self.state(),
            reward,
            done: self.done,
            info: StepInfo {
                collided,
                center_deviation: cd,
                v,
                omega,
                t: self.t,
            },
        })
    }

    /// Current stacked state, oldest frame first.
    pub fn state(&self) -> Tensor {
        let mut data = Vec::with_capacity(self.spec.frame_len() * self.spec.stack);
        for f in &self.frames {
            data.extend_from_slice(f);
        }
        Tensor::from_vec(&self.spec.state_shape(), data).expect("frame sizes match the observation layout")
    }

    fn observe(&self) -> Result<Vec<f32>> {
        let (gray, depth) = render_camera(&self.map, &self.pose, &self.camera);
        build_observation_frame(self.config.episode.sensor, &gray, &depth, self.model.as_deref())
    }

    pub fn snapshot(&self) -> EnvSnapshot {
        EnvSnapshot {
            pose: self.pose,
            t: self.t,
            done: self.done,
            started: self.started,
            frames: self.frames.iter().cloned().collect(),
            rng_seed: self.rng.get_seed(),
            rng_stream: self.rng.get_stream(),
            rng_word_pos: self.rng.get_word_pos(),
        }
    }

    pub fn restore(&mut self, snap: &EnvSnapshot) -> Result<()> {
        let n = self.spec.frame_len();
        if snap.started && (snap.frames.len() != self.spec.stack || snap.frames.iter().any(|f| f.len() != n)) {
            return Err(EnvError::Snapshot("frame stack does not match the observation layout".into()));
        }
        let mut rng = ChaCha8Rng::from_seed(snap.rng_seed);
        rng.set_stream(snap.rng_stream);
        rng.set_word_pos(snap.rng_word_pos);
        self.rng = rng;
        self.pose = snap.pose;
        self.t = snap.t;
        self.done = snap.done;
        self.started = snap.started;
        self.frames = snap.frames.iter().cloned().collect();
        Ok(())
    }
}

impl EnvSnapshot {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for v in [self.pose.x, self.pose.y, self.pose.theta] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&(self.t as u64).to_le_bytes());
        out.push(self.done as u8);
        out.push(self.started as u8);
        out.extend_from_slice(&self.rng_seed);
        out.extend_from_slice(&self.rng_stream.to_le_bytes());
        out.extend_from_slice(&self.rng_word_pos.to_le_bytes());
        out.extend_from_slice(&(self.frames.len() as u32).to_le_bytes());
        for f in &self.frames {
            out.extend_from_slice(&(f.len() as u32).to_le_bytes());
            for v in f {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<EnvSnapshot> {
        let mut r = Reader { bytes, pos: 0 };
        let x = f64::from_le_bytes(r.array()?);
        let y = f64::from_le_bytes(r.array()?);
        let theta = f64::from_le_bytes(r.array()?);
        let t = u64::from_le_bytes(r.array()?) as usize;
        let [done, started] = r.array::<2>()?;
        let rng_seed = r.array::<32>()?;
        let rng_stream = u64::from_le_bytes(r.array()?);
        let rng_word_pos = u128::from_le_bytes(r.array()?);
        let count = u32::from_le_bytes(r.array()?) as usize;
        let mut frames = Vec::with_capacity(count.min(16));
        for _ in 0..count {
            let len = u32::from_le_bytes(r.array()?) as usize;
            let mut f = Vec::with_capacity(len.min(1 << 20));
            for _ in 0..len {
                f.push(f32::from_le_bytes(r.array()?));
            }
            frames.push(f);
        }
        if r.pos != bytes.len() {
            return Err(EnvError::Snapshot("trailing bytes".into()));
        }
        Ok(EnvSnapshot {
            pose: Pose { x, y, theta },
            t,
            done: done != 0,
            started: started != 0,
            frames,
            rng_seed,
            rng_stream,
            rng_word_pos,
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        let slice = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| EnvError::Snapshot("truncated".into()))?;
        self.pos = end;
        Ok(slice.try_into().expect("slice length is N"))
    }
}
