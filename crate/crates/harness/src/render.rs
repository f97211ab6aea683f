//! Frame and trajectory dumps from one anchor-spawned episode.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use simworld::{pgm, render_camera};

use crate::agent::{make_env, Policy};
use crate::config::RunConfig;
use crate::error::Result;
use crate::eval::{episode_rng, run_episode};

pub const TRAJECTORY_FILE: &str = "traj.txt";

#[derive(Clone, Debug, PartialEq)]
pub struct RenderSummary {
    pub frames: usize,
    pub total_reward: f64,
}

/// Runs `policy` for at most `steps` steps (stopping early at episode end)
/// and writes `NNNN_gray.pgm` (plus `NNNN_depth.pgm` when `depth`) for the
/// view after each step, and `traj.txt` with one `t x y theta reward done`
/// line per step.
pub fn render_episode(
    cfg: &RunConfig,
    map: &std::sync::Arc<simworld::GridMap>,
    policy: &Policy,
    steps: usize,
    depth: bool,
    out: &Path,
) -> Result<RenderSummary> {
    fs::create_dir_all(out)?;
    let model = crate::agent::load_depth_model(cfg)?;
    let mut env = make_env(cfg, map, &model, cfg.seed)?;
    let mut rng = episode_rng(cfg.seed, 0);
    let mut traj = String::new();
    let mut frames = 0;
    let (total_reward, _) = run_episode(policy, &mut env, cfg.eval_stochastic, &mut rng, steps, |env, _, r| {
        let pose = env.pose();
        let (gray, d) = render_camera(env.map(), &pose, env.camera());
        pgm::write(&out.join(format!("{frames:04}_gray.pgm")), &gray)?;
        if depth {
            pgm::write(&out.join(format!("{frames:04}_depth.pgm")), &d)?;
        }
        writeln!(
            traj,
            "{} {:?} {:?} {:?} {:?} {}",
            r.info.t,
            pose.x,
            pose.y,
            pose.theta,
            r.reward,
            r.done as u8
        )
        .expect("string write");
        frames += 1;
        Ok(())
    })?;
    fs::write(out.join(TRAJECTORY_FILE), traj)?;
    Ok(RenderSummary { frames, total_reward })
}

/// Parses `traj.txt` back into `(t, reward)` pairs.
pub fn read_trajectory(path: &Path) -> Result<Vec<(usize, f64)>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split_whitespace().collect();
            let bad = || crate::error::HarnessError::Runtime(format!("bad trajectory line {l:?}"));
            if f.len() != 6 {
                return Err(bad());
            }
            Ok((f[0].parse().map_err(|_| bad())?, f[4].parse().map_err(|_| bad())?))
        })
        .collect()
}
