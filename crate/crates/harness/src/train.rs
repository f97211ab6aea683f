//! The training loop: steps the learner, evaluates on schedule, writes
//! metrics rows and checkpoints.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use agents::codec::{Reader, Writer};

use crate::agent::{load_depth_model, load_map, make_env, Agent};
use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::error::{HarnessError, Result};
use crate::eval::{evaluate, mean_std, EvalReport};
use crate::metrics::{MetricsRow, HEADER};

pub const METRICS_FILE: &str = "metrics.csv";
pub const TIMING_FILE: &str = "timing.csv";
pub const FINAL_CHECKPOINT: &str = "checkpoint.bin";
pub const CONFIG_ECHO: &str = "config.txt";

pub fn periodic_checkpoint_name(step: u64) -> String {
    format!("ckpt_{step:08}.bin")
}

/// Loop bookkeeping that must survive a checkpoint for a resumed run to
/// reproduce the uninterrupted one.
#[derive(Clone, Debug, Default, PartialEq)]
struct Progress {
    step: u64,
    episodes: u64,
    /// Returns of training episodes finished since the last row.
    pending: Vec<f64>,
    loss_sum: f64,
    loss_count: u64,
    /// policy loss, value loss, entropy, approx KL, clip fraction
    last_update: Option<[f64; 5]>,
    next_eval: u64,
    next_ckpt: u64,
    metrics: String,
}

impl Progress {
    fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.u64(self.step);
        w.u64(self.episodes);
        w.f64s(&self.pending);
        w.f64(self.loss_sum);
        w.u64(self.loss_count);
        match self.last_update {
            Some(u) => {
                w.u8(1);
                w.f64s(&u);
            }
            None => w.u8(0),
        }
        w.u64(self.next_eval);
        w.u64(self.next_ckpt);
        w.bytes(self.metrics.as_bytes());
        w.finish()
    }

    fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let run = || -> agents::Result<Progress> {
            let mut r = Reader::new(bytes);
            let mut p = Progress {
                step: r.u64()?,
                episodes: r.u64()?,
                pending: r.f64s()?,
                loss_sum: r.f64()?,
                loss_count: r.u64()?,
                ..Default::default()
            };
            if r.u8()? == 1 {
                let u = r.f64s()?;
                p.last_update = Some(u.try_into().map_err(|_| agents::AgentError::Format("update stats".into()))?);
            }
            p.next_eval = r.u64()?;
            p.next_ckpt = r.u64()?;
            p.metrics = String::from_utf8(r.bytes()?.to_vec())
                .map_err(|_| agents::AgentError::Format("metrics text".into()))?;
            r.finish()?;
            Ok(p)
        };
        run().map_err(|e| HarnessError::Runtime(format!("checkpoint progress: {e}")))
    }
}

fn next_multiple(step: u64, period: u64) -> u64 {
    (step / period + 1) * period
}

#[derive(Clone, Debug)]
pub struct TrainSummary {
    pub steps: u64,
    pub rows: Vec<MetricsRow>,
    pub final_eval: Option<EvalReport>,
    pub out_dir: PathBuf,
}

struct Run<'a> {
    cfg: &'a RunConfig,
    out: &'a Path,
    agent: Agent,
    progress: Progress,
    eval_env: envapi::Env,
    started: Instant,
    log: bool,
    last_eval: Option<EvalReport>,
}

impl Run<'_> {
    fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            config: self.cfg.to_text(),
            step: self.progress.step,
            trainer: self.agent.state_bytes(),
            progress: self.progress.to_bytes(),
        }
    }

    fn write_metrics(&self) -> Result<()> {
        fs::write(self.out.join(METRICS_FILE), &self.progress.metrics)?;
        Ok(())
    }

    fn eval_row(&mut self) -> Result<()> {
        let cfg = self.cfg;
        let report = evaluate(
            &self.agent.policy(),
            &mut self.eval_env,
            cfg.eval_episodes,
            cfg.eval_stochastic,
            cfg.seed ^ self.progress.step,
        )?;
        let p = &mut self.progress;
        let train_reward = (!p.pending.is_empty()).then(|| mean_std(&p.pending).0);
        let loss = (p.loss_count > 0).then(|| p.loss_sum / p.loss_count as f64);
        let u = p.last_update;
        let row = MetricsRow {
            step: p.step,
            episodes: p.episodes,
            train_reward,
            eval_mean: report.mean,
            eval_std: report.std,
            loss,
            policy_loss: u.map(|u| u[0]),
            value_loss: u.map(|u| u[1]),
            entropy: u.map(|u| u[2]),
            approx_kl: u.map(|u| u[3]),
            clip_fraction: u.map(|u| u[4]),
        };
        writeln!(p.metrics, "{}", row.to_csv()).expect("string write");
        p.pending.clear();
        p.loss_sum = 0.0;
        p.loss_count = 0;
        self.write_metrics()?;
        let secs = self.started.elapsed().as_secs_f64();
        let mut timing = fs::OpenOptions::new().append(true).open(self.out.join(TIMING_FILE))?;
        use std::io::Write as _;
        writeln!(timing, "{},{secs:.3}", row.step)?;
        if self.log {
            eprintln!(
                "step {:>8}  eval {:>9.2} ± {:<8.2} train {:>9}  episodes {}  ({secs:.0}s)",
                row.step,
                report.mean,
                report.std,
                train_reward.map(|r| format!("{r:.2}")).unwrap_or_else(|| "-".into()),
                row.episodes
            );
        }
        self.last_eval = Some(report);
        Ok(())
    }

    fn after_advance(&mut self) -> Result<()> {
        let cfg = self.cfg;
        let step = self.progress.step;
        if step >= self.progress.next_eval {
            self.eval_row()?;
            self.progress.next_eval = next_multiple(step, cfg.eval_period);
        }
        if cfg.checkpoint_period > 0 && step >= self.progress.next_ckpt {
            self.progress.next_ckpt = next_multiple(step, cfg.checkpoint_period);
            self.checkpoint().save(&self.out.join(periodic_checkpoint_name(step)))?;
        }
        Ok(())
    }

    fn advance(&mut self) -> Result<()> {
        match &mut self.agent {
            Agent::Dqn(t) => {
                let o = t.step()?;
                let p = &mut self.progress;
                p.step += 1;
                if let Some(l) = o.loss {
                    p.loss_sum += l;
                    p.loss_count += 1;
                }
                if let Some((ret, _)) = o.episode {
                    p.episodes += 1;
                    p.pending.push(ret);
                }
            }
            Agent::Ppo(t) => {
                let rep = t.iterate()?;
                let p = &mut self.progress;
                p.step += rep.steps as u64;
                for (ret, _) in rep.episodes {
                    p.episodes += 1;
                    p.pending.push(ret);
                }
                let m = rep.metrics;
                p.last_update = Some([m.policy_loss, m.value_loss, m.entropy, m.approx_kl, m.clip_fraction]);
                let stats = [m.policy_loss, m.value_loss, m.entropy];
                if stats.iter().any(|v| !v.is_finite()) {
                    return Err(HarnessError::Runtime(format!(
                        "non-finite update statistics at step {}",
                        p.step
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Trains per `cfg`, writing into `out`. With `resume`, the run continues
/// from that checkpoint (its config echo must parse; `cfg` replaces it, so
/// callers pass the echo possibly with a longer budget).
pub fn run_training(cfg: &RunConfig, out: &Path, resume: Option<&Checkpoint>, log: bool) -> Result<TrainSummary> {
    cfg.validate()?;
    fs::create_dir_all(out)?;
    let map = load_map(&cfg.map)?;
    let model = load_depth_model(cfg)?;
    let mut agent = Agent::build(cfg, &map, &model)?;
    if map.anchor().is_none() {
        return Err(HarnessError::Config(format!("map {} has no evaluation anchor", cfg.map)));
    }
    let progress = match resume {
        Some(ck) => {
            agent.load_state_bytes(&ck.trainer)?;
            let p = Progress::from_bytes(&ck.progress)?;
            if p.step != ck.step {
                return Err(HarnessError::Runtime("checkpoint step disagrees with its progress record".into()));
            }
            p
        }
        None => Progress {
            next_eval: cfg.eval_period,
            next_ckpt: cfg.checkpoint_period,
            metrics: format!("{HEADER}\n"),
            ..Default::default()
        },
    };
    fs::write(out.join(CONFIG_ECHO), cfg.to_text())?;
    fs::write(out.join(TIMING_FILE), "step,wall_seconds\n")?;
    let mut run = Run {
        cfg,
        out,
        agent,
        progress,
        eval_env: make_env(cfg, &map, &model, cfg.seed)?,
        started: Instant::now(),
        log,
        last_eval: None,
    };
    run.write_metrics()?;

    while run.progress.step < cfg.total_steps {
        run.advance()?;
        run.after_advance()?;
    }
    let last_row_step = run
        .progress
        .metrics
        .lines()
        .last()
        .and_then(|l| l.split(',').next())
        .and_then(|s| s.parse::<u64>().ok());
    if run.progress.step > 0 && last_row_step != Some(run.progress.step) {
        run.eval_row()?;
    }
    run.checkpoint().save(&out.join(FINAL_CHECKPOINT))?;
    let rows = crate::metrics::parse_metrics(&run.progress.metrics)?;
    Ok(TrainSummary {
        steps: run.progress.step,
        rows,
        final_eval: run.last_eval,
        out_dir: out.to_path_buf(),
    })
}

/// Rebuilds the learner stored in a checkpoint.
pub fn restore_agent(ck: &Checkpoint) -> Result<(RunConfig, Agent, std::sync::Arc<simworld::GridMap>)> {
    let cfg = RunConfig::parse(&ck.config)?;
    let map = load_map(&cfg.map)?;
    let model = load_depth_model(&cfg)?;
    let mut agent = Agent::build(&cfg, &map, &model)?;
    agent.load_state_bytes(&ck.trainer)?;
    Ok((cfg, agent, map))
}
