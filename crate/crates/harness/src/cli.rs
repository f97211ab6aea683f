//! Command-line entry point.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use depthgen::{collect_pairs, evaluate_depth, train_depth, DepthModel, PairDataset};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use simworld::CameraConfig;

use crate::agent::{load_depth_model, load_map, make_env, Policy};
use crate::aggregate::{aggregate, to_csv};
use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::error::{HarnessError, Result};
use crate::eval::evaluate;
use crate::metrics::{parse_metrics, sig6};
use crate::render::render_episode;
use crate::train::{restore_agent, run_training};

#[derive(Debug, Parser)]
#[command(name = "mazenav", version, about = "Vision-based obstacle avoidance: training, evaluation and tooling")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct ConfigArgs {
    /// Run configuration file (`key = value` lines).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Extra `key=value` overrides, applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        self.apply(&mut cfg)?;
        Ok(cfg)
    }

    fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        let mut overrides = self.set.clone();
        if let Some(s) = self.seed {
            overrides.push(format!("seed={s}"));
        }
        cfg.apply_overrides(&overrides)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train an agent; writes metrics.csv, timing.csv and checkpoints.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value = "runs/train")]
        out: PathBuf,
        /// Continue from a checkpoint; its config echo is the base config.
        #[arg(long)]
        resume: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
    /// Evaluate a checkpoint (or a uniform-random policy) from the anchor.
    Eval {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, conflicts_with = "random")]
        checkpoint: Option<PathBuf>,
        /// Evaluate a uniform-random policy under the given config.
        #[arg(long)]
        random: bool,
        #[arg(long)]
        episodes: Option<usize>,
        /// Sample actions instead of acting greedily.
        #[arg(long)]
        stochastic: bool,
        /// Directory for eval.csv with per-episode rewards.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dump frames and a trajectory for one anchor-spawned episode.
    Render {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Policy to follow; a uniform-random policy is used without one.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 2000)]
        steps: usize,
        /// Also write depth frames.
        #[arg(long)]
        depth: bool,
        #[arg(long, default_value = "runs/render")]
        out: PathBuf,
    },
    /// Render a paired gray/depth dataset.
    DepthCollect {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value = "runs/depth_data")]
        out: PathBuf,
    },
    /// Train a depth model on a collected dataset.
    DepthTrain {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "runs/depth_model")]
        out: PathBuf,
    },
    /// Mean L1 of a depth model on a dataset's holdout split (or all pairs).
    DepthEval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Score every pair instead of the holdout split.
        #[arg(long)]
        all: bool,
        /// Directory for depth_eval.csv with per-pair values.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mean and 95% interval of eval rewards across seeds.
    Aggregate {
        #[arg(required = true)]
        metrics: Vec<PathBuf>,
        /// Output CSV path; printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn write_out(dir: &Path, name: &str, text: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), text)?;
    Ok(())
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Train {
            cfg,
            out,
            resume,
            quiet,
        } => {
            let (config, ck) = match resume {
                Some(path) => {
                    let ck = Checkpoint::load(&path)?;
                    let mut c = RunConfig::parse(&ck.config)?;
                    if cfg.config.is_some() {
                        return Err(HarnessError::Config("--resume takes its config from the checkpoint".into()));
                    }
                    cfg.apply(&mut c)?;
                    (c, Some(ck))
                }
                None => (cfg.resolve()?, None),
            };
            let summary = run_training(&config, &out, ck.as_ref(), !quiet)?;
            match summary.final_eval {
                Some(e) => println!("steps {} eval mean {} std {}", summary.steps, sig6(e.mean), sig6(e.std)),
                None => println!("steps {}", summary.steps),
            }
        }
        Command::Eval {
            cfg,
            checkpoint,
            random,
            episodes,
            stochastic,
            out,
        } => {
            let restored;
            let (config, map, policy) = match checkpoint {
                Some(path) => {
                    if cfg.config.is_some() {
                        return Err(HarnessError::Config("--checkpoint carries its own config".into()));
                    }
                    let (mut c, agent, map) = restore_agent(&Checkpoint::load(&path)?)?;
                    cfg.apply(&mut c)?;
                    restored = agent;
                    (c, map, restored.policy())
                }
                None if random => {
                    let c = cfg.resolve()?;
                    let map = load_map(&c.map)?;
                    let p = Policy::Random(c.action_space());
                    (c, map, p)
                }
                None => return Err(HarnessError::Config("eval needs --checkpoint or --random".into())),
            };
            let model = load_depth_model(&config)?;
            let mut env = make_env(&config, &map, &model, config.seed)?;
            let n = episodes.unwrap_or(config.eval_episodes);
            if n == 0 {
                return Err(HarnessError::Config("--episodes must be at least 1".into()));
            }
            let report = evaluate(&policy, &mut env, n, stochastic || config.eval_stochastic, config.seed)?;
            let mut csv = String::from("episode,reward,length\n");
            for (i, (r, l)) in report.rewards.iter().zip(&report.lengths).enumerate() {
                writeln!(csv, "{i},{},{l}", sig6(*r)).expect("string write");
            }
            if let Some(dir) = out {
                write_out(&dir, "eval.csv", &csv)?;
            }
            print!("{csv}");
            println!("mean {} std {}", sig6(report.mean), sig6(report.std));
        }
        Command::Render {
            cfg,
            checkpoint,
            steps,
            depth,
            out,
        } => {
            let summary = match checkpoint {
                Some(path) => {
                    let (mut c, agent, map) = restore_agent(&Checkpoint::load(&path)?)?;
                    cfg.apply(&mut c)?;
                    render_episode(&c, &map, &agent.policy(), steps, depth, &out)?
                }
                None => {
                    let c = cfg.resolve()?;
                    let map = load_map(&c.map)?;
                    render_episode(&c, &map, &Policy::Random(c.action_space()), steps, depth, &out)?
                }
            };
            println!("frames {} reward {}", summary.frames, sig6(summary.total_reward));
        }
        Command::DepthCollect { cfg, out } => {
            let c = cfg.resolve()?;
            let map = load_map(&c.map)?;
            let camera = CameraConfig {
                supersample: c.supersample,
                ..CameraConfig::with_size(c.obs_size)
            };
            let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
            let ds = collect_pairs(&map, c.depth.pairs, &mut rng, c.depth.policy, &camera)?;
            ds.save(&out)?;
            println!("pairs {} holdout {}", ds.len(), ds.holdout().len());
        }
        Command::DepthTrain { cfg, data, out } => {
            let c = cfg.resolve()?;
            let ds = PairDataset::load(&data)?;
            let run = train_depth(&ds, &c.gan_config())?;
            fs::create_dir_all(&out)?;
            run.model.save(&out.join("model.bin"))?;
            let mut csv = String::from("epoch,l1,gen_adv,disc\n");
            for l in &run.losses {
                writeln!(csv, "{},{},{},{}", l.epoch, sig6(l.l1), sig6(l.gen_adv), sig6(l.disc)).expect("string write");
            }
            fs::write(out.join("losses.csv"), csv)?;
            if let Some(e) = run.diverged {
                return Err(HarnessError::Runtime(format!("{e}; last finite model saved")));
            }
            if !ds.holdout().is_empty() {
                let e = evaluate_depth(&run.model, ds.holdout())?;
                println!("holdout mean L1 {}", sig6(e.mean_l1));
            }
        }
        Command::DepthEval { model, data, all, out } => {
            let m = DepthModel::load(&model)?;
            let ds = PairDataset::load(&data)?;
            let pairs = if all { &ds.pairs[..] } else { ds.holdout() };
            let e = evaluate_depth(&m, pairs)?;
            if let Some(dir) = out {
                let mut csv = String::from("pair,l1\n");
                for (i, v) in e.per_pair.iter().enumerate() {
                    writeln!(csv, "{i},{}", sig6(*v)).expect("string write");
                }
                write_out(&dir, "depth_eval.csv", &csv)?;
            }
            println!("pairs {} mean L1 {}", pairs.len(), sig6(e.mean_l1));
        }
        Command::Aggregate { metrics, out } => {
            let runs = metrics
                .iter()
                .map(|p| {
                    let text = fs::read_to_string(p).map_err(|e| HarnessError::Runtime(format!("{}: {e}", p.display())))?;
                    parse_metrics(&text)
                })
                .collect::<Result<Vec<_>>>()?;
            let csv = to_csv(&aggregate(&runs)?);
            match out {
                Some(p) => fs::write(p, csv)?,
                None => print!("{csv}"),
            }
        }
    }
    Ok(())
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
