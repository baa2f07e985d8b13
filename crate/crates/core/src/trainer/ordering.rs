//! The scaled ordering experiment: DDPG from scratch, pre-training only,
//! and pre-training plus DDPG, trained per seed on the ten-shape set and
//! compared by mean final surface IoU of greedy episodes.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use super::{evaluate, run_training, Mode, RunConfig, TrainerConfig};
use crate::env::{run_episode, EnvConfig};
use crate::error::Result;
use crate::expert::{generate_demonstrations, ExpertPolicy};
use crate::neural::NetConfig;
use crate::shapes;

#[derive(Clone, Debug, PartialEq)]
pub struct OrderingConfig {
    pub resolution: usize,
    pub seeds: Vec<u64>,
    /// Seeds are written into `net.seed` and `trainer.seed` per run.
    pub run: RunConfig,
}

impl OrderingConfig {
    /// 32³ shapes, 12 slices, 20k environment steps, 5 seeds, with a
    /// reduced network so one seed fits in minutes on a single core.
    pub fn standard() -> Self {
        OrderingConfig {
            resolution: 32,
            seeds: (0..5).collect(),
            run: RunConfig {
                env: EnvConfig {
                    slice_count: 12,
                    ..EnvConfig::default()
                },
                net: NetConfig {
                    channels: vec![4, 8],
                    mlp: vec![64, 32],
                    max_corners: 16,
                    ..NetConfig::default()
                },
                trainer: TrainerConfig {
                    train_steps: 20_000,
                    ..TrainerConfig::default()
                },
            },
        }
    }

    /// Scales the environment-step budget and keeps pre-training, batch
    /// size and target period in proportion (floors 100 / 16 / 10).
    pub fn with_budget(mut self, steps: usize) -> Self {
        let t = &mut self.run.trainer;
        let frac = steps as f64 / t.train_steps.max(1) as f64;
        if frac < 1.0 {
            t.pretrain_iters = ((t.pretrain_iters as f64 * frac) as usize).max(100);
            t.batch_size = ((t.batch_size as f64 * frac.sqrt()) as usize).clamp(16, t.batch_size);
            t.target_period = ((t.target_period as f64 * frac.sqrt()) as usize).max(10);
            t.log_every = t.log_every.min(t.pretrain_iters);
        }
        t.train_steps = steps;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeedResult {
    pub seed: u64,
    pub ddpg: f64,
    pub il: f64,
    pub il_rl: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrderingReport {
    pub per_seed: Vec<SeedResult>,
    pub mean_ddpg: f64,
    pub mean_il: f64,
    pub mean_il_rl: f64,
    /// The heuristic expert on the same shapes, for reference.
    pub expert: f64,
    pub train_steps: usize,
}

impl OrderingReport {
    /// IL+RL ≥ IL ≥ DDPG on the seed mean, with IL+RL − DDPG ≥ `margin`.
    pub fn ordering_holds(&self, margin: f64) -> bool {
        self.mean_il_rl >= self.mean_il && self.mean_il >= self.mean_ddpg && self.mean_il_rl - self.mean_ddpg >= margin
    }

    pub fn table(&self) -> String {
        let mut s = String::from("seed   ddpg    il      il+rl\n");
        for r in &self.per_seed {
            let _ = writeln!(s, "{:<6} {:.4}  {:.4}  {:.4}", r.seed, r.ddpg, r.il, r.il_rl);
        }
        let _ = writeln!(
            s,
            "mean   {:.4}  {:.4}  {:.4}   (expert {:.4}, {} env steps)",
            self.mean_ddpg, self.mean_il, self.mean_il_rl, self.expert, self.train_steps
        );
        s
    }
}

fn mean_iou(rows: &[(String, f64, Option<f64>)]) -> f64 {
    rows.iter().map(|r| r.1).sum::<f64>() / rows.len() as f64
}

pub fn run_ordering(cfg: &OrderingConfig) -> Result<OrderingReport> {
    let set = shapes::ordering_set(cfg.resolution);
    let env = &cfg.run.env;
    let demos = generate_demonstrations(&set, env, 1)?;
    let expert = set
        .iter()
        .map(|(_, g)| Ok(run_episode(g, env, &mut ExpertPolicy, None)?.metrics.surface_iou))
        .collect::<Result<Vec<f64>>>()?
        .iter()
        .sum::<f64>()
        / set.len() as f64;
    let per_seed = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let run = cfg.run.clone().with_seed(seed);
            let score = |mode: Mode| -> Result<f64> {
                let demos = (mode != Mode::Ddpg).then_some(&demos[..]);
                let t = run_training(mode, &set, demos, &run)?;
                Ok(mean_iou(&evaluate(&t.agent.actor, &set, env, run.trainer.zero_projections)?))
            };
            let r = SeedResult {
                seed,
                ddpg: score(Mode::Ddpg)?,
                il: score(Mode::Il)?,
                il_rl: score(Mode::IlRl)?,
            };
            log::info!("seed {seed}: ddpg {:.4} il {:.4} il+rl {:.4}", r.ddpg, r.il, r.il_rl);
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    let n = per_seed.len().max(1) as f64;
    Ok(OrderingReport {
        mean_ddpg: per_seed.iter().map(|r| r.ddpg).sum::<f64>() / n,
        mean_il: per_seed.iter().map(|r| r.il).sum::<f64>() / n,
        mean_il_rl: per_seed.iter().map(|r| r.il_rl).sum::<f64>() / n,
        per_seed,
        expert,
        train_steps: cfg.run.trainer.train_steps,
    })
}
