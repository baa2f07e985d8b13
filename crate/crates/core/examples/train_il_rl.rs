//! A small end-to-end run: expert demonstrations on three shapes,
//! pre-training, then DDPG with the cloning term, then greedy evaluation.
//! The checkpoint and report land in the temp directory.

use sliceparse::env::EnvConfig;
use sliceparse::expert::generate_demonstrations;
use sliceparse::neural::NetConfig;
use sliceparse::shapes;
use sliceparse::trainer::{evaluate, run_training, write_report_csv, Mode, RunConfig, TrainerConfig};

pub fn run_example() -> sliceparse::Result<()> {
    let set: Vec<_> = ["dumbbell", "l", "plus"]
        .iter()
        .map(|n| Ok((n.to_string(), shapes::named(n, 16)?)))
        .collect::<sliceparse::Result<_>>()?;
    let cfg = RunConfig {
        env: EnvConfig::default(),
        net: NetConfig {
            input_h: 16,
            input_w: 16,
            channels: vec![4, 4],
            mlp: vec![32, 16],
            max_corners: 8,
            seed: 0,
        },
        trainer: TrainerConfig {
            batch_size: 16,
            pretrain_iters: 300,
            train_steps: 200,
            target_period: 20,
            log_every: 100,
            ..TrainerConfig::default()
        },
    }
    .with_seed(1);
    let demos = generate_demonstrations(&set, &cfg.env, 1)?;
    let run = run_training(Mode::IlRl, &set, Some(&demos), &cfg)?;
    for (name, iou, cd) in evaluate(&run.agent.actor, &set, &cfg.env, false)? {
        println!("{name:<9} surface IoU {iou:.4}  chamfer {}", cd.map_or("-".into(), |c| format!("{c:.4}")));
    }
    let dir = std::env::temp_dir().join("sliceparse-example");
    std::fs::create_dir_all(&dir)?;
    run.agent.checkpoint().save(&dir.join("toy.ckpt"))?;
    write_report_csv(&run.report, std::fs::File::create(dir.join("toy_report.csv"))?)?;
    println!("{} report rows, checkpoint in {}", run.report.len(), dir.display());
    Ok(())
}

#[allow(dead_code)]
fn main() -> sliceparse::Result<()> {
    run_example()
}
