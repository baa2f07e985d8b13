//! DDPG vs pre-training only vs pre-training plus DDPG on the ten-shape
//! set. `SLICEPARSE_ORDERING_STEPS` sets the environment-step budget
//! (default 20000) and `SLICEPARSE_ORDERING_SEEDS` the number of seeds
//! (default 5). The full budget takes tens of minutes per seed on one core.

use sliceparse::trainer::ordering::{run_ordering, OrderingConfig};

fn env_usize(key: &str, default: usize) -> usize {
    std::env::var(key).ok().and_then(|v| v.parse().ok()).unwrap_or(default)
}

pub fn run_example() -> sliceparse::Result<()> {
    let steps = env_usize("SLICEPARSE_ORDERING_STEPS", 20_000);
    let mut cfg = OrderingConfig::standard().with_budget(steps);
    cfg.seeds = (0..env_usize("SLICEPARSE_ORDERING_SEEDS", 5) as u64).collect();
    let report = run_ordering(&cfg)?;
    print!("{}", report.table());
    println!(
        "IL+RL >= IL >= DDPG with margin 0.10: {}",
        if report.ordering_holds(0.10) { "holds" } else { "does not hold" }
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> sliceparse::Result<()> {
    run_example()
}
