//! The heuristic expert parsing a dumbbell: top-scored segment, then the
//! whole episode step by step.

use sliceparse::env::{run_episode, EnvConfig, ParseState};
use sliceparse::expert::{candidate_segments, filter_separating, score_segments, ExpertPolicy};
use sliceparse::shapes;

pub fn run_example() -> sliceparse::Result<()> {
    let solid = shapes::named("dumbbell", 32)?;
    let cfg = EnvConfig::default();
    let s0 = ParseState::of_region(&solid, 0, &cfg)?;
    let all = candidate_segments(&s0);
    let ranked = score_segments(&filter_separating(&all, &s0), &s0);
    println!("{} candidate segments, {} separate the silhouette", all.len(), ranked.len());
    if let Some(top) = ranked.first() {
        println!(
            "top: view {} {:?} -> {:?}, components +{}, leak {:.1}",
            top.view.name(),
            top.p1,
            top.p2,
            top.component_count_delta,
            top.leak_area
        );
    }
    let ep = run_episode(&solid, &cfg, &mut ExpertPolicy, None)?;
    for t in &ep.trace {
        println!(
            "step {} view {} cut {:?}@{} reward {:+.3} remaining {}",
            t.step, t.view, t.cut_axis, t.cut_coord, t.reward, t.remaining_cells
        );
    }
    println!("{:?}", ep.metrics);
    Ok(())
}

#[allow(dead_code)]
fn main() -> sliceparse::Result<()> {
    run_example()
}
