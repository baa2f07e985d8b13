//! Runs every fast example end to end. The ordering experiment is covered
//! by the acceptance suite.

macro_rules! example {
    ($name:ident, $file:literal) => {
        #[path = $file]
        mod $name;
    };
}

example!(voxelize_and_metrics, "../examples/voxelize_and_metrics.rs");
example!(corner_detection, "../examples/corner_detection.rs");
example!(surface_from_slices, "../examples/surface_from_slices.rs");
example!(expert_episode, "../examples/expert_episode.rs");
example!(gradient_check, "../examples/gradient_check.rs");
example!(train_il_rl, "../examples/train_il_rl.rs");

#[test]
fn examples_run() {
    voxelize_and_metrics::run_example().unwrap();
    corner_detection::run_example().unwrap();
    surface_from_slices::run_example().unwrap();
    expert_episode::run_example().unwrap();
    gradient_check::run_example().unwrap();
    train_il_rl::run_example().unwrap();
}
