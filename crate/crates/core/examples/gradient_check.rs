//! Backprop against central finite differences, per parameter group, for
//! the miniature actor and critic.

use sliceparse::neural::gradcheck::check_config;
use sliceparse::neural::NetConfig;

pub fn run_example() -> sliceparse::Result<()> {
    let checks = check_config(&NetConfig::miniature(), 4, 1e-4)?;
    println!("{:<7} {:<14} {:>12} {:>12}", "net", "group", "|grad|", "rel err");
    let mut worst: f64 = 0.0;
    for (role, g) in &checks {
        println!("{:<7} {:<14} {:>12.4e} {:>12.3e}", format!("{role:?}"), g.name, g.analytic_norm, g.rel_error);
        worst = worst.max(g.rel_error);
    }
    println!("worst relative error {worst:.3e}");
    Ok(())
}

#[allow(dead_code)]
fn main() -> sliceparse::Result<()> {
    run_example()
}
