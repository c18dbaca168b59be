//! One full trial: alternate beamforming and surface descent, then
//! evaluate the quantized, surface-off, and random-phase comparators.

use ris_share::driver::{run_trial, AoConfig};
use ris_share::scenario::Scenario;

fn main() {
    let scenario = Scenario::default();
    let cfg = AoConfig::default();
    let trial = run_trial(&scenario, &cfg, 42, 2).unwrap();

    println!("ratio per round:");
    for (r, s) in trial.sir_trace.iter().enumerate() {
        if r == 0 {
            println!("  start   {s:.4}");
        } else {
            println!("  round {r}  {s:.4}");
        }
    }
    println!("\nrates in bits/s/Hz:");
    println!("  continuous surface  {:.4}", trial.rate_continuous);
    match trial.rate_discrete {
        Some(d) => println!("  2-bit surface       {d:.4}"),
        None => println!("  2-bit surface       no feasible projection"),
    }
    println!("  surface off         {:.4}", trial.rate_no_ris);
    println!("  random phases       {:.4}", trial.rate_random_phase);
    println!("\nconstraints satisfied: {}", trial.feasible);
}
