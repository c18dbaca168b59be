//! A reduced power-budget sweep: run paired trials at every grid point
//! and print the aggregate table, CSV included.
//!
//! The full-size runs behind the shipped figures use 200 trials; this
//! keeps the example quick with 5.

use ris_share::driver::{run_sweep, to_csv, AoConfig, SweepKind};
use ris_share::scenario::Scenario;

fn main() {
    let scenario = Scenario::default().with_n_elements(8).unwrap();
    let cfg = AoConfig::default();
    let rows = run_sweep(&scenario, SweepKind::PMax, 5, &cfg, 2, 1, false).unwrap();

    println!("p_max_dbm  continuous  surface-off  random-phase");
    for r in &rows {
        println!(
            "{:>9}  {:>10.4}  {:>11.4}  {:>12.4}",
            r.value, r.rate_continuous_mean, r.rate_no_ris_mean, r.rate_random_mean
        );
    }
    println!("\nCSV:\n{}", to_csv(&rows).unwrap());
}
