//! Surface descent at a fixed beam: linearize the concave ratio
//! objective, step inside the feasible set, damp, repeat.
//!
//! Prints the per-iteration objective trace. The objective q is the
//! negative of the achieved ratio, so it decreases as the surface
//! improves.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ris_share::beamform::solve_p3;
use ris_share::driver::AoConfig;
use ris_share::gld::{gld_solve, make_interior};
use ris_share::metrics::su_sir;
use ris_share::scenario::{assemble_problem, generate_channels, ReflectVector, Scenario};

fn main() {
    let scenario = Scenario::default().with_n_elements(8).unwrap();
    let cfg = AoConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let ch = generate_channels(&scenario, &mut rng).unwrap();
    let pd = assemble_problem(&scenario, &ch).unwrap();
    let caps = scenario.gamma_bar_w();

    let start = ReflectVector::random_phases(scenario.n_elements, 1.0, &mut rng).unwrap();
    let beam = solve_p3(&pd, &start, scenario.p_max_w(), &caps).unwrap();
    println!("ratio at the start  {:.4}", su_sir(&pd, &start, &beam.v).value);

    let interior = make_interior(&pd, &beam.v, &start, &caps, &cfg.gld).unwrap();
    let state = gld_solve(&pd, &beam.v, &interior, &caps, &cfg.gld).unwrap();

    println!("descent ({:?} after {} iterations):", state.status, state.iteration);
    for it in state.trace.iter().take(8) {
        println!(
            "  k={:<3} q={:<14.6} t={:.3e} worst residual {:+.2e}",
            it.iteration, it.q, it.t, it.max_residual
        );
    }
    if state.trace.len() > 8 {
        println!("  ... {} more", state.trace.len() - 8);
    }
    println!("ratio at the end    {:.4}", state.sir());
    println!(
        "recomputed from the surface: {:.4}",
        su_sir(&pd, &state.theta, &beam.v).value
    );
}
