//! Project a continuous surface onto discrete phase codebooks and
//! compare the penalty search with exhaustive enumeration.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ris_share::beamform::solve_p3;
use ris_share::driver::AoConfig;
use ris_share::npsp::{exhaustive_quantize, npsp_solve, NpspOutcome, PhaseCodebook};
use ris_share::scenario::{assemble_problem, generate_channels, ReflectVector, Scenario};

fn describe(tag: &str, outcome: &NpspOutcome) {
    match outcome {
        NpspOutcome::Found {
            f_obj, iterations, ..
        } => println!("{tag}: found, squared distance {f_obj:.6} ({iterations} iterations)"),
        NpspOutcome::NotFound { iterations } => {
            println!("{tag}: no feasible assignment ({iterations} iterations)")
        }
    }
}

fn main() {
    let scenario = Scenario::default()
        .with_n_elements(3)
        .unwrap()
        // Loosen the caps so the tiny surface has feasible assignments.
        .with_gamma_bar_dbm(-95.0)
        .unwrap();
    let cfg = AoConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let ch = generate_channels(&scenario, &mut rng).unwrap();
    let pd = assemble_problem(&scenario, &ch).unwrap();
    let caps = scenario.gamma_bar_w();

    let theta = ReflectVector::random_phases(scenario.n_elements, 0.9, &mut rng).unwrap();
    let beam = solve_p3(&pd, &theta, scenario.p_max_w(), &caps).unwrap();

    for bits in [1u32, 2, 3] {
        let cb = PhaseCodebook::from_bits(bits).unwrap();
        let pen = npsp_solve(&theta, &pd, &beam.v, &cb, &caps, &cfg.npsp).unwrap();
        let exact = exhaustive_quantize(&theta, &pd, &beam.v, &cb, &caps).unwrap();
        println!("--- {bits}-bit codebook ({} levels)", cb.len());
        describe("penalty search", &pen);
        describe("exhaustive     ", &exact);
        if let (NpspOutcome::Found { f_obj: fp, .. }, NpspOutcome::Found { f_obj: fe, .. }) =
            (&pen, &exact)
        {
            assert!(fe <= &(fp + 1e-12), "oracle can never lose");
        }
    }
    println!("\ndenser codebooks land closer to the continuous surface.");
}
