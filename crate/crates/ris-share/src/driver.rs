//! Batch-simulation driver: alternating optimization of the beam and the
//! surface, baseline comparators, and Monte-Carlo sweeps with CSV output.
//!
//! One trial draws a channel set, alternates transmit beamforming with
//! surface descent until the SIR stops improving, then derives three
//! comparators from the same channels: a quantized surface (penalty
//! projection), the surface switched off, and random codebook phases.
//! Sweeps repeat trials over a parameter grid with per-trial seeds that
//! are identical across grid points, so curves are paired sample by
//! sample.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;

use crate::beamform::solve_p3;
use crate::error::{Error, Result};
use crate::gld::{gld_solve, make_interior, GldConfig};
use crate::metrics::{link_report, rate_bpshz, su_sir, BeamVector};
use crate::npsp::{npsp_solve, NpspConfig, NpspOutcome, PhaseCodebook};
use crate::scenario::{assemble_problem, generate_channels, ProblemData, ReflectVector, Scenario};

/// Knobs for the alternating loop.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AoConfig {
    /// Cap on beamforming/descent rounds.
    pub max_rounds: usize,
    /// Stop once the per-round relative SIR improvement falls below this.
    pub rel_tol: f64,
    pub gld: GldConfig,
    pub npsp: NpspConfig,
}

impl Default for AoConfig {
    fn default() -> Self {
        AoConfig {
            max_rounds: 20,
            rel_tol: 1e-4,
            gld: GldConfig::default(),
            npsp: NpspConfig::default(),
        }
    }
}

impl AoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_rounds == 0 {
            return Err(Error::Config("max_rounds must be at least 1".into()));
        }
        if !(self.rel_tol > 0.0) || !self.rel_tol.is_finite() {
            return Err(Error::Config(format!(
                "rel_tol must be finite and > 0, got {}",
                self.rel_tol
            )));
        }
        self.gld.validate()?;
        self.npsp.validate()
    }
}

/// Everything a config file can set: scenario fields at the top level plus
/// the alternating-loop fields.
#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub ao: AoConfig,
}

impl RunConfig {
    /// Parses the flat JSON schema: scenario keys and loop keys share one
    /// object, unknown keys are rejected.
    pub fn from_json(text: &str) -> Result<Self> {
        let mut value: serde_json::Map<String, serde_json::Value> = serde_json::from_str(text)?;
        let mut ao_map = serde_json::Map::new();
        for key in ["max_rounds", "rel_tol", "gld", "npsp"] {
            if let Some(v) = value.remove(key) {
                ao_map.insert(key.to_string(), v);
            }
        }
        let ao: AoConfig = serde_json::from_value(serde_json::Value::Object(ao_map))?;
        let scenario: Scenario = serde_json::from_value(serde_json::Value::Object(value))?;
        scenario.validate()?;
        ao.validate()?;
        Ok(RunConfig { scenario, ao })
    }
}

/// Result of the alternating loop on one channel draw.
#[derive(Debug, Clone)]
pub struct AoSolution {
    pub theta: ReflectVector,
    pub v: BeamVector,
    /// Entry 0 is the SIR of the random start under the first beam; one
    /// entry per round follows. Non-decreasing by construction.
    pub sir_trace: Vec<f64>,
    pub rounds: usize,
    /// The first beamforming solve saw a zero effective channel; the
    /// returned pair is the untouched baseline.
    pub degenerate: bool,
}

/// Alternates transmit beamforming and surface descent from a random
/// unit-modulus start.
///
/// Each round keeps whichever surface (previous or newly descended) gives
/// the higher ratio under the fresh beam, so the trace never decreases
/// even when the interior-point preparation has to back away from the
/// constraint boundary first.
pub fn ao_solve(
    pd: &ProblemData,
    scenario: &Scenario,
    cfg: &AoConfig,
    rng: &mut impl Rng,
) -> Result<AoSolution> {
    cfg.validate()?;
    let caps = scenario.gamma_bar_w();
    let p_max_w = scenario.p_max_w();
    let mut theta = ReflectVector::random_phases(pd.n_elements(), 1.0, rng)?;
    let mut v = BeamVector::zeros(pd.m_antennas());
    let mut trace = Vec::with_capacity(cfg.max_rounds + 1);
    let mut rounds = 0;

    for r in 1..=cfg.max_rounds {
        rounds = r;
        let bf = solve_p3(pd, &theta, p_max_w, &caps)?;
        if bf.degenerate {
            if r == 1 {
                return Ok(AoSolution {
                    theta,
                    v: bf.v,
                    sir_trace: vec![0.0],
                    rounds: 1,
                    degenerate: true,
                });
            }
            break;
        }
        v = bf.v;
        let held = su_sir(pd, &theta, &v).value;
        if r == 1 {
            trace.push(held);
        }

        // A surface with no strictly interior neighborhood cannot descend;
        // keep the current pair.
        let interior = match make_interior(pd, &v, &theta, &caps, &cfg.gld) {
            Ok(t) => t,
            Err(Error::Domain(_)) => {
                trace.push(held);
                break;
            }
            Err(e) => return Err(e),
        };
        let state = gld_solve(pd, &v, &interior, &caps, &cfg.gld)?;
        let descended = su_sir(pd, &state.theta, &v).value;
        if descended >= held {
            theta = state.theta;
        }
        let now = descended.max(held);
        trace.push(now);

        let prev = trace[trace.len() - 2];
        if !now.is_finite() || now - prev <= cfg.rel_tol * prev.max(f64::MIN_POSITIVE) {
            break;
        }
    }

    Ok(AoSolution {
        theta,
        v,
        sir_trace: trace,
        rounds,
        degenerate: false,
    })
}

/// Rates and flags from one channel draw.
#[derive(Debug, Clone)]
pub struct TrialResult {
    pub rate_continuous: f64,
    /// Absent when no feasible quantized surface was encountered.
    pub rate_discrete: Option<f64>,
    pub rate_no_ris: f64,
    pub rate_random_phase: f64,
    pub sir_trace: Vec<f64>,
    /// The reported continuous pair satisfies the power budget and every
    /// interference cap.
    pub feasible: bool,
    pub degenerate: bool,
}

/// Random codebook phases, amplitude halved until the caps accept the
/// surface under the given beam. Falls back to a fresh beamforming solve
/// when even a nearly-off surface leaks too much under that beam.
fn random_phase_rate(
    pd: &ProblemData,
    v_star: &BeamVector,
    codebook: &PhaseCodebook,
    caps: &[f64],
    p_max_w: f64,
    rng: &mut impl Rng,
) -> Result<f64> {
    let n = pd.n_elements();
    let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..codebook.len())).collect();
    let phased: Vec<_> = idx.iter().map(|&i| codebook.phasor(i)).collect();

    let mut amp = 1.0;
    for _ in 0..80 {
        let elems: Vec<_> = phased.iter().map(|p| p * amp).collect();
        let theta = ReflectVector::from_elements(&elems)?;
        let report = link_report(pd, &theta, v_star, caps)?;
        if report.all_feasible() {
            return Ok(rate_bpshz(su_sir(pd, &theta, v_star).value));
        }
        amp *= 0.5;
    }
    let theta = ReflectVector::from_elements(&phased)?;
    let bf = solve_p3(pd, &theta, p_max_w, caps)?;
    Ok(rate_bpshz(su_sir(pd, &theta, &bf.v).value))
}

/// Runs one full trial: channel draw, alternating optimization, then the
/// quantized, surface-off, and random-phase comparators on the same draw.
pub fn run_trial(
    scenario: &Scenario,
    cfg: &AoConfig,
    seed: u64,
    discrete_bits: u32,
) -> Result<TrialResult> {
    scenario.validate()?;
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let channels = generate_channels(scenario, &mut rng)?;
    let pd = assemble_problem(scenario, &channels)?;
    let caps = scenario.gamma_bar_w();
    let p_max_w = scenario.p_max_w();

    let ao = ao_solve(&pd, scenario, cfg, &mut rng)?;
    let rate_continuous = rate_bpshz(su_sir(&pd, &ao.theta, &ao.v).value);
    let report = link_report(&pd, &ao.theta, &ao.v, &caps)?;
    let feasible =
        report.all_feasible() && ao.v.power() <= p_max_w * (1.0 + crate::metrics::FEAS_REL_TOL);

    let codebook = PhaseCodebook::from_bits(discrete_bits)?;
    let rate_discrete = if ao.degenerate {
        None
    } else {
        match npsp_solve(&ao.theta, &pd, &ao.v, &codebook, &caps, &cfg.npsp)? {
            NpspOutcome::Found { theta_o, .. } => {
                Some(rate_bpshz(su_sir(&pd, &theta_o, &ao.v).value))
            }
            NpspOutcome::NotFound { .. } => None,
        }
    };

    let off = ReflectVector::off(pd.n_elements());
    let bf_off = solve_p3(&pd, &off, p_max_w, &caps)?;
    let rate_no_ris = rate_bpshz(su_sir(&pd, &off, &bf_off.v).value);

    let rate_random_phase =
        random_phase_rate(&pd, &ao.v, &codebook, &caps, p_max_w, &mut rng)?;

    Ok(TrialResult {
        rate_continuous,
        rate_discrete,
        rate_no_ris,
        rate_random_phase,
        sir_trace: ao.sir_trace,
        feasible,
        degenerate: ao.degenerate,
    })
}

/// Which scenario knob a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    /// Transmit power budget, dBm.
    PMax,
    /// Number of primary networks.
    Pns,
    /// Interference threshold, dBm.
    Gamma,
    /// Surface element count.
    NElements,
}

impl SweepKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "pmax" => Ok(SweepKind::PMax),
            "pns" => Ok(SweepKind::Pns),
            "gamma" => Ok(SweepKind::Gamma),
            "n" => Ok(SweepKind::NElements),
            other => Err(Error::Config(format!(
                "unknown sweep '{other}'; expected pmax, pns, gamma or n"
            ))),
        }
    }

    pub fn param_name(self) -> &'static str {
        match self {
            SweepKind::PMax => "p_max_dbm",
            SweepKind::Pns => "j_pns",
            SweepKind::Gamma => "gamma_bar_dbm",
            SweepKind::NElements => "n_elements",
        }
    }

    /// The grid each sweep walks: the power budget in 2 dB steps, one to
    /// four primary networks, a 20 dB threshold window, and element counts
    /// spanning a single element to a full panel.
    pub fn grid(self) -> Vec<f64> {
        match self {
            SweepKind::PMax => (0..9).map(|i| -2.0 + 2.0 * i as f64).collect(),
            SweepKind::Pns => vec![1.0, 2.0, 3.0, 4.0],
            SweepKind::Gamma => (0..5).map(|i| -125.0 + 5.0 * i as f64).collect(),
            SweepKind::NElements => vec![1.0, 4.0, 8.0, 16.0, 32.0],
        }
    }

    pub fn apply(self, scenario: &Scenario, value: f64) -> Result<Scenario> {
        match self {
            SweepKind::PMax => scenario.with_p_max_dbm(value),
            SweepKind::Pns => scenario.with_j_pns(value as usize),
            SweepKind::Gamma => scenario.with_gamma_bar_dbm(value),
            SweepKind::NElements => scenario.with_n_elements(value as usize),
        }
    }
}

/// Aggregated statistics for one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub sweep_param: String,
    pub value: f64,
    pub rate_continuous_mean: f64,
    pub rate_continuous_se: f64,
    /// Over trials where a quantized surface was found; NaN when none was.
    pub rate_discrete_mean: f64,
    pub rate_discrete_se: f64,
    pub rate_no_ris_mean: f64,
    pub rate_random_mean: f64,
    pub discrete_found_fraction: f64,
    pub trials: usize,
    pub seed: u64,
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn standard_error(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64;
    (var / xs.len() as f64).sqrt()
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// The per-trial seed depends only on the base seed and the trial index,
/// never on the sweep point, so grid points share channel draws.
pub fn trial_seed(base: u64, trial: usize) -> u64 {
    splitmix64(base.wrapping_add(splitmix64(trial as u64)))
}

/// Runs `trials` paired trials at every grid point of the sweep. Trials
/// run in parallel; aggregation is by trial index, so output is
/// deterministic for a fixed config and seed.
pub fn run_sweep(
    scenario: &Scenario,
    kind: SweepKind,
    trials: usize,
    cfg: &AoConfig,
    discrete_bits: u32,
    seed: u64,
    verbose: bool,
) -> Result<Vec<SweepRow>> {
    if trials == 0 {
        return Err(Error::Config("need at least one trial".into()));
    }
    scenario.validate()?;
    cfg.validate()?;

    let mut rows = Vec::new();
    for value in kind.grid() {
        let point = kind.apply(scenario, value)?;
        let results: Vec<TrialResult> = (0..trials)
            .into_par_iter()
            .map(|t| run_trial(&point, cfg, trial_seed(seed, t), discrete_bits))
            .collect::<Result<_>>()?;

        let cont: Vec<f64> = results.iter().map(|r| r.rate_continuous).collect();
        let disc: Vec<f64> = results.iter().filter_map(|r| r.rate_discrete).collect();
        let no_ris: Vec<f64> = results.iter().map(|r| r.rate_no_ris).collect();
        let random: Vec<f64> = results.iter().map(|r| r.rate_random_phase).collect();
        let row = SweepRow {
            sweep_param: kind.param_name().to_string(),
            value,
            rate_continuous_mean: mean(&cont),
            rate_continuous_se: standard_error(&cont),
            rate_discrete_mean: mean(&disc),
            rate_discrete_se: standard_error(&disc),
            rate_no_ris_mean: mean(&no_ris),
            rate_random_mean: mean(&random),
            discrete_found_fraction: disc.len() as f64 / trials as f64,
            trials,
            seed,
        };
        if verbose {
            eprintln!(
                "{}={}: continuous {:.4} bits/s/Hz, discrete {:.4} ({}/{} found)",
                row.sweep_param,
                row.value,
                row.rate_continuous_mean,
                row.rate_discrete_mean,
                disc.len(),
                trials
            );
        }
        rows.push(row);
    }
    Ok(rows)
}

pub const CSV_HEADER: &str = "sweep_param,value,rate_continuous_mean,rate_continuous_se,\
rate_discrete_mean,rate_discrete_se,rate_no_ris_mean,rate_random_mean,\
discrete_found_fraction,trials,seed";

/// Serializes rows to CSV text. Floats print in shortest round-trip form,
/// so parsing the text recovers them exactly.
pub fn to_csv(rows: &[SweepRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::Domain("refusing to emit an empty sweep table".into()));
    }
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.sweep_param,
            r.value,
            r.rate_continuous_mean,
            r.rate_continuous_se,
            r.rate_discrete_mean,
            r.rate_discrete_se,
            r.rate_no_ris_mean,
            r.rate_random_mean,
            r.discrete_found_fraction,
            r.trials,
            r.seed
        ));
    }
    Ok(out)
}

/// Writes the CSV file, refusing to touch the filesystem for an empty
/// table.
pub fn emit_csv(rows: &[SweepRow], path: &std::path::Path) -> Result<()> {
    let text = to_csv(rows)?;
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Parses CSV text produced by `to_csv`.
pub fn parse_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        _ => return Err(Error::Malformed("missing or mismatched CSV header".into())),
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 11 {
            return Err(Error::Malformed(format!(
                "row {} has {} fields, expected 11",
                i + 1,
                fields.len()
            )));
        }
        let f = |k: usize| -> Result<f64> {
            fields[k]
                .parse()
                .map_err(|e| Error::Malformed(format!("row {} field {k}: {e}", i + 1)))
        };
        rows.push(SweepRow {
            sweep_param: fields[0].to_string(),
            value: f(1)?,
            rate_continuous_mean: f(2)?,
            rate_continuous_se: f(3)?,
            rate_discrete_mean: f(4)?,
            rate_discrete_se: f(5)?,
            rate_no_ris_mean: f(6)?,
            rate_random_mean: f(7)?,
            discrete_found_fraction: f(8)?,
            trials: fields[9]
                .parse()
                .map_err(|e| Error::Malformed(format!("row {}: {e}", i + 1)))?,
            seed: fields[10]
                .parse()
                .map_err(|e| Error::Malformed(format!("row {}: {e}", i + 1)))?,
        });
    }
    Ok(rows)
}
