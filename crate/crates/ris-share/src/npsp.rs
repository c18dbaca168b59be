//! Discrete-phase projection of a continuous surface configuration.
//!
//! Hardware surfaces only realize L phase levels. Given a continuous
//! solution θ̄, the task is the nearest codebook-phased vector (amplitudes
//! kept) that still respects the per-network interference caps. The method
//! splits the discrete variable from an auxiliary continuous copy, couples
//! them with multipliers and a quadratic penalty, and alternates: snap to
//! the codebook, re-center the continuous copy, update the multipliers.
//! Feasible snaps are tracked and the best one is returned; an exhaustive
//! oracle covers small element counts.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{BeamVector, FEAS_REL_TOL};
use crate::scenario::{ProblemData, ReflectVector};

/// Realizable phase levels of one surface element.
#[derive(Debug, Clone)]
pub struct PhaseCodebook {
    levels: Vec<f64>,
    phasors: Vec<Complex64>,
}

fn circular_distance(a: f64, b: f64) -> f64 {
    let diff = (a - b).rem_euclid(std::f64::consts::TAU);
    diff.min(std::f64::consts::TAU - diff)
}

impl PhaseCodebook {
    /// Builds a codebook from explicit levels (radians). Levels must be
    /// distinct on the circle and there must be at least two.
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        if levels.len() < 2 {
            return Err(Error::Config(format!(
                "a codebook needs at least 2 levels, got {}",
                levels.len()
            )));
        }
        for &l in &levels {
            if !l.is_finite() {
                return Err(Error::Config(format!("non-finite codebook level {l}")));
            }
        }
        for i in 0..levels.len() {
            for k in (i + 1)..levels.len() {
                if circular_distance(levels[i], levels[k]) < 1e-12 {
                    return Err(Error::Config(format!(
                        "codebook levels {i} and {k} coincide modulo 2π"
                    )));
                }
            }
        }
        let phasors = levels
            .iter()
            .map(|&l| {
                let mut p = Complex64::from_polar(1.0, l);
                // Axis-aligned levels otherwise carry ~1e-16 trigonometric
                // residue, which would break exact amplitude preservation
                // for the common 1-bit and 2-bit grids.
                if p.re.abs() < 1e-15 {
                    p.re = 0.0;
                }
                if p.im.abs() < 1e-15 {
                    p.im = 0.0;
                }
                p
            })
            .collect();
        Ok(PhaseCodebook { levels, phasors })
    }

    /// Uniform grid 2πℓ/L, ℓ = 0..L-1.
    pub fn uniform(l: usize) -> Result<Self> {
        Self::new(
            (0..l)
                .map(|i| std::f64::consts::TAU * i as f64 / l as f64)
                .collect(),
        )
    }

    /// Uniform grid with 2^bits levels.
    pub fn from_bits(bits: u32) -> Result<Self> {
        if bits == 0 || bits > 20 {
            return Err(Error::Config(format!(
                "phase resolution must be 1..=20 bits, got {bits}"
            )));
        }
        Self::uniform(1usize << bits)
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn phasor(&self, idx: usize) -> Complex64 {
        self.phasors[idx]
    }

    /// Index of the level closest to `angle` on the circle.
    pub fn nearest(&self, angle: f64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, &l) in self.levels.iter().enumerate() {
            let d = circular_distance(l, angle);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }
}

/// Which update rule the continuous copy uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BStepRule {
    /// Matrix update with the interference-weighted term folded in.
    #[default]
    ClosedForm,
    /// Diagonal update consistent with keeping the interference term on
    /// the discrete variable only.
    DiagonalLagrangian,
}

/// Knobs for the penalty iteration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NpspConfig {
    /// Penalty weight coupling the discrete and continuous copies.
    pub mu: f64,
    /// Iteration cap.
    pub n_itr: usize,
    /// Stop once the squared copy gap ||b - θ_d||² falls below this.
    pub varsigma: f64,
    pub b_rule: BStepRule,
}

impl Default for NpspConfig {
    fn default() -> Self {
        NpspConfig {
            mu: 1.0,
            n_itr: 200,
            varsigma: 1e-8,
            b_rule: BStepRule::ClosedForm,
        }
    }
}

impl NpspConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) || !self.mu.is_finite() {
            return Err(Error::Config(format!(
                "penalty weight must be finite and > 0, got {}",
                self.mu
            )));
        }
        if self.n_itr == 0 {
            return Err(Error::Config("iteration cap must be at least 1".into()));
        }
        if !(self.varsigma >= 0.0) {
            return Err(Error::Config(format!(
                "gap threshold must be >= 0, got {}",
                self.varsigma
            )));
        }
        Ok(())
    }
}

/// Working variables of the penalty iteration. All vectors hold the N
/// free elements; the pinned augmentation entry never quantizes.
#[derive(Debug, Clone)]
pub struct NpspState {
    pub theta_d: DVector<Complex64>,
    pub b: DVector<Complex64>,
    pub lambda: DVector<Complex64>,
    pub w: Vec<f64>,
    /// Best feasible squared distance to θ̄ seen so far.
    pub f_obj: f64,
    /// Best feasible snap seen so far.
    pub theta_o: Option<DVector<Complex64>>,
}

fn head(theta: &ReflectVector) -> DVector<Complex64> {
    let n = theta.n_elements();
    DVector::from_fn(n, |k, _| theta.theta_hat()[k])
}

fn leakage_rows(pd: &ProblemData, v: &BeamVector) -> Vec<DVector<Complex64>> {
    pd.h_hat_sj.iter().map(|h| h * &v.v).collect()
}

/// Interference each network receives from the discrete candidate, with
/// the augmentation entry restored.
fn interference_of(rows: &[DVector<Complex64>], theta_d: &DVector<Complex64>) -> Vec<f64> {
    rows.iter()
        .map(|u| {
            let n = theta_d.len();
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..n {
                acc += u[k].conj() * theta_d[k];
            }
            acc += u[n].conj();
            acc.norm_sqr()
        })
        .collect()
}

fn caps_satisfied(gammas: &[f64], gamma_bar_w: &[f64]) -> bool {
    gammas
        .iter()
        .zip(gamma_bar_w)
        .all(|(&g, &cap)| g <= cap * (1.0 + FEAS_REL_TOL))
}

/// Snaps each element to the codebook level nearest the phase of
/// `b_n + λ_n/μ`, keeping the amplitude of θ̄.
pub fn theta_step(
    state: &NpspState,
    theta_bar: &ReflectVector,
    codebook: &PhaseCodebook,
    cfg: &NpspConfig,
) -> DVector<Complex64> {
    let n = state.b.len();
    DVector::from_fn(n, |k, _| {
        let target = state.b[k] + state.lambda[k] / cfg.mu;
        let idx = codebook.nearest(target.arg());
        codebook.phasor(idx) * theta_bar.theta_hat()[k].norm()
    })
}

/// Re-centers the continuous copy between θ̄ and the current snap.
pub fn b_step(
    state: &NpspState,
    theta_bar: &ReflectVector,
    pd: &ProblemData,
    v: &BeamVector,
    cfg: &NpspConfig,
) -> Result<DVector<Complex64>> {
    let n = state.theta_d.len();
    let bar = head(theta_bar);
    match cfg.b_rule {
        BStepRule::DiagonalLagrangian => {
            let mut out = DVector::zeros(n);
            for k in 0..n {
                out[k] =
                    (2.0 * bar[k] + cfg.mu * state.theta_d[k] - state.lambda[k]) / (2.0 + cfg.mu);
            }
            Ok(out)
        }
        BStepRule::ClosedForm => {
            let mut rhs = DVector::zeros(n);
            for k in 0..n {
                rhs[k] = 2.0 * bar[k] + cfg.mu * state.theta_d[k] + state.lambda[k];
            }
            if state.w.iter().all(|&w| w == 0.0) {
                return Ok(rhs / Complex64::new(2.0 + cfg.mu, 0.0));
            }
            let mut y = DMatrix::from_diagonal_element(n, n, Complex64::new(2.0 + cfg.mu, 0.0));
            for (j, u) in leakage_rows(pd, v).iter().enumerate() {
                let uh = DVector::from_fn(n, |k, _| u[k]);
                let scale = Complex64::new(2.0 * state.w[j], 0.0);
                y += (&uh * uh.adjoint()) * scale;
            }
            let chol = y.clone().cholesky().ok_or_else(|| {
                Error::Numerical("penalty system lost positive definiteness".into())
            })?;
            let b = chol.solve(&rhs);
            let residual = (&y * &b - &rhs).norm();
            if residual > 1e-10 * rhs.norm() {
                return Err(Error::Numerical(format!(
                    "penalty system solve residual {residual:.2e} too large"
                )));
            }
            Ok(b)
        }
    }
}

/// Multiplier ascent: λ follows the copy gap, w_j the clamped cap excess.
pub fn dual_step(
    state: &mut NpspState,
    pd: &ProblemData,
    v: &BeamVector,
    gamma_bar_w: &[f64],
    cfg: &NpspConfig,
) {
    for k in 0..state.lambda.len() {
        state.lambda[k] += cfg.mu * (state.b[k] - state.theta_d[k]);
    }
    let gammas = interference_of(&leakage_rows(pd, v), &state.theta_d);
    for (j, &gamma) in gammas.iter().enumerate() {
        let excess = gamma - gamma_bar_w[j];
        if excess > 0.0 {
            state.w[j] += cfg.mu * excess;
        }
    }
}

/// Quantization outcome. `iterations` counts penalty rounds, or candidate
/// evaluations for the exhaustive search.
#[derive(Debug, Clone)]
pub enum NpspOutcome {
    Found {
        theta_o: ReflectVector,
        f_obj: f64,
        iterations: usize,
    },
    NotFound {
        iterations: usize,
    },
}

impl NpspOutcome {
    pub fn is_found(&self) -> bool {
        matches!(self, NpspOutcome::Found { .. })
    }

    pub fn theta(&self) -> Option<&ReflectVector> {
        match self {
            NpspOutcome::Found { theta_o, .. } => Some(theta_o),
            NpspOutcome::NotFound { .. } => None,
        }
    }

    pub fn f_obj(&self) -> Option<f64> {
        match self {
            NpspOutcome::Found { f_obj, .. } => Some(*f_obj),
            NpspOutcome::NotFound { .. } => None,
        }
    }
}

fn validate_inputs(
    theta_bar: &ReflectVector,
    pd: &ProblemData,
    v: &BeamVector,
    gamma_bar_w: &[f64],
) -> Result<()> {
    if theta_bar.n_elements() != pd.n_elements() {
        return Err(Error::Dimension(format!(
            "surface has {} elements, problem expects {}",
            theta_bar.n_elements(),
            pd.n_elements()
        )));
    }
    if v.m_antennas() != pd.m_antennas() {
        return Err(Error::Dimension(format!(
            "beam has {} antennas, problem expects {}",
            v.m_antennas(),
            pd.m_antennas()
        )));
    }
    if gamma_bar_w.len() != pd.j_pns() {
        return Err(Error::Dimension(format!(
            "need {} interference caps, got {}",
            pd.j_pns(),
            gamma_bar_w.len()
        )));
    }
    for (idx, &cap) in gamma_bar_w.iter().enumerate() {
        if cap.is_nan() || cap < 0.0 {
            return Err(Error::Domain(format!(
                "interference cap {idx} must be nonnegative, got {cap}"
            )));
        }
    }
    Ok(())
}

/// Runs the penalty iteration and returns the best feasible snap.
///
/// Initialization is deterministic (b = θ̄, zero multipliers) so identical
/// inputs give identical outputs.
pub fn npsp_solve(
    theta_bar: &ReflectVector,
    pd: &ProblemData,
    v: &BeamVector,
    codebook: &PhaseCodebook,
    gamma_bar_w: &[f64],
    cfg: &NpspConfig,
) -> Result<NpspOutcome> {
    cfg.validate()?;
    validate_inputs(theta_bar, pd, v, gamma_bar_w)?;
    let n = pd.n_elements();
    let bar = head(theta_bar);
    let rows = leakage_rows(pd, v);

    let mut state = NpspState {
        theta_d: DVector::zeros(n),
        b: bar.clone(),
        lambda: DVector::zeros(n),
        w: vec![0.0; pd.j_pns()],
        f_obj: f64::INFINITY,
        theta_o: None,
    };

    let mut rounds = 0;
    for k in 1..=cfg.n_itr {
        rounds = k;
        state.theta_d = theta_step(&state, theta_bar, codebook, cfg);
        state.b = b_step(&state, theta_bar, pd, v, cfg)?;
        dual_step(&mut state, pd, v, gamma_bar_w, cfg);

        if caps_satisfied(&interference_of(&rows, &state.theta_d), gamma_bar_w) {
            let f = (&bar - &state.theta_d).norm_squared();
            if f < state.f_obj {
                state.f_obj = f;
                state.theta_o = Some(state.theta_d.clone());
            }
        }
        if (&state.b - &state.theta_d).norm_squared() <= cfg.varsigma {
            break;
        }
    }

    match state.theta_o {
        Some(best) => Ok(NpspOutcome::Found {
            theta_o: ReflectVector::from_elements(best.as_slice())?,
            f_obj: state.f_obj,
            iterations: rounds,
        }),
        None => Ok(NpspOutcome::NotFound { iterations: rounds }),
    }
}

/// Tries every codebook assignment and keeps the feasible one closest to
/// θ̄. Refuses when L^N exceeds a million candidates.
pub fn exhaustive_quantize(
    theta_bar: &ReflectVector,
    pd: &ProblemData,
    v: &BeamVector,
    codebook: &PhaseCodebook,
    gamma_bar_w: &[f64],
) -> Result<NpspOutcome> {
    validate_inputs(theta_bar, pd, v, gamma_bar_w)?;
    let n = pd.n_elements();
    let l = codebook.len();
    let total = (l as f64).powi(n as i32);
    if total > 1e6 {
        return Err(Error::Budget(format!(
            "{l}^{n} codebook assignments exceed the 1e6 search budget"
        )));
    }
    let total = total as usize;
    let bar = head(theta_bar);
    let rows = leakage_rows(pd, v);

    let mut best: Option<(f64, DVector<Complex64>)> = None;
    let mut assignment = vec![0usize; n];
    for _ in 0..total {
        let cand = DVector::from_fn(n, |k, _| codebook.phasor(assignment[k]) * bar[k].norm());
        if caps_satisfied(&interference_of(&rows, &cand), gamma_bar_w) {
            let f = (&bar - &cand).norm_squared();
            if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
                best = Some((f, cand));
            }
        }
        for digit in assignment.iter_mut() {
            *digit += 1;
            if *digit < l {
                break;
            }
            *digit = 0;
        }
    }

    match best {
        Some((f_obj, cand)) => Ok(NpspOutcome::Found {
            theta_o: ReflectVector::from_elements(cand.as_slice())?,
            f_obj,
            iterations: total,
        }),
        None => Ok(NpspOutcome::NotFound { iterations: total }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI, TAU};

    fn cn(rng: &mut impl Rng) -> Complex64 {
        let scale = std::f64::consts::FRAC_1_SQRT_2;
        Complex64::new(
            scale * rng.sample::<f64, _>(rand_distr::StandardNormal),
            scale * rng.sample::<f64, _>(rand_distr::StandardNormal),
        )
    }

    fn synthetic_pd(rng: &mut impl Rng, m: usize, n: usize, j: usize) -> ProblemData {
        let rows = n + 1;
        let h_hat_s = DMatrix::from_fn(rows, m, |_, _| cn(rng));
        let h_hat_sj: Vec<_> = (0..j)
            .map(|_| DMatrix::from_fn(rows, m, |_, _| cn(rng)))
            .collect();
        let h_tilde: Vec<_> = (0..j)
            .map(|_| DVector::from_fn(rows, |_, _| cn(rng)))
            .collect();
        ProblemData::new(h_hat_s, h_hat_sj, h_tilde, vec![1.0; j]).unwrap()
    }

    fn random_beam(rng: &mut impl Rng, m: usize) -> BeamVector {
        BeamVector::new(DVector::from_fn(m, |_, _| cn(rng)))
    }

    fn fresh_state(n: usize, j: usize, theta_bar: &ReflectVector) -> NpspState {
        NpspState {
            theta_d: DVector::zeros(n),
            b: head(theta_bar),
            lambda: DVector::zeros(n),
            w: vec![0.0; j],
            f_obj: f64::INFINITY,
            theta_o: None,
        }
    }

    #[test]
    fn codebook_construction_and_nearest_level() {
        let cb = PhaseCodebook::uniform(4).unwrap();
        assert_eq!(cb.levels(), &[0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2]);
        assert_eq!(cb.phasor(0), Complex64::new(1.0, 0.0));
        assert_eq!(cb.phasor(1), Complex64::new(0.0, 1.0));
        assert_eq!(cb.phasor(2), Complex64::new(-1.0, 0.0));
        assert_eq!(cb.phasor(3), Complex64::new(0.0, -1.0));
        let bits = PhaseCodebook::from_bits(2).unwrap();
        assert_eq!(bits.levels(), cb.levels());

        assert_eq!(cb.nearest(-0.1), 0);
        assert_eq!(cb.nearest(3.1), 2);
        // 5.9 rad is closer to 2π than to 3π/2, so it wraps to level 0.
        assert_eq!(cb.nearest(5.9), 0);

        assert!(PhaseCodebook::uniform(1).is_err());
        assert!(PhaseCodebook::new(vec![0.0, TAU]).is_err());
        assert!(PhaseCodebook::from_bits(0).is_err());
    }

    #[test]
    fn snap_matches_enumerated_circular_distance() {
        let cb = PhaseCodebook::uniform(4).unwrap();
        let theta_bar =
            ReflectVector::from_elements(&[Complex64::new(0.0, 0.7), Complex64::new(0.4, 0.0)])
                .unwrap();
        let cfg = NpspConfig::default();
        let mut state = fresh_state(2, 1, &theta_bar);
        state.b[0] = Complex64::from_polar(0.7, FRAC_PI_2);
        state.b[1] = Complex64::from_polar(0.4, 2.9);
        let snapped = theta_step(&state, &theta_bar, &cb, &cfg);
        assert_eq!(snapped[0], Complex64::new(0.0, 0.7));
        assert_eq!(snapped[1], Complex64::new(-0.4, 0.0));

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cb = PhaseCodebook::uniform(7).unwrap();
        for _ in 0..50 {
            let b = cn(&mut rng);
            let lambda = cn(&mut rng);
            let target = (b + lambda / cfg.mu).arg();
            let by_scan = (0..7)
                .min_by(|&a, &c| {
                    circular_distance(cb.levels()[a], target)
                        .partial_cmp(&circular_distance(cb.levels()[c], target))
                        .unwrap()
                })
                .unwrap();
            assert_eq!(cb.nearest(target), by_scan);
        }
    }

    #[test]
    fn copy_update_fixed_point_and_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pd = synthetic_pd(&mut rng, 2, 3, 2);
        let v = random_beam(&mut rng, 2);
        let theta_bar = ReflectVector::random_phases(3, 0.8, &mut rng).unwrap();
        let cfg = NpspConfig::default();

        let mut state = fresh_state(3, 2, &theta_bar);
        state.theta_d = head(&theta_bar);
        let b = b_step(&state, &theta_bar, &pd, &v, &cfg).unwrap();
        assert!((&b - head(&theta_bar)).norm() <= 1e-14);

        state.theta_d = DVector::from_fn(3, |k, _| head(&theta_bar)[k] * 0.3);
        let b = b_step(&state, &theta_bar, &pd, &v, &cfg).unwrap();
        for k in 0..3 {
            let expect =
                (2.0 * head(&theta_bar)[k] + cfg.mu * state.theta_d[k]) / (2.0 + cfg.mu);
            assert!((b[k] - expect).norm() <= 1e-14);
        }

        // Nonzero w activates the matrix path; verify the solve directly.
        state.w = vec![0.7, 2.3];
        state.lambda = DVector::from_fn(3, |_, _| cn(&mut rng));
        let b = b_step(&state, &theta_bar, &pd, &v, &cfg).unwrap();
        let mut y = DMatrix::from_diagonal_element(3, 3, Complex64::new(2.0 + cfg.mu, 0.0));
        for (j, u) in leakage_rows(&pd, &v).iter().enumerate() {
            let uh = DVector::from_fn(3, |k, _| u[k]);
            y += (&uh * uh.adjoint()) * Complex64::new(2.0 * state.w[j], 0.0);
        }
        let mut rhs = DVector::zeros(3);
        for k in 0..3 {
            rhs[k] = 2.0 * head(&theta_bar)[k] + cfg.mu * state.theta_d[k] + state.lambda[k];
        }
        assert!((&y * &b - &rhs).norm() <= 1e-10 * rhs.norm());

        let diag_cfg = NpspConfig {
            b_rule: BStepRule::DiagonalLagrangian,
            ..NpspConfig::default()
        };
        let bd = b_step(&state, &theta_bar, &pd, &v, &diag_cfg).unwrap();
        for k in 0..3 {
            let expect = (2.0 * head(&theta_bar)[k] + cfg.mu * state.theta_d[k]
                - state.lambda[k])
                / (2.0 + cfg.mu);
            assert!((bd[k] - expect).norm() <= 1e-14);
        }
    }

    #[test]
    fn multiplier_updates_follow_gap_and_cap_excess() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let pd = synthetic_pd(&mut rng, 2, 3, 2);
        let v = random_beam(&mut rng, 2);
        let theta_bar = ReflectVector::random_phases(3, 0.8, &mut rng).unwrap();
        let cfg = NpspConfig::default();

        let mut state = fresh_state(3, 2, &theta_bar);
        state.theta_d = head(&theta_bar);
        state.b = state.theta_d.clone();
        let gammas = interference_of(&leakage_rows(&pd, &v), &state.theta_d);
        let loose: Vec<f64> = gammas.iter().map(|g| g * 2.0).collect();
        dual_step(&mut state, &pd, &v, &loose, &cfg);
        assert!(state.lambda.iter().all(|c| c.norm() == 0.0));
        assert!(state.w.iter().all(|&w| w == 0.0));

        let tight: Vec<f64> = gammas.iter().map(|g| g * 0.5).collect();
        dual_step(&mut state, &pd, &v, &tight, &cfg);
        for (j, &g) in gammas.iter().enumerate() {
            let expect = cfg.mu * (g - tight[j]);
            assert!((state.w[j] - expect).abs() <= 1e-15 * expect.abs());
        }

        state.b = DVector::from_fn(3, |k, _| state.theta_d[k] + Complex64::new(0.25, -0.5));
        let before = state.lambda.clone();
        dual_step(&mut state, &pd, &v, &loose, &cfg);
        for k in 0..3 {
            let expect = before[k] + cfg.mu * Complex64::new(0.25, -0.5);
            assert!((state.lambda[k] - expect).norm() <= 1e-15);
        }
    }

    #[test]
    fn codebook_phased_input_comes_back_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let pd = synthetic_pd(&mut rng, 2, 3, 1);
        let v = random_beam(&mut rng, 2);
        let cb = PhaseCodebook::uniform(4).unwrap();
        let theta_bar = ReflectVector::from_elements(&[
            cb.phasor(1) * 0.5,
            cb.phasor(3) * 0.25,
            cb.phasor(0) * 0.9,
        ])
        .unwrap();
        let caps = interference_of(&leakage_rows(&pd, &v), &head(&theta_bar))
            .iter()
            .map(|g| g * 4.0 + 1.0)
            .collect::<Vec<_>>();
        let out = npsp_solve(&theta_bar, &pd, &v, &cb, &caps, &NpspConfig::default()).unwrap();
        match out {
            NpspOutcome::Found { theta_o, f_obj, .. } => {
                assert_eq!(f_obj, 0.0);
                assert_eq!(theta_o, theta_bar);
            }
            NpspOutcome::NotFound { .. } => panic!("feasible snap not found"),
        }
    }

    #[test]
    fn outputs_preserve_amplitudes_and_codebook_phases() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for (l, amp_tol) in [(4usize, 0.0), (8, 4.0 * f64::EPSILON)] {
            let cb = PhaseCodebook::uniform(l).unwrap();
            for _ in 0..10 {
                let pd = synthetic_pd(&mut rng, 2, 4, 2);
                let v = random_beam(&mut rng, 2);
                let elems: Vec<Complex64> = (0..4)
                    .map(|_| {
                        Complex64::from_polar(
                            rng.random_range(0.2..0.95),
                            rng.random_range(0.0..TAU),
                        )
                    })
                    .collect();
                let theta_bar = ReflectVector::from_elements(&elems).unwrap();
                let caps = interference_of(&leakage_rows(&pd, &v), &head(&theta_bar))
                    .iter()
                    .map(|g| g * 8.0 + 1.0)
                    .collect::<Vec<_>>();
                let out =
                    npsp_solve(&theta_bar, &pd, &v, &cb, &caps, &NpspConfig::default()).unwrap();
                let NpspOutcome::Found { theta_o, .. } = out else {
                    panic!("expected a feasible snap under loose caps");
                };
                for k in 0..4 {
                    let want = theta_bar.theta_hat()[k].norm();
                    let got = theta_o.theta_hat()[k].norm();
                    assert!(
                        (got - want).abs() <= amp_tol * want,
                        "L={l}: amplitude {got} vs {want}"
                    );
                    let ang = theta_o.theta_hat()[k].arg();
                    let dist = cb
                        .levels()
                        .iter()
                        .map(|&lv| circular_distance(lv, ang))
                        .fold(f64::INFINITY, f64::min);
                    assert!(dist <= 1e-12, "L={l}: phase {ang} off the grid by {dist}");
                }
            }
        }
    }

    #[test]
    fn found_outputs_respect_caps() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let cb = PhaseCodebook::uniform(4).unwrap();
        let mut found = 0;
        for _ in 0..30 {
            let pd = synthetic_pd(&mut rng, 2, 4, 2);
            let v = random_beam(&mut rng, 2);
            let theta_bar = ReflectVector::random_phases(4, 0.8, &mut rng).unwrap();
            let caps = interference_of(&leakage_rows(&pd, &v), &head(&theta_bar))
                .iter()
                .map(|g| g * 1.2)
                .collect::<Vec<_>>();
            let out = npsp_solve(&theta_bar, &pd, &v, &cb, &caps, &NpspConfig::default()).unwrap();
            if let NpspOutcome::Found { theta_o, .. } = out {
                found += 1;
                let gammas = interference_of(&leakage_rows(&pd, &v), &head(&theta_o));
                for (j, &g) in gammas.iter().enumerate() {
                    assert!(g <= caps[j] * (1.0 + FEAS_REL_TOL));
                }
            }
        }
        assert!(found > 0, "caps were never satisfiable in 30 instances");
    }

    #[test]
    fn exhaustive_search_agrees_with_manual_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let pd = synthetic_pd(&mut rng, 2, 2, 1);
        let v = random_beam(&mut rng, 2);
        let theta_bar = ReflectVector::random_phases(2, 0.7, &mut rng).unwrap();
        let cb = PhaseCodebook::uniform(4).unwrap();
        let caps = vec![interference_of(&leakage_rows(&pd, &v), &head(&theta_bar))[0] * 1.5];

        let out = exhaustive_quantize(&theta_bar, &pd, &v, &cb, &caps).unwrap();
        let mut best = f64::INFINITY;
        let rows = leakage_rows(&pd, &v);
        for a in 0..4 {
            for b in 0..4 {
                let cand = DVector::from_vec(vec![
                    cb.phasor(a) * theta_bar.theta_hat()[0].norm(),
                    cb.phasor(b) * theta_bar.theta_hat()[1].norm(),
                ]);
                if caps_satisfied(&interference_of(&rows, &cand), &caps) {
                    best = best.min((&head(&theta_bar) - &cand).norm_squared());
                }
            }
        }
        match out {
            NpspOutcome::Found {
                f_obj, iterations, ..
            } => {
                assert_eq!(iterations, 16);
                assert!((f_obj - best).abs() <= 1e-14 * (1.0 + best));
            }
            NpspOutcome::NotFound { .. } => assert_eq!(best, f64::INFINITY),
        }
    }

    #[test]
    fn exhaustive_search_budget_and_infeasible_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let pd = synthetic_pd(&mut rng, 2, 21, 1);
        let v = random_beam(&mut rng, 2);
        let theta_bar = ReflectVector::random_phases(21, 0.5, &mut rng).unwrap();
        let cb = PhaseCodebook::uniform(2).unwrap();
        assert!(matches!(
            exhaustive_quantize(&theta_bar, &pd, &v, &cb, &[1.0]),
            Err(Error::Budget(_))
        ));

        // Dominant direct leakage makes every assignment violate a zero cap.
        let pd = synthetic_pd(&mut rng, 2, 2, 1);
        let v = random_beam(&mut rng, 2);
        let theta_bar = ReflectVector::random_phases(2, 0.5, &mut rng).unwrap();
        let cb = PhaseCodebook::uniform(4).unwrap();
        let exh = exhaustive_quantize(&theta_bar, &pd, &v, &cb, &[0.0]).unwrap();
        assert!(!exh.is_found());
        let pen = npsp_solve(&theta_bar, &pd, &v, &cb, &[0.0], &NpspConfig::default()).unwrap();
        assert!(!pen.is_found());
    }

    #[test]
    fn penalty_never_beats_the_exhaustive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(83);
        let cb = PhaseCodebook::uniform(4).unwrap();
        let mut both = 0;
        for _ in 0..30 {
            let pd = synthetic_pd(&mut rng, 2, 3, 1);
            let v = random_beam(&mut rng, 2);
            let theta_bar = ReflectVector::random_phases(3, 0.8, &mut rng).unwrap();
            let caps = vec![interference_of(&leakage_rows(&pd, &v), &head(&theta_bar))[0] * 1.3];
            let oracle = exhaustive_quantize(&theta_bar, &pd, &v, &cb, &caps).unwrap();
            let pen = npsp_solve(&theta_bar, &pd, &v, &cb, &caps, &NpspConfig::default()).unwrap();
            if let (Some(fo), Some(fp)) = (oracle.f_obj(), pen.f_obj()) {
                both += 1;
                assert!(fo <= fp + 1e-12, "oracle {fo} worse than heuristic {fp}");
            }
            if pen.is_found() {
                assert!(oracle.is_found(), "heuristic found what the oracle missed");
            }
        }
        assert!(both >= 10, "too few jointly-found instances: {both}");
    }

    #[test]
    fn dense_codebook_approaches_the_continuous_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(97);
        let pd = synthetic_pd(&mut rng, 2, 4, 1);
        let v = random_beam(&mut rng, 2);
        let theta_bar = ReflectVector::random_phases(4, 0.9, &mut rng).unwrap();
        let cb = PhaseCodebook::from_bits(10).unwrap();
        let caps = vec![f64::INFINITY];
        let out = npsp_solve(&theta_bar, &pd, &v, &cb, &caps, &NpspConfig::default()).unwrap();
        let f = out.f_obj().expect("unconstrained snap must be found");
        let scale = head(&theta_bar).norm_squared();
        assert!(f < 1e-3 * scale, "f_obj {f:.3e} vs scale {scale:.3e}");
    }

    #[test]
    fn rejects_bad_arguments() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pd = synthetic_pd(&mut rng, 2, 3, 1);
        let v = random_beam(&mut rng, 2);
        let theta_bar = ReflectVector::random_phases(3, 0.5, &mut rng).unwrap();
        let cb = PhaseCodebook::uniform(4).unwrap();

        let bad = NpspConfig {
            mu: 0.0,
            ..NpspConfig::default()
        };
        assert!(npsp_solve(&theta_bar, &pd, &v, &cb, &[1.0], &bad).is_err());
        let bad = NpspConfig {
            n_itr: 0,
            ..NpspConfig::default()
        };
        assert!(npsp_solve(&theta_bar, &pd, &v, &cb, &[1.0], &bad).is_err());
        let bad = NpspConfig {
            varsigma: -1.0,
            ..NpspConfig::default()
        };
        assert!(npsp_solve(&theta_bar, &pd, &v, &cb, &[1.0], &bad).is_err());

        let cfg = NpspConfig::default();
        assert!(npsp_solve(&theta_bar, &pd, &v, &cb, &[], &cfg).is_err());
        assert!(npsp_solve(&theta_bar, &pd, &v, &cb, &[-0.5], &cfg).is_err());
        let wrong = ReflectVector::random_phases(2, 0.5, &mut rng).unwrap();
        assert!(npsp_solve(&wrong, &pd, &v, &cb, &[1.0], &cfg).is_err());
    }
}
