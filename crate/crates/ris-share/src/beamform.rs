//! Transmit beamforming at the secondary AP for a fixed surface setting.
//!
//! With the reflecting coefficients frozen, the SU's interference floor no
//! longer depends on the beam, so maximizing the SIR reduces to maximizing
//! the received amplitude `|a^H v|` with `a` the effective SU channel. A
//! global phase never changes a modulus, so the problem is solved as a
//! second-order cone program over `Re(a^H v)` with `Im(a^H v) = 0` pinning
//! the phase.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::metrics::BeamVector;
use crate::scenario::{ProblemData, ReflectVector};
use crate::socp::{solve, ComplexEmbedding, SocCone, SocpProblem, SocpStatus, SolverOptions};

/// Constraints within this relative distance of their bound count as active.
const ACTIVE_REL_TOL: f64 = 1e-6;

/// Which inequality constraints hold with equality at the returned beam.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveConstraints {
    pub power: bool,
    pub interference: Vec<bool>,
}

/// Optimal beam for one surface configuration.
#[derive(Debug, Clone)]
pub struct BeamformResult {
    pub v: BeamVector,
    /// `Re(a^H v)` at the returned beam, `a` the effective SU channel.
    pub objective: f64,
    pub status: SocpStatus,
    pub active_constraints: ActiveConstraints,
    /// True when the effective channel vanished: the received amplitude is
    /// zero for every beam, and `v = 0` is returned.
    pub degenerate: bool,
    pub kkt_residual: f64,
}

/// Maximum-ratio transmission: the whole budget along the effective channel.
/// Optimal exactly when no interference cap binds.
pub fn mrt(a: &DVector<Complex64>, p_max_w: f64) -> BeamVector {
    let norm = a.norm();
    if norm == 0.0 {
        return BeamVector::zeros(a.len());
    }
    BeamVector::new(a * Complex64::new(p_max_w.sqrt() / norm, 0.0))
}

/// Maximizes `Re(a^H v)` over the power ball `||v||² ≤ p_max_w` and the
/// per-network caps `|a_j^H v|² ≤ gamma_bar_w[j]`, with `Im(a^H v) = 0`.
///
/// Caps may be `+inf` (unconstrained network) or `0` (hard null). The
/// returned beam carries the canonical phase: `a^H v` real and nonnegative.
pub fn solve_p3(
    pd: &ProblemData,
    theta: &ReflectVector,
    p_max_w: f64,
    gamma_bar_w: &[f64],
) -> Result<BeamformResult> {
    let m = pd.m_antennas();
    let j = pd.j_pns();
    if theta.n_elements() != pd.n_elements() {
        return Err(Error::Dimension(format!(
            "surface has {} elements, problem expects {}",
            theta.n_elements(),
            pd.n_elements()
        )));
    }
    if gamma_bar_w.len() != j {
        return Err(Error::Dimension(format!(
            "need {j} interference caps, got {}",
            gamma_bar_w.len()
        )));
    }
    if !p_max_w.is_finite() || !(p_max_w > 0.0) {
        return Err(Error::Domain(
            "power budget must be finite and positive".into(),
        ));
    }
    for (idx, &cap) in gamma_bar_w.iter().enumerate() {
        if cap.is_nan() || cap < 0.0 {
            return Err(Error::Domain(format!(
                "interference cap {idx} must be nonnegative, got {cap}"
            )));
        }
    }

    let a = pd.effective_channel(theta);
    let a_pn = pd.interference_channels(theta);
    if a.norm() == 0.0 {
        return Ok(BeamformResult {
            v: BeamVector::zeros(m),
            objective: 0.0,
            status: SocpStatus::Optimal,
            active_constraints: ActiveConstraints {
                power: false,
                interference: vec![false; j],
            },
            degenerate: true,
            kkt_residual: 0.0,
        });
    }

    let emb = ComplexEmbedding::new(m);
    let dim = emb.dim();
    let su_rows = emb.modulus_rows(&a);
    let objective = -su_rows.row(0).transpose();
    let mut eq_lhs = DMatrix::zeros(1, dim);
    eq_lhs.row_mut(0).copy_from(&su_rows.row(1));
    let eq_rhs = DVector::zeros(1);

    let mut cones = Vec::with_capacity(1 + j);
    cones.push(SocCone::norm_bound(
        DMatrix::identity(dim, dim),
        DVector::zeros(dim),
        p_max_w.sqrt(),
    ));
    for (aj, &cap) in a_pn.iter().zip(gamma_bar_w) {
        cones.push(SocCone::norm_bound(
            emb.modulus_rows(aj),
            DVector::zeros(2),
            cap.sqrt(),
        ));
    }

    let problem = SocpProblem::new(objective, cones, eq_lhs, eq_rhs)?;
    let opts = SolverOptions {
        tol: 1e-10,
        ..SolverOptions::default()
    };
    let sol = solve(&problem, &opts)?;

    let mut v = emb.lift(&sol.x);
    let inner = a.dotc(&v);
    if inner.norm() > 0.0 {
        v *= inner.conj() / inner.norm();
    }
    let objective = a.dotc(&v).re;
    let v = BeamVector::new(v);

    let power = v.power() >= p_max_w * (1.0 - ACTIVE_REL_TOL);
    let interference = a_pn
        .iter()
        .zip(gamma_bar_w)
        .map(|(aj, &cap)| cap.is_finite() && aj.dotc(&v.v).norm_sqr() >= cap * (1.0 - ACTIVE_REL_TOL))
        .collect();

    Ok(BeamformResult {
        v,
        objective,
        status: sol.status,
        active_constraints: ActiveConstraints {
            power,
            interference,
        },
        degenerate: false,
        kkt_residual: sol.kkt_residual,
    })
}
