//! Surface-coefficient descent with the beam held fixed.
//!
//! For a fixed transmit vector the SU SIR is a ratio of quadratics in the
//! lifted surface vector θ̂. Lifting the denominator into an epigraph
//! variable t turns the problem into minimizing `q(θ̂, t) = -|g^H θ̂|²/t`
//! (g the received-through-surface channel) over a convex domain: unit-disk
//! elements, the pinned augmentation entry, per-network interference caps,
//! and `θ̂^H Φ θ̂ ≤ t`. q is concave, so its affine model at any point lies
//! above it everywhere; minimizing that model over the domain and damping
//! the step toward the previous interior iterate descends monotonically.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{BeamVector, DEGENERATE_DENOM};
use crate::scenario::{ProblemData, ReflectVector};
use crate::socp::{
    quad_leq_linear_cone, solve, ComplexEmbedding, SocCone, SocpProblem, SocpStatus,
    SolverOptions,
};

/// Knobs for the descent loop.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GldConfig {
    /// Iteration cap.
    pub k_bar: usize,
    /// Damping weight on the inner solution; the complement stays on the
    /// previous iterate. Must lie strictly inside (0, 1).
    pub epsilon: f64,
    /// Stop once the per-iteration decrease falls below this fraction of
    /// the current objective magnitude.
    pub descent_tol: f64,
    /// Margin below which a point counts as sitting on the domain boundary.
    pub boundary_margin: f64,
}

impl Default for GldConfig {
    fn default() -> Self {
        GldConfig {
            k_bar: 100,
            epsilon: 0.9,
            descent_tol: 1e-6,
            boundary_margin: 1e-6,
        }
    }
}

impl GldConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_bar == 0 {
            return Err(Error::Config("iteration cap must be at least 1".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Config(format!(
                "damping weight must lie in (0,1), got {}",
                self.epsilon
            )));
        }
        if !(self.descent_tol >= 0.0) || !self.descent_tol.is_finite() {
            return Err(Error::Config("descent tolerance must be finite and >= 0".into()));
        }
        if !(self.boundary_margin > 0.0) || !self.boundary_margin.is_finite() {
            return Err(Error::Config("boundary margin must be finite and > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GldStatus {
    /// Descent stalled below the tolerance (or the gradient vanished).
    Converged,
    /// Iteration cap reached while still making progress.
    IterationCap,
    /// An inner cone solve did not certify optimality; the best iterate so
    /// far is returned.
    InnerSolveFailed,
}

/// One accepted iterate in the descent trace.
#[derive(Debug, Clone, Copy)]
pub struct GldIterate {
    pub iteration: usize,
    pub q: f64,
    pub t: f64,
    /// Affine model value at this iterate, expanded at the previous one;
    /// the descent mechanism is q(new) <= model(new) <= q(previous).
    pub model: f64,
    /// Signed maximum relative constraint violation (negative = interior).
    pub max_residual: f64,
}

/// Final descent state.
#[derive(Debug, Clone)]
pub struct GldState {
    pub theta: ReflectVector,
    /// Epigraph value; tightened to θ̂^H Φ θ̂ at termination.
    pub t: f64,
    pub q_value: f64,
    pub iteration: usize,
    pub trace: Vec<GldIterate>,
    pub status: GldStatus,
}

impl GldState {
    /// SU SIR implied by the final point: -q once t is tight.
    pub fn sir(&self) -> f64 {
        -self.q_value
    }
}

/// Gradient of q split into its complex θ̂-block and the real t-component.
#[derive(Debug, Clone)]
pub struct QGradient {
    /// -g·(g^H θ̂)/t, one entry per lifted coordinate.
    pub theta_block: DVector<Complex64>,
    /// +|g^H θ̂|²/t².
    pub t_component: f64,
}

impl QGradient {
    /// Gradient over the real coordinates [Re θ̂; Im θ̂; t]. The complex
    /// block doubles because each complex entry contributes through both
    /// itself and its conjugate.
    pub fn real_embedding(&self) -> DVector<f64> {
        let rows = self.theta_block.len();
        let mut out = DVector::zeros(2 * rows + 1);
        for k in 0..rows {
            out[k] = 2.0 * self.theta_block[k].re;
            out[rows + k] = 2.0 * self.theta_block[k].im;
        }
        out[2 * rows] = self.t_component;
        out
    }
}

fn received_channel(pd: &ProblemData, v: &BeamVector) -> DVector<Complex64> {
    &pd.h_hat_s * &v.v
}

fn check_dims(pd: &ProblemData, v: &BeamVector, theta: &ReflectVector) -> Result<()> {
    if v.m_antennas() != pd.m_antennas() {
        return Err(Error::Dimension(format!(
            "beam has {} antennas, problem expects {}",
            v.m_antennas(),
            pd.m_antennas()
        )));
    }
    if theta.n_elements() != pd.n_elements() {
        return Err(Error::Dimension(format!(
            "surface has {} elements, problem expects {}",
            theta.n_elements(),
            pd.n_elements()
        )));
    }
    Ok(())
}

fn check_caps(pd: &ProblemData, gamma_bar_w: &[f64]) -> Result<()> {
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

/// `q(θ̂, t) = -|g^H θ̂|²/t` with g the received-through-surface channel.
pub fn q_eval(pd: &ProblemData, v: &BeamVector, theta: &ReflectVector, t: f64) -> Result<f64> {
    check_dims(pd, v, theta)?;
    if !(t > 0.0) {
        return Err(Error::Domain(format!("epigraph value must be > 0, got {t}")));
    }
    let g = received_channel(pd, v);
    Ok(-g.dotc(theta.theta_hat()).norm_sqr() / t)
}

/// Exact gradient of q at (θ̂, t).
pub fn q_gradient(
    pd: &ProblemData,
    v: &BeamVector,
    theta: &ReflectVector,
    t: f64,
) -> Result<QGradient> {
    check_dims(pd, v, theta)?;
    if !(t > 0.0) {
        return Err(Error::Domain(format!("epigraph value must be > 0, got {t}")));
    }
    let g = received_channel(pd, v);
    let inner = g.dotc(theta.theta_hat());
    let theta_block = &g * (-inner / t);
    Ok(QGradient {
        theta_block,
        t_component: inner.norm_sqr() / (t * t),
    })
}

/// Signed maximum relative violation of the descent domain at (θ̂, t):
/// element amplitudes, interference caps, and the epigraph inequality.
/// Negative values mean the point is strictly interior by that slack.
pub fn domain_residual(
    pd: &ProblemData,
    v: &BeamVector,
    theta: &ReflectVector,
    t: f64,
    gamma_bar_w: &[f64],
) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for n in 0..theta.n_elements() {
        worst = worst.max(theta.theta_hat()[n].norm() - 1.0);
    }
    for (j, &cap) in gamma_bar_w.iter().enumerate() {
        if !cap.is_finite() {
            continue;
        }
        let u = &pd.h_hat_sj[j] * &v.v;
        let gamma = u.dotc(theta.theta_hat()).norm_sqr();
        worst = worst.max((gamma - cap) / cap.max(DEGENERATE_DENOM));
    }
    let quad = (&pd.phi_factor * theta.theta_hat()).norm_squared();
    if t > 0.0 {
        worst = worst.max((quad - t) / t);
    } else if quad > 0.0 {
        worst = worst.max(f64::INFINITY);
    }
    worst
}

/// Interiority margin of θ̂ alone (amplitude scale): how far every element
/// sits inside the unit disk and every interference modulus inside its cap.
fn interior_margin(
    pd: &ProblemData,
    v: &BeamVector,
    theta: &ReflectVector,
    gamma_bar_w: &[f64],
) -> f64 {
    let mut margin = f64::INFINITY;
    for n in 0..theta.n_elements() {
        margin = margin.min(1.0 - theta.theta_hat()[n].norm());
    }
    for (j, &cap) in gamma_bar_w.iter().enumerate() {
        if !cap.is_finite() {
            continue;
        }
        let u = &pd.h_hat_sj[j] * &v.v;
        let level = u.dotc(theta.theta_hat()).norm();
        if cap == 0.0 {
            if level > 0.0 {
                return f64::NEG_INFINITY;
            }
            continue;
        }
        margin = margin.min(1.0 - level / cap.sqrt());
    }
    margin
}

fn pad_cols(m: &DMatrix<f64>, dim: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.nrows(), dim);
    out.view_mut((0, 0), (m.nrows(), m.ncols())).copy_from(m);
    out
}

/// Convex combination `wa·a + wb·b` of two surface configurations,
/// entrywise over the complex elements. For wa + wb = 1 the result stays
/// inside the unit disks and every convex constraint both points satisfy.
fn combine(a: &ReflectVector, b: &ReflectVector, wa: f64, wb: f64) -> Result<ReflectVector> {
    let n = a.n_elements();
    let elems: Vec<Complex64> = (0..n)
        .map(|k| a.theta_hat()[k] * wa + b.theta_hat()[k] * wb)
        .collect();
    ReflectVector::from_elements(&elems)
}

/// The affine-model subproblem around one iterate, ready to solve.
///
/// Variables are `[Re θ̂; Im θ̂; t']` where `t' = t / trace(Φ)` keeps the
/// epigraph coordinate at unit scale regardless of channel magnitudes.
pub struct InnerProblem {
    pub problem: SocpProblem,
    /// Multiply the solved last coordinate by this to recover physical t.
    pub t_scale: f64,
    n: usize,
}

impl InnerProblem {
    /// Maps a solver point back to (θ̂, t). Element amplitudes are clamped
    /// onto the unit disk to absorb cone-tolerance slack.
    pub fn decode(&self, x: &DVector<f64>) -> Result<(ReflectVector, f64)> {
        let n = self.n;
        let rows = n + 1;
        let mut elems = Vec::with_capacity(n);
        for k in 0..n {
            let mut c = Complex64::new(x[k], x[rows + k]);
            let a = c.norm();
            if a > 1.0 {
                c /= Complex64::new(a, 0.0);
            }
            elems.push(c);
        }
        let theta = ReflectVector::from_elements(&elems)?;
        let t = x[2 * rows] * self.t_scale;
        if !(t > 0.0) {
            return Err(Error::Numerical(format!(
                "inner solution returned nonpositive epigraph value {t}"
            )));
        }
        Ok((theta, t))
    }
}

/// Builds the cone program minimizing the affine model of q over the
/// descent domain: per-element unit disks, pinned augmentation entry,
/// interference caps, and the epigraph cone `θ̂^H Φ θ̂ ≤ t`.
pub fn linearize(
    pd: &ProblemData,
    v: &BeamVector,
    gamma_bar_w: &[f64],
    grad: &QGradient,
) -> Result<InnerProblem> {
    check_caps(pd, gamma_bar_w)?;
    let n = pd.n_elements();
    let rows = n + 1;
    if grad.theta_block.len() != rows {
        return Err(Error::Dimension(format!(
            "gradient block has {} entries, expected {rows}",
            grad.theta_block.len()
        )));
    }
    let s_sq: f64 = pd.phi_sum.diagonal().iter().map(|c| c.re).sum();
    if !(s_sq > 0.0) || !s_sq.is_finite() {
        return Err(Error::Domain(
            "interference structure vanished; the epigraph has no scale".into(),
        ));
    }

    let emb = ComplexEmbedding::new(rows);
    let dim = 2 * rows + 1;
    let t_idx = dim - 1;

    let mut objective = DVector::zeros(dim);
    let real = grad.real_embedding();
    for k in 0..2 * rows {
        objective[k] = real[k];
    }
    objective[t_idx] = grad.t_component * s_sq;

    let mut cones = Vec::with_capacity(n + gamma_bar_w.len() + 1);
    for k in 0..n {
        let mut a = DMatrix::zeros(2, dim);
        a[(0, k)] = 1.0;
        a[(1, rows + k)] = 1.0;
        cones.push(SocCone::norm_bound(a, DVector::zeros(2), 1.0));
    }
    for (j, &cap) in gamma_bar_w.iter().enumerate() {
        let u = &pd.h_hat_sj[j] * &v.v;
        cones.push(SocCone::norm_bound(
            pad_cols(&emb.modulus_rows(&u), dim),
            DVector::zeros(2),
            cap.sqrt(),
        ));
    }
    let factor = emb.matrix_rows(&pd.phi_factor) / s_sq.sqrt();
    cones.push(quad_leq_linear_cone(&pad_cols(&factor, dim), t_idx, dim)?);

    let mut eq_lhs = DMatrix::zeros(2, dim);
    eq_lhs[(0, n)] = 1.0;
    eq_lhs[(1, rows + n)] = 1.0;
    let eq_rhs = DVector::from_vec(vec![1.0, 0.0]);

    // The domain is unbounded above in t', but the model's t'-coefficient
    // is +|g^H θ̂|²·s²/t² > 0 whenever we get here, so the objective is
    // bounded below; the static certificate cannot see that.
    let problem = SocpProblem::new(objective, cones, eq_lhs, eq_rhs)?.assume_bounded();
    Ok(InnerProblem {
        problem,
        t_scale: s_sq,
        n,
    })
}

fn model_value(
    grad: &QGradient,
    base_q: f64,
    base_theta: &ReflectVector,
    base_t: f64,
    at_theta: &ReflectVector,
    at_t: f64,
) -> f64 {
    let mut acc = base_q + grad.t_component * (at_t - base_t);
    for k in 0..grad.theta_block.len() {
        let delta = at_theta.theta_hat()[k] - base_theta.theta_hat()[k];
        acc += 2.0 * (grad.theta_block[k].conj() * delta).re;
    }
    acc
}

/// Returns a configuration strictly interior to the descent domain, as
/// close to `init` as the required margin allows.
///
/// Fast path: blend toward the all-off surface, whose interference is the
/// direct leakage only. When even that sits outside some cap, fall back to
/// maximizing the worst relative slack over the domain (a cone program) and
/// blend toward that center instead.
pub fn make_interior(
    pd: &ProblemData,
    v: &BeamVector,
    init: &ReflectVector,
    gamma_bar_w: &[f64],
    cfg: &GldConfig,
) -> Result<ReflectVector> {
    cfg.validate()?;
    check_dims(pd, v, init)?;
    check_caps(pd, gamma_bar_w)?;
    let bar = cfg.boundary_margin;
    if interior_margin(pd, v, init, gamma_bar_w) >= bar {
        return Ok(init.clone());
    }

    let n = pd.n_elements();
    let off = ReflectVector::off(n);
    let center = if interior_margin(pd, v, &off, gamma_bar_w) >= 4.0 * bar {
        off
    } else {
        max_slack_center(pd, v, gamma_bar_w)?
    };
    let center_margin = interior_margin(pd, v, &center, gamma_bar_w);
    if center_margin < 2.0 * bar {
        return Err(Error::Domain(
            "no strictly interior surface configuration exists for this beam".into(),
        ));
    }
    // margin is concave over the segment, so a weight-lam blend toward the
    // center clears lam times the center's margin.
    let lam = (2.0 * bar / center_margin).max(0.05).min(1.0);
    let blended = combine(init, &center, 1.0 - lam, lam)?;
    if interior_margin(pd, v, &blended, gamma_bar_w) >= bar {
        Ok(blended)
    } else {
        Ok(center)
    }
}

/// Maximizes the worst relative slack m over the domain:
/// |θ̂_n| ≤ 1 - m and |u_j^H θ̂| ≤ √Γ̄_j·(1 - m).
fn max_slack_center(
    pd: &ProblemData,
    v: &BeamVector,
    gamma_bar_w: &[f64],
) -> Result<ReflectVector> {
    let n = pd.n_elements();
    let rows = n + 1;
    let emb = ComplexEmbedding::new(rows);
    let dim = 2 * rows + 1;
    let m_idx = dim - 1;

    let mut objective = DVector::zeros(dim);
    objective[m_idx] = -1.0;

    let mut cones = Vec::new();
    for k in 0..n {
        let mut a = DMatrix::zeros(2, dim);
        a[(0, k)] = 1.0;
        a[(1, rows + k)] = 1.0;
        let mut g = DVector::zeros(dim);
        g[m_idx] = -1.0;
        cones.push(SocCone {
            a,
            b: DVector::zeros(2),
            g,
            d: 1.0,
        });
    }
    for (j, &cap) in gamma_bar_w.iter().enumerate() {
        if !cap.is_finite() {
            continue;
        }
        let u = &pd.h_hat_sj[j] * &v.v;
        let a = pad_cols(&emb.modulus_rows(&u), dim);
        if cap == 0.0 {
            cones.push(SocCone::norm_bound(a, DVector::zeros(2), 0.0));
        } else {
            let root = cap.sqrt();
            let mut g = DVector::zeros(dim);
            g[m_idx] = -root;
            cones.push(SocCone {
                a,
                b: DVector::zeros(2),
                g,
                d: root,
            });
        }
    }
    let mut bound = DMatrix::zeros(1, dim);
    bound[(0, m_idx)] = 1.0;
    cones.push(SocCone::norm_bound(bound, DVector::zeros(1), 1.0));

    let mut eq_lhs = DMatrix::zeros(2, dim);
    eq_lhs[(0, n)] = 1.0;
    eq_lhs[(1, rows + n)] = 1.0;
    let eq_rhs = DVector::from_vec(vec![1.0, 0.0]);

    // Every variable is boxed (elements by their disks, m by the explicit
    // bound), so the objective is bounded even though no single cone
    // certifies it.
    let problem = SocpProblem::new(objective, cones, eq_lhs, eq_rhs)?.assume_bounded();
    let sol = solve(&problem, &SolverOptions::default())?;
    if sol.status != SocpStatus::Optimal {
        return Err(Error::Numerical(format!(
            "interior-point search did not certify a center (status {:?})",
            sol.status
        )));
    }
    let mut elems = Vec::with_capacity(n);
    for k in 0..n {
        let mut c = Complex64::new(sol.x[k], sol.x[rows + k]);
        let a = c.norm();
        if a > 1.0 {
            c /= Complex64::new(a, 0.0);
        }
        elems.push(c);
    }
    ReflectVector::from_elements(&elems)
}

/// Runs the damped linearization descent from a strictly interior start.
///
/// Each round minimizes the affine model of q over the domain, damps the
/// solution toward the previous iterate, and accepts it; concavity of q
/// makes `q(new) ≤ model(new) ≤ q(old)` so the trace never increases. At
/// termination the epigraph variable is tightened onto `θ̂^H Φ θ̂`, which
/// can only decrease q further and makes `-q` the achieved SIR.
pub fn gld_solve(
    pd: &ProblemData,
    v: &BeamVector,
    init: &ReflectVector,
    gamma_bar_w: &[f64],
    cfg: &GldConfig,
) -> Result<GldState> {
    cfg.validate()?;
    check_dims(pd, v, init)?;
    check_caps(pd, gamma_bar_w)?;
    if interior_margin(pd, v, init, gamma_bar_w) <= 0.0 {
        return Err(Error::Domain(
            "descent requires a strictly interior starting configuration".into(),
        ));
    }

    let quad0 = (&pd.phi_factor * init.theta_hat()).norm_squared();
    if quad0 < DEGENERATE_DENOM {
        // The interference quadratic vanished at the start: the ratio is
        // already unbounded and there is nothing to descend.
        let t = quad0.max(DEGENERATE_DENOM);
        let q = q_eval(pd, v, init, t)?;
        return Ok(GldState {
            theta: init.clone(),
            t,
            q_value: q,
            iteration: 0,
            trace: vec![GldIterate {
                iteration: 0,
                q,
                t,
                model: q,
                max_residual: domain_residual(pd, v, init, t, gamma_bar_w),
            }],
            status: GldStatus::Converged,
        });
    }

    let mut cur_theta = init.clone();
    let mut cur_t = 1.1 * quad0;
    let mut cur_q = q_eval(pd, v, &cur_theta, cur_t)?;
    let mut trace = vec![GldIterate {
        iteration: 0,
        q: cur_q,
        t: cur_t,
        model: cur_q,
        max_residual: domain_residual(pd, v, &cur_theta, cur_t, gamma_bar_w),
    }];
    let mut status = GldStatus::IterationCap;
    let mut iteration = 0;

    let opts = SolverOptions::default();
    for k in 1..=cfg.k_bar {
        iteration = k;
        let grad = q_gradient(pd, v, &cur_theta, cur_t)?;
        if grad.real_embedding().iter().all(|&g| g == 0.0) {
            status = GldStatus::Converged;
            break;
        }
        let inner = linearize(pd, v, gamma_bar_w, &grad)?;
        let sol = solve(&inner.problem, &opts)?;
        if sol.status != SocpStatus::Optimal {
            status = GldStatus::InnerSolveFailed;
            break;
        }
        let Ok((bar_theta, bar_t)) = inner.decode(&sol.x) else {
            status = GldStatus::InnerSolveFailed;
            break;
        };

        let next_theta = combine(&bar_theta, &cur_theta, cfg.epsilon, 1.0 - cfg.epsilon)?;
        let next_t = cfg.epsilon * bar_t + (1.0 - cfg.epsilon) * cur_t;
        let next_q = q_eval(pd, v, &next_theta, next_t)?;
        if next_q > cur_q {
            // Rounding pushed the model step uphill; the current point is
            // already as good as the linearization can certify.
            status = GldStatus::Converged;
            break;
        }
        let model = model_value(&grad, cur_q, &cur_theta, cur_t, &next_theta, next_t);
        let decrease = cur_q - next_q;
        cur_theta = next_theta;
        cur_t = next_t;
        cur_q = next_q;
        trace.push(GldIterate {
            iteration: k,
            q: cur_q,
            t: cur_t,
            model,
            max_residual: domain_residual(pd, v, &cur_theta, cur_t, gamma_bar_w),
        });
        if decrease <= cfg.descent_tol * cur_q.abs().max(1e-30) {
            status = GldStatus::Converged;
            break;
        }
    }

    // Tighten the epigraph onto the quadratic it dominates; q only drops.
    let quad = (&pd.phi_factor * cur_theta.theta_hat()).norm_squared();
    if quad > 0.0 {
        cur_t = quad;
        cur_q = q_eval(pd, v, &cur_theta, cur_t)?;
    }

    Ok(GldState {
        theta: cur_theta,
        t: cur_t,
        q_value: cur_q,
        iteration,
        trace,
        status,
    })
}
