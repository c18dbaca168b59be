//! Dense second-order cone programming.
//!
//! Solves `minimize c^T x` subject to second-order cone constraints
//! `||A_i x + b_i|| <= g_i^T x + d_i` and linear equalities `F x = h` over
//! real variables. Both the beamformer and every inner step of the
//! reflect-coefficient descent reduce to instances of this problem, always
//! small (a few hundred variables at most), so everything here is dense.
//!
//! The algorithm is a homogeneous self-dual primal-dual interior-point
//! method with Nesterov-Todd scaling and a Mehrotra predictor-corrector
//! step. Equalities are eliminated onto the null space of `F` before the
//! cone solve. Every `Optimal` return is re-verified by an independent
//! KKT residual check against the original problem data; a failed recheck
//! downgrades the status, never the other way around.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// One second-order cone constraint `||a·x + b|| <= g^T x + d`.
///
/// `d = +inf` encodes an absent constraint (the solver drops it). A cone
/// with `g = 0` and `d = 0` degenerates to the equality system `a·x = -b`
/// and is converted during presolve.
#[derive(Debug, Clone, PartialEq)]
pub struct SocCone {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub g: DVector<f64>,
    pub d: f64,
}

impl SocCone {
    /// Ball-style constraint `||a·x + b|| <= d` with no linear term.
    pub fn norm_bound(a: DMatrix<f64>, b: DVector<f64>, d: f64) -> Self {
        let dim = a.ncols();
        SocCone {
            a,
            b,
            g: DVector::zeros(dim),
            d,
        }
    }

    /// Rows in the cone's slack vector, counting the scalar row.
    pub fn size(&self) -> usize {
        self.a.nrows() + 1
    }

    /// Signed violation `||a·x + b|| - (g^T x + d)`; positive means x lies
    /// outside the cone. Dropped (`d = +inf`) cones report `-inf`.
    pub fn residual(&self, x: &DVector<f64>) -> f64 {
        if self.d == f64::INFINITY {
            return f64::NEG_INFINITY;
        }
        (&self.a * x + &self.b).norm() - (self.g.dot(x) + self.d)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SocpProblem {
    pub dim: usize,
    /// Objective: minimize `objective^T x`.
    pub objective: DVector<f64>,
    pub cones: Vec<SocCone>,
    /// Equality left-hand side `F` (may have zero rows).
    pub eq_lhs: DMatrix<f64>,
    /// Equality right-hand side `h`.
    pub eq_rhs: DVector<f64>,
    /// When true, the caller vouches that the optimum is attained and the
    /// static boundedness certificate is skipped.
    pub assume_bounded: bool,
}

impl SocpProblem {
    pub fn new(
        objective: DVector<f64>,
        cones: Vec<SocCone>,
        eq_lhs: DMatrix<f64>,
        eq_rhs: DVector<f64>,
    ) -> Result<Self> {
        let dim = objective.len();
        let p = SocpProblem {
            dim,
            objective,
            cones,
            eq_lhs,
            eq_rhs,
            assume_bounded: false,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn without_equalities(objective: DVector<f64>, cones: Vec<SocCone>) -> Result<Self> {
        let dim = objective.len();
        SocpProblem::new(objective, cones, DMatrix::zeros(0, dim), DVector::zeros(0))
    }

    /// Caller-asserted boundedness; skips the static certificate.
    pub fn assume_bounded(mut self) -> Self {
        self.assume_bounded = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Dimension("problem has no variables".into()));
        }
        if self.objective.len() != self.dim {
            return Err(Error::Dimension(format!(
                "objective has {} entries for {} variables",
                self.objective.len(),
                self.dim
            )));
        }
        if !self.objective.iter().all(|x| x.is_finite()) {
            return Err(Error::Domain("objective entries must be finite".into()));
        }
        for (i, cone) in self.cones.iter().enumerate() {
            if cone.a.ncols() != self.dim || cone.g.len() != self.dim {
                return Err(Error::Dimension(format!(
                    "cone {i} acts on {} variables, problem has {}",
                    cone.a.ncols(),
                    self.dim
                )));
            }
            if cone.b.len() != cone.a.nrows() {
                return Err(Error::Dimension(format!(
                    "cone {i}: offset has {} rows, matrix has {}",
                    cone.b.len(),
                    cone.a.nrows()
                )));
            }
            let finite = cone.a.iter().all(|x| x.is_finite())
                && cone.b.iter().all(|x| x.is_finite())
                && cone.g.iter().all(|x| x.is_finite())
                && (cone.d.is_finite() || cone.d == f64::INFINITY);
            if !finite {
                return Err(Error::Domain(format!(
                    "cone {i} has non-finite data (only d = +inf is allowed)"
                )));
            }
        }
        if self.eq_lhs.ncols() != self.dim || self.eq_lhs.nrows() != self.eq_rhs.len() {
            return Err(Error::Dimension(format!(
                "equalities are {}x{} with {} right-hand sides for {} variables",
                self.eq_lhs.nrows(),
                self.eq_lhs.ncols(),
                self.eq_rhs.len(),
                self.dim
            )));
        }
        if !self.eq_lhs.iter().all(|x| x.is_finite()) || !self.eq_rhs.iter().all(|x| x.is_finite())
        {
            return Err(Error::Domain("equality data must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SocpStatus {
    Optimal,
    Infeasible,
    MaxIter,
}

/// Proof object attached to an `Infeasible` status.
#[derive(Debug, Clone)]
pub enum Certificate {
    /// Farkas dual ray: cone duals z_i in the dual cone and equality
    /// multipliers y with `Σ (g_i z0_i + A_i^T z1_i) = F^T y` and
    /// `Σ (d_i z0_i + b_i^T z1_i) + h^T y < 0`.
    DualRay {
        cone_duals: Vec<DVector<f64>>,
        eq_duals: DVector<f64>,
    },
    /// The equality system alone is inconsistent; the stored y satisfies
    /// `F^T y = 0` with `h^T y > 0`.
    InconsistentEqualities(DVector<f64>),
}

#[derive(Debug, Clone)]
pub struct SocpSolution {
    pub x: DVector<f64>,
    pub objective: f64,
    pub status: SocpStatus,
    /// Worst relative KKT violation from the independent recheck.
    /// NaN when the problem was declared infeasible.
    pub kkt_residual: f64,
    pub iterations: usize,
    /// One dual vector `[z0; z1]` per original cone.
    pub cone_duals: Vec<DVector<f64>>,
    /// Multipliers for the caller's equality rows.
    pub eq_duals: DVector<f64>,
    pub certificate: Option<Certificate>,
    pub message: Option<String>,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Optimality tolerance; also the bar the independent KKT recheck must
    /// clear before a solution is labeled `Optimal`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-8,
            max_iter: 200,
        }
    }
}

/// Independent KKT residual report. All entries are relative measures.
#[derive(Debug, Clone, Copy)]
pub struct KktReport {
    pub primal_cone: f64,
    pub primal_eq: f64,
    pub dual_stationarity: f64,
    pub dual_cone: f64,
    pub complementarity: f64,
}

impl KktReport {
    pub fn max_residual(&self) -> f64 {
        self.primal_cone
            .max(self.primal_eq)
            .max(self.dual_stationarity)
            .max(self.dual_cone)
            .max(self.complementarity)
    }
}

fn max_abs<'a, I: IntoIterator<Item = &'a f64>>(it: I) -> f64 {
    it.into_iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Re-derives every KKT residual from the raw problem data and candidate
/// primal/dual values. Shares no state with the interior-point loop; this
/// is the arbiter behind every `Optimal` status.
pub fn kkt_recheck(
    p: &SocpProblem,
    x: &DVector<f64>,
    cone_duals: &[DVector<f64>],
    eq_duals: &DVector<f64>,
) -> Result<KktReport> {
    if cone_duals.len() != p.cones.len() || eq_duals.len() != p.eq_lhs.nrows() || x.len() != p.dim
    {
        return Err(Error::Dimension(
            "recheck inputs do not match the problem shape".into(),
        ));
    }

    let mut primal_cone = 0f64;
    let mut dual_cone = 0f64;
    let mut gap_acc = 0f64;
    // Stationarity: c - Σ (g_i z0 + A_i^T z1) + F^T y = 0.
    let mut stat = p.objective.clone();
    for (cone, z) in p.cones.iter().zip(cone_duals) {
        if z.len() != cone.size() {
            return Err(Error::Dimension("cone dual has the wrong length".into()));
        }
        let z0 = z[0];
        let z1 = z.rows(1, z.len() - 1);
        if cone.d != f64::INFINITY {
            let lin = cone.g.dot(x) + cone.d;
            let arm = &cone.a * x + &cone.b;
            let scale = 1f64.max(arm.norm()).max(lin.abs());
            primal_cone = primal_cone.max((arm.norm() - lin) / scale);
            gap_acc += z0 * lin + z1.dot(&arm);
        }
        let zscale = 1f64.max(z0.abs() + z1.norm());
        dual_cone = dual_cone.max((z1.norm() - z0) / zscale);
        stat -= &cone.g * z0;
        stat -= cone.a.transpose() * z1;
    }
    stat += p.eq_lhs.transpose() * eq_duals;

    let primal_eq = if p.eq_rhs.is_empty() {
        0.0
    } else {
        let fx = &p.eq_lhs * x;
        let scale = 1f64.max(max_abs(&p.eq_rhs)).max(max_abs(&fx));
        max_abs(&(fx.clone() - &p.eq_rhs)) / scale
    };

    let cscale = 1f64.max(max_abs(&p.objective));
    let obj = p.objective.dot(x);

    Ok(KktReport {
        primal_cone: primal_cone.max(0.0),
        primal_eq,
        dual_stationarity: max_abs(&stat) / cscale,
        dual_cone: dual_cone.max(0.0),
        complementarity: gap_acc.abs() / 1f64.max(obj.abs()),
    })
}

/// Numerical check of a Farkas dual ray against the raw problem data.
pub fn dual_ray_is_valid(
    p: &SocpProblem,
    cone_duals: &[DVector<f64>],
    eq_duals: &DVector<f64>,
) -> bool {
    if cone_duals.len() != p.cones.len() || eq_duals.len() != p.eq_lhs.nrows() {
        return false;
    }
    let mut lhs = DVector::zeros(p.dim);
    let mut scalar = eq_duals.dot(&p.eq_rhs);
    let mut zmag = max_abs(eq_duals);
    let mut data_mag = max_abs(p.eq_lhs.iter()).max(max_abs(&p.eq_rhs));
    for (cone, z) in p.cones.iter().zip(cone_duals) {
        if z.len() != cone.size() {
            return false;
        }
        let z0 = z[0];
        let z1 = z.rows(1, z.len() - 1);
        if z1.norm() > z0 * (1.0 + 1e-8) + 1e-12 {
            return false;
        }
        if cone.d == f64::INFINITY {
            // Dropped cones cannot carry dual mass in a valid ray.
            if z0 != 0.0 || z1.norm() != 0.0 {
                return false;
            }
            continue;
        }
        lhs += &cone.g * z0;
        lhs += cone.a.transpose() * z1;
        scalar += cone.d * z0 + z1.dot(&cone.b);
        zmag = zmag.max(z0.abs() + z1.norm());
        data_mag = data_mag
            .max(max_abs(cone.a.iter()))
            .max(max_abs(&cone.b))
            .max(max_abs(&cone.g))
            .max(cone.d.abs());
    }
    lhs -= p.eq_lhs.transpose() * eq_duals;
    let scale = (1.0 + zmag) * (1.0 + data_mag);
    max_abs(&lhs) <= 1e-6 * scale && scalar < 0.0
}

// ------------------------------------------------------------------
// Complex embedding helpers
// ------------------------------------------------------------------

/// Maps complex M-vectors onto stacked real/imaginary coordinates in R^2M
/// so complex moduli become 2-norms of row pairs.
#[derive(Debug, Clone, Copy)]
pub struct ComplexEmbedding {
    pub m: usize,
}

impl ComplexEmbedding {
    pub fn new(m: usize) -> Self {
        ComplexEmbedding { m }
    }

    pub fn dim(&self) -> usize {
        2 * self.m
    }

    /// `v` to `[Re v; Im v]`.
    pub fn embed(&self, v: &DVector<Complex64>) -> DVector<f64> {
        let mut out = DVector::zeros(2 * self.m);
        for k in 0..self.m {
            out[k] = v[k].re;
            out[self.m + k] = v[k].im;
        }
        out
    }

    /// Inverse of [`embed`](Self::embed).
    pub fn lift(&self, x: &DVector<f64>) -> DVector<Complex64> {
        DVector::from_fn(self.m, |k, _| Complex64::new(x[k], x[self.m + k]))
    }

    /// Two rows R with `R·[Re v; Im v] = [Re(a^H v); Im(a^H v)]`, so
    /// `||R x||` equals the modulus `|a^H v|`.
    pub fn modulus_rows(&self, a: &DVector<Complex64>) -> DMatrix<f64> {
        let mut rows = DMatrix::zeros(2, 2 * self.m);
        for k in 0..self.m {
            rows[(0, k)] = a[k].re;
            rows[(0, self.m + k)] = a[k].im;
            rows[(1, k)] = -a[k].im;
            rows[(1, self.m + k)] = a[k].re;
        }
        rows
    }

    /// 2K rows computing `[Re(B v); Im(B v)]` for a K-row complex matrix,
    /// so the 2-norm of the product equals `||B v||`.
    pub fn matrix_rows(&self, b: &DMatrix<Complex64>) -> DMatrix<f64> {
        let k = b.nrows();
        let mut rows = DMatrix::zeros(2 * k, 2 * self.m);
        for r in 0..k {
            for c in 0..self.m {
                rows[(r, c)] = b[(r, c)].re;
                rows[(r, self.m + c)] = -b[(r, c)].im;
                rows[(k + r, c)] = b[(r, c)].im;
                rows[(k + r, self.m + c)] = b[(r, c)].re;
            }
        }
        rows
    }
}

/// Encodes `||b_rows·x||² <= x[t_index]` as the second-order cone
/// `||[2·b_rows·x; t-1]|| <= t+1`; membership also forces `t >= 0`.
pub fn quad_leq_linear_cone(
    b_rows: &DMatrix<f64>,
    t_index: usize,
    dim: usize,
) -> Result<SocCone> {
    if b_rows.ncols() != dim {
        return Err(Error::Dimension(format!(
            "factor acts on {} variables, cone is over {dim}",
            b_rows.ncols()
        )));
    }
    if t_index >= dim {
        return Err(Error::Dimension(format!(
            "t-index {t_index} out of range for {dim} variables"
        )));
    }
    let k = b_rows.nrows();
    let mut a = DMatrix::zeros(k + 1, dim);
    for r in 0..k {
        for c in 0..dim {
            a[(r, c)] = 2.0 * b_rows[(r, c)];
        }
    }
    a[(k, t_index)] = 1.0;
    let mut b = DVector::zeros(k + 1);
    b[k] = -1.0;
    let mut g = DVector::zeros(dim);
    g[t_index] = 1.0;
    Ok(SocCone { a, b, g, d: 1.0 })
}

// ------------------------------------------------------------------
// Interior-point core (runs on the reduced, scaled problem)
// ------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
struct Slice {
    off: usize,
    len: usize,
}

fn soc_det(v: &DVector<f64>, s: Slice) -> f64 {
    let head = v[s.off];
    if s.len == 1 {
        return head * head;
    }
    head * head - v.rows(s.off + 1, s.len - 1).norm_squared()
}

/// Largest step alpha keeping `u + alpha·du` in the cone; may be +inf.
fn soc_max_step(u: &DVector<f64>, du: &DVector<f64>, s: Slice) -> f64 {
    let u0 = u[s.off];
    let d0 = du[s.off];
    let t_lin = if d0 < 0.0 { -u0 / d0 } else { f64::INFINITY };
    if s.len == 1 {
        return t_lin.max(0.0);
    }

    let u1 = u.rows(s.off + 1, s.len - 1);
    let d1 = du.rows(s.off + 1, s.len - 1);
    let qa = d0 * d0 - d1.norm_squared();
    let qb = 2.0 * (u0 * d0 - u1.dot(&d1));
    let qc = u0 * u0 - u1.norm_squared();

    // Smallest positive root of qa·t² + qb·t + qc = 0 via the inverted
    // quadratic formula, which stays stable when qa is tiny.
    let disc = qb * qb - 4.0 * qa * qc;
    let t_det = if qa > 0.0 {
        if disc < 0.0 || qb >= 0.0 {
            f64::INFINITY
        } else {
            2.0 * qc / (-qb + disc.sqrt())
        }
    } else if qa < 0.0 {
        2.0 * qc / (-qb + disc.max(0.0).sqrt())
    } else if qb >= 0.0 {
        f64::INFINITY
    } else {
        qc / (-qb)
    };

    t_lin.min(t_det).max(0.0)
}

/// Jordan product u∘v = (u^T v, u0·v1 + v0·u1) written into `out`.
fn jprod(u: &DVector<f64>, v: &DVector<f64>, out: &mut DVector<f64>, s: Slice) {
    let mut head = 0.0;
    for k in 0..s.len {
        head += u[s.off + k] * v[s.off + k];
    }
    let u0 = u[s.off];
    let v0 = v[s.off];
    for k in 1..s.len {
        out[s.off + k] = u0 * v[s.off + k] + v0 * u[s.off + k];
    }
    out[s.off] = head;
}

/// Jordan division q = lambda \ u (solves lambda ∘ q = u) into `out`.
fn jdiv(lambda: &DVector<f64>, u: &DVector<f64>, out: &mut DVector<f64>, s: Slice) {
    let l0 = lambda[s.off];
    if s.len == 1 {
        out[s.off] = u[s.off] / l0;
        return;
    }
    let dl = soc_det(lambda, s);
    let mut cross = 0.0;
    for k in 1..s.len {
        cross += lambda[s.off + k] * u[s.off + k];
    }
    let q0 = (l0 * u[s.off] - cross) / dl;
    for k in 1..s.len {
        out[s.off + k] = (u[s.off + k] - q0 * lambda[s.off + k]) / l0;
    }
    out[s.off] = q0;
}

struct NtBlock {
    w: DMatrix<f64>,
    winv: DMatrix<f64>,
    w2: DMatrix<f64>,
}

/// Nesterov-Todd scaling for one cone: the symmetric PD matrix W with
/// W·z = W^{-1}·s at the current iterate.
fn nt_block(sv: &DVector<f64>, zv: &DVector<f64>, sl: Slice) -> Option<NtBlock> {
    let ds = soc_det(sv, sl);
    let dz = soc_det(zv, sl);
    if !(ds > 0.0) || !(dz > 0.0) || sv[sl.off] <= 0.0 || zv[sl.off] <= 0.0 {
        return None;
    }
    let k = sl.len;
    let sn = ds.sqrt();
    let zn = dz.sqrt();

    let mut sb = DVector::zeros(k);
    let mut zb = DVector::zeros(k);
    for i in 0..k {
        sb[i] = sv[sl.off + i] / sn;
        zb[i] = zv[sl.off + i] / zn;
    }
    let gamma = ((1.0 + sb.dot(&zb)) / 2.0).sqrt();
    if !(gamma > 0.0) {
        return None;
    }
    // Scaling direction w̄ with det(w̄) = 1.
    let mut wb = DVector::zeros(k);
    wb[0] = (sb[0] + zb[0]) / (2.0 * gamma);
    for i in 1..k {
        wb[i] = (sb[i] - zb[i]) / (2.0 * gamma);
    }

    let eta = (ds / dz).powf(0.25);
    let mut w = DMatrix::zeros(k, k);
    w[(0, 0)] = wb[0];
    for i in 1..k {
        w[(0, i)] = wb[i];
        w[(i, 0)] = wb[i];
    }
    let denom = 1.0 + wb[0];
    for i in 1..k {
        for j in 1..k {
            w[(i, j)] = wb[i] * wb[j] / denom + if i == j { 1.0 } else { 0.0 };
        }
    }
    // W̄^{-1} is W̄ with the border signs flipped (reflection J·W̄·J).
    let mut winv = w.clone();
    for i in 1..k {
        winv[(0, i)] = -winv[(0, i)];
        winv[(i, 0)] = -winv[(i, 0)];
    }
    w.scale_mut(eta);
    winv.scale_mut(1.0 / eta);

    let w2 = &w * &w;
    Some(NtBlock { w, winv, w2 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum IpmStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    MaxIter,
}

struct IpmResult {
    status: IpmStatus,
    x: DVector<f64>,
    z: DVector<f64>,
    iterations: usize,
    message: Option<String>,
}

struct Ipm<'a> {
    g: &'a DMatrix<f64>,
    h: &'a DVector<f64>,
    c: &'a DVector<f64>,
    slices: &'a [Slice],
}

impl Ipm<'_> {
    fn solve(&self, tol: f64, max_iter: usize) -> IpmResult {
        let n = self.c.len();
        let m = self.h.len();
        let ncones = self.slices.len();
        let hnorm = self.h.norm();
        let cnorm = self.c.norm();

        // Least-squares primal start, minimum-norm dual start, both shifted
        // onto the cone interior along the identity element.
        let svd = self.g.clone().svd(true, true);
        let mut x = svd
            .solve(self.h, 1e-12)
            .unwrap_or_else(|_| DVector::zeros(n));
        if !x.iter().all(|v| v.is_finite()) {
            x = DVector::zeros(n);
        }
        let mut s = self.h - self.g * &x;
        let mut z = {
            // min ||z|| subject to G^T z = -c, from the same factors.
            let u = svd.u.as_ref().expect("svd with u");
            let vt = svd.v_t.as_ref().expect("svd with v_t");
            let mut w = vt * (-self.c);
            for (i, sv) in svd.singular_values.iter().enumerate() {
                w[i] = if *sv > 1e-12 { w[i] / sv } else { 0.0 };
            }
            u * w
        };
        if !z.iter().all(|v| v.is_finite()) {
            z = DVector::zeros(m);
        }
        for vec in [&mut s, &mut z] {
            let mut worst = f64::NEG_INFINITY;
            for sl in self.slices {
                let head = vec[sl.off];
                let tail = if sl.len > 1 {
                    vec.rows(sl.off + 1, sl.len - 1).norm()
                } else {
                    0.0
                };
                worst = worst.max(tail - head);
            }
            if worst > -1e-6 {
                let shift = 1.0 + worst;
                for sl in self.slices {
                    vec[sl.off] += shift;
                }
            }
        }
        let mut tau = 1.0f64;
        let mut kappa = 1.0f64;

        let degrees = (ncones + 1) as f64;
        let mu0 = (s.dot(&z) + tau * kappa) / degrees;

        let mut iterations = 0usize;
        for _ in 0..max_iter {
            // Residuals of the homogeneous embedding.
            let r1 = self.g * &x + &s - self.h * tau;
            let r2 = self.g.transpose() * &z + self.c * tau;
            let r3 = self.c.dot(&x) + self.h.dot(&z) + kappa;
            let gap = s.dot(&z);
            let mu = (gap + tau * kappa) / degrees;

            let pcost = self.c.dot(&x) / tau;
            let dcost = -self.h.dot(&z) / tau;
            let pres = (r1.norm() / tau) / 1f64.max(hnorm);
            let dres = (r2.norm() / tau) / 1f64.max(cnorm);
            let relgap = (gap / (tau * tau)) / 1f64.max(pcost.abs()).max(dcost.abs());

            if pres <= tol && dres <= tol && relgap <= tol {
                return IpmResult {
                    status: IpmStatus::Optimal,
                    x: &x / tau,
                    z: &z / tau,
                    iterations,
                    message: None,
                };
            }

            // Infeasibility certificates, only after real progress so a
            // slow start cannot masquerade as a proof.
            if mu <= 1e-2 * mu0 || tau < 1e-6 * kappa {
                let hz = self.h.dot(&z);
                if hz < -1e-14 {
                    let zt = &z / (-hz);
                    let res = (self.g.transpose() * &zt).norm() / 1f64.max(cnorm);
                    if res <= tol.max(1e-9) {
                        return IpmResult {
                            status: IpmStatus::PrimalInfeasible,
                            x: DVector::zeros(n),
                            z: zt,
                            iterations,
                            message: None,
                        };
                    }
                }
                let cx = self.c.dot(&x);
                if cx < -1e-14 {
                    let res = ((self.g * &x + &s) / (-cx)).norm() / 1f64.max(hnorm);
                    if res <= tol.max(1e-9) {
                        return IpmResult {
                            status: IpmStatus::DualInfeasible,
                            x: &x / (-cx),
                            z: DVector::zeros(m),
                            iterations,
                            message: Some(
                                "objective unbounded below on the feasible set".into(),
                            ),
                        };
                    }
                }
            }

            // Nesterov-Todd scaling per cone.
            let mut blocks = Vec::with_capacity(ncones);
            let mut lambda = DVector::zeros(m);
            let mut breakdown = false;
            for sl in self.slices {
                match nt_block(&s, &z, *sl) {
                    Some(blk) => {
                        let li = &blk.w * z.rows(sl.off, sl.len);
                        for k in 0..sl.len {
                            lambda[sl.off + k] = li[k];
                        }
                        blocks.push(blk);
                    }
                    None => {
                        breakdown = true;
                        break;
                    }
                }
            }
            if breakdown {
                return IpmResult {
                    status: IpmStatus::MaxIter,
                    x: &x / tau,
                    z: &z / tau,
                    iterations,
                    message: Some("scaling breakdown: iterate left the cone interior".into()),
                };
            }

            // Factor the augmented system [0 G^T; G -W^2] with pivoted LU.
            // Normal equations G^T W^{-2} G square the scaling's condition
            // number and produce unusable directions once mu is small; the
            // augmented form keeps the residual at roundoff relative to the
            // direction itself.
            let mut aug = DMatrix::zeros(n + m, n + m);
            aug.view_mut((0, n), (n, m))
                .copy_from(&self.g.transpose());
            aug.view_mut((n, 0), (m, n)).copy_from(self.g);
            for (blk, sl) in blocks.iter().zip(self.slices) {
                for r in 0..sl.len {
                    for c in 0..sl.len {
                        aug[(n + sl.off + r, n + sl.off + c)] = -blk.w2[(r, c)];
                    }
                }
            }
            let lu = aug.lu();

            let base_solve = |rhs_d: &DVector<f64>, rhs_p: &DVector<f64>| {
                let mut rhs = DVector::zeros(n + m);
                rhs.rows_mut(0, n).copy_from(rhs_d);
                rhs.rows_mut(n, m).copy_from(rhs_p);
                let sol = lu.solve(&rhs)?;
                Some((sol.rows(0, n).into_owned(), sol.rows(n, m).into_owned()))
            };
            let w2_apply = |v: &DVector<f64>| {
                let mut out = DVector::zeros(m);
                for (blk, sl) in blocks.iter().zip(self.slices) {
                    let seg = &blk.w2 * v.rows(sl.off, sl.len);
                    for k in 0..sl.len {
                        out[sl.off + k] = seg[k];
                    }
                }
                out
            };
            // Safeguarded iterative refinement: accept a correction only
            // while it shrinks the residual.
            let solve_kkt = |rhs_d: &DVector<f64>, rhs_p: &DVector<f64>| {
                let (mut dx, mut dz) = base_solve(rhs_d, rhs_p)?;
                let scale = 1f64.max(rhs_d.norm()).max(rhs_p.norm());
                let resid = |dx: &DVector<f64>, dz: &DVector<f64>| {
                    let res_d = rhs_d - self.g.transpose() * dz;
                    let res_p = rhs_p - (self.g * dx - w2_apply(dz));
                    let size = res_d.norm().max(res_p.norm());
                    (res_d, res_p, size)
                };
                let (mut res_d, mut res_p, mut size) = resid(&dx, &dz);
                for _ in 0..3 {
                    if size <= 1e-13 * scale {
                        break;
                    }
                    let Some((cx, cz)) = base_solve(&res_d, &res_p) else {
                        break;
                    };
                    let nx = &dx + cx;
                    let nz = &dz + cz;
                    let (nres_d, nres_p, nsize) = resid(&nx, &nz);
                    if nsize >= size {
                        break;
                    }
                    dx = nx;
                    dz = nz;
                    res_d = nres_d;
                    res_p = nres_p;
                    size = nsize;
                }
                Some((dx, dz))
            };

            // tau-column direction, shared by predictor and corrector.
            let neg_c = -self.c;
            let Some((u2, v2)) = solve_kkt(&neg_c, self.h) else {
                return IpmResult {
                    status: IpmStatus::MaxIter,
                    x: &x / tau,
                    z: &z / tau,
                    iterations,
                    message: Some("singular scaled system".into()),
                };
            };
            let tau_den = self.c.dot(&u2) + self.h.dot(&v2) - kappa / tau;
            if tau_den.abs() < 1e-300 {
                return IpmResult {
                    status: IpmStatus::MaxIter,
                    x: &x / tau,
                    z: &z / tau,
                    iterations,
                    message: Some("singular tau reduction".into()),
                };
            }

            // Newton direction with residual weight f = 1 - sigma and
            // complementarity targets d_s (cone) and d_tk (tau·kappa).
            let direction = |d_s: &DVector<f64>, d_tk: f64, f: f64| {
                let mut s_tilde = DVector::zeros(m);
                let mut scratch = DVector::zeros(m);
                for (blk, sl) in blocks.iter().zip(self.slices) {
                    jdiv(&lambda, d_s, &mut scratch, *sl);
                    let seg = &blk.w * scratch.rows(sl.off, sl.len);
                    for k in 0..sl.len {
                        s_tilde[sl.off + k] = seg[k];
                    }
                }
                let rhs_d = -(&r2 * f);
                let rhs_p = -(&r1 * f) - &s_tilde;
                let (u1, v1) = solve_kkt(&rhs_d, &rhs_p)?;
                let num = -f * r3 - self.c.dot(&u1) - self.h.dot(&v1) - d_tk / tau;
                let dtau = num / tau_den;
                let dx = &u1 + &u2 * dtau;
                let dz = &v1 + &v2 * dtau;
                // Recover ds from the primal residual equation so that block
                // holds exactly; solve error lands in the centering equation
                // where it only perturbs the target.
                let ds = -(&r1 * f) + self.h * dtau - self.g * &dx;
                let dkappa = (d_tk - kappa * dtau) / tau;
                Some((dx, dz, ds, dtau, dkappa))
            };

            let max_step = |dsv: &DVector<f64>, dzv: &DVector<f64>, dtau: f64, dkappa: f64| {
                let mut a = f64::INFINITY;
                for sl in self.slices {
                    a = a.min(soc_max_step(&s, dsv, *sl));
                    a = a.min(soc_max_step(&z, dzv, *sl));
                }
                if dtau < 0.0 {
                    a = a.min(-tau / dtau);
                }
                if dkappa < 0.0 {
                    a = a.min(-kappa / dkappa);
                }
                a
            };

            // Predictor: pure Newton step toward the boundary.
            let mut d_s_aff = DVector::zeros(m);
            for sl in self.slices {
                jprod(&lambda, &lambda, &mut d_s_aff, *sl);
            }
            d_s_aff.neg_mut();
            let Some((_dx_a, dz_a, ds_a, dtau_a, dkappa_a)) =
                direction(&d_s_aff, -tau * kappa, 1.0)
            else {
                return IpmResult {
                    status: IpmStatus::MaxIter,
                    x: &x / tau,
                    z: &z / tau,
                    iterations,
                    message: Some("singular scaled system".into()),
                };
            };
            let alpha_aff = max_step(&ds_a, &dz_a, dtau_a, dkappa_a).min(1.0);
            let sigma = (1.0 - alpha_aff).powi(3).clamp(0.0, 1.0);

            // Corrector with the Mehrotra second-order term
            // (W^{-1}Δs_aff) ∘ (W Δz_aff).
            let mut wds = DVector::zeros(m);
            let mut wdz = DVector::zeros(m);
            for (blk, sl) in blocks.iter().zip(self.slices) {
                let a_seg = &blk.winv * ds_a.rows(sl.off, sl.len);
                let b_seg = &blk.w * dz_a.rows(sl.off, sl.len);
                for k in 0..sl.len {
                    wds[sl.off + k] = a_seg[k];
                    wdz[sl.off + k] = b_seg[k];
                }
            }
            let mut corr = DVector::zeros(m);
            for sl in self.slices {
                jprod(&wds, &wdz, &mut corr, *sl);
            }
            let mut d_s = DVector::zeros(m);
            for sl in self.slices {
                jprod(&lambda, &lambda, &mut d_s, *sl);
            }
            d_s.neg_mut();
            d_s -= &corr;
            for sl in self.slices {
                d_s[sl.off] += sigma * mu;
            }
            let d_tk = sigma * mu - tau * kappa - dtau_a * dkappa_a;

            let Some((dx, dz, ds, dtau, dkappa)) = direction(&d_s, d_tk, 1.0 - sigma) else {
                return IpmResult {
                    status: IpmStatus::MaxIter,
                    x: &x / tau,
                    z: &z / tau,
                    iterations,
                    message: Some("singular scaled system".into()),
                };
            };
            let alpha = (0.99 * max_step(&ds, &dz, dtau, dkappa)).min(1.0);
            if !alpha.is_finite() || alpha <= 0.0 {
                return IpmResult {
                    status: IpmStatus::MaxIter,
                    x: &x / tau,
                    z: &z / tau,
                    iterations,
                    message: Some("no positive step available".into()),
                };
            }

            x += &dx * alpha;
            s += &ds * alpha;
            z += &dz * alpha;
            tau += alpha * dtau;
            kappa += alpha * dkappa;
            iterations += 1;
        }

        IpmResult {
            status: IpmStatus::MaxIter,
            x: &x / tau,
            z: &z / tau,
            iterations,
            message: Some("iteration cap reached".into()),
        }
    }
}

// ------------------------------------------------------------------
// Presolve, equality elimination, and the public entry point
// ------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
enum Disposition {
    Kept,
    Dropped,
    /// Converted to equality rows starting at this offset in the extended
    /// equality system.
    Converted(usize),
}

fn zero_duals(p: &SocpProblem) -> Vec<DVector<f64>> {
    p.cones.iter().map(|c| DVector::zeros(c.size())).collect()
}

struct ReducedCone {
    a: DMatrix<f64>,
    b: DVector<f64>,
    g: DVector<f64>,
    d: f64,
    scale: f64,
    orig: usize,
}

/// Solves the problem. Formulation errors are `Err`; solver outcomes
/// (including infeasibility and iteration caps) come back in the status.
pub fn solve(p: &SocpProblem, opts: &SolverOptions) -> Result<SocpSolution> {
    p.validate()?;
    let dim = p.dim;
    let n_orig_eq = p.eq_lhs.nrows();

    // Presolve: drop +inf cones, convert zero-radius balls into equalities,
    // and catch cones no point can enter.
    let mut dispositions = Vec::with_capacity(p.cones.len());
    let mut extra_eq_rows = 0usize;
    for (idx, cone) in p.cones.iter().enumerate() {
        if cone.d == f64::INFINITY {
            dispositions.push(Disposition::Dropped);
            continue;
        }
        let g_zero = cone.g.iter().all(|&v| v == 0.0);
        if g_zero && cone.d < 0.0 {
            // ||A x + b|| <= d < 0 is empty; the ray (1, 0, ...) on this
            // cone alone is a valid Farkas certificate.
            let mut cert = zero_duals(p);
            cert[idx][0] = 1.0;
            return Ok(SocpSolution {
                x: DVector::zeros(dim),
                objective: f64::NAN,
                status: SocpStatus::Infeasible,
                kkt_residual: f64::NAN,
                iterations: 0,
                cone_duals: zero_duals(p),
                eq_duals: DVector::zeros(n_orig_eq),
                certificate: Some(Certificate::DualRay {
                    cone_duals: cert,
                    eq_duals: DVector::zeros(n_orig_eq),
                }),
                message: Some("a cone has negative radius and no linear term".into()),
            });
        }
        if g_zero && cone.d == 0.0 {
            dispositions.push(Disposition::Converted(n_orig_eq + extra_eq_rows));
            extra_eq_rows += cone.a.nrows();
        } else {
            dispositions.push(Disposition::Kept);
        }
    }

    // Extended equality system: caller-specified rows plus converted cones.
    let total_eq = n_orig_eq + extra_eq_rows;
    let mut f_ext = DMatrix::zeros(total_eq, dim);
    let mut h_ext = DVector::zeros(total_eq);
    if n_orig_eq > 0 {
        f_ext.rows_mut(0, n_orig_eq).copy_from(&p.eq_lhs);
        h_ext.rows_mut(0, n_orig_eq).copy_from(&p.eq_rhs);
    }
    for (cone, disp) in p.cones.iter().zip(&dispositions) {
        if let Disposition::Converted(off) = disp {
            f_ext.rows_mut(*off, cone.a.nrows()).copy_from(&cone.a);
            h_ext.rows_mut(*off, cone.a.nrows()).copy_from(&(-&cone.b));
        }
    }

    // Null-space elimination: x = x_p + Z u with F_ext x_p = h_ext.
    let (x_p, z_basis, eq_svd) = if total_eq > 0 {
        let svd = f_ext.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let rank_tol = smax * (dim.max(total_eq) as f64) * f64::EPSILON * 8.0;
        let rank = svd
            .singular_values
            .iter()
            .filter(|&&sv| sv > rank_tol)
            .count();
        let u = svd.u.as_ref().expect("svd with u");
        let vt = svd.v_t.as_ref().expect("svd with v_t");

        // Minimum-norm particular solution.
        let mut w = u.transpose() * &h_ext;
        for i in 0..svd.singular_values.len() {
            w[i] = if i < rank {
                w[i] / svd.singular_values[i]
            } else {
                0.0
            };
        }
        let x_p = vt.transpose() * w;

        let resid = &f_ext * &x_p - &h_ext;
        if resid.norm() > 1e-9 * (1.0 + h_ext.norm()) {
            // Inconsistent equalities; h - F x_p is orthogonal to range(F).
            let y = &h_ext - &f_ext * &x_p;
            return Ok(SocpSolution {
                x: DVector::zeros(dim),
                objective: f64::NAN,
                status: SocpStatus::Infeasible,
                kkt_residual: f64::NAN,
                iterations: 0,
                cone_duals: zero_duals(p),
                eq_duals: DVector::zeros(n_orig_eq),
                certificate: Some(Certificate::InconsistentEqualities(y)),
                message: Some("equality constraints are inconsistent".into()),
            });
        }

        // Orthonormal null-space basis via the projector onto the
        // complement of range(F^T); robust to rank deficiency and to the
        // thin SVD not carrying trailing right singular vectors.
        let nullity = dim - rank;
        let mut z_basis = DMatrix::zeros(dim, nullity);
        if nullity > 0 {
            let vr = vt.rows(0, rank);
            let proj = DMatrix::identity(dim, dim) - vr.transpose() * vr;
            let psvd = proj.svd(true, false);
            let pu = psvd.u.as_ref().expect("svd with u");
            let mut col = 0usize;
            for (i, sv) in psvd.singular_values.iter().enumerate() {
                if *sv > 0.5 && col < nullity {
                    z_basis.set_column(col, &pu.column(i));
                    col += 1;
                }
            }
            if col != nullity {
                return Err(Error::Numerical(
                    "failed to build an orthonormal null-space basis".into(),
                ));
            }
        }
        (x_p, z_basis, Some(svd))
    } else {
        (DVector::zeros(dim), DMatrix::identity(dim, dim), None)
    };
    let nz = z_basis.ncols();

    // Least-squares multipliers solving F_ext^T y = rhs.
    let eq_multipliers = |rhs: &DVector<f64>| -> DVector<f64> {
        if total_eq == 0 {
            return DVector::zeros(0);
        }
        let svd = eq_svd.as_ref().expect("svd present when equalities exist");
        let u = svd.u.as_ref().expect("svd with u");
        let vt = svd.v_t.as_ref().expect("svd with v_t");
        let smax = svd.singular_values.max().max(1e-300);
        // F^T = V Σ U^T, so y = U Σ^{-1} V^T rhs on the positive spectrum.
        let mut w = vt * rhs;
        for (i, sv) in svd.singular_values.iter().enumerate() {
            w[i] = if *sv > 1e-12 * smax { w[i] / sv } else { 0.0 };
        }
        u * w
    };

    // Reduce kept cones onto null-space coordinates; scale each cone to
    // unit magnitude (cones are positively homogeneous).
    let mut reduced: Vec<ReducedCone> = Vec::new();
    for (orig_idx, (cone, disp)) in p.cones.iter().zip(&dispositions).enumerate() {
        let Disposition::Kept = disp else { continue };
        let a_r = &cone.a * &z_basis;
        let b_r = &cone.a * &x_p + &cone.b;
        let g_r = z_basis.transpose() * &cone.g;
        let d_r = cone.d + cone.g.dot(&x_p);
        let scale = max_abs(a_r.iter())
            .max(max_abs(&b_r))
            .max(max_abs(&g_r))
            .max(d_r.abs());
        if scale == 0.0 {
            // 0 <= 0 is satisfied by everything; same as a dropped cone.
            continue;
        }
        let inv = 1.0 / scale;
        reduced.push(ReducedCone {
            a: a_r * inv,
            b: b_r * inv,
            g: g_r * inv,
            d: d_r * inv,
            scale,
            orig: orig_idx,
        });
    }

    // Static boundedness certificate unless the caller vouches: some cone
    // with no linear term must bound the whole null space.
    if !p.assume_bounded && nz > 0 {
        let mut certified = false;
        for red in &reduced {
            if max_abs(&red.g) == 0.0 && red.d.is_finite() && red.a.nrows() >= nz {
                let svd = red.a.clone().svd(false, false);
                let smax = svd.singular_values.max();
                let rank = svd
                    .singular_values
                    .iter()
                    .filter(|&&sv| sv > smax * 1e-10)
                    .count();
                if rank == nz {
                    certified = true;
                    break;
                }
            }
        }
        if !certified {
            return Err(Error::Config(
                "no cone certifies a bounded feasible set; call assume_bounded() if the optimum is attained"
                    .into(),
            ));
        }
    }

    // Objective in reduced coordinates, normalized to unit magnitude.
    let c_red = z_basis.transpose() * &p.objective;
    let c_scale = if nz == 0 {
        1.0
    } else {
        max_abs(&c_red).max(1e-300)
    };
    let c_unit = &c_red / c_scale;

    // Shared recovery: original-space primal, duals for every disposition,
    // independent recheck, and the final status decision.
    let finish = |u_sol: DVector<f64>,
                  z_sol: &DVector<f64>,
                  slices: &[Slice],
                  iterations: usize,
                  message: Option<String>|
     -> Result<SocpSolution> {
        let x = &x_p + &z_basis * u_sol;
        let mut cone_duals = zero_duals(p);
        // The pinned-point path passes no slices: kept cones stay at zero
        // dual there (complementarity holds because z = 0).
        for (red, sl) in reduced.iter().zip(slices) {
            let mut zi = DVector::zeros(sl.len);
            for k in 0..sl.len {
                zi[k] = z_sol[sl.off + k] * c_scale / red.scale;
            }
            cone_duals[red.orig] = zi;
        }
        // Stationarity target: F^T y = Σ (g z0 + A^T z1) - c.
        let mut rhs = -p.objective.clone();
        for (cone, z) in p.cones.iter().zip(&cone_duals) {
            rhs += &cone.g * z[0];
            rhs += cone.a.transpose() * z.rows(1, z.len() - 1);
        }
        let y_ext = eq_multipliers(&rhs);
        for (idx, (cone, disp)) in p.cones.iter().zip(&dispositions).enumerate() {
            if let Disposition::Converted(off) = disp {
                let rows = cone.a.nrows();
                let mut zi = DVector::zeros(rows + 1);
                for k in 0..rows {
                    zi[k + 1] = -y_ext[*off + k];
                }
                zi[0] = zi.rows(1, rows).norm();
                cone_duals[idx] = zi;
            }
        }
        let eq_duals = y_ext.rows(0, n_orig_eq).into_owned();

        let report = kkt_recheck(p, &x, &cone_duals, &eq_duals)?;
        let kkt_residual = report.max_residual();
        let status = if kkt_residual <= opts.tol {
            SocpStatus::Optimal
        } else {
            SocpStatus::MaxIter
        };
        let message = match status {
            SocpStatus::Optimal => None,
            _ => message.or_else(|| Some("independent KKT recheck exceeded tolerance".into())),
        };
        Ok(SocpSolution {
            objective: p.objective.dot(&x),
            x,
            status,
            kkt_residual,
            iterations,
            cone_duals,
            eq_duals,
            certificate: None,
            message,
        })
    };

    // Everything pinned by equalities, or no cones left to optimize over.
    if nz == 0 || reduced.is_empty() {
        if nz > 0 && max_abs(&c_red) > 0.0 {
            return Ok(SocpSolution {
                x: x_p.clone(),
                objective: f64::NEG_INFINITY,
                status: SocpStatus::MaxIter,
                kkt_residual: f64::NAN,
                iterations: 0,
                cone_duals: zero_duals(p),
                eq_duals: DVector::zeros(n_orig_eq),
                certificate: None,
                message: Some("no cones remain; the linear objective is unbounded".into()),
            });
        }
        let worst = p
            .cones
            .iter()
            .map(|c| c.residual(&x_p))
            .fold(f64::NEG_INFINITY, f64::max);
        if worst > 1e-8 * (1.0 + x_p.norm()) {
            let certificate = point_separation_certificate(p, &x_p, &eq_multipliers);
            return Ok(SocpSolution {
                x: x_p,
                objective: f64::NAN,
                status: SocpStatus::Infeasible,
                kkt_residual: f64::NAN,
                iterations: 0,
                cone_duals: zero_duals(p),
                eq_duals: DVector::zeros(n_orig_eq),
                certificate,
                message: Some("equalities pin a point outside the cones".into()),
            });
        }
        return finish(DVector::zeros(nz), &DVector::zeros(0), &[], 0, None);
    }

    // Conic standard form s = h - G u over the null-space coordinates.
    let mut slices = Vec::with_capacity(reduced.len());
    let mut mrows = 0usize;
    for red in &reduced {
        slices.push(Slice {
            off: mrows,
            len: red.a.nrows() + 1,
        });
        mrows += red.a.nrows() + 1;
    }
    let mut g_mat = DMatrix::zeros(mrows, nz);
    let mut h_vec = DVector::zeros(mrows);
    for (red, sl) in reduced.iter().zip(&slices) {
        for c in 0..nz {
            g_mat[(sl.off, c)] = -red.g[c];
        }
        h_vec[sl.off] = red.d;
        for r in 0..red.a.nrows() {
            for c in 0..nz {
                g_mat[(sl.off + 1 + r, c)] = -red.a[(r, c)];
            }
            h_vec[sl.off + 1 + r] = red.b[r];
        }
    }

    let ipm = Ipm {
        g: &g_mat,
        h: &h_vec,
        c: &c_unit,
        slices: &slices,
    };
    let inner_tol = (opts.tol * 0.05).max(1e-12);
    let out = ipm.solve(inner_tol, opts.max_iter);

    match out.status {
        IpmStatus::Optimal | IpmStatus::MaxIter => {
            finish(out.x, &out.z, &slices, out.iterations, out.message)
        }
        IpmStatus::PrimalInfeasible => {
            // Lift the reduced Farkas ray back to the original problem.
            let mut cone_duals = zero_duals(p);
            for (ri, red) in reduced.iter().enumerate() {
                let sl = slices[ri];
                let mut zi = DVector::zeros(sl.len);
                for k in 0..sl.len {
                    zi[k] = out.z[sl.off + k] / red.scale;
                }
                cone_duals[red.orig] = zi;
            }
            let mut rhs = DVector::zeros(dim);
            for (cone, z) in p.cones.iter().zip(&cone_duals) {
                rhs += &cone.g * z[0];
                rhs += cone.a.transpose() * z.rows(1, z.len() - 1);
            }
            let y_ext = eq_multipliers(&rhs);
            let mut cert_cones = cone_duals.clone();
            for (idx, (cone, disp)) in p.cones.iter().zip(&dispositions).enumerate() {
                if let Disposition::Converted(off) = disp {
                    let rows = cone.a.nrows();
                    let mut zi = DVector::zeros(rows + 1);
                    for k in 0..rows {
                        zi[k + 1] = -y_ext[*off + k];
                    }
                    zi[0] = zi.rows(1, rows).norm();
                    cert_cones[idx] = zi;
                }
            }
            let eq_duals = y_ext.rows(0, n_orig_eq).into_owned();
            if !dual_ray_is_valid(p, &cert_cones, &eq_duals) {
                return Ok(SocpSolution {
                    x: DVector::zeros(dim),
                    objective: f64::NAN,
                    status: SocpStatus::MaxIter,
                    kkt_residual: f64::NAN,
                    iterations: out.iterations,
                    cone_duals: zero_duals(p),
                    eq_duals: DVector::zeros(n_orig_eq),
                    certificate: None,
                    message: Some(
                        "infeasibility suspected but the certificate failed validation".into(),
                    ),
                });
            }
            Ok(SocpSolution {
                x: DVector::zeros(dim),
                objective: f64::NAN,
                status: SocpStatus::Infeasible,
                kkt_residual: f64::NAN,
                iterations: out.iterations,
                cone_duals,
                eq_duals: eq_duals.clone(),
                certificate: Some(Certificate::DualRay {
                    cone_duals: cert_cones,
                    eq_duals,
                }),
                message: out.message,
            })
        }
        IpmStatus::DualInfeasible => Ok(SocpSolution {
            x: DVector::zeros(dim),
            objective: f64::NEG_INFINITY,
            status: SocpStatus::MaxIter,
            kkt_residual: f64::NAN,
            iterations: out.iterations,
            cone_duals: zero_duals(p),
            eq_duals: DVector::zeros(n_orig_eq),
            certificate: None,
            message: out
                .message
                .or_else(|| Some("objective unbounded below".into())),
        }),
    }
}

/// Farkas ray for the case where equalities pin a single point that lies
/// outside some cone: separate that cone from its slack at the point.
fn point_separation_certificate(
    p: &SocpProblem,
    x_p: &DVector<f64>,
    eq_multipliers: &dyn Fn(&DVector<f64>) -> DVector<f64>,
) -> Option<Certificate> {
    let mut worst = (f64::NEG_INFINITY, usize::MAX);
    for (i, cone) in p.cones.iter().enumerate() {
        if cone.d == f64::INFINITY {
            continue;
        }
        let r = cone.residual(x_p);
        if r > worst.0 {
            worst = (r, i);
        }
    }
    let (viol, idx) = worst;
    if !(viol > 0.0) || idx == usize::MAX {
        return None;
    }
    let cone = &p.cones[idx];
    let arm = &cone.a * x_p + &cone.b;
    let nrm = arm.norm();
    if nrm == 0.0 {
        return None;
    }
    let mut cone_duals = zero_duals(p);
    let mut zi = DVector::zeros(cone.size());
    zi[0] = 1.0;
    for k in 0..arm.len() {
        zi[k + 1] = -arm[k] / nrm;
    }
    cone_duals[idx] = zi.clone();
    let mut rhs = &cone.g * zi[0];
    rhs += cone.a.transpose() * zi.rows(1, zi.len() - 1);
    let y = eq_multipliers(&rhs);
    let eq_duals = y.rows(0, p.eq_lhs.nrows()).into_owned();
    if !dual_ray_is_valid(p, &cone_duals, &eq_duals) {
        return None;
    }
    Some(Certificate::DualRay {
        cone_duals,
        eq_duals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::SmallRng;
    use rand::{Rng, SeedableRng};

    fn vecf(v: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(v)
    }

    fn ball(center: &[f64], radius: f64) -> SocCone {
        let dim = center.len();
        SocCone::norm_bound(DMatrix::identity(dim, dim), -vecf(center), radius)
    }

    fn default_opts() -> SolverOptions {
        SolverOptions::default()
    }

    #[test]
    fn unit_ball_linear_objective() {
        let c = vecf(&[3.0, -4.0]);
        let p = SocpProblem::without_equalities(c.clone(), vec![ball(&[0.0, 0.0], 1.0)]).unwrap();
        let sol = solve(&p, &default_opts()).unwrap();
        assert_eq!(sol.status, SocpStatus::Optimal);
        // Optimum sits at -c/||c||.
        assert!((sol.x[0] - (-0.6)).abs() < 1e-8, "x0 = {}", sol.x[0]);
        assert!((sol.x[1] - 0.8).abs() < 1e-8, "x1 = {}", sol.x[1]);
        assert!((sol.objective + 5.0).abs() < 1e-8);
        assert!(sol.kkt_residual <= 1e-8);
    }

    #[test]
    fn equality_slice_of_ball() {
        // min x0 on the unit ball with x2 pinned to 0.5 by an equality and
        // x1 pinned to 0.3 by a zero-radius cone (exercises conversion).
        let c = vecf(&[1.0, 0.0, 0.0]);
        let mut pin_a = DMatrix::zeros(1, 3);
        pin_a[(0, 1)] = 1.0;
        let pin = SocCone {
            a: pin_a,
            b: vecf(&[-0.3]),
            g: DVector::zeros(3),
            d: 0.0,
        };
        let mut eq = DMatrix::zeros(1, 3);
        eq[(0, 2)] = 1.0;
        let p = SocpProblem::new(c, vec![ball(&[0.0, 0.0, 0.0], 1.0), pin], eq, vecf(&[0.5]))
            .unwrap();
        let sol = solve(&p, &default_opts()).unwrap();
        assert_eq!(sol.status, SocpStatus::Optimal);
        let expect = -(1.0f64 - 0.25 - 0.09).sqrt();
        assert!((sol.x[0] - expect).abs() < 1e-7, "x0 = {}", sol.x[0]);
        assert!((sol.x[1] - 0.3).abs() < 1e-9);
        assert!((sol.x[2] - 0.5).abs() < 1e-9);
        assert!(sol.kkt_residual <= 1e-8);
    }

    /// Coarse-to-fine grid minimizer used as an oracle.
    fn grid_oracle(p: &SocpProblem, half_width: f64, rounds: usize) -> (DVector<f64>, f64) {
        assert_eq!(p.dim, 3, "oracle written for three variables");
        let mut center = DVector::zeros(3);
        let mut hw = half_width;
        let mut best = (DVector::zeros(3), f64::INFINITY);
        for _ in 0..rounds {
            let steps = 20;
            for i in 0..=steps {
                for j in 0..=steps {
                    for k in 0..=steps {
                        let x = vecf(&[
                            center[0] - hw + 2.0 * hw * i as f64 / steps as f64,
                            center[1] - hw + 2.0 * hw * j as f64 / steps as f64,
                            center[2] - hw + 2.0 * hw * k as f64 / steps as f64,
                        ]);
                        let feasible = p.cones.iter().all(|c| c.residual(&x) <= 1e-12);
                        if feasible {
                            let obj = p.objective.dot(&x);
                            if obj < best.1 {
                                best = (x, obj);
                            }
                        }
                    }
                }
            }
            center = best.0.clone();
            hw /= 10.0;
        }
        best
    }

    #[test]
    fn matches_grid_oracle_on_random_instances() {
        let mut rng = SmallRng::seed_from_u64(7);
        for trial in 0..10 {
            // Instances built to keep the origin strictly interior and the
            // feasible set inside the oracle's search box.
            let mut cones = vec![ball(&[0.0, 0.0, 0.0], 1.4)];
            let center: Vec<f64> = (0..3).map(|_| rng.random_range(-0.35..0.35)).collect();
            cones.push(ball(&center, rng.random_range(0.9..1.3)));
            let mut g = DVector::zeros(3);
            for v in g.iter_mut() {
                *v = rng.random_range(-1.0..1.0);
            }
            cones.push(SocCone {
                a: DMatrix::zeros(0, 3),
                b: DVector::zeros(0),
                g,
                d: rng.random_range(0.6..1.2),
            });
            let mut c = DVector::zeros(3);
            for v in c.iter_mut() {
                *v = rng.random_range(-1.0..1.0);
            }
            if c.norm() < 0.1 {
                c[0] += 0.5;
            }
            let p = SocpProblem::without_equalities(c, cones).unwrap();
            let sol = solve(&p, &default_opts()).unwrap();
            assert_eq!(
                sol.status,
                SocpStatus::Optimal,
                "trial {trial}: kkt {} iters {} msg {:?}",
                sol.kkt_residual,
                sol.iterations,
                sol.message
            );

            let (_, oracle_obj) = grid_oracle(&p, 1.5, 3);
            // The grid point is feasible, so it upper-bounds the optimum;
            // the solver must sit at or below it, within grid resolution.
            assert!(
                sol.objective <= oracle_obj + 1e-6,
                "trial {trial}: solver {} worse than grid {}",
                sol.objective,
                oracle_obj
            );
            assert!(
                oracle_obj - sol.objective <= 5e-3,
                "trial {trial}: solver {} too far below grid {}",
                sol.objective,
                oracle_obj
            );
        }
    }

    #[test]
    fn solution_invariant_under_problem_scaling() {
        let c = vecf(&[0.3, -1.1, 0.4]);
        let cones = vec![ball(&[0.1, -0.2, 0.05], 1.0), ball(&[0.0, 0.0, 0.0], 1.2)];
        let p1 = SocpProblem::without_equalities(c.clone(), cones.clone()).unwrap();
        let base = solve(&p1, &default_opts()).unwrap();
        assert_eq!(base.status, SocpStatus::Optimal);

        // Scale the objective.
        let p2 = SocpProblem::without_equalities(&c * 37.0, cones.clone()).unwrap();
        let scaled_c = solve(&p2, &default_opts()).unwrap();
        assert_eq!(scaled_c.status, SocpStatus::Optimal);
        assert!((&scaled_c.x - &base.x).norm() < 1e-9);

        // Scale one cone's data (positively homogeneous description).
        let mut cones_s = cones.clone();
        cones_s[0].a *= 250.0;
        cones_s[0].b *= 250.0;
        cones_s[0].d *= 250.0;
        let p3 = SocpProblem::without_equalities(c, cones_s).unwrap();
        let scaled_k = solve(&p3, &default_opts()).unwrap();
        assert_eq!(scaled_k.status, SocpStatus::Optimal);
        assert!((&scaled_k.x - &base.x).norm() < 1e-9);
    }

    #[test]
    fn disjoint_balls_prove_infeasibility() {
        let p = SocpProblem::without_equalities(
            vecf(&[1.0, 0.0]),
            vec![ball(&[2.0, 0.0], 0.5), ball(&[-2.0, 0.0], 0.5)],
        )
        .unwrap();
        let sol = solve(&p, &default_opts()).unwrap();
        assert_eq!(sol.status, SocpStatus::Infeasible);
        match sol.certificate {
            Some(Certificate::DualRay {
                ref cone_duals,
                ref eq_duals,
            }) => {
                assert!(dual_ray_is_valid(&p, cone_duals, eq_duals));
            }
            other => panic!("expected a dual ray, got {other:?}"),
        }
    }

    #[test]
    fn zero_radius_cone_pins_to_zero_not_infeasible() {
        // ||x|| <= 0 forces x = 0; the problem stays feasible.
        let p = SocpProblem::without_equalities(
            vecf(&[1.0, -2.0]),
            vec![
                ball(&[0.0, 0.0], 1.0),
                SocCone::norm_bound(DMatrix::identity(2, 2), DVector::zeros(2), 0.0),
            ],
        )
        .unwrap();
        let sol = solve(&p, &default_opts()).unwrap();
        assert_eq!(sol.status, SocpStatus::Optimal);
        assert!(sol.x.norm() < 1e-12);
        assert!(sol.objective.abs() < 1e-12);
        assert!(sol.kkt_residual <= 1e-8);
    }

    #[test]
    fn pinned_point_outside_cone_is_infeasible_with_certificate() {
        // Equalities fix x = (2, 0); the ball has radius 1 around 0.
        let p = SocpProblem::new(
            vecf(&[1.0, 1.0]),
            vec![ball(&[0.0, 0.0], 1.0)],
            DMatrix::identity(2, 2),
            vecf(&[2.0, 0.0]),
        )
        .unwrap();
        let sol = solve(&p, &default_opts()).unwrap();
        assert_eq!(sol.status, SocpStatus::Infeasible);
        match sol.certificate {
            Some(Certificate::DualRay {
                ref cone_duals,
                ref eq_duals,
            }) => assert!(dual_ray_is_valid(&p, cone_duals, eq_duals)),
            other => panic!("expected a dual ray, got {other:?}"),
        }
    }

    #[test]
    fn inconsistent_equalities_certificate() {
        let mut eq = DMatrix::zeros(2, 2);
        eq[(0, 0)] = 1.0;
        eq[(1, 0)] = 1.0;
        let p = SocpProblem::new(
            vecf(&[1.0, 0.0]),
            vec![ball(&[0.0, 0.0], 5.0)],
            eq,
            vecf(&[0.0, 1.0]),
        )
        .unwrap();
        let sol = solve(&p, &default_opts()).unwrap();
        assert_eq!(sol.status, SocpStatus::Infeasible);
        match sol.certificate {
            Some(Certificate::InconsistentEqualities(ref y)) => {
                assert!((p.eq_lhs.transpose() * y).norm() < 1e-9);
                assert!(p.eq_rhs.dot(y) > 1e-12);
            }
            other => panic!("expected inconsistency proof, got {other:?}"),
        }
    }

    #[test]
    fn iteration_cap_is_reported_honestly() {
        let p = SocpProblem::without_equalities(
            vecf(&[0.3, -1.1, 0.4]),
            vec![ball(&[0.1, -0.2, 0.05], 1.0)],
        )
        .unwrap();
        let sol = solve(
            &p,
            &SolverOptions {
                tol: 1e-8,
                max_iter: 1,
            },
        )
        .unwrap();
        assert_eq!(sol.status, SocpStatus::MaxIter);
        assert!(sol.message.is_some());
    }

    #[test]
    fn unbounded_objective_never_reports_optimal() {
        // Nothing constrains x0 from below.
        let mut a = DMatrix::zeros(1, 2);
        a[(0, 1)] = 1.0;
        let cone = SocCone::norm_bound(a, DVector::zeros(1), 1.0);
        let p = SocpProblem::without_equalities(vecf(&[1.0, 0.0]), vec![cone])
            .unwrap()
            .assume_bounded();
        let sol = solve(&p, &default_opts()).unwrap();
        assert_eq!(sol.status, SocpStatus::MaxIter);
    }

    #[test]
    fn boundedness_check_rejects_uncertified_problems() {
        let mut a = DMatrix::zeros(1, 2);
        a[(0, 1)] = 1.0;
        let cone = SocCone::norm_bound(a, DVector::zeros(1), 1.0);
        let p = SocpProblem::without_equalities(vecf(&[1.0, 0.0]), vec![cone]).unwrap();
        let err = solve(&p, &default_opts());
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn nt_scaling_swaps_the_pair() {
        let mut rng = SmallRng::seed_from_u64(11);
        for _ in 0..20 {
            let len = 5;
            let sl = Slice { off: 0, len };
            let mut s = DVector::zeros(len);
            let mut z = DVector::zeros(len);
            for k in 1..len {
                s[k] = rng.random_range(-1.0..1.0);
                z[k] = rng.random_range(-1.0..1.0);
            }
            s[0] = s.rows(1, len - 1).norm() + rng.random_range(0.1..2.0);
            z[0] = z.rows(1, len - 1).norm() + rng.random_range(0.1..2.0);
            let blk = nt_block(&s, &z, sl).expect("interior pair");
            let lam_z = &blk.w * &z;
            let lam_s = &blk.winv * &s;
            assert!((&lam_z - &lam_s).norm() < 1e-11 * (1.0 + lam_z.norm()));
            assert!((&blk.w * &blk.winv - DMatrix::identity(len, len)).norm() < 1e-11);
            assert!((&blk.w2 - &blk.w * &blk.w).norm() < 1e-12 * (1.0 + blk.w2.norm()));
        }
    }

    #[test]
    fn step_to_boundary_matches_bisection() {
        let mut rng = SmallRng::seed_from_u64(13);
        for _ in 0..50 {
            let len = 4;
            let sl = Slice { off: 0, len };
            let mut u = DVector::zeros(len);
            let mut du = DVector::zeros(len);
            for k in 1..len {
                u[k] = rng.random_range(-1.0..1.0);
                du[k] = rng.random_range(-1.0..1.0);
            }
            u[0] = u.rows(1, len - 1).norm() + rng.random_range(0.05..1.5);
            du[0] = rng.random_range(-1.0..1.0);
            let fast = soc_max_step(&u, &du, sl);

            let inside = |t: f64| {
                let v = &u + &du * t;
                v[0] >= 0.0 && v[0] * v[0] - v.rows(1, len - 1).norm_squared() >= 0.0
            };
            let cap = 1e6;
            if fast >= cap {
                assert!(inside(cap * 0.999));
                continue;
            }
            let (mut lo, mut hi) = (0.0f64, cap);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if inside(mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            assert!(
                (fast - lo).abs() <= 1e-6 * (1.0 + lo),
                "fast {fast} vs bisected {lo}"
            );
        }
    }

    #[test]
    fn complex_embedding_roundtrip_and_modulus() {
        let emb = ComplexEmbedding::new(3);
        let v = DVector::from_row_slice(&[
            Complex64::new(0.3, -1.2),
            Complex64::new(-0.7, 0.4),
            Complex64::new(2.0, 0.0),
        ]);
        let x = emb.embed(&v);
        assert_eq!(x.len(), 6);
        let back = emb.lift(&x);
        for k in 0..3 {
            assert_eq!(back[k], v[k]);
        }

        let a = DVector::from_row_slice(&[
            Complex64::new(1.0, 0.5),
            Complex64::new(-0.2, 0.9),
            Complex64::new(0.0, -1.1),
        ]);
        let rows = emb.modulus_rows(&a);
        let pair = &rows * &x;
        let inner: Complex64 = a.dotc(&v);
        assert!((pair[0] - inner.re).abs() < 1e-15);
        assert!((pair[1] - inner.im).abs() < 1e-15);
        assert!((pair.norm() - inner.norm()).abs() < 1e-14);
    }

    #[test]
    fn matrix_rows_preserve_complex_norms() {
        let mut rng = SmallRng::seed_from_u64(17);
        for _ in 0..20 {
            let k = 4;
            let m = 3;
            let emb = ComplexEmbedding::new(m);
            let b = DMatrix::from_fn(k, m, |_, _| {
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            });
            let v = DVector::from_fn(m, |_, _| {
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            });
            let rows = emb.matrix_rows(&b);
            let real_prod = &rows * emb.embed(&v);
            let complex_prod = &b * &v;
            assert!((real_prod.norm() - complex_prod.norm()).abs() < 1e-12);
            for r in 0..k {
                assert!((real_prod[r] - complex_prod[r].re).abs() < 1e-12);
                assert!((real_prod[k + r] - complex_prod[r].im).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn quad_cone_boundary_identity() {
        // ||x||² = t on the boundary: x = (0.6, 0), t = 0.36.
        let emb_b = DMatrix::identity(2, 3);
        let cone = quad_leq_linear_cone(&emb_b, 2, 3).unwrap();
        let x = vecf(&[0.6, 0.0, 0.36]);
        let arm = &cone.a * &x + &cone.b;
        assert!((arm.norm() - 1.36).abs() < 1e-12);
        assert!((cone.g.dot(&x) + cone.d - 1.36).abs() < 1e-12);
        assert!(cone.residual(&x).abs() < 1e-12);
    }

    #[test]
    fn quad_cone_membership_matches_inequality() {
        let mut rng = SmallRng::seed_from_u64(19);
        let b = DMatrix::from_fn(
            2,
            3,
            |r, c| if c < 2 { ((r + c) % 2) as f64 + 0.5 } else { 0.0 },
        );
        let cone = quad_leq_linear_cone(&b, 2, 3).unwrap();
        for _ in 0..100 {
            let x = vecf(&[
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-0.5..2.0),
            ]);
            let quad = (&b * &x).norm_squared();
            let holds = quad <= x[2] && x[2] >= 0.0;
            let in_cone = cone.residual(&x) <= 1e-12;
            if (quad - x[2]).abs() > 1e-9 {
                assert_eq!(holds, in_cone, "x = {x:?} quad = {quad}");
            }
        }
    }

    #[test]
    fn dropped_cones_do_not_constrain() {
        let mut relaxed = ball(&[0.0, 0.0], 0.1);
        relaxed.d = f64::INFINITY;
        let p = SocpProblem::without_equalities(
            vecf(&[1.0, 0.0]),
            vec![ball(&[0.0, 0.0], 1.0), relaxed],
        )
        .unwrap();
        let sol = solve(&p, &default_opts()).unwrap();
        assert_eq!(sol.status, SocpStatus::Optimal);
        assert!((sol.x[0] + 1.0).abs() < 1e-7);
    }

    #[test]
    fn rejects_malformed_problems() {
        let bad_cone = SocCone {
            a: DMatrix::zeros(2, 3),
            b: DVector::zeros(2),
            g: DVector::zeros(3),
            d: 1.0,
        };
        assert!(SocpProblem::without_equalities(vecf(&[1.0, 0.0]), vec![bad_cone]).is_err());

        let nan_obj = vecf(&[f64::NAN, 0.0]);
        assert!(SocpProblem::without_equalities(nan_obj, vec![]).is_err());

        assert!(SocpProblem::new(
            vecf(&[1.0]),
            vec![],
            DMatrix::zeros(2, 1),
            DVector::zeros(1),
        )
        .is_err());
    }
}
