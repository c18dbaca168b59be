//! Scenario configuration, random channel realizations, and the lifted
//! problem matrices shared by every optimizer in the crate.
//!
//! The layout: a secondary access point (S-AP) with `m_antennas` transmit
//! antennas serves a single secondary user (SU) in spectrum licensed to
//! `j_pns` primary networks, each a primary access point (P-AP) serving one
//! primary user (PU). A reconfigurable intelligent surface with
//! `n_elements` passive elements assists the secondary link. Direct links
//! are Rayleigh; every link that touches the surface is Rician.
//!
//! All dB/dBm quantities are converted to linear scale once, at assembly;
//! everything downstream works in linear watts.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Converts a power in dBm to linear watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Converts a gain/loss in dB to a linear power ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Link class for the distance-based path loss formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathLossModel {
    /// Transmitter to receiver without surface assistance.
    Direct,
    /// One segment of a surface-cascaded link.
    Cascade,
}

/// Path loss in dB at `distance_m` meters.
///
/// Direct links lose `32.6 + 36.7·log10(d)` dB; surface-assisted segments
/// lose `35.6 + 22.0·log10(d)` dB.
pub fn path_loss_db(model: PathLossModel, distance_m: f64) -> Result<f64> {
    if !(distance_m > 0.0) {
        return Err(Error::Domain(format!(
            "path loss needs a positive distance, got {distance_m}"
        )));
    }
    let d = distance_m.log10();
    Ok(match model {
        PathLossModel::Direct => 32.6 + 36.7 * d,
        PathLossModel::Cascade => 35.6 + 22.0 * d,
    })
}

/// Full physical and quantization configuration for one simulated system.
///
/// Deserializes from JSON with exactly these field names; unknown keys are
/// rejected so that config typos fail loudly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    /// Number of primary networks J.
    pub j_pns: usize,
    /// S-AP antenna count M.
    pub m_antennas: usize,
    /// Surface element count N.
    pub n_elements: usize,
    /// S-AP transmit power budget, dBm.
    pub p_max_dbm: f64,
    /// Per-P-AP transmit power, dBm, one entry per primary network.
    pub p_pap_dbm: Vec<f64>,
    /// Per-PN interference threshold at the PU, dBm.
    pub gamma_bar_dbm: Vec<f64>,
    /// SU noise floor, dBm. Diagnostic only; the optimizers work with the
    /// interference-limited ratio and never read this.
    pub noise_power_dbm: f64,
    /// Total path loss applied to direct links, dB.
    pub direct_pl_db: f64,
    /// Total path loss applied to the cascaded (two-segment) links, dB.
    pub cascade_pl_db: f64,
    /// Rician K-factor of surface-side links, dB. `f64::INFINITY` means
    /// pure line of sight.
    pub rician_k_db: f64,
    /// Phase quantization bits b; the codebook has 2^b levels.
    pub codebook_bits: u32,
    /// Base seed for channel generation.
    pub rng_seed: u64,
}

impl Default for Scenario {
    /// Baseline operating point used throughout the examples: two primary
    /// networks, four antennas, 32 elements, 10 dBm budgets, -115 dBm
    /// interference threshold, 106/123 dB direct/cascade losses.
    fn default() -> Self {
        Scenario {
            j_pns: 2,
            m_antennas: 4,
            n_elements: 32,
            p_max_dbm: 10.0,
            p_pap_dbm: vec![10.0, 10.0],
            gamma_bar_dbm: vec![-115.0, -115.0],
            noise_power_dbm: -110.0,
            direct_pl_db: 106.0,
            cascade_pl_db: 123.0,
            rician_k_db: 10.0,
            codebook_bits: 2,
            rng_seed: 1,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.j_pns < 1 || self.m_antennas < 1 || self.n_elements < 1 {
            return Err(Error::Config(
                "j_pns, m_antennas and n_elements must all be at least 1".into(),
            ));
        }
        if self.codebook_bits < 1 {
            return Err(Error::Config(
                "codebook_bits must be at least 1 (two phase levels)".into(),
            ));
        }
        if self.p_pap_dbm.len() != self.j_pns || self.gamma_bar_dbm.len() != self.j_pns {
            return Err(Error::Config(format!(
                "p_pap_dbm and gamma_bar_dbm must each have j_pns = {} entries, got {} and {}",
                self.j_pns,
                self.p_pap_dbm.len(),
                self.gamma_bar_dbm.len()
            )));
        }
        let scalars = [
            self.p_max_dbm,
            self.noise_power_dbm,
            self.direct_pl_db,
            self.cascade_pl_db,
        ];
        if scalars.iter().any(|x| !x.is_finite())
            || self.p_pap_dbm.iter().any(|x| !x.is_finite())
            || self.gamma_bar_dbm.iter().any(|x| !x.is_finite())
        {
            return Err(Error::Config(
                "power, threshold and path-loss fields must be finite".into(),
            ));
        }
        if self.rician_k_db.is_nan() || self.rician_k_db == f64::NEG_INFINITY {
            return Err(Error::Config(
                "rician_k_db must be a number or +inf (pure line of sight)".into(),
            ));
        }
        Ok(())
    }

    /// Parses and validates a scenario from JSON text.
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn p_max_w(&self) -> f64 {
        dbm_to_watts(self.p_max_dbm)
    }

    pub fn p_pap_w(&self) -> Vec<f64> {
        self.p_pap_dbm.iter().map(|&p| dbm_to_watts(p)).collect()
    }

    pub fn gamma_bar_w(&self) -> Vec<f64> {
        self.gamma_bar_dbm.iter().map(|&g| dbm_to_watts(g)).collect()
    }

    pub fn noise_w(&self) -> f64 {
        dbm_to_watts(self.noise_power_dbm)
    }

    pub fn codebook_levels(&self) -> usize {
        1usize << self.codebook_bits
    }

    /// Copy with a different power budget.
    pub fn with_p_max_dbm(&self, p: f64) -> Result<Self> {
        let mut s = self.clone();
        s.p_max_dbm = p;
        s.validate()?;
        Ok(s)
    }

    /// Copy with `j` primary networks; the per-PN vectors are truncated or
    /// padded with their last entry.
    pub fn with_j_pns(&self, j: usize) -> Result<Self> {
        if j < 1 {
            return Err(Error::Config("need at least one primary network".into()));
        }
        let mut s = self.clone();
        let pad = |v: &[f64]| -> Vec<f64> {
            let last = *v.last().expect("validated scenario has nonempty vectors");
            let mut out = v.to_vec();
            out.resize(j, last);
            out
        };
        s.p_pap_dbm = pad(&self.p_pap_dbm);
        s.gamma_bar_dbm = pad(&self.gamma_bar_dbm);
        s.j_pns = j;
        s.validate()?;
        Ok(s)
    }

    /// Copy with every interference threshold set to `g` dBm.
    pub fn with_gamma_bar_dbm(&self, g: f64) -> Result<Self> {
        let mut s = self.clone();
        s.gamma_bar_dbm = vec![g; s.j_pns];
        s.validate()?;
        Ok(s)
    }

    /// Copy with a different surface size.
    pub fn with_n_elements(&self, n: usize) -> Result<Self> {
        let mut s = self.clone();
        s.n_elements = n;
        s.validate()?;
        Ok(s)
    }
}

/// Sines of the arrival/departure angles that fix the line-of-sight phase
/// ramps of every surface-side link. Sampled uniformly on [-1, 1] unless a
/// caller pins them for a deterministic geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct LosAngles {
    /// Arrival at the surface from the S-AP.
    pub sap_to_ris: f64,
    /// Departure at the S-AP toward the surface.
    pub sap_out: f64,
    /// Departure at the surface toward the SU.
    pub ris_to_su: f64,
    /// Arrival at the surface from each P-AP.
    pub pap_to_ris: Vec<f64>,
    /// Departure at the surface toward each PU.
    pub ris_to_pu: Vec<f64>,
}

/// One draw of every channel in the system.
///
/// Direct links: `h_j` (P-AP_j to its PU), `h_pj_b` (P-AP_j to the SU),
/// `h_s` (S-AP to SU), `h_sj` (S-AP to PU_j). Surface-side links: `h_pj_r`
/// (P-AP_j to surface), `h_sr` (S-AP to surface), `h_rj` (surface to PU_j),
/// `h_rb` (surface to SU).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub h_j: Vec<Complex64>,
    pub h_pj_b: Vec<Complex64>,
    pub h_s: DVector<Complex64>,
    pub h_sj: Vec<DVector<Complex64>>,
    pub h_pj_r: Vec<DVector<Complex64>>,
    pub h_sr: DMatrix<Complex64>,
    pub h_rj: Vec<DVector<Complex64>>,
    pub h_rb: DVector<Complex64>,
}

impl ChannelSet {
    pub fn n_elements(&self) -> usize {
        self.h_rb.len()
    }

    pub fn m_antennas(&self) -> usize {
        self.h_s.len()
    }

    pub fn j_pns(&self) -> usize {
        self.h_j.len()
    }
}

fn draw_cn01(rng: &mut impl Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Half-wavelength uniform-linear-array steering vector; `sin_angle` is the
/// sine of the angle off broadside.
pub fn steering(len: usize, sin_angle: f64) -> DVector<Complex64> {
    DVector::from_fn(len, |n, _| {
        Complex64::from_polar(1.0, std::f64::consts::PI * n as f64 * sin_angle)
    })
}

struct RicianWeights {
    los: f64,
    nlos: f64,
}

fn rician_weights(k_db: f64) -> RicianWeights {
    if k_db == f64::INFINITY {
        return RicianWeights { los: 1.0, nlos: 0.0 };
    }
    let k = db_to_linear(k_db);
    RicianWeights {
        los: (k / (1.0 + k)).sqrt(),
        nlos: (1.0 / (1.0 + k)).sqrt(),
    }
}

fn rician_vector(
    rng: &mut impl Rng,
    len: usize,
    sin_angle: f64,
    amp_scale: f64,
    w: &RicianWeights,
) -> DVector<Complex64> {
    let los = steering(len, sin_angle);
    DVector::from_iterator(
        len,
        (0..len).map(|n| amp_scale * (w.los * los[n] + w.nlos * draw_cn01(rng))),
    )
}

fn rayleigh_vector(rng: &mut impl Rng, len: usize, amp_scale: f64) -> DVector<Complex64> {
    DVector::from_iterator(len, (0..len).map(|_| amp_scale * draw_cn01(rng)))
}

/// Draws a full channel realization, sampling the line-of-sight angles from
/// `rng` as well.
///
/// Draw order is fixed: the secondary-side links first, then one complete
/// block per primary network. Growing `j_pns` therefore extends the
/// realization without disturbing the earlier networks' channels, which is
/// what keeps sweeps over the PN count paired.
pub fn generate_channels(scenario: &Scenario, rng: &mut impl Rng) -> Result<ChannelSet> {
    scenario.validate()?;
    let n = scenario.n_elements;
    let m = scenario.m_antennas;
    let j = scenario.j_pns;

    // Amplitude scales: direct links carry the whole direct loss; each
    // cascaded link gets half the total cascade loss in dB, so the product
    // link comes out at the configured total.
    let direct_amp = 10f64.powf(-scenario.direct_pl_db / 20.0);
    let segment_amp = 10f64.powf(-scenario.cascade_pl_db / 40.0);
    let w = rician_weights(scenario.rician_k_db);

    let sap_to_ris: f64 = rng.random_range(-1.0..=1.0);
    let sap_out: f64 = rng.random_range(-1.0..=1.0);
    let ris_to_su: f64 = rng.random_range(-1.0..=1.0);

    let h_s = rayleigh_vector(rng, m, direct_amp);
    let h_sr = {
        let rx = steering(n, sap_to_ris);
        let tx = steering(m, sap_out);
        let mut out = DMatrix::zeros(n, m);
        for r in 0..n {
            for c in 0..m {
                out[(r, c)] =
                    segment_amp * (w.los * rx[r] * tx[c].conj() + w.nlos * draw_cn01(rng));
            }
        }
        out
    };
    let h_rb = rician_vector(rng, n, ris_to_su, segment_amp, &w);

    let mut h_j = Vec::with_capacity(j);
    let mut h_pj_b = Vec::with_capacity(j);
    let mut h_sj = Vec::with_capacity(j);
    let mut h_pj_r = Vec::with_capacity(j);
    let mut h_rj = Vec::with_capacity(j);
    for _ in 0..j {
        let pap_to_ris: f64 = rng.random_range(-1.0..=1.0);
        let ris_to_pu: f64 = rng.random_range(-1.0..=1.0);
        h_j.push(direct_amp * draw_cn01(rng));
        h_pj_b.push(direct_amp * draw_cn01(rng));
        h_sj.push(rayleigh_vector(rng, m, direct_amp));
        h_pj_r.push(rician_vector(rng, n, pap_to_ris, segment_amp, &w));
        h_rj.push(rician_vector(rng, n, ris_to_pu, segment_amp, &w));
    }

    Ok(ChannelSet {
        h_j,
        h_pj_b,
        h_s,
        h_sj,
        h_pj_r,
        h_sr,
        h_rj,
        h_rb,
    })
}

/// Like [`generate_channels`] but with the line-of-sight geometry pinned by
/// the caller instead of sampled. Small-scale fading is still drawn from
/// `rng`.
pub fn generate_channels_with_angles(
    scenario: &Scenario,
    rng: &mut impl Rng,
    angles: &LosAngles,
) -> Result<ChannelSet> {
    scenario.validate()?;
    let n = scenario.n_elements;
    let m = scenario.m_antennas;
    let j = scenario.j_pns;
    if angles.pap_to_ris.len() != j || angles.ris_to_pu.len() != j {
        return Err(Error::Dimension(format!(
            "angle vectors must have one entry per primary network ({j})"
        )));
    }

    let direct_amp = 10f64.powf(-scenario.direct_pl_db / 20.0);
    let segment_amp = 10f64.powf(-scenario.cascade_pl_db / 40.0);
    let w = rician_weights(scenario.rician_k_db);

    let h_s = rayleigh_vector(rng, m, direct_amp);
    let h_sr = {
        let rx = steering(n, angles.sap_to_ris);
        let tx = steering(m, angles.sap_out);
        let mut out = DMatrix::zeros(n, m);
        for r in 0..n {
            for c in 0..m {
                out[(r, c)] =
                    segment_amp * (w.los * rx[r] * tx[c].conj() + w.nlos * draw_cn01(rng));
            }
        }
        out
    };
    let h_rb = rician_vector(rng, n, angles.ris_to_su, segment_amp, &w);

    let mut h_j = Vec::with_capacity(j);
    let mut h_pj_b = Vec::with_capacity(j);
    let mut h_sj = Vec::with_capacity(j);
    let mut h_pj_r = Vec::with_capacity(j);
    let mut h_rj = Vec::with_capacity(j);
    for idx in 0..j {
        h_j.push(direct_amp * draw_cn01(rng));
        h_pj_b.push(direct_amp * draw_cn01(rng));
        h_sj.push(rayleigh_vector(rng, m, direct_amp));
        h_pj_r.push(rician_vector(rng, n, angles.pap_to_ris[idx], segment_amp, &w));
        h_rj.push(rician_vector(rng, n, angles.ris_to_pu[idx], segment_amp, &w));
    }

    Ok(ChannelSet {
        h_j,
        h_pj_b,
        h_s,
        h_sj,
        h_pj_r,
        h_sr,
        h_rj,
        h_rb,
    })
}

/// Surface reflecting coefficients in lifted form: the stored vector has
/// N+1 entries, the last pinned to exactly 1.
///
/// Storage convention: the stored entries are the *conjugates* of the
/// physical element coefficients, so that `theta_hat^H * H_hat_s` equals
/// the effective channel `h_rb^H Θ H_sr + h_s^H` with `Θ = diag(θ)`. The
/// constraint set and every codebook used here are closed under
/// conjugation, so optimizing the stored vector is equivalent to optimizing
/// the physical one; only `physical_theta` un-conjugates.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectVector {
    theta_hat: DVector<Complex64>,
}

/// Slack allowed on the unit-modulus bound when accepting a vector.
pub const AMPLITUDE_TOL: f64 = 1e-9;

impl ReflectVector {
    /// Wraps a full lifted vector. The last entry must be exactly 1+0i and
    /// every other entry must satisfy |θ̂_n| ≤ 1 + 1e-9.
    pub fn new(theta_hat: DVector<Complex64>) -> Result<Self> {
        if theta_hat.is_empty() {
            return Err(Error::Dimension("lifted vector cannot be empty".into()));
        }
        let last = theta_hat[theta_hat.len() - 1];
        if last != Complex64::new(1.0, 0.0) {
            return Err(Error::Domain(format!(
                "last lifted entry must be exactly 1, got {last}"
            )));
        }
        for n in 0..theta_hat.len() - 1 {
            let a = theta_hat[n].norm();
            if !(a <= 1.0 + AMPLITUDE_TOL) {
                return Err(Error::Domain(format!(
                    "element {n} has amplitude {a} > 1"
                )));
            }
        }
        Ok(ReflectVector { theta_hat })
    }

    /// Builds the lifted vector from the N element coefficients, appending
    /// the unit augmentation.
    pub fn from_elements(theta: &[Complex64]) -> Result<Self> {
        let mut v = DVector::zeros(theta.len() + 1);
        for (n, &t) in theta.iter().enumerate() {
            v[n] = t;
        }
        v[theta.len()] = Complex64::new(1.0, 0.0);
        ReflectVector::new(v)
    }

    /// All-off surface: zero amplitudes, signal reaches the SU directly only.
    pub fn off(n_elements: usize) -> Self {
        let mut v = DVector::zeros(n_elements + 1);
        v[n_elements] = Complex64::new(1.0, 0.0);
        ReflectVector { theta_hat: v }
    }

    /// Random phases at a common amplitude; `amplitude` must lie in [0, 1].
    pub fn random_phases(n_elements: usize, amplitude: f64, rng: &mut impl Rng) -> Result<Self> {
        if !(0.0..=1.0).contains(&amplitude) {
            return Err(Error::Domain(format!(
                "amplitude must be in [0,1], got {amplitude}"
            )));
        }
        let theta: Vec<Complex64> = (0..n_elements)
            .map(|_| {
                Complex64::from_polar(amplitude, rng.random_range(0.0..std::f64::consts::TAU))
            })
            .collect();
        ReflectVector::from_elements(&theta)
    }

    pub fn theta_hat(&self) -> &DVector<Complex64> {
        &self.theta_hat
    }

    pub fn n_elements(&self) -> usize {
        self.theta_hat.len() - 1
    }

    /// The N element coefficients as stored (conjugate convention).
    pub fn elements(&self) -> DVector<Complex64> {
        self.theta_hat.rows(0, self.n_elements()).into_owned()
    }

    /// The physical reflecting coefficients β_n·e^{iφ_n}.
    pub fn physical_theta(&self) -> DVector<Complex64> {
        self.elements().map(|t| t.conj())
    }

    pub fn max_amplitude(&self) -> f64 {
        (0..self.n_elements())
            .map(|n| self.theta_hat[n].norm())
            .fold(0.0, f64::max)
    }
}

/// The lifted matrices every optimizer consumes.
///
/// `h_hat_s` stacks `diag(h_rb^H)·H_sr` over `h_s^H`; `h_hat_sj` does the
/// same per primary network with `h_rj`/`h_sj`; `h_tilde_jrb` stacks
/// `diag(h_rb^H)·h_pj_r` over the scalar `h_pj_b`. `phi_sum` is the
/// power-weighted interference Gram matrix Σ_j P_j·h̃_j h̃_j^H, and
/// `phi_factor` is the J×(N+1) factor whose rows are √P_j·h̃_j^H, so
/// `phi_sum = phi_factor^H·phi_factor` without ever factorizing.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemData {
    pub h_hat_s: DMatrix<Complex64>,
    pub h_hat_sj: Vec<DMatrix<Complex64>>,
    pub h_tilde_jrb: Vec<DVector<Complex64>>,
    pub phi_sum: DMatrix<Complex64>,
    pub phi_factor: DMatrix<Complex64>,
    pub p_pap_w: Vec<f64>,
}

impl ProblemData {
    /// Assembles the derived matrices from the lifted blocks. `p_pap_w` are
    /// linear-scale P-AP powers, one per network.
    pub fn new(
        h_hat_s: DMatrix<Complex64>,
        h_hat_sj: Vec<DMatrix<Complex64>>,
        h_tilde_jrb: Vec<DVector<Complex64>>,
        p_pap_w: Vec<f64>,
    ) -> Result<Self> {
        let rows = h_hat_s.nrows();
        let m = h_hat_s.ncols();
        if rows < 2 {
            return Err(Error::Dimension(
                "lifted channel needs at least one surface row plus the direct row".into(),
            ));
        }
        let j = h_tilde_jrb.len();
        if h_hat_sj.len() != j || p_pap_w.len() != j {
            return Err(Error::Dimension(format!(
                "per-network blocks disagree: {} interference channels, {} cascades, {} powers",
                h_hat_sj.len(),
                j,
                p_pap_w.len()
            )));
        }
        for hj in &h_hat_sj {
            if hj.nrows() != rows || hj.ncols() != m {
                return Err(Error::Dimension(format!(
                    "interference channel must be {rows}x{m}, got {}x{}",
                    hj.nrows(),
                    hj.ncols()
                )));
            }
        }
        for ht in &h_tilde_jrb {
            if ht.len() != rows {
                return Err(Error::Dimension(format!(
                    "cascade vector must have {rows} entries, got {}",
                    ht.len()
                )));
            }
        }
        if p_pap_w.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::Domain("P-AP powers must be finite and >= 0".into()));
        }

        let mut phi_factor = DMatrix::zeros(j, rows);
        for (idx, ht) in h_tilde_jrb.iter().enumerate() {
            let scale = p_pap_w[idx].sqrt();
            for col in 0..rows {
                phi_factor[(idx, col)] = scale * ht[col].conj();
            }
        }
        // Fill the upper triangle and mirror so the result is Hermitian to
        // the bit, not just to rounding.
        let mut phi_sum = DMatrix::zeros(rows, rows);
        for r in 0..rows {
            for c in r..rows {
                let mut acc = Complex64::new(0.0, 0.0);
                for idx in 0..j {
                    acc += phi_factor[(idx, r)].conj() * phi_factor[(idx, c)];
                }
                phi_sum[(r, c)] = acc;
                if r == c {
                    phi_sum[(r, c)].im = 0.0;
                } else {
                    phi_sum[(c, r)] = acc.conj();
                }
            }
        }

        Ok(ProblemData {
            h_hat_s,
            h_hat_sj,
            h_tilde_jrb,
            phi_sum,
            phi_factor,
            p_pap_w,
        })
    }

    pub fn n_elements(&self) -> usize {
        self.h_hat_s.nrows() - 1
    }

    pub fn m_antennas(&self) -> usize {
        self.h_hat_s.ncols()
    }

    pub fn j_pns(&self) -> usize {
        self.h_tilde_jrb.len()
    }

    /// Effective S-AP→SU channel seen through the surface configuration:
    /// `a = H_hat_s^H·θ̂`, so the received amplitude is `a^H v`.
    pub fn effective_channel(&self, theta: &ReflectVector) -> DVector<Complex64> {
        self.h_hat_s.adjoint() * theta.theta_hat()
    }

    /// Per-network effective interference channels `H_hat_sj^H·θ̂`.
    pub fn interference_channels(&self, theta: &ReflectVector) -> Vec<DVector<Complex64>> {
        self.h_hat_sj
            .iter()
            .map(|h| h.adjoint() * theta.theta_hat())
            .collect()
    }
}

/// Builds [`ProblemData`] from a channel realization.
pub fn assemble_problem(scenario: &Scenario, channels: &ChannelSet) -> Result<ProblemData> {
    scenario.validate()?;
    let n = scenario.n_elements;
    let m = scenario.m_antennas;
    let j = scenario.j_pns;
    if channels.n_elements() != n || channels.m_antennas() != m || channels.j_pns() != j {
        return Err(Error::Dimension(format!(
            "channel set is ({}, {}, {}) but scenario wants (N={n}, M={m}, J={j})",
            channels.n_elements(),
            channels.m_antennas(),
            channels.j_pns()
        )));
    }
    if channels.h_sj.len() != j || channels.h_pj_r.len() != j || channels.h_rj.len() != j
        || channels.h_pj_b.len() != j
    {
        return Err(Error::Dimension("per-network channel lists disagree".into()));
    }

    let lift = |ris_rx: &DVector<Complex64>, direct: &DVector<Complex64>| {
        let mut out = DMatrix::zeros(n + 1, m);
        for r in 0..n {
            for c in 0..m {
                out[(r, c)] = ris_rx[r].conj() * channels.h_sr[(r, c)];
            }
        }
        for c in 0..m {
            out[(n, c)] = direct[c].conj();
        }
        out
    };

    let h_hat_s = lift(&channels.h_rb, &channels.h_s);
    let h_hat_sj: Vec<_> = (0..j)
        .map(|idx| lift(&channels.h_rj[idx], &channels.h_sj[idx]))
        .collect();
    let h_tilde_jrb: Vec<_> = (0..j)
        .map(|idx| {
            let mut v = DVector::zeros(n + 1);
            for r in 0..n {
                v[r] = channels.h_rb[r].conj() * channels.h_pj_r[idx][r];
            }
            v[n] = channels.h_pj_b[idx];
            v
        })
        .collect();

    ProblemData::new(h_hat_s, h_hat_sj, h_tilde_jrb, scenario.p_pap_w())
}
