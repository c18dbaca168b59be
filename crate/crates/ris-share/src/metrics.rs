//! Figures of merit: SU signal-to-interference ratio and rate, per-network
//! interference at the PUs, and feasibility bookkeeping.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::scenario::{ChannelSet, ProblemData, ReflectVector};

/// Relative slack applied to every feasibility comparison.
pub const FEAS_REL_TOL: f64 = 1e-9;

/// Denominators below this are treated as degenerate zero interference.
pub const DEGENERATE_DENOM: f64 = 1e-30;

/// S-AP transmit beamforming vector.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamVector {
    pub v: DVector<Complex64>,
}

impl BeamVector {
    pub fn new(v: DVector<Complex64>) -> Self {
        BeamVector { v }
    }

    pub fn zeros(m: usize) -> Self {
        BeamVector {
            v: DVector::zeros(m),
        }
    }

    pub fn m_antennas(&self) -> usize {
        self.v.len()
    }

    /// Transmit power ||v||².
    pub fn power(&self) -> f64 {
        self.v.norm_squared()
    }
}

/// SU signal-to-interference ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sir {
    pub value: f64,
    /// True when the interference denominator vanished and `value` is the
    /// +inf sentinel. This is a legitimate configuration (the cascaded
    /// interference of all networks can cancel), not an error.
    pub degenerate: bool,
}

/// Everything a trial reports about one (θ̂, v) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkReport {
    pub sir: f64,
    pub rate_bpshz: f64,
    pub interference_w: Vec<f64>,
    pub feasible: Vec<bool>,
    pub degenerate_interference: bool,
}

impl LinkReport {
    pub fn all_feasible(&self) -> bool {
        self.feasible.iter().all(|&f| f)
    }
}

/// Achievable rate log2(1 + sir) in bits/s/Hz.
pub fn rate_bpshz(sir: f64) -> f64 {
    (1.0 + sir).log2()
}

fn signal_power(pd: &ProblemData, theta: &ReflectVector, v: &BeamVector) -> f64 {
    let w = &pd.h_hat_s * &v.v;
    theta.theta_hat().dotc(&w).norm_sqr()
}

fn interference_quad(pd: &ProblemData, theta: &ReflectVector) -> f64 {
    // θ̂^H Phi θ̂ through the factor: ||phi_factor·θ̂||² keeps the quadratic
    // form nonnegative even at rounding level.
    (&pd.phi_factor * theta.theta_hat()).norm_squared()
}

/// SU SIR for a surface configuration and beamformer, with noise dropped:
/// |θ̂^H Ĥ_s v|² / θ̂^H Phi_sum θ̂.
pub fn su_sir(pd: &ProblemData, theta: &ReflectVector, v: &BeamVector) -> Sir {
    let num = signal_power(pd, theta, v);
    let den = interference_quad(pd, theta);
    if den < DEGENERATE_DENOM {
        Sir {
            value: f64::INFINITY,
            degenerate: true,
        }
    } else {
        Sir {
            value: num / den,
            degenerate: false,
        }
    }
}

/// Diagnostic variant with the SU noise floor added to the denominator.
pub fn su_sinr(pd: &ProblemData, theta: &ReflectVector, v: &BeamVector, noise_w: f64) -> f64 {
    signal_power(pd, theta, v) / (interference_quad(pd, theta) + noise_w)
}

/// Interference delivered to each PU by the S-AP: Γ_j = |θ̂^H Ĥ_sj v|².
pub fn pn_interference(pd: &ProblemData, theta: &ReflectVector, v: &BeamVector) -> Vec<f64> {
    pd.h_hat_sj
        .iter()
        .map(|h| theta.theta_hat().dotc(&(h * &v.v)).norm_sqr())
        .collect()
}

/// Full per-link report against linear-scale thresholds.
pub fn link_report(
    pd: &ProblemData,
    theta: &ReflectVector,
    v: &BeamVector,
    gamma_bar_w: &[f64],
) -> Result<LinkReport> {
    if gamma_bar_w.len() != pd.j_pns() {
        return Err(Error::Dimension(format!(
            "need {} thresholds, got {}",
            pd.j_pns(),
            gamma_bar_w.len()
        )));
    }
    let sir = su_sir(pd, theta, v);
    let interference_w = pn_interference(pd, theta, v);
    let feasible = interference_w
        .iter()
        .zip(gamma_bar_w)
        .map(|(&g, &bar)| g <= bar * (1.0 + FEAS_REL_TOL))
        .collect();
    Ok(LinkReport {
        sir: sir.value,
        rate_bpshz: rate_bpshz(sir.value),
        interference_w,
        feasible,
        degenerate_interference: sir.degenerate,
    })
}

/// Signal-to-interference-plus-noise ratio at PU `j`, diagnostic only:
/// P_j·|h_rj^H Θ h_pj_r + h_j|² / (Γ_j + σ²). The per-PU noise power is an
/// explicit argument because no default is defined anywhere else.
pub fn pu_sinr(
    channels: &ChannelSet,
    theta: &ReflectVector,
    v: &BeamVector,
    j: usize,
    p_j_w: f64,
    sigma_zj_w: f64,
) -> Result<f64> {
    if j >= channels.j_pns() {
        return Err(Error::Dimension(format!(
            "network index {j} out of range ({} networks)",
            channels.j_pns()
        )));
    }
    let n = channels.n_elements();
    if theta.n_elements() != n || v.m_antennas() != channels.m_antennas() {
        return Err(Error::Dimension(
            "surface or beam dimensions disagree with the channel set".into(),
        ));
    }
    let phys = theta.physical_theta();

    let mut desired = channels.h_j[j];
    for idx in 0..n {
        desired += channels.h_rj[j][idx].conj() * phys[idx] * channels.h_pj_r[j][idx];
    }

    // Interference from the S-AP, through the surface and directly.
    let m = channels.m_antennas();
    let mut leak = Complex64::new(0.0, 0.0);
    for c in 0..m {
        let mut eff = channels.h_sj[j][c].conj();
        for idx in 0..n {
            eff += channels.h_rj[j][idx].conj() * phys[idx] * channels.h_sr[(idx, c)];
        }
        leak += eff * v.v[c];
    }
    let gamma = leak.norm_sqr();

    Ok(p_j_w * desired.norm_sqr() / (gamma + sigma_zj_w))
}

/// SIR of the surface-off system straight from the raw channels:
/// |h_s^H v|² / Σ_j P_j |h_pj_b|².
pub fn direct_only_sir(channels: &ChannelSet, p_pap_w: &[f64], v: &BeamVector) -> f64 {
    let num = channels.h_s.dotc(&v.v).norm_sqr();
    let den: f64 = channels
        .h_pj_b
        .iter()
        .zip(p_pap_w)
        .map(|(h, &p)| p * h.norm_sqr())
        .sum();
    num / den
}
