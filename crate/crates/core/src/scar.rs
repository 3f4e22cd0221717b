//! Periodic-orbit modes and right/left scar functions.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::coherent::{coherent_state, inner, norm, normalize};
use crate::error::{Error, Result};
use crate::orbits::{OrbitGeometry, SymbolicOrbit};
use crate::quantum::OperatorMatrix;
use crate::spectral::DEFECT_TOL;

/// How the accumulated action `θ_j` attached to orbit point `j` is summed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThetaConvention {
    /// `θ_j = Σ_{l<j} S_l`: the phase collected before arriving at point `j`.
    BeforeArrival,
    /// `θ_j = Σ_{l≤j} S_l`.
    Inclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScarSettings {
    /// Propagation horizon; `None` selects the Ehrenfest time.
    pub tau: Option<usize>,
    pub theta: ThetaConvention,
}

impl Default for ScarSettings {
    fn default() -> Self {
        ScarSettings {
            tau: None,
            theta: ThetaConvention::BeforeArrival,
        }
    }
}

impl ScarSettings {
    pub fn horizon(&self, n: usize) -> usize {
        self.tau.unwrap_or_else(|| ehrenfest_time(n))
    }
}

/// `round(ln N / ln 3)`, at least one step.
pub fn ehrenfest_time(n: usize) -> usize {
    ((n as f64).ln() / 3f64.ln()).round().max(1.0) as usize
}

/// Quasienergy `A^m_γ = (N S_γ + m) / L`.
pub fn quasienergy(geometry: &OrbitGeometry, m: usize, n: usize) -> f64 {
    (n as f64 * geometry.total_action + m as f64) / geometry.period() as f64
}

/// Phase-coherent sum of the coherent states along the orbit,
/// `Σ_j exp{−2πi(j A − N θ_j)} |q_j, p_j⟩`, normalized to unit length.
pub fn po_mode(geometry: &OrbitGeometry, m: usize, n: usize, theta: ThetaConvention) -> Vec<C64> {
    let l = geometry.period();
    assert!(m < l, "mode index {m} out of range for period {l}");
    let a = quasienergy(geometry, m, n);
    let nf = n as f64;
    let mut out = vec![C64::new(0.0, 0.0); n];
    for (j, x) in geometry.points.iter().enumerate() {
        let th = match theta {
            ThetaConvention::BeforeArrival => geometry.phase_before(j),
            ThetaConvention::Inclusive => geometry.phase_through(j),
        };
        // reduce before multiplying by 2π to keep the phase accurate
        let turns = (j as f64 * a).fract() - (nf * th).fract();
        let w = C64::from_polar(1.0 / (l as f64).sqrt(), -2.0 * PI * turns);
        let cs = coherent_state(n, x.q, x.p);
        for (o, c) in out.iter_mut().zip(&cs) {
            *o += w * c;
        }
    }
    normalize(&mut out);
    out
}

/// Right and left scar functions of one `(γ, m)` pair.
#[derive(Debug, Clone)]
pub struct ScarFunction {
    pub orbit: SymbolicOrbit,
    pub in_repeller: bool,
    pub m: usize,
    pub quasienergy: f64,
    pub tau: usize,
    pub right: Vec<C64>,
    pub left: Vec<C64>,
    /// `ψ^R = r / 𝒩^R`.
    pub norm_right: C64,
    /// `⟨ψ^L| = ⟨l| / 𝒩^L`.
    pub norm_left: C64,
}

/// Cosine-windowed propagation of the orbit mode under `Ũ` (right) and
/// `Ũ†` (left), normalized so that `⟨ψ^L|ψ^R⟩ = 1` and `‖ψ^R‖ = ‖ψ^L‖`.
pub fn scar_pair(
    geometry: &OrbitGeometry,
    m: usize,
    propagator: &OperatorMatrix,
    settings: ScarSettings,
) -> Result<ScarFunction> {
    let n = propagator.dim();
    let tau = settings.horizon(n);
    if tau == 0 {
        return Err(Error::InvalidParameter("τ must be ≥ 1".into()));
    }
    let a = quasienergy(geometry, m, n);
    let phi = po_mode(geometry, m, n, settings.theta);

    let mut right = vec![C64::new(0.0, 0.0); n];
    let mut left = vec![C64::new(0.0, 0.0); n];
    let mut fwd = phi.clone();
    let mut bwd = phi;
    for t in 0..=tau {
        let window = (PI * t as f64 / (2.0 * tau as f64)).cos();
        let turns = (a * t as f64).fract();
        // e^{−2πiAt} multiplies Ũ^t|φ⟩; the bra ⟨φ|Ũ^t e^{−2πiAt} becomes
        // the ket (Ũ†)^t e^{+2πiAt}|φ⟩
        let wr = C64::from_polar(window, -2.0 * PI * turns);
        let wl = wr.conj();
        for i in 0..n {
            right[i] += wr * fwd[i];
            left[i] += wl * bwd[i];
        }
        if t < tau {
            fwd = propagator.apply(&fwd);
            bwd = propagator.apply_adjoint(&bwd);
        }
    }

    let c = inner(&left, &right);
    let (nr, nl) = (norm(&right), norm(&left));
    if c.norm() < DEFECT_TOL * nr * nl {
        return Err(Error::DegenerateBasis(format!(
            "⟨ψ^L|ψ^R⟩ vanishes for orbit {} m = {m}",
            geometry.orbit
        )));
    }
    // ψ^R = r/𝒩^R, ψ^L = l/conj(𝒩^L), conj(1/𝒩^L)... chosen so that
    // ⟨ψ^L|ψ^R⟩ = ⟨l|r⟩/(𝒩^L 𝒩^R) = 1 and |𝒩^R|/|𝒩^L| = ‖r‖/‖l‖
    let mag_r = (nr * c.norm() / nl).sqrt();
    let mag_l = c.norm() / mag_r;
    let norm_right = C64::from_polar(mag_r, c.arg());
    let norm_left = C64::new(mag_l, 0.0);
    right.iter_mut().for_each(|z| *z /= norm_right);
    left.iter_mut().for_each(|z| *z /= norm_left.conj());

    Ok(ScarFunction {
        orbit: geometry.orbit.clone(),
        in_repeller: geometry.in_repeller,
        m,
        quasienergy: a,
        tau,
        right,
        left,
        norm_right,
        norm_left,
    })
}
