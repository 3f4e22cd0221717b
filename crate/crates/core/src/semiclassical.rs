//! Scar-function representation of the open propagator and the resulting
//! semiclassical spectrum.
//!
//! With right scar functions `ψ^R_j` and left ones `ψ^L_i`, the propagator
//! is represented by `𝒜_ij = ⟨ψ^L_i|Ũ|ψ^R_j⟩` and the non-orthogonality by
//! `𝒮_ij = ⟨ψ^L_i|ψ^R_j⟩`. Resonances solve `𝒜 c = z 𝒮 c`; the problem is
//! regularized by discarding the singular directions of `𝒮` below
//! `σ_cut · σ_max`.

use faer::{Mat, MatRef};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::orbits::{orbit_geometry, ActionConvention, SymbolicOrbit};
use crate::quantum::OperatorMatrix;
use crate::scar::{scar_pair, ScarFunction, ScarSettings};
use crate::spectral::{balance_pair, eigendecompose, sort_values, Resonance, ResonanceSet};

/// Default relative singular-value cutoff for the overlap matrix.
pub const DEFAULT_SIGMA_CUT: f64 = 1e-10;

/// How far outside the unit circle a semiclassical eigenvalue may sit before
/// it is treated as an artifact of the regularization.
pub const CONTRACTION_SLACK: f64 = 0.05;

/// Order in which scar functions enter the basis; prefixes of this order
/// define the `N_SF` scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrderingPolicy {
    /// Period ascending, repeller orbits before outside ones, then symbols,
    /// then `m`.
    PeriodFirst,
    /// All repeller orbits first (period, symbols, `m`), outside orbits last.
    RepellerFirst,
}

/// A scar-function basis with its matrix representation.
#[derive(Debug, Clone)]
pub struct SemiclassicalBasis {
    pub scars: Vec<ScarFunction>,
    /// `⟨ψ^L_i|Ũ|ψ^R_j⟩`.
    pub interaction: Mat<C64>,
    /// `⟨ψ^L_i|ψ^R_j⟩`.
    pub overlap: Mat<C64>,
    /// `(orbit, m)` pairs dropped because `⟨ψ^L|ψ^R⟩` vanished.
    pub excluded: Vec<(SymbolicOrbit, usize)>,
}

impl SemiclassicalBasis {
    pub fn len(&self) -> usize {
        self.scars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scars.is_empty()
    }

    /// Leading `k × k` blocks of `(𝒜, 𝒮)`.
    pub fn prefix(&self, k: usize) -> (MatRef<'_, C64>, MatRef<'_, C64>) {
        let k = k.min(self.len());
        (
            self.interaction.as_ref().submatrix(0, 0, k, k),
            self.overlap.as_ref().submatrix(0, 0, k, k),
        )
    }
}

fn order_orbits(inside: &[SymbolicOrbit], outside: &[SymbolicOrbit], policy: OrderingPolicy) -> Vec<SymbolicOrbit> {
    let mut all: Vec<SymbolicOrbit> = inside.iter().chain(outside).cloned().collect();
    all.sort_by(|a, b| {
        let key_a = (!a.in_repeller(), a.period());
        let key_b = (!b.in_repeller(), b.period());
        match policy {
            OrderingPolicy::PeriodFirst => a
                .period()
                .cmp(&b.period())
                .then((!a.in_repeller()).cmp(&!b.in_repeller()))
                .then_with(|| a.cmp(b)),
            OrderingPolicy::RepellerFirst => key_a.cmp(&key_b).then_with(|| a.cmp(b)),
        }
    });
    all.dedup();
    all
}

/// Builds every `(γ, m)` scar pair for the selected orbits and assembles
/// `𝒜` and `𝒮` with the given propagator.
pub fn build_basis(
    inside: &[SymbolicOrbit],
    outside: &[SymbolicOrbit],
    propagator: &OperatorMatrix,
    settings: ScarSettings,
    convention: ActionConvention,
    policy: OrderingPolicy,
) -> Result<SemiclassicalBasis> {
    let n = propagator.dim();
    let mut scars = Vec::new();
    let mut excluded = Vec::new();
    for orbit in order_orbits(inside, outside, policy) {
        let g = orbit_geometry(&orbit, convention);
        for m in 0..g.period() {
            match scar_pair(&g, m, propagator, settings) {
                Ok(s) => scars.push(s),
                Err(Error::DegenerateBasis(msg)) => {
                    log::warn!("excluding scar pair: {msg}");
                    excluded.push((orbit.clone(), m));
                }
                Err(e) => return Err(e),
            }
        }
    }
    if scars.is_empty() {
        return Err(Error::DegenerateBasis("no usable scar functions".into()));
    }
    let k = scars.len();
    let right = Mat::from_fn(n, k, |i, j| scars[j].right[i]);
    let left = Mat::from_fn(n, k, |i, j| scars[j].left[i]);
    let propagated = &propagator.mat * &right;
    let interaction = left.adjoint() * &propagated;
    let overlap = left.adjoint() * &right;
    Ok(SemiclassicalBasis {
        scars,
        interaction,
        overlap,
        excluded,
    })
}

/// Solution of the regularized generalized eigenproblem.
#[derive(Debug, Clone)]
pub struct GeneralizedSolution {
    /// Spectrum of the reduced matrix `Σ_k⁻¹ U_k† 𝒜 V_k`.
    pub reduced: ResonanceSet,
    /// Columns `c = V_k y`: right coefficients over the basis.
    pub right_coeffs: Vec<Vec<C64>>,
    /// Columns `d = U_k Σ_k⁻¹ x`: left coefficients over the basis.
    pub left_coeffs: Vec<Vec<C64>>,
    /// Number of singular directions of `𝒮` kept.
    pub retained: usize,
}

impl GeneralizedSolution {
    pub fn eigenvalues(&self) -> Vec<C64> {
        self.reduced.eigenvalues()
    }
}

struct Reduction {
    b: Mat<C64>,
    u_k: Mat<C64>,
    v_k: Mat<C64>,
    sigma: Vec<f64>,
}

fn reduce(a: MatRef<'_, C64>, s: MatRef<'_, C64>, sigma_cut: f64) -> Result<Reduction> {
    if a.nrows() != a.ncols() || s.nrows() != s.ncols() || a.nrows() != s.nrows() {
        return Err(Error::InvalidParameter("𝒜 and 𝒮 must be square and equally sized".into()));
    }
    if a.nrows() == 0 {
        return Err(Error::DegenerateBasis("empty basis".into()));
    }
    let svd = s.svd().map_err(|_| Error::NonConvergence)?;
    let sv: Vec<f64> = svd.S().column_vector().iter().map(|z| z.re).collect();
    let smax = sv.first().copied().unwrap_or(0.0);
    let k = sv.iter().filter(|&&x| smax > 0.0 && x >= sigma_cut * smax).count();
    if k == 0 {
        return Err(Error::DegenerateBasis("every singular value of 𝒮 is below the cutoff".into()));
    }
    let u_k = svd.U().submatrix(0, 0, s.nrows(), k).to_owned();
    let v_k = svd.V().submatrix(0, 0, s.nrows(), k).to_owned();
    let mut b = u_k.adjoint() * a * &v_k;
    for i in 0..k {
        let inv = 1.0 / sv[i];
        for j in 0..k {
            b[(i, j)] *= inv;
        }
    }
    Ok(Reduction {
        b,
        u_k,
        v_k,
        sigma: sv[..k].to_vec(),
    })
}

/// Solves `𝒜 c = z 𝒮 c` on the well-conditioned subspace of `𝒮`.
pub fn solve_generalized(a: MatRef<'_, C64>, s: MatRef<'_, C64>, sigma_cut: f64) -> Result<GeneralizedSolution> {
    let red = reduce(a, s, sigma_cut)?;
    let k = red.sigma.len();
    let reduced = eigendecompose(&red.b)?;
    let m = s.nrows();
    let mut right_coeffs = Vec::with_capacity(k);
    let mut left_coeffs = Vec::with_capacity(k);
    for r in &reduced.resonances {
        let c: Vec<C64> = (0..m)
            .map(|i| (0..k).map(|j| red.v_k[(i, j)] * r.right[j]).sum())
            .collect();
        let d: Vec<C64> = (0..m)
            .map(|i| (0..k).map(|j| red.u_k[(i, j)] * r.left[j] / red.sigma[j]).sum())
            .collect();
        right_coeffs.push(c);
        left_coeffs.push(d);
    }
    Ok(GeneralizedSolution {
        reduced,
        right_coeffs,
        left_coeffs,
        retained: k,
    })
}

/// Eigenvalues only, sorted by modulus; used by prefix scans.
pub fn generalized_eigenvalues(a: MatRef<'_, C64>, s: MatRef<'_, C64>, sigma_cut: f64) -> Result<Vec<C64>> {
    let red = reduce(a, s, sigma_cut)?;
    let mut z = red.b.eigenvalues().map_err(|_| Error::NonConvergence)?;
    sort_values(&mut z);
    Ok(z)
}

/// Semiclassical resonances as Hilbert-space vectors: coefficient-weighted
/// sums of the right and left scar functions.
pub fn semiclassical_states(basis: &SemiclassicalBasis, solution: &GeneralizedSolution) -> ResonanceSet {
    let n = basis.scars[0].right.len();
    let m = solution.right_coeffs.first().map_or(0, |c| c.len());
    let mut resonances = Vec::with_capacity(solution.reduced.len());
    for (idx, r) in solution.reduced.resonances.iter().enumerate() {
        let c = &solution.right_coeffs[idx];
        let d = &solution.left_coeffs[idx];
        let mut right = vec![C64::new(0.0, 0.0); n];
        let mut left = vec![C64::new(0.0, 0.0); n];
        for j in 0..m {
            let s = &basis.scars[j];
            for i in 0..n {
                right[i] += c[j] * s.right[i];
                left[i] += d[j] * s.left[i];
            }
        }
        let defective = r.defective || balance_pair(&mut right, &mut left).is_err();
        resonances.push(Resonance {
            z: r.z,
            right,
            left,
            defective,
        });
    }
    ResonanceSet { n, resonances }
}

/// Removes resonances with `|z| > 1 + CONTRACTION_SLACK`, which cannot
/// belong to a contraction, and returns their eigenvalues.
pub fn drop_outside_disk(set: &mut ResonanceSet) -> Vec<C64> {
    let mut dropped = Vec::new();
    set.resonances.retain(|r| {
        let keep = r.z.norm() <= 1.0 + CONTRACTION_SLACK;
        if !keep {
            log::warn!("semiclassical eigenvalue outside the unit disk: |z| = {:.4}", r.z.norm());
            dropped.push(r.z);
        }
        keep
    });
    dropped
}

/// Fraction of long-lived exact resonances reproduced semiclassically.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerformanceReport {
    #[serde(rename = "P")]
    pub p: f64,
    pub epsilon: f64,
    pub nu_c: f64,
    /// `(z_exact, z_semiclassical)` pairs, as `[re, im]`.
    pub matched: Vec<([f64; 2], [f64; 2])>,
    pub exact_longlived: usize,
    pub n_sf: usize,
}

/// Greedy one-to-one matching: exact values above `ν_c`, taken in
/// descending modulus, each claim the nearest unmatched semiclassical value
/// within `ε`.
pub fn performance(exact: &[C64], semi: &[C64], nu_c: f64, epsilon: f64, n_sf: usize) -> Result<PerformanceReport> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!("ε = {epsilon} must be positive")));
    }
    let mut targets: Vec<C64> = exact
        .iter()
        .copied()
        .filter(|&z| crate::spectral::above_threshold(z, nu_c))
        .collect();
    if targets.is_empty() {
        return Err(Error::Undefined(format!("no exact resonance above ν_c = {nu_c}")));
    }
    sort_values(&mut targets);
    let mut used = vec![false; semi.len()];
    let mut matched = Vec::new();
    for z in &targets {
        let best = semi
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .map(|(i, w)| (i, (z - w).norm()))
            .filter(|&(_, d)| d <= epsilon)
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
        if let Some((i, _)) = best {
            used[i] = true;
            matched.push(([z.re, z.im], [semi[i].re, semi[i].im]));
        }
    }
    Ok(PerformanceReport {
        p: matched.len() as f64 / targets.len() as f64,
        epsilon,
        nu_c,
        exact_longlived: targets.len(),
        matched,
        n_sf,
    })
}

/// Matching parameters for scans.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchParams {
    pub nu_c: f64,
    pub epsilon: f64,
    pub target_p: f64,
    pub sigma_cut: f64,
}

/// Outcome of a prefix scan for one basis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrefixScan {
    /// Smallest prefix reaching the target, or the basis size when unreachable.
    pub n_sf: usize,
    /// `P` at `n_sf`.
    pub p: f64,
    pub reached: bool,
    /// Best `P` seen over all prefixes.
    pub best_p: f64,
}

/// `P` obtained from the leading `k` scar functions.
pub fn prefix_performance(basis: &SemiclassicalBasis, exact: &[C64], k: usize, params: MatchParams) -> Result<f64> {
    pencil_prefix_performance(basis.interaction.as_ref(), basis.overlap.as_ref(), exact, k, params)
}

/// `P` from the leading `k × k` blocks of an arbitrary pencil `(𝒜, 𝒮)`.
pub fn pencil_prefix_performance(
    a: MatRef<'_, C64>,
    s: MatRef<'_, C64>,
    exact: &[C64],
    k: usize,
    params: MatchParams,
) -> Result<f64> {
    let k = k.min(a.nrows());
    let z = match generalized_eigenvalues(a.submatrix(0, 0, k, k), s.submatrix(0, 0, k, k), params.sigma_cut) {
        Ok(mut z) => {
            z.retain(|z| z.norm() <= 1.0 + CONTRACTION_SLACK);
            z
        }
        Err(Error::DegenerateBasis(_)) => Vec::new(),
        Err(e) => return Err(e),
    };
    Ok(performance(exact, &z, params.nu_c, params.epsilon, k)?.p)
}

/// Smallest prefix of the ordered basis whose semiclassical spectrum reaches
/// `P ≥ target_p`.
pub fn scan_prefixes(basis: &SemiclassicalBasis, exact: &[C64], params: MatchParams) -> Result<PrefixScan> {
    scan_pencil(basis.interaction.as_ref(), basis.overlap.as_ref(), exact, params)
}

pub fn scan_pencil(a: MatRef<'_, C64>, s: MatRef<'_, C64>, exact: &[C64], params: MatchParams) -> Result<PrefixScan> {
    let total = a.nrows();
    if total == 0 {
        return Err(Error::DegenerateBasis("empty basis".into()));
    }
    let needed = crate::spectral::count_longlived(exact, params.nu_c)?;
    if needed == 0 {
        return Err(Error::Undefined(format!("no exact resonance above ν_c = {}", params.nu_c)));
    }
    // fewer scar functions than ⌈target · needed⌉ cannot reach the target
    let start = ((params.target_p * needed as f64).ceil() as usize).clamp(1, total);
    let mut best_p: f64 = 0.0;
    for k in start..=total {
        let p = pencil_prefix_performance(a, s, exact, k, params)?;
        best_p = best_p.max(p);
        if p >= params.target_p {
            return Ok(PrefixScan {
                n_sf: k,
                p,
                reached: true,
                best_p,
            });
        }
    }
    let p = pencil_prefix_performance(a, s, exact, total, params)?;
    Ok(PrefixScan {
        n_sf: total,
        p,
        reached: false,
        best_p,
    })
}

/// Pencil built from the exact right/left eigenvectors themselves, in
/// spectral order. Any solver must recover the exact spectrum from it.
pub fn eigenvector_pencil(exact: &ResonanceSet, propagator: &OperatorMatrix) -> (Mat<C64>, Mat<C64>) {
    let n = exact.n;
    let m = exact.len();
    let right = Mat::from_fn(n, m, |i, j| exact.resonances[j].right[i]);
    let left = Mat::from_fn(n, m, |i, j| exact.resonances[j].left[i]);
    let a = left.adjoint() * (&propagator.mat * &right);
    let s = left.adjoint() * &right;
    (a, s)
}
