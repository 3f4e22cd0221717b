//! Husimi representations of resonance projectors and their accumulation
//! into quantum repellers.

use faer::Mat;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coherent::{coherent_state, inner};
use crate::error::{Error, Result};
use crate::spectral::{Resonance, ResonanceSet, DEFECT_TOL};

/// Where the accumulated projectors came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HusimiSource {
    Exact,
    Semiclassical,
}

impl HusimiSource {
    pub fn name(self) -> &'static str {
        match self {
            HusimiSource::Exact => "exact",
            HusimiSource::Semiclassical => "semiclassical",
        }
    }
}

/// `K × K` grid of `|⟨q,p|Q̂|q,p⟩|` over centers `((a+½)/K, (b+½)/K)`.
///
/// Same layout as [`crate::classical::MeasureGrid`]: index `a * K + b`,
/// `a` running over `q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HusimiGrid {
    pub k: usize,
    pub n: usize,
    pub source: HusimiSource,
    /// Threshold used for accumulation, if any.
    pub nu_c: Option<f64>,
    /// Number of projectors summed.
    pub count: usize,
    /// Projectors left out because `⟨L|R⟩` was numerically zero.
    pub skipped: usize,
    pub values: Vec<f64>,
}

impl HusimiGrid {
    #[inline]
    pub fn at(&self, a: usize, b: usize) -> f64 {
        self.values[a * self.k + b]
    }

    /// Grid under `(q, p) → (1 − q, 1 − p)`.
    pub fn parity_image(&self) -> Vec<f64> {
        let k = self.k;
        let mut out = vec![0.0; k * k];
        for a in 0..k {
            for b in 0..k {
                out[(k - 1 - a) * k + (k - 1 - b)] = self.values[a * k + b];
            }
        }
        out
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Center of grid cell `i` on a `K`-grid.
#[inline]
pub fn cell_center(i: usize, k: usize) -> f64 {
    (i as f64 + 0.5) / k as f64
}

/// Coherent states for one row `a` of the grid, as columns of an `N × K` matrix.
fn row_states(n: usize, k: usize, a: usize) -> Mat<C64> {
    let q0 = cell_center(a, k);
    let mut m = Mat::<C64>::zeros(n, k);
    for b in 0..k {
        let cs = coherent_state(n, q0, cell_center(b, k));
        for (i, v) in cs.into_iter().enumerate() {
            m[(i, b)] = v;
        }
    }
    m
}

fn columns(vs: &[&[C64]], n: usize) -> Mat<C64> {
    Mat::from_fn(n, vs.len(), |i, j| vs[j][i])
}

/// Complex values `⟨q,p|Σ_j |R_j⟩⟨L_j| / ⟨L_j|R_j⟩|q,p⟩` over the grid.
fn accumulate_complex(pairs: &[(&[C64], &[C64], C64)], n: usize, k: usize) -> Vec<C64> {
    let rights: Vec<&[C64]> = pairs.iter().map(|p| p.0).collect();
    let lefts: Vec<&[C64]> = pairs.iter().map(|p| p.1).collect();
    let r = columns(&rights, n);
    let l = columns(&lefts, n);
    let inv: Vec<C64> = pairs.iter().map(|p| p.2.inv()).collect();
    let rows: Vec<Vec<C64>> = (0..k)
        .into_par_iter()
        .map(|a| {
            let cs = row_states(n, k, a);
            let x = cs.adjoint() * &r;
            let y = cs.adjoint() * &l;
            (0..k)
                .map(|b| (0..pairs.len()).map(|j| x[(b, j)] * y[(b, j)].conj() * inv[j]).sum())
                .collect()
        })
        .collect();
    rows.into_iter().flatten().collect()
}

fn usable(r: &Resonance) -> Option<C64> {
    let pairing = r.pairing();
    if r.defective || pairing.norm() < DEFECT_TOL {
        None
    } else {
        Some(pairing)
    }
}

/// `h(q,p) = |⟨q,p|R⟩⟨L|q,p⟩| / |⟨L|R⟩|` for one resonance.
pub fn projector_husimi(resonance: &Resonance, k: usize, source: HusimiSource) -> Result<HusimiGrid> {
    if k == 0 {
        return Err(Error::InvalidParameter("grid size K must be positive".into()));
    }
    let pairing = resonance.pairing();
    if pairing.norm() < DEFECT_TOL {
        return Err(Error::Undefined("projector of a defective pair".into()));
    }
    let n = resonance.right.len();
    let values = accumulate_complex(&[(&resonance.right, &resonance.left, pairing)], n, k)
        .into_iter()
        .map(|z| z.norm())
        .collect();
    Ok(HusimiGrid {
        k,
        n,
        source,
        nu_c: None,
        count: 1,
        skipped: 0,
        values,
    })
}

/// `|⟨q,p|ψ⟩|²` for a normalized state.
pub fn state_husimi(psi: &[C64], k: usize) -> Vec<f64> {
    let n = psi.len();
    (0..k)
        .into_par_iter()
        .flat_map_iter(|a| {
            let q0 = cell_center(a, k);
            (0..k).map(move |b| inner(&coherent_state(n, q0, cell_center(b, k)), psi).norm_sqr())
        })
        .collect()
}

/// Sums the projectors of every usable resonance above `ν_c`, in the set's
/// (descending modulus) order, keeping the complex matrix element until the
/// final modulus.
pub fn accumulate_q(set: &ResonanceSet, nu_c: f64, k: usize, source: HusimiSource) -> Result<HusimiGrid> {
    let selected: Vec<&Resonance> = set.longlived(nu_c).collect();
    let mut grid = accumulate_list(&selected, set.n, k, source)?;
    grid.nu_c = Some(nu_c);
    Ok(grid)
}

/// Sums the projectors of the first `j` resonances of the set.
pub fn accumulate_first(set: &ResonanceSet, j: usize, k: usize, source: HusimiSource) -> Result<HusimiGrid> {
    let selected: Vec<&Resonance> = set.resonances.iter().take(j).collect();
    accumulate_list(&selected, set.n, k, source)
}

fn accumulate_list(selected: &[&Resonance], n: usize, k: usize, source: HusimiSource) -> Result<HusimiGrid> {
    if k == 0 {
        return Err(Error::InvalidParameter("grid size K must be positive".into()));
    }
    let mut pairs = Vec::with_capacity(selected.len());
    let mut skipped = 0;
    for r in selected {
        match usable(r) {
            Some(p) => pairs.push((r.right.as_slice(), r.left.as_slice(), p)),
            None => {
                log::warn!("skipping defective resonance z = {}", r.z);
                skipped += 1;
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::Undefined("no usable resonance above the threshold".into()));
    }
    let values = accumulate_complex(&pairs, n, k).into_iter().map(|z| z.norm()).collect();
    Ok(HusimiGrid {
        k,
        n,
        source,
        nu_c: None,
        count: pairs.len(),
        skipped,
        values,
    })
}

/// Normalization applied to both grids before integrating their product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OverlapNorm {
    /// Unit Euclidean norm; `O` is the cosine similarity.
    #[default]
    Cosine,
    /// Unit integral over the torus; `O = ∬ Q_a Q_b dq dp`, not bounded by one.
    UnitSum,
}

/// Overlap of two accumulated grids.
pub fn overlap(a: &HusimiGrid, b: &HusimiGrid, norm: OverlapNorm) -> Result<f64> {
    if a.k != b.k {
        return Err(Error::InvalidParameter(format!("grid sizes differ: {} vs {}", a.k, b.k)));
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    let (na, nb) = match norm {
        OverlapNorm::Cosine => (
            a.values.iter().map(|x| x * x).sum::<f64>().sqrt(),
            b.values.iter().map(|x| x * x).sum::<f64>().sqrt(),
        ),
        OverlapNorm::UnitSum => (a.sum(), b.sum()),
    };
    if na <= 0.0 || nb <= 0.0 {
        return Err(Error::ZeroMeasure);
    }
    let cells = (a.k * a.k) as f64;
    Ok(match norm {
        OverlapNorm::Cosine => dot / (na * nb),
        OverlapNorm::UnitSum => cells * dot / (na * nb),
    })
}
