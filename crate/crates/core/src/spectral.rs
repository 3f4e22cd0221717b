//! Dense non-Hermitian eigendecomposition with paired left/right vectors.
//!
//! Right vectors come from the decomposition of `M`, left vectors from the
//! decomposition of `M†`. Pairs are matched by eigenvalue proximity, then
//! biorthogonalized cluster by cluster so that `⟨l_j|r_k⟩ = δ_jk` and
//! `⟨r_j|r_j⟩ = ⟨l_j|l_j⟩`.

use faer::linalg::solvers::DenseSolveCore;
use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::coherent::{inner, norm};
use crate::error::{Error, Result};

/// Largest dimension accepted by [`eigendecompose`].
pub const MAX_DIM: usize = 2187;
/// Eigenvalues closer than this are treated as one cluster.
pub const PAIRING_TOL: f64 = 1e-8;
/// Width of the threshold band in [`count_longlived`].
pub const SNAP_TOL: f64 = 1e-8;
/// A pair with `|⟨l|r⟩|` below this (unit vectors) cannot be biorthogonalized.
pub const DEFECT_TOL: f64 = 1e-10;

/// One eigenvalue with its right and left eigenvectors.
#[derive(Debug, Clone)]
pub struct Resonance {
    pub z: C64,
    pub right: Vec<C64>,
    pub left: Vec<C64>,
    /// Set when the pair belongs to a (numerically) defective cluster.
    pub defective: bool,
}

impl Resonance {
    /// `⟨l|r⟩`.
    pub fn pairing(&self) -> C64 {
        inner(&self.left, &self.right)
    }
}

/// Full spectrum of a square matrix sorted by `|z|` descending, then phase.
#[derive(Debug, Clone)]
pub struct ResonanceSet {
    pub n: usize,
    pub resonances: Vec<Resonance>,
}

impl ResonanceSet {
    pub fn eigenvalues(&self) -> Vec<C64> {
        self.resonances.iter().map(|r| r.z).collect()
    }

    pub fn defective_count(&self) -> usize {
        self.resonances.iter().filter(|r| r.defective).count()
    }

    pub fn len(&self) -> usize {
        self.resonances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.resonances.is_empty()
    }

    /// Resonances with `|z|` above `nu_c` under the snap rule of [`count_longlived`].
    pub fn longlived(&self, nu_c: f64) -> impl Iterator<Item = &Resonance> {
        self.resonances.iter().filter(move |r| above_threshold(r.z, nu_c))
    }
}

#[inline]
pub(crate) fn above_threshold(z: C64, nu_c: f64) -> bool {
    z.norm() > nu_c + SNAP_TOL
}

/// Deterministic ordering key: modulus descending (rounded to 1e-10), then phase.
pub fn sort_resonances(list: &mut [Resonance]) {
    list.sort_by(|a, b| {
        let ma = (a.z.norm() * 1e10).round();
        let mb = (b.z.norm() * 1e10).round();
        mb.partial_cmp(&ma)
            .unwrap()
            .then_with(|| a.z.arg().partial_cmp(&b.z.arg()).unwrap())
    });
}

/// Sorts eigenvalues with the same key as [`sort_resonances`].
pub fn sort_values(values: &mut [C64]) {
    values.sort_by(|a, b| {
        let ma = (a.norm() * 1e10).round();
        let mb = (b.norm() * 1e10).round();
        mb.partial_cmp(&ma)
            .unwrap()
            .then_with(|| a.arg().partial_cmp(&b.arg()).unwrap())
    });
}

fn columns(m: faer::MatRef<'_, C64>) -> Vec<Vec<C64>> {
    (0..m.ncols())
        .map(|j| {
            let mut v: Vec<C64> = m.col(j).iter().copied().collect();
            let s = norm(&v);
            if s > 0.0 {
                v.iter_mut().for_each(|z| *z /= s);
            }
            v
        })
        .collect()
}

/// One-to-one matching of two value lists by globally increasing distance.
fn match_by_distance(a: &[C64], b: &[C64]) -> Vec<usize> {
    let n = a.len();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            pairs.push(((x - y).norm(), i, j));
        }
    }
    pairs.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap().then(p.1.cmp(&q.1)).then(p.2.cmp(&q.2)));
    let mut assigned = vec![usize::MAX; n];
    let mut used = vec![false; n];
    let mut left = n;
    for (_, i, j) in pairs {
        if assigned[i] == usize::MAX && !used[j] {
            assigned[i] = j;
            used[j] = true;
            left -= 1;
            if left == 0 {
                break;
            }
        }
    }
    assigned
}

/// Groups indices whose values lie within `tol` of each other (transitively).
fn clusters(values: &[C64], tol: f64) -> Vec<Vec<usize>> {
    let n = values.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if (values[i] - values[j]).norm() < tol {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        let r = find(&mut parent, i);
        groups[r].push(i);
    }
    groups.into_iter().filter(|g| !g.is_empty()).collect()
}

/// Rescales a biorthogonal pair so that `⟨l|r⟩ = 1` and `‖r‖ = ‖l‖`.
pub fn balance_pair(right: &mut [C64], left: &mut [C64]) -> Result<()> {
    let c = inner(left, right);
    let (nr, nl) = (norm(right), norm(left));
    if c.norm() < DEFECT_TOL * nr * nl || nr == 0.0 || nl == 0.0 {
        return Err(Error::Undefined("vanishing ⟨l|r⟩".into()));
    }
    let alpha = (nl / (nr * c.norm())).sqrt();
    let beta = 1.0 / (c.norm() * alpha);
    // r ← α e^{−i arg c} r, l ← β l
    let phase = C64::from_polar(alpha, -c.arg());
    right.iter_mut().for_each(|z| *z *= phase);
    left.iter_mut().for_each(|z| *z *= beta);
    Ok(())
}

/// Full eigendecomposition with biorthonormal left/right pairs.
pub fn eigendecompose(m: &Mat<C64>) -> Result<ResonanceSet> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::InvalidParameter("matrix must be square".into()));
    }
    if n > MAX_DIM {
        return Err(Error::ResourceGuard { n, max: MAX_DIM });
    }
    if n == 0 {
        return Ok(ResonanceSet { n, resonances: Vec::new() });
    }
    let right = m.eigen().map_err(|_| Error::NonConvergence)?;
    let adj = m.adjoint().to_owned();
    let left = adj.eigen().map_err(|_| Error::NonConvergence)?;

    let zr: Vec<C64> = right.S().column_vector().iter().copied().collect();
    // left eigenvalues of M are the conjugates of those of M†
    let zl: Vec<C64> = left.S().column_vector().iter().map(|z| z.conj()).collect();
    if zr.iter().chain(&zl).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonConvergence);
    }
    let rvecs = columns(right.U());
    let lvecs = columns(left.U());
    let matching = match_by_distance(&zr, &zl);

    let mut resonances: Vec<Resonance> = (0..n)
        .map(|i| Resonance {
            z: zr[i],
            right: rvecs[i].clone(),
            left: lvecs[matching[i]].clone(),
            defective: false,
        })
        .collect();

    for group in clusters(&zr, PAIRING_TOL) {
        biorthogonalize_cluster(&mut resonances, &group);
    }
    sort_resonances(&mut resonances);
    Ok(ResonanceSet { n, resonances })
}

fn biorthogonalize_cluster(res: &mut [Resonance], group: &[usize]) {
    let k = group.len();
    if k == 1 {
        let r = &mut res[group[0]];
        let ok = balance_pair(&mut r.right, &mut r.left).is_ok();
        r.defective = !ok;
        return;
    }
    // S = L_c† R_c
    let s = Mat::from_fn(k, k, |a, b| inner(&res[group[a]].left, &res[group[b]].right));
    let sv = s.singular_values().unwrap_or_default();
    let smin = sv.last().copied().unwrap_or(0.0);
    if sv.is_empty() || smin < DEFECT_TOL {
        for &i in group {
            res[i].defective = true;
        }
        return;
    }
    // L_c ← L_c S^{-†}, so the new L_c† R_c = S^{-1} S = 𝟙
    let sinv = s.partial_piv_lu().inverse();
    let n = res[group[0]].left.len();
    let old: Vec<Vec<C64>> = group.iter().map(|&i| res[i].left.clone()).collect();
    for (b, &i) in group.iter().enumerate() {
        let mut v = vec![C64::new(0.0, 0.0); n];
        for (a, l) in old.iter().enumerate() {
            // (S^{-†})_{ab} = conj(S^{-1}_{ba})
            let w = sinv[(b, a)].conj();
            for (x, y) in v.iter_mut().zip(l) {
                *x += y * w;
            }
        }
        res[i].left = v;
    }
    for &i in group {
        let r = &mut res[i];
        let ok = balance_pair(&mut r.right, &mut r.left).is_ok();
        r.defective = !ok;
    }
}

/// Number of resonances with `|z| > ν_c`.
///
/// Moduli within [`SNAP_TOL`] of the threshold are treated as lying on it
/// and are not counted.
pub fn count_longlived(values: &[C64], nu_c: f64) -> Result<usize> {
    if !(0.0..=1.0).contains(&nu_c) {
        return Err(Error::InvalidParameter(format!("ν_c = {nu_c} outside [0, 1]")));
    }
    Ok(values.iter().filter(|&&z| above_threshold(z, nu_c)).count())
}

/// Local dimension `[ln M(N) − ln M(N/3)] / ln 3`.
pub fn local_dimension(m_n: usize, m_n3: usize) -> Result<f64> {
    if m_n == 0 || m_n3 == 0 {
        return Err(Error::Undefined(format!(
            "local dimension with zero count (M(N) = {m_n}, M(N/3) = {m_n3})"
        )));
    }
    Ok(((m_n as f64).ln() - (m_n3 as f64).ln()) / 3f64.ln())
}

/// Whether the multiset of values equals its complex conjugate within `tol`.
pub fn conjugation_closed(values: &[C64], tol: f64) -> bool {
    max_conjugation_mismatch(values) <= tol
}

/// Largest distance in the optimal-greedy pairing of `{z}` with `{z̄}`.
pub fn max_conjugation_mismatch(values: &[C64]) -> f64 {
    let conj: Vec<C64> = values.iter().map(|z| z.conj()).collect();
    let m = match_by_distance(values, &conj);
    m.iter()
        .enumerate()
        .map(|(i, &j)| (values[i] - conj[j]).norm())
        .fold(0.0, f64::max)
}

/// Serializable eigenvalue list.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Spectrum {
    pub n: usize,
    pub values: Vec<[f64; 2]>,
}

impl Spectrum {
    pub fn from_values(n: usize, values: &[C64]) -> Self {
        Spectrum {
            n,
            values: values.iter().map(|z| [z.re, z.im]).collect(),
        }
    }

    pub fn to_values(&self) -> Vec<C64> {
        self.values.iter().map(|v| C64::new(v[0], v[1])).collect()
    }
}
