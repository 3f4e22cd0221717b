//! Quantized closed and continuously open tribaker propagators.
//!
//! States live on the position grid `q_j = (j + χ_q)/N`. With the
//! antiperiodic choice `χ_q = χ_p = 1/2` the open strip is exactly the
//! index range `N/3 .. 2N/3`.

use std::f64::consts::PI;

use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reflectivity::{in_opening, ReflectivityProfile};

/// Antiperiodic boundary phase shared by position and momentum.
pub const ANTIPERIODIC: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OperatorLabel {
    #[serde(rename = "G")]
    Dft,
    #[serde(rename = "U")]
    Closed,
    #[serde(rename = "P")]
    Opening,
    #[serde(rename = "U_open")]
    Open,
    #[serde(rename = "Pi")]
    Parity,
    #[serde(rename = "other")]
    Other,
}

/// A dense `N × N` complex operator tagged with what it represents.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub label: OperatorLabel,
    pub mat: Mat<C64>,
}

impl OperatorMatrix {
    pub fn new(label: OperatorLabel, mat: Mat<C64>) -> Self {
        assert_eq!(mat.nrows(), mat.ncols(), "operators are square");
        OperatorMatrix { label, mat }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim()).map(|i| self.mat[(i, i)]).sum()
    }

    /// Applies the operator to a column vector.
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        let n = self.dim();
        assert_eq!(v.len(), n);
        let mut out = vec![C64::new(0.0, 0.0); n];
        for j in 0..n {
            let x = v[j];
            if x == C64::new(0.0, 0.0) {
                continue;
            }
            let col = self.mat.col(j);
            for (o, m) in out.iter_mut().zip(col.iter()) {
                *o += m * x;
            }
        }
        out
    }

    /// Applies the adjoint to a column vector.
    pub fn apply_adjoint(&self, v: &[C64]) -> Vec<C64> {
        let n = self.dim();
        assert_eq!(v.len(), n);
        (0..n)
            .map(|j| {
                self.mat
                    .col(j)
                    .iter()
                    .zip(v)
                    .map(|(m, x)| m.conj() * x)
                    .sum()
            })
            .collect()
    }
}

/// Largest entrywise modulus of a matrix.
pub fn max_abs(m: &Mat<C64>) -> f64 {
    let mut worst: f64 = 0.0;
    for j in 0..m.ncols() {
        for z in m.col(j).iter() {
            worst = worst.max(z.norm());
        }
    }
    worst
}

/// `‖M†M − 𝟙‖_max`.
pub fn unitarity_defect(m: &Mat<C64>) -> f64 {
    let g = m.adjoint() * m;
    let id = Mat::<C64>::identity(m.nrows(), m.ncols());
    max_abs(&(g - id))
}

/// `‖AB − BA‖_max`.
pub fn commutator_norm(a: &Mat<C64>, b: &Mat<C64>) -> f64 {
    max_abs(&(a * b - b * a))
}

/// Position grid point `q_j = (j + χ_q)/N`.
#[inline]
pub fn grid_point(j: usize, n: usize) -> f64 {
    (j as f64 + ANTIPERIODIC) / n as f64
}

fn check_dim(n: usize) -> Result<()> {
    if n == 0 || n % 3 != 0 {
        return Err(Error::NotDivisibleByThree(n));
    }
    Ok(())
}

/// Discrete Fourier kernel `⟨p_k|q_j⟩ = N^{-1/2} exp(−2πi(j+χ_q)(k+χ_p)/N)`,
/// rows indexed by momentum `k`, columns by position `j`.
pub fn dft_matrix(n: usize, chi_q: f64, chi_p: f64) -> OperatorMatrix {
    assert!(n >= 1);
    let norm = 1.0 / (n as f64).sqrt();
    let nf = n as f64;
    let mat = Mat::from_fn(n, n, |k, j| {
        let product = (j as f64 + chi_q) * (k as f64 + chi_p);
        let phase = -2.0 * PI * product / nf;
        C64::from_polar(norm, phase)
    });
    OperatorMatrix::new(OperatorLabel::Dft, mat)
}

fn block_dft(n: usize) -> Mat<C64> {
    let third = n / 3;
    let g = dft_matrix(third, ANTIPERIODIC, ANTIPERIODIC).mat;
    let mut out = Mat::<C64>::zeros(n, n);
    for b in 0..3 {
        let off = b * third;
        for j in 0..third {
            for i in 0..third {
                out[(off + i, off + j)] = g[(i, j)];
            }
        }
    }
    out
}

/// Closed quantum tribaker `U = G_N^{-1} (G_{N/3} ⊕ G_{N/3} ⊕ G_{N/3})`.
pub fn closed_baker(n: usize) -> Result<OperatorMatrix> {
    check_dim(n)?;
    let g = dft_matrix(n, ANTIPERIODIC, ANTIPERIODIC).mat;
    let mat = g.adjoint() * block_dft(n);
    Ok(OperatorMatrix::new(OperatorLabel::Closed, mat))
}

/// Diagonal amplitude attenuation: `√F(q_j)` inside the opening, one outside.
pub fn opening_diagonal(n: usize, profile: &ReflectivityProfile) -> Result<Vec<f64>> {
    check_dim(n)?;
    profile.validate()?;
    Ok((0..n)
        .map(|j| {
            let q = grid_point(j, n);
            // guard against round-off at the block edges
            if j < n / 3 || j >= 2 * n / 3 || !in_opening(q) {
                1.0
            } else {
                profile.amplitude(q)
            }
        })
        .collect())
}

pub fn opening_operator(n: usize, profile: &ReflectivityProfile) -> Result<OperatorMatrix> {
    let d = opening_diagonal(n, profile)?;
    let mat = Mat::from_fn(n, n, |i, j| if i == j { C64::new(d[i], 0.0) } else { C64::new(0.0, 0.0) });
    Ok(OperatorMatrix::new(OperatorLabel::Opening, mat))
}

/// Continuously open tribaker `Ũ = G_N^{-1} P G_{N/3} P`.
pub fn open_baker(n: usize, profile: &ReflectivityProfile) -> Result<OperatorMatrix> {
    check_dim(n)?;
    let d = opening_diagonal(n, profile)?;
    let g = dft_matrix(n, ANTIPERIODIC, ANTIPERIODIC).mat;
    let mut inner = block_dft(n);
    // P · G_{N/3} · P with diagonal P
    for j in 0..n {
        for i in 0..n {
            inner[(i, j)] *= d[i] * d[j];
        }
    }
    let mat = g.adjoint() * inner;
    Ok(OperatorMatrix::new(OperatorLabel::Open, mat))
}

/// Position reflection `(Πψ)_j = ψ_{N−1−j}`.
pub fn parity_operator(n: usize) -> OperatorMatrix {
    let mat = Mat::from_fn(n, n, |i, j| {
        if i + j + 1 == n {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    OperatorMatrix::new(OperatorLabel::Parity, mat)
}

/// Largest singular value.
pub fn spectral_norm(m: &Mat<C64>) -> f64 {
    m.singular_values()
        .map(|s| s.first().copied().unwrap_or(0.0))
        .unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reflectivity::Shape;

    #[test]
    fn dft_unitary_and_symmetric() {
        for n in [1, 3, 9, 27, 30] {
            let g = dft_matrix(n, 0.5, 0.5).mat;
            assert!(unitarity_defect(&g) < 1e-12);
            let asym = max_abs(&(g.transpose().to_owned() - &g));
            assert!(asym < 1e-15, "{n} {asym}");
        }
        let g1 = dft_matrix(1, 0.5, 0.5).mat;
        assert!((g1[(0, 0)] - C64::new(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn closed_map_small() {
        let u = closed_baker(3).unwrap().mat;
        assert!(unitarity_defect(&u) < 1e-12);
        let pi = parity_operator(3).mat;
        assert!(commutator_norm(&u, &pi) < 1e-12);
        let u = closed_baker(243).unwrap().mat;
        assert!(unitarity_defect(&u) < 1e-10);
    }

    #[test]
    fn rejects_bad_dimension() {
        assert!(matches!(closed_baker(10), Err(Error::NotDivisibleByThree(10))));
        assert!(open_baker(4, &ReflectivityProfile::complete()).is_err());
        assert!(opening_operator(0, &ReflectivityProfile::complete()).is_err());
    }

    #[test]
    fn opening_entries() {
        let p = opening_diagonal(27, &ReflectivityProfile::step(1.0).unwrap()).unwrap();
        assert!(p.iter().all(|&x| x == 1.0));
        let c = opening_diagonal(27, &ReflectivityProfile::complete()).unwrap();
        for (j, &x) in c.iter().enumerate() {
            assert_eq!(x, if (9..18).contains(&j) { 0.0 } else { 1.0 });
        }
        let s = opening_diagonal(243, &ReflectivityProfile::step(0.0).unwrap()).unwrap();
        // q_121 = 121.5 / 243 = 0.5
        assert!((s[121] - 4.1e-4).abs() < 0.05e-4, "{}", s[121]);
    }

    #[test]
    fn open_map_reduces_to_closed() {
        let u = closed_baker(27).unwrap().mat;
        let v = open_baker(27, &ReflectivityProfile::sinusoidal(1.0).unwrap()).unwrap().mat;
        assert!(max_abs(&(u - v)) < 1e-12);
    }

    #[test]
    fn complete_opening_rank() {
        let v = open_baker(27, &ReflectivityProfile::complete()).unwrap().mat;
        let s = v.singular_values().unwrap();
        let rank = s.iter().filter(|&&x| x > 1e-10).count();
        assert!(rank <= 18);
    }

    #[test]
    fn open_map_contraction_and_parity() {
        let pi = parity_operator(243).mat;
        let v = open_baker(243, &ReflectivityProfile::step(0.01).unwrap()).unwrap().mat;
        assert!(commutator_norm(&v, &pi) < 1e-10);
        assert!(spectral_norm(&v) <= 1.0 + 1e-10);
    }

    #[test]
    fn parity_is_involution() {
        let pi = parity_operator(9).mat;
        let sq = &pi * &pi;
        assert_eq!(max_abs(&(sq - Mat::<C64>::identity(9, 9))), 0.0);
        for shape in [Shape::Step, Shape::Sinusoidal, Shape::Constant, Shape::Complete] {
            let p = opening_operator(27, &ReflectivityProfile::new(shape, 0.2).unwrap()).unwrap().mat;
            let pi = parity_operator(27).mat;
            assert!(commutator_norm(&p, &pi) < 1e-15);
        }
    }

    #[test]
    fn continuity_in_floor() {
        let u = closed_baker(81).unwrap().mat;
        let mut last = f64::INFINITY;
        for r in [0.9, 0.99, 0.999] {
            let v = open_baker(81, &ReflectivityProfile::step(r).unwrap()).unwrap().mat;
            let d = max_abs(&(v - &u));
            assert!(d < last);
            last = d;
        }
    }

    #[test]
    fn apply_matches_matmul() {
        let v = open_baker(9, &ReflectivityProfile::sinusoidal(0.3).unwrap()).unwrap();
        let x: Vec<C64> = (0..9).map(|i| C64::new(i as f64, 1.0 - i as f64)).collect();
        let y = v.apply(&x);
        let ya = v.apply_adjoint(&x);
        for i in 0..9 {
            let mut s = C64::new(0.0, 0.0);
            let mut sa = C64::new(0.0, 0.0);
            for j in 0..9 {
                s += v.mat[(i, j)] * x[j];
                sa += v.mat[(j, i)].conj() * x[j];
            }
            assert!((s - y[i]).norm() < 1e-12);
            assert!((sa - ya[i]).norm() < 1e-12);
        }
    }
}
