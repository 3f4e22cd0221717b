//! Torus coherent states on the antiperiodic position grid.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use crate::quantum::grid_point;

/// Winding terms kept on each side of the periodized Gaussian.
pub const DEFAULT_WINDINGS: i32 = 3;

/// Coherent state centred at `(q0, p0)`:
/// `Σ_ν (−1)^ν exp(−πN(q_j+ν−q0)² + 2πiN p0 (q_j+ν−q0))`, normalized.
pub fn coherent_state(n: usize, q0: f64, p0: f64) -> Vec<C64> {
    coherent_state_with(n, q0, p0, DEFAULT_WINDINGS)
}

pub fn coherent_state_with(n: usize, q0: f64, p0: f64, windings: i32) -> Vec<C64> {
    let nf = n as f64;
    let mut v: Vec<C64> = (0..n)
        .map(|j| {
            let q = grid_point(j, n);
            let mut acc = C64::new(0.0, 0.0);
            for nu in -windings..=windings {
                let x = q + nu as f64 - q0;
                let sign = if nu.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                acc += C64::from_polar(sign * (-PI * nf * x * x).exp(), 2.0 * PI * nf * p0 * x);
            }
            acc
        })
        .collect();
    normalize(&mut v);
    v
}

pub fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn normalize(v: &mut [C64]) {
    let s = norm(v);
    if s > 0.0 {
        for z in v.iter_mut() {
            *z /= s;
        }
    }
}

/// `⟨a|b⟩`, antilinear in the first argument.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_norm() {
        for n in [3, 27, 243] {
            let v = coherent_state(n, 0.3, 0.7);
            assert!((norm(&v) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn half_torus_separation() {
        let a = coherent_state(243, 0.2, 0.5);
        let b = coherent_state(243, 0.7, 0.5);
        assert!(inner(&a, &b).norm() < 1e-10);
    }

    #[test]
    fn winding_truncation() {
        for n in [27, 81, 243] {
            let a = coherent_state_with(n, 0.9, 0.1, 3);
            let b = coherent_state_with(n, 0.9, 0.1, 6);
            let d: Vec<C64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
            assert!(norm(&d) < 1e-12);
        }
    }

    #[test]
    fn peak_at_nearest_grid_point() {
        let n = 81;
        let q0 = 0.4;
        let v = coherent_state(n, q0, 0.3);
        let (best, _) = v
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().partial_cmp(&b.1.norm()).unwrap())
            .unwrap();
        let nearest = (0..n)
            .min_by(|&a, &b| {
                (grid_point(a, n) - q0).abs().partial_cmp(&(grid_point(b, n) - q0).abs()).unwrap()
            })
            .unwrap();
        assert_eq!(best, nearest);
    }
}
