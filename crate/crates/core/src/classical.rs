//! Classical tribaker dynamics and the finite-time intensity measures.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reflectivity::{in_opening, ReflectivityProfile};

/// A point on the unit two-torus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub q: f64,
    pub p: f64,
}

impl PhasePoint {
    /// Builds a point, reducing both coordinates modulo one.
    pub fn new(q: f64, p: f64) -> Self {
        PhasePoint {
            q: wrap(q),
            p: wrap(p),
        }
    }
}

#[inline]
fn wrap(x: f64) -> f64 {
    let r = x - x.floor();
    // x.floor() can round r up to exactly 1.0 for tiny negative x
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

#[inline]
fn symbol(x: f64) -> f64 {
    (3.0 * x).floor().clamp(0.0, 2.0)
}

/// One step of the tribaker map.
#[inline]
pub fn tribaker_forward(x: PhasePoint) -> PhasePoint {
    let e = symbol(x.q);
    PhasePoint::new(3.0 * x.q - e, (x.p + e) / 3.0)
}

/// Inverse tribaker step; the branch is selected by the momentum symbol.
#[inline]
pub fn tribaker_backward(x: PhasePoint) -> PhasePoint {
    let e = symbol(x.p);
    PhasePoint::new((x.q + e) / 3.0, 3.0 * x.p - e)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
    Intersection,
}

impl Direction {
    pub fn name(self) -> &'static str {
        match self {
            Direction::Forward => "forward",
            Direction::Backward => "backward",
            Direction::Intersection => "intersection",
        }
    }
}

/// Sampling parameters for [`compute_measure`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureParams {
    /// Number of map steps.
    pub t: usize,
    /// Grid resolution; the torus is split into `K × K` cells.
    #[serde(rename = "K")]
    pub k: usize,
    /// Initial conditions drawn per cell.
    pub n_ic: usize,
    pub seed: u64,
}

impl Default for MeasureParams {
    fn default() -> Self {
        MeasureParams {
            t: 10,
            k: 243,
            n_ic: 100,
            seed: 20_170_301,
        }
    }
}

/// A finite-time measure on a `K × K` partition of the torus.
///
/// Cell `(a, b)` covers `q ∈ [a/K, (a+1)/K)` and `p ∈ [b/K, (b+1)/K)` and is
/// stored at index `a * K + b`, so CSV rows run over `q` and columns over `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureGrid {
    pub k: usize,
    pub t: usize,
    pub n_ic: usize,
    pub seed: u64,
    pub profile: ReflectivityProfile,
    pub direction: Direction,
    /// Normalized values; all zero when `zero_flag` is set.
    pub values: Vec<f64>,
    /// Mean surviving intensity per cell before normalization.
    pub raw: Vec<f64>,
    pub zero_flag: bool,
}

impl MeasureGrid {
    #[inline]
    pub fn at(&self, a: usize, b: usize) -> f64 {
        self.values[a * self.k + b]
    }

    /// Cell containing a phase-space point.
    pub fn cell_of(&self, x: PhasePoint) -> (usize, usize) {
        let k = self.k as f64;
        let a = ((x.q * k).floor() as usize).min(self.k - 1);
        let b = ((x.p * k).floor() as usize).min(self.k - 1);
        (a, b)
    }

    /// Mean raw intensity over the whole torus.
    pub fn total_intensity(&self) -> f64 {
        self.raw.iter().sum::<f64>() / self.raw.len() as f64
    }

    /// Grid reflected through the diagonal `(q, p) → (p, q)`.
    pub fn transposed(&self) -> Vec<f64> {
        let k = self.k;
        let mut out = vec![0.0; k * k];
        for a in 0..k {
            for b in 0..k {
                out[b * k + a] = self.values[a * k + b];
            }
        }
        out
    }
}

/// Cosine similarity of two equally sized grids.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

fn normalize(raw: &[f64]) -> (Vec<f64>, bool) {
    let total: f64 = raw.iter().sum();
    if total > 0.0 && total.is_finite() {
        (raw.iter().map(|v| v / total).collect(), false)
    } else {
        (vec![0.0; raw.len()], true)
    }
}

/// Evolves `n_ic` random points per cell for `t` steps, attenuating their
/// intensity by `F(q)` before every step taken from inside the opening.
///
/// Each cell draws from its own ChaCha stream (`seed`, stream = cell index),
/// so the result does not depend on how cells are scheduled.
pub fn compute_measure(
    profile: &ReflectivityProfile,
    direction: Direction,
    params: MeasureParams,
) -> Result<MeasureGrid> {
    profile.validate()?;
    let MeasureParams { t, k, n_ic, seed } = params;
    if k < 3 {
        return Err(Error::InvalidParameter(format!("grid resolution K = {k} must be ≥ 3")));
    }
    if n_ic == 0 {
        return Err(Error::InvalidParameter("N_ic must be ≥ 1".into()));
    }
    let step = match direction {
        Direction::Forward => tribaker_forward,
        Direction::Backward => tribaker_backward,
        Direction::Intersection => {
            let fwd = compute_measure(profile, Direction::Forward, params)?;
            let bwd = compute_measure(profile, Direction::Backward, params)?;
            return continuous_repeller(&fwd, &bwd);
        }
    };
    let width = 1.0 / k as f64;
    let raw: Vec<f64> = (0..k * k)
        .into_par_iter()
        .map(|cell| {
            let (a, b) = (cell / k, cell % k);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(cell as u64);
            let mut acc = 0.0;
            for _ in 0..n_ic {
                let mut x = PhasePoint::new(
                    (a as f64 + rng.gen::<f64>()) * width,
                    (b as f64 + rng.gen::<f64>()) * width,
                );
                let mut intensity = 1.0;
                for _ in 0..t {
                    if in_opening(x.q) {
                        intensity *= profile.value(x.q);
                    }
                    x = step(x);
                }
                acc += intensity;
            }
            acc / n_ic as f64
        })
        .collect();
    let (values, zero_flag) = normalize(&raw);
    Ok(MeasureGrid {
        k,
        t,
        n_ic,
        seed,
        profile: *profile,
        direction,
        values,
        raw,
        zero_flag,
    })
}

/// Cellwise product of forward and backward measures, renormalized.
pub fn continuous_repeller(fwd: &MeasureGrid, bwd: &MeasureGrid) -> Result<MeasureGrid> {
    if fwd.k != bwd.k || fwd.t != bwd.t || fwd.profile != bwd.profile {
        return Err(Error::InvalidParameter(
            "forward and backward grids differ in K, t or profile".into(),
        ));
    }
    let raw: Vec<f64> = fwd.values.iter().zip(&bwd.values).map(|(f, b)| f * b).collect();
    let (values, zero_flag) = normalize(&raw);
    Ok(MeasureGrid {
        k: fwd.k,
        t: fwd.t,
        n_ic: fwd.n_ic,
        seed: fwd.seed,
        profile: fwd.profile,
        direction: Direction::Intersection,
        values,
        raw,
        zero_flag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn close(a: PhasePoint, b: PhasePoint, tol: f64) -> bool {
        (a.q - b.q).abs() < tol && (a.p - b.p).abs() < tol
    }

    #[test]
    fn forward_examples() {
        assert_eq!(tribaker_forward(PhasePoint::new(0.0, 0.0)), PhasePoint::new(0.0, 0.0));
        assert!(close(
            tribaker_forward(PhasePoint::new(0.25, 0.75)),
            PhasePoint::new(0.75, 0.25),
            1e-15
        ));
        assert!(close(
            tribaker_forward(PhasePoint::new(0.5, 0.5)),
            PhasePoint::new(0.5, 0.5),
            1e-15
        ));
    }

    #[test]
    fn backward_examples() {
        assert!(close(
            tribaker_backward(PhasePoint::new(0.75, 0.25)),
            PhasePoint::new(0.25, 0.75),
            1e-15
        ));
        assert_eq!(tribaker_backward(PhasePoint::new(0.0, 0.0)), PhasePoint::new(0.0, 0.0));
    }

    #[test]
    fn round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut worst: f64 = 0.0;
        for _ in 0..10_000 {
            let x = PhasePoint::new(rng.gen(), rng.gen());
            let y = tribaker_backward(tribaker_forward(x));
            // compare on the torus
            let dq = (x.q - y.q).abs().min(1.0 - (x.q - y.q).abs());
            let dp = (x.p - y.p).abs().min(1.0 - (x.p - y.p).abs());
            worst = worst.max(dq).max(dp);
        }
        assert!(worst < 1e-12, "{worst}");
    }

    fn small(t: usize, k: usize, n_ic: usize) -> MeasureParams {
        MeasureParams { t, k, n_ic, seed: 11 }
    }

    #[test]
    fn closed_map_is_uniform() {
        let f = ReflectivityProfile::step(1.0).unwrap();
        for dir in [Direction::Forward, Direction::Backward, Direction::Intersection] {
            let g = compute_measure(&f, dir, small(6, 9, 5)).unwrap();
            for v in &g.values {
                assert!((v - 1.0 / 81.0).abs() < 1e-14);
            }
            assert!((g.values.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn middle_cell_dies_in_one_step() {
        let g = compute_measure(&ReflectivityProfile::complete(), Direction::Forward, small(1, 9, 20)).unwrap();
        // cell a = 4 covers q ∈ [4/9, 5/9)
        for b in 0..9 {
            assert_eq!(g.at(4, b), 0.0);
        }
        assert!((g.values.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_flag_instead_of_nan() {
        // survival probability per point is (2/3)^80
        let g = compute_measure(&ReflectivityProfile::complete(), Direction::Forward, small(80, 3, 1)).unwrap();
        assert!(g.zero_flag);
        assert!(g.values.iter().all(|v| *v == 0.0));
        let fwd = compute_measure(&ReflectivityProfile::complete(), Direction::Forward, small(1, 3, 4)).unwrap();
        let mut bwd = fwd.clone();
        bwd.values = vec![0.0; 9];
        bwd.values[4] = 1.0;
        let both = continuous_repeller(&fwd, &bwd).unwrap();
        assert!(both.zero_flag);
        assert!(both.values.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn rejects_bad_params() {
        let f = ReflectivityProfile::step(0.1).unwrap();
        assert!(compute_measure(&f, Direction::Forward, small(1, 2, 1)).is_err());
        assert!(compute_measure(&f, Direction::Forward, small(1, 9, 0)).is_err());
    }

    #[test]
    fn raising_floor_never_lowers_survival() {
        let p = small(8, 27, 20);
        let mut last = 0.0;
        for r in [0.0, 0.01, 0.1, 0.5, 1.0] {
            let g = compute_measure(&ReflectivityProfile::sinusoidal(r).unwrap(), Direction::Forward, p).unwrap();
            let total = g.total_intensity();
            assert!(total >= last);
            last = total;
        }
    }

    #[test]
    fn independent_of_scheduling() {
        let f = ReflectivityProfile::step(0.01).unwrap();
        let a = compute_measure(&f, Direction::Forward, small(5, 27, 10)).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| compute_measure(&f, Direction::Forward, small(5, 27, 10)).unwrap());
        assert_eq!(a.values, b.values);
    }
}
