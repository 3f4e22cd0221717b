//! Short periodic orbits of the tribaker map from symbolic dynamics.
//!
//! A primitive periodic orbit of period `L` corresponds one-to-one to a
//! Lyndon word of length `L` over the symbols `{0, 1, 2}`. Its points are
//! rationals with denominator `3^L − 1`: the position is the forward
//! itinerary read as a repeating ternary fraction and the momentum is the
//! past itinerary read the same way.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::classical::{MeasureGrid, PhasePoint};
use crate::error::{Error, Result};

/// Largest period the enumerator accepts.
pub const MAX_PERIOD: usize = 12;

/// A primitive periodic orbit, stored as its lexicographically minimal rotation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SymbolicOrbit {
    symbols: Vec<u8>,
}

impl SymbolicOrbit {
    /// Canonicalizes `symbols`; fails for empty, non-ternary or non-primitive words.
    pub fn new(symbols: &[u8]) -> Result<Self> {
        if symbols.is_empty() || symbols.len() > MAX_PERIOD {
            return Err(Error::InvalidParameter(format!(
                "orbit period {} outside 1..={MAX_PERIOD}",
                symbols.len()
            )));
        }
        if symbols.iter().any(|&s| s > 2) {
            return Err(Error::InvalidParameter("orbit symbols must be 0, 1 or 2".into()));
        }
        let l = symbols.len();
        let rotations = (0..l).map(|r| rotate(symbols, r));
        let canonical = rotations.clone().min().unwrap();
        // primitive iff all rotations are distinct
        let distinct = rotations.filter(|w| *w == canonical).count() == 1;
        if !distinct {
            return Err(Error::InvalidParameter(format!(
                "`{}` is a repetition of a shorter word",
                label(symbols)
            )));
        }
        Ok(SymbolicOrbit { symbols: canonical })
    }

    /// Parses a word such as `"0212"`.
    pub fn parse(word: &str) -> Result<Self> {
        let symbols: Option<Vec<u8>> = word
            .chars()
            .map(|c| c.to_digit(3).map(|d| d as u8))
            .collect();
        match symbols {
            Some(s) => Self::new(&s),
            None => Err(Error::InvalidParameter(format!("`{word}` is not a ternary word"))),
        }
    }

    pub fn symbols(&self) -> &[u8] {
        &self.symbols
    }

    pub fn period(&self) -> usize {
        self.symbols.len()
    }

    /// Orbits avoiding symbol 1 never visit the opening and belong to the repeller.
    pub fn in_repeller(&self) -> bool {
        !self.symbols.contains(&1)
    }
}

impl fmt::Display for SymbolicOrbit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&label(&self.symbols))
    }
}

/// Orders by period, then lexicographically.
impl Ord for SymbolicOrbit {
    fn cmp(&self, other: &Self) -> Ordering {
        self.period()
            .cmp(&other.period())
            .then_with(|| self.symbols.cmp(&other.symbols))
    }
}

impl PartialOrd for SymbolicOrbit {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn rotate(s: &[u8], r: usize) -> Vec<u8> {
    s[r..].iter().chain(&s[..r]).copied().collect()
}

fn label(s: &[u8]) -> String {
    s.iter().map(|d| char::from(b'0' + d)).collect()
}

/// All primitive periodic orbits of period `1..=l_max` over `alphabet`.
///
/// Uses Duval's generation of Lyndon words; output sorted by period then
/// lexicographically.
pub fn enumerate_orbits(l_max: usize, alphabet: &[u8]) -> Result<Vec<SymbolicOrbit>> {
    if l_max == 0 || l_max > MAX_PERIOD {
        return Err(Error::InvalidParameter(format!("L_max = {l_max} outside 1..={MAX_PERIOD}")));
    }
    let mut letters: Vec<u8> = alphabet.to_vec();
    letters.sort_unstable();
    letters.dedup();
    if letters.is_empty() || letters.iter().any(|&s| s > 2) {
        return Err(Error::InvalidParameter("alphabet must be a nonempty subset of {0, 1, 2}".into()));
    }
    let k = letters.len();
    let mut out = Vec::new();
    // words over indices 0..k, mapped to letters on emission
    let mut w: Vec<usize> = vec![0];
    loop {
        out.push(SymbolicOrbit {
            symbols: w.iter().map(|&i| letters[i]).collect(),
        });
        let m = w.len();
        while w.len() < l_max {
            let c = w[w.len() - m];
            w.push(c);
        }
        while let Some(&last) = w.last() {
            if last == k - 1 {
                w.pop();
            } else {
                break;
            }
        }
        match w.last_mut() {
            Some(last) => *last += 1,
            None => break,
        }
    }
    out.sort();
    Ok(out)
}

/// Sign/gauge convention used for the one-step actions `S_l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActionConvention {
    /// `S_l = 3 q_l p_{l+1} − ε_l (q_l + p_{l+1})`.
    MixedGenerating,
    /// Phase picked up between centred coherent states:
    /// `S_l = ε_l q_l − ε_l²/3`.
    CoherentCentered,
}

/// Exact phase-space point: numerators over the orbit denominator `3^L − 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationalPoint {
    pub q: u64,
    pub p: u64,
    pub den: u64,
}

impl RationalPoint {
    pub fn to_f64(self) -> (f64, f64) {
        (self.q as f64 / self.den as f64, self.p as f64 / self.den as f64)
    }
}

/// Points and actions of one periodic orbit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrbitGeometry {
    pub orbit: SymbolicOrbit,
    pub rational: Vec<RationalPoint>,
    /// Points reduced to the torus.
    pub points: Vec<PhasePoint>,
    pub step_actions: Vec<f64>,
    pub total_action: f64,
    pub in_repeller: bool,
    pub convention: ActionConvention,
}

impl OrbitGeometry {
    pub fn period(&self) -> usize {
        self.orbit.period()
    }

    /// Accumulated action before arriving at point `j`: `Σ_{l<j} S_l`.
    pub fn phase_before(&self, j: usize) -> f64 {
        self.step_actions[..j].iter().sum()
    }

    /// Accumulated action including step `j`: `Σ_{l≤j} S_l`.
    pub fn phase_through(&self, j: usize) -> f64 {
        self.step_actions[..=j].iter().sum()
    }
}

/// Exact geometry of `orbit` under the given action convention.
pub fn orbit_geometry(orbit: &SymbolicOrbit, convention: ActionConvention) -> OrbitGeometry {
    let s = orbit.symbols();
    let l = s.len();
    let den = 3u64.pow(l as u32) - 1;
    let ternary = |digits: &mut dyn Iterator<Item = u8>| -> u64 {
        digits.fold(0u64, |acc, d| acc * 3 + d as u64)
    };
    let rational: Vec<RationalPoint> = (0..l)
        .map(|j| {
            let q = ternary(&mut (0..l).map(|k| s[(j + k) % l]));
            let p = ternary(&mut (0..l).map(|k| s[(j + 2 * l - 1 - k) % l]));
            RationalPoint { q, p, den }
        })
        .collect();
    debug_assert!(verify_periodic(s, &rational));
    let step_actions: Vec<f64> = (0..l)
        .map(|j| {
            let here = rational[j];
            let next = rational[(j + 1) % l];
            step_action(s[j], here, next, convention)
        })
        .collect();
    let points = rational
        .iter()
        .map(|r| {
            let (q, p) = r.to_f64();
            PhasePoint::new(q, p)
        })
        .collect();
    OrbitGeometry {
        orbit: orbit.clone(),
        rational,
        points,
        total_action: step_actions.iter().sum(),
        step_actions,
        in_repeller: orbit.in_repeller(),
        convention,
    }
}

fn step_action(eps: u8, here: RationalPoint, next: RationalPoint, convention: ActionConvention) -> f64 {
    let d = here.den as i128;
    let e = eps as i128;
    let q = here.q as i128;
    let p1 = next.p as i128;
    match convention {
        ActionConvention::MixedGenerating => {
            let num = 3 * q * p1 - e * d * (q + p1);
            num as f64 / (d * d) as f64
        }
        ActionConvention::CoherentCentered => {
            let num = 3 * e * q - e * e * d;
            num as f64 / (3 * d) as f64
        }
    }
}

/// Checks `B(x_j) = x_{j+1}` in exact integer arithmetic.
pub fn verify_periodic(symbols: &[u8], points: &[RationalPoint]) -> bool {
    let l = symbols.len();
    (0..l).all(|j| {
        let x = points[j];
        let y = points[(j + 1) % l];
        let d = x.den;
        let e = symbols[j] as u64;
        // q' = 3q − ε, p' = (p + ε)/3, numerators over d
        3 * x.q == y.q + e * d && 3 * y.p == x.p + e * d
    })
}

/// Outside orbit with its measure score.
#[derive(Debug, Clone)]
pub struct RankedOrbit {
    pub orbit: SymbolicOrbit,
    pub score: f64,
}

/// Scores orbits that visit the opening by the mean measure over the cells
/// holding their points and keeps the `n_max` best.
///
/// Ties fall back to the orbit order (shorter period, then lexicographic).
pub fn rank_outside_orbits(orbits: &[SymbolicOrbit], measure: &MeasureGrid, n_max: usize) -> Vec<RankedOrbit> {
    let mut ranked: Vec<RankedOrbit> = orbits
        .iter()
        .filter(|o| !o.in_repeller())
        .map(|o| {
            let g = orbit_geometry(o, ActionConvention::MixedGenerating);
            let score = g
                .points
                .iter()
                .map(|&x| {
                    let (a, b) = measure.cell_of(x);
                    measure.at(a, b)
                })
                .sum::<f64>()
                / g.points.len() as f64;
            RankedOrbit { orbit: o.clone(), score }
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.orbit.cmp(&b.orbit))
    });
    ranked.truncate(n_max);
    ranked
}
