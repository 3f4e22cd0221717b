//! Run configuration: TOML file, defaults, validation and hashing.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::orbits::{ActionConvention, MAX_PERIOD};
use crate::phase_space::OverlapNorm;
use crate::reflectivity::{ReflectivityProfile, Shape, DEFAULT_OFFSET, DEFAULT_STEEPNESS};
use crate::scar::{ScarSettings, ThetaConvention};
use crate::semiclassical::{MatchParams, OrderingPolicy, DEFAULT_SIGMA_CUT};
use crate::spectral::MAX_DIM;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileConfig {
    pub shape: Shape,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "A")]
    pub steepness: f64,
    #[serde(rename = "B")]
    pub offset: f64,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig {
            shape: Shape::Step,
            r: 0.01,
            steepness: DEFAULT_STEEPNESS,
            offset: DEFAULT_OFFSET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassicalConfig {
    pub t: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "N_ic")]
    pub n_ic: usize,
    pub seed: u64,
}

impl Default for ClassicalConfig {
    fn default() -> Self {
        let p = crate::classical::MeasureParams::default();
        ClassicalConfig {
            t: p.t,
            k: p.k,
            n_ic: p.n_ic,
            seed: p.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralConfig {
    /// Long-lived threshold; resolved per profile shape when absent.
    pub nu_c: Option<f64>,
    /// `ν_c` sweep used by `dloc`.
    pub nu_min: f64,
    pub nu_max: f64,
    pub nu_step: f64,
    /// Write eigenvector binaries next to the spectrum.
    pub store_vectors: bool,
    /// Floors visited by `dloc`; empty means the profile's own `R`.
    pub r_list: Vec<f64>,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig {
            nu_c: None,
            nu_min: 0.0,
            nu_max: 1.0,
            nu_step: 0.01,
            store_vectors: false,
            r_list: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScarConfig {
    #[serde(rename = "L_max")]
    pub l_max: usize,
    pub tau: Option<usize>,
    pub theta: ThetaConvention,
    pub action: ActionConvention,
    /// Outside orbits added to the basis, ranked by the classical measure.
    pub outside_orbits: usize,
}

impl Default for ScarConfig {
    fn default() -> Self {
        ScarConfig {
            l_max: 7,
            tau: None,
            theta: ThetaConvention::BeforeArrival,
            action: ActionConvention::CoherentCentered,
            outside_orbits: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SemiclassicalConfig {
    pub sigma_cut: f64,
    pub epsilon: f64,
    pub target_p: f64,
    pub ordering: OrderingPolicy,
    /// Reflectivity floors visited by `performance-scan`.
    pub r_grid: Vec<f64>,
}

impl Default for SemiclassicalConfig {
    fn default() -> Self {
        SemiclassicalConfig {
            sigma_cut: DEFAULT_SIGMA_CUT,
            epsilon: 1e-3,
            target_p: 0.8,
            ordering: OrderingPolicy::PeriodFirst,
            r_grid: vec![0.0, 0.001, 0.01, 0.05, 0.1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HusimiConfig {
    #[serde(rename = "K")]
    pub k: usize,
    pub overlap: OverlapNorm,
}

impl Default for HusimiConfig {
    fn default() -> Self {
        HusimiConfig {
            k: 243,
            overlap: OverlapNorm::Cosine,
        }
    }
}

/// Everything a command needs. The output directory is not part of the
/// hashed content, so identical runs written to different places compare
/// equal byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(skip_serializing)]
    pub output: Option<PathBuf>,
    pub profile: ProfileConfig,
    pub classical: ClassicalConfig,
    pub spectral: SpectralConfig,
    pub scar: ScarConfig,
    pub semiclassical: SemiclassicalConfig,
    pub husimi: HusimiConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n: 243,
            output: None,
            profile: ProfileConfig::default(),
            classical: ClassicalConfig::default(),
            spectral: SpectralConfig::default(),
            scar: ScarConfig::default(),
            semiclassical: SemiclassicalConfig::default(),
            husimi: HusimiConfig::default(),
        }
    }
}

/// Default long-lived threshold for a profile shape.
pub fn default_nu_c(shape: Shape) -> f64 {
    match shape {
        Shape::Sinusoidal => 0.91,
        _ => 0.81,
    }
}

pub fn is_power_of_three(mut n: usize) -> bool {
    if n < 3 {
        return false;
    }
    while n % 3 == 0 {
        n /= 3;
    }
    n == 1
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Fills in derived defaults and checks every field.
    pub fn resolve(mut self) -> Result<Self> {
        if self.spectral.nu_c.is_none() {
            self.spectral.nu_c = Some(default_nu_c(self.profile.shape));
        }
        if self.scar.tau.is_none() && self.n >= 3 {
            self.scar.tau = Some(crate::scar::ehrenfest_time(self.n));
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n > MAX_DIM {
            return Err(Error::ResourceGuard { n: self.n, max: MAX_DIM });
        }
        if !is_power_of_three(self.n) {
            return bad(format!("N = {} is not a power of 3", self.n));
        }
        self.reflectivity().map_err(|e| Error::Config(e.to_string()))?;
        let c = &self.classical;
        if c.k == 0 || c.n_ic == 0 {
            return bad("classical K and N_ic must be positive".into());
        }
        let s = &self.spectral;
        if let Some(nu) = s.nu_c {
            if !(0.0..=1.0).contains(&nu) {
                return bad(format!("nu_c = {nu} outside [0, 1]"));
            }
        }
        if !(0.0..=1.0).contains(&s.nu_min) || !(0.0..=1.0).contains(&s.nu_max) || s.nu_min > s.nu_max {
            return bad("nu_min/nu_max must satisfy 0 ≤ nu_min ≤ nu_max ≤ 1".into());
        }
        if s.r_list.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return bad("r_list values must lie in [0, 1]".into());
        }
        if !(s.nu_step > 0.0) {
            return bad("nu_step must be positive".into());
        }
        let sc = &self.scar;
        if sc.l_max == 0 || sc.l_max > MAX_PERIOD {
            return bad(format!("L_max must be in 1..={MAX_PERIOD}"));
        }
        if sc.tau == Some(0) {
            return bad("tau must be at least 1".into());
        }
        let sm = &self.semiclassical;
        if !(sm.sigma_cut > 0.0 && sm.sigma_cut < 1.0) {
            return bad("sigma_cut must lie in (0, 1)".into());
        }
        if !(sm.epsilon > 0.0) {
            return bad("epsilon must be positive".into());
        }
        if !(sm.target_p > 0.0 && sm.target_p <= 1.0) {
            return bad("target_p must lie in (0, 1]".into());
        }
        if sm.r_grid.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return bad("r_grid values must lie in [0, 1]".into());
        }
        if self.husimi.k == 0 {
            return bad("husimi K must be positive".into());
        }
        Ok(())
    }

    pub fn reflectivity(&self) -> Result<ReflectivityProfile> {
        ReflectivityProfile::step_with(self.profile.r, self.profile.steepness, self.profile.offset).and_then(|p| {
            let mut p = ReflectivityProfile { shape: self.profile.shape, ..p };
            if matches!(p.shape, Shape::Complete) {
                p.r = 0.0;
            }
            p.validate()?;
            Ok(p)
        })
    }

    /// Same profile at a different floor.
    pub fn reflectivity_at(&self, r: f64) -> Result<ReflectivityProfile> {
        let mut c = self.clone();
        c.profile.r = r;
        c.reflectivity()
    }

    pub fn nu_c(&self) -> f64 {
        self.spectral.nu_c.unwrap_or_else(|| default_nu_c(self.profile.shape))
    }

    pub fn measure_params(&self) -> crate::classical::MeasureParams {
        crate::classical::MeasureParams {
            t: self.classical.t,
            k: self.classical.k,
            n_ic: self.classical.n_ic,
            seed: self.classical.seed,
        }
    }

    pub fn scar_settings(&self) -> ScarSettings {
        ScarSettings {
            tau: self.scar.tau,
            theta: self.scar.theta,
        }
    }

    pub fn match_params(&self) -> MatchParams {
        MatchParams {
            nu_c: self.nu_c(),
            epsilon: self.semiclassical.epsilon,
            target_p: self.semiclassical.target_p,
            sigma_cut: self.semiclassical.sigma_cut,
        }
    }

    /// Canonical TOML of the resolved configuration.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of [`RunConfig::to_toml`], hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve() {
        let c = RunConfig::default().resolve().unwrap();
        assert_eq!(c.n, 243);
        assert_eq!(c.nu_c(), 0.81);
        assert_eq!(c.scar.tau, Some(5));
        assert_eq!(c.semiclassical.r_grid, vec![0.0, 0.001, 0.01, 0.05, 0.1]);
    }

    #[test]
    fn echo_round_trips_with_same_hash() {
        let c = RunConfig::from_toml("N = 81\n[profile]\nshape = \"sinusoidal\"\nR = 0.1\n")
            .unwrap()
            .resolve()
            .unwrap();
        assert_eq!(c.nu_c(), 0.91);
        let back = RunConfig::from_toml(&c.to_toml()).unwrap().resolve().unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        assert_eq!(c.hash().len(), 64);
    }

    #[test]
    fn output_does_not_change_hash() {
        let a = RunConfig::default().resolve().unwrap();
        let mut b = a.clone();
        b.output = Some("elsewhere".into());
        assert_eq!(a.hash(), b.hash());
    }

    #[test]
    fn rejects_bad_configs() {
        let cases = [
            "N = 240",
            "N = 1",
            "[profile]\nshape = \"step\"\nR = 1.5",
            "[spectral]\nnu_c = 1.2",
            "[scar]\ntau = 0",
            "[scar]\nL_max = 13",
            "[semiclassical]\nsigma_cut = 0.0",
            "[semiclassical]\nr_grid = [-0.1]",
            "bogus = 1",
        ];
        for text in cases {
            let err = RunConfig::from_toml(text).and_then(RunConfig::resolve).unwrap_err();
            assert!(matches!(err, Error::Config(_)), "{text}: {err}");
        }
    }

    #[test]
    fn large_dimension_hits_resource_guard() {
        let err = RunConfig::from_toml("N = 6561").unwrap().resolve().unwrap_err();
        assert!(matches!(err, Error::ResourceGuard { .. }));
    }

    #[test]
    fn powers_of_three() {
        assert!(is_power_of_three(3));
        assert!(is_power_of_three(243));
        assert!(!is_power_of_three(1));
        assert!(!is_power_of_three(162));
    }
}
