//! End-to-end jobs behind the command-line subcommands. Each job writes its
//! data files plus `config.toml` (the resolved configuration) into the
//! output directory and returns the paths it wrote.

use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classical::{compute_measure, continuous_repeller, Direction, MeasureGrid};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::io::{self, OrbitList, OrbitRecord, ScanRow, SpectrumFile};
use crate::orbits::{enumerate_orbits, orbit_geometry, rank_outside_orbits, SymbolicOrbit};
use crate::phase_space::{accumulate_q, overlap, HusimiGrid, HusimiSource, OverlapNorm};
use crate::quantum::{open_baker, OperatorMatrix};
use crate::reflectivity::{ReflectivityProfile, Shape};
use crate::semiclassical::{
    build_basis, drop_outside_disk, eigenvector_pencil, performance, scan_pencil, scan_prefixes,
    semiclassical_states, solve_generalized, PerformanceReport, PrefixScan, SemiclassicalBasis,
};
use crate::spectral::{count_longlived, eigendecompose, local_dimension, ResonanceSet};

const REPELLER_ALPHABET: [u8; 2] = [0, 2];
const FULL_ALPHABET: [u8; 3] = [0, 1, 2];

/// Collects written paths and stamps the configuration echo.
struct Output<'a> {
    dir: &'a Path,
    hash: String,
    written: Vec<PathBuf>,
}

impl<'a> Output<'a> {
    fn new(dir: &'a Path, cfg: &RunConfig) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join("config.toml");
        io::write_atomic(&path, cfg.to_toml().as_bytes())?;
        Ok(Output {
            dir,
            hash: cfg.hash(),
            written: vec![path],
        })
    }

    fn add(&mut self, names: &[String]) {
        self.written.extend(names.iter().map(|n| self.dir.join(n)));
    }
}

fn pair(stem: &str, a: &str, b: &str) -> Vec<String> {
    vec![format!("{stem}.{a}"), format!("{stem}.{b}")]
}

/// Forward, backward and intersection measures.
pub fn classical_grids(cfg: &RunConfig, profile: &ReflectivityProfile) -> Result<[MeasureGrid; 3]> {
    let params = cfg.measure_params();
    let fwd = compute_measure(profile, Direction::Forward, params)?;
    let bwd = compute_measure(profile, Direction::Backward, params)?;
    let both = continuous_repeller(&fwd, &bwd)?;
    Ok([fwd, bwd, both])
}

pub fn classical_repeller(cfg: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Output::new(dir, cfg)?;
    let profile = cfg.reflectivity()?;
    for grid in classical_grids(cfg, &profile)? {
        let stem = format!("measure_{}", grid.direction.name());
        io::write_measure_grid(dir, &stem, &grid, &out.hash)?;
        out.add(&pair(&stem, "csv", "json"));
    }
    Ok(out.written)
}

/// Propagator and full spectrum for one profile.
pub fn exact_resonances(n: usize, profile: &ReflectivityProfile) -> Result<(OperatorMatrix, ResonanceSet)> {
    let u = open_baker(n, profile)?;
    let set = eigendecompose(&u.mat)?;
    Ok((u, set))
}

pub fn exact_spectrum(cfg: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Output::new(dir, cfg)?;
    let profile = cfg.reflectivity()?;
    let (_, set) = exact_resonances(cfg.n, &profile)?;
    io::write_json(&dir.join("spectrum.json"), &SpectrumFile::new(&set, &profile, cfg.nu_c(), &out.hash))?;
    out.add(&["spectrum.json".into()]);
    if cfg.spectral.store_vectors {
        io::write_eigenvectors(dir, "eigenvectors", &set, &out.hash)?;
        out.add(&[
            "eigenvectors_right.bin".into(),
            "eigenvectors_left.bin".into(),
            "eigenvectors_vectors.json".into(),
        ]);
    }
    Ok(out.written)
}

/// `ν_c` sweep `nu_min, nu_min + step, …, ≤ nu_max`, rounded to 10 digits.
pub fn nu_grid(cfg: &RunConfig) -> Vec<f64> {
    let s = &cfg.spectral;
    let steps = ((s.nu_max - s.nu_min) / s.nu_step + 1e-9).floor() as usize;
    (0..=steps)
        .map(|i| ((s.nu_min + i as f64 * s.nu_step) * 1e10).round() / 1e10)
        .collect()
}

/// One row of the local-dimension table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DlocRow {
    pub n: usize,
    pub n_lower: usize,
    pub profile: String,
    pub r: f64,
    pub nu_c: f64,
    pub m_n: usize,
    pub m_lower: usize,
    /// `None` when either count is zero.
    pub d_loc: Option<f64>,
}

pub const DLOC_HEADER: &str = "N,N_lower,profile,R,nu_c,M_N,M_N3,d_loc,defined";

impl DlocRow {
    fn to_csv_line(&self) -> String {
        let d = self.d_loc.map(|d| d.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.n,
            self.n_lower,
            self.profile,
            self.r,
            self.nu_c,
            self.m_n,
            self.m_lower,
            d,
            self.d_loc.is_some()
        )
    }
}

/// `d_loc(ν_c)` from two persisted spectra of the same run.
pub fn dloc_from_spectra(upper: &SpectrumFile, lower: &SpectrumFile, nus: &[f64]) -> Result<Vec<DlocRow>> {
    io::ensure_same_config([upper.config_hash.as_str(), lower.config_hash.as_str()])?;
    if upper.n != 3 * lower.n || upper.profile != lower.profile {
        return Err(Error::InvalidParameter("spectra must share the profile with N_upper = 3 N_lower".into()));
    }
    let zu = upper.eigenvalues();
    let zl = lower.eigenvalues();
    nus.iter()
        .map(|&nu| {
            let m_n = count_longlived(&zu, nu)?;
            let m_lower = count_longlived(&zl, nu)?;
            let d_loc = match local_dimension(m_n, m_lower) {
                Ok(d) => Some(d),
                Err(Error::Undefined(_)) => None,
                Err(e) => return Err(e),
            };
            Ok(DlocRow {
                n: upper.n,
                n_lower: lower.n,
                profile: upper.profile.shape.name().to_string(),
                r: upper.r,
                nu_c: nu,
                m_n,
                m_lower,
                d_loc,
            })
        })
        .collect()
}

/// Floors visited by `dloc`: the configured list, or the profile's own `R`.
fn dloc_floors(cfg: &RunConfig) -> Vec<f64> {
    if cfg.spectral.r_list.is_empty() || cfg.profile.shape == Shape::Complete {
        vec![cfg.profile.r]
    } else {
        cfg.spectral.r_list.clone()
    }
}

pub fn dloc(cfg: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Output::new(dir, cfg)?;
    let lower_n = cfg.n / 3;
    if lower_n < 3 {
        return Err(Error::Config(format!("N = {} leaves no N/3 ≥ 3 to compare with", cfg.n)));
    }
    let nus = nu_grid(cfg);
    let mut rows = Vec::new();
    for r in dloc_floors(cfg) {
        let profile = cfg.reflectivity_at(r)?;
        let mut files = Vec::new();
        for n in [cfg.n, lower_n] {
            let (_, set) = exact_resonances(n, &profile)?;
            let name = format!("spectrum_{}_R{}_N{}.json", profile.shape.name(), r, n);
            io::write_json(&dir.join(&name), &SpectrumFile::new(&set, &profile, cfg.nu_c(), &out.hash))?;
            out.add(&[name.clone()]);
            files.push(name);
        }
        // recompute from what was persisted, not from memory
        let upper: SpectrumFile = io::read_json(&dir.join(&files[0]))?;
        let lower: SpectrumFile = io::read_json(&dir.join(&files[1]))?;
        rows.extend(dloc_from_spectra(&upper, &lower, &nus)?);
    }
    let mut csv = String::from(DLOC_HEADER);
    csv.push('\n');
    for row in &rows {
        csv.push_str(&row.to_csv_line());
        csv.push('\n');
    }
    io::write_table(dir, "dloc", DLOC_HEADER, &csv, rows.len(), &out.hash)?;
    out.add(&pair("dloc", "csv", "json"));
    Ok(out.written)
}

/// Repeller orbits up to `L_max` plus the configured number of outside
/// orbits ranked by the classical intersection measure.
pub fn select_orbits(cfg: &RunConfig, profile: &ReflectivityProfile) -> Result<(Vec<SymbolicOrbit>, Vec<SymbolicOrbit>)> {
    let inside = enumerate_orbits(cfg.scar.l_max, &REPELLER_ALPHABET)?;
    let outside = if cfg.scar.outside_orbits > 0 {
        let all = enumerate_orbits(cfg.scar.l_max, &FULL_ALPHABET)?;
        let measure = compute_measure(profile, Direction::Intersection, cfg.measure_params())?;
        rank_outside_orbits(&all, &measure, cfg.scar.outside_orbits)
            .into_iter()
            .map(|r| r.orbit)
            .collect()
    } else {
        Vec::new()
    };
    Ok((inside, outside))
}

pub fn basis_for(cfg: &RunConfig, u: &OperatorMatrix, profile: &ReflectivityProfile) -> Result<SemiclassicalBasis> {
    let (inside, outside) = select_orbits(cfg, profile)?;
    build_basis(&inside, &outside, u, cfg.scar_settings(), cfg.scar.action, cfg.semiclassical.ordering)
}

pub fn scar_basis(cfg: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Output::new(dir, cfg)?;
    let profile = cfg.reflectivity()?;
    let u = open_baker(cfg.n, &profile)?;
    let (inside, outside) = select_orbits(cfg, &profile)?;
    let orbits = OrbitList {
        action_convention: cfg.scar.action,
        config_hash: out.hash.clone(),
        orbits: inside
            .iter()
            .chain(&outside)
            .map(|o| OrbitRecord::from(&orbit_geometry(o, cfg.scar.action)))
            .collect(),
    };
    io::write_json(&dir.join("orbits.json"), &orbits)?;
    out.add(&["orbits.json".into()]);
    let basis = build_basis(&inside, &outside, &u, cfg.scar_settings(), cfg.scar.action, cfg.semiclassical.ordering)?;
    io::write_scars(dir, "scars", &basis.scars, &profile, cfg.scar.theta, &out.hash)?;
    out.add(&["scars_right.bin".into(), "scars_left.bin".into(), "scars.json".into()]);
    Ok(out.written)
}

/// Summary written by the `semiclassical` job.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SemiclassicalSummary {
    #[serde(rename = "N")]
    pub n: usize,
    pub profile: ReflectivityProfile,
    pub basis_size: usize,
    pub retained_directions: usize,
    pub excluded_pairs: usize,
    /// Semiclassical eigenvalues dropped for lying outside the unit disk.
    pub outside_disk: Vec<[f64; 2]>,
    pub performance: PerformanceReport,
    pub scan: PrefixScan,
    /// Overlap of the exact and semiclassical accumulated Husimi grids.
    #[serde(rename = "O")]
    pub overlap: Option<f64>,
    pub overlap_norm: OverlapNorm,
    pub diagnostic: bool,
    pub config_hash: String,
}

/// In-memory result of the semiclassical job.
pub struct SemiclassicalRun {
    pub exact: ResonanceSet,
    pub semiclassical: ResonanceSet,
    pub summary: SemiclassicalSummary,
    pub q_exact: Option<HusimiGrid>,
    pub q_semiclassical: Option<HusimiGrid>,
}

/// Builds the basis, solves the regularized pencil on the full basis and
/// compares with the exact spectrum. With `diagnostic`, the basis is the
/// exact eigenvectors themselves.
pub fn run_semiclassical(cfg: &RunConfig, profile: &ReflectivityProfile, husimi: bool, diagnostic: bool) -> Result<SemiclassicalRun> {
    let (u, exact) = exact_resonances(cfg.n, profile)?;
    let values = exact.eigenvalues();
    let params = cfg.match_params();
    let nu_c = params.nu_c;
    let (semi, basis_size, retained, excluded, scan) = if diagnostic {
        let (a, s) = eigenvector_pencil(&exact, &u);
        let sol = solve_generalized(a.as_ref(), s.as_ref(), params.sigma_cut)?;
        let scan = scan_pencil(a.as_ref(), s.as_ref(), &values, params)?;
        let mut semi = sol.reduced.clone();
        // coefficients over the eigenvector basis map back onto Hilbert space
        for (r, (c, d)) in semi.resonances.iter_mut().zip(sol.right_coeffs.iter().zip(&sol.left_coeffs)) {
            r.right = combine(&exact, c, true);
            r.left = combine(&exact, d, false);
            r.defective = r.defective || crate::spectral::balance_pair(&mut r.right, &mut r.left).is_err();
        }
        semi.n = exact.n;
        (semi, exact.len(), sol.retained, 0, scan)
    } else {
        let basis = basis_for(cfg, &u, profile)?;
        let sol = solve_generalized(basis.interaction.as_ref(), basis.overlap.as_ref(), params.sigma_cut)?;
        let semi = semiclassical_states(&basis, &sol);
        let scan = scan_prefixes(&basis, &values, params)?;
        (semi, basis.len(), sol.retained, basis.excluded.len(), scan)
    };
    let mut semi = semi;
    let dropped = drop_outside_disk(&mut semi);
    let report = performance(&values, &semi.eigenvalues(), nu_c, params.epsilon, basis_size)?;
    let (q_exact, q_semi, o) = if husimi {
        let k = cfg.husimi.k;
        let qe = accumulate_q(&exact, nu_c, k, HusimiSource::Exact)?;
        let qs = accumulate_q(&semi, nu_c, k, HusimiSource::Semiclassical)?;
        let o = overlap(&qe, &qs, cfg.husimi.overlap)?;
        (Some(qe), Some(qs), Some(o))
    } else {
        (None, None, None)
    };
    let summary = SemiclassicalSummary {
        n: cfg.n,
        profile: *profile,
        basis_size,
        retained_directions: retained,
        excluded_pairs: excluded,
        outside_disk: dropped.iter().map(|z| [z.re, z.im]).collect(),
        performance: report,
        scan,
        overlap: o,
        overlap_norm: cfg.husimi.overlap,
        diagnostic,
        config_hash: cfg.hash(),
    };
    Ok(SemiclassicalRun {
        exact,
        semiclassical: semi,
        summary,
        q_exact,
        q_semiclassical: q_semi,
    })
}

fn combine(exact: &ResonanceSet, coeffs: &[C64], right: bool) -> Vec<C64> {
    let mut v = vec![C64::new(0.0, 0.0); exact.n];
    for (c, r) in coeffs.iter().zip(&exact.resonances) {
        let src = if right { &r.right } else { &r.left };
        for (vi, si) in v.iter_mut().zip(src) {
            *vi += c * si;
        }
    }
    v
}

pub fn semiclassical(cfg: &RunConfig, dir: &Path, diagnostic: bool) -> Result<Vec<PathBuf>> {
    let mut out = Output::new(dir, cfg)?;
    let profile = cfg.reflectivity()?;
    let run = run_semiclassical(cfg, &profile, true, diagnostic)?;
    io::write_json(
        &dir.join("semiclassical_spectrum.json"),
        &SpectrumFile::new(&run.semiclassical, &profile, cfg.nu_c(), &out.hash),
    )?;
    io::write_json(&dir.join("semiclassical.json"), &run.summary)?;
    out.add(&["semiclassical_spectrum.json".into(), "semiclassical.json".into()]);
    let row = ScanRow::new(&profile, cfg.n, cfg.nu_c(), cfg.semiclassical.epsilon, &run.summary.scan);
    io::write_table(dir, "nsf_scan", ScanRow::HEADER, &io::scan_to_csv(&[row]), 1, &out.hash)?;
    out.add(&pair("nsf_scan", "csv", "json"));
    for (stem, grid) in [("q_exact", &run.q_exact), ("q_semiclassical", &run.q_semiclassical)] {
        if let Some(g) = grid {
            io::write_husimi_grid(dir, stem, g, &profile, &out.hash)?;
            out.add(&pair(stem, "csv", "json"));
        }
    }
    Ok(out.written)
}

pub fn husimi(cfg: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Output::new(dir, cfg)?;
    let profile = cfg.reflectivity()?;
    let (_, set) = exact_resonances(cfg.n, &profile)?;
    let grid = accumulate_q(&set, cfg.nu_c(), cfg.husimi.k, HusimiSource::Exact)?;
    io::write_husimi_grid(dir, "q_exact", &grid, &profile, &out.hash)?;
    out.add(&pair("q_exact", "csv", "json"));
    Ok(out.written)
}

/// `N_SF` needed at one floor.
pub fn scan_floor(cfg: &RunConfig, r: f64) -> Result<ScanRow> {
    let profile = cfg.reflectivity_at(r)?;
    let (u, exact) = exact_resonances(cfg.n, &profile)?;
    let basis = basis_for(cfg, &u, &profile)?;
    let scan = scan_prefixes(&basis, &exact.eigenvalues(), cfg.match_params())?;
    Ok(ScanRow::new(&profile, cfg.n, cfg.nu_c(), cfg.semiclassical.epsilon, &scan))
}

pub fn performance_scan(cfg: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Output::new(dir, cfg)?;
    let rows: Vec<ScanRow> = cfg
        .semiclassical
        .r_grid
        .par_iter()
        .map(|&r| scan_floor(cfg, r))
        .collect::<Result<_>>()?;
    io::write_table(dir, "nsf_scan", ScanRow::HEADER, &io::scan_to_csv(&rows), rows.len(), &out.hash)?;
    out.add(&pair("nsf_scan", "csv", "json"));
    Ok(out.written)
}
