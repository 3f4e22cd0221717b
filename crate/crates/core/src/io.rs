//! On-disk formats: CSV grids with JSON sidecars, little-endian complex
//! binaries, spectrum/orbit/scar listings and scan tables.
//!
//! Every JSON document written here carries the hash of the configuration
//! that produced it.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::classical::{Direction, MeasureGrid};
use crate::error::{Error, Result};
use crate::orbits::{ActionConvention, OrbitGeometry};
use crate::phase_space::{HusimiGrid, HusimiSource};
use crate::quantum::{OperatorLabel, OperatorMatrix};
use crate::reflectivity::ReflectivityProfile;
use crate::scar::{ScarFunction, ThetaConvention};
use crate::semiclassical::PrefixScan;
use crate::spectral::ResonanceSet;

/// Writes through a temporary sibling and renames, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let s = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&s)?)
}

/// Refuses to combine files produced under different configurations.
pub fn ensure_same_config<'a>(hashes: impl IntoIterator<Item = &'a str>) -> Result<()> {
    let mut it = hashes.into_iter();
    if let Some(first) = it.next() {
        for h in it {
            if h != first {
                return Err(Error::Config(format!("mixed configurations: {first} vs {h}")));
            }
        }
    }
    Ok(())
}

// Grids.

/// Row-major `K × K` CSV, one grid row (fixed `q` cell) per line.
pub fn grid_to_csv(values: &[f64], k: usize) -> String {
    let mut s = String::with_capacity(values.len() * 12);
    for row in values.chunks(k) {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}

pub fn grid_from_csv(text: &str) -> Result<(usize, Vec<f64>)> {
    let mut values = Vec::new();
    let mut rows = 0;
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        for field in line.split(',') {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad grid value {field:?}")))?;
            values.push(v);
        }
        rows += 1;
    }
    if rows * rows != values.len() {
        return Err(Error::InvalidParameter(format!("grid is not square: {rows} rows, {} values", values.len())));
    }
    Ok((rows, values))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureSidecar {
    #[serde(rename = "K")]
    pub k: usize,
    pub t: usize,
    #[serde(rename = "N_ic")]
    pub n_ic: usize,
    pub seed: u64,
    pub profile: ReflectivityProfile,
    pub direction: Direction,
    pub zero_flag: bool,
    pub config_hash: String,
}

/// Writes `<stem>.csv` and `<stem>.json`.
pub fn write_measure_grid(dir: &Path, stem: &str, grid: &MeasureGrid, config_hash: &str) -> Result<()> {
    let meta = MeasureSidecar {
        k: grid.k,
        t: grid.t,
        n_ic: grid.n_ic,
        seed: grid.seed,
        profile: grid.profile,
        direction: grid.direction,
        zero_flag: grid.zero_flag,
        config_hash: config_hash.to_string(),
    };
    write_atomic(&dir.join(format!("{stem}.csv")), grid_to_csv(&grid.values, grid.k).as_bytes())?;
    write_json(&dir.join(format!("{stem}.json")), &meta)
}

pub fn read_measure_grid(dir: &Path, stem: &str) -> Result<(MeasureSidecar, Vec<f64>)> {
    let meta: MeasureSidecar = read_json(&dir.join(format!("{stem}.json")))?;
    let (k, values) = grid_from_csv(&fs::read_to_string(dir.join(format!("{stem}.csv")))?)?;
    if k != meta.k {
        return Err(Error::InvalidParameter(format!("sidecar K = {} but grid has {k} rows", meta.k)));
    }
    Ok((meta, values))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HusimiSidecar {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub source: HusimiSource,
    pub nu_c: Option<f64>,
    pub count: usize,
    pub skipped: usize,
    pub profile: ReflectivityProfile,
    pub config_hash: String,
}

pub fn write_husimi_grid(
    dir: &Path,
    stem: &str,
    grid: &HusimiGrid,
    profile: &ReflectivityProfile,
    config_hash: &str,
) -> Result<()> {
    let meta = HusimiSidecar {
        k: grid.k,
        n: grid.n,
        source: grid.source,
        nu_c: grid.nu_c,
        count: grid.count,
        skipped: grid.skipped,
        profile: *profile,
        config_hash: config_hash.to_string(),
    };
    write_atomic(&dir.join(format!("{stem}.csv")), grid_to_csv(&grid.values, grid.k).as_bytes())?;
    write_json(&dir.join(format!("{stem}.json")), &meta)
}

// Complex binaries.

/// Interleaved `(re, im)` little-endian `f64` pairs.
pub fn encode_complex(values: impl IntoIterator<Item = C64>) -> Vec<u8> {
    let mut out = Vec::new();
    for z in values {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    out
}

pub fn decode_complex(bytes: &[u8]) -> Result<Vec<C64>> {
    if bytes.len() % 16 != 0 {
        return Err(Error::InvalidParameter(format!("{} bytes is not a whole number of complex values", bytes.len())));
    }
    Ok(bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            C64::new(re, im)
        })
        .collect())
}

/// Row-major encoding of a dense matrix.
pub fn encode_matrix(m: &Mat<C64>) -> Vec<u8> {
    encode_complex((0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)])))
}

pub fn decode_matrix(bytes: &[u8], rows: usize, cols: usize) -> Result<Mat<C64>> {
    let v = decode_complex(bytes)?;
    if v.len() != rows * cols {
        return Err(Error::InvalidParameter(format!("expected {} entries, found {}", rows * cols, v.len())));
    }
    Ok(Mat::from_fn(rows, cols, |i, j| v[i * cols + j]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorHeader {
    #[serde(rename = "N")]
    pub n: usize,
    pub label: OperatorLabel,
    pub profile: Option<ReflectivityProfile>,
    pub config_hash: String,
}

/// Writes `<stem>.bin` and its header `<stem>.json`.
pub fn write_operator(
    dir: &Path,
    stem: &str,
    op: &OperatorMatrix,
    profile: Option<&ReflectivityProfile>,
    config_hash: &str,
) -> Result<()> {
    let header = OperatorHeader {
        n: op.dim(),
        label: op.label,
        profile: profile.copied(),
        config_hash: config_hash.to_string(),
    };
    write_atomic(&dir.join(format!("{stem}.bin")), &encode_matrix(&op.mat))?;
    write_json(&dir.join(format!("{stem}.json")), &header)
}

pub fn read_operator(dir: &Path, stem: &str) -> Result<(OperatorHeader, OperatorMatrix)> {
    let header: OperatorHeader = read_json(&dir.join(format!("{stem}.json")))?;
    let bytes = fs::read(dir.join(format!("{stem}.bin")))?;
    let mat = decode_matrix(&bytes, header.n, header.n)?;
    let op = OperatorMatrix::new(header.label, mat);
    Ok((header, op))
}

// Spectra.

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumFile {
    #[serde(rename = "N")]
    pub n: usize,
    pub profile: ReflectivityProfile,
    #[serde(rename = "R")]
    pub r: f64,
    pub nu_c: f64,
    /// Indices of resonances from numerically defective clusters.
    pub defective: Vec<usize>,
    pub config_hash: String,
    /// `[Re z, Im z]`, sorted by modulus descending then phase.
    pub values: Vec<[f64; 2]>,
}

impl SpectrumFile {
    pub fn new(set: &ResonanceSet, profile: &ReflectivityProfile, nu_c: f64, config_hash: &str) -> Self {
        SpectrumFile {
            n: set.n,
            profile: *profile,
            r: profile.r,
            nu_c,
            defective: (0..set.len()).filter(|&i| set.resonances[i].defective).collect(),
            config_hash: config_hash.to_string(),
            values: set.resonances.iter().map(|r| [r.z.re, r.z.im]).collect(),
        }
    }

    pub fn eigenvalues(&self) -> Vec<C64> {
        self.values.iter().map(|v| C64::new(v[0], v[1])).collect()
    }
}

/// Right and left eigenvectors as consecutive length-`N` blocks.
pub fn write_eigenvectors(dir: &Path, stem: &str, set: &ResonanceSet, config_hash: &str) -> Result<()> {
    let right = encode_complex(set.resonances.iter().flat_map(|r| r.right.iter().copied()));
    let left = encode_complex(set.resonances.iter().flat_map(|r| r.left.iter().copied()));
    write_atomic(&dir.join(format!("{stem}_right.bin")), &right)?;
    write_atomic(&dir.join(format!("{stem}_left.bin")), &left)?;
    write_json(
        &dir.join(format!("{stem}_vectors.json")),
        &VectorHeader {
            n: set.n,
            count: set.len(),
            config_hash: config_hash.to_string(),
        },
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorHeader {
    #[serde(rename = "N")]
    pub n: usize,
    pub count: usize,
    pub config_hash: String,
}

/// Splits a vector binary into length-`n` vectors.
pub fn decode_vectors(bytes: &[u8], n: usize) -> Result<Vec<Vec<C64>>> {
    let flat = decode_complex(bytes)?;
    if n == 0 || flat.len() % n != 0 {
        return Err(Error::InvalidParameter(format!("{} values do not split into vectors of {n}", flat.len())));
    }
    Ok(flat.chunks(n).map(|c| c.to_vec()).collect())
}

// Orbits.

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Reduced fraction `num/den`.
pub fn fraction(num: u64, den: u64) -> String {
    let g = gcd(num, den).max(1);
    format!("{}/{}", num / g, den / g)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitRecord {
    pub symbols: String,
    pub period: usize,
    /// `[q, p]` as exact fractions.
    pub points: Vec<[String; 2]>,
    #[serde(rename = "S_l")]
    pub step_actions: Vec<f64>,
    #[serde(rename = "S_gamma")]
    pub total_action: f64,
    pub in_repeller: bool,
}

impl From<&OrbitGeometry> for OrbitRecord {
    fn from(g: &OrbitGeometry) -> Self {
        OrbitRecord {
            symbols: g.orbit.to_string(),
            period: g.period(),
            points: g.rational.iter().map(|r| [fraction(r.q, r.den), fraction(r.p, r.den)]).collect(),
            step_actions: g.step_actions.clone(),
            total_action: g.total_action,
            in_repeller: g.in_repeller,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitList {
    pub action_convention: ActionConvention,
    pub config_hash: String,
    pub orbits: Vec<OrbitRecord>,
}

// Scar functions.

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScarRecord {
    pub symbols: String,
    pub m: usize,
    #[serde(rename = "A")]
    pub quasienergy: f64,
    pub tau: usize,
    pub in_repeller: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScarFile {
    #[serde(rename = "N")]
    pub n: usize,
    pub profile: ReflectivityProfile,
    #[serde(rename = "R")]
    pub r: f64,
    pub theta: ThetaConvention,
    pub config_hash: String,
    /// One entry per vector, in basis order, for both binaries.
    pub scars: Vec<ScarRecord>,
}

/// Writes `<stem>_right.bin`, `<stem>_left.bin` and `<stem>.json`.
pub fn write_scars(
    dir: &Path,
    stem: &str,
    scars: &[ScarFunction],
    profile: &ReflectivityProfile,
    theta: ThetaConvention,
    config_hash: &str,
) -> Result<()> {
    let n = scars.first().map_or(0, |s| s.right.len());
    let right = encode_complex(scars.iter().flat_map(|s| s.right.iter().copied()));
    let left = encode_complex(scars.iter().flat_map(|s| s.left.iter().copied()));
    write_atomic(&dir.join(format!("{stem}_right.bin")), &right)?;
    write_atomic(&dir.join(format!("{stem}_left.bin")), &left)?;
    let meta = ScarFile {
        n,
        profile: *profile,
        r: profile.r,
        theta,
        config_hash: config_hash.to_string(),
        scars: scars
            .iter()
            .map(|s| ScarRecord {
                symbols: s.orbit.to_string(),
                m: s.m,
                quasienergy: s.quasienergy,
                tau: s.tau,
                in_repeller: s.in_repeller,
            })
            .collect(),
    };
    write_json(&dir.join(format!("{stem}.json")), &meta)
}

// Tables.

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    #[serde(rename = "R")]
    pub r: f64,
    pub profile: String,
    pub nu_c: f64,
    pub epsilon: f64,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "N_SF")]
    pub n_sf: usize,
    #[serde(rename = "N_SF_over_N")]
    pub n_sf_over_n: f64,
    #[serde(rename = "P_reached")]
    pub p_reached: f64,
    pub reached_flag: bool,
}

impl ScanRow {
    pub const HEADER: &'static str = "R,profile,nu_c,epsilon,N,N_SF,N_SF_over_N,P_reached,reached_flag";

    pub fn new(profile: &ReflectivityProfile, n: usize, nu_c: f64, epsilon: f64, scan: &PrefixScan) -> Self {
        ScanRow {
            r: profile.r,
            profile: profile.shape.name().to_string(),
            nu_c,
            epsilon,
            n,
            n_sf: scan.n_sf,
            n_sf_over_n: scan.n_sf as f64 / n as f64,
            p_reached: scan.p,
            reached_flag: scan.reached,
        }
    }

    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.r,
            self.profile,
            self.nu_c,
            self.epsilon,
            self.n,
            self.n_sf,
            self.n_sf_over_n,
            self.p_reached,
            self.reached_flag
        )
    }

    pub fn parse(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 9 {
            return Err(Error::InvalidParameter(format!("scan row has {} fields", f.len())));
        }
        let bad = |what: &str| Error::InvalidParameter(format!("bad {what} in scan row {line:?}"));
        Ok(ScanRow {
            r: f[0].parse().map_err(|_| bad("R"))?,
            profile: f[1].to_string(),
            nu_c: f[2].parse().map_err(|_| bad("nu_c"))?,
            epsilon: f[3].parse().map_err(|_| bad("epsilon"))?,
            n: f[4].parse().map_err(|_| bad("N"))?,
            n_sf: f[5].parse().map_err(|_| bad("N_SF"))?,
            n_sf_over_n: f[6].parse().map_err(|_| bad("N_SF_over_N"))?,
            p_reached: f[7].parse().map_err(|_| bad("P_reached"))?,
            reached_flag: f[8].parse().map_err(|_| bad("reached_flag"))?,
        })
    }
}

pub fn scan_to_csv(rows: &[ScanRow]) -> String {
    let mut s = String::from(ScanRow::HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.to_csv_line());
        s.push('\n');
    }
    s
}

pub fn scan_from_csv(text: &str) -> Result<Vec<ScanRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == ScanRow::HEADER => {}
        _ => return Err(Error::InvalidParameter("missing scan header".into())),
    }
    lines.filter(|l| !l.trim().is_empty()).map(ScanRow::parse).collect()
}

/// Metadata written next to every CSV table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableSidecar {
    pub table: String,
    pub columns: Vec<String>,
    pub rows: usize,
    pub config_hash: String,
}

pub fn write_table(dir: &Path, stem: &str, header: &str, csv: &str, rows: usize, config_hash: &str) -> Result<()> {
    write_atomic(&dir.join(format!("{stem}.csv")), csv.as_bytes())?;
    write_json(
        &dir.join(format!("{stem}.json")),
        &TableSidecar {
            table: format!("{stem}.csv"),
            columns: header.split(',').map(String::from).collect(),
            rows,
            config_hash: config_hash.to_string(),
        },
    )
}
