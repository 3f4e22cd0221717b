//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line to stderr
//! (bypassing the harness capture) and then asserts.

use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use faer::Mat;
use num_complex::Complex64 as C64;

use tribaker::classical::{compute_measure, Direction, MeasureParams};
use tribaker::orbits::{enumerate_orbits, rank_outside_orbits, ActionConvention, SymbolicOrbit};
use tribaker::phase_space::{accumulate_q, overlap, HusimiSource, OverlapNorm};
use tribaker::quantum::{closed_baker, commutator_norm, open_baker, parity_operator, unitarity_defect, OperatorMatrix};
use tribaker::reflectivity::{ReflectivityProfile, Shape};
use tribaker::scar::ScarSettings;
use tribaker::semiclassical::{
    build_basis, drop_outside_disk, prefix_performance, scan_prefixes, semiclassical_states, solve_generalized,
    MatchParams, OrderingPolicy, PrefixScan, SemiclassicalBasis, DEFAULT_SIGMA_CUT,
};
use tribaker::spectral::{count_longlived, eigendecompose, local_dimension, max_conjugation_mismatch, ResonanceSet};

const N: usize = 243;
const EPSILON: f64 = 1e-3;
const TARGET_P: f64 = 0.8;
const R_GRID: [f64; 5] = [0.0, 0.001, 0.01, 0.05, 0.1];
const SHAPES: [Shape; 2] = [Shape::Step, Shape::Sinusoidal];

fn report(name: &str, pass: bool, detail: &str) {
    let status = if pass { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr().lock();
    writeln!(err, "[acceptance] {status} {name}: {detail}").unwrap();
}

fn nu_c(shape: Shape) -> f64 {
    match shape {
        Shape::Sinusoidal => 0.91,
        _ => 0.81,
    }
}

fn params(shape: Shape) -> MatchParams {
    MatchParams {
        nu_c: nu_c(shape),
        epsilon: EPSILON,
        target_p: TARGET_P,
        sigma_cut: DEFAULT_SIGMA_CUT,
    }
}

/// Spectrum and lazily built bases for one `(shape, R)` pair, shared across tests.
struct Case {
    shape: Shape,
    r: f64,
    profile: ReflectivityProfile,
    u: OperatorMatrix,
    exact: ResonanceSet,
    basis: OnceLock<SemiclassicalBasis>,
    scan: OnceLock<PrefixScan>,
}

impl Case {
    fn values(&self) -> Vec<C64> {
        self.exact.eigenvalues()
    }

    fn basis(&self) -> &SemiclassicalBasis {
        self.basis.get_or_init(|| {
            let inside = enumerate_orbits(7, &[0, 2]).unwrap();
            build_basis(
                &inside,
                &[],
                &self.u,
                ScarSettings::default(),
                ActionConvention::CoherentCentered,
                OrderingPolicy::PeriodFirst,
            )
            .unwrap()
        })
    }

    fn scan(&self) -> &PrefixScan {
        self.scan
            .get_or_init(|| scan_prefixes(self.basis(), &self.values(), params(self.shape)).unwrap())
    }
}

fn case(shape: Shape, r: f64) -> &'static Case {
    static CASES: OnceLock<Vec<(Shape, f64, OnceLock<Case>)>> = OnceLock::new();
    let cases = CASES.get_or_init(|| {
        SHAPES
            .iter()
            .flat_map(|&s| R_GRID.iter().map(move |&r| (s, r, OnceLock::new())))
            .collect()
    });
    let (_, _, cell) = cases
        .iter()
        .find(|(s, rr, _)| *s == shape && *rr == r)
        .expect("case is on the grid");
    cell.get_or_init(|| {
        let profile = ReflectivityProfile::new(shape, r).unwrap();
        let u = open_baker(N, &profile).unwrap();
        let exact = eigendecompose(&u.mat).unwrap();
        Case {
            shape,
            r,
            profile,
            u,
            exact,
            basis: OnceLock::new(),
            scan: OnceLock::new(),
        }
    })
}

fn complete_spectrum(n: usize) -> &'static [C64] {
    static S243: OnceLock<Vec<C64>> = OnceLock::new();
    static S81: OnceLock<Vec<C64>> = OnceLock::new();
    let cell = match n {
        243 => &S243,
        81 => &S81,
        _ => unreachable!(),
    };
    cell.get_or_init(|| {
        let u = open_baker(n, &ReflectivityProfile::complete()).unwrap();
        eigendecompose(&u.mat).unwrap().eigenvalues()
    })
}

#[test]
fn criterion_01_closed_map_validity() {
    let start = Instant::now();
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    for n in [27, 243] {
        let u = closed_baker(n).unwrap();
        let pi = parity_operator(n);
        worst.0 = worst.0.max(unitarity_defect(&u.mat));
        worst.1 = worst.1.max(commutator_norm(&u.mat, &pi.mat));
        let set = eigendecompose(&u.mat).unwrap();
        for z in set.eigenvalues() {
            worst.2 = worst.2.max((z.norm() - 1.0).abs());
        }
    }
    let elapsed = start.elapsed();
    let pass = worst.0 < 1e-10 && worst.1 < 1e-10 && worst.2 < 1e-8 && elapsed < Duration::from_secs(10);
    report(
        "1 closed-map validity",
        pass,
        &format!(
            "‖U†U−1‖={:.1e} ‖[U,Π]‖={:.1e} max||z|−1|={:.1e} in {:.1?}",
            worst.0, worst.1, worst.2, elapsed
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_02_contraction_and_symmetry() {
    let start = Instant::now();
    let mut max_modulus = 0.0f64;
    let mut max_comm = 0.0f64;
    let mut max_mismatch = 0.0f64;
    let mut open_cases = Vec::new();
    for shape in SHAPES {
        for r in [0.0, 0.001, 0.01, 0.1] {
            let c = case(shape, r);
            let pi = parity_operator(N);
            max_comm = max_comm.max(commutator_norm(&c.u.mat, &pi.mat));
            let values = c.values();
            max_modulus = values.iter().map(|z| z.norm()).fold(max_modulus, f64::max);
            let mismatch = max_conjugation_mismatch(&values);
            if mismatch > 1e-8 {
                open_cases.push(format!("{}:{}", shape.name(), r));
            }
            max_mismatch = max_mismatch.max(mismatch);
        }
    }
    let elapsed = start.elapsed();
    let contraction = max_modulus <= 1.0 + 1e-10;
    let parity = max_comm < 1e-10;
    let conjugation = max_mismatch <= 1e-8;
    let pass = contraction && parity && conjugation && elapsed < Duration::from_secs(120);
    report(
        "2 contraction and symmetry",
        pass,
        &format!(
            "max|z|={max_modulus:.6} ‖[Ũ,Π]‖={max_comm:.1e} conjugation mismatch={max_mismatch:.2e} \
             (not closed: {}) in {elapsed:.1?}",
            if open_cases.is_empty() { "none".to_string() } else { open_cases.join(" ") }
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_03_classical_decay() {
    let start = Instant::now();
    let params = MeasureParams {
        t: 5,
        k: 100,
        n_ic: 100,
        seed: 20_170_301,
    };
    let grid = compute_measure(&ReflectivityProfile::complete(), Direction::Forward, params).unwrap();
    let points = params.k * params.k * params.n_ic;
    let mean = grid.total_intensity();
    let expected = (2.0f64 / 3.0).powi(5);
    let rel = (mean - expected).abs() / expected;
    let elapsed = start.elapsed();
    let pass = points >= 1_000_000 && rel < 0.02 && elapsed < Duration::from_secs(30);
    report(
        "3 classical decay",
        pass,
        &format!("{points} points, mean={mean:.6} vs (2/3)^5={expected:.6}, rel={rel:.2e} in {elapsed:.1?}"),
    );
    assert!(pass);
}

#[test]
fn criterion_04_biorthogonal_completeness() {
    let n = 27;
    let u = open_baker(n, &ReflectivityProfile::constant(0.5).unwrap()).unwrap();
    let set = eigendecompose(&u.mat).unwrap();
    let mut sum = Mat::<C64>::zeros(n, n);
    for r in &set.resonances {
        let inv = r.pairing().inv();
        for i in 0..n {
            for j in 0..n {
                sum[(i, j)] += r.right[i] * r.left[j].conj() * inv;
            }
        }
    }
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((sum[(i, j)] - target).norm());
        }
    }
    let pass = worst < 1e-6;
    report(
        "4 biorthogonal completeness",
        pass,
        &format!("max |Σ ĥ_j − 1| = {worst:.2e}, {} defective", set.defective_count()),
    );
    assert!(pass);
}

#[test]
fn criterion_05_exact_vs_semiclassical_overlap() {
    let start = Instant::now();
    let mut details = Vec::new();
    let mut pass = true;
    for shape in SHAPES {
        for r in [0.01, 0.1] {
            let c = case(shape, r);
            let basis = c.basis();
            let sol = solve_generalized(basis.interaction.as_ref(), basis.overlap.as_ref(), DEFAULT_SIGMA_CUT).unwrap();
            let mut semi = semiclassical_states(basis, &sol);
            drop_outside_disk(&mut semi);
            let nu = nu_c(shape);
            let qe = accumulate_q(&c.exact, nu, 81, HusimiSource::Exact).unwrap();
            let qs = accumulate_q(&semi, nu, 81, HusimiSource::Semiclassical).unwrap();
            let o = overlap(&qe, &qs, OverlapNorm::Cosine).unwrap();
            pass &= o > 0.99;
            details.push(format!("{}:{} O={o:.4}", shape.name(), r));
        }
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(1800);
    report("5 exact/semiclassical overlap", pass, &format!("{} in {elapsed:.1?}", details.join(" ")));
    assert!(pass);
}

#[test]
fn criterion_06_performance() {
    let mut details = Vec::new();
    let mut pass = true;
    for r in R_GRID {
        let step = case(Shape::Step, r).scan();
        let sine = case(Shape::Sinusoidal, r).scan();
        let ok = step.reached && step.n_sf <= 232 && step.n_sf <= sine.n_sf;
        pass &= ok;
        details.push(format!(
            "R={r} step N_SF={} (P={:.3}{}) sin N_SF={} (P={:.3}{})",
            step.n_sf,
            step.p,
            if step.reached { "" } else { ", unreached" },
            sine.n_sf,
            sine.p,
            if sine.reached { "" } else { ", unreached" }
        ));
    }
    report("6 performance", pass, &details.join("; "));
    assert!(pass);
}

#[test]
fn criterion_07_outside_orbits() {
    let all = enumerate_orbits(7, &[0, 1, 2]).unwrap();
    let inside = enumerate_orbits(7, &[0, 2]).unwrap();
    let mut details = Vec::new();
    let mut pass = true;
    for shape in SHAPES {
        for r in R_GRID {
            let c = case(shape, r);
            let measure = compute_measure(&c.profile, Direction::Intersection, MeasureParams::default()).unwrap();
            let outside: Vec<SymbolicOrbit> = rank_outside_orbits(&all, &measure, 5).into_iter().map(|o| o.orbit).collect();
            let mixed = build_basis(
                &inside,
                &outside,
                &c.u,
                ScarSettings::default(),
                ActionConvention::CoherentCentered,
                OrderingPolicy::PeriodFirst,
            )
            .unwrap();
            let n_sf = c.scan().n_sf;
            let values = c.values();
            let p_inside = prefix_performance(c.basis(), &values, n_sf, params(shape)).unwrap();
            let p_mixed = prefix_performance(&mixed, &values, n_sf, params(shape)).unwrap();
            let delta = (p_mixed - p_inside).abs();
            pass &= delta < 0.1;
            details.push(format!("{}:{} N_SF={n_sf} ΔP={delta:.3}", shape.name(), c.r));
        }
    }
    report("7 outside-orbit robustness", pass, &details.join(" "));
    assert!(pass);
}

/// `d_loc` on a `ν_c` grid of spacing 0.01; `None` where undefined.
fn dloc_curve(upper: &[C64], lower: &[C64], from: usize, to: usize) -> Vec<(f64, Option<f64>)> {
    (from..=to)
        .map(|i| {
            let nu = i as f64 / 100.0;
            let m_n = count_longlived(upper, nu).unwrap();
            let m_l = count_longlived(lower, nu).unwrap();
            (nu, local_dimension(m_n, m_l).ok())
        })
        .collect()
}

#[test]
fn criterion_08_weyl_scaling() {
    let curve = dloc_curve(complete_spectrum(243), complete_spectrum(81), 0, 100);
    let target = 2f64.ln() / 3f64.ln();
    let mut best = (0.0, 0.0, 0.0);
    let mut run_start: Option<f64> = None;
    for &(nu, d) in &curve {
        match d {
            Some(d) if (d - target).abs() <= 0.15 => {
                let s = *run_start.get_or_insert(nu);
                if nu - s > best.0 {
                    best = (nu - s, s, nu);
                }
            }
            _ => run_start = None,
        }
    }
    let pass = best.0 >= 0.1 - 1e-12;
    report(
        "8 Weyl scaling",
        pass,
        &format!("widest window with |d_loc−ln2/ln3| ≤ 0.15: [{:.2}, {:.2}] (width {:.2})", best.1, best.2, best.0),
    );
    assert!(pass);
}

fn total_variation(curve: &[(f64, Option<f64>)]) -> f64 {
    let defined: Vec<f64> = curve.iter().filter_map(|&(_, d)| d).collect();
    defined.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

fn spectrum_at(shape: Shape, r: f64, n: usize) -> Vec<C64> {
    if n == N {
        return case(shape, r).values();
    }
    let u = open_baker(n, &ReflectivityProfile::new(shape, r).unwrap()).unwrap();
    eigendecompose(&u.mat).unwrap().eigenvalues()
}

#[test]
fn criterion_09_spectral_smoothness() {
    let reference = total_variation(&dloc_curve(complete_spectrum(243), complete_spectrum(81), 30, 80));
    let mut details = vec![format!("complete TV={reference:.3}")];
    let mut pass = true;
    for shape in SHAPES {
        for r in [0.01, 0.1] {
            let tv = total_variation(&dloc_curve(&spectrum_at(shape, r, N), &spectrum_at(shape, r, N / 3), 30, 80));
            pass &= tv < reference;
            details.push(format!("{}:{r} TV={tv:.3}", shape.name()));
        }
    }
    report("9 spectral smoothness", pass, &details.join(" "));
    assert!(pass);
}

fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let entry = entry.unwrap();
        let path = entry.path();
        if path.is_dir() {
            for (name, bytes) in read_tree(&path) {
                files.push((format!("{}/{name}", entry.file_name().to_string_lossy()), bytes));
            }
        } else {
            files.push((entry.file_name().to_string_lossy().into_owned(), std::fs::read(&path).unwrap()));
        }
    }
    files.sort();
    files
}

#[test]
fn criterion_10_determinism() {
    let exe = env!("CARGO_BIN_EXE_tribaker");
    let work = tempfile::tempdir().unwrap();
    let commands = [
        "classical-repeller",
        "exact-spectrum",
        "dloc",
        "scar-basis",
        "semiclassical",
        "husimi",
        "performance-scan",
    ];
    let args = ["--n", "27", "--k", "27", "--n-ic", "10", "--husimi-k", "27", "--l-max", "3"];
    let mut differing = Vec::new();
    for cmd in commands {
        let mut trees = Vec::new();
        for run in ["a", "b"] {
            let out = work.path().join(run).join(cmd);
            let status = Command::new(exe).arg(cmd).args(args).arg("--out").arg(&out).output().unwrap().status;
            assert!(status.success(), "{cmd} failed");
            trees.push(read_tree(&out));
        }
        if trees[0] != trees[1] || trees[0].is_empty() {
            differing.push(cmd);
        }
    }
    let pass = differing.is_empty();
    report(
        "10 determinism",
        pass,
        &if pass {
            format!("{} subcommands byte-identical across reruns", commands.len())
        } else {
            format!("outputs differ for {}", differing.join(", "))
        },
    );
    assert!(pass);
}

#[test]
fn invariant_sigma_cut_stability_band() {
    let cuts = [1e-8, 1e-7, 1e-6, 1e-5];
    let mut details = Vec::new();
    let mut pass = true;
    for shape in SHAPES {
        for r in [0.01, 0.1] {
            let c = case(shape, r);
            let values = c.values();
            let full = c.basis().len();
            let ps: Vec<f64> = cuts
                .iter()
                .map(|&sigma_cut| {
                    let p = MatchParams { sigma_cut, ..params(shape) };
                    prefix_performance(c.basis(), &values, full, p).unwrap()
                })
                .collect();
            let spread = ps.iter().cloned().fold(f64::MIN, f64::max) - ps.iter().cloned().fold(f64::MAX, f64::min);
            pass &= spread < 0.05;
            details.push(format!(
                "{}:{r} P={} ΔP={spread:.3}",
                shape.name(),
                ps.iter().map(|p| format!("{p:.3}")).collect::<Vec<_>>().join("/")
            ));
        }
    }
    report("σ_cut stability over [1e-8, 1e-5]", pass, &details.join(" "));
    assert!(pass);
}
