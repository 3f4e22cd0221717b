use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tribaker::config::RunConfig;
use tribaker::reflectivity::Shape;
use tribaker::{pipeline, Error, Result};

#[derive(Parser)]
#[command(name = "tribaker", version, about = "Open tribaker map: classical repellers, resonances and scar-function spectra")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Forward, backward and intersection intensity measures.
    ClassicalRepeller(Common),
    /// Resonance spectrum of the open propagator.
    ExactSpectrum {
        #[command(flatten)]
        common: Common,
        /// Also write right and left eigenvectors.
        #[arg(long)]
        store_vectors: bool,
    },
    /// Local dimension d_loc(ν_c) between N and N/3.
    Dloc(Common),
    /// Periodic orbits and their scar functions.
    ScarBasis(Common),
    /// Semiclassical spectrum, performance, Husimi grids and overlap.
    Semiclassical {
        #[command(flatten)]
        common: Common,
        /// Use the exact eigenvectors as the basis.
        #[arg(long)]
        diagnostic: bool,
    },
    /// Accumulated Husimi grid of the long-lived exact resonances.
    Husimi(Common),
    /// N_SF needed to reach the target performance over the R grid.
    PerformanceScan(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, short, default_value = "out")]
    out: PathBuf,
    #[arg(long = "n")]
    n: Option<usize>,
    #[arg(long)]
    shape: Option<Shape>,
    /// Reflectivity floor R.
    #[arg(long = "r")]
    r: Option<f64>,
    #[arg(long)]
    nu_c: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Classical evolution time.
    #[arg(long)]
    t: Option<usize>,
    /// Classical grid resolution.
    #[arg(long = "k")]
    k: Option<usize>,
    #[arg(long)]
    n_ic: Option<usize>,
    #[arg(long)]
    l_max: Option<usize>,
    #[arg(long)]
    tau: Option<usize>,
    #[arg(long)]
    outside_orbits: Option<usize>,
    #[arg(long)]
    sigma_cut: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    target_p: Option<f64>,
    /// Husimi grid resolution.
    #[arg(long)]
    husimi_k: Option<usize>,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.n {
            c.n = v;
        }
        if let Some(v) = self.shape {
            c.profile.shape = v;
        }
        if let Some(v) = self.r {
            c.profile.r = v;
        }
        if self.nu_c.is_some() {
            c.spectral.nu_c = self.nu_c;
        }
        if let Some(v) = self.seed {
            c.classical.seed = v;
        }
        if let Some(v) = self.t {
            c.classical.t = v;
        }
        if let Some(v) = self.k {
            c.classical.k = v;
        }
        if let Some(v) = self.n_ic {
            c.classical.n_ic = v;
        }
        if let Some(v) = self.l_max {
            c.scar.l_max = v;
        }
        if self.tau.is_some() {
            c.scar.tau = self.tau;
        }
        if let Some(v) = self.outside_orbits {
            c.scar.outside_orbits = v;
        }
        if let Some(v) = self.sigma_cut {
            c.semiclassical.sigma_cut = v;
        }
        if let Some(v) = self.epsilon {
            c.semiclassical.epsilon = v;
        }
        if let Some(v) = self.target_p {
            c.semiclassical.target_p = v;
        }
        if let Some(v) = self.husimi_k {
            c.husimi.k = v;
        }
        c.output = Some(self.out.clone());
        c.resolve()
    }
}

fn run(cli: Cli) -> Result<Vec<PathBuf>> {
    match cli.command {
        Command::ClassicalRepeller(common) => pipeline::classical_repeller(&common.resolve()?, &common.out),
        Command::ExactSpectrum { common, store_vectors } => {
            let mut cfg = common.resolve()?;
            cfg.spectral.store_vectors |= store_vectors;
            pipeline::exact_spectrum(&cfg, &common.out)
        }
        Command::Dloc(common) => pipeline::dloc(&common.resolve()?, &common.out),
        Command::ScarBasis(common) => pipeline::scar_basis(&common.resolve()?, &common.out),
        Command::Semiclassical { common, diagnostic } => {
            pipeline::semiclassical(&common.resolve()?, &common.out, diagnostic)
        }
        Command::Husimi(common) => pipeline::husimi(&common.resolve()?, &common.out),
        Command::PerformanceScan(common) => pipeline::performance_scan(&common.resolve()?, &common.out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(Error::exit_code(&e) as u8)
        }
    }
}
