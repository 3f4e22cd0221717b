//! Classical and quantum dynamics of the tribaker map with a continuously
//! reflecting opening: finite-time classical repellers, resonance spectra,
//! periodic-orbit scar functions and the semiclassical reconstruction of the
//! long-lived spectrum.

pub mod classical;
pub mod coherent;
pub mod config;
pub mod error;
pub mod io;
pub mod orbits;
pub mod phase_space;
pub mod pipeline;
pub mod quantum;
pub mod reflectivity;
pub mod scar;
pub mod semiclassical;
pub mod spectral;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/reflectivity.md")]
    mod reflectivity {}
    #[doc = include_str!("../../../book/src/classical.md")]
    mod classical {}
    #[doc = include_str!("../../../book/src/quantum.md")]
    mod quantum {}
    #[doc = include_str!("../../../book/src/orbits.md")]
    mod orbits {}
    #[doc = include_str!("../../../book/src/scars.md")]
    mod scars {}
    #[doc = include_str!("../../../book/src/semiclassical.md")]
    mod semiclassical {}
    #[doc = include_str!("../../../book/src/phase_space.md")]
    mod phase_space {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
