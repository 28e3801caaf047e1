pub mod campaign;
pub mod chain_lab;
pub mod coupling;
pub mod error;
pub mod models;
pub mod sde;
pub mod spectral;
pub mod stats;
pub mod verifiers;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/chains.md")]
    mod chains {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/probes.md")]
    mod probes {}
    #[doc = include_str!("../../../book/src/campaigns.md")]
    mod campaigns {}
}
