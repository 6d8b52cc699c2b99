//! Out-of-core post-processing of nested-sampling chains.
//!
//! Plain-text chains are converted once into a chunked columnar store
//! ([`store`]); derived variables are added chunk by chunk ([`expr`]);
//! marginalized posteriors and profile likelihoods are built by streaming
//! binning ([`binning`]); credible and confidence thresholds come from
//! [`regions`]; [`render`] writes grid documents and PNG plots. No step ever
//! needs more than a bounded number of chunks in memory.
//!
//! ```no_run
//! use chainforge::binning::{marginalize_2d, BinSpec1D, BinSpec2D};
//! use chainforge::regions::hpd_thresholds;
//! use chainforge::store::ChainStore;
//!
//! # fn main() -> chainforge::Result<()> {
//! let store = ChainStore::open("RD.store")?;
//! let spec = BinSpec2D::new(
//!     BinSpec1D::new("log(m_{\\chi})", 0.0, 3.0, 30)?,
//!     BinSpec1D::new("Omega_{\\chi}h^2", 0.0, 0.2, 30)?,
//! )?;
//! let grid = marginalize_2d(&store, &spec)?;
//! let levels = hpd_thresholds(&grid, &[0.95, 0.68])?;
//! println!("{:?}", levels.thresholds);
//! # Ok(())
//! # }
//! ```

pub mod binning;
pub mod cli;
pub mod error;
pub mod expr;
pub mod regions;
pub mod render;
pub mod store;

pub use error::{Error, Result};
