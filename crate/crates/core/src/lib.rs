//! Multi-space evolutionary search (MSES) for large-scale black-box optimization.
//!
//! A population searches the original high-dimensional space while a second
//! population searches a PCA-derived simplified space. Learned affine maps
//! carry elite solutions between the two, and the simplified space is rebuilt
//! periodically from an archive of its own search traces.
//!
//! ```no_run
//! use mses::bench::Problem;
//! use mses::engine::{run, MsesConfig};
//! use mses::optimizers::OptimizerParams;
//!
//! let problem = Problem::from_id("partial-elliptic-d100-s1").unwrap();
//! let mut config = MsesConfig::for_dim(100, OptimizerParams::de());
//! config.max_fes = 200_000;
//! let result = run(&problem, &config, 42).unwrap();
//! println!("best objective {}", result.best_f);
//! ```

pub mod archive;
pub mod bench;
pub mod convergence;
pub mod engine;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod optimizers;

pub use error::{Error, Result};
