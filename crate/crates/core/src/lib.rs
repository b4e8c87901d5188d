//! Markov neighborhood regression: confidence intervals and p-values for
//! high-dimensional regression through one low-dimensional subset regression
//! per feature.
//!
//! ```
//! use mnr::datagen::{parse_beta_spec, CovKind, CovSpec, FamilySpec, Generator, GeneratorSpec, ModelSpec};
//! use mnr::mnr::{run_mnr, MnrConfig};
//!
//! # fn main() -> Result<(), Box<dyn std::error::Error>> {
//! let p = 100;
//! let beta = parse_beta_spec("1:2,2:4,3:-3", p)?;
//! let model = ModelSpec::new(FamilySpec::Gaussian { sigma2: 1.0 }, 1.0, beta)?;
//! let spec = GeneratorSpec { cov: CovSpec::new(CovKind::Toeplitz { rho: 0.9 }, p)?, n: 150 };
//! let ds = Generator::new(&spec, &model)?.generate(7)?;
//!
//! let report = run_mnr(&ds, &MnrConfig::default())?;
//! let x1 = &report.records[0];
//! assert!(x1.ci_low < 2.0 && 2.0 < x1.ci_high);
//! # Ok(())
//! # }
//! ```

pub mod baselines;
pub mod bench;
pub mod blanket;
pub mod datagen;
pub mod glm;
pub(crate) mod index1;
pub mod mnr;
pub mod numkit;
pub mod rng;
pub mod select;
