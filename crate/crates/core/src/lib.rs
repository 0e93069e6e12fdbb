//! Distribution alignment through the dual form of a logistic adversarial
//! distance.
//!
//! A matcher `M_θ` moves a target point set `B` toward a source set `A`.
//! The classic route trains a discriminator against the matcher (a min-max
//! game). Here the discriminator is replaced by per-point weights `α`, which
//! turns training into a joint minimization. Primal, MMD and WGAN-GP
//! objectives are included as baselines together with the tooling to compare
//! their dynamics.
//!
//! ```
//! use dual_align::kernels::KernelSpec;
//! use dual_align::matchers::MatcherParams;
//! use dual_align::optimizers::{run_dual_alignment, DualSettings, OptimizerConfig};
//! use dual_align::pointset::{generate, Domain, GeneratorSpec};
//!
//! let eye = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
//! let a = generate(&GeneratorSpec::gaussian_blob(vec![0.0, 0.0], eye.clone(), 30, 1)).unwrap();
//! let b = generate(&GeneratorSpec::gaussian_blob(vec![3.0, 0.0], eye, 30, 2))
//!     .unwrap()
//!     .with_tag(Domain::TargetB);
//! let cfg = OptimizerConfig { iterations: 50, ..Default::default() };
//! let run = run_dual_alignment(
//!     &a,
//!     &b,
//!     &MatcherParams::affine_identity(2),
//!     &KernelSpec::Linear,
//!     &cfg,
//!     &DualSettings::default(),
//! )
//! .unwrap();
//! assert!(run.trace.mean_gap.last().unwrap() < &run.trace.mean_gap[0]);
//! ```

pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod kernels;
pub mod matchers;
pub mod objectives;
pub mod optimizers;
pub mod pointset;

pub use error::{Error, Result};
