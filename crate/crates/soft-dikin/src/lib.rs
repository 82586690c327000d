//! Soft-threshold Dikin walk sampling from log-concave distributions on polytopes.
//!
//! The target is a density `pi(theta) ∝ exp(-f(theta))` supported on a bounded
//! polytope `K = {theta : A theta <= b}`, where the convex potential `f` is
//! given by a value oracle together with a declared smoothness class
//! (`L`-Lipschitz and/or `beta`-smooth) and a radius `R` of a ball containing
//! `K`. From an interior point the chain proposes
//!
//! ```text
//! z = theta + Phi(theta)^{-1/2} xi,          xi ~ N(0, I_d),
//! Phi(theta) = alpha^{-1} H(theta) + eta^{-1} I_d,
//! ```
//!
//! where `H(theta)` is the Hessian of the log-barrier of `K` and the
//! `eta^{-1} I_d` soft-threshold term caps the proposal variance at the scale
//! the smoothness class of `f` tolerates. Proposals falling outside `K` are
//! rejected; interior proposals go through a lazy Metropolis filter, so the
//! stationary distribution is exactly `pi`.
//!
//! ```
//! use nalgebra::dvector;
//! use rand::SeedableRng;
//! use soft_dikin::geometry::box_polytope;
//! use soft_dikin::targets::TargetSpec;
//! use soft_dikin::walk::{default_hyperparameters, run_chain, HyperConstants, WalkConfig};
//!
//! // uniform samples from the unit box, at desk-scale constants
//! let polytope = box_polytope(2, 1.0);
//! let target = TargetSpec::uniform(2.0_f64.sqrt()).unwrap();
//! let constants = HyperConstants::practical();
//! let params = default_hyperparameters(2, target.class(), &constants).unwrap();
//! let cfg = WalkConfig::new(params, 2_000, 7).with_constants(constants);
//! let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
//! let report = run_chain(dvector![0.0, 0.0], &target, &polytope, &cfg, 10, &mut rng).unwrap();
//! assert_eq!(report.samples.len(), 201);
//! assert!(report.accepted > 0);
//! ```
//!
//! Module map:
//!
//! * [`geometry`] — polytope representation, membership, slacks, chords,
//!   cross-ratio distance, inscribed balls, builtin bodies, file I/O.
//! * [`barrier`] — log-barrier Hessian, the soft-threshold matrix `Phi`, its
//!   Cholesky factor, local norms and Gaussian proposals.
//! * [`targets`] — potential oracles: uniform, linear, quadratic,
//!   logistic-Lasso, exponential-mechanism rescaling, plus declared-constant
//!   audits.
//! * [`walk`] — hyperparameter selection, the Metropolis step, chain
//!   execution, warm starts.
//! * [`diagnostics`] — numerical checks of the structural inequalities the
//!   mixing analysis rests on, grid quadrature oracles for total-variation
//!   validation, and effective-sample-size estimation.
//!
//! Reproducibility contract: all randomness flows through a named generator,
//! ChaCha8 (`rand_chacha::ChaCha8Rng`), seeded with a caller-supplied 64-bit
//! seed. Parallel chains and diagnostic trials must use `set_stream(k)` on a
//! generator seeded with the same seed, never a shared sequential stream.
//! Changing the generator or the stream-split rule is a breaking change to
//! bit-reproducibility.

pub mod barrier;
pub mod diagnostics;
pub mod geometry;
pub mod targets;
pub mod walk;

/// Library version string, embedded in run reports for replay.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
