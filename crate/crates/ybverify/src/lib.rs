//! Numerical certification of a q-deformed centrally extended sl(2|2)
//! R-matrix in its two parameterizations: spectral (square-root amplitudes on
//! an elliptic curve) and rational (entries on a sextic surface).  The crate
//! verifies the Yang-Baxter equation, transfer-matrix commutativity, the
//! polynomial identities among the matrix entries, elliptic-curve isogenies,
//! degenerate factorizations, and the singularity/genus pipeline, all via
//! multiprecision normalized residuals.
//!
//! ```
//! use ybverify::model::ModelParams;
//! use ybverify::numkit::PrecComplex;
//!
//! // Demonstration coupling q = 2, g = 3/5 at 53 bits.
//! let q = PrecComplex::from_real(2.0, 53);
//! let g = PrecComplex::from_real(0.6, 53);
//! let mp = ModelParams::new(q.clone(), g.clone(), 53).unwrap();
//!
//! // ξ = i·g·(q − 1/q) holds by construction.
//! let xi = &(&PrecComplex::i(53) * &g) * &(&q - &q.recip());
//! assert!((&mp.xi - &xi).mag_f64() < 1e-15);
//! ```

pub mod cli;
pub mod elliptic;
pub mod model;
pub mod numkit;
pub mod rmatrix;
pub mod verify;

/// CLI entry point; returns the process exit code.
pub use cli::run_cli;
