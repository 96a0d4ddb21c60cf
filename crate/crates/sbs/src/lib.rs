//! Formation of spectrum broadcast structures in dephasing open systems.
//!
//! A spectrum broadcast structure (SBS) is a multipartite state
//! `Σᵢ pᵢ |i⟩⟨i| ⊗ ⊗ₖ ρᵢᵏ` whose branch states are perfectly
//! distinguishable in every environment fragment; it is the state structure
//! behind operationally objective records. This crate provides the pieces
//! needed to quantify, at desk scale, how close a dephasing evolution gets
//! to that structure:
//!
//! - [`linalg`]: dense complex kernel (Kronecker products, partial trace,
//!   Hermitian eigendecomposition, trace norm, fidelity).
//! - [`qsd`]: state discrimination — ensembles, POVM/PVM measurements,
//!   Helstrom/Montanaro/Knill-Barnum bounds, SBS structural checks.
//! - [`gram`]: Gram-Schmidt PVM construction with determinant-form overlaps
//!   and the discrimination bounds for pure and finitely mixed ensembles.
//! - [`dynamics`]: measurement-type interaction `X ⊗ Σ gₖBₖ`, decoherence
//!   factors, factored joint states and SBS approximants.
//! - [`bounds`]: the assembled trace-distance bound chain per time point.
//! - [`oracles`]: brute-force references (full-space evolution, qubit PVM
//!   grid search, two-level closed forms).
//! - [`scenario`] / [`sweep`]: JSON scenario files, batch sweeps with
//!   deterministic CSV/JSON output.
//!
//! Every operation is a pure function of immutable values and safe to use
//! across threads. See the `examples/` directory for one runnable example
//! per capability, and the `sbs` binary for the batch interface.

pub mod bounds;
pub mod dynamics;
pub mod error;
pub mod gram;
pub mod linalg;
pub mod oracles;
pub mod qsd;
pub mod scenario;
pub mod sweep;

pub use error::{Result, SbsError};
pub use linalg::{CMatrix, CVector, DensityMatrix, PureState, C64, DEFAULT_DIM_CAP};
