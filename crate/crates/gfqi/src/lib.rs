//! A numerical laboratory for spectral invariants of Lagrangian submanifolds and
//! compactly supported Hamiltonian diffeomorphisms, computed through generating
//! functions quadratic at infinity.
//!
//! The crate is organized bottom-up:
//!
//! - [`geometry`] — symplectic linear algebra on `R^{2n}`: the standard form, graph
//!   coordinates on products, coisotropic reduction of subspaces.
//! - [`ham`] — compactly supported Hamiltonians: a small expression language with
//!   symbolic derivatives, a catalog of closed-form families (radial profiles,
//!   translators, suspensions, ...), flows (exact where available, implicit-midpoint
//!   integration otherwise), and norms (Hofer-type oscillation, local sup distance).
//! - [`genfun`] — generating functions quadratic at infinity: graph descriptions of
//!   diffeomorphisms, discrete-action chains for flow images of the zero section,
//!   fiberwise sums, stabilization, and reduction.
//! - [`minimax`] — the spectral engine: sublevel-set homology of a generating
//!   function on a grid (cubical complex, Z/2 reduction), minimax critical values
//!   `c(1, .)` and `c(mu, .)`, the derived invariants `c-`, `c+`, `gamma` of
//!   diffeomorphisms, and a certified continuation selector for radial profiles.
//! - [`capacity`] — displacement energies of concrete regions with computed witness
//!   generators, the induced capacity bracket, and the orbit-union convergence
//!   bound for Hamiltonian flows.
//! - [`suspension`] — compactly supported suspensions of time-dependent flows into
//!   one more spatial dimension, and the suspended spectral distances.
//! - [`hj`] — variational (minimax) solutions of Hamilton-Jacobi Cauchy problems,
//!   compared against monotone finite differences.
//! - [`completion`] — completion phenomena: sky-scraper profile sequences that are
//!   Cauchy in the spectral metric yet degenerate pointwise, their certified
//!   distance tables, support estimates, and commutator defects.
//! - [`experiment`] — the reproducible experiment registry (typed configs, seeded
//!   runs, JSON/CSV/SVG reports) that the `gfqi` binary exposes.

pub mod capacity;
pub mod completion;
pub mod experiment;
pub mod genfun;
pub mod geometry;
pub mod ham;
pub mod hj;
pub mod minimax;
pub mod suspension;

/// Crate-wide error type: every fallible public operation reports one of these.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A malformed expression was given to the Hamiltonian parser.
    #[error("parse error at byte {offset}: {message}")]
    Parse {
        /// Byte offset into the source string at which the error was detected.
        offset: usize,
        /// Human-readable description of the problem.
        message: String,
    },
    /// Inputs had inconsistent or unsupported dimensions.
    #[error("dimension error: {0}")]
    Dimension(String),
    /// A numerical routine failed to converge or produced an untrustworthy result.
    #[error("numerical failure: {0}")]
    Numerics(String),
    /// The requested computation is outside the engine's certified range, and no
    /// honest fallback exists.
    #[error("out of certified range: {0}")]
    OutOfRange(String),
    /// A configuration file or override was invalid.
    #[error("config error: {0}")]
    Config(String),
    /// An experiment report could not be written.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
