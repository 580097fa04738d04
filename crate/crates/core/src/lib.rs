//! Szegedy-type quantum walks induced by reversible random walks on the
//! half line `{0, 1, 2, ...}` with self loops.
//!
//! The crate is organized around the pipeline
//!
//! ```text
//! HalfLineWalk --truncate--> TruncatedChain --build--> WalkOperators (S, C, U)
//!      |                          |                         |
//!   classify                jacobi_matrix              evolve / measure
//!      |                          |                         |
//! RecurrenceReport          eigensolve + lift      time-averaged measures
//! ```
//!
//! - [`walk`] — the underlying random walk: coefficient families, recurrence
//!   classification through the series `C_T` and `C_R`, stationary
//!   distributions, and Jacobi matrices.
//! - [`arc`] — the arc Hilbert space `l2(A)` of the symmetric oriented graph
//!   and the operators `S` (flip-flop shift), `C = 2 Pi_A - I` (coin), and
//!   `U = S C`, applied matrix-free.
//! - [`spectral`] — eigensolving the Jacobi matrix, lifting its eigenvectors
//!   to eigenvectors of `U`, the signed reflected vectors spanning the
//!   complement `H^(S)`, and a brute-force `H^(S)` oracle.
//! - [`measures`] — time-averaged limit measures by direct Cesaro averaging
//!   and by spectral projectors, the localization lower bounds, and the
//!   closed forms available for special coefficient families.

pub mod arc;
pub mod measures;
pub mod series;
pub mod spectral;
pub mod table;
pub mod walk;

pub use arc::{ArcBasis, Direction, StateVector, WalkOperators};
pub use series::{SeriesControl, SeriesOutcome, SeriesScan};
pub use table::{MeasureSource, MeasureTable};
pub use walk::{HalfLineWalk, RecurrenceClass, RecurrenceReport, SymTridiag, TakeFrom, TruncatedChain};
