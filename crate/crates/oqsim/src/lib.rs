//! oqsim — simulation toolkit for Markovian open quantum many-body systems.
//!
//! One sparse operator core backs several solver families for the Lindblad
//! master equation: direct density-matrix integration, vectorized-Liouvillian
//! steady-state eigensolvers, quantum-trajectory unravelings (quantum jump and
//! quantum state diffusion), (cluster) mean-field with linear stability
//! analysis, and a product-state trace-norm variational principle. Benchmarked
//! on three dissipative lattice models: the transverse-field Ising model with
//! longitudinal dissipation, the driven-dissipative Bose-Hubbard model, and
//! the dissipative Heisenberg model.

pub mod eigen;
pub mod hilbert;
pub mod liouville;
pub mod models;
pub mod operators;
pub mod sparse;
pub mod meanfield;
pub mod steady;
pub mod trajectories;

pub use hilbert::{Boundary, HilbertSpace, LatticeGraph};
pub use liouville::{DensityMatrix, EvolutionRecord, IntegrationMethod, Superoperator};
pub use models::{
    build_dissipative_heisenberg, build_dissipative_ising, build_driven_bose_hubbard,
    LindbladModel,
};
pub use sparse::ComplexSparseMatrix;
