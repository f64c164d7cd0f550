//! Sterimol descriptors over molecular conformer ensembles, the ensemble
//! processing pipeline (filtering, clustering, corruption, decoy-sets), and
//! a benchmark of surrogate regression models against direct computation
//! from cheap ensembles.

pub mod ensemble;
pub mod geom;
pub mod mol_io;
pub mod seeds;
pub mod sterimol;
pub mod surrogate;
