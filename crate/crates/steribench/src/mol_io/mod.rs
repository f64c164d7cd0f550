//! Structure file parsing/writing, dataset manifests, and the element table.

pub mod elements;
pub mod manifest;
pub mod sdf;
pub mod types;
pub mod xyz;

pub use elements::{by_atomic_number, by_symbol, ElementInfo, FALLBACK_VDW_RADIUS};
pub use manifest::{load_manifest, read_manifest, save_manifest, write_manifest, SchemaError};
pub use sdf::{parse_sdf_v2000, write_sdf_v2000};
pub use types::{
    Atom, Bond, BondOrder, Conformer, ConformerEnsemble, DatasetRecord, EnsembleShapeError,
    GraphError, Labels, MolecularGraph, QualityTier, TargetKind, FLAG_EXPLICIT_HYDROGEN,
};
pub use xyz::{parse_xyz, write_xyz, ParseError, XyzAtom, XyzBlock};
