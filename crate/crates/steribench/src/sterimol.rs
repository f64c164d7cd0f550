//! Sterimol L and B5 for the designated bond of a conformer.
//!
//! L is the maximum extent of the substituent along the a->b bond axis
//! measured from the base atom `a`, including vdW radii. B5 is the maximum
//! perpendicular extent from that axis. No legacy +0.40 Å offset is applied
//! and B1 is not computed.

use thiserror::Error;

use crate::geom::vec3;
use crate::mol_io::{by_atomic_number, Conformer, MolecularGraph};

#[derive(Debug, Error, PartialEq)]
pub enum SterimolError {
    #[error("graph has no descriptor bond assigned")]
    MissingDescriptorBond,
    #[error("bond ({a}, {b}) spans a ring; substituent is undefined")]
    RingBond { a: usize, b: usize },
    #[error("atoms {a} and {b} are not bonded")]
    NotABond { a: usize, b: usize },
    #[error("bond axis has zero length")]
    DegenerateAxis,
    #[error("unknown atomic number {0}")]
    UnknownElement(u8),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SterimolResult {
    /// Max extent along the bond axis from atom a, in Å.
    pub l: f64,
    /// Max perpendicular extent from the bond axis, in Å.
    pub b5: f64,
    pub substituent_atom_ids: Vec<usize>,
}

/// The substituent defined by bond (a, b): the closure reachable from `b`
/// without crossing the (a, b) edge. Includes `b`, excludes `a`. Returns an
/// error when (a, b) lies in a ring, i.e. `a` stays reachable from `b`.
pub fn substituent_atoms(
    graph: &MolecularGraph,
    a: usize,
    b: usize,
) -> Result<Vec<usize>, SterimolError> {
    if !graph.contains_bond(a, b) {
        return Err(SterimolError::NotABond { a, b });
    }
    let component = graph.component_without_edge(b, a, b);
    if component.contains(&a) {
        return Err(SterimolError::RingBond { a, b });
    }
    Ok(component)
}

fn vdw_radius(graph: &MolecularGraph, atom: usize) -> Result<f64, SterimolError> {
    let z = graph.atom(atom).atomic_number;
    let element = by_atomic_number(z).ok_or(SterimolError::UnknownElement(z))?;
    if !element.has_tabulated_radius() {
        log::warn!(
            "no Bondi vdW radius for element {}; using fallback {:.2} Å",
            element.symbol,
            element.vdw_radius()
        );
    }
    Ok(element.vdw_radius())
}

/// Sterimol L and B5 over the graph's descriptor bond. Hydrogens present in
/// the conformer count toward the sterics.
pub fn sterimol_lb5(
    graph: &MolecularGraph,
    conformer: &Conformer,
) -> Result<SterimolResult, SterimolError> {
    let (a, b) = graph.descriptor_bond().ok_or(SterimolError::MissingDescriptorBond)?;
    sterimol_lb5_for_bond(graph, conformer, a, b)
}

/// Same as [`sterimol_lb5`] but with an explicit bond.
pub fn sterimol_lb5_for_bond(
    graph: &MolecularGraph,
    conformer: &Conformer,
    a: usize,
    b: usize,
) -> Result<SterimolResult, SterimolError> {
    let substituent = substituent_atoms(graph, a, b)?;
    let r_a = conformer.coords[a];
    let axis = vec3::sub(conformer.coords[b], r_a);
    let u = vec3::normalize(axis).ok_or(SterimolError::DegenerateAxis)?;

    let mut l = f64::NEG_INFINITY;
    let mut b5 = f64::NEG_INFINITY;
    for &i in &substituent {
        let radius = vdw_radius(graph, i)?;
        let rel = vec3::sub(conformer.coords[i], r_a);
        let axial = vec3::dot(rel, u);
        let perp = vec3::sub(rel, vec3::scale(u, axial));
        l = l.max(axial + radius);
        b5 = b5.max(vec3::norm(perp) + radius);
    }
    Ok(SterimolResult { l, b5, substituent_atom_ids: substituent })
}
