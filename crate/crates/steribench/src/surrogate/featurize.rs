//! Fixed invariant per-atom featurization.
//!
//! Each featurized atom gets element and degree one-hots plus a radial
//! histogram of its distances to the heavy atoms. The representation is
//! rotation/translation invariant by construction and carries no learned
//! parameters; the learned stack starts at the bond encoder.

use ndarray::{Array1, Array2};

use crate::geom::vec3;
use crate::mol_io::{Conformer, MolecularGraph, FLAG_EXPLICIT_HYDROGEN};

use super::ModelError;

/// Elements with a dedicated one-hot slot; everything else shares the
/// trailing "other" slot.
const ELEMENT_SLOTS: [u8; 8] = [1, 6, 7, 8, 9, 16, 17, 35];
pub const ELEMENT_DIM: usize = ELEMENT_SLOTS.len() + 1;

/// Degree one-hot covers degrees 1..=6 (capped); degree 0 maps to all-zero.
pub const DEGREE_DIM: usize = 6;

pub const RADIAL_BINS: usize = 8;
pub const RADIAL_MAX_ANGSTROM: f64 = 5.0;

/// Total per-atom feature dimension.
pub const FEATURE_DIM: usize = ELEMENT_DIM + DEGREE_DIM + RADIAL_BINS;

/// Per-atom representations of one conformer.
#[derive(Debug, Clone, PartialEq)]
pub struct ConformerFeatures {
    /// One row per featurized atom, `FEATURE_DIM` columns.
    pub rows: Array2<f64>,
    /// Original atom index of each row.
    pub included: Vec<usize>,
}

impl ConformerFeatures {
    pub fn row_of(&self, atom: usize) -> Option<usize> {
        self.included.iter().position(|&i| i == atom)
    }

    /// Sum of all rows (the pooled representation).
    pub fn sum(&self) -> Array1<f64> {
        self.rows.sum_axis(ndarray::Axis(0))
    }
}

fn element_slot(atomic_number: u8) -> usize {
    ELEMENT_SLOTS.iter().position(|&z| z == atomic_number).unwrap_or(ELEMENT_SLOTS.len())
}

/// Featurize the heavy atoms of a conformer plus any hydrogen flagged
/// [`FLAG_EXPLICIT_HYDROGEN`]. Distances in the histogram are measured to
/// heavy atoms only.
pub fn featurize_conformer(graph: &MolecularGraph, conformer: &Conformer) -> ConformerFeatures {
    let included: Vec<usize> = (0..graph.atom_count())
        .filter(|&i| {
            let atom = graph.atom(i);
            !atom.is_hydrogen() || atom.feature_flags & FLAG_EXPLICIT_HYDROGEN != 0
        })
        .collect();
    let heavy = graph.heavy_atoms();
    let bin_width = RADIAL_MAX_ANGSTROM / RADIAL_BINS as f64;

    let mut rows = Array2::zeros((included.len(), FEATURE_DIM));
    for (row, &i) in included.iter().enumerate() {
        let atom = graph.atom(i);
        rows[(row, element_slot(atom.atomic_number))] = 1.0;
        let degree = graph.degree(i);
        if degree >= 1 {
            rows[(row, ELEMENT_DIM + degree.min(DEGREE_DIM) - 1)] = 1.0;
        }
        for &j in &heavy {
            if j == i {
                continue;
            }
            let d = vec3::norm(vec3::sub(conformer.coords[i], conformer.coords[j]));
            if d < RADIAL_MAX_ANGSTROM {
                let bin = ((d / bin_width) as usize).min(RADIAL_BINS - 1);
                rows[(row, ELEMENT_DIM + DEGREE_DIM + bin)] += 1.0;
            }
        }
    }
    ConformerFeatures { rows, included }
}

/// The fixed inputs the learned stack consumes for one conformer: features
/// of the bonded atoms a and b, the pooled sum, and the statistics needed
/// to standardize at the per-atom level.
#[derive(Debug, Clone, PartialEq)]
pub struct BondInput {
    pub h_a: Array1<f64>,
    pub h_b: Array1<f64>,
    pub sum: Array1<f64>,
    /// Per-dimension sum of squares over the featurized atoms.
    pub sum_sq: Array1<f64>,
    /// Number of featurized atoms.
    pub n_atoms: f64,
}

/// Build the bond-level input for the graph's descriptor bond.
pub fn bond_input(graph: &MolecularGraph, conformer: &Conformer) -> Result<BondInput, ModelError> {
    let (a, b) = graph.descriptor_bond().ok_or(ModelError::MissingDescriptorBond)?;
    let features = featurize_conformer(graph, conformer);
    let row_a = features.row_of(a).ok_or(ModelError::MissingDescriptorBond)?;
    let row_b = features.row_of(b).ok_or(ModelError::MissingDescriptorBond)?;
    let sum = features.sum();
    let sum_sq = features.rows.map(|v| v * v).sum_axis(ndarray::Axis(0));
    Ok(BondInput {
        h_a: features.rows.row(row_a).to_owned(),
        h_b: features.rows.row(row_b).to_owned(),
        sum,
        sum_sq,
        n_atoms: features.included.len() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::RigidTransform;
    use crate::mol_io::{Atom, Bond, BondOrder, QualityTier};

    fn chain(elements: &[u8]) -> MolecularGraph {
        let atoms = elements.iter().map(|&z| Atom::new(z)).collect();
        let bonds = (0..elements.len() - 1)
            .map(|i| Bond::new(i, i + 1, BondOrder::Single))
            .collect();
        MolecularGraph::new(atoms, bonds).unwrap()
    }

    #[test]
    fn single_atom_has_element_onehot_only() {
        let graph = MolecularGraph::new(vec![Atom::new(6)], vec![]).unwrap();
        let conf = Conformer::new(0, vec![[0.0; 3]], None, QualityTier::Exact);
        let features = featurize_conformer(&graph, &conf);
        assert_eq!(features.rows.nrows(), 1);
        let row = features.rows.row(0);
        assert_eq!(row[element_slot(6)], 1.0);
        assert_eq!(row.iter().filter(|&&v| v != 0.0).count(), 1, "only the element slot is set");
    }

    #[test]
    fn rigid_motion_leaves_features_unchanged() {
        let graph = chain(&[6, 6, 8, 6]);
        let coords = vec![
            [0.0, 0.0, 0.0],
            [1.5, 0.0, 0.0],
            [2.2, 1.2, 0.0],
            [3.6, 1.2, 0.4],
        ];
        let conf = Conformer::new(0, coords.clone(), None, QualityTier::Exact);
        let base = featurize_conformer(&graph, &conf);

        let rot = {
            // An arbitrary proper rotation plus translation.
            let angle: f64 = 0.83;
            let (s, c) = angle.sin_cos();
            RigidTransform {
                rotation: [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]],
                translation: [3.0, -1.0, 7.5],
            }
        };
        let moved = Conformer::new(0, rot.apply_all(&coords), None, QualityTier::Exact);
        let rotated = featurize_conformer(&graph, &moved);
        for (a, b) in base.rows.iter().zip(rotated.rows.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn histogram_matches_direct_binning() {
        let graph = chain(&[6, 6, 6, 6]);
        let coords = vec![
            [0.0, 0.0, 0.0],
            [1.5, 0.0, 0.0],
            [2.2, 1.3, 0.0],
            [3.7, 1.3, 0.2],
        ];
        let conf = Conformer::new(0, coords.clone(), None, QualityTier::Exact);
        let features = featurize_conformer(&graph, &conf);

        // Direct pairwise binning oracle.
        let width = RADIAL_MAX_ANGSTROM / RADIAL_BINS as f64;
        for i in 0..4 {
            let mut expected = [0.0; RADIAL_BINS];
            for j in 0..4 {
                if i == j {
                    continue;
                }
                let d = vec3::norm(vec3::sub(coords[i], coords[j]));
                if d < RADIAL_MAX_ANGSTROM {
                    expected[((d / width) as usize).min(RADIAL_BINS - 1)] += 1.0;
                }
            }
            for (bin, &count) in expected.iter().enumerate() {
                assert_eq!(features.rows[(i, ELEMENT_DIM + DEGREE_DIM + bin)], count);
            }
        }
    }

    #[test]
    fn hydrogens_are_implicit_unless_flagged() {
        let mut atoms = vec![Atom::new(6), Atom::new(8), Atom::new(1)];
        atoms[2].feature_flags = FLAG_EXPLICIT_HYDROGEN;
        let bonds = vec![Bond::new(0, 1, BondOrder::Single), Bond::new(1, 2, BondOrder::Single)];
        let graph = MolecularGraph::new(atoms, bonds).unwrap();
        let conf = Conformer::new(
            0,
            vec![[0.0; 3], [1.4, 0.0, 0.0], [1.8, 0.9, 0.0]],
            None,
            QualityTier::Exact,
        );
        let features = featurize_conformer(&graph, &conf);
        assert_eq!(features.included, vec![0, 1, 2], "flagged H is featurized");

        let mut atoms = vec![Atom::new(6), Atom::new(8), Atom::new(1)];
        atoms[2].feature_flags = 0;
        let bonds = vec![Bond::new(0, 1, BondOrder::Single), Bond::new(1, 2, BondOrder::Single)];
        let graph = MolecularGraph::new(atoms, bonds).unwrap();
        let features = featurize_conformer(&graph, &conf);
        assert_eq!(features.included, vec![0, 1], "plain H is skipped");
    }

    #[test]
    fn bond_input_aggregates_rows() {
        let mut graph = chain(&[6, 6, 6]);
        graph.set_descriptor_bond(0, 1).unwrap();
        let conf = Conformer::new(
            0,
            vec![[0.0; 3], [1.5, 0.0, 0.0], [2.2, 1.3, 0.0]],
            None,
            QualityTier::Exact,
        );
        let input = bond_input(&graph, &conf).unwrap();
        assert_eq!(input.n_atoms, 3.0);
        let features = featurize_conformer(&graph, &conf);
        let total: f64 = features.rows.sum();
        assert!((input.sum.sum() - total).abs() < 1e-12);
        assert_eq!(input.h_a, features.rows.row(0).to_owned());
        assert_eq!(input.h_b, features.rows.row(1).to_owned());
    }
}
