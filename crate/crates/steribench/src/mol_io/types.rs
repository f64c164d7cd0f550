//! Core molecular data model shared by every other module.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

use super::elements;

/// Marks a hydrogen that stays visible to featurization (the acid -OH
/// hydrogen in the synthetic molecules). All other hydrogens are treated
/// implicitly by the models, but still count for sterics.
pub const FLAG_EXPLICIT_HYDROGEN: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("graph has no atoms")]
    Empty,
    #[error("bond ({i}, {j}) references an atom out of range (atom count {n})")]
    BondOutOfRange { i: usize, j: usize, n: usize },
    #[error("bond ({0}, {0}) is a self-loop")]
    SelfLoop(usize),
    #[error("duplicate bond ({i}, {j})")]
    DuplicateBond { i: usize, j: usize },
    #[error("graph is not connected")]
    Disconnected,
    #[error("descriptor bond ({a}, {b}) is not a bond of the graph")]
    DescriptorNotABond { a: usize, b: usize },
    #[error("unknown atomic number {0}")]
    UnknownAtomicNumber(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Atom {
    pub atomic_number: u8,
    #[serde(default)]
    pub formal_charge: i8,
    #[serde(default)]
    pub feature_flags: u32,
}

impl Atom {
    pub fn new(atomic_number: u8) -> Self {
        Atom { atomic_number, formal_charge: 0, feature_flags: 0 }
    }

    pub fn is_hydrogen(&self) -> bool {
        self.atomic_number == 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
}

impl BondOrder {
    pub fn from_sdf_code(code: u32) -> Option<Self> {
        match code {
            1 => Some(BondOrder::Single),
            2 => Some(BondOrder::Double),
            3 => Some(BondOrder::Triple),
            _ => None,
        }
    }

    pub fn sdf_code(&self) -> u32 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bond {
    pub i: usize,
    pub j: usize,
    pub order: BondOrder,
}

impl Bond {
    pub fn new(i: usize, j: usize, order: BondOrder) -> Self {
        Bond { i, j, order }
    }

    /// Endpoints normalized so the smaller index comes first.
    pub fn key(&self) -> (usize, usize) {
        if self.i <= self.j { (self.i, self.j) } else { (self.j, self.i) }
    }
}

/// A molecular graph with a designated descriptor bond (a, b): `a` is the
/// base atom, `b` the first atom of the substituent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGraph", into = "RawGraph")]
pub struct MolecularGraph {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    descriptor_bond: Option<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize, Clone)]
struct RawGraph {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    descriptor_bond: Option<(usize, usize)>,
}

impl TryFrom<RawGraph> for MolecularGraph {
    type Error = GraphError;

    fn try_from(raw: RawGraph) -> Result<Self, GraphError> {
        let mut graph = MolecularGraph::new(raw.atoms, raw.bonds)?;
        if let Some((a, b)) = raw.descriptor_bond {
            graph.set_descriptor_bond(a, b)?;
        }
        Ok(graph)
    }
}

impl From<MolecularGraph> for RawGraph {
    fn from(g: MolecularGraph) -> Self {
        RawGraph { atoms: g.atoms, bonds: g.bonds, descriptor_bond: g.descriptor_bond }
    }
}

impl MolecularGraph {
    /// Build a validated graph: indices in range, no self-loops or duplicate
    /// bonds, every atomic number resolvable, and the graph connected.
    pub fn new(atoms: Vec<Atom>, bonds: Vec<Bond>) -> Result<Self, GraphError> {
        let n = atoms.len();
        if n == 0 {
            return Err(GraphError::Empty);
        }
        for atom in &atoms {
            if elements::by_atomic_number(atom.atomic_number).is_none() {
                return Err(GraphError::UnknownAtomicNumber(atom.atomic_number));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for bond in &bonds {
            if bond.i >= n || bond.j >= n {
                return Err(GraphError::BondOutOfRange { i: bond.i, j: bond.j, n });
            }
            if bond.i == bond.j {
                return Err(GraphError::SelfLoop(bond.i));
            }
            if !seen.insert(bond.key()) {
                let (i, j) = bond.key();
                return Err(GraphError::DuplicateBond { i, j });
            }
        }
        let mut adjacency = vec![Vec::new(); n];
        for bond in &bonds {
            adjacency[bond.i].push(bond.j);
            adjacency[bond.j].push(bond.i);
        }
        for neighbors in &mut adjacency {
            neighbors.sort_unstable();
        }
        let graph = MolecularGraph { atoms, bonds, descriptor_bond: None, adjacency };
        if !graph.is_connected() {
            return Err(GraphError::Disconnected);
        }
        Ok(graph)
    }

    /// Designate the descriptor bond. `(a, b)` must be an existing bond.
    pub fn set_descriptor_bond(&mut self, a: usize, b: usize) -> Result<(), GraphError> {
        if !self.contains_bond(a, b) {
            return Err(GraphError::DescriptorNotABond { a, b });
        }
        self.descriptor_bond = Some((a, b));
        Ok(())
    }

    pub fn descriptor_bond(&self) -> Option<(usize, usize)> {
        self.descriptor_bond
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn atom(&self, i: usize) -> &Atom {
        &self.atoms[i]
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn contains_bond(&self, i: usize, j: usize) -> bool {
        self.adjacency.get(i).is_some_and(|adj| adj.contains(&j))
    }

    /// Indices of non-hydrogen atoms, ascending.
    pub fn heavy_atoms(&self) -> Vec<usize> {
        (0..self.atoms.len()).filter(|&i| !self.atoms[i].is_hydrogen()).collect()
    }

    fn is_connected(&self) -> bool {
        let n = self.atoms.len();
        let mut visited = vec![false; n];
        let mut stack = vec![0usize];
        visited[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &w in &self.adjacency[v] {
                if !visited[w] {
                    visited[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == n
    }

    /// Atoms reachable from `start` without traversing the edge
    /// (`cut_i`, `cut_j`) in either direction. Sorted ascending.
    pub fn component_without_edge(&self, start: usize, cut_i: usize, cut_j: usize) -> Vec<usize> {
        let mut visited = vec![false; self.atoms.len()];
        let mut stack = vec![start];
        visited[start] = true;
        while let Some(v) = stack.pop() {
            for &w in &self.adjacency[v] {
                let is_cut =
                    (v == cut_i && w == cut_j) || (v == cut_j && w == cut_i);
                if !is_cut && !visited[w] {
                    visited[w] = true;
                    stack.push(w);
                }
            }
        }
        (0..self.atoms.len()).filter(|&i| visited[i]).collect()
    }

    /// Whether removing bond (i, j) disconnects i from j, i.e. the bond is
    /// not part of any ring.
    pub fn bond_splits_graph(&self, i: usize, j: usize) -> bool {
        !self.component_without_edge(j, i, j).contains(&i)
    }
}

/// Geometry-optimization fidelity tier for a conformer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum QualityTier {
    Exact,
    Mid,
    Low,
}

impl QualityTier {
    pub fn as_str(&self) -> &'static str {
        match self {
            QualityTier::Exact => "exact",
            QualityTier::Mid => "mid",
            QualityTier::Low => "low",
        }
    }
}

impl std::str::FromStr for QualityTier {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "exact" => Ok(QualityTier::Exact),
            "mid" => Ok(QualityTier::Mid),
            "low" => Ok(QualityTier::Low),
            other => Err(format!("unknown quality tier '{other}'")),
        }
    }
}

/// One 3D geometry of the parent graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conformer {
    pub id: u64,
    pub coords: Vec<[f64; 3]>,
    pub energy: Option<f64>,
    pub quality: QualityTier,
}

impl Conformer {
    pub fn new(id: u64, coords: Vec<[f64; 3]>, energy: Option<f64>, quality: QualityTier) -> Self {
        Conformer { id, coords, energy, quality }
    }

    pub fn atom_count(&self) -> usize {
        self.coords.len()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum EnsembleShapeError {
    #[error("ensemble has no conformers")]
    Empty,
    #[error("conformer {id} has {got} atoms, graph has {expected}")]
    AtomCountMismatch { id: u64, got: usize, expected: usize },
    #[error("conformer {id} has a non-finite coordinate")]
    NonFiniteCoordinate { id: u64 },
    #[error("conformer {id} is missing an energy present on other members")]
    PartialEnergies { id: u64 },
}

/// A graph plus a nonempty list of conformers that all match its atom count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEnsemble", into = "RawEnsemble")]
pub struct ConformerEnsemble {
    graph: MolecularGraph,
    conformers: Vec<Conformer>,
}

#[derive(Serialize, Deserialize, Clone)]
struct RawEnsemble {
    graph: MolecularGraph,
    conformers: Vec<Conformer>,
}

impl TryFrom<RawEnsemble> for ConformerEnsemble {
    type Error = EnsembleShapeError;

    fn try_from(raw: RawEnsemble) -> Result<Self, EnsembleShapeError> {
        ConformerEnsemble::new(raw.graph, raw.conformers)
    }
}

impl From<ConformerEnsemble> for RawEnsemble {
    fn from(e: ConformerEnsemble) -> Self {
        RawEnsemble { graph: e.graph, conformers: e.conformers }
    }
}

impl ConformerEnsemble {
    pub fn new(
        graph: MolecularGraph,
        conformers: Vec<Conformer>,
    ) -> Result<Self, EnsembleShapeError> {
        if conformers.is_empty() {
            return Err(EnsembleShapeError::Empty);
        }
        let n = graph.atom_count();
        let any_energy = conformers.iter().any(|c| c.energy.is_some());
        for c in &conformers {
            if c.atom_count() != n {
                return Err(EnsembleShapeError::AtomCountMismatch {
                    id: c.id,
                    got: c.atom_count(),
                    expected: n,
                });
            }
            if c.coords.iter().flatten().any(|v| !v.is_finite()) {
                return Err(EnsembleShapeError::NonFiniteCoordinate { id: c.id });
            }
            if any_energy && c.energy.is_none() {
                return Err(EnsembleShapeError::PartialEnergies { id: c.id });
            }
        }
        Ok(ConformerEnsemble { graph, conformers })
    }

    pub fn graph(&self) -> &MolecularGraph {
        &self.graph
    }

    pub fn conformers(&self) -> &[Conformer] {
        &self.conformers
    }

    pub fn len(&self) -> usize {
        self.conformers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.conformers.is_empty()
    }

    pub fn conformer_by_id(&self, id: u64) -> Option<&Conformer> {
        self.conformers.iter().find(|c| c.id == id)
    }

    /// All per-conformer energies; `None` if any member lacks one.
    pub fn energies(&self) -> Option<Vec<f64>> {
        self.conformers.iter().map(|c| c.energy).collect()
    }
}

/// The four ensemble-level regression targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TargetKind {
    LMin,
    LMax,
    B5Min,
    B5Max,
}

impl TargetKind {
    pub const ALL: [TargetKind; 4] =
        [TargetKind::LMin, TargetKind::LMax, TargetKind::B5Min, TargetKind::B5Max];

    pub fn as_str(&self) -> &'static str {
        match self {
            TargetKind::LMin => "L_min",
            TargetKind::LMax => "L_max",
            TargetKind::B5Min => "B5_min",
            TargetKind::B5Max => "B5_max",
        }
    }
}

impl std::fmt::Display for TargetKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TargetKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "L_min" => Ok(TargetKind::LMin),
            "L_max" => Ok(TargetKind::LMax),
            "B5_min" => Ok(TargetKind::B5Min),
            "B5_max" => Ok(TargetKind::B5Max),
            other => Err(format!("unknown target '{other}'")),
        }
    }
}

/// Ensemble-level label values in Å, one per target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<String, f64>", into = "BTreeMap<String, f64>")]
pub struct Labels {
    pub l_min: f64,
    pub l_max: f64,
    pub b5_min: f64,
    pub b5_max: f64,
}

impl Labels {
    pub fn get(&self, target: TargetKind) -> f64 {
        match target {
            TargetKind::LMin => self.l_min,
            TargetKind::LMax => self.l_max,
            TargetKind::B5Min => self.b5_min,
            TargetKind::B5Max => self.b5_max,
        }
    }
}

impl TryFrom<BTreeMap<String, f64>> for Labels {
    type Error = String;

    fn try_from(map: BTreeMap<String, f64>) -> Result<Self, String> {
        for key in map.keys() {
            key.parse::<TargetKind>()?;
        }
        let fetch = |t: TargetKind| {
            map.get(t.as_str()).copied().ok_or_else(|| format!("missing label '{t}'"))
        };
        Ok(Labels {
            l_min: fetch(TargetKind::LMin)?,
            l_max: fetch(TargetKind::LMax)?,
            b5_min: fetch(TargetKind::B5Min)?,
            b5_max: fetch(TargetKind::B5Max)?,
        })
    }
}

impl From<Labels> for BTreeMap<String, f64> {
    fn from(labels: Labels) -> Self {
        TargetKind::ALL
            .iter()
            .map(|t| (t.as_str().to_string(), labels.get(*t)))
            .collect()
    }
}

/// One molecule of the benchmark: the ground-truth ensemble, its two cheap
/// counterparts, and the labels derived from the ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: u64,
    pub ensemble_exact: ConformerEnsemble,
    pub ensemble_mid: ConformerEnsemble,
    pub ensemble_low: ConformerEnsemble,
    pub labels: Labels,
}

impl DatasetRecord {
    pub fn ensemble(&self, tier: QualityTier) -> &ConformerEnsemble {
        match tier {
            QualityTier::Exact => &self.ensemble_exact,
            QualityTier::Mid => &self.ensemble_mid,
            QualityTier::Low => &self.ensemble_low,
        }
    }
}
