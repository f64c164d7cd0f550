//! Rigid-body geometry: Kabsch superposition, RMSD, and torsion get/set.

use nalgebra::Matrix3;
use thiserror::Error;

use crate::mol_io::MolecularGraph;

#[derive(Debug, Error, PartialEq)]
pub enum GeomError {
    #[error("point sets have different sizes ({0} vs {1})")]
    ShapeMismatch(usize, usize),
    #[error("need at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("degenerate geometry: {0}")]
    Degenerate(&'static str),
    #[error("bond ({0}, {1}) does not exist")]
    NotABond(usize, usize),
    #[error("bond ({0}, {1}) is in a ring and cannot be rotated")]
    NonRotatable(usize, usize),
    #[error("atom {0} has no reference neighbor for the torsion")]
    NoReferenceAtom(usize),
}

pub mod vec3 {
    pub fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
        [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
    }

    pub fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
        [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
    }

    pub fn scale(a: [f64; 3], s: f64) -> [f64; 3] {
        [a[0] * s, a[1] * s, a[2] * s]
    }

    pub fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
        a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
    }

    pub fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    }

    pub fn norm(a: [f64; 3]) -> f64 {
        dot(a, a).sqrt()
    }

    pub fn normalize(a: [f64; 3]) -> Option<[f64; 3]> {
        let n = norm(a);
        if n < 1e-12 {
            None
        } else {
            Some(scale(a, 1.0 / n))
        }
    }
}

/// A proper rigid motion `x -> R x + t`.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidTransform {
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
}

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform {
            rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            translation: [0.0; 3],
        }
    }

    pub fn apply(&self, p: [f64; 3]) -> [f64; 3] {
        let r = &self.rotation;
        [
            r[0][0] * p[0] + r[0][1] * p[1] + r[0][2] * p[2] + self.translation[0],
            r[1][0] * p[0] + r[1][1] * p[1] + r[1][2] * p[2] + self.translation[1],
            r[2][0] * p[0] + r[2][1] * p[1] + r[2][2] * p[2] + self.translation[2],
        ]
    }

    pub fn apply_all(&self, points: &[[f64; 3]]) -> Vec<[f64; 3]> {
        points.iter().map(|&p| self.apply(p)).collect()
    }

    /// Max deviation of `R^T R` from the identity plus `|det(R) - 1|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let r = Matrix3::from_fn(|i, j| self.rotation[i][j]);
        let gram = r.transpose() * r;
        let mut defect: f64 = (r.determinant() - 1.0).abs();
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 1.0 } else { 0.0 };
                defect = defect.max((gram[(i, j)] - expected).abs());
            }
        }
        defect
    }
}

fn centroid(points: &[[f64; 3]]) -> [f64; 3] {
    let mut c = [0.0; 3];
    for p in points {
        c = vec3::add(c, *p);
    }
    vec3::scale(c, 1.0 / points.len() as f64)
}

/// Optimal proper superposition of `p` onto `q` in the least-squares sense.
/// Reflections are corrected by flipping the sign of the smallest singular
/// value's axis.
pub fn kabsch(p: &[[f64; 3]], q: &[[f64; 3]]) -> Result<RigidTransform, GeomError> {
    if p.len() != q.len() {
        return Err(GeomError::ShapeMismatch(p.len(), q.len()));
    }
    if p.len() < 3 {
        return Err(GeomError::TooFewPoints(p.len()));
    }
    let pc = centroid(p);
    let qc = centroid(q);
    // Cross-covariance H = sum (p_i - pc)(q_i - qc)^T.
    let mut h = Matrix3::zeros();
    for (pp, qq) in p.iter().zip(q) {
        let dp = vec3::sub(*pp, pc);
        let dq = vec3::sub(*qq, qc);
        for i in 0..3 {
            for j in 0..3 {
                h[(i, j)] += dp[i] * dq[j];
            }
        }
    }
    let svd = h.svd(true, true);
    let u: Matrix3<f64> = svd.u.ok_or(GeomError::Degenerate("svd failed"))?;
    let v_t: Matrix3<f64> = svd.v_t.ok_or(GeomError::Degenerate("svd failed"))?;
    let sigma: nalgebra::Vector3<f64> = svd.singular_values;
    if sigma[0] < 1e-12 || sigma[1] < 1e-9 * sigma[0].max(1.0) {
        return Err(GeomError::Degenerate("rank-deficient covariance"));
    }
    // R = V diag(1, 1, d) U^T with d restoring a proper rotation.
    let d = (v_t.transpose() * u.transpose()).determinant();
    let sign = if d < 0.0 { -1.0 } else { 1.0 };
    let mut flip = Matrix3::identity();
    flip[(2, 2)] = sign;
    let r = v_t.transpose() * flip * u.transpose();
    let mut rotation = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            rotation[i][j] = r[(i, j)];
        }
    }
    let rotated_pc = [
        rotation[0][0] * pc[0] + rotation[0][1] * pc[1] + rotation[0][2] * pc[2],
        rotation[1][0] * pc[0] + rotation[1][1] * pc[1] + rotation[1][2] * pc[2],
        rotation[2][0] * pc[0] + rotation[2][1] * pc[1] + rotation[2][2] * pc[2],
    ];
    let translation = vec3::sub(qc, rotated_pc);
    Ok(RigidTransform { rotation, translation })
}

/// Root-mean-square deviation without alignment.
pub fn rmsd_raw(p: &[[f64; 3]], q: &[[f64; 3]]) -> Result<f64, GeomError> {
    if p.len() != q.len() {
        return Err(GeomError::ShapeMismatch(p.len(), q.len()));
    }
    if p.is_empty() {
        return Err(GeomError::TooFewPoints(0));
    }
    let sum: f64 = p
        .iter()
        .zip(q)
        .map(|(a, b)| {
            let d = vec3::sub(*a, *b);
            vec3::dot(d, d)
        })
        .sum();
    Ok((sum / p.len() as f64).sqrt())
}

/// RMSD after optimal Kabsch superposition of `p` onto `q`.
pub fn rmsd_aligned(p: &[[f64; 3]], q: &[[f64; 3]]) -> Result<f64, GeomError> {
    let transform = kabsch(p, q)?;
    rmsd_raw(&transform.apply_all(p), q)
}

/// Dihedral angle i-j-k-l in degrees, IUPAC sign convention (right-handed
/// about j->k), in the half-open interval (-180, 180].
pub fn get_torsion(
    coords: &[[f64; 3]],
    i: usize,
    j: usize,
    k: usize,
    l: usize,
) -> Result<f64, GeomError> {
    let b0 = vec3::sub(coords[i], coords[j]);
    let axis = vec3::normalize(vec3::sub(coords[k], coords[j]))
        .ok_or(GeomError::Degenerate("zero-length torsion axis"))?;
    let b2 = vec3::sub(coords[l], coords[k]);
    // Components of the flanking bonds perpendicular to the axis.
    let v = vec3::sub(b0, vec3::scale(axis, vec3::dot(b0, axis)));
    let w = vec3::sub(b2, vec3::scale(axis, vec3::dot(b2, axis)));
    if vec3::norm(v) < 1e-12 || vec3::norm(w) < 1e-12 {
        return Err(GeomError::Degenerate("collinear torsion reference atoms"));
    }
    let x = vec3::dot(v, w);
    let y = vec3::dot(vec3::cross(axis, v), w);
    let mut angle = y.atan2(x).to_degrees();
    if angle <= -180.0 {
        angle += 360.0;
    }
    Ok(angle)
}

/// Smallest-index neighbor of `j` excluding `exclude`; torsion reference.
fn reference_neighbor(graph: &MolecularGraph, j: usize, exclude: usize) -> Option<usize> {
    graph.neighbors(j).iter().copied().find(|&n| n != exclude)
}

/// Rotate the k-side of bond (j, k) about the j->k axis so that the torsion
/// measured with canonical reference atoms (the smallest-index neighbors of
/// j and k) equals `angle_deg`. Every other internal coordinate is
/// preserved exactly; positions of the j-side atoms are unchanged.
pub fn set_torsion(
    coords: &[[f64; 3]],
    graph: &MolecularGraph,
    j: usize,
    k: usize,
    angle_deg: f64,
) -> Result<Vec<[f64; 3]>, GeomError> {
    if !graph.contains_bond(j, k) {
        return Err(GeomError::NotABond(j, k));
    }
    let k_side = graph.component_without_edge(k, j, k);
    if k_side.contains(&j) {
        return Err(GeomError::NonRotatable(j, k));
    }
    let i = reference_neighbor(graph, j, k).ok_or(GeomError::NoReferenceAtom(j))?;
    let l = reference_neighbor(graph, k, j).ok_or(GeomError::NoReferenceAtom(k))?;
    let current = get_torsion(coords, i, j, k, l)?;
    let delta = (angle_deg - current).to_radians();
    Ok(rotate_about_bond(coords, &k_side, coords[j], coords[k], delta))
}

/// Rotate `moving` atoms by `angle_rad` about the axis through `from` and
/// `to` (right-handed about from->to).
pub fn rotate_about_bond(
    coords: &[[f64; 3]],
    moving: &[usize],
    from: [f64; 3],
    to: [f64; 3],
    angle_rad: f64,
) -> Vec<[f64; 3]> {
    let axis = match vec3::normalize(vec3::sub(to, from)) {
        Some(u) => u,
        None => return coords.to_vec(),
    };
    let (sin, cos) = angle_rad.sin_cos();
    let mut out = coords.to_vec();
    for &idx in moving {
        let p = vec3::sub(coords[idx], from);
        // Rodrigues rotation formula.
        let term1 = vec3::scale(p, cos);
        let term2 = vec3::scale(vec3::cross(axis, p), sin);
        let term3 = vec3::scale(axis, vec3::dot(axis, p) * (1.0 - cos));
        out[idx] = vec3::add(from, vec3::add(vec3::add(term1, term2), term3));
    }
    out
}

/// Bonds (j, k) that can carry a torsion: acyclic, and both endpoints have
/// at least one other neighbor. Endpoints are ordered (min, max); the list
/// is sorted for deterministic iteration.
pub fn rotatable_bonds(graph: &MolecularGraph) -> Vec<(usize, usize)> {
    let mut bonds: Vec<(usize, usize)> = graph
        .bonds()
        .iter()
        .map(|b| b.key())
        .filter(|&(j, k)| {
            graph.degree(j) >= 2 && graph.degree(k) >= 2 && graph.bond_splits_graph(j, k)
        })
        .collect();
    bonds.sort_unstable();
    bonds
}
