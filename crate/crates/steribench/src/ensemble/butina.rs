//! Butina sphere-exclusion clustering on an RMSD matrix.

use super::EnsembleError;
use crate::geom::rmsd_aligned;
use crate::mol_io::{Conformer, ConformerEnsemble};

/// One cluster: centroid plus members, as indices into the input list.
/// Members always include the centroid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cluster {
    pub centroid: usize,
    pub members: Vec<usize>,
}

/// Pairwise heavy-atom RMSD matrix (identity atom correspondence).
pub fn pairwise_heavy_rmsd(ensemble: &ConformerEnsemble) -> Result<Vec<Vec<f64>>, EnsembleError> {
    let heavy = ensemble.graph().heavy_atoms();
    let coords: Vec<Vec<[f64; 3]>> = ensemble
        .conformers()
        .iter()
        .map(|c| heavy.iter().map(|&i| c.coords[i]).collect())
        .collect();
    let n = coords.len();
    let mut dist = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = rmsd_aligned(&coords[i], &coords[j])?;
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }
    Ok(dist)
}

/// Classic Butina greedy clustering: repeatedly promote the unassigned item
/// with the most unassigned neighbors within `threshold` (ties go to the
/// lowest index) to centroid and assign those neighbors to it. Items whose
/// neighborhoods are exhausted end up as singletons. Clusters are disjoint
/// and cover every index.
pub fn butina_from_distances(dist: &[Vec<f64>], threshold: f64) -> Vec<Cluster> {
    let n = dist.len();
    let mut assigned = vec![false; n];
    let mut clusters = Vec::new();
    loop {
        let mut best: Option<(usize, usize)> = None; // (count, index)
        for i in 0..n {
            if assigned[i] {
                continue;
            }
            let count = (0..n)
                .filter(|&j| j != i && !assigned[j] && dist[i][j] <= threshold)
                .count();
            // Scanning ascending, so on equal counts the incumbent keeps the
            // lower index.
            if best.map_or(true, |(bc, _)| count > bc) {
                best = Some((count, i));
            }
        }
        let Some((_, centroid)) = best else {
            break;
        };
        let mut members = vec![centroid];
        assigned[centroid] = true;
        for j in 0..n {
            if !assigned[j] && dist[centroid][j] <= threshold {
                assigned[j] = true;
                members.push(j);
            }
        }
        clusters.push(Cluster { centroid, members });
    }
    clusters
}

/// Butina clustering of an ensemble at the given heavy-atom RMSD threshold.
pub fn butina_cluster(
    ensemble: &ConformerEnsemble,
    threshold: f64,
) -> Result<Vec<Cluster>, EnsembleError> {
    if ensemble.len() == 1 {
        return Ok(vec![Cluster { centroid: 0, members: vec![0] }]);
    }
    let dist = pairwise_heavy_rmsd(ensemble)?;
    Ok(butina_from_distances(&dist, threshold))
}

/// Raise the threshold from `start` in increments of `step` until the
/// cluster count is at most `max_clusters`; returns the centroid conformers.
pub fn iterative_butina(
    ensemble: &ConformerEnsemble,
    start: f64,
    step: f64,
    max_clusters: usize,
) -> Result<Vec<Conformer>, EnsembleError> {
    if max_clusters == 0 || step <= 0.0 {
        return Err(EnsembleError::BadClusterBound);
    }
    if ensemble.len() == 1 {
        return Ok(ensemble.conformers().to_vec());
    }
    let dist = pairwise_heavy_rmsd(ensemble)?;
    let max_dist = dist.iter().flatten().cloned().fold(0.0f64, f64::max);
    let mut threshold = start;
    loop {
        let clusters = butina_from_distances(&dist, threshold);
        // Once the threshold exceeds the largest pairwise distance, the first
        // centroid absorbs everything, so the loop always terminates.
        if clusters.len() <= max_clusters || threshold > max_dist {
            return Ok(clusters
                .iter()
                .map(|c| ensemble.conformers()[c.centroid].clone())
                .collect());
        }
        threshold += step;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mol_io::{Atom, Bond, BondOrder, MolecularGraph, QualityTier};

    fn matrix_from_points(points: &[f64]) -> Vec<Vec<f64>> {
        let n = points.len();
        let mut dist = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                dist[i][j] = (points[i] - points[j]).abs();
            }
        }
        dist
    }

    /// Ensemble of bent 4-carbon chains; `kinks` sets the z offset of the
    /// last atom per conformer, so RMSD between members is controlled.
    fn kinked_ensemble(kinks: &[f64]) -> ConformerEnsemble {
        let graph = MolecularGraph::new(
            vec![Atom::new(6); 4],
            vec![
                Bond::new(0, 1, BondOrder::Single),
                Bond::new(1, 2, BondOrder::Single),
                Bond::new(2, 3, BondOrder::Single),
            ],
        )
        .unwrap();
        let conformers = kinks
            .iter()
            .enumerate()
            .map(|(i, &z)| {
                Conformer::new(
                    i as u64,
                    vec![[0.0, 0.0, 0.0], [1.5, 0.0, 0.0], [2.2, 1.3, 0.0], [3.7, 1.3, z]],
                    None,
                    QualityTier::Exact,
                )
            })
            .collect();
        ConformerEnsemble::new(graph, conformers).unwrap()
    }

    #[test]
    fn all_far_apart_gives_singletons() {
        let dist = matrix_from_points(&[0.0, 10.0, 20.0, 30.0]);
        let clusters = butina_from_distances(&dist, 1.0);
        assert_eq!(clusters.len(), 4);
        assert!(clusters.iter().all(|c| c.members.len() == 1));
    }

    #[test]
    fn all_identical_gives_one_cluster() {
        let dist = matrix_from_points(&[5.0; 7]);
        let clusters = butina_from_distances(&dist, 0.2);
        assert_eq!(clusters.len(), 1);
        assert_eq!(clusters[0].members.len(), 7);
        assert_eq!(clusters[0].centroid, 0);
    }

    #[test]
    fn clusters_partition_the_input() {
        let dist = matrix_from_points(&[0.0, 0.1, 0.15, 5.0, 5.05, 9.0]);
        let clusters = butina_from_distances(&dist, 0.2);
        let mut seen: Vec<usize> = clusters.iter().flat_map(|c| c.members.clone()).collect();
        seen.sort_unstable();
        assert_eq!(seen, vec![0, 1, 2, 3, 4, 5]);
        for c in &clusters {
            for &m in &c.members {
                assert!(dist[c.centroid][m] <= 0.2);
            }
        }
    }

    #[test]
    fn greedy_prefers_highest_neighbor_count_then_lowest_index() {
        // Items 2..=5 are mutual neighbors (count 3 each); tie goes to 2.
        let dist = matrix_from_points(&[0.0, 0.1, 2.0, 2.1, 2.2, 2.15]);
        let clusters = butina_from_distances(&dist, 0.3);
        assert_eq!(clusters[0].centroid, 2);
        assert_eq!(clusters[0].members, vec![2, 3, 4, 5]);
        assert_eq!(clusters[1].centroid, 0);
        assert_eq!(clusters[1].members, vec![0, 1]);
    }

    #[test]
    fn identical_conformers_collapse_to_one_centroid() {
        let ens = kinked_ensemble(&[0.3; 30]);
        let clusters = butina_cluster(&ens, 0.2).unwrap();
        assert_eq!(clusters.len(), 1);
        let centroids = iterative_butina(&ens, 0.2, 0.1, 20).unwrap();
        assert_eq!(centroids.len(), 1);
        assert_eq!(centroids[0].id, 0);
    }

    #[test]
    fn iterative_butina_raises_threshold_until_bound() {
        // 25 well-separated kinks: singletons at 0.2 Å, merged as the
        // threshold grows. The bound of 8 forces at least one increase.
        let kinks: Vec<f64> = (0..25).map(|i| i as f64 * 0.9).collect();
        let ens = kinked_ensemble(&kinks);
        let centroids = iterative_butina(&ens, 0.2, 0.1, 8).unwrap();
        assert!(centroids.len() <= 8, "got {}", centroids.len());

        // Direct simulation oracle: the same threshold schedule evaluated
        // straight from the distance matrix.
        let dist = pairwise_heavy_rmsd(&ens).unwrap();
        let mut t = 0.2;
        let expected = loop {
            let clusters = butina_from_distances(&dist, t);
            if clusters.len() <= 8 {
                break clusters;
            }
            t += 0.1;
        };
        assert!(t > 0.2, "threshold must strictly increase");
        let got: Vec<u64> = centroids.iter().map(|c| c.id).collect();
        let want: Vec<u64> = expected.iter().map(|c| c.centroid as u64).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn small_ensembles_pass_through_in_one_round() {
        let ens = kinked_ensemble(&[0.0, 2.0, 4.0, 6.0, 8.0]);
        let centroids = iterative_butina(&ens, 0.2, 0.1, 20).unwrap();
        assert_eq!(centroids.len(), 5);
    }
}
