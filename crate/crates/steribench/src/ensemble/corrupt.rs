//! Parameterized geometry corruption standing in for cheap re-optimization.
//!
//! Coordinate jitter models local geometric quality; torsional perturbation
//! models loss of global structural fidelity. Both are Gaussian, seeded, and
//! reproducible per conformer id.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::EnsembleError;
use crate::geom::{get_torsion, rotatable_bonds, set_torsion};
use crate::mol_io::{Conformer, ConformerEnsemble, MolecularGraph, QualityTier};
use crate::seeds;

/// Noise levels applied by [`corrupt`]. Quality `Exact` corresponds to both
/// sigmas being zero, and only to that.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorruptionSpec {
    /// Per-coordinate Gaussian sigma, in Å.
    pub jitter_sigma: f64,
    /// Per-rotatable-bond Gaussian sigma, in degrees.
    pub torsion_sigma_deg: f64,
    pub seed: u64,
}

/// Default mid-tier noise: (jitter Å, torsion degrees).
pub const DEFAULT_MID_NOISE: (f64, f64) = (0.03, 3.0);
/// Default low-tier noise: (jitter Å, torsion degrees).
pub const DEFAULT_LOW_NOISE: (f64, f64) = (0.09, 8.0);

impl CorruptionSpec {
    pub fn new(jitter_sigma: f64, torsion_sigma_deg: f64, seed: u64) -> Self {
        CorruptionSpec { jitter_sigma, torsion_sigma_deg, seed }
    }

    pub fn exact(seed: u64) -> Self {
        CorruptionSpec::new(0.0, 0.0, seed)
    }

    pub fn mid(seed: u64) -> Self {
        CorruptionSpec::new(DEFAULT_MID_NOISE.0, DEFAULT_MID_NOISE.1, seed)
    }

    pub fn low(seed: u64) -> Self {
        CorruptionSpec::new(DEFAULT_LOW_NOISE.0, DEFAULT_LOW_NOISE.1, seed)
    }

    /// Spec for a tier with the default noise levels.
    pub fn for_tier(tier: QualityTier, seed: u64) -> Self {
        match tier {
            QualityTier::Exact => CorruptionSpec::exact(seed),
            QualityTier::Mid => CorruptionSpec::mid(seed),
            QualityTier::Low => CorruptionSpec::low(seed),
        }
    }

    pub fn is_noiseless(&self) -> bool {
        self.jitter_sigma == 0.0 && self.torsion_sigma_deg == 0.0
    }

    /// Enforce sigmas >= 0 and the Exact <=> (0, 0) correspondence.
    pub fn validate(&self, quality: QualityTier) -> Result<(), EnsembleError> {
        if self.jitter_sigma < 0.0 || self.torsion_sigma_deg < 0.0 {
            return Err(EnsembleError::InvalidSpec(format!(
                "negative sigma ({}, {})",
                self.jitter_sigma, self.torsion_sigma_deg
            )));
        }
        match (quality, self.is_noiseless()) {
            (QualityTier::Exact, false) => Err(EnsembleError::InvalidSpec(
                "quality Exact requires both sigmas to be zero".into(),
            )),
            (QualityTier::Mid | QualityTier::Low, true) => Err(EnsembleError::InvalidSpec(
                "zero-noise spec must carry quality Exact".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// Corrupt a single conformer: Gaussian jitter on every coordinate, then a
/// Gaussian perturbation of each rotatable torsion. Deterministic given
/// (spec.seed, conformer.id). Atom count, bonds, id, and energy are
/// untouched; the quality tag is replaced.
pub fn corrupt_conformer(
    graph: &MolecularGraph,
    conformer: &Conformer,
    spec: &CorruptionSpec,
    quality: QualityTier,
) -> Result<Conformer, EnsembleError> {
    spec.validate(quality)?;
    let mut out = conformer.clone();
    out.quality = quality;
    if spec.is_noiseless() {
        return Ok(out);
    }

    let mut rng = seeds::rng(&[spec.seed, conformer.id, 0xC0]);

    if spec.jitter_sigma > 0.0 {
        let normal = Normal::new(0.0, spec.jitter_sigma)
            .map_err(|e| EnsembleError::InvalidSpec(e.to_string()))?;
        for coord in &mut out.coords {
            for value in coord.iter_mut() {
                *value += normal.sample(&mut rng);
            }
        }
    }

    if spec.torsion_sigma_deg > 0.0 {
        let normal = Normal::new(0.0, spec.torsion_sigma_deg)
            .map_err(|e| EnsembleError::InvalidSpec(e.to_string()))?;
        let base = graph.descriptor_bond().map(|(a, _)| a);
        for (j, k) in rotatable_bonds(graph) {
            let delta = normal.sample(&mut rng);
            // Keep the base-atom side fixed so the descriptor frame is
            // stable; fall back to rotating the k side.
            let (j, k) = match base {
                Some(a) if graph.component_without_edge(k, j, k).contains(&a) => (k, j),
                _ => (j, k),
            };
            let i = graph.neighbors(j).iter().copied().find(|&n| n != k).unwrap();
            let l = graph.neighbors(k).iter().copied().find(|&n| n != j).unwrap();
            let current = get_torsion(&out.coords, i, j, k, l)?;
            out.coords = set_torsion(&out.coords, graph, j, k, current + delta)?;
        }
    }
    Ok(out)
}

/// Corrupt every conformer of an ensemble to the given quality tier.
pub fn corrupt(
    ensemble: &ConformerEnsemble,
    spec: &CorruptionSpec,
    quality: QualityTier,
) -> Result<ConformerEnsemble, EnsembleError> {
    spec.validate(quality)?;
    let corrupted: Result<Vec<Conformer>, EnsembleError> = ensemble
        .conformers()
        .iter()
        .map(|c| corrupt_conformer(ensemble.graph(), c, spec, quality))
        .collect();
    Ok(ConformerEnsemble::new(ensemble.graph().clone(), corrupted?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mol_io::{Atom, Bond, BondOrder};

    fn chain_ensemble(n_conformers: usize) -> ConformerEnsemble {
        let mut graph = MolecularGraph::new(
            vec![Atom::new(6); 4],
            vec![
                Bond::new(0, 1, BondOrder::Single),
                Bond::new(1, 2, BondOrder::Single),
                Bond::new(2, 3, BondOrder::Single),
            ],
        )
        .unwrap();
        graph.set_descriptor_bond(0, 1).unwrap();
        let conformers = (0..n_conformers)
            .map(|i| {
                Conformer::new(
                    i as u64,
                    vec![
                        [0.0, 0.0, 0.0],
                        [1.5, 0.0, 0.0],
                        [2.2, 1.3, 0.0],
                        [3.7, 1.3, 0.2],
                    ],
                    Some(i as f64),
                    QualityTier::Exact,
                )
            })
            .collect();
        ConformerEnsemble::new(graph, conformers).unwrap()
    }

    #[test]
    fn zero_noise_is_identity_with_exact_tag() {
        let ens = chain_ensemble(3);
        let out = corrupt(&ens, &CorruptionSpec::exact(1), QualityTier::Exact).unwrap();
        assert_eq!(out, ens);
    }

    #[test]
    fn fixed_seed_reproduces_bitwise() {
        let ens = chain_ensemble(4);
        let spec = CorruptionSpec::low(99);
        let a = corrupt(&ens, &spec, QualityTier::Low).unwrap();
        let b = corrupt(&ens, &spec, QualityTier::Low).unwrap();
        assert_eq!(a, b);
        let c = corrupt(&ens, &CorruptionSpec::new(0.09, 8.0, 100), QualityTier::Low).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn corruption_preserves_counts_bonds_energies_ids() {
        let ens = chain_ensemble(5);
        let out = corrupt(&ens, &CorruptionSpec::mid(7), QualityTier::Mid).unwrap();
        assert_eq!(out.len(), ens.len());
        assert_eq!(out.graph(), ens.graph());
        for (a, b) in out.conformers().iter().zip(ens.conformers()) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.energy, b.energy);
            assert_eq!(a.atom_count(), b.atom_count());
            assert_eq!(a.quality, QualityTier::Mid);
            assert_ne!(a.coords, b.coords);
        }
    }

    #[test]
    fn tier_spec_consistency_is_enforced() {
        let ens = chain_ensemble(1);
        assert!(corrupt(&ens, &CorruptionSpec::mid(1), QualityTier::Exact).is_err());
        assert!(corrupt(&ens, &CorruptionSpec::exact(1), QualityTier::Mid).is_err());
        assert!(corrupt(
            &ens,
            &CorruptionSpec::new(-0.1, 0.0, 1),
            QualityTier::Low
        )
        .is_err());
    }

    #[test]
    fn jitter_displacement_matches_monte_carlo_chi_mean() {
        // corrupt() with jitter only; empirical mean |dr| over >= 1e4 atoms
        // compared against a Monte-Carlo estimate of E|N(0, s^2 I_3)| drawn
        // with an unrelated generator.
        use rand::Rng;
        let sigma = 0.1;
        let spec = CorruptionSpec::new(sigma, 0.0, 31);

        let mut displacement_sum = 0.0;
        let mut atoms = 0usize;
        // 3000 conformers x 4 atoms = 12000 displacement samples.
        let ens = chain_ensemble(3000);
        let out = corrupt(&ens, &spec, QualityTier::Low).unwrap();
        for (a, b) in out.conformers().iter().zip(ens.conformers()) {
            for (pa, pb) in a.coords.iter().zip(&b.coords) {
                let d = [pa[0] - pb[0], pa[1] - pb[1], pa[2] - pb[2]];
                displacement_sum += (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                atoms += 1;
            }
        }
        let empirical = displacement_sum / atoms as f64;

        // Monte-Carlo oracle via Box-Muller on a plain LCG.
        let mut rng = crate::seeds::rng(&[0xFACE]);
        let mut mc_sum = 0.0;
        let n_mc = 200_000;
        for _ in 0..n_mc {
            let mut sq = 0.0;
            for _ in 0..3 {
                let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
                let u2: f64 = rng.gen_range(0.0..1.0);
                let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
                sq += (sigma * z) * (sigma * z);
            }
            mc_sum += sq.sqrt();
        }
        let oracle = mc_sum / n_mc as f64;

        let rel = (empirical - oracle).abs() / oracle;
        assert!(rel < 0.05, "empirical {empirical}, oracle {oracle}, rel {rel}");
        // Both should also sit near the analytic chi_3 mean, sigma*sqrt(8/pi).
        let analytic = sigma * (8.0 / std::f64::consts::PI).sqrt();
        assert!((oracle - analytic).abs() / analytic < 0.02);
    }
}
