//! Ensemble-level procedures: energy filtering, Boltzmann weighting, label
//! aggregation, Butina clustering, corruption to lower quality tiers,
//! presampling, and decoy-set construction.

mod butina;
mod corrupt;

pub use butina::{butina_cluster, butina_from_distances, iterative_butina, pairwise_heavy_rmsd, Cluster};
pub use corrupt::{corrupt, corrupt_conformer, CorruptionSpec};

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use thiserror::Error;

use crate::geom::GeomError;
use crate::mol_io::types::EnsembleShapeError;
use crate::mol_io::{Conformer, ConformerEnsemble, Labels, QualityTier, TargetKind};
use crate::seeds;
use crate::sterimol::{sterimol_lb5, SterimolError};

/// Boltzmann constant in kcal/(mol·K).
pub const KB_KCAL_PER_MOL_K: f64 = 0.0019872041;

/// Default temperature for Boltzmann weights, in K.
pub const DEFAULT_TEMPERATURE_K: f64 = 298.15;

/// Default energy window for [`energy_filter`], in kcal/mol.
pub const DEFAULT_ENERGY_WINDOW: f64 = 5.0;

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("operation requires energies on all conformers")]
    MissingEnergies,
    #[error("empty input")]
    Empty,
    #[error("temperature must be positive, got {0}")]
    BadTemperature(f64),
    #[error("energy window must be non-negative, got {0}")]
    BadWindow(f64),
    #[error("sample count must be positive")]
    ZeroSampleCount,
    #[error("invalid corruption spec: {0}")]
    InvalidSpec(String),
    #[error("max_clusters must be at least 1")]
    BadClusterBound,
    #[error(transparent)]
    Geometry(#[from] GeomError),
    #[error(transparent)]
    Sterimol(#[from] SterimolError),
    #[error(transparent)]
    Shape(#[from] EnsembleShapeError),
}

/// Drop conformers more than `window` kcal/mol above the ensemble minimum.
/// The minimum-energy conformer itself is always retained.
pub fn energy_filter(
    ensemble: &ConformerEnsemble,
    window: f64,
) -> Result<ConformerEnsemble, EnsembleError> {
    if window < 0.0 {
        return Err(EnsembleError::BadWindow(window));
    }
    let energies = ensemble.energies().ok_or(EnsembleError::MissingEnergies)?;
    let e_min = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let kept: Vec<Conformer> = ensemble
        .conformers()
        .iter()
        .zip(&energies)
        .filter(|(_, &e)| e - e_min <= window)
        .map(|(c, _)| c.clone())
        .collect();
    Ok(ConformerEnsemble::new(ensemble.graph().clone(), kept)?)
}

/// Normalized Boltzmann weights for energies in kcal/mol at temperature `t`.
pub fn boltzmann_weights(energies: &[f64], t: f64) -> Result<Vec<f64>, EnsembleError> {
    if energies.is_empty() {
        return Err(EnsembleError::Empty);
    }
    if t <= 0.0 {
        return Err(EnsembleError::BadTemperature(t));
    }
    let e_min = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let kt = KB_KCAL_PER_MOL_K * t;
    let raw: Vec<f64> = energies.iter().map(|&e| (-(e - e_min) / kt).exp()).collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|w| w / total).collect())
}

/// Weighted average of per-conformer values, e.g. Boltzmann-averaged
/// descriptors.
pub fn boltzmann_average(values: &[f64], weights: &[f64]) -> f64 {
    values.iter().zip(weights).map(|(v, w)| v * w).sum()
}

/// Ensemble-level min/max Sterimol values and the conformers attaining them.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedLabels {
    pub l_min: f64,
    pub l_max: f64,
    pub b5_min: f64,
    pub b5_max: f64,
    /// Conformer id attaining each target; ties resolve to the lowest id.
    pub active_ids: BTreeMap<TargetKind, u64>,
}

impl AggregatedLabels {
    pub fn labels(&self) -> Labels {
        Labels { l_min: self.l_min, l_max: self.l_max, b5_min: self.b5_min, b5_max: self.b5_max }
    }

    pub fn get(&self, target: TargetKind) -> f64 {
        self.labels().get(target)
    }

    pub fn active_id(&self, target: TargetKind) -> u64 {
        self.active_ids[&target]
    }
}

/// Min/max Sterimol L and B5 over the ensemble.
pub fn aggregate_labels(ensemble: &ConformerEnsemble) -> Result<AggregatedLabels, EnsembleError> {
    let mut values: Vec<(u64, f64, f64)> = Vec::with_capacity(ensemble.len());
    for conformer in ensemble.conformers() {
        let result = sterimol_lb5(ensemble.graph(), conformer)?;
        values.push((conformer.id, result.l, result.b5));
    }

    let pick = |better: fn(f64, f64) -> bool, field: fn(&(u64, f64, f64)) -> f64| {
        let mut best_value = field(&values[0]);
        for v in &values[1..] {
            if better(field(v), best_value) {
                best_value = field(v);
            }
        }
        let best_id =
            values.iter().filter(|v| field(v) == best_value).map(|v| v.0).min().unwrap();
        (best_value, best_id)
    };

    let (l_min, l_min_id) = pick(|a, b| a < b, |v| v.1);
    let (l_max, l_max_id) = pick(|a, b| a > b, |v| v.1);
    let (b5_min, b5_min_id) = pick(|a, b| a < b, |v| v.2);
    let (b5_max, b5_max_id) = pick(|a, b| a > b, |v| v.2);

    let mut active_ids = BTreeMap::new();
    active_ids.insert(TargetKind::LMin, l_min_id);
    active_ids.insert(TargetKind::LMax, l_max_id);
    active_ids.insert(TargetKind::B5Min, b5_min_id);
    active_ids.insert(TargetKind::B5Max, b5_max_id);
    Ok(AggregatedLabels { l_min, l_max, b5_min, b5_max, active_ids })
}

/// Draw `n_c` conformers uniformly without replacement; when the ensemble
/// is smaller than `n_c`, exhaust it and restart sampling until `n_c` are
/// drawn.
pub fn presample(
    ensemble: &ConformerEnsemble,
    n_c: usize,
    seed: u64,
) -> Result<Vec<Conformer>, EnsembleError> {
    if n_c == 0 {
        return Err(EnsembleError::ZeroSampleCount);
    }
    let mut rng = seeds::rng(&[seed, 0x5A4D50]);
    let mut out = Vec::with_capacity(n_c);
    while out.len() < n_c {
        let mut order: Vec<usize> = (0..ensemble.len()).collect();
        order.shuffle(&mut rng);
        for idx in order {
            if out.len() == n_c {
                break;
            }
            out.push(ensemble.conformers()[idx].clone());
        }
    }
    Ok(out)
}

/// One uniformly random conformer.
pub fn sample_random_conformer(
    ensemble: &ConformerEnsemble,
    seed: u64,
) -> Result<Conformer, EnsembleError> {
    Ok(presample(ensemble, 1, seed)?.pop().unwrap())
}

/// A fixed-size conformer set fed to set-encoder models. When
/// `contains_active` is set, the member at `active_position` derives from
/// the conformer that attains the target value; models never see that index.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoySet {
    pub conformers: Vec<Conformer>,
    pub active_position: usize,
    pub contains_active: bool,
    pub quality: QualityTier,
}

impl DecoySet {
    /// Wrap plain presampled conformers (no guaranteed active member).
    pub fn from_members(conformers: Vec<Conformer>, quality: QualityTier) -> Self {
        DecoySet { conformers, active_position: 0, contains_active: false, quality }
    }
}

/// Build a decoy-set for `target`: the active conformer plus `n_c - 1`
/// distinct non-active decoys (fewer when the ensemble is small), all
/// corrupted with the same spec so that local quality is uniform across
/// members, then shuffled.
pub fn build_decoy_set(
    ensemble_exact: &ConformerEnsemble,
    target: TargetKind,
    n_c: usize,
    quality: QualityTier,
    spec: &CorruptionSpec,
    seed: u64,
) -> Result<DecoySet, EnsembleError> {
    if n_c == 0 {
        return Err(EnsembleError::ZeroSampleCount);
    }
    let aggregated = aggregate_labels(ensemble_exact)?;
    let active_id = aggregated.active_id(target);
    let active = ensemble_exact.conformer_by_id(active_id).expect("active id from aggregation");

    let mut rng = seeds::rng(&[seed, u64::from(n_c as u32), 0xDEC0]);
    let mut pool: Vec<&Conformer> =
        ensemble_exact.conformers().iter().filter(|c| c.id != active_id).collect();
    pool.sort_by_key(|c| c.id);
    pool.shuffle(&mut rng);

    let mut members: Vec<Conformer> = Vec::with_capacity(n_c);
    members.push(active.clone());
    members.extend(pool.into_iter().take(n_c - 1).cloned());
    if members.len() < n_c {
        log::debug!(
            "decoy-set for target {target} has only {} members (requested {n_c})",
            members.len()
        );
    }

    let staged = ConformerEnsemble::new(ensemble_exact.graph().clone(), members)?;
    let corrupted = corrupt(&staged, spec, quality)?;
    let mut conformers = corrupted.conformers().to_vec();
    conformers.shuffle(&mut rng);
    let active_position = conformers.iter().position(|c| c.id == active_id).unwrap();
    Ok(DecoySet { conformers, active_position, contains_active: true, quality })
}
