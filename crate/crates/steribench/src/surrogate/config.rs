//! The 14-model taxonomy: what each model encodes and at which quality tier.

use serde::{Deserialize, Serialize};

use crate::mol_io::{QualityTier, TargetKind};

use super::ModelError;

/// How a model consumes conformers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InputKind {
    /// The conformer attaining the target value.
    Active,
    /// One presampled random conformer.
    Random,
    /// A presampled pool, one member per training iteration, averaged at
    /// inference.
    RandomAugmented,
    /// A gated set of presampled random conformers.
    Set,
    /// A gated set guaranteed to contain the (corrupted) active conformer.
    DecoySet,
}

impl InputKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            InputKind::Active => "active",
            InputKind::Random => "random",
            InputKind::RandomAugmented => "random_augmented",
            InputKind::Set => "set",
            InputKind::DecoySet => "decoy_set",
        }
    }

    pub fn is_set_encoder(&self) -> bool {
        matches!(self, InputKind::Set | InputKind::DecoySet)
    }
}

/// (input kind, quality tier, n_c) for model ids 1..=14.
pub fn taxonomy_row(model_id: u8) -> Option<(InputKind, QualityTier, usize)> {
    let row = match model_id {
        1 => (InputKind::Active, QualityTier::Exact, 1),
        2 => (InputKind::Active, QualityTier::Mid, 1),
        3 => (InputKind::Active, QualityTier::Low, 1),
        4 => (InputKind::Random, QualityTier::Exact, 1),
        5 => (InputKind::Random, QualityTier::Mid, 1),
        6 => (InputKind::Random, QualityTier::Low, 1),
        7 => (InputKind::RandomAugmented, QualityTier::Exact, 10),
        8 => (InputKind::RandomAugmented, QualityTier::Mid, 10),
        9 => (InputKind::RandomAugmented, QualityTier::Low, 10),
        10 => (InputKind::Set, QualityTier::Mid, 10),
        11 => (InputKind::Set, QualityTier::Low, 10),
        12 => (InputKind::DecoySet, QualityTier::Low, 10),
        13 => (InputKind::DecoySet, QualityTier::Mid, 10),
        14 => (InputKind::DecoySet, QualityTier::Exact, 10),
        _ => return None,
    };
    Some(row)
}

/// One cell of the model matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub model_id: u8,
    pub input_kind: InputKind,
    pub quality: QualityTier,
    pub n_c: usize,
    pub target: TargetKind,
    pub seed: u64,
}

impl ModelConfig {
    /// Canonical config for a taxonomy row.
    pub fn for_model(model_id: u8, target: TargetKind, seed: u64) -> Result<Self, ModelError> {
        let (input_kind, quality, n_c) = taxonomy_row(model_id)
            .ok_or_else(|| ModelError::InvalidConfig(format!("unknown model id {model_id}")))?;
        Ok(ModelConfig { model_id, input_kind, quality, n_c, target, seed })
    }

    /// Check consistency with the taxonomy: set encoders carry n_c = 10,
    /// single-conformer inputs carry n_c = 1 at input.
    pub fn validate(&self) -> Result<(), ModelError> {
        let Some((kind, quality, n_c)) = taxonomy_row(self.model_id) else {
            return Err(ModelError::InvalidConfig(format!("unknown model id {}", self.model_id)));
        };
        if kind != self.input_kind || quality != self.quality || n_c != self.n_c {
            return Err(ModelError::InvalidConfig(format!(
                "model {} must be ({:?}, {:?}, n_c={}), got ({:?}, {:?}, n_c={})",
                self.model_id, kind, quality, n_c, self.input_kind, self.quality, self.n_c
            )));
        }
        Ok(())
    }
}
