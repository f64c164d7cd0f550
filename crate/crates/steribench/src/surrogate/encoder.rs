//! The learned stack: permutation-symmetric bond encoding, softmax-gated
//! set aggregation, and scalar regression, with exact reverse-mode
//! gradients for the batched training paths.
//!
//! For one conformer with per-atom features `h_i` and bonded atoms (a, b):
//!
//! ```text
//! h_perm = f_perm(h_a, h_b) + f_perm(h_b, h_a)
//! h_bond = (h_perm, sum_i h_i)
//! y_hat  = f_bond(h_bond)
//! ```
//!
//! Set encoders combine the per-conformer `h_bond` vectors with learned
//! softmax coefficients from `f_gate` before applying `f_bond`.

use ndarray::{concatenate, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{InputKind, ModelConfig};
use super::featurize::{BondInput, ConformerFeatures};
use super::mlp::{Mlp, MlpCache, MlpGrads};
use super::ModelError;

/// Floor applied to feature standard deviations (one-hot dimensions can be
/// constant in a split).
pub const STD_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    pub f_perm: Mlp,
    pub f_bond: Mlp,
    /// Present only for set-encoding models.
    pub f_gate: Option<Mlp>,
    /// Train-split mean of the per-atom features.
    pub feat_mean: Array1<f64>,
    /// Train-split standard deviation, floored at [`STD_FLOOR`].
    pub feat_std: Array1<f64>,
}

impl EncoderParams {
    /// Fresh parameters for `feat_dim`-dimensional atom features. Layer
    /// counts: 2 for `f_perm`, 3 for `f_bond` and `f_gate`.
    pub fn init(feat_dim: usize, hidden: usize, with_gate: bool, rng: &mut impl Rng) -> Self {
        let f_perm = Mlp::init("f_perm", &[2 * feat_dim, hidden, hidden], rng);
        let f_bond = Mlp::init("f_bond", &[hidden + feat_dim, hidden, hidden, 1], rng);
        let f_gate =
            with_gate.then(|| Mlp::init("f_gate", &[hidden + feat_dim, hidden, hidden, 1], rng));
        EncoderParams {
            f_perm,
            f_bond,
            f_gate,
            feat_mean: Array1::zeros(feat_dim),
            feat_std: Array1::ones(feat_dim),
        }
    }

    pub fn feat_dim(&self) -> usize {
        self.feat_mean.len()
    }

    pub fn hidden_dim(&self) -> usize {
        self.f_perm.output_dim()
    }

    pub fn set_feature_stats(&mut self, mean: Array1<f64>, std: Array1<f64>) {
        self.feat_mean = mean;
        self.feat_std = std.mapv(|s| s.max(STD_FLOOR));
    }

    pub fn param_count(&self) -> usize {
        self.f_perm.param_count()
            + self.f_bond.param_count()
            + self.f_gate.as_ref().map_or(0, |g| g.param_count())
    }

    pub fn for_each_param_mut(&mut self, f: &mut dyn FnMut(&mut f64)) {
        self.f_perm.for_each_param_mut(f);
        self.f_bond.for_each_param_mut(f);
        if let Some(gate) = &mut self.f_gate {
            gate.for_each_param_mut(f);
        }
    }

    pub fn zero_grads(&self) -> EncoderGrads {
        EncoderGrads {
            f_perm: self.f_perm.zero_grads(),
            f_bond: self.f_bond.zero_grads(),
            f_gate: self.f_gate.as_ref().map(|g| g.zero_grads()),
        }
    }

    /// Standardize one raw bond input into the rows the encoder consumes:
    /// `(x_ab, x_ba, s)` where `s` is the standardized pooled sum.
    pub fn standardize(&self, input: &BondInput) -> (Array1<f64>, Array1<f64>, Array1<f64>) {
        let ha = (&input.h_a - &self.feat_mean) / &self.feat_std;
        let hb = (&input.h_b - &self.feat_mean) / &self.feat_std;
        let s = (&input.sum - &(&self.feat_mean * input.n_atoms)) / &self.feat_std;
        let x_ab = concatenate![Axis(0), ha, hb];
        let x_ba = concatenate![Axis(0), hb, ha];
        (x_ab, x_ba, s)
    }
}

#[derive(Debug, Clone)]
pub struct EncoderGrads {
    pub f_perm: MlpGrads,
    pub f_bond: MlpGrads,
    pub f_gate: Option<MlpGrads>,
}

impl EncoderGrads {
    /// Flatten in the same order as `EncoderParams::for_each_param_mut`.
    pub fn flatten_into(&self, buf: &mut Vec<f64>) {
        buf.clear();
        self.f_perm.for_each(&mut |g| buf.push(g));
        self.f_bond.for_each(&mut |g| buf.push(g));
        if let Some(gate) = &self.f_gate {
            gate.for_each(&mut |g| buf.push(g));
        }
    }
}

/// Standardized batch tensors. Rows are conformers: one per sample for
/// single-conformer models, `group_lens[g]` consecutive rows per sample for
/// set models.
#[derive(Debug, Clone)]
pub struct EncodedRows {
    pub x_ab: Array2<f64>,
    pub x_ba: Array2<f64>,
    pub s: Array2<f64>,
}

impl EncodedRows {
    pub fn from_inputs(params: &EncoderParams, inputs: &[&BondInput]) -> EncodedRows {
        let d = params.feat_dim();
        let n = inputs.len();
        let mut x_ab = Array2::zeros((n, 2 * d));
        let mut x_ba = Array2::zeros((n, 2 * d));
        let mut s = Array2::zeros((n, d));
        for (row, input) in inputs.iter().enumerate() {
            let (ab, ba, sv) = params.standardize(input);
            x_ab.row_mut(row).assign(&ab);
            x_ba.row_mut(row).assign(&ba);
            s.row_mut(row).assign(&sv);
        }
        EncodedRows { x_ab, x_ba, s }
    }

    pub fn len(&self) -> usize {
        self.x_ab.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Gather a subset of rows into a new batch.
    pub fn gather(&self, rows: &[usize]) -> EncodedRows {
        EncodedRows {
            x_ab: self.x_ab.select(Axis(0), rows),
            x_ba: self.x_ba.select(Axis(0), rows),
            s: self.s.select(Axis(0), rows),
        }
    }
}

struct BondForward {
    cache_ab: MlpCache,
    cache_ba: MlpCache,
    /// (rows, hidden + feat_dim)
    h_bond: Array2<f64>,
}

fn forward_bond(params: &EncoderParams, rows: &EncodedRows) -> Result<BondForward, ModelError> {
    let cache_ab = params.f_perm.forward(rows.x_ab.view())?;
    let cache_ba = params.f_perm.forward(rows.x_ba.view())?;
    let h_perm = &cache_ab.output + &cache_ba.output;
    let h_bond = concatenate![Axis(1), h_perm, rows.s];
    Ok(BondForward { cache_ab, cache_ba, h_bond })
}

fn backward_bond(
    params: &EncoderParams,
    fwd: &BondForward,
    d_h_bond: ArrayView2<f64>,
    grads: &mut EncoderGrads,
) {
    let hidden = params.hidden_dim();
    let d_h_perm = d_h_bond.slice(ndarray::s![.., ..hidden]);
    params.f_perm.backward(&fwd.cache_ab, d_h_perm, &mut grads.f_perm);
    params.f_perm.backward(&fwd.cache_ba, d_h_perm, &mut grads.f_perm);
}

/// Per-sample predictions for single-conformer rows.
pub fn predict_batch_single(
    params: &EncoderParams,
    rows: &EncodedRows,
) -> Result<Array1<f64>, ModelError> {
    let fwd = forward_bond(params, rows)?;
    let out = params.f_bond.infer(fwd.h_bond.view())?;
    Ok(out.column(0).to_owned())
}

struct Gating {
    alphas: Vec<f64>,
    h_ens: Array2<f64>,
    gate_cache: MlpCache,
}

fn forward_gating(
    params: &EncoderParams,
    h_bond: &Array2<f64>,
    group_lens: &[usize],
) -> Result<Gating, ModelError> {
    let gate = params.f_gate.as_ref().ok_or(ModelError::MissingGate)?;
    let gate_cache = gate.forward(h_bond.view())?;
    let logits = gate_cache.output.column(0);
    let width = h_bond.ncols();
    let mut alphas = vec![0.0; h_bond.nrows()];
    let mut h_ens = Array2::zeros((group_lens.len(), width));
    let mut start = 0;
    for (g, &len) in group_lens.iter().enumerate() {
        if len == 0 {
            return Err(ModelError::EmptySet);
        }
        let slice = logits.slice(ndarray::s![start..start + len]);
        let max = slice.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for (offset, &logit) in slice.iter().enumerate() {
            let e = (logit - max).exp();
            alphas[start + offset] = e;
            total += e;
        }
        for r in start..start + len {
            alphas[r] /= total;
            let scaled = h_bond.row(r).mapv(|v| v * alphas[r]);
            let mut row = h_ens.row_mut(g);
            row += &scaled;
        }
        start += len;
    }
    Ok(Gating { alphas, h_ens, gate_cache })
}

/// Per-sample predictions for set-encoder rows grouped by `group_lens`.
pub fn predict_batch_set(
    params: &EncoderParams,
    rows: &EncodedRows,
    group_lens: &[usize],
) -> Result<Array1<f64>, ModelError> {
    check_group_lens(rows, group_lens)?;
    let fwd = forward_bond(params, rows)?;
    let gating = forward_gating(params, &fwd.h_bond, group_lens)?;
    let out = params.f_bond.infer(gating.h_ens.view())?;
    Ok(out.column(0).to_owned())
}

fn check_group_lens(rows: &EncodedRows, group_lens: &[usize]) -> Result<(), ModelError> {
    let total: usize = group_lens.iter().sum();
    if total != rows.len() {
        return Err(ModelError::DimensionMismatch {
            what: "group_lens".into(),
            expected: rows.len(),
            got: total,
        });
    }
    Ok(())
}

fn mse_and_dy(pred: &Array1<f64>, y: ArrayView1<f64>) -> (f64, Array2<f64>) {
    let n = pred.len() as f64;
    let mut d = Array2::zeros((pred.len(), 1));
    let mut loss = 0.0;
    for (i, (p, t)) in pred.iter().zip(y.iter()).enumerate() {
        let err = p - t;
        loss += err * err;
        d[(i, 0)] = 2.0 * err / n;
    }
    (loss / n, d)
}

/// Batch-mean squared error and exact gradients for single-conformer rows.
pub fn mse_and_gradients_single(
    params: &EncoderParams,
    rows: &EncodedRows,
    y: ArrayView1<f64>,
) -> Result<(f64, EncoderGrads), ModelError> {
    if rows.is_empty() {
        return Err(ModelError::EmptySet);
    }
    let fwd = forward_bond(params, rows)?;
    let bond_cache = params.f_bond.forward(fwd.h_bond.view())?;
    let pred = bond_cache.output.column(0).to_owned();
    let (loss, d_out) = mse_and_dy(&pred, y);
    if !loss.is_finite() {
        return Err(ModelError::NonFinite { location: "loss".into() });
    }

    let mut grads = params.zero_grads();
    let d_h_bond = params.f_bond.backward(&bond_cache, d_out.view(), &mut grads.f_bond);
    backward_bond(params, &fwd, d_h_bond.view(), &mut grads);
    Ok((loss, grads))
}

/// Batch-mean squared error and exact gradients for set-encoder rows.
pub fn mse_and_gradients_set(
    params: &EncoderParams,
    rows: &EncodedRows,
    group_lens: &[usize],
    y: ArrayView1<f64>,
) -> Result<(f64, EncoderGrads), ModelError> {
    if rows.is_empty() || group_lens.is_empty() {
        return Err(ModelError::EmptySet);
    }
    check_group_lens(rows, group_lens)?;
    let fwd = forward_bond(params, rows)?;
    let gating = forward_gating(params, &fwd.h_bond, group_lens)?;
    let bond_cache = params.f_bond.forward(gating.h_ens.view())?;
    let pred = bond_cache.output.column(0).to_owned();
    let (loss, d_out) = mse_and_dy(&pred, y);
    if !loss.is_finite() {
        return Err(ModelError::NonFinite { location: "loss".into() });
    }

    let mut grads = params.zero_grads();
    let d_h_ens = params.f_bond.backward(&bond_cache, d_out.view(), &mut grads.f_bond);

    // Distribute the ensemble gradient onto the member rows through the
    // convex combination and the softmax gate.
    let n_rows = rows.len();
    let width = fwd.h_bond.ncols();
    let mut d_h_bond = Array2::zeros((n_rows, width));
    let mut d_logits = Array2::zeros((n_rows, 1));
    let mut start = 0;
    for (g, &len) in group_lens.iter().enumerate() {
        let d_ens_g = d_h_ens.row(g);
        // d_alpha_r = h_bond_r . d_ens_g
        let mut d_alpha = vec![0.0; len];
        for (offset, da) in d_alpha.iter_mut().enumerate() {
            let r = start + offset;
            *da = fwd.h_bond.row(r).dot(&d_ens_g);
            let mut row = d_h_bond.row_mut(r);
            row.scaled_add(gating.alphas[r], &d_ens_g);
        }
        // Softmax backward: d_logit_r = alpha_r (d_alpha_r - sum alpha d_alpha).
        let weighted: f64 = d_alpha
            .iter()
            .enumerate()
            .map(|(offset, da)| gating.alphas[start + offset] * da)
            .sum();
        for (offset, da) in d_alpha.iter().enumerate() {
            let r = start + offset;
            d_logits[(r, 0)] = gating.alphas[r] * (da - weighted);
        }
        start += len;
    }

    let gate = params.f_gate.as_ref().ok_or(ModelError::MissingGate)?;
    let gate_grads = grads.f_gate.as_mut().expect("gate grads allocated with gate params");
    let d_h_bond_gate = gate.backward(&gating.gate_cache, d_logits.view(), gate_grads);
    d_h_bond += &d_h_bond_gate;

    backward_bond(params, &fwd, d_h_bond.view(), &mut grads);
    Ok((loss, grads))
}

/// `h_bond` for one conformer, from its per-atom representations and the
/// bonded atom indices.
pub fn encode_bond(
    params: &EncoderParams,
    features: &ConformerFeatures,
    a: usize,
    b: usize,
) -> Result<Array1<f64>, ModelError> {
    let row_a = features.row_of(a).ok_or(ModelError::AtomNotFeaturized(a))?;
    let row_b = features.row_of(b).ok_or(ModelError::AtomNotFeaturized(b))?;
    let input = BondInput {
        h_a: features.rows.row(row_a).to_owned(),
        h_b: features.rows.row(row_b).to_owned(),
        sum: features.sum(),
        sum_sq: features.rows.map(|v| v * v).sum_axis(Axis(0)),
        n_atoms: features.rows.nrows() as f64,
    };
    let rows = EncodedRows::from_inputs(params, &[&input]);
    let fwd = forward_bond(params, &rows)?;
    Ok(fwd.h_bond.row(0).to_owned())
}

/// Softmax-gated convex combination of per-conformer `h_bond` vectors.
pub fn encode_set(
    params: &EncoderParams,
    h_bonds: &[Array1<f64>],
) -> Result<Array1<f64>, ModelError> {
    if h_bonds.is_empty() {
        return Err(ModelError::EmptySet);
    }
    let width = h_bonds[0].len();
    let mut matrix = Array2::zeros((h_bonds.len(), width));
    for (r, h) in h_bonds.iter().enumerate() {
        if h.len() != width {
            return Err(ModelError::DimensionMismatch {
                what: "h_bond".into(),
                expected: width,
                got: h.len(),
            });
        }
        matrix.row_mut(r).assign(h);
    }
    let gating = forward_gating(params, &matrix, &[h_bonds.len()])?;
    Ok(gating.h_ens.row(0).to_owned())
}

/// Model input for prediction: one conformer, or several (augmentation
/// pools and encoded sets).
#[derive(Debug, Clone, PartialEq)]
pub enum ModelInput {
    Single(BondInput),
    Multi(Vec<BondInput>),
}

/// Predict the target for one molecule under the config's encoding
/// strategy. Augmented models average the per-conformer predictions of
/// their presampled pool; set models gate over the members.
pub fn predict(
    params: &EncoderParams,
    config: &ModelConfig,
    input: &ModelInput,
) -> Result<f64, ModelError> {
    match (config.input_kind, input) {
        (InputKind::Active | InputKind::Random, ModelInput::Single(bond)) => {
            let rows = EncodedRows::from_inputs(params, &[bond]);
            Ok(predict_batch_single(params, &rows)?[0])
        }
        (InputKind::RandomAugmented, ModelInput::Multi(bonds)) => {
            if bonds.is_empty() {
                return Err(ModelError::EmptySet);
            }
            let refs: Vec<&BondInput> = bonds.iter().collect();
            let rows = EncodedRows::from_inputs(params, &refs);
            let preds = predict_batch_single(params, &rows)?;
            Ok(preds.sum() / preds.len() as f64)
        }
        (InputKind::Set | InputKind::DecoySet, ModelInput::Multi(bonds)) => {
            if bonds.is_empty() {
                return Err(ModelError::EmptySet);
            }
            let refs: Vec<&BondInput> = bonds.iter().collect();
            let rows = EncodedRows::from_inputs(params, &refs);
            Ok(predict_batch_set(params, &rows, &[bonds.len()])?[0])
        }
        _ => Err(ModelError::InputKindMismatch(config.input_kind)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogate::featurize::FEATURE_DIM;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy_params(feat_dim: usize, hidden: usize, gate: bool, seed: u64) -> EncoderParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        EncoderParams::init(feat_dim, hidden, gate, &mut rng)
    }

    fn toy_input(seed: u64, feat_dim: usize) -> BondInput {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut gen = |_| rng.gen_range(-1.0..1.0f64);
        let h_a = Array1::from_shape_fn(feat_dim, &mut gen);
        let h_b = Array1::from_shape_fn(feat_dim, &mut gen);
        let extra = Array1::from_shape_fn(feat_dim, &mut gen);
        let sum = &h_a + &h_b + &extra;
        let sum_sq = h_a.map(|v| v * v) + h_b.map(|v| v * v) + extra.map(|v| v * v);
        BondInput { h_a, h_b, sum, sum_sq, n_atoms: 3.0 }
    }

    #[test]
    fn bond_encoding_is_symmetric_in_a_and_b() {
        let params = toy_params(FEATURE_DIM, 8, false, 3);
        let input = toy_input(5, FEATURE_DIM);
        let swapped = BondInput {
            h_a: input.h_b.clone(),
            h_b: input.h_a.clone(),
            ..input.clone()
        };
        let rows = EncodedRows::from_inputs(&params, &[&input]);
        let rows_swapped = EncodedRows::from_inputs(&params, &[&swapped]);
        let fwd = forward_bond(&params, &rows).unwrap();
        let fwd_swapped = forward_bond(&params, &rows_swapped).unwrap();
        let hidden = params.hidden_dim();
        for c in 0..hidden {
            let diff = (fwd.h_bond[(0, c)] - fwd_swapped.h_bond[(0, c)]).abs();
            assert!(diff < 1e-12, "column {c} differs by {diff}");
        }
    }

    #[test]
    fn zero_weights_reduce_to_twice_the_bias_path() {
        let mut params = toy_params(4, 6, false, 1);
        // Zero every weight; set the output bias of f_perm to a known value.
        for layer in &mut params.f_perm.layers {
            layer.w.fill(0.0);
            layer.b.fill(0.0);
        }
        let out_bias = array![0.3, -0.2, 0.5, 0.0, 1.0, -1.5];
        params.f_perm.layers.last_mut().unwrap().b.assign(&out_bias);

        let input = toy_input(9, 4);
        let rows = EncodedRows::from_inputs(&params, &[&input]);
        let fwd = forward_bond(&params, &rows).unwrap();
        for c in 0..6 {
            assert!((fwd.h_bond[(0, c)] - 2.0 * out_bias[c]).abs() < 1e-12);
        }
    }

    #[test]
    fn set_of_one_equals_single_encoding_exactly() {
        let params = toy_params(FEATURE_DIM, 8, true, 7);
        let input = toy_input(2, FEATURE_DIM);
        let rows = EncodedRows::from_inputs(&params, &[&input]);
        let single = predict_batch_single(&params, &rows).unwrap()[0];
        let set = predict_batch_set(&params, &rows, &[1]).unwrap()[0];
        assert_eq!(single, set, "bitwise equality for n_c = 1");
    }

    #[test]
    fn duplicated_members_collapse_to_the_single_case() {
        let params = toy_params(FEATURE_DIM, 8, true, 7);
        let input = toy_input(2, FEATURE_DIM);
        let refs = vec![&input; 5];
        let rows = EncodedRows::from_inputs(&params, &refs);
        let set = predict_batch_set(&params, &rows, &[5]).unwrap()[0];
        let single = predict_batch_single(&params, &rows.gather(&[0])).unwrap()[0];
        assert!((set - single).abs() < 1e-9);
    }

    #[test]
    fn set_encoding_is_permutation_invariant() {
        let params = toy_params(FEATURE_DIM, 8, true, 11);
        let inputs: Vec<BondInput> = (0..6).map(|i| toy_input(100 + i, FEATURE_DIM)).collect();
        let refs: Vec<&BondInput> = inputs.iter().collect();
        let rows = EncodedRows::from_inputs(&params, &refs);
        let base = predict_batch_set(&params, &rows, &[6]).unwrap()[0];

        let perm = [3usize, 0, 5, 1, 4, 2];
        let rows_perm = rows.gather(&perm);
        let permuted = predict_batch_set(&params, &rows_perm, &[6]).unwrap()[0];
        assert!((base - permuted).abs() < 1e-9);
    }

    #[test]
    fn gate_softmax_sums_to_one() {
        let params = toy_params(6, 5, true, 13);
        let inputs: Vec<BondInput> = (0..20).map(|i| toy_input(i, 6)).collect();
        let refs: Vec<&BondInput> = inputs.iter().collect();
        let rows = EncodedRows::from_inputs(&params, &refs);
        let fwd = forward_bond(&params, &rows).unwrap();
        for n_c in 1..=20usize {
            let groups: Vec<usize> =
                if n_c < 20 { vec![n_c, 20 - n_c] } else { vec![n_c] };
            let gating = forward_gating(&params, &fwd.h_bond, &groups).unwrap();
            let first: f64 = gating.alphas[..n_c].iter().sum();
            assert!((first - 1.0).abs() < 1e-12, "n_c {n_c}: sum {first}");
            if n_c < 20 {
                let second: f64 = gating.alphas[n_c..].iter().sum();
                assert!((second - 1.0).abs() < 1e-12);
            }
        }
    }

    fn finite_difference_check(
        params: &EncoderParams,
        loss_fn: &dyn Fn(&EncoderParams) -> f64,
        analytic: &[f64],
    ) {
        let h = 1e-5;
        let n = params.param_count();
        assert_eq!(analytic.len(), n);
        for k in 0..n {
            let mut plus = params.clone();
            let mut minus = params.clone();
            let mut i = 0;
            plus.for_each_param_mut(&mut |p| {
                if i == k {
                    *p += h;
                }
                i += 1;
            });
            i = 0;
            minus.for_each_param_mut(&mut |p| {
                if i == k {
                    *p -= h;
                }
                i += 1;
            });
            let numeric = (loss_fn(&plus) - loss_fn(&minus)) / (2.0 * h);
            let rel = (analytic[k] - numeric).abs() / (analytic[k].abs() + 1e-8);
            assert!(
                rel < 1e-4,
                "param {k}: analytic {}, numeric {numeric}, rel {rel}",
                analytic[k]
            );
        }
    }

    #[test]
    fn single_path_gradients_match_finite_differences() {
        let params = toy_params(3, 4, false, 21);
        let inputs: Vec<BondInput> = (0..4).map(|i| toy_input(i, 3)).collect();
        let refs: Vec<&BondInput> = inputs.iter().collect();
        let rows = EncodedRows::from_inputs(&params, &refs);
        let y = array![0.5, -0.25, 1.0, 0.0];

        let (_, grads) = mse_and_gradients_single(&params, &rows, y.view()).unwrap();
        let mut flat = Vec::new();
        grads.flatten_into(&mut flat);

        finite_difference_check(
            &params,
            &|p| {
                let r = EncodedRows::from_inputs(p, &refs);
                let pred = predict_batch_single(p, &r).unwrap();
                pred.iter().zip(y.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
                    / y.len() as f64
            },
            &flat,
        );
    }

    #[test]
    fn set_path_gradients_match_finite_differences() {
        let params = toy_params(3, 4, true, 22);
        let inputs: Vec<BondInput> = (0..7).map(|i| toy_input(50 + i, 3)).collect();
        let refs: Vec<&BondInput> = inputs.iter().collect();
        let rows = EncodedRows::from_inputs(&params, &refs);
        let group_lens = [3usize, 4];
        let y = array![0.75, -0.5];

        let (_, grads) = mse_and_gradients_set(&params, &rows, &group_lens, y.view()).unwrap();
        let mut flat = Vec::new();
        grads.flatten_into(&mut flat);

        finite_difference_check(
            &params,
            &|p| {
                let r = EncodedRows::from_inputs(p, &refs);
                let pred = predict_batch_set(p, &r, &group_lens).unwrap();
                pred.iter().zip(y.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
                    / y.len() as f64
            },
            &flat,
        );
    }

    #[test]
    fn zero_error_batch_has_zero_gradients() {
        let params = toy_params(3, 4, false, 30);
        let input = toy_input(1, 3);
        let rows = EncodedRows::from_inputs(&params, &[&input]);
        let target = predict_batch_single(&params, &rows).unwrap()[0];
        let (loss, grads) =
            mse_and_gradients_single(&params, &rows, array![target].view()).unwrap();
        assert_eq!(loss, 0.0);
        let mut flat = Vec::new();
        grads.flatten_into(&mut flat);
        assert!(flat.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn duplicating_a_batch_element_doubles_its_contribution() {
        let params = toy_params(3, 4, false, 31);
        let a = toy_input(1, 3);
        let b = toy_input(2, 3);
        let y_ab = array![0.2, -0.4];
        let rows_ab = EncodedRows::from_inputs(&params, &[&a, &b]);
        let rows_abb = EncodedRows::from_inputs(&params, &[&a, &b, &b]);
        let y_abb = array![0.2, -0.4, -0.4];

        // Compare pre-averaging sums: L_sum = n * mse.
        let (mse_ab, g_ab) = mse_and_gradients_single(&params, &rows_ab, y_ab.view()).unwrap();
        let (mse_abb, g_abb) =
            mse_and_gradients_single(&params, &rows_abb, y_abb.view()).unwrap();
        let mut flat_ab = Vec::new();
        let mut flat_abb = Vec::new();
        g_ab.flatten_into(&mut flat_ab);
        g_abb.flatten_into(&mut flat_abb);

        // Contribution of b alone, pre-averaging.
        let rows_a = EncodedRows::from_inputs(&params, &[&a]);
        let rows_b = EncodedRows::from_inputs(&params, &[&b]);
        let (_, g_a) = mse_and_gradients_single(&params, &rows_a, array![0.2].view()).unwrap();
        let (_, g_b) = mse_and_gradients_single(&params, &rows_b, array![-0.4].view()).unwrap();
        let mut flat_a = Vec::new();
        let mut flat_b = Vec::new();
        g_a.flatten_into(&mut flat_a);
        g_b.flatten_into(&mut flat_b);

        for k in 0..flat_ab.len() {
            let sum_ab = 2.0 * flat_ab[k]; // pre-averaging
            let sum_abb = 3.0 * flat_abb[k];
            let expected = sum_ab + flat_b[k]; // one extra copy of b
            assert!(
                (sum_abb - expected).abs() < 1e-9,
                "param {k}: {sum_abb} vs {expected}"
            );
        }
        let _ = (mse_ab, mse_abb, flat_a);
    }

    #[test]
    fn predict_checks_input_kind() {
        let params = toy_params(FEATURE_DIM, 8, false, 40);
        let config = ModelConfig::for_model(1, crate::mol_io::TargetKind::LMax, 0).unwrap();
        let input = ModelInput::Multi(vec![toy_input(1, FEATURE_DIM)]);
        assert!(matches!(
            predict(&params, &config, &input),
            Err(ModelError::InputKindMismatch(_))
        ));
    }

    #[test]
    fn augmented_prediction_averages_members() {
        let params = toy_params(FEATURE_DIM, 8, false, 41);
        let config = ModelConfig::for_model(7, crate::mol_io::TargetKind::LMax, 0).unwrap();
        let a = toy_input(1, FEATURE_DIM);
        let b = toy_input(2, FEATURE_DIM);
        let mean = predict(&params, &config, &ModelInput::Multi(vec![a.clone(), b.clone()]))
            .unwrap();
        let pa = predict_batch_single(&params, &EncodedRows::from_inputs(&params, &[&a]))
            .unwrap()[0];
        let pb = predict_batch_single(&params, &EncodedRows::from_inputs(&params, &[&b]))
            .unwrap()[0];
        assert!((mean - 0.5 * (pa + pb)).abs() < 1e-12);
        // Identical members collapse to the single prediction.
        let same = predict(
            &params,
            &config,
            &ModelInput::Multi(vec![a.clone(), a.clone(), a.clone()]),
        )
        .unwrap();
        assert!((same - pa).abs() < 1e-12);
    }
}
