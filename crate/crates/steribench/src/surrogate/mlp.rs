//! Batched dense MLP with swish hidden activations and a linear output
//! layer, plus reverse-mode gradients and an Adam optimizer.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ModelError;

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn swish(x: f64) -> f64 {
    x * sigmoid(x)
}

pub fn swish_prime(x: f64) -> f64 {
    let s = sigmoid(x);
    s + x * s * (1.0 - s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    /// Weight matrix of shape (in, out).
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

/// Dense layers with swish between them; the final layer is linear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Linear>,
    pub name: String,
}

/// Per-layer activations retained by a forward pass for backprop.
pub struct MlpCache {
    /// Input to each layer (post-activation of the previous one).
    inputs: Vec<Array2<f64>>,
    /// Pre-activation of each hidden layer.
    pre_acts: Vec<Array2<f64>>,
    pub output: Array2<f64>,
}

/// Parameter gradients matching an [`Mlp`] layer by layer.
#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub d_w: Vec<Array2<f64>>,
    pub d_b: Vec<Array1<f64>>,
}

impl Mlp {
    /// Glorot-uniform initialization; biases start at zero.
    pub fn init(name: &str, dims: &[usize], rng: &mut impl Rng) -> Mlp {
        assert!(dims.len() >= 2, "mlp needs at least one layer");
        let layers = dims
            .windows(2)
            .map(|pair| {
                let (n_in, n_out) = (pair[0], pair[1]);
                let limit = (6.0 / (n_in + n_out) as f64).sqrt();
                let w = Array2::from_shape_fn((n_in, n_out), |_| rng.gen_range(-limit..limit));
                Linear { w, b: Array1::zeros(n_out) }
            })
            .collect();
        Mlp { layers, name: name.to_string() }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().w.ncols()
    }

    /// Forward pass retaining the activations needed by [`Mlp::backward`].
    pub fn forward(&self, x: ArrayView2<f64>) -> Result<MlpCache, ModelError> {
        if x.ncols() != self.input_dim() {
            return Err(ModelError::DimensionMismatch {
                what: self.name.clone(),
                expected: self.input_dim(),
                got: x.ncols(),
            });
        }
        let n_layers = self.layers.len();
        let mut inputs = Vec::with_capacity(n_layers);
        let mut pre_acts = Vec::with_capacity(n_layers.saturating_sub(1));
        let mut h = x.to_owned();
        for (idx, layer) in self.layers.iter().enumerate() {
            let mut z = h.dot(&layer.w);
            z += &layer.b;
            inputs.push(h);
            if idx + 1 < n_layers {
                let a = z.map(|&v| swish(v));
                pre_acts.push(z);
                h = a;
            } else {
                if z.iter().any(|v| !v.is_finite()) {
                    return Err(ModelError::NonFinite { location: format!("{} output", self.name) });
                }
                return Ok(MlpCache { inputs, pre_acts, output: z });
            }
            if h.iter().any(|v| !v.is_finite()) {
                return Err(ModelError::NonFinite {
                    location: format!("{} layer {}", self.name, idx),
                });
            }
        }
        unreachable!("loop always returns at the last layer")
    }

    /// Forward pass without caching.
    pub fn infer(&self, x: ArrayView2<f64>) -> Result<Array2<f64>, ModelError> {
        Ok(self.forward(x)?.output)
    }

    /// Backpropagate `grad_out` through the cached pass, accumulating
    /// parameter gradients into `grads` and returning the gradient with
    /// respect to the input.
    pub fn backward(
        &self,
        cache: &MlpCache,
        grad_out: ArrayView2<f64>,
        grads: &mut MlpGrads,
    ) -> Array2<f64> {
        let mut g = grad_out.to_owned();
        for idx in (0..self.layers.len()).rev() {
            if idx < self.layers.len() - 1 {
                // Undo the swish applied to this layer's output.
                let z = &cache.pre_acts[idx];
                g.zip_mut_with(z, |gv, &zv| *gv *= swish_prime(zv));
            }
            let x = &cache.inputs[idx];
            grads.d_w[idx] += &x.t().dot(&g);
            grads.d_b[idx] += &g.sum_axis(Axis(0));
            if idx > 0 {
                g = g.dot(&self.layers[idx].w.t());
            } else {
                return g.dot(&self.layers[idx].w.t());
            }
        }
        unreachable!()
    }

    pub fn zero_grads(&self) -> MlpGrads {
        MlpGrads {
            d_w: self.layers.iter().map(|l| Array2::zeros(l.w.raw_dim())).collect(),
            d_b: self.layers.iter().map(|l| Array1::zeros(l.b.raw_dim())).collect(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn for_each_param_mut(&mut self, f: &mut dyn FnMut(&mut f64)) {
        for layer in &mut self.layers {
            for v in layer.w.iter_mut() {
                f(v);
            }
            for v in layer.b.iter_mut() {
                f(v);
            }
        }
    }

    pub fn for_each_param(&self, f: &mut dyn FnMut(f64)) {
        for layer in &self.layers {
            for v in layer.w.iter() {
                f(*v);
            }
            for v in layer.b.iter() {
                f(*v);
            }
        }
    }
}

impl MlpGrads {
    pub fn for_each(&self, f: &mut dyn FnMut(f64)) {
        for (w, b) in self.d_w.iter().zip(&self.d_b) {
            for v in w.iter() {
                f(*v);
            }
            for v in b.iter() {
                f(*v);
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for w in &mut self.d_w {
            w.mapv_inplace(|v| v * s);
        }
        for b in &mut self.d_b {
            b.mapv_inplace(|v| v * s);
        }
    }
}

/// Adam with bias correction; operates on a flattened parameter view.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n_params: usize, learning_rate: f64, beta1: f64, beta2: f64, eps: f64) -> Adam {
        Adam { learning_rate, beta1, beta2, eps, m: vec![0.0; n_params], v: vec![0.0; n_params], t: 0 }
    }

    /// One update step; `flat_grads` must use the same parameter ordering as
    /// the `visit` callback does.
    pub fn step(&mut self, flat_grads: &[f64], mut visit: impl FnMut(&mut dyn FnMut(&mut f64))) {
        assert_eq!(flat_grads.len(), self.m.len(), "gradient/parameter count mismatch");
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let mut idx = 0;
        visit(&mut |param: &mut f64| {
            let g = flat_grads[idx];
            self.m[idx] = self.beta1 * self.m[idx] + (1.0 - self.beta1) * g;
            self.v[idx] = self.beta2 * self.v[idx] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[idx] / bc1;
            let v_hat = self.v[idx] / bc2;
            *param -= self.learning_rate * m_hat / (v_hat.sqrt() + self.eps);
            idx += 1;
        });
        assert_eq!(idx, self.m.len(), "visit covered a different parameter count");
    }
}
