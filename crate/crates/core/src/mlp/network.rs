use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probability floor inside the cross-entropy log.
pub const PROB_FLOOR: f64 = 1e-12;

/// Fully connected layer, `y = W x + b` with `W` stored `[out x in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
}

impl Dense {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weights: Array2::zeros((fan_out, fan_in)),
            biases: Array1::zeros(fan_out),
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weights.ncols()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.nrows()
    }

    pub fn n_params(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    fn same_shape(&self, other: &Dense) -> bool {
        self.weights.dim() == other.weights.dim() && self.biases.dim() == other.biases.dim()
    }
}

/// Which reading of the layer description to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    /// Three 512-unit ReLU layers: `in -> 512 -> 512 -> 512 -> classes`.
    Paper4,
    /// Two 512-unit ReLU layers: `in -> 512 -> 512 -> classes`.
    Compact3,
}

impl Arch {
    pub fn layer_dims(self, n_inputs: usize, n_classes: usize) -> Vec<usize> {
        match self {
            Arch::Paper4 => vec![n_inputs, 512, 512, 512, n_classes],
            Arch::Compact3 => vec![n_inputs, 512, 512, n_classes],
        }
    }
}

impl std::str::FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper4" => Ok(Arch::Paper4),
            "compact3" => Ok(Arch::Compact3),
            other => Err(Error::BadConfig(format!("unknown architecture {other:?}"))),
        }
    }
}

/// ReLU hidden layers followed by a softmax output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub layers: Vec<Dense>,
}

/// Glorot-uniform weights, zero biases, deterministic for a given seed.
pub fn init_model(layer_dims: &[usize], seed: u64) -> Result<Network> {
    if layer_dims.len() < 2 || layer_dims.contains(&0) {
        return Err(Error::BadDims(layer_dims.to_vec()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = layer_dims
        .windows(2)
        .map(|w| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            Dense {
                weights: Array2::from_shape_simple_fn((fan_out, fan_in), || rng.random_range(-limit..=limit)),
                biases: Array1::zeros(fan_out),
            }
        })
        .collect();
    Ok(Network { layers })
}

/// Row-wise softmax with the max logit subtracted first.
pub fn softmax_rows(logits: &mut Array2<f64>) {
    for mut row in logits.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|z| (z - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|e| e / sum);
    }
}

/// `-ln(max(p[label], 1e-12))`.
pub fn loss_sparse_ce(probs: ArrayView1<f64>, label: usize) -> Result<f64> {
    let p = probs.get(label).ok_or(Error::BadLabel {
        label,
        n_classes: probs.len(),
    })?;
    Ok(-p.max(PROB_FLOOR).ln())
}

/// Mean cross-entropy over a batch of probability rows.
pub fn batch_loss(probs: &Array2<f64>, labels: &[usize]) -> Result<f64> {
    let mut total = 0.0;
    for (row, &label) in probs.rows().into_iter().zip(labels) {
        total += loss_sparse_ce(row, label)?;
    }
    Ok(total / labels.len() as f64)
}

/// Lowest index wins ties.
pub fn argmax(values: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Output of [`Network::backward`].
#[derive(Debug, Clone)]
pub struct BackwardPass {
    pub grads: Vec<Dense>,
    pub probs: Array2<f64>,
    pub loss: f64,
}

impl Network {
    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.layers[0].fan_in()];
        dims.extend(self.layers.iter().map(Dense::fan_out));
        dims
    }

    pub fn n_inputs(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn n_outputs(&self) -> usize {
        self.layers.last().map_or(0, Dense::fan_out)
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(Dense::n_params).sum()
    }

    pub fn zeros_like(&self) -> Vec<Dense> {
        self.layers
            .iter()
            .map(|l| Dense::zeros(l.fan_in(), l.fan_out()))
            .collect()
    }

    /// Activations of every layer, input first; the last entry holds the
    /// softmax probabilities.
    fn activations(&self, x: ArrayView2<f64>) -> Result<Vec<Array2<f64>>> {
        if x.ncols() != self.n_inputs() {
            return Err(Error::DimMismatch {
                expected: self.n_inputs(),
                actual: x.ncols(),
            });
        }
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_owned());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = acts[i].dot(&layer.weights.t());
            z += &layer.biases;
            if i == last {
                softmax_rows(&mut z);
            } else {
                z.mapv_inplace(|v| v.max(0.0));
            }
            acts.push(z);
        }
        Ok(acts)
    }

    /// Class probabilities for each row of `x`.
    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(self.activations(x)?.pop().expect("at least one layer"))
    }

    pub fn forward_one(&self, x: &[f64]) -> Result<Array1<f64>> {
        let view = ArrayView2::from_shape((1, x.len()), x).expect("contiguous slice");
        Ok(self.forward(view)?.row(0).to_owned())
    }

    /// Exact gradients of the mean batch cross-entropy. The softmax and loss
    /// are differentiated together, so the logit gradient is
    /// `(probs - onehot) / batch`.
    pub fn backward(&self, x: ArrayView2<f64>, labels: &[usize]) -> Result<BackwardPass> {
        if x.nrows() == 0 {
            return Err(Error::EmptyTrainSet);
        }
        if labels.len() != x.nrows() {
            return Err(Error::DimMismatch {
                expected: x.nrows(),
                actual: labels.len(),
            });
        }
        let n_classes = self.n_outputs();
        if let Some(&label) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::BadLabel { label, n_classes });
        }

        let acts = self.activations(x)?;
        let probs = acts.last().expect("output layer").clone();
        let loss = batch_loss(&probs, labels)?;

        let batch = x.nrows() as f64;
        let mut delta = probs.clone();
        for (mut row, &label) in delta.rows_mut().into_iter().zip(labels) {
            row[label] -= 1.0;
        }
        delta.mapv_inplace(|d| d / batch);

        let mut grads = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let input = &acts[i];
            grads.push(Dense {
                weights: delta.t().dot(input),
                biases: delta.sum_axis(Axis(0)),
            });
            if i > 0 {
                let mut back = delta.dot(&layer.weights);
                // ReLU derivative: active iff the layer output is positive
                back.zip_mut_with(input, |d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = back;
            }
        }
        grads.reverse();
        Ok(BackwardPass { grads, probs, loss })
    }

    pub(crate) fn check_shapes(&self, other: &[Dense]) -> Result<()> {
        if other.len() != self.layers.len() || self.layers.iter().zip(other).any(|(a, b)| !a.same_shape(b)) {
            return Err(Error::ShapeMismatch(format!(
                "parameter set with {} layers does not match network {:?}",
                other.len(),
                self.layer_dims()
            )));
        }
        Ok(())
    }
}
