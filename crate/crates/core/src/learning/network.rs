use super::LearningError;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub const HIDDEN_UNITS: usize = 64;
pub const FORMAT_VERSION: u32 = 1;

/// Per-dimension affine input normalization `(s − mean) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Normalization {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    /// Mean and population standard deviation of `samples`; near-constant
    /// dimensions keep scale 1.
    pub fn fit(samples: &[Vec<f64>]) -> Self {
        let dim = samples.first().map_or(0, Vec::len);
        let n = samples.len().max(1) as f64;
        let mut mean = vec![0.0; dim];
        for s in samples {
            for (m, v) in mean.iter_mut().zip(s) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for s in samples {
            for ((acc, v), m) in var.iter_mut().zip(s).zip(&mean) {
                *acc += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|v| {
                let sd = (v / n).sqrt();
                if sd > 1e-9 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }
}

/// input → 64 → 64 → 1 perceptron; softplus hidden units, logistic output.
///
/// Parameters live in one flat vector: W1 (64×d, row-major), b1, W2 (64×64),
/// b2, W3 (1×64), b3.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureNetwork {
    input_dim: usize,
    normalization: Normalization,
    params: Vec<f64>,
}

pub(crate) struct Cache {
    x: Vec<f64>,
    z1: Vec<f64>,
    a1: Vec<f64>,
    z2: Vec<f64>,
    a2: Vec<f64>,
    pub out: f64,
}

#[inline]
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[inline]
pub(crate) fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

const H: usize = HIDDEN_UNITS;

impl FeatureNetwork {
    pub fn param_count(input_dim: usize) -> usize {
        H * input_dim + H + H * H + H + H + 1
    }

    /// LeCun-normal weights, zero biases.
    pub fn new(normalization: Normalization, seed: u64) -> Self {
        let d = normalization.mean.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(Self::param_count(d));
        for (fan_in, fan_out) in [(d, H), (H, H), (H, 1)] {
            let normal = Normal::new(0.0, 1.0 / (fan_in as f64).sqrt()).expect("positive std");
            params.extend((0..fan_in * fan_out).map(|_| normal.sample(&mut rng)));
            params.extend(std::iter::repeat_n(0.0, fan_out));
        }
        Self {
            input_dim: d,
            normalization,
            params,
        }
    }

    pub fn zeroed(normalization: Normalization, output_bias: f64) -> Self {
        let d = normalization.mean.len();
        let mut params = vec![0.0; Self::param_count(d)];
        *params.last_mut().unwrap() = output_bias;
        Self {
            input_dim: d,
            normalization,
            params,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn normalization(&self) -> &Normalization {
        &self.normalization
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn offsets(&self) -> [usize; 6] {
        let d = self.input_dim;
        let w1 = 0;
        let b1 = w1 + H * d;
        let w2 = b1 + H;
        let b2 = w2 + H * H;
        let w3 = b2 + H;
        let b3 = w3 + H;
        [w1, b1, w2, b2, w3, b3]
    }

    fn check(&self, s: &[f64]) -> Result<(), LearningError> {
        if s.len() != self.input_dim {
            return Err(LearningError::DimensionMismatch {
                expected: self.input_dim,
                got: s.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn forward(&self, s: &[f64]) -> Cache {
        let d = self.input_dim;
        let p = &self.params;
        let [w1, b1, w2, b2, w3, b3] = self.offsets();
        let x: Vec<f64> = s
            .iter()
            .zip(&self.normalization.mean)
            .zip(&self.normalization.scale)
            .map(|((v, m), sc)| (v - m) / sc)
            .collect();
        let mut z1 = vec![0.0; H];
        for (i, z) in z1.iter_mut().enumerate() {
            let row = &p[w1 + i * d..w1 + (i + 1) * d];
            *z = p[b1 + i] + row.iter().zip(&x).map(|(w, v)| w * v).sum::<f64>();
        }
        let a1: Vec<f64> = z1.iter().map(|&z| softplus(z)).collect();
        let mut z2 = vec![0.0; H];
        for (i, z) in z2.iter_mut().enumerate() {
            let row = &p[w2 + i * H..w2 + (i + 1) * H];
            *z = p[b2 + i] + row.iter().zip(&a1).map(|(w, v)| w * v).sum::<f64>();
        }
        let a2: Vec<f64> = z2.iter().map(|&z| softplus(z)).collect();
        let z3 = p[b3] + p[w3..w3 + H].iter().zip(&a2).map(|(w, v)| w * v).sum::<f64>();
        Cache {
            x,
            z1,
            a1,
            z2,
            a2,
            // Keep the output strictly inside (0, 1) even where f64 saturates.
            out: logistic(z3).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0),
        }
    }

    /// Accumulate `dout · ∂f/∂θ` into `grad`; returns ∂f/∂x (normalized input)
    /// scaled by `dout` when `want_input` is set.
    pub(crate) fn backward(&self, cache: &Cache, dout: f64, grad: &mut [f64], want_input: bool) -> Option<Vec<f64>> {
        let d = self.input_dim;
        let p = &self.params;
        let [w1, b1, w2, b2, w3, b3] = self.offsets();
        let dz3 = dout * cache.out * (1.0 - cache.out);
        grad[b3] += dz3;
        let mut dz2 = [0.0; H];
        for i in 0..H {
            grad[w3 + i] += dz3 * cache.a2[i];
            dz2[i] = dz3 * p[w3 + i] * logistic(cache.z2[i]);
        }
        let mut da1 = [0.0; H];
        for i in 0..H {
            let g = dz2[i];
            grad[b2 + i] += g;
            if g == 0.0 {
                continue;
            }
            let row = &p[w2 + i * H..w2 + (i + 1) * H];
            let grow = &mut grad[w2 + i * H..w2 + (i + 1) * H];
            for k in 0..H {
                grow[k] += g * cache.a1[k];
                da1[k] += g * row[k];
            }
        }
        let mut dx = if want_input { Some(vec![0.0; d]) } else { None };
        for i in 0..H {
            let g = da1[i] * logistic(cache.z1[i]);
            grad[b1 + i] += g;
            let grow = &mut grad[w1 + i * d..w1 + (i + 1) * d];
            for k in 0..d {
                grow[k] += g * cache.x[k];
            }
            if let Some(dx) = dx.as_mut() {
                let row = &p[w1 + i * d..w1 + (i + 1) * d];
                for k in 0..d {
                    dx[k] += g * row[k];
                }
            }
        }
        dx
    }

    pub fn value(&self, s: &[f64]) -> Result<f64, LearningError> {
        self.check(s)?;
        Ok(self.forward(s).out)
    }

    /// Output and its gradient with respect to the raw (unnormalized) encoding.
    pub fn value_and_gradient(&self, s: &[f64]) -> Result<(f64, Vec<f64>), LearningError> {
        self.check(s)?;
        let cache = self.forward(s);
        let mut scratch = vec![0.0; self.params.len()];
        let dx = self.backward(&cache, 1.0, &mut scratch, true).expect("requested");
        let ds = dx.iter().zip(&self.normalization.scale).map(|(g, sc)| g / sc).collect();
        Ok((cache.out, ds))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&NetworkFile::from(self)).expect("network serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, LearningError> {
        let file: NetworkFile = serde_json::from_str(text).map_err(|e| LearningError::Format(e.to_string()))?;
        Self::try_from(file)
    }
}

impl Serialize for FeatureNetwork {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        NetworkFile::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for FeatureNetwork {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let file = NetworkFile::deserialize(d)?;
        FeatureNetwork::try_from(file).map_err(serde::de::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    /// [outputs, inputs]
    shape: [usize; 2],
    activation: String,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct NetworkFile {
    format_version: u32,
    input_dim: usize,
    normalization: Normalization,
    layers: Vec<LayerFile>,
}

impl From<&FeatureNetwork> for NetworkFile {
    fn from(net: &FeatureNetwork) -> Self {
        let d = net.input_dim;
        let o = net.offsets();
        let layer = |k: usize, shape: [usize; 2], activation: &str| LayerFile {
            shape,
            activation: activation.into(),
            weights: net.params[o[2 * k]..o[2 * k + 1]].to_vec(),
            bias: net.params[o[2 * k + 1]..o[2 * k + 1] + shape[0]].to_vec(),
        };
        NetworkFile {
            format_version: FORMAT_VERSION,
            input_dim: d,
            normalization: net.normalization.clone(),
            layers: vec![
                layer(0, [H, d], "softplus"),
                layer(1, [H, H], "softplus"),
                layer(2, [1, H], "logistic"),
            ],
        }
    }
}

impl TryFrom<NetworkFile> for FeatureNetwork {
    type Error = LearningError;
    fn try_from(f: NetworkFile) -> Result<Self, LearningError> {
        let bad = |m: String| Err(LearningError::Format(m));
        if f.format_version != FORMAT_VERSION {
            return bad(format!("unsupported format version {}", f.format_version));
        }
        let d = f.input_dim;
        if f.normalization.mean.len() != d || f.normalization.scale.len() != d {
            return bad("normalization width differs from input_dim".into());
        }
        if f.normalization.scale.iter().any(|s| !(*s > 0.0)) {
            return bad("normalization scales must be positive".into());
        }
        let expected = [([H, d], "softplus"), ([H, H], "softplus"), ([1, H], "logistic")];
        if f.layers.len() != 3 {
            return bad(format!("expected 3 layers, found {}", f.layers.len()));
        }
        let mut params = Vec::with_capacity(Self::param_count(d));
        for (i, (layer, (shape, act))) in f.layers.into_iter().zip(expected).enumerate() {
            if layer.shape != shape || layer.activation != act {
                return bad(format!("layer {i}: expected {act} {shape:?}"));
            }
            if layer.weights.len() != shape[0] * shape[1] || layer.bias.len() != shape[0] {
                return bad(format!("layer {i}: array lengths disagree with shape"));
            }
            params.extend(layer.weights);
            params.extend(layer.bias);
        }
        if params.iter().any(|v| !v.is_finite()) {
            return bad("non-finite parameter".into());
        }
        Ok(FeatureNetwork {
            input_dim: d,
            normalization: f.normalization,
            params,
        })
    }
}
