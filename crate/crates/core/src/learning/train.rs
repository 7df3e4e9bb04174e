use super::network::Cache;
use super::{encode_state, FeatureNetwork, LearningError, Normalization};
use crate::capture::DemonstrationRecord;
use crate::model::RobotModel;
use crate::scene::Scene;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainParams {
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub seed: u64,
    pub anchor_weight: f64,
    pub ranking_weight: f64,
    /// Ranking pairs drawn per trace (all eligible pairs when fewer exist).
    pub pairs_per_trace: usize,
    /// Largest index gap j − i for a ranking pair; 0 admits every pair.
    pub max_pair_gap: usize,
    /// Lower bound on each input's normalization scale.
    pub scale_floor: f64,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            epochs: 1000,
            // Summed logistic ranking terms push a bounded output toward a
            // step; a small step size and few pairs keep it a ramp.
            learning_rate: 1e-5,
            momentum: 0.9,
            seed: 0,
            anchor_weight: 1.0,
            ranking_weight: 1.0,
            pairs_per_trace: 2,
            max_pair_gap: 0,
            scale_floor: 0.05,
        }
    }
}

impl TrainParams {
    pub fn validate(&self) -> Result<(), LearningError> {
        let bad = |m: &str| Err(LearningError::InvalidParams(m.into()));
        if self.epochs == 0 {
            return bad("epochs must be ≥ 1");
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad("learning_rate must be > 0");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        if !(self.scale_floor > 0.0) || !self.scale_floor.is_finite() {
            return bad("scale_floor must be > 0");
        }
        if !(self.anchor_weight >= 0.0) || !(self.ranking_weight >= 0.0) {
            return bad("loss weights must be ≥ 0");
        }
        Ok(())
    }
}

// Independent RNG streams derived from one seed.
const INIT_STREAM: u64 = 0;
const PAIR_STREAM: u64 = 1;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Per-dimension statistics of the trace states, scales clamped below by
/// `floor` so near-constant inputs are not blown up.
pub fn trace_normalization(traces: &[DemonstrationRecord], model: &RobotModel, scene: &Scene, floor: f64) -> Result<Normalization, LearningError> {
    if traces.is_empty() {
        return Err(LearningError::EmptyTraces);
    }
    let mut states = Vec::new();
    for trace in traces {
        for q in trace.trajectory.configurations() {
            states.push(encode_state(model, scene, q)?);
        }
    }
    let mut norm = Normalization::fit(&states);
    for s in norm.scale.iter_mut() {
        *s = s.max(floor);
    }
    Ok(norm)
}

/// Untrained network for these traces: trace normalization and LeCun
/// initialization drawn from `params.seed`.
pub fn initial_network(traces: &[DemonstrationRecord], model: &RobotModel, scene: &Scene, params: &TrainParams) -> Result<FeatureNetwork, LearningError> {
    params.validate()?;
    let norm = trace_normalization(traces, model, scene, params.scale_floor)?;
    let mut rng = stream(params.seed, INIT_STREAM);
    Ok(FeatureNetwork::new(norm, rng.random()))
}

/// Encoded trace states plus the sampled ranking pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    states: Vec<Vec<f64>>,
    /// (first, last) state index for each trace.
    anchors: Vec<(usize, usize)>,
    /// (earlier, later, weight): the earlier state should score higher.
    pairs: Vec<(usize, usize, f64)>,
}

impl TrainingSet {
    pub fn build(traces: &[DemonstrationRecord], model: &RobotModel, scene: &Scene, params: &TrainParams) -> Result<Self, LearningError> {
        if traces.is_empty() {
            return Err(LearningError::EmptyTraces);
        }
        let first = &traces[0];
        let mut rng = stream(params.seed, PAIR_STREAM);
        let mut set = TrainingSet {
            states: Vec::new(),
            anchors: Vec::new(),
            pairs: Vec::new(),
        };
        for (ti, trace) in traces.iter().enumerate() {
            if trace.trajectory.dof() != model.dof() {
                return Err(LearningError::InconsistentDimensions(format!(
                    "trace {ti} has {} joints, model has {}",
                    trace.trajectory.dof(),
                    model.dof()
                )));
            }
            if trace.robot_name != first.robot_name || trace.scene_id != first.scene_id {
                return Err(LearningError::InconsistentDimensions(format!(
                    "trace {ti} was recorded against {}/{}, expected {}/{}",
                    trace.robot_name, trace.scene_id, first.robot_name, first.scene_id
                )));
            }
            let base = set.states.len();
            for q in trace.trajectory.configurations() {
                set.states.push(encode_state(model, scene, q)?);
            }
            let n = trace.trajectory.len();
            set.anchors.push((base, base + n - 1));
            let gap = if params.max_pair_gap == 0 { n - 1 } else { params.max_pair_gap.min(n - 1) };
            let eligible: Vec<(usize, usize)> = (0..n)
                .flat_map(|i| (i + 1..(i + gap + 1).min(n)).map(move |j| (i, j)))
                .collect();
            let local = if eligible.len() <= params.pairs_per_trace {
                eligible
            } else {
                rand::seq::index::sample(&mut rng, eligible.len(), params.pairs_per_trace)
                    .into_iter()
                    .map(|k| eligible[k])
                    .collect()
            };
            set.pairs.extend(local.into_iter().map(|(i, j)| (base + i, base + j, 1.0)));
        }
        Ok(set)
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }
}

/// Anchor + ranking loss and its gradient with respect to the flat parameters.
///
/// Anchors pull each trace's first state to 1 and last to 0; every sampled
/// pair adds one logistic ranking term (summed, not averaged).
pub fn loss_and_grad(net: &FeatureNetwork, set: &TrainingSet, params: &TrainParams) -> (f64, Vec<f64>) {
    let caches: Vec<Cache> = set.states.iter().map(|s| net.forward(s)).collect();
    let mut dl_df = vec![0.0; caches.len()];
    let mut loss = 0.0;
    let la = params.anchor_weight;
    for &(a, b) in &set.anchors {
        let fa = caches[a].out;
        let fb = caches[b].out;
        loss += la * ((fa - 1.0).powi(2) + fb * fb);
        dl_df[a] += la * 2.0 * (fa - 1.0);
        dl_df[b] += la * 2.0 * fb;
    }
    let lr = params.ranking_weight;
    for &(i, j, w) in &set.pairs {
        let delta = caches[i].out - caches[j].out;
        // log(1 + e^{−Δ}) and its slope −σ(−Δ).
        let l = (-delta).max(0.0) + (-delta.abs()).exp().ln_1p();
        let s = super::network::logistic(-delta);
        loss += lr * w * l;
        dl_df[i] -= lr * w * s;
        dl_df[j] += lr * w * s;
    }
    let mut grad = vec![0.0; net.params().len()];
    for (cache, &g) in caches.iter().zip(&dl_df) {
        if g != 0.0 {
            net.backward(cache, g, &mut grad, false);
        }
    }
    (loss, grad)
}

pub fn train_feature(traces: &[DemonstrationRecord], model: &RobotModel, scene: &Scene, params: &TrainParams) -> Result<FeatureNetwork, LearningError> {
    train_feature_from(initial_network(traces, model, scene, params)?, traces, model, scene, params)
}

/// Gradient descent with momentum from a given initialization.
pub fn train_feature_from(
    mut net: FeatureNetwork,
    traces: &[DemonstrationRecord],
    model: &RobotModel,
    scene: &Scene,
    params: &TrainParams,
) -> Result<FeatureNetwork, LearningError> {
    params.validate()?;
    if net.input_dim() != super::encoding_dim(model) {
        return Err(LearningError::DimensionMismatch {
            expected: super::encoding_dim(model),
            got: net.input_dim(),
        });
    }
    let set = TrainingSet::build(traces, model, scene, params)?;
    let mut velocity = vec![0.0; net.params().len()];
    for epoch in 0..params.epochs {
        let (loss, grad) = loss_and_grad(&net, &set, params);
        for ((p, v), g) in net.params_mut().iter_mut().zip(velocity.iter_mut()).zip(&grad) {
            *v = params.momentum * *v - params.learning_rate * g;
            *p += *v;
        }
        if epoch % 200 == 0 {
            log::debug!("epoch {epoch}: loss {loss:.6}");
        }
    }
    Ok(net)
}
