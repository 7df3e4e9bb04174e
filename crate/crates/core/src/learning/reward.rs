use super::{encode_state_with_jacobian, FeatureNetwork, LearningError};
use crate::capture::{DemoType, DemonstrationRecord, Trajectory};
use crate::model::RobotModel;
use crate::scene::{GroundTruth, Scene};
use nalgebra::{DMatrix, Vector3};
use serde::{Deserialize, Serialize};

pub const CONFIDENCE_THRESHOLD: f64 = 0.6;
/// Torque magnitude (N·m) below which a waypoint carries no correction signal.
pub const TORQUE_NOISE_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Feature {
    GroundTruth { feature: GroundTruth },
    Learned { name: String, network: FeatureNetwork },
}

struct Evaluated {
    s: Vec<f64>,
    ds: DMatrix<f64>,
    dof: usize,
}

impl Evaluated {
    fn new(model: &RobotModel, scene: &Scene, q: &[f64]) -> Result<Self, LearningError> {
        let (s, ds) = encode_state_with_jacobian(model, scene, q)?;
        Ok(Self { s, ds, dof: model.dof() })
    }

    fn ee(&self) -> Vector3<f64> {
        Vector3::new(self.s[self.dof], self.s[self.dof + 1], self.s[self.dof + 2])
    }
}

impl Feature {
    pub fn name(&self) -> &str {
        match self {
            Feature::GroundTruth { feature } => feature.name(),
            Feature::Learned { name, .. } => name,
        }
    }

    fn eval(&self, scene: &Scene, e: &Evaluated) -> Result<(f64, Vec<f64>), LearningError> {
        let n = e.dof;
        match self {
            Feature::GroundTruth { feature } => {
                let ee = e.ee();
                let g = feature.gradient(scene, &ee);
                let jac = e.ds.rows(n, 3);
                let dq = jac.transpose() * g;
                Ok((feature.value(scene, &ee), dq.iter().copied().collect()))
            }
            Feature::Learned { network, .. } => {
                let (v, gs) = network.value_and_gradient(&e.s)?;
                let gs = nalgebra::DVector::from_vec(gs);
                let dq = e.ds.transpose() * gs;
                Ok((v, dq.iter().copied().collect()))
            }
        }
    }

    pub fn value(&self, model: &RobotModel, scene: &Scene, q: &[f64]) -> Result<f64, LearningError> {
        match self {
            Feature::GroundTruth { feature } => Ok(feature.value(scene, &scene.ee_world(model, q)?)),
            Feature::Learned { network, .. } => network.value(&super::encode_state(model, scene, q)?),
        }
    }

    /// Value and gradient with respect to the joint configuration.
    pub fn value_and_gradient(&self, model: &RobotModel, scene: &Scene, q: &[f64]) -> Result<(f64, Vec<f64>), LearningError> {
        self.eval(scene, &Evaluated::new(model, scene, q)?)
    }
}

/// R(q) = Σᵢ wᵢ φᵢ(q); features are costs, so negative weights penalize.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardModel {
    pub features: Vec<Feature>,
    pub weights: Vec<f64>,
}

impl RewardModel {
    pub fn new(features: Vec<Feature>, weights: Vec<f64>) -> Result<Self, LearningError> {
        let r = Self { features, weights };
        r.validate()?;
        Ok(r)
    }

    pub fn empty() -> Self {
        Self {
            features: Vec::new(),
            weights: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), LearningError> {
        if self.features.len() != self.weights.len() {
            return Err(LearningError::DimensionMismatch {
                expected: self.features.len(),
                got: self.weights.len(),
            });
        }
        if self.weights.iter().any(|w| !w.is_finite()) {
            return Err(LearningError::InvalidParams("reward weights must be finite".into()));
        }
        Ok(())
    }

    pub fn push(&mut self, feature: Feature, weight: f64) {
        self.features.push(feature);
        self.weights.push(weight);
    }

    /// Scale every weight by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            features: self.features.clone(),
            weights: self.weights.iter().map(|w| w * c).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.weights.iter().all(|&w| w == 0.0)
    }

    pub fn feature_values(&self, model: &RobotModel, scene: &Scene, q: &[f64]) -> Result<Vec<f64>, LearningError> {
        self.features.iter().map(|f| f.value(model, scene, q)).collect()
    }

    pub fn value(&self, model: &RobotModel, scene: &Scene, q: &[f64]) -> Result<f64, LearningError> {
        let mut total = 0.0;
        for (f, &w) in self.features.iter().zip(&self.weights) {
            if w != 0.0 {
                total += w * f.value(model, scene, q)?;
            }
        }
        Ok(total)
    }

    /// R(q) and ∇_q R.
    pub fn value_and_gradient(&self, model: &RobotModel, scene: &Scene, q: &[f64]) -> Result<(f64, Vec<f64>), LearningError> {
        let mut total = 0.0;
        let mut grad = vec![0.0; model.dof()];
        if self.is_zero() {
            if q.len() != model.dof() {
                return Err(LearningError::DimensionMismatch { expected: model.dof(), got: q.len() });
            }
            return Ok((total, grad));
        }
        let e = Evaluated::new(model, scene, q)?;
        for (f, &w) in self.features.iter().zip(&self.weights) {
            if w == 0.0 {
                continue;
            }
            let (v, g) = f.eval(scene, &e)?;
            total += w * v;
            for (acc, gi) in grad.iter_mut().zip(g) {
                *acc += w * gi;
            }
        }
        Ok((total, grad))
    }

    /// Per-feature mean over the waypoints of a path.
    pub fn feature_expectations(&self, model: &RobotModel, scene: &Scene, path: &Trajectory) -> Result<Vec<f64>, LearningError> {
        let mut acc = vec![0.0; self.features.len()];
        for q in path.configurations() {
            for (a, v) in acc.iter_mut().zip(self.feature_values(model, scene, q)?) {
                *a += v;
            }
        }
        let n = path.len() as f64;
        Ok(acc.into_iter().map(|a| a / n).collect())
    }
}

/// How well the current reward explains a correction, in [0, 1].
///
/// Averages the cosine between the applied torque and ∇_q R over waypoints
/// whose torque exceeds the noise floor, then maps [−1, 1] → [0, 1]. A
/// vanishing reward gradient contributes cosine 0. With no informative
/// waypoints the result is 0.5.
pub fn confidence(reward: &RewardModel, correction: &DemonstrationRecord, model: &RobotModel, scene: &Scene) -> Result<f64, LearningError> {
    if correction.demo_type != DemoType::Correction {
        return Err(LearningError::WrongDemoType {
            expected: "correction",
            got: format!("{:?}", correction.demo_type),
        });
    }
    let n = correction.trajectory.len();
    let dof = model.dof();
    if correction.torques.len() != n || correction.torques.iter().any(|t| t.len() != dof) {
        return Err(LearningError::MissingTorques);
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (w, tau) in correction.trajectory.waypoints().iter().zip(&correction.torques) {
        let tau_norm = tau.iter().map(|t| t * t).sum::<f64>().sqrt();
        if !(tau_norm > TORQUE_NOISE_FLOOR) {
            continue;
        }
        let (_, g) = reward.value_and_gradient(model, scene, &w.q)?;
        let g_norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        let cos = if g_norm > 0.0 {
            (tau.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>() / (tau_norm * g_norm)).clamp(-1.0, 1.0)
        } else {
            0.0
        };
        sum += cos;
        count += 1;
    }
    if count == 0 {
        return Ok(0.5);
    }
    Ok((1.0 + sum / count as f64) / 2.0)
}

pub fn needs_new_feature(conf: f64, threshold: f64) -> bool {
    conf < threshold
}
