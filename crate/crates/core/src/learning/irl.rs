use super::{plan_trajectory, LearningError, PlanParams, RewardModel};
use crate::capture::{DemonstrationRecord, Trajectory};
use crate::model::RobotModel;
use crate::scene::Scene;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IrlParams {
    pub iterations: usize,
    pub learning_rate: f64,
    /// Boltzmann temperature over sampled trajectories.
    pub temperature: f64,
    /// Perturbed trajectories per demonstration per iteration.
    pub samples: usize,
    /// Joint-space std (rad) of the waypoint perturbations.
    pub perturbation: f64,
    /// L1 radius for the weight vector.
    pub max_weight_norm: f64,
    pub seed: u64,
    pub plan: PlanParams,
}

impl Default for IrlParams {
    fn default() -> Self {
        Self {
            iterations: 10,
            learning_rate: 1.0,
            temperature: 1.0,
            samples: 16,
            perturbation: 0.1,
            max_weight_norm: 10.0,
            seed: 0,
            plan: PlanParams::default(),
        }
    }
}

/// Euclidean projection onto { w : ‖w‖₁ ≤ radius } (Duchi et al. 2008).
fn project_l1(w: &mut [f64], radius: f64) {
    let norm: f64 = w.iter().map(|v| v.abs()).sum();
    if norm <= radius {
        return;
    }
    let mut u: Vec<f64> = w.iter().map(|v| v.abs()).collect();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        cumulative += uk;
        let t = (cumulative - radius) / (k + 1) as f64;
        if uk > t {
            theta = t;
        }
    }
    for v in w.iter_mut() {
        *v = v.signum() * (v.abs() - theta).max(0.0);
    }
}

/// Maximum-entropy IRL re-fit of the feature weights.
///
/// E_policy is estimated per demonstration from the current reward-optimal
/// plan for the demonstration's endpoints plus Gaussian perturbations of its
/// interior waypoints, weighted by exp(R(ξ)/T) with R the mean path reward.
pub fn update_reward(
    reward: &RewardModel,
    demos: &[DemonstrationRecord],
    model: &RobotModel,
    scene: &Scene,
    params: &IrlParams,
) -> Result<RewardModel, LearningError> {
    if demos.is_empty() {
        return Err(LearningError::NoDemos);
    }
    reward.validate()?;
    if !(params.temperature > 0.0) || !(params.max_weight_norm > 0.0) || !(params.perturbation >= 0.0) {
        return Err(LearningError::InvalidParams("temperature and max_weight_norm must be > 0".into()));
    }
    let k = reward.features.len();
    let mut demo_phi = vec![0.0; k];
    for d in demos {
        if d.trajectory.dof() != model.dof() {
            return Err(LearningError::InconsistentDimensions(format!(
                "demonstration has {} joints, model has {}",
                d.trajectory.dof(),
                model.dof()
            )));
        }
        for (a, v) in demo_phi.iter_mut().zip(reward.feature_expectations(model, scene, &d.trajectory)?) {
            *a += v / demos.len() as f64;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let noise = Normal::new(0.0, params.perturbation.max(f64::MIN_POSITIVE)).expect("finite std");
    let mut current = reward.clone();
    for _ in 0..params.iterations {
        let mut policy_phi = vec![0.0; k];
        for d in demos {
            let mut query = d.query();
            model.clamp_configuration(&mut query.q_start);
            model.clamp_configuration(&mut query.q_goal);
            let plan = plan_trajectory(model, scene, &current, &query, &params.plan)?;
            let mut candidates = vec![plan.clone()];
            for _ in 0..params.samples {
                let mut qs: Vec<Vec<f64>> = plan.configurations().map(<[f64]>::to_vec).collect();
                let n = qs.len();
                for q in &mut qs[1..n - 1] {
                    for v in q.iter_mut() {
                        *v += noise.sample(&mut rng);
                    }
                    model.clamp_configuration(q);
                }
                candidates.push(Trajectory::uniform(qs).expect("same shape as plan"));
            }
            let phis: Vec<Vec<f64>> = candidates
                .iter()
                .map(|c| current.feature_expectations(model, scene, c))
                .collect::<Result<_, _>>()?;
            let utilities: Vec<f64> = phis
                .iter()
                .map(|phi| phi.iter().zip(&current.weights).map(|(p, w)| p * w).sum::<f64>() / params.temperature)
                .collect();
            let max_u = utilities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let weights: Vec<f64> = utilities.iter().map(|u| (u - max_u).exp()).collect();
            let z: f64 = weights.iter().sum();
            for (phi, w) in phis.iter().zip(&weights) {
                for (acc, p) in policy_phi.iter_mut().zip(phi) {
                    *acc += p * w / z / demos.len() as f64;
                }
            }
        }
        for ((w, d), p) in current.weights.iter_mut().zip(&demo_phi).zip(&policy_phi) {
            *w += params.learning_rate * (d - p);
        }
        project_l1(&mut current.weights, params.max_weight_norm);
    }
    Ok(current)
}
