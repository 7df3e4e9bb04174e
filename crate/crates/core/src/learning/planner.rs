use super::{LearningError, RewardModel};
use crate::capture::{Trajectory, TrajectoryQuery};
use crate::model::RobotModel;
use crate::scene::Scene;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlanParams {
    pub n_waypoints: usize,
    pub iterations: usize,
    pub step: f64,
    pub smoothness_weight: f64,
}

impl Default for PlanParams {
    fn default() -> Self {
        Self {
            n_waypoints: 21,
            iterations: 200,
            step: 1e-2,
            smoothness_weight: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanReport {
    pub trajectory: Trajectory,
    /// Cost of the initial path followed by each accepted iterate.
    pub cost_history: Vec<f64>,
    /// Every accepted iterate, starting with the straight line.
    pub iterates: Vec<Vec<Vec<f64>>>,
}

pub fn straight_line(q_start: &[f64], q_goal: &[f64], n: usize) -> Vec<Vec<f64>> {
    let last = (n - 1) as f64;
    (0..n)
        .map(|k| {
            if k + 1 == n {
                return q_goal.to_vec();
            }
            let a = k as f64 / last;
            q_start.iter().zip(q_goal).map(|(s, g)| s + a * (g - s)).collect()
        })
        .collect()
}

fn validate(model: &RobotModel, query: &TrajectoryQuery, params: &PlanParams) -> Result<(), LearningError> {
    for (name, q) in [("q_start", &query.q_start), ("q_goal", &query.q_goal)] {
        if q.len() != model.dof() {
            return Err(LearningError::DimensionMismatch {
                expected: model.dof(),
                got: q.len(),
            });
        }
        if !model.within_limits(q) {
            return Err(LearningError::InvalidQuery(format!("{name} is outside the joint limits")));
        }
    }
    if params.n_waypoints < 2 {
        return Err(LearningError::InvalidParams("n_waypoints must be ≥ 2".into()));
    }
    if !(params.step > 0.0) || !(params.smoothness_weight >= 0.0) {
        return Err(LearningError::InvalidParams("step must be > 0 and smoothness_weight ≥ 0".into()));
    }
    Ok(())
}

struct Objective<'a> {
    model: &'a RobotModel,
    scene: &'a Scene,
    reward: &'a RewardModel,
    smoothness: f64,
}

impl Objective<'_> {
    fn cost(&self, path: &[Vec<f64>]) -> Result<f64, LearningError> {
        let mut c = 0.0;
        for q in path {
            c -= self.reward.value(self.model, self.scene, q)?;
        }
        for w in path.windows(2) {
            c += self.smoothness * w[0].iter().zip(&w[1]).map(|(a, b)| (b - a) * (b - a)).sum::<f64>();
        }
        Ok(c)
    }

    /// Gradient for interior waypoints (endpoints are fixed).
    fn gradient(&self, path: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, LearningError> {
        let n = path.len();
        let mut g = Vec::with_capacity(n.saturating_sub(2));
        for k in 1..n - 1 {
            let (_, gr) = self.reward.value_and_gradient(self.model, self.scene, &path[k])?;
            g.push(
                gr.iter()
                    .enumerate()
                    .map(|(j, r)| -r + 2.0 * self.smoothness * (2.0 * path[k][j] - path[k - 1][j] - path[k + 1][j]))
                    .collect(),
            );
        }
        Ok(g)
    }
}

pub fn plan_trajectory(
    model: &RobotModel,
    scene: &Scene,
    reward: &RewardModel,
    query: &TrajectoryQuery,
    params: &PlanParams,
) -> Result<Trajectory, LearningError> {
    Ok(plan_trajectory_traced(model, scene, reward, query, params)?.trajectory)
}

/// Gradient descent on Σ −R(q_k) + w_s Σ ‖q_{k+1} − q_k‖² from the straight
/// line. A step is accepted only if it strictly lowers the cost; otherwise it
/// is halved (up to 30 times) before giving up.
pub fn plan_trajectory_traced(
    model: &RobotModel,
    scene: &Scene,
    reward: &RewardModel,
    query: &TrajectoryQuery,
    params: &PlanParams,
) -> Result<PlanReport, LearningError> {
    validate(model, query, params)?;
    reward.validate()?;
    let objective = Objective {
        model,
        scene,
        reward,
        smoothness: params.smoothness_weight,
    };
    let mut path = straight_line(&query.q_start, &query.q_goal, params.n_waypoints);
    let mut cost = objective.cost(&path)?;
    let mut report = PlanReport {
        trajectory: Trajectory::uniform(vec![vec![0.0]; 2]).expect("placeholder"),
        cost_history: vec![cost],
        iterates: vec![path.clone()],
    };
    for _ in 0..params.iterations {
        let grad = objective.gradient(&path)?;
        let gmax = grad.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        if !(gmax >= 1e-10) {
            break;
        }
        let mut step = params.step;
        let mut accepted = false;
        for _ in 0..30 {
            let mut trial = path.clone();
            for (q, g) in trial[1..params.n_waypoints - 1].iter_mut().zip(&grad) {
                for (v, gi) in q.iter_mut().zip(g) {
                    *v -= step * gi;
                }
                model.clamp_configuration(q);
            }
            let c = objective.cost(&trial)?;
            if c < cost {
                path = trial;
                cost = c;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        report.cost_history.push(cost);
        report.iterates.push(path.clone());
    }
    report.trajectory = Trajectory::uniform(path).map_err(|e| LearningError::InvalidQuery(e.to_string()))?;
    Ok(report)
}
