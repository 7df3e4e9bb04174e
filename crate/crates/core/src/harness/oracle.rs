use super::HarnessError;
use crate::capture::{DemoType, DemonstrationRecord, LatestJointState, RecorderMeta, SessionRegistry};
use crate::kinematics::{solve_ik, IkParams};
use crate::model::RobotModel;
use crate::scene::{GroundTruth, Scene};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleParams {
    /// Std of the angular deviation from steepest descent, degrees.
    pub noise_deg: f64,
    /// End-effector displacement per step, metres.
    pub step_length: f64,
    pub max_steps: usize,
    pub start_threshold: f64,
    pub stop_threshold: f64,
    pub max_tries: usize,
    pub sample_interval: f64,
    /// Fresh noise draws per step before abandoning a stuck trace.
    pub step_retries: usize,
    pub max_restarts: usize,
}

impl Default for OracleParams {
    fn default() -> Self {
        Self {
            noise_deg: 10.0,
            step_length: 0.01,
            max_steps: 200,
            start_threshold: 0.9,
            stop_threshold: 0.1,
            max_tries: 100_000,
            sample_interval: 0.05,
            step_retries: 8,
            max_restarts: 50,
        }
    }
}

/// Steepest-ascent direction of `feature`, falling back to the underlying
/// unclamped field on flat pieces.
fn ascent(feature: GroundTruth, scene: &Scene, ee: &Vector3<f64>) -> Vector3<f64> {
    let g = feature.gradient(scene, ee);
    if g.norm() > 1e-12 {
        return g.normalize();
    }
    match feature {
        GroundTruth::Table => Vector3::z(),
        GroundTruth::Laptop | GroundTruth::Proxemics => -Vector3::x(),
    }
}

/// Rotate unit vector `d` by a Gaussian angle about a random perpendicular axis.
fn perturb(d: &Vector3<f64>, sigma: f64, rng: &mut ChaCha8Rng) -> Vector3<f64> {
    if sigma == 0.0 {
        return *d;
    }
    let angle: f64 = Normal::new(0.0, sigma).expect("finite sigma").sample(rng);
    let mut u;
    loop {
        let r = Vector3::<f64>::from_fn(|_, _| StandardNormal.sample(rng));
        u = r - d * d.dot(&r);
        if u.norm() > 1e-9 {
            break;
        }
    }
    (d * angle.cos() + u.normalize() * angle.sin()).normalize()
}

/// Rejection-sample a configuration with `feature ≥ threshold`.
fn sample_start(
    feature: GroundTruth,
    model: &RobotModel,
    scene: &Scene,
    params: &OracleParams,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>, HarnessError> {
    let space = model.actuated_configuration_space();
    for _ in 0..params.max_tries {
        let q: Vec<f64> = space.iter().map(|&(lo, hi)| rng.random_range(lo..=hi)).collect();
        let ee = scene.ee_world(model, &q)?;
        if feature.value(scene, &ee) >= params.start_threshold {
            return Ok(q);
        }
    }
    Err(HarnessError::NoHighRegion {
        feature: feature.name().into(),
        threshold: params.start_threshold,
        tries: params.max_tries,
    })
}

pub fn generate_oracle_trace(feature: GroundTruth, model: &RobotModel, scene: &Scene, seed: u64) -> Result<DemonstrationRecord, HarnessError> {
    generate_oracle_trace_with(feature, model, scene, seed, &OracleParams::default())
}

/// Walk the end effector down the ground-truth feature from a high region to
/// a low one, recording through the capture recorder on a simulated clock.
///
/// Every accepted step strictly decreases the feature; a step that cannot
/// (IK blocked by limits or reach) is redrawn and, failing that, the trace
/// restarts from a fresh start configuration.
pub fn generate_oracle_trace_with(
    feature: GroundTruth,
    model: &RobotModel,
    scene: &Scene,
    seed: u64,
    params: &OracleParams,
) -> Result<DemonstrationRecord, HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma = params.noise_deg.to_radians();
    let ik = IkParams::default();
    for _ in 0..params.max_restarts {
        let mut q = sample_start(feature, model, scene, params, &mut rng)?;
        let mut path = vec![q.clone()];
        let mut value = feature.value(scene, &scene.ee_world(model, &q)?);
        let mut stuck = false;
        while value > params.stop_threshold && path.len() <= params.max_steps {
            let ee = scene.ee_world(model, &q)?;
            let descent = -ascent(feature, scene, &ee);
            let mut advanced = false;
            for _ in 0..params.step_retries {
                let dir = perturb(&descent, sigma, &mut rng);
                let target = scene.to_base_frame(&(ee + dir * params.step_length));
                let sol = solve_ik(model, &target, &q, &ik)?;
                let next = feature.value(scene, &scene.ee_world(model, &sol.q)?);
                if next < value {
                    q = sol.q.into_inner();
                    value = next;
                    advanced = true;
                    break;
                }
            }
            if !advanced {
                stuck = true;
                break;
            }
            path.push(q.clone());
        }
        if stuck || value > params.stop_threshold {
            continue;
        }
        return record(model, scene, seed, params, path);
    }
    Err(HarnessError::TraceStalled {
        feature: feature.name().into(),
        restarts: params.max_restarts,
    })
}

fn record(model: &RobotModel, scene: &Scene, seed: u64, params: &OracleParams, path: Vec<Vec<f64>>) -> Result<DemonstrationRecord, HarnessError> {
    let registry = SessionRegistry::new();
    let source = LatestJointState::new();
    let meta = RecorderMeta {
        demo_type: DemoType::FeatureTrace,
        robot_name: model.name.clone(),
        scene_id: scene.id.clone(),
        joint_names: model.actuated_names(),
        inertias: model.actuated_inertias(),
        started_at: 0.0,
        request_id: None,
    };
    let mut handle = registry.recorder_start(&format!("oracle-{seed}"), params.sample_interval, source.clone(), meta)?;
    for (k, q) in path.into_iter().enumerate() {
        let t = k as f64 * params.sample_interval;
        source.publish(q, t);
        handle.tick(t);
    }
    Ok(handle.finish()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::experiment_setup;

    #[test]
    fn perturbation_keeps_unit_length_and_zero_sigma_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = Vector3::new(0.0, 0.6, 0.8);
        assert_eq!(perturb(&d, 0.0, &mut rng), d);
        for _ in 0..100 {
            let p = perturb(&d, 0.3, &mut rng);
            assert!((p.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn laptop_trace_endpoints() {
        let (scene, model) = experiment_setup();
        let rec = generate_oracle_trace(GroundTruth::Laptop, &model, &scene, 3).unwrap();
        let q0 = &rec.trajectory.first().q;
        let q1 = &rec.trajectory.last().q;
        assert!(scene.gt_laptop(&scene.ee_world(&model, q0).unwrap()) >= 0.9);
        assert!(scene.gt_laptop(&scene.ee_world(&model, q1).unwrap()) <= 0.1);
        assert_eq!(rec.demo_type, DemoType::FeatureTrace);
    }
}
