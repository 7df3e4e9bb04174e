//! Forward kinematics, the position Jacobian and damped-least-squares IK.
//!
//! IK is position-only: targets are points for the end-effector origin and
//! orientation is left free. Each iteration solves
//! `Δq = Jᵀ (J Jᵀ + λ² I)⁻¹ e`, leaving out joints already pinned at a limit,
//! caps the largest joint change and hard-clamps the result into joint limits.
//! A step that would increase the residual is halved until it does not, so the
//! residual never increases between iterations; when no shrunken step helps
//! the solver stops early and reports `converged = false`.

use crate::model::{JointKind, RobotModel, Transform};
use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("configuration has {got} values, model has {expected} actuated joints")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("IK target is not finite")]
    NonFiniteTarget,
    #[error("invalid IK parameters: {0}")]
    InvalidParams(String),
}

/// Joint values in actuated order (radians or meters).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Configuration(pub Vec<f64>);

impl Configuration {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl From<Vec<f64>> for Configuration {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl std::ops::Deref for Configuration {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IkParams {
    pub damping: f64,
    pub position_tolerance: f64,
    pub max_iterations: usize,
    pub step_scale: f64,
    /// Largest change of any joint in one iteration (rad or m). Long
    /// undamped steps tend to land folded against a limit and stall there.
    pub max_step: f64,
}

impl Default for IkParams {
    fn default() -> Self {
        Self {
            damping: 1e-2,
            position_tolerance: 1e-4,
            max_iterations: 200,
            step_scale: 1.0,
            max_step: 0.2,
        }
    }
}

impl IkParams {
    pub fn validate(&self) -> Result<(), KinematicsError> {
        if !(self.damping > 0.0) {
            return Err(KinematicsError::InvalidParams("damping must be > 0".into()));
        }
        if !(self.position_tolerance > 0.0) {
            return Err(KinematicsError::InvalidParams("tolerance must be > 0".into()));
        }
        if self.max_iterations < 1 {
            return Err(KinematicsError::InvalidParams("max_iterations must be ≥ 1".into()));
        }
        if !(self.step_scale > 0.0 && self.step_scale <= 1.0) {
            return Err(KinematicsError::InvalidParams("step_scale must lie in (0, 1]".into()));
        }
        if !(self.max_step > 0.0) {
            return Err(KinematicsError::InvalidParams("max_step must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IkSolution {
    pub q: Configuration,
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct FkResult {
    /// World pose of every link, indexed like `model.links`.
    pub link_poses: Vec<Transform>,
    pub ee_pose: Transform,
}

fn check_dim(model: &RobotModel, q: &[f64]) -> Result<(), KinematicsError> {
    if q.len() != model.dof() {
        return Err(KinematicsError::DimensionMismatch {
            expected: model.dof(),
            got: q.len(),
        });
    }
    Ok(())
}

/// Joint frames (parent pose ∘ origin, before the joint's own motion), per joint.
fn joint_frames(model: &RobotModel, q: &[f64]) -> (Vec<Transform>, Vec<Transform>) {
    let mut link_poses = vec![Transform::identity(); model.links.len()];
    let mut frames = vec![Transform::identity(); model.joints.len()];
    for &ji in model.joint_order() {
        let joint = &model.joints[ji];
        let (parent, child) = model.joint_links(ji);
        let frame = link_poses[parent].compose(&joint.origin);
        let value = model.actuated_slot(ji).map(|s| q[s]).unwrap_or(0.0);
        link_poses[child] = frame.compose(&joint.motion(value));
        frames[ji] = frame;
    }
    (link_poses, frames)
}

pub fn forward_kinematics(model: &RobotModel, q: &[f64]) -> Result<FkResult, KinematicsError> {
    check_dim(model, q)?;
    let (link_poses, _) = joint_frames(model, q);
    let ee_pose = link_poses[model.ee_link];
    Ok(FkResult {
        link_poses,
        ee_pose,
    })
}

/// End-effector position only; same math as [`forward_kinematics`].
pub fn ee_position(model: &RobotModel, q: &[f64]) -> Result<Vector3<f64>, KinematicsError> {
    Ok(forward_kinematics(model, q)?.ee_pose.translation)
}

/// 3×n world-frame position Jacobian of the end-effector origin.
pub fn position_jacobian(model: &RobotModel, q: &[f64]) -> Result<DMatrix<f64>, KinematicsError> {
    check_dim(model, q)?;
    Ok(jacobian_and_position(model, q).0)
}

fn jacobian_and_position(model: &RobotModel, q: &[f64]) -> (DMatrix<f64>, Vector3<f64>) {
    let (link_poses, frames) = joint_frames(model, q);
    let p_ee = link_poses[model.ee_link].translation;
    let mut jac = DMatrix::zeros(3, model.dof());
    for (col, &ji) in model.actuated.iter().enumerate() {
        let joint = &model.joints[ji];
        let frame = &frames[ji];
        let axis = frame.transform_vector(&joint.axis);
        let column = match joint.kind {
            JointKind::Revolute | JointKind::Continuous => axis.cross(&(p_ee - frame.translation)),
            JointKind::Prismatic => axis,
            JointKind::Fixed => unreachable!("fixed joints are never actuated"),
        };
        jac.set_column(col, &column);
    }
    (jac, p_ee)
}

/// DLS step with joints pinned at a limit (and pushing outward) removed from
/// the Jacobian, then scaled so no joint moves more than `max_step`.
fn limited_step(model: &RobotModel, q: &[f64], jac: &DMatrix<f64>, error: &Vector3<f64>, params: &IkParams) -> nalgebra::DVector<f64> {
    let bounds: Vec<(f64, f64)> = model
        .actuated_joints()
        .map(|j| match j.kind {
            JointKind::Continuous => (f64::NEG_INFINITY, f64::INFINITY),
            _ => (j.limits.lower, j.limits.upper),
        })
        .collect();
    let mut dq = dls_step(jac, error, params.damping);
    let mut active = jac.clone();
    for _ in 0..q.len() {
        let mut changed = false;
        for (k, &(lo, hi)) in bounds.iter().enumerate() {
            let pinned = (q[k] <= lo && dq[k] < 0.0) || (q[k] >= hi && dq[k] > 0.0);
            if pinned && active.column(k).iter().any(|&v| v != 0.0) {
                active.column_mut(k).fill(0.0);
                changed = true;
            }
        }
        if !changed {
            break;
        }
        dq = dls_step(&active, error, params.damping);
    }
    let largest = dq.amax();
    if largest > params.max_step {
        dq *= params.max_step / largest;
    }
    dq
}

/// One damped-least-squares step `Jᵀ (J Jᵀ + λ² I)⁻¹ e`.
fn dls_step(jac: &DMatrix<f64>, error: &Vector3<f64>, damping: f64) -> nalgebra::DVector<f64> {
    let jjt: Matrix3<f64> = {
        let m = jac * jac.transpose();
        Matrix3::from_fn(|r, c| m[(r, c)])
    } + Matrix3::identity() * (damping * damping);
    // λ > 0 keeps the system positive definite.
    let y = jjt
        .cholesky()
        .map(|c| c.solve(error))
        .unwrap_or_else(|| jjt.lu().solve(error).unwrap_or_else(Vector3::zeros));
    jac.transpose() * nalgebra::DVector::from_column_slice(y.as_slice())
}

pub fn solve_ik(
    model: &RobotModel,
    target: &Vector3<f64>,
    seed: &[f64],
    params: &IkParams,
) -> Result<IkSolution, KinematicsError> {
    check_dim(model, seed)?;
    params.validate()?;
    if !target.iter().all(|v| v.is_finite()) {
        return Err(KinematicsError::NonFiniteTarget);
    }
    let mut q = seed.to_vec();
    model.clamp_configuration(&mut q);
    let (mut jac, mut p) = jacobian_and_position(model, &q);
    let mut residual = (target - p).norm();
    let mut iterations = 0;
    let mut trial = vec![0.0; q.len()];

    while residual > params.position_tolerance && iterations < params.max_iterations {
        iterations += 1;
        let error = target - p;
        let dq = limited_step(model, &q, &jac, &error, params);
        let mut scale = params.step_scale;
        let mut accepted = None;
        for _ in 0..30 {
            for ((t, qi), d) in trial.iter_mut().zip(&q).zip(dq.iter()) {
                *t = qi + scale * d;
            }
            model.clamp_configuration(&mut trial);
            let (tj, tp) = jacobian_and_position(model, &trial);
            let r = (target - tp).norm();
            if r <= residual {
                accepted = Some((tj, tp, r));
                break;
            }
            scale *= 0.5;
        }
        match accepted {
            Some((tj, tp, r)) => {
                let stalled = residual - r <= f64::EPSILON * residual.max(1.0);
                q.copy_from_slice(&trial);
                jac = tj;
                p = tp;
                residual = r;
                if stalled {
                    break;
                }
            }
            None => break,
        }
    }

    Ok(IkSolution {
        q: Configuration(q),
        converged: residual <= params.position_tolerance,
        iterations,
        residual,
    })
}

/// Warm-started IK over a stream of targets.
///
/// When `dt` is supplied for a step, each joint's change is limited to its
/// velocity limit × `dt` (joints with a zero velocity limit are unconstrained).
#[derive(Debug, Clone)]
pub struct TargetTracker<'m> {
    model: &'m RobotModel,
    params: IkParams,
    state: Vec<f64>,
}

impl<'m> TargetTracker<'m> {
    pub fn new(model: &'m RobotModel, state: &[f64], params: IkParams) -> Result<Self, KinematicsError> {
        check_dim(model, state)?;
        params.validate()?;
        let mut state = state.to_vec();
        model.clamp_configuration(&mut state);
        Ok(Self {
            model,
            params,
            state,
        })
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn step(&mut self, target: &Vector3<f64>, dt: Option<f64>) -> Result<IkSolution, KinematicsError> {
        let mut solution = solve_ik(self.model, target, &self.state, &self.params)?;
        if let Some(dt) = dt {
            let mut limited = false;
            for ((v, prev), joint) in solution
                .q
                .0
                .iter_mut()
                .zip(&self.state)
                .zip(self.model.actuated_joints())
            {
                let vmax = joint.limits.velocity;
                if vmax > 0.0 && dt >= 0.0 {
                    let bound = vmax * dt;
                    let delta = (*v - prev).clamp(-bound, bound);
                    if delta != *v - prev {
                        limited = true;
                    }
                    *v = joint.clamp(prev + delta);
                }
            }
            if limited {
                let p = ee_position(self.model, &solution.q)?;
                solution.residual = (target - p).norm();
                solution.converged = solution.residual <= self.params.position_tolerance;
            }
        }
        self.state.clone_from(&solution.q.0);
        Ok(solution)
    }
}

/// Track a sequence of `(target, dt)` pairs, returning one configuration per target.
pub fn track_target<I>(
    model: &RobotModel,
    targets: I,
    state: &[f64],
    params: &IkParams,
) -> Result<Vec<IkSolution>, KinematicsError>
where
    I: IntoIterator<Item = (Vector3<f64>, Option<f64>)>,
{
    let mut tracker = TargetTracker::new(model, state, *params)?;
    targets
        .into_iter()
        .map(|(target, dt)| tracker.step(&target, dt))
        .collect()
}

/// Upper bound on reach: sum of joint-origin offsets along the chain.
pub fn max_reach(model: &RobotModel) -> f64 {
    let mut total = 0.0;
    let mut cursor = model.ee_link;
    while let Some(ji) = model.parent_joint(cursor) {
        let joint = &model.joints[ji];
        total += joint.origin.translation.norm();
        if joint.kind == JointKind::Prismatic {
            total += joint.limits.lower.abs().max(joint.limits.upper.abs());
        }
        cursor = model.joint_links(ji).0;
    }
    total
}
