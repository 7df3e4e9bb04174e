use super::LearningError;
use crate::model::RobotModel;
use crate::scene::Scene;
use nalgebra::DMatrix;

/// Joint angles, world end-effector position, offsets from the laptop and the
/// human, and height above the table.
pub type StateEncoding = Vec<f64>;

pub fn encoding_dim(model: &RobotModel) -> usize {
    model.dof() + 10
}

fn check(model: &RobotModel, q: &[f64]) -> Result<(), LearningError> {
    if q.len() != model.dof() {
        return Err(LearningError::DimensionMismatch {
            expected: model.dof(),
            got: q.len(),
        });
    }
    Ok(())
}

pub fn encode_state(model: &RobotModel, scene: &Scene, q: &[f64]) -> Result<StateEncoding, LearningError> {
    check(model, q)?;
    let ee = scene.ee_world(model, q)?;
    Ok(assemble(scene, q, &ee))
}

fn assemble(scene: &Scene, q: &[f64], ee: &nalgebra::Vector3<f64>) -> StateEncoding {
    let mut s = Vec::with_capacity(q.len() + 10);
    s.extend_from_slice(q);
    s.extend(ee.iter());
    s.extend((ee - scene.laptop_center).iter());
    s.extend((ee - scene.human_position).iter());
    s.push(ee.z - scene.table.top_height);
    s
}

/// Encoding together with ∂s/∂q (dim × dof).
pub fn encode_state_with_jacobian(
    model: &RobotModel,
    scene: &Scene,
    q: &[f64],
) -> Result<(StateEncoding, DMatrix<f64>), LearningError> {
    check(model, q)?;
    let n = model.dof();
    let (ee, jac) = scene.ee_world_jacobian(model, q)?;
    let mut ds = DMatrix::zeros(n + 10, n);
    for i in 0..n {
        ds[(i, i)] = 1.0;
    }
    for block in 0..3 {
        ds.view_mut((n + 3 * block, 0), (3, n)).copy_from(&jac);
    }
    ds.row_mut(n + 9).copy_from(&jac.row(2));
    Ok((assemble(scene, q, &ee), ds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::forward_kinematics;
    use crate::scene::{experiment_setup, planar_setup};

    #[test]
    fn planar_dimension() {
        let (scene, model) = planar_setup();
        let s = encode_state(&model, &scene, &[0.0, 0.0]).unwrap();
        assert_eq!(s.len(), 12);
        assert_eq!(s, encode_state(&model, &scene, &[0.0, 0.0]).unwrap());
    }

    #[test]
    fn ee_slice_matches_fk() {
        let (scene, model) = experiment_setup();
        let q = scene.home_configuration(&model);
        let s = encode_state(&model, &scene, &q).unwrap();
        let fk = forward_kinematics(&model, &q).unwrap().ee_pose;
        let world = scene.robot_base_pose.compose(&fk).translation;
        for k in 0..3 {
            assert!((s[6 + k] - world[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let (scene, model) = experiment_setup();
        let q = vec![0.3, -1.1, 1.4, -0.7, -1.2, 0.4];
        let (_, ds) = encode_state_with_jacobian(&model, &scene, &q).unwrap();
        let h = 1e-6;
        for j in 0..6 {
            let mut a = q.clone();
            let mut b = q.clone();
            a[j] += h;
            b[j] -= h;
            let sa = encode_state(&model, &scene, &a).unwrap();
            let sb = encode_state(&model, &scene, &b).unwrap();
            for i in 0..sa.len() {
                assert!(((sa[i] - sb[i]) / (2.0 * h) - ds[(i, j)]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn wrong_width() {
        let (scene, model) = planar_setup();
        assert!(matches!(
            encode_state(&model, &scene, &[0.0]),
            Err(LearningError::DimensionMismatch { expected: 2, got: 1 })
        ));
    }
}
