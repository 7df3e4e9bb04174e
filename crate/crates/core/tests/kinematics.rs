mod common;

use common::FkOracle;
use demobench::kinematics::{ee_position, position_jacobian, solve_ik, IkParams};
use demobench::scene::{experiment_setup, planar_setup};
use demobench::{assets, parse_urdf};
use nalgebra::Vector3;
use proptest::prelude::*;

fn joint_vector(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn ur5e_fk_matches_the_oracle(q in joint_vector(6)) {
        let (_, model) = experiment_setup();
        let oracle = FkOracle::new(assets::UR5E_URDF, &model.links[model.ee_link].name);
        let mut q = q;
        model.clamp_configuration(&mut q);
        let p = ee_position(&model, &q).unwrap();
        prop_assert!((p - Vector3::from(oracle.ee_for(&model, &q))).norm() < 1e-12);
    }

    #[test]
    fn planar_fk_is_the_textbook_formula(a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let (_, model) = planar_setup();
        let p = ee_position(&model, &[a, b]).unwrap();
        prop_assert!((p.x - (a.cos() + (a + b).cos())).abs() < 1e-12);
        prop_assert!((p.y - (a.sin() + (a + b).sin())).abs() < 1e-12);
        prop_assert!(p.z.abs() < 1e-12);
    }

    #[test]
    fn jacobian_columns_are_directional_derivatives(q in joint_vector(6), dir in joint_vector(6)) {
        let (_, model) = experiment_setup();
        let mut q = q;
        model.clamp_configuration(&mut q);
        let h = 1e-6;
        let up: Vec<f64> = q.iter().zip(&dir).map(|(a, d)| a + h * d).collect();
        let dn: Vec<f64> = q.iter().zip(&dir).map(|(a, d)| a - h * d).collect();
        let fd = (ee_position(&model, &up).unwrap() - ee_position(&model, &dn).unwrap()) / (2.0 * h);
        let jd = position_jacobian(&model, &q).unwrap() * nalgebra::DVector::from_column_slice(&dir);
        prop_assert!((fd - Vector3::new(jd[0], jd[1], jd[2])).amax() < 1e-6);
    }

    #[test]
    fn ik_residual_never_exceeds_the_starting_error(q in joint_vector(2), seed in joint_vector(2)) {
        let (_, model) = planar_setup();
        let target = ee_position(&model, &q).unwrap();
        let start = (target - ee_position(&model, &seed).unwrap()).norm();
        let sol = solve_ik(&model, &target, &seed, &IkParams::default()).unwrap();
        prop_assert!(sol.residual <= start + 1e-12);
        prop_assert!(model.within_limits(&sol.q));
    }
}

#[test]
fn prismatic_and_continuous_joints_follow_the_oracle() {
    let urdf = r#"<robot name="mixed">
      <link name="base"/><link name="tip"/>
      <link name="slider"><inertial><mass value="1"/><inertia ixx="0.01" ixy="0" ixz="0" iyy="0.01" iyz="0" izz="0.01"/></inertial></link>
      <link name="spinner"><inertial><mass value="1"/><inertia ixx="0.01" ixy="0" ixz="0" iyy="0.01" iyz="0" izz="0.01"/></inertial></link>
      <joint name="lift" type="prismatic">
        <parent link="base"/><child link="slider"/>
        <origin xyz="0.1 0 0.2" rpy="0 0 0.3"/><axis xyz="0 0 1"/>
        <limit lower="-0.5" upper="0.5" effort="1" velocity="1"/>
      </joint>
      <joint name="spin" type="continuous">
        <parent link="slider"/><child link="spinner"/>
        <origin xyz="0 0.2 0" rpy="0.4 -0.2 0"/><axis xyz="1 0 0"/>
      </joint>
      <joint name="mount" type="fixed">
        <parent link="spinner"/><child link="tip"/>
        <origin xyz="0 0 0.3" rpy="0 0 0"/>
      </joint>
    </robot>"#;
    let model = parse_urdf(urdf).unwrap();
    let oracle = FkOracle::new(urdf, "tip");
    for q in [[0.0, 0.0], [0.3, 1.0], [-0.45, -2.5], [0.1, 3.1]] {
        let p = ee_position(&model, &q).unwrap();
        assert!((p - Vector3::from(oracle.ee_for(&model, &q))).norm() < 1e-12, "q = {q:?}");
    }
}
