//! Helpers shared by the integration tests.
#![allow(dead_code)]

use demobench::capture::{DemoType, DemonstrationRecord, Trajectory};
use demobench::scene::Scene;
use demobench::RobotModel;
use std::collections::HashMap;

type M4 = [[f64; 4]; 4];

fn identity() -> M4 {
    let mut m = [[0.0; 4]; 4];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

fn mul(a: &M4, b: &M4) -> M4 {
    let mut c = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            c[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

/// Homogeneous matrix from URDF `xyz`/`rpy` (R = Rz(yaw)·Ry(pitch)·Rx(roll)).
fn origin(xyz: [f64; 3], rpy: [f64; 3]) -> M4 {
    let (sr, cr) = rpy[0].sin_cos();
    let (sp, cp) = rpy[1].sin_cos();
    let (sy, cy) = rpy[2].sin_cos();
    [
        [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr, xyz[0]],
        [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr, xyz[1]],
        [-sp, cp * sr, cp * cr, xyz[2]],
        [0.0, 0.0, 0.0, 1.0],
    ]
}

/// Rotation by `angle` about unit `axis` (Rodrigues).
fn rotation(axis: [f64; 3], angle: f64) -> M4 {
    let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    let [x, y, z] = axis.map(|v| v / n);
    let (s, c) = angle.sin_cos();
    let t = 1.0 - c;
    [
        [t * x * x + c, t * x * y - s * z, t * x * z + s * y, 0.0],
        [t * x * y + s * z, t * y * y + c, t * y * z - s * x, 0.0],
        [t * x * z - s * y, t * y * z + s * x, t * z * z + c, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ]
}

fn translation(axis: [f64; 3], d: f64) -> M4 {
    let mut m = identity();
    for k in 0..3 {
        m[k][3] = axis[k] * d;
    }
    m
}

fn triple(s: Option<&str>, default: [f64; 3]) -> [f64; 3] {
    match s {
        None => default,
        Some(s) => {
            let v: Vec<f64> = s.split_whitespace().map(|t| t.parse().unwrap()).collect();
            [v[0], v[1], v[2]]
        }
    }
}

struct OracleJoint {
    name: String,
    kind: String,
    parent: String,
    origin: M4,
    axis: [f64; 3],
}

/// Forward kinematics straight from the URDF text, independent of the
/// library's model and transform types.
pub struct FkOracle {
    by_child: HashMap<String, OracleJoint>,
    ee_link: String,
}

impl FkOracle {
    pub fn new(urdf: &str, ee_link: &str) -> Self {
        let doc = roxmltree::Document::parse(urdf).unwrap();
        let mut by_child = HashMap::new();
        for j in doc.root_element().children().filter(|n| n.has_tag_name("joint")) {
            let child = |tag: &str| j.children().find(|n| n.has_tag_name(tag));
            let o = child("origin");
            by_child.insert(
                child("child").unwrap().attribute("link").unwrap().to_string(),
                OracleJoint {
                    name: j.attribute("name").unwrap().to_string(),
                    kind: j.attribute("type").unwrap().to_string(),
                    parent: child("parent").unwrap().attribute("link").unwrap().to_string(),
                    origin: origin(triple(o.and_then(|o| o.attribute("xyz")), [0.0; 3]), triple(o.and_then(|o| o.attribute("rpy")), [0.0; 3])),
                    axis: triple(child("axis").and_then(|a| a.attribute("xyz")), [1.0, 0.0, 0.0]),
                },
            );
        }
        FkOracle {
            by_child,
            ee_link: ee_link.to_string(),
        }
    }

    /// End-effector position in the root-link frame; `q` by joint name.
    pub fn ee_position(&self, q: &HashMap<String, f64>) -> [f64; 3] {
        let mut chain = Vec::new();
        let mut link = self.ee_link.as_str();
        while let Some(j) = self.by_child.get(link) {
            chain.push(j);
            link = &j.parent;
        }
        let mut t = identity();
        for j in chain.iter().rev() {
            t = mul(&t, &j.origin);
            let v = q.get(&j.name).copied().unwrap_or(0.0);
            let motion = match j.kind.as_str() {
                "revolute" | "continuous" => rotation(j.axis, v),
                "prismatic" => translation(j.axis, v),
                _ => identity(),
            };
            t = mul(&t, &motion);
        }
        [t[0][3], t[1][3], t[2][3]]
    }

    /// Convenience: name the actuated values of `q` after `model`'s joints.
    pub fn ee_for(&self, model: &RobotModel, q: &[f64]) -> [f64; 3] {
        let named = model.actuated_names().into_iter().zip(q.iter().copied()).collect();
        self.ee_position(&named)
    }
}

/// Uniform configuration within the model's joint limits.
pub fn random_configuration(model: &RobotModel, rng: &mut impl rand::Rng) -> Vec<f64> {
    model
        .actuated_configuration_space()
        .iter()
        .map(|&(lo, hi)| rng.random_range(lo..=hi))
        .collect()
}

/// A feature trace visiting `qs` at the recorder's default rate.
pub fn feature_trace(model: &RobotModel, scene: &Scene, qs: Vec<Vec<f64>>) -> DemonstrationRecord {
    let n = qs.len();
    DemonstrationRecord {
        trajectory: Trajectory::uniform(qs).unwrap(),
        torques: vec![vec![0.0; model.dof()]; n],
        demo_type: DemoType::FeatureTrace,
        robot_name: model.name.clone(),
        scene_id: scene.id.clone(),
        started_at: 0.0,
        sample_interval: 0.05,
        raw_duration: 0.05 * (n - 1) as f64,
        joint_names: model.actuated_names(),
        request_id: None,
    }
}
