//! Robot description: links, joints and the actuated serial chain.
//!
//! Models are built from URDF by [`parse_urdf`] and are immutable afterwards.
//! A model can also be written to and read back from the JSON description
//! format used in scene documents ([`RobotModel::to_json`] / [`RobotModel::from_json`]).

mod transform;
mod urdf;

pub use transform::Transform;
pub use urdf::{parse_urdf, parse_urdf_with, UrdfOptions};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("malformed URDF XML: {0}")]
    MalformedXml(String),
    #[error("joint `{joint}` references nonexistent link `{link}`")]
    DanglingReference { joint: String, link: String },
    #[error("link/joint graph is not a tree: {0}")]
    NotATree(String),
    #[error("non-fixed joint `{0}` has no axis")]
    MissingAxis(String),
    #[error("joint `{0}` has no inertia: child link lacks <inertial> and no override was given")]
    MissingInertia(String),
    #[error("invalid value for {what}: {detail}")]
    InvalidValue { what: String, detail: String },
    #[error("invalid robot description JSON: {0}")]
    Json(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointKind {
    Revolute,
    Continuous,
    Prismatic,
    Fixed,
}

impl JointKind {
    pub fn is_actuated(self) -> bool {
        self != JointKind::Fixed
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointLimits {
    pub lower: f64,
    pub upper: f64,
    pub velocity: f64,
    pub effort: f64,
}

impl JointLimits {
    pub const UNBOUNDED_ANGLE: JointLimits = JointLimits {
        lower: -PI,
        upper: PI,
        velocity: 0.0,
        effort: 0.0,
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Joint {
    pub name: String,
    pub kind: JointKind,
    pub parent_link: String,
    pub child_link: String,
    pub origin: Transform,
    pub axis: Vector3<f64>,
    pub limits: JointLimits,
    /// Scalar moment of inertia (kg·m²) used for τ = I·α.
    pub inertia: f64,
}

impl Joint {
    /// Clamp (or wrap, for continuous joints) a joint value into its limits.
    pub fn clamp(&self, value: f64) -> f64 {
        match self.kind {
            JointKind::Continuous => wrap_angle(value),
            JointKind::Revolute | JointKind::Prismatic => {
                value.clamp(self.limits.lower, self.limits.upper)
            }
            JointKind::Fixed => 0.0,
        }
    }

    pub fn within_limits(&self, value: f64) -> bool {
        match self.kind {
            JointKind::Continuous => value.is_finite(),
            JointKind::Fixed => true,
            _ => value >= self.limits.lower && value <= self.limits.upper,
        }
    }

    /// Transform contributed by the joint's own motion at `value`.
    pub fn motion(&self, value: f64) -> Transform {
        match self.kind {
            JointKind::Revolute | JointKind::Continuous => Transform::new(
                nalgebra::UnitQuaternion::from_axis_angle(
                    &nalgebra::Unit::new_unchecked(self.axis),
                    value,
                ),
                Vector3::zeros(),
            ),
            JointKind::Prismatic => Transform::from_translation(self.axis * value),
            JointKind::Fixed => Transform::identity(),
        }
    }
}

/// Wrap an angle into (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Shape {
    Mesh { filename: String, scale: [f64; 3] },
    Box { size: [f64; 3] },
    Cylinder { radius: f64, length: f64 },
    Sphere { radius: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub origin: Transform,
    pub shape: Shape,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inertial {
    pub mass: f64,
    pub inertia: Matrix3<f64>,
    pub origin: Transform,
}

impl Inertial {
    /// Largest principal moment of the inertia tensor.
    pub fn dominant_moment(&self) -> f64 {
        let sym = (self.inertia + self.inertia.transpose()) * 0.5;
        sym.symmetric_eigenvalues().max()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub name: String,
    pub visual: Option<Geometry>,
    pub collision: Option<Geometry>,
    pub inertial: Option<Inertial>,
}

/// A validated kinematic tree with a designated end-effector chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotModel {
    pub name: String,
    pub links: Vec<Link>,
    pub joints: Vec<Joint>,
    /// Indices into `joints` of the non-fixed joints on the root→ee chain.
    pub actuated: Vec<usize>,
    pub root_link: usize,
    pub ee_link: usize,
    /// Joint index whose child is each link; `None` for the root.
    parent_joint: Vec<Option<usize>>,
    /// Joints ordered so every parent precedes its children.
    joint_order: Vec<usize>,
    /// For each joint, its position in `actuated`, if any.
    actuated_slot: Vec<Option<usize>>,
    /// (parent, child) link indices per joint.
    joint_links: Vec<(usize, usize)>,
}

impl RobotModel {
    /// Assemble a model from raw parts, checking every structural invariant.
    pub fn from_parts(
        name: String,
        links: Vec<Link>,
        joints: Vec<Joint>,
        ee_link: Option<&str>,
    ) -> Result<Self, ModelError> {
        use std::collections::HashMap;

        let index: HashMap<&str, usize> = links
            .iter()
            .enumerate()
            .map(|(i, l)| (l.name.as_str(), i))
            .collect();
        if index.len() != links.len() {
            return Err(ModelError::NotATree("duplicate link names".into()));
        }
        let mut joint_names = std::collections::HashSet::new();
        let mut parent_joint: Vec<Option<usize>> = vec![None; links.len()];
        let mut joint_links = Vec::with_capacity(joints.len());
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); links.len()];
        for (ji, j) in joints.iter().enumerate() {
            if !joint_names.insert(j.name.as_str()) {
                return Err(ModelError::NotATree(format!("duplicate joint `{}`", j.name)));
            }
            let parent = *index.get(j.parent_link.as_str()).ok_or_else(|| {
                ModelError::DanglingReference {
                    joint: j.name.clone(),
                    link: j.parent_link.clone(),
                }
            })?;
            let child = *index.get(j.child_link.as_str()).ok_or_else(|| {
                ModelError::DanglingReference {
                    joint: j.name.clone(),
                    link: j.child_link.clone(),
                }
            })?;
            if let Some(prev) = parent_joint[child] {
                return Err(ModelError::NotATree(format!(
                    "link `{}` has two parent joints (`{}`, `{}`)",
                    j.child_link, joints[prev].name, j.name
                )));
            }
            parent_joint[child] = Some(ji);
            children[parent].push(ji);
            joint_links.push((parent, child));
        }

        let roots: Vec<usize> = (0..links.len())
            .filter(|&i| parent_joint[i].is_none())
            .collect();
        if roots.len() != 1 {
            let names: Vec<&str> = roots.iter().map(|&i| links[i].name.as_str()).collect();
            return Err(ModelError::NotATree(format!(
                "expected exactly one root link, found {} ({})",
                roots.len(),
                names.join(", ")
            )));
        }
        let root_link = roots[0];

        // Breadth-first from the root; anything unvisited sits on a cycle.
        let mut joint_order = Vec::with_capacity(joints.len());
        let mut visited = vec![false; links.len()];
        let mut queue = std::collections::VecDeque::from([root_link]);
        visited[root_link] = true;
        while let Some(l) = queue.pop_front() {
            for &ji in &children[l] {
                let c = index[joints[ji].child_link.as_str()];
                if visited[c] {
                    return Err(ModelError::NotATree(format!("cycle through `{}`", links[c].name)));
                }
                visited[c] = true;
                joint_order.push(ji);
                queue.push_back(c);
            }
        }
        if let Some(i) = visited.iter().position(|v| !v) {
            return Err(ModelError::NotATree(format!(
                "link `{}` is not reachable from the root (cycle)",
                links[i].name
            )));
        }

        let ee_link = match ee_link {
            Some(name) => *index.get(name).ok_or_else(|| ModelError::InvalidValue {
                what: "ee_link".into(),
                detail: format!("no link named `{name}`"),
            })?,
            None => match joints.last() {
                Some(j) => index[j.child_link.as_str()],
                None => root_link,
            },
        };

        let mut chain = Vec::new();
        let mut cursor = ee_link;
        while let Some(ji) = parent_joint[cursor] {
            chain.push(ji);
            cursor = joint_links[ji].0;
            if chain.len() > links.len() {
                return Err(ModelError::NotATree("parent walk did not terminate".into()));
            }
        }
        chain.reverse();
        let actuated: Vec<usize> = chain
            .into_iter()
            .filter(|&ji| joints[ji].kind.is_actuated())
            .collect();
        let mut actuated_slot = vec![None; joints.len()];
        for (slot, &ji) in actuated.iter().enumerate() {
            actuated_slot[ji] = Some(slot);
        }

        let model = RobotModel {
            name,
            links,
            joints,
            actuated,
            root_link,
            ee_link,
            parent_joint,
            joint_order,
            actuated_slot,
            joint_links,
        };
        model.validate()?;
        Ok(model)
    }

    /// Check the per-joint and per-link numeric invariants.
    pub fn validate(&self) -> Result<(), ModelError> {
        let invalid = |what: String, detail: String| ModelError::InvalidValue { what, detail };
        for j in &self.joints {
            if (j.origin.quaternion_norm() - 1.0).abs() > 1e-9 {
                return Err(invalid(format!("joint `{}` origin", j.name), "non-unit quaternion".into()));
            }
            if j.kind.is_actuated() {
                let n = j.axis.norm();
                if (n - 1.0).abs() > 1e-9 {
                    return Err(invalid(format!("joint `{}` axis", j.name), format!("norm {n}")));
                }
            }
            if matches!(j.kind, JointKind::Revolute | JointKind::Prismatic)
                && j.limits.lower > j.limits.upper
            {
                return Err(invalid(
                    format!("joint `{}` limits", j.name),
                    format!("lower {} > upper {}", j.limits.lower, j.limits.upper),
                ));
            }
        }
        for &ji in &self.actuated {
            let j = &self.joints[ji];
            if !(j.inertia > 0.0) {
                return Err(invalid(format!("joint `{}` inertia", j.name), format!("{} ≤ 0", j.inertia)));
            }
        }
        for l in &self.links {
            if let Some(inertial) = &l.inertial {
                if inertial.mass < 0.0 {
                    return Err(invalid(format!("link `{}` mass", l.name), "negative".into()));
                }
            }
            for g in [&l.visual, &l.collision].into_iter().flatten() {
                if let Shape::Mesh { scale, .. } = &g.shape {
                    if scale.iter().any(|s| !(*s > 0.0)) {
                        return Err(invalid(format!("link `{}` mesh scale", l.name), "components must be > 0".into()));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn dof(&self) -> usize {
        self.actuated.len()
    }

    pub fn link_index(&self, name: &str) -> Option<usize> {
        self.links.iter().position(|l| l.name == name)
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }

    pub fn actuated_joints(&self) -> impl Iterator<Item = &Joint> + '_ {
        self.actuated.iter().map(move |&ji| &self.joints[ji])
    }

    pub fn actuated_names(&self) -> Vec<String> {
        self.actuated_joints().map(|j| j.name.clone()).collect()
    }

    pub fn actuated_inertias(&self) -> Vec<f64> {
        self.actuated_joints().map(|j| j.inertia).collect()
    }

    /// Joint whose child is `link`, if `link` is not the root.
    pub fn parent_joint(&self, link: usize) -> Option<usize> {
        self.parent_joint[link]
    }

    pub fn joint_order(&self) -> &[usize] {
        &self.joint_order
    }

    /// (parent, child) link indices of a joint.
    pub fn joint_links(&self, joint: usize) -> (usize, usize) {
        self.joint_links[joint]
    }

    pub fn actuated_slot(&self, joint: usize) -> Option<usize> {
        self.actuated_slot[joint]
    }

    /// Number of parent steps from `link` to the root.
    pub fn depth(&self, link: usize) -> usize {
        let mut steps = 0;
        let mut cursor = link;
        while let Some(ji) = self.parent_joint[cursor] {
            cursor = self.joint_links[ji].0;
            steps += 1;
        }
        steps
    }

    /// Position bounds per actuated joint; continuous joints report (−π, π].
    pub fn actuated_configuration_space(&self) -> Vec<(f64, f64)> {
        self.actuated_joints()
            .map(|j| match j.kind {
                JointKind::Continuous => (-PI, PI),
                _ => (j.limits.lower, j.limits.upper),
            })
            .collect()
    }

    /// Clamp every value of `q` into its joint's limits.
    pub fn clamp_configuration(&self, q: &mut [f64]) {
        for (v, j) in q.iter_mut().zip(self.actuated_joints()) {
            *v = j.clamp(*v);
        }
    }

    pub fn within_limits(&self, q: &[f64]) -> bool {
        q.len() == self.dof() && q.iter().zip(self.actuated_joints()).all(|(v, j)| j.within_limits(*v))
    }

    /// Midpoint of each joint's range.
    pub fn neutral_configuration(&self) -> Vec<f64> {
        self.actuated_configuration_space()
            .into_iter()
            .map(|(lo, hi)| 0.5 * (lo + hi))
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("robot model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let raw: RobotModel = serde_json::from_str(text).map_err(|e| ModelError::Json(e.to_string()))?;
        let ee = raw.links.get(raw.ee_link).map(|l| l.name.clone());
        let rebuilt = RobotModel::from_parts(raw.name, raw.links, raw.joints, ee.as_deref())?;
        if rebuilt.actuated != raw.actuated || rebuilt.root_link != raw.root_link {
            return Err(ModelError::Json("stored chain disagrees with joint graph".into()));
        }
        Ok(rebuilt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets;

    #[test]
    fn wrap_angle_convention() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip_is_exact() {
        for urdf in [assets::PLANAR2R_URDF, assets::UR5E_URDF] {
            let model = parse_urdf(urdf).unwrap();
            let back = RobotModel::from_json(&model.to_json()).unwrap();
            assert_eq!(model, back);
        }
    }

    #[test]
    fn parent_walk_terminates() {
        let model = parse_urdf(assets::UR5E_URDF).unwrap();
        for i in 0..model.links.len() {
            assert!(model.depth(i) <= model.links.len());
        }
    }

    #[test]
    fn configuration_space_in_actuated_order() {
        let model = parse_urdf(assets::PLANAR2R_URDF).unwrap();
        assert_eq!(model.actuated_configuration_space(), vec![(-PI, PI), (-PI, PI)]);
    }

    #[test]
    fn all_fixed_model_has_empty_space() {
        let xml = r#"<robot name="rigid">
            <link name="a"/><link name="b"/>
            <joint name="ab" type="fixed"><parent link="a"/><child link="b"/></joint>
        </robot>"#;
        let model = parse_urdf(xml).unwrap();
        assert!(model.actuated_configuration_space().is_empty());
        assert_eq!(model.dof(), 0);
    }

    #[test]
    fn dominant_moment_is_largest_eigenvalue() {
        let inertial = Inertial {
            mass: 1.0,
            inertia: Matrix3::new(2.0, 0.0, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0, 3.0),
            origin: Transform::identity(),
        };
        assert!((inertial.dominant_moment() - 5.0).abs() < 1e-12);
    }
}
