use super::{
    Geometry, Inertial, Joint, JointKind, JointLimits, Link, ModelError, RobotModel, Shape,
    Transform,
};
use nalgebra::{Matrix3, Vector3};
use roxmltree::{Document, Node};
use std::collections::HashMap;

#[derive(Debug, Clone, Default)]
pub struct UrdfOptions {
    /// End-effector link; defaults to the child of the last joint in document order.
    pub ee_link: Option<String>,
    /// Per-joint moment of inertia overrides, keyed by joint name.
    pub inertia_overrides: HashMap<String, f64>,
}

pub fn parse_urdf(xml_text: &str) -> Result<RobotModel, ModelError> {
    parse_urdf_with(xml_text, &UrdfOptions::default())
}

pub fn parse_urdf_with(xml_text: &str, options: &UrdfOptions) -> Result<RobotModel, ModelError> {
    let doc = Document::parse(xml_text).map_err(|e| ModelError::MalformedXml(e.to_string()))?;
    let robot = doc.root_element();
    if robot.tag_name().name() != "robot" {
        return Err(ModelError::MalformedXml(format!(
            "root element is <{}>, expected <robot>",
            robot.tag_name().name()
        )));
    }
    let name = robot.attribute("name").unwrap_or("robot").to_string();

    let mut links = Vec::new();
    let mut joint_nodes = Vec::new();
    for child in robot.children().filter(Node::is_element) {
        match child.tag_name().name() {
            "link" => links.push(parse_link(child)?),
            "joint" => joint_nodes.push(child),
            "transmission" | "gazebo" | "material" => {
                log::warn!("ignoring unsupported URDF element <{}>", child.tag_name().name());
            }
            other => log::warn!("ignoring unknown URDF element <{other}>"),
        }
    }

    let link_inertia: HashMap<&str, f64> = links
        .iter()
        .filter_map(|l| l.inertial.as_ref().map(|i| (l.name.as_str(), i.dominant_moment())))
        .collect();

    let mut joints = Vec::with_capacity(joint_nodes.len());
    for node in joint_nodes {
        let mut joint = parse_joint(node)?;
        if joint.kind.is_actuated() {
            joint.inertia = match options.inertia_overrides.get(&joint.name) {
                Some(&i) => i,
                None => match link_inertia.get(joint.child_link.as_str()) {
                    Some(&i) if i > 0.0 => i,
                    // Unknown child links are reported as dangling references below.
                    _ if !links.iter().any(|l| l.name == joint.child_link) => 0.0,
                    _ => return Err(ModelError::MissingInertia(joint.name)),
                },
            };
        }
        joints.push(joint);
    }
    for name in options.inertia_overrides.keys() {
        if !joints.iter().any(|j| &j.name == name) {
            log::warn!("inertia override for unknown joint `{name}`");
        }
    }

    RobotModel::from_parts(name, links, joints, options.ee_link.as_deref())
}

fn child<'a, 'i>(node: Node<'a, 'i>, tag: &str) -> Option<Node<'a, 'i>> {
    node.children().find(|c| c.is_element() && c.tag_name().name() == tag)
}

fn parse_f64(text: &str, what: &str) -> Result<f64, ModelError> {
    text.trim().parse::<f64>().map_err(|_| ModelError::InvalidValue {
        what: what.to_string(),
        detail: format!("`{text}` is not a number"),
    })
}

fn parse_vec3(text: &str, what: &str) -> Result<[f64; 3], ModelError> {
    let parts: Vec<&str> = text.split_whitespace().collect();
    if parts.len() != 3 {
        return Err(ModelError::InvalidValue {
            what: what.to_string(),
            detail: format!("expected 3 components, got `{text}`"),
        });
    }
    Ok([
        parse_f64(parts[0], what)?,
        parse_f64(parts[1], what)?,
        parse_f64(parts[2], what)?,
    ])
}

fn attr_f64(node: Node, name: &str, what: &str) -> Result<Option<f64>, ModelError> {
    node.attribute(name)
        .map(|v| parse_f64(v, &format!("{what} {name}")))
        .transpose()
}

fn parse_origin(parent: Node, what: &str) -> Result<Transform, ModelError> {
    let Some(origin) = child(parent, "origin") else {
        return Ok(Transform::identity());
    };
    let xyz = origin
        .attribute("xyz")
        .map(|v| parse_vec3(v, &format!("{what} origin xyz")))
        .transpose()?
        .unwrap_or([0.0; 3]);
    let rpy = origin
        .attribute("rpy")
        .map(|v| parse_vec3(v, &format!("{what} origin rpy")))
        .transpose()?
        .unwrap_or([0.0; 3]);
    Ok(Transform::from_xyz_rpy(xyz, rpy))
}

fn parse_geometry(node: Node, what: &str) -> Result<Option<Geometry>, ModelError> {
    let origin = parse_origin(node, what)?;
    let Some(geometry) = child(node, "geometry") else {
        return Ok(None);
    };
    let Some(shape_node) = geometry.children().find(Node::is_element) else {
        return Ok(None);
    };
    let need = |name: &str| -> Result<f64, ModelError> {
        attr_f64(shape_node, name, what)?.ok_or_else(|| ModelError::InvalidValue {
            what: what.to_string(),
            detail: format!("<{}> missing `{name}`", shape_node.tag_name().name()),
        })
    };
    let shape = match shape_node.tag_name().name() {
        "mesh" => Shape::Mesh {
            filename: shape_node.attribute("filename").unwrap_or_default().to_string(),
            scale: shape_node
                .attribute("scale")
                .map(|s| parse_vec3(s, &format!("{what} mesh scale")))
                .transpose()?
                .unwrap_or([1.0; 3]),
        },
        "box" => Shape::Box {
            size: parse_vec3(shape_node.attribute("size").unwrap_or(""), &format!("{what} box size"))?,
        },
        "cylinder" => Shape::Cylinder {
            radius: need("radius")?,
            length: need("length")?,
        },
        "sphere" => Shape::Sphere {
            radius: need("radius")?,
        },
        other => {
            log::warn!("{what}: unsupported geometry <{other}>");
            return Ok(None);
        }
    };
    Ok(Some(Geometry { origin, shape }))
}

fn parse_link(node: Node) -> Result<Link, ModelError> {
    let name = node
        .attribute("name")
        .ok_or_else(|| ModelError::MalformedXml("<link> without name".into()))?
        .to_string();
    let what = format!("link `{name}`");
    let visual = match child(node, "visual") {
        Some(v) => parse_geometry(v, &format!("{what} visual"))?,
        None => None,
    };
    let collision = match child(node, "collision") {
        Some(c) => parse_geometry(c, &format!("{what} collision"))?,
        None => None,
    };
    let inertial = match child(node, "inertial") {
        Some(i) => {
            let mass = match child(i, "mass") {
                Some(m) => attr_f64(m, "value", &format!("{what} mass"))?.unwrap_or(0.0),
                None => 0.0,
            };
            let inertia = match child(i, "inertia") {
                Some(t) => {
                    let g = |k: &str| -> Result<f64, ModelError> {
                        Ok(attr_f64(t, k, &format!("{what} inertia"))?.unwrap_or(0.0))
                    };
                    let (ixx, ixy, ixz, iyy, iyz, izz) =
                        (g("ixx")?, g("ixy")?, g("ixz")?, g("iyy")?, g("iyz")?, g("izz")?);
                    Matrix3::new(ixx, ixy, ixz, ixy, iyy, iyz, ixz, iyz, izz)
                }
                None => Matrix3::zeros(),
            };
            Some(Inertial {
                mass,
                inertia,
                origin: parse_origin(i, &format!("{what} inertial"))?,
            })
        }
        None => None,
    };
    Ok(Link {
        name,
        visual,
        collision,
        inertial,
    })
}

fn parse_joint(node: Node) -> Result<Joint, ModelError> {
    let name = node
        .attribute("name")
        .ok_or_else(|| ModelError::MalformedXml("<joint> without name".into()))?
        .to_string();
    let what = format!("joint `{name}`");
    let kind = match node.attribute("type") {
        Some("revolute") => JointKind::Revolute,
        Some("continuous") => JointKind::Continuous,
        Some("prismatic") => JointKind::Prismatic,
        Some("fixed") => JointKind::Fixed,
        Some(other) => {
            return Err(ModelError::InvalidValue {
                what,
                detail: format!("unsupported joint type `{other}`"),
            })
        }
        None => return Err(ModelError::MalformedXml(format!("{what} has no type"))),
    };
    let link_ref = |tag: &str| -> Result<String, ModelError> {
        child(node, tag)
            .and_then(|n| n.attribute("link"))
            .map(str::to_string)
            .ok_or_else(|| ModelError::MalformedXml(format!("{what} has no <{tag} link=...>")))
    };
    let parent_link = link_ref("parent")?;
    let child_link = link_ref("child")?;
    let origin = parse_origin(node, &what)?;
    if child(node, "mimic").is_some() {
        log::warn!("{what}: <mimic> is ignored");
    }

    let axis = match (kind, child(node, "axis")) {
        (JointKind::Fixed, _) => Vector3::zeros(),
        (_, None) => return Err(ModelError::MissingAxis(name)),
        (_, Some(a)) => {
            let xyz = parse_vec3(a.attribute("xyz").unwrap_or(""), &format!("{what} axis"))?;
            let v = Vector3::from(xyz);
            let n = v.norm();
            if !(n > 0.0) || !n.is_finite() {
                return Err(ModelError::InvalidValue {
                    what: format!("{what} axis"),
                    detail: "zero-length axis".into(),
                });
            }
            v / n
        }
    };

    let limits = match child(node, "limit") {
        Some(l) => {
            let lower = attr_f64(l, "lower", &what)?.unwrap_or(0.0);
            let upper = attr_f64(l, "upper", &what)?.unwrap_or(0.0);
            let velocity = attr_f64(l, "velocity", &what)?.unwrap_or(0.0);
            let effort = attr_f64(l, "effort", &what)?.unwrap_or(0.0);
            match kind {
                JointKind::Continuous => JointLimits {
                    velocity,
                    effort,
                    ..JointLimits::UNBOUNDED_ANGLE
                },
                _ => JointLimits {
                    lower,
                    upper,
                    velocity,
                    effort,
                },
            }
        }
        None => match kind {
            JointKind::Revolute | JointKind::Prismatic => {
                return Err(ModelError::InvalidValue {
                    what,
                    detail: "revolute/prismatic joint requires <limit>".into(),
                })
            }
            JointKind::Continuous => JointLimits::UNBOUNDED_ANGLE,
            JointKind::Fixed => JointLimits {
                lower: 0.0,
                upper: 0.0,
                velocity: 0.0,
                effort: 0.0,
            },
        },
    };

    Ok(Joint {
        name,
        kind,
        parent_link,
        child_link,
        origin,
        axis,
        limits,
        inertia: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets;

    #[test]
    fn planar2r_structure() {
        let model = parse_urdf(assets::PLANAR2R_URDF).unwrap();
        // base, two arm links and a fixed tool frame at the tip of link2.
        assert_eq!(model.links.len(), 4);
        assert_eq!(model.dof(), 2);
        assert_eq!(model.links[model.root_link].name, "base");
        assert_eq!(model.links[model.ee_link].name, "tool");
    }

    #[test]
    fn ur5e_has_six_revolute_joints() {
        let model = parse_urdf(assets::UR5E_URDF).unwrap();
        // Counted by hand from the fixture: six revolute, four fixed.
        let non_fixed = model.joints.iter().filter(|j| j.kind != JointKind::Fixed).count();
        assert_eq!(non_fixed, 6);
        assert_eq!(model.dof(), 6);
        assert!(model.actuated_joints().all(|j| j.kind == JointKind::Revolute));
        assert_eq!(model.links[model.ee_link].name, "tool0");
        assert_eq!(
            model.actuated_names(),
            [
                "shoulder_pan_joint",
                "shoulder_lift_joint",
                "elbow_joint",
                "wrist_1_joint",
                "wrist_2_joint",
                "wrist_3_joint"
            ]
        );
    }

    #[test]
    fn ur5e_bounds_match_limit_tags() {
        use std::f64::consts::PI;
        let model = parse_urdf(assets::UR5E_URDF).unwrap();
        let bounds = model.actuated_configuration_space();
        let tau = 2.0 * PI;
        let expected = [(-tau, tau), (-tau, tau), (-PI, PI), (-tau, tau), (-tau, tau), (-tau, tau)];
        assert_eq!(bounds.len(), 6);
        for (b, e) in bounds.iter().zip(expected) {
            assert!((b.0 - e.0).abs() < 1e-12 && (b.1 - e.1).abs() < 1e-12, "{b:?} vs {e:?}");
        }
    }

    #[test]
    fn dangling_link_reference() {
        let xml = assets::PLANAR2R_URDF.replace(r#"<child link="link1"/>"#, r#"<child link="armm"/>"#);
        match parse_urdf(&xml) {
            Err(ModelError::DanglingReference { link, .. }) => assert_eq!(link, "armm"),
            other => panic!("expected DanglingReference, got {other:?}"),
        }
    }

    #[test]
    fn malformed_xml() {
        assert!(matches!(
            parse_urdf("<robot name='x'><link name='a'></robot>"),
            Err(ModelError::MalformedXml(_))
        ));
    }

    #[test]
    fn cycle_and_multiple_roots() {
        let two_roots = r#"<robot name="r"><link name="a"/><link name="b"/></robot>"#;
        assert!(matches!(parse_urdf(two_roots), Err(ModelError::NotATree(_))));

        let cycle = r#"<robot name="r">
            <link name="root"/><link name="a"/><link name="b"/>
            <joint name="ra" type="fixed"><parent link="root"/><child link="a"/></joint>
            <joint name="ab" type="fixed"><parent link="a"/><child link="b"/></joint>
            <joint name="ba" type="fixed"><parent link="b"/><child link="a"/></joint>
        </robot>"#;
        assert!(matches!(parse_urdf(cycle), Err(ModelError::NotATree(_))));

        let pure_cycle = r#"<robot name="r">
            <link name="root"/><link name="a"/><link name="b"/>
            <joint name="ab" type="fixed"><parent link="a"/><child link="b"/></joint>
            <joint name="ba" type="fixed"><parent link="b"/><child link="a"/></joint>
        </robot>"#;
        assert!(matches!(parse_urdf(pure_cycle), Err(ModelError::NotATree(_))));
    }

    #[test]
    fn missing_axis() {
        let xml = r#"<robot name="r">
            <link name="a"/><link name="b"><inertial><mass value="1"/><inertia ixx="1" iyy="1" izz="1"/></inertial></link>
            <joint name="ab" type="revolute"><parent link="a"/><child link="b"/>
              <limit lower="-1" upper="1" velocity="1" effort="1"/></joint>
        </robot>"#;
        assert_eq!(parse_urdf(xml), Err(ModelError::MissingAxis("ab".into())));
    }

    #[test]
    fn inertia_default_and_override() {
        let model = parse_urdf(assets::PLANAR2R_URDF).unwrap();
        let j1 = &model.joints[model.actuated[0]];
        let child = &model.links[model.link_index(&j1.child_link).unwrap()];
        assert_eq!(j1.inertia, child.inertial.as_ref().unwrap().dominant_moment());

        let mut options = UrdfOptions::default();
        options.inertia_overrides.insert("joint1".into(), 7.5);
        let model = parse_urdf_with(assets::PLANAR2R_URDF, &options).unwrap();
        assert_eq!(model.joints[model.actuated[0]].inertia, 7.5);
    }

    #[test]
    fn missing_inertia_is_reported() {
        let xml = r#"<robot name="r">
            <link name="a"/><link name="b"/>
            <joint name="ab" type="continuous"><parent link="a"/><child link="b"/><axis xyz="0 0 1"/></joint>
        </robot>"#;
        assert_eq!(parse_urdf(xml), Err(ModelError::MissingInertia("ab".into())));
    }

    #[test]
    fn ee_link_override_truncates_chain() {
        let options = UrdfOptions {
            ee_link: Some("link1".into()),
            ..Default::default()
        };
        let model = parse_urdf_with(assets::PLANAR2R_URDF, &options).unwrap();
        assert_eq!(model.dof(), 1);
    }

    #[test]
    fn continuous_joint_limits() {
        let xml = r#"<robot name="r">
            <link name="a"/><link name="b"><inertial><mass value="1"/><inertia ixx="0.1" iyy="0.1" izz="0.2"/></inertial></link>
            <joint name="ab" type="continuous"><parent link="a"/><child link="b"/><axis xyz="0 0 2"/></joint>
        </robot>"#;
        let model = parse_urdf(xml).unwrap();
        assert_eq!(model.actuated_configuration_space(), vec![(-std::f64::consts::PI, std::f64::consts::PI)]);
        assert!((model.joints[0].axis.norm() - 1.0).abs() < 1e-15);
        assert!((model.joints[0].inertia - 0.2).abs() < 1e-15);
    }
}
