use nalgebra::{Matrix3, Matrix4, Point3, Quaternion, UnitQuaternion, Vector3};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Rigid transform: rotation as a unit quaternion, translation in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform {
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
}

impl Default for Transform {
    fn default() -> Self {
        Self::identity()
    }
}

impl Transform {
    pub fn identity() -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self::new(UnitQuaternion::identity(), translation)
    }

    /// URDF convention: fixed-axis roll about X, then pitch about Y, then yaw about Z.
    pub fn from_xyz_rpy(xyz: [f64; 3], rpy: [f64; 3]) -> Self {
        Self::new(
            UnitQuaternion::from_euler_angles(rpy[0], rpy[1], rpy[2]),
            Vector3::new(xyz[0], xyz[1], xyz[2]),
        )
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Transform) -> Transform {
        Transform {
            rotation: self.rotation * other.rotation,
            translation: self.translation + self.rotation * other.translation,
        }
    }

    pub fn inverse(&self) -> Transform {
        let rotation = self.rotation.inverse();
        Transform {
            rotation,
            translation: -(rotation * self.translation),
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = self.rotation.to_homogeneous();
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn point(&self) -> Point3<f64> {
        Point3::from(self.translation)
    }

    pub fn quaternion_norm(&self) -> f64 {
        self.rotation.quaternion().norm()
    }
}

impl std::ops::Mul for Transform {
    type Output = Transform;
    fn mul(self, rhs: Transform) -> Transform {
        self.compose(&rhs)
    }
}

// On the wire a transform is `{"translation":[x,y,z],"rotation":[x,y,z,w]}`.
// Hand-written files may instead use URDF-style `{"xyz":[..],"rpy":[..]}`.
#[derive(Serialize, Deserialize)]
struct QuatForm {
    translation: [f64; 3],
    rotation: [f64; 4],
}

#[derive(Deserialize)]
struct RpyForm {
    #[serde(default)]
    xyz: [f64; 3],
    #[serde(default)]
    rpy: [f64; 3],
}

#[derive(Deserialize)]
#[serde(untagged)]
enum AnyForm {
    Quat(QuatForm),
    Rpy(RpyForm),
}

impl Serialize for Transform {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let q = self.rotation.quaternion();
        QuatForm {
            translation: [self.translation.x, self.translation.y, self.translation.z],
            rotation: [q.i, q.j, q.k, q.w],
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Transform {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        match AnyForm::deserialize(deserializer)? {
            AnyForm::Quat(f) => {
                let [x, y, z, w] = f.rotation;
                let q = Quaternion::new(w, x, y, z);
                let norm = q.norm();
                if !norm.is_finite() || (norm - 1.0).abs() > 1e-9 {
                    return Err(D::Error::custom(format!(
                        "rotation quaternion must be unit length, got norm {norm}"
                    )));
                }
                Ok(Transform::new(
                    UnitQuaternion::new_unchecked(q),
                    Vector3::from(f.translation),
                ))
            }
            AnyForm::Rpy(f) => Ok(Transform::from_xyz_rpy(f.xyz, f.rpy)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn yaw_rotates_x_into_y() {
        let t = Transform::from_xyz_rpy([1.0, 0.0, 0.0], [0.0, 0.0, FRAC_PI_2]);
        let p = t.transform_point(&Vector3::new(1.0, 0.0, 0.0));
        assert_relative_eq!(p, Vector3::new(1.0, 1.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn compose_with_inverse_is_identity() {
        let t = Transform::from_xyz_rpy([0.3, -0.2, 1.1], [0.4, -1.2, 2.5]);
        let id = t.compose(&t.inverse());
        assert_relative_eq!(id.translation, Vector3::zeros(), epsilon = 1e-12);
        assert!(id.rotation.angle() < 1e-12);
    }

    #[test]
    fn json_forms() {
        let t = Transform::from_xyz_rpy([0.1, 0.2, 0.3], [0.5, 0.6, 0.7]);
        let text = serde_json::to_string(&t).unwrap();
        let back: Transform = serde_json::from_str(&text).unwrap();
        assert_eq!(t, back);

        let rpy: Transform = serde_json::from_str(r#"{"xyz":[1,2,3]}"#).unwrap();
        assert_eq!(rpy.translation, Vector3::new(1.0, 2.0, 3.0));

        let bad = serde_json::from_str::<Transform>(
            r#"{"translation":[0,0,0],"rotation":[0,0,0,2]}"#,
        );
        assert!(bad.is_err());
    }
}
