//! Declarative environment, obstacle point clouds and ground-truth features.
//!
//! All ground-truth features use the cost orientation: 0 is desirable and 1
//! is undesirable.

use crate::assets;
use crate::kinematics::{ee_position, position_jacobian, KinematicsError};
use crate::model::{parse_urdf_with, ModelError, RobotModel, Transform, UrdfOptions};
use nalgebra::{DMatrix, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("point cloud requested but no obstacle is marked as an obstacle")]
    NoObstacles,
    #[error("invalid scene: {0}")]
    Invalid(String),
    #[error("scene JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("scene names no robot description")]
    NoRobot,
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub top_height: f64,
    pub extent: [f64; 2],
    #[serde(default)]
    pub pose: Transform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorColumn {
    pub center_xy: [f64; 2],
    pub radius: f64,
    pub height: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ObstacleShape {
    Box { half_extents: [f64; 3] },
    Sphere { radius: f64 },
    /// Axis along local z, centered on the pose origin.
    Cylinder { radius: f64, height: f64 },
}

impl ObstacleShape {
    pub fn surface_area(&self) -> f64 {
        match *self {
            ObstacleShape::Box { half_extents: [x, y, z] } => 8.0 * (x * y + y * z + x * z),
            ObstacleShape::Sphere { radius } => 4.0 * PI * radius * radius,
            ObstacleShape::Cylinder { radius, height } => {
                2.0 * PI * radius * height + 2.0 * PI * radius * radius
            }
        }
    }

    fn dimensions_positive(&self) -> bool {
        match *self {
            ObstacleShape::Box { half_extents } => half_extents.iter().all(|v| *v > 0.0),
            ObstacleShape::Sphere { radius } => radius > 0.0,
            ObstacleShape::Cylinder { radius, height } => radius > 0.0 && height > 0.0,
        }
    }

    /// |distance| of a local-frame point from the surface (0 on the surface).
    pub fn surface_distance(&self, p: &Vector3<f64>) -> f64 {
        match *self {
            ObstacleShape::Box { half_extents: [x, y, z] } => {
                let outside = (p.x.abs() - x).max(p.y.abs() - y).max(p.z.abs() - z);
                outside.abs()
            }
            ObstacleShape::Sphere { radius } => (p.norm() - radius).abs(),
            ObstacleShape::Cylinder { radius, height } => {
                let lateral = (p.x * p.x + p.y * p.y).sqrt() - radius;
                let cap = p.z.abs() - 0.5 * height;
                lateral.max(cap).abs()
            }
        }
    }

    fn sample_surface(&self, rng: &mut ChaCha8Rng) -> Vector3<f64> {
        match *self {
            ObstacleShape::Box { half_extents: [hx, hy, hz] } => {
                // Face pairs weighted by area: ±x faces (hy·hz), ±y (hx·hz), ±z (hx·hy).
                let areas = [hy * hz, hx * hz, hx * hy];
                let total: f64 = areas.iter().sum();
                let mut pick = rng.random::<f64>() * total;
                let mut axis = 2;
                for (i, a) in areas.iter().enumerate() {
                    if pick < *a {
                        axis = i;
                        break;
                    }
                    pick -= a;
                }
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                let u = rng.random_range(-1.0..=1.0);
                let v = rng.random_range(-1.0..=1.0);
                match axis {
                    0 => Vector3::new(sign * hx, u * hy, v * hz),
                    1 => Vector3::new(u * hx, sign * hy, v * hz),
                    _ => Vector3::new(u * hx, v * hy, sign * hz),
                }
            }
            ObstacleShape::Sphere { radius } => loop {
                let v = Vector3::new(
                    rng.random_range(-1.0..=1.0),
                    rng.random_range(-1.0..=1.0),
                    rng.random_range(-1.0..=1.0),
                );
                let n = v.norm();
                if n > 1e-6 && n <= 1.0 {
                    break v * (radius / n);
                }
            },
            ObstacleShape::Cylinder { radius, height } => {
                let lateral = 2.0 * PI * radius * height;
                let caps = 2.0 * PI * radius * radius;
                let theta = rng.random_range(0.0..2.0 * PI);
                if rng.random::<f64>() * (lateral + caps) < lateral {
                    let z = rng.random_range(-0.5..=0.5) * height;
                    Vector3::new(radius * theta.cos(), radius * theta.sin(), z)
                } else {
                    let r = radius * rng.random::<f64>().sqrt();
                    let z = if rng.random::<bool>() { 0.5 * height } else { -0.5 * height };
                    Vector3::new(r * theta.cos(), r * theta.sin(), z)
                }
            }
        }
    }
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub id: String,
    pub shape: ObstacleShape,
    #[serde(default)]
    pub pose: Transform,
    #[serde(default = "default_true")]
    pub is_obstacle: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConstants {
    /// Workspace height above the table at which the table feature saturates.
    pub table_z_range: f64,
    /// Horizontal radius of the laptop penalty cone.
    pub laptop_radius: f64,
    /// Proxemics ellipse semi-axis along x (toward the human's front).
    pub proxemics_front: f64,
    /// Proxemics ellipse semi-axis along y.
    pub proxemics_side: f64,
}

impl Default for FeatureConstants {
    fn default() -> Self {
        Self {
            table_z_range: 1.0,
            laptop_radius: 0.3,
            proxemics_front: 0.6,
            proxemics_side: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    #[serde(default)]
    pub id: String,
    /// URDF path, relative to the scene file.
    #[serde(default)]
    pub robot: Option<String>,
    #[serde(default)]
    pub ee_link: Option<String>,
    #[serde(default)]
    pub inertia_overrides: HashMap<String, f64>,
    pub table: Table,
    pub laptop_center: Vector3<f64>,
    pub human_position: Vector3<f64>,
    #[serde(default)]
    pub indicator_column: Option<IndicatorColumn>,
    #[serde(default)]
    pub robot_base_pose: Transform,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    #[serde(default)]
    pub feature_constants: FeatureConstants,
    /// Rest configuration used to seed IK; defaults to joint-range midpoints.
    #[serde(default)]
    pub home: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<Vector3<f64>>,
    pub source_ids: Vec<String>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundTruth {
    Table,
    Laptop,
    Proxemics,
}

impl GroundTruth {
    pub const ALL: [GroundTruth; 3] = [GroundTruth::Table, GroundTruth::Laptop, GroundTruth::Proxemics];

    pub fn name(self) -> &'static str {
        match self {
            GroundTruth::Table => "table",
            GroundTruth::Laptop => "laptop",
            GroundTruth::Proxemics => "proxemics",
        }
    }

    pub fn value(self, scene: &Scene, ee: &Vector3<f64>) -> f64 {
        match self {
            GroundTruth::Table => scene.gt_table(ee),
            GroundTruth::Laptop => scene.gt_laptop(ee),
            GroundTruth::Proxemics => scene.gt_proxemics(ee),
        }
    }

    /// Gradient with respect to the world end-effector position (zero on flat pieces).
    pub fn gradient(self, scene: &Scene, ee: &Vector3<f64>) -> Vector3<f64> {
        let c = &scene.feature_constants;
        match self {
            GroundTruth::Table => {
                let u = (ee.z - scene.table.top_height) / c.table_z_range;
                if u > 0.0 && u < 1.0 {
                    Vector3::new(0.0, 0.0, 1.0 / c.table_z_range)
                } else {
                    Vector3::zeros()
                }
            }
            GroundTruth::Laptop => {
                let dx = ee.x - scene.laptop_center.x;
                let dy = ee.y - scene.laptop_center.y;
                let d = dx.hypot(dy);
                if d > 0.0 && d < c.laptop_radius {
                    Vector3::new(-dx / (d * c.laptop_radius), -dy / (d * c.laptop_radius), 0.0)
                } else {
                    Vector3::zeros()
                }
            }
            GroundTruth::Proxemics => {
                let (a, b) = (c.proxemics_front, c.proxemics_side);
                let u = (ee.x - scene.human_position.x) / a;
                let v = (ee.y - scene.human_position.y) / b;
                let d = u.hypot(v);
                if d > 0.0 && d < 1.0 {
                    Vector3::new(-u / (a * d), -v / (b * d), 0.0)
                } else {
                    Vector3::zeros()
                }
            }
        }
    }
}

impl std::fmt::Display for GroundTruth {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for GroundTruth {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "table" => Ok(GroundTruth::Table),
            "laptop" => Ok(GroundTruth::Laptop),
            "proxemics" => Ok(GroundTruth::Proxemics),
            other => Err(format!("unknown feature `{other}` (expected table, laptop or proxemics)")),
        }
    }
}

impl Scene {
    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        let scene: Scene = serde_json::from_str(text)?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if !self.table.extent.iter().all(|v| *v > 0.0) {
            return Err(SceneError::Invalid("table extent components must be > 0".into()));
        }
        if let Some(col) = &self.indicator_column {
            if !(col.radius > 0.0) {
                return Err(SceneError::Invalid("indicator column radius must be > 0".into()));
            }
        }
        for o in &self.obstacles {
            if !o.shape.dimensions_positive() {
                return Err(SceneError::Invalid(format!("obstacle `{}` has a non-positive dimension", o.id)));
            }
        }
        let c = &self.feature_constants;
        if !(c.table_z_range > 0.0 && c.laptop_radius > 0.0 && c.proxemics_front > 0.0 && c.proxemics_side > 0.0) {
            return Err(SceneError::Invalid("feature constants must be > 0".into()));
        }
        Ok(())
    }

    /// Load the robot this scene names, resolving paths against `base_dir`.
    ///
    /// Falls back to a bundled description when the file does not exist but
    /// its name matches one shipped with the crate.
    pub fn load_robot(&self, base_dir: &Path) -> Result<RobotModel, SceneError> {
        let robot = self.robot.as_deref().ok_or(SceneError::NoRobot)?;
        let path = base_dir.join(robot);
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) => {
                let name = Path::new(robot).file_name().and_then(|n| n.to_str()).unwrap_or("");
                match assets::bundled(name) {
                    Some(t) => t.to_string(),
                    None => return Err(SceneError::Io { path, source: e }),
                }
            }
        };
        self.robot_from_urdf(&text)
    }

    pub fn robot_from_urdf(&self, urdf: &str) -> Result<RobotModel, SceneError> {
        let options = UrdfOptions {
            ee_link: self.ee_link.clone(),
            inertia_overrides: self.inertia_overrides.clone(),
        };
        Ok(parse_urdf_with(urdf, &options)?)
    }

    pub fn home_configuration(&self, model: &RobotModel) -> Vec<f64> {
        match &self.home {
            Some(h) if h.len() == model.dof() => {
                let mut q = h.clone();
                model.clamp_configuration(&mut q);
                q
            }
            _ => model.neutral_configuration(),
        }
    }

    /// End-effector position in the world frame.
    pub fn ee_world(&self, model: &RobotModel, q: &[f64]) -> Result<Vector3<f64>, KinematicsError> {
        Ok(self.robot_base_pose.transform_point(&ee_position(model, q)?))
    }

    /// World-frame end-effector position and its 3×n Jacobian.
    pub fn ee_world_jacobian(
        &self,
        model: &RobotModel,
        q: &[f64],
    ) -> Result<(Vector3<f64>, DMatrix<f64>), KinematicsError> {
        let p = self.ee_world(model, q)?;
        let r = self.robot_base_pose.rotation_matrix();
        let r = DMatrix::from_column_slice(3, 3, r.as_slice());
        Ok((p, r * position_jacobian(model, q)?))
    }

    /// Express a world-frame point in the robot base frame (the IK frame).
    pub fn to_base_frame(&self, world: &Vector3<f64>) -> Vector3<f64> {
        self.robot_base_pose.inverse().transform_point(world)
    }

    pub fn gt_table(&self, ee: &Vector3<f64>) -> f64 {
        ((ee.z - self.table.top_height) / self.feature_constants.table_z_range).clamp(0.0, 1.0)
    }

    pub fn gt_laptop(&self, ee: &Vector3<f64>) -> f64 {
        let d = (ee.x - self.laptop_center.x).hypot(ee.y - self.laptop_center.y);
        (1.0 - d / self.feature_constants.laptop_radius).max(0.0)
    }

    pub fn gt_proxemics(&self, ee: &Vector3<f64>) -> f64 {
        let c = &self.feature_constants;
        let u = (ee.x - self.human_position.x) / c.proxemics_front;
        let v = (ee.y - self.human_position.y) / c.proxemics_side;
        (1.0 - u.hypot(v)).max(0.0)
    }

    /// Sample `count` points on obstacle surfaces, allocated by surface area.
    pub fn sample_point_cloud(&self, count: usize, seed: u64) -> Result<PointCloud, SceneError> {
        if count == 0 {
            return Ok(PointCloud::default());
        }
        let mut obstacles: Vec<&Obstacle> = self.obstacles.iter().filter(|o| o.is_obstacle).collect();
        if obstacles.is_empty() {
            return Err(SceneError::NoObstacles);
        }
        obstacles.sort_by(|a, b| a.id.cmp(&b.id));

        // Largest-remainder allocation; ties resolved by id order.
        let areas: Vec<f64> = obstacles.iter().map(|o| o.shape.surface_area()).collect();
        let total: f64 = areas.iter().sum();
        let quotas: Vec<f64> = areas.iter().map(|a| a / total * count as f64).collect();
        let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
        let mut remaining = count - counts.iter().sum::<usize>();
        let mut order: Vec<usize> = (0..obstacles.len()).collect();
        order.sort_by(|&a, &b| {
            let ra = quotas[a] - quotas[a].floor();
            let rb = quotas[b] - quotas[b].floor();
            rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
        });
        for &i in order.iter().cycle() {
            if remaining == 0 {
                break;
            }
            counts[i] += 1;
            remaining -= 1;
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cloud = PointCloud {
            points: Vec::with_capacity(count),
            source_ids: Vec::with_capacity(count),
        };
        for (obstacle, n) in obstacles.iter().zip(counts) {
            for _ in 0..n {
                let local = obstacle.shape.sample_surface(&mut rng);
                cloud.points.push(obstacle.pose.transform_point(&local));
                cloud.source_ids.push(obstacle.id.clone());
            }
        }
        Ok(cloud)
    }
}

/// Parse a scene file and the robot it references.
pub fn load_scene_and_robot(path: &Path) -> Result<(Scene, RobotModel), SceneError> {
    let text = std::fs::read_to_string(path).map_err(|source| SceneError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let scene = Scene::from_json(&text)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let robot = scene.load_robot(base)?;
    Ok((scene, robot))
}

/// The bundled UR5e experiment scene with its robot.
pub fn experiment_setup() -> (Scene, RobotModel) {
    let scene = Scene::from_json(assets::EXPERIMENT_SCENE).expect("bundled scene is valid");
    let robot = scene.robot_from_urdf(assets::UR5E_URDF).expect("bundled URDF is valid");
    (scene, robot)
}

/// The bundled planar two-link scene with its robot.
pub fn planar_setup() -> (Scene, RobotModel) {
    let scene = Scene::from_json(assets::PLANAR2R_SCENE).expect("bundled scene is valid");
    let robot = scene.robot_from_urdf(assets::PLANAR2R_URDF).expect("bundled URDF is valid");
    (scene, robot)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scene_with(obstacles: Vec<Obstacle>) -> Scene {
        let mut s = Scene::from_json(assets::EXPERIMENT_SCENE).unwrap();
        s.obstacles = obstacles;
        s
    }

    fn boxed(id: &str, half: [f64; 3], at: [f64; 3]) -> Obstacle {
        Obstacle {
            id: id.into(),
            shape: ObstacleShape::Box { half_extents: half },
            pose: Transform::from_xyz_rpy(at, [0.3, 0.2, 0.1]),
            is_obstacle: true,
        }
    }

    #[test]
    fn sphere_points_on_surface() {
        let scene = scene_with(vec![Obstacle {
            id: "ball".into(),
            shape: ObstacleShape::Sphere { radius: 0.5 },
            pose: Transform::identity(),
            is_obstacle: true,
        }]);
        let cloud = scene.sample_point_cloud(1000, 3).unwrap();
        assert_eq!(cloud.len(), 1000);
        for p in &cloud.points {
            assert!((p.norm() - 0.5).abs() <= 1e-9);
        }
    }

    #[test]
    fn zero_count_and_no_obstacles() {
        let scene = scene_with(vec![]);
        assert!(scene.sample_point_cloud(0, 1).unwrap().is_empty());
        assert!(matches!(scene.sample_point_cloud(5, 1), Err(SceneError::NoObstacles)));

        let mut hidden = boxed("b", [0.1, 0.1, 0.1], [0.0; 3]);
        hidden.is_obstacle = false;
        let scene = scene_with(vec![hidden]);
        assert!(matches!(scene.sample_point_cloud(5, 1), Err(SceneError::NoObstacles)));
    }

    #[test]
    fn allocation_proportional_to_area() {
        // Cube of half-extent h has area 24h²; doubling area means h·√2.
        let h = 0.1;
        let a = boxed("a", [h; 3], [0.0, 0.0, 0.0]);
        let b = boxed("b", [h * 2f64.sqrt(); 3], [1.0, 0.0, 0.0]);
        assert!((b.shape.surface_area() - 2.0 * a.shape.surface_area()).abs() < 1e-12);
        let scene = scene_with(vec![b.clone(), a.clone()]);
        let cloud = scene.sample_point_cloud(3000, 7).unwrap();
        let na = cloud.source_ids.iter().filter(|s| *s == "a").count();
        let nb = cloud.len() - na;
        assert!((na as f64 - 1000.0).abs() <= 50.0, "{na}");
        assert!((nb as f64 - 2000.0).abs() <= 100.0, "{nb}");
    }

    #[test]
    fn cloud_independent_of_obstacle_order() {
        let a = boxed("a", [0.1, 0.2, 0.3], [0.0, 0.0, 0.0]);
        let c = Obstacle {
            id: "c".into(),
            shape: ObstacleShape::Cylinder { radius: 0.2, height: 0.5 },
            pose: Transform::from_xyz_rpy([0.0, 1.0, 0.0], [0.0, 0.5, 0.0]),
            is_obstacle: true,
        };
        let one = scene_with(vec![a.clone(), c.clone()]).sample_point_cloud(500, 11).unwrap();
        let two = scene_with(vec![c, a]).sample_point_cloud(500, 11).unwrap();
        assert_eq!(one, two);
    }

    #[test]
    fn every_shape_samples_on_its_surface() {
        let obstacles = vec![
            boxed("box", [0.1, 0.2, 0.3], [0.5, 0.0, 0.2]),
            Obstacle {
                id: "cyl".into(),
                shape: ObstacleShape::Cylinder { radius: 0.15, height: 0.4 },
                pose: Transform::from_xyz_rpy([0.0, 1.0, 0.0], [0.4, 0.0, 1.0]),
                is_obstacle: true,
            },
            Obstacle {
                id: "sph".into(),
                shape: ObstacleShape::Sphere { radius: 0.25 },
                pose: Transform::from_xyz_rpy([-1.0, 0.0, 0.5], [0.0; 3]),
                is_obstacle: true,
            },
        ];
        let scene = scene_with(obstacles.clone());
        let cloud = scene.sample_point_cloud(2000, 5).unwrap();
        for (p, id) in cloud.points.iter().zip(&cloud.source_ids) {
            let o = obstacles.iter().find(|o| &o.id == id).unwrap();
            let local = o.pose.inverse().transform_point(p);
            assert!(o.shape.surface_distance(&local) <= 1e-9, "{id}: {}", o.shape.surface_distance(&local));
        }
    }

    #[test]
    fn table_feature_values() {
        let scene = Scene::from_json(assets::EXPERIMENT_SCENE).unwrap();
        let top = scene.table.top_height;
        let zr = scene.feature_constants.table_z_range;
        assert_eq!(scene.gt_table(&Vector3::new(0.3, 0.1, top)), 0.0);
        assert_eq!(scene.gt_table(&Vector3::new(0.3, 0.1, top + zr)), 1.0);
        assert!((scene.gt_table(&Vector3::new(0.3, 0.1, top + 0.25 * zr)) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn laptop_feature_values() {
        let scene = Scene::from_json(assets::EXPERIMENT_SCENE).unwrap();
        let c = scene.laptop_center;
        let r = scene.feature_constants.laptop_radius;
        assert_eq!(scene.gt_laptop(&(c + Vector3::new(0.0, 0.0, 0.7))), 1.0);
        assert!(scene.gt_laptop(&(c + Vector3::new(r, 0.0, 0.0))) < 1e-12);
        assert_eq!(scene.gt_laptop(&(c + Vector3::new(0.0, 2.0 * r, 0.0))), 0.0);
        assert!((scene.gt_laptop(&(c + Vector3::new(0.0, r / 2.0, 0.2))) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn proxemics_feature_values() {
        let scene = Scene::from_json(assets::EXPERIMENT_SCENE).unwrap();
        let h = scene.human_position;
        let a = scene.feature_constants.proxemics_front;
        let b = scene.feature_constants.proxemics_side;
        assert!(a > b);
        assert_eq!(scene.gt_proxemics(&h), 1.0);
        assert!(scene.gt_proxemics(&(h + Vector3::new(0.0, b, 0.0))).abs() < 1e-12);
        let theta: f64 = 0.7;
        let on_ellipse = h + Vector3::new(a * theta.cos(), b * theta.sin(), 0.3);
        assert!(scene.gt_proxemics(&on_ellipse).abs() < 1e-12);
        assert!((scene.gt_proxemics(&(h + Vector3::new(a / 2.0, 0.0, 0.0))) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn gradients_match_finite_differences_off_kinks() {
        let scene = Scene::from_json(assets::EXPERIMENT_SCENE).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = 1e-6;
        for gt in GroundTruth::ALL {
            let mut checked = 0;
            while checked < 50 {
                let p = Vector3::new(
                    rng.random_range(-0.8..0.8),
                    rng.random_range(-0.8..0.8),
                    rng.random_range(-0.2..1.1),
                );
                let g = gt.gradient(&scene, &p);
                let mut fd = Vector3::zeros();
                for i in 0..3 {
                    let mut e = Vector3::zeros();
                    e[i] = h;
                    fd[i] = (gt.value(&scene, &(p + e)) - gt.value(&scene, &(p - e))) / (2.0 * h);
                }
                // Skip samples straddling a kink.
                if (fd - g).norm() > 1e-3 && (gt.value(&scene, &p) == 0.0 || gt.value(&scene, &p) == 1.0 || g.norm() < 1e-12) {
                    continue;
                }
                assert!((fd - g).norm() < 1e-5, "{gt}: {g:?} vs {fd:?}");
                let v = gt.value(&scene, &p);
                assert!((0.0..=1.0).contains(&v));
                checked += 1;
            }
        }
    }

    #[test]
    fn invalid_scene_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(assets::EXPERIMENT_SCENE).unwrap();
        v["table"]["extent"] = serde_json::json!([0.0, 1.0]);
        assert!(Scene::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn bundled_scenes_load_their_robots() {
        let (scene, robot) = experiment_setup();
        assert_eq!(robot.dof(), 6);
        assert_eq!(scene.home_configuration(&robot).len(), 6);
        let (_, planar) = planar_setup();
        assert_eq!(planar.dof(), 2);
    }
}
