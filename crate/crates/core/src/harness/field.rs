use super::HarnessError;
use crate::kinematics::{solve_ik, IkParams};
use crate::learning::{encode_state, FeatureNetwork};
use crate::model::RobotModel;
use crate::scene::{GroundTruth, Scene};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

/// Axis-aligned world-frame box sampled at `resolution` points per axis
/// (inclusive of both faces; a resolution of 1 uses the box centre).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub resolution: [usize; 3],
}

impl GridSpec {
    fn axis(&self, k: usize, i: usize) -> f64 {
        let n = self.resolution[k];
        if n <= 1 {
            0.5 * (self.min[k] + self.max[k])
        } else {
            self.min[k] + (self.max[k] - self.min[k]) * i as f64 / (n - 1) as f64
        }
    }

    /// Grid points, x fastest.
    pub fn points(&self) -> Vec<Vector3<f64>> {
        let [nx, ny, nz] = self.resolution;
        let mut out = Vec::with_capacity(nx * ny * nz);
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    out.push(Vector3::new(self.axis(0, i), self.axis(1, j), self.axis(2, k)));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
pub enum FieldSource<'a> {
    GroundTruth(GroundTruth),
    Network(&'a FeatureNetwork),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldCell {
    pub point: Vector3<f64>,
    /// `None` when IK cannot reach the cell.
    pub value: Option<f64>,
}

/// Cells farther than this from the reached end effector count as unreachable.
const REACH_TOLERANCE: f64 = 1e-3;

pub fn feature_field(source: FieldSource<'_>, model: &RobotModel, scene: &Scene, grid: &GridSpec) -> Result<Vec<FieldCell>, HarnessError> {
    let home = scene.home_configuration(model);
    let ik = IkParams::default();
    let mut warm = home.clone();
    let mut cells = Vec::new();
    for point in grid.points() {
        let target = scene.to_base_frame(&point);
        let mut sol = solve_ik(model, &target, &warm, &ik)?;
        if sol.residual > REACH_TOLERANCE {
            sol = solve_ik(model, &target, &home, &ik)?;
        }
        let value = if sol.residual <= REACH_TOLERANCE {
            warm.clone_from(&sol.q.0);
            Some(match source {
                FieldSource::GroundTruth(f) => f.value(scene, &scene.ee_world(model, &sol.q)?),
                FieldSource::Network(net) => net.value(&encode_state(model, scene, &sol.q)?)?,
            })
        } else {
            None
        };
        cells.push(FieldCell { point, value });
    }
    Ok(cells)
}

/// Write `x,y,z,value` rows (empty value for unreachable cells); returns the
/// number of data rows.
pub fn emit_feature_field(
    source: FieldSource<'_>,
    model: &RobotModel,
    scene: &Scene,
    grid: &GridSpec,
    out_path: &Path,
) -> Result<usize, HarnessError> {
    let cells = feature_field(source, model, scene, grid)?;
    let io = |source| HarnessError::Io {
        path: out_path.to_path_buf(),
        source,
    };
    let mut out = std::io::BufWriter::new(std::fs::File::create(out_path).map_err(io)?);
    writeln!(out, "x,y,z,value").map_err(io)?;
    for c in &cells {
        let v = c.value.map(|v| v.to_string()).unwrap_or_default();
        writeln!(out, "{},{},{},{}", c.point.x, c.point.y, c.point.z, v).map_err(io)?;
    }
    out.flush().map_err(io)?;
    Ok(cells.len())
}
