//! Robot descriptions and scenes bundled into the binary.

pub const PLANAR2R_URDF: &str = include_str!("../assets/planar2r.urdf");
pub const UR5E_URDF: &str = include_str!("../assets/ur5e.urdf");
pub const EXPERIMENT_SCENE: &str = include_str!("../assets/experiment_scene.json");
pub const PLANAR2R_SCENE: &str = include_str!("../assets/planar2r_scene.json");

/// Look up a bundled file by its file name.
pub fn bundled(name: &str) -> Option<&'static str> {
    match name {
        "planar2r.urdf" => Some(PLANAR2R_URDF),
        "ur5e.urdf" => Some(UR5E_URDF),
        "experiment_scene.json" => Some(EXPERIMENT_SCENE),
        "planar2r_scene.json" => Some(PLANAR2R_SCENE),
        _ => None,
    }
}
