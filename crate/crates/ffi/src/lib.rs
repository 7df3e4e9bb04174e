//! C interface. Every object crosses the boundary as an opaque pointer that
//! the caller releases with the matching `*_free`; every fallible call
//! returns a [`DbStatus`] and leaves a message for [`db_last_error`] on the
//! calling thread. Strings returned through `char **` are freed with
//! [`db_string_free`].

use demobench::bus::{BackgroundHub, BusError, ServeConfig};
use demobench::capture::{load_record, CaptureError};
use demobench::harness::{self, ExperimentSpec, HarnessError};
use demobench::kinematics::{self, IkParams, KinematicsError};
use demobench::learning::{self, FeatureNetwork, LearningError, TrainParams};
use demobench::model::{ModelError, RobotModel};
use demobench::scene::{self, GroundTruth, Scene, SceneError};
use nalgebra::Vector3;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

/// Result of every fallible call. Values match the command-line exit codes
/// where the categories overlap.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DbStatus {
    Ok = 0,
    InvalidArgument = 1,
    Config = 2,
    Network = 3,
    Data = 4,
    Internal = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DbFeature {
    Table = 0,
    Laptop = 1,
    Proxemics = 2,
}

impl From<DbFeature> for GroundTruth {
    fn from(f: DbFeature) -> Self {
        match f {
            DbFeature::Table => GroundTruth::Table,
            DbFeature::Laptop => GroundTruth::Laptop,
            DbFeature::Proxemics => GroundTruth::Proxemics,
        }
    }
}

/// A parsed robot model.
pub struct DbRobot(RobotModel);
/// A scene (table, laptop, human, obstacles).
pub struct DbScene(Scene);
/// A trained feature network.
pub struct DbNetwork(FeatureNetwork);
/// A running pub/sub hub; freeing it shuts the hub down.
pub struct DbHub(BackgroundHub);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

/// Message describing the last failure on this thread ("" if none). The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn db_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

struct Failure(DbStatus, String);

macro_rules! failure_from {
    ($($ty:ty => $f:expr),* $(,)?) => {$(
        impl From<$ty> for Failure {
            fn from(e: $ty) -> Self {
                let status: fn(&$ty) -> DbStatus = $f;
                Failure(status(&e), e.to_string())
            }
        }
    )*};
}

failure_from! {
    ModelError => |_| DbStatus::Data,
    SceneError => |e| match e { SceneError::Io { .. } => DbStatus::Config, _ => DbStatus::Data },
    KinematicsError => |_| DbStatus::InvalidArgument,
    LearningError => |e| match e {
        LearningError::DimensionMismatch { .. } | LearningError::InvalidParams(_) => DbStatus::InvalidArgument,
        _ => DbStatus::Data,
    },
    CaptureError => |e| match e { CaptureError::Io { .. } => DbStatus::Config, _ => DbStatus::Data },
    HarnessError => |e| match e {
        HarnessError::InvalidSpec(_) => DbStatus::InvalidArgument,
        HarnessError::Io { .. } => DbStatus::Config,
        _ => DbStatus::Data,
    },
    BusError => |e| match e {
        BusError::PortInUse { .. } | BusError::NotConnected | BusError::Io(_) => DbStatus::Network,
        _ => DbStatus::Data,
    },
    serde_json::Error => |_| DbStatus::InvalidArgument,
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(DbStatus::InvalidArgument, msg.into())
}

/// Run `f`, converting errors and panics into a status plus message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DbStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("internal panic: {msg}"));
            DbStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(invalid(format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid(format!("{what} is not UTF-8")))
}

unsafe fn slice<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(invalid(format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn out_slice<'a>(p: *mut f64, n: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return Err(invalid(format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts_mut(p, n))
}

unsafe fn object<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| invalid(format!("{what} is null")))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(invalid("output pointer is null"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn store_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    if out.is_null() {
        return Err(invalid("output pointer is null"));
    }
    *out = CString::new(s).map_err(|_| Failure(DbStatus::Internal, "string contains NUL".into()))?.into_raw();
    Ok(())
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Release a string returned by this library. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn db_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// ---- robot and scene ------------------------------------------------------

/// Parse URDF text. The end effector is the deepest link of the chain.
#[no_mangle]
pub unsafe extern "C" fn db_robot_from_urdf(urdf: *const c_char, out: *mut *mut DbRobot) -> DbStatus {
    guard(|| {
        let model = demobench::parse_urdf(text(urdf, "urdf")?)?;
        store(out, DbRobot(model))
    })
}

/// Load a scene file and the robot it references (bundled descriptions are
/// used when the referenced file is absent).
#[no_mangle]
pub unsafe extern "C" fn db_scene_load(path: *const c_char, scene: *mut *mut DbScene, robot: *mut *mut DbRobot) -> DbStatus {
    guard(|| {
        if scene.is_null() || robot.is_null() {
            return Err(invalid("output pointer is null"));
        }
        let (s, r) = scene::load_scene_and_robot(std::path::Path::new(text(path, "path")?))?;
        store(scene, DbScene(s))?;
        store(robot, DbRobot(r))
    })
}

/// The bundled UR5e table/laptop/human scene and its robot.
#[no_mangle]
pub unsafe extern "C" fn db_experiment_setup(scene: *mut *mut DbScene, robot: *mut *mut DbRobot) -> DbStatus {
    guard(|| {
        if scene.is_null() || robot.is_null() {
            return Err(invalid("output pointer is null"));
        }
        let (s, r) = scene::experiment_setup();
        store(scene, DbScene(s))?;
        store(robot, DbRobot(r))
    })
}

#[no_mangle]
pub unsafe extern "C" fn db_robot_free(robot: *mut DbRobot) {
    free(robot)
}

#[no_mangle]
pub unsafe extern "C" fn db_scene_free(scene: *mut DbScene) {
    free(scene)
}

/// Number of actuated joints (0 for a null robot).
#[no_mangle]
pub unsafe extern "C" fn db_robot_dof(robot: *const DbRobot) -> usize {
    robot.as_ref().map_or(0, |r| r.0.dof())
}

// ---- kinematics -----------------------------------------------------------

/// End-effector position in the robot base frame, written to `out[0..3]`.
#[no_mangle]
pub unsafe extern "C" fn db_forward_kinematics(robot: *const DbRobot, q: *const f64, n: usize, out: *mut f64) -> DbStatus {
    guard(|| {
        let p = kinematics::ee_position(&object(robot, "robot")?.0, slice(q, n, "q")?)?;
        out_slice(out, 3, "out")?.copy_from_slice(p.as_slice());
        Ok(())
    })
}

/// 3 × n position Jacobian, row-major, written to `out[0..3n]`.
#[no_mangle]
pub unsafe extern "C" fn db_position_jacobian(robot: *const DbRobot, q: *const f64, n: usize, out: *mut f64) -> DbStatus {
    guard(|| {
        let jac = kinematics::position_jacobian(&object(robot, "robot")?.0, slice(q, n, "q")?)?;
        let out = out_slice(out, 3 * n, "out")?;
        for r in 0..3 {
            for c in 0..n {
                out[r * n + c] = jac[(r, c)];
            }
        }
        Ok(())
    })
}

/// Damped least-squares IK towards a base-frame `target[3]` from `seed[n]`
/// with default parameters. The solution goes to `q_out[n]`; `converged`
/// and `residual` (metres) may be null.
#[no_mangle]
pub unsafe extern "C" fn db_solve_ik(
    robot: *const DbRobot,
    target: *const f64,
    seed: *const f64,
    n: usize,
    q_out: *mut f64,
    converged: *mut bool,
    residual: *mut f64,
) -> DbStatus {
    guard(|| {
        let t = slice(target, 3, "target")?;
        let sol = kinematics::solve_ik(&object(robot, "robot")?.0, &Vector3::new(t[0], t[1], t[2]), slice(seed, n, "seed")?, &IkParams::default())?;
        out_slice(q_out, n, "q_out")?.copy_from_slice(&sol.q);
        if !converged.is_null() {
            *converged = sol.converged;
        }
        if !residual.is_null() {
            *residual = sol.residual;
        }
        Ok(())
    })
}

// ---- features and networks ------------------------------------------------

/// Ground-truth feature value at a world-frame end-effector position.
#[no_mangle]
pub unsafe extern "C" fn db_ground_truth(scene: *const DbScene, feature: DbFeature, ee: *const f64, out: *mut f64) -> DbStatus {
    guard(|| {
        let p = slice(ee, 3, "ee")?;
        let v = GroundTruth::from(feature).value(&object(scene, "scene")?.0, &Vector3::new(p[0], p[1], p[2]));
        *out_slice(out, 1, "out")?.first_mut().expect("len 1") = v;
        Ok(())
    })
}

/// Dimension of the state encoding for `robot`.
#[no_mangle]
pub unsafe extern "C" fn db_encoding_dim(robot: *const DbRobot) -> usize {
    robot.as_ref().map_or(0, |r| learning::encoding_dim(&r.0))
}

/// State encoding of `q[n]`, written to `out[0..db_encoding_dim(robot)]`.
#[no_mangle]
pub unsafe extern "C" fn db_encode_state(robot: *const DbRobot, scene: *const DbScene, q: *const f64, n: usize, out: *mut f64) -> DbStatus {
    guard(|| {
        let model = &object(robot, "robot")?.0;
        let s = learning::encode_state(model, &object(scene, "scene")?.0, slice(q, n, "q")?)?;
        out_slice(out, s.len(), "out")?.copy_from_slice(&s);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn db_network_from_json(json: *const c_char, out: *mut *mut DbNetwork) -> DbStatus {
    guard(|| store(out, DbNetwork(FeatureNetwork::from_json(text(json, "json")?)?)))
}

#[no_mangle]
pub unsafe extern "C" fn db_network_to_json(net: *const DbNetwork, out: *mut *mut c_char) -> DbStatus {
    guard(|| store_string(out, object(net, "network")?.0.to_json()))
}

#[no_mangle]
pub unsafe extern "C" fn db_network_free(net: *mut DbNetwork) {
    free(net)
}

/// Feature value in (0, 1) of an encoded state `s[n]`.
#[no_mangle]
pub unsafe extern "C" fn db_network_value(net: *const DbNetwork, s: *const f64, n: usize, out: *mut f64) -> DbStatus {
    guard(|| {
        let v = object(net, "network")?.0.value(slice(s, n, "s")?)?;
        *out_slice(out, 1, "out")?.first_mut().expect("len 1") = v;
        Ok(())
    })
}

/// Train a feature network from `count` demonstration files.
/// `params_json` (TrainParams, missing fields defaulted) may be null.
#[no_mangle]
pub unsafe extern "C" fn db_train_feature(
    robot: *const DbRobot,
    scene: *const DbScene,
    trace_paths: *const *const c_char,
    count: usize,
    params_json: *const c_char,
    out: *mut *mut DbNetwork,
) -> DbStatus {
    guard(|| {
        if count > 0 && trace_paths.is_null() {
            return Err(invalid("trace_paths is null"));
        }
        let paths = if count == 0 { &[][..] } else { std::slice::from_raw_parts(trace_paths, count) };
        let traces = paths
            .iter()
            .map(|&p| Ok(load_record(std::path::Path::new(text(p, "trace path")?))?))
            .collect::<Result<Vec<_>, Failure>>()?;
        let params: TrainParams = if params_json.is_null() {
            TrainParams::default()
        } else {
            serde_json::from_str(text(params_json, "params_json")?)?
        };
        let net = learning::train_feature(&traces, &object(robot, "robot")?.0, &object(scene, "scene")?.0, &params)?;
        store(out, DbNetwork(net))
    })
}

/// Run a full experiment described by `spec_json` (ExperimentSpec, missing
/// fields defaulted) and return the result as JSON.
#[no_mangle]
pub unsafe extern "C" fn db_run_experiment(robot: *const DbRobot, scene: *const DbScene, spec_json: *const c_char, out: *mut *mut c_char) -> DbStatus {
    guard(|| {
        let spec: ExperimentSpec = serde_json::from_str(text(spec_json, "spec_json")?)?;
        let result = harness::run_experiment(&spec, &object(robot, "robot")?.0, &object(scene, "scene")?.0)?;
        store_string(out, serde_json::to_string(&result).map_err(|e| Failure(DbStatus::Internal, e.to_string()))?)
    })
}

// ---- bus ------------------------------------------------------------------

/// Start a hub on 127.0.0.1. `tcp_port` 0 picks a free port; `ws_port` 0
/// picks one too, negative disables the websocket listener.
#[no_mangle]
pub unsafe extern "C" fn db_hub_start(tcp_port: u16, ws_port: i32, out: *mut *mut DbHub) -> DbStatus {
    guard(|| {
        let ws_port = match ws_port {
            p if p < 0 => None,
            p => Some(u16::try_from(p).map_err(|_| invalid("ws_port out of range"))?),
        };
        let hub = BackgroundHub::start(ServeConfig {
            port: tcp_port,
            ws_port,
            ..ServeConfig::default()
        })?;
        store(out, DbHub(hub))
    })
}

/// Port the hub's TCP listener is bound to (0 for a null hub).
#[no_mangle]
pub unsafe extern "C" fn db_hub_tcp_port(hub: *const DbHub) -> u16 {
    hub.as_ref().map_or(0, |h| h.0.tcp_addr().port())
}

/// Port of the websocket listener, 0 when disabled or for a null hub.
#[no_mangle]
pub unsafe extern "C" fn db_hub_ws_port(hub: *const DbHub) -> u16 {
    hub.as_ref().and_then(|h| h.0.ws_addr()).map_or(0, |a| a.port())
}

/// Stop the hub and close its connections.
#[no_mangle]
pub unsafe extern "C" fn db_hub_free(hub: *mut DbHub) {
    free(hub)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    fn last_error() -> String {
        unsafe { CStr::from_ptr(db_last_error()) }.to_string_lossy().into_owned()
    }

    #[test]
    fn null_arguments_are_rejected_with_a_message() {
        let mut robot = ptr::null_mut();
        assert_eq!(unsafe { db_robot_from_urdf(ptr::null(), &mut robot) }, DbStatus::InvalidArgument);
        assert!(robot.is_null());
        assert!(last_error().contains("urdf is null"));
    }

    #[test]
    fn bad_urdf_is_a_data_error() {
        let mut robot = ptr::null_mut();
        let urdf = CString::new("<robot name='x'>").unwrap();
        assert_eq!(unsafe { db_robot_from_urdf(urdf.as_ptr(), &mut robot) }, DbStatus::Data);
        assert!(!last_error().is_empty());
    }

    #[test]
    fn fk_matches_the_library() {
        let (mut scene, mut robot) = (ptr::null_mut(), ptr::null_mut());
        unsafe {
            assert_eq!(db_experiment_setup(&mut scene, &mut robot), DbStatus::Ok);
            let n = db_robot_dof(robot);
            assert_eq!(n, 6);
            let q = [0.1, -1.2, 1.3, -0.4, 0.5, 0.6];
            let mut p = [0.0; 3];
            assert_eq!(db_forward_kinematics(robot, q.as_ptr(), n, p.as_mut_ptr()), DbStatus::Ok);
            let want = kinematics::ee_position(&(*robot).0, &q).unwrap();
            assert_eq!(p, [want.x, want.y, want.z]);
            assert_eq!(db_forward_kinematics(robot, q.as_ptr(), 5, p.as_mut_ptr()), DbStatus::InvalidArgument);
            db_robot_free(robot);
            db_scene_free(scene);
        }
    }

    #[test]
    fn panics_do_not_cross_the_boundary() {
        assert_eq!(guard(|| panic!("boom")), DbStatus::Panic);
        assert!(last_error().contains("boom"));
    }
}
