//! Acceptance suite: one line per criterion, `PASS`/`FAIL`, with the measured
//! statistic next to its threshold. Run with
//! `cargo test -p demobench-core --test acceptance -- --nocapture`.
//!
//! Criteria run one after another inside a single test so the runtime
//! budgets are not distorted by other tests competing for the CPU.

mod common;

use common::{random_configuration, FkOracle};
use demobench::bus::{self, BackgroundHub, BusClient, Incoming, ServeConfig};
use demobench::capture::{estimate_torques, Trajectory, TrajectoryQuery};
use demobench::harness::{run_experiment, ExperimentSpec};
use demobench::kinematics::{ee_position, position_jacobian, solve_ik, IkParams};
use demobench::learning::{
    initial_network, loss_and_grad, plan_trajectory_traced, straight_line, Feature, PlanParams, RewardModel, TrainParams, TrainingSet,
};
use demobench::scene::{experiment_setup, planar_setup, GroundTruth};
use demobench::{assets, RobotModel};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::{Duration, Instant};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

struct Suite {
    failures: Vec<String>,
    reported: Vec<String>,
}

impl Suite {
    /// Run one criterion against its time budget. Failing `gating` criteria
    /// fail the test; the others are reported only.
    fn check(&mut self, name: &str, budget: Option<Duration>, gating: bool, f: impl FnOnce() -> Outcome) {
        let t = Instant::now();
        let mut o = f();
        let took = t.elapsed();
        if let Some(b) = budget {
            if took > b {
                o.pass = false;
                o.detail.push_str(&format!("; over the {:.0} s budget", b.as_secs_f64()));
            }
        }
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("{verdict} {name}: {} [{:.1} s]", o.detail, took.as_secs_f64());
        if !o.pass {
            if gating {
                self.failures.push(name.to_owned());
            } else {
                self.reported.push(name.to_owned());
            }
        }
    }
}

fn ur5e() -> RobotModel {
    experiment_setup().1
}

fn fk_oracle_equivalence() -> Outcome {
    let model = ur5e();
    let oracle = FkOracle::new(assets::UR5E_URDF, &model.links[model.ee_link].name);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let q = random_configuration(&model, &mut rng);
        let p = ee_position(&model, &q).unwrap();
        let o = oracle.ee_for(&model, &q);
        worst = worst.max((p - Vector3::from(o)).norm());
    }
    outcome(worst < 1e-9, format!("1000 configurations, max position error {worst:.2e} m (< 1e-9)"))
}

fn jacobian_check() -> Outcome {
    let model = ur5e();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let q = random_configuration(&model, &mut rng);
        let jac = position_jacobian(&model, &q).unwrap();
        for j in 0..model.dof() {
            let (mut up, mut dn) = (q.clone(), q.clone());
            up[j] += h;
            dn[j] -= h;
            let fd = (ee_position(&model, &up).unwrap() - ee_position(&model, &dn).unwrap()) / (2.0 * h);
            for r in 0..3 {
                worst = worst.max((jac[(r, j)] - fd[r]).abs());
            }
        }
    }
    outcome(worst < 1e-5, format!("100 configurations, max entry error {worst:.2e} (< 1e-5)"))
}

fn ik_success() -> Outcome {
    let (scene, model) = experiment_setup();
    let home = scene.home_configuration(&model);
    let params = IkParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 500;
    let mut ok = 0;
    for _ in 0..n {
        let target = ee_position(&model, &random_configuration(&model, &mut rng)).unwrap();
        let sol = solve_ik(&model, &target, &home, &params).unwrap();
        if sol.residual < 1e-3 && sol.iterations <= 200 {
            ok += 1;
        }
    }
    let rate = ok as f64 / n as f64;
    outcome(rate >= 0.95, format!("{ok}/{n} targets reached within 1e-3 m in ≤ 200 iterations ({:.1}%, need ≥ 95%)", 100.0 * rate))
}

fn torque_analytic() -> Outcome {
    let n = 21;
    let profile = |f: &dyn Fn(f64) -> f64| Trajectory::uniform((0..n).map(|k| vec![f(k as f64 / (n - 1) as f64)]).collect()).unwrap();
    // Unit raw duration, so normalized time is physical time.
    let quad = estimate_torques(&profile(&|t| 0.5 * 3.0 * t * t), &[2.0], 1.0).unwrap();
    let quad_err = quad[1..n - 1].iter().map(|tau| (tau[0] - 6.0).abs()).fold(0.0, f64::max);
    let flat = [profile(&|_| 0.7), profile(&|t| 0.2 + 0.5 * t)]
        .iter()
        .flat_map(|p| estimate_torques(p, &[2.0], 1.0).unwrap())
        .map(|tau| tau[0].abs())
        .fold(0.0, f64::max);
    outcome(
        quad_err < 1e-6 && flat < 1e-6,
        format!("quadratic interior |τ − 6| ≤ {quad_err:.1e}; constant/linear |τ| ≤ {flat:.1e} (tolerance 1e-6 N·m)"),
    )
}

fn experiment_replication(feature: GroundTruth) -> Outcome {
    let (scene, model) = experiment_setup();
    let spec = ExperimentSpec::for_feature(feature);
    let r = run_experiment(&spec, &model, &scene).unwrap();
    let wins = r.baseline_wins();
    outcome(
        r.mean < 0.01 && wins >= 9,
        format!(
            "{}: mean normalized MSE {:.4} ± {:.4} (< 0.01), untrained baseline worse in {wins}/{} trials (≥ 9)",
            feature.name(),
            r.mean,
            r.std,
            r.trial_mse.len()
        ),
    )
}

fn learning_gradients() -> Outcome {
    let (scene, model) = planar_setup();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let traces: Vec<_> = (0..5)
        .map(|_| {
            let (a, b) = (rng.random_range(0.5..1.0), rng.random_range(-1.0..-0.5));
            let q1 = rng.random_range(-1.0..1.0);
            let qs: Vec<Vec<f64>> = (0..12).map(|k| vec![a + (b - a) * k as f64 / 11.0, q1 + 0.1 * k as f64]).collect();
            common::feature_trace(&model, &scene, qs)
        })
        .collect();
    let params = TrainParams::default();
    let set = TrainingSet::build(&traces, &model, &scene, &params).unwrap();
    let net = initial_network(&traces, &model, &scene, &params).unwrap();
    let (_, grad) = loss_and_grad(&net, &set, &params);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for k in 0..net.params().len() {
        let mut up = net.clone();
        up.params_mut()[k] += h;
        let mut dn = net.clone();
        dn.params_mut()[k] -= h;
        let fd = (loss_and_grad(&up, &set, &params).0 - loss_and_grad(&dn, &set, &params).0) / (2.0 * h);
        worst = worst.max((fd - grad[k]).abs() / fd.abs().max(grad[k].abs()).max(1e-3));
    }
    outcome(worst < 1e-4, format!("{} parameters, max relative error {worst:.2e} (< 1e-4)", net.params().len()))
}

fn planner() -> Outcome {
    let (scene, model) = experiment_setup();
    let home = scene.home_configuration(&model);
    // Sweep across the laptop from one side to the other.
    let reach = |x: f64, y: f64| {
        let target = scene.to_base_frame(&Vector3::new(x, y, 0.12));
        solve_ik(&model, &target, &home, &IkParams::default()).unwrap().q.0
    };
    let query = TrajectoryQuery {
        q_start: reach(0.4, -0.3),
        q_goal: reach(0.4, 0.3),
    };
    let params = PlanParams::default();
    let clearance = |path: &[Vec<f64>]| {
        path.iter()
            .map(|q| {
                let ee = scene.ee_world(&model, q).unwrap();
                (ee.x - scene.laptop_center.x).hypot(ee.y - scene.laptop_center.y)
            })
            .fold(f64::INFINITY, f64::min)
    };
    let line = straight_line(&query.q_start, &query.q_goal, params.n_waypoints);

    let zero = plan_trajectory_traced(&model, &scene, &RewardModel::empty(), &query, &params).unwrap();
    let straight = zero.trajectory.configurations().zip(&line).all(|(a, b)| a == b.as_slice());

    let penalty = RewardModel::new(vec![Feature::GroundTruth { feature: GroundTruth::Laptop }], vec![-5.0]).unwrap();
    let plan = plan_trajectory_traced(&model, &scene, &penalty, &query, &params).unwrap();
    let planned: Vec<Vec<f64>> = plan.trajectory.configurations().map(<[f64]>::to_vec).collect();
    let (before, after) = (clearance(&line), clearance(&planned));
    let endpoints = plan
        .iterates
        .iter()
        .all(|it| it.first() == Some(&query.q_start) && it.last() == Some(&query.q_goal));
    let monotone = plan.cost_history.windows(2).all(|w| w[1] <= w[0]);
    outcome(
        straight && after > before && endpoints && monotone,
        format!(
            "zero reward straight line: {straight}; laptop clearance {before:.3} → {after:.3} m; endpoints fixed over {} iterates: {endpoints}; cost non-increasing: {monotone}",
            plan.iterates.len()
        ),
    )
}

fn bus_protocol() -> Outcome {
    let hub = BackgroundHub::start(ServeConfig {
        port: 0,
        ws_port: None,
        // The stress burst is published without pause and must fit in the queue.
        queue_capacity: 16_384,
        ..ServeConfig::default()
    })
    .unwrap();
    let wait = Duration::from_secs(10);
    let connect = || BusClient::connect(hub.tcp_addr()).unwrap();
    let mut problems = Vec::new();

    // Ordering and fan-out.
    let (mut a, mut b, mut p) = (connect(), connect(), connect());
    for c in [&mut a, &mut b] {
        c.subscribe("/order").unwrap();
        c.barrier(wait).unwrap();
    }
    for k in 0..200 {
        p.publish_raw("/order", &k.to_string()).unwrap();
    }
    for (name, c) in [("a", &mut a), ("b", &mut b)] {
        let got: Vec<String> = (0..200).filter_map(|_| c.recv_on("/order", wait).unwrap()).collect();
        if got != (0..200).map(|k| k.to_string()).collect::<Vec<_>>() {
            problems.push(format!("subscriber {name} saw {} of 200 in order", got.len()));
        }
    }

    // Latched robot description.
    let (scene, _) = planar_setup();
    let description = serde_json::json!({
        "urdf": assets::PLANAR2R_URDF,
        "scene": serde_json::from_str::<serde_json::Value>(&scene.to_json()).unwrap(),
    })
    .to_string();
    p.publish_raw(bus::ROBOT_DESCRIPTION, &description).unwrap();
    p.barrier(wait).unwrap();
    let mut late = connect();
    late.subscribe(bus::ROBOT_DESCRIPTION).unwrap();
    if late.recv_on(bus::ROBOT_DESCRIPTION, wait).unwrap().as_deref() != Some(description.as_str()) {
        problems.push("late subscriber did not receive the latched description".into());
    }

    // Schema rejection goes back to the sender only.
    a.subscribe(bus::JOINT_STATES).unwrap();
    a.barrier(wait).unwrap();
    p.publish_raw(bus::JOINT_STATES, r#"{"q":"not a list","stamp":0}"#).unwrap();
    let rejected = loop {
        match p.recv_timeout(wait).unwrap() {
            Some(Incoming::Error { kind, topic, .. }) => break kind == "schema_violation" && topic == bus::JOINT_STATES,
            Some(_) => continue,
            None => break false,
        }
    };
    if !rejected {
        problems.push("no schema_violation error for the sender".into());
    }
    if a.recv_on(bus::JOINT_STATES, Duration::from_millis(300)).unwrap().is_some() {
        problems.push("invalid message was delivered".into());
    }

    // Stress: 10⁴ messages, none lost.
    let mut s = connect();
    s.subscribe("/stress").unwrap();
    s.barrier(wait).unwrap();
    let n = 10_000;
    let mut producer = connect();
    let sender = std::thread::spawn(move || {
        for k in 0..n {
            producer.publish_raw("/stress", &k.to_string()).unwrap();
        }
        producer
    });
    let mut received = 0;
    let mut in_order = true;
    while received < n {
        match s.recv_on("/stress", wait).unwrap() {
            Some(payload) => {
                in_order &= payload == received.to_string();
                received += 1;
            }
            None => break,
        }
    }
    drop(sender.join().unwrap());
    if received != n || !in_order || hub.hub().dropped() != 0 {
        problems.push(format!("stress delivered {received}/{n}, in order {in_order}, dropped {}", hub.hub().dropped()));
    }

    let ok = problems.is_empty();
    outcome(
        ok,
        if ok {
            "ordering, fan-out, latched /robot_description, schema rejection, 10000-message stress with zero loss".to_string()
        } else {
            problems.join("; ")
        },
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_demobench"))
            .args(["experiment", "--feature", "table", "--seed", "0", "--trials", "3", "--samples", "2000", "--out"])
            .arg(&out)
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        std::fs::read(out).unwrap()
    };
    let (a, b) = (run("a.json"), run("b.json"));
    outcome(a == b && !a.is_empty(), format!("two runs, {} bytes each, identical: {}", a.len(), a == b))
}

#[test]
fn acceptance_suite() {
    let mut suite = Suite {
        failures: Vec::new(),
        reported: Vec::new(),
    };
    let s = Duration::from_secs;
    suite.check("fk_oracle_equivalence", Some(s(5)), true, fk_oracle_equivalence);
    suite.check("jacobian_check", Some(s(5)), true, jacobian_check);
    suite.check("ik_success", Some(s(30)), true, ik_success);
    suite.check("torque_analytic", Some(s(1)), true, torque_analytic);
    let t = Instant::now();
    for feature in GroundTruth::ALL {
        let gating = feature == GroundTruth::Table;
        suite.check(&format!("experiment_replication[{}]", feature.name()), None, gating, || experiment_replication(feature));
    }
    let total = t.elapsed();
    suite.check("experiment_runtime", Some(s(600)), true, || {
        outcome(true, format!("three features in {:.0} s (< 600 s)", total.as_secs_f64()))
    });
    suite.check("learning_gradients", Some(s(10)), true, learning_gradients);
    suite.check("planner", Some(s(30)), true, planner);
    suite.check("bus_protocol", Some(s(30)), true, bus_protocol);
    suite.check("determinism", None, true, determinism);
    if !suite.reported.is_empty() {
        println!("reported, not gating: {}", suite.reported.join(", "));
    }
    assert!(suite.failures.is_empty(), "failed: {}", suite.failures.join(", "));
}
