//! The `demobench` command line: serve the bus, run experiments, generate
//! and record demonstrations, train, evaluate, plan and export fields.

use crate::bus::{self, BackgroundHub, BusClient, BusError, ServeConfig};
use crate::capture::{load_record, save_record, CaptureError, DemoType, DemonstrationRecord, RecorderMeta, TrajectoryQuery};
use crate::harness::{self, ExperimentSpec, FieldSource, GridSpec, HarnessError, OracleParams};
use crate::learning::{self, FeatureNetwork, LearningError, PlanParams, RewardModel, TrainParams};
use crate::model::RobotModel;
use crate::scene::{self, GroundTruth, Scene, SceneError};
use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::time::Duration;

#[derive(Debug, Parser)]
#[command(name = "demobench", version, about = "Demonstration capture and feature-trace reward learning")]
pub struct Cli {
    /// Log filter, e.g. `info` or `demobench=debug`.
    #[arg(long, global = true, default_value = "warn")]
    pub log: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the pub/sub hub with playback and recorder services.
    Serve(ServeArgs),
    /// Repeated train/evaluate trials for one ground-truth feature.
    Experiment(ExperimentArgs),
    /// Write scripted feature traces as demonstration files.
    Simulate(SimulateArgs),
    /// Record a demonstration from a running hub.
    Record(RecordArgs),
    /// Train a feature network from feature-trace files.
    Learn(LearnArgs),
    /// Normalized MSE of a trained network against a ground truth.
    Eval(EvalArgs),
    /// Plan a reward-optimal trajectory between two configurations.
    Plan(PlanArgs),
    /// Export a feature over an end-effector grid as CSV.
    Field(FieldArgs),
}

/// Robot and scene selection shared by most subcommands.
#[derive(Debug, Clone, Args)]
pub struct SceneArgs {
    /// Scene JSON; defaults to the bundled UR5e table/laptop scene.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    /// URDF overriding the robot the scene names.
    #[arg(long)]
    pub urdf: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    #[arg(long, default_value_t = 9870)]
    pub port: u16,
    #[arg(long, default_value_t = 9871)]
    pub ws_port: u16,
    /// Directory of UI assets served over HTTP on the websocket port.
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: std::net::IpAddr,
    /// Seconds over which a planned trajectory is replayed.
    #[arg(long, default_value_t = bus::DEFAULT_PLAYBACK_DURATION)]
    pub playback_duration: f64,
    /// Default recorder sample interval, seconds.
    #[arg(long, default_value_t = 0.05)]
    pub sample_interval: f64,
    /// Points in the published obstacle cloud.
    #[arg(long, default_value_t = 2000)]
    pub cloud_points: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    #[arg(long)]
    pub feature: GroundTruth,
    /// Use recorded traces (`*.jsonl`) instead of the scripted demonstrator.
    #[arg(long)]
    pub traces_dir: Option<PathBuf>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub per_trial: Option<usize>,
    #[arg(long)]
    pub pool: Option<usize>,
    /// Evaluation configurations per trial.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Full ExperimentSpec JSON; flags given explicitly override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Result JSON path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    #[arg(long)]
    pub feature: GroundTruth,
    #[arg(long, default_value_t = 20)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Direction noise of the scripted demonstrator, degrees.
    #[arg(long)]
    pub noise_deg: Option<f64>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct RecordArgs {
    /// Hub address (TCP transport).
    #[arg(long, default_value = "127.0.0.1:9870")]
    pub connect: String,
    #[arg(long, default_value = "cli")]
    pub session: String,
    #[arg(long, default_value = "full_task")]
    pub demo_type: DemoType,
    #[arg(long)]
    pub request_id: Option<String>,
    #[arg(long)]
    pub sample_interval: Option<f64>,
    /// Seconds to record before stopping.
    #[arg(long)]
    pub duration: f64,
    #[arg(long)]
    pub out: PathBuf,
    /// Accepted for uniformity; recording itself is not random.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct LearnArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    /// Feature-trace files, or directories of `*.jsonl` files.
    #[arg(long, required = true, num_args = 1..)]
    pub traces: Vec<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Output network JSON.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub feature: GroundTruth,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    /// RewardModel JSON; omitted means the zero reward.
    #[arg(long)]
    pub reward: Option<PathBuf>,
    /// Comma-separated start configuration (rad).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub start: Vec<f64>,
    /// Comma-separated goal configuration (rad).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub goal: Vec<f64>,
    #[arg(long)]
    pub waypoints: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Accepted for uniformity; planning is deterministic.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output trajectory JSON; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn triple<T: std::str::FromStr>(s: &str) -> Result<[T; 3], String> {
    let parts: Vec<T> = s
        .split(',')
        .map(|p| p.trim().parse().map_err(|_| format!("`{p}` is not a number")))
        .collect::<Result<_, _>>()?;
    <[T; 3]>::try_from(parts).map_err(|p| format!("expected x,y,z, got {} values", p.len()))
}

#[derive(Debug, Args)]
pub struct FieldArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    /// Ground-truth feature to export (or the one a --model approximates).
    #[arg(long, conflicts_with = "model")]
    pub feature: Option<GroundTruth>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Grid corner x,y,z (m, world frame).
    #[arg(long, value_parser = triple::<f64>, allow_negative_numbers = true)]
    pub min: [f64; 3],
    #[arg(long, value_parser = triple::<f64>, allow_negative_numbers = true)]
    pub max: [f64; 3],
    /// Cells along x,y,z.
    #[arg(long, value_parser = triple::<usize>, default_value = "10,10,1")]
    pub resolution: [usize; 3],
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Failure classes mapped onto exit codes.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Network(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Network(_) => 3,
            CliError::Data(_) => 4,
            CliError::Internal(_) => 5,
        }
    }
}

impl From<SceneError> for CliError {
    fn from(e: SceneError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<BusError> for CliError {
    fn from(e: BusError) -> Self {
        match e {
            BusError::SchemaViolation { .. } | BusError::InvalidEnvelope(_) => CliError::Data(e.to_string()),
            _ => CliError::Network(e.to_string()),
        }
    }
}

impl From<CaptureError> for CliError {
    fn from(e: CaptureError) -> Self {
        match e {
            CaptureError::Io { .. } => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<LearningError> for CliError {
    fn from(e: LearningError) -> Self {
        match e {
            LearningError::InvalidParams(_) | LearningError::InvalidQuery(_) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::InvalidSpec(_) => CliError::Config(e.to_string()),
            HarnessError::Capture(c) => c.into(),
            HarnessError::Learning(l) => l.into(),
            HarnessError::Io { .. } => CliError::Config(e.to_string()),
            HarnessError::Kinematics(_) => CliError::Internal(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Config(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

impl SceneArgs {
    pub fn load(&self) -> Result<(Scene, RobotModel), CliError> {
        let scene = match &self.scene {
            Some(path) => Scene::from_json(&read_text(path)?)?,
            None => scene::experiment_setup().0,
        };
        let model = match (&self.urdf, &self.scene) {
            (Some(urdf), _) => scene.robot_from_urdf(&read_text(urdf)?)?,
            (None, Some(path)) => scene.load_robot(path.parent().unwrap_or(Path::new(".")))?,
            (None, None) => scene::experiment_setup().1,
        };
        Ok((scene, model))
    }

    /// URDF text for the robot description broadcast.
    fn urdf_text(&self, scene: &Scene) -> Result<String, CliError> {
        if let Some(urdf) = &self.urdf {
            return read_text(urdf);
        }
        let Some(robot) = scene.robot.as_deref() else {
            return Ok(crate::assets::UR5E_URDF.to_owned());
        };
        let base = self.scene.as_deref().and_then(Path::parent).unwrap_or(Path::new("."));
        match std::fs::read_to_string(base.join(robot)) {
            Ok(t) => Ok(t),
            Err(e) => Path::new(robot)
                .file_name()
                .and_then(|n| crate::assets::bundled(n.to_str()?))
                .map(str::to_owned)
                .ok_or_else(|| CliError::Config(format!("{}: {e}", base.join(robot).display()))),
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Serve(a) => serve(a),
        Command::Experiment(a) => experiment(a),
        Command::Simulate(a) => simulate(a),
        Command::Record(a) => record(a),
        Command::Learn(a) => learn(a),
        Command::Eval(a) => eval(a),
        Command::Plan(a) => plan(a),
        Command::Field(a) => field(a),
    }
}

/// Parse the process arguments, run, and return the exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let _ = env_logger::Builder::new().parse_filters(&cli.log).try_init();
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn serve(a: ServeArgs) -> Result<(), CliError> {
    let (scene, model) = a.scene.load()?;
    let urdf = a.scene.urdf_text(&scene)?;
    if !(a.playback_duration > 0.0) || !(a.sample_interval > 0.0) {
        return Err(CliError::Config("--playback-duration and --sample-interval must be > 0".into()));
    }
    let config = ServeConfig {
        host: a.host,
        port: a.port,
        ws_port: Some(a.ws_port),
        static_dir: a.static_dir.clone(),
        ..ServeConfig::default()
    };
    if let Some(dir) = &config.static_dir {
        if !dir.is_dir() {
            return Err(CliError::Config(format!("{}: not a directory", dir.display())));
        }
    }
    let meta = RecorderMeta {
        demo_type: DemoType::FullTask,
        robot_name: model.name.clone(),
        scene_id: scene.id.clone(),
        joint_names: model.actuated_names(),
        inertias: model.actuated_inertias(),
        started_at: 0.0,
        request_id: None,
    };
    let hub = BackgroundHub::start_with(config, |hub| {
        bus::spawn_playback(hub, a.playback_duration);
        bus::spawn_recorder(hub, meta, a.sample_interval);
    })?;
    let conn = hub.hub().connect();
    let scene_value: serde_json::Value = serde_json::from_str(&scene.to_json()).map_err(|e| CliError::Internal(e.to_string()))?;
    conn.publish(bus::ROBOT_DESCRIPTION, &serde_json::json!({ "urdf": urdf, "scene": scene_value }))?;
    let cloud = scene.sample_point_cloud(a.cloud_points, a.seed)?;
    conn.publish(
        bus::POINT_CLOUD,
        &bus::schema::PointCloudMsg {
            points: cloud.points.iter().map(|p| [p.x, p.y, p.z]).collect(),
            seed: a.seed,
            scene_id: scene.id.clone(),
        },
    )?;
    println!(
        "serving {} in {} on tcp {}{}",
        model.name,
        scene.id,
        hub.tcp_addr(),
        hub.ws_addr().map(|w| format!(", ws/http {w}")).unwrap_or_default()
    );
    hub.runtime()
        .block_on(tokio::signal::ctrl_c())
        .map_err(|e| CliError::Internal(e.to_string()))?;
    Ok(())
}

fn experiment(a: ExperimentArgs) -> Result<(), CliError> {
    let (scene, model) = a.scene.load()?;
    let mut spec = match &a.config {
        Some(path) => serde_json::from_str(&read_text(path)?).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?,
        None => ExperimentSpec::default(),
    };
    spec.feature = a.feature;
    spec.seed = a.seed;
    if let Some(v) = a.trials {
        spec.trials = v;
    }
    if let Some(v) = a.per_trial {
        spec.traces_per_trial = v;
    }
    if let Some(v) = a.pool {
        spec.trace_pool_size = v;
    }
    if let Some(v) = a.samples {
        spec.eval_samples = v;
    }
    if a.traces_dir.is_some() {
        spec.traces_dir = a.traces_dir.clone();
    }
    if let Some(dir) = &spec.traces_dir {
        if !dir.is_dir() {
            return Err(CliError::Config(format!("{}: not a directory", dir.display())));
        }
        // A directory pool is as large as the directory.
        spec.trace_pool_size = spec.trace_pool_size.max(spec.traces_per_trial);
    }
    let result = harness::run_experiment(&spec, &model, &scene)?;
    let json = serde_json::to_string_pretty(&result).map_err(|e| CliError::Internal(e.to_string()))?;
    println!(
        "{}: mse {:.5} ± {:.5} over {} trials (untrained baseline worse in {}/{})",
        result.feature.name(),
        result.mean,
        result.std,
        result.trial_mse.len(),
        result.baseline_wins(),
        result.trial_mse.len()
    );
    match &a.out {
        Some(path) => write_text(path, &(json + "\n")),
        None => {
            println!("{json}");
            Ok(())
        }
    }
}

fn simulate(a: SimulateArgs) -> Result<(), CliError> {
    let (scene, model) = a.scene.load()?;
    let mut params = OracleParams::default();
    if let Some(noise) = a.noise_deg {
        params.noise_deg = noise;
    }
    std::fs::create_dir_all(&a.out_dir).map_err(|e| CliError::Config(format!("{}: {e}", a.out_dir.display())))?;
    for i in 0..a.count {
        let seed = a.seed.wrapping_mul(1_000_003).wrapping_add(i as u64);
        let record = harness::generate_oracle_trace_with(a.feature, &model, &scene, seed, &params)?;
        let path = a.out_dir.join(format!("{}_{i:03}.jsonl", a.feature.name()));
        save_record(&record, &path)?;
    }
    println!("wrote {} {} traces to {}", a.count, a.feature.name(), a.out_dir.display());
    Ok(())
}

fn record(a: RecordArgs) -> Result<(), CliError> {
    if !(a.duration > 0.0) || !a.duration.is_finite() {
        return Err(CliError::Config("--duration must be > 0".into()));
    }
    let mut client = BusClient::connect(a.connect.as_str()).map_err(|e| CliError::Network(format!("{}: {e}", a.connect)))?;
    let wait = Duration::from_secs(10);
    client.subscribe(bus::DEMONSTRATION)?;
    client.subscribe(bus::RECORDER_STATUS)?;
    client.barrier(wait)?;
    let start = bus::RecorderControl::Start {
        session_id: a.session.clone(),
        demo_type: a.demo_type,
        request_id: a.request_id.clone(),
        sample_interval: a.sample_interval,
    };
    client.publish(bus::RECORDER_CONTROL, &start)?;
    let status = |client: &mut BusClient| -> Result<bus::RecorderStatus, CliError> {
        let text = client
            .recv_on(bus::RECORDER_STATUS, wait)?
            .ok_or_else(|| CliError::Network("hub recorder did not answer".into()))?;
        serde_json::from_str(&text).map_err(|e| CliError::Data(e.to_string()))
    };
    let started = status(&mut client)?;
    if started.state != "recording" {
        return Err(CliError::Data(started.message.unwrap_or_else(|| "recorder refused to start".into())));
    }
    std::thread::sleep(Duration::from_secs_f64(a.duration));
    client.publish(
        bus::RECORDER_CONTROL,
        &bus::RecorderControl::Stop {
            session_id: Some(a.session.clone()),
        },
    )?;
    let stopped = status(&mut client)?;
    if stopped.state != "stopped" {
        return Err(CliError::Data(stopped.message.unwrap_or_else(|| "recording failed".into())));
    }
    let text = client
        .recv_on(bus::DEMONSTRATION, wait)?
        .ok_or_else(|| CliError::Network("no demonstration received".into()))?;
    let record: DemonstrationRecord = serde_json::from_str(&text).map_err(|e| CliError::Data(e.to_string()))?;
    save_record(&record, &a.out)?;
    println!("recorded {} samples to {}", record.trajectory.len(), a.out.display());
    Ok(())
}

/// Expand directories into their sorted `*.jsonl` files and load each.
fn load_traces(paths: &[PathBuf]) -> Result<Vec<DemonstrationRecord>, CliError> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "jsonl"))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    if files.is_empty() {
        return Err(CliError::Data("no trace files given".into()));
    }
    files.iter().map(|f| load_record(f).map_err(CliError::from)).collect()
}

fn learn(a: LearnArgs) -> Result<(), CliError> {
    let (scene, model) = a.scene.load()?;
    let traces = load_traces(&a.traces)?;
    let mut params = TrainParams { seed: a.seed, ..TrainParams::default() };
    if let Some(v) = a.epochs {
        params.epochs = v;
    }
    if let Some(v) = a.learning_rate {
        params.learning_rate = v;
    }
    let net = learning::train_feature(&traces, &model, &scene, &params)?;
    write_text(&a.out, &net.to_json())?;
    println!("trained on {} traces; wrote {}", traces.len(), a.out.display());
    Ok(())
}

fn load_network(path: &Path) -> Result<FeatureNetwork, CliError> {
    Ok(FeatureNetwork::from_json(&read_text(path)?)?)
}

fn eval(a: EvalArgs) -> Result<(), CliError> {
    let (scene, model) = a.scene.load()?;
    let net = load_network(&a.model)?;
    let mse = harness::evaluate_mse(&net, a.feature, &model, &scene, a.samples, a.seed)?;
    println!(
        "{}",
        serde_json::json!({ "feature": a.feature.name(), "samples": a.samples, "seed": a.seed, "mse": mse })
    );
    Ok(())
}

fn plan(a: PlanArgs) -> Result<(), CliError> {
    let (scene, model) = a.scene.load()?;
    let reward = match &a.reward {
        Some(path) => serde_json::from_str(&read_text(path)?).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?,
        None => RewardModel::empty(),
    };
    let mut params = PlanParams::default();
    if let Some(v) = a.waypoints {
        params.n_waypoints = v;
    }
    if let Some(v) = a.iterations {
        params.iterations = v;
    }
    let query = TrajectoryQuery {
        q_start: a.start.clone(),
        q_goal: a.goal.clone(),
    };
    let trajectory = learning::plan_trajectory(&model, &scene, &reward, &query, &params)?;
    let json = serde_json::to_string(&trajectory).map_err(|e| CliError::Internal(e.to_string()))?;
    match &a.out {
        Some(path) => write_text(path, &(json + "\n")),
        None => {
            println!("{json}");
            Ok(())
        }
    }
}

fn field(a: FieldArgs) -> Result<(), CliError> {
    let (scene, model) = a.scene.load()?;
    let grid = GridSpec {
        min: a.min,
        max: a.max,
        resolution: a.resolution,
    };
    let net;
    let source = match (&a.model, a.feature) {
        (Some(path), _) => {
            net = load_network(path)?;
            FieldSource::Network(&net)
        }
        (None, Some(f)) => FieldSource::GroundTruth(f),
        (None, None) => return Err(CliError::Config("give --feature or --model".into())),
    };
    let rows = harness::emit_feature_field(source, &model, &scene, &grid, &a.out)?;
    println!("wrote {rows} cells to {}", a.out.display());
    Ok(())
}
