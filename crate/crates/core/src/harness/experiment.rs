use super::{eval::EvalSample, generate_oracle_trace_with, HarnessError, OracleParams};
use crate::capture::{load_record, DemonstrationRecord};
use crate::learning::{initial_network, train_feature_from, TrainParams};
use crate::model::RobotModel;
use crate::scene::{GroundTruth, Scene};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    pub feature: GroundTruth,
    pub trace_pool_size: usize,
    pub traces_per_trial: usize,
    pub trials: usize,
    pub eval_samples: usize,
    pub seed: u64,
    pub oracle: OracleParams,
    pub train: TrainParams,
    /// Load the pool from `*.jsonl` records here instead of the oracle.
    pub traces_dir: Option<PathBuf>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            feature: GroundTruth::Table,
            trace_pool_size: 20,
            traces_per_trial: 10,
            trials: 10,
            eval_samples: 10_000,
            seed: 0,
            oracle: OracleParams::default(),
            train: TrainParams::default(),
            traces_dir: None,
        }
    }
}

impl ExperimentSpec {
    pub fn for_feature(feature: GroundTruth) -> Self {
        Self { feature, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.trials == 0 {
            return Err(HarnessError::InvalidSpec("trials must be ≥ 1".into()));
        }
        if self.traces_per_trial == 0 || self.traces_per_trial > self.trace_pool_size {
            return Err(HarnessError::InvalidSpec("need 1 ≤ traces_per_trial ≤ trace_pool_size".into()));
        }
        if self.eval_samples < 2 {
            return Err(HarnessError::InvalidSpec("eval_samples must be ≥ 2".into()));
        }
        self.train.validate()?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON form of the spec.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("spec serializes");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        self.seed.wrapping_add(trial as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub feature: GroundTruth,
    pub trial_mse: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    /// Same trials with the untrained initialization.
    pub baseline_mse: Vec<f64>,
    pub trial_seeds: Vec<u64>,
    /// Pool indices used by each trial.
    pub trial_traces: Vec<Vec<usize>>,
    pub config_hash: String,
}

impl ExperimentResult {
    pub fn baseline_wins(&self) -> usize {
        self.baseline_mse.iter().zip(&self.trial_mse).filter(|(b, t)| b > t).count()
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Oracle trace pool; trace `i` uses its own seed derived from the spec seed.
pub fn build_pool(spec: &ExperimentSpec, model: &RobotModel, scene: &Scene) -> Result<Vec<DemonstrationRecord>, HarnessError> {
    (0..spec.trace_pool_size)
        .map(|i| {
            let seed = spec.seed.wrapping_mul(1_000_003).wrapping_add(i as u64);
            generate_oracle_trace_with(spec.feature, model, scene, seed, &spec.oracle)
        })
        .collect()
}

/// Every `*.jsonl` record in `dir`, in file-name order.
pub fn load_trace_dir(dir: &Path) -> Result<Vec<DemonstrationRecord>, HarnessError> {
    let entries = std::fs::read_dir(dir).map_err(|source| HarnessError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    paths.sort();
    paths.iter().map(|p| Ok(load_record(p)?)).collect()
}

pub fn run_experiment(spec: &ExperimentSpec, model: &RobotModel, scene: &Scene) -> Result<ExperimentResult, HarnessError> {
    spec.validate()?;
    let pool = match &spec.traces_dir {
        Some(dir) => {
            let traces = load_trace_dir(dir)?;
            if traces.len() < spec.traces_per_trial {
                return Err(HarnessError::InsufficientTraces {
                    dir: dir.clone(),
                    found: traces.len(),
                    needed: spec.traces_per_trial,
                });
            }
            traces
        }
        None => build_pool(spec, model, scene)?,
    };
    run_trials(spec, &pool, model, scene)
}

/// Train/evaluate cycles on a prepared pool.
pub fn run_trials(spec: &ExperimentSpec, pool: &[DemonstrationRecord], model: &RobotModel, scene: &Scene) -> Result<ExperimentResult, HarnessError> {
    spec.validate()?;
    if pool.len() < spec.traces_per_trial {
        return Err(HarnessError::InvalidSpec(format!(
            "pool has {} traces, trials need {}",
            pool.len(),
            spec.traces_per_trial
        )));
    }
    let sample = EvalSample::draw(spec.feature, model, scene, spec.eval_samples, spec.seed)?;
    let outcomes: Vec<(u64, Vec<usize>, f64, f64)> = (0..spec.trials)
        .into_par_iter()
        .map(|trial| {
            let seed = spec.trial_seed(trial);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut picks = rand::seq::index::sample(&mut rng, pool.len(), spec.traces_per_trial).into_vec();
            picks.sort_unstable();
            let traces: Vec<DemonstrationRecord> = picks.iter().map(|&i| pool[i].clone()).collect();
            let params = TrainParams { seed, ..spec.train };
            let init = initial_network(&traces, model, scene, &params)?;
            let baseline = sample.mse(&init)?;
            let net = train_feature_from(init, &traces, model, scene, &params)?;
            let mse = sample.mse(&net)?;
            log::info!("{} trial {trial}: mse {mse:.5} (untrained {baseline:.5})", spec.feature.name());
            Ok((seed, picks, mse, baseline))
        })
        .collect::<Result<_, HarnessError>>()?;
    let trial_mse: Vec<f64> = outcomes.iter().map(|o| o.2).collect();
    let (mean, std) = mean_std(&trial_mse);
    Ok(ExperimentResult {
        feature: spec.feature,
        mean,
        std,
        baseline_mse: outcomes.iter().map(|o| o.3).collect(),
        trial_seeds: outcomes.iter().map(|o| o.0).collect(),
        trial_traces: outcomes.into_iter().map(|o| o.1).collect(),
        trial_mse,
        config_hash: spec.config_hash(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn population_std() {
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!((m, s), (2.0, 1.0));
        assert_eq!(mean_std(&[0.25]).1, 0.0);
    }

    #[test]
    fn spec_validation() {
        let mut s = ExperimentSpec::default();
        assert!(s.validate().is_ok());
        s.traces_per_trial = 21;
        assert!(s.validate().is_err());
        s.traces_per_trial = 10;
        s.trials = 0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn hash_tracks_config() {
        let a = ExperimentSpec::default();
        let b = ExperimentSpec { seed: 1, ..a.clone() };
        assert_eq!(a.config_hash(), a.clone().config_hash());
        assert_ne!(a.config_hash(), b.config_hash());
        assert_eq!(a.config_hash().len(), 64);
    }
}
