use super::HarnessError;
use crate::learning::{encode_state, FeatureNetwork};
use crate::model::RobotModel;
use crate::scene::{GroundTruth, Scene};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Configurations drawn uniformly within joint limits, with their encodings
/// and ground-truth values (reusable across networks).
#[derive(Debug, Clone)]
pub struct EvalSample {
    pub configurations: Vec<Vec<f64>>,
    pub states: Vec<Vec<f64>>,
    pub ground_truth: Vec<f64>,
}

impl EvalSample {
    pub fn draw(feature: GroundTruth, model: &RobotModel, scene: &Scene, n: usize, seed: u64) -> Result<Self, HarnessError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let space = model.actuated_configuration_space();
        let mut s = EvalSample {
            configurations: Vec::with_capacity(n),
            states: Vec::with_capacity(n),
            ground_truth: Vec::with_capacity(n),
        };
        for _ in 0..n {
            let q: Vec<f64> = space.iter().map(|&(lo, hi)| rng.random_range(lo..=hi)).collect();
            s.ground_truth.push(feature.value(scene, &scene.ee_world(model, &q)?));
            s.states.push(encode_state(model, scene, &q)?);
            s.configurations.push(q);
        }
        Ok(s)
    }

    pub fn mse(&self, net: &FeatureNetwork) -> Result<f64, HarnessError> {
        let learned: Vec<f64> = self.states.iter().map(|s| net.value(s)).collect::<Result<_, _>>()?;
        normalized_mse(&learned, &self.ground_truth)
    }
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

/// Mean squared difference after min-max normalizing each series to [0, 1].
/// A constant `learned` series normalizes to all zeros.
pub fn normalized_mse(learned: &[f64], ground_truth: &[f64]) -> Result<f64, HarnessError> {
    assert_eq!(learned.len(), ground_truth.len());
    let (glo, ghi) = min_max(ground_truth);
    if !(ghi > glo) {
        return Err(HarnessError::DegenerateRange);
    }
    let (llo, lhi) = min_max(learned);
    let lspan = lhi - llo;
    let total: f64 = learned
        .iter()
        .zip(ground_truth)
        .map(|(&l, &g)| {
            let ln = if lspan > 0.0 { (l - llo) / lspan } else { 0.0 };
            let gn = (g - glo) / (ghi - glo);
            (ln - gn) * (ln - gn)
        })
        .sum();
    Ok(total / learned.len() as f64)
}

pub fn evaluate_mse(
    net: &FeatureNetwork,
    feature: GroundTruth,
    model: &RobotModel,
    scene: &Scene,
    n_samples: usize,
    seed: u64,
) -> Result<f64, HarnessError> {
    EvalSample::draw(feature, model, scene, n_samples, seed)?.mse(net)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn self_comparison_is_zero() {
        let g = [0.0, 0.2, 0.9, 0.4];
        assert_eq!(normalized_mse(&g, &g).unwrap(), 0.0);
        // Affine images normalize to the same series.
        let a: Vec<f64> = g.iter().map(|v| 3.0 * v - 1.0).collect();
        assert!(normalized_mse(&a, &g).unwrap() < 1e-30);
    }

    #[test]
    fn constant_truth_is_degenerate() {
        assert!(matches!(normalized_mse(&[0.1, 0.2], &[0.5, 0.5]), Err(HarnessError::DegenerateRange)));
    }
}
