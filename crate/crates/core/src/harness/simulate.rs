//! Seeded noise and missing-observation simulation.

use std::ops::Range;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dynamics::NodeSignalSeries;
use crate::error::{Error, Result};
use crate::estimate::ObservationStream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseMaskSpec {
    /// Linear signal-to-noise power ratio; `inf` disables noise.
    pub snr: f64,
    pub missing_fraction: f64,
    pub seed: u64,
    pub runs: usize,
}

impl NoiseMaskSpec {
    pub fn snr_from_db(db: f64) -> f64 {
        10f64.powf(db / 10.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.snr.is_nan() || self.snr <= 0.0 {
            return Err(Error::Config(format!("snr must be positive, got {}", self.snr)));
        }
        if !(0.0..1.0).contains(&self.missing_fraction) {
            return Err(Error::Config(format!(
                "missing fraction must lie in [0, 1), got {}",
                self.missing_fraction
            )));
        }
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        Ok(())
    }
}

/// RNG for run `run_index` under `seed`: one ChaCha stream per run.
pub fn run_rng(seed: u64, run_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run_index as u64);
    rng
}

/// Sample variance of each node over `range`.
pub fn node_variances(series: &NodeSignalSeries, range: Range<usize>) -> Result<Vec<f64>> {
    if range.len() < 2 || range.end > series.len() {
        return Err(Error::Config(format!("variance range {range:?} needs 2+ steps inside the series")));
    }
    Ok((0..series.node_count())
        .map(|i| series.values().column(i).rows_range(range.clone()).variance() * range.len() as f64 / (range.len() - 1) as f64)
        .collect())
}

/// `y[t] = M[t](x[t] + eta[t])` with `eta_i ~ N(0, variance_i / snr)` and each node
/// observed independently with probability `1 - missing_fraction`.
pub fn simulate_observations(
    ground_truth: &NodeSignalSeries,
    variances: &[f64],
    spec: &NoiseMaskSpec,
    run_index: usize,
) -> Result<ObservationStream> {
    spec.validate()?;
    let (t_len, n) = ground_truth.values().shape();
    if variances.len() != n {
        return Err(Error::dim("noise variances", n, variances.len()));
    }
    let sd: Vec<f64> = variances.iter().map(|v| (v / spec.snr).sqrt()).collect();
    let mut rng = run_rng(spec.seed, run_index);
    let mut y = DMatrix::zeros(t_len, n);
    let mut mask = Vec::with_capacity(t_len * n);
    for t in 0..t_len {
        for i in 0..n {
            let observed = rng.random::<f64>() >= spec.missing_fraction;
            let z: f64 = rng.sample(StandardNormal);
            mask.push(observed);
            y[(t, i)] = if sd[i] == 0.0 {
                ground_truth.values()[(t, i)]
            } else {
                ground_truth.values()[(t, i)] + sd[i] * z
            };
        }
    }
    ObservationStream::new(y, mask)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(snr: f64, miss: f64) -> NoiseMaskSpec {
        NoiseMaskSpec {
            snr,
            missing_fraction: miss,
            seed: 7,
            runs: 1,
        }
    }

    fn ramp() -> NodeSignalSeries {
        NodeSignalSeries::new(DMatrix::from_fn(20, 3, |t, i| (t * (i + 1)) as f64)).unwrap()
    }

    #[test]
    fn noiseless_full_observation_is_exact() {
        let s = ramp();
        let obs = simulate_observations(&s, &[1.0; 3], &spec(f64::INFINITY, 0.0), 0).unwrap();
        assert_eq!(obs.observations(), s.values());
        assert_eq!(obs.observed_fraction(), 1.0);
    }

    #[test]
    fn runs_are_independent_and_reproducible() {
        let s = ramp();
        let a = simulate_observations(&s, &[1.0; 3], &spec(3.0, 0.3), 0).unwrap();
        let b = simulate_observations(&s, &[1.0; 3], &spec(3.0, 0.3), 0).unwrap();
        let c = simulate_observations(&s, &[1.0; 3], &spec(3.0, 0.3), 1).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn variances_use_unbiased_estimator() {
        let s = NodeSignalSeries::from_rows(&[vec![1.0], vec![3.0], vec![100.0]]).unwrap();
        assert_eq!(node_variances(&s, 0..2).unwrap(), vec![2.0]);
        assert!(node_variances(&s, 0..1).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(spec(0.0, 0.1).validate().is_err());
        assert!(spec(3.0, 1.0).validate().is_err());
        assert!(spec(3.0, 0.0).validate().is_ok());
        assert!((NoiseMaskSpec::snr_from_db(10.0) - 10.0).abs() < 1e-12);
    }
}
