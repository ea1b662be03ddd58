//! Free-decay response synthesis.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::ModalResult;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthesisConfig {
    /// Modal damping ratio, shared by all modes.
    pub damping: f64,
    /// Noise standard deviation as a fraction of the clean record's RMS.
    pub noise_std: f64,
    pub seed: u64,
    /// Number of modes superposed.
    pub modes: usize,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig {
            damping: 0.002,
            noise_std: 0.02,
            seed: 0,
            modes: 4,
        }
    }
}

impl SynthesisConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..0.2).contains(&self.damping) {
            return Err(Error::Configuration(format!(
                "damping ratio {} outside [0, 0.2)",
                self.damping
            )));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(Error::Configuration(format!(
                "noise level {} must be non-negative",
                self.noise_std
            )));
        }
        if self.modes == 0 {
            return Err(Error::Configuration("at least one mode must be synthesised".into()));
        }
        Ok(())
    }
}

/// Generator for one acquisition: the seed picks the campaign, `stream`
/// the acquisition within it.
pub(crate) fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One record per sensor (in `modal.sensors` order) of a decaying
/// multi-mode response plus white noise.
///
/// Each mode's sensor shape is scaled to unit peak over the sensors, then
/// given a random amplitude in `[0.5, 1.5)` and a random phase.
pub fn synthesize_timeseries(
    modal: &ModalResult,
    cfg: &SynthesisConfig,
    samples: usize,
    sample_rate: f64,
    stream: u64,
) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    if samples < 64 {
        return Err(Error::Sampling(format!("records need at least 64 samples, got {samples}")));
    }
    let modes = cfg.modes.min(modal.frequencies.len());
    let f_max = modal.frequencies[..modes].iter().cloned().fold(0.0, f64::max);
    if sample_rate.is_nan() || sample_rate <= 2.0 * f_max {
        return Err(Error::Sampling(format!(
            "sample rate {sample_rate} Hz does not resolve a {f_max} Hz mode"
        )));
    }
    let mut rng = rng_for(cfg.seed, stream);
    let dt = 1.0 / sample_rate;
    let n_sensors = modal.sensors.len();
    let mut records = vec![vec![0.0; samples]; n_sensors];
    for m in 0..modes {
        let amplitude: f64 = rng.random_range(0.5..1.5);
        let phase: f64 = rng.random_range(0.0..2.0 * PI);
        let column = modal.shapes.column(m);
        let peak = column.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if peak == 0.0 {
            continue;
        }
        let omega = 2.0 * PI * modal.frequencies[m];
        let decay = cfg.damping * omega;
        let omega_d = omega * (1.0 - cfg.damping * cfg.damping).sqrt();
        for (s, record) in records.iter_mut().enumerate() {
            let weight = amplitude * column[s] / peak;
            if weight == 0.0 {
                continue;
            }
            for (i, x) in record.iter_mut().enumerate() {
                let t = i as f64 * dt;
                *x += weight * (-decay * t).exp() * (omega_d * t + phase).cos();
            }
        }
    }
    if cfg.noise_std > 0.0 {
        for record in &mut records {
            let rms = (record.iter().map(|v| v * v).sum::<f64>() / samples as f64).sqrt();
            let sigma = cfg.noise_std * rms;
            if sigma > 0.0 {
                let normal = Normal::new(0.0, sigma).expect("positive finite sigma");
                for x in record.iter_mut() {
                    *x += normal.sample(&mut rng);
                }
            }
        }
    }
    Ok(records)
}
