//! Simulation campaigns: damage conditions, repeated acquisitions, and the
//! standard feature chain.

use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::synthesis::rng_for;
use super::{apply_damage, assemble, natural_frequencies, synthesize_timeseries, DamageState};
use super::{ModelOptions, SynthesisConfig};
use crate::error::{Error, Result};
use crate::family::{builtin_family, FamilyTemplate, StructureInstance, ThetaVector};
use crate::fibre::{AcquisitionConfig, Fibre, Operator, OperatorSpec};
use crate::par::{self, Execution};

/// A labelled health state; `None` is the undamaged structure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub label: usize,
    pub damage: Option<DamageState>,
}

impl Condition {
    pub fn healthy() -> Self {
        Condition {
            label: 0,
            damage: None,
        }
    }

    pub fn damaged(label: usize, slot: &str, severity: f64) -> Self {
        Condition {
            label,
            damage: Some(DamageState {
                slot: slot.to_string(),
                severity,
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CampaignSettings {
    /// Acquisitions per condition.
    pub acquisitions: usize,
    pub samples: usize,
    pub sample_rate: f64,
    /// Seconds between acquisition starts.
    pub interval: f64,
    pub welch_segment: usize,
    pub peaks: usize,
    pub synthesis: SynthesisConfig,
    pub model: ModelOptions,
}

impl Default for CampaignSettings {
    fn default() -> Self {
        CampaignSettings {
            acquisitions: 30,
            samples: 4096,
            sample_rate: 64.0,
            interval: 600.0,
            welch_segment: 1024,
            peaks: 4,
            synthesis: SynthesisConfig::default(),
            model: ModelOptions::default(),
        }
    }
}

impl CampaignSettings {
    /// The feature chain applied to the raw stratum.
    pub fn feature_chain(&self) -> Vec<OperatorSpec> {
        vec![
            OperatorSpec::demean(),
            OperatorSpec::welch(self.welch_segment, self.sample_rate),
            OperatorSpec::modal_peaks(self.peaks, self.sample_rate),
        ]
    }
}

/// A fibre built by simulation, with one label per acquisition.
#[derive(Clone, Debug)]
pub struct PopulatedFibre {
    pub fibre: Fibre,
    pub labels: Vec<usize>,
    /// Index of the Welch spectrum stratum.
    pub spectrum_stratum: usize,
    /// Index of the per-channel modal-peak stratum.
    pub feature_stratum: usize,
    pub peaks: OperatorSpec,
}

impl PopulatedFibre {
    /// Rebuilds the view over a stored fibre: the feature stratum is the
    /// last one whose chain ends in modal peak picking, and its input is
    /// the spectrum stratum.
    pub fn from_fibre(fibre: Fibre, labels: Vec<usize>) -> Result<Self> {
        let (feature_stratum, chain) = (0..fibre.stratum_count())
            .rev()
            .find_map(|m| {
                let chain = fibre.provenance(m).ok()?;
                (chain.last()?.name == "modal_peaks").then_some((m, chain))
            })
            .ok_or_else(|| Error::NotFound(format!("fibre {} has no modal-peak stratum", fibre.structure_id())))?;
        let spectrum_stratum = fibre
            .find_chain(&chain[..chain.len() - 1])
            .ok_or_else(|| Error::NotFound("spectrum stratum of the modal peaks".into()))?;
        let acquisitions = fibre.config().acquisitions;
        if labels.len() != acquisitions {
            return Err(Error::InvalidInput(format!(
                "{} labels for {acquisitions} acquisitions",
                labels.len()
            )));
        }
        Ok(PopulatedFibre {
            peaks: chain[chain.len() - 1].clone(),
            fibre,
            labels,
            spectrum_stratum,
            feature_stratum,
        })
    }

    /// Modal peaks of every acquisition's channel-averaged spectrum, with
    /// labels. Averaging spectra rather than per-channel peaks keeps a mode
    /// that is weak at one sensor from being replaced by a noise peak.
    pub fn features(&self) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
        let (ks, spectra) = acquisition_features(&self.fibre, self.spectrum_stratum)?;
        let op = Operator::from_spec(&self.peaks)?;
        let rows = spectra.iter().map(|s| op.apply(s)).collect();
        Ok((rows, ks.iter().map(|&k| self.labels[k]).collect()))
    }
}

/// Mixes a campaign seed with a name into a new seed.
pub fn derive_seed(seed: u64, name: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(name.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// Simulates every condition `settings.acquisitions` times, ingests the raw
/// records and derives the feature strata. Acquisition `k` belongs to
/// condition `k / acquisitions`.
pub fn populate_fibre(
    id: &str,
    instance: &StructureInstance,
    conditions: &[Condition],
    settings: &CampaignSettings,
    exec: Execution,
) -> Result<PopulatedFibre> {
    if conditions.is_empty() {
        return Err(Error::InvalidInput("campaign has no conditions".into()));
    }
    if settings.acquisitions == 0 {
        return Err(Error::InvalidInput("campaign needs at least one acquisition".into()));
    }
    settings.synthesis.validate()?;
    let modal = par::try_map(conditions, exec, |c| {
        let damaged = match &c.damage {
            Some(d) => apply_damage(instance, d)?,
            None => instance.clone(),
        };
        natural_frequencies(&assemble(&damaged, &settings.model)?, settings.synthesis.modes)
    })?;

    let sensors = modal[0].sensors.clone();
    if sensors.is_empty() {
        return Err(Error::InvalidInput(format!("structure {id} carries no sensors")));
    }
    let per = settings.acquisitions;
    let total = per * conditions.len();
    let config = AcquisitionConfig {
        channels: sensors.len(),
        samples: settings.samples,
        acquisitions: total,
        sample_rate: settings.sample_rate,
        interval: settings.interval,
        channel_sensors: sensors.iter().cloned().enumerate().collect(),
    };
    let mut fibre = Fibre::new(id, config)?;

    let records = par::map_range(total, exec, |k| {
        synthesize_timeseries(
            &modal[k / per],
            &settings.synthesis,
            settings.samples,
            settings.sample_rate,
            k as u64,
        )
    });
    let mut labels = Vec::with_capacity(total);
    for (k, recs) in records.into_iter().enumerate() {
        for (j, r) in recs?.into_iter().enumerate() {
            fibre.ingest(j, k, r, k as f64 * settings.interval)?;
        }
        labels.push(conditions[k / per].label);
    }
    let chain = settings.feature_chain();
    let spectrum_stratum = fibre.apply_chain(0, &chain[..2], exec)?;
    let feature_stratum = fibre.apply_operator_with(spectrum_stratum, &chain[2], exec)?;
    Ok(PopulatedFibre {
        fibre,
        labels,
        spectrum_stratum,
        feature_stratum,
        peaks: chain[2].clone(),
    })
}

/// Per-acquisition feature rows: the mean over channels of stratum `m`.
/// Returns the populated acquisition indices and one row each.
pub fn acquisition_features(fibre: &Fibre, m: usize) -> Result<(Vec<usize>, Vec<Vec<f64>>)> {
    let stratum = fibre.project_stratum(m)?;
    let dim = stratum.record_dim();
    let mut ks = Vec::new();
    let mut rows = Vec::new();
    for k in stratum.acquisitions() {
        let recs = fibre.project_time(m, k)?;
        let mut row = vec![0.0; dim];
        for r in &recs {
            for (acc, v) in row.iter_mut().zip(r.values) {
                *acc += v;
            }
        }
        for v in &mut row {
            *v /= recs.len() as f64;
        }
        ks.push(k);
        rows.push(row);
    }
    Ok((ks, rows))
}

/// How to draw instances around a base point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingSpec {
    pub count: usize,
    /// Maximum relative perturbation of each coordinate.
    pub spread: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionFile {
    pub label: usize,
    #[serde(default)]
    pub slot: Option<String>,
    #[serde(default)]
    pub delta: Option<f64>,
}

fn default_interval() -> f64 {
    CampaignSettings::default().interval
}

fn default_segment() -> usize {
    CampaignSettings::default().welch_segment
}

fn default_n_e() -> usize {
    ModelOptions::default().elements_per_deck
}

/// Campaign file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    /// Built-in family name or path to a family file.
    pub family: String,
    #[serde(default)]
    pub theta: Option<ThetaVector>,
    #[serde(default)]
    pub sampling: Option<SamplingSpec>,
    pub conditions: Vec<ConditionFile>,
    #[serde(rename = "N_R")]
    pub acquisitions: usize,
    #[serde(rename = "N_T")]
    pub samples: usize,
    #[serde(rename = "f_s")]
    pub sample_rate: f64,
    pub noise_std: f64,
    pub zeta: f64,
    pub seed: u64,
    #[serde(default = "default_n_e")]
    pub n_e: usize,
    #[serde(rename = "N_w", default = "default_segment")]
    pub welch_segment: usize,
    #[serde(default = "default_interval")]
    pub delta_tau: f64,
}

impl CampaignConfig {
    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// Resolves the family, relative paths being taken from `base_dir`.
    pub fn load_family(&self, base_dir: &Path) -> Result<Arc<FamilyTemplate>> {
        if let Some(f) = builtin_family(&self.family) {
            return Ok(Arc::new(f));
        }
        let path = base_dir.join(&self.family);
        if !path.exists() {
            return Err(Error::Configuration(format!(
                "family {} is neither built in nor a readable file",
                self.family
            )));
        }
        Ok(Arc::new(FamilyTemplate::read(&path)?))
    }

    pub fn conditions(&self) -> Result<Vec<Condition>> {
        self.conditions
            .iter()
            .map(|c| match (&c.slot, c.delta) {
                (None, None) => Ok(Condition {
                    label: c.label,
                    damage: None,
                }),
                (Some(slot), Some(delta)) => Ok(Condition::damaged(c.label, slot, delta)),
                _ => Err(Error::Configuration(format!(
                    "condition {} must give both slot and delta, or neither",
                    c.label
                ))),
            })
            .collect()
    }

    pub fn settings(&self, seed: u64) -> CampaignSettings {
        CampaignSettings {
            acquisitions: self.acquisitions,
            samples: self.samples,
            sample_rate: self.sample_rate,
            interval: self.delta_tau,
            welch_segment: self.welch_segment,
            peaks: 4,
            synthesis: SynthesisConfig {
                damping: self.zeta,
                noise_std: self.noise_std,
                seed,
                modes: 4,
            },
            model: ModelOptions {
                elements_per_deck: self.n_e,
                ..Default::default()
            },
        }
    }

    /// The instances of the campaign, named `<family>_<i>`. Instance 0 is
    /// the base point itself; the others perturb every non-zero coordinate
    /// by a uniform relative amount within `spread`.
    pub fn instances(
        &self,
        family: &Arc<FamilyTemplate>,
        seed: u64,
    ) -> Result<Vec<(String, StructureInstance)>> {
        let base = self.theta.clone().unwrap_or_else(|| family.midpoint());
        let (count, spread) = match &self.sampling {
            Some(s) => (s.count, s.spread),
            None => (1, 0.0),
        };
        if count == 0 || !(0.0..1.0).contains(&spread) {
            return Err(Error::Configuration(
                "sampling needs count >= 1 and a spread in [0, 1)".into(),
            ));
        }
        let mut rng = rng_for(derive_seed(seed, "sampling"), 0);
        (0..count)
            .map(|i| {
                let theta: Vec<f64> = if i == 0 {
                    base.0.clone()
                } else {
                    base.0
                        .iter()
                        .map(|&v| {
                            let u: f64 = rng.random_range(-1.0..=1.0);
                            v * (1.0 + spread * u)
                        })
                        .collect()
                };
                let inst = StructureInstance::new(Arc::clone(family), theta)?;
                Ok((format!("{}_{i}", family.name), inst))
            })
            .collect()
    }
}
