//! Per-structure data fibre.
//!
//! Stratum 0 holds raw time records on a (channel, acquisition) grid. Every
//! further stratum is produced by applying a registered [`Operator`] cell-wise
//! to an existing stratum and records the full operator chain back to the
//! raw data. Strata are immutable once created and are shared behind `Arc`.
//!
//! The raw stratum is sealed as soon as the first derived stratum exists, so
//! a derived stratum always describes exactly the records it was built from.

mod operators;
mod persist;

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::par::{self, Execution};

pub use operators::{hann, packed_magnitudes, packed_power, Operator, OperatorSpec, ParamValue};

/// Acquisition constants shared by every record of a fibre.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionConfig {
    #[serde(rename = "n_channels")]
    pub channels: usize,
    #[serde(rename = "n_samples")]
    pub samples: usize,
    #[serde(rename = "n_acquisitions")]
    pub acquisitions: usize,
    #[serde(rename = "fs")]
    pub sample_rate: f64,
    #[serde(rename = "delta_tau")]
    pub interval: f64,
    /// Channel index to the id of the sensor vertex it reads.
    #[serde(default)]
    pub channel_sensors: BTreeMap<usize, String>,
}

impl AcquisitionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 || self.acquisitions == 0 || self.samples < 2 {
            return Err(Error::Configuration(format!(
                "fibre needs at least one channel, one acquisition and two samples per record \
                 (got {} x {} x {})",
                self.channels, self.acquisitions, self.samples
            )));
        }
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return Err(Error::Configuration(format!(
                "sample rate must be positive, got {}",
                self.sample_rate
            )));
        }
        let duration = self.samples as f64 / self.sample_rate;
        if !(self.interval.is_finite() && self.interval >= duration) {
            return Err(Error::Configuration(format!(
                "acquisition interval {} s is shorter than one record ({duration} s)",
                self.interval
            )));
        }
        if let Some(j) = self.channel_sensors.keys().find(|&&j| j >= self.channels) {
            return Err(Error::Configuration(format!(
                "sensor map names channel {j} but the fibre has {} channels",
                self.channels
            )));
        }
        Ok(())
    }

    /// Duration of one record in seconds.
    pub fn record_duration(&self) -> f64 {
        self.samples as f64 / self.sample_rate
    }
}

/// A borrowed view of one cell of a stratum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Record<'a> {
    pub channel: usize,
    pub acquisition: usize,
    pub start_time: f64,
    pub values: &'a [f64],
}

/// One layer of the fibre.
#[derive(Clone, Debug, PartialEq)]
pub struct Stratum {
    index: usize,
    record_dim: usize,
    chain: Vec<OperatorSpec>,
    chain_hash: String,
    grid: BTreeMap<(usize, usize), Vec<f64>>,
}

impl Stratum {
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn record_dim(&self) -> usize {
        self.record_dim
    }

    pub fn chain(&self) -> &[OperatorSpec] {
        &self.chain
    }

    /// Hex SHA-256 of the serialised operator chain.
    pub fn chain_hash(&self) -> &str {
        &self.chain_hash
    }

    pub fn cell_count(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Total number of reals stored, `cells * record_dim`.
    pub fn flattened_dim(&self) -> usize {
        self.grid.len() * self.record_dim
    }

    pub fn get(&self, channel: usize, acquisition: usize) -> Option<&[f64]> {
        self.grid.get(&(channel, acquisition)).map(Vec::as_slice)
    }

    /// Cells in (channel, acquisition) order.
    pub fn cells(&self) -> impl Iterator<Item = ((usize, usize), &[f64])> {
        self.grid.iter().map(|(&key, v)| (key, v.as_slice()))
    }

    /// Populated acquisition indices, ascending.
    pub fn acquisitions(&self) -> Vec<usize> {
        let mut ks: Vec<usize> = self.grid.keys().map(|&(_, k)| k).collect();
        ks.sort_unstable();
        ks.dedup();
        ks
    }
}

pub fn chain_hash(chain: &[OperatorSpec]) -> String {
    let bytes = serde_json::to_vec(chain).expect("operator specs always serialise");
    hex::encode(Sha256::digest(&bytes))
}

/// The total data space of one structure.
#[derive(Clone, Debug, PartialEq)]
pub struct Fibre {
    structure_id: String,
    config: AcquisitionConfig,
    /// Start time of acquisition 0; fixed by the first ingest.
    epoch: Option<f64>,
    strata: Vec<Arc<Stratum>>,
}

impl Fibre {
    pub fn new(structure_id: impl Into<String>, config: AcquisitionConfig) -> Result<Self> {
        config.validate()?;
        let raw = Stratum {
            index: 0,
            record_dim: config.samples,
            chain: Vec::new(),
            chain_hash: chain_hash(&[]),
            grid: BTreeMap::new(),
        };
        Ok(Fibre {
            structure_id: structure_id.into(),
            config,
            epoch: None,
            strata: vec![Arc::new(raw)],
        })
    }

    pub fn structure_id(&self) -> &str {
        &self.structure_id
    }

    pub fn config(&self) -> &AcquisitionConfig {
        &self.config
    }

    pub fn stratum_count(&self) -> usize {
        self.strata.len()
    }

    /// True when no raw record has been ingested.
    pub fn is_empty(&self) -> bool {
        self.strata[0].is_empty()
    }

    /// Start time of acquisition `k`, once the time base is known.
    pub fn start_time(&self, acquisition: usize) -> Option<f64> {
        self.epoch
            .map(|t0| t0 + acquisition as f64 * self.config.interval)
    }

    /// Stores one raw record at `(channel, acquisition)`.
    pub fn ingest(
        &mut self,
        channel: usize,
        acquisition: usize,
        samples: Vec<f64>,
        start_time: f64,
    ) -> Result<()> {
        if self.strata.len() > 1 {
            return Err(Error::Conflict(format!(
                "fibre {} already has derived strata; raw data is sealed",
                self.structure_id
            )));
        }
        if channel >= self.config.channels {
            return Err(Error::InvalidInput(format!(
                "channel {channel} out of range (fibre has {})",
                self.config.channels
            )));
        }
        if acquisition >= self.config.acquisitions {
            return Err(Error::InvalidInput(format!(
                "acquisition {acquisition} out of range (fibre has {})",
                self.config.acquisitions
            )));
        }
        if samples.len() != self.config.samples {
            return Err(Error::RecordShape {
                expected: self.config.samples,
                got: samples.len(),
            });
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "record ({channel}, {acquisition}) contains non-finite samples"
            )));
        }
        if !start_time.is_finite() {
            return Err(Error::Synchronisation(format!(
                "non-finite start time for acquisition {acquisition}"
            )));
        }
        if self.strata[0].grid.contains_key(&(channel, acquisition)) {
            return Err(Error::Conflict(format!(
                "cell ({channel}, {acquisition}) is already populated"
            )));
        }
        if let Some(expected) = self.start_time(acquisition) {
            let tol = 1e-9 * expected.abs().max(1.0);
            if (start_time - expected).abs() > tol {
                return Err(Error::Synchronisation(format!(
                    "acquisition {acquisition} starts at {start_time} s but the time base \
                     requires {expected} s"
                )));
            }
        } else {
            self.epoch = Some(start_time - acquisition as f64 * self.config.interval);
        }
        let raw = Arc::make_mut(&mut self.strata[0]);
        raw.grid.insert((channel, acquisition), samples);
        Ok(())
    }

    fn stratum_ref(&self, m: usize) -> Result<&Stratum> {
        self.strata.get(m).map(Arc::as_ref).ok_or_else(|| {
            Error::NotFound(format!(
                "stratum {m} (fibre {} has {})",
                self.structure_id,
                self.strata.len()
            ))
        })
    }

    fn record<'a>(&self, key: (usize, usize), values: &'a [f64]) -> Record<'a> {
        Record {
            channel: key.0,
            acquisition: key.1,
            start_time: self.start_time(key.1).unwrap_or(f64::NAN),
            values,
        }
    }

    /// All records of channel `j` in stratum `m`, ordered by acquisition.
    pub fn project_channel(&self, m: usize, channel: usize) -> Result<Vec<Record<'_>>> {
        let s = self.stratum_ref(m)?;
        if channel >= self.config.channels {
            return Err(Error::NotFound(format!("channel {channel}")));
        }
        Ok(s.grid
            .range((channel, 0)..(channel + 1, 0))
            .map(|(&key, v)| self.record(key, v))
            .collect())
    }

    /// All records of acquisition `k` in stratum `m`, ordered by channel.
    pub fn project_time(&self, m: usize, acquisition: usize) -> Result<Vec<Record<'_>>> {
        let s = self.stratum_ref(m)?;
        if acquisition >= self.config.acquisitions {
            return Err(Error::NotFound(format!("acquisition {acquisition}")));
        }
        Ok((0..self.config.channels)
            .filter_map(|j| {
                s.grid
                    .get_key_value(&(j, acquisition))
                    .map(|(&key, v)| self.record(key, v))
            })
            .collect())
    }

    /// The single record at `(j, k)` in stratum `m`.
    pub fn project_cell(&self, m: usize, channel: usize, acquisition: usize) -> Result<Record<'_>> {
        let s = self.stratum_ref(m)?;
        s.grid
            .get_key_value(&(channel, acquisition))
            .map(|(&key, v)| self.record(key, v))
            .ok_or_else(|| Error::NotFound(format!("cell ({channel}, {acquisition}) in stratum {m}")))
    }

    /// A shared handle to stratum `m`.
    pub fn project_stratum(&self, m: usize) -> Result<Arc<Stratum>> {
        self.stratum_ref(m)?;
        Ok(Arc::clone(&self.strata[m]))
    }

    pub fn provenance(&self, m: usize) -> Result<Vec<OperatorSpec>> {
        Ok(self.stratum_ref(m)?.chain.clone())
    }

    /// Index of an existing stratum with exactly this chain.
    pub fn find_chain(&self, chain: &[OperatorSpec]) -> Option<usize> {
        let hash = chain_hash(chain);
        self.strata.iter().position(|s| s.chain_hash == hash)
    }

    pub fn apply_operator(&mut self, m_in: usize, op: &OperatorSpec) -> Result<usize> {
        self.apply_operator_with(m_in, op, Execution::default())
    }

    /// Applies `op` cell-wise to stratum `m_in`. Returns the index of the new
    /// stratum, or of an existing one if the resulting chain already exists.
    pub fn apply_operator_with(
        &mut self,
        m_in: usize,
        op: &OperatorSpec,
        exec: Execution,
    ) -> Result<usize> {
        let input = self.stratum_ref(m_in)?;
        let operator = Operator::from_spec(op)?;
        let out_dim = operator.out_dim(input.record_dim)?;
        let mut chain = input.chain.clone();
        chain.push(op.clone());
        if let Some(existing) = self.find_chain(&chain) {
            return Ok(existing);
        }
        let cells: Vec<(&(usize, usize), &Vec<f64>)> = input.grid.iter().collect();
        let outputs = par::map(&cells, exec, |(_, v)| operator.apply(v));
        if let Some(bad) = outputs.iter().find(|o| o.len() != out_dim) {
            return Err(Error::Invariant(format!(
                "operator {} produced width {} instead of {out_dim}",
                op.name,
                bad.len()
            )));
        }
        let grid = cells
            .iter()
            .map(|(key, _)| **key)
            .zip(outputs)
            .collect();
        let index = self.strata.len();
        self.strata.push(Arc::new(Stratum {
            index,
            record_dim: out_dim,
            chain_hash: chain_hash(&chain),
            chain,
            grid,
        }));
        Ok(index)
    }

    /// Applies a chain of operators starting from stratum `m_in`, returning
    /// the final stratum index.
    pub fn apply_chain(&mut self, m_in: usize, chain: &[OperatorSpec], exec: Execution) -> Result<usize> {
        chain
            .iter()
            .try_fold(m_in, |m, op| self.apply_operator_with(m, op, exec))
    }

    /// Recomputes stratum `m` from the raw records by replaying its chain.
    pub fn replay(&self, m: usize) -> Result<BTreeMap<(usize, usize), Vec<f64>>> {
        let target = self.stratum_ref(m)?;
        let ops = target
            .chain
            .iter()
            .map(Operator::from_spec)
            .collect::<Result<Vec<_>>>()?;
        Ok(self.strata[0]
            .grid
            .iter()
            .map(|(&key, v)| {
                let out = ops.iter().fold(v.clone(), |x, op| op.apply(&x));
                (key, out)
            })
            .collect())
    }

    /// Writes stratum `m` as CSV: `channel,acquisition,start_time,v0,...`.
    pub fn export_csv<W: Write>(&self, m: usize, mut out: W) -> Result<()> {
        let s = self.stratum_ref(m)?;
        write!(out, "channel,acquisition,start_time")?;
        for i in 0..s.record_dim {
            write!(out, ",v{i}")?;
        }
        writeln!(out)?;
        for (&key, values) in &s.grid {
            let r = self.record(key, values);
            write!(out, "{},{},{}", r.channel, r.acquisition, r.start_time)?;
            for v in values {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> AcquisitionConfig {
        AcquisitionConfig {
            channels: 4,
            samples: 16,
            acquisitions: 5,
            sample_rate: 16.0,
            interval: 10.0,
            channel_sensors: BTreeMap::new(),
        }
    }

    fn record(j: usize, k: usize) -> Vec<f64> {
        (0..16).map(|i| (j * 100 + k * 10 + i) as f64).collect()
    }

    fn full() -> Fibre {
        let mut f = Fibre::new("s", config()).unwrap();
        for j in 0..4 {
            for k in 0..5 {
                f.ingest(j, k, record(j, k), 100.0 + 10.0 * k as f64).unwrap();
            }
        }
        f
    }

    #[test]
    fn ingest_and_shape_errors() {
        let mut f = Fibre::new("s", config()).unwrap();
        assert!(f.is_empty());
        f.ingest(0, 0, record(0, 0), 0.0).unwrap();
        assert_eq!(f.project_stratum(0).unwrap().cell_count(), 1);
        assert!(matches!(
            f.ingest(1, 0, vec![0.0; 15], 0.0),
            Err(Error::RecordShape { expected: 16, got: 15 })
        ));
        assert!(matches!(f.ingest(0, 0, record(0, 0), 0.0), Err(Error::Conflict(_))));
    }

    #[test]
    fn desynchronised_sibling_is_rejected() {
        let mut f = Fibre::new("s", config()).unwrap();
        f.ingest(1, 3, record(1, 3), 30.0).unwrap();
        assert!(matches!(f.ingest(2, 3, record(2, 3), 30.5), Err(Error::Synchronisation(_))));
        assert!(matches!(f.ingest(2, 4, record(2, 4), 41.0), Err(Error::Synchronisation(_))));
        f.ingest(2, 4, record(2, 4), 40.0).unwrap();
    }

    #[test]
    fn projections_partition_the_grid() {
        let f = full();
        let mut seen = 0;
        for j in 0..4 {
            let recs = f.project_channel(0, j).unwrap();
            assert_eq!(recs.len(), 5);
            assert!(recs.windows(2).all(|w| w[0].acquisition < w[1].acquisition));
            seen += recs.len();
        }
        assert_eq!(seen, 20);
        for k in 0..5 {
            for j in 0..4 {
                let cell = f.project_cell(0, j, k).unwrap();
                let via_time = f.project_time(0, k).unwrap();
                let hit: Vec<_> = via_time.iter().filter(|r| r.channel == j).collect();
                assert_eq!(hit.len(), 1);
                assert_eq!(hit[0].values, cell.values);
            }
        }
        assert_eq!(f.project_stratum(0).unwrap().flattened_dim(), 4 * 5 * 16);
    }

    #[test]
    fn empty_and_missing() {
        let f = Fibre::new("s", config()).unwrap();
        assert!(f.project_channel(0, 1).unwrap().is_empty());
        assert!(f.project_time(0, 2).unwrap().is_empty());
        assert!(matches!(f.project_cell(0, 0, 0), Err(Error::NotFound(_))));
        assert!(matches!(f.project_stratum(1), Err(Error::NotFound(_))));
        assert!(matches!(f.provenance(3), Err(Error::NotFound(_))));
    }

    #[test]
    fn derived_strata_record_chain_and_deduplicate() {
        let mut f = full();
        let a = f.apply_operator(0, &OperatorSpec::demean()).unwrap();
        let b = f.apply_operator(a, &OperatorSpec::dft()).unwrap();
        assert_eq!((a, b), (1, 2));
        assert_eq!(f.provenance(b).unwrap(), vec![OperatorSpec::demean(), OperatorSpec::dft()]);
        assert!(f.provenance(0).unwrap().is_empty());
        assert_eq!(f.apply_operator(0, &OperatorSpec::demean()).unwrap(), 1);
        assert_eq!(f.stratum_count(), 3);
        let replay = f.replay(b).unwrap();
        let stored = f.project_stratum(b).unwrap();
        for ((key, v), (key2, w)) in stored.cells().zip(&replay) {
            assert_eq!(key, *key2);
            assert_eq!(v, w.as_slice());
        }
        assert!(matches!(f.ingest(0, 0, record(0, 0), 100.0), Err(Error::Conflict(_))));
    }

    #[test]
    fn dimension_mismatch_is_contract_error() {
        let mut f = full();
        let m = f.apply_operator(0, &OperatorSpec::mean()).unwrap();
        assert!(matches!(
            f.apply_operator(m, &OperatorSpec::welch(8, 16.0)),
            Err(Error::OperatorContract(_))
        ));
    }

    #[test]
    fn csv_has_header_and_rows() {
        let f = full();
        let mut buf = Vec::new();
        f.export_csv(0, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 21);
        assert!(text.starts_with("channel,acquisition,start_time,v0,"));
    }
}
