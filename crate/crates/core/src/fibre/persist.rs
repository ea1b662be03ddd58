//! On-disk layout of a fibre.
//!
//! ```text
//! <dir>/meta.json          structure id, acquisition constants, time base
//! <dir>/manifest.json      one entry per stratum: chain, hash, dim, cells
//! <dir>/stratum_<m>.bin    little-endian f64, row-major over (j, k, sample)
//! ```
//!
//! Only populated cells are written; the manifest lists them in the same
//! (channel, acquisition) order as the binary payload.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{chain_hash, AcquisitionConfig, Fibre, OperatorSpec, Stratum};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct Meta {
    structure_id: String,
    acquisition: AcquisitionConfig,
    epoch: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    index: usize,
    chain: Vec<OperatorSpec>,
    hash: String,
    record_dim: usize,
    cells: Vec<[usize; 2]>,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

impl Fibre {
    /// Writes the fibre into `dir`, creating it if needed.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let meta = Meta {
            structure_id: self.structure_id.clone(),
            acquisition: self.config.clone(),
            epoch: self.epoch,
        };
        write_atomic(&dir.join("meta.json"), &serde_json::to_vec_pretty(&meta)?)?;

        let mut manifest = Vec::with_capacity(self.strata.len());
        for s in &self.strata {
            let mut bytes = Vec::with_capacity(s.flattened_dim() * 8);
            for v in s.grid.values().flatten() {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
            write_atomic(&dir.join(format!("stratum_{}.bin", s.index)), &bytes)?;
            manifest.push(ManifestEntry {
                index: s.index,
                chain: s.chain.clone(),
                hash: s.chain_hash.clone(),
                record_dim: s.record_dim,
                cells: s.grid.keys().map(|&(j, k)| [j, k]).collect(),
            });
        }
        write_atomic(&dir.join("manifest.json"), &serde_json::to_vec_pretty(&manifest)?)?;
        Ok(())
    }

    /// Reads a fibre previously written by [`Fibre::save`].
    pub fn load(dir: &Path) -> Result<Self> {
        let meta: Meta = serde_json::from_slice(&fs::read(dir.join("meta.json"))?)?;
        meta.acquisition.validate()?;
        let manifest: Vec<ManifestEntry> =
            serde_json::from_slice(&fs::read(dir.join("manifest.json"))?)?;
        if manifest.is_empty() {
            return Err(Error::InvalidInput("fibre manifest lists no strata".into()));
        }
        let mut strata = Vec::with_capacity(manifest.len());
        for (pos, entry) in manifest.into_iter().enumerate() {
            if entry.index != pos {
                return Err(Error::InvalidInput(format!(
                    "manifest strata are not contiguous: expected {pos}, found {}",
                    entry.index
                )));
            }
            if (pos == 0) != entry.chain.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "stratum {pos} has an inconsistent operator chain"
                )));
            }
            if chain_hash(&entry.chain) != entry.hash {
                return Err(Error::InvalidInput(format!("stratum {pos} chain hash mismatch")));
            }
            if pos == 0 && entry.record_dim != meta.acquisition.samples {
                return Err(Error::RecordShape {
                    expected: meta.acquisition.samples,
                    got: entry.record_dim,
                });
            }
            let bytes = fs::read(dir.join(format!("stratum_{pos}.bin")))?;
            let expected = entry.cells.len() * entry.record_dim * 8;
            if bytes.len() != expected {
                return Err(Error::InvalidInput(format!(
                    "stratum {pos}: payload has {} bytes, manifest implies {expected}",
                    bytes.len()
                )));
            }
            let values: Vec<f64> = bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            let mut grid = BTreeMap::new();
            let dim = entry.record_dim.max(1);
            for (cell, chunk) in entry.cells.iter().zip(values.chunks(dim)) {
                let [j, k] = *cell;
                if j >= meta.acquisition.channels || k >= meta.acquisition.acquisitions {
                    return Err(Error::InvalidInput(format!(
                        "stratum {pos}: cell ({j}, {k}) outside the grid"
                    )));
                }
                if grid.insert((j, k), chunk.to_vec()).is_some() {
                    return Err(Error::InvalidInput(format!(
                        "stratum {pos}: cell ({j}, {k}) listed twice"
                    )));
                }
            }
            strata.push(Arc::new(Stratum {
                index: pos,
                record_dim: entry.record_dim,
                chain: entry.chain,
                chain_hash: entry.hash,
                grid,
            }));
        }
        Ok(Fibre {
            structure_id: meta.structure_id,
            config: meta.acquisition,
            epoch: meta.epoch,
            strata,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn save_load_round_trip() {
        let config = AcquisitionConfig {
            channels: 2,
            samples: 8,
            acquisitions: 3,
            sample_rate: 8.0,
            interval: 5.0,
            channel_sensors: [(0, "S1".to_string()), (1, "S2".to_string())].into(),
        };
        let mut f = Fibre::new("bridge", config).unwrap();
        for k in 0..3 {
            f.ingest(0, k, (0..8).map(|i| (i * k) as f64 + 0.1).collect(), 5.0 * k as f64)
                .unwrap();
        }
        f.ingest(1, 2, vec![1.5; 8], 10.0).unwrap();
        f.apply_operator(0, &OperatorSpec::dft()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        f.save(dir.path()).unwrap();
        let g = Fibre::load(dir.path()).unwrap();
        assert_eq!(f, g);
        let raw = fs::read(dir.path().join("stratum_0.bin")).unwrap();
        assert_eq!(raw.len(), 4 * 8 * 8);
        assert_eq!(f64::from_le_bytes(raw[..8].try_into().unwrap()), 0.1);
    }
}
