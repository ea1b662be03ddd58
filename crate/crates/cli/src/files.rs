//! Input documents, atomic output and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use pbshm_core::family::{builtin_family, FamilyTemplate, StructureInstance, ThetaVector};
use pbshm_core::graph::{AttributedGraph, Provenance, StructureFile};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Reads a JSON document, naming the file in any error.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::from(e).at(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::from(e).at(path))
}

/// Resolves `p` against the directory holding `anchor`.
pub fn relative_to(anchor: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        anchor.parent().unwrap_or(Path::new(".")).join(p)
    }
}

pub fn load_family(name: &str, anchor: &Path) -> CliResult<Arc<FamilyTemplate>> {
    if let Some(f) = builtin_family(name) {
        return Ok(Arc::new(f));
    }
    let path = relative_to(anchor, Path::new(name));
    if !path.exists() {
        return Err(CliError::Input(format!(
            "{}: family {name} is neither built in nor a readable file",
            anchor.display()
        )));
    }
    let family = FamilyTemplate::read(&path).map_err(|e| CliError::from(e).at(&path))?;
    Ok(Arc::new(family))
}

/// One population member: a family instance, a structure file, or both.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemberEntry {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<ThetaVector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structure: Option<PathBuf>,
    #[serde(default)]
    pub provenance: Provenance,
    /// Fibre directory written by `simulate`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fibre: Option<PathBuf>,
}

/// Population document. `campaigns` lists campaign files whose sampled
/// instances `population build` adds to the explicit members.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PopulationFile {
    #[serde(default)]
    pub members: Vec<MemberEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub campaigns: Vec<PathBuf>,
}

/// A member resolved against its population file.
pub struct LoadedMember {
    pub entry: MemberEntry,
    pub instance: Option<StructureInstance>,
    pub graph: AttributedGraph,
    pub fibre_dir: Option<PathBuf>,
}

impl MemberEntry {
    pub fn load(&self, anchor: &Path) -> CliResult<LoadedMember> {
        let located = |e: CliError| CliError::Input(format!("{}: member {}: {e}", anchor.display(), self.id));
        let instance = match (&self.family, &self.theta) {
            (Some(f), Some(t)) => {
                let family = load_family(f, anchor)?;
                Some(StructureInstance::new(family, t.clone()).map_err(|e| located(e.into()))?)
            }
            (None, None) => None,
            _ => {
                return Err(located(CliError::Input("family and theta must be given together".into())));
            }
        };
        let graph = match (&instance, &self.structure) {
            (Some(inst), _) => inst.graph().map_err(|e| located(e.into()))?,
            (None, Some(p)) => {
                let path = relative_to(anchor, p);
                let file: StructureFile = read_json(&path)?;
                file.to_graph().map_err(|e| CliError::from(e).at(&path))?
            }
            (None, None) => {
                return Err(located(CliError::Input("needs family and theta, or a structure file".into())));
            }
        };
        Ok(LoadedMember {
            entry: self.clone(),
            instance,
            graph,
            fibre_dir: self.fibre.as_ref().map(|p| relative_to(anchor, p)),
        })
    }
}

impl PopulationFile {
    pub fn load_members(&self, anchor: &Path) -> CliResult<Vec<LoadedMember>> {
        let mut seen = std::collections::BTreeSet::new();
        for m in &self.members {
            if !seen.insert(&m.id) {
                return Err(CliError::Input(format!("{}: duplicate member id {}", anchor.display(), m.id)));
            }
        }
        self.members.iter().map(|m| m.load(anchor)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputEntry {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: PathBuf,
    pub config_digest: String,
    pub seed: Option<u64>,
    pub tool_version: String,
    pub outputs: Vec<OutputEntry>,
    pub wall_time_s: f64,
}

/// Output directory of one run; records every file written.
pub struct RunContext {
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub verbose: bool,
    outputs: BTreeMap<PathBuf, String>,
    started: Instant,
}

impl RunContext {
    pub fn new(out: PathBuf, seed: Option<u64>, verbose: bool) -> CliResult<Self> {
        fs::create_dir_all(&out).map_err(|e| CliError::from(e).at(&out))?;
        Ok(RunContext {
            out,
            seed,
            verbose,
            outputs: BTreeMap::new(),
            started: Instant::now(),
        })
    }

    pub fn log(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("{}", msg.as_ref());
        }
    }

    /// Writes `bytes` to `rel` under the output root via a temporary file
    /// and a rename.
    pub fn write(&mut self, rel: impl AsRef<Path>, bytes: &[u8]) -> CliResult<PathBuf> {
        let path = self.out.join(rel.as_ref());
        write_atomic(&path, bytes)?;
        self.outputs.insert(rel.as_ref().to_path_buf(), sha256_hex(bytes));
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, rel: impl AsRef<Path>, value: &T) -> CliResult<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
        text.push('\n');
        self.write(rel, text.as_bytes())
    }

    /// Records every file below `rel` (already written by other means).
    pub fn record_dir(&mut self, rel: impl AsRef<Path>) -> CliResult<()> {
        let dir = self.out.join(rel.as_ref());
        let mut names: Vec<_> = fs::read_dir(&dir)?.collect::<Result<_, _>>()?;
        names.sort_by_key(|e| e.file_name());
        for e in names {
            if e.file_type()?.is_file() {
                let bytes = fs::read(e.path())?;
                self.outputs.insert(rel.as_ref().join(e.file_name()), sha256_hex(&bytes));
            }
        }
        Ok(())
    }

    /// Writes `run_manifest.json`; called once at the end of a command.
    pub fn finish(mut self, command: &str, config: &Path) -> CliResult<PathBuf> {
        let config_bytes = fs::read(config).map_err(|e| CliError::from(e).at(config))?;
        let manifest = RunManifest {
            command: command.to_string(),
            config: config.to_path_buf(),
            config_digest: sha256_hex(&config_bytes),
            seed: self.seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            outputs: std::mem::take(&mut self.outputs)
                .into_iter()
                .map(|(path, sha256)| OutputEntry { path, sha256 })
                .collect(),
            wall_time_s: self.started.elapsed().as_secs_f64(),
        };
        let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Internal(e.to_string()))?;
        text.push('\n');
        let path = self.out.join("run_manifest.json");
        write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::from(e).at(dir))?;
    }
    let name = path
        .file_name()
        .ok_or_else(|| CliError::Input(format!("{} is not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, bytes).map_err(|e| CliError::from(e).at(&tmp))?;
    fs::rename(&tmp, path).map_err(|e| CliError::from(e).at(path))?;
    Ok(())
}

/// `acquisition,label` rows.
pub fn labels_csv(labels: &[usize]) -> String {
    let mut s = String::from("acquisition,label\n");
    for (k, l) in labels.iter().enumerate() {
        s.push_str(&format!("{k},{l}\n"));
    }
    s
}

pub fn read_labels_csv(path: &Path) -> CliResult<Vec<usize>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::from(e).at(path))?;
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || CliError::Input(format!("{}:{}: expected `acquisition,label`", path.display(), i + 1));
        let (k, l) = line.split_once(',').ok_or_else(bad)?;
        let (k, l): (usize, usize) = (k.trim().parse().map_err(|_| bad())?, l.trim().parse().map_err(|_| bad())?);
        if k != labels.len() {
            return Err(CliError::Input(format!(
                "{}:{}: acquisitions must be listed in order",
                path.display(),
                i + 1
            )));
        }
        labels.push(l);
    }
    Ok(labels)
}
