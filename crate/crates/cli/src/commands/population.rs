use std::path::{Path, PathBuf};

use pbshm_core::graph::{MetricConfig, Population, Provenance, StructureFile};
use pbshm_core::par::Execution;
use pbshm_core::physics::CampaignConfig;
use pbshm_core::Error;

use crate::error::{CliError, CliResult};
use crate::files::{load_family, read_json, relative_to, LoadedMember, MemberEntry, PopulationFile, RunContext};

/// Members of a population document with its campaigns expanded into
/// sampled instances.
pub fn expand(config: &Path, seed: Option<u64>) -> CliResult<PopulationFile> {
    let spec: PopulationFile = read_json(config)?;
    let mut members = spec.members.clone();
    for c in &spec.campaigns {
        let path = relative_to(config, c);
        let campaign: CampaignConfig = read_json(&path)?;
        let family = load_family(&campaign.family, &path)?;
        let seed = seed.unwrap_or(campaign.seed);
        for (id, inst) in campaign.instances(&family, seed).map_err(|e| CliError::from(e).at(&path))? {
            members.push(MemberEntry {
                id,
                family: Some(campaign.family.clone()),
                theta: Some(inst.theta().clone()),
                structure: None,
                provenance: Provenance::Simulated,
                fibre: None,
            });
        }
    }
    Ok(PopulationFile {
        members,
        campaigns: Vec::new(),
    })
}

pub fn load(config: &Path, seed: Option<u64>) -> CliResult<Vec<LoadedMember>> {
    expand(config, seed)?.load_members(config)
}

/// Writes one structure file per member and the resolved `population.json`.
pub fn build(ctx: &mut RunContext, config: &Path) -> CliResult<()> {
    let loaded = load(config, ctx.seed)?;
    let mut out = PopulationFile::default();
    for m in loaded {
        let rel = PathBuf::from("structures").join(format!("{}.json", m.entry.id));
        let file = StructureFile::from_graph(&m.entry.id, &m.graph, m.entry.provenance);
        ctx.write_json(&rel, &file)?;
        let mut entry = m.entry;
        entry.structure = Some(rel);
        if let Some(dir) = m.fibre_dir {
            entry.fibre = Some(dir.canonicalize().unwrap_or(dir));
        }
        out.members.push(entry);
    }
    ctx.write_json("population.json", &out)?;
    println!("population of {} members written to {}", out.members.len(), ctx.out.display());
    Ok(())
}

pub fn list(ctx: &mut RunContext, config: &Path) -> CliResult<()> {
    let members = load(config, ctx.seed)?;
    let mut text = String::from("id,provenance,family,vertices,fibre\n");
    println!("{:<24} {:<10} {:<12} {:>8}  fibre", "id", "provenance", "family", "vertices");
    for m in &members {
        let prov = match m.entry.provenance {
            Provenance::Real => "real",
            Provenance::Simulated => "simulated",
        };
        let family = m.entry.family.clone().unwrap_or_else(|| "-".into());
        let fibre = if m.fibre_dir.is_some() { "yes" } else { "no" };
        println!("{:<24} {prov:<10} {family:<12} {:>8}  {fibre}", m.entry.id, m.graph.vertex_count());
        text.push_str(&format!("{},{prov},{family},{},{fibre}\n", m.entry.id, m.graph.vertex_count()));
    }
    ctx.write("population_list.csv", text.as_bytes())?;
    Ok(())
}

pub fn population_of(members: &[LoadedMember]) -> CliResult<Population> {
    let mut pop = Population::new();
    for m in members {
        pop.insert(
            m.entry.id.clone(),
            pbshm_core::graph::Member {
                graph: m.graph.clone(),
                instance: m.instance.clone(),
                fibre: None,
                provenance: m.entry.provenance,
            },
        )?;
    }
    Ok(pop)
}

pub fn distance_matrix(ctx: &mut RunContext, config: &Path, exec: Execution) -> CliResult<()> {
    let members = load(config, ctx.seed)?;
    let pop = population_of(&members)?;
    let ids: Vec<String> = members.iter().map(|m| m.entry.id.clone()).collect();
    let (ids, matrix) = pop
        .distance_matrix(Some(&ids), &MetricConfig::default(), exec)
        .map_err(|e| match e {
            Error::GraphTooLarge { .. } => CliError::Input(e.to_string()),
            other => other.into(),
        })?;
    let mut text = String::from("id");
    for id in &ids {
        text.push(',');
        text.push_str(id);
    }
    text.push('\n');
    for (id, row) in ids.iter().zip(&matrix) {
        text.push_str(id);
        for v in row {
            text.push_str(&format!(",{v}"));
        }
        text.push('\n');
    }
    let path = ctx.write("distance_matrix.csv", text.as_bytes())?;
    println!("{n}x{n} distance matrix written to {}", path.display(), n = ids.len());
    Ok(())
}
