use std::path::{Path, PathBuf};

use pbshm_core::graph::Provenance;
use pbshm_core::par::Execution;
use pbshm_core::physics::{CampaignConfig, PopulatedFibre};
use pbshm_core::transfer::PhysicsOracle;

use crate::error::{CliError, CliResult};
use crate::files::{labels_csv, load_family, read_json, MemberEntry, PopulationFile, RunContext};

pub fn oracle_for(campaign: &CampaignConfig, seed: u64, path: &Path, exec: Execution) -> CliResult<PhysicsOracle> {
    Ok(PhysicsOracle {
        conditions: campaign.conditions().map_err(|e| CliError::from(e).at(path))?,
        settings: campaign.settings(seed),
        exec,
    })
}

/// Runs a campaign: one fibre directory per instance with its labels, a
/// features CSV over all instances, and a population file that refers to
/// the fibres.
pub fn run(ctx: &mut RunContext, config: &Path, exec: Execution) -> CliResult<()> {
    let campaign: CampaignConfig = read_json(config)?;
    let seed = ctx.seed.unwrap_or(campaign.seed);
    ctx.seed = Some(seed);
    let family = load_family(&campaign.family, config)?;
    let oracle = oracle_for(&campaign, seed, config, exec)?;
    let instances = campaign.instances(&family, seed).map_err(|e| CliError::from(e).at(config))?;

    let mut population = PopulationFile::default();
    let mut features = String::from("structure,acquisition,label");
    for d in 0..campaign_peaks(&oracle) {
        features.push_str(&format!(",f{}", d + 1));
    }
    features.push('\n');
    for (id, inst) in &instances {
        ctx.log(format!("simulating {id}"));
        let populated = oracle.populate(id, inst)?;
        let rel = PathBuf::from("fibres").join(id);
        populated.fibre.save(&ctx.out.join(&rel))?;
        ctx.write(rel.join("labels.csv"), labels_csv(&populated.labels).as_bytes())?;
        ctx.record_dir(&rel)?;
        inventory(id, &populated)?;

        let (rows, labels) = populated.features()?;
        for (k, (row, label)) in rows.iter().zip(&labels).enumerate() {
            features.push_str(&format!("{id},{k},{label}"));
            for v in row {
                features.push_str(&format!(",{v}"));
            }
            features.push('\n');
        }
        population.members.push(MemberEntry {
            id: id.clone(),
            family: Some(campaign.family.clone()),
            theta: Some(inst.theta().clone()),
            structure: None,
            provenance: Provenance::Simulated,
            fibre: Some(rel),
        });
    }
    ctx.write("features.csv", features.as_bytes())?;
    ctx.write_json("population.json", &population)?;
    Ok(())
}

fn campaign_peaks(oracle: &PhysicsOracle) -> usize {
    oracle.settings.peaks
}

fn inventory(id: &str, p: &PopulatedFibre) -> CliResult<()> {
    println!("{id}:");
    for m in 0..p.fibre.stratum_count() {
        let s = p.fibre.project_stratum(m)?;
        let chain: Vec<&str> = s.chain().iter().map(|o| o.name.as_str()).collect();
        let chain = if chain.is_empty() { "raw".to_string() } else { chain.join(" > ") };
        println!("  stratum {m}: {chain}, {} cells of {} values", s.cell_count(), s.record_dim());
    }
    Ok(())
}
