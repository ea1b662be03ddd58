use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use pbshm_core::fibre::Fibre;
use pbshm_core::graph::MetricConfig;
use pbshm_core::par::{self, Execution};
use pbshm_core::physics::{CampaignConfig, PopulatedFibre};
use pbshm_core::transfer::{
    calibrate_threshold, register_interpolant, run_pair, Alignment, ClassifierConfig, DdtOptions,
    Domain, Oracle, PairOptions, Participant, PhysicsOracle, TransferReport,
};
use serde::{Deserialize, Serialize};

use super::population;
use super::simulate::oracle_for;
use crate::error::{CliError, CliResult};
use crate::files::{read_json, read_labels_csv, relative_to, LoadedMember, MemberEntry, PopulationFile, RunContext};
use crate::svg;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PairSpec {
    /// `"all"` (every ordered pair).
    All(String),
    List(Vec<[String; 2]>),
}

fn default_steps() -> usize {
    DdtOptions::default().steps
}

fn default_target() -> f64 {
    0.9
}

/// Transfer campaign document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferConfig {
    pub population: PathBuf,
    /// Campaign file defining conditions and acquisition settings for
    /// simulated structures.
    pub campaign: PathBuf,
    pub pairs: PairSpec,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default)]
    pub use_interpolator: bool,
    #[serde(default)]
    pub classifier: ClassifierConfig,
    #[serde(default)]
    pub alignment: Alignment,
    #[serde(default = "default_target")]
    pub target_accuracy: f64,
    /// Existing report CSV; `calibrate` reads its pairs instead of running
    /// the transfers again.
    #[serde(default)]
    pub report: Option<PathBuf>,
}

struct Prepared {
    participants: BTreeMap<String, Participant>,
    pairs: Vec<(String, String)>,
    population: PopulationFile,
    population_path: PathBuf,
    members: Vec<LoadedMember>,
    oracle: PhysicsOracle,
    options: PairOptions,
    all_simulated: bool,
}

fn resolve_pairs(spec: &PairSpec, ids: &[String], config: &Path) -> CliResult<Vec<(String, String)>> {
    match spec {
        PairSpec::All(s) if s == "all" || s == "all-pairs" => Ok(ids
            .iter()
            .flat_map(|a| ids.iter().filter(move |b| *b != a).map(move |b| (a.clone(), b.clone())))
            .collect()),
        PairSpec::All(s) => Err(CliError::Input(format!(
            "{}: pairs must be \"all\" or a list of [source, target], got {s:?}",
            config.display()
        ))),
        PairSpec::List(list) => {
            for [a, b] in list {
                for id in [a, b] {
                    if !ids.contains(id) {
                        return Err(CliError::Input(format!("{}: pair refers to unknown member {id}", config.display())));
                    }
                }
            }
            Ok(list.iter().map(|[a, b]| (a.clone(), b.clone())).collect())
        }
    }
}

fn member_domain(m: &LoadedMember, oracle: &PhysicsOracle) -> CliResult<Domain> {
    match &m.fibre_dir {
        Some(dir) => {
            let fibre = Fibre::load(dir).map_err(|e| CliError::from(e).at(dir))?;
            let labels = read_labels_csv(&dir.join("labels.csv"))?;
            let (x, y) = PopulatedFibre::from_fibre(fibre, labels)
                .and_then(|p| p.features())
                .map_err(|e| CliError::from(e).at(dir))?;
            Ok(Domain::labelled(x, y)?)
        }
        None => {
            let inst = m.instance.as_ref().expect("checked by caller");
            Ok(oracle.simulate(inst)?)
        }
    }
}

fn prepare(ctx: &mut RunContext, config: &Path, exec: Execution) -> CliResult<(TransferConfig, Prepared)> {
    let cfg: TransferConfig = read_json(config)?;
    if cfg.steps == 0 {
        return Err(CliError::Input(format!("{}: steps must be at least 1", config.display())));
    }
    let pop_path = relative_to(config, &cfg.population);
    let campaign_path = relative_to(config, &cfg.campaign);
    let campaign: CampaignConfig = read_json(&campaign_path)?;
    let seed = ctx.seed.unwrap_or(campaign.seed);
    ctx.seed = Some(seed);
    let oracle = oracle_for(&campaign, seed, &campaign_path, exec)?;
    let population = population::expand(&pop_path, Some(seed))?;
    let members = population.load_members(&pop_path)?;
    let ids: Vec<String> = members.iter().map(|m| m.entry.id.clone()).collect();
    let pairs = resolve_pairs(&cfg.pairs, &ids, config)?;

    let used: std::collections::BTreeSet<&String> = pairs.iter().flat_map(|(a, b)| [a, b]).collect();
    let needed: Vec<&LoadedMember> = members.iter().filter(|m| used.contains(&m.entry.id)).collect();
    for m in &needed {
        if m.instance.is_none() {
            return Err(CliError::Input(format!(
                "{}: member {} has no family instance; transfer needs family and theta",
                pop_path.display(),
                m.entry.id
            )));
        }
    }
    let domains = par::try_map(&needed, exec, |m| {
        ctx.log(format!("loading features of {}", m.entry.id));
        member_domain(m, &oracle)
    })?;
    let participants = needed
        .iter()
        .zip(domains)
        .map(|(m, domain)| {
            let p = Participant {
                id: m.entry.id.clone(),
                instance: m.instance.clone().expect("checked above"),
                domain,
            };
            (p.id.clone(), p)
        })
        .collect();
    let all_simulated = members
        .iter()
        .all(|m| m.entry.provenance == pbshm_core::graph::Provenance::Simulated);
    let options = PairOptions {
        ddt: DdtOptions {
            steps: cfg.steps,
            alignment: cfg.alignment,
            exec,
        },
        classifier: cfg.classifier,
        use_interpolator: cfg.use_interpolator,
        ..Default::default()
    };
    Ok((
        cfg,
        Prepared {
            participants,
            pairs,
            population,
            population_path: pop_path,
            members,
            oracle,
            options,
            all_simulated,
        },
    ))
}

#[derive(Serialize)]
struct PairSummary<'a> {
    #[serde(flatten)]
    report: &'a TransferReport,
    /// `[true label, predicted label, count]` after the transfer map.
    confusion: Vec<[usize; 3]>,
    interpolant: Option<String>,
}

#[derive(Serialize)]
struct Summary<'a> {
    pairs: usize,
    steps: usize,
    use_interpolator: bool,
    simulated_only: bool,
    mean_raw: f64,
    mean_ddt: f64,
    mean_da: f64,
    mean_in_domain: f64,
    reports: Vec<PairSummary<'a>>,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

fn run_all(ctx: &mut RunContext, prep: &mut Prepared, exec: Execution, figures: bool) -> CliResult<Vec<TransferReport>> {
    let metric = MetricConfig::default();
    let outcomes = par::try_map(&prep.pairs, exec, |(s, t)| {
        ctx.log(format!("transfer {s} -> {t}"));
        run_pair(&prep.participants[s], &prep.participants[t], &prep.oracle, &metric, &prep.options)
            .map_err(|e| CliError::from(e).at(Path::new(&format!("{s} -> {t}"))))
    })?;
    let mut ordered: Vec<_> = prep.pairs.iter().cloned().zip(outcomes).collect();
    ordered.sort_by(|a, b| a.0.cmp(&b.0));

    let mut pop = population::population_of(&prep.members)?;
    let mut interpolants = Vec::new();
    let mut reports = Vec::new();
    let mut summaries = Vec::new();
    for ((s, t), outcome) in &ordered {
        let interpolant = match &outcome.two_step {
            Some(two) => {
                let id = register_interpolant(&mut pop, s, t, two)?;
                interpolants.push(MemberEntry {
                    id: id.clone(),
                    family: Some(two.interpolant.family().name.clone()),
                    theta: Some(two.interpolant.theta().clone()),
                    structure: None,
                    provenance: pbshm_core::graph::Provenance::Simulated,
                    fibre: None,
                });
                Some(id)
            }
            None => None,
        };
        if figures {
            let (src, tgt) = (&prep.participants[s], &prep.participants[t]);
            let mapped = outcome.map.apply_all(&tgt.domain.features);
            let doc = svg::scatter(
                &format!("{s} (source) and {t} mapped"),
                &src.domain.features,
                src.domain.labels.as_deref().unwrap_or(&[]),
                &mapped,
                tgt.domain.labels.as_deref().unwrap_or(&[]),
            );
            ctx.write(PathBuf::from("scatter").join(format!("{s}__{t}.svg")), doc.as_bytes())?;
        }
        reports.push(outcome.report.clone());
        summaries.push((outcome, interpolant));
    }

    if figures {
        let mut csv = String::from(TransferReport::CSV_HEADER);
        csv.push('\n');
        for r in &reports {
            csv.push_str(&r.csv_row());
            csv.push('\n');
        }
        ctx.write("report.csv", csv.as_bytes())?;
        let summary = Summary {
            pairs: reports.len(),
            steps: prep.options.ddt.steps,
            use_interpolator: prep.options.use_interpolator,
            simulated_only: prep.all_simulated,
            mean_raw: mean(reports.iter().map(|r| r.raw)),
            mean_ddt: mean(reports.iter().map(|r| r.ddt)),
            mean_da: mean(reports.iter().map(|r| r.da)),
            mean_in_domain: mean(reports.iter().map(|r| r.in_domain)),
            reports: summaries
                .iter()
                .map(|(o, i)| PairSummary {
                    report: &o.report,
                    confusion: o.report.confusion.iter().map(|(&(a, b), &n)| [a, b, n]).collect(),
                    interpolant: i.clone(),
                })
                .collect(),
        };
        ctx.write_json("summary.json", &summary)?;
        if !interpolants.is_empty() {
            let mut grown = prep.population.clone();
            for m in &mut grown.members {
                for p in [&mut m.structure, &mut m.fibre].into_iter().flatten() {
                    let abs = relative_to(&prep.population_path, p);
                    *p = abs.canonicalize().unwrap_or(abs);
                }
            }
            grown.members.extend(interpolants);
            ctx.write_json("population_with_interpolants.json", &grown)?;
        }
    }
    Ok(reports)
}

pub fn run(ctx: &mut RunContext, config: &Path, exec: Execution) -> CliResult<()> {
    let (_, mut prep) = prepare(ctx, config, exec)?;
    let reports = run_all(ctx, &mut prep, exec, true)?;
    println!("{}", TransferReport::CSV_HEADER);
    for r in &reports {
        println!("{}", r.csv_row());
    }
    Ok(())
}

/// `(distance, ddt accuracy)` pairs from a report CSV.
fn pairs_from_report(path: &Path) -> CliResult<Vec<(f64, f64)>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::from(e).at(path))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| CliError::Input(format!("{}: missing column {name}", path.display())))
    };
    let (dc, ac) = (col("distance")?, col("ddt")?);
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        let parse = |c: usize| -> CliResult<f64> {
            cells
                .get(c)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| CliError::Input(format!("{}:{}: bad number in column {}", path.display(), i + 2, header[c])))
        };
        out.push((parse(dc)?, parse(ac)?));
    }
    Ok(out)
}

#[derive(Serialize)]
struct CalibrationDoc {
    threshold: f64,
    warning: bool,
    target_accuracy: f64,
    pairs: usize,
    /// True when every structure is simulated, so the threshold has not
    /// been checked against real data; unknown when read from a report.
    simulated_only: Option<bool>,
}

pub fn calibrate(ctx: &mut RunContext, config: &Path, target: Option<f64>, exec: Execution) -> CliResult<()> {
    let cfg: TransferConfig = read_json(config)?;
    let target = target.unwrap_or(cfg.target_accuracy);
    if !(0.0..=1.0).contains(&target) {
        return Err(CliError::Input(format!("target accuracy {target} outside [0, 1]")));
    }
    let (pairs, simulated_only) = match &cfg.report {
        Some(p) => (pairs_from_report(&relative_to(config, p))?, None),
        None => {
            let (_, mut prep) = prepare(ctx, config, exec)?;
            let reports = run_all(ctx, &mut prep, exec, false)?;
            (reports.iter().map(|r| (r.distance, r.ddt)).collect(), Some(prep.all_simulated))
        }
    };
    let cal = calibrate_threshold(&pairs, target)?;
    let mut curve = String::from("distance,accuracy,fitted\n");
    for (d, a, f) in &cal.curve {
        curve.push_str(&format!("{d},{a},{f}\n"));
    }
    ctx.write("calibration_curve.csv", curve.as_bytes())?;
    ctx.write_json(
        "calibration.json",
        &CalibrationDoc {
            threshold: cal.threshold,
            warning: cal.warning,
            target_accuracy: target,
            pairs: pairs.len(),
            simulated_only,
        },
    )?;
    if cal.warning {
        eprintln!("warning: no distance reaches accuracy {target}; threshold set to 0");
    }
    if simulated_only == Some(true) {
        eprintln!("note: calibrated on simulated structures only");
    }
    println!("d_s = {}", cal.threshold);
    Ok(())
}
