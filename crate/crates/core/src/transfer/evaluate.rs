//! Scoring transfers and the domain-adaptation comparator.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::affine::{AffineStep, TransferMap};
use super::ddt::{ddt_map, two_step_map, DdtOptions, Oracle, Participant};
use super::domain::{nca, Domain};
use super::knn::{accuracy, train_localiser, ClassifierConfig, Task};
use crate::error::{Error, Result};
use crate::family::geodesic;
use crate::graph::{graph_distance, MetricConfig, Population, Provenance};

/// Counts of (true label, predicted label).
pub type Confusion = BTreeMap<(usize, usize), usize>;

pub fn confusion(truth: &[usize], predicted: &[usize]) -> Confusion {
    let mut c = Confusion::new();
    for (&t, &p) in truth.iter().zip(predicted) {
        *c.entry((t, p)).or_default() += 1;
    }
    c
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    /// Accuracy on target features fed to the classifier unchanged.
    pub raw: f64,
    /// Accuracy after the transfer map.
    pub mapped: f64,
    pub confusion: Confusion,
}

/// Scores `task` on target data before and after `map`.
pub fn evaluate_transfer(
    task: &Task,
    map: &TransferMap,
    target_x: &[Vec<f64>],
    target_y: &[usize],
) -> Result<Evaluation> {
    if target_x.len() != target_y.len() {
        return Err(Error::InvalidInput("target rows and labels differ in count".into()));
    }
    if let Some(r) = target_x.iter().find(|r| r.len() != task.dim()) {
        return Err(Error::Compatibility(format!(
            "target features have {} dimensions, classifier expects {}",
            r.len(),
            task.dim()
        )));
    }
    let raw = task.predict_all(target_x);
    let mapped = task.predict_all(&map.apply_all(target_x));
    Ok(Evaluation {
        raw: accuracy(&raw, target_y),
        mapped: accuracy(&mapped, target_y),
        confusion: confusion(target_y, &mapped),
    })
}

/// Cross-validated accuracy on one labelled domain; row `i` is in fold
/// `i mod folds`.
pub fn in_domain_accuracy(domain: &Domain, config: ClassifierConfig, folds: usize) -> Result<f64> {
    let (truth, predicted) = cross_validate(domain, config, folds)?;
    Ok(accuracy(&predicted, truth))
}

/// Held-out prediction for every row, with the labels they are scored
/// against.
pub fn cross_validate(domain: &Domain, config: ClassifierConfig, folds: usize) -> Result<(&[usize], Vec<usize>)> {
    let labels = domain
        .labels
        .as_ref()
        .ok_or_else(|| Error::Training("in-domain accuracy needs labels".into()))?;
    if folds < 2 {
        return Err(Error::InvalidInput("cross-validation needs at least two folds".into()));
    }
    let mut predicted = vec![0; domain.len()];
    for f in 0..folds {
        let (mut tx, mut ty, mut qx, mut qi) = (vec![], vec![], vec![], vec![]);
        for (i, (x, &y)) in domain.features.iter().zip(labels).enumerate() {
            if i % folds == f {
                qx.push(x.clone());
                qi.push(i);
            } else {
                tx.push(x.clone());
                ty.push(y);
            }
        }
        if qx.is_empty() {
            continue;
        }
        let task = train_localiser(&tx, &ty, config)?;
        for (i, p) in qi.into_iter().zip(task.predict_all(&qx)) {
            predicted[i] = p;
        }
    }
    Ok((labels, predicted))
}

/// Both domains aligned into a shared standardised frame, with a localiser
/// trained there.
#[derive(Clone, Debug)]
pub struct DaModel {
    pub source_step: AffineStep,
    pub target_step: AffineStep,
    pub task: Task,
}

impl DaModel {
    pub fn predict_target(&self, rows: &[Vec<f64>]) -> Vec<usize> {
        let aligned: Vec<Vec<f64>> = rows.iter().map(|r| self.target_step.apply(r)).collect();
        self.task.predict_all(&aligned)
    }
}

pub fn domain_adaptation_baseline(
    source: &Domain,
    target: &Domain,
    config: ClassifierConfig,
) -> Result<DaModel> {
    if source.dim() != target.dim() {
        return Err(Error::Compatibility(format!(
            "source features have {} dimensions, target {}",
            source.dim(),
            target.dim()
        )));
    }
    let labels = source
        .labels
        .as_ref()
        .ok_or_else(|| Error::Training("source domain needs labels".into()))?;
    let (aligned, source_step) = nca(&source.features, &source.nc_rows)?;
    let (_, target_step) = nca(&target.features, &target.nc_rows)?;
    let task = train_localiser(&aligned, labels, config)?;
    Ok(DaModel {
        source_step,
        target_step,
        task,
    })
}

/// One row of a transfer campaign report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub source: String,
    pub target: String,
    /// Structure-metric distance between source and target.
    pub distance: f64,
    /// Normalised parameter-space length of the path.
    pub path_length: f64,
    pub leg1: Option<f64>,
    pub leg2: Option<f64>,
    pub raw: f64,
    pub ddt: f64,
    pub two_step: Option<f64>,
    pub da: f64,
    pub in_domain: f64,
    #[serde(skip)]
    pub confusion: Confusion,
}

impl TransferReport {
    pub const CSV_HEADER: &'static str =
        "source,target,distance,path_length,leg1,leg2,raw,ddt,two_step,da,in_domain";

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.source,
            self.target,
            self.distance,
            self.path_length,
            opt(self.leg1),
            opt(self.leg2),
            self.raw,
            self.ddt,
            opt(self.two_step),
            self.da,
            self.in_domain
        )
    }
}

/// Adds the interpolating structure of a two-step transfer to `population`
/// as a simulated member named `<source>~<target>`, returning that name.
pub fn register_interpolant(
    population: &mut Population,
    source: &str,
    target: &str,
    two: &super::ddt::TwoStepMap,
) -> Result<String> {
    let id = format!("{source}~{target}");
    population.insert_instance(id.clone(), two.interpolant.clone(), Provenance::Simulated)?;
    Ok(id)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PairOptions {
    pub ddt: DdtOptions,
    pub classifier: ClassifierConfig,
    pub use_interpolator: bool,
    pub folds: usize,
}

impl Default for PairOptions {
    fn default() -> Self {
        PairOptions {
            ddt: DdtOptions::default(),
            classifier: ClassifierConfig::default(),
            use_interpolator: false,
            folds: 5,
        }
    }
}

/// Everything produced by one source/target experiment.
#[derive(Clone, Debug)]
pub struct PairOutcome {
    pub report: TransferReport,
    pub map: TransferMap,
    pub two_step: Option<super::ddt::TwoStepMap>,
}

/// Runs raw, DDT, optional two-step and DA transfers for one pair. The
/// target's labels are used only for scoring.
pub fn run_pair(
    source: &Participant,
    target: &Participant,
    oracle: &dyn Oracle,
    metric: &MetricConfig,
    opts: &PairOptions,
) -> Result<PairOutcome> {
    let source_labels = source
        .domain
        .labels
        .as_ref()
        .ok_or_else(|| Error::Training(format!("source {} has no labels", source.id)))?;
    let target_labels = target
        .domain
        .labels
        .as_ref()
        .ok_or_else(|| Error::InvalidInput(format!("target {} has no labels to score", target.id)))?;
    let task = train_localiser(&source.domain.features, source_labels, opts.classifier)?;
    let path = geodesic(&target.instance, &source.instance)?;
    let map = ddt_map(&source.domain, &target.domain, &path, oracle, &opts.ddt)?;
    let in_domain = in_domain_accuracy(&source.domain, opts.classifier, opts.folds)?;
    // A structure scored against itself is scored on held-out folds.
    let own = source.id == target.id;
    let eval = if own {
        let (truth, predicted) = cross_validate(&source.domain, opts.classifier, opts.folds)?;
        Evaluation {
            raw: in_domain,
            mapped: in_domain,
            confusion: confusion(truth, &predicted),
        }
    } else {
        evaluate_transfer(&task, &map, &target.domain.features, target_labels)?
    };

    let two = if opts.use_interpolator {
        Some(two_step_map(source, target, oracle, &opts.ddt)?)
    } else {
        None
    };
    let two_step_acc = match &two {
        Some(_) if own => Some(in_domain),
        Some(t) => Some(evaluate_transfer(&task, &t.composed, &target.domain.features, target_labels)?.mapped),
        None => None,
    };

    let da_acc = if own {
        in_domain
    } else {
        let da = domain_adaptation_baseline(&source.domain, &target.domain.unlabelled(), opts.classifier)?;
        accuracy(&da.predict_target(&target.domain.features), target_labels)
    };

    let distance = graph_distance(&source.instance.graph()?, &target.instance.graph()?, metric)?;
    let report = TransferReport {
        source: source.id.clone(),
        target: target.id.clone(),
        distance,
        path_length: path.length(),
        leg1: two.as_ref().map(|t| t.leg_distances.0),
        leg2: two.as_ref().map(|t| t.leg_distances.1),
        raw: eval.raw,
        ddt: eval.mapped,
        two_step: two_step_acc,
        da: da_acc,
        in_domain,
        confusion: eval.confusion,
    };
    Ok(PairOutcome {
        report,
        map,
        two_step: two,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clusters(offset: f64) -> Domain {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..60 {
            let c = i % 3;
            let jitter = ((i * 37 % 11) as f64 - 5.0) * 0.01;
            x.push(vec![c as f64 * 4.0 + jitter + offset, (c * c) as f64 - jitter + offset]);
            y.push(c);
        }
        Domain::labelled(x, y).unwrap()
    }

    #[test]
    fn separated_clusters_cross_validate_perfectly() {
        let acc = in_domain_accuracy(&clusters(0.0), ClassifierConfig::default(), 5).unwrap();
        assert!(acc >= 0.95);
    }

    #[test]
    fn identity_map_matches_in_domain_labels() {
        let d = clusters(0.0);
        let labels = d.labels.clone().unwrap();
        let task = train_localiser(&d.features, &labels, ClassifierConfig::default()).unwrap();
        let e = evaluate_transfer(&task, &TransferMap::identity(), &d.features, &labels).unwrap();
        assert_eq!(e.raw, e.mapped);
        assert_eq!(e.mapped, 1.0);
    }

    #[test]
    fn da_recovers_mean_shift() {
        let s = clusters(0.0);
        let t = clusters(7.5);
        let model = domain_adaptation_baseline(&s, &t.unlabelled(), ClassifierConfig::default()).unwrap();
        let acc = accuracy(&model.predict_target(&t.features), t.labels.as_ref().unwrap());
        let ceiling = in_domain_accuracy(&s, ClassifierConfig::default(), 5).unwrap();
        assert!(acc >= ceiling - 0.02, "{acc} vs {ceiling}");
    }

    #[test]
    fn csv_row_has_header_width() {
        let r = TransferReport {
            source: "a".into(),
            target: "b".into(),
            distance: 0.1,
            path_length: 0.2,
            leg1: None,
            leg2: None,
            raw: 0.5,
            ddt: 1.0,
            two_step: None,
            da: 0.9,
            in_domain: 1.0,
            confusion: Confusion::new(),
        };
        assert_eq!(
            r.csv_row().split(',').count(),
            TransferReport::CSV_HEADER.split(',').count()
        );
    }
}
