//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use pbshm_core::family::{
    contract, family_distance, geodesic, interpolating_structure, three_span_family,
    two_span_family, FamilyTemplate, Slot, StructureInstance, ThetaVector,
};
use pbshm_core::fibre::{AcquisitionConfig, Fibre, OperatorSpec};
use pbshm_core::graph::{
    graph_distance, graph_distance_parts, mcs_size, AttributedGraph, Attributes, ElementKind,
    IeVertex, MetricConfig,
};
use pbshm_core::par::Execution;
use pbshm_core::physics::{assemble, natural_frequencies, CampaignConfig, ModelOptions};
use pbshm_core::transfer::{
    calibrate_threshold, run_pair, two_step_map, Oracle, PairOptions, Participant, PhysicsOracle,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn base_two_span() -> Vec<f64> {
    vec![
        20.0, 4.0, 0.8, 3.5e10, 2500.0, 0.2, //
        10.0, 0.5, 0.5, 4e9, 2500.0, 0.2, //
        28.0, 4.0, 0.8, 3.5e10, 2500.0, 0.2,
    ]
}

fn base_three_span() -> Vec<f64> {
    let mut t = base_two_span();
    t.extend([10.0, 0.5, 0.5, 4e9, 2500.0, 0.2, 10.0, 4.0, 0.8, 3.5e10, 2500.0, 0.2]);
    t
}

fn single_deck() -> Arc<FamilyTemplate> {
    Arc::new(FamilyTemplate {
        name: "single_deck".into(),
        slots: vec![Slot {
            id: "D1".into(),
            kind: ElementKind::Deck,
        }],
        edges: vec![],
        ground_attachments: vec!["D1".into()],
        sensors: [("S1".to_string(), "D1".to_string())].into(),
        bounds: BTreeMap::new(),
        contractions: vec![],
    })
}

fn pinned_frequency(theta: &[f64], n: usize) -> f64 {
    let (l, w, t, e, rho) = (theta[0], theta[1], theta[2], theta[3], theta[4]);
    let ei = e * w * t.powi(3) / 12.0;
    (n as f64 * PI / l).powi(2) * (ei / (rho * w * t)).sqrt() / (2.0 * PI)
}

fn frequencies(inst: &StructureInstance, n: usize) -> Vec<f64> {
    let model = assemble(inst, &ModelOptions::default()).expect("assemble");
    natural_frequencies(&model, n).expect("eigensolve").frequencies
}

fn fe_fidelity() -> Outcome {
    let theta = vec![20.0, 4.0, 0.8, 3.5e10, 2500.0, 0.2];
    let inst = StructureInstance::new(single_deck(), theta.clone()).map_err(|e| e.to_string())?;
    let mut worst = Vec::new();
    let mut slowest = Duration::ZERO;
    for (ne, tol) in [(8, 1e-2), (32, 1e-3)] {
        let opts = ModelOptions {
            elements_per_deck: ne,
            ..Default::default()
        };
        let t0 = Instant::now();
        let model = assemble(&inst, &opts).map_err(|e| e.to_string())?;
        let f = natural_frequencies(&model, 4).map_err(|e| e.to_string())?.frequencies;
        slowest = slowest.max(t0.elapsed());
        let err = (1..=4)
            .map(|n| (f[n - 1] / pinned_frequency(&theta, n) - 1.0).abs())
            .fold(0.0, f64::max);
        check(err <= tol, || format!("n_e={ne}: relative error {err:.2e} > {tol}"))?;
        worst.push(format!("n_e={ne} max rel err {err:.1e}"));
    }
    check(slowest < Duration::from_secs(1), || format!("solve took {slowest:?}"))?;
    Ok(format!("{}, slowest solve {slowest:.1?}", worst.join(", ")))
}

fn scaling_laws() -> Outcome {
    let f = Arc::new(two_span_family());
    let base = base_two_span();
    let f0 = frequencies(&StructureInstance::new(Arc::clone(&f), base.clone()).unwrap(), 4);
    let scaled = |idx: usize| {
        let mut t = base.clone();
        for b in 0..3 {
            t[b * 6 + idx] *= 2.0;
        }
        frequencies(&StructureInstance::new(Arc::clone(&f), t).unwrap(), 4)
    };
    let (fe, fr) = (scaled(3), scaled(4));
    let mut worst: f64 = 0.0;
    for i in 0..4 {
        let a = (fe[i] / (f0[i] * 2f64.sqrt()) - 1.0).abs();
        let b = (fr[i] * 2f64.sqrt() / f0[i] - 1.0).abs();
        worst = worst.max(a).max(b);
    }
    check(worst <= 1e-9, || format!("relative deviation {worst:.2e}"))?;
    Ok(format!("max relative deviation {worst:.1e}"))
}

fn random_graph(rng: &mut ChaCha8Rng) -> AttributedGraph {
    let n = rng.random_range(2..=7usize);
    let kinds = [ElementKind::Ground, ElementKind::Deck, ElementKind::Pillar];
    let vertices: Vec<IeVertex> = (0..n)
        .map(|i| {
            let kind = if i == 0 { ElementKind::Ground } else { kinds[rng.random_range(0..3)].clone() };
            if kind.is_ground() {
                IeVertex::ground(format!("v{i}"))
            } else {
                let a = Attributes::from_array([
                    rng.random_range(1.0..100.0),
                    rng.random_range(0.1..30.0),
                    rng.random_range(0.05..5.0),
                    rng.random_range(1e9..5e11),
                    rng.random_range(500.0..10_000.0),
                    rng.random_range(0.1..0.45),
                ]);
                IeVertex::element(format!("v{i}"), kind, a)
            }
        })
        .collect();
    let mut edges = Vec::new();
    for i in 1..n {
        edges.push((format!("v{}", rng.random_range(0..i)), format!("v{i}")));
    }
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(0.3) {
                edges.push((format!("v{i}"), format!("v{j}")));
            }
        }
    }
    AttributedGraph::new(vertices, edges, Vec::new()).expect("random graph is valid")
}

/// Largest induced common subgraph by exhaustive enumeration of injective,
/// kind-preserving partial maps.
fn brute_force_mcs(g1: &AttributedGraph, g2: &AttributedGraph) -> usize {
    fn go(i: usize, map: &mut Vec<Option<usize>>, used: &mut Vec<bool>, g1: &AttributedGraph, g2: &AttributedGraph, best: &mut usize) {
        if i == g1.vertex_count() {
            let pairs: Vec<(usize, usize)> = map.iter().enumerate().filter_map(|(u, v)| v.map(|v| (u, v))).collect();
            let induced = pairs.iter().all(|&(u1, v1)| {
                pairs.iter().all(|&(u2, v2)| u1 == u2 || g1.adjacent(u1, u2) == g2.adjacent(v1, v2))
            });
            if induced {
                *best = (*best).max(pairs.len());
            }
            return;
        }
        map.push(None);
        go(i + 1, map, used, g1, g2, best);
        map.pop();
        for v in 0..g2.vertex_count() {
            if !used[v] && g1.vertices()[i].kind == g2.vertices()[v].kind {
                used[v] = true;
                map.push(Some(v));
                go(i + 1, map, used, g1, g2, best);
                map.pop();
                used[v] = false;
            }
        }
    }
    let mut best = 0;
    go(0, &mut Vec::new(), &mut vec![false; g2.vertex_count()], g1, g2, &mut best);
    best
}

fn metric_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = MetricConfig::default();
    let mut worst_asym: f64 = 0.0;
    for pair in 0..200 {
        let (a, b) = (random_graph(&mut rng), random_graph(&mut rng));
        let (fast, slow) = (mcs_size(&a, &b).unwrap(), brute_force_mcs(&a, &b));
        check(fast == slow, || format!("pair {pair}: mcs {fast}, brute force {slow}"))?;
        for g in [&a, &b] {
            let d = graph_distance(g, g, &cfg).unwrap();
            check(d == 0.0, || format!("pair {pair}: D(g, g) = {d}"))?;
        }
        let (ab, ba) = (graph_distance(&a, &b, &cfg).unwrap(), graph_distance(&b, &a, &cfg).unwrap());
        worst_asym = worst_asym.max((ab - ba).abs());
    }
    check(worst_asym <= 1e-12, || format!("asymmetry {worst_asym:.2e}"))?;

    let b2 = Arc::new(two_span_family());
    let b3 = Arc::new(three_span_family());
    let s3 = StructureInstance::new(Arc::clone(&b3), base_three_span()).unwrap();
    let s2 = StructureInstance::new(Arc::clone(&b2), base_two_span()).unwrap();
    let contracted = contract(&b3, &b2).unwrap().apply(&s3).unwrap();
    let parts = graph_distance_parts(&contracted.graph().unwrap(), &s2.graph().unwrap(), &cfg).unwrap();
    check(parts.topological == 0.0, || format!("contracted topological distance {}", parts.topological))?;
    Ok(format!("200 pairs exact, max asymmetry {worst_asym:.1e}, contracted D_top = 0"))
}

fn projection_algebra() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for grid in 0..20 {
        let samples = 64;
        let config = AcquisitionConfig {
            channels: 4,
            samples,
            acquisitions: 6,
            sample_rate: 64.0,
            interval: 10.0,
            channel_sensors: (0..4).map(|j| (j, format!("S{j}"))).collect(),
        };
        let mut fibre = Fibre::new(format!("grid{grid}"), config).unwrap();
        for k in 0..6 {
            for j in 0..4 {
                let rec: Vec<f64> = (0..samples).map(|_| rng.random_range(-1.0..1.0)).collect();
                fibre.ingest(j, k, rec, k as f64 * 10.0).unwrap();
            }
        }
        let chain = [OperatorSpec::demean(), OperatorSpec::dft(), OperatorSpec::band(2, 9)];
        let last = fibre.apply_chain(0, &chain, Execution::Parallel).unwrap();
        for m in 0..=last {
            for j in 0..4 {
                let whole: Vec<u64> = fibre.project_channel(m, j).unwrap().iter().flat_map(|r| r.values.iter().map(|v| v.to_bits())).collect();
                let parts: Vec<u64> = (0..6)
                    .flat_map(|k| fibre.project_cell(m, j, k).unwrap().values.iter().map(|v| v.to_bits()).collect::<Vec<_>>())
                    .collect();
                check(whole == parts, || format!("grid {grid}, stratum {m}: channel {j} differs from its cells"))?;
            }
            for k in 0..6 {
                let whole: Vec<u64> = fibre.project_time(m, k).unwrap().iter().flat_map(|r| r.values.iter().map(|v| v.to_bits())).collect();
                let parts: Vec<u64> = (0..4)
                    .flat_map(|j| fibre.project_cell(m, j, k).unwrap().values.iter().map(|v| v.to_bits()).collect::<Vec<_>>())
                    .collect();
                check(whole == parts, || format!("grid {grid}, stratum {m}: acquisition {k} differs from its cells"))?;
            }
            if m > 0 {
                let replayed = fibre.replay(m).unwrap();
                let stored = fibre.project_stratum(m).unwrap();
                for ((j, k), values) in stored.cells() {
                    let again = &replayed[&(j, k)];
                    let same = again.len() == values.len() && again.iter().zip(values).all(|(a, b)| a.to_bits() == b.to_bits());
                    check(same, || format!("grid {grid}, stratum {m}: replay of cell ({j}, {k}) differs"))?;
                }
            }
        }
    }
    Ok("20 grids of 4x6, 4 strata each, bitwise equal".into())
}

fn random_theta(family: &FamilyTemplate, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..family.dimension())
        .map(|i| {
            let (lo, hi) = family.bounds(i);
            rng.random_range(lo..hi)
        })
        .collect()
}

fn geodesic_interpolator() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let families = [Arc::new(two_span_family()), Arc::new(three_span_family())];
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let f = &families[i % 2];
        let a = StructureInstance::new(Arc::clone(f), random_theta(f, &mut rng)).unwrap();
        let b = StructureInstance::new(Arc::clone(f), random_theta(f, &mut rng)).unwrap();
        let path = geodesic(&a, &b).unwrap();
        check(path.point_at(0.0) == *a.theta() && path.point_at(1.0) == *b.theta(), || {
            format!("pair {i}: endpoints not exact")
        })?;
        let m = interpolating_structure(&a, &b).unwrap();
        let d = |x: &ThetaVector, y: &ThetaVector| family_distance(f, x, y);
        let whole = d(a.theta(), b.theta());
        let gap = (d(a.theta(), m.theta()) + d(m.theta(), b.theta()) - whole).abs();
        check(gap <= 1e-10 * whole, || format!("pair {i}: additivity gap {gap:.2e} for D = {whole}"))?;
        worst = worst.max(gap / whole);
    }
    Ok(format!("1000 pairs, endpoints exact, max relative gap {worst:.1e}"))
}

fn transfer_campaign() -> Outcome {
    let t0 = Instant::now();
    let config: CampaignConfig = serde_json::from_value(serde_json::json!({
        "family": "two_span",
        "theta": base_two_span(),
        "sampling": {"count": 12, "spread": 0.05},
        "conditions": [
            {"label": 0},
            {"label": 1, "slot": "D1", "delta": 0.25},
            {"label": 2, "slot": "P1", "delta": 0.25},
            {"label": 3, "slot": "D2", "delta": 0.25}
        ],
        "N_R": 30, "N_T": 4096, "f_s": 64.0, "noise_std": 0.02, "zeta": 0.002, "seed": 11
    }))
    .map_err(|e| e.to_string())?;
    let family = Arc::new(two_span_family());
    let oracle = PhysicsOracle {
        conditions: config.conditions().map_err(|e| e.to_string())?,
        settings: config.settings(config.seed),
        exec: Execution::Parallel,
    };
    let participant = |id: String, instance: StructureInstance| -> Result<Participant, String> {
        let domain = oracle.simulate(&instance).map_err(|e| e.to_string())?;
        Ok(Participant { id, instance, domain })
    };
    let mut b2: Vec<Participant> = config
        .instances(&family, config.seed)
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|(id, inst)| participant(id, inst))
        .collect::<Result<_, _>>()?;
    let b3 = participant(
        "three_span_0".into(),
        StructureInstance::new(Arc::new(three_span_family()), base_three_span()).unwrap(),
    )?;
    let base = b2.remove(0);

    let metric = MetricConfig::default();
    let opts = PairOptions::default();
    let mut min_in_domain: f64 = 1.0;
    let mut min_near: f64 = 1.0;
    for p in &b2 {
        for (s, t) in [(&base, p), (p, &base)] {
            let r = run_pair(s, t, &oracle, &metric, &opts).map_err(|e| e.to_string())?.report;
            check(r.in_domain >= 0.95, || format!("{}: in-domain accuracy {:.3}", r.source, r.in_domain))?;
            check(r.ddt >= r.raw, || format!("{} -> {}: ddt {:.3} < raw {:.3}", r.source, r.target, r.ddt, r.raw))?;
            check(r.ddt >= 0.90, || format!("{} -> {}: ddt {:.3} < 0.90", r.source, r.target, r.ddt))?;
            min_in_domain = min_in_domain.min(r.in_domain);
            min_near = min_near.min(r.ddt);
        }
    }

    let far = run_pair(&b3, &base, &oracle, &metric, &opts).map_err(|e| e.to_string())?.report;
    check(far.in_domain >= 0.95, || format!("B3 in-domain accuracy {:.3}", far.in_domain))?;
    check(far.ddt >= far.raw, || format!("far pair: ddt {:.3} < raw {:.3}", far.ddt, far.raw))?;
    let two = two_step_map(&b3, &base, &oracle, &opts.ddt).map_err(|e| e.to_string())?;
    let task = pbshm_core::transfer::train_localiser(
        &b3.domain.features,
        b3.domain.labels.as_ref().unwrap(),
        opts.classifier,
    )
    .map_err(|e| e.to_string())?;
    let two_acc = pbshm_core::transfer::evaluate_transfer(
        &task,
        &two.composed,
        &base.domain.features,
        base.domain.labels.as_ref().unwrap(),
    )
    .map_err(|e| e.to_string())?
    .mapped;
    check(two_acc >= far.ddt && two_acc >= 0.80, || {
        format!("far pair: two-step {two_acc:.3}, one-step {:.3}", far.ddt)
    })?;
    let elapsed = t0.elapsed();
    check(elapsed < Duration::from_secs(120), || format!("campaign took {elapsed:.1?}"))?;
    Ok(format!(
        "in-domain >= {min_in_domain:.3}, near ddt >= {min_near:.3}, far raw {:.3} one-step {:.3} two-step {two_acc:.3}, {elapsed:.1?}",
        far.raw, far.ddt
    ))
}

fn threshold_calibration() -> Outcome {
    // Pairs at controlled parameter distances along stiffness perturbations
    // of the base bridge; accuracy collapses past the planted breakpoint.
    let family = Arc::new(two_span_family());
    let base = ThetaVector(base_two_span());
    let breakpoint = 0.3;
    let gap = 0.02;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (e_lo, e_hi) = family.bounds(3);
    let mut pairs = Vec::new();
    for i in 1..=30 {
        let wanted = gap * i as f64;
        let mut t = base.clone();
        t.0[3] += wanted * (e_hi - e_lo);
        let d = family_distance(&family, &base, &t);
        let acc: f64 = if d <= breakpoint + 1e-12 {
            rng.random_range(0.92..1.0)
        } else {
            rng.random_range(0.3..0.6)
        };
        pairs.push((d, acc));
    }
    let cal = calibrate_threshold(&pairs, 0.8).map_err(|e| e.to_string())?;
    check(!cal.warning && (cal.threshold - breakpoint).abs() <= gap, || {
        format!("recovered d_s = {} for breakpoint {breakpoint}", cal.threshold)
    })?;
    Ok(format!("d_s = {:.4} (planted {breakpoint}, gap {gap})", cal.threshold))
}

fn path_continuity() -> Outcome {
    let b3 = StructureInstance::new(Arc::new(three_span_family()), base_three_span()).unwrap();
    let b2 = StructureInstance::new(Arc::new(two_span_family()), base_two_span()).unwrap();
    let path = geodesic(&b3, &b2).map_err(|e| e.to_string())?;
    let n = 100;
    let f: Vec<Vec<f64>> = (0..=n)
        .map(|i| frequencies(&path.instance_at(i as f64 / n as f64).unwrap(), 4))
        .collect();
    let mut worst: f64 = 0.0;
    for d in 0..4 {
        let f: Vec<f64> = f.iter().map(|row| row[d]).collect();
        let slope = |k: usize| -> f64 {
            if k == 0 {
                (f[1] - f[0]).abs()
            } else if k == n {
                (f[n] - f[n - 1]).abs()
            } else {
                (f[k + 1] - f[k - 1]).abs() / 2.0
            }
        };
        for i in 0..n {
            let jump = (f[i + 1] - f[i]).abs();
            let bound = 1.5 * slope(i).max(slope(i + 1)) + 1e-12 * f[i];
            check(jump <= bound, || format!("frequency {d}: jump {jump:.3e} at s = {:.2} exceeds {bound:.3e}", i as f64 / n as f64))?;
            worst = worst.max(jump / bound);
        }
    }
    Ok(format!("101 samples, max jump/bound {worst:.3}"))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("FE oracle fidelity", fe_fidelity),
        ("scaling laws", scaling_laws),
        ("metric suite", metric_suite),
        ("projection algebra", projection_algebra),
        ("geodesic and interpolator", geodesic_interpolator),
        ("standard transfer campaign", transfer_campaign),
        ("threshold calibration", threshold_calibration),
        ("lifted path continuity", path_continuity),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail} [{:.1?}]", i + 1, t0.elapsed()),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {detail} [{:.1?}]", i + 1, t0.elapsed());
            }
        }
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
