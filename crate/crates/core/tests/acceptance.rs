//! End-to-end acceptance checks, one line per criterion.
//!
//! Runs as a plain binary (no libtest harness) so the timing-sensitive
//! criteria execute alone and in a fixed order. Exits non-zero when a
//! criterion fails that is not listed in `KNOWN_UNATTAINABLE`.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use monocard_core::estimator::{EstimatorModel, LabelNorm};
use monocard_core::evaluation::{monom_pair, qerror};
use monocard_core::relation::{generate_relation, true_cardinality, ColumnKind, ColumnSchema, Distribution, Relation};
use monocard_core::training::{
    distance, loss_and_gradient, regularizer_terms, softened_sign, train, train_with, DistanceKind, Hyperparams,
    PairSet, TrainOptions, TrainedModel,
};
use monocard_core::workload::{
    generate_workload, is_directly_comparable, range_width, sample_queries, ConstraintSet, Orientation, Predicate,
    Query, Workload,
};
use monocard_core::{evaluate, MetricsReport};

/// Criteria whose failure is reported but does not fail the run. Each entry
/// has a matching analysis in the project notes.
const KNOWN_UNATTAINABLE: &[u32] = &[4];

const TREND_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

struct Report {
    failures: Vec<u32>,
    known: Vec<u32>,
}

impl Report {
    fn record(&mut self, id: u32, name: &str, started: Instant, o: Outcome) {
        let status = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {id:>2} {status} {name}: {} ({:.1}s)",
            o.detail,
            started.elapsed().as_secs_f64()
        );
        if !o.pass {
            if KNOWN_UNATTAINABLE.contains(&id) {
                self.known.push(id);
            } else {
                self.failures.push(id);
            }
        }
    }
}

fn main() -> ExitCode {
    let mut report = Report {
        failures: Vec::new(),
        known: Vec::new(),
    };

    let t = Instant::now();
    report.record(1, "gradient check", t, gradient_check());
    let t = Instant::now();
    report.record(2, "oracle equivalence", t, oracle_equivalence());

    let t = Instant::now();
    let data = TrendData::build();
    println!("# trend data ready in {:.1}s", t.elapsed().as_secs_f64());

    let t = Instant::now();
    report.record(3, "generator soundness", t, generator_soundness(&data.relation));
    let t = Instant::now();
    report.record(4, "regularizer saturation", t, regularizer_saturation());
    let t = Instant::now();
    report.record(5, "softened sign stability", t, sign_stability());
    let t = Instant::now();
    report.record(6, "lambda zero reduction", t, lambda_zero_reduction(&data));

    let t = Instant::now();
    let runs = TrendRuns::train(&data);
    report.record(7, "trend over five seeds", t, trend(&runs));
    let t = Instant::now();
    report.record(8, "validation components decrease", t, diagnostic_trend(&data, &runs));
    let t = Instant::now();
    report.record(9, "distance insensitivity", t, distance_insensitivity(&data, &runs));
    let t = Instant::now();
    report.record(10, "epoch timing", t, timing(&data, &runs));
    let t = Instant::now();
    report.record(11, "metric examples", t, metric_examples());

    println!(
        "# {} of 11 criteria passed; unexpected failures: {:?}; known unattainable: {:?}",
        11 - report.failures.len() - report.known.len(),
        report.failures,
        report.known
    );
    if report.failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn schema4() -> Vec<ColumnSchema> {
    vec![
        ColumnSchema::new("a", ColumnKind::Int, 0.0, 999.0).with_distribution(Distribution::Zipf { skew: 1.1 }),
        ColumnSchema::new("b", ColumnKind::Int, 1880.0, 2020.0)
            .with_distribution(Distribution::GaussianMixture { k: 3 }),
        ColumnSchema::new("c", ColumnKind::Real, 0.0, 1.0),
        ColumnSchema::new("d", ColumnKind::Int, 0.0, 99.0).with_distribution(Distribution::GaussianMixture { k: 2 }),
    ]
}

fn gradient_check() -> Outcome {
    let schema = vec![
        ColumnSchema::new("x", ColumnKind::Int, 0.0, 500.0),
        ColumnSchema::new("y", ColumnKind::Real, -1.0, 1.0).with_distribution(Distribution::GaussianMixture { k: 2 }),
        ColumnSchema::new("z", ColumnKind::Int, 10.0, 90.0).with_distribution(Distribution::Zipf { skew: 1.3 }),
    ];
    let rel = generate_relation(&schema, 4000, 11).unwrap();
    let queries = sample_queries(&rel, 8, 3, 12).unwrap();
    let light = generate_workload(&rel, 12, 8, 3, 13).unwrap();
    let norm = LabelNorm::from_labels(queries.iter().map(|q| q.label.unwrap()));
    let mut model = EstimatorModel::new(&schema, 16, norm, 14).unwrap();
    let pairs = PairSet::new(&model, &light).unwrap();
    assert_eq!(pairs.len(), 8);
    let hp = Hyperparams {
        lambda: 1.0,
        distance: DistanceKind::Jaccard,
        c: 100.0,
        hidden_units: 16,
        ..Hyperparams::default()
    };
    let (_, grads) = loss_and_gradient(&model, &queries, &pairs, &hp).unwrap();
    let loss = |m: &EstimatorModel| loss_and_gradient(m, &queries, &pairs, &hp).unwrap().0.value;

    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let n = model.num_params();
    let sampled = 256;
    let h = 1e-4;
    let mut worst = 0.0f64;
    let mut ok = 0;
    for _ in 0..sampled {
        let i = rng.random_range(0..n);
        let orig = model.param(i);
        *model.param_mut(i) = orig + h;
        let up = loss(&model);
        *model.param_mut(i) = orig - h;
        let down = loss(&model);
        *model.param_mut(i) = orig;
        let numeric = (up - down) / (2.0 * h);
        let analytic = grads.get(i);
        let scale = analytic.abs().max(numeric.abs());
        // both sides below this are numerically zero
        let rel = if scale < 1e-9 { 0.0 } else { (analytic - numeric).abs() / scale };
        worst = worst.max(rel);
        if rel < 1e-4 {
            ok += 1;
        }
    }
    outcome(
        ok == sampled && sampled >= 200,
        format!("{ok}/{sampled} of {n} parameters within 1e-4, worst relative error {worst:.2e}"),
    )
}

fn random_schema(rng: &mut ChaCha8Rng) -> Vec<ColumnSchema> {
    let cols = rng.random_range(1..=5);
    (0..cols)
        .map(|j| {
            let int = rng.random_bool(0.6);
            let lo = rng.random_range(-50.0..50.0f64).round();
            let hi = lo + rng.random_range(1.0..300.0f64).round();
            let dist = match rng.random_range(0..3) {
                0 => Distribution::Uniform,
                1 => Distribution::Zipf {
                    skew: rng.random_range(0.5..2.0),
                },
                _ => Distribution::GaussianMixture {
                    k: rng.random_range(1..4),
                },
            };
            let kind = if int { ColumnKind::Int } else { ColumnKind::Real };
            ColumnSchema::new(format!("c{j}"), kind, lo, hi).with_distribution(dist)
        })
        .collect()
}

fn random_query(rng: &mut ChaCha8Rng, rel: &Relation, id: u64) -> Query {
    let schema = rel.schema();
    let mut preds = Vec::new();
    for (j, col) in schema.iter().enumerate() {
        if !preds.is_empty() && rng.random_bool(0.5) {
            continue;
        }
        let pad = 0.1 * col.width();
        let (lo, hi) = match rng.random_range(0..3) {
            // equality on a value that occurs in the data
            0 => {
                let v = rel.row(rng.random_range(0..rel.row_count()))[j];
                (v, v)
            }
            1 => {
                let a = rng.random_range(col.domain_lo - pad..=col.domain_hi + pad);
                let b = rng.random_range(col.domain_lo - pad..=col.domain_hi + pad);
                (a.min(b), a.max(b))
            }
            _ => {
                let a = rng.random_range(col.domain_lo..=col.domain_hi).round();
                let b = rng.random_range(col.domain_lo..=col.domain_hi).round();
                (a.min(b), a.max(b))
            }
        };
        preds.push(Predicate::new(col.name.clone(), lo, hi));
    }
    Query::new(id, preds)
}

/// Straightforward row-by-row count written without the library's scan.
fn brute_force_count(rel: &Relation, q: &Query) -> u64 {
    let names: Vec<&str> = rel.schema().iter().map(|c| c.name.as_str()).collect();
    let mut count = 0;
    for r in 0..rel.row_count() {
        let row = rel.row(r);
        let mut keep = true;
        for p in &q.predicates {
            let j = names.iter().position(|n| *n == p.column).unwrap();
            if row[j] < p.lo || row[j] > p.hi {
                keep = false;
                break;
            }
        }
        if keep {
            count += 1;
        }
    }
    count
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut mismatches = 0;
    let mut checked = 0;
    for r in 0..20u64 {
        let schema = random_schema(&mut rng);
        let rows = rng.random_range(1..=10_000);
        let rel = generate_relation(&schema, rows, 100 + r).unwrap();
        for i in 0..100u64 {
            let q = random_query(&mut rng, &rel, i);
            if true_cardinality(&rel, &q).unwrap() != brute_force_count(&rel, &q) {
                mismatches += 1;
            }
            checked += 1;
        }
    }
    outcome(mismatches == 0, format!("{mismatches} mismatches over {checked} queries on 20 relations"))
}

fn generator_soundness(rel: &Relation) -> Outcome {
    let wl = generate_workload(rel, 5000, 5000, 4, 31).unwrap();
    let mut comparable = 0;
    let mut ordered = 0;
    for &(l, t) in &wl.constraints().pairs {
        let (ql, qt) = (wl.query(l).unwrap(), wl.query(t).unwrap());
        if is_directly_comparable(ql, qt) == Some(Orientation::ALooser) {
            comparable += 1;
        }
        if ql.label.unwrap() >= qt.label.unwrap() {
            ordered += 1;
        }
    }
    let m = wl.constraints().len();
    outcome(
        wl.queries().len() == 5000 && m == 5000 && comparable == m && ordered == m,
        format!(
            "{} queries, {m} pairs, {comparable} a-looser, {ordered} with label(loose) >= label(tight)",
            wl.queries().len()
        ),
    )
}

/// Magnitude pair `(l, r)` whose distance is exactly `d` under `kind`.
fn pair_with_distance(d: f64, kind: DistanceKind) -> (f64, f64) {
    match kind {
        DistanceKind::Difference => {
            if d >= 0.0 {
                (1.0 + d, 1.0)
            } else {
                (1.0, 1.0 - d)
            }
        }
        DistanceKind::Jaccard => {
            if d >= 0.0 {
                (1.0, 1.0 - d)
            } else {
                (1.0 + d, 1.0)
            }
        }
    }
}

fn regularizer_saturation() -> Outcome {
    let c = 1e4;
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut worst_ordered = 0.0f64;
    let mut worst_anti = 1.0f64;
    for kind in [DistanceKind::Jaccard, DistanceKind::Difference] {
        let max_mag = if kind == DistanceKind::Jaccard { 1.0f64 } else { 1e3 };
        // log-uniform magnitudes over the admissible range, plus the boundary itself
        let mut mags: Vec<f64> = (0..2000)
            .map(|_| 10f64.powf(rng.random_range((1e-3f64).log10()..=max_mag.log10())))
            .collect();
        mags.push(1e-3);
        let mut reference = Vec::new();
        let mut ordered = Vec::new();
        let mut anti = Vec::new();
        for &mag in &mags {
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let est_mag = mags[rng.random_range(0..mags.len())];
            reference.push(pair_with_distance(sign * mag, kind));
            ordered.push(pair_with_distance(sign * est_mag, kind));
            anti.push(pair_with_distance(-sign * est_mag, kind));
        }
        let (good, _) = regularizer_terms(&reference, &ordered, kind, c);
        let (bad, _) = regularizer_terms(&reference, &anti, kind, c);
        worst_ordered = worst_ordered.max(good);
        worst_anti = worst_anti.min(bad);
        // the boundary pair on its own
        let edge = [pair_with_distance(1e-3, kind)];
        let edge_anti = [pair_with_distance(-1e-3, kind)];
        let (edge_good, _) = regularizer_terms(&edge, &edge, kind, c);
        let (edge_bad, _) = regularizer_terms(&edge, &edge_anti, kind, c);
        worst_ordered = worst_ordered.max(edge_good);
        worst_anti = worst_anti.min(edge_bad);
    }
    let threshold = 1.0 - 1e-6;
    outcome(
        worst_ordered <= 1e-6 && worst_anti >= threshold,
        format!(
            "ordered R/lambda max {worst_ordered:.3e} (need <= 1e-6), anti-ordered R/lambda min {worst_anti:.8} \
             (need >= {threshold}); at |D| = 1e-3 the anti-ordered term is (1 - 2 S(-10))^2"
        ),
    )
}

fn sign_stability() -> Outcome {
    let mut bad = Vec::new();
    for x in [1e6, -1e6, 1e3, -1e3, 0.0] {
        for c in [10.0, 1e4] {
            let s = softened_sign(x, c);
            if !s.is_finite() || !(0.0..=1.0).contains(&s) {
                bad.push(format!("S({x}, {c}) = {s}"));
            }
            if x > 0.0 && s != 1.0 {
                bad.push(format!("S({x}, {c}) = {s} not saturated"));
            }
            if x < 0.0 && s > 1e-300 {
                bad.push(format!("S({x}, {c}) = {s} not saturated"));
            }
        }
    }
    let half = softened_sign(0.0, 10.0) == 0.5 && softened_sign(0.0, 1e4) == 0.5;
    outcome(
        bad.is_empty() && half,
        if bad.is_empty() {
            "all 10 grid points finite and in [0, 1]; S(0) = 0.5 exactly".to_string()
        } else {
            bad.join("; ")
        },
    )
}

struct TrendData {
    relation: Relation,
    train: Workload,
    light: Workload,
    val: Workload,
    complete: Workload,
}

impl TrendData {
    fn build() -> Self {
        let relation = generate_relation(&schema4(), 100_000, 1).unwrap();
        let train = Workload::new(sample_queries(&relation, 5000, 4, 2).unwrap(), ConstraintSet::default()).unwrap();
        let light = generate_workload(&relation, 2000, 2000, 4, 3).unwrap();
        let val = generate_workload(&relation, 1000, 1000, 4, 4).unwrap();
        let complete = generate_workload(&relation, 20_000, 20_000, 4, 5).unwrap();
        TrendData {
            relation,
            train,
            light,
            val,
            complete,
        }
    }

    fn run(&self, hp: &Hyperparams) -> TrainedModel {
        train(&self.relation, &self.train, &self.light, &self.val, hp).unwrap()
    }
}

fn lambda_zero_reduction(data: &TrendData) -> Outcome {
    let queries = sample_queries(&data.relation, 1000, 4, 61).unwrap();
    let train_wl = Workload::new(queries, ConstraintSet::default()).unwrap();
    let hp = Hyperparams {
        lambda: 0.0,
        epochs: 5,
        batch_size: 128,
        seed: 62,
        ..Hyperparams::default()
    };
    let zero = train(&data.relation, &train_wl, &data.light, &data.val, &hp).unwrap();
    let disabled = train_with(
        &data.relation,
        &train_wl,
        &data.light,
        &data.val,
        &hp,
        TrainOptions {
            regularizer_enabled: false,
            ..TrainOptions::default()
        },
    )
    .unwrap();
    let bits = |t: &TrainedModel| -> Vec<u64> {
        t.diagnostics
            .iter()
            .flat_map(|d| [d.train_loss.to_bits(), d.val_qerror_component.to_bits()])
            .collect()
    };
    let params = |t: &TrainedModel| -> Vec<u64> { (0..t.model.num_params()).map(|i| t.model.param(i).to_bits()).collect() };
    let same_losses = bits(&zero) == bits(&disabled);
    let same_params = params(&zero) == params(&disabled);
    outcome(
        same_losses && same_params && zero.diagnostics.len() == 5,
        format!(
            "5 epochs x 8 batches: loss trajectory identical = {same_losses}, final parameters identical = {same_params}"
        ),
    )
}

struct SeedRun {
    seed: u64,
    trained: TrainedModel,
    metrics: MetricsReport,
}

struct TrendRuns {
    unregularized: Vec<SeedRun>,
    regularized: Vec<SeedRun>,
}

fn trend_hp(lambda: f64, seed: u64) -> Hyperparams {
    Hyperparams {
        lambda,
        distance: DistanceKind::Jaccard,
        c: 1e4,
        hidden_units: 256,
        epochs: 50,
        batch_size: 1024,
        seed,
        ..Hyperparams::default()
    }
}

impl TrendRuns {
    fn train(data: &TrendData) -> Self {
        let mut unregularized = Vec::new();
        let mut regularized = Vec::new();
        for seed in TREND_SEEDS {
            for (lambda, into) in [(0.0, &mut unregularized), (0.1, &mut regularized)] {
                let t = Instant::now();
                let trained = data.run(&trend_hp(lambda, seed));
                let metrics = evaluate(&trained.model, &data.complete).unwrap();
                println!(
                    "# seed {seed} lambda {lambda}: median q-error {:.4}, mean MonoM {:.6} ({:.1}s)",
                    metrics.qerror.median,
                    metrics.monom.mean,
                    t.elapsed().as_secs_f64()
                );
                into.push(SeedRun { seed, trained, metrics });
            }
        }
        TrendRuns {
            unregularized,
            regularized,
        }
    }
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.into_iter().collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn trend(runs: &TrendRuns) -> Outcome {
    let monom = |rs: &[SeedRun]| mean(rs.iter().map(|r| r.metrics.monom.mean));
    let median = |rs: &[SeedRun]| mean(rs.iter().map(|r| r.metrics.qerror.median));
    let (m0, m1) = (monom(&runs.unregularized), monom(&runs.regularized));
    let (q0, q1) = (median(&runs.unregularized), median(&runs.regularized));
    outcome(
        m1 >= m0 && q1 <= 1.10 * q0,
        format!(
            "mean MonoM {m1:.6} (lambda 0.1) vs {m0:.6} (lambda 0); median q-error {q1:.4} vs {q0:.4} (ratio {:.4}, need <= 1.10)",
            q1 / q0
        ),
    )
}

fn decreases(t: &TrainedModel) -> bool {
    let (first, at20) = (&t.diagnostics[0], &t.diagnostics[19]);
    at20.val_qerror_component < first.val_qerror_component && at20.val_reg_component < first.val_reg_component
}

fn diagnostic_trend(data: &TrendData, runs: &TrendRuns) -> Outcome {
    let small = runs.regularized.iter().filter(|r| decreases(&r.trained)).count();
    let mut large = 0;
    for seed in TREND_SEEDS {
        let hp = Hyperparams {
            epochs: 20,
            ..trend_hp(1.0, seed)
        };
        if decreases(&data.run(&hp)) {
            large += 1;
        }
    }
    outcome(
        small >= 4 && large >= 4,
        format!("both components fall from epoch 1 to 20 for {small}/5 seeds at lambda 0.1 and {large}/5 at lambda 1"),
    )
}

fn distance_insensitivity(data: &TrendData, runs: &TrendRuns) -> Outcome {
    let reused = &runs.regularized[0];
    let best = |kind: DistanceKind| -> (f64, f64) {
        let mut q = f64::INFINITY;
        let mut m = f64::NEG_INFINITY;
        for c in [10.0, 1e2, 1e3, 1e4] {
            let metrics = if kind == DistanceKind::Jaccard && c == 1e4 {
                reused.metrics.clone()
            } else {
                let hp = Hyperparams {
                    distance: kind,
                    c,
                    ..trend_hp(0.1, reused.seed)
                };
                evaluate(&data.run(&hp).model, &data.complete).unwrap()
            };
            q = q.min(metrics.qerror.median);
            m = m.max(metrics.monom.mean);
        }
        (q, m)
    };
    let (qd, md) = best(DistanceKind::Difference);
    let (qj, mj) = best(DistanceKind::Jaccard);
    let q_gap = (qd - qj).abs() / qd.min(qj);
    let m_gap = (md - mj).abs();
    outcome(
        q_gap <= 0.15 && m_gap <= 0.02,
        format!(
            "best median q-error difference {qd:.4} vs jaccard {qj:.4} (gap {:.1}%), best MonoM {md:.6} vs {mj:.6} (gap {m_gap:.6})",
            100.0 * q_gap
        ),
    )
}

fn coefficient_of_variation(xs: &[f64]) -> f64 {
    let m = mean(xs.iter().copied());
    let var = mean(xs.iter().map(|x| (x - m) * (x - m)));
    var.sqrt() / m
}

fn epoch_seconds(t: &TrainedModel, from: usize, to: usize) -> Vec<f64> {
    t.diagnostics[from - 1..to].iter().map(|d| d.wall_time_seconds).collect()
}

fn timing(data: &TrendData, runs: &TrendRuns) -> Outcome {
    let worst_cv = runs
        .regularized
        .iter()
        .map(|r| coefficient_of_variation(&epoch_seconds(&r.trained, 2, 50)))
        .fold(0.0, f64::max);

    // overhead = regularized epoch time over unregularized epoch time, minus 1
    let epochs = 10;
    let quick = TrainOptions {
        skip_validation: true,
        ..TrainOptions::default()
    };
    let mut relative = Vec::new();
    let mut parts = Vec::new();
    for hidden in [128, 256, 512] {
        let (plain, reg) = if hidden == 256 {
            (
                mean(epoch_seconds(&runs.unregularized[0].trained, 2, epochs)),
                mean(epoch_seconds(&runs.regularized[0].trained, 2, epochs)),
            )
        } else {
            let per_epoch = |lambda: f64| {
                let hp = Hyperparams {
                    hidden_units: hidden,
                    epochs,
                    ..trend_hp(lambda, TREND_SEEDS[0])
                };
                let t = train_with(&data.relation, &data.train, &data.light, &data.val, &hp, quick).unwrap();
                mean(epoch_seconds(&t, 2, epochs))
            };
            (per_epoch(0.0), per_epoch(0.1))
        };
        let overhead = reg / plain - 1.0;
        relative.push(overhead);
        parts.push(format!("h={hidden}: {:.3}s vs {:.3}s, +{:.2}x", reg, plain, overhead));
    }
    let lo = relative.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = relative.iter().copied().fold(0.0, f64::max);
    let spread = hi / lo;
    outcome(
        worst_cv < 0.25 && spread < 2.0,
        format!(
            "worst epoch-time CV over epochs 2-50 {worst_cv:.3} (need < 0.25); relative overhead spread {spread:.2}x \
             (need < 2) [{}]",
            parts.join("; ")
        ),
    )
}

fn metric_examples() -> Outcome {
    let width = |lo, hi| range_width(&Predicate::new("t", lo, hi));
    let checks: Vec<(&str, bool)> = vec![
        ("qerror(100, 100) = 1", qerror(100.0, 100.0).unwrap() == 1.0),
        ("qerror(200, 50) = 4", qerror(200.0, 50.0).unwrap() == 4.0),
        ("qerror(50, 200) = 4", qerror(50.0, 200.0).unwrap() == 4.0),
        ("qerror(21, 84) = 4", qerror(7.0 * 3.0, 7.0 * 12.0).unwrap() == 4.0),
        ("monom(10, 5) = 1", monom_pair(10.0, 5.0) == 1),
        ("monom(7, 7) = 1", monom_pair(7.0, 7.0) == 1),
        ("monom(4, 7) = 0", monom_pair(4.0, 7.0) == 0),
        ("difference(480, 400) = 80", distance(480.0, 400.0, DistanceKind::Difference) == 80.0),
        ("jaccard(480, 400) = 1/6", distance(480.0, 400.0, DistanceKind::Jaccard) == 80.0 / 480.0),
        ("jaccard(0, 0) = 0", distance(0.0, 0.0, DistanceKind::Jaccard) == 0.0),
        ("S(0, 10) = 0.5", softened_sign(0.0, 10.0) == 0.5),
        ("S(0, 1e4) = 0.5", softened_sign(0.0, 1e4) == 0.5),
        (
            "S(0.75, 10) = 1/(1+e^-7.5)",
            (softened_sign(0.75, 10.0) - 0.999_447_221_363_076_4).abs() < 1e-15,
        ),
        ("S(-1e6, 1e4) <= 1e-300", softened_sign(-1e6, 1e4) <= 1e-300),
        ("width[320, 800] = 480", width(320.0, 800.0) == 480.0),
        ("width[340, 740] = 400", width(340.0, 740.0) == 400.0),
        ("width[5, 5] = 0", width(5.0, 5.0) == 0.0),
    ];
    let failed: Vec<&str> = checks.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
    outcome(
        failed.is_empty(),
        if failed.is_empty() {
            format!("{} examples exact", checks.len())
        } else {
            format!("failed: {}", failed.join(", "))
        },
    )
}
