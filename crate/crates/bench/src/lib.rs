//! Shared fixtures for the benchmarks.

use monocard_core::estimator::{EstimatorModel, LabelNorm};
use monocard_core::relation::{generate_relation, ColumnKind, ColumnSchema, Distribution, Relation};
use monocard_core::workload::{generate_workload, sample_queries, Query, Workload};

pub struct Fixture {
    pub relation: Relation,
    pub queries: Vec<Query>,
    pub light: Workload,
    pub model: EstimatorModel,
}

pub fn schema() -> Vec<ColumnSchema> {
    vec![
        ColumnSchema::new("a", ColumnKind::Int, 0.0, 999.0).with_distribution(Distribution::Zipf { skew: 1.1 }),
        ColumnSchema::new("b", ColumnKind::Int, 1880.0, 2020.0)
            .with_distribution(Distribution::GaussianMixture { k: 3 }),
        ColumnSchema::new("c", ColumnKind::Real, 0.0, 1.0),
        ColumnSchema::new("d", ColumnKind::Int, 0.0, 99.0),
    ]
}

/// A relation of `rows` tuples, 1024 labeled queries, a 500-pair light set
/// and an untrained model with `hidden` units.
pub fn fixture(rows: usize, hidden: usize) -> Fixture {
    let relation = generate_relation(&schema(), rows, 1).expect("valid schema");
    let queries = sample_queries(&relation, 1024, 4, 2).expect("feasible sample");
    let light = generate_workload(&relation, 500, 500, 4, 3).expect("feasible workload");
    let norm = LabelNorm::from_labels(queries.iter().filter_map(|q| q.label));
    let model = EstimatorModel::new(&schema(), hidden, norm, 4).expect("valid model");
    Fixture {
        relation,
        queries,
        light,
        model,
    }
}
