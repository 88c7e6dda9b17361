use std::collections::HashMap;

use crate::relation::ColumnSchema;
use crate::workload::Query;
use crate::{Error, Result};

/// Encodes each predicate as a one-hot column block followed by the
/// normalized lower and upper endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct Featurizer {
    schema: Vec<ColumnSchema>,
    column_index: HashMap<String, usize>,
}

/// Feature rows for one query, in predicate order.
#[derive(Debug, Clone, PartialEq)]
pub struct Featurized {
    pub rows: Vec<Vec<f64>>,
    /// Set when some predicate column has a zero-width domain and its
    /// endpoints were encoded as zero.
    pub degenerate_domain: bool,
}

impl Featurizer {
    pub fn new(schema: &[ColumnSchema]) -> Self {
        let column_index = schema
            .iter()
            .enumerate()
            .map(|(i, c)| (c.name.clone(), i))
            .collect();
        Featurizer {
            schema: schema.to_vec(),
            column_index,
        }
    }

    pub fn schema(&self) -> &[ColumnSchema] {
        &self.schema
    }

    pub fn feature_width(&self) -> usize {
        self.schema.len() + 2
    }

    pub fn column_position(&self, name: &str) -> Option<usize> {
        self.column_index.get(name).copied()
    }

    pub fn featurize(&self, q: &Query) -> Result<Featurized> {
        let mut positioned = Vec::with_capacity(q.predicates.len());
        for p in &q.predicates {
            let pos = self
                .column_position(&p.column)
                .ok_or_else(|| Error::Featurization(format!("unknown column `{}`", p.column)))?;
            positioned.push((pos, p));
        }
        let width = self.feature_width();
        let mut degenerate_domain = false;
        let rows = positioned
            .into_iter()
            .map(|(pos, p)| {
                let col = &self.schema[pos];
                let mut row = vec![0.0; width];
                row[pos] = 1.0;
                let span = col.domain_hi - col.domain_lo;
                if span > 0.0 {
                    row[width - 2] = ((p.lo - col.domain_lo) / span).clamp(0.0, 1.0);
                    row[width - 1] = ((p.hi - col.domain_lo) / span).clamp(0.0, 1.0);
                } else {
                    degenerate_domain = true;
                }
                row
            })
            .collect();
        Ok(Featurized {
            rows,
            degenerate_domain,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relation::ColumnKind;
    use crate::workload::Predicate;

    fn featurizer() -> Featurizer {
        Featurizer::new(&[
            ColumnSchema::new("a", ColumnKind::Int, 0.0, 10.0),
            ColumnSchema::new("b", ColumnKind::Real, -1.0, 1.0),
        ])
    }

    #[test]
    fn full_domain_maps_to_unit_endpoints() {
        let f = featurizer();
        let q = Query::new(0, vec![Predicate::new("a", 0.0, 10.0)]);
        assert_eq!(f.featurize(&q).unwrap().rows, vec![vec![1.0, 0.0, 0.0, 1.0]]);
    }

    #[test]
    fn equality_at_midpoint() {
        let f = featurizer();
        let q = Query::new(0, vec![Predicate::equality("b", 0.0)]);
        assert_eq!(f.featurize(&q).unwrap().rows, vec![vec![0.0, 1.0, 0.5, 0.5]]);
    }

    #[test]
    fn one_row_per_predicate_and_clamped() {
        let f = featurizer();
        let q = Query::new(0, vec![Predicate::new("b", 0.0, 3.0), Predicate::new("a", -5.0, 5.0)]);
        let rows = f.featurize(&q).unwrap().rows;
        assert_eq!(rows, vec![vec![0.0, 1.0, 0.5, 1.0], vec![1.0, 0.0, 0.0, 0.5]]);
    }

    #[test]
    fn unknown_and_degenerate_columns() {
        let f = featurizer();
        let q = Query::new(0, vec![Predicate::new("z", 0.0, 1.0)]);
        assert!(matches!(f.featurize(&q), Err(Error::Featurization(_))));

        let flat = Featurizer::new(&[ColumnSchema::new("a", ColumnKind::Int, 3.0, 3.0)]);
        let out = flat.featurize(&Query::new(0, vec![Predicate::equality("a", 3.0)])).unwrap();
        assert!(out.degenerate_domain);
        assert_eq!(out.rows, vec![vec![1.0, 0.0, 0.0]]);
    }
}
