use crate::relation::{ColumnKind, Relation};
use crate::workload::Query;
use crate::{Error, Result};

#[derive(Debug, Clone)]
struct ColumnHistogram {
    name: String,
    /// Continuous extent covered by the buckets. Integer columns are widened
    /// to `[lo, hi + 1)` so each value owns a unit interval.
    lo: f64,
    hi: f64,
    integer: bool,
    counts: Vec<u64>,
}

impl ColumnHistogram {
    fn selectivity(&self, lo: f64, hi: f64, total: u64) -> f64 {
        if total == 0 {
            return 0.0;
        }
        let (lo, hi) = if self.integer { (lo, hi + 1.0) } else { (lo, hi) };
        let span = self.hi - self.lo;
        if span <= 0.0 {
            // single-point domain
            return if lo <= self.lo && self.lo <= hi { 1.0 } else { 0.0 };
        }
        let n = self.counts.len();
        let bucket_width = span / n as f64;
        let mut mass = 0.0;
        for (i, &c) in self.counts.iter().enumerate() {
            let b_lo = self.lo + i as f64 * bucket_width;
            let b_hi = if i + 1 == n { self.hi } else { b_lo + bucket_width };
            let overlap = (hi.min(b_hi) - lo.max(b_lo)).max(0.0);
            mass += c as f64 * (overlap / (b_hi - b_lo)).min(1.0);
        }
        (mass / total as f64).clamp(0.0, 1.0)
    }
}

/// Per-column equi-width histograms combined under attribute independence.
#[derive(Debug, Clone)]
pub struct HistogramBaseline {
    columns: Vec<ColumnHistogram>,
    total: u64,
}

impl HistogramBaseline {
    pub fn build(rel: &Relation, buckets: usize) -> Result<Self> {
        if buckets == 0 {
            return Err(Error::Argument("bucket count must be positive".into()));
        }
        let columns = rel
            .schema()
            .iter()
            .enumerate()
            .map(|(j, col)| {
                let integer = col.kind == ColumnKind::Int;
                let lo = col.domain_lo;
                let hi = if integer { col.domain_hi + 1.0 } else { col.domain_hi };
                let mut counts = vec![0u64; buckets];
                let span = hi - lo;
                for v in rel.column(j) {
                    let b = if span > 0.0 {
                        (((v - lo) / span) * buckets as f64).floor() as isize
                    } else {
                        0
                    };
                    counts[b.clamp(0, buckets as isize - 1) as usize] += 1;
                }
                ColumnHistogram {
                    name: col.name.clone(),
                    lo,
                    hi,
                    integer,
                    counts,
                }
            })
            .collect();
        Ok(HistogramBaseline {
            columns,
            total: rel.row_count() as u64,
        })
    }

    pub fn total_rows(&self) -> u64 {
        self.total
    }

    pub fn bucket_counts(&self, column: &str) -> Option<&[u64]> {
        self.columns.iter().find(|c| c.name == column).map(|c| c.counts.as_slice())
    }
}

/// Row count times the product of per-predicate selectivities, at least 1.
pub fn baseline_estimate(h: &HistogramBaseline, q: &Query) -> Result<f64> {
    let mut sel = 1.0;
    for p in &q.predicates {
        let col = h
            .columns
            .iter()
            .find(|c| c.name == p.column)
            .ok_or_else(|| Error::Query(format!("no histogram for column `{}`", p.column)))?;
        sel *= col.selectivity(p.lo, p.hi, h.total);
    }
    Ok((sel * h.total as f64).max(1.0))
}
