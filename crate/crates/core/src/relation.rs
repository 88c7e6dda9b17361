//! In-memory single-table relations and the exact cardinality oracle.

use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Zipf};
use serde::{Deserialize, Serialize};

use crate::workload::Query;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Int,
    Real,
}

impl fmt::Display for ColumnKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColumnKind::Int => f.write_str("int"),
            ColumnKind::Real => f.write_str("real"),
        }
    }
}

impl FromStr for ColumnKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "int" => Ok(ColumnKind::Int),
            "real" => Ok(ColumnKind::Real),
            other => Err(format!("unknown column kind `{other}` (expected int or real)")),
        }
    }
}

/// Value distribution used when synthesizing a column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Distribution {
    #[default]
    Uniform,
    /// Rank-frequency law over the integer offsets of the domain; the domain
    /// lower bound is the most frequent value.
    Zipf { skew: f64 },
    /// `k` equally weighted normal components with means spaced evenly across
    /// the domain and standard deviation `width / (4k)`, clamped to the domain.
    GaussianMixture { k: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
    pub domain_lo: f64,
    pub domain_hi: f64,
    #[serde(default)]
    pub distribution: Distribution,
}

impl ColumnSchema {
    pub fn new(name: impl Into<String>, kind: ColumnKind, lo: f64, hi: f64) -> Self {
        ColumnSchema {
            name: name.into(),
            kind,
            domain_lo: lo,
            domain_hi: hi,
            distribution: Distribution::Uniform,
        }
    }

    pub fn with_distribution(mut self, distribution: Distribution) -> Self {
        self.distribution = distribution;
        self
    }

    pub fn width(&self) -> f64 {
        self.domain_hi - self.domain_lo
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains([',', ':']) {
            return Err(Error::Schema(format!("invalid column name `{}`", self.name)));
        }
        if !self.domain_lo.is_finite() || !self.domain_hi.is_finite() {
            return Err(Error::Schema(format!("column `{}`: non-finite domain", self.name)));
        }
        if self.domain_lo > self.domain_hi {
            return Err(Error::Schema(format!(
                "column `{}`: domain_lo {} > domain_hi {}",
                self.name, self.domain_lo, self.domain_hi
            )));
        }
        if self.kind == ColumnKind::Int
            && (self.domain_lo.fract() != 0.0 || self.domain_hi.fract() != 0.0)
        {
            return Err(Error::Schema(format!(
                "column `{}`: integer column needs integral domain bounds",
                self.name
            )));
        }
        match self.distribution {
            Distribution::Uniform => {}
            Distribution::Zipf { skew } => {
                if !(skew > 0.0 && skew.is_finite()) {
                    return Err(Error::Schema(format!(
                        "column `{}`: zipf skew must be positive, got {skew}",
                        self.name
                    )));
                }
            }
            Distribution::GaussianMixture { k } => {
                if k == 0 {
                    return Err(Error::Schema(format!(
                        "column `{}`: gaussian mixture needs k >= 1",
                        self.name
                    )));
                }
            }
        }
        Ok(())
    }
}

fn validate_schema(schema: &[ColumnSchema]) -> Result<()> {
    if schema.is_empty() {
        return Err(Error::Schema("schema has no columns".into()));
    }
    for (i, col) in schema.iter().enumerate() {
        col.validate()?;
        if schema[..i].iter().any(|c| c.name == col.name) {
            return Err(Error::Schema(format!("duplicate column `{}`", col.name)));
        }
    }
    Ok(())
}

/// Reads a JSON array of [`ColumnSchema`] objects.
pub fn load_schema_json(path: impl AsRef<Path>) -> Result<Vec<ColumnSchema>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let schema: Vec<ColumnSchema> = serde_json::from_str(&text)
        .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    validate_schema(&schema)?;
    Ok(schema)
}

/// A dense row-major table of numeric values.
#[derive(Debug, Clone, PartialEq)]
pub struct Relation {
    schema: Vec<ColumnSchema>,
    values: Vec<f64>,
    row_count: usize,
}

impl Relation {
    pub fn from_rows(schema: Vec<ColumnSchema>, rows: Vec<Vec<f64>>) -> Result<Self> {
        validate_schema(&schema)?;
        let width = schema.len();
        let mut values = Vec::with_capacity(rows.len() * width);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(Error::Argument(format!(
                    "row {i} has {} values, schema has {width} columns",
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Ok(Relation {
            schema,
            values,
            row_count: rows.len(),
        })
    }

    pub fn schema(&self) -> &[ColumnSchema] {
        &self.schema
    }

    pub fn row_count(&self) -> usize {
        self.row_count
    }

    pub fn num_columns(&self) -> usize {
        self.schema.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.schema.len();
        &self.values[i * w..(i + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.schema.len().max(1))
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.schema.iter().position(|c| c.name == name)
    }

    /// Values of one column, in row order.
    pub fn column(&self, idx: usize) -> impl Iterator<Item = f64> + '_ {
        self.rows().map(move |r| r[idx])
    }

    /// Writes the relation as a headed CSV file.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        self.write_csv_to(&mut out).map_err(|e| Error::io(path, e))?;
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_csv_to<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        let header: Vec<String> = self
            .schema
            .iter()
            .map(|c| format!("{}:{}", c.name, c.kind))
            .collect();
        writeln!(out, "{}", header.join(","))?;
        let mut line = String::new();
        for row in self.rows() {
            line.clear();
            for (j, (v, col)) in row.iter().zip(&self.schema).enumerate() {
                if j > 0 {
                    line.push(',');
                }
                match col.kind {
                    ColumnKind::Int => line.push_str(&format!("{}", *v as i64)),
                    ColumnKind::Real => line.push_str(&format!("{v}")),
                }
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

/// Synthesizes a relation; the output is a pure function of the arguments.
pub fn generate_relation(schema: &[ColumnSchema], rows: usize, seed: u64) -> Result<Relation> {
    if rows == 0 {
        return Err(Error::Argument("rows must be at least 1".into()));
    }
    validate_schema(schema)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = schema.len();
    let mut values = vec![0.0; rows * width];

    for (j, col) in schema.iter().enumerate() {
        let mut sampler = ColumnSampler::new(col)?;
        for i in 0..rows {
            values[i * width + j] = sampler.sample(&mut rng);
        }
    }

    Ok(Relation {
        schema: schema.to_vec(),
        values,
        row_count: rows,
    })
}

struct ColumnSampler<'a> {
    col: &'a ColumnSchema,
    zipf: Option<Zipf<f64>>,
}

impl<'a> ColumnSampler<'a> {
    fn new(col: &'a ColumnSchema) -> Result<Self> {
        let zipf = match col.distribution {
            Distribution::Zipf { skew } => {
                let n = col.width().floor() + 1.0;
                Some(Zipf::new(n, skew).map_err(|e| {
                    Error::Schema(format!("column `{}`: {e}", col.name))
                })?)
            }
            _ => None,
        };
        Ok(ColumnSampler { col, zipf })
    }

    fn sample(&mut self, rng: &mut ChaCha8Rng) -> f64 {
        let col = self.col;
        let (lo, hi) = (col.domain_lo, col.domain_hi);
        let raw = match col.distribution {
            Distribution::Uniform => match col.kind {
                ColumnKind::Int => return rng.random_range(lo as i64..=hi as i64) as f64,
                ColumnKind::Real => {
                    if lo == hi {
                        lo
                    } else {
                        rng.random_range(lo..=hi)
                    }
                }
            },
            Distribution::Zipf { .. } => {
                let rank = self.zipf.as_ref().expect("zipf sampler").sample(rng);
                lo + (rank - 1.0)
            }
            Distribution::GaussianMixture { k } => {
                let k = k as usize;
                let comp = rng.random_range(0..k);
                let width = hi - lo;
                let mean = lo + (comp as f64 + 0.5) * width / k as f64;
                let sd = width / (4.0 * k as f64);
                let z: f64 = rng.sample(rand_distr::StandardNormal);
                mean + sd * z
            }
        };
        let v = match col.kind {
            ColumnKind::Int => raw.round(),
            ColumnKind::Real => raw,
        };
        v.clamp(lo, hi)
    }
}

/// Loads a relation from a headed CSV file. Domain bounds are the observed
/// per-column min/max; a header-only file yields an empty relation whose
/// domains are `[0, 0]`.
pub fn load_relation_csv(path: impl AsRef<Path>) -> Result<Relation> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let ingest = |line: usize, message: String| Error::Ingestion {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(h) => h.map_err(|e| Error::io(path, e))?,
        None => return Err(ingest(1, "missing header row".into())),
    };
    let mut schema = Vec::new();
    for field in header.trim_end_matches('\r').split(',') {
        let (name, kind) = field
            .split_once(':')
            .ok_or_else(|| ingest(1, format!("header field `{field}` is not `name:kind`")))?;
        let kind: ColumnKind = kind.trim().parse().map_err(|m| ingest(1, m))?;
        let name = name.trim();
        if name.is_empty() {
            return Err(ingest(1, "empty column name".into()));
        }
        if schema.iter().any(|c: &ColumnSchema| c.name == name) {
            return Err(ingest(1, format!("duplicate column `{name}`")));
        }
        schema.push(ColumnSchema::new(name, kind, 0.0, 0.0));
    }

    let width = schema.len();
    let mut values = Vec::new();
    let mut mins = vec![f64::INFINITY; width];
    let mut maxs = vec![f64::NEG_INFINITY; width];
    let mut row_count = 0;
    for (idx, line) in lines.enumerate() {
        let lineno = idx + 2;
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let mut n = 0;
        for (j, cell) in line.split(',').enumerate() {
            if j >= width {
                return Err(ingest(lineno, format!("expected {width} cells, found more")));
            }
            let cell = cell.trim();
            let v = match schema[j].kind {
                ColumnKind::Int => cell.parse::<i64>().map(|v| v as f64).map_err(|_| {
                    ingest(lineno, format!("cannot parse `{cell}` as int for column `{}`", schema[j].name))
                })?,
                ColumnKind::Real => cell
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| {
                        ingest(lineno, format!("cannot parse `{cell}` as real for column `{}`", schema[j].name))
                    })?,
            };
            mins[j] = mins[j].min(v);
            maxs[j] = maxs[j].max(v);
            values.push(v);
            n += 1;
        }
        if n != width {
            return Err(ingest(lineno, format!("expected {width} cells, found {n}")));
        }
        row_count += 1;
    }

    if row_count > 0 {
        for (j, col) in schema.iter_mut().enumerate() {
            col.domain_lo = mins[j];
            col.domain_hi = maxs[j];
        }
    }
    Ok(Relation {
        schema,
        values,
        row_count,
    })
}

/// Exact number of rows satisfying every predicate of `q`, by full scan.
pub fn true_cardinality(rel: &Relation, q: &Query) -> Result<u64> {
    let mut bounds = Vec::with_capacity(q.predicates.len());
    for p in &q.predicates {
        let idx = rel
            .column_index(&p.column)
            .ok_or_else(|| Error::Query(format!("unknown column `{}`", p.column)))?;
        bounds.push((idx, p.lo, p.hi));
    }
    let count = rel
        .rows()
        .filter(|row| bounds.iter().all(|&(j, lo, hi)| row[j] >= lo && row[j] <= hi))
        .count();
    Ok(count as u64)
}
