//! Range queries, directly-comparable pairs and labeled workload generation.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::relation::{true_cardinality, ColumnKind, Relation};
use crate::{Error, Result};

/// Inclusive range filter `lo <= column <= hi`; equality is `lo == hi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predicate {
    #[serde(rename = "col")]
    pub column: String,
    pub lo: f64,
    pub hi: f64,
}

impl Predicate {
    pub fn new(column: impl Into<String>, lo: f64, hi: f64) -> Self {
        Predicate {
            column: column.into(),
            lo,
            hi,
        }
    }

    pub fn equality(column: impl Into<String>, value: f64) -> Self {
        Predicate::new(column, value, value)
    }

    /// Whether this range contains `other`'s range.
    pub fn contains(&self, other: &Predicate) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }
}

/// Width `hi - lo` of a predicate's range.
pub fn range_width(p: &Predicate) -> f64 {
    p.hi - p.lo
}

/// A conjunction of range predicates, at most one per column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub id: u64,
    pub predicates: Vec<Predicate>,
    #[serde(rename = "card", default, skip_serializing_if = "Option::is_none")]
    pub label: Option<u64>,
}

impl Query {
    pub fn new(id: u64, predicates: Vec<Predicate>) -> Self {
        Query {
            id,
            predicates,
            label: None,
        }
    }

    pub fn with_label(mut self, label: u64) -> Self {
        self.label = Some(label);
        self
    }

    pub fn predicate(&self, column: &str) -> Option<&Predicate> {
        self.predicates.iter().find(|p| p.column == column)
    }

    pub fn validate(&self) -> Result<()> {
        if self.predicates.is_empty() {
            return Err(Error::Query(format!("query {} has no predicates", self.id)));
        }
        for (i, p) in self.predicates.iter().enumerate() {
            if p.lo.is_nan() || p.hi.is_nan() || p.lo > p.hi {
                return Err(Error::Query(format!(
                    "query {}: predicate on `{}` has lo {} > hi {}",
                    self.id, p.column, p.lo, p.hi
                )));
            }
            if self.predicates[..i].iter().any(|o| o.column == p.column) {
                return Err(Error::Query(format!(
                    "query {}: two predicates on `{}`",
                    self.id, p.column
                )));
            }
        }
        Ok(())
    }
}

/// How two queries relate under direct comparability.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    ALooser,
    BLooser,
    Identical,
}

/// Checks whether two queries differ only in the range of a single
/// predicate, with one range nested inside the other.
pub fn is_directly_comparable(qa: &Query, qb: &Query) -> Option<Orientation> {
    if qa.predicates.len() != qb.predicates.len() {
        return None;
    }
    let mut differing = None;
    for pa in &qa.predicates {
        let pb = qb.predicate(&pa.column)?;
        if pa.lo != pb.lo || pa.hi != pb.hi {
            if differing.is_some() {
                return None;
            }
            differing = Some((pa, pb));
        }
    }
    match differing {
        None => Some(Orientation::Identical),
        Some((pa, pb)) if pa.contains(pb) => Some(Orientation::ALooser),
        Some((pa, pb)) if pb.contains(pa) => Some(Orientation::BLooser),
        Some(_) => None,
    }
}

/// The column on which two directly-comparable queries differ, if any.
pub fn differing_column<'a>(qa: &'a Query, qb: &Query) -> Option<&'a str> {
    qa.predicates
        .iter()
        .find(|pa| match qb.predicate(&pa.column) {
            Some(pb) => pa.lo != pb.lo || pa.hi != pb.hi,
            None => true,
        })
        .map(|p| p.column.as_str())
}

/// Range-width surrogate for the cardinality of `q`, taken on the column in
/// which a comparable pair differs.
pub fn proxy_cardinality(q: &Query, pair_column: &str) -> Result<f64> {
    q.predicate(pair_column)
        .map(range_width)
        .ok_or_else(|| Error::Query(format!("query {} has no predicate on `{pair_column}`", q.id)))
}

/// Ordered `(loose_id, tight_id)` query pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConstraintSet {
    pub pairs: Vec<(u64, u64)>,
}

impl ConstraintSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct Workload {
    queries: Vec<Query>,
    constraints: ConstraintSet,
    positions: HashMap<u64, usize>,
}

impl PartialEq for Workload {
    fn eq(&self, other: &Self) -> bool {
        self.queries == other.queries && self.constraints == other.constraints
    }
}

impl Workload {
    pub fn new(queries: Vec<Query>, constraints: ConstraintSet) -> Result<Self> {
        let mut positions = HashMap::with_capacity(queries.len());
        for (i, q) in queries.iter().enumerate() {
            q.validate()?;
            if positions.insert(q.id, i).is_some() {
                return Err(Error::Query(format!("duplicate query id {}", q.id)));
            }
        }
        for &(l, t) in &constraints.pairs {
            for id in [l, t] {
                if !positions.contains_key(&id) {
                    return Err(Error::Query(format!("constraint references unknown query id {id}")));
                }
            }
        }
        Ok(Workload {
            queries,
            constraints,
            positions,
        })
    }

    pub fn queries(&self) -> &[Query] {
        &self.queries
    }

    pub fn constraints(&self) -> &ConstraintSet {
        &self.constraints
    }

    pub fn position(&self, id: u64) -> Option<usize> {
        self.positions.get(&id).copied()
    }

    pub fn query(&self, id: u64) -> Option<&Query> {
        self.position(id).map(|i| &self.queries[i])
    }

    /// Constraint pairs as positions into [`Workload::queries`].
    pub fn pair_positions(&self) -> Vec<(usize, usize)> {
        self.constraints
            .pairs
            .iter()
            .map(|&(l, t)| (self.positions[&l], self.positions[&t]))
            .collect()
    }

    pub fn is_labeled(&self) -> bool {
        self.queries.iter().all(|q| q.label.is_some())
    }

    /// Checks every constraint pair for strict loose-over-tight nesting and,
    /// where labels exist, for ordered labels. Returns the offending pair.
    pub fn validate_constraints(&self) -> Result<()> {
        for &(l, t) in &self.constraints.pairs {
            let (ql, qt) = (self.query(l).unwrap(), self.query(t).unwrap());
            if is_directly_comparable(ql, qt) != Some(Orientation::ALooser) {
                return Err(Error::Query(format!(
                    "pair ({l}, {t}) is not directly comparable with the first query looser"
                )));
            }
            if let (Some(a), Some(b)) = (ql.label, qt.label) {
                if a < b {
                    return Err(Error::Query(format!(
                        "pair ({l}, {t}) has label {a} < {b}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn save(&self, queries_path: impl AsRef<Path>, constraints_path: impl AsRef<Path>) -> Result<()> {
        write_queries_jsonl(&self.queries, queries_path)?;
        write_constraints_csv(&self.constraints, constraints_path)
    }

    pub fn load(queries_path: impl AsRef<Path>, constraints_path: Option<&Path>) -> Result<Self> {
        let queries = read_queries_jsonl(queries_path)?;
        let constraints = match constraints_path {
            Some(p) => read_constraints_csv(p)?,
            None => ConstraintSet::default(),
        };
        Workload::new(queries, constraints)
    }
}

pub fn write_queries_jsonl(queries: &[Query], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for q in queries {
        let line = serde_json::to_string(q).map_err(|e| Error::Argument(e.to_string()))?;
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_queries_jsonl(path: impl AsRef<Path>) -> Result<Vec<Query>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut queries = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let q: Query = serde_json::from_str(&line).map_err(|e| Error::Ingestion {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        queries.push(q);
    }
    Ok(queries)
}

pub fn write_constraints_csv(constraints: &ConstraintSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(["loose_id", "tight_id"]).map_err(|e| csv_error(path, e))?;
    for &(l, t) in &constraints.pairs {
        w.write_record([l.to_string(), t.to_string()])
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_constraints_csv(path: impl AsRef<Path>) -> Result<ConstraintSet> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = r.headers().map_err(|e| csv_error(path, e))?;
    if header.iter().collect::<Vec<_>>() != ["loose_id", "tight_id"] {
        return Err(Error::Ingestion {
            path: path.to_path_buf(),
            line: 1,
            message: "expected header `loose_id,tight_id`".into(),
        });
    }
    let mut pairs = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let parse = |s: &str| {
            s.trim().parse::<u64>().map_err(|_| Error::Ingestion {
                path: path.to_path_buf(),
                line,
                message: format!("`{s}` is not a query id"),
            })
        };
        if rec.len() != 2 {
            return Err(Error::Ingestion {
                path: path.to_path_buf(),
                line,
                message: format!("expected 2 fields, found {}", rec.len()),
            });
        }
        pairs.push((parse(&rec[0])?, parse(&rec[1])?));
    }
    Ok(ConstraintSet { pairs })
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Ingestion {
            path: path.to_path_buf(),
            line,
            message: format!("{other:?}"),
        },
    }
}

/// Internal query form: predicates as (column position, lo, hi), sorted by column.
#[derive(Debug, Clone, PartialEq)]
struct RawQuery(Vec<(usize, f64, f64)>);

impl RawQuery {
    fn key(&self) -> Vec<(usize, u64, u64)> {
        self.0.iter().map(|&(c, lo, hi)| (c, lo.to_bits(), hi.to_bits())).collect()
    }

    fn into_query(self, id: u64, rel: &Relation) -> Query {
        let schema = rel.schema();
        Query::new(
            id,
            self.0
                .into_iter()
                .map(|(c, lo, hi)| Predicate::new(schema[c].name.clone(), lo, hi))
                .collect(),
        )
    }
}

struct QuerySampler<'a> {
    rel: &'a Relation,
    max_predicates: usize,
}

impl QuerySampler<'_> {
    fn base(&self, rng: &mut ChaCha8Rng) -> RawQuery {
        let schema = self.rel.schema();
        let n = rng.random_range(1..=self.max_predicates);
        let mut cols = index::sample(rng, schema.len(), n).into_vec();
        cols.sort_unstable();
        let preds = cols
            .into_iter()
            .map(|c| {
                let col = &schema[c];
                let (lo, hi) = (col.domain_lo, col.domain_hi);
                let (a, b) = match col.kind {
                    ColumnKind::Int => (
                        rng.random_range(lo as i64..=hi as i64) as f64,
                        rng.random_range(lo as i64..=hi as i64) as f64,
                    ),
                    ColumnKind::Real if lo == hi => (lo, hi),
                    ColumnKind::Real => (rng.random_range(lo..=hi), rng.random_range(lo..=hi)),
                };
                (c, a.min(b), a.max(b))
            })
            .collect();
        RawQuery(preds)
    }

    /// Moves one endpoint of the predicate on `column` inward by a fraction in
    /// (0, 0.5] of its width. `None` when the range cannot shrink.
    fn tighten(&self, q: &RawQuery, column: usize, rng: &mut ChaCha8Rng) -> Option<RawQuery> {
        let slot = q.0.iter().position(|&(c, _, _)| c == column)?;
        let (_, lo, hi) = q.0[slot];
        let width = hi - lo;
        if width.is_nan() || width <= 0.0 {
            return None;
        }
        let frac = 0.5 * (1.0 - rng.random::<f64>());
        let mut delta = frac * width;
        if self.rel.schema()[column].kind == ColumnKind::Int {
            delta = delta.round().clamp(1.0, width);
        }
        let (new_lo, new_hi) = if rng.random_bool(0.5) {
            (lo + delta, hi)
        } else {
            (lo, hi - delta)
        };
        if new_lo > new_hi || (new_lo == lo && new_hi == hi) {
            return None;
        }
        let mut out = q.clone();
        out.0[slot] = (column, new_lo, new_hi);
        Some(out)
    }
}

fn check_sampling_args(rel: &Relation, max_predicates: usize) -> Result<()> {
    if rel.row_count() == 0 {
        return Err(Error::Argument("relation has no rows".into()));
    }
    if max_predicates == 0 || max_predicates > rel.num_columns() {
        return Err(Error::Argument(format!(
            "max_predicates must be in 1..={}, got {max_predicates}",
            rel.num_columns()
        )));
    }
    Ok(())
}

fn label_all(rel: &Relation, queries: &mut [Query]) -> Result<()> {
    let labels = queries
        .par_iter()
        .map(|q| true_cardinality(rel, q))
        .collect::<Result<Vec<_>>>()?;
    for (q, c) in queries.iter_mut().zip(labels) {
        q.label = Some(c);
    }
    Ok(())
}

/// Samples `n` distinct labeled queries without any constraint structure.
pub fn sample_queries(rel: &Relation, n: usize, max_predicates: usize, seed: u64) -> Result<Vec<Query>> {
    check_sampling_args(rel, max_predicates)?;
    let sampler = QuerySampler { rel, max_predicates };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    let mut raw = Vec::with_capacity(n);
    let budget = 100 * n + 1000;
    let mut attempts = 0;
    while raw.len() < n {
        attempts += 1;
        if attempts > budget {
            return Err(Error::Generation(format!(
                "only {} distinct queries found after {budget} attempts",
                raw.len()
            )));
        }
        let q = sampler.base(&mut rng);
        if seen.insert(q.key()) {
            raw.push(q);
        }
    }
    let mut queries: Vec<Query> = raw
        .into_iter()
        .enumerate()
        .map(|(i, q)| q.into_query(i as u64, rel))
        .collect();
    label_all(rel, &mut queries)?;
    Ok(queries)
}

const GENERATION_ATTEMPTS: usize = 6;

/// Generates `n_queries` labeled queries and `n_constraints` directly-comparable
/// `(loose, tight)` pairs among them.
///
/// Queries form a forest: each is either a freshly sampled base query or a
/// copy of an earlier query with one endpoint of one predicate tightened.
/// Every parent/child edge is a constraint; when more constraints are needed
/// than edges exist, ancestors linked to a query through tightenings of the
/// same column are paired with it as well.
pub fn generate_workload(
    rel: &Relation,
    n_queries: usize,
    n_constraints: usize,
    max_predicates: usize,
    seed: u64,
) -> Result<Workload> {
    check_sampling_args(rel, max_predicates)?;
    if n_queries < 2 {
        return Err(Error::Argument("a constrained workload needs at least 2 queries".into()));
    }
    if n_constraints == 0 {
        return Err(Error::Argument("n_constraints must be positive".into()));
    }
    if n_constraints as u128 > (n_queries as u128) * (n_queries as u128 - 1) / 2 {
        return Err(Error::Generation(format!(
            "{n_constraints} constraints cannot exist among {n_queries} queries"
        )));
    }

    let sampler = QuerySampler { rel, max_predicates };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bases = if n_constraints < n_queries {
        n_queries - n_constraints
    } else {
        (n_queries / 4).max(1)
    };

    let mut last_err = None;
    for _ in 0..GENERATION_ATTEMPTS {
        match build_forest(&sampler, n_queries, n_constraints, bases, &mut rng) {
            Ok((raw, pairs)) => {
                let mut queries: Vec<Query> = raw
                    .into_iter()
                    .enumerate()
                    .map(|(i, q)| q.into_query(i as u64, rel))
                    .collect();
                label_all(rel, &mut queries)?;
                let pairs = pairs.into_iter().map(|(l, t)| (l as u64, t as u64)).collect();
                return Workload::new(queries, ConstraintSet { pairs });
            }
            Err(e) => {
                last_err = Some(e);
                bases = (bases / 2).max(1);
            }
        }
    }
    Err(last_err.expect("at least one attempt"))
}

struct Node {
    parent: Option<usize>,
    column: Option<usize>,
}

type Forest = (Vec<RawQuery>, Vec<(usize, usize)>);

fn build_forest(
    sampler: &QuerySampler<'_>,
    n_queries: usize,
    n_constraints: usize,
    n_bases: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Forest> {
    let mut raw: Vec<RawQuery> = Vec::with_capacity(n_queries);
    let mut nodes: Vec<Node> = Vec::with_capacity(n_queries);
    let mut seen: HashMap<Vec<(usize, u64, u64)>, usize> = HashMap::new();
    let mut direct: Vec<(usize, usize)> = Vec::new();
    let mut direct_seen: HashSet<(usize, usize)> = HashSet::new();
    let mut bases_made = 0;
    let budget = 100 * n_queries + 1000;
    let mut failures = 0;

    while raw.len() < n_queries {
        if failures > budget {
            return Err(Error::Generation(format!(
                "gave up after {failures} failed attempts with {} of {n_queries} queries",
                raw.len()
            )));
        }
        let remaining = n_queries - raw.len();
        let bases_left = n_bases.saturating_sub(bases_made);
        let make_base = raw.is_empty()
            || (bases_left > 0 && rng.random_bool(bases_left as f64 / remaining as f64));

        if make_base {
            let q = sampler.base(rng);
            let key = q.key();
            if seen.contains_key(&key) {
                failures += 1;
                continue;
            }
            seen.insert(key, raw.len());
            raw.push(q);
            nodes.push(Node { parent: None, column: None });
            bases_made += 1;
            continue;
        }

        let parent = rng.random_range(0..raw.len());
        let column = match nodes[parent].column {
            Some(c) => c,
            None => {
                let preds = &raw[parent].0;
                preds[rng.random_range(0..preds.len())].0
            }
        };
        let Some(tight) = sampler.tighten(&raw[parent], column, rng) else {
            failures += 1;
            continue;
        };
        let key = tight.key();
        match seen.get(&key) {
            Some(&existing) => {
                if direct_seen.insert((parent, existing)) {
                    direct.push((parent, existing));
                }
                failures += 1;
            }
            None => {
                let id = raw.len();
                seen.insert(key, id);
                raw.push(tight);
                nodes.push(Node {
                    parent: Some(parent),
                    column: Some(column),
                });
                direct_seen.insert((parent, id));
                direct.push((parent, id));
            }
        }
    }

    let pairs = if n_constraints <= direct.len() {
        let mut picked: Vec<(usize, usize)> = index::sample(rng, direct.len(), n_constraints)
            .into_iter()
            .map(|i| direct[i])
            .collect();
        picked.sort_unstable();
        picked
    } else {
        let mut transitive = Vec::new();
        for (t, node) in nodes.iter().enumerate() {
            let (Some(mut anc), Some(col)) = (node.parent, node.column) else {
                continue;
            };
            while nodes[anc].column == Some(col) {
                anc = nodes[anc].parent.expect("tightened node has a parent");
                if !direct_seen.contains(&(anc, t)) {
                    transitive.push((anc, t));
                }
            }
        }
        let extra = n_constraints - direct.len();
        if transitive.len() < extra {
            return Err(Error::Generation(format!(
                "only {} comparable pairs available for {n_constraints} constraints",
                direct.len() + transitive.len()
            )));
        }
        let mut picked = direct;
        picked.extend(index::sample(rng, transitive.len(), extra).into_iter().map(|i| transitive[i]));
        picked.sort_unstable();
        picked
    };
    Ok((raw, pairs))
}
