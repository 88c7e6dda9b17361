use std::fs;
use std::path::Path;

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::featurize::Featurizer;
use crate::relation::ColumnSchema;
use crate::workload::Query;
use crate::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Queries are pushed through the network in chunks of this many when only
/// estimates are needed.
const INFERENCE_CHUNK: usize = 4096;

/// Fully connected layer; `w` has shape `(out, in)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Dense {
    fn zeros(out_dim: usize, in_dim: usize) -> Self {
        Dense {
            w: Array2::zeros((out_dim, in_dim)),
            b: Array1::zeros(out_dim),
        }
    }

    fn uniform(out_dim: usize, in_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        let w = Array2::from_shape_simple_fn((out_dim, in_dim), || rng.random_range(-bound..=bound));
        Dense {
            w,
            b: Array1::zeros(out_dim),
        }
    }

    fn len(&self) -> usize {
        self.w.len() + self.b.len()
    }

    fn get(&self, i: usize) -> f64 {
        let nw = self.w.len();
        if i < nw {
            self.w.as_slice().expect("contiguous")[i]
        } else {
            self.b[i - nw]
        }
    }

    fn get_mut(&mut self, i: usize) -> &mut f64 {
        let nw = self.w.len();
        if i < nw {
            &mut self.w.as_slice_mut().expect("contiguous")[i]
        } else {
            &mut self.b[i - nw]
        }
    }

    /// `x · wᵀ + b`
    fn affine(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((x.nrows(), self.w.nrows()));
        out.assign(&self.b);
        general_mat_mul(1.0, x, &self.w.t(), 1.0, &mut out);
        out
    }

    /// Accumulates `δᵀ · input` and the column sums of `δ` into this layer.
    fn accumulate(&mut self, delta: &Array2<f64>, input: &Array2<f64>) {
        general_mat_mul(1.0, &delta.t(), input, 1.0, &mut self.w);
        self.b += &delta.sum_axis(Axis(0));
    }

    fn all_finite(&self) -> bool {
        self.w.iter().chain(self.b.iter()).all(|v| v.is_finite())
    }
}

/// Log-space min-max scaling of cardinality labels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelNorm {
    pub log_min: f64,
    pub log_max: f64,
}

impl LabelNorm {
    pub fn new(log_min: f64, log_max: f64) -> Result<Self> {
        if !(log_min.is_finite() && log_max.is_finite() && log_min < log_max) {
            return Err(Error::Argument(format!(
                "label normalization needs finite log_min < log_max, got {log_min}, {log_max}"
            )));
        }
        Ok(LabelNorm { log_min, log_max })
    }

    /// Bounds from a set of labels, each clamped to at least 1.
    pub fn from_labels(labels: impl IntoIterator<Item = u64>) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for c in labels {
            let v = (c.max(1) as f64).ln();
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            lo = 0.0;
            hi = 1.0;
        }
        if hi <= lo {
            hi = lo + 1.0;
        }
        LabelNorm { log_min: lo, log_max: hi }
    }

    pub fn span(&self) -> f64 {
        self.log_max - self.log_min
    }

    pub fn normalize(&self, card: f64) -> f64 {
        (card.max(1.0).ln() - self.log_min) / self.span()
    }

    pub fn unnormalize(&self, y: f64) -> f64 {
        (y * self.span() + self.log_min)
            .exp()
            .clamp(self.log_min.exp(), self.log_max.exp())
    }
}

/// Stacked feature rows of several queries; rows of query `i` occupy
/// `offsets[i]..offsets[i + 1]`.
#[derive(Debug, Clone)]
pub struct QueryBatch {
    features: Array2<f64>,
    offsets: Vec<usize>,
}

impl QueryBatch {
    pub fn from_queries<'a>(
        featurizer: &Featurizer,
        queries: impl IntoIterator<Item = &'a Query>,
    ) -> Result<Self> {
        let width = featurizer.feature_width();
        let mut flat = Vec::new();
        let mut offsets = vec![0];
        for q in queries {
            if q.predicates.is_empty() {
                return Err(Error::Featurization(format!("query {} has no predicates", q.id)));
            }
            let mut rows = featurizer.featurize(q)?.rows;
            // Pool in column order so the pooled sum does not depend on how
            // the predicates were listed.
            rows.sort_by_key(|r| r.iter().position(|&v| v == 1.0));
            for r in rows {
                flat.extend(r);
            }
            offsets.push(flat.len() / width);
        }
        let n_rows = *offsets.last().unwrap();
        let features = Array2::from_shape_vec((n_rows, width), flat).expect("feature shape");
        Ok(QueryBatch { features, offsets })
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn feature_width(&self) -> usize {
        self.features.ncols()
    }

    /// Sub-batch made of the given queries, in the given order.
    pub fn select(&self, queries: &[usize]) -> QueryBatch {
        let width = self.features.ncols();
        let mut flat = Vec::new();
        let mut offsets = Vec::with_capacity(queries.len() + 1);
        offsets.push(0);
        let src = self.features.as_slice().expect("contiguous");
        for &q in queries {
            let (a, b) = (self.offsets[q], self.offsets[q + 1]);
            flat.extend_from_slice(&src[a * width..b * width]);
            offsets.push(flat.len() / width);
        }
        let n_rows = *offsets.last().unwrap();
        QueryBatch {
            features: Array2::from_shape_vec((n_rows, width), flat).expect("feature shape"),
            offsets,
        }
    }
}

/// Activations kept from a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    h1: Array2<f64>,
    h2: Array2<f64>,
    pooled: Array2<f64>,
    h3: Array2<f64>,
    /// Normalized log-cardinality per query.
    pub outputs: Vec<f64>,
}

/// Parameter gradients laid out like the model's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn len(&self) -> usize {
        self.layers.iter().map(Dense::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, mut i: usize) -> f64 {
        for l in &self.layers {
            if i < l.len() {
                return l.get(i);
            }
            i -= l.len();
        }
        panic!("gradient index out of range")
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.w.iter().chain(l.b.iter()).copied())
    }

    pub fn reset(&mut self) {
        for l in &mut self.layers {
            l.w.fill(0.0);
            l.b.fill(0.0);
        }
    }
}

/// Set-pooling estimator: every predicate row goes through a two-layer
/// predicate network, rows are averaged per query, and a two-layer output
/// network maps the pooled vector to a normalized log-cardinality in (0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorModel {
    featurizer: Featurizer,
    hidden_units: usize,
    /// predicate layers 1-2, output layers 3-4
    layers: Vec<Dense>,
    norm: LabelNorm,
}

fn relu_inplace(a: &mut Array2<f64>) {
    a.mapv_inplace(|v| if v > 0.0 { v } else { 0.0 });
}

fn relu_mask(delta: &mut Array2<f64>, activation: &Array2<f64>) {
    ndarray::Zip::from(delta)
        .and(activation)
        .for_each(|d, &h| {
            if h <= 0.0 {
                *d = 0.0;
            }
        });
}

pub(crate) fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl EstimatorModel {
    pub fn new(schema: &[ColumnSchema], hidden_units: usize, norm: LabelNorm, seed: u64) -> Result<Self> {
        if hidden_units == 0 {
            return Err(Error::Argument("hidden_units must be positive".into()));
        }
        if schema.is_empty() {
            return Err(Error::Schema("model needs at least one column".into()));
        }
        let featurizer = Featurizer::new(schema);
        let f = featurizer.feature_width();
        let h = hidden_units;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = vec![
            Dense::uniform(h, f, &mut rng),
            Dense::uniform(h, h, &mut rng),
            Dense::uniform(h, h, &mut rng),
            Dense::uniform(1, h, &mut rng),
        ];
        Ok(EstimatorModel {
            featurizer,
            hidden_units,
            layers,
            norm,
        })
    }

    pub fn featurizer(&self) -> &Featurizer {
        &self.featurizer
    }

    pub fn hidden_units(&self) -> usize {
        self.hidden_units
    }

    pub fn label_norm(&self) -> LabelNorm {
        self.norm
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Dense::len).sum()
    }

    /// Parameter `i` in layer order, each layer's weights (row-major) before its biases.
    pub fn param(&self, mut i: usize) -> f64 {
        for l in &self.layers {
            if i < l.len() {
                return l.get(i);
            }
            i -= l.len();
        }
        panic!("parameter index out of range")
    }

    pub fn param_mut(&mut self, mut i: usize) -> &mut f64 {
        for l in &mut self.layers {
            if i < l.len() {
                return l.get_mut(i);
            }
            i -= l.len();
        }
        panic!("parameter index out of range")
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn all_finite(&self) -> bool {
        self.layers.iter().all(Dense::all_finite)
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            layers: self
                .layers
                .iter()
                .map(|l| Dense::zeros(l.w.nrows(), l.w.ncols()))
                .collect(),
        }
    }

    pub fn batch<'a>(&self, queries: impl IntoIterator<Item = &'a Query>) -> Result<QueryBatch> {
        QueryBatch::from_queries(&self.featurizer, queries)
    }

    pub fn forward_batch(&self, batch: &QueryBatch) -> Result<ForwardCache> {
        if batch.feature_width() != self.featurizer.feature_width() {
            return Err(Error::Featurization(format!(
                "batch has feature width {}, model expects {}",
                batch.feature_width(),
                self.featurizer.feature_width()
            )));
        }
        let [l1, l2, l3, l4] = &self.layers[..] else {
            unreachable!("model has four layers")
        };
        let mut h1 = l1.affine(&batch.features);
        relu_inplace(&mut h1);
        let mut h2 = l2.affine(&h1);
        relu_inplace(&mut h2);

        let n = batch.len();
        let mut pooled = Array2::zeros((n, self.hidden_units));
        for q in 0..n {
            let (a, b) = (batch.offsets[q], batch.offsets[q + 1]);
            let mut row = pooled.row_mut(q);
            for r in a..b {
                row += &h2.row(r);
            }
            row /= (b - a) as f64;
        }

        let mut h3 = l3.affine(&pooled);
        relu_inplace(&mut h3);
        let logits = l4.affine(&h3);
        let outputs: Vec<f64> = logits.column(0).iter().map(|&v| logistic(v)).collect();
        if let Some(bad) = outputs.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite output for batch query {bad}")));
        }
        Ok(ForwardCache {
            h1,
            h2,
            pooled,
            h3,
            outputs,
        })
    }

    /// Accumulates into `grads` the gradient of `Σ_i adjoints[i] · output_i`.
    pub fn backward(
        &self,
        batch: &QueryBatch,
        cache: &ForwardCache,
        adjoints: &[f64],
        grads: &mut Gradients,
    ) -> Result<()> {
        let n = batch.len();
        if adjoints.len() != n || cache.outputs.len() != n || grads.layers.len() != self.layers.len() {
            return Err(Error::Argument(format!(
                "shape mismatch: {} adjoints for {} queries",
                adjoints.len(),
                n
            )));
        }
        let [_, l2, l3, l4] = &self.layers[..] else {
            unreachable!("model has four layers")
        };

        let d_logit = Array2::from_shape_fn((n, 1), |(i, _)| {
            let y = cache.outputs[i];
            adjoints[i] * y * (1.0 - y)
        });
        grads.layers[3].accumulate(&d_logit, &cache.h3);

        let mut d3 = d_logit.dot(&l4.w);
        relu_mask(&mut d3, &cache.h3);
        grads.layers[2].accumulate(&d3, &cache.pooled);

        let d_pooled = d3.dot(&l3.w);
        let mut d2 = Array2::zeros(cache.h2.raw_dim());
        for q in 0..n {
            let (a, b) = (batch.offsets[q], batch.offsets[q + 1]);
            let share = &d_pooled.row(q) / (b - a) as f64;
            for r in a..b {
                d2.row_mut(r).assign(&share);
            }
        }
        relu_mask(&mut d2, &cache.h2);
        grads.layers[1].accumulate(&d2, &cache.h1);

        let mut d1 = d2.dot(&l2.w);
        relu_mask(&mut d1, &cache.h1);
        grads.layers[0].accumulate(&d1, &batch.features);
        Ok(())
    }

    /// Normalized log output and cardinality estimate for one query.
    pub fn forward(&self, q: &Query) -> Result<(f64, f64)> {
        let batch = self.batch([q])?;
        let y = self.forward_batch(&batch)?.outputs[0];
        Ok((y, self.norm.unnormalize(y)))
    }

    /// Normalized log outputs for many queries.
    pub fn predict_normalized(&self, queries: &[Query]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(queries.len());
        for chunk in queries.chunks(INFERENCE_CHUNK) {
            let batch = self.batch(chunk)?;
            out.extend(self.forward_batch(&batch)?.outputs);
        }
        Ok(out)
    }

    pub fn predict(&self, queries: &[Query]) -> Result<Vec<f64>> {
        Ok(self
            .predict_normalized(queries)?
            .into_iter()
            .map(|y| self.norm.unnormalize(y))
            .collect())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, save_model(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        load_model(&bytes)
    }
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    schema: Vec<ColumnSchema>,
    hidden_units: usize,
    log_min: f64,
    log_max: f64,
    layers: Vec<LayerFile>,
}

pub fn save_model(model: &EstimatorModel) -> Result<Vec<u8>> {
    if !model.all_finite() {
        return Err(Error::Numeric("refusing to save a model with non-finite parameters".into()));
    }
    let file = ModelFile {
        version: MODEL_FORMAT_VERSION,
        schema: model.featurizer.schema().to_vec(),
        hidden_units: model.hidden_units,
        log_min: model.norm.log_min,
        log_max: model.norm.log_max,
        layers: model
            .layers
            .iter()
            .map(|l| LayerFile {
                w: l.w.outer_iter().map(|r| r.to_vec()).collect(),
                b: l.b.to_vec(),
            })
            .collect(),
    };
    serde_json::to_vec(&file).map_err(|e| Error::Numeric(e.to_string()))
}

pub fn load_model(bytes: &[u8]) -> Result<EstimatorModel> {
    let file: ModelFile = serde_json::from_slice(bytes).map_err(|e| Error::Load(e.to_string()))?;
    if file.version != MODEL_FORMAT_VERSION {
        return Err(Error::Load(format!(
            "unsupported model version {} (expected {MODEL_FORMAT_VERSION})",
            file.version
        )));
    }
    for col in &file.schema {
        col.validate().map_err(|e| Error::Load(e.to_string()))?;
    }
    let norm = LabelNorm::new(file.log_min, file.log_max).map_err(|e| Error::Load(e.to_string()))?;
    let featurizer = Featurizer::new(&file.schema);
    let (f, h) = (featurizer.feature_width(), file.hidden_units);
    let shapes = [(h, f), (h, h), (h, h), (1, h)];
    if h == 0 || file.layers.len() != shapes.len() {
        return Err(Error::Load(format!(
            "expected {} layers with hidden_units > 0",
            shapes.len()
        )));
    }
    let mut layers = Vec::with_capacity(shapes.len());
    for (i, (lf, (out_dim, in_dim))) in file.layers.into_iter().zip(shapes).enumerate() {
        if lf.w.len() != out_dim || lf.w.iter().any(|r| r.len() != in_dim) || lf.b.len() != out_dim {
            return Err(Error::Load(format!("layer {i} should be {out_dim}x{in_dim}")));
        }
        let w = Array2::from_shape_vec((out_dim, in_dim), lf.w.into_iter().flatten().collect())
            .expect("checked shape");
        let layer = Dense { w, b: Array1::from(lf.b) };
        if !layer.all_finite() {
            return Err(Error::Load(format!("layer {i} has non-finite parameters")));
        }
        layers.push(layer);
    }
    Ok(EstimatorModel {
        featurizer,
        hidden_units: h,
        layers,
        norm,
    })
}
