use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::estimator::{EstimatorModel, LabelNorm};
use crate::relation::Relation;
use crate::workload::Workload;
use crate::{Error, Result};

use super::adam::Adam;
use super::hyper::{Hyperparams, RegPairs};
use super::loss::{qerror_from_outputs, regularizer_from_outputs, PairSet};

pub const DIAGNOSTICS_CSV_HEADER: &str = "epoch,train_loss,val_qerror,val_reg,seconds";

// Independent random streams derived from the run seed.
const SHUFFLE_STREAM: u64 = 1;
const PAIR_STREAM: u64 = 2;

/// Per-epoch training record.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochDiagnostics {
    pub epoch: usize,
    /// Mean total loss over the epoch's batches, weighted by batch size.
    pub train_loss: f64,
    /// Mean Q-error on the validation queries.
    pub val_qerror_component: f64,
    /// Regularizer mean term on the validation pairs, not scaled by `λ`.
    pub val_reg_component: f64,
    /// Wall time of the epoch's parameter updates.
    pub wall_time_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub model: EstimatorModel,
    pub diagnostics: Vec<EpochDiagnostics>,
}

#[derive(Debug, Clone, Copy)]
pub struct TrainOptions {
    /// When false the regularizer is never evaluated during updates,
    /// whatever `λ` is.
    pub regularizer_enabled: bool,
    /// Skip the validation pass after each epoch (diagnostic components are NaN).
    pub skip_validation: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            regularizer_enabled: true,
            skip_validation: false,
        }
    }
}

fn labels(wl: &Workload, what: &str) -> Result<Vec<f64>> {
    wl.queries()
        .iter()
        .map(|q| {
            q.label
                .map(|c| c as f64)
                .ok_or_else(|| Error::Argument(format!("{what} query {} has no label", q.id)))
        })
        .collect()
}

pub fn train(
    rel: &Relation,
    train_wl: &Workload,
    light: &Workload,
    val: &Workload,
    hp: &Hyperparams,
) -> Result<TrainedModel> {
    train_with(rel, train_wl, light, val, hp, TrainOptions::default())
}

/// Trains a fresh estimator with mini-batch Adam on
/// `mean Q-error + λ · regularizer(light pairs)`.
///
/// Validation pairs come from `val`'s constraints, or from the light
/// workload when `val` has none.
pub fn train_with(
    rel: &Relation,
    train_wl: &Workload,
    light: &Workload,
    val: &Workload,
    hp: &Hyperparams,
    opts: TrainOptions,
) -> Result<TrainedModel> {
    hp.validate()?;
    if train_wl.queries().is_empty() {
        return Err(Error::Argument("training workload is empty".into()));
    }
    let train_labels = labels(train_wl, "training")?;
    let regularize = opts.regularizer_enabled && hp.lambda > 0.0;
    if regularize && light.constraints().is_empty() {
        return Err(Error::Argument("regularized training needs light constraint pairs".into()));
    }

    let norm = LabelNorm::from_labels(train_labels.iter().map(|&c| c as u64));
    let mut model = EstimatorModel::new(rel.schema(), hp.hidden_units, norm, hp.seed)?;
    let train_batch = model.batch(train_wl.queries())?;
    let light_pairs = PairSet::new(&model, light)?;

    let validation = if opts.skip_validation {
        None
    } else {
        let val_labels = labels(val, "validation")?;
        let val_pairs = if val.constraints().is_empty() {
            light_pairs.clone()
        } else {
            PairSet::new(&model, val)?
        };
        Some((val.queries(), val_labels, val_pairs))
    };

    let mut adam = Adam::new(&model, hp.learning_rate);
    let mut grads = model.zero_gradients();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(hp.seed.wrapping_add(SHUFFLE_STREAM));
    let mut pair_rng = ChaCha8Rng::seed_from_u64(hp.seed.wrapping_add(PAIR_STREAM));
    let mut order: Vec<usize> = (0..train_batch.len()).collect();
    let mut diagnostics = Vec::with_capacity(hp.epochs);

    for epoch in 1..=hp.epochs {
        let started = Instant::now();
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;

        for chunk in order.chunks(hp.batch_size) {
            let batch = train_batch.select(chunk);
            let batch_labels: Vec<f64> = chunk.iter().map(|&i| train_labels[i]).collect();
            let cache = model.forward_batch(&batch).map_err(|e| diverged(epoch, e))?;
            let q = qerror_from_outputs(&cache.outputs, &batch_labels, norm)
                .map_err(|e| diverged(epoch, e))?;
            grads.reset();
            model.backward(&batch, &cache, &q.adjoints, &mut grads)?;
            let mut loss = q.value;

            if regularize {
                let sampled;
                let pairs = match hp.reg_pairs_per_batch {
                    RegPairs::Sample(k) if k < light_pairs.len() => {
                        let chosen = index::sample(&mut pair_rng, light_pairs.len(), k).into_vec();
                        sampled = light_pairs.subset(&chosen);
                        &sampled
                    }
                    _ => &light_pairs,
                };
                let pc = model.forward_batch(pairs.batch()).map_err(|e| diverged(epoch, e))?;
                let r = regularizer_from_outputs(&pc.outputs, pairs, hp, norm)
                    .map_err(|e| diverged(epoch, e))?;
                model.backward(pairs.batch(), &pc, &r.adjoints, &mut grads)?;
                loss += r.value;
            }

            if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged {
                    epoch,
                    message: format!("batch loss {loss}"),
                });
            }
            adam.update(&mut model, &grads);
            loss_sum += loss * chunk.len() as f64;
        }
        let wall_time_seconds = started.elapsed().as_secs_f64().max(f64::MIN_POSITIVE);

        let (val_q, val_r) = match &validation {
            None => (f64::NAN, f64::NAN),
            Some((queries, val_labels, val_pairs)) => {
                let outputs = model.predict_normalized(queries).map_err(|e| diverged(epoch, e))?;
                let q = qerror_from_outputs(&outputs, val_labels, norm).map_err(|e| diverged(epoch, e))?;
                let pc = model.forward_batch(val_pairs.batch()).map_err(|e| diverged(epoch, e))?;
                let r = regularizer_from_outputs(&pc.outputs, val_pairs, hp, norm)
                    .map_err(|e| diverged(epoch, e))?;
                (q.value, r.unscaled)
            }
        };
        diagnostics.push(EpochDiagnostics {
            epoch,
            train_loss: loss_sum / train_batch.len() as f64,
            val_qerror_component: val_q,
            val_reg_component: val_r,
            wall_time_seconds,
        });
    }

    if !model.all_finite() {
        return Err(Error::Diverged {
            epoch: hp.epochs,
            message: "non-finite parameters".into(),
        });
    }
    Ok(TrainedModel { model, diagnostics })
}

fn diverged(epoch: usize, e: Error) -> Error {
    match e {
        Error::Numeric(message) => Error::Diverged { epoch, message },
        other => other,
    }
}

/// Rescales a series to `[0, 1]`; a constant series maps to zeros.
pub fn min_max_normalize(series: &[f64]) -> Vec<f64> {
    let lo = series.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = series.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    series
        .iter()
        .map(|&v| if span > 0.0 { (v - lo) / span } else { 0.0 })
        .collect()
}

pub fn write_diagnostics_csv(diagnostics: &[EpochDiagnostics], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    out.push_str(DIAGNOSTICS_CSV_HEADER);
    out.push('\n');
    for d in diagnostics {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            d.epoch, d.train_loss, d.val_qerror_component, d.val_reg_component, d.wall_time_seconds
        ));
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}
