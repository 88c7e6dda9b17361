use crate::estimator::{EstimatorModel, Gradients, LabelNorm, QueryBatch};
use crate::workload::{differing_column, proxy_cardinality, Workload};
use crate::{Error, Result};

use super::hyper::{DistanceKind, Hyperparams, RegSpace};

/// `1 / (1 + exp(-c·x))`, evaluated on the branch that cannot overflow.
pub fn softened_sign(x: f64, c: f64) -> f64 {
    let z = c * x;
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softened_sign_slope(s: f64, c: f64) -> f64 {
    c * s * (1.0 - s)
}

/// Signed distance between two non-negative magnitudes. Jaccard is defined
/// as 0 when both are 0.
pub fn distance(a: f64, b: f64, kind: DistanceKind) -> f64 {
    match kind {
        DistanceKind::Difference => a - b,
        DistanceKind::Jaccard => {
            let m = a.max(b);
            if m == 0.0 {
                0.0
            } else {
                (a - b) / m
            }
        }
    }
}

/// Partial derivatives `(∂D/∂a, ∂D/∂b)`. Both Jaccard branches agree at
/// `a == b`; at `a == b == 0` the derivative is taken as zero.
pub fn distance_gradient(a: f64, b: f64, kind: DistanceKind) -> (f64, f64) {
    match kind {
        DistanceKind::Difference => (1.0, -1.0),
        DistanceKind::Jaccard => {
            if a >= b {
                if a == 0.0 {
                    (0.0, 0.0)
                } else {
                    (b / (a * a), -1.0 / a)
                }
            } else {
                (1.0 / b, -a / (b * b))
            }
        }
    }
}

/// Scalar loss and its adjoint with respect to each query's normalized output.
#[derive(Debug, Clone, PartialEq)]
pub struct LossEval {
    pub value: f64,
    pub adjoints: Vec<f64>,
}

/// Mean Q-error of normalized outputs against labels (both sides ≥ 1).
pub(crate) fn qerror_from_outputs(outputs: &[f64], labels: &[f64], norm: LabelNorm) -> Result<LossEval> {
    if outputs.is_empty() {
        return Err(Error::Argument("Q-error loss needs a non-empty batch".into()));
    }
    let n = outputs.len() as f64;
    let span = norm.span();
    let mut total = 0.0;
    let mut adjoints = Vec::with_capacity(outputs.len());
    for (&y, &c) in outputs.iter().zip(labels) {
        let est = norm.unnormalize(y);
        let c = c.max(1.0);
        let (q, slope) = if est >= c {
            let q = est / c;
            (q, q * span)
        } else {
            let q = c / est;
            (q, -q * span)
        };
        total += q;
        adjoints.push(slope / n);
    }
    let value = total / n;
    if !value.is_finite() {
        return Err(Error::Numeric(format!("Q-error loss is {value}")));
    }
    Ok(LossEval { value, adjoints })
}

fn labels_of(queries: &[crate::Query]) -> Result<Vec<f64>> {
    queries
        .iter()
        .map(|q| {
            q.label
                .map(|c| c as f64)
                .ok_or_else(|| Error::Argument(format!("query {} has no label", q.id)))
        })
        .collect()
}

pub fn qerror_loss(model: &EstimatorModel, queries: &[crate::Query]) -> Result<LossEval> {
    let labels = labels_of(queries)?;
    let batch = model.batch(queries)?;
    let out = model.forward_batch(&batch)?;
    qerror_from_outputs(&out.outputs, &labels, model.label_norm())
}

/// Constraint pairs of a workload, prepared for repeated regularizer evaluation.
#[derive(Debug, Clone)]
pub struct PairSet {
    batch: QueryBatch,
    pairs: Vec<(usize, usize)>,
    proxies: Vec<(f64, f64)>,
}

impl PairSet {
    pub fn new(model: &EstimatorModel, workload: &Workload) -> Result<Self> {
        let positions = workload.pair_positions();
        let mut local = vec![usize::MAX; workload.queries().len()];
        let mut members = Vec::new();
        for &(l, t) in &positions {
            for p in [l, t] {
                if local[p] == usize::MAX {
                    local[p] = members.len();
                    members.push(p);
                }
            }
        }
        let queries = workload.queries();
        let batch = model.batch(members.iter().map(|&p| &queries[p]))?;
        let mut pairs = Vec::with_capacity(positions.len());
        let mut proxies = Vec::with_capacity(positions.len());
        for &(l, t) in &positions {
            let (ql, qt) = (&queries[l], &queries[t]);
            let proxy = match differing_column(ql, qt) {
                Some(col) => (proxy_cardinality(ql, col)?, proxy_cardinality(qt, col)?),
                None => (0.0, 0.0),
            };
            pairs.push((local[l], local[t]));
            proxies.push(proxy);
        }
        Ok(PairSet { batch, pairs, proxies })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub(crate) fn batch(&self) -> &QueryBatch {
        &self.batch
    }

    /// The chosen pairs re-indexed into a batch holding only their queries.
    pub(crate) fn subset(&self, chosen: &[usize]) -> PairSet {
        let mut local = vec![usize::MAX; self.batch.len()];
        let mut members = Vec::new();
        let mut pairs = Vec::with_capacity(chosen.len());
        let mut proxies = Vec::with_capacity(chosen.len());
        for &i in chosen {
            let (l, t) = self.pairs[i];
            for q in [l, t] {
                if local[q] == usize::MAX {
                    local[q] = members.len();
                    members.push(q);
                }
            }
            pairs.push((local[l], local[t]));
            proxies.push(self.proxies[i]);
        }
        PairSet {
            batch: self.batch.select(&members),
            pairs,
            proxies,
        }
    }
}

/// Mean over pairs of `[S(D(ref_l, ref_r)) - S(D(est_l, est_r))]²` and the
/// derivative of that mean with respect to each pair's two estimates.
pub fn regularizer_terms(
    reference: &[(f64, f64)],
    estimated: &[(f64, f64)],
    kind: DistanceKind,
    c: f64,
) -> (f64, Vec<(f64, f64)>) {
    let m = reference.len() as f64;
    let mut total = 0.0;
    let mut grads = Vec::with_capacity(reference.len());
    for (&(rl, rt), &(el, et)) in reference.iter().zip(estimated) {
        let s_ref = softened_sign(distance(rl, rt, kind), c);
        let s_est = softened_sign(distance(el, et, kind), c);
        let diff = s_ref - s_est;
        total += diff * diff;
        let outer = -2.0 * diff * softened_sign_slope(s_est, c) / m;
        let (dl, dt) = distance_gradient(el, et, kind);
        grads.push((outer * dl, outer * dt));
    }
    (total / m, grads)
}

/// Regularizer value and adjoints on the normalized outputs of a pair batch.
#[derive(Debug, Clone, PartialEq)]
pub struct RegEval {
    /// `λ · mean term`
    pub value: f64,
    /// Mean term without the `λ` prefactor, in `[0, 1]`.
    pub unscaled: f64,
    /// Adjoint of `value` for every query in the pair batch.
    pub adjoints: Vec<f64>,
}

pub(crate) fn regularizer_from_outputs(
    outputs: &[f64],
    pairs: &PairSet,
    hp: &Hyperparams,
    norm: LabelNorm,
) -> Result<RegEval> {
    if pairs.is_empty() {
        return Err(Error::Argument("monotonic regularizer needs at least one pair".into()));
    }
    let span = norm.span();
    let to_space = |y: f64| match hp.reg_space {
        RegSpace::NormalizedLog => y,
        RegSpace::RawCardinality => norm.unnormalize(y),
    };
    let estimated: Vec<(f64, f64)> = pairs
        .pairs
        .iter()
        .map(|&(l, t)| (to_space(outputs[l]), to_space(outputs[t])))
        .collect();
    let (unscaled, grads) = regularizer_terms(&pairs.proxies, &estimated, hp.distance, hp.c);
    if !unscaled.is_finite() {
        return Err(Error::Numeric(format!("regularizer is {unscaled}")));
    }

    let mut adjoints = vec![0.0; outputs.len()];
    if hp.lambda != 0.0 {
        for (&(l, t), ((gl, gt), (vl, vt))) in pairs.pairs.iter().zip(grads.into_iter().zip(estimated)) {
            let (jl, jt) = match hp.reg_space {
                RegSpace::NormalizedLog => (1.0, 1.0),
                RegSpace::RawCardinality => (vl * span, vt * span),
            };
            adjoints[l] += hp.lambda * gl * jl;
            adjoints[t] += hp.lambda * gt * jt;
        }
    }
    Ok(RegEval {
        value: hp.lambda * unscaled,
        unscaled,
        adjoints,
    })
}

pub fn monotonic_regularizer(model: &EstimatorModel, pairs: &PairSet, hp: &Hyperparams) -> Result<RegEval> {
    if pairs.is_empty() {
        return Err(Error::Argument("monotonic regularizer needs at least one pair".into()));
    }
    let out = model.forward_batch(&pairs.batch)?;
    regularizer_from_outputs(&out.outputs, pairs, hp, model.label_norm())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TotalLossEval {
    pub value: f64,
    pub qerror: f64,
    pub regularizer: f64,
    /// Adjoints on the training batch outputs.
    pub batch_adjoints: Vec<f64>,
    /// Adjoints on the pair batch outputs; empty when `λ = 0`.
    pub pair_adjoints: Vec<f64>,
}

/// `mean Q-error(batch) + λ · regularizer(pairs)`. With `λ = 0` the pair
/// batch is not evaluated at all.
pub fn total_loss(
    model: &EstimatorModel,
    queries: &[crate::Query],
    pairs: &PairSet,
    hp: &Hyperparams,
) -> Result<TotalLossEval> {
    Ok(total_loss_with_caches(model, queries, pairs, hp)?.0)
}

type Caches = (
    TotalLossEval,
    QueryBatch,
    crate::estimator::ForwardCache,
    Option<crate::estimator::ForwardCache>,
);

fn total_loss_with_caches(
    model: &EstimatorModel,
    queries: &[crate::Query],
    pairs: &PairSet,
    hp: &Hyperparams,
) -> Result<Caches> {
    hp.validate()?;
    let labels = labels_of(queries)?;
    let batch = model.batch(queries)?;
    let cache = model.forward_batch(&batch)?;
    let q = qerror_from_outputs(&cache.outputs, &labels, model.label_norm())?;
    let (reg, pair_adjoints, pair_cache) = if hp.lambda > 0.0 {
        let pc = model.forward_batch(&pairs.batch)?;
        let r = regularizer_from_outputs(&pc.outputs, pairs, hp, model.label_norm())?;
        (r.value, r.adjoints, Some(pc))
    } else {
        (0.0, Vec::new(), None)
    };
    let eval = TotalLossEval {
        value: q.value + reg,
        qerror: q.value,
        regularizer: reg,
        batch_adjoints: q.adjoints,
        pair_adjoints,
    };
    Ok((eval, batch, cache, pair_cache))
}

/// Total loss and its exact gradient with respect to every model parameter.
pub fn loss_and_gradient(
    model: &EstimatorModel,
    queries: &[crate::Query],
    pairs: &PairSet,
    hp: &Hyperparams,
) -> Result<(TotalLossEval, Gradients)> {
    let (eval, batch, cache, pair_cache) = total_loss_with_caches(model, queries, pairs, hp)?;
    let mut grads = model.zero_gradients();
    model.backward(&batch, &cache, &eval.batch_adjoints, &mut grads)?;
    if let Some(pc) = pair_cache {
        model.backward(&pairs.batch, &pc, &eval.pair_adjoints, &mut grads)?;
    }
    Ok((eval, grads))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_symmetry_point() {
        for c in [0.1, 1.0, 10.0, 1e4] {
            assert_eq!(softened_sign(0.0, c), 0.5);
        }
    }

    #[test]
    fn sign_closed_form() {
        // 1 / (1 + e^-7.5), evaluated with mpmath at 30 digits
        let expected = 0.999_447_221_363_076_4;
        assert!((softened_sign(0.75, 10.0) - expected).abs() < 1e-15);
    }

    #[test]
    fn sign_extremes_do_not_overflow() {
        let v = softened_sign(-1e6, 1e4);
        assert!((0.0..=1e-300).contains(&v));
        assert_eq!(softened_sign(1e6, 1e4), 1.0);
        assert_eq!(softened_sign(f64::MAX, 1e4), 1.0);
        assert_eq!(softened_sign(-f64::MAX, 1e4), 0.0);
    }

    #[test]
    fn sign_is_increasing() {
        let xs: Vec<f64> = (-200..=200).map(|i| i as f64 * 0.01).collect();
        for w in xs.windows(2) {
            assert!(softened_sign(w[0], 3.0) < softened_sign(w[1], 3.0));
        }
    }

    #[test]
    fn distances() {
        assert_eq!(distance(480.0, 400.0, DistanceKind::Difference), 80.0);
        assert_eq!(distance(480.0, 400.0, DistanceKind::Jaccard), 80.0 / 480.0);
        assert_eq!(distance(0.0, 0.0, DistanceKind::Jaccard), 0.0);
        assert_eq!(distance(0.0, 5.0, DistanceKind::Jaccard), -1.0);
    }

    #[test]
    fn distance_gradients_match_differences() {
        let h = 1e-6;
        for kind in [DistanceKind::Difference, DistanceKind::Jaccard] {
            for (a, b) in [(3.0, 2.0), (0.4, 0.9), (5.0, 5.0), (1e-3, 2e-3)] {
                let (ga, gb) = distance_gradient(a, b, kind);
                let na = (distance(a + h, b, kind) - distance(a - h, b, kind)) / (2.0 * h);
                let nb = (distance(a, b + h, kind) - distance(a, b - h, kind)) / (2.0 * h);
                if a != b {
                    assert!((ga - na).abs() < 1e-6 * (1.0 + na.abs()), "{kind} {a} {b}");
                    assert!((gb - nb).abs() < 1e-6 * (1.0 + nb.abs()), "{kind} {a} {b}");
                }
            }
        }
    }

    fn norm() -> LabelNorm {
        LabelNorm::new(0.0, 10.0).unwrap()
    }

    #[test]
    fn qerror_examples() {
        let n = norm();
        let y = |c: f64| n.normalize(c);
        let perfect = qerror_from_outputs(&[y(10.0), y(300.0)], &[10.0, 300.0], n).unwrap();
        assert!((perfect.value - 1.0).abs() < 1e-12);

        let under = qerror_from_outputs(&[y(50.0)], &[200.0], n).unwrap();
        assert!((under.value - 4.0).abs() < 1e-9);
        assert!(under.adjoints[0] < 0.0);

        // Q = 2 and Q = 8
        let mean = qerror_from_outputs(&[y(20.0), y(80.0)], &[10.0, 10.0], n).unwrap();
        assert!((mean.value - 5.0).abs() < 1e-9);

        assert!(qerror_from_outputs(&[], &[], n).is_err());
    }

    #[test]
    fn qerror_tie_takes_overestimation_branch() {
        let n = norm();
        let e = qerror_from_outputs(&[0.0], &[1.0], n).unwrap();
        assert_eq!(e.value, 1.0);
        assert!(e.adjoints[0] > 0.0);
    }

    #[test]
    fn regularizer_saturates() {
        let reference = vec![(10.0, 4.0), (3.0, 2.0), (100.0, 1.0)];
        let ordered = vec![(0.9, 0.2), (0.5, 0.45), (0.31, 0.3)];
        let anti: Vec<_> = ordered.iter().map(|&(a, b)| (b, a)).collect();
        for kind in [DistanceKind::Difference, DistanceKind::Jaccard] {
            let (good, _) = regularizer_terms(&reference, &ordered, kind, 1e4);
            let (bad, _) = regularizer_terms(&reference, &anti, kind, 1e4);
            assert!(good <= 1e-6, "{kind}: {good}");
            assert!(bad >= 1.0 - 1e-6, "{kind}: {bad}");
        }
    }
}
