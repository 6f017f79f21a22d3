//! The three continuity losses and their weighted joint objective.
//!
//! Justification: binary cross-entropy telling continuous from
//! discontinuous clips (class 0 = continuous, class 1 = discontinuous).
//! Localization: (clip_len - 1)-way cross-entropy over break positions.
//! Approximation: a triplet term pulling the discontinuous clip's embedding
//! toward its missing section past the same video's continuous clip by a
//! margin, plus an instance-discrimination term contrasting the
//! discontinuous clip against its continuous clip with all other batch
//! clips as negatives. Convex weight `omega` blends the two; `w1..w3`
//! weight the joint sum.
//!
//! Every loss has an analytic gradient; `verify` checks both values and
//! gradients against independent scalar oracles and finite differences.

use crate::num::Scalar;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LossError {
    #[error("batch is empty")]
    EmptyBatch,
    #[error("label {label} out of range for {classes} classes (row {row})")]
    LabelOutOfRange {
        row: usize,
        label: usize,
        classes: usize,
    },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

/// Loss hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    /// Convex weight between the triplet term (omega) and the contrastive
    /// term (1 - omega) inside the approximation loss.
    pub omega: f64,
    /// Triplet margin on cosine similarities.
    pub gamma: f64,
    /// Contrastive softmax temperature.
    pub tau: f64,
    /// Weight of the justification loss in the joint objective.
    pub w1: f64,
    /// Weight of the localization loss.
    pub w2: f64,
    /// Weight of the approximation loss.
    pub w3: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            omega: 0.5,
            gamma: 0.2,
            tau: 0.1,
            w1: 1.0,
            w2: 1.0,
            w3: 0.1,
        }
    }
}

/// Per-term scalar loss values for one batch.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub justification: f64,
    pub localization: f64,
    pub approximation: f64,
    pub approximation_triplet: f64,
    pub approximation_contrastive: f64,
    pub total: f64,
}

/// Which tasks participate in the joint objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskMask {
    pub justify: bool,
    pub localize: bool,
    pub embed: bool,
}

impl Default for TaskMask {
    fn default() -> Self {
        Self {
            justify: true,
            localize: true,
            embed: true,
        }
    }
}

impl TaskMask {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn only(kind: crate::net::HeadKind) -> Self {
        let mut m = Self {
            justify: false,
            localize: false,
            embed: false,
        };
        match kind {
            crate::net::HeadKind::Justify => m.justify = true,
            crate::net::HeadKind::Localize => m.localize = true,
            crate::net::HeadKind::Embed => m.embed = true,
        }
        m
    }
}

const COSINE_EPS: f64 = 1e-8;

/// Cosine similarity with an epsilon guard on the norms, so degenerate
/// zero vectors yield 0 instead of NaN.
pub fn cosine_similarity<F: Scalar>(a: ArrayView1<'_, F>, b: ArrayView1<'_, F>) -> F {
    let eps = F::from_f64(COSINE_EPS);
    let dot = a.dot(&b);
    let na = a.dot(&a).sqrt().max(eps);
    let nb = b.dot(&b).sqrt().max(eps);
    dot / (na * nb)
}

/// Numerically stable log(sum(exp(x))) and the softmax of x.
fn log_sum_exp_softmax<F: Scalar>(x: &[F]) -> (F, Vec<F>) {
    let max = x.iter().copied().fold(F::neg_infinity(), F::max);
    let mut sum = F::zero();
    let mut probs = Vec::with_capacity(x.len());
    for &v in x {
        let e = (v - max).exp();
        probs.push(e);
        sum = sum + e;
    }
    for p in probs.iter_mut() {
        *p = *p / sum;
    }
    (max + sum.ln(), probs)
}

/// Mean softmax cross-entropy of `logits` rows against integer targets.
fn cross_entropy_mean<F: Scalar>(
    logits: &ArrayView2<'_, F>,
    targets: &[usize],
) -> Result<F, LossError> {
    let (k, classes) = logits.dim();
    if k == 0 {
        return Err(LossError::EmptyBatch);
    }
    debug_assert_eq!(k, targets.len());
    let mut total = F::zero();
    for (row, &target) in targets.iter().enumerate() {
        if target >= classes {
            return Err(LossError::LabelOutOfRange {
                row,
                label: target,
                classes,
            });
        }
        let row_logits: Vec<F> = logits.row(row).iter().copied().collect();
        let (lse, _) = log_sum_exp_softmax(&row_logits);
        total = total + lse - row_logits[target];
    }
    Ok(total / F::from_f64(k as f64))
}

/// Gradient of `cross_entropy_mean` w.r.t. the logits: (softmax - onehot)/K.
fn cross_entropy_grad<F: Scalar>(logits: &ArrayView2<'_, F>, targets: &[usize]) -> Array2<F> {
    let (k, classes) = logits.dim();
    let inv_k = F::from_f64(1.0 / k as f64);
    let mut grad = Array2::<F>::zeros((k, classes));
    for (row, &target) in targets.iter().enumerate() {
        let row_logits: Vec<F> = logits.row(row).iter().copied().collect();
        let (_, probs) = log_sum_exp_softmax(&row_logits);
        for c in 0..classes {
            let indicator = if c == target { F::one() } else { F::zero() };
            grad[(row, c)] = (probs[c] - indicator) * inv_k;
        }
    }
    grad
}

/// Continuity justification loss: mean over the batch of
/// CE(discontinuous logits, class 1) + CE(continuous logits, class 0).
pub fn loss_justification<F: Scalar>(
    logits_d: &ArrayView2<'_, F>,
    logits_c: &ArrayView2<'_, F>,
) -> Result<F, LossError> {
    check_same_shape("justification logits", logits_d, logits_c)?;
    if logits_d.dim().1 != 2 {
        return Err(LossError::ShapeMismatch(format!(
            "justification logits need 2 classes, got {}",
            logits_d.dim().1
        )));
    }
    let k = logits_d.dim().0;
    let ones = vec![1usize; k];
    let zeros = vec![0usize; k];
    Ok(cross_entropy_mean(logits_d, &ones)? + cross_entropy_mean(logits_c, &zeros)?)
}

/// `loss_justification` plus gradients w.r.t. both logit arrays.
pub fn loss_justification_grad<F: Scalar>(
    logits_d: &ArrayView2<'_, F>,
    logits_c: &ArrayView2<'_, F>,
) -> Result<(F, Array2<F>, Array2<F>), LossError> {
    let value = loss_justification(logits_d, logits_c)?;
    let k = logits_d.dim().0;
    let ones = vec![1usize; k];
    let zeros = vec![0usize; k];
    Ok((
        value,
        cross_entropy_grad(logits_d, &ones),
        cross_entropy_grad(logits_c, &zeros),
    ))
}

/// Discontinuity localization loss: mean cross-entropy of the break-index
/// logits against the localization classes.
pub fn loss_localization<F: Scalar>(
    logits: &ArrayView2<'_, F>,
    labels: &[usize],
) -> Result<F, LossError> {
    if logits.dim().0 != labels.len() {
        return Err(LossError::ShapeMismatch(format!(
            "{} logit rows vs {} labels",
            logits.dim().0,
            labels.len()
        )));
    }
    cross_entropy_mean(logits, labels)
}

pub fn loss_localization_grad<F: Scalar>(
    logits: &ArrayView2<'_, F>,
    labels: &[usize],
) -> Result<(F, Array2<F>), LossError> {
    let value = loss_localization(logits, labels)?;
    Ok((value, cross_entropy_grad(logits, labels)))
}

/// The two components of the approximation loss, already weighted by
/// omega and (1 - omega). `total = triplet + contrastive`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproximationParts<F> {
    pub total: F,
    pub triplet: F,
    pub contrastive: F,
}

/// Missing-section approximation loss over embeddings `[K, D]`.
///
/// Per sample i with cosine similarities
/// `p+ = sim(d_i, m_i)`, `p- = sim(d_i, c_i)`:
/// triplet term `omega * max(0, gamma - (p+ - p-))`, and contrastive term
/// `-(1-omega) * log(q+ / (q+ + sum_{j!=i} q-_{ij}))` with
/// `q+ = exp(sim(d_i, c_i)/tau)` and
/// `q-_{ij} = exp(sim(d_i, d_j)/tau) + exp(sim(d_i, c_j)/tau)`.
/// At K = 1 the negative set is empty and the contrastive term is exactly 0.
pub fn loss_approximation<F: Scalar>(
    e_d: &ArrayView2<'_, F>,
    e_m: &ArrayView2<'_, F>,
    e_c: &ArrayView2<'_, F>,
    cfg: &LossConfig,
) -> Result<ApproximationParts<F>, LossError> {
    approximation_impl(e_d, e_m, e_c, cfg, None)
}

/// `loss_approximation` plus gradients w.r.t. all three embedding arrays.
pub fn loss_approximation_grad<F: Scalar>(
    e_d: &ArrayView2<'_, F>,
    e_m: &ArrayView2<'_, F>,
    e_c: &ArrayView2<'_, F>,
    cfg: &LossConfig,
) -> Result<(ApproximationParts<F>, Array2<F>, Array2<F>, Array2<F>), LossError> {
    let (k, dim) = e_d.dim();
    let mut grads = (
        Array2::<F>::zeros((k, dim)),
        Array2::<F>::zeros((k, dim)),
        Array2::<F>::zeros((k, dim)),
    );
    let parts = approximation_impl(e_d, e_m, e_c, cfg, Some(&mut grads))?;
    Ok((parts, grads.0, grads.1, grads.2))
}

/// Shared forward/backward. When `grads` is provided, accumulates
/// d(loss)/d(e_d), d(loss)/d(e_m), d(loss)/d(e_c) into it.
fn approximation_impl<F: Scalar>(
    e_d: &ArrayView2<'_, F>,
    e_m: &ArrayView2<'_, F>,
    e_c: &ArrayView2<'_, F>,
    cfg: &LossConfig,
    mut grads: Option<&mut (Array2<F>, Array2<F>, Array2<F>)>,
) -> Result<ApproximationParts<F>, LossError> {
    check_same_shape("e_d vs e_m", e_d, e_m)?;
    check_same_shape("e_d vs e_c", e_d, e_c)?;
    let k = e_d.dim().0;
    if k == 0 {
        return Err(LossError::EmptyBatch);
    }
    let omega = F::from_f64(cfg.omega);
    let gamma = F::from_f64(cfg.gamma);
    let inv_tau = F::from_f64(1.0 / cfg.tau);
    let inv_k = F::from_f64(1.0 / k as f64);
    let one = F::one();

    // cosine similarity plus the pieces its gradient needs
    let sim = |u: ArrayView1<'_, F>, v: ArrayView1<'_, F>| cosine_similarity(u, v);

    let mut triplet_sum = F::zero();
    let mut contrastive_sum = F::zero();

    for i in 0..k {
        let d_i = e_d.row(i);
        let p_pos = sim(d_i, e_m.row(i));
        let p_neg = sim(d_i, e_c.row(i));

        // triplet hinge
        let hinge_arg = gamma - (p_pos - p_neg);
        let hinge_active = hinge_arg > F::zero();
        if hinge_active {
            triplet_sum = triplet_sum + hinge_arg;
        }

        // contrastive: entries are sim/tau, entry 0 is the positive pair
        let mut scaled = Vec::with_capacity(2 * k - 1);
        scaled.push(p_neg * inv_tau);
        for j in 0..k {
            if j == i {
                continue;
            }
            scaled.push(sim(d_i, e_d.row(j)) * inv_tau);
            scaled.push(sim(d_i, e_c.row(j)) * inv_tau);
        }
        let (lse, probs) = log_sum_exp_softmax(&scaled);
        // -log(q+/D) = logD - s(d_i,c_i)/tau
        contrastive_sum = contrastive_sum + lse - scaled[0];

        if let Some(grads) = grads.as_deref_mut() {
            let (g_d, g_m, g_c) = grads;
            let w_triplet = if hinge_active { omega * inv_k } else { F::zero() };
            let w_contrastive = (one - omega) * inv_k;

            // d/d s(d_i, m_i): triplet only
            if hinge_active {
                add_cosine_grad(d_i, e_m.row(i), -w_triplet, &mut g_d.row_mut(i), &mut g_m.row_mut(i));
            }
            // d/d s(d_i, c_i): triplet pushes up, contrastive pulls toward positive
            let coeff_pos = w_triplet + w_contrastive * inv_tau * (probs[0] - one);
            add_cosine_grad(d_i, e_c.row(i), coeff_pos, &mut g_d.row_mut(i), &mut g_c.row_mut(i));
            // negatives
            let mut idx = 1usize;
            for j in 0..k {
                if j == i {
                    continue;
                }
                let coeff_dd = w_contrastive * inv_tau * probs[idx];
                let coeff_dc = w_contrastive * inv_tau * probs[idx + 1];
                idx += 2;
                let (gi, gj) = row_pair_mut(g_d, i, j);
                add_cosine_grad_split(d_i, e_d.row(j), coeff_dd, gi, gj);
                add_cosine_grad(d_i, e_c.row(j), coeff_dc, &mut g_d.row_mut(i), &mut g_c.row_mut(j));
            }
        }
    }

    let triplet = omega * triplet_sum * inv_k;
    let contrastive = (one - omega) * contrastive_sum * inv_k;
    Ok(ApproximationParts {
        total: triplet + contrastive,
        triplet,
        contrastive,
    })
}

/// Accumulate `coeff * d sim(u, v) / d {u, v}` into the two gradient rows.
fn add_cosine_grad<F: Scalar>(
    u: ArrayView1<'_, F>,
    v: ArrayView1<'_, F>,
    coeff: F,
    grad_u: &mut ndarray::ArrayViewMut1<'_, F>,
    grad_v: &mut ndarray::ArrayViewMut1<'_, F>,
) {
    if coeff == F::zero() {
        return;
    }
    let eps = F::from_f64(COSINE_EPS);
    let nu = u.dot(&u).sqrt().max(eps);
    let nv = v.dot(&v).sqrt().max(eps);
    let dot = u.dot(&v);
    let s = dot / (nu * nv);
    let inv_uv = F::one() / (nu * nv);
    let su = s / (nu * nu);
    let sv = s / (nv * nv);
    for idx in 0..u.len() {
        grad_u[idx] = grad_u[idx] + coeff * (v[idx] * inv_uv - u[idx] * su);
        grad_v[idx] = grad_v[idx] + coeff * (u[idx] * inv_uv - v[idx] * sv);
    }
}

fn add_cosine_grad_split<F: Scalar>(
    u: ArrayView1<'_, F>,
    v: ArrayView1<'_, F>,
    coeff: F,
    mut grad_u: ndarray::ArrayViewMut1<'_, F>,
    mut grad_v: ndarray::ArrayViewMut1<'_, F>,
) {
    add_cosine_grad(u, v, coeff, &mut grad_u, &mut grad_v);
}

/// Two distinct mutable rows of one matrix.
fn row_pair_mut<F>(
    m: &mut Array2<F>,
    i: usize,
    j: usize,
) -> (ndarray::ArrayViewMut1<'_, F>, ndarray::ArrayViewMut1<'_, F>) {
    assert_ne!(i, j);
    let (a, b) = m.view_mut().split_at(Axis(0), i.max(j));
    if i < j {
        (a.into_inner_of_row(i), b.into_inner_of_row(0))
    } else {
        (b.into_inner_of_row(0), a.into_inner_of_row(j))
    }
}

trait RowTake<'a, F> {
    fn into_inner_of_row(self, r: usize) -> ndarray::ArrayViewMut1<'a, F>;
}

impl<'a, F> RowTake<'a, F> for ndarray::ArrayViewMut2<'a, F> {
    fn into_inner_of_row(self, r: usize) -> ndarray::ArrayViewMut1<'a, F> {
        self.index_axis_move(Axis(0), r)
    }
}

/// Everything `joint_loss` consumes, as views.
pub struct JointInputs<'a, F> {
    pub logits_just_c: ArrayView2<'a, F>,
    pub logits_just_d: ArrayView2<'a, F>,
    pub logits_loc_d: ArrayView2<'a, F>,
    pub labels: &'a [usize],
    pub embed_c: ArrayView2<'a, F>,
    pub embed_d: ArrayView2<'a, F>,
    pub embed_m: ArrayView2<'a, F>,
}

/// Gradients of the joint loss w.r.t. every head output, in the same order
/// as `JointInputs`. Masked tasks contribute exact zeros.
pub struct JointGrads<F> {
    pub logits_just_c: Array2<F>,
    pub logits_just_d: Array2<F>,
    pub logits_loc_d: Array2<F>,
    pub embed_c: Array2<F>,
    pub embed_d: Array2<F>,
    pub embed_m: Array2<F>,
}

/// Weighted joint objective `w1 * L_J + w2 * L_L + w3 * L_E`.
pub fn joint_loss<F: Scalar>(
    inputs: &JointInputs<'_, F>,
    cfg: &LossConfig,
) -> Result<LossBreakdown, LossError> {
    joint_loss_masked(inputs, cfg, TaskMask::all())
}

/// Joint objective restricted to the tasks in `mask`. Masked tasks
/// contribute zero loss.
pub fn joint_loss_masked<F: Scalar>(
    inputs: &JointInputs<'_, F>,
    cfg: &LossConfig,
    mask: TaskMask,
) -> Result<LossBreakdown, LossError> {
    let mut b = LossBreakdown::default();
    if mask.justify {
        b.justification =
            loss_justification(&inputs.logits_just_d, &inputs.logits_just_c)?.to_f64();
    }
    if mask.localize {
        b.localization = loss_localization(&inputs.logits_loc_d, inputs.labels)?.to_f64();
    }
    if mask.embed {
        let parts = loss_approximation(&inputs.embed_d, &inputs.embed_m, &inputs.embed_c, cfg)?;
        b.approximation = parts.total.to_f64();
        b.approximation_triplet = parts.triplet.to_f64();
        b.approximation_contrastive = parts.contrastive.to_f64();
    }
    b.total = cfg.w1 * b.justification + cfg.w2 * b.localization + cfg.w3 * b.approximation;
    Ok(b)
}

/// Joint objective with gradients w.r.t. every head output, loss weights
/// and task mask applied.
pub fn joint_loss_grad<F: Scalar>(
    inputs: &JointInputs<'_, F>,
    cfg: &LossConfig,
    mask: TaskMask,
) -> Result<(LossBreakdown, JointGrads<F>), LossError> {
    let mut b = LossBreakdown::default();
    let mut grads = JointGrads {
        logits_just_c: Array2::zeros(inputs.logits_just_c.dim()),
        logits_just_d: Array2::zeros(inputs.logits_just_d.dim()),
        logits_loc_d: Array2::zeros(inputs.logits_loc_d.dim()),
        embed_c: Array2::zeros(inputs.embed_c.dim()),
        embed_d: Array2::zeros(inputs.embed_d.dim()),
        embed_m: Array2::zeros(inputs.embed_m.dim()),
    };
    if mask.justify {
        let (v, g_d, g_c) =
            loss_justification_grad(&inputs.logits_just_d, &inputs.logits_just_c)?;
        b.justification = v.to_f64();
        let w = F::from_f64(cfg.w1);
        grads.logits_just_d = g_d * w;
        grads.logits_just_c = g_c * w;
    }
    if mask.localize {
        let (v, g) = loss_localization_grad(&inputs.logits_loc_d, inputs.labels)?;
        b.localization = v.to_f64();
        grads.logits_loc_d = g * F::from_f64(cfg.w2);
    }
    if mask.embed {
        let (parts, g_d, g_m, g_c) =
            loss_approximation_grad(&inputs.embed_d, &inputs.embed_m, &inputs.embed_c, cfg)?;
        b.approximation = parts.total.to_f64();
        b.approximation_triplet = parts.triplet.to_f64();
        b.approximation_contrastive = parts.contrastive.to_f64();
        let w = F::from_f64(cfg.w3);
        grads.embed_d = g_d * w;
        grads.embed_m = g_m * w;
        grads.embed_c = g_c * w;
    }
    b.total = cfg.w1 * b.justification + cfg.w2 * b.localization + cfg.w3 * b.approximation;
    Ok((b, grads))
}

fn check_same_shape<F: Scalar>(
    what: &str,
    a: &ArrayView2<'_, F>,
    b: &ArrayView2<'_, F>,
) -> Result<(), LossError> {
    if a.dim() != b.dim() {
        return Err(LossError::ShapeMismatch(format!(
            "{what}: {:?} vs {:?}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

/// Random embedding/logit fixtures shared by tests and the verify suite.
pub fn random_matrix<F: Scalar>(
    rng: &mut impl rand::Rng,
    k: usize,
    dim: usize,
    scale: f64,
) -> Array2<F> {
    Array2::from_shape_fn((k, dim), |_| {
        F::from_f64(rng.random_range(-scale..scale))
    })
}

pub fn random_unit_rows<F: Scalar>(rng: &mut impl rand::Rng, k: usize, dim: usize) -> Array2<F> {
    let mut m: Array2<F> = random_matrix(rng, k, dim, 1.0);
    for mut row in m.rows_mut() {
        let n = row.dot(&row).sqrt().max(F::from_f64(1e-9));
        row.mapv_inplace(|v| v / n);
    }
    m
}

#[allow(dead_code)]
fn unused_array1_alias<F: Scalar>(_: Array1<F>) {}
