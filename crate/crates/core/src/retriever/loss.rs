//! Surrogate training losses.
//!
//! Coarse stage: softmax contrastive loss over one positive and a set of
//! random negatives. Raw dot-product scores can be negative, so the
//! score ratio is exponentiated, which recovers the standard contrastive
//! form.
//!
//! Fine stage: hierarchical hinge loss over the observed top-k ordering,
//! hard negatives and the mean of the easy negatives.

use std::collections::HashSet;

use super::{dot, DualEncoder, EncodeCache};
use crate::error::{Error, Result};
use crate::nn::{log_sum_exp, softmax, GradientSet};

/// Gradients for every learnable part of a [`DualEncoder`].
#[derive(Debug, Clone)]
pub struct EncoderGrads {
    /// Dense `|V| x dim` table gradient.
    pub embed: Vec<f64>,
    pub q_proj: GradientSet,
    pub d_proj: GradientSet,
}

impl EncoderGrads {
    pub fn zeros_like(enc: &DualEncoder) -> Self {
        EncoderGrads {
            embed: vec![0.0; enc.vocab().len() * enc.dim()],
            q_proj: GradientSet::zeros_like(enc.query_proj()),
            d_proj: GradientSet::zeros_like(enc.doc_proj()),
        }
    }

    pub fn accumulate(&mut self, other: &EncoderGrads) {
        for (a, b) in self.embed.iter_mut().zip(&other.embed) {
            *a += b;
        }
        self.q_proj.accumulate(&other.q_proj);
        self.d_proj.accumulate(&other.d_proj);
    }

    pub fn scale(&mut self, factor: f64) {
        for a in self.embed.iter_mut() {
            *a *= factor;
        }
        self.q_proj.scale(factor);
        self.d_proj.scale(factor);
    }
}

/// One coarse-stage training sample: a query, one positive document and
/// random negatives.
#[derive(Debug, Clone)]
pub struct CoarseSample {
    pub query_id: String,
    pub query_tokens: Vec<String>,
    pub positive_id: String,
    pub positive_tokens: Vec<String>,
    pub negative_ids: Vec<String>,
    pub negative_tokens: Vec<Vec<String>>,
}

impl CoarseSample {
    pub fn validate(&self) -> Result<()> {
        if self.negative_ids.is_empty() {
            return Err(Error::EmptyInput(
                "coarse sample needs at least one negative",
            ));
        }
        if self.negative_ids.iter().any(|id| *id == self.positive_id) {
            return Err(Error::InvalidArgument(format!(
                "positive {} appears in the negative set",
                self.positive_id
            )));
        }
        Ok(())
    }
}

/// Hinge margins for the fine stage.
#[derive(Debug, Clone)]
pub struct MarginSet {
    /// Within-top-k margins, one per adjacent pair (length k-1).
    pub within: Vec<f64>,
    /// Margin between the k-th ranked document and each hard negative.
    pub hard: f64,
    /// Margin between each hard negative and the easy-negative mean.
    pub easy: f64,
}

impl MarginSet {
    /// Uniform within-top-k margins with extra separation for rank 1.
    pub fn standard(k: usize, within: f64, rank1_extra: f64, hard: f64, easy: f64) -> Self {
        let mut w = vec![within; k.saturating_sub(1)];
        if let Some(first) = w.first_mut() {
            *first += rank1_extra;
        }
        MarginSet {
            within: w,
            hard,
            easy,
        }
    }
}

/// One fine-stage training sample: the observed top-k ordering plus hard
/// and easy negatives.
#[derive(Debug, Clone)]
pub struct FineSample {
    pub query_id: String,
    pub query_tokens: Vec<String>,
    /// Target top-k, best first.
    pub ranked: Vec<(String, Vec<String>)>,
    pub hard: Vec<(String, Vec<String>)>,
    pub easy: Vec<(String, Vec<String>)>,
    pub margins: MarginSet,
}

impl FineSample {
    pub fn validate(&self) -> Result<()> {
        if self.ranked.is_empty() {
            return Err(Error::EmptyInput("fine sample has an empty ranked list"));
        }
        if !self.hard.is_empty() && self.easy.is_empty() {
            return Err(Error::InvalidArgument(
                "fine sample with hard negatives needs at least one easy negative".into(),
            ));
        }
        if self.margins.within.len() != self.ranked.len() - 1 {
            return Err(Error::InvalidArgument(format!(
                "expected {} within-margins, got {}",
                self.ranked.len() - 1,
                self.margins.within.len()
            )));
        }
        let mut seen = HashSet::new();
        for (id, _) in self.ranked.iter().chain(&self.hard).chain(&self.easy) {
            if !seen.insert(id) {
                return Err(Error::InvalidArgument(format!(
                    "document {id} appears in more than one group"
                )));
            }
        }
        Ok(())
    }
}

/// Contrastive loss for one coarse sample, with gradients for the
/// embedding table and both projections.
pub fn coarse_loss(enc: &DualEncoder, sample: &CoarseSample) -> Result<(f64, EncoderGrads)> {
    sample.validate()?;
    let q = enc.encode_cached(&sample.query_tokens, true);
    let pos = enc.encode_cached(&sample.positive_tokens, false);
    let negs: Vec<EncodeCache> = sample
        .negative_tokens
        .iter()
        .map(|t| enc.encode_cached(t, false))
        .collect();

    let mut logits = Vec::with_capacity(1 + negs.len());
    logits.push(dot(&q.out, &pos.out));
    for n in &negs {
        logits.push(dot(&q.out, &n.out));
    }
    if logits.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("coarse relevance scores".into()));
    }
    let loss = log_sum_exp(&logits) - logits[0];
    let probs = softmax(&logits)?;

    // d loss / d s_pos = p0 - 1, d loss / d s_neg_i = p_i.
    let mut grads = EncoderGrads::zeros_like(enc);
    let mut q_out_grad = vec![0.0; q.out.len()];
    let add_doc =
        |doc: &EncodeCache, coeff: f64, grads: &mut EncoderGrads, q_out_grad: &mut [f64]| {
            let out_grad: Vec<f64> = q.out.iter().map(|x| coeff * x).collect();
            let back = enc
                .doc_proj()
                .backward(&doc.cache, &out_grad)
                .expect("fresh cache");
            grads.d_proj.accumulate(&back);
            scatter(&mut grads.embed, enc.dim(), &doc.ids, &back.input_grad);
            for (g, o) in q_out_grad.iter_mut().zip(&doc.out) {
                *g += coeff * o;
            }
        };
    add_doc(&pos, probs[0] - 1.0, &mut grads, &mut q_out_grad);
    for (n, p) in negs.iter().zip(&probs[1..]) {
        add_doc(n, *p, &mut grads, &mut q_out_grad);
    }
    let q_back = enc
        .query_proj()
        .backward(&q.cache, &q_out_grad)
        .expect("fresh cache");
    grads.q_proj.accumulate(&q_back);
    scatter(&mut grads.embed, enc.dim(), &q.ids, &q_back.input_grad);
    Ok((loss, grads))
}

/// Hierarchical margin loss for one fine sample.
///
/// Three hinge families: adjacent top-k pairs, k-th vs each hard
/// negative, and each hard negative vs the easy-negative mean document
/// (the mean is taken over pooled token embeddings before the document
/// projection).
pub fn fine_loss(enc: &DualEncoder, sample: &FineSample) -> Result<(f64, EncoderGrads)> {
    sample.validate()?;
    let q = enc.encode_cached(&sample.query_tokens, true);
    let ranked: Vec<EncodeCache> = sample
        .ranked
        .iter()
        .map(|(_, t)| enc.encode_cached(t, false))
        .collect();
    let hard: Vec<EncodeCache> = sample
        .hard
        .iter()
        .map(|(_, t)| enc.encode_cached(t, false))
        .collect();

    // Easy-negative mean: average the pooled embeddings, then project.
    let easy_pools: Vec<(Vec<usize>, Vec<f64>)> = sample
        .easy
        .iter()
        .map(|(_, t)| {
            let ids = enc.token_ids(t);
            let pooled = enc.pool_ids(&ids);
            (ids, pooled)
        })
        .collect();
    let easy_mean_cache = if easy_pools.is_empty() {
        None
    } else {
        let mut mean = vec![0.0; enc.dim()];
        for (_, pooled) in &easy_pools {
            for (m, p) in mean.iter_mut().zip(pooled) {
                *m += p;
            }
        }
        let inv = 1.0 / easy_pools.len() as f64;
        for m in &mut mean {
            *m *= inv;
        }
        let mut rng = crate::rng::RngStream::new(0);
        let (out, cache) = enc
            .doc_proj()
            .forward(&mean, crate::nn::Mode::Eval, &mut rng)
            .expect("dim matches");
        Some((out, cache))
    };

    let s_ranked: Vec<f64> = ranked.iter().map(|d| dot(&q.out, &d.out)).collect();
    let s_hard: Vec<f64> = hard.iter().map(|d| dot(&q.out, &d.out)).collect();
    let s_easy_mean = easy_mean_cache.as_ref().map(|(out, _)| dot(&q.out, out));
    if s_ranked.iter().chain(s_hard.iter()).any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("fine relevance scores".into()));
    }

    let mut loss = 0.0;
    let mut coeff_ranked = vec![0.0; ranked.len()];
    let mut coeff_hard = vec![0.0; hard.len()];
    let mut coeff_easy_mean = 0.0;

    for i in 0..ranked.len().saturating_sub(1) {
        let slack = sample.margins.within[i] - (s_ranked[i] - s_ranked[i + 1]);
        if slack > 0.0 {
            loss += slack;
            coeff_ranked[i] -= 1.0;
            coeff_ranked[i + 1] += 1.0;
        }
    }
    let last = ranked.len() - 1;
    for (h, &sh) in s_hard.iter().enumerate() {
        let slack = sample.margins.hard - (s_ranked[last] - sh);
        if slack > 0.0 {
            loss += slack;
            coeff_ranked[last] -= 1.0;
            coeff_hard[h] += 1.0;
        }
        if let Some(se) = s_easy_mean {
            let slack = sample.margins.easy - (sh - se);
            if slack > 0.0 {
                loss += slack;
                coeff_hard[h] -= 1.0;
                coeff_easy_mean += 1.0;
            }
        }
    }

    let mut grads = EncoderGrads::zeros_like(enc);
    let mut q_out_grad = vec![0.0; q.out.len()];
    for (doc, &coeff) in ranked
        .iter()
        .zip(&coeff_ranked)
        .chain(hard.iter().zip(&coeff_hard))
    {
        if coeff == 0.0 {
            continue;
        }
        let out_grad: Vec<f64> = q.out.iter().map(|x| coeff * x).collect();
        let back = enc
            .doc_proj()
            .backward(&doc.cache, &out_grad)
            .expect("fresh cache");
        grads.d_proj.accumulate(&back);
        scatter(&mut grads.embed, enc.dim(), &doc.ids, &back.input_grad);
        for (g, o) in q_out_grad.iter_mut().zip(&doc.out) {
            *g += coeff * o;
        }
    }
    if coeff_easy_mean != 0.0 {
        let (out, cache) = easy_mean_cache.as_ref().expect("coeff implies easy docs");
        let out_grad: Vec<f64> = q.out.iter().map(|x| coeff_easy_mean * x).collect();
        let back = enc
            .doc_proj()
            .backward(cache, &out_grad)
            .expect("fresh cache");
        grads.d_proj.accumulate(&back);
        // The mean distributes the input gradient over every easy document.
        let share = 1.0 / easy_pools.len() as f64;
        for (ids, _) in &easy_pools {
            let scaled: Vec<f64> = back.input_grad.iter().map(|g| g * share).collect();
            scatter(&mut grads.embed, enc.dim(), ids, &scaled);
        }
        for (g, o) in q_out_grad.iter_mut().zip(out) {
            *g += coeff_easy_mean * o;
        }
    }
    let q_back = enc
        .query_proj()
        .backward(&q.cache, &q_out_grad)
        .expect("fresh cache");
    grads.q_proj.accumulate(&q_back);
    scatter(&mut grads.embed, enc.dim(), &q.ids, &q_back.input_grad);
    Ok((loss, grads))
}

/// Distribute a pooled-embedding gradient back onto the contributing
/// vocabulary rows (mean pooling divides by the known-token count).
fn scatter(embed_grad: &mut [f64], dim: usize, ids: &[usize], input_grad: &[f64]) {
    if ids.is_empty() {
        return;
    }
    let inv = 1.0 / ids.len() as f64;
    for &id in ids {
        let row = &mut embed_grad[id * dim..(id + 1) * dim];
        for (slot, g) in row.iter_mut().zip(input_grad) {
            *slot += g * inv;
        }
    }
}
