//! Dual-encoder relevance model and exact top-k retrieval.
//!
//! A [`DualEncoder`] owns a vocabulary embedding table and two projection
//! networks, `f_q` and `f_d`. A token sequence is encoded by mean-pooling
//! its embedding rows and passing the result through the respective
//! projection; relevance is the dot product of the two encodings. Tokens
//! outside the vocabulary are skipped (they contribute nothing and are
//! not counted in the pooling denominator).

mod fidelity;
mod loss;
mod train;

pub use fidelity::{surrogate_fidelity, Fidelity};
pub use loss::{coarse_loss, fine_loss, CoarseSample, EncoderGrads, FineSample, MarginSet};
pub use train::{
    build_coarse_samples, build_fine_samples, mine_hard_negatives, train_surrogate, Stage,
    TrainData, TrainHyper, TrainLog,
};

use std::collections::HashMap;
use std::io::{Read, Write};

use crate::corpus::{Document, Query, WordEmbeddings};
use crate::error::{Error, Result};
use crate::nn::{read_dense_net, write_dense_net, DenseNet, ForwardCache};
use crate::rng::RngStream;

/// Immutable token-to-row mapping shared by an encoder's embedding table.
#[derive(Debug, Clone)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    /// Build from any word source; tokens are deduplicated and sorted so
    /// the row order is reproducible.
    pub fn from_words<I: IntoIterator<Item = String>>(words: I) -> Self {
        let mut tokens: Vec<String> = words.into_iter().collect();
        tokens.sort_unstable();
        tokens.dedup();
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocab { tokens, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// Ranked retrieval output: `(doc id, score)` pairs with non-increasing
/// scores and ties broken by ascending doc id.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalResult {
    entries: Vec<(String, f64)>,
}

impl RetrievalResult {
    pub fn entries(&self) -> &[(String, f64)] {
        &self.entries
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(id, _)| id.as_str())
    }

    pub fn contains(&self, id: &str) -> bool {
        self.entries.iter().any(|(d, _)| d == id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Compare `(score, id)` pairs: higher score first, then ascending id.
pub fn rank_order(a: &(String, f64), b: &(String, f64)) -> std::cmp::Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0))
}

/// The dual encoder: vocabulary embeddings plus `f_q` / `f_d` projections.
#[derive(Debug, Clone)]
pub struct DualEncoder {
    vocab: Vocab,
    dim: usize,
    embed: Vec<f64>,
    query_proj: DenseNet,
    doc_proj: DenseNet,
}

/// Forward record for one encoded token sequence, kept for backprop.
pub(crate) struct EncodeCache {
    pub ids: Vec<usize>,
    pub out: Vec<f64>,
    pub cache: ForwardCache,
}

impl DualEncoder {
    /// Embedding/shared-space dimensionality.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn query_proj(&self) -> &DenseNet {
        &self.query_proj
    }

    pub fn doc_proj(&self) -> &DenseNet {
        &self.doc_proj
    }

    /// Surrogate initialization: embedding rows seeded from the synonym
    /// embedding space (tiled up to `dim` and lightly perturbed), random
    /// one-hidden-layer projections. Mirrors starting an imitation model
    /// from pretrained word vectors rather than from scratch.
    pub fn surrogate(
        emb: &WordEmbeddings,
        extra_words: &[String],
        dim: usize,
        hidden: usize,
        rng: &mut RngStream,
    ) -> Result<Self> {
        let vocab = Vocab::from_words(emb.words().cloned().chain(extra_words.iter().cloned()));
        let mut table = vec![0.0; vocab.len() * dim];
        let mut noise_rng = rng.derive("surrogate/embed-noise");
        for (row, token) in vocab.tokens().iter().enumerate() {
            let dst = &mut table[row * dim..(row + 1) * dim];
            if let Some(src) = emb.get(token) {
                let scale = 1.0 / ((dim as f64 / src.len() as f64).sqrt());
                for (i, slot) in dst.iter_mut().enumerate() {
                    *slot = src[i % src.len()] * scale + 0.01 * noise_rng.gaussian();
                }
            } else {
                for slot in dst.iter_mut() {
                    *slot = 0.05 * noise_rng.gaussian();
                }
            }
        }
        // Near-identity projections keep the pretrained word-vector
        // geometry usable from the first epoch; training still reshapes
        // them freely.
        let query_proj =
            DenseNet::near_identity(dim, hidden, 0.02, &mut rng.derive("surrogate/query-proj"))?;
        let doc_proj =
            DenseNet::near_identity(dim, hidden, 0.02, &mut rng.derive("surrogate/doc-proj"))?;
        Ok(DualEncoder {
            vocab,
            dim,
            embed: table,
            query_proj,
            doc_proj,
        })
    }

    /// Target ("black-box") encoder: an independently seeded rotation of
    /// the synonym space with per-word noise and identity projections.
    /// Only its retrieval outputs are ever consumed by the attack.
    pub fn target(
        emb: &WordEmbeddings,
        extra_words: &[String],
        noise: f64,
        rng: &mut RngStream,
    ) -> Result<Self> {
        let dim = emb.dim();
        let vocab = Vocab::from_words(emb.words().cloned().chain(extra_words.iter().cloned()));
        let rotation = random_orthogonal(dim, &mut rng.derive("target/rotation"));
        let mut table = vec![0.0; vocab.len() * dim];
        for (row, token) in vocab.tokens().iter().enumerate() {
            // Per-word stream so the table does not depend on vocab order.
            // Noise is scale-preserving: the perturbed vector keeps the
            // source norm, so quiet words stay quiet.
            let mut wrng = rng.derive(&format!("target/word/{token}"));
            let (mut v, keep_norm): (Vec<f64>, f64) = match emb.get(token) {
                Some(src) => {
                    let norm = src.iter().map(|x| x * x).sum::<f64>().sqrt();
                    (
                        src.iter()
                            .map(|x| x + noise * norm * wrng.gaussian())
                            .collect(),
                        norm,
                    )
                }
                None => ((0..dim).map(|_| wrng.gaussian()).collect(), 1.0),
            };
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                for x in &mut v {
                    *x *= keep_norm / norm;
                }
            }
            let dst = &mut table[row * dim..(row + 1) * dim];
            for (o, slot) in dst.iter_mut().enumerate() {
                *slot = rotation[o * dim..(o + 1) * dim]
                    .iter()
                    .zip(&v)
                    .map(|(r, x)| r * x)
                    .sum();
            }
        }
        Ok(DualEncoder {
            vocab,
            dim,
            embed: table,
            query_proj: DenseNet::identity(dim),
            doc_proj: DenseNet::identity(dim),
        })
    }

    /// Known-token vocabulary ids for a token sequence.
    pub fn token_ids(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().filter_map(|t| self.vocab.id(t)).collect()
    }

    /// Embedding row for a vocabulary id.
    pub fn embedding_row(&self, id: usize) -> &[f64] {
        &self.embed[id * self.dim..(id + 1) * self.dim]
    }

    /// Mean-pooled embedding of the given vocabulary ids.
    pub fn pool_ids(&self, ids: &[usize]) -> Vec<f64> {
        let mut pooled = vec![0.0; self.dim];
        if ids.is_empty() {
            return pooled;
        }
        for &id in ids {
            let row = &self.embed[id * self.dim..(id + 1) * self.dim];
            for (p, x) in pooled.iter_mut().zip(row) {
                *p += x;
            }
        }
        let inv = 1.0 / ids.len() as f64;
        for p in &mut pooled {
            *p *= inv;
        }
        pooled
    }

    pub fn pool_tokens(&self, tokens: &[String]) -> Vec<f64> {
        self.pool_ids(&self.token_ids(tokens))
    }

    pub fn encode_query_tokens(&self, tokens: &[String]) -> Vec<f64> {
        self.query_proj
            .infer(&self.pool_tokens(tokens))
            .expect("projection input dim matches embedding dim")
    }

    pub fn encode_doc_tokens(&self, tokens: &[String]) -> Vec<f64> {
        self.doc_proj
            .infer(&self.pool_tokens(tokens))
            .expect("projection input dim matches embedding dim")
    }

    /// Relevance score `R_s(q, d)`: dot product of the two encodings.
    pub fn relevance(&self, q: &Query, d: &Document) -> f64 {
        self.relevance_tokens(&q.tokens, &d.tokens)
    }

    pub fn relevance_tokens(&self, q_tokens: &[String], d_tokens: &[String]) -> f64 {
        dot(
            &self.encode_query_tokens(q_tokens),
            &self.encode_doc_tokens(d_tokens),
        )
    }

    pub(crate) fn encode_cached(&self, tokens: &[String], proj_is_query: bool) -> EncodeCache {
        let ids = self.token_ids(tokens);
        let pooled = self.pool_ids(&ids);
        let proj = if proj_is_query {
            &self.query_proj
        } else {
            &self.doc_proj
        };
        let mut rng = RngStream::new(0);
        let (out, cache) = proj
            .forward(&pooled, crate::nn::Mode::Eval, &mut rng)
            .expect("projection input dim matches embedding dim");
        EncodeCache { ids, out, cache }
    }

    /// Apply an [`EncoderGrads`] SGD step to the embedding table and both
    /// projections. Non-finite gradients are rejected before any update.
    pub fn apply_grads(&mut self, grads: &EncoderGrads, lr: f64) -> Result<()> {
        if grads.embed.len() != self.embed.len() {
            return Err(Error::DimensionMismatch {
                expected: self.embed.len(),
                got: grads.embed.len(),
                context: "encoder embedding grads",
            });
        }
        if let Some(bad) = grads.embed.iter().find(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!(
                "embedding gradient (value {bad})"
            )));
        }
        // Validate both nets before touching anything so a failure cannot
        // leave the encoder half-updated.
        let mut q = self.query_proj.clone();
        let mut d = self.doc_proj.clone();
        q.optimizer_step(&grads.q_proj, lr)?;
        d.optimizer_step(&grads.d_proj, lr)?;
        for (w, g) in self.embed.iter_mut().zip(&grads.embed) {
            *w -= lr * g;
        }
        self.query_proj = q;
        self.doc_proj = d;
        Ok(())
    }

    // Flat parameter indexing over [embed | query_proj | doc_proj], used
    // by finite-difference checks.

    pub fn num_params(&self) -> usize {
        self.embed.len() + self.query_proj.num_params() + self.doc_proj.num_params()
    }

    pub fn param(&self, idx: usize) -> f64 {
        if idx < self.embed.len() {
            self.embed[idx]
        } else if idx < self.embed.len() + self.query_proj.num_params() {
            self.query_proj.param(idx - self.embed.len())
        } else {
            self.doc_proj
                .param(idx - self.embed.len() - self.query_proj.num_params())
        }
    }

    pub fn set_param(&mut self, idx: usize, value: f64) {
        if idx < self.embed.len() {
            self.embed[idx] = value;
        } else if idx < self.embed.len() + self.query_proj.num_params() {
            self.query_proj.set_param(idx - self.embed.len(), value);
        } else {
            self.doc_proj
                .set_param(idx - self.embed.len() - self.query_proj.num_params(), value);
        }
    }

    pub fn flatten_grads(&self, grads: &EncoderGrads) -> Vec<f64> {
        let mut flat = grads.embed.clone();
        flat.extend(self.query_proj.flatten_grads(&grads.q_proj));
        flat.extend(self.doc_proj.flatten_grads(&grads.d_proj));
        flat
    }

    /// Write the encoder checkpoint: vocab manifest, embedding table and
    /// both projection nets. Round-trips bit-exactly.
    pub fn save<W: Write>(&self, w: &mut W) -> Result<()> {
        let ctx = "writing encoder checkpoint";
        let io = |e| Error::io(ctx, e);
        w.write_all(b"RGENC1\0\0").map_err(io)?;
        w.write_all(&(self.dim as u32).to_le_bytes()).map_err(io)?;
        w.write_all(&(self.vocab.len() as u32).to_le_bytes())
            .map_err(io)?;
        for token in self.vocab.tokens() {
            let bytes = token.as_bytes();
            w.write_all(&(bytes.len() as u32).to_le_bytes())
                .map_err(io)?;
            w.write_all(bytes).map_err(io)?;
        }
        for x in &self.embed {
            w.write_all(&x.to_bits().to_le_bytes()).map_err(io)?;
        }
        write_dense_net(&self.query_proj, w)?;
        write_dense_net(&self.doc_proj, w)?;
        Ok(())
    }

    pub fn load<R: Read>(r: &mut R) -> Result<Self> {
        let ctx = "reading encoder checkpoint";
        let io = |e| Error::io(ctx, e);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != b"RGENC1\0\0" {
            return Err(Error::Checkpoint(
                "bad magic (not an encoder checkpoint)".into(),
            ));
        }
        let mut u32buf = [0u8; 4];
        r.read_exact(&mut u32buf).map_err(io)?;
        let dim = u32::from_le_bytes(u32buf) as usize;
        r.read_exact(&mut u32buf).map_err(io)?;
        let vocab_len = u32::from_le_bytes(u32buf) as usize;
        let mut tokens = Vec::with_capacity(vocab_len);
        for _ in 0..vocab_len {
            r.read_exact(&mut u32buf).map_err(io)?;
            let len = u32::from_le_bytes(u32buf) as usize;
            let mut buf = vec![0u8; len];
            r.read_exact(&mut buf).map_err(io)?;
            tokens.push(String::from_utf8(buf).map_err(|e| Error::Checkpoint(e.to_string()))?);
        }
        let mut embed = vec![0.0; vocab_len * dim];
        let mut u64buf = [0u8; 8];
        for slot in &mut embed {
            r.read_exact(&mut u64buf).map_err(io)?;
            *slot = f64::from_bits(u64::from_le_bytes(u64buf));
        }
        let query_proj = read_dense_net(r)?;
        let doc_proj = read_dense_net(r)?;
        if query_proj.output_dim() != dim || doc_proj.output_dim() != dim {
            return Err(Error::Checkpoint(
                "projection output dim does not match".into(),
            ));
        }
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Ok(DualEncoder {
            vocab: Vocab { tokens, index },
            dim,
            embed,
            query_proj,
            doc_proj,
        })
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Precomputed document encodings for one encoder over one corpus.
#[derive(Debug, Clone)]
pub struct CorpusIndex {
    ids: Vec<String>,
    encoded: Vec<Vec<f64>>,
}

impl CorpusIndex {
    pub fn build(enc: &DualEncoder, corpus: &[Document]) -> Self {
        CorpusIndex {
            ids: corpus.iter().map(|d| d.id.clone()).collect(),
            encoded: corpus
                .iter()
                .map(|d| enc.encode_doc_tokens(&d.tokens))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Replace one document's encoding (used when the attack iterates a
    /// target document in place).
    pub fn update_doc(&mut self, enc: &DualEncoder, id: &str, tokens: &[String]) {
        if let Some(i) = self.ids.iter().position(|x| x == id) {
            self.encoded[i] = enc.encode_doc_tokens(tokens);
        }
    }

    pub fn scores(&self, q_encoding: &[f64]) -> Vec<(String, f64)> {
        self.ids
            .iter()
            .zip(&self.encoded)
            .map(|(id, d)| (id.clone(), dot(q_encoding, d)))
            .collect()
    }
}

/// Exact top-k retrieval with deterministic tie-breaks.
pub fn top_k(
    enc: &DualEncoder,
    q: &Query,
    corpus: &[Document],
    k: usize,
) -> Result<RetrievalResult> {
    let q_enc = enc.encode_query_tokens(&q.tokens);
    let scored: Vec<(String, f64)> = corpus
        .iter()
        .map(|d| (d.id.clone(), dot(&q_enc, &enc.encode_doc_tokens(&d.tokens))))
        .collect();
    top_k_scored(scored, k, corpus.len())
}

/// Exact top-k against a prebuilt [`CorpusIndex`].
pub fn top_k_cached(q_encoding: &[f64], index: &CorpusIndex, k: usize) -> Result<RetrievalResult> {
    top_k_scored(index.scores(q_encoding), k, index.len())
}

fn top_k_scored(mut scored: Vec<(String, f64)>, k: usize, n: usize) -> Result<RetrievalResult> {
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "k = {k} out of range for corpus of {n} documents"
        )));
    }
    scored.sort_by(rank_order);
    scored.truncate(k);
    Ok(RetrievalResult { entries: scored })
}

fn random_orthogonal(dim: usize, rng: &mut RngStream) -> Vec<f64> {
    // Gram-Schmidt on a random Gaussian matrix, rows as basis vectors.
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(dim);
    while rows.len() < dim {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.gaussian()).collect();
        for prev in &rows {
            let proj = dot(&v, prev);
            for (x, p) in v.iter_mut().zip(prev) {
                *x -= proj * p;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            for x in &mut v {
                *x /= norm;
            }
            rows.push(v);
        }
    }
    let mut flat = Vec::with_capacity(dim * dim);
    for row in rows {
        flat.extend(row);
    }
    flat
}
