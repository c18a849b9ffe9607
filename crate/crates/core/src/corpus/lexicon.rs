//! Synthetic vocabulary for benchmark generation.
//!
//! Words are grouped into concept families: one canonical surface form
//! plus a few variants whose embeddings sit at controlled cosine
//! distances from the canonical vector. Variant-to-canonical substitution
//! is what gives the word-substitution attack something to find.

use crate::corpus::{is_stopword, WordEmbeddings, STOPWORDS};
use crate::rng::RngStream;

const SYLLABLES: [&str; 24] = [
    "ba", "bel", "dal", "den", "fa", "gal", "han", "ku", "li", "lor", "mi", "mo", "ne", "os",
    "pra", "ra", "re", "ri", "son", "su", "ta", "tem", "ver", "zen",
];

#[derive(Debug, Clone)]
pub(crate) struct ConceptFamily {
    pub canonical: String,
    /// Ordered near to far from the canonical vector.
    pub variants: Vec<String>,
}

#[derive(Debug, Clone)]
pub(crate) struct Lexicon {
    pub embeddings: WordEmbeddings,
    /// Families used as query concepts (attributes, entities, topics).
    pub concepts: Vec<ConceptFamily>,
    /// Answer words (gold and adversary-desired); no variants.
    pub answers: Vec<String>,
    /// Background families used to pad documents.
    pub fillers: Vec<ConceptFamily>,
}

pub(crate) struct LexiconSpec {
    pub syn_dim: usize,
    pub n_concepts: usize,
    pub n_answers: usize,
    pub n_fillers: usize,
    /// Noise scales for the variant embeddings, near to far. Cosine to the
    /// canonical vector is roughly 1/sqrt(1 + kappa^2).
    pub variant_kappas: Vec<f64>,
}

impl Default for LexiconSpec {
    fn default() -> Self {
        LexiconSpec {
            syn_dim: 16,
            n_concepts: 64,
            n_answers: 64,
            n_fillers: 160,
            variant_kappas: vec![0.30, 0.45, 0.62],
        }
    }
}

impl Lexicon {
    pub fn build(spec: &LexiconSpec, rng: &mut RngStream) -> Lexicon {
        let mut used: std::collections::HashSet<String> = std::collections::HashSet::new();
        let mut emb = WordEmbeddings::new(spec.syn_dim);
        let mut word_rng = rng.derive("lexicon/words");
        let mut vec_rng = rng.derive("lexicon/vectors");

        let mut fresh_word = |rng: &mut RngStream| -> String {
            loop {
                let n = 3 + rng.below(2);
                let mut w = String::new();
                for _ in 0..n {
                    w.push_str(SYLLABLES[rng.below(SYLLABLES.len())]);
                }
                if !is_stopword(&w) && used.insert(w.clone()) {
                    return w;
                }
            }
        };

        let mut family =
            |word_rng: &mut RngStream, vec_rng: &mut RngStream| -> (ConceptFamily, Vec<Vec<f64>>) {
                let canonical = fresh_word(word_rng);
                let base = unit_gaussian(spec.syn_dim, vec_rng);
                let mut variants = Vec::new();
                let mut vecs = vec![base.clone()];
                for &kappa in &spec.variant_kappas {
                    let noise = unit_gaussian(spec.syn_dim, vec_rng);
                    let mut v: Vec<f64> = base
                        .iter()
                        .zip(&noise)
                        .map(|(b, n)| b + kappa * n)
                        .collect();
                    normalize(&mut v);
                    variants.push(fresh_word(word_rng));
                    vecs.push(v);
                }
                (
                    ConceptFamily {
                        canonical,
                        variants,
                    },
                    vecs,
                )
            };

        let mut concepts = Vec::with_capacity(spec.n_concepts);
        for _ in 0..spec.n_concepts {
            let (fam, vecs) = family(&mut word_rng, &mut vec_rng);
            emb.insert(fam.canonical.clone(), vecs[0].clone()).unwrap();
            for (w, v) in fam.variants.iter().zip(&vecs[1..]) {
                emb.insert(w.clone(), v.clone()).unwrap();
            }
            concepts.push(fam);
        }

        let mut fillers = Vec::with_capacity(spec.n_fillers);
        for _ in 0..spec.n_fillers {
            let (fam, vecs) = family(&mut word_rng, &mut vec_rng);
            emb.insert(fam.canonical.clone(), vecs[0].clone()).unwrap();
            for (w, v) in fam.variants.iter().zip(&vecs[1..]) {
                emb.insert(w.clone(), v.clone()).unwrap();
            }
            fillers.push(fam);
        }

        let mut answers = Vec::with_capacity(spec.n_answers);
        for _ in 0..spec.n_answers {
            let w = fresh_word(&mut word_rng);
            emb.insert(w.clone(), unit_gaussian(spec.syn_dim, &mut vec_rng))
                .unwrap();
            answers.push(w);
        }

        // Stopwords live in the same space so pooled document vectors see
        // them, but scaled well below content words so function-word
        // counts do not swamp document scores. Never substitution
        // candidates.
        for sw in STOPWORDS {
            let v: Vec<f64> = unit_gaussian(spec.syn_dim, &mut vec_rng)
                .into_iter()
                .map(|x| x * 0.1)
                .collect();
            emb.insert(sw.to_string(), v).unwrap();
        }

        Lexicon {
            embeddings: emb,
            concepts,
            answers,
            fillers,
        }
    }
}

fn unit_gaussian(dim: usize, rng: &mut RngStream) -> Vec<f64> {
    let mut v: Vec<f64> = (0..dim).map(|_| rng.gaussian()).collect();
    normalize(&mut v);
    v
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn families_have_high_within_cosine() {
        let mut rng = RngStream::new(21);
        let lex = Lexicon::build(&LexiconSpec::default(), &mut rng);
        for fam in lex.concepts.iter().take(10) {
            for v in &fam.variants {
                let cos = lex.embeddings.cosine(&fam.canonical, v).unwrap();
                assert!(cos > 0.7, "{} / {v}: cos {cos}", fam.canonical);
            }
        }
    }

    #[test]
    fn build_is_deterministic() {
        let a = Lexicon::build(&LexiconSpec::default(), &mut RngStream::new(3));
        let b = Lexicon::build(&LexiconSpec::default(), &mut RngStream::new(3));
        assert_eq!(a.concepts.len(), b.concepts.len());
        for (fa, fb) in a.concepts.iter().zip(&b.concepts) {
            assert_eq!(fa.canonical, fb.canonical);
            assert_eq!(fa.variants, fb.variants);
        }
        for w in a.embeddings.words() {
            assert_eq!(a.embeddings.get(w), b.embeddings.get(w));
        }
    }
}
