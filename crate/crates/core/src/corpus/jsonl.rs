//! Benchmark file formats.
//!
//! A benchmark directory holds:
//!
//! * `corpus.jsonl`     — one `{"id", "text"}` object per line,
//! * `queries.jsonl`    — one `{"id", "text", "gold_answer",
//!   "desired_answer", "scenario", "target_doc_id"}` object per line,
//! * `synonyms.tsv`     — head word, then tab-separated `word:similarity`
//!   neighbor fields, sorted by descending similarity,
//! * `embeddings.tsv`   — word, then one tab-separated field per vector
//!   component,
//! * `manifest.json`    — seed, scenario and generation parameters.
//!
//! All files are UTF-8. Query keywords are not stored; they are
//! recomputed from corpus idf on load so the files stay minimal.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{
    extract_keywords, Benchmark, Document, Idf, Query, Scenario, SynonymTable, WordEmbeddings,
};
use crate::error::{Error, Result};

pub const BENCH_SCHEMA_VERSION: u32 = 1;

/// Generation parameters pinned alongside the data files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchManifest {
    pub schema_version: u32,
    pub seed: u64,
    pub scenario: Scenario,
    pub n_queries: usize,
    pub corpus_size: usize,
    pub k: usize,
    pub keyword_limit: usize,
    /// Noise scale the target encoder was built with; needed to re-derive
    /// it from the seed and the embedding file.
    pub target_noise: f64,
    pub rng_algorithm: String,
}

#[derive(Serialize, Deserialize)]
struct DocRecord {
    id: String,
    text: String,
}

#[derive(Serialize, Deserialize)]
struct QueryRecord {
    id: String,
    text: String,
    gold_answer: String,
    desired_answer: String,
    scenario: Scenario,
    target_doc_id: String,
}

/// Write `content` to `path` atomically (temp file + rename).
pub fn atomic_write_bytes(path: &Path, content: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name()
            .map(|s| s.to_string_lossy())
            .unwrap_or_default()
    ));
    {
        let mut f = fs::File::create(&tmp)
            .map_err(|e| Error::io(format!("creating {}", tmp.display()), e))?;
        f.write_all(content)
            .map_err(|e| Error::io(format!("writing {}", tmp.display()), e))?;
    }
    fs::rename(&tmp, path).map_err(|e| {
        Error::io(
            format!("renaming {} to {}", tmp.display(), path.display()),
            e,
        )
    })
}

pub fn save_benchmark(
    dir: &Path,
    bench: &Benchmark,
    synonyms: &SynonymTable,
    embeddings: &WordEmbeddings,
    manifest: &BenchManifest,
) -> Result<()> {
    bench.validate()?;

    let mut corpus = String::new();
    for d in &bench.corpus {
        let rec = DocRecord {
            id: d.id.clone(),
            text: d.text.clone(),
        };
        corpus.push_str(&serde_json::to_string(&rec).map_err(|e| Error::json("corpus.jsonl", e))?);
        corpus.push('\n');
    }
    atomic_write_bytes(&dir.join("corpus.jsonl"), corpus.as_bytes())?;

    let mut queries = String::new();
    for q in &bench.queries {
        let rec = QueryRecord {
            id: q.id.clone(),
            text: q.text.clone(),
            gold_answer: q.gold_answer.clone(),
            desired_answer: q.desired_answer.clone(),
            scenario: q.scenario,
            target_doc_id: bench.target_doc_ids[&q.id].clone(),
        };
        queries
            .push_str(&serde_json::to_string(&rec).map_err(|e| Error::json("queries.jsonl", e))?);
        queries.push('\n');
    }
    atomic_write_bytes(&dir.join("queries.jsonl"), queries.as_bytes())?;

    let mut syn = String::new();
    for head in synonyms.heads() {
        syn.push_str(head);
        for (w, s) in synonyms.neighbors(head) {
            syn.push('\t');
            syn.push_str(w);
            syn.push(':');
            syn.push_str(&s.to_string());
        }
        syn.push('\n');
    }
    atomic_write_bytes(&dir.join("synonyms.tsv"), syn.as_bytes())?;

    let mut emb = String::new();
    for w in embeddings.words() {
        emb.push_str(w);
        for x in embeddings.get(w).expect("listed word") {
            emb.push('\t');
            emb.push_str(&x.to_string());
        }
        emb.push('\n');
    }
    atomic_write_bytes(&dir.join("embeddings.tsv"), emb.as_bytes())?;

    let manifest_json =
        serde_json::to_string_pretty(manifest).map_err(|e| Error::json("manifest.json", e))?;
    atomic_write_bytes(&dir.join("manifest.json"), manifest_json.as_bytes())?;
    Ok(())
}

pub fn load_benchmark(
    dir: &Path,
) -> Result<(Benchmark, SynonymTable, WordEmbeddings, BenchManifest)> {
    let manifest_path = dir.join("manifest.json");
    let manifest_raw = fs::read_to_string(&manifest_path)
        .map_err(|e| Error::io(format!("reading {}", manifest_path.display()), e))?;
    let manifest: BenchManifest = serde_json::from_str(&manifest_raw)
        .map_err(|e| Error::json(manifest_path.display().to_string(), e))?;
    if manifest.schema_version != BENCH_SCHEMA_VERSION {
        return Err(Error::SchemaVersion {
            path: manifest_path,
            expected: BENCH_SCHEMA_VERSION,
            got: manifest.schema_version,
        });
    }

    let corpus_path = dir.join("corpus.jsonl");
    let mut corpus: Vec<Document> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (lineno, line) in read_lines(&corpus_path)?.into_iter().enumerate() {
        let rec: DocRecord = serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
            path: corpus_path.clone(),
            line: lineno + 1,
            reason: e.to_string(),
        })?;
        if !seen.insert(rec.id.clone()) {
            return Err(Error::DuplicateId {
                path: corpus_path.clone(),
                id: rec.id,
            });
        }
        corpus.push(Document::new(rec.id, rec.text));
    }

    let idf = Idf::from_documents(&corpus);
    let queries_path = dir.join("queries.jsonl");
    let mut queries = Vec::new();
    let mut target_doc_ids = std::collections::BTreeMap::new();
    let mut seen_q = std::collections::HashSet::new();
    for (lineno, line) in read_lines(&queries_path)?.into_iter().enumerate() {
        let rec: QueryRecord = serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
            path: queries_path.clone(),
            line: lineno + 1,
            reason: e.to_string(),
        })?;
        if !seen_q.insert(rec.id.clone()) {
            return Err(Error::DuplicateId {
                path: queries_path.clone(),
                id: rec.id,
            });
        }
        let tokens = crate::corpus::tokenize(&rec.text);
        let keywords = extract_keywords(&tokens, &idf, manifest.keyword_limit);
        target_doc_ids.insert(rec.id.clone(), rec.target_doc_id);
        queries.push(Query {
            id: rec.id,
            text: rec.text,
            tokens,
            keywords,
            gold_answer: rec.gold_answer,
            desired_answer: rec.desired_answer,
            scenario: rec.scenario,
        });
    }

    let bench = Benchmark {
        scenario: manifest.scenario,
        corpus,
        queries,
        target_doc_ids,
    };
    bench.validate()?;

    let synonyms = load_synonyms(&dir.join("synonyms.tsv"))?;
    synonyms.validate()?;
    let embeddings = load_embeddings(&dir.join("embeddings.tsv"))?;
    Ok((bench, synonyms, embeddings, manifest))
}

fn read_lines(path: &PathBuf) -> Result<Vec<String>> {
    let f =
        fs::File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    BufReader::new(f)
        .lines()
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))
        .map(|lines| lines.into_iter().filter(|l| !l.trim().is_empty()).collect())
}

pub fn load_synonyms(path: &Path) -> Result<SynonymTable> {
    let mut table = SynonymTable::default();
    for (lineno, line) in read_lines(&path.to_path_buf())?.into_iter().enumerate() {
        let mut fields = line.split('\t');
        let head = fields.next().unwrap_or_default().to_string();
        if head.is_empty() {
            return Err(Error::MalformedLine {
                path: path.to_path_buf(),
                line: lineno + 1,
                reason: "empty head word".into(),
            });
        }
        let mut neighbors = Vec::new();
        for field in fields {
            let (w, s) = field.rsplit_once(':').ok_or_else(|| Error::MalformedLine {
                path: path.to_path_buf(),
                line: lineno + 1,
                reason: format!("neighbor field {field:?} is not word:similarity"),
            })?;
            let sim: f64 = s.parse().map_err(|_| Error::MalformedLine {
                path: path.to_path_buf(),
                line: lineno + 1,
                reason: format!("bad similarity {s:?}"),
            })?;
            neighbors.push((w.to_string(), sim));
        }
        table.insert(head, neighbors);
    }
    Ok(table)
}

pub fn load_embeddings(path: &Path) -> Result<WordEmbeddings> {
    let lines = read_lines(&path.to_path_buf())?;
    let mut emb: Option<WordEmbeddings> = None;
    for (lineno, line) in lines.into_iter().enumerate() {
        let mut fields = line.split('\t');
        let word = fields.next().unwrap_or_default().to_string();
        let vec: Vec<f64> = fields
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::MalformedLine {
                path: path.to_path_buf(),
                line: lineno + 1,
                reason: e.to_string(),
            })?;
        let store = emb.get_or_insert_with(|| WordEmbeddings::new(vec.len()));
        store.insert(word, vec)?;
    }
    Ok(emb.unwrap_or_else(|| WordEmbeddings::new(0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_benchmark, BenchSpec};
    use crate::rng::RngStream;

    fn tmpdir(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("regent-jsonl-{tag}-{}", std::process::id()));
        let _ = fs::remove_dir_all(&dir);
        fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn save_load_round_trip() {
        let spec = BenchSpec {
            n_queries: 2,
            corpus_size: 30,
            ..BenchSpec::default()
        };
        let done = generate_benchmark(&spec, Scenario::Factual, &mut RngStream::new(5)).unwrap();
        let dir = tmpdir("roundtrip");
        let manifest = BenchManifest {
            schema_version: BENCH_SCHEMA_VERSION,
            seed: 5,
            scenario: Scenario::Factual,
            n_queries: 2,
            corpus_size: 30,
            k: spec.k,
            keyword_limit: spec.keyword_limit,
            target_noise: spec.target_noise,
            rng_algorithm: crate::rng::RNG_ALGORITHM.into(),
        };
        save_benchmark(
            &dir,
            &done.benchmark,
            &done.synonyms,
            &done.embeddings,
            &manifest,
        )
        .unwrap();
        let (bench, syn, emb, m) = load_benchmark(&dir).unwrap();
        assert_eq!(bench.corpus.len(), done.benchmark.corpus.len());
        assert_eq!(bench.queries.len(), done.benchmark.queries.len());
        for (a, b) in bench.corpus.iter().zip(&done.benchmark.corpus) {
            assert_eq!(a, b);
        }
        for (a, b) in bench.queries.iter().zip(&done.benchmark.queries) {
            assert_eq!(a, b);
        }
        assert_eq!(bench.target_doc_ids, done.benchmark.target_doc_ids);
        for head in done.synonyms.heads() {
            assert_eq!(
                syn.neighbors(head).len(),
                done.synonyms.neighbors(head).len()
            );
        }
        assert_eq!(emb.len(), done.embeddings.len());
        assert_eq!(m.seed, 5);
        let _ = fs::remove_dir_all(&dir);
    }

    #[test]
    fn duplicate_document_id_is_rejected() {
        let dir = tmpdir("dup");
        fs::write(
            dir.join("manifest.json"),
            serde_json::to_string(&BenchManifest {
                schema_version: BENCH_SCHEMA_VERSION,
                seed: 0,
                scenario: Scenario::Factual,
                n_queries: 0,
                corpus_size: 2,
                k: 3,
                keyword_limit: 8,
                target_noise: 0.35,
                rng_algorithm: crate::rng::RNG_ALGORITHM.into(),
            })
            .unwrap(),
        )
        .unwrap();
        fs::write(
            dir.join("corpus.jsonl"),
            "{\"id\":\"d1\",\"text\":\"a b\"}\n{\"id\":\"d1\",\"text\":\"c d\"}\n",
        )
        .unwrap();
        fs::write(dir.join("queries.jsonl"), "").unwrap();
        fs::write(dir.join("synonyms.tsv"), "").unwrap();
        fs::write(dir.join("embeddings.tsv"), "").unwrap();
        assert!(matches!(
            load_benchmark(&dir),
            Err(Error::DuplicateId { .. })
        ));
        let _ = fs::remove_dir_all(&dir);
    }

    #[test]
    fn ten_thousand_line_corpus_loads_in_under_a_second() {
        let dir = tmpdir("bulk");
        let mut corpus = String::new();
        for i in 0..10_000 {
            corpus.push_str(&format!(
                "{{\"id\":\"d{i:05}\",\"text\":\"token{} filler words for document {i}\"}}\n",
                i % 97
            ));
        }
        fs::write(dir.join("corpus.jsonl"), &corpus).unwrap();
        fs::write(dir.join("queries.jsonl"), "").unwrap();
        fs::write(dir.join("synonyms.tsv"), "").unwrap();
        fs::write(dir.join("embeddings.tsv"), "").unwrap();
        fs::write(
            dir.join("manifest.json"),
            serde_json::to_string(&BenchManifest {
                schema_version: BENCH_SCHEMA_VERSION,
                seed: 0,
                scenario: Scenario::Factual,
                n_queries: 0,
                corpus_size: 10_000,
                k: 3,
                keyword_limit: 8,
                target_noise: 0.35,
                rng_algorithm: crate::rng::RNG_ALGORITHM.into(),
            })
            .unwrap(),
        )
        .unwrap();
        let started = std::time::Instant::now();
        let (bench, _, _, _) = load_benchmark(&dir).unwrap();
        let elapsed = started.elapsed();
        assert_eq!(bench.corpus.len(), 10_000);
        assert!(elapsed.as_secs_f64() < 1.0, "load took {elapsed:?}");
        let _ = fs::remove_dir_all(&dir);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tmpdir("malformed");
        fs::write(
            dir.join("manifest.json"),
            serde_json::to_string(&BenchManifest {
                schema_version: BENCH_SCHEMA_VERSION,
                seed: 0,
                scenario: Scenario::Factual,
                n_queries: 0,
                corpus_size: 1,
                k: 3,
                keyword_limit: 8,
                target_noise: 0.35,
                rng_algorithm: crate::rng::RNG_ALGORITHM.into(),
            })
            .unwrap(),
        )
        .unwrap();
        fs::write(
            dir.join("corpus.jsonl"),
            "{\"id\":\"d1\",\"text\":\"a\"}\nnot json\n",
        )
        .unwrap();
        match load_benchmark(&dir) {
            Err(Error::MalformedLine { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected malformed-line error, got {other:?}"),
        }
        let _ = fs::remove_dir_all(&dir);
    }
}
