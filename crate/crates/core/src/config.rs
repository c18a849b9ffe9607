//! Run configuration: one TOML file covering benchmark generation,
//! surrogate training, attacks and evaluation. Unknown keys are
//! rejected so typos fail loudly, and the effective config is embedded
//! in every artifact for provenance.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attack::{AttackParams, PositionParams, PpoParams, RewardParams};
use crate::corpus::{BenchSpec, Scenario};
use crate::error::{Error, Result};
use crate::evalbench::SuiteConfig;
use crate::ragenv::{ExternalConfig, GeneratorConfig, GeneratorMode};
use crate::retriever::{MarginSet, TrainHyper};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub scenario: Scenario,
    pub k: usize,
    pub jobs: usize,
    pub paths: PathsConfig,
    pub bench: BenchConfig,
    pub encoder: EncoderConfig,
    pub train: TrainConfig,
    pub attack: AttackConfig,
    pub generator: GeneratorSection,
    pub suite: SuiteSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            scenario: Scenario::Factual,
            k: 3,
            jobs: 1,
            paths: PathsConfig::default(),
            bench: BenchConfig::default(),
            encoder: EncoderConfig::default(),
            train: TrainConfig::default(),
            attack: AttackConfig::default(),
            generator: GeneratorSection::default(),
            suite: SuiteSection::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    pub bench_dir: PathBuf,
    pub checkpoint_dir: PathBuf,
    pub report_dir: PathBuf,
    pub log_dir: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            bench_dir: "bench".into(),
            checkpoint_dir: "checkpoints".into(),
            report_dir: "reports".into(),
            log_dir: "logs".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub n_queries: usize,
    pub corpus_size: usize,
    pub family_size: usize,
    pub keyword_limit: usize,
    pub target_noise: f64,
    pub synonym_floor: f64,
    pub max_plant_retries: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        let spec = BenchSpec::default();
        BenchConfig {
            n_queries: spec.n_queries,
            corpus_size: spec.corpus_size,
            family_size: spec.family_size,
            keyword_limit: spec.keyword_limit,
            target_noise: spec.target_noise,
            synonym_floor: spec.synonym_floor,
            max_plant_retries: spec.max_plant_retries,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncoderConfig {
    pub dim: usize,
    pub hidden: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            dim: 32,
            hidden: 64,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub coarse_epochs: usize,
    pub coarse_lr: f64,
    pub fine_epochs: usize,
    pub fine_lr: f64,
    /// Random negatives per coarse sample.
    pub negatives: usize,
    /// Surrogate top-k size mined for hard negatives.
    pub hard_k: usize,
    /// Random easy negatives per fine sample.
    pub easy_negatives: usize,
    /// Fine-stage query budget.
    pub fine_samples: usize,
    pub margin_within: f64,
    pub margin_rank1_extra: f64,
    pub margin_hard: f64,
    pub margin_easy: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            coarse_epochs: 60,
            coarse_lr: 0.05,
            fine_epochs: 60,
            fine_lr: 0.005,
            negatives: 8,
            hard_k: 20,
            easy_negatives: 8,
            fine_samples: 20,
            margin_within: 0.05,
            margin_rank1_extra: 0.05,
            margin_hard: 0.2,
            margin_easy: 0.5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackConfig {
    pub budget: usize,
    pub update_interval: usize,
    pub m: usize,
    pub beta: f64,
    pub min_gain: f64,
    pub candidate_sim_floor: f64,
    pub max_sub_fraction: f64,
    pub alpha: [f64; 3],
    pub lambda_p: [f64; 3],
    pub sigma: f64,
    /// Absent means calibrate from the benchmark.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_r: Option<f64>,
    pub tau: f64,
    pub penalty: f64,
    pub neg_penalty: f64,
    pub gamma: f64,
    pub clip: f64,
    pub value_coef: f64,
    pub ppo_epochs: usize,
    pub ppo_lr: f64,
    pub persist_policy: bool,
}

impl Default for AttackConfig {
    fn default() -> Self {
        let p = AttackParams::default();
        AttackConfig {
            budget: p.budget,
            update_interval: p.update_interval,
            m: p.m,
            beta: p.beta,
            min_gain: p.min_gain,
            candidate_sim_floor: p.candidate_sim_floor,
            max_sub_fraction: p.max_sub_fraction,
            alpha: p.position.alpha,
            lambda_p: p.position.lambda,
            sigma: p.position.sigma,
            lambda_r: None,
            tau: p.reward.tau,
            penalty: p.reward.penalty,
            neg_penalty: p.reward.neg_penalty,
            gamma: p.ppo.gamma,
            clip: p.ppo.clip,
            value_coef: p.ppo.value_coef,
            ppo_epochs: p.ppo.epochs,
            ppo_lr: p.ppo.lr,
            persist_policy: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorSection {
    pub mode: GeneratorMode,
    pub defensive: bool,
    pub suppression_factor: f64,
    pub injection_obedience: f64,
    pub span_bonus: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub external: Option<ExternalConfig>,
}

impl Default for GeneratorSection {
    fn default() -> Self {
        GeneratorSection {
            mode: GeneratorMode::Mock,
            defensive: false,
            suppression_factor: 0.0,
            injection_obedience: 4.0,
            span_bonus: 1.0,
            external: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuiteSection {
    pub methods: Vec<String>,
}

impl Default for SuiteSection {
    fn default() -> Self {
        SuiteSection {
            methods: SuiteConfig::default().methods,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading config {}", path.display()), e))?;
        let cfg: RunConfig =
            toml::from_str(&raw).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        self.attack_params()
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if self.bench.corpus_size < 10 * self.k {
            return Err(Error::Config(format!(
                "bench.corpus_size {} is below 10 * k = {}",
                self.bench.corpus_size,
                10 * self.k
            )));
        }
        Ok(())
    }

    pub fn bench_spec(&self) -> BenchSpec {
        BenchSpec {
            n_queries: self.bench.n_queries,
            corpus_size: self.bench.corpus_size,
            k: self.k,
            family_size: self.bench.family_size,
            keyword_limit: self.bench.keyword_limit,
            target_noise: self.bench.target_noise,
            synonym_floor: self.bench.synonym_floor,
            max_plant_retries: self.bench.max_plant_retries,
        }
    }

    pub fn attack_params(&self) -> AttackParams {
        let a = &self.attack;
        AttackParams {
            position: PositionParams {
                alpha: a.alpha,
                lambda: a.lambda_p,
                sigma: a.sigma,
            },
            reward: RewardParams {
                lambda_r: a.lambda_r.unwrap_or(10.0),
                tau: a.tau,
                penalty: a.penalty,
                neg_penalty: a.neg_penalty,
            },
            ppo: PpoParams {
                gamma: a.gamma,
                clip: a.clip,
                value_coef: a.value_coef,
                epochs: a.ppo_epochs,
                lr: a.ppo_lr,
            },
            budget: a.budget,
            update_interval: a.update_interval,
            m: a.m,
            beta: a.beta,
            min_gain: a.min_gain,
            candidate_sim_floor: a.candidate_sim_floor,
            max_sub_fraction: a.max_sub_fraction,
        }
    }

    pub fn generator_config(&self) -> GeneratorConfig {
        GeneratorConfig {
            mode: self.generator.mode,
            k: self.k,
            defensive: self.generator.defensive,
            suppression_factor: self.generator.suppression_factor,
            injection_obedience: self.generator.injection_obedience,
            span_bonus: self.generator.span_bonus,
            external: self.generator.external.clone(),
        }
    }

    pub fn suite_config(&self) -> SuiteConfig {
        SuiteConfig {
            methods: self.suite.methods.clone(),
            attack: self.attack_params(),
            gen_cfg: self.generator_config(),
            k: self.k,
            jobs: self.jobs,
            seed: self.seed,
            persist_policy: self.attack.persist_policy,
            lambda_r: self.attack.lambda_r,
        }
    }

    pub fn train_hyper(&self, stage: crate::retriever::Stage) -> TrainHyper {
        match stage {
            crate::retriever::Stage::Coarse => TrainHyper {
                epochs: self.train.coarse_epochs,
                lr: self.train.coarse_lr,
                shuffle: true,
            },
            crate::retriever::Stage::Fine => TrainHyper {
                epochs: self.train.fine_epochs,
                lr: self.train.fine_lr,
                shuffle: true,
            },
        }
    }

    pub fn margins(&self) -> MarginSet {
        MarginSet::standard(
            self.k,
            self.train.margin_within,
            self.train.margin_rank1_extra,
            self.train.margin_hard,
            self.train.margin_easy,
        )
    }

    /// Effective-config snapshot embedded in artifacts.
    pub fn snapshot(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}
