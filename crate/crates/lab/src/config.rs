//! Resolved configurations for every subcommand.
//!
//! A configuration starts from its defaults, is overlaid with an optional
//! TOML file, then with dedicated command-line flags, then with `--set
//! key=value` pairs. Unknown keys are rejected. The resolved value is what a
//! run manifest records and what `replay` feeds back in.

use anyhow::{bail, Context, Result};
use attncap_core::capacity::{Convention, NormBudget};
use attncap_core::constructions::{EmbeddingVariant, PipelineKind};
use attncap_core::experiments::{GridSpec, ParitySpec, TaskKind, TrialKnobs};
use attncap_core::training::{AdamConfig, Architecture, DropoutRates, ModelConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::path::Path;
use toml::{Table, Value};

/// Builds a resolved config of type `C` from defaults, a file, flags and `--set` pairs.
pub fn resolve<C: Serialize + DeserializeOwned>(
    defaults: &C,
    file: Option<&Path>,
    flags: Table,
    sets: &[String],
) -> Result<C> {
    let mut table = Table::try_from(defaults).context("serializing defaults")?;
    if let Some(path) = file {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let file_table: Table = text.parse().with_context(|| format!("parsing {}", path.display()))?;
        merge(&mut table, file_table);
    }
    merge(&mut table, flags);
    for kv in sets {
        let (k, v) = kv.split_once('=').with_context(|| format!("--set expects key=value, got {kv:?}"))?;
        set_path(&mut table, k.trim(), parse_value(v.trim()))?;
    }
    from_table(table)
}

/// Inserts `value` at a dotted key such as `model.lr`.
fn set_path(table: &mut Table, key: &str, value: Value) -> Result<()> {
    match key.split_once('.') {
        None => {
            table.insert(key.to_string(), value);
            Ok(())
        }
        Some((head, rest)) => match table.entry(head.to_string()).or_insert_with(|| Value::Table(Table::new())) {
            Value::Table(inner) => set_path(inner, rest, value),
            _ => bail!("{head:?} is not a table, cannot set {key:?}"),
        },
    }
}

/// Deserializes a table into `C`, rejecting unknown keys.
pub fn from_table<C: DeserializeOwned>(table: Table) -> Result<C> {
    Ok(Value::Table(table).try_into()?)
}

pub fn to_table<C: Serialize>(c: &C) -> Result<Table> {
    Ok(Table::try_from(c)?)
}

fn merge(into: &mut Table, from: Table) {
    for (k, v) in from {
        match (into.get_mut(&k), v) {
            (Some(Value::Table(a)), Value::Table(b)) => merge(a, b),
            (_, v) => {
                into.insert(k, v);
            }
        }
    }
}

/// A TOML scalar or array when it parses as one, else a bare string.
pub fn parse_value(text: &str) -> Value {
    let probe = format!("v = {text}");
    match probe.parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(text.to_string())),
        Err(_) => Value::String(text.to_string()),
    }
}

/// Flags that were given, as a table.
#[derive(Default)]
pub struct Flags(pub Table);

impl Flags {
    pub fn put<V: Into<Value>>(&mut self, key: &str, v: Option<V>) -> &mut Self {
        if let Some(v) = v {
            self.0.insert(key.to_string(), v.into());
        }
        self
    }

    pub fn put_u(&mut self, key: &str, v: Option<usize>) -> &mut Self {
        self.put(key, v.map(|x| x as i64))
    }

    pub fn put_seed(&mut self, key: &str, v: Option<u64>) -> &mut Self {
        self.put(key, v.map(|x| x as i64))
    }

    pub fn put_list(&mut self, key: &str, v: Option<&[usize]>) -> &mut Self {
        self.put(key, v.map(|xs| Value::Array(xs.iter().map(|&x| Value::Integer(x as i64)).collect())))
    }
}

fn parse_kind(s: &str) -> Result<TaskKind> {
    Ok(TaskKind::parse(s)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelFile {
    pub d: usize,
    pub k: usize,
    pub heads: usize,
    pub architecture: String,
    pub activation: String,
    pub dropout: f64,
    pub init_scale: f64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub weight_decay: f64,
}

impl Default for ModelFile {
    fn default() -> Self {
        let m = ModelConfig::standard(1);
        let a = AdamConfig::default();
        Self {
            d: m.d,
            k: m.k,
            heads: m.heads,
            architecture: m.architecture.name().into(),
            activation: m.activation.name().into(),
            dropout: m.dropout.attention,
            init_scale: m.init_scale,
            lr: a.lr,
            beta1: a.beta1,
            beta2: a.beta2,
            adam_eps: a.eps,
            weight_decay: a.weight_decay,
        }
    }
}

impl ModelFile {
    pub fn model(&self, t: usize) -> Result<ModelConfig> {
        let activation = attncap_core::attention::Activation::parse(&self.activation)
            .with_context(|| format!("unknown activation {:?}", self.activation))?;
        let cfg = ModelConfig {
            t,
            d: self.d,
            k: self.k,
            heads: self.heads,
            architecture: Architecture::parse(&self.architecture)?,
            activation,
            dropout: DropoutRates::uniform(self.dropout),
            init_scale: self.init_scale,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig { lr: self.lr, beta1: self.beta1, beta2: self.beta2, eps: self.adam_eps, weight_decay: self.weight_decay }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScalingConfig {
    pub t_values: Vec<usize>,
    pub m_values: Vec<usize>,
    pub trials: usize,
    pub s: usize,
    pub task: String,
    pub rate_floor: f64,
    pub seed: u64,
    pub restarts: usize,
    pub max_iters: usize,
    pub eval_every: usize,
    pub target_acc: f64,
    pub holdout: usize,
    pub reject_ambiguous: bool,
    pub model: ModelFile,
}

impl ScalingConfig {
    pub fn from_grid(g: &GridSpec) -> Self {
        Self {
            t_values: g.t_values.clone(),
            m_values: g.m_values.clone(),
            trials: g.trials,
            s: g.s,
            task: g.kind.name().into(),
            rate_floor: g.rate_floor,
            seed: g.seed,
            restarts: g.knobs.restarts,
            max_iters: g.knobs.max_iters,
            eval_every: g.knobs.eval_every,
            target_acc: g.knobs.target_acc,
            holdout: g.knobs.holdout,
            reject_ambiguous: g.knobs.reject_ambiguous,
            model: ModelFile::default(),
        }
    }

    pub fn paper_scale() -> Self {
        Self::from_grid(&GridSpec::paper_scale())
    }

    pub fn grid(&self) -> Result<GridSpec> {
        let g = GridSpec {
            t_values: self.t_values.clone(),
            m_values: self.m_values.clone(),
            trials: self.trials,
            s: self.s,
            kind: parse_kind(&self.task)?,
            rate_floor: self.rate_floor,
            seed: self.seed,
            knobs: TrialKnobs {
                restarts: self.restarts,
                max_iters: self.max_iters,
                eval_every: self.eval_every,
                target_acc: self.target_acc,
                holdout: self.holdout,
                reject_ambiguous: self.reject_ambiguous,
                adam: self.model.adam(),
                model: self.model.model(1)?,
            },
        };
        g.validate()?;
        Ok(g)
    }
}

impl Default for ScalingConfig {
    fn default() -> Self {
        Self::from_grid(&GridSpec::desk())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParityConfig {
    pub t: usize,
    pub s: usize,
    pub batch: usize,
    pub budget: usize,
    pub seeds: usize,
    pub seed: u64,
    pub window: usize,
    pub level: f64,
    pub tail: usize,
    pub model: ModelFile,
}

impl Default for ParityConfig {
    fn default() -> Self {
        let p = ParitySpec::new(10, 2);
        Self {
            t: p.t,
            s: p.s,
            batch: p.batch,
            budget: p.budget,
            seeds: p.seeds,
            seed: p.root_seed,
            window: p.window,
            level: p.level,
            tail: p.tail,
            model: ModelFile::default(),
        }
    }
}

impl ParityConfig {
    pub fn spec(&self) -> Result<ParitySpec> {
        let spec = ParitySpec {
            t: self.t,
            s: self.s,
            batch: self.batch,
            budget: self.budget,
            seeds: self.seeds,
            root_seed: self.seed,
            window: self.window,
            level: self.level,
            tail: self.tail,
            adam: self.model.adam(),
            model: self.model.model(self.t)?,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub task: String,
    pub t: usize,
    pub s: usize,
    pub m: usize,
    pub seed: u64,
    pub restarts: usize,
    pub max_iters: usize,
    pub eval_every: usize,
    pub target_acc: f64,
    pub holdout: usize,
    pub reject_ambiguous: bool,
    /// Number of holdout examples whose `[CLS]` attention is dumped (0 disables).
    pub dump_attention: usize,
    pub model: ModelFile,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let k = TrialKnobs::default();
        Self {
            task: "conjunction".into(),
            t: 16,
            s: 3,
            m: 100,
            seed: 0,
            restarts: k.restarts,
            max_iters: k.max_iters,
            eval_every: k.eval_every,
            target_acc: k.target_acc,
            holdout: k.holdout,
            reject_ambiguous: k.reject_ambiguous,
            dump_attention: 0,
            model: ModelFile::default(),
        }
    }
}

impl TrainConfig {
    pub fn kind(&self) -> Result<TaskKind> {
        parse_kind(&self.task)
    }

    pub fn knobs(&self) -> Result<TrialKnobs> {
        Ok(TrialKnobs {
            restarts: self.restarts,
            max_iters: self.max_iters,
            eval_every: self.eval_every,
            target_acc: self.target_acc,
            holdout: self.holdout,
            reject_ambiguous: self.reject_ambiguous,
            adam: self.model.adam(),
            model: self.model.model(self.t)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub task: String,
    pub t: usize,
    pub s: usize,
    pub n: usize,
    pub seed: u64,
    /// Explicit index set; empty draws one from the seed.
    pub index_set: Vec<usize>,
    pub reject_ambiguous: bool,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self { task: "conjunction".into(), t: 16, s: 3, n: 100, seed: 0, index_set: vec![], reject_ambiguous: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstructConfig {
    pub t: usize,
    pub s: usize,
    /// `and`, `parity`, `majority` or `random`.
    pub function: String,
    /// Explicit index set; empty draws one from the seed.
    pub index_set: Vec<usize>,
    pub pipeline: String,
    pub variant: String,
    pub gamma: f64,
    /// Basis overlap; a negative value selects the default.
    pub delta: f64,
    pub seed: u64,
    /// Irrelevant-bit samples per relevant pattern when `T` is too large to enumerate.
    pub samples: usize,
}

impl Default for ConstructConfig {
    fn default() -> Self {
        Self {
            t: 8,
            s: 2,
            function: "and".into(),
            index_set: vec![],
            pipeline: PipelineKind::General.name().into(),
            variant: EmbeddingVariant::DeterministicPos.name().into(),
            gamma: 0.5,
            delta: -1.0,
            seed: 0,
            samples: 64,
        }
    }
}

impl ConstructConfig {
    pub fn pipeline_kind(&self) -> Result<PipelineKind> {
        PipelineKind::parse(&self.pipeline).with_context(|| format!("unknown pipeline {:?}", self.pipeline))
    }

    pub fn embedding_variant(&self) -> Result<EmbeddingVariant> {
        EmbeddingVariant::parse(&self.variant).with_context(|| format!("unknown embedding variant {:?}", self.variant))
    }

    pub fn delta(&self) -> Option<f64> {
        (self.delta >= 0.0).then_some(self.delta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    /// Construction directory written by `construct`.
    pub dir: String,
    pub samples: usize,
    pub seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { dir: String::new(), samples: 64, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShatterConfig {
    pub t_values: Vec<usize>,
    pub threshold: f64,
}

impl Default for ShatterConfig {
    fn default() -> Self {
        Self { t_values: vec![4, 8, 16], threshold: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CapacityConfig {
    pub constants: String,
    pub b_x: f64,
    pub b_v: f64,
    pub b_v21: f64,
    pub b_qk21: f64,
    pub c_2: f64,
    pub c_21: f64,
    pub l_sigma: f64,
    pub b_w: f64,
    pub b_p: f64,
    pub d: usize,
    pub k: usize,
    pub t: usize,
    pub m: usize,
    pub l: usize,
    pub h: usize,
    pub eps: f64,
    pub delta: f64,
    pub a: f64,
    pub loss_l: f64,
    pub loss_b: f64,
    /// Sample sizes `2^k` for the chain sweep, `k` from `sweep_from` to `sweep_to`.
    pub sweep_from: u32,
    pub sweep_to: u32,
}

impl Default for CapacityConfig {
    fn default() -> Self {
        let b = NormBudget::default();
        Self {
            constants: Convention::Unit.name().into(),
            b_x: b.b_x,
            b_v: b.b_v,
            b_v21: b.b_v21,
            b_qk21: b.b_qk21,
            c_2: b.c_2,
            c_21: b.c_21,
            l_sigma: b.l_sigma,
            b_w: b.b_w,
            b_p: b.b_p,
            d: b.d,
            k: b.k,
            t: b.t,
            m: b.m,
            l: b.l,
            h: b.h,
            eps: b.eps,
            delta: b.delta,
            a: b.a,
            loss_l: b.loss_l,
            loss_b: b.loss_b,
            sweep_from: 6,
            sweep_to: 20,
        }
    }
}

impl CapacityConfig {
    pub fn convention(&self) -> Result<Convention> {
        Ok(Convention::parse(&self.constants)?)
    }

    pub fn budget(&self) -> Result<NormBudget> {
        let b = NormBudget {
            b_x: self.b_x,
            b_v: self.b_v,
            b_v21: self.b_v21,
            b_qk21: self.b_qk21,
            c_2: self.c_2,
            c_21: self.c_21,
            l_sigma: self.l_sigma,
            b_w: self.b_w,
            b_p: self.b_p,
            d: self.d,
            k: self.k,
            t: self.t,
            m: self.m,
            l: self.l,
            h: self.h,
            eps: self.eps,
            delta: self.delta,
            a: self.a,
            loss_l: self.loss_l,
            loss_b: self.loss_b,
        };
        b.validate()?;
        if self.sweep_from > self.sweep_to || self.sweep_to > 62 {
            bail!("sweep exponents must satisfy sweep_from <= sweep_to <= 62");
        }
        Ok(b)
    }
}
