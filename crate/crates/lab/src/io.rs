//! On-disk formats: atomic writes, matrix text files, stacks, constructions,
//! training checkpoints and CSV tables.

use anyhow::{bail, Context, Result};
use attncap_core::attention::{Activation, LayerWeights, ScoreWeights, StackParams};
use attncap_core::constructions::{ConstructionReport, NormCertificate, Pipeline};
use attncap_core::training::{ModelConfig, Params};
use attncap_core::Matrix;
use std::fs;
use std::path::{Path, PathBuf};
use toml::{Table, Value};

/// Writes `contents` to a sibling temporary file, then renames it over `path`.
pub fn write_atomic(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming onto {}", path.display()))?;
    Ok(())
}

pub fn write_matrix(path: &Path, m: &Matrix) -> Result<()> {
    write_atomic(path, m.to_text())
}

pub fn read_matrix(path: &Path) -> Result<Matrix> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Matrix::from_text(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn write_vector(path: &Path, v: &[f64]) -> Result<()> {
    write_matrix(path, &Matrix::new(1, v.len(), v.to_vec())?)
}

pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let m = read_matrix(path)?;
    if m.rows() != 1 {
        bail!("{} holds a {}x{} matrix, expected one row", path.display(), m.rows(), m.cols());
    }
    Ok(m.into_vec())
}

pub fn read_toml(path: &Path) -> Result<Table> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.parse().with_context(|| format!("parsing {}", path.display()))
}

pub fn write_toml(path: &Path, t: &Table) -> Result<()> {
    write_atomic(path, toml::to_string(t)?)
}

fn get<'a>(t: &'a Table, key: &str) -> Result<&'a Value> {
    t.get(key).with_context(|| format!("manifest is missing {key:?}"))
}

fn get_usize(t: &Table, key: &str) -> Result<usize> {
    get(t, key)?.as_integer().map(|v| v as usize).with_context(|| format!("{key:?} must be an integer"))
}

fn get_str<'a>(t: &'a Table, key: &str) -> Result<&'a str> {
    get(t, key)?.as_str().with_context(|| format!("{key:?} must be a string"))
}

/// Stack layout: `stack.toml` plus `layer{i}_{w_q,w_k,w_v,w_c}.txt`, `readout.txt`, `cls.txt`.
pub fn save_stack(dir: &Path, stack: &StackParams) -> Result<()> {
    for (i, l) in stack.layers.iter().enumerate() {
        write_matrix(&dir.join(format!("layer{i}_w_q.txt")), &l.w_q)?;
        write_matrix(&dir.join(format!("layer{i}_w_k.txt")), &l.w_k)?;
        write_matrix(&dir.join(format!("layer{i}_w_v.txt")), &l.w_v)?;
        write_matrix(&dir.join(format!("layer{i}_w_c.txt")), &l.w_c)?;
    }
    write_vector(&dir.join("readout.txt"), &stack.readout)?;
    write_vector(&dir.join("cls.txt"), &stack.cls)?;
    let mut t = Table::new();
    t.insert("layers".into(), (stack.layers.len() as i64).into());
    t.insert("d".into(), (stack.dim() as i64).into());
    let shapes: Vec<Value> = stack
        .layers
        .iter()
        .map(|l| Value::Array(vec![(l.w_q.cols() as i64).into(), (l.w_v.cols() as i64).into()]))
        .collect();
    t.insert("layer_k_and_value_width".into(), Value::Array(shapes));
    t.insert("activation".into(), stack.activation.name().into());
    t.insert("residual".into(), stack.residual.into());
    t.insert("cls_row".into(), "last".into());
    write_toml(&dir.join("stack.toml"), &t)
}

pub fn load_stack(dir: &Path) -> Result<StackParams> {
    let t = read_toml(&dir.join("stack.toml"))?;
    let n = get_usize(&t, "layers")?;
    let layers = (0..n)
        .map(|i| {
            Ok(LayerWeights {
                w_q: read_matrix(&dir.join(format!("layer{i}_w_q.txt")))?,
                w_k: read_matrix(&dir.join(format!("layer{i}_w_k.txt")))?,
                w_v: read_matrix(&dir.join(format!("layer{i}_w_v.txt")))?,
                w_c: read_matrix(&dir.join(format!("layer{i}_w_c.txt")))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let activation = Activation::parse(get_str(&t, "activation")?).context("unknown activation in stack.toml")?;
    let mut stack = StackParams::new(
        layers,
        read_vector(&dir.join("readout.txt"))?,
        read_vector(&dir.join("cls.txt"))?,
        activation,
    )?;
    stack.residual = get(&t, "residual")?.as_bool().context("residual must be a boolean")?;
    Ok(stack)
}

/// Writes every weight of a pipeline: `positions.txt`, per-head
/// `head{h}_{w_q,w_k,w_v,w_c}.txt`, and `mlp_{w_1,w_2,w}.txt` when present.
pub fn save_pipeline_weights(dir: &Path, p: &Pipeline) -> Result<()> {
    write_matrix(&dir.join("positions.txt"), &p.heads.embedding.positions)?;
    for (h, head) in p.heads.heads.iter().enumerate() {
        let (w_q, w_k) = head.factors()?;
        write_matrix(&dir.join(format!("head{h}_w_q.txt")), w_q)?;
        write_matrix(&dir.join(format!("head{h}_w_k.txt")), w_k)?;
        write_matrix(&dir.join(format!("head{h}_w_v.txt")), &head.w_v)?;
        write_matrix(&dir.join(format!("head{h}_w_c.txt")), &head.w_c)?;
    }
    if let Some(mlp) = &p.mlp {
        write_matrix(&dir.join("mlp_w_1.txt"), &mlp.w_1)?;
        write_matrix(&dir.join("mlp_w_2.txt"), &mlp.w_2)?;
        write_vector(&dir.join("mlp_w.txt"), &mlp.w)?;
    }
    Ok(())
}

fn same_shape(name: &str, loaded: &Matrix, built: &Matrix) -> Result<()> {
    if loaded.shape() != built.shape() {
        bail!("{name} has shape {:?}, the recipe builds {:?}", loaded.shape(), built.shape());
    }
    Ok(())
}

/// Replaces the weights of `p` (built from the recorded recipe) by the files in `dir`.
pub fn load_pipeline_weights(dir: &Path, p: &mut Pipeline) -> Result<()> {
    let positions = read_matrix(&dir.join("positions.txt"))?;
    same_shape("positions", &positions, &p.heads.embedding.positions)?;
    p.heads.embedding.positions = positions;
    for (h, head) in p.heads.heads.iter_mut().enumerate() {
        let w_q = read_matrix(&dir.join(format!("head{h}_w_q.txt")))?;
        let w_k = read_matrix(&dir.join(format!("head{h}_w_k.txt")))?;
        let w_v = read_matrix(&dir.join(format!("head{h}_w_v.txt")))?;
        let w_c = read_matrix(&dir.join(format!("head{h}_w_c.txt")))?;
        let (bq, bk) = head.factors()?;
        same_shape("W_Q", &w_q, bq)?;
        same_shape("W_K", &w_k, bk)?;
        same_shape("W_V", &w_v, &head.w_v)?;
        same_shape("W_C", &w_c, &head.w_c)?;
        head.score = ScoreWeights::Factored { w_q, w_k };
        head.w_v = w_v;
        head.w_c = w_c;
    }
    if let Some(mlp) = p.mlp.as_mut() {
        let w_1 = read_matrix(&dir.join("mlp_w_1.txt"))?;
        let w_2 = read_matrix(&dir.join("mlp_w_2.txt"))?;
        let w = read_vector(&dir.join("mlp_w.txt"))?;
        same_shape("MLP W_1", &w_1, &mlp.w_1)?;
        same_shape("MLP W_2", &w_2, &mlp.w_2)?;
        if w.len() != mlp.w.len() {
            bail!("MLP readout has {} entries, the recipe builds {}", w.len(), mlp.w.len());
        }
        mlp.w_1 = w_1;
        mlp.w_2 = w_2;
        mlp.w = w;
    }
    p.recertify();
    Ok(())
}

pub fn report_table(r: &ConstructionReport) -> Table {
    let mut t = Table::new();
    t.insert("passed".into(), r.passed().into());
    t.insert("approximation_pass".into(), r.approximation_pass().into());
    t.insert("max_abs_error".into(), r.max_abs_error.into());
    t.insert("tolerance".into(), r.tolerance.into());
    t.insert("inputs_checked".into(), (r.inputs_checked as i64).into());
    if let Some(w) = r.worst_input {
        t.insert("worst_input".into(), (w as i64).into());
    }
    t.insert("certificates_pass".into(), r.certificates.iter().all(|c| c.pass).into());
    t
}

pub fn write_certificates(path: &Path, certs: &[NormCertificate]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["name", "measured", "bound", "pass"])?;
    for c in certs {
        w.write_record([c.name.clone(), format!("{:.17e}", c.measured), format!("{:.17e}", c.bound), c.pass.to_string()])?;
    }
    write_atomic(path, w.into_inner()?)
}

/// Checkpoint layout: `checkpoint.toml` (config and tensor names) plus one
/// single-row matrix file per tensor.
pub fn save_checkpoint(dir: &Path, cfg: &ModelConfig, p: &Params) -> Result<()> {
    let mut names = Vec::new();
    for t in p.tensors() {
        write_vector(&dir.join(format!("{}.txt", t.name)), t.data)?;
        names.push(Value::String(t.name.into()));
    }
    let mut t = Table::new();
    t.insert("t".into(), (cfg.t as i64).into());
    t.insert("d".into(), (cfg.d as i64).into());
    t.insert("k".into(), (cfg.k as i64).into());
    t.insert("heads".into(), (cfg.heads as i64).into());
    t.insert("architecture".into(), cfg.architecture.name().into());
    t.insert("activation".into(), cfg.activation.name().into());
    t.insert("tensors".into(), Value::Array(names));
    write_toml(&dir.join("checkpoint.toml"), &t)
}

/// Reads tensors saved by [`save_checkpoint`] into parameters shaped by `cfg`.
pub fn load_checkpoint(dir: &Path, cfg: &ModelConfig) -> Result<Params> {
    let mut p = Params::init(cfg, &mut attncap_core::rng::stream(0, &[]));
    for t in p.tensors_mut() {
        let v = read_vector(&dir.join(format!("{}.txt", t.name)))?;
        if v.len() != t.data.len() {
            bail!("tensor {} has {} entries, expected {}", t.name, v.len(), t.data.len());
        }
        t.data.copy_from_slice(&v);
    }
    Ok(p)
}

/// CSV with `header` and the given rows, written atomically.
pub fn write_csv(path: &Path, header: &str, rows: impl IntoIterator<Item = String>) -> Result<()> {
    let mut out = String::from(header);
    out.push('\n');
    for r in rows {
        out.push_str(&r);
        out.push('\n');
    }
    write_atomic(path, out)
}
