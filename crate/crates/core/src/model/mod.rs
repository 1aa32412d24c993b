//! Two-level attention encoder and dot-product decoder.
//!
//! Per head `k`, drug features are projected by `M[k]`. For each meta-path
//! graph and head, attention logits `leaky_relu(a · [h′_i ‖ h′_j])` are
//! softmax-normalized over the neighbor mask and used to aggregate projected
//! neighbors; heads are concatenated into `z^ν`. Meta-path scores
//! `qᵀ tanh(W z^ν_i + b)`, pooled over drugs, are softmax-normalized into β
//! and the fused embedding is `Z = Σ_ν β_ν z^ν`. Pairs score as
//! `sigmoid(Z_i · Z_j)`.

mod checkpoint;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::espf::FeatureMatrix;
use crate::metapath::NeighborGraph;
use crate::rng::{stream_rng, Stream};
use crate::tensor::{Mask, Real, Tape, Tensor, Unary, Var};

pub use checkpoint::{
    checkpoint_precision, decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint,
    CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};

/// Predictions are clamped to `[BCE_CLAMP, 1 − BCE_CLAMP]` inside the loss.
pub const BCE_CLAMP: f64 = 1e-7;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Pooling {
    #[default]
    Mean,
    Sum,
}

impl FromStr for Pooling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Pooling::Mean),
            "sum" => Ok(Pooling::Sum),
            other => Err(Error::Parameter(format!(
                "unknown pooling {other:?} (mean|sum)"
            ))),
        }
    }
}

impl fmt::Display for Pooling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pooling::Mean => "mean",
            Pooling::Sum => "sum",
        })
    }
}

/// Which attention levels are learned.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Variant {
    #[default]
    Full,
    /// Node-level attention replaced by a fixed random row-stochastic matrix.
    RandomNodeAttention,
    /// Meta-path weights fixed at `1/T`.
    UniformMetaPath,
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(Variant::Full),
            "mp" => Ok(Variant::RandomNodeAttention),
            "n" => Ok(Variant::UniformMetaPath),
            other => Err(Error::Parameter(format!(
                "unknown variant {other:?} (full|mp|n)"
            ))),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Full => "full",
            Variant::RandomNodeAttention => "mp",
            Variant::UniformMetaPath => "n",
        })
    }
}

pub fn parse_activation(s: &str) -> Result<Unary> {
    match s {
        "relu" => Ok(Unary::Relu),
        "tanh" => Ok(Unary::Tanh),
        "sigmoid" => Ok(Unary::Sigmoid),
        "identity" => Ok(Unary::Identity),
        other => Err(Error::Parameter(format!(
            "unknown activation {other:?} (relu|tanh|sigmoid|identity)"
        ))),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub hidden: usize,
    pub heads: usize,
    pub metapath_dim: usize,
    pub slope: f64,
    pub dropout: f64,
    pub activation: Unary,
    pub pooling: Pooling,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(input_dim: usize) -> Self {
        ModelConfig {
            input_dim,
            hidden: 8,
            heads: 8,
            metapath_dim: 128,
            slope: 0.2,
            dropout: 0.6,
            activation: Unary::Relu,
            pooling: Pooling::Mean,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("input_dim", self.input_dim),
            ("hidden", self.hidden),
            ("heads", self.heads),
            ("metapath_dim", self.metapath_dim),
        ] {
            if v == 0 {
                return Err(Error::Parameter(format!("{name} must be at least 1")));
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Parameter(format!(
                "dropout must lie in [0, 1), got {}",
                self.dropout
            )));
        }
        if !self.slope.is_finite() || self.slope < 0.0 {
            return Err(Error::Parameter(format!(
                "slope must be non-negative, got {}",
                self.slope
            )));
        }
        Ok(())
    }

    /// Width of `z^ν` and `Z`.
    pub fn embedding_dim(&self) -> usize {
        self.heads * self.hidden
    }

    pub fn to_text(&self) -> String {
        format!(
            "input_dim={}\nhidden={}\nheads={}\nmetapath_dim={}\nslope={}\ndropout={}\nactivation={}\nmetapath_pooling={}\nseed={}\n",
            self.input_dim,
            self.hidden,
            self.heads,
            self.metapath_dim,
            self.slope,
            self.dropout,
            self.activation.name(),
            self.pooling,
            self.seed
        )
    }

    /// Reads the keys written by [`ModelConfig::to_text`]; other keys are
    /// ignored.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = ModelConfig::new(0);
        let bad = |k: &str, v: &str| Error::Format(format!("bad model config value {k}={v}"));
        for line in text.lines() {
            let Some((k, v)) = line.split_once('=') else {
                continue;
            };
            let (k, v) = (k.trim(), v.trim());
            match k {
                "input_dim" => cfg.input_dim = v.parse().map_err(|_| bad(k, v))?,
                "hidden" => cfg.hidden = v.parse().map_err(|_| bad(k, v))?,
                "heads" => cfg.heads = v.parse().map_err(|_| bad(k, v))?,
                "metapath_dim" => cfg.metapath_dim = v.parse().map_err(|_| bad(k, v))?,
                "slope" => cfg.slope = v.parse().map_err(|_| bad(k, v))?,
                "dropout" => cfg.dropout = v.parse().map_err(|_| bad(k, v))?,
                "activation" => cfg.activation = parse_activation(v)?,
                "metapath_pooling" => cfg.pooling = v.parse()?,
                "seed" => cfg.seed = v.parse().map_err(|_| bad(k, v))?,
                _ => {}
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// All trainable tensors.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<T> {
    /// One `d0×F` projection per head.
    pub projection: Vec<Tensor<T>>,
    /// `attention[ν][k]` is a `2F×1` vector.
    pub attention: Vec<Vec<Tensor<T>>>,
    /// `d_q×(K·F)`.
    pub w: Tensor<T>,
    /// `1×d_q`.
    pub b: Tensor<T>,
    /// `d_q×1`.
    pub q: Tensor<T>,
}

fn glorot<T: Real, R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Tensor<T> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| T::lit(rng.gen_range(-limit..limit)))
        .collect();
    Tensor::matrix(rows, cols, data).expect("positive extents")
}

impl<T: Real> ModelParams<T> {
    /// Glorot-uniform matrices and a zero bias.
    pub fn init<R: Rng + ?Sized>(config: &ModelConfig, metapaths: usize, rng: &mut R) -> Self {
        let (d0, f, k, dq) = (
            config.input_dim,
            config.hidden,
            config.heads,
            config.metapath_dim,
        );
        let projection = (0..k).map(|_| glorot(d0, f, rng)).collect();
        let attention = (0..metapaths)
            .map(|_| (0..k).map(|_| glorot(2 * f, 1, rng)).collect())
            .collect();
        let w = glorot(dq, k * f, rng);
        let q = glorot(dq, 1, rng);
        ModelParams {
            projection,
            attention,
            w,
            b: Tensor::zeros(1, dq),
            q,
        }
    }

    /// Tensor names in registration order.
    pub fn names(&self) -> Vec<String> {
        let mut names: Vec<String> = (0..self.projection.len())
            .map(|k| format!("projection.{k}"))
            .collect();
        for (v, heads) in self.attention.iter().enumerate() {
            names.extend((0..heads.len()).map(|k| format!("attention.{v}.{k}")));
        }
        names.extend(["W".to_string(), "b".to_string(), "q".to_string()]);
        names
    }

    pub fn tensors(&self) -> Vec<&Tensor<T>> {
        let mut out: Vec<&Tensor<T>> = self.projection.iter().collect();
        out.extend(self.attention.iter().flatten());
        out.extend([&self.w, &self.b, &self.q]);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out: Vec<&mut Tensor<T>> = self.projection.iter_mut().collect();
        out.extend(self.attention.iter_mut().flatten());
        out.extend([&mut self.w, &mut self.b, &mut self.q]);
        out
    }

    pub fn named(&self) -> Vec<(String, &Tensor<T>)> {
        self.names().into_iter().zip(self.tensors()).collect()
    }

    /// Rebuilds parameters from tensors listed in [`ModelParams::names`] order.
    pub fn from_tensors(
        config: &ModelConfig,
        metapaths: usize,
        tensors: Vec<Tensor<T>>,
    ) -> Result<Self> {
        let (d0, f, k, dq) = (
            config.input_dim,
            config.hidden,
            config.heads,
            config.metapath_dim,
        );
        let expected = k + metapaths * k + 3;
        if tensors.len() != expected {
            return Err(Error::Format(format!(
                "expected {expected} parameter tensors, found {}",
                tensors.len()
            )));
        }
        let mut it = tensors.into_iter();
        let mut take = |rows: usize, cols: usize| -> Result<Tensor<T>> {
            let t = it.next().expect("count checked");
            if t.shape() != [rows, cols] {
                return Err(Error::shape("parameters", &[rows, cols], t.shape()));
            }
            Ok(t)
        };
        let projection = (0..k).map(|_| take(d0, f)).collect::<Result<_>>()?;
        let attention = (0..metapaths)
            .map(|_| (0..k).map(|_| take(2 * f, 1)).collect::<Result<_>>())
            .collect::<Result<_>>()?;
        Ok(ModelParams {
            projection,
            attention,
            w: take(dq, k * f)?,
            b: take(1, dq)?,
            q: take(dq, 1)?,
        })
    }
}

/// Fixed replacements for learned attention, used by the ablation variants.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AttentionOverride<T> {
    /// One row-stochastic `n×n` matrix per meta-path, shared by all heads.
    pub alpha: Option<Vec<Tensor<T>>>,
    /// Fixed meta-path weights.
    pub beta: Option<Vec<T>>,
}

/// Row-stochastic matrix with random positive weights on `mask`, zero elsewhere.
pub fn random_row_stochastic<T: Real, R: Rng + ?Sized>(
    mask: &Mask,
    rng: &mut R,
) -> Result<Tensor<T>> {
    let (n, m) = (mask.rows(), mask.cols());
    let mut data = vec![T::zero(); n * m];
    for i in 0..n {
        let cols: Vec<usize> = (0..m).filter(|&j| mask.get(i, j)).collect();
        if cols.is_empty() {
            return Err(Error::Contract(format!("mask row {i} has no entries")));
        }
        let weights: Vec<f64> = cols.iter().map(|_| 1.0 - rng.gen::<f64>()).collect();
        let total: f64 = weights.iter().sum();
        for (&j, w) in cols.iter().zip(weights) {
            data[i * m + j] = T::lit(w / total);
        }
    }
    Tensor::matrix(n, m, data)
}

/// Drug features and one neighbor mask per meta-path, in meta-path order.
#[derive(Clone, Debug)]
pub struct ModelInputs<T> {
    pub features: Tensor<T>,
    pub graphs: Vec<Arc<Mask>>,
}

impl<T: Real> ModelInputs<T> {
    pub fn new(features: &FeatureMatrix, graphs: &[NeighborGraph]) -> Result<Self> {
        let n = features.drugs();
        for g in graphs {
            if g.adjacency.rows() != n || g.adjacency.cols() != n {
                return Err(Error::shape(
                    "neighbor graph",
                    &[n, n],
                    &[g.adjacency.rows(), g.adjacency.cols()],
                ));
            }
        }
        if graphs.is_empty() {
            return Err(Error::Parameter(
                "at least one meta-path graph is required".into(),
            ));
        }
        Ok(ModelInputs {
            features: features.to_tensor(),
            graphs: graphs.iter().map(|g| g.adjacency.clone()).collect(),
        })
    }

    pub fn drugs(&self) -> usize {
        self.features.rows()
    }
}

/// `h · M`.
pub fn project<T: Real>(tape: &mut Tape<T>, h: Var, m: Var) -> Result<Var> {
    if tape.value(h).cols() != tape.value(m).rows() {
        return Err(Error::shape("project", tape.shape(h), tape.shape(m)));
    }
    tape.matmul(h, m)
}

/// Masked softmax of `leaky_relu(a[..F] · h′_i + a[F..] · h′_j)`.
pub fn node_level_attention<T: Real>(
    tape: &mut Tape<T>,
    h_proj: Var,
    mask: &Arc<Mask>,
    a: Var,
    slope: f64,
) -> Result<Var> {
    let (n, f) = (tape.value(h_proj).rows(), tape.value(h_proj).cols());
    if tape.shape(a) != [2 * f, 1] {
        return Err(Error::shape(
            "node_level_attention",
            &[2 * f, 1],
            tape.shape(a),
        ));
    }
    if mask.rows() != n || mask.cols() != n {
        return Err(Error::shape(
            "node_level_attention",
            &[n, n],
            &[mask.rows(), mask.cols()],
        ));
    }
    let a_src = tape.slice_rows(a, 0, f)?;
    let a_dst = tape.slice_rows(a, f, f)?;
    let s_src = tape.matmul(h_proj, a_src)?;
    let s_dst = tape.matmul(h_proj, a_dst)?;
    let e = tape.pairwise_sum(s_src, s_dst)?;
    let e = tape.leaky_relu(e, slope)?;
    tape.masked_row_softmax(e, mask.clone())
}

/// `activation(α_k · h′_k)` per head, concatenated in head order.
pub fn aggregate_multihead<T: Real>(
    tape: &mut Tape<T>,
    heads: &[(Var, Var)],
    activation: Unary,
) -> Result<Var> {
    let mut parts = Vec::with_capacity(heads.len());
    for &(alpha, h_proj) in heads {
        let agg = tape.matmul(alpha, h_proj)?;
        parts.push(tape.unary(activation, agg)?);
    }
    tape.concat_cols(&parts)
}

/// Returns the pooled scores `w` and `β = softmax(w)`, both `1×T`.
pub fn metapath_attention<T: Real>(
    tape: &mut Tape<T>,
    z: &[Var],
    w: Var,
    b: Var,
    q: Var,
    pooling: Pooling,
) -> Result<(Var, Var)> {
    if z.is_empty() {
        return Err(Error::Contract(
            "metapath_attention needs at least one meta-path".into(),
        ));
    }
    let w_t = tape.transpose(w)?;
    let mut scores = Vec::with_capacity(z.len());
    for &z_v in z {
        let n = tape.value(z_v).rows();
        let hidden = tape.matmul(z_v, w_t)?;
        let hidden = tape.add_row(hidden, b)?;
        let hidden = tape.tanh(hidden)?;
        let per_drug = tape.matmul(hidden, q)?;
        let total = tape.sum_all(per_drug)?;
        scores.push(match pooling {
            Pooling::Sum => total,
            Pooling::Mean => tape.scale(total, T::lit(1.0 / n as f64))?,
        });
    }
    let w_row = tape.concat_cols(&scores)?;
    let beta = tape.masked_row_softmax(w_row, Arc::new(Mask::full(1, z.len())))?;
    Ok((w_row, beta))
}

/// `Σ_ν β[ν]·z^ν`.
pub fn fuse<T: Real>(tape: &mut Tape<T>, z: &[Var], beta: Var) -> Result<Var> {
    if z.is_empty() || tape.value(beta).len() != z.len() {
        return Err(Error::shape("fuse", &[z.len()], tape.shape(beta)));
    }
    let mut acc = None;
    for (v, &z_v) in z.iter().enumerate() {
        let weight = tape.select(beta, v)?;
        let term = tape.scale_by(z_v, weight)?;
        acc = Some(match acc {
            None => term,
            Some(prev) => tape.add(prev, term)?,
        });
    }
    Ok(acc.expect("non-empty"))
}

/// `sigmoid(Z_i · Z_j)` for each pair, as a column.
pub fn decode_pairs<T: Real>(
    tape: &mut Tape<T>,
    fused: Var,
    pairs: &[(usize, usize)],
) -> Result<Var> {
    let left: Vec<usize> = pairs.iter().map(|p| p.0).collect();
    let right: Vec<usize> = pairs.iter().map(|p| p.1).collect();
    let zl = tape.gather_rows(fused, &left)?;
    let zr = tape.gather_rows(fused, &right)?;
    let prod = tape.mul(zl, zr)?;
    let logits = tape.sum_cols(prod)?;
    tape.sigmoid(logits)
}

/// `sigmoid(Z_i · Z_j)`, computed in the same order as [`decode_pairs`].
pub fn decode_pair<T: Real>(z: &Tensor<T>, i: usize, j: usize) -> Result<T> {
    let n = z.rows();
    if i >= n || j >= n {
        return Err(Error::Contract(format!(
            "pair ({i}, {j}) outside {n} drugs"
        )));
    }
    let dot: T = z.row(i).iter().zip(z.row(j)).map(|(&p, &q)| p * q).sum();
    Ok(Unary::Sigmoid.apply(dot))
}

/// Handles to everything one forward pass recorded.
#[derive(Clone, Debug)]
pub struct Forward {
    /// Parameter leaves in [`ModelParams::names`] order.
    pub params: Vec<Var>,
    /// `alpha[ν][k]` before dropout.
    pub alpha: Vec<Vec<Var>>,
    pub z: Vec<Var>,
    pub beta: Var,
    pub fused: Var,
    pub scores: Option<Var>,
}

/// Values of an eval-mode encoder pass.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderOutput<T> {
    pub alpha: Vec<Vec<Tensor<T>>>,
    pub z: Vec<Tensor<T>>,
    pub beta: Vec<T>,
    pub fused: Tensor<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HanModel<T> {
    config: ModelConfig,
    metapaths: Vec<String>,
    variant: Variant,
    params: ModelParams<T>,
    overrides: AttentionOverride<T>,
}

impl<T: Real> HanModel<T> {
    /// Seeded initialization. The random node attention of the MP variant is
    /// drawn from its own stream over `graphs`.
    pub fn new(
        config: ModelConfig,
        metapaths: Vec<String>,
        variant: Variant,
        graphs: &[NeighborGraph],
    ) -> Result<Self> {
        config.validate()?;
        if metapaths.is_empty() || metapaths.len() != graphs.len() {
            return Err(Error::Parameter(format!(
                "{} meta-path names for {} graphs",
                metapaths.len(),
                graphs.len()
            )));
        }
        let params = ModelParams::init(
            &config,
            metapaths.len(),
            &mut stream_rng(config.seed, Stream::Init),
        );
        let overrides = match variant {
            Variant::Full => AttentionOverride::default(),
            Variant::RandomNodeAttention => {
                let mut rng = stream_rng(config.seed, Stream::Ablation);
                AttentionOverride {
                    alpha: Some(
                        graphs
                            .iter()
                            .map(|g| random_row_stochastic(&g.adjacency, &mut rng))
                            .collect::<Result<_>>()?,
                    ),
                    beta: None,
                }
            }
            Variant::UniformMetaPath => AttentionOverride {
                alpha: None,
                beta: Some(vec![T::lit(1.0 / graphs.len() as f64); graphs.len()]),
            },
        };
        Self::from_parts(config, metapaths, variant, params, overrides)
    }

    pub fn from_parts(
        config: ModelConfig,
        metapaths: Vec<String>,
        variant: Variant,
        params: ModelParams<T>,
        overrides: AttentionOverride<T>,
    ) -> Result<Self> {
        config.validate()?;
        let tensors = params.tensors().into_iter().cloned().collect();
        ModelParams::from_tensors(&config, metapaths.len(), tensors)?;
        if let Some(alpha) = &overrides.alpha {
            if alpha.len() != metapaths.len() {
                return Err(Error::Format(
                    "one fixed attention matrix per meta-path required".into(),
                ));
            }
        }
        if let Some(beta) = &overrides.beta {
            if beta.len() != metapaths.len() {
                return Err(Error::Format(
                    "one fixed weight per meta-path required".into(),
                ));
            }
        }
        Ok(HanModel {
            config,
            metapaths,
            variant,
            params,
            overrides,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn metapaths(&self) -> &[String] {
        &self.metapaths
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn params(&self) -> &ModelParams<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ModelParams<T> {
        &mut self.params
    }

    pub fn overrides(&self) -> &AttentionOverride<T> {
        &self.overrides
    }

    pub fn set_overrides(&mut self, overrides: AttentionOverride<T>) {
        self.overrides = overrides;
    }

    /// Records the full encoder and, for non-empty `pairs`, the decoder.
    /// Dropout is active only when `training`.
    pub fn record<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape<T>,
        inputs: &ModelInputs<T>,
        pairs: &[(usize, usize)],
        training: bool,
        rng: &mut R,
    ) -> Result<Forward> {
        let cfg = &self.config;
        let (k_heads, paths) = (cfg.heads, self.metapaths.len());
        if inputs.features.cols() != cfg.input_dim {
            return Err(Error::shape(
                "features",
                &[inputs.drugs(), cfg.input_dim],
                inputs.features.shape(),
            ));
        }
        if inputs.graphs.len() != paths {
            return Err(Error::Parameter(format!(
                "model has {paths} meta-paths, inputs supply {}",
                inputs.graphs.len()
            )));
        }
        let n = inputs.drugs();
        if let Some(&(i, j)) = pairs.iter().find(|&&(i, j)| i >= n || j >= n) {
            return Err(Error::Contract(format!(
                "pair ({i}, {j}) outside {n} drugs"
            )));
        }

        let params: Vec<Var> = self
            .params
            .tensors()
            .into_iter()
            .map(|t| tape.param(t.clone()))
            .collect();
        let att = |v: usize, k: usize| params[k_heads + v * k_heads + k];
        let (w, b, q) = (
            params[k_heads * (1 + paths)],
            params[k_heads * (1 + paths) + 1],
            params[k_heads * (1 + paths) + 2],
        );

        let h = tape.constant(inputs.features.clone());
        let h = tape.dropout(h, cfg.dropout, rng, training)?;
        let h_proj: Vec<Var> = (0..k_heads)
            .map(|k| project(tape, h, params[k]))
            .collect::<Result<_>>()?;

        let mut alpha = Vec::with_capacity(paths);
        let mut z = Vec::with_capacity(paths);
        for (v, mask) in inputs.graphs.iter().enumerate() {
            let fixed = self
                .overrides
                .alpha
                .as_ref()
                .map(|a| tape.constant(a[v].clone()));
            let mut heads = Vec::with_capacity(k_heads);
            let mut alpha_v = Vec::with_capacity(k_heads);
            for (k, &hp) in h_proj.iter().enumerate() {
                let a = match fixed {
                    Some(a) => a,
                    None => node_level_attention(tape, hp, mask, att(v, k), cfg.slope)?,
                };
                alpha_v.push(a);
                let a = tape.dropout(a, cfg.dropout, rng, training)?;
                heads.push((a, hp));
            }
            alpha.push(alpha_v);
            z.push(aggregate_multihead(tape, &heads, cfg.activation)?);
        }

        let beta = match &self.overrides.beta {
            Some(fixed) => tape.constant(Tensor::matrix(1, fixed.len(), fixed.clone())?),
            None => metapath_attention(tape, &z, w, b, q, cfg.pooling)?.1,
        };
        let fused = fuse(tape, &z, beta)?;
        let scores = if pairs.is_empty() {
            None
        } else {
            Some(decode_pairs(tape, fused, pairs)?)
        };
        Ok(Forward {
            params,
            alpha,
            z,
            beta,
            fused,
            scores,
        })
    }

    /// Eval-mode encoder pass.
    pub fn encode(&self, inputs: &ModelInputs<T>) -> Result<EncoderOutput<T>> {
        let mut tape = Tape::new();
        // Eval mode draws nothing from the generator.
        let mut rng = stream_rng(0, Stream::Dropout);
        let fwd = self.record(&mut tape, inputs, &[], false, &mut rng)?;
        Ok(EncoderOutput {
            alpha: fwd
                .alpha
                .iter()
                .map(|heads| heads.iter().map(|&a| tape.value(a).clone()).collect())
                .collect(),
            z: fwd.z.iter().map(|&v| tape.value(v).clone()).collect(),
            beta: tape.value(fwd.beta).data().to_vec(),
            fused: tape.value(fwd.fused).clone(),
        })
    }

    /// Eval-mode scores for `pairs`.
    pub fn score_pairs(&self, inputs: &ModelInputs<T>, pairs: &[(usize, usize)]) -> Result<Vec<T>> {
        let out = self.encode(inputs)?;
        pairs
            .iter()
            .map(|&(i, j)| decode_pair(&out.fused, i, j))
            .collect()
    }
}
