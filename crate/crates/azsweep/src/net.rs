//! Trainable policy/value network.
//!
//! A dense network computed from scratch: flatten → hidden layers → a
//! softmax policy head over all actions and a tanh value head. Master
//! parameters are stored as `f32` (the checkpoint tensor format) and every
//! computation widens to `f64`, which keeps checkpoint round-trips
//! bit-exact while leaving gradients accurate enough to verify against
//! central finite differences.
//!
//! Training minimizes the summed policy cross-entropy and value squared
//! error, `-π·log(p) + (v - z)^2`, with Adam and optional inverted dropout
//! on the hidden layers. Inference applies no dropout and masks the policy
//! to the legal moves of the encoded position.

use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::othello::Encoding;

/// Checkpoint file magic.
pub const CHECKPOINT_MAGIC: [u8; 4] = *b"AZSW";
/// Current checkpoint format version; other versions are rejected.
pub const CHECKPOINT_VERSION: u32 = 1;
/// Floor added inside the policy-loss logarithm.
pub const LOG_EPSILON: f64 = 1e-10;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPSILON: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("invalid network configuration: {0}")]
    InvalidConfig(String),
    #[error("input shape mismatch: expected {expected} values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("training example set is empty")]
    EmptyTrainingSet,
    #[error("invalid training example {index}: {reason}")]
    InvalidExample { index: usize, reason: String },
    #[error("invalid training options: {0}")]
    InvalidOptions(&'static str),
    #[error("non-finite loss at epoch {epoch}, batch {batch}; training aborted")]
    NonFiniteLoss { epoch: u32, batch: usize },
    #[error("model parameters contain non-finite values")]
    NonFiniteParameters,
    #[error("network produced a non-finite output")]
    NonFiniteOutput,
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint format version {0}")]
    UnsupportedVersion(u32),
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Hidden-layer nonlinearity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    pub fn as_str(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        }
    }

    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through pre-activation `z` and output `h`.
    fn derivative(self, z: f64, h: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - h * h,
        }
    }
}

impl FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(format!("unknown activation {other:?}")),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Architecture description; also the checkpoint header contents.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NetworkConfig {
    pub board_size: usize,
    pub hidden_layers: Vec<usize>,
    pub activation: Activation,
    pub dropout_rate: f64,
}

impl NetworkConfig {
    pub fn default_for(board_size: usize) -> NetworkConfig {
        NetworkConfig {
            board_size,
            hidden_layers: vec![128, 128],
            activation: Activation::Relu,
            dropout_rate: 0.3,
        }
    }

    /// Flattened input length: one value per board cell.
    pub fn input_len(&self) -> usize {
        self.board_size * self.board_size
    }

    /// Policy output length: one entry per cell plus the pass action.
    pub fn action_count(&self) -> usize {
        self.input_len() + 1
    }

    pub fn validate(&self) -> Result<(), NetError> {
        if self.board_size < 3 {
            return Err(NetError::InvalidConfig(format!(
                "board_size {} too small",
                self.board_size
            )));
        }
        if self.hidden_layers.iter().any(|w| *w == 0) {
            return Err(NetError::InvalidConfig("zero-width hidden layer".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(NetError::InvalidConfig(format!(
                "dropout_rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        Ok(())
    }
}

/// One self-play observation: the canonical state encoding, the searched
/// policy target π and the eventual game outcome z for the encoded mover.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainingExample {
    pub encoding: Encoding,
    pub policy: Vec<f64>,
    pub outcome: f64,
}

impl TrainingExample {
    /// Checks π is a distribution with mass only on moves legal in the
    /// encoded position, and z is a valid outcome value.
    pub fn validate(&self) -> Result<(), String> {
        let mask = self.encoding.legal_mask();
        if self.policy.len() != mask.len() {
            return Err(format!(
                "policy length {} does not match action count {}",
                self.policy.len(),
                mask.len()
            ));
        }
        let mut sum = 0.0;
        for (i, p) in self.policy.iter().enumerate() {
            if !p.is_finite() || *p < 0.0 {
                return Err(format!("policy entry {i} is {p}"));
            }
            if *p > 0.0 && !mask[i] {
                return Err(format!("policy mass {p} on illegal move {i}"));
            }
            sum += *p;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(format!("policy sums to {sum}"));
        }
        if ![-1.0, 0.0, 1.0].contains(&self.outcome) {
            return Err(format!("outcome {} not in {{-1, 0, 1}}", self.outcome));
        }
        Ok(())
    }
}

/// Eq.-style loss decomposition; `total` is exactly `policy + value`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossTerms {
    pub policy: f64,
    pub value: f64,
    pub total: f64,
}

/// Cross-entropy of the target policy against the prediction plus squared
/// value error: `-Σ π(a)·ln(p(a) + ε)` and `(v − z)²`.
pub fn loss_terms(target_policy: &[f64], outcome: f64, predicted_policy: &[f64], value: f64) -> LossTerms {
    assert_eq!(
        target_policy.len(),
        predicted_policy.len(),
        "policy length mismatch"
    );
    let mut policy = 0.0;
    for (t, p) in target_policy.iter().zip(predicted_policy) {
        if *t != 0.0 {
            policy -= t * (p + LOG_EPSILON).ln();
        }
    }
    let diff = value - outcome;
    let value_loss = diff * diff;
    LossTerms {
        policy,
        value: value_loss,
        total: policy + value_loss,
    }
}

/// Mean policy/value losses over one training epoch.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EpochLoss {
    pub policy: f64,
    pub value: f64,
}

impl EpochLoss {
    pub fn total(&self) -> f64 {
        self.policy + self.value
    }
}

#[derive(Clone, Copy, Debug)]
pub struct TrainOptions {
    pub epochs: u32,
    pub batch_size: u32,
    pub learning_rate: f64,
    pub dropout: f64,
    pub seed: u64,
}

/// What a training call did: the logged per-epoch mean losses and the
/// number of optimizer steps (= batches) taken.
#[derive(Clone, Debug)]
pub struct TrainReport {
    pub epoch_losses: Vec<EpochLoss>,
    pub optimizer_steps: u64,
}

/// How to initialize a fresh model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Init {
    /// Scaled random hidden layers, zero output heads: the network starts
    /// with a uniform policy and value exactly 0.
    ZeroHeads,
    /// Every layer random; used by gradient verification, where zero heads
    /// would zero out the trunk gradients.
    FullRandom,
}

#[derive(Clone, Copy)]
struct LayerShape {
    in_dim: usize,
    out_dim: usize,
    w_offset: usize,
    b_offset: usize,
}

impl LayerShape {
    fn len(&self) -> usize {
        self.in_dim * self.out_dim + self.out_dim
    }
}

#[derive(Clone)]
struct Shapes {
    trunk: Vec<LayerShape>,
    policy: LayerShape,
    value: LayerShape,
    total: usize,
}

fn shapes_of(config: &NetworkConfig) -> Shapes {
    let mut offset = 0;
    let mut dims = vec![config.input_len()];
    dims.extend(&config.hidden_layers);
    let mut trunk = Vec::new();
    for window in dims.windows(2) {
        let shape = LayerShape {
            in_dim: window[0],
            out_dim: window[1],
            w_offset: offset,
            b_offset: offset + window[0] * window[1],
        };
        offset += shape.len();
        trunk.push(shape);
    }
    let last = *dims.last().expect("at least the input dim");
    let policy = LayerShape {
        in_dim: last,
        out_dim: config.action_count(),
        w_offset: offset,
        b_offset: offset + last * config.action_count(),
    };
    offset += policy.len();
    let value = LayerShape {
        in_dim: last,
        out_dim: 1,
        w_offset: offset,
        b_offset: offset + last,
    };
    offset += value.len();
    Shapes {
        trunk,
        policy,
        value,
        total: offset,
    }
}

/// The policy/value model: configuration plus a flat `f32` parameter vector.
#[derive(Clone)]
pub struct Model {
    config: NetworkConfig,
    params: Vec<f32>,
    training_iteration: u32,
    rng_state: u64,
}

impl Model {
    pub fn new(config: NetworkConfig, seed: u64) -> Result<Model, NetError> {
        Model::with_init(config, seed, Init::ZeroHeads)
    }

    pub fn with_init(config: NetworkConfig, seed: u64, init: Init) -> Result<Model, NetError> {
        config.validate()?;
        let shapes = shapes_of(&config);
        let mut params = vec![0.0f32; shapes.total];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for shape in &shapes.trunk {
            init_layer(&mut params, shape, &mut rng);
        }
        if init == Init::FullRandom {
            init_layer(&mut params, &shapes.policy, &mut rng);
            init_layer(&mut params, &shapes.value, &mut rng);
        }
        Ok(Model {
            config,
            params,
            training_iteration: 0,
            rng_state: seed,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn training_iteration(&self) -> u32 {
        self.training_iteration
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// The flat parameter vector widened to `f64`, in checkpoint tensor
    /// order. Together with [`batch_loss_at`] this supports independent
    /// finite-difference verification of [`gradient`].
    ///
    /// [`batch_loss_at`]: Model::batch_loss_at
    /// [`gradient`]: Model::gradient
    pub fn flat_params(&self) -> Vec<f64> {
        self.params.iter().map(|p| f64::from(*p)).collect()
    }

    /// Widens the parameters while verifying they are all finite.
    fn checked_flat_params(&self) -> Result<Vec<f64>, NetError> {
        let mut out = Vec::with_capacity(self.params.len());
        for p in &self.params {
            if !p.is_finite() {
                return Err(NetError::NonFiniteParameters);
            }
            out.push(f64::from(*p));
        }
        Ok(out)
    }

    /// Policy over all actions (legal-move masked, renormalized) and the
    /// bounded value estimate for an encoded position. No dropout.
    pub fn predict(&self, encoding: &Encoding) -> Result<(Vec<f64>, f64), NetError> {
        if encoding.len() != self.config.input_len() {
            return Err(NetError::ShapeMismatch {
                expected: self.config.input_len(),
                got: encoding.len(),
            });
        }
        let shapes = shapes_of(&self.config);
        let params = self.checked_flat_params()?;
        let fwd = forward(&shapes, &self.config, &params, encoding.values(), None);
        if !fwd.value.is_finite() || fwd.policy.iter().any(|p| !p.is_finite()) {
            return Err(NetError::NonFiniteOutput);
        }
        let mask = encoding.legal_mask();
        let mut policy = fwd.policy;
        let mut mass = 0.0;
        for (p, legal) in policy.iter_mut().zip(&mask) {
            if *legal {
                mass += *p;
            } else {
                *p = 0.0;
            }
        }
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(NetError::NonFiniteOutput);
        }
        for p in policy.iter_mut() {
            *p /= mass;
        }
        Ok((policy, fwd.value))
    }

    /// Trains in place: one shuffle per epoch from the seeded stream,
    /// `ceil(n / batch_size)` batches per epoch (last batch short), one Adam
    /// step per batch on the mean total loss. Dropout is active here only.
    /// Reported losses are means over all examples seen in the epoch.
    pub fn train(
        &mut self,
        examples: &[TrainingExample],
        opts: &TrainOptions,
    ) -> Result<TrainReport, NetError> {
        if examples.is_empty() {
            return Err(NetError::EmptyTrainingSet);
        }
        if opts.epochs == 0 {
            return Err(NetError::InvalidOptions("epochs must be >= 1"));
        }
        if opts.batch_size == 0 {
            return Err(NetError::InvalidOptions("batch_size must be >= 1"));
        }
        if !(0.0..1.0).contains(&opts.dropout) {
            return Err(NetError::InvalidOptions("dropout must be in [0, 1)"));
        }
        if !opts.learning_rate.is_finite() || opts.learning_rate < 0.0 {
            return Err(NetError::InvalidOptions("learning_rate must be finite and >= 0"));
        }
        self.validate_examples(examples)?;

        let shapes = shapes_of(&self.config);
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut adam = Adam::new(shapes.total);
        let mut indices: Vec<usize> = (0..examples.len()).collect();
        let mut epoch_losses = Vec::with_capacity(opts.epochs as usize);
        let mut grad = vec![0.0f64; shapes.total];

        for epoch in 0..opts.epochs {
            indices.shuffle(&mut rng);
            let mut policy_sum = 0.0;
            let mut value_sum = 0.0;
            for (batch_no, batch) in indices.chunks(opts.batch_size as usize).enumerate() {
                let params = self.flat_params();
                grad.fill(0.0);
                let mut batch_policy = 0.0;
                let mut batch_value = 0.0;
                for &idx in batch {
                    let example = &examples[idx];
                    let masks = if opts.dropout > 0.0 {
                        Some(sample_dropout_masks(&shapes, opts.dropout, &mut rng))
                    } else {
                        None
                    };
                    let fwd = forward(
                        &shapes,
                        &self.config,
                        &params,
                        example.encoding.values(),
                        masks.as_deref(),
                    );
                    let loss = loss_terms(&example.policy, example.outcome, &fwd.policy, fwd.value);
                    batch_policy += loss.policy;
                    batch_value += loss.value;
                    backward(
                        &shapes,
                        &self.config,
                        &params,
                        example.encoding.values(),
                        &fwd,
                        &example.policy,
                        example.outcome,
                        masks.as_deref(),
                        &mut grad,
                    );
                }
                let scale = 1.0 / batch.len() as f64;
                let mean_total = (batch_policy + batch_value) * scale;
                if !mean_total.is_finite() {
                    return Err(NetError::NonFiniteLoss {
                        epoch,
                        batch: batch_no,
                    });
                }
                for g in grad.iter_mut() {
                    *g *= scale;
                }
                adam.step(&mut self.params, &grad, opts.learning_rate);
                policy_sum += batch_policy;
                value_sum += batch_value;
            }
            epoch_losses.push(EpochLoss {
                policy: policy_sum / examples.len() as f64,
                value: value_sum / examples.len() as f64,
            });
        }
        self.training_iteration += 1;
        Ok(TrainReport {
            epoch_losses,
            optimizer_steps: adam.steps,
        })
    }

    /// Analytic gradient of the mean total loss over `batch` with respect to
    /// all parameters, dropout disabled. Exposed for verification against
    /// finite differences of [`batch_loss_at`].
    ///
    /// [`batch_loss_at`]: Model::batch_loss_at
    pub fn gradient(&self, batch: &[TrainingExample]) -> Result<Vec<f64>, NetError> {
        if batch.is_empty() {
            return Err(NetError::EmptyTrainingSet);
        }
        self.validate_examples(batch)?;
        let shapes = shapes_of(&self.config);
        let params = self.flat_params();
        let mut grad = vec![0.0f64; shapes.total];
        for example in batch {
            let fwd = forward(&shapes, &self.config, &params, example.encoding.values(), None);
            backward(
                &shapes,
                &self.config,
                &params,
                example.encoding.values(),
                &fwd,
                &example.policy,
                example.outcome,
                None,
                &mut grad,
            );
        }
        let scale = 1.0 / batch.len() as f64;
        for g in grad.iter_mut() {
            *g *= scale;
        }
        Ok(grad)
    }

    /// Mean total loss over `batch` evaluated at an arbitrary flat parameter
    /// vector (dropout disabled). The counterpart of [`gradient`] used by
    /// the finite-difference oracle.
    ///
    /// [`gradient`]: Model::gradient
    pub fn batch_loss_at(&self, params: &[f64], batch: &[TrainingExample]) -> Result<f64, NetError> {
        let shapes = shapes_of(&self.config);
        if params.len() != shapes.total {
            return Err(NetError::ShapeMismatch {
                expected: shapes.total,
                got: params.len(),
            });
        }
        if batch.is_empty() {
            return Err(NetError::EmptyTrainingSet);
        }
        let mut total = 0.0;
        for example in batch {
            let fwd = forward(&shapes, &self.config, params, example.encoding.values(), None);
            total += loss_terms(&example.policy, example.outcome, &fwd.policy, fwd.value).total;
        }
        Ok(total / batch.len() as f64)
    }

    fn validate_examples(&self, examples: &[TrainingExample]) -> Result<(), NetError> {
        for (index, example) in examples.iter().enumerate() {
            if example.encoding.len() != self.config.input_len() {
                return Err(NetError::ShapeMismatch {
                    expected: self.config.input_len(),
                    got: example.encoding.len(),
                });
            }
            example
                .validate()
                .map_err(|reason| NetError::InvalidExample { index, reason })?;
        }
        Ok(())
    }

    /// Serializes the checkpoint: magic, version, structured-text header,
    /// then raw little-endian `f32` tensor data in header order.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut header = String::new();
        header.push_str(&format!("board_size = {}\n", self.config.board_size));
        header.push_str(&format!(
            "hidden_layers = {}\n",
            self.config
                .hidden_layers
                .iter()
                .map(|w| w.to_string())
                .collect::<Vec<_>>()
                .join(",")
        ));
        header.push_str(&format!("activation = {}\n", self.config.activation));
        header.push_str(&format!("dropout_rate = {}\n", self.config.dropout_rate));
        header.push_str(&format!("action_count = {}\n", self.config.action_count()));
        header.push_str(&format!("training_iteration = {}\n", self.training_iteration));
        header.push_str(&format!("rng_state = {}\n", self.rng_state));
        let shapes = shapes_of(&self.config);
        for (name, dims) in named_tensors(&shapes) {
            let dims: Vec<String> = dims.iter().map(|d| d.to_string()).collect();
            header.push_str(&format!("tensor {name} {}\n", dims.join(" ")));
        }

        let mut bytes = Vec::new();
        bytes.extend_from_slice(&CHECKPOINT_MAGIC);
        bytes.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        bytes.extend_from_slice(&(header.len() as u32).to_le_bytes());
        bytes.extend_from_slice(header.as_bytes());
        for p in &self.params {
            bytes.extend_from_slice(&p.to_le_bytes());
        }
        bytes
    }

    pub fn save(&self, path: &Path) -> Result<(), NetError> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Model, NetError> {
        let mut cursor = std::io::Cursor::new(bytes);
        let mut magic = [0u8; 4];
        cursor
            .read_exact(&mut magic)
            .map_err(|_| NetError::CorruptCheckpoint("file shorter than magic".into()))?;
        if magic != CHECKPOINT_MAGIC {
            return Err(NetError::BadMagic);
        }
        let version = read_u32(&mut cursor)?;
        if version != CHECKPOINT_VERSION {
            return Err(NetError::UnsupportedVersion(version));
        }
        let header_len = read_u32(&mut cursor)? as usize;
        let mut header_bytes = vec![0u8; header_len];
        cursor
            .read_exact(&mut header_bytes)
            .map_err(|_| NetError::CorruptCheckpoint("truncated header".into()))?;
        let header = String::from_utf8(header_bytes)
            .map_err(|_| NetError::CorruptCheckpoint("header is not UTF-8".into()))?;

        let mut board_size = None;
        let mut hidden_layers = None;
        let mut activation = None;
        let mut dropout_rate = None;
        let mut action_count = None;
        let mut training_iteration = 0u32;
        let mut rng_state = 0u64;
        let mut tensors: Vec<(String, Vec<usize>)> = Vec::new();
        for line in header.lines() {
            if let Some(rest) = line.strip_prefix("tensor ") {
                let parts: Vec<&str> = rest.split_whitespace().collect();
                if parts.len() < 2 {
                    return Err(NetError::CorruptCheckpoint(format!("bad tensor line {line:?}")));
                }
                let dims = parts[1..]
                    .iter()
                    .map(|d| parse_header_num(d, line))
                    .collect::<Result<Vec<usize>, _>>()?;
                tensors.push((parts[0].to_string(), dims));
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| NetError::CorruptCheckpoint(format!("bad header line {line:?}")))?;
            match key {
                "board_size" => board_size = Some(parse_header_num(value, line)?),
                "hidden_layers" => {
                    let widths = if value.is_empty() {
                        Vec::new()
                    } else {
                        value
                            .split(',')
                            .map(|w| parse_header_num(w.trim(), line))
                            .collect::<Result<Vec<usize>, _>>()?
                    };
                    hidden_layers = Some(widths);
                }
                "activation" => {
                    activation =
                        Some(Activation::from_str(value).map_err(NetError::CorruptCheckpoint)?)
                }
                "dropout_rate" => {
                    dropout_rate = Some(
                        value
                            .parse::<f64>()
                            .map_err(|_| NetError::CorruptCheckpoint(format!("bad header line {line:?}")))?,
                    )
                }
                "action_count" => action_count = Some(parse_header_num(value, line)?),
                "training_iteration" => training_iteration = parse_header_num(value, line)? as u32,
                "rng_state" => {
                    rng_state = value
                        .parse::<u64>()
                        .map_err(|_| NetError::CorruptCheckpoint(format!("bad header line {line:?}")))?
                }
                other => {
                    return Err(NetError::CorruptCheckpoint(format!("unknown header key {other:?}")))
                }
            }
        }

        let config = NetworkConfig {
            board_size: board_size
                .ok_or_else(|| NetError::CorruptCheckpoint("missing board_size".into()))?,
            hidden_layers: hidden_layers
                .ok_or_else(|| NetError::CorruptCheckpoint("missing hidden_layers".into()))?,
            activation: activation
                .ok_or_else(|| NetError::CorruptCheckpoint("missing activation".into()))?,
            dropout_rate: dropout_rate
                .ok_or_else(|| NetError::CorruptCheckpoint("missing dropout_rate".into()))?,
        };
        config.validate()?;
        let declared_actions =
            action_count.ok_or_else(|| NetError::CorruptCheckpoint("missing action_count".into()))?;
        if declared_actions != config.action_count() {
            return Err(NetError::CorruptCheckpoint(format!(
                "action_count {declared_actions} does not match board_size {} (expected {})",
                config.board_size,
                config.action_count()
            )));
        }
        let shapes = shapes_of(&config);
        if tensors != named_tensors(&shapes) {
            return Err(NetError::CorruptCheckpoint(
                "tensor list does not match the declared architecture".into(),
            ));
        }

        let mut params = vec![0.0f32; shapes.total];
        let mut buf = [0u8; 4];
        for p in params.iter_mut() {
            cursor
                .read_exact(&mut buf)
                .map_err(|_| NetError::CorruptCheckpoint("truncated tensor data".into()))?;
            *p = f32::from_le_bytes(buf);
        }
        let mut trailing = Vec::new();
        cursor.read_to_end(&mut trailing)?;
        if !trailing.is_empty() {
            return Err(NetError::CorruptCheckpoint(format!(
                "{} trailing bytes after tensor data",
                trailing.len()
            )));
        }
        Ok(Model {
            config,
            params,
            training_iteration,
            rng_state,
        })
    }

    pub fn load(path: &Path) -> Result<Model, NetError> {
        Model::from_bytes(&std::fs::read(path)?)
    }

    /// Hex digest of the serialized checkpoint; equal digests mean
    /// bit-identical parameters and configuration.
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.to_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl crate::mcts::Evaluator for Model {
    fn evaluate(
        &self,
        state: &crate::othello::GameState,
    ) -> Result<(Vec<f64>, f64), crate::mcts::SearchError> {
        self.predict(&state.encode())
            .map_err(|e| crate::mcts::SearchError::Evaluation(e.to_string()))
    }
}

fn init_layer(params: &mut [f32], shape: &LayerShape, rng: &mut ChaCha8Rng) {
    let limit = (6.0 / (shape.in_dim + shape.out_dim) as f64).sqrt();
    for i in 0..shape.in_dim * shape.out_dim {
        params[shape.w_offset + i] = (rng.gen::<f64>() * 2.0 * limit - limit) as f32;
    }
    // Biases stay zero.
}

/// Tensor names and dimensions in flat-vector order: per layer the weight
/// matrix `[out, in]` then the bias vector `[out]`.
fn named_tensors(shapes: &Shapes) -> Vec<(String, Vec<usize>)> {
    let mut out = Vec::new();
    let mut push = |name: String, shape: &LayerShape| {
        out.push((format!("{name}.weight"), vec![shape.out_dim, shape.in_dim]));
        out.push((format!("{name}.bias"), vec![shape.out_dim]));
    };
    for (i, shape) in shapes.trunk.iter().enumerate() {
        push(format!("trunk{i}"), shape);
    }
    push("policy".into(), &shapes.policy);
    push("value".into(), &shapes.value);
    out
}

fn read_u32(cursor: &mut std::io::Cursor<&[u8]>) -> Result<u32, NetError> {
    let mut buf = [0u8; 4];
    cursor
        .read_exact(&mut buf)
        .map_err(|_| NetError::CorruptCheckpoint("truncated file".into()))?;
    Ok(u32::from_le_bytes(buf))
}

fn parse_header_num(value: &str, line: &str) -> Result<usize, NetError> {
    value
        .parse::<usize>()
        .map_err(|_| NetError::CorruptCheckpoint(format!("bad header line {line:?}")))
}

struct Forward {
    /// Pre-activations per trunk layer.
    trunk_pre: Vec<Vec<f64>>,
    /// Activation outputs per trunk layer, before dropout.
    trunk_act: Vec<Vec<f64>>,
    /// Layer outputs after dropout (what the next layer consumed).
    trunk_out: Vec<Vec<f64>>,
    /// Full softmax policy, unmasked.
    policy: Vec<f64>,
    value: f64,
}

fn affine(params: &[f64], shape: &LayerShape, input: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; shape.out_dim];
    for (o, out_val) in out.iter_mut().enumerate() {
        let row = shape.w_offset + o * shape.in_dim;
        let mut acc = params[shape.b_offset + o];
        for (i, x) in input.iter().enumerate() {
            acc += params[row + i] * x;
        }
        *out_val = acc;
    }
    out
}

fn forward(
    shapes: &Shapes,
    config: &NetworkConfig,
    params: &[f64],
    input: &[f64],
    dropout_masks: Option<&[Vec<f64>]>,
) -> Forward {
    let mut trunk_pre = Vec::with_capacity(shapes.trunk.len());
    let mut trunk_act = Vec::with_capacity(shapes.trunk.len());
    let mut trunk_out: Vec<Vec<f64>> = Vec::with_capacity(shapes.trunk.len());
    let mut current: &[f64] = input;
    for (t, shape) in shapes.trunk.iter().enumerate() {
        let pre = affine(params, shape, current);
        let act: Vec<f64> = pre.iter().map(|z| config.activation.apply(*z)).collect();
        let out = match dropout_masks {
            Some(masks) => act.iter().zip(&masks[t]).map(|(h, m)| h * m).collect(),
            None => act.clone(),
        };
        trunk_pre.push(pre);
        trunk_act.push(act);
        trunk_out.push(out);
        current = trunk_out.last().unwrap();
    }
    let logits = affine(params, &shapes.policy, current);
    let policy = softmax(&logits);
    let value_pre = affine(params, &shapes.value, current)[0];
    Forward {
        trunk_pre,
        trunk_act,
        trunk_out,
        policy,
        value: value_pre.tanh(),
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Accumulates the gradient of `loss_terms` for one example into `grad`.
/// Differentiates the exact computed function, including the `LOG_EPSILON`
/// floor, so finite differences of the same function must agree.
#[allow(clippy::too_many_arguments)]
fn backward(
    shapes: &Shapes,
    config: &NetworkConfig,
    params: &[f64],
    input: &[f64],
    fwd: &Forward,
    target_policy: &[f64],
    outcome: f64,
    dropout_masks: Option<&[Vec<f64>]>,
    grad: &mut [f64],
) {
    let last_out: &[f64] = match fwd.trunk_out.last() {
        Some(out) => out,
        None => input,
    };

    // Policy head: dL/dp = -π/(p+ε), then back through the softmax Jacobian.
    let g: Vec<f64> = target_policy
        .iter()
        .zip(&fwd.policy)
        .map(|(t, p)| if *t != 0.0 { -t / (p + LOG_EPSILON) } else { 0.0 })
        .collect();
    let gp: f64 = g.iter().zip(&fwd.policy).map(|(g, p)| g * p).sum();
    let d_logits: Vec<f64> = g
        .iter()
        .zip(&fwd.policy)
        .map(|(g, p)| p * (g - gp))
        .collect();

    // Value head through tanh.
    let d_value_pre = 2.0 * (fwd.value - outcome) * (1.0 - fwd.value * fwd.value);

    let mut d_last = vec![0.0; last_out.len()];
    accumulate_layer(params, &shapes.policy, last_out, &d_logits, grad, &mut d_last);
    accumulate_layer(params, &shapes.value, last_out, &[d_value_pre], grad, &mut d_last);

    // Trunk, deepest first.
    let mut d_out = d_last;
    for t in (0..shapes.trunk.len()).rev() {
        let shape = &shapes.trunk[t];
        let d_act: Vec<f64> = match dropout_masks {
            Some(masks) => d_out.iter().zip(&masks[t]).map(|(d, m)| d * m).collect(),
            None => d_out.clone(),
        };
        let d_pre: Vec<f64> = d_act
            .iter()
            .zip(&fwd.trunk_pre[t])
            .zip(&fwd.trunk_act[t])
            .map(|((d, z), h)| d * config.activation.derivative(*z, *h))
            .collect();
        let layer_input: &[f64] = if t == 0 { input } else { &fwd.trunk_out[t - 1] };
        let mut d_input = vec![0.0; layer_input.len()];
        accumulate_layer(params, shape, layer_input, &d_pre, grad, &mut d_input);
        d_out = d_input;
    }
}

/// Adds one affine layer's weight/bias gradients and the input gradient.
fn accumulate_layer(
    params: &[f64],
    shape: &LayerShape,
    input: &[f64],
    d_out: &[f64],
    grad: &mut [f64],
    d_input: &mut [f64],
) {
    for (o, d) in d_out.iter().enumerate() {
        let row = shape.w_offset + o * shape.in_dim;
        grad[shape.b_offset + o] += d;
        for (i, x) in input.iter().enumerate() {
            grad[row + i] += d * x;
            d_input[i] += params[row + i] * d;
        }
    }
}

fn sample_dropout_masks(shapes: &Shapes, dropout: f64, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let keep_scale = 1.0 / (1.0 - dropout);
    shapes
        .trunk
        .iter()
        .map(|shape| {
            (0..shape.out_dim)
                .map(|_| {
                    if rng.gen::<f64>() < dropout {
                        0.0
                    } else {
                        keep_scale
                    }
                })
                .collect()
        })
        .collect()
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    steps: u64,
}

impl Adam {
    fn new(len: usize) -> Adam {
        Adam {
            m: vec![0.0; len],
            v: vec![0.0; len],
            steps: 0,
        }
    }

    fn step(&mut self, params: &mut [f32], grad: &[f64], learning_rate: f64) {
        self.steps += 1;
        let t = self.steps as i32;
        let c1 = 1.0 - ADAM_BETA1.powi(t);
        let c2 = 1.0 - ADAM_BETA2.powi(t);
        for (i, p) in params.iter_mut().enumerate() {
            let g = grad[i];
            self.m[i] = ADAM_BETA1 * self.m[i] + (1.0 - ADAM_BETA1) * g;
            self.v[i] = ADAM_BETA2 * self.v[i] + (1.0 - ADAM_BETA2) * g * g;
            let update = learning_rate * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + ADAM_EPSILON);
            *p = (f64::from(*p) - update) as f32;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::othello::{GameState, MoveId, Player};

    fn small_config(activation: Activation) -> NetworkConfig {
        NetworkConfig {
            board_size: 4,
            hidden_layers: vec![8, 6],
            activation,
            dropout_rate: 0.0,
        }
    }

    /// Training examples taken from a random 4×4 playout: one-hot policies
    /// on a legal move, alternating outcomes.
    fn playout_examples(count: usize, seed: u64) -> Vec<TrainingExample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        'outer: loop {
            let mut state = GameState::initial(4).unwrap();
            while !state.is_terminal() {
                let moves = state.legal_moves().unwrap();
                let mv = moves[rng.gen_range(0..moves.len())];
                let mut policy = vec![0.0; state.action_count()];
                policy[mv.index()] = 1.0;
                out.push(TrainingExample {
                    encoding: state.encode(),
                    policy,
                    outcome: if out.len() % 2 == 0 { 1.0 } else { -1.0 },
                });
                if out.len() == count {
                    break 'outer;
                }
                state = state.apply_move(mv).unwrap();
            }
        }
        out
    }

    #[test]
    fn fresh_model_is_uniform_and_zero_valued() {
        let model = Model::new(NetworkConfig::default_for(6), 3).unwrap();
        let state = GameState::initial(6).unwrap();
        let (policy, value) = model.predict(&state.encode()).unwrap();
        assert_eq!(value, 0.0);
        let legal = state.legal_moves().unwrap();
        let nonzero: Vec<usize> = policy
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 0.0)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(nonzero.len(), legal.len());
        for mv in legal {
            assert!((policy[mv.index()] - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn prediction_sums_to_one_and_masks() {
        let model = Model::with_init(NetworkConfig::default_for(4), 11, Init::FullRandom).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut state = GameState::initial(4).unwrap();
        while !state.is_terminal() {
            let (policy, value) = model.predict(&state.encode()).unwrap();
            let sum: f64 = policy.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
            assert!((-1.0..=1.0).contains(&value));
            let legal = state.legal_moves().unwrap();
            let nonzero = policy.iter().filter(|p| **p > 0.0).count();
            assert_eq!(nonzero, legal.len());
            let mv = legal[rng.gen_range(0..legal.len())];
            state = state.apply_move(mv).unwrap();
        }
    }

    #[test]
    fn predict_rejects_shape_mismatch() {
        let model = Model::new(NetworkConfig::default_for(6), 0).unwrap();
        let enc = GameState::initial(4).unwrap().encode();
        assert!(matches!(
            model.predict(&enc),
            Err(NetError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn predict_rejects_poisoned_parameters() {
        let mut model = Model::new(NetworkConfig::default_for(4), 0).unwrap();
        model.params[3] = f32::NAN;
        let enc = GameState::initial(4).unwrap().encode();
        assert!(matches!(
            model.predict(&enc),
            Err(NetError::NonFiniteParameters)
        ));
    }

    #[test]
    fn loss_unit_cases() {
        // Perfect prediction.
        let t = loss_terms(&[1.0, 0.0], 1.0, &[1.0, 0.0], 1.0);
        assert!(t.total.abs() < 1e-9);
        // Uniform against uniform: the entropy of the uniform distribution.
        let quarter = [0.25; 4];
        let t = loss_terms(&quarter, 0.0, &quarter, 0.0);
        assert!((t.policy - 4.0f64.ln()).abs() < 1e-9);
        // Value gap alone.
        let t = loss_terms(&[1.0], 1.0, &[1.0], 0.5);
        assert!((t.value - 0.25).abs() < 1e-15);
        // Exact decomposition, arbitrary inputs.
        let t = loss_terms(&[0.7, 0.3], -1.0, &[0.2, 0.8], 0.3);
        assert_eq!(t.total, t.policy + t.value);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut max_rel = 0.0f64;
        for trial in 0..6 {
            let activation = if trial % 2 == 0 { Activation::Tanh } else { Activation::Relu };
            let model =
                Model::with_init(small_config(activation), 100 + trial, Init::FullRandom).unwrap();
            let batch = playout_examples(4, 200 + trial);
            let analytic = model.gradient(&batch).unwrap();
            let params = model.flat_params();
            let h = 1e-5;
            for i in 0..params.len() {
                let mut plus = params.clone();
                plus[i] += h;
                let mut minus = params.clone();
                minus[i] -= h;
                let fd = (model.batch_loss_at(&plus, &batch).unwrap()
                    - model.batch_loss_at(&minus, &batch).unwrap())
                    / (2.0 * h);
                let denom = analytic[i].abs().max(fd.abs()).max(1e-4);
                max_rel = max_rel.max((analytic[i] - fd).abs() / denom);
            }
        }
        assert!(max_rel < 1e-4, "max relative error {max_rel}");
    }

    #[test]
    fn gradient_mean_semantics() {
        let model = Model::with_init(small_config(Activation::Relu), 7, Init::FullRandom).unwrap();
        let batch = playout_examples(1, 9);
        let single = model.gradient(&batch).unwrap();
        let doubled = model
            .gradient(&[batch[0].clone(), batch[0].clone()])
            .unwrap();
        for (a, b) in single.iter().zip(&doubled) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_params_give_symmetric_policy_gradient() {
        // With all parameters zero the softmax is uniform, so policy-head
        // gradient rows differ only through the targets; symmetric targets
        // produce equal rows.
        let config = small_config(Activation::Relu);
        let shapes = shapes_of(&config);
        let model = Model {
            config: config.clone(),
            params: vec![0.0; shapes.total],
            training_iteration: 0,
            rng_state: 0,
        };
        let state = GameState::initial(4).unwrap();
        let legal = state.legal_moves().unwrap();
        let mut policy = vec![0.0; state.action_count()];
        for mv in &legal {
            policy[mv.index()] = 1.0 / legal.len() as f64;
        }
        let batch = vec![TrainingExample {
            encoding: state.encode(),
            policy: policy.clone(),
            outcome: 0.0,
        }];
        let grad = model.gradient(&batch).unwrap();
        let biases: Vec<f64> = legal
            .iter()
            .map(|mv| grad[shapes.policy.b_offset + mv.index()])
            .collect();
        for b in &biases {
            assert!((b - biases[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn train_batch_partition_and_step_count() {
        let mut model = Model::new(small_config(Activation::Relu), 1).unwrap();
        let examples = playout_examples(100, 3);
        let report = model
            .train(
                &examples,
                &TrainOptions {
                    epochs: 1,
                    batch_size: 32,
                    learning_rate: 0.001,
                    dropout: 0.0,
                    seed: 4,
                },
            )
            .unwrap();
        assert_eq!(report.optimizer_steps, 4, "100/32 -> 4 batches");
        assert_eq!(report.epoch_losses.len(), 1);

        let mut model = Model::new(small_config(Activation::Relu), 1).unwrap();
        let few = playout_examples(5, 3);
        let report = model
            .train(
                &few,
                &TrainOptions {
                    epochs: 1,
                    batch_size: 64,
                    learning_rate: 0.001,
                    dropout: 0.0,
                    seed: 4,
                },
            )
            .unwrap();
        assert_eq!(report.optimizer_steps, 1, "one short batch, one step");
    }

    #[test]
    fn train_rejects_bad_inputs() {
        let mut model = Model::new(small_config(Activation::Relu), 1).unwrap();
        let opts = TrainOptions {
            epochs: 1,
            batch_size: 8,
            learning_rate: 0.005,
            dropout: 0.0,
            seed: 0,
        };
        assert!(matches!(
            model.train(&[], &opts),
            Err(NetError::EmptyTrainingSet)
        ));
        let examples = playout_examples(2, 1);
        assert!(model
            .train(&examples, &TrainOptions { epochs: 0, ..opts })
            .is_err());
        assert!(model
            .train(&examples, &TrainOptions { batch_size: 0, ..opts })
            .is_err());
        let mut bad = examples.clone();
        bad[0].policy[0] += 0.5;
        assert!(matches!(
            model.train(&bad, &opts),
            Err(NetError::InvalidExample { .. })
        ));
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let mut model = Model::with_init(small_config(Activation::Relu), 2, Init::FullRandom).unwrap();
        let before = model.params.clone();
        model
            .train(
                &playout_examples(6, 8),
                &TrainOptions {
                    epochs: 2,
                    batch_size: 3,
                    learning_rate: 0.0,
                    dropout: 0.2,
                    seed: 5,
                },
            )
            .unwrap();
        let same = before
            .iter()
            .zip(&model.params)
            .all(|(a, b)| a.to_bits() == b.to_bits());
        assert!(same, "parameters changed under zero learning rate");
    }

    #[test]
    fn train_is_deterministic_given_seed() {
        let examples = playout_examples(20, 12);
        let opts = TrainOptions {
            epochs: 3,
            batch_size: 8,
            learning_rate: 0.01,
            dropout: 0.3,
            seed: 77,
        };
        let mut a = Model::new(small_config(Activation::Relu), 6).unwrap();
        let mut b = Model::new(small_config(Activation::Relu), 6).unwrap();
        let ra = a.train(&examples, &opts).unwrap();
        let rb = b.train(&examples, &opts).unwrap();
        assert_eq!(a.digest(), b.digest());
        assert_eq!(ra.epoch_losses, rb.epoch_losses);
    }

    #[test]
    fn dropout_rate_does_not_affect_inference() {
        let mut low = Model::new(small_config(Activation::Relu), 9).unwrap();
        let mut high = low.clone();
        low.config.dropout_rate = 0.0;
        high.config.dropout_rate = 0.5;
        let enc = GameState::initial(4).unwrap().encode();
        let (pa, va) = low.predict(&enc).unwrap();
        let (pb, vb) = high.predict(&enc).unwrap();
        assert_eq!(va.to_bits(), vb.to_bits());
        assert_eq!(pa, pb);
    }

    #[test]
    fn overfit_probe_converges() {
        // Capability check: eight fixed examples must be memorized.
        let mut model = Model::new(NetworkConfig::default_for(4), 21).unwrap();
        let examples = playout_examples(8, 30);
        let report = model
            .train(
                &examples,
                &TrainOptions {
                    epochs: 200,
                    batch_size: 8,
                    learning_rate: 0.005,
                    dropout: 0.0,
                    seed: 13,
                },
            )
            .unwrap();
        let last = report.epoch_losses.last().unwrap();
        assert!(
            last.total() < 0.05,
            "did not converge: final loss {}",
            last.total()
        );
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let mut model = Model::with_init(NetworkConfig::default_for(6), 17, Init::FullRandom).unwrap();
        model
            .train(
                &{
                    let mut rng = ChaCha8Rng::seed_from_u64(3);
                    let state = GameState::initial(6).unwrap();
                    let legal = state.legal_moves().unwrap();
                    let mut policy = vec![0.0; state.action_count()];
                    policy[legal[rng.gen_range(0..legal.len())].index()] = 1.0;
                    vec![TrainingExample {
                        encoding: state.encode(),
                        policy,
                        outcome: 1.0,
                    }]
                },
                &TrainOptions {
                    epochs: 2,
                    batch_size: 1,
                    learning_rate: 0.01,
                    dropout: 0.0,
                    seed: 2,
                },
            )
            .unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        model.save(&path).unwrap();
        let loaded = Model::load(&path).unwrap();
        assert_eq!(loaded.training_iteration(), model.training_iteration());

        let enc = GameState::initial(6).unwrap().encode();
        let (pa, va) = model.predict(&enc).unwrap();
        let (pb, vb) = loaded.predict(&enc).unwrap();
        assert_eq!(va.to_bits(), vb.to_bits());
        let bits = |p: &[f64]| p.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&pa), bits(&pb));
    }

    #[test]
    fn checkpoint_rejects_bad_files() {
        let model = Model::new(NetworkConfig::default_for(4), 1).unwrap();
        let bytes = model.to_bytes();

        let mut wrong_magic = bytes.clone();
        wrong_magic[0] = b'X';
        assert!(matches!(
            Model::from_bytes(&wrong_magic),
            Err(NetError::BadMagic)
        ));

        let mut wrong_version = bytes.clone();
        wrong_version[4] = 9;
        assert!(matches!(
            Model::from_bytes(&wrong_version),
            Err(NetError::UnsupportedVersion(_))
        ));

        let truncated = &bytes[..bytes.len() - 3];
        assert!(matches!(
            Model::from_bytes(truncated),
            Err(NetError::CorruptCheckpoint(_))
        ));

        let mut trailing = bytes.clone();
        trailing.extend_from_slice(&[0, 0, 0, 0]);
        assert!(matches!(
            Model::from_bytes(&trailing),
            Err(NetError::CorruptCheckpoint(_))
        ));
    }

    #[test]
    fn checkpoint_rejects_action_count_mismatch() {
        let model = Model::new(NetworkConfig::default_for(4), 1).unwrap();
        let bytes = model.to_bytes();
        let header_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let header = String::from_utf8(bytes[12..12 + header_len].to_vec()).unwrap();
        let tampered_header = header.replace("action_count = 17", "action_count = 37");
        assert_ne!(header, tampered_header);
        let mut tampered = Vec::new();
        tampered.extend_from_slice(&bytes[..8]);
        tampered.extend_from_slice(&(tampered_header.len() as u32).to_le_bytes());
        tampered.extend_from_slice(tampered_header.as_bytes());
        tampered.extend_from_slice(&bytes[12 + header_len..]);
        assert!(matches!(
            Model::from_bytes(&tampered),
            Err(NetError::CorruptCheckpoint(_))
        ));
    }

    #[test]
    fn ply_moveid_symmetry_between_encoding_and_policy() {
        // A policy produced for a state lines up with that state's move
        // indices after masking.
        let model = Model::new(NetworkConfig::default_for(4), 2).unwrap();
        let mut cells = vec![None; 16];
        cells[0] = Some(Player::Black);
        cells[15] = Some(Player::White);
        let state = GameState::from_parts(4, cells, Player::Black, 0).unwrap();
        let (policy, _) = model.predict(&state.encode()).unwrap();
        assert_eq!(policy[MoveId::pass(4).index()], 1.0);
    }
}
