//! Task-specific linear projection of concatenated name and definition
//! embeddings, trained with a margin contrastive loss and stratified
//! hard-negative sampling.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binfmt::{self, PROJECTION_MAGIC};
use crate::corpus::{LabeledPair, PairLabel};
use crate::embeddings::EmbeddingMatrix;
use crate::metrics::{roc_auc, ScoredPair};
use crate::{Error, Result};

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Relative batch shares of positives and the three negative classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingRatio {
    pub positives: u32,
    pub hard: u32,
    pub semi_hard: u32,
    pub easy: u32,
}

impl Default for SamplingRatio {
    fn default() -> Self {
        SamplingRatio {
            positives: 1,
            hard: 1,
            semi_hard: 1,
            easy: 1,
        }
    }
}

impl SamplingRatio {
    fn as_array(&self) -> [u32; 4] {
        [self.positives, self.hard, self.semi_hard, self.easy]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub margin: f64,
    pub delta: f64,
    pub output_dim: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub step_size: f64,
    pub sampling_ratio: SamplingRatio,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            margin: 0.2,
            delta: 0.05,
            output_dim: 32,
            epochs: 30,
            batch_size: 64,
            step_size: 1e-3,
            sampling_ratio: SamplingRatio::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(-1.0..=1.0).contains(&self.margin) {
            return Err(Error::Config(format!("margin {} outside [-1, 1]", self.margin)));
        }
        if !(self.delta >= 0.0) || !self.delta.is_finite() {
            return Err(Error::Config(format!("delta {} must be >= 0", self.delta)));
        }
        if self.output_dim < 2 {
            return Err(Error::Config("output_dim must be at least 2".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size < 2 {
            return Err(Error::Config("batch_size must be at least 2".into()));
        }
        if !(self.step_size > 0.0) || !self.step_size.is_finite() {
            return Err(Error::Config("step_size must be positive".into()));
        }
        if self.sampling_ratio.as_array().iter().all(|&r| r == 0) {
            return Err(Error::Config("sampling_ratio is all zeros".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativeClass {
    Hard,
    SemiHard,
    Easy,
}

/// Hard above the margin, semi-hard within `delta` below it, easy otherwise.
pub fn classify_negative(cos: f64, margin: f64, delta: f64) -> NegativeClass {
    if cos > margin {
        NegativeClass::Hard
    } else if cos > margin - delta {
        NegativeClass::SemiHard
    } else {
        NegativeClass::Easy
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Domain(format!(
            "cosine of vectors with lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Domain("cosine of a zero-norm vector".into()));
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// `1 - cos` for similar pairs, `max(0, cos - margin)` for dissimilar ones.
pub fn contrastive_loss(x1: &[f64], x2: &[f64], label: PairLabel, margin: f64) -> Result<f64> {
    let c = cosine(x1, x2)?;
    Ok(loss_from_cosine(c, label, margin))
}

fn loss_from_cosine(c: f64, label: PairLabel, margin: f64) -> f64 {
    match label {
        PairLabel::Similar => 1.0 - c,
        PairLabel::Dissimilar => (c - margin).max(0.0),
    }
}

/// Integer shares of `total` proportional to `weights`, largest remainder
/// first, ties to the lower index.
fn apportion(total: usize, weights: &[u32]) -> Vec<usize> {
    let sum: u64 = weights.iter().map(|&w| w as u64).sum();
    if sum == 0 {
        return vec![0; weights.len()];
    }
    let mut shares: Vec<usize> = weights
        .iter()
        .map(|&w| (total as u64 * w as u64 / sum) as usize)
        .collect();
    let mut left = total - shares.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = total as u64 * weights[a] as u64 % sum;
        let rb = total as u64 * weights[b] as u64 % sum;
        rb.cmp(&ra).then(a.cmp(&b))
    });
    for i in order {
        if left == 0 {
            break;
        }
        if weights[i] > 0 {
            shares[i] += 1;
            left -= 1;
        }
    }
    shares
}

/// Per-class batch quotas in the order positives, hard, semi-hard, easy.
///
/// A missing negative class hands its quota to the present negative classes
/// in proportion to their ratio, or to the positives if none can take it.
pub fn batch_quotas(ratio: &SamplingRatio, batch_size: usize, available: [bool; 4]) -> Result<[usize; 4]> {
    if !available[0] {
        return Err(Error::Config("no positive pairs to sample from".into()));
    }
    let weights = ratio.as_array();
    if weights.iter().all(|&w| w == 0) {
        return Err(Error::Config("sampling_ratio is all zeros".into()));
    }
    let base = apportion(batch_size, &weights);
    let mut quotas = [base[0], base[1], base[2], base[3]];
    let mut freed = 0;
    for c in 1..4 {
        if !available[c] {
            freed += quotas[c];
            quotas[c] = 0;
        }
    }
    if freed > 0 {
        let recipients: Vec<u32> = (1..4)
            .map(|c| if available[c] { weights[c] } else { 0 })
            .collect();
        if recipients.iter().any(|&w| w > 0) {
            for (c, extra) in apportion(freed, &recipients).into_iter().enumerate() {
                quotas[c + 1] += extra;
            }
        } else {
            quotas[0] += freed;
        }
    }
    Ok(quotas)
}

/// Pair indices grouped by class under the current cosines.
#[derive(Debug, Clone, Default)]
struct Pools {
    classes: [Vec<usize>; 4],
}

impl Pools {
    fn build(pairs: &[LabeledPair], cosines: &[f64], margin: f64, delta: f64) -> Self {
        let mut pools = Pools::default();
        for (i, (p, &c)) in pairs.iter().zip(cosines).enumerate() {
            let class = match p.label {
                PairLabel::Similar => 0,
                PairLabel::Dissimilar => match classify_negative(c, margin, delta) {
                    NegativeClass::Hard => 1,
                    NegativeClass::SemiHard => 2,
                    NegativeClass::Easy => 3,
                },
            };
            pools.classes[class].push(i);
        }
        pools
    }

    fn draw(&self, ratio: &SamplingRatio, batch_size: usize, rng: &mut impl Rng) -> Result<Vec<usize>> {
        let available = [0, 1, 2, 3].map(|c| !self.classes[c].is_empty());
        let quotas = batch_quotas(ratio, batch_size, available)?;
        let mut out = Vec::with_capacity(batch_size);
        for (pool, &q) in self.classes.iter().zip(&quotas) {
            for _ in 0..q {
                out.push(pool[rng.random_range(0..pool.len())]);
            }
        }
        Ok(out)
    }
}

/// Draws one training batch: quotas per class, uniform with replacement
/// within a class. `cosines[i]` is the current similarity of `pairs[i]`.
pub fn sample_batch(
    pairs: &[LabeledPair],
    cosines: &[f64],
    cfg: &TrainConfig,
    rng: &mut impl Rng,
) -> Result<Vec<LabeledPair>> {
    if pairs.len() != cosines.len() {
        return Err(Error::Parameter("one cosine per pair is required".into()));
    }
    let pools = Pools::build(pairs, cosines, cfg.margin, cfg.delta);
    Ok(pools
        .draw(&cfg.sampling_ratio, cfg.batch_size, rng)?
        .into_iter()
        .map(|i| pairs[i])
        .collect())
}

/// A single linear layer `weights · x + bias`, weights stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionModel {
    input_dim: usize,
    output_dim: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

/// Gradient with respect to a model's weights and bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Gradient {
    fn zeros(model: &ProjectionModel) -> Self {
        Gradient {
            weights: vec![0.0; model.weights.len()],
            bias: vec![0.0; model.bias.len()],
        }
    }

    fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.bias).all(|v| v.is_finite())
    }
}

impl ProjectionModel {
    pub fn new(input_dim: usize, output_dim: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if output_dim < 2 || input_dim == 0 {
            return Err(Error::Domain(format!(
                "projection {input_dim} -> {output_dim} is degenerate"
            )));
        }
        if weights.len() != input_dim * output_dim || bias.len() != output_dim {
            return Err(Error::Domain("weight or bias length does not match dimensions".into()));
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::Domain("projection parameters must be finite".into()));
        }
        Ok(Self {
            input_dim,
            output_dim,
            weights,
            bias,
        })
    }

    /// Glorot-uniform weights, zero bias.
    pub fn random(input_dim: usize, output_dim: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = (6.0 / (input_dim + output_dim) as f64).sqrt();
        let weights = (0..input_dim * output_dim)
            .map(|_| rng.random_range(-a..a))
            .collect();
        Self::new(input_dim, output_dim, weights, vec![0.0; output_dim])
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    /// Applies the layer to an already concatenated input.
    pub fn apply(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_dim {
            return Err(Error::Domain(format!(
                "input has length {}, model expects {}",
                input.len(),
                self.input_dim
            )));
        }
        Ok(self.apply_unchecked(input))
    }

    fn apply_unchecked(&self, input: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.input_dim)
            .zip(&self.bias)
            .map(|(row, b)| dot(row, input) + b)
            .collect()
    }

    /// Projects a construct from its two field embeddings.
    pub fn project(&self, name_vec: &[f64], def_vec: &[f64]) -> Result<Vec<f64>> {
        if name_vec.len() + def_vec.len() != self.input_dim {
            return Err(Error::Domain(format!(
                "name ({}) plus definition ({}) length does not match input_dim {}",
                name_vec.len(),
                def_vec.len(),
                self.input_dim
            )));
        }
        let input: Vec<f64> = name_vec.iter().chain(def_vec).copied().collect();
        Ok(self.apply_unchecked(&input))
    }

    pub fn project_all(&self, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        inputs.iter().map(|x| self.apply(x)).collect()
    }

    /// Loss of one pair and its gradient with respect to the parameters.
    pub fn pair_loss_and_gradient(
        &self,
        x1: &[f64],
        x2: &[f64],
        label: PairLabel,
        margin: f64,
    ) -> Result<(f64, Gradient)> {
        let mut grad = Gradient::zeros(self);
        let z1 = self.apply(x1)?;
        let z2 = self.apply(x2)?;
        let loss = self.accumulate_pair(x1, x2, &z1, &z2, label, margin, 1.0, &mut grad)?;
        Ok((loss, grad))
    }

    /// Adds `scale * dL/dθ` for one pair into `grad` and returns the loss.
    #[allow(clippy::too_many_arguments)]
    fn accumulate_pair(
        &self,
        x1: &[f64],
        x2: &[f64],
        z1: &[f64],
        z2: &[f64],
        label: PairLabel,
        margin: f64,
        scale: f64,
        grad: &mut Gradient,
    ) -> Result<f64> {
        let (n1, n2) = (norm(z1), norm(z2));
        if n1 == 0.0 || n2 == 0.0 {
            return Err(Error::Domain("projected vector has zero norm".into()));
        }
        let c = dot(z1, z2) / (n1 * n2);
        let loss = loss_from_cosine(c, label, margin);
        let dl_dc = match label {
            PairLabel::Similar => -1.0,
            PairLabel::Dissimilar if c > margin => 1.0,
            PairLabel::Dissimilar => 0.0,
        };
        if dl_dc == 0.0 {
            return Ok(loss);
        }
        let s = dl_dc * scale;
        let inv = 1.0 / (n1 * n2);
        let d = self.input_dim;
        for r in 0..self.output_dim {
            // dc/dz1 = z2/(|z1||z2|) - c z1/|z1|^2, symmetric for z2.
            let g1 = s * (z2[r] * inv - c * z1[r] / (n1 * n1));
            let g2 = s * (z1[r] * inv - c * z2[r] / (n2 * n2));
            grad.bias[r] += g1 + g2;
            let row = &mut grad.weights[r * d..(r + 1) * d];
            for ((w, a), b) in row.iter_mut().zip(x1).zip(x2) {
                *w += g1 * a + g2 * b;
            }
        }
        Ok(loss)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    input_dim: usize,
    output_dim: usize,
}

pub fn encode_model(model: &ProjectionModel) -> Vec<u8> {
    let mut payload = Vec::with_capacity((model.weights.len() + model.bias.len()) * 8);
    for v in model.weights.iter().chain(&model.bias) {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    let header = ModelHeader {
        input_dim: model.input_dim,
        output_dim: model.output_dim,
    };
    binfmt::encode(PROJECTION_MAGIC, &header, &payload)
}

pub fn decode_model(bytes: &[u8]) -> Result<ProjectionModel> {
    let (h, payload): (ModelHeader, _) = binfmt::decode(PROJECTION_MAGIC, bytes)?;
    let n_weights = h.input_dim * h.output_dim;
    binfmt::expect_payload(payload, (n_weights + h.output_dim) * 8)?;
    let mut values = binfmt::f64_le(payload);
    let bias = values.split_off(n_weights);
    ProjectionModel::new(h.input_dim, h.output_dim, values, bias)
}

pub fn write_model(model: &ProjectionModel, path: impl AsRef<Path>) -> Result<()> {
    binfmt::write_file(path.as_ref(), &encode_model(model))
}

pub fn read_model(path: impl AsRef<Path>) -> Result<ProjectionModel> {
    let path = path.as_ref();
    decode_model(&binfmt::read_file(path)?).map_err(|e| e.context(path.display().to_string()))
}

/// Concatenated f64 inputs, one per construct row of the two matrices.
pub fn concat_inputs(name_emb: &EmbeddingMatrix, def_emb: &EmbeddingMatrix) -> Result<Vec<Vec<f64>>> {
    if name_emb.ids() != def_emb.ids() {
        return Err(Error::Domain(
            "name and definition embeddings cover different ids".into(),
        ));
    }
    Ok((0..name_emb.len())
        .map(|i| {
            name_emb
                .row(i)
                .iter()
                .chain(def_emb.row(i))
                .map(|&v| v as f64)
                .collect()
        })
        .collect())
}

/// Mean batch loss of every epoch, in order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub epoch_loss: Vec<f64>,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(len: usize) -> Self {
        Adam {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.t);
        let c2 = 1.0 - ADAM_BETA2.powi(self.t);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
        }
    }
}

/// Trains on pairs whose positions index rows of the two matrices.
pub fn train(
    name_emb: &EmbeddingMatrix,
    def_emb: &EmbeddingMatrix,
    pairs: &[LabeledPair],
    cfg: &TrainConfig,
) -> Result<ProjectionModel> {
    let inputs = concat_inputs(name_emb, def_emb)?;
    Ok(train_on_inputs(&inputs, pairs, cfg)?.0)
}

/// Trains on precomputed concatenated inputs; pair positions index `inputs`.
pub fn train_on_inputs(
    inputs: &[Vec<f64>],
    pairs: &[LabeledPair],
    cfg: &TrainConfig,
) -> Result<(ProjectionModel, TrainLog)> {
    cfg.validate()?;
    let input_dim = inputs
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::Parameter("no training inputs".into()))?;
    if inputs.iter().any(|x| x.len() != input_dim) {
        return Err(Error::Domain("training inputs differ in length".into()));
    }
    if let Some(p) = pairs.iter().find(|p| p.a >= inputs.len() || p.b >= inputs.len()) {
        return Err(Error::Parameter(format!(
            "pair ({}, {}) outside {} inputs",
            p.a,
            p.b,
            inputs.len()
        )));
    }
    if !pairs.iter().any(|p| p.label.is_similar()) {
        return Err(Error::Config("no positive pairs to train on".into()));
    }

    let mut model = ProjectionModel::random(input_dim, cfg.output_dim, cfg.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x9E37_79B9_7F4A_7C15));
    let mut adam_w = Adam::new(model.weights.len());
    let mut adam_b = Adam::new(model.bias.len());
    let batches = pairs.len().div_ceil(cfg.batch_size);
    let mut log = TrainLog::default();

    for epoch in 0..cfg.epochs {
        let projected = model.project_all(inputs)?;
        let mut cosines = Vec::with_capacity(pairs.len());
        for p in pairs {
            let c = cosine(&projected[p.a], &projected[p.b]).map_err(|e| Error::Training {
                epoch,
                batch: 0,
                message: e.to_string(),
            })?;
            cosines.push(c);
        }
        let pools = Pools::build(pairs, &cosines, cfg.margin, cfg.delta);

        let mut epoch_loss = 0.0;
        for batch in 0..batches {
            let picked = pools.draw(&cfg.sampling_ratio, cfg.batch_size, &mut rng)?;
            let scale = 1.0 / picked.len() as f64;
            let mut grad = Gradient::zeros(&model);
            let mut batch_loss = 0.0;
            for &i in &picked {
                let p = pairs[i];
                let (x1, x2) = (&inputs[p.a], &inputs[p.b]);
                let z1 = model.apply_unchecked(x1);
                let z2 = model.apply_unchecked(x2);
                batch_loss += scale
                    * model
                        .accumulate_pair(x1, x2, &z1, &z2, p.label, cfg.margin, scale, &mut grad)
                        .map_err(|e| Error::Training {
                            epoch,
                            batch,
                            message: e.to_string(),
                        })?;
            }
            if !batch_loss.is_finite() || !grad.is_finite() {
                return Err(Error::Training {
                    epoch,
                    batch,
                    message: "non-finite loss or gradient".into(),
                });
            }
            adam_w.step(&mut model.weights, &grad.weights, cfg.step_size);
            adam_b.step(&mut model.bias, &grad.bias, cfg.step_size);
            epoch_loss += batch_loss;
        }
        log.epoch_loss.push(epoch_loss / batches.max(1) as f64);
    }
    Ok((model, log))
}

/// Scores pairs by normalized projected similarity `(cos + 1) / 2`.
pub fn score_pairs(projected: &[Vec<f64>], pairs: &[LabeledPair]) -> Result<Vec<ScoredPair>> {
    pairs
        .iter()
        .map(|&pair| {
            let c = cosine(&projected[pair.a], &projected[pair.b])?;
            Ok(ScoredPair {
                pair,
                score: (c + 1.0) / 2.0,
            })
        })
        .collect()
}

/// Value lists spanned by a hyperparameter grid search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub output_dims: Vec<usize>,
    pub margins: Vec<f64>,
    pub deltas: Vec<f64>,
    pub epochs: Vec<usize>,
}

impl GridSpec {
    pub fn cells(&self, base: &TrainConfig) -> Vec<TrainConfig> {
        let mut out = Vec::new();
        for &output_dim in &self.output_dims {
            for &margin in &self.margins {
                for &delta in &self.deltas {
                    for &epochs in &self.epochs {
                        out.push(TrainConfig {
                            output_dim,
                            margin,
                            delta,
                            epochs,
                            ..base.clone()
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub config: TrainConfig,
    pub mean_auc: f64,
    pub std_auc: f64,
    pub aucs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub best: TrainConfig,
    pub cells: Vec<CellResult>,
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// The cell with the highest mean AUC; ties prefer smaller output_dim, then
/// smaller margin, then fewer epochs, then grid order.
pub fn select_best(cells: &[CellResult]) -> &CellResult {
    cells
        .iter()
        .min_by(|a, b| {
            b.mean_auc
                .total_cmp(&a.mean_auc)
                .then(a.config.output_dim.cmp(&b.config.output_dim))
                .then(a.config.margin.total_cmp(&b.config.margin))
                .then(a.config.epochs.cmp(&b.config.epochs))
        })
        .expect("non-empty grid")
}

/// Trains every grid cell `repeats` times (seeds `base.seed + r`) and picks
/// the cell with the best mean validation ROC-AUC. Ties prefer smaller
/// output_dim, then smaller margin, then fewer epochs.
pub fn grid_search(
    inputs: &[Vec<f64>],
    train_pairs: &[LabeledPair],
    val_pairs: &[LabeledPair],
    grid: &GridSpec,
    base: &TrainConfig,
    repeats: usize,
) -> Result<GridSearchResult> {
    let cells = grid.cells(base);
    if cells.is_empty() {
        return Err(Error::Config("empty hyperparameter grid".into()));
    }
    if repeats == 0 {
        return Err(Error::Config("repeats must be at least 1".into()));
    }
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..repeats).map(move |r| (c, r)))
        .collect();
    let aucs: Vec<f64> = jobs
        .par_iter()
        .map(|&(c, r)| {
            let cfg = TrainConfig {
                seed: base.seed.wrapping_add(r as u64),
                ..cells[c].clone()
            };
            let cell_context = || {
                format!(
                    "grid cell p={} m={} delta={} epochs={} repeat {r}",
                    cfg.output_dim, cfg.margin, cfg.delta, cfg.epochs
                )
            };
            let (model, _) = train_on_inputs(inputs, train_pairs, &cfg).map_err(|e| e.context(cell_context()))?;
            let projected = model.project_all(inputs)?;
            let scored = score_pairs(&projected, val_pairs)?;
            roc_auc(&scored).map_err(|e| e.context(cell_context()))
        })
        .collect::<Result<_>>()?;

    let results: Vec<CellResult> = cells
        .into_iter()
        .enumerate()
        .map(|(c, config)| {
            let cell_aucs = aucs[c * repeats..(c + 1) * repeats].to_vec();
            let (mean_auc, std_auc) = mean_std(&cell_aucs);
            CellResult {
                config,
                mean_auc,
                std_auc,
                aucs: cell_aucs,
            }
        })
        .collect();

    let best = select_best(&results).config.clone();
    Ok(GridSearchResult { best, cells: results })
}
