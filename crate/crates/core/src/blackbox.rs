//! Small tanh MLP mapping a policy to a landing point, trained with Adam.
//!
//! The network works in normalized coordinates: inputs are mapped from the
//! feasible box onto `[-1, 1]^2`, outputs are standardized with the training
//! labels' mean and std. Forward pass, Jacobian and backpropagation all account
//! for both affine maps, so callers only ever see radians and meters.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arm::{InterceptionPolicy, Sample};
use crate::artifact::{fmt_num, read_numeric_table, write_table_file};
use crate::error::{Error, Result};
use crate::optimizer::{FeasibleSet, LandingModel};

/// Layer widths from input to output.
pub const ARCHITECTURE: [usize; 6] = [2, 4, 4, 4, 4, 2];

/// Smallest output std used for standardization; flatter labels get unit scale.
const MIN_OUTPUT_STD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
}

/// Affine maps between physical and network coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub input_center: Vector2<f64>,
    pub input_half_width: Vector2<f64>,
    pub output_mean: Vector2<f64>,
    pub output_std: Vector2<f64>,
}

impl Normalization {
    pub fn identity() -> Self {
        Self {
            input_center: Vector2::zeros(),
            input_half_width: Vector2::repeat(1.0),
            output_mean: Vector2::zeros(),
            output_std: Vector2::repeat(1.0),
        }
    }

    /// Inputs scaled so `k` maps onto `[-1, 1]^2`; outputs standardized by `landings`.
    pub fn fit(k: &FeasibleSet, landings: &[Vector2<f64>]) -> Self {
        let n = landings.len().max(1) as f64;
        let mean = landings.iter().sum::<Vector2<f64>>() / n;
        let var = landings.iter().map(|r| (r - mean).component_mul(&(r - mean))).sum::<Vector2<f64>>() / n;
        let std = var.map(|v| if v.sqrt() > MIN_OUTPUT_STD { v.sqrt() } else { 1.0 });
        Self {
            input_center: k.center(),
            input_half_width: k.half_widths(),
            output_mean: mean,
            output_std: std,
        }
    }

    pub fn normalize_input(&self, phi: &InterceptionPolicy) -> Vector2<f64> {
        (phi.to_vector() - self.input_center).component_div(&self.input_half_width)
    }

    pub fn normalize_output(&self, r: &Vector2<f64>) -> Vector2<f64> {
        (r - self.output_mean).component_div(&self.output_std)
    }

    pub fn denormalize_output(&self, y: &Vector2<f64>) -> Vector2<f64> {
        self.output_mean + y.component_mul(&self.output_std)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub layers: Vec<Layer>,
    pub norm: Normalization,
}

fn layer_shapes() -> impl Iterator<Item = (usize, usize)> {
    ARCHITECTURE.windows(2).map(|w| (w[1], w[0]))
}

impl MlpModel {
    pub fn zeros(norm: Normalization) -> Self {
        let layers = layer_shapes()
            .map(|(rows, cols)| Layer {
                weights: DMatrix::zeros(rows, cols),
                bias: DVector::zeros(rows),
            })
            .collect();
        Self { layers, norm }
    }

    /// Weights and biases uniform in `+-1/sqrt(fan_in)`.
    pub fn random<R: Rng + ?Sized>(norm: Normalization, rng: &mut R) -> Self {
        let mut model = Self::zeros(norm);
        for layer in &mut model.layers {
            let bound = 1.0 / (layer.weights.ncols() as f64).sqrt();
            for w in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
                *w = rng.random_range(-bound..=bound);
            }
        }
        model
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let shapes_ok = self.layers.len() == ARCHITECTURE.len() - 1
            && self
                .layers
                .iter()
                .zip(layer_shapes())
                .all(|(l, (r, c))| l.weights.shape() == (r, c) && l.bias.len() == r);
        if !shapes_ok {
            return Err(Error::InvalidConfig(format!("model does not match architecture {ARCHITECTURE:?}")));
        }
        let n = &self.norm;
        let finite = self.layers.iter().all(|l| l.weights.iter().chain(l.bias.iter()).all(|x| x.is_finite()))
            && [n.input_center, n.input_half_width, n.output_mean, n.output_std].iter().all(|v| v.iter().all(|x| x.is_finite()));
        if !finite {
            return Err(Error::InvalidConfig("model parameters must be finite".into()));
        }
        if n.input_half_width.iter().chain(n.output_std.iter()).any(|&s| s <= 0.0) {
            return Err(Error::InvalidConfig("normalization scales must be > 0".into()));
        }
        Ok(())
    }

    /// Hidden activations (input first) and the normalized output.
    fn activations(&self, u: &Vector2<f64>) -> (Vec<DVector<f64>>, DVector<f64>) {
        let mut acts = vec![DVector::from_column_slice(u.as_slice())];
        let last = self.layers.len() - 1;
        for layer in &self.layers[..last] {
            let z = &layer.weights * acts.last().unwrap() + &layer.bias;
            acts.push(z.map(f64::tanh));
        }
        let out = &self.layers[last].weights * acts.last().unwrap() + &self.layers[last].bias;
        (acts, out)
    }

    pub fn forward(&self, phi: &InterceptionPolicy) -> Vector2<f64> {
        let (_, y) = self.activations(&self.norm.normalize_input(phi));
        self.norm.denormalize_output(&Vector2::new(y[0], y[1]))
    }

    /// `d forward / d phi`, exact chain rule through every layer.
    pub fn jacobian(&self, phi: &InterceptionPolicy) -> Matrix2<f64> {
        let (acts, _) = self.activations(&self.norm.normalize_input(phi));
        let last = self.layers.len() - 1;
        let mut j = self.layers[last].weights.clone();
        for l in (0..last).rev() {
            let a = &acts[l + 1];
            let d = a.map(|x| 1.0 - x * x);
            j = (j * DMatrix::from_diagonal(&d)) * &self.layers[l].weights;
        }
        let mut out = Matrix2::from_iterator(j.iter().copied());
        for r in 0..2 {
            for c in 0..2 {
                out[(r, c)] *= self.norm.output_std[r] / self.norm.input_half_width[c];
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ModelFile::from_model(self, None)).expect("model serializes")
    }

    pub fn save_json(&self, path: &Path, provenance: Option<&crate::artifact::Provenance>) -> Result<()> {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                fs::create_dir_all(dir)?;
            }
        }
        let text = serde_json::to_string_pretty(&ModelFile::from_model(self, provenance)).expect("model serializes");
        fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let file: ModelFile = serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        file.into_model().map_err(|e| Error::Format {
            path: path.display().to_string(),
            msg: e.to_string(),
        })
    }
}

pub fn mlp_forward(model: &MlpModel, phi: &InterceptionPolicy) -> Vector2<f64> {
    model.forward(phi)
}

pub fn mlp_jacobian(model: &MlpModel, phi: &InterceptionPolicy) -> Matrix2<f64> {
    model.jacobian(phi)
}

impl LandingModel for MlpModel {
    fn name(&self) -> &'static str {
        "blackbox"
    }

    fn predict(&self, phi: &InterceptionPolicy, _incoming: &[Sample]) -> Result<Vector2<f64>> {
        Ok(self.forward(phi))
    }

    fn jacobian(&self, phi: &InterceptionPolicy, _incoming: &[Sample]) -> Result<Matrix2<f64>> {
        Ok(MlpModel::jacobian(self, phi))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct LayerFile {
    /// Row-major: one inner array per output unit.
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    architecture: Vec<usize>,
    activation: String,
    input_center: [f64; 2],
    input_half_width: [f64; 2],
    output_mean: [f64; 2],
    output_std: [f64; 2],
    layers: Vec<LayerFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config_sha256: Option<String>,
}

impl ModelFile {
    fn from_model(m: &MlpModel, prov: Option<&crate::artifact::Provenance>) -> Self {
        let arr = |v: Vector2<f64>| [v.x, v.y];
        Self {
            architecture: ARCHITECTURE.to_vec(),
            activation: "tanh".into(),
            input_center: arr(m.norm.input_center),
            input_half_width: arr(m.norm.input_half_width),
            output_mean: arr(m.norm.output_mean),
            output_std: arr(m.norm.output_std),
            layers: m
                .layers
                .iter()
                .map(|l| LayerFile {
                    weights: l.weights.row_iter().map(|r| r.iter().copied().collect()).collect(),
                    bias: l.bias.iter().copied().collect(),
                })
                .collect(),
            seed: prov.map(|p| p.seed),
            config_sha256: prov.map(|p| p.config_sha256.clone()),
        }
    }

    fn into_model(self) -> Result<MlpModel> {
        if self.architecture != ARCHITECTURE {
            return Err(Error::InvalidConfig(format!("architecture {:?} is not {ARCHITECTURE:?}", self.architecture)));
        }
        if self.activation != "tanh" {
            return Err(Error::InvalidConfig(format!("unsupported activation {:?}", self.activation)));
        }
        let v = |a: [f64; 2]| Vector2::new(a[0], a[1]);
        let mut layers = Vec::new();
        for (l, (rows, cols)) in self.layers.into_iter().zip(layer_shapes()) {
            if l.weights.len() != rows || l.weights.iter().any(|r| r.len() != cols) || l.bias.len() != rows {
                return Err(Error::InvalidConfig(format!("layer shape mismatch, expected {rows}x{cols}")));
            }
            layers.push(Layer {
                weights: DMatrix::from_row_iterator(rows, cols, l.weights.into_iter().flatten()),
                bias: DVector::from_vec(l.bias),
            });
        }
        let model = MlpModel {
            layers,
            norm: Normalization {
                input_center: v(self.input_center),
                input_half_width: v(self.input_half_width),
                output_mean: v(self.output_mean),
                output_std: v(self.output_std),
            },
        };
        model.validate()?;
        Ok(model)
    }
}

/// One observed return.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Record {
    pub phi: InterceptionPolicy,
    pub landing: Vector2<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub records: Vec<Record>,
}

impl Dataset {
    pub const HEADER: [&'static str; 4] = ["theta1", "theta4", "land_x", "land_y"];

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn validate(&self, k: &FeasibleSet) -> Result<()> {
        for (i, r) in self.records.iter().enumerate() {
            if !k.contains(&r.phi) {
                return Err(Error::DegenerateDataset(format!("record {i}: policy outside the feasible set")));
            }
            if !(r.landing.iter().all(|x| x.is_finite()) && r.phi.theta1.is_finite() && r.phi.theta4.is_finite()) {
                return Err(Error::DegenerateDataset(format!("record {i}: non-finite value")));
            }
        }
        Ok(())
    }

    pub fn rows(&self) -> Vec<Vec<String>> {
        self.records
            .iter()
            .map(|r| [r.phi.theta1, r.phi.theta4, r.landing.x, r.landing.y].into_iter().map(fmt_num).collect())
            .collect()
    }

    pub fn write_csv(&self, path: &Path, comments: &[String]) -> Result<()> {
        write_table_file(path, comments, &Self::HEADER, &self.rows())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let table = read_numeric_table(path, &Self::HEADER)?;
        Ok(Self {
            records: table
                .rows
                .into_iter()
                .map(|r| Record {
                    phi: InterceptionPolicy::new(r[0], r[1]),
                    landing: Vector2::new(r[2], r[3]),
                })
                .collect(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps_adam: 1e-8,
            batch_size: 64,
            seed: 0,
            validation_fraction: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("train.{m}")));
        if self.epochs < 1 {
            return bad("epochs must be >= 1");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be > 0");
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return bad("beta1 and beta2 must lie in [0, 1)");
        }
        if !(self.eps_adam > 0.0) {
            return bad("eps_adam must be > 0");
        }
        if self.batch_size < 1 {
            return bad("batch_size must be >= 1");
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad("validation_fraction must lie in (0, 1)");
        }
        Ok(())
    }
}

/// Mean squared landing error per epoch [m^2], over the whole split.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct History {
    pub train_mse: Vec<f64>,
    /// Empty when there is no validation split.
    pub val_mse: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: MlpModel,
    pub history: History,
    pub train: Vec<Record>,
    pub validation: Vec<Record>,
}

/// Root-mean-square Euclidean landing error [m].
pub fn rmse(model: &MlpModel, records: &[Record]) -> f64 {
    mse(model, records).sqrt()
}

fn mse(model: &MlpModel, records: &[Record]) -> f64 {
    if records.is_empty() {
        return f64::NAN;
    }
    records.iter().map(|r| (model.forward(&r.phi) - r.landing).norm_squared()).sum::<f64>() / records.len() as f64
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [&mut f64], grads: &[f64], cfg: &TrainConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        for (i, p) in params.iter_mut().enumerate() {
            let g = grads[i];
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * g;
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            **p -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.eps_adam);
        }
    }
}

/// Gradient of `mean 1/2 |y - t|^2` in normalized output space over a batch,
/// flattened in `params_mut` order.
fn batch_gradient(model: &MlpModel, batch: &[Record]) -> Vec<f64> {
    let b = batch.len();
    let mut a = DMatrix::from_fn(2, b, |r, c| model.norm.normalize_input(&batch[c].phi)[r]);
    let targets = DMatrix::from_fn(2, b, |r, c| model.norm.normalize_output(&batch[c].landing)[r]);
    let last = model.layers.len() - 1;
    let mut acts = vec![a.clone()];
    for (l, layer) in model.layers.iter().enumerate() {
        let mut z = &layer.weights * &a;
        for mut col in z.column_iter_mut() {
            col += &layer.bias;
        }
        a = if l < last { z.map(f64::tanh) } else { z };
        acts.push(a.clone());
    }
    let mut delta = (acts[last + 1].clone() - targets) / b as f64;
    let mut grads: Vec<(DMatrix<f64>, DVector<f64>)> = Vec::with_capacity(model.layers.len());
    for l in (0..=last).rev() {
        let dw = &delta * acts[l].transpose();
        let db = delta.column_sum();
        if l > 0 {
            let back = model.layers[l].weights.transpose() * &delta;
            delta = back.zip_map(&acts[l], |g, x| g * (1.0 - x * x));
        }
        grads.push((dw, db));
    }
    grads.reverse();
    grads.into_iter().flat_map(|(w, b)| w.iter().copied().chain(b.iter().copied()).collect::<Vec<_>>()).collect()
}

fn params_mut(model: &mut MlpModel) -> Vec<&mut f64> {
    model.layers.iter_mut().flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut())).collect()
}

/// Adam on an already initialized model without any dataset checks.
///
/// Each epoch reshuffles `train` with `rng` and walks it in batches of
/// `cfg.batch_size` (the last one may be shorter).
pub fn fit<R: Rng + ?Sized>(model: &mut MlpModel, train: &[Record], validation: &[Record], cfg: &TrainConfig, rng: &mut R) -> History {
    let mut history = History::default();
    let mut adam = Adam::new(model.parameter_count());
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut batch = Vec::with_capacity(cfg.batch_size);
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| train[i]));
            let g = batch_gradient(model, &batch);
            adam.step(&mut params_mut(model), &g, cfg);
        }
        history.train_mse.push(mse(model, train));
        if !validation.is_empty() {
            history.val_mse.push(mse(model, validation));
        }
    }
    history
}

/// Splits, normalizes, initializes and fits a model on `dataset`.
///
/// Input normalization maps `k` onto `[-1, 1]^2`. Everything random (init,
/// split, batch order) is drawn from one generator seeded with `cfg.seed`.
pub fn train(dataset: &Dataset, k: &FeasibleSet, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    k.validate()?;
    if dataset.len() < 10 {
        return Err(Error::DegenerateDataset(format!("need at least 10 records, got {}", dataset.len())));
    }
    dataset.validate(k)?;
    let first = dataset.records[0].phi;
    if dataset.records.iter().all(|r| r.phi == first) {
        return Err(Error::DegenerateDataset("all policies are identical".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut idx: Vec<usize> = (0..dataset.len()).collect();
    idx.shuffle(&mut rng);
    let n_val = ((cfg.validation_fraction * dataset.len() as f64).round() as usize).clamp(1, dataset.len() - 1);
    let validation: Vec<Record> = idx[..n_val].iter().map(|&i| dataset.records[i]).collect();
    let train_set: Vec<Record> = idx[n_val..].iter().map(|&i| dataset.records[i]).collect();
    let landings: Vec<Vector2<f64>> = train_set.iter().map(|r| r.landing).collect();
    let mut model = MlpModel::random(Normalization::fit(k, &landings), &mut rng);
    let history = fit(&mut model, &train_set, &validation, cfg, &mut rng);
    Ok(TrainOutcome {
        model,
        history,
        train: train_set,
        validation,
    })
}
