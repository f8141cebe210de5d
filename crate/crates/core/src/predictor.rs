//! One-step-ahead concentration forecaster.
//!
//! A 5-input, single-hidden-layer tanh network with a linear output, trained
//! by mini-batch gradient descent on z-scored features and targets.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

pub const INPUTS: usize = 5;
pub const DEFAULT_HIDDEN: usize = 10;
pub const MIN_TRAINING_SAMPLES: usize = 50;

const FILE_MAGIC: &str = "airsim-forecaster";
const FILE_VERSION: u32 = 1;
const FD_STEP: f64 = 1e-5;

#[derive(Debug, Error)]
pub enum PredictorError {
    #[error("parameter dimensions inconsistent: {0}")]
    Dimension(String),
    #[error("dataset has {0} samples, at least {MIN_TRAINING_SAMPLES} required")]
    TooSmall(usize),
    #[error("sample {index} is not finite")]
    NonFiniteSample { index: usize },
    #[error("training diverged at epoch {epoch}: loss = {loss} (last finite loss {last_finite})")]
    Diverged { epoch: usize, loss: f64, last_finite: f64 },
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("parameter file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("parameter file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictorInput {
    /// µg/m³
    pub aggregated_concentration: f64,
    pub wind_speed: f64,
    pub humidity: f64,
    pub temperature: f64,
    pub rainfall: f64,
}

impl PredictorInput {
    pub fn features(&self) -> [f64; INPUTS] {
        [self.aggregated_concentration, self.wind_speed, self.humidity, self.temperature, self.rainfall]
    }
}

/// Weights, biases and z-score constants of a trained forecaster.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParameters {
    pub hidden: usize,
    /// `hidden × INPUTS`, row-major.
    pub hidden_weights: Vec<f64>,
    pub hidden_biases: Vec<f64>,
    pub output_weights: Vec<f64>,
    pub output_bias: f64,
    pub input_mean: [f64; INPUTS],
    pub input_std: [f64; INPUTS],
    pub output_mean: f64,
    pub output_std: f64,
}

impl NetworkParameters {
    /// All weights zero, identity normalization.
    pub fn zeros(hidden: usize) -> Self {
        NetworkParameters {
            hidden,
            hidden_weights: vec![0.0; hidden * INPUTS],
            hidden_biases: vec![0.0; hidden],
            output_weights: vec![0.0; hidden],
            output_bias: 0.0,
            input_mean: [0.0; INPUTS],
            input_std: [1.0; INPUTS],
            output_mean: 0.0,
            output_std: 1.0,
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn random(hidden: usize, rng: &mut impl Rng) -> Self {
        let mut p = Self::zeros(hidden);
        let a1 = (6.0 / (INPUTS + hidden) as f64).sqrt();
        let a2 = (6.0 / (hidden + 1) as f64).sqrt();
        p.hidden_weights.iter_mut().for_each(|w| *w = rng.random_range(-a1..a1));
        p.output_weights.iter_mut().for_each(|w| *w = rng.random_range(-a2..a2));
        p
    }

    pub fn validate(&self) -> Result<(), PredictorError> {
        let h = self.hidden;
        if h == 0 {
            return Err(PredictorError::Dimension("hidden layer is empty".into()));
        }
        for (name, len, want) in [
            ("hidden_weights", self.hidden_weights.len(), h * INPUTS),
            ("hidden_biases", self.hidden_biases.len(), h),
            ("output_weights", self.output_weights.len(), h),
        ] {
            if len != want {
                return Err(PredictorError::Dimension(format!("{name} has {len} entries, expected {want}")));
            }
        }
        if self.input_std.iter().chain([&self.output_std]).any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(PredictorError::Dimension("normalization std must be > 0".into()));
        }
        Ok(())
    }

    pub fn parameter_count(&self) -> usize {
        self.hidden * (INPUTS + 2) + 1
    }

    fn param_mut(&mut self, i: usize) -> &mut f64 {
        let (w1, b1, w2) = (self.hidden_weights.len(), self.hidden, self.hidden);
        if i < w1 {
            &mut self.hidden_weights[i]
        } else if i < w1 + b1 {
            &mut self.hidden_biases[i - w1]
        } else if i < w1 + b1 + w2 {
            &mut self.output_weights[i - w1 - b1]
        } else {
            &mut self.output_bias
        }
    }

    fn normalize(&self, input: &PredictorInput) -> [f64; INPUTS] {
        let f = input.features();
        std::array::from_fn(|k| (f[k] - self.input_mean[k]) / self.input_std[k])
    }

    /// Raw output on the normalized scale, plus hidden activations.
    fn forward(&self, x: &[f64; INPUTS], hidden: &mut [f64]) -> f64 {
        let mut out = self.output_bias;
        for (j, h) in hidden.iter_mut().enumerate() {
            let row = &self.hidden_weights[j * INPUTS..(j + 1) * INPUTS];
            let z = self.hidden_biases[j] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
            *h = z.tanh();
            out += self.output_weights[j] * *h;
        }
        out
    }

    /// Half squared error on the normalized scale and its gradient, accumulated into `grad`.
    fn loss_and_grad(&self, x: &[f64; INPUTS], target: f64, hidden: &mut [f64], grad: &mut Gradient) -> f64 {
        let y = self.forward(x, hidden);
        let d = y - target;
        grad.output_bias += d;
        for (j, &h) in hidden.iter().enumerate() {
            grad.output_weights[j] += d * h;
            let dz = d * self.output_weights[j] * (1.0 - h * h);
            grad.hidden_biases[j] += dz;
            for (g, v) in grad.hidden_weights[j * INPUTS..(j + 1) * INPUTS].iter_mut().zip(x) {
                *g += dz * v;
            }
        }
        0.5 * d * d
    }

    fn normalized_loss(&self, x: &[f64; INPUTS], target: f64) -> f64 {
        let mut hidden = vec![0.0; self.hidden];
        let d = self.forward(x, &mut hidden) - target;
        0.5 * d * d
    }

    pub fn to_text(&self) -> String {
        fn line(out: &mut String, key: &str, values: &[f64]) {
            out.push_str(key);
            for v in values {
                write!(out, " {v}").unwrap();
            }
            out.push('\n');
        }
        let mut out = format!("{FILE_MAGIC} {FILE_VERSION}\ntopology {INPUTS} {} 1\n", self.hidden);
        line(&mut out, "hidden_weights", &self.hidden_weights);
        line(&mut out, "hidden_biases", &self.hidden_biases);
        line(&mut out, "output_weights", &self.output_weights);
        line(&mut out, "output_bias", &[self.output_bias]);
        line(&mut out, "input_mean", &self.input_mean);
        line(&mut out, "input_std", &self.input_std);
        line(&mut out, "output_mean", &[self.output_mean]);
        line(&mut out, "output_std", &[self.output_std]);
        out
    }

    pub fn from_text(text: &str) -> Result<Self, PredictorError> {
        let err = |line: usize, message: String| PredictorError::Parse { line, message };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());

        let (n, magic) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
        let mut head = magic.split_whitespace();
        if head.next() != Some(FILE_MAGIC) {
            return Err(err(n + 1, format!("expected `{FILE_MAGIC}` header")));
        }
        match head.next().map(str::parse::<u32>) {
            Some(Ok(FILE_VERSION)) => {}
            other => return Err(err(n + 1, format!("unsupported version {other:?}"))),
        }

        let mut next_row = |key: &str| -> Result<(usize, Vec<f64>), PredictorError> {
            let (n, l) = lines.next().ok_or_else(|| err(0, format!("missing `{key}` line")))?;
            let mut parts = l.split_whitespace();
            if parts.next() != Some(key) {
                return Err(err(n + 1, format!("expected `{key}`")));
            }
            let values = parts
                .map(|v| v.parse::<f64>().map_err(|_| err(n + 1, format!("`{v}` is not a number"))))
                .collect::<Result<Vec<_>, _>>()?;
            Ok((n + 1, values))
        };

        let (n, topo) = next_row("topology")?;
        if topo.len() != 3 || topo[0] != INPUTS as f64 || topo[2] != 1.0 || topo[1] < 1.0 || topo[1].fract() != 0.0 {
            return Err(err(n, format!("topology must be `{INPUTS} <hidden> 1`")));
        }
        let hidden = topo[1] as usize;
        let mut exact = |key: &str, len: usize| -> Result<Vec<f64>, PredictorError> {
            let (n, v) = next_row(key)?;
            if v.len() != len {
                return Err(err(n, format!("`{key}` has {} values, expected {len}", v.len())));
            }
            Ok(v)
        };
        let params = NetworkParameters {
            hidden,
            hidden_weights: exact("hidden_weights", hidden * INPUTS)?,
            hidden_biases: exact("hidden_biases", hidden)?,
            output_weights: exact("output_weights", hidden)?,
            output_bias: exact("output_bias", 1)?[0],
            input_mean: exact("input_mean", INPUTS)?.try_into().unwrap(),
            input_std: exact("input_std", INPUTS)?.try_into().unwrap(),
            output_mean: exact("output_mean", 1)?[0],
            output_std: exact("output_std", 1)?[0],
        };
        params.validate()?;
        Ok(params)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), PredictorError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text())
            .map_err(|source| PredictorError::Io { path: path.display().to_string(), source })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PredictorError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| PredictorError::Io { path: path.display().to_string(), source })?;
        Self::from_text(&text)
    }
}

#[derive(Debug, Clone)]
struct Gradient {
    hidden_weights: Vec<f64>,
    hidden_biases: Vec<f64>,
    output_weights: Vec<f64>,
    output_bias: f64,
}

impl Gradient {
    fn zeros(hidden: usize) -> Self {
        Gradient {
            hidden_weights: vec![0.0; hidden * INPUTS],
            hidden_biases: vec![0.0; hidden],
            output_weights: vec![0.0; hidden],
            output_bias: 0.0,
        }
    }

    fn flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.hidden_weights.len() + 2 * self.hidden_biases.len() + 1);
        v.extend(&self.hidden_weights);
        v.extend(&self.hidden_biases);
        v.extend(&self.output_weights);
        v.push(self.output_bias);
        v
    }

    fn reset(&mut self) {
        self.hidden_weights.fill(0.0);
        self.hidden_biases.fill(0.0);
        self.output_weights.fill(0.0);
        self.output_bias = 0.0;
    }

    fn apply(&self, params: &mut NetworkParameters, step: f64) {
        let pairs = [
            (&mut params.hidden_weights, &self.hidden_weights),
            (&mut params.hidden_biases, &self.hidden_biases),
            (&mut params.output_weights, &self.output_weights),
        ];
        for (p, g) in pairs {
            p.iter_mut().zip(g).for_each(|(p, g)| *p -= step * g);
        }
        params.output_bias -= step * self.output_bias;
    }
}

/// Forecast in µg/m³, clamped at zero.
pub fn forecast(params: &NetworkParameters, input: &PredictorInput) -> Result<f64, PredictorError> {
    params.validate()?;
    let x = params.normalize(input);
    let mut hidden = vec![0.0; params.hidden];
    let raw = params.forward(&x, &mut hidden) * params.output_std + params.output_mean;
    Ok(if raw.is_finite() { raw.max(0.0) } else { 0.0 })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig { hidden: DEFAULT_HIDDEN, epochs: 200, learning_rate: 1e-2, batch_size: 32 }
    }
}

#[derive(Debug, Clone)]
pub struct TrainingReport {
    /// Mean normalized loss over the full training set after each epoch.
    pub epoch_losses: Vec<f64>,
    /// Loss of the initial parameters, before the first update.
    pub initial_loss: f64,
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    (mean, if std > 1e-12 * mean.abs().max(1.0) { std } else { 1.0 })
}

/// Fits a forecaster to `(input, next concentration)` pairs.
pub fn train(
    dataset: &[(PredictorInput, f64)],
    config: &TrainingConfig,
    rng: &mut impl Rng,
) -> Result<(NetworkParameters, TrainingReport), PredictorError> {
    if config.hidden == 0 || config.epochs == 0 || config.batch_size == 0 || !(config.learning_rate > 0.0) {
        return Err(PredictorError::Config(format!("{config:?}")));
    }
    if dataset.len() < MIN_TRAINING_SAMPLES {
        return Err(PredictorError::TooSmall(dataset.len()));
    }
    if let Some(index) = dataset
        .iter()
        .position(|(x, y)| !y.is_finite() || x.features().iter().any(|f| !f.is_finite()))
    {
        return Err(PredictorError::NonFiniteSample { index });
    }

    let mut params = NetworkParameters::random(config.hidden, rng);
    for k in 0..INPUTS {
        let (m, s) = mean_std(dataset.iter().map(|(x, _)| x.features()[k]));
        params.input_mean[k] = m;
        params.input_std[k] = s;
    }
    let (m, s) = mean_std(dataset.iter().map(|(_, y)| *y));
    params.output_mean = m;
    params.output_std = s;

    let samples: Vec<([f64; INPUTS], f64)> = dataset
        .iter()
        .map(|(x, y)| (params.normalize(x), (y - params.output_mean) / params.output_std))
        .collect();
    let full_loss = |p: &NetworkParameters| {
        samples.iter().map(|(x, y)| p.normalized_loss(x, *y)).sum::<f64>() / samples.len() as f64
    };

    let initial_loss = full_loss(&params);
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut grad = Gradient::zeros(config.hidden);
    let mut hidden = vec![0.0; config.hidden];
    let mut last_finite = initial_loss;
    for epoch in 1..=config.epochs {
        order.shuffle(rng);
        for batch in order.chunks(config.batch_size) {
            grad.reset();
            for &i in batch {
                let (x, y) = &samples[i];
                params.loss_and_grad(x, *y, &mut hidden, &mut grad);
            }
            grad.apply(&mut params, config.learning_rate / batch.len() as f64);
        }
        let loss = full_loss(&params);
        if !loss.is_finite() {
            return Err(PredictorError::Diverged { epoch, loss, last_finite });
        }
        last_finite = loss;
        epoch_losses.push(loss);
    }
    Ok((params, TrainingReport { epoch_losses, initial_loss }))
}

/// Largest relative gap between the backpropagated gradient and central
/// finite differences, over every parameter, for one sample.
///
/// Differences use a step of 1e-5 on the normalized scale. The relative gap
/// is `|a − n| / max(|a|, |n|, 1e-6)`, so gradients that are both ≈ 0 count as
/// agreeing.
pub fn gradient_check(params: &NetworkParameters, sample: &(PredictorInput, f64)) -> Result<f64, PredictorError> {
    params.validate()?;
    let x = params.normalize(&sample.0);
    let y = (sample.1 - params.output_mean) / params.output_std;

    let mut grad = Gradient::zeros(params.hidden);
    let mut hidden = vec![0.0; params.hidden];
    params.loss_and_grad(&x, y, &mut hidden, &mut grad);
    let analytic = grad.flat();

    let mut probe = params.clone();
    let mut worst: f64 = 0.0;
    for (i, a) in analytic.iter().enumerate() {
        let original = *probe.param_mut(i);
        *probe.param_mut(i) = original + FD_STEP;
        let up = probe.forward(&x, &mut hidden);
        *probe.param_mut(i) = original - FD_STEP;
        let down = probe.forward(&x, &mut hidden);
        *probe.param_mut(i) = original;
        // Half squared error difference as ½(o₊ − o₋)(d₊ + d₋): the target cancels
        // exactly instead of being lost in the subtraction of two large losses.
        let numeric = 0.5 * (up - down) * ((up - y) + (down - y)) / (2.0 * FD_STEP);
        let scale = a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((a - numeric).abs() / scale);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn input(c: f64, u: f64) -> PredictorInput {
        PredictorInput { aggregated_concentration: c, wind_speed: u, humidity: 70.0, temperature: 15.0, rainfall: 0.0 }
    }

    #[test]
    fn zero_network_returns_output_mean() {
        let mut p = NetworkParameters::zeros(10);
        p.output_mean = 42.5;
        p.output_std = 7.0;
        p.input_mean = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(forecast(&p, &input(80.0, 3.0)).unwrap(), 42.5);
    }

    #[test]
    fn negative_raw_output_is_clamped() {
        let mut p = NetworkParameters::zeros(4);
        p.output_mean = -3.0;
        assert_eq!(forecast(&p, &input(1.0, 1.0)).unwrap(), 0.0);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let mut p = NetworkParameters::zeros(10);
        p.hidden_biases.pop();
        assert!(matches!(forecast(&p, &input(1.0, 1.0)), Err(PredictorError::Dimension(_))));
        let mut p = NetworkParameters::zeros(10);
        p.input_std[2] = 0.0;
        assert!(matches!(forecast(&p, &input(1.0, 1.0)), Err(PredictorError::Dimension(_))));
    }

    #[test]
    fn constant_series_is_learned() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data: Vec<_> = (0..200).map(|i| (input(10.0 + i as f64, 0.5 + 0.01 * i as f64), 37.0)).collect();
        let (p, _) = train(&data, &TrainingConfig::default(), &mut rng).unwrap();
        for (c, u) in [(10.0, 0.5), (120.0, 2.0), (60.0, 1.3)] {
            let f = forecast(&p, &input(c, u)).unwrap();
            assert!((f - 37.0).abs() < 0.01 * 37.0, "{f}");
        }
    }

    #[test]
    fn training_reduces_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let data: Vec<_> = (0..300)
            .map(|i| {
                let u = 0.5 + (i % 37) as f64 * 0.1;
                (input(20.0 + (i % 11) as f64, u), 13.0 + 60.0 / u)
            })
            .collect();
        let (_, report) = train(&data, &TrainingConfig::default(), &mut rng).unwrap();
        assert_eq!(report.epoch_losses.len(), 200);
        assert!(report.epoch_losses.last().unwrap() <= &report.epoch_losses[0]);
        assert!(report.epoch_losses.last().unwrap() < &(0.1 * report.initial_loss));
    }

    #[test]
    fn training_is_reproducible() {
        let data: Vec<_> = (0..100).map(|i| (input(i as f64, 1.0 + i as f64 * 0.02), i as f64 * 0.5)).collect();
        let cfg = TrainingConfig { epochs: 20, ..Default::default() };
        let a = train(&data, &cfg, &mut ChaCha8Rng::seed_from_u64(9)).unwrap().0;
        let b = train(&data, &cfg, &mut ChaCha8Rng::seed_from_u64(9)).unwrap().0;
        assert_eq!(a, b);
    }

    #[test]
    fn training_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let small: Vec<_> = (0..49).map(|i| (input(i as f64, 1.0), 1.0)).collect();
        assert!(matches!(train(&small, &TrainingConfig::default(), &mut rng), Err(PredictorError::TooSmall(49))));
        let mut bad: Vec<_> = (0..60).map(|i| (input(i as f64, 1.0), 1.0)).collect();
        bad[17].1 = f64::NAN;
        assert!(matches!(
            train(&bad, &TrainingConfig::default(), &mut rng),
            Err(PredictorError::NonFiniteSample { index: 17 })
        ));
        let data: Vec<_> = (0..60).map(|i| (input(i as f64, 1.0 + i as f64), (i * i) as f64)).collect();
        let cfg = TrainingConfig { learning_rate: 1e6, ..Default::default() };
        assert!(matches!(train(&data, &cfg, &mut rng), Err(PredictorError::Diverged { .. })));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut p = NetworkParameters::random(10, &mut rng);
        p.hidden_biases.iter_mut().for_each(|b| *b = rng.random_range(-0.5..0.5));
        p.input_mean = [30.0, 2.0, 70.0, 16.0, 3.0];
        p.input_std = [20.0, 1.3, 14.0, 6.3, 9.0];
        let d = gradient_check(&p, &(input(55.0, 1.7), 48.0)).unwrap();
        assert!((0.0..1e-4).contains(&d), "{d}");
    }

    #[test]
    fn zero_network_on_zero_input_has_zero_hidden_gradient() {
        let p = NetworkParameters::zeros(10);
        let zero = PredictorInput {
            aggregated_concentration: 0.0,
            wind_speed: 0.0,
            humidity: 0.0,
            temperature: 0.0,
            rainfall: 0.0,
        };
        let mut grad = Gradient::zeros(10);
        let mut hidden = vec![0.0; 10];
        p.loss_and_grad(&[0.0; INPUTS], 1.0, &mut hidden, &mut grad);
        assert!(grad.hidden_weights.iter().all(|g| *g == 0.0));
        assert!(gradient_check(&p, &(zero, 1.0)).unwrap() < 1e-9);
    }

    #[test]
    fn parameter_file_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut p = NetworkParameters::random(10, &mut rng);
        p.output_mean = 51.7;
        p.output_std = 1.0 / 3.0;
        let back = NetworkParameters::from_text(&p.to_text()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn parameter_file_errors_name_lines() {
        let p = NetworkParameters::zeros(3);
        let text = p.to_text().replace("hidden_biases 0 0 0", "hidden_biases 0 zero 0");
        assert!(matches!(NetworkParameters::from_text(&text), Err(PredictorError::Parse { line: 4, .. })));
        let text = p.to_text().replace("hidden_biases 0 0 0", "hidden_biases 0 0");
        assert!(matches!(NetworkParameters::from_text(&text), Err(PredictorError::Parse { line: 4, .. })));
        assert!(NetworkParameters::from_text("airsim-forecaster 2\n").is_err());
        assert!(NetworkParameters::from_text("").is_err());
    }
}
