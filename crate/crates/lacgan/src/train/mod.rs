//! Alternating training loop, best-model-by-validation selection,
//! evaluation, and the method comparison harness.

pub mod checkpoint;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{batch_matrices, EmbeddedSample, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::model::{
    infer_rng, sample_latent, split_heads, AcGanBaseline, ExtractorNet, LacGanModel, DEFAULT_LAMBDA,
};
use crate::nn::adam::{adam_step, AdamState};
use crate::nn::loss::{
    adversarial_grad_fake, adversarial_grad_real, adversarial_losses, cross_entropy,
    cross_entropy_grad,
};
use crate::nn::network::{NetGrads, Network};
use crate::nn::Mode;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "lacgan")]
    LacGan,
    #[serde(rename = "acgan")]
    AcGan,
    #[serde(rename = "extractor_only")]
    ExtractorOnly,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::LacGan => "lacgan",
            Method::AcGan => "acgan",
            Method::ExtractorOnly => "extractor_only",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lacgan" => Ok(Method::LacGan),
            "acgan" => Ok(Method::AcGan),
            "extractor_only" => Ok(Method::ExtractorOnly),
            other => Err(Error::Config(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_e: usize,
    pub batch_gd: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub lambda: f64,
    pub seed: u64,
    pub embed_seed: u64,
    /// Seed of the train/validation/test shuffle; kept separate from `seed`
    /// so method comparisons share one split across model seeds.
    pub split_seed: u64,
    pub method: Method,
    pub pa: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 300,
            batch_e: 50,
            batch_gd: 20,
            lr: 0.0005,
            beta1: 0.5,
            beta2: 0.999,
            lambda: DEFAULT_LAMBDA,
            seed: 0,
            embed_seed: 0,
            split_seed: 0,
            method: Method::LacGan,
            pa: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_e < 2 || self.batch_gd < 2 {
            return Err(Error::Config("batch sizes must be at least 2".into()));
        }
        if self.lr <= 0.0 {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("Adam betas must lie in [0, 1)".into()));
        }
        if self.lambda < 0.0 {
            return Err(Error::Config("lambda must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Per-epoch record; losses that do not apply to the method are None.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub j_c: Option<f64>,
    pub j_s: Option<f64>,
    pub j_g: Option<f64>,
    pub train_acc: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub epochs: Vec<EpochMetrics>,
    pub best_epoch: usize,
    pub best_val_acc: f64,
    pub test_acc: f64,
}

/// The trainable networks for one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MethodModel {
    LacGan(LacGanModel),
    AcGan(AcGanBaseline),
    ExtractorOnly(ExtractorNet),
}

impl MethodModel {
    pub fn new(config: &TrainConfig, rng: &mut ChaCha8Rng) -> Self {
        match config.method {
            Method::LacGan => MethodModel::LacGan(LacGanModel::new(config.pa, config.lambda, rng)),
            Method::AcGan => MethodModel::AcGan(AcGanBaseline::new(config.pa, config.lambda, rng)),
            Method::ExtractorOnly => MethodModel::ExtractorOnly(ExtractorNet::new(config.pa, rng)),
        }
    }

    pub fn method(&self) -> Method {
        match self {
            MethodModel::LacGan(_) => Method::LacGan,
            MethodModel::AcGan(_) => Method::AcGan,
            MethodModel::ExtractorOnly(_) => Method::ExtractorOnly,
        }
    }

    pub fn predict(&self, x_raw: &Mat) -> Result<Vec<usize>> {
        match self {
            MethodModel::LacGan(m) => crate::model::predict(x_raw, m),
            MethodModel::AcGan(m) => crate::model::predict_acgan(x_raw, m),
            MethodModel::ExtractorOnly(e) => crate::model::predict_extractor(x_raw, e),
        }
    }
}

/// Adam buffers per network; absent entries belong to networks the method
/// does not train.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimizers {
    pub e: Option<AdamState>,
    pub g: Option<AdamState>,
    pub d: Option<AdamState>,
}

impl Optimizers {
    pub fn new(model: &MethodModel, config: &TrainConfig) -> Self {
        let adam = |net: &Network| {
            Some(AdamState::new(
                net.param_len(),
                config.lr,
                config.beta1,
                config.beta2,
            ))
        };
        match model {
            MethodModel::LacGan(m) => Optimizers {
                e: adam(&m.e.net),
                g: adam(&m.g.net),
                d: adam(&m.d.net),
            },
            MethodModel::AcGan(m) => Optimizers {
                e: None,
                g: adam(&m.g.net),
                d: adam(&m.d.net),
            },
            MethodModel::ExtractorOnly(e) => Optimizers {
                e: adam(&e.net),
                g: None,
                d: None,
            },
        }
    }
}

/// Highest-validation-accuracy selection; ties keep the earliest epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestTracker {
    pub epoch: usize,
    pub val_acc: f64,
}

impl BestTracker {
    pub fn observe(&mut self, epoch: usize, val_acc: f64) -> bool {
        if val_acc > self.val_acc {
            self.epoch = epoch;
            self.val_acc = val_acc;
            true
        } else {
            false
        }
    }
}

/// Full mutable training state; everything a checkpoint must capture.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub model: MethodModel,
    pub optimizers: Optimizers,
    pub rng: ChaCha8Rng,
    pub epoch: usize,
    pub best: BestTracker,
    pub best_model: MethodModel,
    pub history: Vec<EpochMetrics>,
}

/// Embedded dataset split ready for training.
#[derive(Debug, Clone)]
pub struct EmbeddedSplit {
    pub train: Vec<EmbeddedSample>,
    pub validation: Vec<EmbeddedSample>,
    pub test: Vec<EmbeddedSample>,
}

impl EmbeddedSplit {
    pub fn from_raw(split: &crate::data::DatasetSplit, embed_seed: u64) -> Result<Self> {
        let embed = |raw: &[crate::data::RawSample]| -> Result<Vec<EmbeddedSample>> {
            raw.iter()
                .map(|s| EmbeddedSample::from_raw(s, embed_seed))
                .collect()
        };
        Ok(EmbeddedSplit {
            train: embed(&split.train)?,
            validation: embed(&split.validation)?,
            test: embed(&split.test)?,
        })
    }
}

fn check_finite(value: f64, term: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite { term: term.into() })
    }
}

/// Shuffled mini-batch index lists. A trailing singleton is merged into the
/// previous chunk so train-mode batch normalization always sees batch >= 2.
fn shuffled_chunks(n: usize, batch: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let mut chunks: Vec<Vec<usize>> = idx.chunks(batch).map(<[usize]>::to_vec).collect();
    if chunks.len() > 1 && chunks.last().is_some_and(|c| c.len() == 1) {
        let tail = chunks.pop().unwrap();
        chunks.last_mut().unwrap().extend(tail);
    }
    chunks
}

fn apply_step(net: &mut Network, grads: &NetGrads, adam: &mut AdamState) -> Result<()> {
    let mut flat = net.flat_params();
    let g = grads.flatten(net);
    adam_step(&mut flat, &g, adam)?;
    net.set_flat_params(&flat)?;
    net.mark_trained();
    Ok(())
}

fn sum_grads(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

struct EpochLosses {
    j_c: Option<f64>,
    j_s: Option<f64>,
    j_g: Option<f64>,
}

/// Classification phase: Adam steps on the extractor's cross-entropy cost.
fn run_extractor_phase(
    e: &mut ExtractorNet,
    adam: &mut AdamState,
    train: &[EmbeddedSample],
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let mut total = 0.0;
    let chunks = shuffled_chunks(train.len(), config.batch_e, rng);
    let count = chunks.len();
    for chunk in chunks {
        let refs: Vec<&EmbeddedSample> = chunk.iter().map(|&i| &train[i]).collect();
        let (x, y) = batch_matrices(&refs)?;
        let (p, _, cache) = e.forward(&x, Mode::Train, rng)?;
        let j_c = check_finite(cross_entropy(&p, &y)?, "J_C")?;
        total += j_c;
        let dp = cross_entropy_grad(&p, &y)?;
        let (grads, _) = e.net.backward(&cache, &dp)?;
        apply_step(&mut e.net, &grads, adam)?;
        e.net.commit_bn(&cache);
    }
    Ok(total / count as f64)
}

/// One adversarial phase step pair on a mini-batch: D first (G frozen), then
/// G (D frozen). `x_real` is treated as a constant input.
#[allow(clippy::too_many_arguments)]
fn adversarial_minibatch(
    g: &mut crate::model::GeneratorNet,
    d: &mut crate::model::DiscriminatorNet,
    adam_g: &mut AdamState,
    adam_d: &mut AdamState,
    x_real: &Mat,
    y: &Mat,
    lambda: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, f64, f64)> {
    let m = x_real.rows();

    // --- D update, G frozen ---
    let (out_real, cache_real) = d.net.forward(x_real, Mode::Train, rng)?;
    let (z, c) = sample_latent(rng, m);
    let (x_fake, _) = g.forward(&z, &c, Mode::Train, rng)?;
    let (out_fake, cache_fake) = d.net.forward(&x_fake, Mode::Train, rng)?;

    let (d_real, p_class_real) = split_heads(&out_real);
    let (d_fake, _) = split_heads(&out_fake);
    let (j_s, _) = adversarial_losses(&d_real, &d_fake);
    check_finite(j_s, "J_S")?;
    let j_c = check_finite(cross_entropy(&p_class_real, y)?, "J_C")?;

    let grad_real_src = adversarial_grad_real(&d_real);
    let grad_class = cross_entropy_grad(&p_class_real, y)?;
    let mut upstream_real = Mat::zeros(m, 1 + NUM_CLASSES);
    for i in 0..m {
        upstream_real.set(i, 0, grad_real_src[i]);
        for j in 0..NUM_CLASSES {
            upstream_real.set(i, j + 1, lambda * grad_class.get(i, j));
        }
    }
    let grad_fake_src = adversarial_grad_fake(&d_fake);
    let mut upstream_fake = Mat::zeros(m, 1 + NUM_CLASSES);
    for i in 0..m {
        upstream_fake.set(i, 0, grad_fake_src[i]);
    }

    let (grads_real, _) = d.net.backward(&cache_real, &upstream_real)?;
    let (grads_fake, _) = d.net.backward(&cache_fake, &upstream_fake)?;
    let flat = sum_grads(&grads_real.flatten(&d.net), &grads_fake.flatten(&d.net));
    let mut params = d.net.flat_params();
    adam_step(&mut params, &flat, adam_d)?;
    d.net.set_flat_params(&params)?;
    d.net.mark_trained();
    d.net.commit_bn(&cache_real);
    d.net.commit_bn(&cache_fake);

    // --- G update, D frozen ---
    let (z, c) = sample_latent(rng, m);
    let (x_fake, g_cache) = g.forward(&z, &c, Mode::Train, rng)?;
    let (out_fake, d_cache) = d.net.forward(&x_fake, Mode::Train, rng)?;
    let (d_fake2, _) = split_heads(&out_fake);
    let (j_s2, j_g) = adversarial_losses(&d_real, &d_fake2);
    check_finite(j_s2, "J_G")?;

    // J_G = -J_S, so the upstream on the source head is the negated J_S
    // gradient; the class head does not enter G's cost.
    let grad_src = adversarial_grad_fake(&d_fake2);
    let mut upstream = Mat::zeros(m, 1 + NUM_CLASSES);
    for i in 0..m {
        upstream.set(i, 0, -grad_src[i]);
    }
    let (_, dx_fake) = d.net.backward(&d_cache, &upstream)?;
    let (g_grads, _) = g.net.backward(&g_cache, &dx_fake)?;
    apply_step(&mut g.net, &g_grads, adam_g)?;
    g.net.commit_bn(&g_cache);

    Ok((j_s, j_g, j_c))
}

/// Run one epoch: the classification phase (mini-batches of `batch_e`) where
/// the method has an extractor, then the adversarial phase (mini-batches of
/// `batch_gd`) where it has a G/D pair.
pub fn train_epoch(
    model: &mut MethodModel,
    train: &[EmbeddedSample],
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
    optimizers: &mut Optimizers,
) -> Result<EpochMetrics> {
    if train.is_empty() {
        return Err(Error::Validation("training split is empty".into()));
    }
    let losses = match model {
        MethodModel::ExtractorOnly(e) => {
            let adam = optimizers.e.as_mut().expect("extractor optimizer");
            let j_c = run_extractor_phase(e, adam, train, config, rng)?;
            EpochLosses {
                j_c: Some(j_c),
                j_s: None,
                j_g: None,
            }
        }
        MethodModel::LacGan(m) => {
            let adam_e = optimizers.e.as_mut().expect("extractor optimizer");
            let j_c = run_extractor_phase(&mut m.e, adam_e, train, config, rng)?;

            let adam_g = optimizers.g.as_mut().expect("generator optimizer");
            let adam_d = optimizers.d.as_mut().expect("discriminator optimizer");
            let mut j_s_sum = 0.0;
            let mut j_g_sum = 0.0;
            let chunks = shuffled_chunks(train.len(), config.batch_gd, rng);
            let count = chunks.len();
            for chunk in chunks {
                let refs: Vec<&EmbeddedSample> = chunk.iter().map(|&i| &train[i]).collect();
                let (x, y) = batch_matrices(&refs)?;
                // Latent features are constants for the adversarial phase:
                // the extractor is trained only by its classification cost.
                let mut dummy = infer_rng();
                let (_, x_real, _) = m.e.forward(&x, Mode::Infer, &mut dummy)?;
                let (j_s, j_g, _) = adversarial_minibatch(
                    &mut m.g,
                    &mut m.d,
                    adam_g,
                    adam_d,
                    &x_real,
                    &y,
                    m.lambda,
                    rng,
                )?;
                j_s_sum += j_s;
                j_g_sum += j_g;
            }
            EpochLosses {
                j_c: Some(j_c),
                j_s: Some(j_s_sum / count as f64),
                j_g: Some(j_g_sum / count as f64),
            }
        }
        MethodModel::AcGan(m) => {
            let adam_g = optimizers.g.as_mut().expect("generator optimizer");
            let adam_d = optimizers.d.as_mut().expect("discriminator optimizer");
            let mut j_s_sum = 0.0;
            let mut j_g_sum = 0.0;
            let mut j_c_sum = 0.0;
            let chunks = shuffled_chunks(train.len(), config.batch_gd, rng);
            let count = chunks.len();
            for chunk in chunks {
                let refs: Vec<&EmbeddedSample> = chunk.iter().map(|&i| &train[i]).collect();
                let (x, y) = batch_matrices(&refs)?;
                let (j_s, j_g, j_c) = adversarial_minibatch(
                    &mut m.g,
                    &mut m.d,
                    adam_g,
                    adam_d,
                    &x,
                    &y,
                    m.lambda,
                    rng,
                )?;
                j_s_sum += j_s;
                j_g_sum += j_g;
                j_c_sum += j_c;
            }
            EpochLosses {
                j_c: Some(j_c_sum / count as f64),
                j_s: Some(j_s_sum / count as f64),
                j_g: Some(j_g_sum / count as f64),
            }
        }
    };
    Ok(EpochMetrics {
        epoch: 0, // filled by the caller
        j_c: losses.j_c,
        j_s: losses.j_s,
        j_g: losses.j_g,
        train_acc: 0.0,
        val_acc: 0.0,
    })
}

/// Fraction of samples whose predicted class matches the label
/// (inference mode).
pub fn evaluate(model: &MethodModel, samples: &[EmbeddedSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Validation("cannot evaluate an empty split".into()));
    }
    let refs: Vec<&EmbeddedSample> = samples.iter().collect();
    let (x, _) = batch_matrices(&refs)?;
    let predictions = model.predict(&x)?;
    let correct = predictions
        .iter()
        .zip(samples)
        .filter(|(&p, s)| p == s.class_index())
        .count();
    Ok(correct as f64 / samples.len() as f64)
}

pub fn init_state(config: &TrainConfig, split: &EmbeddedSplit) -> Result<TrainState> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let model = MethodModel::new(config, &mut rng);
    let optimizers = Optimizers::new(&model, config);
    // The untrained model is the epoch-0 candidate: with zero epochs it is
    // the best model by definition.
    let val_acc = evaluate(&model, &split.validation)?;
    Ok(TrainState {
        best: BestTracker { epoch: 0, val_acc },
        best_model: model.clone(),
        model,
        optimizers,
        rng,
        epoch: 0,
        history: Vec::new(),
    })
}

/// Continue training from `state` through `config.epochs`, then report the
/// best checkpoint's test accuracy.
pub fn run_training(
    config: &TrainConfig,
    split: &EmbeddedSplit,
    state: &mut TrainState,
) -> Result<Metrics> {
    while state.epoch < config.epochs {
        let epoch = state.epoch + 1;
        let mut metrics = train_epoch(
            &mut state.model,
            &split.train,
            config,
            &mut state.rng,
            &mut state.optimizers,
        )?;
        metrics.epoch = epoch;
        metrics.train_acc = evaluate(&state.model, &split.train)?;
        metrics.val_acc = evaluate(&state.model, &split.validation)?;
        if state.best.observe(epoch, metrics.val_acc) {
            state.best_model = state.model.clone();
        }
        state.history.push(metrics);
        state.epoch = epoch;
    }
    let test_acc = evaluate(&state.best_model, &split.test)?;
    Ok(Metrics {
        epochs: state.history.clone(),
        best_epoch: state.best.epoch,
        best_val_acc: state.best.val_acc,
        test_acc,
    })
}

/// Train from scratch and return the final training state with its metrics.
pub fn fit(config: &TrainConfig, split: &EmbeddedSplit) -> Result<(TrainState, Metrics)> {
    let mut state = init_state(config, split)?;
    let metrics = run_training(config, split, &mut state)?;
    Ok((state, metrics))
}

/// Row of the method comparison report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: String,
    pub pa: bool,
    pub seed_accuracies: Vec<(u64, f64)>,
    pub median_test_acc: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    /// Published accuracies on the original (unreleased) data set, quoted
    /// for reference; never recomputed here.
    pub published_reference: Vec<(String, f64)>,
}

/// Published test-set accuracies quoted in the comparison footer.
pub const PUBLISHED_REFERENCE: [(&str, f64); 4] = [
    ("acgan without PA", 0.507),
    ("acgan with PA", 0.582),
    ("extractor_only", 0.611),
    ("lacgan", 0.671),
];

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Train every method (the raw-space baseline with and without PA, the
/// extractor alone, and the latent model) for each seed, reporting per-seed
/// test accuracies of the best models and the per-method median.
pub fn compare_methods(
    base: &TrainConfig,
    split: &EmbeddedSplit,
    seeds: &[u64],
) -> Result<ComparisonReport> {
    if seeds.is_empty() {
        return Err(Error::Config("need at least one seed".into()));
    }
    let variants = [
        ("acgan without PA", Method::AcGan, false),
        ("acgan with PA", Method::AcGan, true),
        ("extractor_only", Method::ExtractorOnly, true),
        ("lacgan", Method::LacGan, true),
    ];
    let mut rows = Vec::new();
    for (label, method, pa) in variants {
        let mut seed_accuracies = Vec::new();
        for &seed in seeds {
            let config = TrainConfig {
                method,
                pa,
                seed,
                ..base.clone()
            };
            let (_, metrics) = fit(&config, split)?;
            seed_accuracies.push((seed, metrics.test_acc));
        }
        let mut accs: Vec<f64> = seed_accuracies.iter().map(|&(_, a)| a).collect();
        rows.push(ComparisonRow {
            method: label.to_string(),
            pa,
            seed_accuracies,
            median_test_acc: median(&mut accs),
        });
    }
    Ok(ComparisonReport {
        rows,
        published_reference: PUBLISHED_REFERENCE
            .iter()
            .map(|&(name, acc)| (name.to_string(), acc))
            .collect(),
    })
}

/// One pass/fail text block per comparison row plus the published footer.
pub fn format_comparison(report: &ComparisonReport) -> String {
    let mut out = String::new();
    out.push_str("method                 median  per-seed\n");
    for row in &report.rows {
        let seeds: Vec<String> = row
            .seed_accuracies
            .iter()
            .map(|(s, a)| format!("seed {s}: {:.1}%", a * 100.0))
            .collect();
        out.push_str(&format!(
            "{:<22} {:>5.1}%  {}\n",
            row.method,
            row.median_test_acc * 100.0,
            seeds.join(", ")
        ));
    }
    out.push_str("published reference (original data set, not recomputed):\n");
    for (name, acc) in &report.published_reference {
        out.push_str(&format!("  {:<22} {:>5.1}%\n", name, acc * 100.0));
    }
    out
}
