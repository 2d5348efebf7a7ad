//! The classifier triple (Extractor, Generator, Discriminator), its cost
//! wiring, the prediction path, and the conditional-GAN baseline operating
//! in raw input space.

pub mod check;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{NUM_CLASSES, RAW_DIM};
use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::nn::loss::{adversarial_losses, cross_entropy};
use crate::nn::{Activation, LayerSpec, Mode, NetCache, Network};

/// Latent noise width.
pub const D_Z: usize = 100;
/// Latent feature width shared by E's bottleneck and G's output.
pub const D_REAL: usize = 50;
/// Default weight of the class term in the discriminator cost.
pub const DEFAULT_LAMBDA: f64 = 0.2;
/// Dropout keep probability on the discriminator's first layer.
pub const D_DROPOUT_KEEP: f64 = 0.5;

/// Index of the 50-wide bottleneck layer inside the extractor.
const BOTTLENECK_LAYER: usize = 2;

/// Dummy RNG for inference-mode forwards, which never draw.
pub fn infer_rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0)
}

fn spec(
    in_dim: usize,
    out_dim: usize,
    activation: Activation,
    batch_norm: bool,
    dropout: Option<f64>,
) -> LayerSpec {
    LayerSpec {
        in_dim,
        out_dim,
        activation,
        batch_norm,
        dropout,
    }
}

/// Bottleneck feed-forward classifier, widths 400-400-100-50-100-4.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractorNet {
    pub net: Network,
}

impl ExtractorNet {
    pub fn new(pa: bool, rng: &mut dyn RngCore) -> Self {
        let specs = [
            spec(RAW_DIM, 400, Activation::Relu, true, None),
            spec(400, 100, Activation::Relu, true, None),
            spec(100, D_REAL, Activation::Relu, true, None),
            spec(D_REAL, 100, Activation::Relu, true, None),
            spec(100, NUM_CLASSES, Activation::Softmax, false, None),
        ];
        ExtractorNet {
            net: Network::new(&specs, pa, rng).expect("extractor spec"),
        }
    }

    /// Returns class probabilities, the bottleneck activation x_real, and
    /// the forward cache.
    pub fn forward(
        &self,
        x_raw: &Mat,
        mode: Mode,
        rng: &mut dyn RngCore,
    ) -> Result<(Mat, Mat, NetCache)> {
        let (p, cache) = self.net.forward(x_raw, mode, rng)?;
        let x_real = cache.layer_output(BOTTLENECK_LAYER).clone();
        Ok((p, x_real, cache))
    }
}

/// Conditional generator, widths 104-100-100-50, tanh output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorNet {
    pub net: Network,
}

impl GeneratorNet {
    pub fn new(pa: bool, rng: &mut dyn RngCore) -> Self {
        Self::with_output_dim(D_REAL, pa, rng)
    }

    /// Same body, different output width (the raw-space baseline emits 400).
    pub fn with_output_dim(out_dim: usize, pa: bool, rng: &mut dyn RngCore) -> Self {
        let specs = [
            spec(D_Z + NUM_CLASSES, 100, Activation::Relu, true, None),
            spec(100, 100, Activation::Relu, true, None),
            spec(100, out_dim, Activation::Tanh, false, None),
        ];
        GeneratorNet {
            net: Network::new(&specs, pa, rng).expect("generator spec"),
        }
    }

    /// x_fake = G(z, c); the input is the concatenation [z ; c].
    pub fn forward(
        &self,
        z: &Mat,
        c: &Mat,
        mode: Mode,
        rng: &mut dyn RngCore,
    ) -> Result<(Mat, NetCache)> {
        check_one_hot_rows(c)?;
        let input = z.hconcat(c)?;
        self.net.forward(&input, mode, rng)
    }
}

/// Dual-head discriminator, widths 50-100-100-5. The 5 output nodes split
/// into one sigmoid source unit and a 4-way softmax class head. The first
/// layer uses dropout and carries no batch normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorNet {
    pub net: Network,
}

impl DiscriminatorNet {
    pub fn new(pa: bool, rng: &mut dyn RngCore) -> Self {
        Self::with_input_dim(D_REAL, pa, rng)
    }

    pub fn with_input_dim(in_dim: usize, pa: bool, rng: &mut dyn RngCore) -> Self {
        let specs = [
            spec(in_dim, 100, Activation::Relu, false, Some(D_DROPOUT_KEEP)),
            spec(100, 100, Activation::Relu, true, None),
            spec(100, 1 + NUM_CLASSES, Activation::SourceClass, false, None),
        ];
        DiscriminatorNet {
            net: Network::new(&specs, pa, rng).expect("discriminator spec"),
        }
    }

    /// Returns (p_source, p_class, cache).
    pub fn forward(
        &self,
        x: &Mat,
        mode: Mode,
        rng: &mut dyn RngCore,
    ) -> Result<(Vec<f64>, Mat, NetCache)> {
        let (out, cache) = self.net.forward(x, mode, rng)?;
        let (p_source, p_class) = split_heads(&out);
        Ok((p_source, p_class, cache))
    }
}

/// Split the 5-wide discriminator output into source probabilities and the
/// class distribution.
pub fn split_heads(out: &Mat) -> (Vec<f64>, Mat) {
    let mut p_source = Vec::with_capacity(out.rows());
    let mut p_class = Mat::zeros(out.rows(), NUM_CLASSES);
    for i in 0..out.rows() {
        let row = out.row(i);
        p_source.push(row[0]);
        p_class.row_mut(i).copy_from_slice(&row[1..]);
    }
    (p_source, p_class)
}

fn check_one_hot_rows(c: &Mat) -> Result<()> {
    for i in 0..c.rows() {
        let row = c.row(i);
        let ones = row.iter().filter(|&&v| v == 1.0).count();
        if ones != 1 || row.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::Validation(format!(
                "condition row {i} is not one-hot: {row:?}"
            )));
        }
    }
    Ok(())
}

/// Full latent-classifier model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LacGanModel {
    pub e: ExtractorNet,
    pub g: GeneratorNet,
    pub d: DiscriminatorNet,
    pub lambda: f64,
}

impl LacGanModel {
    pub fn new(pa: bool, lambda: f64, rng: &mut dyn RngCore) -> Self {
        LacGanModel {
            e: ExtractorNet::new(pa, rng),
            g: GeneratorNet::new(pa, rng),
            d: DiscriminatorNet::new(pa, rng),
            lambda,
        }
    }
}

/// Raw-space conditional GAN baseline: same layer counts and widths as the
/// latent model's G and D except the input/output layers, with the
/// discriminator consuming x_raw directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcGanBaseline {
    pub g: GeneratorNet,
    pub d: DiscriminatorNet,
    pub lambda: f64,
}

impl AcGanBaseline {
    pub fn new(pa: bool, lambda: f64, rng: &mut dyn RngCore) -> Self {
        AcGanBaseline {
            g: GeneratorNet::with_output_dim(RAW_DIM, pa, rng),
            d: DiscriminatorNet::with_input_dim(RAW_DIM, pa, rng),
            lambda,
        }
    }
}

/// Draw z ~ N(0, I) and a uniform one-hot category batch.
pub fn sample_latent(rng: &mut impl Rng, batch: usize) -> (Mat, Mat) {
    let mut z = Mat::zeros(batch, D_Z);
    for v in z.data_mut() {
        *v = standard_normal(rng);
    }
    let mut c = Mat::zeros(batch, NUM_CLASSES);
    for i in 0..batch {
        let class = rng.gen_range(0..NUM_CLASSES);
        c.set(i, class, 1.0);
    }
    (z, c)
}

// Box-Muller. rand_distr would also do; this keeps the RNG stream layout
// under our control for checkpoint reproducibility.
fn standard_normal(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Loss breakdown for one mini-batch.
#[derive(Debug, Clone, Copy)]
pub struct LossParts {
    /// Extractor classification cost (absent for the raw-space baseline).
    pub j_e: Option<f64>,
    pub j_d: f64,
    pub j_g: f64,
    pub j_s: f64,
    /// Class term inside the discriminator cost.
    pub j_c: f64,
}

/// Evaluate the latent model's costs on one batch: J_E = J_C(p_E), and
/// J_D = J_S + lambda * J_C(p_D) with the source cost computed between D on
/// the extractor's bottleneck features and D on generated features.
pub fn lacgan_losses(
    x_raw: &Mat,
    y: &Mat,
    model: &LacGanModel,
    rng: &mut (impl Rng + RngCore),
) -> Result<LossParts> {
    let (p_e, x_real, _) = model.e.forward(x_raw, Mode::Train, rng)?;
    let j_e = cross_entropy(&p_e, y)?;

    let (z, c) = sample_latent(rng, x_raw.rows());
    let (x_fake, _) = model.g.forward(&z, &c, Mode::Train, rng)?;
    let (d_real, p_class_real, _) = model.d.forward(&x_real, Mode::Train, rng)?;
    let (d_fake, _, _) = model.d.forward(&x_fake, Mode::Train, rng)?;

    let (j_s, j_g) = adversarial_losses(&d_real, &d_fake);
    let j_c = cross_entropy(&p_class_real, y)?;
    Ok(LossParts {
        j_e: Some(j_e),
        j_d: j_s + model.lambda * j_c,
        j_g,
        j_s,
        j_c,
    })
}

/// Baseline costs: as [`lacgan_losses`] but with no extractor; D consumes
/// x_raw directly and G emits raw-space fakes.
pub fn acgan_losses(
    x_raw: &Mat,
    y: &Mat,
    baseline: &AcGanBaseline,
    rng: &mut (impl Rng + RngCore),
) -> Result<LossParts> {
    let (z, c) = sample_latent(rng, x_raw.rows());
    let (x_fake, _) = baseline.g.forward(&z, &c, Mode::Train, rng)?;
    let (d_real, p_class_real, _) = baseline.d.forward(x_raw, Mode::Train, rng)?;
    let (d_fake, _, _) = baseline.d.forward(&x_fake, Mode::Train, rng)?;

    let (j_s, j_g) = adversarial_losses(&d_real, &d_fake);
    let j_c = cross_entropy(&p_class_real, y)?;
    Ok(LossParts {
        j_e: None,
        j_d: j_s + baseline.lambda * j_c,
        j_g,
        j_s,
        j_c,
    })
}

/// Argmax with ties broken toward the lowest class index.
pub fn argmax_row(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Classify a batch: inference-mode E bottleneck features fed to D's class
/// head.
pub fn predict(x_raw: &Mat, model: &LacGanModel) -> Result<Vec<usize>> {
    let mut rng = infer_rng();
    let (_, x_real, _) = model.e.forward(x_raw, Mode::Infer, &mut rng)?;
    let (_, p_class, _) = model.d.forward(&x_real, Mode::Infer, &mut rng)?;
    Ok((0..p_class.rows()).map(|i| argmax_row(p_class.row(i))).collect())
}

/// Baseline prediction path: D's class head on raw inputs.
pub fn predict_acgan(x_raw: &Mat, baseline: &AcGanBaseline) -> Result<Vec<usize>> {
    let mut rng = infer_rng();
    let (_, p_class, _) = baseline.d.forward(x_raw, Mode::Infer, &mut rng)?;
    Ok((0..p_class.rows()).map(|i| argmax_row(p_class.row(i))).collect())
}

/// Extractor-only prediction path: argmax of p_E(y).
pub fn predict_extractor(x_raw: &Mat, e: &ExtractorNet) -> Result<Vec<usize>> {
    let mut rng = infer_rng();
    let (p, _, _) = e.forward(x_raw, Mode::Infer, &mut rng)?;
    Ok((0..p.rows()).map(|i| argmax_row(p.row(i))).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extractor_shapes_match_layer_table() {
        let mut rng = infer_rng();
        let e = ExtractorNet::new(true, &mut rng);
        assert_eq!(e.net.widths(), vec![400, 400, 100, 50, 100, 4]);
        let x = Mat::zeros(7, 400);
        let (p, x_real, _) = e.forward(&x, Mode::Infer, &mut rng).unwrap();
        assert_eq!((p.rows(), p.cols()), (7, 4));
        assert_eq!((x_real.rows(), x_real.cols()), (7, 50));
    }

    #[test]
    fn extractor_rows_are_probability_vectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let e = ExtractorNet::new(false, &mut rng);
        let x = Mat::from_vec(1, 400, (0..400).map(|i| (i as f64 * 0.01).sin()).collect()).unwrap();
        let (p, _, _) = e.forward(&x, Mode::Infer, &mut rng).unwrap();
        let sum: f64 = p.row(0).iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fresh_extractors_are_near_uniform_on_average() {
        // Monte-Carlo over 50 random initializations.
        let mut means = [0.0f64; NUM_CLASSES];
        let mut count = 0.0;
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let e = ExtractorNet::new(false, &mut rng);
            let mut x = Mat::zeros(16, 400);
            for v in x.data_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
            let (p, _, _) = e.forward(&x, Mode::Infer, &mut rng).unwrap();
            for i in 0..p.rows() {
                for j in 0..NUM_CLASSES {
                    means[j] += p.get(i, j);
                }
                count += 1.0;
            }
        }
        for m in means {
            let avg = m / count;
            assert!((0.15..=0.35).contains(&avg), "class mean {avg}");
        }
    }

    #[test]
    fn generator_shapes_and_tanh_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = GeneratorNet::new(true, &mut rng);
        assert_eq!(g.net.widths(), vec![104, 100, 100, 50]);
        let (z, c) = sample_latent(&mut rng, 3);
        let (x_fake, _) = g.forward(&z, &c, Mode::Train, &mut rng).unwrap();
        assert_eq!((x_fake.rows(), x_fake.cols()), (3, 50));
        for &v in x_fake.data() {
            assert!(v > -1.0 && v < 1.0);
        }
    }

    #[test]
    fn generator_rejects_non_one_hot_condition() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = GeneratorNet::new(false, &mut rng);
        let z = Mat::zeros(1, D_Z);
        let c = Mat::from_vec(1, 4, vec![0.5, 0.5, 0.0, 0.0]).unwrap();
        assert!(g.forward(&z, &c, Mode::Infer, &mut rng).is_err());
    }

    #[test]
    fn discriminator_shapes_and_heads() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d = DiscriminatorNet::new(false, &mut rng);
        assert_eq!(d.net.widths(), vec![50, 100, 100, 5]);
        let x = Mat::from_vec(5, 50, (0..250).map(|i| (i as f64 * 0.07).cos()).collect()).unwrap();
        let (p_source, p_class, _) = d.forward(&x, Mode::Infer, &mut rng).unwrap();
        assert_eq!(p_source.len(), 5);
        assert_eq!((p_class.rows(), p_class.cols()), (5, 4));
        for i in 0..5 {
            assert!(p_source[i] > 0.0 && p_source[i] < 1.0);
            let sum: f64 = p_class.row(i).iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn fresh_discriminator_on_zero_input_is_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = DiscriminatorNet::new(false, &mut rng);
        let (p_source, _, _) = d.forward(&Mat::zeros(2, 50), Mode::Infer, &mut rng).unwrap();
        for p in p_source {
            assert!((p - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn discriminator_first_layer_has_dropout_and_no_bn() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for pa in [false, true] {
            let d = DiscriminatorNet::new(pa, &mut rng);
            let first = &d.net.layers()[0];
            assert!(first.bn.is_none());
            assert_eq!(first.dropout.unwrap().keep_prob, D_DROPOUT_KEEP);
        }
    }

    #[test]
    fn latent_one_hot_condition() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (z, c) = sample_latent(&mut rng, 1);
        assert_eq!((z.rows(), z.cols()), (1, 100));
        assert_eq!(c.row(0).iter().filter(|&&v| v == 1.0).count(), 1);
    }

    #[test]
    fn lambda_zero_collapses_to_source_cost() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let model = LacGanModel::new(false, 0.0, &mut rng);
        let x = Mat::from_vec(4, 400, (0..1600).map(|i| (i as f64 * 0.013).sin()).collect()).unwrap();
        let mut y = Mat::zeros(4, 4);
        for i in 0..4 {
            y.set(i, i, 1.0);
        }
        let parts = lacgan_losses(&x, &y, &model, &mut rng).unwrap();
        assert_eq!(parts.j_d, parts.j_s);
        assert_eq!(parts.j_g, -parts.j_s);
    }

    #[test]
    fn loss_recomposition_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let model = LacGanModel::new(true, DEFAULT_LAMBDA, &mut rng);
        let x = Mat::from_vec(6, 400, (0..2400).map(|i| (i as f64 * 0.029).cos()).collect()).unwrap();
        let mut y = Mat::zeros(6, 4);
        for i in 0..6 {
            y.set(i, i % 4, 1.0);
        }
        let parts = lacgan_losses(&x, &y, &model, &mut rng).unwrap();
        assert!((parts.j_d - (parts.j_s + DEFAULT_LAMBDA * parts.j_c)).abs() < 1e-12);
        assert_eq!(parts.j_g, -parts.j_s);
        assert!(parts.j_e.unwrap().is_finite());

        let baseline = AcGanBaseline::new(false, DEFAULT_LAMBDA, &mut rng);
        let parts = acgan_losses(&x, &y, &baseline, &mut rng).unwrap();
        assert!((parts.j_d - (parts.j_s + DEFAULT_LAMBDA * parts.j_c)).abs() < 1e-12);
        assert_eq!(parts.j_g, -parts.j_s);
        assert!(parts.j_e.is_none());
    }

    #[test]
    fn argmax_rules() {
        assert_eq!(argmax_row(&[0.1, 0.6, 0.2, 0.1]), 1);
        assert_eq!(argmax_row(&[0.5, 0.5, 0.0, 0.0]), 0);
    }

    #[test]
    fn predict_batch_equals_per_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let model = LacGanModel::new(false, DEFAULT_LAMBDA, &mut rng);
        let x = Mat::from_vec(5, 400, (0..2000).map(|i| (i as f64 * 0.017).sin()).collect()).unwrap();
        let batch = predict(&x, &model).unwrap();
        for i in 0..5 {
            let single = predict(&x.select_rows(&[i]), &model).unwrap();
            assert_eq!(single[0], batch[i]);
        }
    }

    #[test]
    fn argmax_invariant_under_monotone_rescaling() {
        let row: [f64; 4] = [0.05, 0.45, 0.3, 0.2];
        let rescaled: Vec<f64> = row.iter().map(|v| (v * 3.0).exp()).collect();
        assert_eq!(argmax_row(&row), argmax_row(&rescaled));
    }
}
