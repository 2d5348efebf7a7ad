//! Property-based invariants over randomized inputs.

use proptest::prelude::*;

use lacgan::data::split::split_dataset;
use lacgan::data::synth::{generate_synthetic, SynthConfig};
use lacgan::nn::loss::adversarial_losses;
use lacgan::nn::Activation;
use lacgan::Mat;

proptest! {
    /// Softmax rows sum to 1 and stay in (0, 1) for arbitrary finite logits.
    #[test]
    fn softmax_rows_are_distributions(
        rows in 1usize..6,
        values in prop::collection::vec(-50.0f64..50.0, 4..24),
    ) {
        let cols = values.len() / rows;
        prop_assume!(cols >= 2);
        let z = Mat::from_vec(rows, cols, values[..rows * cols].to_vec()).unwrap();
        let p = Activation::Softmax.forward(&z);
        for i in 0..rows {
            let sum: f64 = p.row(i).iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            // The dominant entry can round to exactly 1.0 when the logit gap
            // exceeds the f64 mantissa, so the upper bound is inclusive.
            prop_assert!(p.row(i).iter().all(|&v| v > 0.0 && v <= 1.0));
        }
    }

    /// The generator cost is exactly the negated source cost, for any
    /// discriminator outputs.
    #[test]
    fn generator_loss_is_negated_source_loss(
        d_real in prop::collection::vec(0.0f64..1.0, 1..32),
        d_fake in prop::collection::vec(0.0f64..1.0, 1..32),
    ) {
        let (j_s, j_g) = adversarial_losses(&d_real, &d_fake);
        prop_assert_eq!(j_g, -j_s);
        prop_assert!(j_s.is_finite());
    }

    /// The 80/10/10 split partitions its input: sizes are exactly
    /// floor(n/10) for validation and test, and the three parts reassemble
    /// the filtered input set.
    #[test]
    fn split_is_an_exact_partition(n in 10usize..120, seed in 0u64..1000) {
        let raw = generate_synthetic(&SynthConfig { n, ..SynthConfig::default() }).unwrap();
        let split = split_dataset(&raw, seed).unwrap();
        let tenth = n / 10;
        prop_assert_eq!(split.validation.len(), tenth);
        prop_assert_eq!(split.test.len(), tenth);
        prop_assert_eq!(split.train.len(), n - 2 * tenth);

        let mut seen: Vec<&str> = split
            .train
            .iter()
            .chain(&split.validation)
            .chain(&split.test)
            .map(|s| s.id.as_str())
            .collect();
        seen.sort_unstable();
        seen.dedup();
        prop_assert_eq!(seen.len(), n, "ids must be disjoint and complete");
    }
}
