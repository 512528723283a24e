use super::features::FeatureBundle;
use super::network::SiameseModel;
use super::train::batch_loss;

/// A labelled pair of bundles for gradient checking.
#[derive(Debug, Clone)]
pub struct LabeledExample {
    pub left: FeatureBundle,
    pub right: FeatureBundle,
    pub label: f64,
}

/// Relative errors use `max(|analytic|, |numeric|, FLOOR)` as denominator so
/// parameters with vanishing gradients are compared absolutely.
const FLOOR: f64 = 1e-6;

/// Largest relative error between backpropagated gradients of the mean
/// batch loss and central finite differences, over every parameter.
pub fn gradient_check(model: &SiameseModel, batch: &[LabeledExample], epsilon: f64) -> f64 {
    gradient_check_with(model, batch, epsilon, |_, _| {})
}

/// As [`gradient_check`], but lets `mutate` tamper with the analytic
/// gradient first (used for negative controls).
pub fn gradient_check_with(
    model: &SiameseModel,
    batch: &[LabeledExample],
    epsilon: f64,
    mutate: impl FnOnce(&SiameseModel, &mut [f64]),
) -> f64 {
    let examples: Vec<_> = batch.iter().map(|e| (&e.left, &e.right, e.label)).collect();
    let mut analytic = vec![0.0; model.num_params()];
    batch_loss(model, &examples, Some(&mut analytic));
    mutate(model, &mut analytic);

    let mut probe = model.clone();
    let mut worst = 0.0f64;
    for (i, &a) in analytic.iter().enumerate() {
        let orig = probe.params[i];
        probe.params[i] = orig + epsilon;
        let plus = batch_loss(&probe, &examples, None);
        probe.params[i] = orig - epsilon;
        let minus = batch_loss(&probe, &examples, None);
        probe.params[i] = orig;
        let numeric = (plus - minus) / (2.0 * epsilon);
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(FLOOR);
        worst = worst.max(rel);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::substmodel::{FeatureKind, ModelShape};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn instance(seed: u64) -> (SiameseModel, Vec<LabeledExample>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape = ModelShape {
            feature_kinds: vec![FeatureKind::Name, FeatureKind::Prod2vec],
            input_dims: vec![3, 4],
            reproj_dim: 4,
            fusion_dim: 5,
        };
        let mut model = SiameseModel::new(shape, seed).unwrap();
        for p in &mut model.params {
            *p += rng.random_range(-0.1..0.1);
        }
        let bundle = |rng: &mut ChaCha8Rng| FeatureBundle {
            parts: vec![
                (0..3).map(|_| rng.random_range(-1.0..1.0)).collect(),
                (0..4).map(|_| rng.random_range(-1.0..1.0)).collect(),
            ],
        };
        let batch = (0..4)
            .map(|i| LabeledExample {
                left: bundle(&mut rng),
                right: bundle(&mut rng),
                label: (i % 2) as f64,
            })
            .collect();
        (model, batch)
    }

    #[test]
    fn analytic_matches_finite_differences() {
        for seed in 0..5 {
            let (model, batch) = instance(seed);
            let err = gradient_check(&model, &batch, 1e-5);
            assert!(err < 1e-4, "seed {seed}: {err}");
        }
    }

    #[test]
    fn sign_flipped_classifier_gradient_is_caught() {
        let (model, batch) = instance(7);
        let err = gradient_check_with(&model, &batch, 1e-5, |m, g| {
            for x in &mut g[m.classifier_range()] {
                *x = -*x;
            }
        });
        assert!(err > 1e-1, "{err}");
    }
}
