use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{FeatureBundle, FeatureKind, FeatureStore, BEST_FEATURES};
use super::network::{bce_with_logit, ModelShape, SiameseModel};
use crate::catalog::ProductSplit;
use crate::error::{Error, Result};
use crate::pairgen::{partition_by_split, Label, LabeledPair};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub patience: usize,
    pub max_epochs: usize,
    pub seed: u64,
    pub feature_config: Vec<FeatureKind>,
    pub reproj_dim: usize,
    pub fusion_dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            batch_size: 32,
            patience: 20,
            max_epochs: 500,
            seed: 0,
            feature_config: BEST_FEATURES.to_vec(),
            reproj_dim: 48,
            fusion_dim: 128,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.patience == 0 || self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::InvalidArgument(
                "patience, batch_size and max_epochs must be at least 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument("learning rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose weights were kept.
    pub best_epoch: usize,
    pub best_validation_loss: f64,
    pub stopped_early: bool,
    pub train_pairs: usize,
    pub validation_pairs: usize,
}

/// Adam with the usual bias correction.
pub(crate) struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub(crate) fn new(n: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub(crate) fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grad)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
    }
}

type Example<'a> = (&'a FeatureBundle, &'a FeatureBundle, f64);

fn resolve<'a>(pairs: &[LabeledPair], store: &'a FeatureStore) -> Result<Vec<Example<'a>>> {
    pairs
        .iter()
        .map(|p| Ok((store.get(&p.a)?, store.get(&p.b)?, p.label.as_f64())))
        .collect()
}

/// Mean loss over `examples`; accumulates the mean gradient into `grad`.
pub(crate) fn batch_loss(model: &SiameseModel, examples: &[Example<'_>], mut grad: Option<&mut [f64]>) -> f64 {
    if examples.is_empty() {
        return 0.0;
    }
    let scale = 1.0 / examples.len() as f64;
    let mut total = 0.0;
    for &(a, b, y) in examples {
        total += model.pair_loss(a, b, y, grad.as_deref_mut().map(|g| (g, scale)));
    }
    total * scale
}

/// Validation pairs indexed by distinct product, so each product's tower is
/// evaluated once per epoch.
struct ValidationSet<'a> {
    bundles: Vec<&'a FeatureBundle>,
    pairs: Vec<(usize, usize, f64)>,
}

impl<'a> ValidationSet<'a> {
    fn new(pairs: &[LabeledPair], store: &'a FeatureStore) -> Result<Self> {
        let mut index: BTreeMap<String, usize> = BTreeMap::new();
        let mut bundles = Vec::new();
        let mut slot = |id: &str| -> Result<usize> {
            if let Some(&i) = index.get(id) {
                return Ok(i);
            }
            bundles.push(store.get(id)?);
            index.insert(id.to_string(), bundles.len() - 1);
            Ok(bundles.len() - 1)
        };
        let pairs = pairs
            .iter()
            .map(|p| Ok((slot(&p.a)?, slot(&p.b)?, p.label.as_f64())))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { bundles, pairs })
    }

    fn len(&self) -> usize {
        self.pairs.len()
    }

    fn loss(&self, model: &SiameseModel) -> f64 {
        let units: Vec<Vec<f64>> = self.bundles.iter().map(|b| model.tower(b).unit).collect();
        let total: f64 = self
            .pairs
            .iter()
            .map(|&(a, b, y)| bce_with_logit(model.logit(&units[a], &units[b]), y))
            .sum();
        total / self.pairs.len() as f64
    }
}

/// Trains with binary cross-entropy and Adam, stopping once validation loss
/// has not improved for `patience` epochs; returns the best-epoch weights.
/// Training pairs have both endpoints in the training split; every other
/// pair is used for validation.
pub fn train(
    pairs: &[LabeledPair],
    store: &FeatureStore,
    split: &ProductSplit,
    config: &TrainConfig,
) -> Result<(SiameseModel, TrainingHistory)> {
    config.validate()?;
    if store.kinds != config.feature_config {
        return Err(Error::InvalidArgument(format!(
            "feature store has {:?}, config wants {:?}",
            store.kinds, config.feature_config
        )));
    }
    let (train_pairs, val_pairs) = partition_by_split(pairs, split);
    let has = |l: Label| train_pairs.iter().any(|p| p.label == l);
    if !(has(Label::Positive) && has(Label::Negative)) {
        return Err(Error::DegenerateLabels(
            "training pairs must contain both labels".into(),
        ));
    }
    if val_pairs.is_empty() {
        return Err(Error::InvalidArgument("no validation pairs".into()));
    }
    let train_set = resolve(&train_pairs, store)?;
    let val_set = ValidationSet::new(&val_pairs, store)?;

    let shape = ModelShape {
        feature_kinds: config.feature_config.clone(),
        input_dims: store.dims.clone(),
        reproj_dim: config.reproj_dim,
        fusion_dim: config.fusion_dim,
    };
    let mut model = SiameseModel::new(shape, config.seed)?;
    let mut adam = Adam::new(model.num_params(), config.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x5eed));
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut grad = vec![0.0; model.num_params()];
    let mut batch = Vec::with_capacity(config.batch_size);

    let mut best_params = model.params.clone();
    let mut best_loss = f64::INFINITY;
    let mut best_epoch = 0;
    let mut since_best = 0;
    let mut epochs = Vec::new();
    let mut stopped_early = false;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut train_total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| train_set[i]));
            grad.iter_mut().for_each(|g| *g = 0.0);
            train_total += batch_loss(&model, &batch, Some(&mut grad)) * batch.len() as f64;
            adam.step(&mut model.params, &grad);
        }
        let validation_loss = val_set.loss(&model);
        epochs.push(EpochRecord {
            epoch,
            train_loss: train_total / train_set.len() as f64,
            validation_loss,
        });
        if validation_loss < best_loss {
            best_loss = validation_loss;
            best_params.copy_from_slice(&model.params);
            best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                stopped_early = true;
                break;
            }
        }
    }
    model.params = best_params;
    Ok((
        model,
        TrainingHistory {
            epochs,
            best_epoch,
            best_validation_loss: best_loss,
            stopped_early,
            train_pairs: train_set.len(),
            validation_pairs: val_set.len(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::{EmbeddingKind, EmbeddingTable};
    use crate::pairgen::Origin;
    use rand::Rng;
    use std::collections::BTreeSet;

    /// Products in two well separated groups; pairs within a group are
    /// positives, across groups negatives.
    fn separable(n_per_group: usize, seed: u64) -> (FeatureStore, Vec<LabeledPair>, ProductSplit) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut table = EmbeddingTable::new(EmbeddingKind::Prod2vec, 4);
        let mut ids = Vec::new();
        for g in 0..2 {
            for i in 0..n_per_group {
                let id = format!("g{g}p{i:02}");
                let center = if g == 0 { [2.0, 0.0, 1.0, 0.0] } else { [0.0, 2.0, 0.0, 1.0] };
                let v = center.iter().map(|c| c + rng.random_range(-0.3..0.3)).collect();
                table.insert(id.clone(), v).unwrap();
                ids.push((g, id));
            }
        }
        let store = FeatureStore::from_tables(&[FeatureKind::Prod2vec], &[&table]).unwrap();
        let mut pairs = Vec::new();
        for (i, (ga, a)) in ids.iter().enumerate() {
            for (gb, b) in &ids[i + 1..] {
                let label = if ga == gb { Label::Positive } else { Label::Negative };
                pairs.extend(LabeledPair::new(a, b, label, Origin::Observed));
            }
        }
        let validation_ids: BTreeSet<String> =
            ["g0p00", "g1p00"].iter().map(|s| s.to_string()).collect();
        let train_ids = ids
            .iter()
            .map(|(_, id)| id.clone())
            .filter(|id| !validation_ids.contains(id))
            .collect();
        (
            store,
            pairs,
            ProductSplit {
                train_ids,
                validation_ids,
            },
        )
    }

    fn small_config() -> TrainConfig {
        TrainConfig {
            feature_config: vec![FeatureKind::Prod2vec],
            reproj_dim: 8,
            fusion_dim: 8,
            max_epochs: 200,
            learning_rate: 0.01,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn separable_pairs_are_learned() {
        let (store, pairs, split) = separable(10, 1);
        let (model, history) = train(&pairs, &store, &split, &small_config()).unwrap();
        assert!(history.epochs.len() <= 200);
        let (train_pairs, _) = partition_by_split(&pairs, &split);
        let correct = train_pairs
            .iter()
            .filter(|p| {
                let s = model
                    .score_pair(store.get(&p.a).unwrap(), store.get(&p.b).unwrap())
                    .unwrap();
                (s >= 0.5) == (p.label == Label::Positive)
            })
            .count();
        let acc = correct as f64 / train_pairs.len() as f64;
        assert!(acc >= 0.99, "training accuracy {acc}");
    }

    #[test]
    fn early_stopping_restores_best_epoch() {
        let (store, pairs, split) = separable(6, 2);
        let cfg = TrainConfig {
            patience: 3,
            learning_rate: 0.05,
            ..small_config()
        };
        let (model, history) = train(&pairs, &store, &split, &cfg).unwrap();
        let best = history
            .epochs
            .iter()
            .min_by(|a, b| a.validation_loss.total_cmp(&b.validation_loss))
            .unwrap();
        assert_eq!(best.epoch, history.best_epoch);
        if history.stopped_early {
            assert_eq!(history.epochs.len(), history.best_epoch + 3);
        }
        let (_, val) = partition_by_split(&pairs, &split);
        let val_set = resolve(&val, &store).unwrap();
        let restored = batch_loss(&model, &val_set, None);
        assert_eq!(restored, history.best_validation_loss);
    }

    #[test]
    fn deterministic_given_seed() {
        let (store, pairs, split) = separable(5, 3);
        let cfg = TrainConfig {
            max_epochs: 5,
            ..small_config()
        };
        let (a, ha) = train(&pairs, &store, &split, &cfg).unwrap();
        let (b, hb) = train(&pairs, &store, &split, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ha, hb);
    }

    #[test]
    fn single_label_training_set_rejected() {
        let (store, pairs, split) = separable(5, 4);
        let positives: Vec<_> = pairs.into_iter().filter(|p| p.label == Label::Positive).collect();
        let err = train(&positives, &store, &split, &small_config()).unwrap_err();
        assert!(err.to_string().contains("degenerate labels"), "{err}");
    }

    #[test]
    fn feature_config_must_match_store() {
        let (store, pairs, split) = separable(5, 4);
        let cfg = TrainConfig::default();
        assert_eq!(cfg.feature_config, BEST_FEATURES.to_vec());
        assert!(train(&pairs, &store, &split, &cfg).is_err());
    }

    #[test]
    fn adam_decreases_loss_on_fixed_batch() {
        let (store, pairs, _) = separable(6, 5);
        let examples = resolve(&pairs[..32], &store).unwrap();
        let shape = ModelShape {
            feature_kinds: vec![FeatureKind::Prod2vec],
            input_dims: vec![4],
            reproj_dim: 48,
            fusion_dim: 128,
        };
        let mut model = SiameseModel::new(shape, 11).unwrap();
        let mut adam = Adam::new(model.num_params(), 1e-3);
        let mut grad = vec![0.0; model.num_params()];
        let mut prev = f64::INFINITY;
        for _ in 0..10 {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let loss = batch_loss(&model, &examples, Some(&mut grad));
            assert!(loss < prev, "loss {loss} did not drop below {prev}");
            prev = loss;
            adam.step(&mut model.params, &grad);
        }
    }
}
