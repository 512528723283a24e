use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{FeatureBundle, FeatureKind};
use crate::error::{Error, Result};
use crate::io::{read_json, write_json};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShape {
    pub feature_kinds: Vec<FeatureKind>,
    pub input_dims: Vec<usize>,
    pub reproj_dim: usize,
    pub fusion_dim: usize,
}

impl ModelShape {
    /// 48-dim re-projections and a 128-dim fusion layer.
    pub fn standard(feature_kinds: Vec<FeatureKind>, input_dims: Vec<usize>) -> Self {
        Self {
            feature_kinds,
            input_dims,
            reproj_dim: 48,
            fusion_dim: 128,
        }
    }

    fn concat_dim(&self) -> usize {
        self.reproj_dim * self.input_dims.len()
    }

    fn validate(&self) -> Result<()> {
        if self.input_dims.is_empty()
            || self.input_dims.len() != self.feature_kinds.len()
            || self.input_dims.contains(&0)
            || self.reproj_dim == 0
            || self.fusion_dim == 0
        {
            return Err(Error::InvalidArgument(format!("invalid model shape {self:?}")));
        }
        Ok(())
    }
}

/// Location of one dense layer inside the flat parameter vector:
/// `rows x cols` row-major weights followed by `rows` biases.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

impl LayerSpec {
    fn weights(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.rows * self.cols
    }

    fn bias(&self) -> std::ops::Range<usize> {
        let start = self.offset + self.rows * self.cols;
        start..start + self.rows
    }

    pub fn len(&self) -> usize {
        self.rows * (self.cols + 1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SiameseModel {
    pub shape: ModelShape,
    pub layers: Vec<LayerSpec>,
    pub params: Vec<f64>,
}

/// Output of the fusion tower. `degenerate` marks an all-zero pre-norm
/// vector, for which the zero vector is returned.
#[derive(Debug, Clone, PartialEq)]
pub struct Fused {
    pub vector: Vec<f64>,
    pub degenerate: bool,
}

pub(crate) struct Tower {
    /// Concatenated re-projection activations.
    acts: Vec<f64>,
    /// Fusion activations before normalization.
    fused: Vec<f64>,
    norm: f64,
    pub(crate) unit: Vec<f64>,
}

fn layout(shape: &ModelShape) -> Vec<LayerSpec> {
    let mut layers = Vec::with_capacity(shape.input_dims.len() + 2);
    let mut offset = 0;
    let mut push = |name: String, rows: usize, cols: usize| {
        let spec = LayerSpec {
            name,
            rows,
            cols,
            offset,
        };
        offset += spec.len();
        layers.push(spec);
    };
    for (kind, &dim) in shape.feature_kinds.iter().zip(&shape.input_dims) {
        push(format!("reproject_{kind}"), shape.reproj_dim, dim);
    }
    push("fusion".into(), shape.fusion_dim, shape.concat_dim());
    push("classifier".into(), 1, shape.fusion_dim);
    layers
}

fn dense(params: &[f64], layer: &LayerSpec, input: &[f64], out: &mut Vec<f64>) {
    let w = &params[layer.weights()];
    let b = &params[layer.bias()];
    out.clear();
    out.extend(w.chunks_exact(layer.cols).zip(b).map(|(row, bias)| {
        bias + row.iter().zip(input).map(|(x, y)| x * y).sum::<f64>()
    }));
}

fn relu_in_place(v: &mut [f64]) {
    v.iter_mut().for_each(|x| *x = x.max(0.0));
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Binary cross-entropy computed from the logit.
pub(crate) fn bce_with_logit(logit: f64, label: f64) -> f64 {
    logit.max(0.0) - logit * label + (-logit.abs()).exp().ln_1p()
}

impl SiameseModel {
    /// Uniform He-style initialization scaled by fan-in; zero biases.
    pub fn new(shape: ModelShape, seed: u64) -> Result<Self> {
        shape.validate()?;
        let layers = layout(&shape);
        let total = layers.iter().map(LayerSpec::len).sum();
        let mut params = vec![0.0; total];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in &layers {
            let limit = (6.0 / layer.cols as f64).sqrt();
            for p in &mut params[layer.weights()] {
                *p = rng.random_range(-limit..limit);
            }
        }
        Ok(Self {
            shape,
            layers,
            params,
        })
    }

    pub fn from_params(shape: ModelShape, params: Vec<f64>) -> Result<Self> {
        shape.validate()?;
        let layers = layout(&shape);
        let total: usize = layers.iter().map(LayerSpec::len).sum();
        if params.len() != total {
            return Err(Error::InvalidArgument(format!(
                "expected {total} parameters, got {}",
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidArgument("non-finite model parameter".into()));
        }
        Ok(Self {
            shape,
            layers,
            params,
        })
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    fn classifier(&self) -> &LayerSpec {
        self.layers.last().expect("model has a classifier layer")
    }

    fn fusion(&self) -> &LayerSpec {
        &self.layers[self.layers.len() - 2]
    }

    /// Parameter range of the classifier (weights and bias).
    pub fn classifier_range(&self) -> std::ops::Range<usize> {
        let c = self.classifier();
        c.offset..c.offset + c.len()
    }

    fn check(&self, bundle: &FeatureBundle) -> Result<()> {
        if bundle.parts.len() != self.shape.input_dims.len() {
            return Err(Error::InvalidArgument(format!(
                "bundle has {} parts, model expects {}",
                bundle.parts.len(),
                self.shape.input_dims.len()
            )));
        }
        for ((part, &dim), kind) in bundle
            .parts
            .iter()
            .zip(&self.shape.input_dims)
            .zip(&self.shape.feature_kinds)
        {
            if part.len() != dim {
                return Err(Error::Dimension {
                    id: format!("<{kind} feature>"),
                    expected: dim,
                    actual: part.len(),
                });
            }
        }
        Ok(())
    }

    pub(crate) fn tower(&self, bundle: &FeatureBundle) -> Tower {
        let r = self.shape.reproj_dim;
        let mut acts = Vec::with_capacity(self.shape.concat_dim());
        let mut buf = Vec::with_capacity(r);
        for (part, layer) in bundle.parts.iter().zip(&self.layers) {
            dense(&self.params, layer, part, &mut buf);
            relu_in_place(&mut buf);
            acts.extend_from_slice(&buf);
        }
        let mut fused = Vec::with_capacity(self.shape.fusion_dim);
        dense(&self.params, self.fusion(), &acts, &mut fused);
        relu_in_place(&mut fused);
        let norm = fused.iter().map(|x| x * x).sum::<f64>().sqrt();
        let unit = if norm > 0.0 {
            fused.iter().map(|x| x / norm).collect()
        } else {
            vec![0.0; fused.len()]
        };
        Tower {
            acts,
            fused,
            norm,
            unit,
        }
    }

    pub fn fuse(&self, bundle: &FeatureBundle) -> Result<Fused> {
        self.check(bundle)?;
        let t = self.tower(bundle);
        Ok(Fused {
            degenerate: t.norm == 0.0,
            vector: t.unit,
        })
    }

    pub(crate) fn logit(&self, h1: &[f64], h2: &[f64]) -> f64 {
        let c = self.classifier();
        let w = &self.params[c.weights()];
        let b = self.params[c.bias().start];
        b + w
            .iter()
            .zip(h1.iter().zip(h2))
            .map(|(w, (x, y))| w * (x - y).abs())
            .sum::<f64>()
    }

    /// Substitute probability for a pair; symmetric in its arguments.
    pub fn score_pair(&self, b1: &FeatureBundle, b2: &FeatureBundle) -> Result<f64> {
        let h1 = self.fuse(b1)?.vector;
        let h2 = self.fuse(b2)?.vector;
        Ok(sigmoid(self.logit(&h1, &h2)))
    }

    /// Scores many pairs, fusing each distinct bundle once.
    pub fn score_fused(&self, h1: &[f64], h2: &[f64]) -> f64 {
        sigmoid(self.logit(h1, h2))
    }

    fn tower_backward(&self, bundle: &FeatureBundle, t: &Tower, g_unit: &[f64], grad: &mut [f64]) {
        if t.norm == 0.0 {
            return;
        }
        let hg: f64 = t.unit.iter().zip(g_unit).map(|(h, g)| h * g).sum();
        let g_fused: Vec<f64> = t
            .unit
            .iter()
            .zip(g_unit)
            .zip(&t.fused)
            .map(|((h, g), r)| if *r > 0.0 { (g - h * hg) / t.norm } else { 0.0 })
            .collect();

        let fusion = self.fusion();
        let cols = fusion.cols;
        let mut g_acts = vec![0.0; cols];
        let (w_range, b_range) = (fusion.weights(), fusion.bias());
        for (o, &g) in g_fused.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            grad[b_range.start + o] += g;
            let row = w_range.start + o * cols;
            let w_row = &self.params[row..row + cols];
            for ((gw, ga), (w, a)) in grad[row..row + cols]
                .iter_mut()
                .zip(g_acts.iter_mut())
                .zip(w_row.iter().zip(&t.acts))
            {
                *gw += g * a;
                *ga += g * w;
            }
        }

        let r = self.shape.reproj_dim;
        for (k, (part, layer)) in bundle.parts.iter().zip(&self.layers).enumerate() {
            let (w_range, b_range) = (layer.weights(), layer.bias());
            for o in 0..r {
                let idx = k * r + o;
                if t.acts[idx] <= 0.0 || g_acts[idx] == 0.0 {
                    continue;
                }
                let g = g_acts[idx];
                grad[b_range.start + o] += g;
                let row = w_range.start + o * layer.cols;
                for (gw, x) in grad[row..row + layer.cols].iter_mut().zip(part) {
                    *gw += g * x;
                }
            }
        }
    }

    /// Loss for one labelled pair; when `grad` is given, accumulates
    /// `scale * dLoss/dParams` into it.
    pub(crate) fn pair_loss(
        &self,
        b1: &FeatureBundle,
        b2: &FeatureBundle,
        label: f64,
        grad: Option<(&mut [f64], f64)>,
    ) -> f64 {
        let t1 = self.tower(b1);
        let t2 = self.tower(b2);
        let logit = self.logit(&t1.unit, &t2.unit);
        let loss = bce_with_logit(logit, label);
        let Some((grad, scale)) = grad else {
            return loss;
        };
        let g_logit = (sigmoid(logit) - label) * scale;
        let c = self.classifier();
        let (w_range, b_idx) = (c.weights(), c.bias().start);
        grad[b_idx] += g_logit;
        let mut g1 = vec![0.0; t1.unit.len()];
        for (i, (x, y)) in t1.unit.iter().zip(&t2.unit).enumerate() {
            let diff = x - y;
            grad[w_range.start + i] += g_logit * diff.abs();
            let sign = if diff > 0.0 {
                1.0
            } else if diff < 0.0 {
                -1.0
            } else {
                0.0
            };
            g1[i] = g_logit * self.params[w_range.start + i] * sign;
        }
        self.tower_backward(b1, &t1, &g1, grad);
        let g2: Vec<f64> = g1.iter().map(|g| -g).collect();
        self.tower_backward(b2, &t2, &g2, grad);
        loss
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let layers = self
            .layers
            .iter()
            .map(|l| LayerFile {
                name: l.name.clone(),
                rows: l.rows,
                cols: l.cols,
                weights: self.params[l.weights()].to_vec(),
                bias: self.params[l.bias()].to_vec(),
            })
            .collect();
        write_json(
            path,
            &ModelFile {
                shape: self.shape.clone(),
                layers,
            },
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file: ModelFile = read_json(path)?;
        let mut params = Vec::new();
        for l in &file.layers {
            if l.weights.len() != l.rows * l.cols || l.bias.len() != l.rows {
                return Err(Error::InvalidArgument(format!("layer {} has wrong size", l.name)));
            }
            params.extend_from_slice(&l.weights);
            params.extend_from_slice(&l.bias);
        }
        Self::from_params(file.shape, params)
    }
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    name: String,
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    #[serde(flatten)]
    shape: ModelShape,
    layers: Vec<LayerFile>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_shape() -> ModelShape {
        ModelShape {
            feature_kinds: vec![FeatureKind::Name],
            input_dims: vec![2],
            reproj_dim: 2,
            fusion_dim: 2,
        }
    }

    /// reproject W=[[1,0],[0,1]] b=[0,-1]; fusion W=[[1,1],[1,-1]] b=[0,0];
    /// classifier w=[2,-1] b=0.5.
    fn tiny_model() -> SiameseModel {
        let params = vec![
            1.0, 0.0, 0.0, 1.0, 0.0, -1.0, // reproject
            1.0, 1.0, 1.0, -1.0, 0.0, 0.0, // fusion
            2.0, -1.0, 0.5, // classifier
        ];
        SiameseModel::from_params(tiny_shape(), params).unwrap()
    }

    fn bundle(v: &[f64]) -> FeatureBundle {
        FeatureBundle {
            parts: vec![v.to_vec()],
        }
    }

    #[test]
    fn fuse_matches_hand_computation() {
        // x=(3,2): reproject relu(3, 1) -> fusion relu(4, 2) -> /sqrt(20)
        let f = tiny_model().fuse(&bundle(&[3.0, 2.0])).unwrap();
        let n = 20f64.sqrt();
        assert!((f.vector[0] - 4.0 / n).abs() < 1e-9);
        assert!((f.vector[1] - 2.0 / n).abs() < 1e-9);
        assert!(!f.degenerate);
    }

    #[test]
    fn score_matches_hand_computation() {
        let m = tiny_model();
        // x=(3,2) -> h1=(4,2)/sqrt(20); y=(1,3): reproject (1,2) -> fusion relu(3,-1)=(3,0) -> h2=(1,0)
        let n = 20f64.sqrt();
        let d = [(4.0 / n - 1.0f64).abs(), (2.0 / n - 0.0f64).abs()];
        let logit = 0.5 + 2.0 * d[0] - d[1];
        let expected = 1.0 / (1.0 + (-logit).exp());
        let got = m.score_pair(&bundle(&[3.0, 2.0]), &bundle(&[1.0, 3.0])).unwrap();
        assert!((got - expected).abs() < 1e-9);
    }

    #[test]
    fn self_score_is_sigmoid_of_bias() {
        let m = tiny_model();
        let b = bundle(&[0.3, 7.0]);
        let s = m.score_pair(&b, &b).unwrap();
        assert_eq!(s, 1.0 / (1.0 + (-0.5f64).exp()));
    }

    #[test]
    fn degenerate_fusion_is_flagged() {
        // x=(0,0): reproject relu(0,-1)=(0,0) -> fusion (0,0)
        let f = tiny_model().fuse(&bundle(&[0.0, 0.0])).unwrap();
        assert!(f.degenerate);
        assert_eq!(f.vector, vec![0.0, 0.0]);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let m = tiny_model();
        assert!(m.fuse(&bundle(&[1.0])).is_err());
        assert!(m
            .fuse(&FeatureBundle {
                parts: vec![vec![1.0, 2.0], vec![1.0]]
            })
            .is_err());
    }

    #[test]
    fn standard_model_layout() {
        let shape = ModelShape::standard(
            crate::substmodel::BEST_FEATURES.to_vec(),
            vec![48; 4],
        );
        let m = SiameseModel::new(shape, 1).unwrap();
        assert_eq!(m.layers.len(), 6);
        assert_eq!(m.num_params(), 4 * 48 * 49 + 128 * 193 + 129);
        assert_eq!(m.classifier_range().len(), 129);
    }

    #[test]
    fn save_load_round_trip() {
        let m = SiameseModel::new(tiny_shape(), 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("model.json");
        m.save(&p).unwrap();
        assert_eq!(SiameseModel::load(&p).unwrap(), m);
    }

    #[test]
    fn bce_is_stable() {
        assert!((bce_with_logit(0.0, 1.0) - 2f64.ln()).abs() < 1e-15);
        assert!(bce_with_logit(1000.0, 1.0) < 1e-300 + 1e-12);
        assert!((bce_with_logit(-1000.0, 1.0) - 1000.0).abs() < 1e-9);
    }
}
