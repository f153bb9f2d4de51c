//! The two-branch descriptor network and its parameter storage.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::layers::{self, LayerSpec, Shape};
use super::real::Real;
use crate::error::{invalid, Result};
use crate::volume::{Patch, PatchPairSpec};

/// Which patch scales feed the multi-scale encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScaleMode {
    #[default]
    Multi,
    /// Fine (0.6 m) branch only.
    Fine,
    /// Coarse (1.2 m) branch only.
    Coarse,
}

impl ScaleMode {
    pub fn uses_fine(self) -> bool {
        matches!(self, ScaleMode::Multi | ScaleMode::Fine)
    }

    pub fn uses_coarse(self) -> bool {
        matches!(self, ScaleMode::Multi | ScaleMode::Coarse)
    }
}

/// Architecture of a [`DescriptorModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSpec {
    pub input_resolution: usize,
    pub sse: Vec<LayerSpec>,
    pub mse: Vec<LayerSpec>,
    pub scales: ScaleMode,
    pub patch: PatchPairSpec,
}

impl Default for ModelSpec {
    fn default() -> Self {
        use LayerSpec::*;
        ModelSpec {
            input_resolution: 32,
            sse: vec![
                Conv3 { out: 8 },
                Relu,
                Conv3 { out: 16 },
                Relu,
                MaxPool2,
                Conv3 { out: 32 },
                Relu,
                Conv3 { out: 64 },
                Relu,
                MaxPool2,
                Linear { out: 256 },
                Relu,
            ],
            mse: vec![Linear { out: 512 }, Relu, Linear { out: 512 }],
            scales: ScaleMode::Multi,
            patch: PatchPairSpec::default(),
        }
    }
}

impl ModelSpec {
    pub fn with_scales(mut self, scales: ScaleMode) -> Self {
        self.scales = scales;
        self
    }

    fn sse_output(&self) -> Result<usize> {
        let mut s = Shape::Volume { channels: 1, side: self.input_resolution };
        for l in &self.sse {
            s = l.output_shape(s)?;
        }
        match s {
            Shape::Flat(n) => Ok(n),
            Shape::Volume { .. } => invalid("single-scale encoder must end in a linear layer"),
        }
    }

    fn mse_input(&self) -> Result<usize> {
        let per = self.sse_output()?;
        Ok(if self.scales == ScaleMode::Multi { 2 * per } else { per })
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_resolution != self.patch.resolution {
            return invalid(format!(
                "model input resolution {} differs from patch resolution {}",
                self.input_resolution, self.patch.resolution
            ));
        }
        if self.input_resolution < 2 {
            return invalid("input resolution must be ≥ 2");
        }
        if self.mse.is_empty() || !matches!(self.mse.last(), Some(LayerSpec::Linear { .. })) {
            return invalid("multi-scale encoder must end in a linear layer");
        }
        let mut s = Shape::Flat(self.mse_input()?);
        for l in &self.mse {
            s = l.output_shape(s)?;
        }
        Ok(())
    }

    /// Length of the output feature.
    pub fn feature_dim(&self) -> usize {
        match self.mse.last() {
            Some(LayerSpec::Linear { out }) => *out,
            _ => 0,
        }
    }
}

/// One stack of layers with all its parameters in a single flat vector
/// (per layer: weights, then biases).
#[derive(Debug, Clone, PartialEq)]
pub struct Branch<T> {
    layers: Vec<LayerSpec>,
    shapes: Vec<Shape>,
    offsets: Vec<usize>,
    params: Vec<T>,
}

/// Activations recorded during a forward pass, consumed by backprop.
pub(crate) struct Trace<T> {
    inputs: Vec<Vec<T>>,
    argmax: Vec<Vec<u32>>,
    pub output: Vec<T>,
}

impl<T: Real> Branch<T> {
    pub fn zeros(layers: &[LayerSpec], input: Shape) -> Result<Self> {
        let mut shapes = vec![input];
        let mut offsets = vec![0];
        let mut total = 0;
        let mut s = input;
        for l in layers {
            let (w, b) = l.parameter_counts(s);
            total += w + b;
            offsets.push(total);
            s = l.output_shape(s)?;
            shapes.push(s);
        }
        Ok(Branch { layers: layers.to_vec(), shapes, offsets, params: vec![T::zero(); total] })
    }

    /// He-normal weights, zero biases.
    fn init_he(&mut self, rng: &mut ChaCha8Rng) {
        for i in 0..self.layers.len() {
            let (w, _) = self.layers[i].parameter_counts(self.shapes[i]);
            if w == 0 {
                continue;
            }
            let fan_in = self.layers[i].fan_in(self.shapes[i]);
            let normal = Normal::new(0.0f64, (2.0 / fan_in as f64).sqrt()).expect("finite std");
            let start = self.offsets[i];
            for p in &mut self.params[start..start + w] {
                *p = T::from_f32(normal.sample(rng) as f32);
            }
        }
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn input_shape(&self) -> Shape {
        self.shapes[0]
    }

    pub fn output_len(&self) -> usize {
        self.shapes[self.layers.len()].len()
    }

    fn split(&self, i: usize) -> (&[T], &[T]) {
        let (w, _) = self.layers[i].parameter_counts(self.shapes[i]);
        let p = &self.params[self.offsets[i]..self.offsets[i + 1]];
        p.split_at(w)
    }

    pub(crate) fn forward(&self, input: &[T], scratch: &mut Vec<T>) -> Vec<T> {
        let mut x = input.to_vec();
        for i in 0..self.layers.len() {
            x = self.apply(i, &x, scratch).0;
        }
        x
    }

    pub(crate) fn forward_trace(&self, input: &[T], scratch: &mut Vec<T>) -> Trace<T> {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut argmax = Vec::new();
        let mut x = input.to_vec();
        for i in 0..self.layers.len() {
            let (y, arg) = self.apply(i, &x, scratch);
            if let Some(a) = arg {
                argmax.push(a);
            }
            inputs.push(x);
            x = y;
        }
        Trace { inputs, argmax, output: x }
    }

    fn apply(&self, i: usize, x: &[T], scratch: &mut Vec<T>) -> (Vec<T>, Option<Vec<u32>>) {
        let (w, b) = self.split(i);
        match (self.layers[i], self.shapes[i]) {
            (LayerSpec::Conv3 { out }, Shape::Volume { channels, side }) => {
                (layers::conv3_forward(x, channels, side, w, b, out, scratch), None)
            }
            (LayerSpec::Relu, _) => (layers::relu_forward(x), None),
            (LayerSpec::MaxPool2, Shape::Volume { channels, side }) => {
                let (y, a) = layers::maxpool2_forward(x, channels, side);
                (y, Some(a))
            }
            (LayerSpec::Linear { out }, _) => (layers::linear_forward(x, w, b, out), None),
            _ => unreachable!("shapes were validated at construction"),
        }
    }

    /// Accumulates parameter gradients into `grads` and returns the gradient
    /// with respect to the branch input when asked.
    pub(crate) fn backward(
        &self,
        trace: &Trace<T>,
        grad_out: Vec<T>,
        grads: &mut [T],
        need_input_grad: bool,
        scratch: &mut Vec<T>,
    ) -> Option<Vec<T>> {
        let mut g = grad_out;
        let mut pool_idx = trace.argmax.len();
        for i in (0..self.layers.len()).rev() {
            let x = &trace.inputs[i];
            let want = need_input_grad || i > 0;
            let (w, _) = self.split(i);
            let (wl, _) = self.layers[i].parameter_counts(self.shapes[i]);
            let (gw, gb) = grads[self.offsets[i]..self.offsets[i + 1]].split_at_mut(wl);
            let next = match (self.layers[i], self.shapes[i]) {
                (LayerSpec::Conv3 { out }, Shape::Volume { channels, side }) => {
                    layers::conv3_backward(x, channels, side, w, out, &g, gw, gb, want, scratch)
                }
                (LayerSpec::Relu, _) => Some(layers::relu_backward(x, &g)),
                (LayerSpec::MaxPool2, _) => {
                    pool_idx -= 1;
                    Some(layers::maxpool2_backward(&g, &trace.argmax[pool_idx], x.len()))
                }
                (LayerSpec::Linear { out }, _) => layers::linear_backward(x, w, out, &g, gw, gb, want),
                _ => unreachable!("shapes were validated at construction"),
            };
            match next {
                Some(n) => g = n,
                None => return None,
            }
        }
        Some(g)
    }
}

/// Stage of training a model's parameters come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    /// Freshly initialized.
    #[default]
    Init,
    Static,
    Dynamic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct TrainingMeta {
    pub stage: Stage,
    pub seed: u64,
    pub epoch: u32,
}

/// Single-scale encoders (separate weights per scale) plus the multi-scale
/// encoder. Each is one parameter set, evaluated once per triplet stream.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorModel<T = f32> {
    spec: ModelSpec,
    pub(crate) sse_fine: Option<Branch<T>>,
    pub(crate) sse_coarse: Option<Branch<T>>,
    pub(crate) mse: Branch<T>,
    pub meta: TrainingMeta,
}

impl<T: Real> DescriptorModel<T> {
    /// All parameters zero.
    pub fn zeros(spec: ModelSpec) -> Result<Self> {
        spec.validate()?;
        let input = Shape::Volume { channels: 1, side: spec.input_resolution };
        let sse = |used: bool| -> Result<Option<Branch<T>>> {
            if used {
                Ok(Some(Branch::zeros(&spec.sse, input)?))
            } else {
                Ok(None)
            }
        };
        let sse_fine = sse(spec.scales.uses_fine())?;
        let sse_coarse = sse(spec.scales.uses_coarse())?;
        let mse = Branch::zeros(&spec.mse, Shape::Flat(spec.mse_input()?))?;
        Ok(DescriptorModel { spec, sse_fine, sse_coarse, mse, meta: TrainingMeta::default() })
    }

    /// He-initialized model; each branch draws from its own stream of `seed`.
    pub fn new(spec: ModelSpec, seed: u64) -> Result<Self> {
        let mut m = Self::zeros(spec)?;
        for (stream, b) in m.branches_mut().into_iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream as u64);
            b.init_he(&mut rng);
        }
        m.meta.seed = seed;
        Ok(m)
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn feature_dim(&self) -> usize {
        self.spec.feature_dim()
    }

    /// Branches in serialization order: fine, coarse, multi-scale.
    pub fn branches(&self) -> Vec<&Branch<T>> {
        self.sse_fine.iter().chain(self.sse_coarse.iter()).chain(std::iter::once(&self.mse)).collect()
    }

    pub fn branches_mut(&mut self) -> Vec<&mut Branch<T>> {
        self.sse_fine.iter_mut().chain(self.sse_coarse.iter_mut()).chain(std::iter::once(&mut self.mse)).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.branches().iter().map(|b| b.params().len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.branches().iter().all(|b| b.params().iter().all(|p| p.is_finite()))
    }

    fn check_patch(&self, p: &Patch) -> Result<()> {
        if p.resolution() != self.spec.input_resolution {
            return invalid(format!(
                "patch resolution {} does not match model input {}",
                p.resolution(),
                self.spec.input_resolution
            ));
        }
        Ok(())
    }

    /// Single-scale embeddings concatenated in (fine, coarse) order.
    pub(crate) fn sse_embed(&self, fine: &[T], coarse: &[T], scratch: &mut Vec<T>) -> Vec<T> {
        let mut out = Vec::with_capacity(self.mse.input_shape().len());
        if let Some(b) = &self.sse_fine {
            out.extend(b.forward(fine, scratch));
        }
        if let Some(b) = &self.sse_coarse {
            out.extend(b.forward(coarse, scratch));
        }
        out
    }

    pub(crate) fn forward_values(&self, fine: &[T], coarse: &[T], scratch: &mut Vec<T>) -> Vec<T> {
        let e = self.sse_embed(fine, coarse, scratch);
        self.mse.forward(&e, scratch)
    }

    /// Feature vector for one inverted (fine, coarse) patch pair.
    pub fn forward(&self, fine: &Patch, coarse: &Patch) -> Result<Vec<f32>> {
        self.check_patch(fine)?;
        self.check_patch(coarse)?;
        let f: Vec<T> = fine.values().iter().map(|&v| T::from_f32(v)).collect();
        let c: Vec<T> = coarse.values().iter().map(|&v| T::from_f32(v)).collect();
        let mut scratch = Vec::new();
        Ok(self.forward_values(&f, &c, &mut scratch).into_iter().map(T::to_single).collect())
    }

    /// Converts parameters to another scalar type.
    pub fn cast<U: Real>(&self) -> DescriptorModel<U> {
        let conv = |b: &Branch<T>| Branch {
            layers: b.layers.clone(),
            shapes: b.shapes.clone(),
            offsets: b.offsets.clone(),
            params: b.params.iter().map(|&p| U::from_f32(p.to_single())).collect(),
        };
        DescriptorModel {
            spec: self.spec.clone(),
            sse_fine: self.sse_fine.as_ref().map(conv),
            sse_coarse: self.sse_coarse.as_ref().map(conv),
            mse: conv(&self.mse),
            meta: self.meta,
        }
    }

    /// Order-sensitive FNV-1a hash over the parameter bit patterns of the
    /// single-scale encoders.
    pub fn sse_checksum(&self) -> u64 {
        let mut h = 0xcbf29ce484222325u64;
        for b in self.sse_fine.iter().chain(self.sse_coarse.iter()) {
            for p in b.params() {
                for byte in p.to_single().to_bits().to_le_bytes() {
                    h ^= byte as u64;
                    h = h.wrapping_mul(0x100000001b3);
                }
            }
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_spec_output_is_512() {
        let spec = ModelSpec::default();
        spec.validate().unwrap();
        assert_eq!(spec.feature_dim(), 512);
        assert_eq!(spec.sse_output().unwrap(), 256);
    }

    #[test]
    fn zero_model_gives_zero_feature() {
        let m = DescriptorModel::<f32>::zeros(ModelSpec::default()).unwrap();
        let p = Patch::from_values(32, 0.6, true, vec![0.7; 32 * 32 * 32]).unwrap();
        let q = Patch::from_values(32, 1.2, true, vec![0.3; 32 * 32 * 32]).unwrap();
        let f = m.forward(&p, &q).unwrap();
        assert_eq!(f.len(), 512);
        assert!(f.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn branches_do_not_share_weights() {
        let m = DescriptorModel::<f32>::new(ModelSpec::default(), 3).unwrap();
        let (f, c) = (m.sse_fine.as_ref().unwrap(), m.sse_coarse.as_ref().unwrap());
        assert_eq!(f.params().len(), c.params().len());
        assert_ne!(f.params(), c.params());
    }

    #[test]
    fn single_scale_has_one_encoder() {
        let m = DescriptorModel::<f32>::new(ModelSpec::default().with_scales(ScaleMode::Coarse), 1).unwrap();
        assert!(m.sse_fine.is_none());
        assert_eq!(m.mse.input_shape(), Shape::Flat(256));
        assert_eq!(m.branches().len(), 2);
    }

    #[test]
    fn rejects_wrong_patch_size() {
        let m = DescriptorModel::<f32>::zeros(ModelSpec::default()).unwrap();
        let p = Patch::from_values(8, 0.6, true, vec![0.0; 512]).unwrap();
        assert!(m.forward(&p, &p).is_err());
    }
}
