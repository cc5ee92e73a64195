use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Stride-1, unpadded 2-D convolution geometry. The layer weight is stored
/// flattened as `out_channels × (in_channels·kernel_h·kernel_w)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvGeometry {
    pub in_channels: usize,
    pub in_height: usize,
    pub in_width: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
}

impl ConvGeometry {
    pub fn out_height(&self) -> usize {
        self.in_height - self.kernel_h + 1
    }

    pub fn out_width(&self) -> usize {
        self.in_width - self.kernel_w + 1
    }

    pub fn positions(&self) -> usize {
        self.out_height() * self.out_width()
    }

    pub fn patch_len(&self) -> usize {
        self.in_channels * self.kernel_h * self.kernel_w
    }

    pub fn input_len(&self) -> usize {
        self.in_channels * self.in_height * self.in_width
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerKind {
    Dense,
    Conv2d(ConvGeometry),
}

/// Layer description used to build a [`Network`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerSpec {
    Dense { out: usize },
    Conv2d { geometry: ConvGeometry, out_channels: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub layers: Vec<LayerSpec>,
    /// Indices of layers that receive adapters. Never the classifier head.
    pub target_layers: Vec<usize>,
    pub use_norm: bool,
}

impl NetworkSpec {
    /// Dense ReLU stack `input → widths[0] → … → widths[last]` (the last width
    /// is the feature dimension fed to classifier heads).
    pub fn mlp(input_dim: usize, widths: &[usize], target_layers: Vec<usize>, use_norm: bool) -> Self {
        Self {
            input_dim,
            layers: widths.iter().map(|&out| LayerSpec::Dense { out }).collect(),
            target_layers,
            use_norm,
        }
    }

    /// `input → 64 → 64 → 32`, adapters on the two 64-wide hidden layers.
    pub fn default_mlp(input_dim: usize) -> Self {
        Self::mlp(input_dim, &[64, 64, 32], vec![0, 1], true)
    }
}

/// One backbone layer: affine map (dense or conv), followed in the forward
/// pass by optional normalization and ReLU.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub kind: LayerKind,
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Layer {
    /// Output channels (dense: output units).
    pub fn channels(&self) -> usize {
        self.weight.rows()
    }

    /// Spatial positions per channel (dense: 1).
    pub fn positions(&self) -> usize {
        match self.kind {
            LayerKind::Dense => 1,
            LayerKind::Conv2d(g) => g.positions(),
        }
    }

    pub fn in_dim(&self) -> usize {
        match self.kind {
            LayerKind::Dense => self.weight.cols(),
            LayerKind::Conv2d(g) => g.input_len(),
        }
    }

    pub fn out_dim(&self) -> usize {
        self.channels() * self.positions()
    }

    pub fn param_count(&self) -> usize {
        self.weight.rows() * self.weight.cols() + self.bias.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub layers: Vec<Layer>,
    pub target_layers: Vec<usize>,
    pub use_norm: bool,
}

impl Network {
    pub fn init(spec: &NetworkSpec, rng: &mut impl Rng) -> Result<Self> {
        if spec.layers.is_empty() || spec.input_dim == 0 {
            return Err(Error::InvalidConfig("network needs an input and at least one layer".into()));
        }
        let mut layers = Vec::with_capacity(spec.layers.len());
        let mut width = spec.input_dim;
        for (i, ls) in spec.layers.iter().enumerate() {
            let layer = match *ls {
                LayerSpec::Dense { out } => {
                    if out == 0 {
                        return Err(Error::InvalidConfig(format!("layer {i} has zero width")));
                    }
                    Layer { kind: LayerKind::Dense, weight: glorot(out, width, rng), bias: vec![0.0; out] }
                }
                LayerSpec::Conv2d { geometry: g, out_channels } => {
                    if g.input_len() != width {
                        return Err(Error::InvalidShape(format!(
                            "conv layer {i} expects {} inputs, previous layer gives {width}",
                            g.input_len()
                        )));
                    }
                    if g.kernel_h == 0
                        || g.kernel_w == 0
                        || g.kernel_h > g.in_height
                        || g.kernel_w > g.in_width
                        || out_channels == 0
                    {
                        return Err(Error::InvalidConfig(format!("conv layer {i} has an invalid kernel")));
                    }
                    Layer {
                        kind: LayerKind::Conv2d(g),
                        weight: glorot(out_channels, g.patch_len(), rng),
                        bias: vec![0.0; out_channels],
                    }
                }
            };
            width = layer.out_dim();
            layers.push(layer);
        }
        let mut target_layers = spec.target_layers.clone();
        target_layers.sort_unstable();
        target_layers.dedup();
        if let Some(&bad) = target_layers.iter().find(|&&t| t >= layers.len()) {
            return Err(Error::UnknownTargetLayer(bad));
        }
        Ok(Self { layers, target_layers, use_norm: spec.use_norm })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn feature_dim(&self) -> usize {
        self.layers.last().map_or(0, Layer::out_dim)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    pub fn fingerprint(&self) -> u64 {
        let mut h = Fingerprint::new();
        for l in &self.layers {
            h.feed(l.weight.as_slice());
            h.feed(&l.bias);
        }
        h.finish()
    }
}

/// Per-channel affine normalization with running statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormLayer {
    pub scale: Vec<f64>,
    pub shift: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
}

impl NormLayer {
    pub fn fresh(channels: usize) -> Self {
        Self {
            scale: vec![1.0; channels],
            shift: vec![0.0; channels],
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
        }
    }
}

/// Normalization state for every backbone layer; empty when the network has no norms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormParams {
    pub layers: Vec<NormLayer>,
}

impl NormParams {
    pub fn fresh(net: &Network) -> Self {
        let layers =
            if net.use_norm { net.layers.iter().map(|l| NormLayer::fresh(l.channels())).collect() } else { Vec::new() };
        Self { layers }
    }

    /// Learnable entries only (scale and shift); running statistics are buffers.
    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.scale.len() + l.shift.len()).sum()
    }

    pub fn fingerprint(&self) -> u64 {
        let mut h = Fingerprint::new();
        for l in &self.layers {
            h.feed(&l.scale);
            h.feed(&l.shift);
            h.feed(&l.running_mean);
            h.feed(&l.running_var);
        }
        h.finish()
    }
}

/// Linear classifier over backbone features for a contiguous block of global classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierHead {
    /// `classes × feature_dim`
    pub weight: Matrix,
    pub bias: Vec<f64>,
    pub class_start: usize,
}

impl ClassifierHead {
    pub fn init(classes: usize, feature_dim: usize, class_start: usize, rng: &mut impl Rng) -> Self {
        Self { weight: glorot(classes, feature_dim, rng), bias: vec![0.0; classes], class_start }
    }

    pub fn num_classes(&self) -> usize {
        self.weight.rows()
    }

    pub fn class_range(&self) -> Range<usize> {
        self.class_start..self.class_start + self.num_classes()
    }

    pub fn param_count(&self) -> usize {
        self.weight.rows() * self.weight.cols() + self.bias.len()
    }

    /// Appends freshly initialized rows for `extra` new classes.
    pub fn grow(&mut self, extra: usize, rng: &mut impl Rng) {
        let fresh = glorot(extra, self.weight.cols(), rng);
        let rows = self.weight.rows() + extra;
        let mut data = self.weight.as_slice().to_vec();
        data.extend_from_slice(fresh.as_slice());
        self.weight = Matrix::new(rows, self.weight.cols(), data).expect("grown head keeps its shape");
        self.bias.resize(rows, 0.0);
    }

    pub fn fingerprint(&self) -> u64 {
        let mut h = Fingerprint::new();
        h.feed(self.weight.as_slice());
        h.feed(&self.bias);
        h.finish()
    }
}

/// Uniform in `±sqrt(6 / (rows + cols))`.
pub fn glorot(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-bound..bound))
}

/// FNV-1a over the bit patterns of `f64` slices.
pub(crate) struct Fingerprint(u64);

impl Fingerprint {
    pub(crate) fn new() -> Self {
        Self(0xcbf2_9ce4_8422_2325)
    }

    pub(crate) fn feed(&mut self, values: &[f64]) {
        for v in values {
            for b in v.to_bits().to_le_bytes() {
                self.0 ^= u64::from(b);
                self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
            }
        }
    }

    pub(crate) fn finish(&self) -> u64 {
        self.0
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn default_mlp_shapes() {
        let net = Network::init(&NetworkSpec::default_mlp(16), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let shapes: Vec<_> = net.layers.iter().map(|l| l.weight.shape()).collect();
        assert_eq!(shapes, vec![(64, 16), (64, 64), (32, 64)]);
        assert_eq!(net.feature_dim(), 32);
        assert_eq!(net.param_count(), 16 * 64 + 64 + 64 * 64 + 64 + 64 * 32 + 32);
        assert_eq!(NormParams::fresh(&net).param_count(), 2 * (64 + 64 + 32));
    }

    #[test]
    fn glorot_bound_holds() {
        let m = glorot(10, 20, &mut ChaCha8Rng::seed_from_u64(1));
        assert!(m.max_abs() <= (6.0f64 / 30.0).sqrt());
    }

    #[test]
    fn conv_geometry_must_compose() {
        let g = ConvGeometry { in_channels: 2, in_height: 5, in_width: 5, kernel_h: 3, kernel_w: 3 };
        let spec = NetworkSpec {
            input_dim: 50,
            layers: vec![LayerSpec::Conv2d { geometry: g, out_channels: 4 }, LayerSpec::Dense { out: 8 }],
            target_layers: vec![0],
            use_norm: true,
        };
        let net = Network::init(&spec, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(net.layers[0].weight.shape(), (4, 18));
        assert_eq!(net.layers[0].out_dim(), 36);
        let bad = NetworkSpec { input_dim: 49, ..spec };
        assert!(Network::init(&bad, &mut ChaCha8Rng::seed_from_u64(2)).is_err());
    }

    #[test]
    fn unknown_target_layer_is_rejected() {
        let spec = NetworkSpec::mlp(4, &[8, 8], vec![2], false);
        assert!(matches!(Network::init(&spec, &mut ChaCha8Rng::seed_from_u64(0)), Err(Error::UnknownTargetLayer(2))));
    }

    #[test]
    fn grown_head_keeps_old_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut head = ClassifierHead::init(2, 3, 0, &mut rng);
        let before = head.weight.clone();
        head.grow(3, &mut rng);
        assert_eq!(head.class_range(), 0..5);
        assert_eq!(head.weight.top_rows(2), before);
    }
}
