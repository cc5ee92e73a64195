//! Forward and backward passes through backbone, normalization and head.

use std::borrow::Cow;
use std::collections::BTreeMap;

use super::network::{ClassifierHead, ConvGeometry, Layer, LayerKind, Network, NormParams};
use crate::adapt::LoraAdapter;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Adapters keyed by target-layer index.
pub type AdapterSet = BTreeMap<usize, LoraAdapter>;

pub const NORM_EPS: f64 = 1e-5;

/// Borrowed view of everything a forward pass needs.
#[derive(Debug, Clone, Copy)]
pub struct ModelView<'a> {
    pub net: &'a Network,
    pub norms: &'a NormParams,
    pub head: &'a ClassifierHead,
    pub adapters: Option<&'a AdapterSet>,
}

/// Batch statistics (training) or running statistics (inference).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Train,
    Eval,
}

/// Which parameters receive gradients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainScope {
    /// Backbone, norms, head (and adapters if present).
    Full,
    /// Backbone frozen: adapters, norms and head only.
    AdaptersOnly,
}

/// `base + (α/k)·B·A`
pub fn lora_effective_weight(base: &Matrix, adapter: &LoraAdapter) -> Result<Matrix> {
    let delta = adapter.delta()?;
    if delta.shape() != base.shape() {
        return Err(Error::InvalidShape(format!(
            "adapter for layer {} produces {:?}, base weight is {:?}",
            adapter.layer_id,
            delta.shape(),
            base.shape()
        )));
    }
    base.add(&delta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrad {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormGrad {
    pub scale: Vec<f64>,
    pub shift: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdapterGrad {
    pub b: Matrix,
    pub a: Matrix,
}

/// Gradients mirroring every parameter tensor of a [`ModelView`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<ParamGrad>,
    pub norms: Vec<NormGrad>,
    pub adapters: BTreeMap<usize, AdapterGrad>,
    pub head: ParamGrad,
}

impl Gradients {
    /// Flat views in optimizer order: base layers (Full only), norms, adapters, head.
    pub fn tensors(&self, scope: TrainScope) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        if scope == TrainScope::Full {
            for l in &self.layers {
                out.push(l.weight.as_slice());
                out.push(&l.bias);
            }
        }
        for n in &self.norms {
            out.push(&n.scale);
            out.push(&n.shift);
        }
        for g in self.adapters.values() {
            out.push(g.b.as_slice());
            out.push(g.a.as_slice());
        }
        out.push(self.head.weight.as_slice());
        out.push(&self.head.bias);
        out
    }

    pub fn squared_norm(&self) -> f64 {
        let mut s = 0.0;
        for l in &self.layers {
            s += sq(l.weight.as_slice()) + sq(&l.bias);
        }
        for n in &self.norms {
            s += sq(&n.scale) + sq(&n.shift);
        }
        for g in self.adapters.values() {
            s += sq(g.b.as_slice()) + sq(g.a.as_slice());
        }
        s + sq(self.head.weight.as_slice()) + sq(&self.head.bias)
    }
}

fn sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Per-channel mean and (biased) variance observed in a training batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    /// Values per channel (batch × positions).
    pub count: usize,
}

#[derive(Debug)]
pub struct BackwardOutput {
    pub loss: f64,
    pub grads: Gradients,
    /// One entry per normalized layer (empty in eval phase or without norms).
    pub batch_stats: Vec<BatchStats>,
}

struct LayerCache<'a> {
    input: Matrix,
    cols: Vec<Matrix>,
    weight: Cow<'a, Matrix>,
    xhat: Option<Matrix>,
    inv_std: Vec<f64>,
    /// post-norm, pre-ReLU
    pre_act: Matrix,
}

struct Trace<'a> {
    layers: Vec<LayerCache<'a>>,
    features: Matrix,
    logits: Matrix,
    stats: Vec<BatchStats>,
}

impl ModelView<'_> {
    fn validate(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.net.input_dim() {
            return Err(Error::InvalidShape(format!(
                "input has {} features, network expects {}",
                x.cols(),
                self.net.input_dim()
            )));
        }
        if self.net.use_norm && self.norms.layers.len() != self.net.layers.len() {
            return Err(Error::InvalidShape("norm state does not match network layers".into()));
        }
        if self.head.weight.cols() != self.net.feature_dim() {
            return Err(Error::InvalidShape(format!(
                "head expects {} features, network yields {}",
                self.head.weight.cols(),
                self.net.feature_dim()
            )));
        }
        if let Some(adapters) = self.adapters {
            for (&id, a) in adapters {
                if id != a.layer_id || !self.net.target_layers.contains(&id) {
                    return Err(Error::UnknownTargetLayer(id));
                }
            }
        }
        Ok(())
    }

    fn effective_weight(&self, index: usize) -> Result<Cow<'_, Matrix>> {
        let base = &self.net.layers[index].weight;
        match self.adapters.and_then(|a| a.get(&index)) {
            Some(adapter) => Ok(Cow::Owned(lora_effective_weight(base, adapter)?)),
            None => Ok(Cow::Borrowed(base)),
        }
    }

    fn trace(&self, x: &Matrix, phase: Phase) -> Result<Trace<'_>> {
        self.validate(x)?;
        let mut h = x.clone();
        let mut layers = Vec::with_capacity(self.net.layers.len());
        let mut stats = Vec::new();
        for (i, layer) in self.net.layers.iter().enumerate() {
            let weight = self.effective_weight(i)?;
            let (mut z, cols) = affine_forward(layer, &weight, &h);
            let mut xhat = None;
            let mut inv_std = Vec::new();
            if self.net.use_norm {
                let norm = &self.norms.layers[i];
                let (channels, positions) = (layer.channels(), layer.positions());
                let (mean, var) = match phase {
                    Phase::Train => {
                        let s = channel_stats(&z, channels, positions);
                        stats.push(s.clone());
                        (s.mean, s.var)
                    }
                    Phase::Eval => (norm.running_mean.clone(), norm.running_var.clone()),
                };
                inv_std = var.iter().map(|v| 1.0 / (v + NORM_EPS).sqrt()).collect();
                let mut normalized = z.clone();
                for r in 0..z.rows() {
                    let row = normalized.row_mut(r);
                    for c in 0..channels {
                        for p in 0..positions {
                            let v = &mut row[c * positions + p];
                            *v = (*v - mean[c]) * inv_std[c];
                        }
                    }
                }
                for r in 0..z.rows() {
                    let (src, dst) = (normalized.row(r), z.row_mut(r));
                    for c in 0..channels {
                        for p in 0..positions {
                            let k = c * positions + p;
                            dst[k] = norm.scale[c] * src[k] + norm.shift[c];
                        }
                    }
                }
                xhat = Some(normalized);
            }
            let pre_act = z.clone();
            for v in z.as_mut_slice() {
                *v = v.max(0.0);
            }
            layers.push(LayerCache { input: std::mem::replace(&mut h, z), cols, weight, xhat, inv_std, pre_act });
        }
        let mut logits = h.matmul_t(&self.head.weight)?;
        add_bias_rows(&mut logits, &self.head.bias, 1);
        Ok(Trace { layers, features: h, logits, stats })
    }
}

/// Logits `(batch × head classes)`; softmax is applied inside the loss.
pub fn forward(view: &ModelView<'_>, x: &Matrix, phase: Phase) -> Result<Matrix> {
    Ok(view.trace(x, phase)?.logits)
}

/// Backbone features (input to the head).
pub fn features(view: &ModelView<'_>, x: &Matrix, phase: Phase) -> Result<Matrix> {
    Ok(view.trace(x, phase)?.features)
}

/// Row-wise softmax with max subtraction.
pub fn softmax(logits: &Matrix) -> Matrix {
    let mut p = logits.clone();
    for r in 0..p.rows() {
        let row = p.row_mut(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    p
}

/// Mean over the batch of `−log softmax(logits)[label]`.
pub fn cross_entropy(logits: &Matrix, labels: &[usize]) -> Result<f64> {
    if labels.len() != logits.rows() {
        return Err(Error::InvalidShape(format!("{} labels for {} logit rows", labels.len(), logits.rows())));
    }
    let classes = logits.cols();
    let mut total = 0.0;
    for (r, &label) in labels.iter().enumerate() {
        if label >= classes {
            return Err(Error::InvalidLabel { label, classes });
        }
        let row = logits.row(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        total += lse - row[label];
    }
    Ok(total / labels.len() as f64)
}

/// Mean cross-entropy loss and its exact gradient.
pub fn backward(
    view: &ModelView<'_>,
    x: &Matrix,
    labels: &[usize],
    phase: Phase,
    scope: TrainScope,
) -> Result<BackwardOutput> {
    let trace = view.trace(x, phase)?;
    let loss = cross_entropy(&trace.logits, labels)?;
    let batch = labels.len() as f64;

    let mut dlogits = softmax(&trace.logits);
    for (r, &label) in labels.iter().enumerate() {
        dlogits[(r, label)] -= 1.0;
    }
    let dlogits = dlogits.scale(1.0 / batch);
    let head = ParamGrad { weight: dlogits.t_matmul(&trace.features)?, bias: column_sums(&dlogits) };
    let mut upstream = dlogits.matmul(&view.head.weight)?;

    let n_layers = view.net.layers.len();
    let mut layer_grads: Vec<Option<ParamGrad>> = vec![None; n_layers];
    let mut norm_grads: Vec<Option<NormGrad>> = vec![None; if view.net.use_norm { n_layers } else { 0 }];
    let mut adapter_grads = BTreeMap::new();

    for (i, cache) in trace.layers.iter().enumerate().rev() {
        let layer = &view.net.layers[i];
        let (channels, positions) = (layer.channels(), layer.positions());
        // ReLU
        let mut dy = upstream;
        for (g, &pre) in dy.as_mut_slice().iter_mut().zip(cache.pre_act.as_slice()) {
            if pre <= 0.0 {
                *g = 0.0;
            }
        }
        let dz = match &cache.xhat {
            Some(xhat) => {
                let norm = &view.norms.layers[i];
                let mut dscale = vec![0.0; channels];
                let mut dshift = vec![0.0; channels];
                for r in 0..dy.rows() {
                    let (g, xh) = (dy.row(r), xhat.row(r));
                    for c in 0..channels {
                        for p in 0..positions {
                            let k = c * positions + p;
                            dscale[c] += g[k] * xh[k];
                            dshift[c] += g[k];
                        }
                    }
                }
                let mut dz = dy.clone();
                match phase {
                    Phase::Train => {
                        let n = (dy.rows() * positions) as f64;
                        for r in 0..dz.rows() {
                            let (row, xh) = (dz.row_mut(r), xhat.row(r));
                            for c in 0..channels {
                                // dxhat = dy·scale; Σdxhat = scale·dshift; Σdxhat·xhat = scale·dscale
                                let coeff = norm.scale[c] * cache.inv_std[c] / n;
                                for p in 0..positions {
                                    let k = c * positions + p;
                                    row[k] = coeff * (n * row[k] - dshift[c] - xh[k] * dscale[c]);
                                }
                            }
                        }
                    }
                    Phase::Eval => {
                        for r in 0..dz.rows() {
                            let row = dz.row_mut(r);
                            for c in 0..channels {
                                for p in 0..positions {
                                    row[c * positions + p] *= norm.scale[c] * cache.inv_std[c];
                                }
                            }
                        }
                    }
                }
                norm_grads[i] = Some(NormGrad { scale: dscale, shift: dshift });
                dz
            }
            None => dy,
        };

        let (dweight, dbias, dinput) = affine_backward(layer, &cache.weight, &cache.input, &cache.cols, &dz, i > 0);
        if let Some(adapter) = view.adapters.and_then(|a| a.get(&i)) {
            let s = adapter.scaling();
            let b = dweight.matmul_t(&adapter.a)?.scale(s);
            let a = adapter.b.t_matmul(&dweight)?.scale(s);
            adapter_grads.insert(i, AdapterGrad { b, a });
        }
        layer_grads[i] = Some(match scope {
            TrainScope::Full => ParamGrad { weight: dweight, bias: dbias },
            TrainScope::AdaptersOnly => ParamGrad {
                weight: Matrix::zeros(layer.weight.rows(), layer.weight.cols()),
                bias: vec![0.0; layer.bias.len()],
            },
        });
        upstream = dinput.unwrap_or_else(|| Matrix::zeros(1, 1));
    }

    Ok(BackwardOutput {
        loss,
        grads: Gradients {
            layers: layer_grads.into_iter().map(|g| g.expect("every layer visited")).collect(),
            norms: norm_grads.into_iter().map(|g| g.expect("every norm visited")).collect(),
            adapters: adapter_grads,
            head,
        },
        batch_stats: trace.stats,
    })
}

fn add_bias_rows(z: &mut Matrix, bias: &[f64], positions: usize) {
    for r in 0..z.rows() {
        let row = z.row_mut(r);
        for (c, b) in bias.iter().enumerate() {
            for v in &mut row[c * positions..(c + 1) * positions] {
                *v += b;
            }
        }
    }
}

fn column_sums(m: &Matrix) -> Vec<f64> {
    let mut out = vec![0.0; m.cols()];
    for r in 0..m.rows() {
        for (o, v) in out.iter_mut().zip(m.row(r)) {
            *o += v;
        }
    }
    out
}

fn channel_stats(z: &Matrix, channels: usize, positions: usize) -> BatchStats {
    let n = (z.rows() * positions) as f64;
    let mut mean = vec![0.0; channels];
    for r in 0..z.rows() {
        let row = z.row(r);
        for c in 0..channels {
            mean[c] += row[c * positions..(c + 1) * positions].iter().sum::<f64>();
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; channels];
    for r in 0..z.rows() {
        let row = z.row(r);
        for c in 0..channels {
            var[c] += row[c * positions..(c + 1) * positions].iter().map(|v| (v - mean[c]).powi(2)).sum::<f64>();
        }
    }
    var.iter_mut().for_each(|v| *v /= n);
    BatchStats { mean, var, count: z.rows() * positions }
}

/// Returns `(z, im2col patches per sample)`; patches are empty for dense layers.
fn affine_forward(layer: &Layer, weight: &Matrix, x: &Matrix) -> (Matrix, Vec<Matrix>) {
    match layer.kind {
        LayerKind::Dense => {
            let mut z = x.matmul_t(weight).expect("validated shapes");
            add_bias_rows(&mut z, &layer.bias, 1);
            (z, Vec::new())
        }
        LayerKind::Conv2d(g) => {
            let positions = g.positions();
            let channels = weight.rows();
            let mut z = Matrix::zeros(x.rows(), channels * positions);
            let mut cols = Vec::with_capacity(x.rows());
            for s in 0..x.rows() {
                let patches = im2col(&g, x.row(s));
                let out = patches.matmul_t(weight).expect("validated shapes");
                let row = z.row_mut(s);
                for p in 0..positions {
                    for c in 0..channels {
                        row[c * positions + p] = out[(p, c)];
                    }
                }
                cols.push(patches);
            }
            add_bias_rows(&mut z, &layer.bias, positions);
            (z, cols)
        }
    }
}

/// `(dW, db, dx)`; `dx` is skipped for the first layer.
fn affine_backward(
    layer: &Layer,
    weight: &Matrix,
    x: &Matrix,
    cols: &[Matrix],
    dz: &Matrix,
    need_input_grad: bool,
) -> (Matrix, Vec<f64>, Option<Matrix>) {
    match layer.kind {
        LayerKind::Dense => {
            let dw = dz.t_matmul(x).expect("validated shapes");
            let db = column_sums(dz);
            let dx = need_input_grad.then(|| dz.matmul(weight).expect("validated shapes"));
            (dw, db, dx)
        }
        LayerKind::Conv2d(g) => {
            let positions = g.positions();
            let channels = weight.rows();
            let mut dw = Matrix::zeros(weight.rows(), weight.cols());
            let mut db = vec![0.0; channels];
            let mut dx = need_input_grad.then(|| Matrix::zeros(x.rows(), x.cols()));
            for (s, patches) in cols.iter().enumerate() {
                let row = dz.row(s);
                let dzs = Matrix::from_fn(positions, channels, |p, c| row[c * positions + p]);
                for c in 0..channels {
                    db[c] += row[c * positions..(c + 1) * positions].iter().sum::<f64>();
                }
                dw.add_scaled(&dzs.t_matmul(patches).expect("validated shapes"), 1.0).expect("same shape");
                if let Some(dx) = dx.as_mut() {
                    let dpatches = dzs.matmul(weight).expect("validated shapes");
                    col2im_add(&g, &dpatches, dx.row_mut(s));
                }
            }
            (dw, db, dx)
        }
    }
}

/// Patch matrix `positions × (in_channels·kh·kw)` for one sample.
fn im2col(g: &ConvGeometry, x: &[f64]) -> Matrix {
    let (ow, kh, kw) = (g.out_width(), g.kernel_h, g.kernel_w);
    Matrix::from_fn(g.positions(), g.patch_len(), |p, f| {
        let (oi, oj) = (p / ow, p % ow);
        let ch = f / (kh * kw);
        let (ki, kj) = ((f % (kh * kw)) / kw, f % kw);
        x[ch * g.in_height * g.in_width + (oi + ki) * g.in_width + (oj + kj)]
    })
}

fn col2im_add(g: &ConvGeometry, patches: &Matrix, dx: &mut [f64]) {
    let (ow, kh, kw) = (g.out_width(), g.kernel_h, g.kernel_w);
    for p in 0..patches.rows() {
        let (oi, oj) = (p / ow, p % ow);
        for (f, &v) in patches.row(p).iter().enumerate() {
            let ch = f / (kh * kw);
            let (ki, kj) = ((f % (kh * kw)) / kw, f % kw);
            dx[ch * g.in_height * g.in_width + (oi + ki) * g.in_width + (oj + kj)] += v;
        }
    }
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::net::{NetworkSpec, NormParams};

    fn random_input(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(rows, cols, |_, _| rng.random_range(-2.0..2.0))
    }

    #[test]
    fn zero_weights_give_zero_logits() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut net = Network::init(&NetworkSpec::mlp(4, &[5, 3], vec![0], false), &mut rng).unwrap();
        for l in &mut net.layers {
            l.weight = Matrix::zeros(l.weight.rows(), l.weight.cols());
        }
        let norms = NormParams::fresh(&net);
        let mut head = ClassifierHead::init(2, 3, 0, &mut rng);
        head.weight = Matrix::zeros(2, 3);
        let view = ModelView { net: &net, norms: &norms, head: &head, adapters: None };
        let logits = forward(&view, &random_input(3, 4, 1), Phase::Eval).unwrap();
        assert_eq!(logits, Matrix::zeros(3, 2));
    }

    #[test]
    fn zero_b_adapters_do_not_change_logits() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = Network::init(&NetworkSpec::default_mlp(6), &mut rng).unwrap();
        let norms = NormParams::fresh(&net);
        let head = ClassifierHead::init(3, 32, 0, &mut rng);
        let mut set = AdapterSet::new();
        for &id in &net.target_layers {
            let w = &net.layers[id].weight;
            let a = crate::net::glorot(4, w.cols(), &mut rng);
            set.insert(id, LoraAdapter::new(id, Matrix::zeros(w.rows(), 4), a).unwrap());
        }
        let x = random_input(5, 6, 3);
        let plain = ModelView { net: &net, norms: &norms, head: &head, adapters: None };
        let adapted = ModelView { adapters: Some(&set), ..plain };
        for phase in [Phase::Train, Phase::Eval] {
            assert_eq!(forward(&plain, &x, phase).unwrap(), forward(&adapted, &x, phase).unwrap());
        }
    }

    #[test]
    fn matches_scalar_loop_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut net = Network::init(&NetworkSpec::mlp(3, &[4, 2], vec![0, 1], false), &mut rng).unwrap();
        for l in &mut net.layers {
            for b in &mut l.bias {
                *b = rng.random_range(-0.5..0.5);
            }
        }
        let norms = NormParams::fresh(&net);
        let head = ClassifierHead::init(3, 2, 0, &mut rng);
        let x = [0.3, -1.2, 2.0];

        let mut h = x.to_vec();
        for l in &net.layers {
            let mut next = vec![0.0; l.weight.rows()];
            for (o, n) in next.iter_mut().enumerate() {
                let mut acc = l.bias[o];
                for (i, hv) in h.iter().enumerate() {
                    acc += l.weight[(o, i)] * hv;
                }
                *n = if acc > 0.0 { acc } else { 0.0 };
            }
            h = next;
        }
        let expected: Vec<f64> =
            (0..3).map(|c| head.bias[c] + (0..2).map(|i| head.weight[(c, i)] * h[i]).sum::<f64>()).collect();

        let view = ModelView { net: &net, norms: &norms, head: &head, adapters: None };
        let got = forward(&view, &Matrix::new(1, 3, x.to_vec()).unwrap(), Phase::Eval).unwrap();
        for (g, e) in got.row(0).iter().zip(&expected) {
            assert!((g - e).abs() < 1e-14);
        }
    }

    #[test]
    fn dimension_and_adapter_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = Network::init(&NetworkSpec::mlp(3, &[4, 2], vec![0], false), &mut rng).unwrap();
        let norms = NormParams::fresh(&net);
        let head = ClassifierHead::init(2, 2, 0, &mut rng);
        let view = ModelView { net: &net, norms: &norms, head: &head, adapters: None };
        assert!(matches!(forward(&view, &Matrix::zeros(1, 5), Phase::Eval), Err(Error::InvalidShape(_))));
        let mut set = AdapterSet::new();
        set.insert(1, LoraAdapter::new(1, Matrix::zeros(2, 1), Matrix::zeros(1, 4)).unwrap());
        let view = ModelView { adapters: Some(&set), ..view };
        assert!(matches!(forward(&view, &Matrix::zeros(1, 3), Phase::Eval), Err(Error::UnknownTargetLayer(1))));
    }

    #[test]
    fn cross_entropy_examples() {
        let uniform = Matrix::zeros(2, 5);
        assert!((cross_entropy(&uniform, &[0, 4]).unwrap() - 5f64.ln()).abs() < 1e-15);
        let mut last = f64::INFINITY;
        for margin in [1.0, 5.0, 20.0, 50.0] {
            let l = cross_entropy(&Matrix::new(1, 3, vec![margin, 0.0, 0.0]).unwrap(), &[0]).unwrap();
            assert!(l < last);
            last = l;
        }
        assert!(last < 1e-20);
        assert!(matches!(cross_entropy(&uniform, &[0, 5]), Err(Error::InvalidLabel { label: 5, classes: 5 })));
    }

    #[test]
    fn cross_entropy_matches_log_sum_exp_oracle() {
        let logits = random_input(8, 6, 7).scale(10.0);
        let labels: Vec<usize> = (0..8).map(|i| (i * 5) % 6).collect();
        // independent evaluation: plain log-sum-exp without shifting, small enough not to overflow
        let oracle: f64 = (0..8)
            .map(|r| {
                let row = logits.row(r);
                row.iter().map(|v| v.exp()).sum::<f64>().ln() - row[labels[r]]
            })
            .sum::<f64>()
            / 8.0;
        assert!((cross_entropy(&logits, &labels).unwrap() - oracle).abs() <= 1e-12);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let p = softmax(&random_input(20, 7, 8).scale(50.0));
        for r in 0..p.rows() {
            assert!((p.row(r).iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn effective_weight_examples() {
        let base = Matrix::from_fn(2, 3, |r, c| (r + c) as f64);
        let zero_b = LoraAdapter::new(0, Matrix::zeros(2, 2), Matrix::from_fn(2, 3, |_, _| 1.0)).unwrap();
        assert_eq!(lora_effective_weight(&base, &zero_b).unwrap(), base);

        let one =
            LoraAdapter::new(0, Matrix::new(1, 1, vec![1.0]).unwrap(), Matrix::new(1, 1, vec![3.0]).unwrap()).unwrap();
        assert_eq!(lora_effective_weight(&Matrix::zeros(1, 1), &one).unwrap().as_slice(), &[6.0]);

        for k in [1, 2, 4, 8] {
            let ad = LoraAdapter::new(0, Matrix::zeros(3, k), Matrix::zeros(k, 3)).unwrap();
            assert_eq!(ad.scaling(), 2.0);
        }
        assert!(matches!(lora_effective_weight(&Matrix::zeros(2, 2), &one), Err(Error::InvalidShape(_))));
    }
}
