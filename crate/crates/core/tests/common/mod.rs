#![allow(dead_code, clippy::needless_range_loop)]

//! Central finite-difference checking for tiny seeded networks.

use pearl::adapt::LoraAdapter;
use pearl::linalg::Matrix;
use pearl::net::{
    backward, cross_entropy, forward, glorot, AdapterSet, Backbone, ClassifierHead, ConvGeometry, LayerSpec, ModelView,
    Network, NetworkSpec, NormParams, Phase, TrainScope, Trainee,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const STEP: f64 = 1e-5;
pub const TOL: f64 = 1e-4;

pub struct Setup {
    pub net: Network,
    pub norms: NormParams,
    pub head: ClassifierHead,
    pub adapters: Option<AdapterSet>,
    pub x: Matrix,
    pub y: Vec<usize>,
}

pub fn loss(s: &Setup, phase: Phase) -> f64 {
    let view = ModelView { net: &s.net, norms: &s.norms, head: &s.head, adapters: s.adapters.as_ref() };
    cross_entropy(&forward(&view, &s.x, phase).unwrap(), &s.y).unwrap()
}

/// Relative error with a small absolute floor so exact zeros compare cleanly.
fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

/// Returns the worst relative error over every trainable scalar.
pub fn check(mut s: Setup, phase: Phase, scope: TrainScope) -> f64 {
    let analytic: Vec<Vec<f64>> = {
        let view = ModelView { net: &s.net, norms: &s.norms, head: &s.head, adapters: s.adapters.as_ref() };
        let out = backward(&view, &s.x, &s.y, phase, scope).unwrap();
        out.grads.tensors(scope).into_iter().map(<[f64]>::to_vec).collect()
    };
    let n_tensors = analytic.len();
    let mut worst: f64 = 0.0;
    for t in 0..n_tensors {
        for i in 0..analytic[t].len() {
            let orig = tensor(&mut s, scope, t)[i];
            tensor(&mut s, scope, t)[i] = orig + STEP;
            let up = loss(&s, phase);
            tensor(&mut s, scope, t)[i] = orig - STEP;
            let down = loss(&s, phase);
            tensor(&mut s, scope, t)[i] = orig;
            let numeric = (up - down) / (2.0 * STEP);
            worst = worst.max(rel_err(analytic[t][i], numeric));
        }
    }
    worst
}

fn tensor(s: &mut Setup, scope: TrainScope, index: usize) -> &mut [f64] {
    let backbone = match scope {
        TrainScope::Full => Backbone::Trainable(&mut s.net),
        TrainScope::AdaptersOnly => Backbone::Frozen(&s.net),
    };
    let trainee = Trainee { backbone, norms: &mut s.norms, head: &mut s.head, adapters: s.adapters.as_mut() };
    trainee.into_tensors().swap_remove(index)
}

fn random_matrix(rows: usize, cols: usize, scale: f64, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-scale..scale))
}

fn perturb_norms(norms: &mut NormParams, rng: &mut ChaCha8Rng) {
    for n in &mut norms.layers {
        for v in &mut n.scale {
            *v = rng.random_range(0.5..1.5);
        }
        for v in &mut n.shift {
            *v = rng.random_range(-0.3..0.3);
        }
        for v in &mut n.running_mean {
            *v = rng.random_range(-0.2..0.2);
        }
        for v in &mut n.running_var {
            *v = rng.random_range(0.5..2.0);
        }
    }
}

pub fn mlp_setup(seed: u64, use_norm: bool, with_adapters: bool) -> Setup {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = Network::init(&NetworkSpec::mlp(5, &[7, 6], vec![0, 1], use_norm), &mut rng).unwrap();
    let mut norms = NormParams::fresh(&net);
    perturb_norms(&mut norms, &mut rng);
    let mut head = ClassifierHead::init(3, 6, 0, &mut rng);
    head.bias = vec![0.1, -0.2, 0.05];
    let adapters = with_adapters.then(|| {
        let mut set = AdapterSet::new();
        for (id, rank) in [(0usize, 2usize), (1, 1)] {
            let l = &net.layers[id];
            let b = random_matrix(l.weight.rows(), rank, 0.3, &mut rng);
            let a = glorot(rank, l.weight.cols(), &mut rng);
            set.insert(id, LoraAdapter::new(id, b, a).unwrap());
        }
        set
    });
    let x = random_matrix(6, 5, 1.5, &mut rng);
    let y = (0..6).map(|i| i % 3).collect();
    Setup { net, norms, head, adapters, x, y }
}

pub fn conv_setup(seed: u64) -> Setup {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = ConvGeometry { in_channels: 2, in_height: 4, in_width: 4, kernel_h: 3, kernel_w: 2 };
    let spec = NetworkSpec {
        input_dim: 32,
        layers: vec![LayerSpec::Conv2d { geometry: g, out_channels: 3 }, LayerSpec::Dense { out: 5 }],
        target_layers: vec![0],
        use_norm: true,
    };
    let net = Network::init(&spec, &mut rng).unwrap();
    let mut norms = NormParams::fresh(&net);
    perturb_norms(&mut norms, &mut rng);
    let head = ClassifierHead::init(2, 5, 0, &mut rng);
    let mut set = AdapterSet::new();
    let b = random_matrix(3, 2, 0.3, &mut rng);
    let a = glorot(2, g.patch_len(), &mut rng);
    set.insert(0, LoraAdapter::new(0, b, a).unwrap());
    let x = random_matrix(4, 32, 1.0, &mut rng);
    Setup { net, norms, head, adapters: Some(set), x, y: vec![0, 1, 1, 0] }
}
