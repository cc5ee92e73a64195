use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, SvdFactorization};
use crate::net::{glorot, AdapterSet, ClassifierHead, NormLayer, NormParams};

/// Low-rank update `(α/k)·B·A` for one target layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoraAdapter {
    pub layer_id: usize,
    /// `d_out × k`
    pub b: Matrix,
    /// `k × d_in`
    pub a: Matrix,
    pub rank: usize,
    /// Always `2·rank`.
    pub alpha: f64,
}

impl LoraAdapter {
    pub fn new(layer_id: usize, b: Matrix, a: Matrix) -> Result<Self> {
        if b.cols() != a.rows() {
            return Err(Error::InvalidShape(format!("B is {:?} but A is {:?}", b.shape(), a.shape())));
        }
        let rank = b.cols();
        Ok(Self { layer_id, b, a, rank, alpha: 2.0 * rank as f64 })
    }

    pub fn scaling(&self) -> f64 {
        self.alpha / self.rank as f64
    }

    /// `(α/k)·B·A`
    pub fn delta(&self) -> Result<Matrix> {
        Ok(self.b.matmul(&self.a)?.scale(self.scaling()))
    }

    /// `k·(d_out + d_in)`
    pub fn param_count(&self) -> usize {
        self.rank * (self.b.rows() + self.a.cols())
    }
}

/// How adapter factors are seeded from the task-vector SVD.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoraInit {
    /// `B = U[:, :k]·Σ[:k]`, `A = Σ[:k]·Vᵀ[:k, :]` (so `B·A = U Σ² Vᵀ` on the top-k subspace).
    #[default]
    Verbatim,
    /// `B = U[:, :k]·√Σ[:k]`, `A = √Σ[:k]·Vᵀ[:k, :]`, so `B·A` is the rank-k truncation.
    SpectralSplit,
}

pub fn init_lora(f: &SvdFactorization, k: usize, layer_id: usize, init: LoraInit) -> Result<LoraAdapter> {
    if k == 0 || k > f.full_rank {
        return Err(Error::InvalidRank { rank: k, max: f.full_rank });
    }
    let weights: Vec<f64> = match init {
        LoraInit::Verbatim => f.sigma[..k].to_vec(),
        LoraInit::SpectralSplit => f.sigma[..k].iter().map(|s| s.sqrt()).collect(),
    };
    let b = Matrix::from_fn(f.u.rows(), k, |r, c| f.u[(r, c)] * weights[c]);
    let a = Matrix::from_fn(k, f.vt.cols(), |r, c| weights[r] * f.vt[(r, c)]);
    LoraAdapter::new(layer_id, b, a)
}

/// Fresh factors for one adapter: `B = 0`, `A` from the standard uniform init.
pub fn reinitialize_adapter(adapter: &mut LoraAdapter, rng: &mut impl Rng) {
    adapter.b = Matrix::zeros(adapter.b.rows(), adapter.rank);
    adapter.a = glorot(adapter.rank, adapter.a.cols(), rng);
}

/// Re-draws every task-specific tensor: adapters (in layer order), norms, then head.
/// Ranks and scaling are preserved.
pub fn reinitialize(adapters: &mut AdapterSet, head: &mut ClassifierHead, norms: &mut NormParams, rng: &mut impl Rng) {
    for adapter in adapters.values_mut() {
        reinitialize_adapter(adapter, rng);
    }
    for n in &mut norms.layers {
        *n = NormLayer::fresh(n.scale.len());
    }
    *head = ClassifierHead::init(head.num_classes(), head.weight.cols(), head.class_start, rng);
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::linalg::svd;

    #[test]
    fn one_by_one_shows_squared_spectrum() {
        let f = svd(&Matrix::new(1, 1, vec![2.0]).unwrap()).unwrap();
        let ad = init_lora(&f, 1, 0, LoraInit::Verbatim).unwrap();
        assert_eq!(ad.b.as_slice(), &[2.0]);
        assert_eq!(ad.a.as_slice(), &[2.0]);
        assert_eq!(ad.b.matmul(&ad.a).unwrap().as_slice(), &[4.0]);
        let split = init_lora(&f, 1, 0, LoraInit::SpectralSplit).unwrap();
        assert!((split.b.matmul(&split.a).unwrap()[(0, 0)] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn zero_task_vector_gives_zero_factors() {
        let f = svd(&Matrix::zeros(3, 4)).unwrap();
        let ad = init_lora(&f, 1, 0, LoraInit::Verbatim).unwrap();
        assert!(ad.b.as_slice().iter().chain(ad.a.as_slice()).all(|&v| v == 0.0));
    }

    #[test]
    fn factor_shapes_and_alpha() {
        let w = Matrix::from_fn(8, 12, |r, c| ((r * 7 + c * 3) % 5) as f64 - 2.0);
        let f = svd(&w).unwrap();
        let ad = init_lora(&f, 3, 4, LoraInit::Verbatim).unwrap();
        assert_eq!((ad.b.shape(), ad.a.shape()), ((8, 3), (3, 12)));
        assert_eq!((ad.rank, ad.alpha, ad.scaling()), (3, 6.0, 2.0));
        assert_eq!(ad.param_count(), 3 * 20);
        assert!(matches!(init_lora(&f, 9, 4, LoraInit::Verbatim), Err(Error::InvalidRank { .. })));
    }

    #[test]
    fn reinit_is_seed_deterministic_and_keeps_rank() {
        let f = svd(&Matrix::from_fn(5, 6, |r, c| (r + c) as f64)).unwrap();
        let mut set = AdapterSet::new();
        set.insert(1, init_lora(&f, 2, 1, LoraInit::Verbatim).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let head = ClassifierHead::init(3, 5, 10, &mut rng);
        let mut norms = NormParams { layers: vec![NormLayer::fresh(5)] };
        norms.layers[0].scale[0] = 9.0;

        let run = |seed| {
            let (mut s, mut h, mut n) = (set.clone(), head.clone(), norms.clone());
            reinitialize(&mut s, &mut h, &mut n, &mut ChaCha8Rng::seed_from_u64(seed));
            (s, h, n)
        };
        let (a, b) = (run(42), run(42));
        assert_eq!(a, b);
        let (s, h, n) = a;
        assert_eq!((s[&1].rank, s[&1].alpha), (2, 4.0));
        assert!(s[&1].b.as_slice().iter().all(|&v| v == 0.0));
        assert_eq!(h.class_range(), 10..13);
        assert_eq!(n.layers[0], NormLayer::fresh(5));
        assert_ne!(h, run(43).1);
    }
}
