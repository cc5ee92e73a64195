use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{Error, Result};

/// A layer weight of rank 2 (dense, `out × in`) or rank 4 (conv, `out × in × kh × kw`),
/// stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightTensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl WeightTensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if shape.is_empty() || len != data.len() {
            return Err(Error::InvalidShape(format!("shape {shape:?} does not hold {} values", data.len())));
        }
        Ok(Self { shape, data })
    }
}

/// Dense weights pass through; conv weights become `out × (in·kh·kw)`.
pub fn flatten_to_2d(t: &WeightTensor) -> Result<Matrix> {
    match t.shape.as_slice() {
        &[rows, cols] => Matrix::new(rows, cols, t.data.clone()),
        &[out, inp, kh, kw] => Matrix::new(out, inp * kh * kw, t.data.clone()),
        other => Err(Error::InvalidShape(format!("cannot flatten rank-{} tensor", other.len()))),
    }
}

/// Inverse of [`flatten_to_2d`] for a known original shape.
pub fn unflatten(m: &Matrix, shape: &[usize]) -> Result<WeightTensor> {
    let expected = match shape {
        &[rows, cols] => (rows, cols),
        &[out, inp, kh, kw] => (out, inp * kh * kw),
        other => return Err(Error::InvalidShape(format!("cannot unflatten to rank-{} tensor", other.len()))),
    };
    if m.shape() != expected {
        return Err(Error::InvalidShape(format!("matrix {:?} does not fit tensor {shape:?}", m.shape())));
    }
    WeightTensor::new(shape.to_vec(), m.as_slice().to_vec())
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn dense_passes_through() {
        let data: Vec<f64> = (0..128).map(f64::from).collect();
        let t = WeightTensor::new(vec![8, 16], data.clone()).unwrap();
        let m = flatten_to_2d(&t).unwrap();
        assert_eq!(m.shape(), (8, 16));
        assert_eq!(m.as_slice(), data.as_slice());
    }

    #[test]
    fn conv_flattens_and_round_trips_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let data: Vec<f64> = (0..4 * 27).map(|_| rng.random_range(-1.0..1.0)).collect();
        let t = WeightTensor::new(vec![4, 3, 3, 3], data).unwrap();
        let m = flatten_to_2d(&t).unwrap();
        assert_eq!(m.shape(), (4, 27));
        let back = unflatten(&m, &t.shape).unwrap();
        assert!(back.data.iter().zip(&t.data).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert_eq!(back.shape, t.shape);
    }

    #[test]
    fn unsupported_rank_is_rejected() {
        let t = WeightTensor::new(vec![2, 3, 4], vec![0.0; 24]).unwrap();
        assert!(matches!(flatten_to_2d(&t), Err(Error::InvalidShape(_))));
    }
}
