//! Factorize a random matrix and watch the truncation error track the tail of the spectrum.

use pearl::linalg::{svd, truncate, Matrix};
use rand::Rng;

fn main() -> pearl::Result<()> {
    let mut rng = pearl::seed::rng(7, "example", 0);
    let w = Matrix::from_fn(12, 8, |_, _| rng.random_range(-1.0..1.0));
    let f = svd(&w)?;

    let recon = f.reconstruct().sub(&w)?.frobenius_norm() / w.frobenius_norm();
    println!("shape {:?}, full rank {}, relative reconstruction error {recon:.2e}", w.shape(), f.full_rank);
    println!("singular values: {:.4?}", f.sigma);

    println!("{:>3} {:>14} {:>14}", "k", "||W - W_k||", "tail energy");
    for k in 1..=f.full_rank {
        let err = truncate(&f, k)?.sub(&w)?.frobenius_norm();
        let tail = (f.sigma[k..].iter().map(|s| s * s).sum::<f64>() + 0.0).sqrt();
        println!("{k:>3} {err:>14.6} {tail:>14.6}");
    }
    Ok(())
}
