//! Threshold and rank for task vectors of growing size.
//!
//! A reference weight is perturbed by a rank-2 update plus small noise. As the
//! update grows, the threshold rises and more singular directions are kept.

use pearl::adapt::{dynamic_threshold, init_lora, select_rank, task_vector, LoraInit};
use pearl::linalg::{svd, Matrix};
use rand::Rng;

fn main() -> pearl::Result<()> {
    let mut rng = pearl::seed::rng(3, "example", 0);
    let (rows, cols) = (24, 16);
    let reference = Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0));
    let u = Matrix::from_fn(rows, 2, |_, _| rng.random_range(-1.0..1.0));
    let v = Matrix::from_fn(2, cols, |_, _| rng.random_range(-1.0..1.0));
    let noise = Matrix::from_fn(rows, cols, |_, _| rng.random_range(-0.02..0.02));
    let update = u.matmul(&v)?.add(&noise)?;

    println!("{:>6} {:>10} {:>6}", "scale", "T", "rank");
    for scale in [0.0, 0.05, 0.2, 0.5, 1.0, 3.0] {
        let mut tuned = reference.clone();
        tuned.add_scaled(&update, scale)?;
        let t = dynamic_threshold(&tuned, &reference)?;
        let delta = task_vector(0, &tuned, &reference)?;
        let f = svd(&delta.delta)?;
        let sel = select_rank(&f.sigma, t.clamped_value)?;
        println!("{scale:>6} {:>10.5} {:>6}", t.clamped_value, sel.k);

        if scale == 1.0 {
            let ad = init_lora(&f, sel.k, 0, LoraInit::SpectralSplit)?;
            let residual = ad.b.matmul(&ad.a)?.sub(&delta.delta)?.frobenius_norm() / delta.delta.frobenius_norm();
            println!("       rank-{} adapter: {} params, relative residual {residual:.4}", sel.k, ad.param_count());
        }
    }
    Ok(())
}
