//! Forgetting and stability metrics on a hand-written accuracy matrix.

use pearl::metrics::{AccuracyMatrix, EvalMode, MetricsReport};
use pearl::runtime::ParamCounts;

fn main() -> pearl::Result<()> {
    // row t holds accuracy on tasks 1..=t after learning task t
    let stages = vec![vec![0.95], vec![0.80, 0.92], vec![0.70, 0.85, 0.90], vec![0.72, 0.80, 0.84, 0.93]];
    let m = AccuracyMatrix::from_stages(EvalMode::ClassIl, stages)?;
    let r = MetricsReport::compute(&m, ParamCounts::new(1000, vec![0, 120, 80, 150]))?;

    println!("A_T             {:.4}", r.a_final);
    println!("A_avg           {:.4}", r.a_avg);
    println!("forgetting      {:.4}", r.forgetting_simple);
    println!("FFM             {:.4}", r.ffm);
    println!("CFM             {:.4}", r.cfm);
    println!("CFM per-step    {:.4}", r.cfm_per_step);
    println!("stability       {:.4}", r.stability);
    println!("plasticity      {:.4}", r.plasticity);
    println!("trade-off       {:.4}", r.tradeoff);
    println!("params          {:?}", r.param_counts);
    Ok(())
}
