//! Backward through chains of invertible blocks with and without stored activations.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use snapvcs::kernels::{reversible_backward, stored_activation_backward, InvertibleBlock, MemoryMeter, Tensor};

fn main() -> snapvcs::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let shape = vec![1, 8, 4, 32, 32];
    let s1 = Tensor::<f64>::from_fn(shape.clone(), |i| ((i * 7919) % 101) as f64 / 101.0);
    let s2 = Tensor::<f64>::from_fn(shape.clone(), |i| ((i * 104_729) % 97) as f64 / 97.0);
    let ones = Tensor::<f64>::full(shape, 1.0);

    println!("{:>6}  {:>14}  {:>14}  {:>10}", "blocks", "stored bytes", "reversible", "rel |Δg|");
    for n in [1, 2, 4, 8, 16] {
        let blocks: Vec<InvertibleBlock<f64>> = (0..n).map(|_| InvertibleBlock::random(8, 0.01, &mut rng)).collect();
        let (o1, o2) = snapvcs::kernels::chain_forward(&blocks, &s1, &s2)?;

        let stored_meter = MemoryMeter::new();
        let a =
            stored_activation_backward(&blocks, (s1.clone(), s2.clone()), (ones.clone(), ones.clone()), &stored_meter)?;
        let rev_meter = MemoryMeter::new();
        let b = reversible_backward(&blocks, (o1, o2), (ones.clone(), ones.clone()), &rev_meter)?;

        let gap = a.grad_in.0.max_abs_diff(&b.grad_in.0)?.max(a.grad_in.1.max_abs_diff(&b.grad_in.1)?);
        let scale = a.grad_in.0.data().iter().chain(a.grad_in.1.data()).fold(0.0f64, |m, v| m.max(v.abs()));
        println!("{n:>6}  {:>14}  {:>14}  {:>10.2e}", stored_meter.peak(), rev_meter.peak(), gap / scale);
    }
    Ok(())
}
