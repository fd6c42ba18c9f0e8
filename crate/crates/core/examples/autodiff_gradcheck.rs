//! Tape gradients of a small conv → leaky ReLU → upsample graph against central differences.

use snapvcs::kernels::{ConvSpec, Tape, Tensor, Var};

fn wave(shape: &[usize], k: f64) -> Tensor<f64> {
    Tensor::from_fn(shape.to_vec(), |i| (k * i as f64).sin())
}

fn graph(t: &mut Tape<f64>, x: Var, w: Var, b: Var) -> Var {
    let c = t.conv3d(x, w, b, ConvSpec::DOWN2).expect("conv");
    let a = t.leaky_relu(c, 0.01);
    t.upsample2x(a).expect("upsample")
}

fn main() -> snapvcs::Result<()> {
    let inputs = [wave(&[1, 2, 3, 8, 8], 0.37), wave(&[3, 2, 3, 3, 3], 1.3).scale(0.3), wave(&[3], 2.1)];
    let mut tape = Tape::new();
    let v: Vec<Var> = inputs.iter().map(|x| tape.input(x.clone(), true)).collect();
    let out = graph(&mut tape, v[0], v[1], v[2]);
    let seed = wave(tape.value(out).shape(), 0.11);
    let grads = tape.backward(vec![(out, seed.clone())])?;

    let objective = |xs: &[Tensor<f64>]| {
        let mut t = Tape::new();
        let vs: Vec<Var> = xs.iter().map(|x| t.input(x.clone(), false)).collect();
        let o = graph(&mut t, vs[0], vs[1], vs[2]);
        t.value(o).data().iter().zip(seed.data()).map(|(a, b)| a * b).sum::<f64>()
    };
    let h = 1e-5;
    for (k, name) in ["input", "weight", "bias"].iter().enumerate() {
        let mut worst: f64 = 0.0;
        for i in (0..inputs[k].len()).step_by(7) {
            let mut xs = inputs.to_vec();
            xs[k].data_mut()[i] += h;
            let plus = objective(&xs);
            xs[k].data_mut()[i] -= 2.0 * h;
            let numeric = (plus - objective(&xs)) / (2.0 * h);
            let analytic = grads.get(v[k]).expect("gradient").data()[i];
            worst = worst.max((analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3));
        }
        println!("{name:>6}: max relative error {worst:.2e}");
    }
    Ok(())
}
