//! Verify analytic gradients against central finite differences for each
//! layer of the kernel, including the production layer shapes.
//!
//! Run: `cargo run --release --example gradient_check`

use badgevad::nn::layers;
use badgevad::nn::{grad_check, DetRng, Tensor};

fn random(rng: &mut DetRng, shape: &[usize], scale: f64) -> Tensor {
    let len = shape.iter().product();
    Tensor::from_vec(shape, (0..len).map(|_| rng.uniform_symmetric(scale)).collect()).unwrap()
}

fn main() {
    let mut rng = DetRng::new(2024);

    // dense head: affine, so the tolerance is much tighter
    let (cin, cout) = (100, 1);
    let x = random(&mut rng, &[cin], 1.0);
    let w = random(&mut rng, &[cin, cout], 1.0);
    let b = random(&mut rng, &[cout], 1.0);
    let coeff: Vec<f64> = (0..cout).map(|_| rng.uniform_symmetric(1.0)).collect();
    let err = grad_check(
        &[x, w, b],
        &mut |ins| {
            layers::dense(&ins[0], &ins[1], &ins[2])
                .unwrap()
                .data()
                .iter()
                .zip(&coeff)
                .map(|(a, b)| a * b)
                .sum()
        },
        &mut |ins| {
            let dy = Tensor::from_vec(&[cout], coeff.clone()).unwrap();
            let (dx, dw, db) = layers::dense_backward(&ins[0], &ins[1], &dy);
            vec![dx, dw, db]
        },
    );
    println!("dense 100->1:          max relative error {err:.3e} (tolerance 1e-6)");
    assert!(err <= 1e-6);

    // convolution at the production shape: kernel 3, 254 filters
    let (t_len, cin, cout, k) = (7, 3, 254, 3);
    let x = random(&mut rng, &[t_len, cin], 1.0);
    let w = random(&mut rng, &[k, cin, cout], 1.0);
    let b = random(&mut rng, &[cout], 1.0);
    let coeff: Vec<f64> = (0..t_len * cout).map(|_| rng.uniform_symmetric(1.0)).collect();
    let err = grad_check(
        &[x, w, b],
        &mut |ins| {
            layers::conv1d_same(&ins[0], &ins[1], &ins[2])
                .unwrap()
                .data()
                .iter()
                .zip(&coeff)
                .map(|(a, b)| a * b)
                .sum()
        },
        &mut |ins| {
            let dy = Tensor::from_vec(&[t_len, cout], coeff.clone()).unwrap();
            let (dx, dw, db) = layers::conv1d_same_backward(&ins[0], &ins[1], &dy);
            vec![dx, dw, db]
        },
    );
    println!("conv1d k3 x254:        max relative error {err:.3e} (tolerance 1e-4)");
    assert!(err <= 1e-4);

    // LSTM with 100 units, checked over 5 steps of backpropagation through time
    let (t_len, cin, h) = (5, 3, 100);
    let x = random(&mut rng, &[t_len, cin], 1.0);
    let wx = random(&mut rng, &[cin, 4 * h], 0.4);
    let wh = random(&mut rng, &[h, 4 * h], 0.4);
    let b = random(&mut rng, &[4 * h], 0.4);
    let coeff: Vec<f64> = (0..h).map(|_| rng.uniform_symmetric(1.0)).collect();
    let err = grad_check(
        &[x, wx, wh, b],
        &mut |ins| {
            let (y, _) = layers::lstm_forward(&ins[0], &ins[1], &ins[2], &ins[3], false).unwrap();
            y.data().iter().zip(&coeff).map(|(a, b)| a * b).sum()
        },
        &mut |ins| {
            let (y, cache) = layers::lstm_forward(&ins[0], &ins[1], &ins[2], &ins[3], false).unwrap();
            let dy = Tensor::from_vec(y.shape(), coeff.clone()).unwrap();
            let (dx, dwx, dwh, db) = layers::lstm_backward(&cache, &ins[1], &ins[2], &dy);
            vec![dx, dwx, dwh, db]
        },
    );
    println!("lstm 100 units (BPTT): max relative error {err:.3e} (tolerance 1e-4)");
    assert!(err <= 1e-4);

    println!("all gradient checks passed");
}
