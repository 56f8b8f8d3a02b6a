//! Finite-difference checks of every adjoint in double precision.
//!
//! Each op is reduced to a scalar by projecting its output onto a fixed random
//! tensor `r`, so the analytic gradient is the op's backward applied to `r`.

use objectness_tensor::gradcheck::{sample_coords, GradCheck};
use objectness_tensor::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const INSTANCES: u64 = 20;

fn random(shape: Shape, rng: &mut impl Rng) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0))
}

fn conv_case(seed: u64, shape: Shape, cout: usize, k: usize, dilation: usize, pad: usize, stride: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = random(shape, &mut rng);
    let w = random(Shape::new(cout, shape.c, k, k), &mut rng);
    let b: Vec<f64> = (0..cout).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let p = ConvParams::new(w.clone(), b.clone(), stride, pad, dilation);
    let out_shape = p.output_shape(shape).unwrap();
    let r = random(out_shape, &mut rng);
    let grads = conv2d_backward(&x, &p, &r, true).unwrap();
    let check = GradCheck::default();

    let fx = |v: &[f64]| {
        let xt = Tensor::from_vec(shape, v.to_vec()).unwrap();
        conv2d(&xt, &p).unwrap().dot(&r)
    };
    let coords = sample_coords(&mut rng, x.len(), 40);
    let rep_x = check.check(fx, x.data(), grads.input.unwrap().data(), &coords, |_| false);

    let fw = |v: &[f64]| {
        let pw = ConvParams::new(Tensor::from_vec(w.shape(), v.to_vec()).unwrap(), b.clone(), stride, pad, dilation);
        conv2d(&x, &pw).unwrap().dot(&r)
    };
    let coords = sample_coords(&mut rng, w.len(), 40);
    let rep_w = check.check(fw, w.data(), grads.weights.data(), &coords, |_| false);

    let fb = |v: &[f64]| {
        let pb = ConvParams::new(w.clone(), v.to_vec(), stride, pad, dilation);
        conv2d(&x, &pb).unwrap().dot(&r)
    };
    let all: Vec<usize> = (0..cout).collect();
    let rep_b = check.check(fb, &b, &grads.bias, &all, |_| false);

    rep_x.merge(rep_w).merge(rep_b).max_rel_error
}

#[test]
fn conv_dilation_two_matches_finite_differences() {
    for seed in 0..INSTANCES {
        let err = conv_case(seed, Shape::new(1, 2, 4, 4), 3, 3, 2, 2, 1);
        assert!(err < 1e-5, "seed {seed}: {err}");
    }
}

#[test]
fn conv_all_artifact_dilations() {
    for seed in 0..INSTANCES {
        for (d, size) in [(1usize, 7usize), (2, 9), (12, 14)] {
            let err = conv_case(100 + seed, Shape::new(2, 3, size, size - 1), 4, 3, d, d, 1);
            assert!(err < 1e-5, "dilation {d} seed {seed}: {err}");
        }
        let err = conv_case(200 + seed, Shape::new(2, 5, 6, 6), 3, 1, 1, 0, 1);
        assert!(err < 1e-5, "pointwise seed {seed}: {err}");
        let err = conv_case(300 + seed, Shape::new(1, 2, 9, 8), 2, 3, 1, 1, 2);
        assert!(err < 1e-5, "strided seed {seed}: {err}");
    }
}

#[test]
fn pointwise_conv_error_is_at_rounding_scale() {
    let err = conv_case(9, Shape::new(1, 4, 5, 5), 2, 1, 1, 0, 1);
    assert!(err < 1e-9, "{err}");
}

#[test]
fn maxpool_matches_finite_differences() {
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (k, s, p, size) in [(3usize, 2usize, 1usize, 9usize), (3, 1, 1, 6), (3, 2, 1, 8)] {
            let shape = Shape::new(2, 2, size, size);
            // Distinct, well-separated values keep every window's argmax stable
            // under an eps perturbation.
            let mut vals: Vec<f64> = (0..shape.len()).map(|i| i as f64 * 0.01).collect();
            for i in (1..vals.len()).rev() {
                vals.swap(i, rng.gen_range(0..=i));
            }
            let x = Tensor::from_vec(shape, vals).unwrap();
            let (y, idx) = maxpool(&x, k, s, p).unwrap();
            let r = random(y.shape(), &mut rng);
            let g = maxpool_backward(&idx, &r).unwrap();
            let f = |v: &[f64]| {
                let xt = Tensor::from_vec(shape, v.to_vec()).unwrap();
                maxpool(&xt, k, s, p).unwrap().0.dot(&r)
            };
            let coords: Vec<usize> = (0..x.len()).collect();
            let rep = GradCheck::default().check(f, x.data(), g.data(), &coords, |_| false);
            assert!(rep.max_rel_error < 1e-4, "seed {seed}: {rep:?}");
        }
    }
}

#[test]
fn relu_matches_finite_differences_away_from_kink() {
    let check = GradCheck::default();
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape = Shape::new(2, 3, 5, 5);
        let x = random(shape, &mut rng);
        let r = random(shape, &mut rng);
        let g = relu_backward(&x, &r).unwrap();
        let f = |v: &[f64]| relu(&Tensor::from_vec(shape, v.to_vec()).unwrap()).dot(&r);
        let coords: Vec<usize> = (0..x.len()).collect();
        let kink = |i: usize| x.data()[i].abs() <= 10.0 * check.eps;
        let rep = check.check(f, x.data(), g.data(), &coords, kink);
        assert!(rep.checked > 0);
        assert!(rep.max_rel_error < 1e-4, "seed {seed}: {rep:?}");
    }
}

#[test]
fn bilinear_matches_finite_differences() {
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (h, w, oh, ow) in [(3usize, 4usize, 9usize, 7usize), (5, 5, 2, 3), (4, 4, 13, 13)] {
            let shape = Shape::new(1, 2, h, w);
            let x = random(shape, &mut rng);
            let r = random(Shape::new(1, 2, oh, ow), &mut rng);
            let g = bilinear_resize_backward(shape, &r).unwrap();
            let f = |v: &[f64]| {
                bilinear_resize(&Tensor::from_vec(shape, v.to_vec()).unwrap(), oh, ow)
                    .unwrap()
                    .dot(&r)
            };
            let coords: Vec<usize> = (0..x.len()).collect();
            let rep = GradCheck::default().check(f, x.data(), g.data(), &coords, |_| false);
            assert!(rep.max_rel_error < 1e-4, "seed {seed}: {rep:?}");
        }
    }
}

#[test]
fn softmax_xent_matches_finite_differences() {
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape = Shape::new(2, 2, 2, 2);
        let x = Tensor::from_fn(shape, |_| rng.gen_range(-3.0..3.0));
        let labels: Vec<u8> = (0..8)
            .map(|_| [0u8, 1, IGNORE_LABEL][rng.gen_range(0..3)])
            .collect();
        for red in [Reduction::Sum, Reduction::Mean] {
            let (_, g) = softmax_xent(&x, &labels, red).unwrap();
            let f = |v: &[f64]| {
                softmax_xent(&Tensor::from_vec(shape, v.to_vec()).unwrap(), &labels, red)
                    .unwrap()
                    .0
            };
            let coords: Vec<usize> = (0..x.len()).collect();
            let check = GradCheck {
                eps: 1e-5,
                floor: 1e-6,
            };
            let rep = check.check(f, x.data(), g.data(), &coords, |_| false);
            assert!(rep.max_rel_error < 1e-6, "seed {seed} {red:?}: {rep:?}");
        }
    }
}

#[test]
fn conv_relu_pool_xent_stack_matches_finite_differences() {
    let check = GradCheck::default();
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        let shape = Shape::new(1, 3, 9, 9);
        let x = random(shape, &mut rng);
        let w = random(Shape::new(2, 3, 3, 3), &mut rng);
        let p = ConvParams::new(w, vec![0.1, -0.1], 1, 2, 2);
        let forward = |xt: &Tensor<f64>| {
            let z = conv2d(xt, &p).unwrap();
            let a = relu(&z);
            let (y, idx) = maxpool(&a, 3, 2, 1).unwrap();
            (z, y, idx)
        };
        let (z, y, idx) = forward(&x);
        let labels: Vec<u8> = (0..y.shape().plane()).map(|i| (i % 2) as u8).collect();
        let (_, gy) = softmax_xent(&y, &labels, Reduction::Sum).unwrap();
        let ga = maxpool_backward(&idx, &gy).unwrap();
        let gz = relu_backward(&z, &ga).unwrap();
        let gx = conv2d_backward(&x, &p, &gz, true).unwrap().input.unwrap();
        let f = |v: &[f64]| {
            let xt = Tensor::from_vec(shape, v.to_vec()).unwrap();
            softmax_xent(&forward(&xt).1, &labels, Reduction::Sum).unwrap().0
        };
        let coords: Vec<usize> = (0..x.len()).collect();
        let rep = check.check(f, x.data(), gx.data(), &coords, |_| false);
        assert!(rep.max_rel_error < 1e-4, "seed {seed}: {rep:?}");
    }
}
