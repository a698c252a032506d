//! Finite-difference checks for every differentiable primitive.
//!
//! Each primitive is wrapped as `x -> sum(w * op(x))` with a fixed random
//! weight tensor `w`, so no coordinate of the gradient is structurally zero.

use mgvi_autodiff::{grad_check, Result, Tape, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EPS: f64 = 1e-5;
const TOL: f64 = 1e-4;
const TRIALS: usize = 24;

fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    Tensor::from_fn(shape, |_| rng.random_range(-1.5..1.5))
}

/// Values bounded away from zero so kinked ops stay differentiable under ±EPS.
fn away_from_zero(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    Tensor::from_fn(shape, |_| {
        let m = rng.random_range(0.05..1.5);
        if rng.random_bool(0.5) {
            m
        } else {
            -m
        }
    })
}

fn random_shape(rng: &mut ChaCha8Rng) -> Vec<usize> {
    let rank = rng.random_range(1..=3);
    (0..rank).map(|_| rng.random_range(1..=4)).collect()
}

fn weighted_sum(tape: &mut Tape, y: Var, weights: &Tensor) -> Result<Var> {
    let w = tape.constant(weights.clone())?;
    let p = tape.mul(y, w)?;
    tape.sum(p)
}

fn check<F>(name: &str, x: &Tensor, out_shape: &[usize], rng: &mut ChaCha8Rng, op: F)
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    let w = random_tensor(rng, out_shape);
    let err = grad_check(
        |tape, v| {
            let y = op(tape, v)?;
            weighted_sum(tape, y, &w)
        },
        x,
        EPS,
    )
    .unwrap();
    assert!(err < TOL, "{name}: shape {:?} rel err {err:e}", x.shape());
}

#[test]
fn elementwise_binary_ops() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..TRIALS {
        let shape = random_shape(&mut rng);
        let x = random_tensor(&mut rng, &shape);
        let other = random_tensor(&mut rng, &shape);
        // rhs repeated over leading axes
        let suffix = shape[shape.len() - 1..].to_vec();
        let bias = random_tensor(&mut rng, &suffix);
        for (name, which) in [("add", 0), ("sub", 1), ("mul", 2)] {
            let apply = |tape: &mut Tape, a: Var, b: Var| match which {
                0 => tape.add(a, b),
                1 => tape.sub(a, b),
                _ => tape.mul(a, b),
            };
            check(name, &x, &shape, &mut rng, |tape, v| {
                let o = tape.constant(other.clone())?;
                apply(tape, v, o)
            });
            check(name, &x, &shape, &mut rng, |tape, v| {
                let o = tape.constant(other.clone())?;
                apply(tape, o, v)
            });
            check(name, &bias, &shape, &mut rng, |tape, v| {
                let o = tape.constant(x.clone())?;
                apply(tape, o, v)
            });
            check(name, &x, &shape, &mut rng, |tape, v| {
                let b = tape.constant(bias.clone())?;
                apply(tape, v, b)
            });
        }
    }
}

#[test]
fn elementwise_unary_ops() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..TRIALS {
        let shape = random_shape(&mut rng);
        let x = random_tensor(&mut rng, &shape);
        let kinked = away_from_zero(&mut rng, &shape);
        check("scale", &x, &shape, &mut rng, |t, v| t.scale(v, -1.7));
        check("add_scalar", &x, &shape, &mut rng, |t, v| t.add_scalar(v, 0.3));
        check("gelu", &x, &shape, &mut rng, |t, v| t.gelu(v));
        check("relu", &kinked, &shape, &mut rng, |t, v| t.relu(v));
        check("abs", &kinked, &shape, &mut rng, |t, v| t.abs(v));
    }
}

#[test]
fn matmul_all_layouts() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..TRIALS {
        let (m, k, n) = (
            rng.random_range(1..=4),
            rng.random_range(1..=4),
            rng.random_range(1..=4),
        );
        let batch = rng.random_range(1..=3);
        let a2 = random_tensor(&mut rng, &[m, k]);
        let b2 = random_tensor(&mut rng, &[k, n]);
        let a3 = random_tensor(&mut rng, &[batch, m, k]);
        let b3 = random_tensor(&mut rng, &[batch, k, n]);
        check("matmul", &a2, &[m, n], &mut rng, |t, v| {
            let b = t.constant(b2.clone())?;
            t.matmul(v, b)
        });
        check("matmul", &b2, &[m, n], &mut rng, |t, v| {
            let a = t.constant(a2.clone())?;
            t.matmul(a, v)
        });
        // batched lhs, shared rhs
        check("matmul", &a3, &[batch, m, n], &mut rng, |t, v| {
            let b = t.constant(b2.clone())?;
            t.matmul(v, b)
        });
        check("matmul", &b2, &[batch, m, n], &mut rng, |t, v| {
            let a = t.constant(a3.clone())?;
            t.matmul(a, v)
        });
        // shared lhs, batched rhs
        check("matmul", &a2, &[batch, m, n], &mut rng, |t, v| {
            let b = t.constant(b3.clone())?;
            t.matmul(v, b)
        });
        check("matmul", &b3, &[batch, m, n], &mut rng, |t, v| {
            let a = t.constant(a2.clone())?;
            t.matmul(a, v)
        });
        // fully batched
        check("matmul", &a3, &[batch, m, n], &mut rng, |t, v| {
            let b = t.constant(b3.clone())?;
            t.matmul(v, b)
        });
        check("matmul", &b3, &[batch, m, n], &mut rng, |t, v| {
            let a = t.constant(a3.clone())?;
            t.matmul(a, v)
        });
    }
}

#[test]
fn shape_ops() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..TRIALS {
        let shape: Vec<usize> = (0..3).map(|_| rng.random_range(1..=4)).collect();
        let x = random_tensor(&mut rng, &shape);

        let t_shape = [shape[0], shape[2], shape[1]];
        check("transpose", &x, &t_shape, &mut rng, |t, v| t.transpose(v));

        let p_shape = [shape[2], shape[0], shape[1]];
        check("permute", &x, &p_shape, &mut rng, |t, v| t.permute(v, &[2, 0, 1]));

        let flat = [shape.iter().product::<usize>()];
        check("reshape", &x, &flat, &mut rng, |t, v| t.reshape(v, &flat));

        let axis = rng.random_range(0..3);
        let mut other_shape = shape.clone();
        other_shape[axis] = rng.random_range(1..=3);
        let other = random_tensor(&mut rng, &other_shape);
        let mut cat_shape = shape.clone();
        cat_shape[axis] += other_shape[axis];
        check("concat", &x, &cat_shape, &mut rng, |t, v| {
            let o = t.constant(other.clone())?;
            t.concat(&[o, v, o], axis).and_then(|c| t.slice(c, axis, 0, cat_shape[axis]))
        });
        let mut cat3 = shape.clone();
        cat3[axis] += 2 * other_shape[axis];
        check("concat", &x, &cat3, &mut rng, |t, v| {
            let o = t.constant(other.clone())?;
            t.concat(&[o, v, o], axis)
        });

        let start = rng.random_range(0..shape[axis]);
        let end = rng.random_range(start + 1..=shape[axis]);
        let mut s_shape = shape.clone();
        s_shape[axis] = end - start;
        check("slice", &x, &s_shape, &mut rng, |t, v| t.slice(v, axis, start, end));
    }
}

#[test]
fn reductions_and_softmax() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..TRIALS {
        let shape = random_shape(&mut rng);
        let x = random_tensor(&mut rng, &shape);
        check("sum", &x, &[], &mut rng, |t, v| {
            let sq = t.mul(v, v)?;
            t.sum(sq)
        });
        check("mean", &x, &[], &mut rng, |t, v| {
            let sq = t.mul(v, v)?;
            t.mean(sq)
        });
        let axis = rng.random_range(0..shape.len());
        check("softmax", &x, &shape, &mut rng, |t, v| t.softmax(v, axis));
    }
}

#[test]
fn layer_norm_all_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..TRIALS {
        let mut shape = random_shape(&mut rng);
        let last = shape.len() - 1;
        shape[last] = rng.random_range(2..=5);
        let width = shape[last];
        let x = random_tensor(&mut rng, &shape);
        let gamma = random_tensor(&mut rng, &[width]);
        let beta = random_tensor(&mut rng, &[width]);
        check("layer_norm/x", &x, &shape, &mut rng, |t, v| {
            let g = t.constant(gamma.clone())?;
            let b = t.constant(beta.clone())?;
            t.layer_norm(v, g, b, 1e-5)
        });
        check("layer_norm/gamma", &gamma, &shape, &mut rng, |t, v| {
            let xv = t.constant(x.clone())?;
            let b = t.constant(beta.clone())?;
            t.layer_norm(xv, v, b, 1e-5)
        });
        check("layer_norm/beta", &beta, &shape, &mut rng, |t, v| {
            let xv = t.constant(x.clone())?;
            let g = t.constant(gamma.clone())?;
            t.layer_norm(xv, g, v, 1e-5)
        });
    }
}

#[test]
fn quadratic_form_and_linear_function() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 6;
    let a = random_tensor(&mut rng, &[n, n]);
    let x = random_tensor(&mut rng, &[n, 1]);
    let quad = grad_check(
        |t, v| {
            let av = t.constant(a.clone())?;
            let ax = t.matmul(av, v)?;
            let xt = t.transpose(v)?;
            let q = t.matmul(xt, ax)?;
            t.sum(q)
        },
        &x,
        1e-5,
    )
    .unwrap();
    assert!(quad < 1e-6, "quadratic form rel err {quad:e}");

    let w = random_tensor(&mut rng, &[n, 1]);
    let lin = grad_check(
        |t, v| {
            let wv = t.constant(w.clone())?;
            let p = t.mul(v, wv)?;
            let s = t.sum(p)?;
            t.add_scalar(s, 0.25)
        },
        &x,
        1e-5,
    )
    .unwrap();
    assert!(lin < 1e-9, "linear rel err {lin:e}");
}

#[test]
fn forward_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let a = random_tensor(&mut rng, &[3, 5, 7]);
    let b = random_tensor(&mut rng, &[7, 4]);
    let run = || {
        let mut t = Tape::new();
        let av = t.constant(a.clone()).unwrap();
        let bv = t.constant(b.clone()).unwrap();
        let c = t.matmul(av, bv).unwrap();
        let s = t.softmax(c, 2).unwrap();
        t.value(s).clone()
    };
    assert_eq!(run().data(), run().data());
}

#[test]
fn softmax_and_layer_norm_row_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut t = Tape::new();
    let x = t.constant(Tensor::from_fn(&[16, 9], |_| rng.random_range(-20.0..20.0))).unwrap();
    let s = t.softmax(x, 1).unwrap();
    for row in t.value(s).data().chunks(9) {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    let g = t.constant(Tensor::ones(&[9])).unwrap();
    let b = t.constant(Tensor::zeros(&[9])).unwrap();
    let y = t.layer_norm(x, g, b, 1e-12).unwrap();
    for row in t.value(y).data().chunks(9) {
        let mean = row.iter().sum::<f64>() / 9.0;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 9.0;
        assert!(mean.abs() < 1e-9);
        assert!((var - 1.0).abs() < 1e-6);
    }
}
