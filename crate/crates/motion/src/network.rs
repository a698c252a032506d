use mgvi_autodiff::{Tape, Tensor, Var};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::params::slot;
use crate::{encoding::positional_encoding, MotionError, Result, TransformerConfig};

const LN_EPS: f64 = 1e-5;
const MASKED_SCORE: f64 = -1e9;

/// Scaled dot-product attention over `[.., T, d_k]` inputs.
///
/// `mask` is an optional additive `[T, T]` score offset already on the tape.
pub(crate) fn attention_on_tape(tape: &mut Tape, q: Var, k: Var, v: Var, mask: Option<Var>) -> Result<Var> {
    let dk = *tape.value(q).shape().last().unwrap_or(&1);
    let kt = tape.transpose(k)?;
    let scores = tape.matmul(q, kt)?;
    let mut scores = tape.scale(scores, 1.0 / (dk as f64).sqrt())?;
    if let Some(m) = mask {
        scores = tape.add(scores, m)?;
    }
    let axis = tape.value(scores).rank() - 1;
    let weights = tape.softmax(scores, axis)?;
    Ok(tape.matmul(weights, v)?)
}

/// `softmax(q kᵀ / √d_k) v` for `[h, T, d_k]` tensors.
///
/// `mask[i][j] == 0` hides key `j` from query `i`.
pub fn attention(q: &Tensor, k: &Tensor, v: &Tensor, mask: Option<&Tensor>) -> Result<Tensor> {
    let (sq, sk, sv) = (q.shape(), k.shape(), v.shape());
    if sq.len() != 3 || sq != sk || sk != sv {
        return Err(MotionError::InvalidConfig(format!(
            "attention expects equal [h, T, d_k] shapes, got {sq:?}, {sk:?}, {sv:?}"
        )));
    }
    let mut tape = Tape::new();
    let (qv, kv, vv) = (tape.constant(q.clone())?, tape.constant(k.clone())?, tape.constant(v.clone())?);
    let mask = match mask {
        Some(m) => {
            let t = sq[1];
            if m.shape() != [t, t] {
                return Err(MotionError::InvalidConfig(format!("mask shape {:?} is not [{t}, {t}]", m.shape())));
            }
            let additive = Tensor::from_fn(&[t, t], |i| if m.data()[i] == 0.0 { MASKED_SCORE } else { 0.0 });
            Some(tape.constant(additive)?)
        }
        None => None,
    };
    let out = attention_on_tape(&mut tape, qv, kv, vv, mask)?;
    Ok(tape.value(out).clone())
}

/// Inverted dropout with a mask drawn from `rng`; identity when `rng` is
/// `None` or `p == 0`.
fn dropout(tape: &mut Tape, x: Var, p: f64, rng: &mut Option<&mut ChaCha8Rng>) -> Result<Var> {
    let Some(rng) = rng.as_deref_mut() else {
        return Ok(x);
    };
    if p == 0.0 {
        return Ok(x);
    }
    let keep = 1.0 / (1.0 - p);
    let shape = tape.value(x).shape().to_vec();
    let mask = Tensor::from_fn(&shape, |_| if rng.random::<f64>() < p { 0.0 } else { keep });
    let m = tape.constant(mask)?;
    Ok(tape.mul(x, m)?)
}

/// Puts one network's weights on the tape, as trainable parameters or as
/// constants.
pub(crate) fn bind(tape: &mut Tape, net: &[Tensor], trainable: bool) -> Result<Vec<Var>> {
    net.iter()
        .map(|t| if trainable { tape.param(t.clone()) } else { tape.constant(t.clone()) })
        .collect::<std::result::Result<_, _>>()
        .map_err(Into::into)
}

/// Residual prediction `[B, T, out]` for encoded input `[B, T, in]`.
pub(crate) fn forward(
    tape: &mut Tape,
    cfg: &TransformerConfig,
    w: &[Var],
    x: Var,
    mut rng: Option<&mut ChaCha8Rng>,
) -> Result<Var> {
    let shape = tape.value(x).shape().to_vec();
    let (b, t) = (shape[0], shape[1]);
    if t > cfg.max_len {
        return Err(MotionError::TooLong { len: t, max_len: cfg.max_len });
    }
    let (d, heads, dk) = (cfg.d_model, cfg.heads, cfg.head_dim());
    let p = cfg.dropout;

    let pe = tape.constant(positional_encoding(t, d)?)?;
    let h = tape.matmul(x, w[slot::INPUT_W])?;
    let h = tape.add(h, w[slot::INPUT_B])?;
    let h = tape.add(h, pe)?;
    let mut h = dropout(tape, h, p, &mut rng)?;

    for l in 0..cfg.layers {
        let f = |field| w[slot::layer(l, field)];
        let n = tape.layer_norm(h, f(slot::LN1_G), f(slot::LN1_B), LN_EPS)?;
        let qkv = tape.matmul(n, f(slot::QKV_W))?;
        let mut split = [qkv; 3];
        for (i, part) in split.iter_mut().enumerate() {
            let mut s = tape.slice(qkv, 2, i * d, (i + 1) * d)?;
            if i != 1 {
                let off = if i == 0 { 0 } else { d };
                let bias = tape.slice(f(slot::QV_B), 0, off, off + d)?;
                s = tape.add(s, bias)?;
            }
            let s = tape.reshape(s, &[b, t, heads, dk])?;
            *part = tape.permute(s, &[0, 2, 1, 3])?;
        }
        let a = attention_on_tape(tape, split[0], split[1], split[2], None)?;
        let a = tape.permute(a, &[0, 2, 1, 3])?;
        let a = tape.reshape(a, &[b, t, d])?;
        let a = tape.matmul(a, f(slot::OUT_W))?;
        let a = tape.add(a, f(slot::OUT_B))?;
        let a = dropout(tape, a, p, &mut rng)?;
        h = tape.add(h, a)?;

        let n = tape.layer_norm(h, f(slot::LN2_G), f(slot::LN2_B), LN_EPS)?;
        let ff = tape.matmul(n, f(slot::FF1_W))?;
        let ff = tape.add(ff, f(slot::FF1_B))?;
        let ff = tape.gelu(ff)?;
        let ff = tape.matmul(ff, f(slot::FF2_W))?;
        let ff = tape.add(ff, f(slot::FF2_B))?;
        let ff = dropout(tape, ff, p, &mut rng)?;
        h = tape.add(h, ff)?;
    }

    let tail = |k| w[slot::tail(cfg.layers, k)];
    let h = tape.layer_norm(h, tail(0), tail(1), LN_EPS)?;
    let out = tape.matmul(h, tail(2))?;
    Ok(tape.add(out, tail(3))?)
}

/// Inference pass of one network on a single encoded sequence `[T, in]`.
pub(crate) fn run(cfg: &TransformerConfig, net: &[Tensor], x: Tensor) -> Result<Tensor> {
    let (t, c) = (x.shape()[0], x.shape()[1]);
    let mut tape = Tape::new();
    let w = bind(&mut tape, net, false)?;
    let xv = tape.constant(x.reshaped(&[1, t, c])?)?;
    let out = forward(&mut tape, cfg, &w, xv, None)?;
    let out = tape.value(out).clone();
    let cols = out.shape()[2];
    Ok(out.reshaped(&[t, cols])?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::MotionModelParams;

    fn rows(shape: &[usize], seed: u64) -> Tensor {
        Tensor::from_fn(shape, |i| ((i as u64 * 2654435761 + seed) % 1000) as f64 / 500.0 - 1.0)
    }

    #[test]
    fn single_step_returns_values() {
        let (q, k, v) = (rows(&[2, 1, 4], 1), rows(&[2, 1, 4], 2), rows(&[2, 1, 4], 3));
        assert_eq!(attention(&q, &k, &v, None).unwrap(), v);
    }

    #[test]
    fn equal_scores_average_values() {
        let q = Tensor::zeros(&[1, 3, 2]);
        let k = rows(&[1, 3, 2], 5);
        let v = Tensor::new(vec![1, 3, 2], vec![1.0, 2.0, 3.0, 4.0, 5.0, 9.0]).unwrap();
        let out = attention(&q, &k, &v, None).unwrap();
        for row in out.data().chunks(2) {
            assert!((row[0] - 3.0).abs() < 1e-12 && (row[1] - 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn masked_key_is_ignored() {
        let (q, k) = (rows(&[2, 3, 4], 7), rows(&[2, 3, 4], 8));
        let mask = Tensor::from_fn(&[3, 3], |i| if i % 3 == 1 { 0.0 } else { 1.0 });
        let v1 = rows(&[2, 3, 4], 9);
        let mut v2 = v1.clone();
        for h in 0..2 {
            for c in 0..4 {
                v2.data_mut()[h * 12 + 4 + c] += 100.0;
            }
        }
        let a = attention(&q, &k, &v1, Some(&mask)).unwrap();
        let b = attention(&q, &k, &v2, Some(&mask)).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-9);
        assert!(attention(&q, &k, &rows(&[2, 4, 4], 1), None).is_err());
    }

    #[test]
    fn zero_projection_gives_zero_residual() {
        let cfg = TransformerConfig {
            d_model: 16,
            heads: 4,
            layers: 2,
            d_ff: 32,
            ..TransformerConfig::default()
        };
        let p = MotionModelParams::new(cfg, 19, (256, 256), 3).unwrap();
        let out = run(&cfg, &p.denoiser, rows(&[6, 57], 4)).unwrap();
        assert_eq!(out.shape(), &[6, 38]);
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_over_length() {
        let cfg = TransformerConfig {
            d_model: 8,
            heads: 2,
            layers: 1,
            d_ff: 8,
            max_len: 4,
            ..TransformerConfig::default()
        };
        let p = MotionModelParams::new(cfg, 2, (64, 64), 0).unwrap();
        assert!(matches!(
            run(&cfg, &p.denoiser, Tensor::zeros(&[5, 6])),
            Err(MotionError::TooLong { len: 5, max_len: 4 })
        ));
    }
}
