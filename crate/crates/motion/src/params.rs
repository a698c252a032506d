use mgvi_autodiff::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{MotionError, Result, TransformerConfig};

const LAYER_FIELDS: [&str; 12] = [
    "ln1.gamma",
    "ln1.beta",
    "attn.qkv.weight",
    "attn.qv.bias",
    "attn.out.weight",
    "attn.out.bias",
    "ln2.gamma",
    "ln2.beta",
    "ff1.weight",
    "ff1.bias",
    "ff2.weight",
    "ff2.bias",
];

/// Positions of each tensor within a network's flat parameter list.
pub(crate) mod slot {
    pub const INPUT_W: usize = 0;
    pub const INPUT_B: usize = 1;
    pub const LN1_G: usize = 0;
    pub const LN1_B: usize = 1;
    pub const QKV_W: usize = 2;
    pub const QV_B: usize = 3;
    pub const OUT_W: usize = 4;
    pub const OUT_B: usize = 5;
    pub const LN2_G: usize = 6;
    pub const LN2_B: usize = 7;
    pub const FF1_W: usize = 8;
    pub const FF1_B: usize = 9;
    pub const FF2_W: usize = 10;
    pub const FF2_B: usize = 11;

    pub fn layer(l: usize, field: usize) -> usize {
        2 + l * super::LAYER_FIELDS.len() + field
    }

    /// Final LayerNorm gamma, beta, then output weight and bias.
    pub fn tail(layers: usize, k: usize) -> usize {
        2 + layers * super::LAYER_FIELDS.len() + k
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Init {
    Zeros,
    Ones,
    Xavier { fan_in: usize, fan_out: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    init: Init,
}

/// Names and shapes of one network's parameters, in storage order.
pub fn network_specs(cfg: &TransformerConfig, in_dim: usize, out_dim: usize) -> Vec<ParamSpec> {
    let d = cfg.d_model;
    let spec = |name: String, shape: Vec<usize>, init| ParamSpec { name, shape, init };
    let xavier = |fan_in, fan_out| Init::Xavier { fan_in, fan_out };
    let mut out = vec![
        spec("input.weight".into(), vec![in_dim, d], xavier(in_dim, d)),
        spec("input.bias".into(), vec![d], Init::Zeros),
    ];
    for l in 0..cfg.layers {
        let shapes: [(Vec<usize>, Init); 12] = [
            (vec![d], Init::Ones),
            (vec![d], Init::Zeros),
            (vec![d, 3 * d], xavier(d, d)),
            // keys carry no bias: softmax is invariant to it
            (vec![2 * d], Init::Zeros),
            (vec![d, d], xavier(d, d)),
            (vec![d], Init::Zeros),
            (vec![d], Init::Ones),
            (vec![d], Init::Zeros),
            (vec![d, cfg.d_ff], xavier(d, cfg.d_ff)),
            (vec![cfg.d_ff], Init::Zeros),
            (vec![cfg.d_ff, d], xavier(cfg.d_ff, d)),
            (vec![d], Init::Zeros),
        ];
        for (field, (shape, init)) in LAYER_FIELDS.iter().zip(shapes) {
            out.push(spec(format!("layers.{l}.{field}"), shape, init));
        }
    }
    out.push(spec("final_ln.gamma".into(), vec![d], Init::Ones));
    out.push(spec("final_ln.beta".into(), vec![d], Init::Zeros));
    // zero output projection: the residual starts as the identity
    out.push(spec("output.weight".into(), vec![d, out_dim], Init::Zeros));
    out.push(spec("output.bias".into(), vec![out_dim], Init::Zeros));
    out
}

fn init_tensors(specs: &[ParamSpec], rng: &mut ChaCha8Rng) -> Vec<Tensor> {
    specs
        .iter()
        .map(|s| match s.init {
            Init::Zeros => Tensor::zeros(&s.shape),
            Init::Ones => Tensor::ones(&s.shape),
            Init::Xavier { fan_in, fan_out } => {
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                Tensor::from_fn(&s.shape, |_| rng.random_range(-limit..limit))
            }
        })
        .collect()
}

/// Weights of the denoising and interpolation networks.
#[derive(Clone, Debug, PartialEq)]
pub struct MotionModelParams {
    pub config: TransformerConfig,
    pub joints: usize,
    /// Pixel frame used to normalize coordinates into `[-1, 1]`.
    pub image_size: (usize, usize),
    pub denoiser: Vec<Tensor>,
    pub interpolator: Vec<Tensor>,
}

impl MotionModelParams {
    /// Xavier-uniform weights, unit LayerNorm gains, and zero biases and
    /// output projections, so a fresh model is the identity on its input.
    pub fn new(config: TransformerConfig, joints: usize, image_size: (usize, usize), seed: u64) -> Result<Self> {
        config.validate()?;
        if joints == 0 || image_size.0 == 0 || image_size.1 == 0 {
            return Err(MotionError::InvalidConfig("joints and image size must be positive".into()));
        }
        let specs = network_specs(&config, 3 * joints, 2 * joints);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let denoiser = init_tensors(&specs, &mut rng);
        let interpolator = init_tensors(&specs, &mut rng);
        Ok(Self {
            config,
            joints,
            image_size,
            denoiser,
            interpolator,
        })
    }

    pub fn input_dim(&self) -> usize {
        3 * self.joints
    }

    pub fn specs(&self) -> Vec<ParamSpec> {
        network_specs(&self.config, 3 * self.joints, 2 * self.joints)
    }

    /// Every tensor with its qualified name (`denoiser.` / `interpolator.`).
    pub fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let specs = self.specs();
        let mut out = Vec::with_capacity(2 * specs.len());
        for (prefix, net) in [("denoiser", &self.denoiser), ("interpolator", &self.interpolator)] {
            for (s, t) in specs.iter().zip(net) {
                out.push((format!("{prefix}.{}", s.name), t));
            }
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.denoiser.iter().chain(&self.interpolator).map(Tensor::numel).sum()
    }

    /// Zeroes both output projections, turning each network into the identity.
    pub fn zero_output_projections(&mut self) {
        let (w, b) = (slot::tail(self.config.layers, 2), slot::tail(self.config.layers, 3));
        for net in [&mut self.denoiser, &mut self.interpolator] {
            for i in [w, b] {
                net[i].data_mut().iter_mut().for_each(|v| *v = 0.0);
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.denoiser.iter().chain(&self.interpolator).all(Tensor::is_finite)
    }
}
