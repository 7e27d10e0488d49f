//! Learnable weights, their initialization, and their binding onto a tape.

use super::ModelConfig;
use crate::rng::{seeded, trunc_normal};
use crate::tensor::{Tape, Tensor, Var};

const INIT_STD: f64 = 0.02;

/// Learning-rate group a tensor belongs to. The transformer encoder (patch
/// projection, class token, positional table, encoder layers) trains with its
/// own rate; the metadata embedder, fusion layer, and head with another.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamGroup {
    Encoder,
    Other,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearParams {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl LinearParams {
    fn init(rng: &mut rand_chacha::ChaCha8Rng, rows: usize, cols: usize) -> Self {
        let data: Vec<f64> = (0..rows * cols).map(|_| trunc_normal(rng, INIT_STD)).collect();
        Self {
            weight: Tensor::new(vec![rows, cols], data)
                .expect("linear shape")
                .requires_grad(true),
            bias: Tensor::zeros(vec![cols]).requires_grad(true),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNormParams {
    pub gain: Tensor,
    pub bias: Tensor,
}

impl LayerNormParams {
    fn init(dim: usize) -> Self {
        Self {
            gain: Tensor::ones(vec![dim]).requires_grad(true),
            bias: Tensor::zeros(vec![dim]).requires_grad(true),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub wq: LinearParams,
    pub wk: LinearParams,
    pub wv: LinearParams,
    pub wo: LinearParams,
}

impl AttentionParams {
    fn init(rng: &mut rand_chacha::ChaCha8Rng, dim: usize) -> Self {
        Self {
            wq: LinearParams::init(rng, dim, dim),
            wk: LinearParams::init(rng, dim, dim),
            wv: LinearParams::init(rng, dim, dim),
            wo: LinearParams::init(rng, dim, dim),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderLayerParams {
    pub norm1: LayerNormParams,
    pub attn: AttentionParams,
    pub norm2: LayerNormParams,
    pub mlp_fc1: LinearParams,
    pub mlp_fc2: LinearParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormParams {
    pub gain: Tensor,
    pub bias: Tensor,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams {
    pub fc1: LinearParams,
    pub bn: BatchNormParams,
    pub fc2: LinearParams,
}

/// Every learnable tensor of the model. Shapes are a pure function of the
/// [`ModelConfig`]; values of the seed.
#[derive(Debug, Clone, PartialEq)]
pub struct VitAttParams {
    pub patch_proj: LinearParams,
    pub class_token: Tensor,
    pub pos_embed: Tensor,
    pub encoder: Vec<EncoderLayerParams>,
    pub meta_embed: LinearParams,
    pub meta_norm: LayerNormParams,
    pub fusion: AttentionParams,
    pub head: HeadParams,
}

impl VitAttParams {
    /// Truncated-normal (std 0.02) weights, zero biases, unit norm gains.
    pub fn init(config: &ModelConfig, seed: u64) -> Self {
        let mut rng = seeded(seed);
        let d = config.embed_dim;
        let patch_proj = LinearParams::init(&mut rng, config.patch_dim(), d);
        let class_token = Tensor::new(
            vec![1, d],
            (0..d).map(|_| trunc_normal(&mut rng, INIT_STD)).collect(),
        )
        .expect("class token shape")
        .requires_grad(true);
        let positions = config.num_patches() + 1;
        let pos_embed = Tensor::new(
            vec![positions, d],
            (0..positions * d)
                .map(|_| trunc_normal(&mut rng, INIT_STD))
                .collect(),
        )
        .expect("positional table shape")
        .requires_grad(true);
        let encoder = (0..config.num_layers)
            .map(|_| EncoderLayerParams {
                norm1: LayerNormParams::init(d),
                attn: AttentionParams::init(&mut rng, d),
                norm2: LayerNormParams::init(d),
                mlp_fc1: LinearParams::init(&mut rng, d, config.mlp_hidden),
                mlp_fc2: LinearParams::init(&mut rng, config.mlp_hidden, d),
            })
            .collect();
        let meta_embed = LinearParams::init(&mut rng, config.metadata_width.max(1), d);
        let meta_norm = LayerNormParams::init(d);
        let fusion = AttentionParams::init(&mut rng, d);
        let head = HeadParams {
            fc1: LinearParams::init(&mut rng, d, config.head_hidden),
            bn: BatchNormParams {
                gain: Tensor::ones(vec![config.head_hidden]).requires_grad(true),
                bias: Tensor::zeros(vec![config.head_hidden]).requires_grad(true),
                running_mean: vec![0.0; config.head_hidden],
                running_var: vec![1.0; config.head_hidden],
            },
            fc2: LinearParams::init(&mut rng, config.head_hidden, config.num_classes),
        };
        Self {
            patch_proj,
            class_token,
            pos_embed,
            encoder,
            meta_embed,
            meta_norm,
            fusion,
            head,
        }
    }

    /// All learnable tensors with stable names, in a fixed order shared with
    /// [`Self::visit_mut`] and [`bind`].
    pub fn visit(&self) -> Vec<(String, ParamGroup, &Tensor)> {
        use ParamGroup::{Encoder, Other};
        let mut out = Vec::new();
        out.push(("patch_proj.weight".into(), Encoder, &self.patch_proj.weight));
        out.push(("patch_proj.bias".into(), Encoder, &self.patch_proj.bias));
        out.push(("class_token".into(), Encoder, &self.class_token));
        out.push(("pos_embed".into(), Encoder, &self.pos_embed));
        for (i, layer) in self.encoder.iter().enumerate() {
            let p = |suffix: &str| format!("encoder.{i}.{suffix}");
            out.push((p("norm1.gain"), Encoder, &layer.norm1.gain));
            out.push((p("norm1.bias"), Encoder, &layer.norm1.bias));
            for (name, lin) in [
                ("attn.wq", &layer.attn.wq),
                ("attn.wk", &layer.attn.wk),
                ("attn.wv", &layer.attn.wv),
                ("attn.wo", &layer.attn.wo),
                ("mlp_fc1", &layer.mlp_fc1),
                ("mlp_fc2", &layer.mlp_fc2),
            ] {
                out.push((p(&format!("{name}.weight")), Encoder, &lin.weight));
                out.push((p(&format!("{name}.bias")), Encoder, &lin.bias));
            }
            out.push((p("norm2.gain"), Encoder, &layer.norm2.gain));
            out.push((p("norm2.bias"), Encoder, &layer.norm2.bias));
        }
        out.push(("meta_embed.weight".into(), Other, &self.meta_embed.weight));
        out.push(("meta_embed.bias".into(), Other, &self.meta_embed.bias));
        out.push(("meta_norm.gain".into(), Other, &self.meta_norm.gain));
        out.push(("meta_norm.bias".into(), Other, &self.meta_norm.bias));
        for (name, lin) in [
            ("fusion.wq", &self.fusion.wq),
            ("fusion.wk", &self.fusion.wk),
            ("fusion.wv", &self.fusion.wv),
            ("fusion.wo", &self.fusion.wo),
            ("head.fc1", &self.head.fc1),
        ] {
            out.push((format!("{name}.weight"), Other, &lin.weight));
            out.push((format!("{name}.bias"), Other, &lin.bias));
        }
        out.push(("head.bn.gain".into(), Other, &self.head.bn.gain));
        out.push(("head.bn.bias".into(), Other, &self.head.bn.bias));
        out.push(("head.fc2.weight".into(), Other, &self.head.fc2.weight));
        out.push(("head.fc2.bias".into(), Other, &self.head.fc2.bias));
        out
    }

    pub fn visit_mut(&mut self) -> Vec<(String, ParamGroup, &mut Tensor)> {
        use ParamGroup::{Encoder, Other};
        let mut out: Vec<(String, ParamGroup, &mut Tensor)> = Vec::new();
        out.push(("patch_proj.weight".into(), Encoder, &mut self.patch_proj.weight));
        out.push(("patch_proj.bias".into(), Encoder, &mut self.patch_proj.bias));
        out.push(("class_token".into(), Encoder, &mut self.class_token));
        out.push(("pos_embed".into(), Encoder, &mut self.pos_embed));
        for (i, layer) in self.encoder.iter_mut().enumerate() {
            out.push((format!("encoder.{i}.norm1.gain"), Encoder, &mut layer.norm1.gain));
            out.push((format!("encoder.{i}.norm1.bias"), Encoder, &mut layer.norm1.bias));
            for (name, lin) in [
                ("attn.wq", &mut layer.attn.wq),
                ("attn.wk", &mut layer.attn.wk),
                ("attn.wv", &mut layer.attn.wv),
                ("attn.wo", &mut layer.attn.wo),
                ("mlp_fc1", &mut layer.mlp_fc1),
                ("mlp_fc2", &mut layer.mlp_fc2),
            ] {
                out.push((format!("encoder.{i}.{name}.weight"), Encoder, &mut lin.weight));
                out.push((format!("encoder.{i}.{name}.bias"), Encoder, &mut lin.bias));
            }
            out.push((format!("encoder.{i}.norm2.gain"), Encoder, &mut layer.norm2.gain));
            out.push((format!("encoder.{i}.norm2.bias"), Encoder, &mut layer.norm2.bias));
        }
        out.push(("meta_embed.weight".into(), Other, &mut self.meta_embed.weight));
        out.push(("meta_embed.bias".into(), Other, &mut self.meta_embed.bias));
        out.push(("meta_norm.gain".into(), Other, &mut self.meta_norm.gain));
        out.push(("meta_norm.bias".into(), Other, &mut self.meta_norm.bias));
        for (name, lin) in [
            ("fusion.wq", &mut self.fusion.wq),
            ("fusion.wk", &mut self.fusion.wk),
            ("fusion.wv", &mut self.fusion.wv),
            ("fusion.wo", &mut self.fusion.wo),
            ("head.fc1", &mut self.head.fc1),
        ] {
            out.push((format!("{name}.weight"), Other, &mut lin.weight));
            out.push((format!("{name}.bias"), Other, &mut lin.bias));
        }
        out.push(("head.bn.gain".into(), Other, &mut self.head.bn.gain));
        out.push(("head.bn.bias".into(), Other, &mut self.head.bn.bias));
        out.push(("head.fc2.weight".into(), Other, &mut self.head.fc2.weight));
        out.push(("head.fc2.bias".into(), Other, &mut self.head.fc2.bias));
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.visit().iter().map(|(_, _, t)| t.numel()).sum()
    }

    /// Drop any gradients left from a previous step.
    pub fn clear_grads(&mut self) {
        for (_, _, t) in self.visit_mut() {
            t.grad = None;
        }
    }
}

// ── Tape binding ────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy)]
pub struct LinearVars {
    pub weight: Var,
    pub bias: Var,
}

#[derive(Debug, Clone, Copy)]
pub struct LayerNormVars {
    pub gain: Var,
    pub bias: Var,
}

#[derive(Debug, Clone, Copy)]
pub struct AttentionVars {
    pub wq: LinearVars,
    pub wk: LinearVars,
    pub wv: LinearVars,
    pub wo: LinearVars,
}

#[derive(Debug, Clone, Copy)]
pub struct EncoderLayerVars {
    pub norm1: LayerNormVars,
    pub attn: AttentionVars,
    pub norm2: LayerNormVars,
    pub mlp_fc1: LinearVars,
    pub mlp_fc2: LinearVars,
}

#[derive(Debug, Clone)]
pub struct ParamVars {
    pub patch_proj: LinearVars,
    pub class_token: Var,
    pub pos_embed: Var,
    pub encoder: Vec<EncoderLayerVars>,
    pub meta_embed: LinearVars,
    pub meta_norm: LayerNormVars,
    pub fusion: AttentionVars,
    pub head_fc1: LinearVars,
    pub head_bn: LayerNormVars,
    pub head_fc2: LinearVars,
}

/// Structured handles plus the flat list in [`VitAttParams::visit`] order.
#[derive(Debug, Clone)]
pub struct BoundParams {
    pub vars: ParamVars,
    pub flat: Vec<Var>,
}

struct Binder<'a> {
    tape: &'a mut Tape,
    flat: Vec<Var>,
}

impl Binder<'_> {
    fn leaf(&mut self, t: &Tensor) -> Var {
        let v = self.tape.leaf(t);
        self.flat.push(v);
        v
    }

    fn lin(&mut self, l: &LinearParams) -> LinearVars {
        LinearVars {
            weight: self.leaf(&l.weight),
            bias: self.leaf(&l.bias),
        }
    }

    fn norm(&mut self, n: &LayerNormParams) -> LayerNormVars {
        LayerNormVars {
            gain: self.leaf(&n.gain),
            bias: self.leaf(&n.bias),
        }
    }

    fn attn(&mut self, a: &AttentionParams) -> AttentionVars {
        AttentionVars {
            wq: self.lin(&a.wq),
            wk: self.lin(&a.wk),
            wv: self.lin(&a.wv),
            wo: self.lin(&a.wo),
        }
    }
}

/// Insert every learnable tensor as a tape leaf, in [`VitAttParams::visit`]
/// order.
pub fn bind(tape: &mut Tape, params: &VitAttParams) -> BoundParams {
    let mut b = Binder {
        tape,
        flat: Vec::new(),
    };
    let patch_proj = b.lin(&params.patch_proj);
    let class_token = b.leaf(&params.class_token);
    let pos_embed = b.leaf(&params.pos_embed);
    let mut encoder = Vec::with_capacity(params.encoder.len());
    for layer in &params.encoder {
        let norm1 = b.norm(&layer.norm1);
        let attn = b.attn(&layer.attn);
        let mlp_fc1 = b.lin(&layer.mlp_fc1);
        let mlp_fc2 = b.lin(&layer.mlp_fc2);
        let norm2 = b.norm(&layer.norm2);
        encoder.push(EncoderLayerVars {
            norm1,
            attn,
            norm2,
            mlp_fc1,
            mlp_fc2,
        });
    }
    let meta_embed = b.lin(&params.meta_embed);
    let meta_norm = b.norm(&params.meta_norm);
    let fusion = b.attn(&params.fusion);
    let head_fc1 = b.lin(&params.head.fc1);
    let head_bn = LayerNormVars {
        gain: b.leaf(&params.head.bn.gain),
        bias: b.leaf(&params.head.bn.bias),
    };
    let head_fc2 = b.lin(&params.head.fc2);
    BoundParams {
        vars: ParamVars {
            patch_proj,
            class_token,
            pos_embed,
            encoder,
            meta_embed,
            meta_norm,
            fusion,
            head_fc1,
            head_bn,
            head_fc2,
        },
        flat: b.flat,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ModelConfig {
        ModelConfig {
            image_size: 32,
            patch_size: 8,
            channels: 3,
            embed_dim: 16,
            num_layers: 2,
            num_heads: 2,
            mlp_hidden: 32,
            head_hidden: 16,
            num_metadata_slots: 4,
            metadata_width: 3,
            num_classes: 3,
            image_only: false,
        }
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let cfg = tiny();
        let a = VitAttParams::init(&cfg, 9);
        let b = VitAttParams::init(&cfg, 9);
        for ((na, _, ta), (nb, _, tb)) in a.visit().iter().zip(b.visit().iter()) {
            assert_eq!(na, nb);
            assert_eq!(ta.shape(), tb.shape());
            for (x, y) in ta.data().iter().zip(tb.data()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        let c = VitAttParams::init(&cfg, 10);
        assert_ne!(
            a.patch_proj.weight.data()[0],
            c.patch_proj.weight.data()[0]
        );
    }

    #[test]
    fn visit_and_visit_mut_agree() {
        let cfg = tiny();
        let mut p = VitAttParams::init(&cfg, 1);
        let names: Vec<(String, usize)> = p
            .visit()
            .iter()
            .map(|(n, _, t)| (n.clone(), t.numel()))
            .collect();
        let names_mut: Vec<(String, usize)> = p
            .visit_mut()
            .iter()
            .map(|(n, _, t)| (n.clone(), t.numel()))
            .collect();
        assert_eq!(names, names_mut);
    }

    #[test]
    fn bind_order_matches_visit_order() {
        let cfg = tiny();
        let p = VitAttParams::init(&cfg, 3);
        let mut tape = Tape::new();
        let bound = bind(&mut tape, &p);
        let visited = p.visit();
        assert_eq!(bound.flat.len(), visited.len());
        for (v, (_, _, t)) in bound.flat.iter().zip(&visited) {
            assert_eq!(tape.value(*v), t.data());
        }
    }

    #[test]
    fn parameter_count_is_config_determined() {
        let cfg = tiny();
        let d = cfg.embed_dim;
        let per_attn = 4 * (d * d + d);
        let per_layer =
            2 * (d + d) + per_attn + (d * cfg.mlp_hidden + cfg.mlp_hidden) + (cfg.mlp_hidden * d + d);
        let expected = (cfg.patch_dim() * d + d)
            + d
            + (cfg.num_patches() + 1) * d
            + cfg.num_layers * per_layer
            + (cfg.metadata_width * d + d)
            + (d + d)
            + per_attn
            + (d * cfg.head_hidden + cfg.head_hidden)
            + 2 * cfg.head_hidden
            + (cfg.head_hidden * cfg.num_classes + cfg.num_classes);
        assert_eq!(VitAttParams::init(&cfg, 0).num_parameters(), expected);
        assert_eq!(VitAttParams::init(&cfg, 77).num_parameters(), expected);
    }
}
