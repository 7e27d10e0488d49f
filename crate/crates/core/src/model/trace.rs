//! Per-sample record of a forward pass: attention maps for relevancy
//! propagation and the class-token embedding on both sides of the fusion
//! layer.

use crate::error::{Error, Result};
use crate::tensor::{Tape, Var};

/// One attention layer's maps for one sample, all heads.
#[derive(Debug, Clone)]
pub struct AttentionRecord {
    /// Token count T of this layer (encoder layers see P+1, fusion P+1+M).
    pub tokens: usize,
    pub heads: usize,
    /// Row-stochastic maps, `heads` blocks of T*T.
    pub probs: Vec<f64>,
    /// Gradients of the backward target w.r.t. `probs`, same layout.
    pub grads: Option<Vec<f64>>,
    pub(crate) vars: Vec<Var>,
}

impl AttentionRecord {
    pub fn head(&self, h: usize) -> &[f64] {
        let t2 = self.tokens * self.tokens;
        &self.probs[h * t2..(h + 1) * t2]
    }

    pub fn head_grad(&self, h: usize) -> Option<&[f64]> {
        let t2 = self.tokens * self.tokens;
        self.grads.as_ref().map(|g| &g[h * t2..(h + 1) * t2])
    }
}

/// Everything captured during one sample's forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// Encoder layers in order, then the fusion layer last (absent when the
    /// model runs image-only or recording is off).
    pub attention: Vec<AttentionRecord>,
    /// Class-token row after the encoder, before fusion.
    pub pre_fusion_class: Vec<f64>,
    /// Class-token row after the fusion residual (equals pre-fusion for an
    /// image-only model).
    pub post_fusion_class: Vec<f64>,
    pub logits: Vec<f64>,
    pub num_patches: usize,
    pub num_metadata: usize,
}

impl ForwardTrace {
    /// Pull attention gradients out of a tape after a backward pass.
    pub fn capture_attention_gradients(&mut self, tape: &Tape) -> Result<()> {
        for rec in &mut self.attention {
            let t2 = rec.tokens * rec.tokens;
            let mut grads = Vec::with_capacity(rec.heads * t2);
            for &v in &rec.vars {
                let g = tape.grad(v).ok_or(Error::MissingTraceGradients)?;
                grads.extend_from_slice(g);
            }
            rec.grads = Some(grads);
        }
        Ok(())
    }

    /// Largest deviation of any attention row sum from 1.
    pub fn max_row_sum_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for rec in &self.attention {
            for h in 0..rec.heads {
                let a = rec.head(h);
                for r in 0..rec.tokens {
                    let sum: f64 = a[r * rec.tokens..(r + 1) * rec.tokens].iter().sum();
                    worst = worst.max((sum - 1.0).abs());
                }
            }
        }
        worst
    }
}
