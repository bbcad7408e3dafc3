//! Flat parameter storage.
//!
//! All weights live in one `Vec<f64>` so that optimizer updates, meta-update
//! algebra (`θ'' − θ`), checkpointing, and finite-difference checks operate
//! on plain slices. The layout, in order: input embedding, output embedding
//! (one extra start-input row), encoder LSTM (w_x, w_h, b), decoder LSTM
//! (w_x over [emb, context], w_h, b), bilinear attention matrix, output
//! projection (w, b). LSTM gate blocks are ordered input, forget, cell, output.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// A contiguous matrix region of the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatSpec {
    pub off: usize,
    pub rows: usize,
    pub cols: usize,
}

impl MatSpec {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.off..self.off + self.len()
    }

    pub fn row(&self, r: usize) -> std::ops::Range<usize> {
        debug_assert!(r < self.rows);
        let start = self.off + r * self.cols;
        start..start + self.cols
    }
}

/// Sizes that determine the parameter layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub d_emb: usize,
    pub d_h: usize,
    pub v_in: usize,
    pub v_out: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct Layout {
    pub dims: Dims,
    pub embed_in: MatSpec,
    /// v_out + 1 rows; the extra final row embeds the decoder start input.
    pub embed_out: MatSpec,
    pub enc_wx: MatSpec,
    pub enc_wh: MatSpec,
    pub enc_b: MatSpec,
    pub dec_wx: MatSpec,
    pub dec_wh: MatSpec,
    pub dec_b: MatSpec,
    pub attn: MatSpec,
    pub out_w: MatSpec,
    pub out_b: MatSpec,
    pub total: usize,
}

impl Layout {
    pub fn new(dims: Dims) -> Layout {
        let Dims { d_emb, d_h, v_in, v_out } = dims;
        let mut off = 0;
        let mut mat = |rows: usize, cols: usize| {
            let spec = MatSpec { off, rows, cols };
            off += rows * cols;
            spec
        };
        let embed_in = mat(v_in, d_emb);
        let embed_out = mat(v_out + 1, d_emb);
        let enc_wx = mat(4 * d_h, d_emb);
        let enc_wh = mat(4 * d_h, d_h);
        let enc_b = mat(4 * d_h, 1);
        let dec_wx = mat(4 * d_h, d_emb + d_h);
        let dec_wh = mat(4 * d_h, d_h);
        let dec_b = mat(4 * d_h, 1);
        let attn = mat(d_h, d_h);
        let out_w = mat(v_out, d_h);
        let out_b = mat(v_out, 1);
        Layout {
            dims,
            embed_in,
            embed_out,
            enc_wx,
            enc_wh,
            enc_b,
            dec_wx,
            dec_wh,
            dec_b,
            attn,
            out_w,
            out_b,
            total: off,
        }
    }

    /// Row index of the decoder start-input embedding in `embed_out`.
    pub fn start_row(&self) -> usize {
        self.dims.v_out
    }
}

/// The policy weights as one flat vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub data: Vec<f64>,
}

impl Params {
    /// Uniform initialization in [-0.08, 0.08], seeded.
    pub fn init(layout: &Layout, seed: u64) -> Params {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..layout.total)
            .map(|_| rng.random_range(-0.08..0.08))
            .collect();
        Params { data }
    }

    pub fn zeros(layout: &Layout) -> Params {
        Params {
            data: vec![0.0; layout.total],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn mat(&self, spec: MatSpec) -> &[f64] {
        &self.data[spec.range()]
    }

    pub fn row(&self, spec: MatSpec, r: usize) -> &[f64] {
        &self.data[spec.row(r)]
    }

    /// data += scale * other, skipped entirely when scale is 0 so a zero
    /// step size is exactly a no-op.
    pub fn axpy(&mut self, scale: f64, other: &[f64]) {
        debug_assert_eq!(self.data.len(), other.len());
        if scale == 0.0 {
            return;
        }
        for (d, o) in self.data.iter_mut().zip(other) {
            *d += scale * o;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
