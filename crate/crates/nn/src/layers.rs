//! Layers assembled from differentiable tensor primitives.

use candle_core::{DType, Tensor, D};
use rand::Rng;
use sabia_core::SeededRng;

use crate::params::{Init, ParamStore};
use crate::Result;

/// Training-time randomness. `None` means inference: dropout is a no-op.
pub type DropoutRng<'a> = Option<&'a mut SeededRng>;

/// Inverted dropout with a mask drawn from the caller's seeded generator.
pub fn dropout(x: &Tensor, p: f64, rng: &mut DropoutRng) -> Result<Tensor> {
    let Some(rng) = rng.as_deref_mut() else {
        return Ok(x.clone());
    };
    if p <= 0.0 {
        return Ok(x.clone());
    }
    let keep = 1.0 - p;
    let scale = 1.0 / keep;
    let mask: Vec<f32> = (0..x.elem_count())
        .map(|_| if rng.random::<f64>() < keep { scale as f32 } else { 0.0 })
        .collect();
    let mask = Tensor::from_vec(mask, x.shape(), x.device())?.to_dtype(x.dtype())?;
    Ok(x.mul(&mask)?)
}

pub fn sigmoid(x: &Tensor) -> Result<Tensor> {
    Ok(((x * 0.5)?.tanh()? * 0.5)?.affine(1.0, 0.5)?)
}

#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Option<Tensor>,
}

impl Linear {
    /// PyTorch-style uniform init bounded by `1/sqrt(in)`.
    pub fn new(store: &mut ParamStore, prefix: &str, d_in: usize, d_out: usize, rng: &mut SeededRng) -> Result<Self> {
        let bound = 1.0 / (d_in as f64).sqrt();
        Self::with_init(store, prefix, d_in, d_out, Init::Uniform(bound), Init::Uniform(bound), rng)
    }

    pub fn with_init(
        store: &mut ParamStore,
        prefix: &str,
        d_in: usize,
        d_out: usize,
        w_init: Init,
        b_init: Init,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        Ok(Linear {
            weight: store.param(&format!("{prefix}.weight"), &[d_out, d_in], w_init, rng)?,
            bias: Some(store.param(&format!("{prefix}.bias"), &[d_out], b_init, rng)?),
        })
    }

    /// Applies to the last axis of a rank-2 or rank-3 input.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let y = match x.dims() {
            [b, t, d] => x.reshape((b * t, *d))?.matmul(&self.weight.t()?)?.reshape((*b, *t, ()))?,
            _ => x.matmul(&self.weight.t()?)?,
        };
        Ok(match &self.bias {
            Some(b) => y.broadcast_add(b)?,
            None => y,
        })
    }
}

#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub weight: Tensor,
    pub bias: Tensor,
    pub eps: f64,
}

impl LayerNorm {
    pub fn new(store: &mut ParamStore, prefix: &str, dim: usize, eps: f64, rng: &mut SeededRng) -> Result<Self> {
        Ok(LayerNorm {
            weight: store.param(&format!("{prefix}.weight"), &[dim], Init::Ones, rng)?,
            bias: store.param(&format!("{prefix}.bias"), &[dim], Init::Zeros, rng)?,
            eps,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mean = x.mean_keepdim(D::Minus1)?;
        let centered = x.broadcast_sub(&mean)?;
        let var = centered.sqr()?.mean_keepdim(D::Minus1)?;
        let normed = centered.broadcast_div(&(var + self.eps)?.sqrt()?)?;
        Ok(normed.broadcast_mul(&self.weight)?.broadcast_add(&self.bias)?)
    }
}

#[derive(Debug, Clone)]
pub struct Embedding {
    pub table: Tensor,
}

impl Embedding {
    pub fn new(store: &mut ParamStore, prefix: &str, n: usize, dim: usize, init: Init, rng: &mut SeededRng) -> Result<Self> {
        Ok(Embedding {
            table: store.param(&format!("{prefix}.weight"), &[n, dim], init, rng)?,
        })
    }

    /// `[b, t]` ids to `[b, t, dim]` vectors.
    pub fn forward(&self, ids: &Tensor) -> Result<Tensor> {
        let (b, t) = ids.dims2()?;
        Ok(self.table.embedding(&ids.flatten_all()?)?.reshape((b, t, ()))?)
    }
}

/// Valid (unpadded) 1-D convolution over `[b, channels, time]`.
#[derive(Debug, Clone)]
pub struct Conv1d {
    pub weight: Tensor,
    pub bias: Tensor,
    pub kernel: usize,
}

impl Conv1d {
    pub fn new(
        store: &mut ParamStore,
        prefix: &str,
        c_in: usize,
        c_out: usize,
        kernel: usize,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        let bound = 1.0 / ((c_in * kernel) as f64).sqrt();
        Ok(Conv1d {
            weight: store.param(&format!("{prefix}.weight"), &[c_out, c_in, kernel], Init::Uniform(bound), rng)?,
            bias: store.param(&format!("{prefix}.bias"), &[c_out], Init::Uniform(bound), rng)?,
            kernel,
        })
    }

    /// `[b, c_in, t]` to `[b, c_out, t - k + 1]`. Built from window slices
    /// and a matmul; the backend's native conv1d gradient is not trusted.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (b, c_in, t) = x.dims3()?;
        let k = self.kernel;
        if t < k {
            return Err(crate::Error::Config(format!("sequence length {t} shorter than kernel {k}")));
        }
        let positions = t - k + 1;
        let windows: Vec<Tensor> = (0..k).map(|j| x.narrow(2, j, positions)).collect::<candle_core::Result<_>>()?;
        // [b, c_in, k, positions] flattened to match the [c_out, c_in, k] weight layout
        let cols = Tensor::stack(&windows, 2)?.reshape((b, c_in * k, positions))?;
        let w = self.weight.reshape((self.weight.dim(0)?, c_in * k))?;
        let y = w.broadcast_left(b)?.contiguous()?.matmul(&cols)?;
        Ok(y.broadcast_add(&self.bias.reshape((1, (), 1))?)?)
    }
}

/// One LSTM direction with gate order input, forget, cell, output.
#[derive(Debug, Clone)]
pub struct Lstm {
    pub weight_ih: Tensor,
    pub weight_hh: Tensor,
    pub bias: Tensor,
    pub hidden: usize,
}

impl Lstm {
    pub fn new(store: &mut ParamStore, prefix: &str, d_in: usize, hidden: usize, rng: &mut SeededRng) -> Result<Self> {
        let init = Init::Uniform(1.0 / (hidden as f64).sqrt());
        Ok(Lstm {
            weight_ih: store.param(&format!("{prefix}.weight_ih"), &[4 * hidden, d_in], init, rng)?,
            weight_hh: store.param(&format!("{prefix}.weight_hh"), &[4 * hidden, hidden], init, rng)?,
            bias: store.param(&format!("{prefix}.bias"), &[4 * hidden], init, rng)?,
            hidden,
        })
    }

    /// Hidden states for every step of `[b, t, d_in]`, in time order,
    /// scanning backwards when `reverse` is set.
    pub fn forward(&self, x: &Tensor, reverse: bool) -> Result<Vec<Tensor>> {
        self.forward_masked(x, None, reverse)
    }

    /// Like `forward`, but where `keep[b, t]` is 0 the state is carried
    /// over unchanged, so trailing padding never touches it.
    pub fn forward_masked(&self, x: &Tensor, keep: Option<&Tensor>, reverse: bool) -> Result<Vec<Tensor>> {
        let (b, t, d) = x.dims3()?;
        let h = self.hidden;
        // input projections for all steps at once
        let xw = x
            .reshape((b * t, d))?
            .matmul(&self.weight_ih.t()?)?
            .broadcast_add(&self.bias)?
            .reshape((b, t, 4 * h))?;
        let w_hh_t = self.weight_hh.t()?;
        let mut hs = Tensor::zeros((b, h), x.dtype(), x.device())?;
        let mut cs = hs.clone();
        let mut out = vec![None; t];
        let steps: Box<dyn Iterator<Item = usize>> = if reverse { Box::new((0..t).rev()) } else { Box::new(0..t) };
        for step in steps {
            let gates = xw.narrow(1, step, 1)?.squeeze(1)?.add(&hs.matmul(&w_hh_t)?)?;
            let i = sigmoid(&gates.narrow(1, 0, h)?)?;
            let f = sigmoid(&gates.narrow(1, h, h)?)?;
            let g = gates.narrow(1, 2 * h, h)?.tanh()?;
            let o = sigmoid(&gates.narrow(1, 3 * h, h)?)?;
            let c_new = f.mul(&cs)?.add(&i.mul(&g)?)?;
            let h_new = o.mul(&c_new.tanh()?)?;
            match keep {
                Some(k) => {
                    let k = k.narrow(1, step, 1)?;
                    cs = (c_new - &cs)?.broadcast_mul(&k)?.add(&cs)?;
                    hs = (h_new - &hs)?.broadcast_mul(&k)?.add(&hs)?;
                }
                None => {
                    cs = c_new;
                    hs = h_new;
                }
            }
            out[step] = Some(hs.clone());
        }
        Ok(out.into_iter().map(|s| s.expect("every step visited")).collect())
    }
}

#[derive(Debug, Clone)]
pub struct BiLstm {
    pub forward: Lstm,
    pub backward: Lstm,
}

impl BiLstm {
    pub fn new(store: &mut ParamStore, prefix: &str, d_in: usize, hidden: usize, rng: &mut SeededRng) -> Result<Self> {
        Ok(BiLstm {
            forward: Lstm::new(store, &format!("{prefix}.forward"), d_in, hidden, rng)?,
            backward: Lstm::new(store, &format!("{prefix}.backward"), d_in, hidden, rng)?,
        })
    }

    /// `[b, t, d]` to the per-step sequence `[b, t, 2h]` and the final
    /// states `[b, 2h]` (last forward step, first backward step).
    pub fn run(&self, x: &Tensor) -> Result<(Tensor, Tensor)> {
        self.run_masked(x, None)
    }

    /// `run` with padded steps skipped: the final forward state is the one
    /// at the last kept step and the backward scan starts there.
    pub fn run_masked(&self, x: &Tensor, keep: Option<&Tensor>) -> Result<(Tensor, Tensor)> {
        let fw = self.forward.forward_masked(x, keep, false)?;
        let bw = self.backward.forward_masked(x, keep, true)?;
        let seq = Tensor::cat(&[Tensor::stack(&fw, 1)?, Tensor::stack(&bw, 1)?], 2)?;
        let last = Tensor::cat(&[fw.last().expect("t > 0"), &bw[0]], 1)?;
        Ok((seq, last))
    }
}

/// Max over the last axis, `[b, c, t]` to `[b, c]`.
pub fn global_max_pool(x: &Tensor) -> Result<Tensor> {
    Ok(x.max(D::Minus1)?)
}

pub fn relu(x: &Tensor) -> Result<Tensor> {
    Ok(x.relu()?)
}

pub fn gelu(x: &Tensor) -> Result<Tensor> {
    Ok(x.gelu_erf()?)
}

/// Row-wise softmax probabilities as plain vectors.
pub fn softmax_rows(logits: &Tensor) -> Result<Vec<Vec<f64>>> {
    let p = candle_nn::ops::softmax(&logits.to_dtype(DType::F64)?, D::Minus1)?;
    Ok(p.to_vec2::<f64>()?)
}
