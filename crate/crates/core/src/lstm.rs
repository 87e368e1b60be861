//! LSTM cell without peepholes, its exact backward pass, and the learned
//! initial-state head.
//!
//! Each gate sees the concatenation `[h_{t-1}, x_t]` (hidden part first):
//!
//! ```text
//! i = σ(W_i·[h, x] + b_i)    o = σ(W_o·[h, x] + b_o)    f = σ(W_f·[h, x] + b_f)
//! g = tanh(W_g·[h, x] + b_g)
//! c_t = f ⊙ c_{t-1} + i ⊙ g
//! h_t = o ⊙ tanh(c_t)
//! ```

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, sigmoid, Matrix, Vector};
use crate::scalar::Real;

/// Gate weights and biases of one LSTM layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams<T> {
    pub w_i: Matrix<T>,
    pub w_o: Matrix<T>,
    pub w_f: Matrix<T>,
    pub w_g: Matrix<T>,
    pub b_i: Vector<T>,
    pub b_o: Vector<T>,
    pub b_f: Vector<T>,
    pub b_g: Vector<T>,
    pub hidden_size: usize,
    pub input_size: usize,
}

impl<T: Real> LstmParams<T> {
    pub fn zeros(hidden_size: usize, input_size: usize) -> Self {
        let cols = hidden_size + input_size;
        LstmParams {
            w_i: Matrix::zeros(hidden_size, cols),
            w_o: Matrix::zeros(hidden_size, cols),
            w_f: Matrix::zeros(hidden_size, cols),
            w_g: Matrix::zeros(hidden_size, cols),
            b_i: Vector::zeros(hidden_size),
            b_o: Vector::zeros(hidden_size),
            b_f: Vector::zeros(hidden_size),
            b_g: Vector::zeros(hidden_size),
            hidden_size,
            input_size,
        }
    }

    /// Every entry drawn uniformly from `[-scale, scale]`.
    pub fn uniform<R: Rng>(hidden_size: usize, input_size: usize, scale: f64, rng: &mut R) -> Self {
        let mut p = Self::zeros(hidden_size, input_size);
        for (_, t) in p.tensors_mut() {
            for v in t.iter_mut() {
                *v = T::lit(rng.random_range(-scale..=scale));
            }
        }
        p
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_size == 0 {
            return Err(Error::InvalidArgument(
                "hidden_size must be positive".into(),
            ));
        }
        let shape = (self.hidden_size, self.hidden_size + self.input_size);
        for w in [&self.w_i, &self.w_o, &self.w_f, &self.w_g] {
            if w.shape() != shape {
                return Err(Error::dim("lstm gate weight columns", shape.1, w.cols()));
            }
        }
        for b in [&self.b_i, &self.b_o, &self.b_f, &self.b_g] {
            if b.len() != self.hidden_size {
                return Err(Error::dim("lstm gate bias", self.hidden_size, b.len()));
            }
        }
        Ok(())
    }

    pub fn tensors(&self) -> [(&'static str, &[T]); 8] {
        [
            ("lstm.w_i", self.w_i.as_slice()),
            ("lstm.w_o", self.w_o.as_slice()),
            ("lstm.w_f", self.w_f.as_slice()),
            ("lstm.w_g", self.w_g.as_slice()),
            ("lstm.b_i", &self.b_i),
            ("lstm.b_o", &self.b_o),
            ("lstm.b_f", &self.b_f),
            ("lstm.b_g", &self.b_g),
        ]
    }

    pub fn tensors_mut(&mut self) -> [(&'static str, &mut [T]); 8] {
        [
            ("lstm.w_i", self.w_i.as_mut_slice()),
            ("lstm.w_o", self.w_o.as_mut_slice()),
            ("lstm.w_f", self.w_f.as_mut_slice()),
            ("lstm.w_g", self.w_g.as_mut_slice()),
            ("lstm.b_i", &mut self.b_i),
            ("lstm.b_o", &mut self.b_o),
            ("lstm.b_f", &mut self.b_f),
            ("lstm.b_g", &mut self.b_g),
        ]
    }
}

/// Affine map producing `c_0` from the first input frame; `h_0 = tanh(c_0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitParams<T> {
    pub w_init: Matrix<T>,
    pub b_init: Vector<T>,
}

impl<T: Real> InitParams<T> {
    pub fn zeros(hidden_size: usize, input_size: usize) -> Self {
        InitParams {
            w_init: Matrix::zeros(hidden_size, input_size),
            b_init: Vector::zeros(hidden_size),
        }
    }

    pub fn uniform<R: Rng>(hidden_size: usize, input_size: usize, scale: f64, rng: &mut R) -> Self {
        let mut p = Self::zeros(hidden_size, input_size);
        for (_, t) in p.tensors_mut() {
            for v in t.iter_mut() {
                *v = T::lit(rng.random_range(-scale..=scale));
            }
        }
        p
    }

    pub fn tensors(&self) -> [(&'static str, &[T]); 2] {
        [("init.w", self.w_init.as_slice()), ("init.b", &self.b_init)]
    }

    pub fn tensors_mut(&mut self) -> [(&'static str, &mut [T]); 2] {
        [
            ("init.w", self.w_init.as_mut_slice()),
            ("init.b", &mut self.b_init),
        ]
    }
}

/// Values saved by [`lstm_step`] for the backward pass.
#[derive(Debug, Clone)]
pub struct StepCache<T> {
    /// `[h_{t-1}, x_t]`.
    pub hx: Vec<T>,
    pub c_prev: Vec<T>,
    pub i: Vec<T>,
    pub o: Vec<T>,
    pub f: Vec<T>,
    pub g: Vec<T>,
    pub c: Vec<T>,
    pub tanh_c: Vec<T>,
}

impl<T: Real> StepCache<T> {
    pub fn hidden_size(&self) -> usize {
        self.i.len()
    }

    pub fn x(&self) -> &[T] {
        &self.hx[self.hidden_size()..]
    }

    pub fn h_prev(&self) -> &[T] {
        &self.hx[..self.hidden_size()]
    }

    pub fn h(&self) -> Vec<T> {
        self.o
            .iter()
            .zip(&self.tanh_c)
            .map(|(&o, &tc)| o * tc)
            .collect()
    }
}

/// Gradient of a scalar loss with respect to one step's inputs.
#[derive(Debug, Clone)]
pub struct StepInputGrads<T> {
    pub dx: Vec<T>,
    pub dh_prev: Vec<T>,
    pub dc_prev: Vec<T>,
}

fn check_step_dims<T: Real>(p: &LstmParams<T>, x: &[T], h_prev: &[T], c_prev: &[T]) -> Result<()> {
    if x.len() != p.input_size {
        return Err(Error::dim("lstm_step input", p.input_size, x.len()));
    }
    if h_prev.len() != p.hidden_size {
        return Err(Error::dim("lstm_step h_prev", p.hidden_size, h_prev.len()));
    }
    if c_prev.len() != p.hidden_size {
        return Err(Error::dim("lstm_step c_prev", p.hidden_size, c_prev.len()));
    }
    Ok(())
}

/// One forward step. Returns `(h_t, c_t, cache)`.
pub fn lstm_step<T: Real>(
    p: &LstmParams<T>,
    x: &[T],
    h_prev: &[T],
    c_prev: &[T],
) -> Result<(Vec<T>, Vec<T>, StepCache<T>)> {
    check_step_dims(p, x, h_prev, c_prev)?;
    let cache = step_unchecked(p, x, h_prev, c_prev);
    let h = cache.h();
    Ok((h, cache.c.clone(), cache))
}

/// Forward step for callers that already validated shapes.
pub(crate) fn step_unchecked<T: Real>(
    p: &LstmParams<T>,
    x: &[T],
    h_prev: &[T],
    c_prev: &[T],
) -> StepCache<T> {
    let n = p.hidden_size;
    let mut hx = Vec::with_capacity(n + x.len());
    hx.extend_from_slice(h_prev);
    hx.extend_from_slice(x);

    let gate = |w: &Matrix<T>, b: &[T], squash: fn(T) -> T| -> Vec<T> {
        (0..n).map(|r| squash(b[r] + dot(w.row(r), &hx))).collect()
    };
    let i = gate(&p.w_i, &p.b_i, sigmoid);
    let o = gate(&p.w_o, &p.b_o, sigmoid);
    let f = gate(&p.w_f, &p.b_f, sigmoid);
    let g = gate(&p.w_g, &p.b_g, T::tanh);

    let mut c = Vec::with_capacity(n);
    let mut tanh_c = Vec::with_capacity(n);
    for k in 0..n {
        let ck = f[k] * c_prev[k] + i[k] * g[k];
        c.push(ck);
        tanh_c.push(ck.tanh());
    }
    StepCache {
        hx,
        c_prev: c_prev.to_vec(),
        i,
        o,
        f,
        g,
        c,
        tanh_c,
    }
}

/// Backward pass of one step, accumulating parameter gradients into `grads`.
///
/// `dh` and `dc` are the total upstream gradients arriving at `h_t` and `c_t`.
pub fn lstm_step_backward_into<T: Real>(
    p: &LstmParams<T>,
    cache: &StepCache<T>,
    dh: &[T],
    dc: &[T],
    grads: &mut LstmParams<T>,
) -> Result<StepInputGrads<T>> {
    let n = p.hidden_size;
    if cache.hidden_size() != n || cache.hx.len() != n + p.input_size {
        return Err(Error::dim(
            "lstm backward cache",
            n + p.input_size,
            cache.hx.len(),
        ));
    }
    if dh.len() != n || dc.len() != n {
        return Err(Error::dim(
            "lstm backward upstream",
            n,
            dh.len().min(dc.len()),
        ));
    }
    if grads.hidden_size != n || grads.input_size != p.input_size {
        return Err(Error::dim(
            "lstm backward gradient buffer",
            n,
            grads.hidden_size,
        ));
    }
    Ok(backward_unchecked(p, cache, dh, dc, grads))
}

pub(crate) fn backward_unchecked<T: Real>(
    p: &LstmParams<T>,
    cache: &StepCache<T>,
    dh: &[T],
    dc: &[T],
    grads: &mut LstmParams<T>,
) -> StepInputGrads<T> {
    let n = p.hidden_size;
    let one = T::one();
    let mut da_i = vec![T::zero(); n];
    let mut da_o = vec![T::zero(); n];
    let mut da_f = vec![T::zero(); n];
    let mut da_g = vec![T::zero(); n];
    let mut dc_prev = vec![T::zero(); n];
    for k in 0..n {
        let (i, o, f, g, tc) = (
            cache.i[k],
            cache.o[k],
            cache.f[k],
            cache.g[k],
            cache.tanh_c[k],
        );
        let d_o = dh[k] * tc;
        let dct = dc[k] + dh[k] * o * (one - tc * tc);
        da_i[k] = dct * g * i * (one - i);
        da_o[k] = d_o * o * (one - o);
        da_f[k] = dct * cache.c_prev[k] * f * (one - f);
        da_g[k] = dct * i * (one - g * g);
        dc_prev[k] = dct * f;
    }

    let mut dhx = vec![T::zero(); cache.hx.len()];
    for (w, dw, db, da) in [
        (&p.w_i, &mut grads.w_i, &mut grads.b_i, &da_i),
        (&p.w_o, &mut grads.w_o, &mut grads.b_o, &da_o),
        (&p.w_f, &mut grads.w_f, &mut grads.b_f, &da_f),
        (&p.w_g, &mut grads.w_g, &mut grads.b_g, &da_g),
    ] {
        dw.outer_acc(da, &cache.hx);
        for (b, &d) in db.iter_mut().zip(da.iter()) {
            *b += d;
        }
        w.matvec_t_acc(da, &mut dhx);
    }
    let dx = dhx.split_off(n);
    StepInputGrads {
        dx,
        dh_prev: dhx,
        dc_prev,
    }
}

/// Backward pass of one step with freshly allocated parameter gradients.
pub fn lstm_step_backward<T: Real>(
    p: &LstmParams<T>,
    cache: &StepCache<T>,
    dh: &[T],
    dc: &[T],
) -> Result<(LstmParams<T>, StepInputGrads<T>)> {
    let mut grads = LstmParams::zeros(p.hidden_size, p.input_size);
    let inputs = lstm_step_backward_into(p, cache, dh, dc, &mut grads)?;
    Ok((grads, inputs))
}

/// `c_0 = W·x_1 + b`, `h_0 = tanh(c_0)`.
pub fn init_state<T: Real>(ip: &InitParams<T>, x1: &[T]) -> Result<(Vec<T>, Vec<T>)> {
    if x1.len() != ip.w_init.cols() {
        return Err(Error::dim("init_state input", ip.w_init.cols(), x1.len()));
    }
    if ip.b_init.len() != ip.w_init.rows() {
        return Err(Error::dim(
            "init_state bias",
            ip.w_init.rows(),
            ip.b_init.len(),
        ));
    }
    Ok(init_unchecked(ip, x1))
}

pub(crate) fn init_unchecked<T: Real>(ip: &InitParams<T>, x1: &[T]) -> (Vec<T>, Vec<T>) {
    let mut c0 = ip.b_init.0.clone();
    ip.w_init.matvec_acc(x1, &mut c0);
    let h0 = c0.iter().map(|v| v.tanh()).collect();
    (h0, c0)
}

/// Backward through the init head; returns the gradient with respect to `x_1`.
pub fn init_state_backward<T: Real>(
    ip: &InitParams<T>,
    x1: &[T],
    h0: &[T],
    dh0: &[T],
    dc0: &[T],
    grads: &mut InitParams<T>,
) -> Vec<T> {
    let dc: Vec<T> = (0..h0.len())
        .map(|k| dc0[k] + dh0[k] * (T::one() - h0[k] * h0[k]))
        .collect();
    grads.w_init.outer_acc(&dc, x1);
    for (b, &d) in grads.b_init.iter_mut().zip(&dc) {
        *b += d;
    }
    let mut dx = vec![T::zero(); x1.len()];
    ip.w_init.matvec_t_acc(&dc, &mut dx);
    dx
}

/// Plain tanh recurrent cell, `h_t = tanh(W·[h_{t-1}, x_t] + b)`.
///
/// Kept as a baseline; none of the task networks use it.
#[derive(Debug, Clone, PartialEq)]
pub struct RnnParams<T> {
    pub w: Matrix<T>,
    pub b: Vector<T>,
}

pub fn rnn_step<T: Real>(p: &RnnParams<T>, x: &[T], h_prev: &[T]) -> Result<Vec<T>> {
    let n = p.w.rows();
    if h_prev.len() != n {
        return Err(Error::dim("rnn_step h_prev", n, h_prev.len()));
    }
    if h_prev.len() + x.len() != p.w.cols() {
        return Err(Error::dim("rnn_step input", p.w.cols() - n, x.len()));
    }
    let hx: Vec<T> = h_prev.iter().chain(x).copied().collect();
    let a = crate::linalg::affine(&p.w, &p.b, &hx)?;
    Ok(a.iter().map(|v| v.tanh()).collect())
}
