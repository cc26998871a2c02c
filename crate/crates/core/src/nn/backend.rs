use alloc::vec;
use alloc::vec::Vec;

use super::kernels;
use super::params::{ParamId, ParamStore};
use crate::error::{check_len, Error, Result};
use crate::training::loss::{focal_term, FocalWeights};

/// The handful of operations the classifier is built from.
///
/// Implemented by [`Infer`] (plain values, no bookkeeping) and by
/// [`super::Tape`] (records every operation so gradients can be replayed).
/// Writing the network once against this trait keeps the two paths identical.
pub trait Backend {
    type Value: Clone;

    fn params(&self) -> &ParamStore;

    fn constant(&mut self, data: Vec<f64>) -> Self::Value;

    fn data<'a>(&'a self, v: &'a Self::Value) -> &'a [f64];

    /// `W x + b`.
    fn affine(&mut self, w: ParamId, b: Option<ParamId>, x: &Self::Value) -> Result<Self::Value>;

    fn add(&mut self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value>;

    fn mul(&mut self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value>;

    fn relu(&mut self, a: &Self::Value) -> Self::Value;

    fn sigmoid(&mut self, a: &Self::Value) -> Self::Value;

    fn tanh(&mut self, a: &Self::Value) -> Self::Value;

    fn concat(&mut self, parts: &[Self::Value]) -> Self::Value;

    /// Reshapes `h` row-major into `rows x (len/rows)` and multiplies by `x`.
    fn bilinear(&mut self, h: &Self::Value, x: &Self::Value, rows: usize) -> Result<Self::Value>;

    /// Element-wise maximum over equally sized vectors.
    fn col_max(&mut self, parts: &[Self::Value]) -> Result<Self::Value>;

    /// Element-wise product with a constant mask (dropout).
    fn mask(&mut self, x: &Self::Value, mask: Vec<f64>) -> Result<Self::Value>;

    /// Focal-weighted binary cross-entropy of a two-way logit vector.
    fn focal(&mut self, logits: &Self::Value, positive: bool, weights: FocalWeights) -> Result<Self::Value>;

    /// `sum_k w_k * s_k` over scalar values.
    fn weighted_sum(&mut self, terms: &[(Self::Value, f64)]) -> Result<Self::Value>;
}

pub(crate) fn affine_forward(
    params: &ParamStore,
    w: ParamId,
    b: Option<ParamId>,
    x: &[f64],
) -> Result<Vec<f64>> {
    let wt = params.get(w);
    let (rows, cols) = wt.dims2();
    check_len("affine input", cols, x.len())?;
    let mut out = vec![0.0; rows];
    kernels::matvec(wt.data(), rows, cols, x, &mut out);
    if let Some(b) = b {
        let bt = params.get(b);
        check_len("affine bias", rows, bt.len())?;
        for (o, bv) in out.iter_mut().zip(bt.data()) {
            *o += bv;
        }
    }
    Ok(out)
}

pub(crate) fn bilinear_forward(h: &[f64], x: &[f64], rows: usize) -> Result<Vec<f64>> {
    if rows == 0 || h.len() % rows != 0 {
        return Err(Error::dim("bilinear memory rows", rows, h.len()));
    }
    let cols = h.len() / rows;
    check_len("bilinear input", cols, x.len())?;
    let mut out = vec![0.0; rows];
    kernels::matvec(h, rows, cols, x, &mut out);
    Ok(out)
}

pub(crate) fn col_max_forward(parts: &[&[f64]]) -> Result<(Vec<f64>, Vec<usize>)> {
    let first = parts
        .first()
        .ok_or(Error::Usage("col_max over an empty set".into()))?;
    let mut out = first.to_vec();
    let mut arg = vec![0; out.len()];
    for (k, p) in parts.iter().enumerate().skip(1) {
        check_len("col_max input", out.len(), p.len())?;
        for (j, &v) in p.iter().enumerate() {
            if v > out[j] {
                out[j] = v;
                arg[j] = k;
            }
        }
    }
    Ok((out, arg))
}

fn zip_with(a: &[f64], b: &[f64], ctx: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Vec<f64>> {
    check_len(ctx, a.len(), b.len())?;
    Ok(a.iter().zip(b).map(|(x, y)| f(*x, *y)).collect())
}

/// Backend that only computes values.
#[derive(Debug, Clone, Copy)]
pub struct Infer<'p> {
    params: &'p ParamStore,
}

impl<'p> Infer<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Self { params }
    }
}

impl Backend for Infer<'_> {
    type Value = Vec<f64>;

    fn params(&self) -> &ParamStore {
        self.params
    }

    fn constant(&mut self, data: Vec<f64>) -> Vec<f64> {
        data
    }

    fn data<'a>(&'a self, v: &'a Vec<f64>) -> &'a [f64] {
        v
    }

    fn affine(&mut self, w: ParamId, b: Option<ParamId>, x: &Vec<f64>) -> Result<Vec<f64>> {
        affine_forward(self.params, w, b, x)
    }

    fn add(&mut self, a: &Vec<f64>, b: &Vec<f64>) -> Result<Vec<f64>> {
        zip_with(a, b, "add", |x, y| x + y)
    }

    fn mul(&mut self, a: &Vec<f64>, b: &Vec<f64>) -> Result<Vec<f64>> {
        zip_with(a, b, "mul", |x, y| x * y)
    }

    fn relu(&mut self, a: &Vec<f64>) -> Vec<f64> {
        a.iter().map(|&v| kernels::relu(v)).collect()
    }

    fn sigmoid(&mut self, a: &Vec<f64>) -> Vec<f64> {
        a.iter().map(|&v| kernels::sigmoid(v)).collect()
    }

    fn tanh(&mut self, a: &Vec<f64>) -> Vec<f64> {
        a.iter().map(|&v| kernels::tanh(v)).collect()
    }

    fn concat(&mut self, parts: &[Vec<f64>]) -> Vec<f64> {
        parts.concat()
    }

    fn bilinear(&mut self, h: &Vec<f64>, x: &Vec<f64>, rows: usize) -> Result<Vec<f64>> {
        bilinear_forward(h, x, rows)
    }

    fn col_max(&mut self, parts: &[Vec<f64>]) -> Result<Vec<f64>> {
        let views: Vec<&[f64]> = parts.iter().map(Vec::as_slice).collect();
        col_max_forward(&views).map(|(v, _)| v)
    }

    fn mask(&mut self, x: &Vec<f64>, mask: Vec<f64>) -> Result<Vec<f64>> {
        zip_with(x, &mask, "mask", |a, m| a * m)
    }

    fn focal(&mut self, logits: &Vec<f64>, positive: bool, weights: FocalWeights) -> Result<Vec<f64>> {
        check_len("focal logits", 2, logits.len())?;
        let loss = focal_term(kernels::softmax2_positive(logits), positive, weights).0;
        if !loss.is_finite() {
            return Err(Error::NonFinite("focal loss"));
        }
        Ok(vec![loss])
    }

    fn weighted_sum(&mut self, terms: &[(Vec<f64>, f64)]) -> Result<Vec<f64>> {
        let mut total = 0.0;
        for (v, w) in terms {
            check_len("weighted_sum term", 1, v.len())?;
            total += w * v[0];
        }
        Ok(vec![total])
    }
}
