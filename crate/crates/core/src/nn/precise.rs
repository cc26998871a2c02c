//! Double-double evaluation backend.
//!
//! Carries every value as an unevaluated sum `hi + lo` of two `f64`s, which
//! gives about 32 significant digits. It exists to serve as the reference in
//! finite-difference checks: with plain `f64`, the rounding noise in `f(p ± eps)`
//! is a few units in the last place of the loss, which swamps coordinates
//! whose true derivative is below `1e-7` or so.

use alloc::vec;
use alloc::vec::Vec;

use super::backend::Backend;
use super::params::{ParamId, ParamStore};
use crate::error::{check_len, Error, Result};
use crate::training::loss::{FocalWeights, PROB_CLAMP};

/// A double-double number.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

const LN2: Dd = Dd {
    hi: core::f64::consts::LN_2,
    lo: 2.319_046_813_846_299_6e-17,
};

fn two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    let bb = s - a;
    Dd {
        hi: s,
        lo: (a - (s - bb)) + (b - bb),
    }
}

fn quick_two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    Dd { hi: s, lo: b - (s - a) }
}

fn two_prod(a: f64, b: f64) -> Dd {
    let p = a * b;
    Dd {
        hi: p,
        lo: libm::fma(a, b, -p),
    }
}

impl From<f64> for Dd {
    fn from(hi: f64) -> Self {
        Dd { hi, lo: 0.0 }
    }
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn add(self, b: Dd) -> Dd {
        let s = two_sum(self.hi, b.hi);
        let t = two_sum(self.lo, b.lo);
        let s = quick_two_sum(s.hi, s.lo + t.hi);
        quick_two_sum(s.hi, s.lo + t.lo)
    }

    pub fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    pub fn sub(self, b: Dd) -> Dd {
        self.add(b.neg())
    }

    pub fn mul(self, b: Dd) -> Dd {
        let p = two_prod(self.hi, b.hi);
        quick_two_sum(p.hi, p.lo + (self.hi * b.lo + self.lo * b.hi))
    }

    pub fn mul_f64(self, b: f64) -> Dd {
        let p = two_prod(self.hi, b);
        quick_two_sum(p.hi, p.lo + self.lo * b)
    }

    pub fn div(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        let r = self.sub(b.mul_f64(q1));
        let q2 = r.hi / b.hi;
        let r = r.sub(b.mul_f64(q2));
        let q3 = r.hi / b.hi;
        quick_two_sum(q1, q2).add(Dd::from(q3))
    }

    fn div_f64(self, b: f64) -> Dd {
        let q1 = self.hi / b;
        let r = self.sub(two_prod(q1, b));
        let q2 = r.hi / b;
        let r = r.sub(two_prod(q2, b));
        quick_two_sum(q1, q2).add(Dd::from(r.hi / b))
    }

    fn ldexp(self, k: i32) -> Dd {
        Dd {
            hi: libm::scalbn(self.hi, k),
            lo: libm::scalbn(self.lo, k),
        }
    }

    pub fn exp(self) -> Dd {
        if self.hi > 709.0 {
            return Dd::from(f64::INFINITY);
        }
        if self.hi < -745.0 {
            return Dd::ZERO;
        }
        // x = k ln2 + r, then exp(r) = (exp(r / 2^9))^(2^9)
        let k = libm::round(self.hi / LN2.hi);
        let r = self.sub(LN2.mul_f64(k)).ldexp(-9);
        // expm1 by Taylor series; |r| < 7e-4 so 10 terms reach 1e-35
        let mut term = r;
        let mut sum = r;
        for n in 2..=10 {
            term = term.mul(r).div_f64(n as f64);
            sum = sum.add(term);
        }
        // (1 + s)^2 - 1 = 2 s + s^2
        for _ in 0..9 {
            sum = sum.mul_f64(2.0).add(sum.mul(sum));
        }
        sum.add(Dd::ONE).ldexp(k as i32)
    }

    /// Natural log of a positive value; one Newton step on `exp`.
    pub fn ln(self) -> Dd {
        let y = Dd::from(libm::log(self.hi));
        y.add(self.mul(y.neg().exp())).sub(Dd::ONE)
    }

    pub fn sigmoid(self) -> Dd {
        if self.hi >= 0.0 {
            Dd::ONE.div(Dd::ONE.add(self.neg().exp()))
        } else {
            let e = self.exp();
            e.div(Dd::ONE.add(e))
        }
    }

    pub fn tanh(self) -> Dd {
        if self.hi > 40.0 {
            return Dd::ONE;
        }
        if self.hi < -40.0 {
            return Dd::ONE.neg();
        }
        let e = self.mul_f64(2.0).exp();
        e.sub(Dd::ONE).div(e.add(Dd::ONE))
    }
}

/// A vector in double-double precision together with its rounded value.
#[derive(Debug, Clone, PartialEq)]
pub struct PreciseValue {
    rounded: Vec<f64>,
    exact: Vec<Dd>,
}

impl PreciseValue {
    fn new(exact: Vec<Dd>) -> Self {
        Self {
            rounded: exact.iter().map(|d| d.to_f64()).collect(),
            exact,
        }
    }

    pub fn exact(&self) -> &[Dd] {
        &self.exact
    }
}

/// Double-double backend; keeps the same branch signature as the tape.
#[derive(Debug)]
pub struct Precise<'p> {
    params: &'p ParamStore,
    signature: u64,
}

const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

impl<'p> Precise<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Self {
            params,
            signature: 0xcbf2_9ce4_8422_2325,
        }
    }

    pub fn signature(&self) -> u64 {
        self.signature
    }

    fn mix(&mut self, v: u64) {
        self.signature = (self.signature ^ v).wrapping_mul(FNV_PRIME);
    }
}

/// Compensated dot product: error-free products and sums on the high parts,
/// with every rounding error gathered in a second accumulator.
fn dot(w: &[f64], x: &[Dd]) -> Dd {
    let (mut s, mut c) = (0.0, 0.0);
    for (w, x) in w.iter().zip(x) {
        let p = two_prod(x.hi, *w);
        let t = two_sum(s, p.hi);
        s = t.hi;
        c += p.lo + t.lo + x.lo * w;
    }
    quick_two_sum(s, c)
}

fn zip(a: &PreciseValue, b: &PreciseValue, ctx: &'static str, f: impl Fn(Dd, Dd) -> Dd) -> Result<PreciseValue> {
    check_len(ctx, a.exact.len(), b.exact.len())?;
    Ok(PreciseValue::new(a.exact.iter().zip(&b.exact).map(|(x, y)| f(*x, *y)).collect()))
}

fn map(a: &PreciseValue, f: impl Fn(Dd) -> Dd) -> PreciseValue {
    PreciseValue::new(a.exact.iter().map(|x| f(*x)).collect())
}

impl Backend for Precise<'_> {
    type Value = PreciseValue;

    fn params(&self) -> &ParamStore {
        self.params
    }

    fn constant(&mut self, data: Vec<f64>) -> PreciseValue {
        PreciseValue::new(data.into_iter().map(Dd::from).collect())
    }

    fn data<'a>(&'a self, v: &'a PreciseValue) -> &'a [f64] {
        &v.rounded
    }

    fn affine(&mut self, w: ParamId, b: Option<ParamId>, x: &PreciseValue) -> Result<PreciseValue> {
        let wt = self.params.get(w);
        let (rows, cols) = wt.dims2();
        check_len("affine input", cols, x.exact.len())?;
        let mut out: Vec<Dd> = (0..rows).map(|r| dot(&wt.data()[r * cols..(r + 1) * cols], &x.exact)).collect();
        if let Some(b) = b {
            let bt = self.params.get(b);
            check_len("affine bias", rows, bt.len())?;
            for (o, bv) in out.iter_mut().zip(bt.data()) {
                *o = o.add(Dd::from(*bv));
            }
        }
        Ok(PreciseValue::new(out))
    }

    fn add(&mut self, a: &PreciseValue, b: &PreciseValue) -> Result<PreciseValue> {
        zip(a, b, "add", Dd::add)
    }

    fn mul(&mut self, a: &PreciseValue, b: &PreciseValue) -> Result<PreciseValue> {
        zip(a, b, "mul", Dd::mul)
    }

    fn relu(&mut self, a: &PreciseValue) -> PreciseValue {
        for x in &a.exact {
            self.mix(u64::from(x.hi > 0.0));
        }
        map(a, |x| if x.hi > 0.0 { x } else { Dd::ZERO })
    }

    fn sigmoid(&mut self, a: &PreciseValue) -> PreciseValue {
        map(a, Dd::sigmoid)
    }

    fn tanh(&mut self, a: &PreciseValue) -> PreciseValue {
        map(a, Dd::tanh)
    }

    fn concat(&mut self, parts: &[PreciseValue]) -> PreciseValue {
        PreciseValue::new(parts.iter().flat_map(|p| p.exact.iter().copied()).collect())
    }

    fn bilinear(&mut self, h: &PreciseValue, x: &PreciseValue, rows: usize) -> Result<PreciseValue> {
        if rows == 0 || h.exact.len() % rows != 0 {
            return Err(Error::dim("bilinear memory rows", rows, h.exact.len()));
        }
        let cols = h.exact.len() / rows;
        check_len("bilinear input", cols, x.exact.len())?;
        let out = (0..rows)
            .map(|r| {
                h.exact[r * cols..(r + 1) * cols]
                    .iter()
                    .zip(&x.exact)
                    .fold(Dd::ZERO, |acc, (a, b)| acc.add(a.mul(*b)))
            })
            .collect();
        Ok(PreciseValue::new(out))
    }

    fn col_max(&mut self, parts: &[PreciseValue]) -> Result<PreciseValue> {
        let first = parts.first().ok_or(Error::Usage("col_max over an empty set".into()))?;
        let mut out = first.exact.clone();
        let mut arg = vec![0usize; out.len()];
        for (k, p) in parts.iter().enumerate().skip(1) {
            check_len("col_max input", out.len(), p.exact.len())?;
            for (j, v) in p.exact.iter().enumerate() {
                if v.sub(out[j]).hi > 0.0 {
                    out[j] = *v;
                    arg[j] = k;
                }
            }
        }
        for k in arg {
            self.mix(k as u64);
        }
        Ok(PreciseValue::new(out))
    }

    fn mask(&mut self, x: &PreciseValue, mask: Vec<f64>) -> Result<PreciseValue> {
        check_len("mask", x.exact.len(), mask.len())?;
        Ok(PreciseValue::new(x.exact.iter().zip(&mask).map(|(a, m)| a.mul_f64(*m)).collect()))
    }

    fn focal(&mut self, logits: &PreciseValue, positive: bool, w: FocalWeights) -> Result<PreciseValue> {
        check_len("focal logits", 2, logits.exact.len())?;
        let p = logits.exact[1].sub(logits.exact[0]).sigmoid();
        let q = Dd::ONE.sub(p);
        let (beta, weight_base, log_arg) = if positive { (w.beta_pos, q, p) } else { (w.beta_neg, p, q) };
        let clamped = log_arg.hi < PROB_CLAMP;
        self.mix(u64::from(clamped));
        let log_arg = if clamped { Dd::from(PROB_CLAMP) } else { log_arg };
        let loss = weight_base.mul(weight_base).mul(log_arg.ln().neg()).mul_f64(beta);
        if !loss.hi.is_finite() {
            return Err(Error::NonFinite("focal loss"));
        }
        Ok(PreciseValue::new(vec![loss]))
    }

    fn weighted_sum(&mut self, terms: &[(PreciseValue, f64)]) -> Result<PreciseValue> {
        let mut total = Dd::ZERO;
        for (v, w) in terms {
            check_len("weighted_sum term", 1, v.exact.len())?;
            total = total.add(v.exact[0].mul_f64(*w));
        }
        Ok(PreciseValue::new(vec![total]))
    }
}
