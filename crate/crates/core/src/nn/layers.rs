use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::backend::Backend;
use super::params::{ParamId, ParamStore};
use crate::error::{check_len, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
}

/// Fully connected layer `activation(W x + b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dense {
    pub w: ParamId,
    pub b: ParamId,
    pub activation: Activation,
    pub input: usize,
    pub output: usize,
}

impl Dense {
    pub fn init<R: Rng + ?Sized>(
        params: &mut ParamStore,
        name: &str,
        input: usize,
        output: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let w = params.add_uniform(&alloc::format!("{name}.w"), &[output, input], input, rng)?;
        let b = params.add_const(&alloc::format!("{name}.b"), &[output], 0.0)?;
        Ok(Self {
            w,
            b,
            activation,
            input,
            output,
        })
    }

    pub fn forward<B: Backend>(&self, be: &mut B, x: &B::Value) -> Result<B::Value> {
        check_len("dense input", self.input, be.data(x).len())?;
        let z = be.affine(self.w, Some(self.b), x)?;
        Ok(match self.activation {
            Activation::Relu => be.relu(&z),
            Activation::Identity => z,
        })
    }
}

/// Which nonlinearities the candidate and output gates use.
///
/// `Standard` is the usual LSTM (`g = tanh`, `o = sigmoid`). `Swapped` uses
/// `g = sigmoid`, `o = tanh`, kept for comparison runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateVariant {
    #[default]
    Standard,
    #[serde(alias = "paper")]
    Swapped,
}

/// Hidden and cell vectors of an LSTM.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState<V> {
    pub h: V,
    pub c: V,
}

impl LstmState<Vec<f64>> {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.h.iter().chain(&self.c).all(|v| v.is_finite())
    }

    pub fn len(&self) -> usize {
        self.h.len() + self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }
}

/// LSTM cell with one weight matrix per gate acting on `[h_prev; x]`.
///
/// Gate order in `w` and `b` is forget, input, candidate, output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LstmCell {
    pub w: [ParamId; 4],
    pub b: Option<[ParamId; 4]>,
    pub hidden: usize,
    pub input: usize,
    pub variant: GateVariant,
}

impl LstmCell {
    /// Weights uniform in `[-s, s]`, `s = 1/sqrt(hidden + input)`; when
    /// biases are enabled the forget bias starts at 1 and the rest at 0.
    pub fn init<R: Rng + ?Sized>(
        params: &mut ParamStore,
        name: &str,
        input: usize,
        hidden: usize,
        bias: bool,
        variant: GateVariant,
        rng: &mut R,
    ) -> Result<Self> {
        let fan_in = hidden + input;
        let mut w = [ParamId(0); 4];
        for (slot, gate) in w.iter_mut().zip(["f", "i", "g", "o"]) {
            *slot = params.add_uniform(&alloc::format!("{name}.w_{gate}"), &[hidden, fan_in], fan_in, rng)?;
        }
        let b = if bias {
            let mut b = [ParamId(0); 4];
            for (slot, gate) in b.iter_mut().zip(["f", "i", "g", "o"]) {
                let init = if gate == "f" { 1.0 } else { 0.0 };
                *slot = params.add_const(&alloc::format!("{name}.b_{gate}"), &[hidden], init)?;
            }
            Some(b)
        } else {
            None
        };
        Ok(Self {
            w,
            b,
            hidden,
            input,
            variant,
        })
    }

    /// One step: `c = f*c_prev + i*g`, `h = o*tanh(c)`.
    pub fn step<B: Backend>(
        &self,
        be: &mut B,
        x: &B::Value,
        state: &LstmState<B::Value>,
    ) -> Result<LstmState<B::Value>> {
        check_len("lstm input", self.input, be.data(x).len())?;
        check_len("lstm hidden", self.hidden, be.data(&state.h).len())?;
        check_len("lstm cell", self.hidden, be.data(&state.c).len())?;
        let hx = be.concat(&[state.h.clone(), x.clone()]);
        let pre = |be: &mut B, k: usize| be.affine(self.w[k], self.b.map(|b| b[k]), &hx);
        let f = pre(be, 0)?;
        let f = be.sigmoid(&f);
        let i = pre(be, 1)?;
        let i = be.sigmoid(&i);
        let g = pre(be, 2)?;
        let o = pre(be, 3)?;
        let (g, o) = match self.variant {
            GateVariant::Standard => (be.tanh(&g), be.sigmoid(&o)),
            GateVariant::Swapped => (be.sigmoid(&g), be.tanh(&o)),
        };
        let fc = be.mul(&f, &state.c)?;
        let ig = be.mul(&i, &g)?;
        let c = be.add(&fc, &ig)?;
        let tc = be.tanh(&c);
        let h = be.mul(&o, &tc)?;
        Ok(LstmState { h, c })
    }
}
