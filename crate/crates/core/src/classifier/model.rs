use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{HeadMode, ModelConfig};
use crate::error::{check_len, Error, Result};
use crate::nn::{kernels, Activation, Backend, Dense, Infer, LstmCell, LstmState, ParamStore};

/// Appearance LSTM state of one track; `h` reshapes to `rows x key_dim`.
pub type AppearanceMemory = LstmState<Vec<f64>>;

/// Motion LSTM state of one track.
pub type MotionState = LstmState<Vec<f64>>;

/// How the other-track input is fed at scoring time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    #[default]
    Full,
    /// Other-track match forced to zero; weights unchanged.
    Ablated,
}

/// A track as seen by the scorer.
#[derive(Debug, Clone, Copy)]
pub struct PairInput<'a> {
    pub memory: &'a AppearanceMemory,
    pub motion: Option<&'a MotionState>,
}

#[derive(Debug, Clone)]
struct MotionBranch {
    input: Dense,
    lstm: LstmCell,
    output: Dense,
}

#[derive(Debug, Clone)]
enum Head {
    Appearance {
        out: Dense,
    },
    Joint {
        app: [Dense; 2],
        motion: [Dense; 2],
        fuse: Dense,
        out: Dense,
    },
}

/// Column-wise maximum of the other tracks' match vectors; all zeros when
/// there are no other tracks.
pub fn pool_other_tracks(others: &[&[f64]], rows: usize) -> Result<Vec<f64>> {
    let mut out = vec![0.0; rows];
    for (k, m) in others.iter().enumerate() {
        check_len("pooled match vector", rows, m.len())?;
        if k == 0 {
            out.copy_from_slice(m);
        } else {
            for (o, &v) in out.iter_mut().zip(m.iter()) {
                if v > *o {
                    *o = v;
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Classifier {
    config: ModelConfig,
    params: ParamStore,
    embed: Dense,
    memory: LstmCell,
    motion: Option<MotionBranch>,
    head: Head,
}

impl Classifier {
    /// Builds the network with freshly initialised weights (seeded by
    /// `config.init_seed`).
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
        let mut ps = ParamStore::new();
        let c = &config;
        let embed = Dense::init(&mut ps, "embed", c.embed_dim, c.key_dim, Activation::Relu, &mut rng)?;
        let memory = LstmCell::init(
            &mut ps,
            "memory",
            c.key_dim,
            c.hidden,
            c.lstm_bias,
            c.lstm_gate_variant,
            &mut rng,
        )?;
        let (motion, head) = match c.head {
            HeadMode::AppearanceOnly => {
                let out = Dense::init(&mut ps, "head.out", c.match_len(), 2, Activation::Identity, &mut rng)?;
                (None, Head::Appearance { out })
            }
            HeadMode::Joint => {
                let input = Dense::init(&mut ps, "motion.in", 4, c.motion_hidden, Activation::Relu, &mut rng)?;
                let lstm = LstmCell::init(
                    &mut ps,
                    "motion.lstm",
                    c.motion_hidden,
                    c.motion_hidden,
                    c.lstm_bias,
                    c.lstm_gate_variant,
                    &mut rng,
                )?;
                let output = Dense::init(&mut ps, "motion.out", c.motion_hidden, c.motion_feat, Activation::Relu, &mut rng)?;
                let app = [
                    Dense::init(&mut ps, "head.app1", c.match_len(), c.app_fc, Activation::Relu, &mut rng)?,
                    Dense::init(&mut ps, "head.app2", c.app_fc, c.app_fc, Activation::Relu, &mut rng)?,
                ];
                let mot = [
                    Dense::init(&mut ps, "head.mot1", c.motion_feat, c.motion_feat, Activation::Relu, &mut rng)?,
                    Dense::init(&mut ps, "head.mot2", c.motion_feat, c.motion_feat, Activation::Relu, &mut rng)?,
                ];
                let fuse = Dense::init(
                    &mut ps,
                    "head.fuse",
                    c.app_fc + c.motion_feat,
                    c.joint_hidden,
                    Activation::Relu,
                    &mut rng,
                )?;
                let out = Dense::init(&mut ps, "head.out", c.joint_hidden, 2, Activation::Identity, &mut rng)?;
                (
                    Some(MotionBranch { input, lstm, output }),
                    Head::Joint {
                        app,
                        motion: mot,
                        fuse,
                        out,
                    },
                )
            }
        };
        Ok(Self {
            config,
            params: ps,
            embed,
            memory,
            motion,
            head,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn has_motion(&self) -> bool {
        self.motion.is_some()
    }

    /// Appearance-side width of the joint head (the dropout target).
    pub fn app_feature_len(&self) -> usize {
        self.config.app_fc
    }

    // ---- network pieces, generic over the evaluation backend ----

    pub fn embed<B: Backend>(&self, be: &mut B, raw: &B::Value) -> Result<B::Value> {
        self.embed.forward(be, raw)
    }

    pub fn memory_step<B: Backend>(
        &self,
        be: &mut B,
        mem: &LstmState<B::Value>,
        x: &B::Value,
    ) -> Result<LstmState<B::Value>> {
        self.memory.step(be, x, mem)
    }

    pub fn memory_init<B: Backend>(&self, be: &mut B, x: &B::Value) -> Result<LstmState<B::Value>> {
        let zero = LstmState {
            h: be.constant(vec![0.0; self.config.hidden]),
            c: be.constant(vec![0.0; self.config.hidden]),
        };
        self.memory.step(be, x, &zero)
    }

    /// `relu(H x)` with `H` the memory reshaped to `rows x key_dim`.
    pub fn match_vector<B: Backend>(&self, be: &mut B, h: &B::Value, x: &B::Value) -> Result<B::Value> {
        check_len("memory", self.config.hidden, be.data(h).len())?;
        let m = be.bilinear(h, x, self.config.rows)?;
        Ok(be.relu(&m))
    }

    pub fn pool<B: Backend>(&self, be: &mut B, others: &[B::Value]) -> Result<B::Value> {
        if others.is_empty() {
            Ok(be.constant(vec![0.0; self.config.rows]))
        } else {
            be.col_max(others)
        }
    }

    pub fn motion_step<B: Backend>(
        &self,
        be: &mut B,
        state: &LstmState<B::Value>,
        nbox: &B::Value,
    ) -> Result<(B::Value, LstmState<B::Value>)> {
        let branch = self
            .motion
            .as_ref()
            .ok_or_else(|| Error::Usage("model has no motion branch".into()))?;
        let v = be.data(nbox);
        check_len("motion input", 4, v.len())?;
        if v.iter().any(|c| !(-1.0..=2.0).contains(c)) {
            log::warn!("motion input outside the normalized range: {v:?}");
        }
        let a = branch.input.forward(be, nbox)?;
        let next = branch.lstm.step(be, &a, state)?;
        let feat = branch.output.forward(be, &next.h)?;
        Ok((feat, next))
    }

    pub fn motion_init<B: Backend>(
        &self,
        be: &mut B,
        nbox: &B::Value,
    ) -> Result<(B::Value, LstmState<B::Value>)> {
        let zero = LstmState {
            h: be.constant(vec![0.0; self.config.motion_hidden]),
            c: be.constant(vec![0.0; self.config.motion_hidden]),
        };
        self.motion_step(be, &zero, nbox)
    }

    /// Two-way logits from the match vectors and (joint mode) the motion
    /// feature. `app_mask` multiplies the appearance features just before
    /// fusion and is only meaningful in joint mode.
    pub fn logits<B: Backend>(
        &self,
        be: &mut B,
        m_plus: &B::Value,
        m_minus: Option<&B::Value>,
        motion_feat: Option<&B::Value>,
        app_mask: Option<Vec<f64>>,
    ) -> Result<B::Value> {
        let m_all = if self.config.pooling {
            let m_minus = m_minus.ok_or_else(|| Error::Usage("pooled model needs the other-track input".into()))?;
            be.concat(&[m_plus.clone(), m_minus.clone()])
        } else {
            m_plus.clone()
        };
        match &self.head {
            Head::Appearance { out } => {
                if motion_feat.is_some() {
                    return Err(Error::Usage("appearance-only head given a motion input".into()));
                }
                out.forward(be, &m_all)
            }
            Head::Joint {
                app,
                motion,
                fuse,
                out,
            } => {
                let feat = motion_feat.ok_or_else(|| Error::Usage("joint head needs a motion input".into()))?;
                let a = app[0].forward(be, &m_all)?;
                let mut a = app[1].forward(be, &a)?;
                if let Some(mask) = app_mask {
                    a = be.mask(&a, mask)?;
                }
                let mo = motion[0].forward(be, feat)?;
                let mo = motion[1].forward(be, &mo)?;
                let cat = be.concat(&[a, mo]);
                let z = fuse.forward(be, &cat)?;
                out.forward(be, &z)
            }
        }
    }

    // ---- value-level API ----

    pub fn embed_detection(&self, e: &[f64]) -> Result<Vec<f64>> {
        check_len("embedding", self.config.embed_dim, e.len())?;
        self.embed(&mut Infer::new(&self.params), &e.to_vec())
    }

    pub fn bilinear_match(&self, mem: &AppearanceMemory, x: &[f64]) -> Result<Vec<f64>> {
        self.match_vector(&mut Infer::new(&self.params), &mem.h, &x.to_vec())
    }

    pub fn motion_feature(&self, state: &MotionState, nbox: [f64; 4]) -> Result<(Vec<f64>, MotionState)> {
        self.motion_step(&mut Infer::new(&self.params), state, &nbox.to_vec())
    }

    pub fn update_memory(&self, mem: &AppearanceMemory, x: &[f64]) -> Result<AppearanceMemory> {
        self.memory_step(&mut Infer::new(&self.params), mem, &x.to_vec())
    }

    /// Memory after one step from zero state; in joint mode also the motion
    /// state after one step from zero.
    pub fn init_track_state(&self, x: &[f64], nbox: [f64; 4]) -> Result<(AppearanceMemory, Option<MotionState>)> {
        let mut be = Infer::new(&self.params);
        let mem = self.memory_init(&mut be, &x.to_vec())?;
        let motion = if self.has_motion() {
            Some(self.motion_init(&mut be, &nbox.to_vec())?.1)
        } else {
            None
        };
        Ok((mem, motion))
    }

    /// Match probability of embedded detection `x` for `target`, pooling
    /// over `others`. Memories are not modified.
    pub fn score_pair(
        &self,
        target: &AppearanceMemory,
        others: &[&AppearanceMemory],
        x: &[f64],
        motion: Option<(&MotionState, [f64; 4])>,
        pooling: Pooling,
    ) -> Result<f64> {
        let mut be = Infer::new(&self.params);
        let x = x.to_vec();
        let m_plus = self.match_vector(&mut be, &target.h, &x)?;
        let m_minus = if self.config.pooling {
            let ms = match pooling {
                Pooling::Full => others
                    .iter()
                    .map(|o| self.match_vector(&mut be, &o.h, &x))
                    .collect::<Result<Vec<_>>>()?,
                Pooling::Ablated => Vec::new(),
            };
            Some(self.pool(&mut be, &ms)?)
        } else {
            None
        };
        let feat = self.motion_input(&mut be, motion)?;
        let z = self.logits(&mut be, &m_plus, m_minus.as_ref(), feat.as_ref(), None)?;
        Ok(kernels::softmax2_positive(&z))
    }

    fn motion_input(&self, be: &mut Infer<'_>, motion: Option<(&MotionState, [f64; 4])>) -> Result<Option<Vec<f64>>> {
        match (self.has_motion(), motion) {
            (true, Some((ms, nbox))) => Ok(Some(self.motion_step(be, ms, &nbox.to_vec())?.0)),
            (false, None) => Ok(None),
            (true, None) => Err(Error::Usage("joint model scored without motion input".into())),
            (false, Some(_)) => Err(Error::Usage("appearance-only model given motion input".into())),
        }
    }

    /// Scores every allowed track/detection pair.
    ///
    /// Match vectors are computed once per pair and the other-track pooling
    /// uses the per-column best and second-best values, so the cost is
    /// `O(M N)` rather than `O(M^2 N)`. Disallowed pairs are `None`.
    pub fn score_matrix(
        &self,
        tracks: &[PairInput<'_>],
        xs: &[Vec<f64>],
        nboxes: &[[f64; 4]],
        allowed: impl Fn(usize, usize) -> bool,
        pooling: Pooling,
    ) -> Result<Vec<Vec<Option<f64>>>> {
        check_len("detection boxes", xs.len(), nboxes.len())?;
        let rows = self.config.rows;
        let mut be = Infer::new(&self.params);
        let (m, n) = (tracks.len(), xs.len());
        let mut out = vec![vec![None; n]; m];
        if m == 0 || n == 0 {
            return Ok(out);
        }
        // matches[j][i]
        let mut matches = Vec::with_capacity(n);
        for x in xs {
            let col = tracks
                .iter()
                .map(|t| self.match_vector(&mut be, &t.memory.h, x))
                .collect::<Result<Vec<_>>>()?;
            matches.push(col);
        }
        for (j, col) in matches.iter().enumerate() {
            // best and runner-up per coordinate, ties resolved to the lower index
            let mut best = vec![f64::NEG_INFINITY; rows];
            let mut best_at = vec![usize::MAX; rows];
            let mut second = vec![f64::NEG_INFINITY; rows];
            for (i, mv) in col.iter().enumerate() {
                for r in 0..rows {
                    let v = mv[r];
                    if v > best[r] {
                        second[r] = best[r];
                        best[r] = v;
                        best_at[r] = i;
                    } else if v > second[r] {
                        second[r] = v;
                    }
                }
            }
            for (i, t) in tracks.iter().enumerate() {
                if !allowed(i, j) {
                    continue;
                }
                let m_minus = if !self.config.pooling {
                    None
                } else if pooling == Pooling::Ablated || m == 1 {
                    Some(vec![0.0; rows])
                } else {
                    Some(
                        (0..rows)
                            .map(|r| if best_at[r] == i { second[r] } else { best[r] })
                            .collect(),
                    )
                };
                let motion = t.motion.map(|ms| (ms, nboxes[j]));
                let feat = self.motion_input(&mut be, motion)?;
                let z = self.logits(&mut be, &col[i], m_minus.as_ref(), feat.as_ref(), None)?;
                out[i][j] = Some(kernels::softmax2_positive(&z));
            }
        }
        Ok(out)
    }
}
