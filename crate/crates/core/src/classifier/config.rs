use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::GateVariant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadMode {
    /// `FC(match -> 2)` on the concatenated match vectors.
    AppearanceOnly,
    /// Appearance and motion branches fused by two more FC layers.
    #[default]
    Joint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    #[default]
    Desk,
    Paper,
}

/// Layer sizes and switches of the classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// Length of the raw appearance embedding.
    pub embed_dim: usize,
    /// Width of the embedded detection feature.
    pub key_dim: usize,
    /// Number of template rows the memory is reshaped into.
    pub rows: usize,
    /// LSTM width; must equal `rows * key_dim`.
    pub hidden: usize,
    pub motion_hidden: usize,
    pub motion_feat: usize,
    /// Width of the two FC-relu layers on the appearance side of the joint head.
    pub app_fc: usize,
    pub joint_hidden: usize,
    pub head: HeadMode,
    /// Whether the architecture has the pooled other-track input at all.
    pub pooling: bool,
    pub lstm_gate_variant: GateVariant,
    pub lstm_bias: bool,
    pub init_seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::profile(Profile::Desk)
    }
}

impl ModelConfig {
    pub fn profile(profile: Profile) -> Self {
        let (embed_dim, key_dim, motion_hidden) = match profile {
            Profile::Desk => (32, 16, 16),
            Profile::Paper => (2048, 256, 64),
        };
        let rows = 8;
        Self {
            embed_dim,
            key_dim,
            rows,
            hidden: rows * key_dim,
            motion_hidden,
            motion_feat: 8,
            app_fc: 16,
            joint_hidden: 24,
            head: HeadMode::Joint,
            pooling: true,
            lstm_gate_variant: GateVariant::Standard,
            lstm_bias: true,
            init_seed: 0,
        }
    }

    /// Length of the match vector fed to the head (`2 rows` with pooling).
    pub fn match_len(&self) -> usize {
        if self.pooling {
            2 * self.rows
        } else {
            self.rows
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("model.embed_dim", self.embed_dim),
            ("model.key_dim", self.key_dim),
            ("model.rows", self.rows),
            ("model.hidden", self.hidden),
            ("model.motion_hidden", self.motion_hidden),
            ("model.motion_feat", self.motion_feat),
            ("model.app_fc", self.app_fc),
            ("model.joint_hidden", self.joint_hidden),
        ];
        for (key, v) in dims {
            if v == 0 {
                return Err(Error::config(key, "must be at least 1"));
            }
        }
        if self.hidden != self.rows * self.key_dim {
            return Err(Error::config(
                "model.hidden",
                alloc::format!(
                    "must equal rows * key_dim = {} * {} = {}, got {}",
                    self.rows,
                    self.key_dim,
                    self.rows * self.key_dim,
                    self.hidden
                ),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profiles_satisfy_invariants() {
        for p in [Profile::Desk, Profile::Paper] {
            let c = ModelConfig::profile(p);
            c.validate().unwrap();
            assert_eq!(c.hidden, c.rows * c.key_dim);
        }
        let paper = ModelConfig::profile(Profile::Paper);
        assert_eq!((paper.embed_dim, paper.key_dim, paper.rows, paper.hidden), (2048, 256, 8, 2048));
        assert_eq!((paper.motion_hidden, paper.motion_feat, paper.joint_hidden), (64, 8, 24));
        assert_eq!(paper.match_len(), 16);
    }

    #[test]
    fn hidden_mismatch_names_key() {
        let c = ModelConfig {
            rows: 8,
            key_dim: 16,
            hidden: 100,
            ..ModelConfig::default()
        };
        match c.validate() {
            Err(Error::Config { key, .. }) => assert_eq!(key, "model.hidden"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
