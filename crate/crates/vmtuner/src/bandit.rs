//! Disjoint-arm LinUCB.
//!
//! Each of the nine arms keeps an independent ridge-regression state: the
//! regularized Gram matrix `A = lambda I + sum x x'` and reward-weighted
//! feature sum `b = sum r x`. Scoring an arm solves `theta = A^-1 b` and
//! adds the optimism width `alpha * sqrt(x' A^-1 x)`. The inverse is cached
//! and maintained by rank-one (Sherman-Morrison) updates, with a dense
//! re-inversion every [`REINVERT_EVERY`] updates to wash out float drift.
//!
//! The full model state serializes to a versioned JSON checkpoint so a
//! model pre-trained in the simulator can warm-start a later run. Loading
//! restores the matrices bit-identically: `load(save(m))` predicts exactly
//! like `m`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{dot, Mat};
use crate::model::Action;

pub const NUM_ARMS: usize = Action::COUNT;

/// Dense re-inversion cadence per arm.
const REINVERT_EVERY: u64 = 256;

/// Current checkpoint schema tag.
pub const CHECKPOINT_FORMAT: &str = "linucb-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum BanditError {
    #[error("context dimension {got} does not match model dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("reward {0} outside [0, 1]")]
    RewardOutOfRange(f64),
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error("checkpoint rejected: {0}")]
    CheckpointMismatch(String),
    #[error("malformed checkpoint: {0}")]
    MalformedCheckpoint(String),
}

/// Per-arm ridge state.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmModel {
    a: Mat,
    b: Vec<f64>,
    a_inv: Mat,
    n_updates: u64,
}

impl ArmModel {
    fn new(d: usize, lambda: f64) -> Self {
        Self {
            a: Mat::scaled_identity(d, lambda),
            b: vec![0.0; d],
            a_inv: Mat::scaled_identity(d, 1.0 / lambda),
            n_updates: 0,
        }
    }

    pub fn n_updates(&self) -> u64 {
        self.n_updates
    }

    pub fn gram(&self) -> &Mat {
        &self.a
    }

    pub fn gram_inverse(&self) -> &Mat {
        &self.a_inv
    }

    pub fn response(&self) -> &[f64] {
        &self.b
    }

    fn score(&self, x: &[f64], alpha: f64) -> ArmScore {
        let theta = self.a_inv.matvec(&self.b);
        let estimate = dot(&theta, x);
        let width = alpha * self.a_inv.quad_form(x).max(0.0).sqrt();
        ArmScore {
            estimate,
            width,
            score: estimate + width,
        }
    }

    fn learn(&mut self, x: &[f64], reward: f64) {
        self.a.add_outer(x);
        for (bi, xi) in self.b.iter_mut().zip(x) {
            *bi += reward * xi;
        }
        self.n_updates += 1;
        if self.n_updates % REINVERT_EVERY == 0 {
            self.a_inv = self
                .a
                .inverse()
                .expect("regularized Gram matrix is positive definite");
        } else {
            self.a_inv.sherman_morrison_update(x);
        }
    }
}

/// UCB decomposition for one arm at one context.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmScore {
    /// theta' x
    pub estimate: f64,
    /// alpha * sqrt(x' A^-1 x)
    pub width: f64,
    /// estimate + width
    pub score: f64,
}

/// Nine-arm disjoint LinUCB model.
#[derive(Debug, Clone, PartialEq)]
pub struct LinUcbModel {
    d: usize,
    alpha: f64,
    lambda: f64,
    layout_version: u32,
    rounds_trained: u64,
    arms: Vec<ArmModel>,
}

impl LinUcbModel {
    pub fn new(d: usize, alpha: f64, lambda: f64, layout_version: u32) -> Result<Self, BanditError> {
        if d == 0 {
            return Err(BanditError::InvalidHyperparameter("d must be >= 1".into()));
        }
        if !(lambda > 0.0) {
            return Err(BanditError::InvalidHyperparameter(
                "lambda must be > 0".into(),
            ));
        }
        if !(alpha >= 0.0) {
            return Err(BanditError::InvalidHyperparameter(
                "alpha must be >= 0".into(),
            ));
        }
        Ok(Self {
            d,
            alpha,
            lambda,
            layout_version,
            rounds_trained: 0,
            arms: (0..NUM_ARMS).map(|_| ArmModel::new(d, lambda)).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn layout_version(&self) -> u32 {
        self.layout_version
    }

    pub fn rounds_trained(&self) -> u64 {
        self.rounds_trained
    }

    pub fn arm(&self, action: Action) -> &ArmModel {
        &self.arms[action.index()]
    }

    /// Scores all nine arms for a context. Read-only.
    pub fn predict(&self, x: &[f64]) -> Result<[ArmScore; NUM_ARMS], BanditError> {
        self.check_dim(x)?;
        let mut out = [ArmScore {
            estimate: 0.0,
            width: 0.0,
            score: 0.0,
        }; NUM_ARMS];
        for (slot, arm) in out.iter_mut().zip(&self.arms) {
            *slot = arm.score(x, self.alpha);
        }
        Ok(out)
    }

    /// Folds one observed (context, action, reward) tuple into the chosen
    /// arm; other arms are untouched.
    pub fn learn(&mut self, x: &[f64], action: Action, reward: f64) -> Result<(), BanditError> {
        self.check_dim(x)?;
        if !(0.0..=1.0).contains(&reward) {
            return Err(BanditError::RewardOutOfRange(reward));
        }
        self.arms[action.index()].learn(x, reward);
        Ok(())
    }

    /// Bumps the training-round counter recorded in checkpoints.
    pub fn note_round(&mut self) {
        self.rounds_trained += 1;
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), BanditError> {
        if x.len() != self.d {
            return Err(BanditError::DimensionMismatch {
                expected: self.d,
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            layout_version: self.layout_version,
            d: self.d,
            alpha: self.alpha,
            lambda: self.lambda,
            rounds_trained: self.rounds_trained,
            arms: self
                .arms
                .iter()
                .map(|arm| ArmCheckpoint {
                    a: arm.a.data().to_vec(),
                    b: arm.b.clone(),
                    a_inv: arm.a_inv.data().to_vec(),
                    n_updates: arm.n_updates,
                })
                .collect(),
        }
    }

    /// Restores a model, refusing checkpoints whose dimension or context
    /// layout does not match the running configuration.
    pub fn from_checkpoint(
        cp: &Checkpoint,
        expected_d: usize,
        expected_layout_version: u32,
    ) -> Result<Self, BanditError> {
        if cp.format != CHECKPOINT_FORMAT || cp.version != CHECKPOINT_VERSION {
            return Err(BanditError::MalformedCheckpoint(format!(
                "unrecognized format {}/{}",
                cp.format, cp.version
            )));
        }
        if cp.d != expected_d {
            return Err(BanditError::CheckpointMismatch(format!(
                "dimension {} but configured for {expected_d}",
                cp.d
            )));
        }
        if cp.layout_version != expected_layout_version {
            return Err(BanditError::CheckpointMismatch(format!(
                "context layout v{} but configured for v{expected_layout_version}",
                cp.layout_version
            )));
        }
        if cp.arms.len() != NUM_ARMS {
            return Err(BanditError::MalformedCheckpoint(format!(
                "{} arms (expected {NUM_ARMS})",
                cp.arms.len()
            )));
        }
        if !(cp.lambda > 0.0) {
            return Err(BanditError::MalformedCheckpoint("lambda <= 0".into()));
        }
        let d = cp.d;
        let mut arms = Vec::with_capacity(NUM_ARMS);
        for (i, arm) in cp.arms.iter().enumerate() {
            let a = Mat::from_rows(d, arm.a.clone())
                .ok_or_else(|| BanditError::MalformedCheckpoint(format!("arm {i}: bad A size")))?;
            let a_inv = Mat::from_rows(d, arm.a_inv.clone()).ok_or_else(|| {
                BanditError::MalformedCheckpoint(format!("arm {i}: bad A_inv size"))
            })?;
            if arm.b.len() != d {
                return Err(BanditError::MalformedCheckpoint(format!(
                    "arm {i}: bad b size"
                )));
            }
            if a.data().iter().any(|v| !v.is_finite())
                || a_inv.data().iter().any(|v| !v.is_finite())
                || arm.b.iter().any(|v| !v.is_finite())
            {
                return Err(BanditError::MalformedCheckpoint(format!(
                    "arm {i}: non-finite entries"
                )));
            }
            arms.push(ArmModel {
                a,
                b: arm.b.clone(),
                a_inv,
                n_updates: arm.n_updates,
            });
        }
        Ok(Self {
            d,
            alpha: cp.alpha,
            lambda: cp.lambda,
            layout_version: cp.layout_version,
            rounds_trained: cp.rounds_trained,
            arms,
        })
    }
}

/// Serialized model state. Matrices are row-major f64 arrays; JSON float
/// round-tripping is exact, so save/load preserves predictions bit-for-bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub layout_version: u32,
    pub d: usize,
    pub alpha: f64,
    pub lambda: f64,
    pub rounds_trained: u64,
    pub arms: Vec<ArmCheckpoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmCheckpoint {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub a_inv: Vec<f64>,
    pub n_updates: u64,
}

impl Checkpoint {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(json: &str) -> Result<Self, BanditError> {
        serde_json::from_str(json).map_err(|e| BanditError::MalformedCheckpoint(e.to_string()))
    }

    pub fn write_file(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_json())
    }

    pub fn read_file(path: &Path) -> Result<Self, BanditError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BanditError::MalformedCheckpoint(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}
