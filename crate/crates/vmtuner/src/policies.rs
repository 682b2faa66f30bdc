//! Decision methods behind one interface: passive (never touch anything),
//! reactive (threshold on current usage), proactive (threshold on a
//! predicted 10-minute max from online linear regression), and the
//! LinUCB bandit.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::bandit::{ArmScore, LinUcbModel, NUM_ARMS};
use crate::model::{Action, Direction, VmState};
use crate::sensing::{ContextVector, TelemetryStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Passive,
    Reactive,
    Proactive,
    Bandits,
}

/// Under/over-provisioning cutoffs on usage fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    pub under: f64,
    pub over: f64,
}

impl Default for Thresholds {
    /// Scale up above 75% usage, down below 25%.
    fn default() -> Self {
        Self {
            under: 0.75,
            over: 0.25,
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0 <= self.over && self.over < self.under && self.under <= 1.0) {
            return Err("thresholds must satisfy 0 <= over < under <= 1".into());
        }
        Ok(())
    }

    /// Whether a usage fraction sits inside the healthy band.
    pub fn in_band(&self, usage: f64) -> bool {
        (self.over..=self.under).contains(&usage)
    }
}

/// UP strictly above the under-provisioning threshold, DOWN strictly below
/// the over-provisioning threshold, NOOP in between (boundaries included).
pub fn threshold_direction(usage: f64, th: Thresholds) -> Direction {
    if usage > th.under {
        Direction::Up
    } else if usage < th.over {
        Direction::Down
    } else {
        Direction::Noop
    }
}

/// The passive baseline: every VM maps to NOOP/NOOP.
pub fn passive_decide(vm_ids: &[String]) -> BTreeMap<String, Action> {
    vm_ids
        .iter()
        .map(|id| (id.clone(), Action::NOOP))
        .collect()
}

/// Threshold rule applied to current usage, independently per resource.
pub fn reactive_action(cpu_usage: f64, mem_usage: f64, th: Thresholds) -> Action {
    Action::new(
        threshold_direction(cpu_usage, th),
        threshold_direction(mem_usage, th),
    )
}

pub fn reactive_decide(
    usages: &[(String, f64, f64)],
    th: Thresholds,
) -> BTreeMap<String, Action> {
    usages
        .iter()
        .map(|(id, cpu, mem)| (id.clone(), reactive_action(*cpu, *mem, th)))
        .collect()
}

/// Linear model trained online with SGD on squared loss plus l2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineLinearRegressor {
    pub weights: Vec<f64>,
    pub learning_rate: f64,
    pub l2_coeff: f64,
    pub n_steps: u64,
}

impl OnlineLinearRegressor {
    pub fn new(d: usize, learning_rate: f64, l2_coeff: f64) -> Self {
        Self {
            weights: vec![0.0; d],
            learning_rate,
            l2_coeff,
            n_steps: 0,
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        crate::linalg::dot(&self.weights, x)
    }

    /// One gradient step: `w -= eta ((w.x - y) x + l2 w)`.
    pub fn sgd_update(&mut self, x: &[f64], y: f64) {
        debug_assert!((0.0..=1.0).contains(&y));
        let residual = self.predict(x) - y;
        for (w, xi) in self.weights.iter_mut().zip(x) {
            *w -= self.learning_rate * (residual * xi + self.l2_coeff * *w);
        }
        self.n_steps += 1;
    }
}

/// Decision contexts awaiting their realized training target: the max
/// usage observed over the horizon after the decision.
#[derive(Debug, Clone, Default)]
pub struct LagBuffer {
    horizon_s: u64,
    pending: VecDeque<PendingPair>,
}

#[derive(Debug, Clone)]
struct PendingPair {
    vm_id: String,
    context: ContextVector,
    decision_time_s: u64,
}

/// A completed (context, target) training pair.
#[derive(Debug, Clone)]
pub struct HarvestedPair {
    pub vm_id: String,
    pub context: ContextVector,
    pub y_cpu: f64,
    pub y_mem: f64,
}

pub const DEFAULT_HORIZON_S: u64 = 600;

impl LagBuffer {
    pub fn new(horizon_s: u64) -> Self {
        Self {
            horizon_s,
            pending: VecDeque::new(),
        }
    }

    pub fn push(&mut self, vm_id: impl Into<String>, context: ContextVector, decision_time_s: u64) {
        self.pending.push_back(PendingPair {
            vm_id: vm_id.into(),
            context,
            decision_time_s,
        });
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    /// Emits pairs whose horizon has fully elapsed, with targets
    /// `y = max usage over samples in (t, t + horizon]`. Emitted pairs are
    /// removed; pairs with no samples in their window are dropped.
    pub fn harvest_targets(
        &mut self,
        store: &TelemetryStore,
        now_s: u64,
    ) -> Vec<HarvestedPair> {
        let mut out = Vec::new();
        while let Some(front) = self.pending.front() {
            if front.decision_time_s + self.horizon_s > now_s {
                break;
            }
            let pair = self.pending.pop_front().expect("front exists");
            let samples = store.samples_between(
                &pair.vm_id,
                pair.decision_time_s,
                pair.decision_time_s + self.horizon_s,
            );
            if samples.is_empty() {
                continue;
            }
            let y_cpu = samples
                .iter()
                .map(|s| s.metrics.cpu_usage)
                .fold(f64::NEG_INFINITY, f64::max);
            let y_mem = samples
                .iter()
                .map(|s| s.metrics.mem_usage)
                .fold(f64::NEG_INFINITY, f64::max);
            out.push(HarvestedPair {
                vm_id: pair.vm_id,
                context: pair.context,
                y_cpu,
                y_mem,
            });
        }
        out
    }
}

/// Predicted-usage thresholding. Until the regressors have seen
/// `warmup` completed pairs the method holds at NOOP rather than act on
/// uninformed predictions.
pub fn proactive_decide(
    x: &ContextVector,
    cpu_reg: &OnlineLinearRegressor,
    mem_reg: &OnlineLinearRegressor,
    th: Thresholds,
    warmed: bool,
) -> Action {
    if !warmed {
        return Action::NOOP;
    }
    let cpu_pred = cpu_reg.predict(x.values()).clamp(0.0, 1.0);
    let mem_pred = mem_reg.predict(x.values()).clamp(0.0, 1.0);
    Action::new(
        threshold_direction(cpu_pred, th),
        threshold_direction(mem_pred, th),
    )
}

/// Per-VM inputs for one decision.
pub struct VmObservation<'a> {
    pub vm: &'a VmState,
    pub context: &'a ContextVector,
    pub cpu_usage: f64,
    pub mem_usage: f64,
    pub now_s: u64,
}

/// A policy either names the action directly or hands back per-arm scores
/// for the decision layer to argmax under domain rules.
pub enum PolicyOutput {
    Action(Action),
    ArmScores([ArmScore; NUM_ARMS]),
}

/// Post-round feedback for one successfully executed VM.
#[derive(Debug, Clone)]
pub struct VmFeedback {
    pub vm_id: String,
    pub context: ContextVector,
    pub action: Action,
    pub reward: f64,
}

/// Common surface the controller drives each round.
pub trait Policy {
    fn kind(&self) -> PolicyKind;

    fn decide(&mut self, obs: &VmObservation<'_>) -> PolicyOutput;

    /// Called once per round after the environment advanced and rewards
    /// were computed. Default: stateless policy, nothing to fold in.
    fn observe(&mut self, _feedback: &[VmFeedback], _store: &TelemetryStore, _now_s: u64) {}

    /// The underlying bandit model, when this policy has one.
    fn bandit_model(&self) -> Option<&LinUcbModel> {
        None
    }
}

pub struct PassivePolicy;

impl Policy for PassivePolicy {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Passive
    }

    fn decide(&mut self, _obs: &VmObservation<'_>) -> PolicyOutput {
        PolicyOutput::Action(Action::NOOP)
    }
}

pub struct ReactivePolicy {
    pub thresholds: Thresholds,
}

impl Policy for ReactivePolicy {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Reactive
    }

    fn decide(&mut self, obs: &VmObservation<'_>) -> PolicyOutput {
        PolicyOutput::Action(reactive_action(obs.cpu_usage, obs.mem_usage, self.thresholds))
    }
}

pub struct ProactivePolicy {
    cpu_reg: OnlineLinearRegressor,
    mem_reg: OnlineLinearRegressor,
    lag: LagBuffer,
    thresholds: Thresholds,
    warmup_min_pairs: usize,
    completed_pairs: usize,
}

impl ProactivePolicy {
    pub fn new(
        d: usize,
        thresholds: Thresholds,
        learning_rate: f64,
        l2_coeff: f64,
        warmup_min_pairs: usize,
        horizon_s: u64,
    ) -> Self {
        Self {
            cpu_reg: OnlineLinearRegressor::new(d, learning_rate, l2_coeff),
            mem_reg: OnlineLinearRegressor::new(d, learning_rate, l2_coeff),
            lag: LagBuffer::new(horizon_s),
            thresholds,
            warmup_min_pairs,
            completed_pairs: 0,
        }
    }

    pub fn warmed(&self) -> bool {
        self.completed_pairs >= self.warmup_min_pairs
    }

    pub fn completed_pairs(&self) -> usize {
        self.completed_pairs
    }
}

impl Policy for ProactivePolicy {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Proactive
    }

    fn decide(&mut self, obs: &VmObservation<'_>) -> PolicyOutput {
        self.lag
            .push(&obs.vm.vm_id, obs.context.clone(), obs.now_s);
        PolicyOutput::Action(proactive_decide(
            obs.context,
            &self.cpu_reg,
            &self.mem_reg,
            self.thresholds,
            self.warmed(),
        ))
    }

    fn observe(&mut self, _feedback: &[VmFeedback], store: &TelemetryStore, now_s: u64) {
        for pair in self.lag.harvest_targets(store, now_s) {
            self.cpu_reg.sgd_update(pair.context.values(), pair.y_cpu);
            self.mem_reg.sgd_update(pair.context.values(), pair.y_mem);
            self.completed_pairs += 1;
        }
    }
}

pub struct BanditsPolicy {
    model: LinUcbModel,
}

impl BanditsPolicy {
    pub fn new(model: LinUcbModel) -> Self {
        Self { model }
    }

    pub fn model(&self) -> &LinUcbModel {
        &self.model
    }
}

impl Policy for BanditsPolicy {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Bandits
    }

    fn decide(&mut self, obs: &VmObservation<'_>) -> PolicyOutput {
        PolicyOutput::ArmScores(
            self.model
                .predict(obs.context.values())
                .expect("context dimension matches model"),
        )
    }

    fn observe(&mut self, feedback: &[VmFeedback], _store: &TelemetryStore, _now_s: u64) {
        for fb in feedback {
            self.model
                .learn(fb.context.values(), fb.action, fb.reward)
                .expect("round feedback is well-formed");
        }
        self.model.note_round();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::VmInstantMetrics;

    #[test]
    fn threshold_rule_matches_75_25() {
        let th = Thresholds::default();
        assert_eq!(threshold_direction(0.80, th), Direction::Up);
        assert_eq!(threshold_direction(0.20, th), Direction::Down);
        assert_eq!(threshold_direction(0.75, th), Direction::Noop);
        assert_eq!(threshold_direction(0.25, th), Direction::Noop);
    }

    #[test]
    fn passive_maps_everything_to_noop() {
        let ids = vec!["a".to_string(), "b".to_string()];
        let out = passive_decide(&ids);
        assert_eq!(out.len(), 2);
        assert!(out.values().all(|a| *a == Action::NOOP));
        assert!(passive_decide(&[]).is_empty());
        assert_eq!(passive_decide(&ids), passive_decide(&ids));
    }

    #[test]
    fn reactive_rules() {
        let th = Thresholds::default();
        assert_eq!(
            reactive_action(0.9, 0.1, th),
            Action::new(Direction::Up, Direction::Down)
        );
        assert_eq!(reactive_action(0.5, 0.5, th), Action::NOOP);
        assert_eq!(
            reactive_action(0.8, 0.8, th),
            Action::new(Direction::Up, Direction::Up)
        );
    }

    #[test]
    fn sgd_first_step_on_bias_feature() {
        let mut reg = OnlineLinearRegressor::new(3, 0.01, 1e-4);
        reg.sgd_update(&[1.0, 0.0, 0.0], 1.0);
        assert!((reg.weights[0] - 0.01).abs() < 1e-15);
        assert_eq!(reg.weights[1], 0.0);
        assert_eq!(reg.n_steps, 1);
    }

    #[test]
    fn sgd_zero_residual_without_l2_is_noop() {
        let mut reg = OnlineLinearRegressor::new(2, 0.05, 0.0);
        reg.weights = vec![0.5, 0.0];
        reg.sgd_update(&[1.0, 0.0], 0.5);
        assert_eq!(reg.weights, vec![0.5, 0.0]);
    }

    #[test]
    fn sgd_zero_context_is_pure_decay() {
        let mut reg = OnlineLinearRegressor::new(1, 0.1, 0.5);
        reg.weights = vec![1.0];
        reg.sgd_update(&[0.0], 0.0);
        assert!((reg.weights[0] - 0.95).abs() < 1e-15);
        reg.sgd_update(&[0.0], 0.0);
        assert!((reg.weights[0] - 0.9025).abs() < 1e-15);
    }

    fn usage_sample(vm: &str, ts: u64, cpu: f64, mem: f64) -> crate::sensing::TelemetrySample {
        crate::sensing::TelemetrySample {
            vm_id: vm.into(),
            timestamp_s: ts,
            metrics: VmInstantMetrics {
                cpu_usage: cpu,
                cpu_ready: 0.0,
                mem_usage: mem,
                swap_rate: 0.0,
                achieved_iops: 0.0,
                io_latency_ms: 0.1,
            },
        }
    }

    #[test]
    fn lag_buffer_waits_for_full_horizon() {
        let mut store = TelemetryStore::new(3600);
        let ctx = dummy_context();
        let mut lag = LagBuffer::new(600);
        lag.push("vm-0", ctx.clone(), 0);
        store.ingest(usage_sample("vm-0", 300, 0.3, 0.2)).unwrap();
        assert!(lag.harvest_targets(&store, 599).is_empty());
        assert_eq!(lag.len(), 1);

        store.ingest(usage_sample("vm-0", 400, 0.7, 0.4)).unwrap();
        store.ingest(usage_sample("vm-0", 600, 0.5, 0.6)).unwrap();
        let pairs = lag.harvest_targets(&store, 600);
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].y_cpu, 0.7);
        assert_eq!(pairs[0].y_mem, 0.6);
        assert!(lag.is_empty());
        assert!(lag.harvest_targets(&store, 1200).is_empty());
    }

    fn dummy_context() -> ContextVector {
        ContextVector::from_values(vec![1.0])
    }

    #[test]
    fn proactive_holds_noop_until_warmed() {
        let reg = OnlineLinearRegressor::new(1, 0.01, 0.0);
        let ctx = dummy_context();
        let th = Thresholds::default();
        assert_eq!(proactive_decide(&ctx, &reg, &reg, th, false), Action::NOOP);
    }

    #[test]
    fn proactive_thresholds_clamped_predictions() {
        let mut cpu = OnlineLinearRegressor::new(1, 0.01, 0.0);
        let mut mem = OnlineLinearRegressor::new(1, 0.01, 0.0);
        cpu.weights = vec![0.9];
        mem.weights = vec![0.5];
        let ctx = dummy_context();
        let th = Thresholds::default();
        assert_eq!(
            proactive_decide(&ctx, &cpu, &mem, th, true),
            Action::new(Direction::Up, Direction::Noop)
        );
        // prediction beyond 1 clamps to 1 and still scales up
        cpu.weights = vec![1.2];
        assert_eq!(
            proactive_decide(&ctx, &cpu, &mem, th, true).cpu,
            Direction::Up
        );
    }
}
