//! Telemetry aggregation and featurization: rolling per-VM statistics over
//! a trailing window plus fixed-layout context vectors combining VM, node,
//! cluster, and temporal features.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{NodeSpec, VmState};
use crate::sim::{service_rate_for_mix, VmInstantMetrics, WorkloadPattern};

/// Trailing window length; holds twelve 5-minute decision intervals.
pub const DEFAULT_WINDOW_S: u64 = 3600;

/// Context vector dimension. Changing the layout below requires bumping
/// [`CONTEXT_LAYOUT_VERSION`], which invalidates existing checkpoints.
pub const CONTEXT_DIM: usize = 26;
pub const CONTEXT_LAYOUT_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum SensingError {
    #[error("out-of-order sample for {vm_id}: {timestamp_s} <= last {last_s}")]
    OutOfOrder {
        vm_id: String,
        timestamp_s: u64,
        last_s: u64,
    },
    #[error("percentile of an empty series")]
    EmptySeries,
}

/// One timestamped observation of a VM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetrySample {
    pub vm_id: String,
    pub timestamp_s: u64,
    pub metrics: VmInstantMetrics,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatSummary {
    pub mean: f64,
    pub max: f64,
    pub min: f64,
    pub p95: f64,
}

/// Rolling summary of cpu and memory usage over the trailing window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RollingStats {
    pub cpu: StatSummary,
    pub mem: StatSummary,
}

/// Per-VM sample series with strictly increasing timestamps; samples older
/// than the window horizon are evicted as new ones arrive.
#[derive(Debug, Clone, Default)]
pub struct TelemetryStore {
    window_s: u64,
    series: BTreeMap<String, VecDeque<TelemetrySample>>,
}

impl TelemetryStore {
    pub fn new(window_s: u64) -> Self {
        Self {
            window_s,
            series: BTreeMap::new(),
        }
    }

    pub fn window_s(&self) -> u64 {
        self.window_s
    }

    pub fn ingest(&mut self, sample: TelemetrySample) -> Result<(), SensingError> {
        let series = self.series.entry(sample.vm_id.clone()).or_default();
        if let Some(last) = series.back() {
            if sample.timestamp_s <= last.timestamp_s {
                return Err(SensingError::OutOfOrder {
                    vm_id: sample.vm_id,
                    timestamp_s: sample.timestamp_s,
                    last_s: last.timestamp_s,
                });
            }
        }
        let newest = sample.timestamp_s;
        series.push_back(sample);
        while let Some(front) = series.front() {
            if newest - front.timestamp_s > self.window_s {
                series.pop_front();
            } else {
                break;
            }
        }
        Ok(())
    }

    pub fn ingest_all(
        &mut self,
        samples: impl IntoIterator<Item = TelemetrySample>,
    ) -> Result<(), SensingError> {
        for s in samples {
            self.ingest(s)?;
        }
        Ok(())
    }

    pub fn latest(&self, vm_id: &str) -> Option<&TelemetrySample> {
        self.series.get(vm_id)?.back()
    }

    pub fn len(&self, vm_id: &str) -> usize {
        self.series.get(vm_id).map_or(0, VecDeque::len)
    }

    /// Samples with `from_s < timestamp <= to_s`, oldest first.
    pub fn samples_between(&self, vm_id: &str, from_s: u64, to_s: u64) -> Vec<&TelemetrySample> {
        self.series.get(vm_id).map_or_else(Vec::new, |series| {
            series
                .iter()
                .filter(|s| s.timestamp_s > from_s && s.timestamp_s <= to_s)
                .collect()
        })
    }

    pub fn rolling_stats(&self, vm_id: &str) -> Option<RollingStats> {
        let series = self.series.get(vm_id)?;
        if series.is_empty() {
            return None;
        }
        let cpu: Vec<f64> = series.iter().map(|s| s.metrics.cpu_usage).collect();
        let mem: Vec<f64> = series.iter().map(|s| s.metrics.mem_usage).collect();
        Some(RollingStats {
            cpu: summarize(&cpu),
            mem: summarize(&mem),
        })
    }
}

fn summarize(values: &[f64]) -> StatSummary {
    let n = values.len() as f64;
    StatSummary {
        mean: values.iter().sum::<f64>() / n,
        max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        min: values.iter().copied().fold(f64::INFINITY, f64::min),
        p95: percentile(values, 0.95).expect("non-empty series"),
    }
}

/// Nearest-rank percentile: the value at 1-based index `ceil(q * n)` of the
/// sorted list.
pub fn percentile(values: &[f64], q: f64) -> Result<f64, SensingError> {
    if values.is_empty() {
        return Err(SensingError::EmptySeries);
    }
    debug_assert!(q > 0.0 && q <= 1.0, "q must be in (0, 1]");
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let rank = (q * sorted.len() as f64).ceil() as usize;
    Ok(sorted[rank.clamp(1, sorted.len()) - 1])
}

/// Node-level aggregates for context building.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeContext {
    pub cpu_usage: f64,
    pub mem_usage: f64,
    /// Total allocated vCPU GHz over node GHz.
    pub cpu_overcommit: f64,
    pub mem_overcommit: f64,
    /// Effective I/O service rate for the node's current mix.
    pub io_mu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterContext {
    pub cpu_usage: f64,
    pub mem_usage: f64,
    pub cpu_overcommit: f64,
    pub mem_overcommit: f64,
}

/// Member VM with its most recent metrics.
pub type VmObservationRef<'a> = (&'a VmState, &'a VmInstantMetrics);

pub fn node_context(
    node: &NodeSpec,
    members: &[VmObservationRef<'_>],
    workloads: &BTreeMap<String, WorkloadPattern>,
) -> NodeContext {
    let capacity_ghz = node.capacity_ghz();
    let node_mem = node.mem_mib as f64;
    let mut granted = 0.0;
    let mut resident = 0.0;
    let mut alloc_ghz = 0.0;
    let mut alloc_mem = 0.0;
    let mut mix: Vec<(crate::model::IoType, f64)> = Vec::with_capacity(members.len());
    for (vm, m) in members {
        let vm_ghz = vm.allocated_ghz(node.core_ghz);
        granted += m.cpu_usage * vm_ghz;
        resident += m.mem_usage * vm.mem_mib as f64;
        alloc_ghz += vm_ghz;
        alloc_mem += vm.mem_mib as f64;
        if let Some(p) = workloads.get(&vm.workload_id) {
            mix.push((p.io_type, m.achieved_iops));
        }
    }
    NodeContext {
        cpu_usage: (granted / capacity_ghz).clamp(0.0, 1.0),
        mem_usage: (resident / node_mem).clamp(0.0, 1.0),
        cpu_overcommit: alloc_ghz / capacity_ghz,
        mem_overcommit: alloc_mem / node_mem,
        io_mu: service_rate_for_mix(&node.io_service_profile, &mix),
    }
}

pub fn cluster_context(
    nodes: &[NodeSpec],
    members: &[(&NodeSpec, Vec<VmObservationRef<'_>>)],
) -> ClusterContext {
    let capacity_ghz: f64 = nodes.iter().map(NodeSpec::capacity_ghz).sum();
    let total_mem: f64 = nodes.iter().map(|n| n.mem_mib as f64).sum();
    let mut granted = 0.0;
    let mut resident = 0.0;
    let mut alloc_ghz = 0.0;
    let mut alloc_mem = 0.0;
    for (node, vms) in members {
        for (vm, m) in vms {
            let vm_ghz = vm.allocated_ghz(node.core_ghz);
            granted += m.cpu_usage * vm_ghz;
            resident += m.mem_usage * vm.mem_mib as f64;
            alloc_ghz += vm_ghz;
            alloc_mem += vm.mem_mib as f64;
        }
    }
    ClusterContext {
        cpu_usage: (granted / capacity_ghz).clamp(0.0, 1.0),
        mem_usage: (resident / total_mem).clamp(0.0, 1.0),
        cpu_overcommit: alloc_ghz / capacity_ghz,
        mem_overcommit: alloc_mem / total_mem,
    }
}

/// Fixed-dimension feature vector for one VM. All entries are finite and
/// normalized into [-1, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextVector(Vec<f64>);

impl ContextVector {
    /// Wraps raw feature values, e.g. replayed from a log.
    pub fn from_values(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

const SECONDS_PER_DAY: f64 = 86_400.0;

/// Builds the 26-entry context. Layout (index: feature):
///  0: bias (always 1)
///  1: vcpus / max_vcpus          2: mem / max_mem
///  3: cpu usage now              4: mem usage now
///  5-7: cpu mean, max, p95       8-10: mem mean, max, p95
/// 11: swap indicator min(1, swap_rate/1000)
/// 12: cpu ready fraction
/// 13: io latency / latency cap   14: achieved iops / node mu
/// 15-17: instance type one-hot (large, xlarge, 2xlarge)
/// 18: node cpu usage             19: node mem usage
/// 20: node cpu overcommit / 4    21: node mem overcommit / 4
/// 22: cluster cpu usage          23: cluster mem usage
/// 24: sin(2 pi t / day)          25: cos(2 pi t / day)
pub fn build_context(
    vm: &VmState,
    stats: &RollingStats,
    last: &VmInstantMetrics,
    node: &NodeContext,
    cluster: &ClusterContext,
    clock_s: u64,
    latency_cap_ms: f64,
) -> ContextVector {
    let bounds = vm.instance_type.bounds();
    let (large, xlarge, two_xlarge) = match vm.instance_type.name.as_str() {
        "large" => (1.0, 0.0, 0.0),
        "xlarge" => (0.0, 1.0, 0.0),
        "2xlarge" => (0.0, 0.0, 1.0),
        _ => (0.0, 0.0, 0.0),
    };
    let day_angle = 2.0 * std::f64::consts::PI * (clock_s as f64 / SECONDS_PER_DAY);
    let iops_norm = if node.io_mu > 0.0 {
        (last.achieved_iops / node.io_mu).min(1.0)
    } else {
        0.0
    };
    let values = vec![
        1.0,
        f64::from(vm.vcpus) / f64::from(bounds.max_vcpus),
        vm.mem_mib as f64 / bounds.max_mem_mib as f64,
        last.cpu_usage,
        last.mem_usage,
        stats.cpu.mean,
        stats.cpu.max,
        stats.cpu.p95,
        stats.mem.mean,
        stats.mem.max,
        stats.mem.p95,
        (last.swap_rate / 1000.0).min(1.0),
        last.cpu_ready,
        (last.io_latency_ms / latency_cap_ms).min(1.0),
        iops_norm,
        large,
        xlarge,
        two_xlarge,
        node.cpu_usage,
        node.mem_usage,
        (node.cpu_overcommit / 4.0).min(1.0),
        (node.mem_overcommit / 4.0).min(1.0),
        cluster.cpu_usage,
        cluster.mem_usage,
        day_angle.sin(),
        day_angle.cos(),
    ];
    debug_assert_eq!(values.len(), CONTEXT_DIM);
    debug_assert!(values.iter().all(|v| v.is_finite() && (-1.0..=1.0).contains(v)));
    ContextVector(values)
}

/// Contexts for every VM in the cluster from its latest telemetry.
/// Requires at least one ingested sample per VM.
pub fn build_cluster_contexts(
    nodes: &[NodeSpec],
    vms: &[VmState],
    workloads: &BTreeMap<String, WorkloadPattern>,
    store: &TelemetryStore,
    clock_s: u64,
    latency_cap_ms: f64,
) -> BTreeMap<String, ContextVector> {
    let per_node: Vec<(&NodeSpec, Vec<VmObservationRef<'_>>)> = nodes
        .iter()
        .map(|node| {
            let members: Vec<VmObservationRef<'_>> = vms
                .iter()
                .filter(|v| v.node_id == node.node_id)
                .filter_map(|v| store.latest(&v.vm_id).map(|s| (v, &s.metrics)))
                .collect();
            (node, members)
        })
        .collect();
    let cluster = cluster_context(nodes, &per_node);
    let node_ctx: BTreeMap<&str, NodeContext> = per_node
        .iter()
        .map(|(node, members)| {
            (
                node.node_id.as_str(),
                node_context(node, members, workloads),
            )
        })
        .collect();

    let mut out = BTreeMap::new();
    for vm in vms {
        let (Some(sample), Some(stats)) = (store.latest(&vm.vm_id), store.rolling_stats(&vm.vm_id))
        else {
            continue;
        };
        let node = node_ctx
            .get(vm.node_id.as_str())
            .expect("vm placed on an existing node");
        out.insert(
            vm.vm_id.clone(),
            build_context(
                vm,
                &stats,
                &sample.metrics,
                node,
                &cluster,
                clock_s,
                latency_cap_ms,
            ),
        );
    }
    out
}
