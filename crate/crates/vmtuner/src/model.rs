//! Core domain types shared by every module: cluster topology, per-VM
//! allocations, the nine-arm action space, and allocation deltas with
//! hard-bound clamping.
//!
//! Memory is tracked in MiB throughout so that ±512 MiB tuning steps stay
//! exact; GiB only ever appears in display output.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Hard floor for any VM: 1 vCPU and 2 GiB of RAM.
pub const ABS_MIN_VCPUS: u32 = 1;
pub const ABS_MIN_MEM_MIB: u64 = 2048;

/// Allocation template and min/max bounds for one VM instance type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceTypeSpec {
    pub name: String,
    pub initial_vcpus: u32,
    pub initial_mem_mib: u64,
    pub min_vcpus: u32,
    pub max_vcpus: u32,
    pub min_mem_mib: u64,
    pub max_mem_mib: u64,
}

impl InstanceTypeSpec {
    pub fn large() -> Self {
        Self {
            name: "large".into(),
            initial_vcpus: 2,
            initial_mem_mib: 3840,
            min_vcpus: 1,
            max_vcpus: 4,
            min_mem_mib: 2048,
            max_mem_mib: 7680,
        }
    }

    pub fn xlarge() -> Self {
        Self {
            name: "xlarge".into(),
            initial_vcpus: 4,
            initial_mem_mib: 7680,
            min_vcpus: 1,
            max_vcpus: 8,
            min_mem_mib: 2048,
            max_mem_mib: 15360,
        }
    }

    pub fn two_xlarge() -> Self {
        Self {
            name: "2xlarge".into(),
            initial_vcpus: 8,
            initial_mem_mib: 15360,
            min_vcpus: 1,
            max_vcpus: 16,
            min_mem_mib: 2048,
            max_mem_mib: 30720,
        }
    }

    /// Looks up one of the built-in presets by name.
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "large" => Some(Self::large()),
            "xlarge" => Some(Self::xlarge()),
            "2xlarge" => Some(Self::two_xlarge()),
            _ => None,
        }
    }

    pub fn bounds(&self) -> ResourceBounds {
        ResourceBounds {
            min_vcpus: self.min_vcpus,
            max_vcpus: self.max_vcpus,
            min_mem_mib: self.min_mem_mib,
            max_mem_mib: self.max_mem_mib,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.min_vcpus < ABS_MIN_VCPUS {
            return Err(format!("min_vcpus must be >= {ABS_MIN_VCPUS}"));
        }
        if self.min_mem_mib < ABS_MIN_MEM_MIB {
            return Err(format!("min_mem_mib must be >= {ABS_MIN_MEM_MIB}"));
        }
        if !(self.min_vcpus <= self.initial_vcpus && self.initial_vcpus <= self.max_vcpus) {
            return Err("vcpus must satisfy min <= initial <= max".into());
        }
        if !(self.min_mem_mib <= self.initial_mem_mib && self.initial_mem_mib <= self.max_mem_mib)
        {
            return Err("mem_mib must satisfy min <= initial <= max".into());
        }
        Ok(())
    }
}

/// I/O workload classes with distinct service rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IoType {
    RandRead8k,
    RandWrite8k,
    RandMixed8k,
    SeqWrite1m,
}

impl IoType {
    pub const ALL: [IoType; 4] = [
        IoType::RandRead8k,
        IoType::RandWrite8k,
        IoType::RandMixed8k,
        IoType::SeqWrite1m,
    ];
}

/// A physical node: CPU capacity, memory, and per-I/O-type service rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub node_id: String,
    pub cores: u32,
    pub core_ghz: f64,
    pub mem_mib: u64,
    #[serde(default = "NodeSpec::default_io_profile")]
    pub io_service_profile: BTreeMap<IoType, f64>,
}

impl NodeSpec {
    /// 48 cores at 2.4 GHz with 512 GiB of RAM.
    pub fn default_node(node_id: impl Into<String>) -> Self {
        Self {
            node_id: node_id.into(),
            cores: 48,
            core_ghz: 2.4,
            mem_mib: 512 * 1024,
            io_service_profile: Self::default_io_profile(),
        }
    }

    /// Flash-node-magnitude service rates; overridable per experiment.
    pub fn default_io_profile() -> BTreeMap<IoType, f64> {
        BTreeMap::from([
            (IoType::RandRead8k, 25_000.0),
            (IoType::RandWrite8k, 15_000.0),
            (IoType::RandMixed8k, 18_000.0),
            (IoType::SeqWrite1m, 3_000.0),
        ])
    }

    pub fn capacity_ghz(&self) -> f64 {
        f64::from(self.cores) * self.core_ghz
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.cores < 1 {
            return Err("cores must be >= 1".into());
        }
        if !(self.core_ghz > 0.0) {
            return Err("core_ghz must be > 0".into());
        }
        if self.io_service_profile.is_empty() {
            return Err("io_service_profile must not be empty".into());
        }
        if self.io_service_profile.values().any(|r| !(*r > 0.0)) {
            return Err("all io service rates must be > 0".into());
        }
        Ok(())
    }
}

/// One VM's identity, placement, and current allocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VmState {
    pub vm_id: String,
    pub node_id: String,
    pub instance_type: InstanceTypeSpec,
    pub vcpus: u32,
    pub mem_mib: u64,
    pub workload_id: String,
}

impl VmState {
    /// A VM at its instance type's initial allocation.
    pub fn initial(
        vm_id: impl Into<String>,
        node_id: impl Into<String>,
        instance_type: InstanceTypeSpec,
        workload_id: impl Into<String>,
    ) -> Self {
        Self {
            vm_id: vm_id.into(),
            node_id: node_id.into(),
            vcpus: instance_type.initial_vcpus,
            mem_mib: instance_type.initial_mem_mib,
            instance_type,
            workload_id: workload_id.into(),
        }
    }

    pub fn allocated_ghz(&self, core_ghz: f64) -> f64 {
        f64::from(self.vcpus) * core_ghz
    }

    pub fn in_bounds(&self) -> bool {
        let b = self.instance_type.bounds();
        (b.min_vcpus..=b.max_vcpus).contains(&self.vcpus)
            && (b.min_mem_mib..=b.max_mem_mib).contains(&self.mem_mib)
    }
}

/// Per-resource adjustment direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Up,
    Noop,
    Down,
}

impl Direction {
    /// Index rank within the action table (cpu-major, UP < NOOP < DOWN).
    fn rank(self) -> usize {
        match self {
            Direction::Up => 0,
            Direction::Noop => 1,
            Direction::Down => 2,
        }
    }

    fn from_rank(rank: usize) -> Option<Self> {
        match rank {
            0 => Some(Direction::Up),
            1 => Some(Direction::Noop),
            2 => Some(Direction::Down),
            _ => None,
        }
    }

    pub fn signum(self) -> i64 {
        match self {
            Direction::Up => 1,
            Direction::Noop => 0,
            Direction::Down => -1,
        }
    }

    /// Scale level for monotonicity comparisons: DOWN < NOOP < UP.
    pub fn scale_level(self) -> i32 {
        match self {
            Direction::Down => -1,
            Direction::Noop => 0,
            Direction::Up => 1,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Direction::Up => "UP",
            Direction::Noop => "NOOP",
            Direction::Down => "DOWN",
        };
        f.write_str(s)
    }
}

/// One of the nine joint (CPU, MEM) adjustment arms.
///
/// Arms carry a stable index 0..8 ordered cpu-major with UP < NOOP < DOWN,
/// so index 0 is `CPU_UP_MEM_UP` and index 4 is `CPU_NOOP_MEM_NOOP`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Action {
    pub cpu: Direction,
    pub mem: Direction,
}

impl Action {
    pub const COUNT: usize = 9;

    pub const NOOP: Action = Action {
        cpu: Direction::Noop,
        mem: Direction::Noop,
    };

    pub fn new(cpu: Direction, mem: Direction) -> Self {
        Self { cpu, mem }
    }

    pub fn index(self) -> usize {
        self.cpu.rank() * 3 + self.mem.rank()
    }

    pub fn from_index(index: usize) -> Option<Self> {
        if index >= Self::COUNT {
            return None;
        }
        Some(Self {
            cpu: Direction::from_rank(index / 3)?,
            mem: Direction::from_rank(index % 3)?,
        })
    }

    /// All nine actions in index order.
    pub fn all() -> [Action; Self::COUNT] {
        let mut out = [Action::NOOP; Self::COUNT];
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = Action::from_index(i).expect("index < COUNT");
        }
        out
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CPU_{}_MEM_{}", self.cpu, self.mem)
    }
}

/// Per-round adjustment granularity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuningStep {
    pub cpu_step: u32,
    pub mem_step_mib: u64,
}

impl Default for TuningStep {
    /// ±1 vCPU and ±512 MiB per adjustment.
    fn default() -> Self {
        Self {
            cpu_step: 1,
            mem_step_mib: 512,
        }
    }
}

/// Signed allocation change produced by one action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AllocationDelta {
    pub d_vcpus: i64,
    pub d_mem_mib: i64,
}

/// Which resources had their requested change clamped by a hard bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClampFlags {
    pub cpu: bool,
    pub mem: bool,
}

impl ClampFlags {
    pub fn any(self) -> bool {
        self.cpu || self.mem
    }
}

/// Hard allocation bounds, normally taken from the instance type but
/// overridable by operator domain rules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourceBounds {
    pub min_vcpus: u32,
    pub max_vcpus: u32,
    pub min_mem_mib: u64,
    pub max_mem_mib: u64,
}

/// Maps an action to its signed allocation delta: UP → +step, DOWN → −step,
/// NOOP → 0, independently per resource.
pub fn action_to_delta(action: Action, step: TuningStep) -> AllocationDelta {
    AllocationDelta {
        d_vcpus: action.cpu.signum() * i64::from(step.cpu_step),
        d_mem_mib: action.mem.signum() * step.mem_mib_i64(),
    }
}

impl TuningStep {
    fn mem_mib_i64(self) -> i64 {
        i64::try_from(self.mem_step_mib).unwrap_or(i64::MAX)
    }
}

/// Applies a delta to a VM, clamping each resource into the given bounds.
/// The per-resource flag is set when the unclamped value would have
/// violated a bound.
pub fn apply_delta_within(
    vm: &VmState,
    delta: AllocationDelta,
    bounds: &ResourceBounds,
) -> (VmState, ClampFlags) {
    let raw_vcpus = i64::from(vm.vcpus) + delta.d_vcpus;
    let raw_mem = i64::try_from(vm.mem_mib).unwrap_or(i64::MAX) + delta.d_mem_mib;

    let vcpus = raw_vcpus.clamp(i64::from(bounds.min_vcpus), i64::from(bounds.max_vcpus));
    let mem = raw_mem.clamp(
        i64::try_from(bounds.min_mem_mib).unwrap_or(0),
        i64::try_from(bounds.max_mem_mib).unwrap_or(i64::MAX),
    );

    let flags = ClampFlags {
        cpu: raw_vcpus != vcpus,
        mem: raw_mem != mem,
    };
    let mut next = vm.clone();
    next.vcpus = u32::try_from(vcpus).expect("clamped into u32 bounds");
    next.mem_mib = u64::try_from(mem).expect("clamped into u64 bounds");
    (next, flags)
}

/// [`apply_delta_within`] against the VM's own instance-type bounds.
pub fn apply_delta(vm: &VmState, delta: AllocationDelta) -> (VmState, ClampFlags) {
    let bounds = vm.instance_type.bounds();
    apply_delta_within(vm, delta, &bounds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_match_min_max_table() {
        let large = InstanceTypeSpec::large();
        assert_eq!(
            (large.initial_vcpus, large.initial_mem_mib),
            (2, 3840),
            "large starts at 2 vCPU / 3.75 GiB"
        );
        assert_eq!((large.min_vcpus, large.max_vcpus), (1, 4));
        assert_eq!((large.min_mem_mib, large.max_mem_mib), (2048, 7680));

        let xl = InstanceTypeSpec::xlarge();
        assert_eq!((xl.initial_vcpus, xl.initial_mem_mib), (4, 7680));
        assert_eq!((xl.min_vcpus, xl.max_vcpus), (1, 8));

        let xxl = InstanceTypeSpec::two_xlarge();
        assert_eq!((xxl.initial_vcpus, xxl.initial_mem_mib), (8, 15360));
        assert_eq!((xxl.min_vcpus, xxl.max_vcpus), (1, 16));
        assert_eq!(xxl.max_mem_mib, 30720);

        for name in ["large", "xlarge", "2xlarge"] {
            let spec = InstanceTypeSpec::preset(name).unwrap();
            assert_eq!(spec.name, name);
            spec.validate().unwrap();
        }
        assert!(InstanceTypeSpec::preset("4xlarge").is_none());
    }

    #[test]
    fn default_node_capacity() {
        let node = NodeSpec::default_node("n0");
        assert_eq!(node.cores, 48);
        assert!((node.capacity_ghz() - 115.2).abs() < 1e-9);
        node.validate().unwrap();
    }

    #[test]
    fn action_index_is_cpu_major() {
        let a = Action::new(Direction::Up, Direction::Up);
        assert_eq!(a.index(), 0);
        assert_eq!(Action::NOOP.index(), 4);
        let down = Action::new(Direction::Down, Direction::Down);
        assert_eq!(down.index(), 8);
    }

    #[test]
    fn action_index_round_trips() {
        for i in 0..Action::COUNT {
            let a = Action::from_index(i).unwrap();
            assert_eq!(a.index(), i);
        }
        assert!(Action::from_index(9).is_none());
    }

    #[test]
    fn action_names_render_like_figures() {
        let a = Action::new(Direction::Noop, Direction::Up);
        assert_eq!(a.to_string(), "CPU_NOOP_MEM_UP");
        assert_eq!(Action::NOOP.to_string(), "CPU_NOOP_MEM_NOOP");
    }

    #[test]
    fn nine_distinct_actions() {
        let all = Action::all();
        for (i, a) in all.iter().enumerate() {
            for (j, b) in all.iter().enumerate() {
                assert_eq!(i == j, a == b);
            }
        }
    }

    #[test]
    fn action_to_delta_examples() {
        let step = TuningStep::default();
        let d = action_to_delta(Action::new(Direction::Up, Direction::Noop), step);
        assert_eq!(d, AllocationDelta { d_vcpus: 1, d_mem_mib: 0 });

        let d = action_to_delta(Action::NOOP, step);
        assert_eq!(d, AllocationDelta { d_vcpus: 0, d_mem_mib: 0 });

        let d = action_to_delta(Action::new(Direction::Down, Direction::Down), step);
        assert_eq!(
            d,
            AllocationDelta {
                d_vcpus: -1,
                d_mem_mib: -512
            }
        );
    }

    #[test]
    fn apply_delta_clamps_at_xlarge_cpu_max() {
        let mut vm = VmState::initial("vm0", "n0", InstanceTypeSpec::xlarge(), "w0");
        vm.vcpus = 8;
        let (next, flags) = apply_delta(&vm, AllocationDelta { d_vcpus: 1, d_mem_mib: 0 });
        assert_eq!(next.vcpus, 8);
        assert!(flags.cpu);
        assert!(!flags.mem);
    }

    #[test]
    fn apply_delta_clamps_at_mem_floor() {
        let mut vm = VmState::initial("vm0", "n0", InstanceTypeSpec::large(), "w0");
        vm.mem_mib = 2048;
        let (next, flags) = apply_delta(&vm, AllocationDelta { d_vcpus: 0, d_mem_mib: -512 });
        assert_eq!(next.mem_mib, 2048);
        assert!(flags.mem);
        assert!(!flags.cpu);
    }

    #[test]
    fn apply_delta_interior_point_no_clamp() {
        let vm = VmState::initial("vm0", "n0", InstanceTypeSpec::xlarge(), "w0");
        let (next, flags) = apply_delta(
            &vm,
            AllocationDelta {
                d_vcpus: -1,
                d_mem_mib: 512,
            },
        );
        assert_eq!((next.vcpus, next.mem_mib), (3, 8192));
        assert!(!flags.any());
    }
}
