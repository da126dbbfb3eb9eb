use std::str::FromStr;

/// Per-node hardware figures used by the energy and cost models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MachineProfile {
    pub name: &'static str,
    pub cores_per_node: usize,
    /// Watt.
    pub power_per_node: f64,
    /// Microseconds.
    pub latency_us: f64,
    /// GB/s per node.
    pub bandwidth_gbs: f64,
    /// GFlop/s per node.
    pub peak_gflops: f64,
}

impl MachineProfile {
    pub fn latency_s(&self) -> f64 {
        self.latency_us * 1e-6
    }

    pub fn bandwidth_bytes_per_s(&self) -> f64 {
        self.bandwidth_gbs * 1e9
    }

    /// Nodes needed to host `cores` cores.
    pub fn nodes_for(&self, cores: usize) -> usize {
        cores.div_ceil(self.cores_per_node).max(1)
    }
}

pub const BGQ: MachineProfile = MachineProfile {
    name: "bgq",
    cores_per_node: 16,
    power_per_node: 80.0,
    latency_us: 1.4,
    bandwidth_gbs: 3.4,
    peak_gflops: 204.8,
};

pub const XE6: MachineProfile = MachineProfile {
    name: "xe6",
    cores_per_node: 32,
    power_per_node: 400.0,
    latency_us: 1.2,
    bandwidth_gbs: 5.6,
    peak_gflops: 294.4,
};

pub const B510: MachineProfile = MachineProfile {
    name: "b510",
    cores_per_node: 16,
    power_per_node: 498.0,
    latency_us: 0.6,
    bandwidth_gbs: 3.0,
    peak_gflops: 345.6,
};

pub const PROFILES: [MachineProfile; 3] = [BGQ, XE6, B510];

impl FromStr for MachineProfile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PROFILES
            .into_iter()
            .find(|p| p.name == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown machine '{s}' (expected bgq, xe6 or b510)"))
    }
}
