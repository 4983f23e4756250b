//! Shared fixtures for the criterion benches.

use riscf::system::{SystemConfig, SystemStatistics};

/// Desk-scale drop used by every bench.
pub fn desk_system() -> SystemStatistics {
    let cfg = SystemConfig {
        n_aps: 10,
        n_antennas: 2,
        n_ues: 4,
        n_elements: 16,
        n_blocks: 4,
        n_active_blocks: 2,
        ..SystemConfig::default()
    };
    SystemStatistics::build(cfg, 42).expect("desk system builds")
}
