//! Per-AP mutual-information capacity, the uplink power-consumption model and
//! energy efficiency.

use crate::channel::{sample_channel, PhaseShiftConfig};
use crate::error::{invalid, Result};
use crate::linalg::{cplx, log2_det_hpd, scaled_identity, CMat};
use crate::rng::{self, parallel_trials};
use crate::system::{dbm_to_watt, RpMode, SystemStatistics};

/// Power-consumption constants (watts unless noted).
#[derive(Debug, Clone)]
pub struct PowerModel {
    /// AP traffic-dependent coefficient, W per bit/s.
    pub rho_ap: f64,
    /// Backhaul traffic-dependent coefficient, W per bit/s.
    pub rho_bh: f64,
    pub p_ap_fix: f64,
    pub p_ap_antenna: f64,
    pub p_bh_fix: f64,
    /// Per-element RIS consumption P(b).
    pub p_ris_element: f64,
    /// UE power-amplifier efficiency in (0, 1].
    pub alpha_ue: f64,
    pub p_ue_fix: f64,
    pub bandwidth: f64,
}

impl Default for PowerModel {
    fn default() -> Self {
        // 0.25 W/Gbps traffic coefficients, 6 W fixed AP, 0.15 W per antenna,
        // 0.8 W backhaul, 10 dBm UE fixed, 10 dBm per RIS element.
        Self {
            rho_ap: 0.25e-9,
            rho_bh: 0.25e-9,
            p_ap_fix: 6.0,
            p_ap_antenna: 0.15,
            p_bh_fix: 0.8,
            p_ris_element: dbm_to_watt(10.0),
            alpha_ue: 0.4,
            p_ue_fix: dbm_to_watt(10.0),
            bandwidth: 20e6,
        }
    }
}

impl PowerModel {
    pub fn with_ris_dbm(mut self, dbm: f64) -> Self {
        self.p_ris_element = dbm_to_watt(dbm);
        self
    }

    pub fn with_traffic_w_per_gbps(mut self, w_per_gbps: f64) -> Self {
        self.rho_ap = w_per_gbps * 1e-9;
        self.rho_bh = w_per_gbps * 1e-9;
        self
    }
}

/// Mean per-AP mutual information over the supplied channel draws:
/// C_m = E{ log2 det(I_J + H P H^H / sigma^2) }, with H in C^{J x U} and the
/// powers already normalized by sigma^2.
pub fn capacity_per_ap(h_draws: &[CMat], data_powers: &[f64]) -> Result<f64> {
    if h_draws.is_empty() {
        return Err(invalid("need at least one channel draw"));
    }
    let j = h_draws[0].nrows();
    let mut acc = 0.0;
    for h in h_draws {
        let mut gram = scaled_identity(j, 1.0);
        for (u, &p) in data_powers.iter().enumerate() {
            let col = h.column(u);
            gram += &col * col.adjoint() * cplx(p);
        }
        acc += log2_det_hpd(&gram)?;
    }
    Ok(acc / h_draws.len() as f64)
}

/// Monte Carlo per-AP capacities of a system drop under the given phases.
pub fn mc_capacities(
    system: &SystemStatistics,
    phases: &[PhaseShiftConfig],
    rp: RpMode,
    n_draws: u64,
    seed: u64,
) -> Result<Vec<f64>> {
    let n_ues = system.n_ues();
    let j = system.cfg.n_antennas;
    let n_patterns = system.codebook.c();
    let sums = parallel_trials(
        n_draws,
        || vec![0.0f64; system.n_aps()],
        |t, acc| {
            let mut r = rng::stream(seed, t);
            use rand::RngExt as _;
            for m in 0..system.n_aps() {
                let c = match rp {
                    RpMode::Average => r.random_range(0..n_patterns),
                    RpMode::Fixed(c) => c,
                };
                let mut gram = scaled_identity(j, 1.0);
                for u in 0..n_ues {
                    let h = sample_channel(
                        &system.link_inputs(m, u, c),
                        system.sqrts_view(m, u, c),
                        &phases[m],
                        &mut r,
                        false,
                    )
                    .h;
                    gram += &h * h.adjoint() * cplx(system.p_data[u]);
                }
                acc[m] += log2_det_hpd(&gram).expect("Gram matrix is positive definite");
            }
        },
    );
    Ok(sums.into_iter().map(|s| s / n_draws as f64).collect())
}

/// Total uplink power consumption:
/// P_fix + (1/alpha_ue) sum_u p_u + M L_A P(b)
/// + B (tau_u/tau_c) sum_m C_m (rho_ap + rho_bh),
/// with P_fix = sum_m (P_ap_fix + J P_ap_antenna + P_bh_fix) + sum_u P_ue_fix.
/// `l_active = 0` models the no-RIS baseline.
#[allow(clippy::too_many_arguments)]
pub fn total_power(
    model: &PowerModel,
    per_ue_tx_w: &[f64],
    capacities: &[f64],
    l_active: usize,
    n_antennas: usize,
    tau_u: usize,
    tau_c: usize,
) -> f64 {
    let m = capacities.len() as f64;
    let fixed = m * (model.p_ap_fix + n_antennas as f64 * model.p_ap_antenna + model.p_bh_fix)
        + per_ue_tx_w.len() as f64 * model.p_ue_fix;
    let tx: f64 = per_ue_tx_w.iter().sum::<f64>() / model.alpha_ue;
    let ris = m * l_active as f64 * model.p_ris_element;
    let prelog = tau_u as f64 / tau_c as f64;
    let traffic: f64 = capacities
        .iter()
        .map(|c| model.bandwidth * prelog * c * (model.rho_ap + model.rho_bh))
        .sum();
    fixed + tx + ris + traffic
}

/// Energy efficiency in bit/Joule: B * sum-SE / P_tot.
pub fn energy_efficiency(sum_se: f64, p_tot: f64, bandwidth: f64) -> Result<f64> {
    if !(p_tot > 0.0) {
        return Err(invalid("total power must be positive"));
    }
    Ok(bandwidth * sum_se / p_tot)
}
