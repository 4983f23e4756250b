//! Assembles one network drop into the statistics every downstream stage
//! consumes: geometry, large-scale gains, steering vectors, correlation
//! matrices and their square roots, the RP codebook and the pilot book.

use num_complex::Complex64;

use crate::channel::{
    aggregated_stats, build_rp_codebook, AggregatedChannelStats, LinkGains, LinkInputs,
    PhaseShiftConfig, ReflectionPatternCodebook, SqrtsView,
};
use crate::error::{invalid, Result};
use crate::estimation::{assign_pilots, estimation_matrices, EstimationMatrices, PilotBook};
use crate::linalg::{cplx, hermitian_sqrt, hermitize, hpd_solve, CMat, CVec};
use crate::rng::{self, Rng};
use crate::spatial::{
    ap_correlation, local_scattering_correlation, ris_correlation_scaled, ris_grid_positions,
    ula_steering, uspa_steering, CorrelationSet,
};
use crate::topology::{
    generate_geometry, wrap_delta, FadingMode, LargeScaleParams, NetworkGeometry,
    ShadowFadingConfig,
};

/// Converts a dBm figure to watts.
pub fn dbm_to_watt(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Static system parameters. Defaults follow the evaluated setup: 20 APs with
/// 4 antennas, 5 UEs, 64-element RISs in 4 blocks, 200 mW per UE, -94 dBm
/// noise over 20 MHz.
#[derive(Debug, Clone)]
pub struct SystemConfig {
    pub n_aps: usize,
    pub n_antennas: usize,
    pub n_ues: usize,
    pub n_elements: usize,
    pub n_blocks: usize,
    pub n_active_blocks: usize,
    pub tau_c: usize,
    pub tau_p: usize,
    pub area_side: f64,
    pub wavelength: f64,
    /// AP antenna spacing in wavelengths.
    pub ap_spacing: f64,
    /// RIS element spacing in wavelengths.
    pub ris_spacing: f64,
    /// Angular standard deviation of the local scattering model, radians.
    pub asd: f64,
    pub shadow: ShadowFadingConfig,
    pub fading: FadingMode,
    /// Per-UE transmit power in watts (pilots and data).
    pub tx_power_w: f64,
    pub noise_dbm: f64,
    pub bandwidth_hz: f64,
    /// When false the cascaded link is removed entirely (conventional
    /// cell-free baseline): xi and alpha are forced to zero.
    pub ris_enabled: bool,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            n_aps: 20,
            n_antennas: 4,
            n_ues: 5,
            n_elements: 64,
            n_blocks: 4,
            n_active_blocks: 4,
            tau_c: 200,
            tau_p: 2,
            area_side: 1000.0,
            wavelength: 0.15,
            ap_spacing: 0.5,
            ris_spacing: 0.25,
            asd: 15f64.to_radians(),
            shadow: ShadowFadingConfig::default(),
            fading: FadingMode::Rician,
            tx_power_w: 0.2,
            noise_dbm: -94.0,
            bandwidth_hz: 20e6,
            ris_enabled: true,
        }
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_aps == 0 || self.n_ues == 0 || self.n_antennas == 0 {
            return Err(invalid("network dimensions must be positive"));
        }
        if self.n_blocks == 0 || self.n_active_blocks == 0 || self.n_active_blocks > self.n_blocks
        {
            return Err(invalid("need 1 <= K <= G"));
        }
        if self.n_elements == 0 || self.n_elements % self.n_blocks != 0 {
            return Err(invalid("L must be a positive multiple of G"));
        }
        let side = (self.n_elements as f64).sqrt() as usize;
        if side * side != self.n_elements {
            return Err(invalid("L must be a perfect square (sqrt(L) x sqrt(L) array)"));
        }
        if self.tau_p == 0 || self.tau_p > self.tau_c {
            return Err(invalid("need 1 <= tau_p <= tau_c"));
        }
        Ok(())
    }

    pub fn noise_w(&self) -> f64 {
        dbm_to_watt(self.noise_dbm)
    }

    /// Transmit SNR: power normalized by the noise floor.
    pub fn normalized_power(&self) -> f64 {
        self.tx_power_w / self.noise_w()
    }

    /// Uplink data fraction tau_u / tau_c.
    pub fn prelog(&self) -> f64 {
        (self.tau_c - self.tau_p) as f64 / self.tau_c as f64
    }
}

/// Whether statistics condition on one reflection pattern or average over the
/// uniform codebook prior.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RpMode {
    Average,
    Fixed(usize),
}

/// All deterministic per-drop quantities.
pub struct SystemStatistics {
    pub cfg: SystemConfig,
    pub geometry: NetworkGeometry,
    pub gains: LargeScaleParams,
    pub codebook: ReflectionPatternCodebook,
    pub pilots: PilotBook,
    /// Normalized per-UE data power (same as pilot power here).
    pub p_data: Vec<f64>,
    /// AP-side correlation (unit gain), shared by all APs.
    pub r_ap: CMat,
    /// conj(R_AP^{1/2}), the AP factor of the cascaded NLoS sampler.
    pub sqrt_r_ap_conj: CMat,
    /// Per pattern: d_H d_V-scaled RIS correlation over active elements.
    pub r_ris: Vec<CMat>,
    pub sqrt_r_ris: Vec<CMat>,
    /// Per AP: LoS array response toward its RIS.
    pub a_ap: Vec<CVec>,
    /// Per AP, per pattern: RIS-side LoS response toward the AP.
    pub a_ris: Vec<Vec<CVec>>,
    /// Per (m, u): direct-link correlation with beta embedded, and its root.
    pub r_direct: Vec<Vec<CMat>>,
    pub sqrt_r_direct: Vec<Vec<CMat>>,
    /// Per (m, u), per pattern: UE-side LoS response at the RIS.
    pub z_bar: Vec<Vec<Vec<CVec>>>,
}

impl SystemStatistics {
    /// Draws geometry and shadow fading from `seed` and precomputes every
    /// deterministic statistic of the drop.
    pub fn build(cfg: SystemConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut geo_rng = rng::stream(seed, 0);
        let geometry = generate_geometry(cfg.n_aps, cfg.n_ues, cfg.area_side, &mut geo_rng)?;
        let mut shadow_rng = rng::stream(seed, 1);
        let gains =
            LargeScaleParams::from_geometry(&geometry, &cfg.shadow, cfg.fading, &mut shadow_rng)?;
        Self::from_parts(cfg, geometry, gains)
    }

    /// Builds the statistics for an externally supplied drop.
    pub fn from_parts(
        cfg: SystemConfig,
        geometry: NetworkGeometry,
        mut gains: LargeScaleParams,
    ) -> Result<Self> {
        cfg.validate()?;
        if !cfg.ris_enabled {
            gains.xi.fill(0.0);
            gains.alpha.fill(0.0);
        }
        let (m_aps, n_ues, j) = (cfg.n_aps, cfg.n_ues, cfg.n_antennas);
        let n_per_block = cfg.n_elements / cfg.n_blocks;
        let codebook = build_rp_codebook(cfg.n_blocks, cfg.n_active_blocks, n_per_block)?;
        let p_norm = cfg.normalized_power();
        let pilots = assign_pilots(n_ues, cfg.tau_p, p_norm)?;
        let p_data = vec![p_norm; n_ues];

        let p_cols = (j / 2).max(1);
        let r_ap = ap_correlation(j, p_cols, 1.0, cfg.ap_spacing)?;
        let sqrt_r_ap_conj = hermitian_sqrt(&r_ap)?.conjugate();

        let side = (cfg.n_elements as f64).sqrt() as usize;
        let d_elem = cfg.ris_spacing * cfg.wavelength;
        let positions = ris_grid_positions(side, d_elem, d_elem);
        let mut r_ris = Vec::with_capacity(codebook.c());
        let mut sqrt_r_ris = Vec::with_capacity(codebook.c());
        for elems in &codebook.element_sets {
            let r = ris_correlation_scaled(&positions, elems, d_elem, d_elem, cfg.wavelength);
            sqrt_r_ris.push(hermitian_sqrt(&r)?);
            r_ris.push(r);
        }

        let area = geometry.area_side;
        let azel = |from: &crate::topology::Point3, to: &crate::topology::Point3| {
            let (dx, dy) = wrap_delta(from, to, area);
            let horiz = (dx * dx + dy * dy).sqrt();
            let az = dy.atan2(dx);
            let el = (to.z - from.z).atan2(horiz);
            (az, el)
        };

        let mut a_ap = Vec::with_capacity(m_aps);
        let mut a_ris = Vec::with_capacity(m_aps);
        let mut r_direct = Vec::with_capacity(m_aps);
        let mut sqrt_r_direct = Vec::with_capacity(m_aps);
        let mut z_bar = Vec::with_capacity(m_aps);
        for m in 0..m_aps {
            let ris = &geometry.ris_positions[m];
            let ap = &geometry.ap_positions[m];
            // AoA azimuth at the AP from its RIS, and AoD at the RIS toward the AP.
            let (ap_az, _) = azel(ap, ris);
            a_ap.push(ula_steering(j, ap_az, cfg.ap_spacing));
            let (dep_az, dep_el) = azel(ris, ap);
            let per_pattern: Vec<CVec> = codebook
                .element_sets
                .iter()
                .map(|elems| uspa_steering(side, elems, dep_az, dep_el, cfg.ris_spacing))
                .collect::<Result<_>>()?;
            a_ris.push(per_pattern);

            let mut row_r = Vec::with_capacity(n_ues);
            let mut row_s = Vec::with_capacity(n_ues);
            let mut row_z = Vec::with_capacity(n_ues);
            for u in 0..n_ues {
                let ue = &geometry.ue_positions[u];
                let (ue_az, _) = azel(ap, ue);
                let r = local_scattering_correlation(
                    j,
                    ue_az,
                    cfg.asd,
                    gains.beta[(m, u)],
                    cfg.ap_spacing,
                )?;
                row_s.push(hermitian_sqrt(&r)?);
                row_r.push(r);
                let (arr_az, arr_el) = azel(ris, ue);
                let per_pattern: Vec<CVec> = codebook
                    .element_sets
                    .iter()
                    .map(|elems| uspa_steering(side, elems, arr_az, arr_el, cfg.ris_spacing))
                    .collect::<Result<_>>()?;
                row_z.push(per_pattern);
            }
            r_direct.push(row_r);
            sqrt_r_direct.push(row_s);
            z_bar.push(row_z);
        }

        Ok(Self {
            cfg,
            geometry,
            gains,
            codebook,
            pilots,
            p_data,
            r_ap,
            sqrt_r_ap_conj,
            r_ris,
            sqrt_r_ris,
            a_ap,
            a_ris,
            r_direct,
            sqrt_r_direct,
            z_bar,
        })
    }

    pub fn n_aps(&self) -> usize {
        self.cfg.n_aps
    }

    pub fn n_ues(&self) -> usize {
        self.cfg.n_ues
    }

    pub fn link_gains(&self, m: usize, u: usize) -> LinkGains {
        LinkGains {
            xi: self.gains.xi[(m, u)],
            alpha: self.gains.alpha[m],
            iota: self.gains.iota[(m, u)],
            kappa: self.gains.kappa[m],
        }
    }

    pub fn link_inputs(&self, m: usize, u: usize, c: usize) -> LinkInputs<'_> {
        LinkInputs {
            gains: self.link_gains(m, u),
            z_bar: &self.z_bar[m][u][c],
            a_ris_ap: &self.a_ris[m][c],
            a_ap: &self.a_ap[m],
            corr: CorrelationSet {
                r_direct: &self.r_direct[m][u],
                r_ris: &self.r_ris[c],
                r_ap: &self.r_ap,
            },
        }
    }

    pub fn sqrts_view(&self, m: usize, u: usize, c: usize) -> SqrtsView<'_> {
        SqrtsView {
            direct: &self.sqrt_r_direct[m][u],
            ris: &self.sqrt_r_ris[c],
            ap_conj: &self.sqrt_r_ap_conj,
        }
    }

    pub fn aggregated_stats(
        &self,
        m: usize,
        u: usize,
        c: usize,
        theta_m: &PhaseShiftConfig,
    ) -> Result<AggregatedChannelStats> {
        aggregated_stats(&self.link_inputs(m, u, c), theta_m)
    }

    /// Per-(AP, pattern) statistics shared by all trials of a Monte Carlo run
    /// and by the closed-form path.
    pub fn block_stats(&self, m: usize, c: usize, theta_m: &PhaseShiftConfig) -> Result<BlockStats> {
        let n_ues = self.n_ues();
        let tau_p = self.cfg.tau_p as f64;
        let stats: Vec<AggregatedChannelStats> = (0..n_ues)
            .map(|u| self.aggregated_stats(m, u, c, theta_m))
            .collect::<Result<_>>()?;
        let r_h_all: Vec<CMat> = stats.iter().map(|s| s.r_h.clone()).collect();
        let mut est = Vec::with_capacity(n_ues);
        let mut x_filter = Vec::with_capacity(n_ues);
        let mut y_bar = Vec::with_capacity(n_ues);
        for u in 0..n_ues {
            est.push(estimation_matrices(&r_h_all, &self.pilots, u, tau_p)?);
            // X_u = Psi_u^{-1} R_u; the LMMSE filter is sqrt(p_u) X_u^H.
            let x = hpd_solve(&est[u].psi, &r_h_all[u])?;
            x_filter.push(x);
            let mut y = CVec::zeros(self.cfg.n_antennas);
            for &k in self.pilots.cohort_of(u) {
                y += &stats[k].h_bar * cplx(self.pilots.powers[k].sqrt() * tau_p);
            }
            y_bar.push(y);
        }
        Ok(BlockStats {
            stats,
            est,
            x_filter,
            y_bar,
        })
    }

    /// Block statistics for all (m, pattern) pairs under `phases`.
    pub fn all_block_stats(&self, phases: &[PhaseShiftConfig], rp: RpMode) -> Result<Vec<Vec<BlockStats>>> {
        let patterns: Vec<usize> = match rp {
            RpMode::Average => (0..self.codebook.c()).collect(),
            RpMode::Fixed(c) => {
                if c >= self.codebook.c() {
                    return Err(invalid(format!(
                        "fixed pattern {c} outside codebook of size {}",
                        self.codebook.c()
                    )));
                }
                vec![c]
            }
        };
        (0..self.n_aps())
            .map(|m| {
                patterns
                    .iter()
                    .map(|&c| self.block_stats(m, c, &phases[m]))
                    .collect()
            })
            .collect()
    }
}

/// Statistics of one (AP, pattern) pair under fixed phases.
pub struct BlockStats {
    /// Aggregated-channel statistics per UE.
    pub stats: Vec<AggregatedChannelStats>,
    /// Estimation matrices per UE.
    pub est: Vec<EstimationMatrices>,
    /// X_u = Psi_u^{-1} R_u per UE.
    pub x_filter: Vec<CMat>,
    /// Mean pilot projection per UE.
    pub y_bar: Vec<CVec>,
}

impl BlockStats {
    /// LMMSE estimate of UE u from its pilot projection.
    pub fn estimate(&self, u: usize, y: &CVec, p_u: f64) -> CVec {
        &self.stats[u].h_bar
            + self.x_filter[u].adjoint() * (y - &self.y_bar[u]) * cplx(p_u.sqrt())
    }
}

/// Phase configurations for every RIS: all zeros.
pub fn zero_phases(system: &SystemStatistics) -> Vec<PhaseShiftConfig> {
    vec![PhaseShiftConfig::zeros(system.codebook.l_active()); system.n_aps()]
}

/// Independent uniform random phases per RIS.
pub fn random_phases(system: &SystemStatistics, rng: &mut Rng) -> Vec<PhaseShiftConfig> {
    (0..system.n_aps())
        .map(|_| {
            PhaseShiftConfig::new(
                (0..system.codebook.l_active())
                    .map(|_| rng::uniform_phase(rng))
                    .collect(),
            )
        })
        .collect()
}

/// Deterministic phase design: each RIS aligns the LoS cascade of pattern 0
/// for its nearest UE, making every per-element phasor of
/// a_ris^H Phi z_bar real positive.
pub fn aligned_phases(system: &SystemStatistics) -> Vec<PhaseShiftConfig> {
    let area = system.geometry.area_side;
    (0..system.n_aps())
        .map(|m| {
            let ris = &system.geometry.ris_positions[m];
            let nearest = (0..system.n_ues())
                .min_by(|&a, &b| {
                    let da = crate::topology::wrap_distance(ris, &system.geometry.ue_positions[a], area);
                    let db = crate::topology::wrap_distance(ris, &system.geometry.ue_positions[b], area);
                    da.total_cmp(&db)
                })
                .unwrap();
            let a = &system.a_ris[m][0];
            let z = &system.z_bar[m][nearest][0];
            let theta = (0..system.codebook.l_active())
                .map(|l| {
                    let term: Complex64 = a[l].conj() * z[l];
                    -term.arg()
                })
                .collect();
            PhaseShiftConfig::new(theta)
        })
        .collect()
}

/// Checks the Hermitian/PSD invariants of all produced statistics; used by
/// tests rather than production paths.
pub fn stats_sanity(stats: &AggregatedChannelStats) -> bool {
    crate::linalg::max_hermitian_asymmetry(&stats.r_h) < 1e-10
        && crate::linalg::min_eigenvalue(&hermitize(&stats.r_h))
            > -1e-9 * stats.r_h.diagonal().iter().map(|z| z.re).sum::<f64>().max(1e-300)
}
