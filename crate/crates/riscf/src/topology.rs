//! Network geometry, wrap-around distances, path loss, correlated shadow
//! fading and Rician factors.

use nalgebra::DMatrix;

use crate::error::{invalid, Result};
use crate::linalg::real_sym_sqrt_jittered;
use crate::rng::{randn, Rng};

pub const AP_HEIGHT: f64 = 12.5;
pub const RIS_HEIGHT: f64 = 30.0;
pub const UE_HEIGHT: f64 = 1.5;
/// Horizontal AP-to-its-RIS offset in meters.
pub const RIS_AP_OFFSET: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }
}

/// AP / RIS / UE placement over a square area with torus wrap-around.
#[derive(Debug, Clone)]
pub struct NetworkGeometry {
    pub ap_positions: Vec<Point3>,
    pub ris_positions: Vec<Point3>,
    pub ue_positions: Vec<Point3>,
    pub area_side: f64,
}

impl NetworkGeometry {
    pub fn n_aps(&self) -> usize {
        self.ap_positions.len()
    }

    pub fn n_ues(&self) -> usize {
        self.ue_positions.len()
    }
}

/// Uniform i.i.d. AP and UE drops; each RIS sits at a fixed 10 m horizontal
/// offset from its AP in a uniformly random direction, heights fixed.
pub fn generate_geometry(
    m: usize,
    u: usize,
    area_side: f64,
    rng: &mut Rng,
) -> Result<NetworkGeometry> {
    if m == 0 || u == 0 {
        return Err(invalid("need at least one AP and one UE"));
    }
    if !(area_side > 0.0) {
        return Err(invalid("area side must be positive"));
    }
    use rand::RngExt as _;
    let mut ap_positions = Vec::with_capacity(m);
    let mut ris_positions = Vec::with_capacity(m);
    for _ in 0..m {
        let x = rng.random_range(0.0..area_side);
        let y = rng.random_range(0.0..area_side);
        ap_positions.push(Point3::new(x, y, AP_HEIGHT));
        let az = rng.random_range(0.0..std::f64::consts::TAU);
        let rx = (x + RIS_AP_OFFSET * az.cos()).rem_euclid(area_side);
        let ry = (y + RIS_AP_OFFSET * az.sin()).rem_euclid(area_side);
        ris_positions.push(Point3::new(rx, ry, RIS_HEIGHT));
    }
    let ue_positions = (0..u)
        .map(|_| {
            Point3::new(
                rng.random_range(0.0..area_side),
                rng.random_range(0.0..area_side),
                UE_HEIGHT,
            )
        })
        .collect();
    Ok(NetworkGeometry {
        ap_positions,
        ris_positions,
        ue_positions,
        area_side,
    })
}

/// Minimal-image horizontal displacement (dx, dy) from `p` to `q` on the torus.
pub fn wrap_delta(p: &Point3, q: &Point3, area_side: f64) -> (f64, f64) {
    let wrap1 = |d: f64| {
        let mut d = (d + area_side / 2.0).rem_euclid(area_side) - area_side / 2.0;
        if d == -area_side / 2.0 {
            d = area_side / 2.0;
        }
        d
    };
    (wrap1(q.x - p.x), wrap1(q.y - p.y))
}

/// 3-D distance where horizontal coordinates use the torus metric and heights
/// are absolute.
pub fn wrap_distance(p: &Point3, q: &Point3, area_side: f64) -> f64 {
    let (dx, dy) = wrap_delta(p, q, area_side);
    let dz = q.z - p.z;
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// COST-WI NLoS path loss, linear scale: 10^((-34.53 - 38 log10(d) + F)/10).
pub fn path_loss_nlos(d: f64, shadow_f_db: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(invalid("path loss distance must be positive"));
    }
    Ok(10f64.powf((-34.53 - 38.0 * d.log10() + shadow_f_db) / 10.0))
}

/// COST-WI LoS path loss, linear scale: 10^((-30.18 - 26 log10(d) + F)/10).
/// Used for the Rician UE-RIS and RIS-AP links.
pub fn path_loss_los(d: f64, shadow_f_db: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(invalid("path loss distance must be positive"));
    }
    Ok(10f64.powf((-30.18 - 26.0 * d.log10() + shadow_f_db) / 10.0))
}

/// Distance-dependent Rician factor 10^(1.3 - 0.003 d).
pub fn rician_factor(d: f64) -> f64 {
    10f64.powf(1.3 - 0.003 * d)
}

#[derive(Debug, Clone, Copy)]
pub struct ShadowFadingConfig {
    /// Split between the UE-side and AP-side shadowing terms (delta_f).
    pub delta_f: f64,
    /// Shadow standard deviation in dB (delta_sf).
    pub delta_sf_db: f64,
    /// Decorrelation distance in meters (d_dc).
    pub d_dc: f64,
}

impl Default for ShadowFadingConfig {
    fn default() -> Self {
        Self {
            delta_f: 0.5,
            delta_sf_db: 8.0,
            d_dc: 100.0,
        }
    }
}

/// Covariance 2^(-d/d_dc) scaled by delta_sf^2 over a set of node positions.
pub fn shadow_covariance(
    positions: &[Point3],
    area_side: f64,
    delta_sf_db: f64,
    d_dc: f64,
) -> DMatrix<f64> {
    let n = positions.len();
    DMatrix::from_fn(n, n, |i, j| {
        let d = wrap_distance(&positions[i], &positions[j], area_side);
        delta_sf_db * delta_sf_db * 2f64.powf(-d / d_dc)
    })
}

/// Correlated shadow fading F (dB) per (AP m, UE u):
/// F_mu = sqrt(delta_f) a_u + sqrt(1 - delta_f) b_m with
/// cov(a_u, a_u') = delta_sf^2 2^(-d_uu'/d_dc) and likewise for b over APs.
pub fn correlated_shadow_fading(
    geometry: &NetworkGeometry,
    cfg: &ShadowFadingConfig,
    rng: &mut Rng,
) -> Result<DMatrix<f64>> {
    if !(0.0..=1.0).contains(&cfg.delta_f) {
        return Err(invalid("delta_f must lie in [0, 1]"));
    }
    if !(cfg.d_dc > 0.0) {
        return Err(invalid("decorrelation distance must be positive"));
    }
    let cov_u = shadow_covariance(
        &geometry.ue_positions,
        geometry.area_side,
        cfg.delta_sf_db,
        cfg.d_dc,
    );
    let cov_m = shadow_covariance(
        &geometry.ap_positions,
        geometry.area_side,
        cfg.delta_sf_db,
        cfg.d_dc,
    );
    let su = real_sym_sqrt_jittered(&cov_u)?;
    let sm = real_sym_sqrt_jittered(&cov_m)?;
    let a = &su * DMatrix::from_fn(geometry.n_ues(), 1, |_, _| randn(rng));
    let b = &sm * DMatrix::from_fn(geometry.n_aps(), 1, |_, _| randn(rng));
    let (m, u) = (geometry.n_aps(), geometry.n_ues());
    Ok(DMatrix::from_fn(m, u, |mi, ui| {
        cfg.delta_f.sqrt() * a[(ui, 0)] + (1.0 - cfg.delta_f).sqrt() * b[(mi, 0)]
    }))
}

/// How the cascaded (UE-RIS, RIS-AP) links fade.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FadingMode {
    /// Rician factors from the 10^(1.3 - 0.003 d) law.
    Rician,
    /// No LoS on the cascaded links (iota = kappa = 0).
    Rayleigh,
    /// LoS-dominant limit (iota = kappa = 1e6).
    PureLos,
}

/// Rician factor cap implementing the pure-LoS limit.
pub const PURE_LOS_FACTOR: f64 = 1e6;

/// Per-link large-scale quantities, all linear scale.
#[derive(Debug, Clone)]
pub struct LargeScaleParams {
    /// UE-AP gain (trace(R_mu)/J), M x U.
    pub beta: DMatrix<f64>,
    /// UE-RIS path loss, M x U.
    pub xi: DMatrix<f64>,
    /// RIS-AP path loss per AP-RIS pair.
    pub alpha: Vec<f64>,
    /// UE-RIS Rician factor, M x U.
    pub iota: DMatrix<f64>,
    /// RIS-AP Rician factor per pair.
    pub kappa: Vec<f64>,
    /// Shadow fading in dB, M x U (shared by the UE-AP and UE-RIS links).
    pub shadow_f_db: DMatrix<f64>,
}

impl LargeScaleParams {
    /// Cascaded-channel normalization b_mu = alpha xi / ((kappa+1)(iota+1)).
    pub fn b(&self, m: usize, u: usize) -> f64 {
        self.alpha[m] * self.xi[(m, u)]
            / ((self.kappa[m] + 1.0) * (self.iota[(m, u)] + 1.0))
    }

    pub fn from_geometry(
        geometry: &NetworkGeometry,
        shadow: &ShadowFadingConfig,
        fading: FadingMode,
        rng: &mut Rng,
    ) -> Result<Self> {
        let (m, u) = (geometry.n_aps(), geometry.n_ues());
        let f = correlated_shadow_fading(geometry, shadow, rng)?;
        let mut beta = DMatrix::zeros(m, u);
        let mut xi = DMatrix::zeros(m, u);
        let mut iota = DMatrix::zeros(m, u);
        let mut alpha = Vec::with_capacity(m);
        let mut kappa = Vec::with_capacity(m);
        for mi in 0..m {
            let d_ris_ap = wrap_distance(
                &geometry.ris_positions[mi],
                &geometry.ap_positions[mi],
                geometry.area_side,
            );
            alpha.push(path_loss_los(d_ris_ap, 0.0)?);
            kappa.push(match fading {
                FadingMode::Rician => rician_factor(d_ris_ap),
                FadingMode::Rayleigh => 0.0,
                FadingMode::PureLos => PURE_LOS_FACTOR,
            });
            for ui in 0..u {
                let d_ue_ap = wrap_distance(
                    &geometry.ue_positions[ui],
                    &geometry.ap_positions[mi],
                    geometry.area_side,
                );
                let d_ue_ris = wrap_distance(
                    &geometry.ue_positions[ui],
                    &geometry.ris_positions[mi],
                    geometry.area_side,
                );
                beta[(mi, ui)] = path_loss_nlos(d_ue_ap, f[(mi, ui)])?;
                xi[(mi, ui)] = path_loss_los(d_ue_ris, f[(mi, ui)])?;
                iota[(mi, ui)] = match fading {
                    FadingMode::Rician => rician_factor(d_ue_ris),
                    FadingMode::Rayleigh => 0.0,
                    FadingMode::PureLos => PURE_LOS_FACTOR,
                };
            }
        }
        Ok(Self {
            beta,
            xi,
            alpha,
            iota,
            kappa,
            shadow_f_db: f,
        })
    }
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    fn arb_point(area: f64) -> impl Strategy<Value = Point3> {
        (0.0..area, 0.0..area, 0.0..50.0).prop_map(|(x, y, z)| Point3::new(x, y, z))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn wrap_distance_is_a_metric(
            p in arb_point(1000.0),
            q in arb_point(1000.0),
            s in arb_point(1000.0),
        ) {
            let pq = wrap_distance(&p, &q, 1000.0);
            let qp = wrap_distance(&q, &p, 1000.0);
            prop_assert!((pq - qp).abs() < 1e-9);
            prop_assert!(pq >= 0.0);
            let ps = wrap_distance(&p, &s, 1000.0);
            let sq = wrap_distance(&s, &q, 1000.0);
            prop_assert!(pq <= ps + sq + 1e-9);
            // The horizontal part never exceeds half the diagonal of the torus cell.
            let dz = (p.z - q.z).abs();
            let horiz_max = (2.0f64).sqrt() * 500.0;
            prop_assert!(pq * pq <= horiz_max * horiz_max + dz * dz + 1e-6);
        }

        #[test]
        fn path_loss_monotone_pairs(d1 in 1.0..2000.0f64, d2 in 1.0..2000.0f64, f in -10.0..10.0f64) {
            let (lo, hi) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
            prop_assume!(hi > lo * (1.0 + 1e-9));
            prop_assert!(path_loss_nlos(hi, f).unwrap() < path_loss_nlos(lo, f).unwrap());
            prop_assert!(path_loss_los(hi, f).unwrap() < path_loss_los(lo, f).unwrap());
        }
    }
}
