//! Pilot assignment, pilot projection and LMMSE estimation of the aggregated
//! channel, together with the estimate/error covariance matrices.

use crate::error::{invalid, numeric, Result};
use crate::linalg::{cplx, hermitize, hpd_solve, scaled_identity, CMat, CVec};
use crate::rng::{crandn_vector, Rng};

/// Orthogonal pilot assignment and per-UE pilot powers (normalized SNR).
#[derive(Debug, Clone)]
pub struct PilotBook {
    pub tau_p: usize,
    /// Pilot index t_u per UE.
    pub assignment: Vec<usize>,
    /// UEs sharing pilot t, for each t.
    pub cohorts: Vec<Vec<usize>>,
    /// Pilot power p_u per UE.
    pub powers: Vec<f64>,
}

impl PilotBook {
    /// Co-pilot set P_u of UE u (includes u itself).
    pub fn cohort_of(&self, u: usize) -> &[usize] {
        &self.cohorts[self.assignment[u]]
    }

    pub fn shares_pilot(&self, u: usize, k: usize) -> bool {
        self.assignment[u] == self.assignment[k]
    }
}

/// Round-robin pilot assignment t_u = u mod tau_p with uniform pilot power.
pub fn assign_pilots(n_ues: usize, tau_p: usize, power: f64) -> Result<PilotBook> {
    if tau_p == 0 {
        return Err(invalid("pilot length must be at least 1"));
    }
    let assignment: Vec<usize> = (0..n_ues).map(|u| u % tau_p).collect();
    let mut cohorts = vec![Vec::new(); tau_p];
    for (u, &t) in assignment.iter().enumerate() {
        cohorts[t].push(u);
    }
    Ok(PilotBook {
        tau_p,
        assignment,
        cohorts,
        powers: vec![power; n_ues],
    })
}

/// Matrices of the LMMSE channel estimate of one (m, u) link:
/// Psi = sum_{k in P_u} p_k tau_p R_mk + I, Gamma = R Psi^{-1} R,
/// C_bar = p_u tau_p Gamma, Lambda = R - C_bar.
#[derive(Debug, Clone)]
pub struct EstimationMatrices {
    pub psi: CMat,
    pub gamma: CMat,
    pub lambda: CMat,
    pub c_bar: CMat,
}

pub fn estimation_matrices(
    r_h_all: &[CMat],
    book: &PilotBook,
    u: usize,
    tau_p: f64,
) -> Result<EstimationMatrices> {
    let j = r_h_all[u].nrows();
    let mut psi = scaled_identity(j, 1.0);
    for &k in book.cohort_of(u) {
        psi += &r_h_all[k] * cplx(book.powers[k] * tau_p);
    }
    let x = hpd_solve(&psi, &r_h_all[u])
        .map_err(|e| numeric(format!("Psi solve for UE {u}: {e}")))?;
    let gamma = hermitize(&(&r_h_all[u] * &x));
    let c_bar = &gamma * cplx(book.powers[u] * tau_p);
    let lambda = hermitize(&(&r_h_all[u] - &c_bar));
    Ok(EstimationMatrices {
        psi,
        gamma,
        lambda,
        c_bar,
    })
}

/// Pilot-projected received training signal of pilot t at one AP:
/// y_t = sum_{k: t_k = t} sqrt(p_k) tau_p h_k + n, n ~ CN(0, tau_p I_J).
/// Co-pilot UEs share this projection exactly.
pub fn pilot_projection(
    h_all: &[CVec],
    book: &PilotBook,
    t: usize,
    j: usize,
    rng: &mut Rng,
) -> CVec {
    let mut y = crandn_vector(rng, j) * cplx((book.tau_p as f64).sqrt());
    for &k in &book.cohorts[t] {
        y += &h_all[k] * cplx(book.powers[k].sqrt() * book.tau_p as f64);
    }
    y
}

/// Deterministic mean of the projection: y_bar = sum_{k in P_u} sqrt(p_k) tau_p h_bar_k.
pub fn projection_mean(h_bar_all: &[CVec], book: &PilotBook, u: usize, j: usize) -> CVec {
    let mut y = CVec::zeros(j);
    for &k in book.cohort_of(u) {
        y += &h_bar_all[k] * cplx(book.powers[k].sqrt() * book.tau_p as f64);
    }
    y
}

/// LMMSE estimate h_hat = h_bar + sqrt(p_u) R Psi^{-1} (y - y_bar).
pub fn lmmse_estimate(
    y: &CVec,
    y_bar: &CVec,
    h_bar: &CVec,
    r_h: &CMat,
    psi: &CMat,
    p_u: f64,
) -> Result<CVec> {
    let innovation = y - y_bar;
    let filtered = crate::linalg::hpd_solve_vec(psi, &innovation)?;
    Ok(h_bar + r_h * filtered * cplx(p_u.sqrt()))
}

/// Precomputed estimation filter sqrt(p_u) R Psi^{-1} for repeated trials.
pub fn estimation_filter(r_h: &CMat, psi: &CMat, p_u: f64) -> Result<CMat> {
    // (Psi^{-1} R)^H = R Psi^{-1} for Hermitian R, Psi.
    let x = hpd_solve(psi, r_h)?;
    Ok(x.adjoint() * cplx(p_u.sqrt()))
}
