//! Closed-form uplink SINR under MR combining and LSFD, term by term.
//!
//! For every (AP m, UE pair (u, k), pattern c) the statistics reduce to two
//! scalars:
//!   q_mk  = E{h_hat_mu^H h_mk}
//!         = h_bar_mu^H h_bar_mk + 1{k in P_u} sqrt(p_u p_k) tau_p w_uk,m,
//!   nu_mk = Var(h_hat_mu^H h_mk)
//!         = h_bar_mu^H R_mk h_bar_mu + h_bar_mk^H C_bar_mu h_bar_mk
//!           + tr(C_bar_mu R_mk),
//! with w_uk,m = tr(R_mk Psi_mu^{-1} R_mu). Channels at different APs are
//! independent, so E{g_uk g_uk^H} = q q^H + diag(nu) exactly, and the SINR
//! is the same generalized Rayleigh quotient evaluated on these closed-form
//! statistics. For k = u the scalars collapse onto the desired-signal term
//! q_mu = xi_bar_mu = ||h_bar||^2 + p_u tau_p tr(Gamma_mu).
//!
//! The compact as-printed variant (diagonal non-coherent matrices plus a
//! separate coherent term, cross-AP LoS products discarded) is kept alongside
//! as `closed_form_sinr_printed`; `printed_discrepancy` quantifies the
//! gap between the two.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::channel::PhaseShiftConfig;
use crate::combining::{optimal_lsfd_weights, sinr_with_weights};
use crate::error::{invalid, numeric, Result};
use crate::linalg::{cplx, hermitian_sqrt, quad_form, trace, trace_product, CMat, CVec};
use crate::rng::{self, parallel_trials};
use crate::system::{RpMode, SystemStatistics};

/// Every term of the closed-form SINR of one UE, RP-averaged, exposed
/// individually so each expectation can be checked against brute force.
#[derive(Debug, Clone)]
pub struct SinrBreakdown {
    pub u: usize,
    /// Desired-signal terms xi_bar_mu per AP.
    pub xi_bar: DVector<f64>,
    /// ||h_bar_mu||^2 per AP (RP-averaged).
    pub delta: DVector<f64>,
    /// ||h_bar_mu||^4 per AP (RP-averaged), the Delta_u^2 diagonal.
    pub delta_sq: DVector<f64>,
    /// Non-coherent diagonal mu_uk,m per k (nu + |LoS product|^2).
    pub mu: Vec<DVector<f64>>,
    /// Pilot-contamination traces w_uk,m per k (zero when k is not co-pilot).
    pub w: Vec<CVec>,
    /// Exact expected gains q_mk = E{h_hat_mu^H h_mk} per k.
    pub q: Vec<CVec>,
    /// Exact second moments E{|h_hat_mu^H h_mk|^2} per k.
    pub second_moment: Vec<DVector<f64>>,
    /// Which UEs share u's pilot (including u).
    pub copilot: Vec<bool>,
    /// Pilot powers and length, retained for the coherent term.
    pub pilot_powers: Vec<f64>,
    pub tau_p: f64,
}

impl SinrBreakdown {
    /// Closed-form E{g_uk g_uk^H} = q q^H + diag(E|g|^2 - |q|^2).
    pub fn omega(&self, k: usize) -> CMat {
        let m = self.xi_bar.len();
        let q = &self.q[k];
        let mut out = q * q.adjoint();
        for i in 0..m {
            let var = (self.second_moment[k][i] - q[i].norm_sqr()).max(0.0);
            out[(i, i)] += cplx(var);
        }
        out
    }

    /// Closed-form E{g_uu} (real by construction).
    pub fn g_mean(&self) -> CVec {
        CVec::from_fn(self.xi_bar.len(), |m, _| cplx(self.xi_bar[m]))
    }

    /// Coherent interference L_uk = p_u p_k tau_p^2 |tr(C_u W_uk)|^2, with
    /// the weight matrix unconjugated exactly as printed.
    pub fn coherent_l(&self, k: usize, c: &CVec) -> Result<f64> {
        if !self.copilot[k] || k == self.u {
            return Err(invalid(format!(
                "coherent interference only defined for co-pilot k != u (k = {k})"
            )));
        }
        let mut tr = Complex64::default();
        for m in 0..c.len() {
            tr += c[m] * self.w[k][m];
        }
        Ok(self.pilot_powers[self.u] * self.pilot_powers[k] * self.tau_p * self.tau_p
            * tr.norm_sqr())
    }
}

/// Per-UE closed-form breakdowns under the given phases, averaged over the
/// codebook prior (or conditioned on one pattern).
pub fn closed_form_breakdowns(
    system: &SystemStatistics,
    phases: &[PhaseShiftConfig],
    rp: RpMode,
) -> Result<Vec<SinrBreakdown>> {
    let m_aps = system.n_aps();
    let n_ues = system.n_ues();
    let tau = system.cfg.tau_p as f64;
    let blocks = system.all_block_stats(phases, rp)?;
    let n_slots = blocks[0].len();
    let weight = 1.0 / n_slots as f64;

    let mut out = Vec::with_capacity(n_ues);
    for u in 0..n_ues {
        let p_u = system.pilots.powers[u];
        let mut xi_bar = DVector::zeros(m_aps);
        let mut delta = DVector::zeros(m_aps);
        let mut delta_sq = DVector::zeros(m_aps);
        let mut mu = vec![DVector::zeros(m_aps); n_ues];
        let mut w = vec![CVec::zeros(m_aps); n_ues];
        let mut q = vec![CVec::zeros(m_aps); n_ues];
        let mut second = vec![DVector::zeros(m_aps); n_ues];
        for m in 0..m_aps {
            for block in &blocks[m] {
                let su = &block.stats[u];
                let eu = &block.est[u];
                let xb = desired_signal(&su.h_bar, &eu.gamma, p_u, tau);
                xi_bar[m] += weight * xb;
                let hb2 = su.h_bar.norm_squared();
                delta[m] += weight * hb2;
                delta_sq[m] += weight * hb2 * hb2;
                for k in 0..n_ues {
                    let sk = &block.stats[k];
                    let lo = (su.h_bar.adjoint() * &sk.h_bar)[(0, 0)];
                    let nu = link_variance(&su.h_bar, &sk.h_bar, &sk.r_h, &eu.c_bar);
                    let qi = if system.pilots.shares_pilot(u, k) {
                        let wt = trace_product(&sk.r_h, &block.x_filter[u]);
                        w[k][m] += cplx(weight) * wt;
                        lo + wt * cplx((p_u * system.pilots.powers[k]).sqrt() * tau)
                    } else {
                        lo
                    };
                    q[k][m] += cplx(weight) * qi;
                    second[k][m] += weight * (qi.norm_sqr() + nu);
                    mu[k][m] += weight * (nu + lo.norm_sqr());
                }
            }
        }
        out.push(SinrBreakdown {
            u,
            xi_bar,
            delta,
            delta_sq,
            mu,
            w,
            q,
            second_moment: second,
            copilot: (0..n_ues).map(|k| system.pilots.shares_pilot(u, k)).collect(),
            pilot_powers: system.pilots.powers.clone(),
            tau_p: tau,
        })
    }
    Ok(out)
}

/// Desired-signal term xi_bar = ||h_bar||^2 + p_u tau_p tr(Gamma).
pub fn desired_signal(h_bar: &CVec, gamma: &CMat, p_u: f64, tau_p: f64) -> f64 {
    h_bar.norm_squared() + p_u * tau_p * trace(gamma).re
}

/// Variance of h_hat_mu^H h_mk (any pilot relation):
/// h_bar_u^H R_k h_bar_u + h_bar_k^H C_bar_u h_bar_k + tr(C_bar_u R_k).
pub fn link_variance(h_bar_u: &CVec, h_bar_k: &CVec, r_k: &CMat, c_bar_u: &CMat) -> f64 {
    quad_form(h_bar_u, r_k, h_bar_u).re
        + quad_form(h_bar_k, c_bar_u, h_bar_k).re
        + trace_product(c_bar_u, r_k).re
}

/// Non-coherent interference diagonal mu_uk,m: the link variance plus the
/// squared LoS product. The estimate covariance C_bar_mu = p_u tau_p
/// Gamma_mu carries UE u's own pilot power.
pub fn noncoherent_interference(
    h_bar_u: &CVec,
    h_bar_k: &CVec,
    r_k: &CMat,
    c_bar_u: &CMat,
) -> f64 {
    let lo = (h_bar_u.adjoint() * h_bar_k)[(0, 0)];
    link_variance(h_bar_u, h_bar_k, r_k, c_bar_u) + lo.norm_sqr()
}

/// Exact expected gain q_mk = E{h_hat_mu^H h_mk}; the pilot-contamination
/// trace appears only for co-pilot UEs.
pub fn expected_gain(
    h_bar_u: &CVec,
    h_bar_k: &CVec,
    r_u: &CMat,
    r_k: &CMat,
    psi_u: &CMat,
    p_u: f64,
    p_k: f64,
    tau_p: f64,
    copilot: bool,
) -> Result<Complex64> {
    let lo = (h_bar_u.adjoint() * h_bar_k)[(0, 0)];
    if !copilot {
        return Ok(lo);
    }
    let x = crate::linalg::hpd_solve(psi_u, r_u)?;
    Ok(lo + trace_product(r_k, &x) * cplx((p_u * p_k).sqrt() * tau_p))
}

/// E{|h_hat_mu^H h_hat_mu|^2} = xi_bar^2 + 2 h_bar^H C_bar h_bar + tr(C_bar^2).
pub fn estimate_fourth_moment(h_bar: &CVec, c_bar: &CMat) -> f64 {
    let xi = h_bar.norm_squared() + trace(c_bar).re;
    xi * xi + 2.0 * quad_form(h_bar, c_bar, h_bar).re + trace_product(c_bar, c_bar).re
}

/// E{|h_hat_mu^H h_mu|^2} via the estimate/error split:
/// fourth moment plus E{h_hat^H Lambda h_hat}.
pub fn self_gain_second_moment(h_bar: &CVec, c_bar: &CMat, lambda: &CMat) -> f64 {
    estimate_fourth_moment(h_bar, c_bar)
        + quad_form(h_bar, lambda, h_bar).re
        + trace_product(c_bar, lambda).re
}

/// Exact E{|sum_m c_m^* g_uk,m|^2} from the per-AP gains and variances.
pub fn weighted_interference(c: &CVec, q: &CVec, nu: &DVector<f64>) -> f64 {
    let coherent = (c.adjoint() * q)[(0, 0)].norm_sqr();
    let mut incoherent = 0.0;
    for m in 0..c.len() {
        incoherent += c[m].norm_sqr() * nu[m];
    }
    coherent + incoherent
}

/// Pilot relation of the interfering UE.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UeRelation {
    Same,
    Copilot,
    Orthogonal,
}

/// Per-AP inputs of the reference interference route.
pub struct ApTermInputs<'a> {
    pub h_bar_u: &'a CVec,
    pub h_bar_k: &'a CVec,
    pub r_u: &'a CMat,
    pub r_k: &'a CMat,
    pub gamma_u: &'a CMat,
    pub c_bar_u: &'a CMat,
    pub c_bar_k: &'a CMat,
    pub lambda_k: &'a CMat,
    pub psi_u: &'a CMat,
    pub p_u: f64,
    pub p_k: f64,
    pub tau_p: f64,
}

/// The per-relation interference table, written out case by case as an independent
/// algebraic route: same-AP second moments from the estimate/error split and
/// cross-AP products from the per-case expected gains.
pub fn reference_weighted_interference(
    c: &CVec,
    per_ap: &[ApTermInputs<'_>],
    relation: UeRelation,
) -> Result<f64> {
    let m_aps = c.len();
    if per_ap.len() != m_aps {
        return Err(invalid("weight/AP count mismatch"));
    }
    let mut mean = vec![Complex64::default(); m_aps];
    let mut second = vec![0.0f64; m_aps];
    for (m, t) in per_ap.iter().enumerate() {
        match relation {
            UeRelation::Same => {
                let xi = t.h_bar_u.norm_squared() + trace(t.c_bar_u).re;
                mean[m] = cplx(xi);
                second[m] = self_gain_second_moment(t.h_bar_u, t.c_bar_u, t.lambda_k);
            }
            UeRelation::Copilot => {
                let q = expected_gain(
                    t.h_bar_u, t.h_bar_k, t.r_u, t.r_k, t.psi_u, t.p_u, t.p_k, t.tau_p, true,
                )?;
                mean[m] = q;
                // E|h_hat_u^H h_hat_k|^2 + E|h_hat_u^H err_k|^2.
                let est_part = q.norm_sqr()
                    + quad_form(t.h_bar_u, t.c_bar_k, t.h_bar_u).re
                    + quad_form(t.h_bar_k, t.c_bar_u, t.h_bar_k).re
                    + trace_product(t.c_bar_u, t.c_bar_k).re;
                let err_part = quad_form(t.h_bar_u, t.lambda_k, t.h_bar_u).re
                    + trace_product(t.c_bar_u, t.lambda_k).re;
                second[m] = est_part + err_part;
            }
            UeRelation::Orthogonal => {
                let lo = (t.h_bar_u.adjoint() * t.h_bar_k)[(0, 0)];
                mean[m] = lo;
                // E{h_hat^H (h_bar_k h_bar_k^H + R_k) h_hat}.
                let mix = t.h_bar_k * t.h_bar_k.adjoint() + t.r_k;
                second[m] = quad_form(t.h_bar_u, &mix, t.h_bar_u).re
                    + trace_product(t.c_bar_u, &mix).re;
            }
        }
    }
    let mut total = 0.0;
    for m in 0..m_aps {
        total += c[m].norm_sqr() * second[m];
        for n in 0..m_aps {
            if n != m {
                total += (c[m].conj() * c[n] * mean[m] * mean[n].conj()).re;
            }
        }
    }
    Ok(total)
}

/// Exact closed-form SINR for explicit weights.
pub fn closed_form_sinr(
    bd: &SinrBreakdown,
    c: &CVec,
    p_data: &[f64],
    sigma2: f64,
) -> Result<f64> {
    let omegas: Vec<CMat> = (0..p_data.len()).map(|k| bd.omega(k)).collect();
    sinr_with_weights(&bd.g_mean(), &omegas, &bd.xi_bar, p_data, sigma2, bd.u, c)
}

/// Optimal LSFD weights and SINR from the closed-form statistics.
pub fn closed_form_optimal(
    bd: &SinrBreakdown,
    p_data: &[f64],
    sigma2: f64,
) -> Result<(CVec, f64)> {
    let omegas: Vec<CMat> = (0..p_data.len()).map(|k| bd.omega(k)).collect();
    optimal_lsfd_weights(&bd.g_mean(), &omegas, &bd.xi_bar, p_data, sigma2, bd.u)
}

/// The compact published form: diagonal non-coherent
/// matrices T_uk, coherent term L_uk, and D_u = C^H (sigma^2 Upsilon -
/// p_u Delta^2) C. Cross-AP LoS products are absent by construction.
pub fn closed_form_sinr_printed(
    bd: &SinrBreakdown,
    c: &CVec,
    p_data: &[f64],
    sigma2: f64,
) -> Result<f64> {
    let m_aps = c.len();
    let mut num_tr = Complex64::default();
    for m in 0..m_aps {
        num_tr += c[m].conj() * cplx(bd.xi_bar[m]);
    }
    let num = p_data[bd.u] * num_tr.norm_sqr();

    let mut den = 0.0;
    for (k, &p_k) in p_data.iter().enumerate() {
        for m in 0..m_aps {
            den += p_k * c[m].norm_sqr() * bd.mu[k][m];
        }
        if bd.copilot[k] && k != bd.u {
            den += p_k * bd.coherent_l(k, c)?;
        }
    }
    for m in 0..m_aps {
        den += c[m].norm_sqr() * (sigma2 * bd.xi_bar[m] - p_data[bd.u] * bd.delta_sq[m]);
    }
    if !(den > 0.0) {
        return Err(numeric(format!("nonpositive printed-form denominator {den}")));
    }
    Ok(num / den)
}

/// Relative gap between the exact and as-printed closed forms at the exact
/// form's optimal weights.
pub fn printed_discrepancy(bd: &SinrBreakdown, p_data: &[f64], sigma2: f64) -> Result<f64> {
    let (c, exact) = closed_form_optimal(bd, p_data, sigma2)?;
    let printed = closed_form_sinr_printed(bd, &c, p_data, sigma2)?;
    Ok((printed - exact).abs() / exact.max(1e-300))
}

/// Per-UE closed-form SE under optimal LSFD weights.
pub fn se_closed_form(
    system: &SystemStatistics,
    phases: &[PhaseShiftConfig],
    rp: RpMode,
) -> Result<Vec<f64>> {
    let tau_u = system.cfg.tau_c - system.cfg.tau_p;
    closed_form_breakdowns(system, phases, rp)?
        .iter()
        .map(|bd| {
            let (_, sinr) = closed_form_optimal(bd, &system.p_data, 1.0)?;
            Ok(crate::combining::se_from_sinr(sinr, tau_u, system.cfg.tau_c))
        })
        .collect()
}

/// Monte Carlo check of the i.i.d. quadratic identity
/// E{Z A Z^H} = zeta tr(A) I for zero-mean entries of variance zeta.
/// Returns the max entry error relative to |zeta tr(A)| (absolute when the
/// target vanishes).
pub fn iid_quadratic_identity_check(
    rows: usize,
    cols: usize,
    variance: f64,
    a: &CMat,
    n_samples: u64,
    seed: u64,
) -> f64 {
    let sum = parallel_trials(
        n_samples,
        || CMat::zeros(rows, rows),
        |t, acc| {
            let mut r = rng::stream(seed, t);
            let z = rng::crandn_matrix(&mut r, rows, cols) * cplx(variance.sqrt());
            *acc += &z * a * z.adjoint();
        },
    );
    let mean = sum / cplx(n_samples as f64);
    let target = trace(a) * cplx(variance);
    let scale = target.norm().max(1e-300);
    let mut worst: f64 = 0.0;
    for i in 0..rows {
        for j in 0..rows {
            let want = if i == j { target } else { Complex64::default() };
            worst = worst.max((mean[(i, j)] - want).norm() / scale);
        }
    }
    worst
}

/// Monte Carlo check of the Gaussian quartic-moment identity
/// E{|a^H W a|^2} = |tr(R W)|^2 + tr(R W R W^H) for a ~ CN(0, R).
/// Returns the relative error of the sample mean.
pub fn gaussian_quartic_identity_check(r_a: &CMat, w: &CMat, n_samples: u64, seed: u64) -> Result<f64> {
    let s = hermitian_sqrt(r_a)?;
    let n = r_a.nrows();
    let sum = parallel_trials(
        n_samples,
        || 0.0f64,
        |t, acc| {
            let mut r = rng::stream(seed, t);
            let a = &s * rng::crandn_vector(&mut r, n);
            *acc += (a.adjoint() * w * &a)[(0, 0)].norm_sqr();
        },
    );
    let got = sum / n_samples as f64;
    let rw = r_a * w;
    let want = trace(&rw).norm_sqr() + trace_product(&rw, &(r_a * w.adjoint())).re;
    if want == 0.0 {
        return Ok(got.abs());
    }
    Ok((got - want).abs() / want)
}
