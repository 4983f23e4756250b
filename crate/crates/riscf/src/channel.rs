//! Reflection-pattern codebook, per-RIS phase shifts, aggregated-channel
//! statistics and channel realization sampling.
//!
//! The aggregated channel from UE u to AP m is h = f + G Phi z: a Rayleigh
//! direct link plus the cascaded link through the K active RIS blocks. All
//! second-order statistics of the NLoS part reduce to the decomposition
//! R_h = b kappa Gbar Phi R_ris Phi^H Gbar^H + R_direct + Pi + Xi, where the
//! cascaded NLoS terms Pi and Xi collapse onto scalar multiples of R_AP^T
//! because the full RIS-AP correlation is (R_AP^T kron R_RIS)/(J L_A).

use num_complex::Complex64;

use crate::error::{invalid, numeric, Result};
use crate::linalg::{cplx, hermitian_sqrt, hermitize, CMat, CVec};
use crate::rng::{crandn_matrix, crandn_vector, Rng};
use crate::spatial::CorrelationSet;

/// Mapping from L1-bit words onto K-of-G active block patterns.
#[derive(Debug, Clone)]
pub struct ReflectionPatternCodebook {
    /// Blocks per RIS.
    pub g: usize,
    /// Active blocks per pattern.
    pub k: usize,
    /// Elements per block (L/G).
    pub n: usize,
    /// Bits carried per coherence interval.
    pub l1: u32,
    /// Usable block-index sets, lexicographic, 2^l1 of them.
    pub patterns: Vec<Vec<usize>>,
    /// Active element indices per pattern, ascending.
    pub element_sets: Vec<Vec<usize>>,
}

impl ReflectionPatternCodebook {
    /// Usable pattern count C = 2^L1.
    pub fn c(&self) -> usize {
        self.patterns.len()
    }

    /// Active elements per pattern, L_A = N K.
    pub fn l_active(&self) -> usize {
        self.n * self.k
    }

    /// Total elements L = N G.
    pub fn l_total(&self) -> usize {
        self.n * self.g
    }
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Enumerates all C(G, K) block combinations in lexicographic order and keeps
/// the first 2^floor(log2 C(G,K)) as the usable codebook.
pub fn build_rp_codebook(g: usize, k: usize, n: usize) -> Result<ReflectionPatternCodebook> {
    if k == 0 || k > g {
        return Err(invalid(format!("need 1 <= K <= G, got K={k}, G={g}")));
    }
    if n == 0 {
        return Err(invalid("block size N must be positive"));
    }
    let total = binomial(g, k);
    let l1 = total.ilog2();
    let c = 1usize << l1;
    let mut patterns = Vec::with_capacity(c);
    let mut current: Vec<usize> = (0..k).collect();
    loop {
        patterns.push(current.clone());
        if patterns.len() == c {
            break;
        }
        // Next combination in lexicographic order.
        let mut i = k;
        loop {
            i -= 1;
            if current[i] != i + g - k {
                break;
            }
        }
        current[i] += 1;
        for j in i + 1..k {
            current[j] = current[j - 1] + 1;
        }
    }
    let element_sets = patterns
        .iter()
        .map(|blocks| {
            blocks
                .iter()
                .flat_map(|&b| b * n..(b + 1) * n)
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(ReflectionPatternCodebook {
        g,
        k,
        n,
        l1,
        patterns,
        element_sets,
    })
}

/// Identity mapping of an L1-bit word onto its reflection pattern index.
pub fn map_bits_to_rp(word: usize, codebook: &ReflectionPatternCodebook) -> Result<usize> {
    if word >= codebook.c() {
        return Err(invalid(format!(
            "word {word} outside the {}-pattern codebook",
            codebook.c()
        )));
    }
    Ok(word)
}

/// Phase shifts of one RIS over its L_A active slots, radians in [-pi, pi].
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseShiftConfig {
    pub theta: Vec<f64>,
}

impl PhaseShiftConfig {
    pub fn new(theta: Vec<f64>) -> Self {
        Self { theta }
    }

    pub fn zeros(l_a: usize) -> Self {
        Self {
            theta: vec![0.0; l_a],
        }
    }

    /// Diagonal of Phi as a vector of unit phasors.
    pub fn phasors(&self) -> CVec {
        CVec::from_fn(self.theta.len(), |i, _| Complex64::from_polar(1.0, self.theta[i]))
    }
}

/// Large-scale gains of one (m, u) link.
#[derive(Debug, Clone, Copy)]
pub struct LinkGains {
    /// UE-RIS path loss.
    pub xi: f64,
    /// RIS-AP path loss.
    pub alpha: f64,
    /// UE-RIS Rician factor.
    pub iota: f64,
    /// RIS-AP Rician factor.
    pub kappa: f64,
}

impl LinkGains {
    /// b = alpha xi / ((kappa + 1)(iota + 1)).
    pub fn b(&self) -> f64 {
        self.alpha * self.xi / ((self.kappa + 1.0) * (self.iota + 1.0))
    }
}

/// Everything needed to form the statistics of one (m, u) link under one
/// reflection pattern.
#[derive(Debug, Clone)]
pub struct LinkInputs<'a> {
    pub gains: LinkGains,
    /// LoS UE-RIS response over the active elements (unit modulus entries).
    pub z_bar: &'a CVec,
    /// LoS RIS-side response toward the AP over the active elements.
    pub a_ris_ap: &'a CVec,
    /// LoS AP array response (J entries, unit modulus).
    pub a_ap: &'a CVec,
    pub corr: CorrelationSet<'a>,
}

/// First- and second-order statistics of the aggregated channel.
#[derive(Debug, Clone)]
pub struct AggregatedChannelStats {
    /// Deterministic LoS component (J).
    pub h_bar: CVec,
    /// Covariance of the NLoS component (J x J).
    pub r_h: CMat,
    /// Covariance contribution of the G-NLoS / z-LoS cross term.
    pub pi: CMat,
    /// Covariance contribution of the doubly-NLoS cascaded term.
    pub xi: CMat,
    /// Cascaded normalization b_mu.
    pub b: f64,
}

/// tr(Phi A Phi^H B) for diagonal Phi given as its phasor vector.
pub fn phase_sandwich_trace(phi: &CVec, a: &CMat, b: &CMat) -> Complex64 {
    let n = phi.len();
    let mut acc = Complex64::default();
    for l in 0..n {
        for lp in 0..n {
            acc += phi[l] * a[(l, lp)] * phi[lp].conj() * b[(lp, l)];
        }
    }
    acc
}

/// Aggregated-channel statistics for one (m, u, pattern) link.
pub fn aggregated_stats(inputs: &LinkInputs, phases: &PhaseShiftConfig) -> Result<AggregatedChannelStats> {
    let l_a = inputs.z_bar.len();
    if phases.theta.len() != l_a
        || inputs.a_ris_ap.len() != l_a
        || inputs.corr.r_ris.nrows() != l_a
    {
        return Err(invalid(format!(
            "dimension mismatch: pattern has {l_a} active elements, got {} phases, {} RIS-side entries, {}x{} RIS correlation",
            phases.theta.len(),
            inputs.a_ris_ap.len(),
            inputs.corr.r_ris.nrows(),
            inputs.corr.r_ris.ncols()
        )));
    }
    let j = inputs.a_ap.len();
    let g = inputs.gains;
    let b = g.b();
    let phi = phases.phasors();

    // Phi z_bar and Phi^H a_ris_ap.
    let phi_z = CVec::from_fn(l_a, |i, _| phi[i] * inputs.z_bar[i]);
    let phih_a = CVec::from_fn(l_a, |i, _| phi[i].conj() * inputs.a_ris_ap[i]);

    // LoS: h_bar = sqrt(b kappa iota) (a_ris_ap^H Phi z_bar) a_ap.
    let s_los = (inputs.a_ris_ap.adjoint() * &phi_z)[(0, 0)];
    let h_bar = inputs.a_ap * (s_los * cplx((b * g.kappa * g.iota).sqrt()));

    let ap_outer = inputs.a_ap * inputs.a_ap.adjoint();
    // b kappa Gbar Phi R_ris Phi^H Gbar^H collapses onto a_ap a_ap^H.
    let s1 = (phih_a.adjoint() * inputs.corr.r_ris * &phih_a)[(0, 0)].re;
    let term1 = &ap_outer * cplx(b * g.kappa * s1);

    let jl = (j * l_a) as f64;
    let r_ap_t = inputs.corr.r_ap.transpose();
    // Pi(j,j') = b iota tr(Phi z_bar z_bar^H Phi^H R_ris) R_AP^T(j,j') / (J L_A).
    let t_pi = (phi_z.adjoint() * inputs.corr.r_ris * &phi_z)[(0, 0)].re;
    let pi = &r_ap_t * cplx(b * g.iota * t_pi / jl);
    // Xi(j,j') = b tr(Phi R_ris Phi^H R_ris) R_AP^T(j,j') / (J L_A).
    let t_xi = phase_sandwich_trace(&phi, inputs.corr.r_ris, inputs.corr.r_ris).re;
    let xi = &r_ap_t * cplx(b * t_xi / jl);

    let r_h = hermitize(&(term1 + inputs.corr.r_direct + &pi + &xi));
    Ok(AggregatedChannelStats {
        h_bar,
        r_h,
        pi,
        xi,
        b,
    })
}

/// Covariance square roots reused across realizations of one link.
#[derive(Debug, Clone)]
pub struct ComponentSqrts {
    /// R_direct^{1/2} (J x J).
    pub direct: CMat,
    /// R_ris^{1/2} (L_A x L_A).
    pub ris: CMat,
    /// conj(R_AP^{1/2}) = (R_AP^T)^{1/2} (J x J).
    pub ap_conj: CMat,
}

impl ComponentSqrts {
    pub fn new(corr: &CorrelationSet) -> Result<Self> {
        Ok(Self {
            direct: hermitian_sqrt(corr.r_direct)?,
            ris: hermitian_sqrt(corr.r_ris)?,
            ap_conj: hermitian_sqrt(corr.r_ap)
                .map_err(|e| numeric(format!("AP correlation: {e}")))?
                .conjugate(),
        })
    }

    /// Borrowed view for the sampler.
    pub fn view(&self) -> SqrtsView<'_> {
        SqrtsView {
            direct: &self.direct,
            ris: &self.ris,
            ap_conj: &self.ap_conj,
        }
    }
}

/// Covariance square roots by reference; the owning side decides sharing
/// (R_ris per pattern, the AP factor globally).
#[derive(Debug, Clone, Copy)]
pub struct SqrtsView<'a> {
    pub direct: &'a CMat,
    pub ris: &'a CMat,
    pub ap_conj: &'a CMat,
}

/// Retained per-hop components of a realization, for oracle tests.
#[derive(Debug, Clone)]
pub struct ChannelComponents {
    pub f: CVec,
    pub g_mat: CMat,
    pub z: CVec,
}

/// One realization of the aggregated channel of a single (m, u) link.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub h: CVec,
    pub components: Option<ChannelComponents>,
}

/// The i.i.d. CN(0,1) innovations behind one link realization.
#[derive(Debug, Clone)]
pub struct RawDraw {
    pub f: CVec,
    pub z: CVec,
    pub w: CMat,
}

impl RawDraw {
    /// Fixed draw order: f (J), z_tilde (L_A), then the J x L_A block of W.
    pub fn sample(j: usize, l_a: usize, rng: &mut Rng) -> Self {
        Self {
            f: crandn_vector(rng, j),
            z: crandn_vector(rng, l_a),
            w: crandn_matrix(rng, j, l_a),
        }
    }
}

/// Colors the raw innovations and assembles h = f + G Phi z.
pub fn assemble_channel(
    inputs: &LinkInputs,
    sqrts: SqrtsView<'_>,
    phases: &PhaseShiftConfig,
    raw: &RawDraw,
    keep_components: bool,
) -> ChannelRealization {
    let l_a = inputs.z_bar.len();
    let g = inputs.gains;

    let f = sqrts.direct * &raw.f;
    let z_tilde = sqrts.ris * &raw.z;
    let g_tilde = (sqrts.ap_conj * &raw.w * sqrts.ris)
        / cplx(((inputs.a_ap.len() * l_a) as f64).sqrt());

    let z = (inputs.z_bar * cplx(g.iota.sqrt()) + z_tilde) * cplx((g.xi / (g.iota + 1.0)).sqrt());
    let g_bar = inputs.a_ap * inputs.a_ris_ap.adjoint();
    let g_mat = (g_bar * cplx(g.kappa.sqrt()) + g_tilde) * cplx((g.alpha / (g.kappa + 1.0)).sqrt());

    let phi = phases.phasors();
    let phi_z = CVec::from_fn(l_a, |i, _| phi[i] * z[i]);
    let h = &f + &g_mat * phi_z;
    ChannelRealization {
        h,
        components: keep_components.then(|| ChannelComponents { f, g_mat, z }),
    }
}

/// Draws f ~ CN(0, R_direct), z_tilde ~ CN(0, R_ris) and the Kronecker-
/// correlated G_tilde, then assembles h = f + G Phi z.
pub fn sample_channel(
    inputs: &LinkInputs,
    sqrts: SqrtsView<'_>,
    phases: &PhaseShiftConfig,
    rng: &mut Rng,
    keep_components: bool,
) -> ChannelRealization {
    let raw = RawDraw::sample(inputs.a_ap.len(), inputs.z_bar.len(), rng);
    assemble_channel(inputs, sqrts, phases, &raw, keep_components)
}
