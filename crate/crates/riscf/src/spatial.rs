//! Steering vectors and spatial-correlation matrices: AP-side ULA model,
//! RIS-side sinc model, Gaussian local scattering for the direct link, and
//! the full Kronecker RIS-AP correlation.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use std::f64::consts::{PI, TAU};

use crate::error::{invalid, numeric, Result};
use crate::linalg::{cplx, CMat, CVec};

/// Array response vectors are plain complex vectors.
pub type SteeringVector = CVec;

/// sinc(x) = sin(pi x)/(pi x).
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Unnormalized J-element ULA steering vector, entry j = exp(-i 2 pi d j sin(angle)),
/// with d in wavelengths. Used as the LoS array response.
pub fn ula_steering(j: usize, angle: f64, spacing: f64) -> CVec {
    CVec::from_fn(j, |row, _| {
        Complex64::from_polar(1.0, -TAU * spacing * row as f64 * angle.sin())
    })
}

/// ULA steering scaled by 1/sqrt(p), the column normalization of the AP
/// correlation factor A.
pub fn ula_steering_normalized(j: usize, angle: f64, spacing: f64, p: usize) -> CVec {
    ula_steering(j, angle, spacing) / cplx((p as f64).sqrt())
}

/// Steering vector of a sqrt(L) x sqrt(L) planar array restricted to the
/// active element set, preserving physical grid positions. Element l sits at
/// (h, v) = (l mod side, l div side); entry = exp(i 2 pi d (h sin(az) cos(el) + v sin(el))).
pub fn uspa_steering(
    side: usize,
    active_elements: &[usize],
    az: f64,
    el: f64,
    spacing: f64,
) -> Result<CVec> {
    let l_total = side * side;
    let mut seen = vec![false; l_total];
    for &e in active_elements {
        if e >= l_total {
            return Err(invalid(format!("element index {e} out of range {l_total}")));
        }
        if seen[e] {
            return Err(invalid(format!("duplicate element index {e}")));
        }
        seen[e] = true;
    }
    let dir_h = az.sin() * el.cos();
    let dir_v = el.sin();
    Ok(CVec::from_fn(active_elements.len(), |i, _| {
        let l = active_elements[i];
        let h = (l % side) as f64;
        let v = (l / side) as f64;
        Complex64::from_polar(1.0, TAU * spacing * (h * dir_h + v * dir_v))
    }))
}

/// AP-side spatial correlation R = gain * A A^H with A's columns the
/// 1/sqrt(P)-normalized steering vectors at angles -pi/2 + (p-1) pi / P,
/// zero-padded to J columns (the padding contributes nothing to R).
pub fn ap_correlation(j: usize, p: usize, gain: f64, spacing: f64) -> Result<CMat> {
    if p == 0 || p > j {
        return Err(invalid(format!("need 1 <= P <= J, got P={p}, J={j}")));
    }
    let mut r = CMat::zeros(j, j);
    for col in 1..=p {
        let phi = -PI / 2.0 + (col - 1) as f64 * PI / p as f64;
        let a = ula_steering_normalized(j, phi, spacing, p);
        r += &a * a.adjoint();
    }
    Ok(r * cplx(gain))
}

/// Physical element positions (meters) of a side x side RIS grid with element
/// pitch d_h, d_v; index l maps to (l mod side, l div side).
pub fn ris_grid_positions(side: usize, d_h: f64, d_v: f64) -> Vec<(f64, f64)> {
    (0..side * side)
        .map(|l| (((l % side) as f64) * d_h, ((l / side) as f64) * d_v))
        .collect()
}

/// Isotropic-scattering RIS correlation: R(l, l') = sinc(2 ||u_l - u_l'|| / lambda)
/// over the given element positions (meters).
pub fn ris_correlation(positions: &[(f64, f64)], wavelength: f64) -> DMatrix<f64> {
    let n = positions.len();
    DMatrix::from_fn(n, n, |i, j| {
        let dx = positions[i].0 - positions[j].0;
        let dy = positions[i].1 - positions[j].1;
        sinc(2.0 * (dx * dx + dy * dy).sqrt() / wavelength)
    })
}

/// d_H d_V scaled RIS correlation as a complex matrix, restricted to the
/// active element set.
pub fn ris_correlation_scaled(
    positions: &[(f64, f64)],
    active: &[usize],
    d_h: f64,
    d_v: f64,
    wavelength: f64,
) -> CMat {
    let sub: Vec<(f64, f64)> = active.iter().map(|&l| positions[l]).collect();
    let r = ris_correlation(&sub, wavelength);
    CMat::from_fn(sub.len(), sub.len(), |i, j| cplx(d_h * d_v * r[(i, j)]))
}

/// Gauss-Hermite nodes/weights for integrals against exp(-x^2), via the
/// Golub-Welsch eigenvalue method.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut t = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let off = (k as f64 / 2.0).sqrt();
        t[(k - 1, k)] = off;
        t[(k, k - 1)] = off;
    }
    let eig = SymmetricEigen::new(t);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let w = PI.sqrt() * eig.eigenvectors[(0, i)].powi(2);
            (eig.eigenvalues[i], w)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

fn local_scattering_entry(
    offset: f64,
    angle: f64,
    asd: f64,
    spacing: f64,
    nodes: &[f64],
    weights: &[f64],
) -> Complex64 {
    // Substituting chi = sqrt(2) sigma t turns the Gaussian average into a
    // Gauss-Hermite sum with total weight sqrt(pi).
    let mut acc = Complex64::default();
    for (&x, &w) in nodes.iter().zip(weights) {
        let chi = std::f64::consts::SQRT_2 * asd * x;
        acc += cplx(w) * Complex64::from_polar(1.0, TAU * spacing * offset * (angle + chi).sin());
    }
    acc / cplx(PI.sqrt())
}

/// Gaussian local-scattering correlation of the direct UE-AP link:
/// entry (p, q) = beta * E_chi{ exp(i 2 pi d (p - q) sin(theta + chi)) },
/// chi ~ N(0, asd^2), evaluated by Gauss-Hermite quadrature (30 nodes,
/// checked against 60).
pub fn local_scattering_correlation(
    j: usize,
    nominal_angle: f64,
    asd: f64,
    beta: f64,
    spacing: f64,
) -> Result<CMat> {
    if !(asd > 0.0) {
        return Err(invalid("angular standard deviation must be positive"));
    }
    let (n30, w30) = gauss_hermite(30);
    let (n60, w60) = gauss_hermite(60);
    let mut row = vec![Complex64::default(); j];
    for (offset, slot) in row.iter_mut().enumerate() {
        let coarse = local_scattering_entry(offset as f64, nominal_angle, asd, spacing, &n30, &w30);
        let fine = local_scattering_entry(offset as f64, nominal_angle, asd, spacing, &n60, &w60);
        if (coarse - fine).norm() > 1e-8 * fine.norm().max(1e-30) + 1e-14 {
            return Err(numeric(format!(
                "local-scattering quadrature did not converge at offset {offset}"
            )));
        }
        *slot = fine;
    }
    Ok(CMat::from_fn(j, j, |p, q| {
        let entry = if p >= q { row[p - q] } else { row[q - p].conj() };
        entry * cplx(beta)
    }))
}

/// The correlation matrices entering one (m, u, pattern) link. A borrowed
/// view: the underlying matrices are shared across links (R_ris per pattern,
/// R_ap globally).
#[derive(Debug, Clone, Copy)]
pub struct CorrelationSet<'a> {
    /// Direct UE-AP correlation (J x J, large-scale gain embedded).
    pub r_direct: &'a CMat,
    /// RIS-side correlation over the active elements (L_A x L_A, d_H d_V scaled).
    pub r_ris: &'a CMat,
    /// AP-side correlation (J x J, unit gain).
    pub r_ap: &'a CMat,
}

/// Full RIS-AP correlation (R_AP^T kron R_RIS) / (J L_A).
pub fn full_ris_ap_correlation(r_ap: &CMat, r_ris: &CMat) -> Result<CMat> {
    if !r_ap.is_square() || !r_ris.is_square() {
        return Err(invalid("correlation matrices must be square"));
    }
    let j = r_ap.nrows();
    let l_a = r_ris.nrows();
    let scale = cplx(1.0 / (j * l_a) as f64);
    Ok(r_ap.transpose().kronecker(r_ris) * scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_hermitian_asymmetry, min_eigenvalue, trace};
    use crate::rng;

    #[test]
    fn ula_broadside_is_flat() {
        let a = ula_steering_normalized(4, 0.0, 0.5, 2);
        for e in a.iter() {
            assert!((e - cplx(1.0 / 2f64.sqrt())).norm() < 1e-14);
        }
    }

    #[test]
    fn ula_endfire_phases() {
        let a = ula_steering(2, PI / 2.0, 0.5);
        assert!((a[0].arg() - 0.0).abs() < 1e-12);
        // Second entry has phase -pi (mod 2 pi).
        assert!((a[1].arg().abs() - PI).abs() < 1e-9);
    }

    #[test]
    fn ula_conjugate_symmetry() {
        for &angle in &[0.3, 1.1, -0.7] {
            let pos = ula_steering(5, angle, 0.5);
            let neg = ula_steering(5, -angle, 0.5);
            for i in 0..5 {
                assert!((neg[i] - pos[i].conj()).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn uspa_zero_angles_all_ones() {
        let active: Vec<usize> = (0..16).collect();
        let a = uspa_steering(4, &active, 0.0, 0.0, 0.25).unwrap();
        assert_eq!(a.len(), 16);
        for e in a.iter() {
            assert!((e - cplx(1.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn uspa_blocks_shift_grid_positions() {
        // 4-block RIS, 16 elements, block g covers rows of 4 consecutive
        // indices. Activating block 1 must reproduce block 0's values at the
        // shifted physical positions.
        let side = 4;
        let (az, el, d) = (0.6, 0.25, 0.25);
        let b0: Vec<usize> = (0..4).collect();
        let b1: Vec<usize> = (4..8).collect();
        let a0 = uspa_steering(side, &b0, az, el, d).unwrap();
        let a1 = uspa_steering(side, &b1, az, el, d).unwrap();
        for i in 0..4 {
            // Block 1 elements sit one grid row higher: extra phase d*sin(el).
            let shift = Complex64::from_polar(1.0, TAU * d * el.sin());
            assert!((a1[i] - a0[i] * shift).norm() < 1e-12);
        }
    }

    #[test]
    fn uspa_rejects_duplicates() {
        assert!(uspa_steering(4, &[1, 1], 0.0, 0.0, 0.25).is_err());
        assert!(uspa_steering(4, &[17], 0.0, 0.0, 0.25).is_err());
    }

    #[test]
    fn ap_correlation_rank_and_trace() {
        let r = ap_correlation(2, 1, 1.0, 0.5).unwrap();
        // Rank-1 PSD: one eigenvalue ~ trace, other ~ 0.
        let eig = SymmetricEigen::new(crate::linalg::hermitize(&r));
        let mut ev: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
        ev.sort_by(f64::total_cmp);
        assert!(ev[0].abs() < 1e-12);
        let r4 = ap_correlation(4, 2, 1.0, 0.5).unwrap();
        assert!((trace(&r4).re - 4.0).abs() < 1e-12, "unit-gain trace equals J");
        assert!(max_hermitian_asymmetry(&r4) < 1e-14);
        assert!(ap_correlation(2, 3, 1.0, 0.5).is_err());
    }

    #[test]
    fn ris_correlation_examples() {
        let lambda = 0.15;
        let quarter = ris_grid_positions(2, lambda / 4.0, lambda / 4.0);
        let r = ris_correlation(&quarter, lambda);
        assert!((r[(0, 0)] - 1.0).abs() < 1e-14);
        assert!((r[(0, 1)] - 2.0 / PI).abs() < 1e-12, "lambda/4 spacing -> sinc(1/2)");
        let half = ris_grid_positions(2, lambda / 2.0, lambda / 2.0);
        let r2 = ris_correlation(&half, lambda);
        assert!(r2[(0, 1)].abs() < 1e-12, "lambda/2 spacing -> sinc(1) = 0");
    }

    #[test]
    fn local_scattering_diagonal_is_beta() {
        let r = local_scattering_correlation(4, 0.5, 15f64.to_radians(), 2.5, 0.5).unwrap();
        for i in 0..4 {
            assert!((r[(i, i)] - cplx(2.5)).norm() < 1e-12);
        }
        assert!(max_hermitian_asymmetry(&r) < 1e-12);
        assert!(min_eigenvalue(&r) > -1e-10 * 2.5);
    }

    #[test]
    fn local_scattering_small_asd_limit() {
        let theta = 0.4;
        let r = local_scattering_correlation(3, theta, 1e-6, 1.0, 0.5).unwrap();
        for p in 0..3 {
            for q in 0..3 {
                let want =
                    Complex64::from_polar(1.0, TAU * 0.5 * (p as f64 - q as f64) * theta.sin());
                assert!((r[(p, q)] - want).norm() < 1e-5);
            }
        }
    }

    #[test]
    fn local_scattering_matches_monte_carlo() {
        let asd = 15f64.to_radians();
        let theta = 30f64.to_radians();
        let r = local_scattering_correlation(2, theta, asd, 1.0, 0.5).unwrap();
        let mut rr = rng::stream(99, 0);
        let n = 1_000_000;
        let mut acc = Complex64::default();
        for _ in 0..n {
            let chi = rng::randn(&mut rr) * asd;
            acc += Complex64::from_polar(1.0, TAU * 0.5 * (theta + chi).sin());
        }
        let mc = acc / cplx(n as f64);
        assert!(
            (r[(1, 0)] - mc).norm() < 1e-3,
            "quadrature {:?} vs MC {:?}",
            r[(1, 0)],
            mc
        );
    }

    #[test]
    fn local_scattering_quadrature_vs_mc_grid() {
        // 20 random (theta, offset) pairs at 1e-3 absolute tolerance; the MC
        // reference needs 6e6 draws per pair for its own noise to sit below
        // that band.
        let mut rr = rng::stream(7, 0);
        use rand::RngExt as _;
        let asd = 15f64.to_radians();
        for _ in 0..20 {
            let theta = rr.random_range(-1.2..1.2);
            let offset = rr.random_range(1..4usize);
            let r = local_scattering_correlation(offset + 1, theta, asd, 1.0, 0.5).unwrap();
            let n = 6_000_000;
            let mut acc = Complex64::default();
            for _ in 0..n {
                let chi = rng::randn(&mut rr) * asd;
                acc += Complex64::from_polar(1.0, TAU * 0.5 * offset as f64 * (theta + chi).sin());
            }
            let mc = acc / cplx(n as f64);
            assert!(
                (r[(offset, 0)] - mc).norm() < 1e-3,
                "theta {theta}, offset {offset}: {:?} vs {:?}",
                r[(offset, 0)],
                mc
            );
        }
    }

    #[test]
    fn kronecker_identities() {
        let id2 = CMat::identity(2, 2);
        let id3 = CMat::identity(3, 3);
        let full = full_ris_ap_correlation(&id2, &id3).unwrap();
        let want = CMat::identity(6, 6) * cplx(1.0 / 6.0);
        assert!((&full - &want).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-14);

        let mut r = rng::stream(4, 0);
        let g1 = rng::crandn_matrix(&mut r, 3, 3);
        let g2 = rng::crandn_matrix(&mut r, 4, 4);
        let a = &g1 * g1.adjoint();
        let b = &g2 * g2.adjoint();
        let full = full_ris_ap_correlation(&a, &b).unwrap();
        let t = trace(&full);
        let want = trace(&a) * trace(&b) / cplx(12.0);
        assert!((t - want).norm() < 1e-10 * want.norm());
        assert!(max_hermitian_asymmetry(&full) < 1e-12);

        let s1 = CMat::from_element(1, 1, cplx(3.0));
        let s2 = CMat::from_element(1, 1, cplx(5.0));
        let deg = full_ris_ap_correlation(&s1, &s2).unwrap();
        assert!((deg[(0, 0)] - cplx(15.0)).norm() < 1e-14);
    }

    #[test]
    fn gauss_hermite_integrates_polynomials() {
        let (x, w) = gauss_hermite(30);
        let m0: f64 = w.iter().sum();
        assert!((m0 - PI.sqrt()).abs() < 1e-10);
        let m2: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
        assert!((m2 - PI.sqrt() / 2.0).abs() < 1e-9);
        let m4: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(4)).sum();
        assert!((m4 - 0.75 * PI.sqrt()).abs() < 1e-9);
    }
}

#[cfg(test)]
mod proptests {
    use super::*;
    use crate::linalg::{max_hermitian_asymmetry, min_eigenvalue, trace};
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn ap_correlation_is_hermitian_psd(j in 1usize..=8, p_off in 0usize..8, gain in 0.1..10.0f64) {
            let p = 1 + p_off % j;
            let r = ap_correlation(j, p, gain, 0.5).unwrap();
            prop_assert!(max_hermitian_asymmetry(&r) < 1e-12);
            prop_assert!(min_eigenvalue(&r) > -1e-10 * gain);
            prop_assert!((trace(&r).re - gain * j as f64).abs() < 1e-9 * gain * j as f64);
        }

        #[test]
        fn kronecker_trace_identity_random_psd(j in 1usize..=4, l in 1usize..=6, seed in 0u64..1000) {
            let mut r = crate::rng::stream(seed, 0);
            let ga = crate::rng::crandn_matrix(&mut r, j, j + 1);
            let gb = crate::rng::crandn_matrix(&mut r, l, l + 1);
            let a = &ga * ga.adjoint();
            let b = &gb * gb.adjoint();
            let full = full_ris_ap_correlation(&a, &b).unwrap();
            let want = trace(&a) * trace(&b) / cplx((j * l) as f64);
            prop_assert!((trace(&full) - want).norm() < 1e-10 * want.norm().max(1e-12));
            prop_assert!(max_hermitian_asymmetry(&full) < 1e-10);
        }
    }
}
