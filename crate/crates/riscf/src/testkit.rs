//! Synthetic estimation scenarios for the Monte Carlo term oracles. Test
//! support only; the statistics are O(1) so every closed-form term is
//! exercised far from the physically tiny cascaded regime.

use crate::estimation::{assign_pilots, estimation_matrices, EstimationMatrices, PilotBook};
use crate::linalg::{cplx, hermitian_sqrt, CMat, CVec};
use crate::rng::{self, Rng};

/// One AP's worth of synthetic aggregated-channel statistics with the
/// derived estimation matrices.
pub struct OracleScenario {
    pub j: usize,
    pub h_bar: Vec<CVec>,
    pub r_h: Vec<CMat>,
    pub sqrt_r: Vec<CMat>,
    pub book: PilotBook,
    pub est: Vec<EstimationMatrices>,
}

impl OracleScenario {
    pub fn random(j: usize, n_ues: usize, tau_p: usize, seed: u64) -> Self {
        let mut r = rng::stream(seed, 0);
        use rand::RngExt as _;
        let h_bar: Vec<CVec> = (0..n_ues).map(|_| rng::crandn_vector(&mut r, j)).collect();
        let r_h: Vec<CMat> = (0..n_ues)
            .map(|_| {
                let g = rng::crandn_matrix(&mut r, j, j + 1);
                &g * g.adjoint() * cplx(r.random_range(0.2..0.9))
            })
            .collect();
        let mut book = assign_pilots(n_ues, tau_p, 1.0).unwrap();
        for p in book.powers.iter_mut() {
            *p = r.random_range(0.5..2.0);
        }
        let est = (0..n_ues)
            .map(|u| estimation_matrices(&r_h, &book, u, tau_p as f64).unwrap())
            .collect();
        let sqrt_r = r_h.iter().map(|m| hermitian_sqrt(m).unwrap()).collect();
        Self {
            j,
            h_bar,
            r_h,
            sqrt_r,
            book,
            est,
        }
    }

    /// Removes the deterministic LoS components (Rayleigh-like synthetic).
    pub fn without_los(mut self) -> Self {
        for h in self.h_bar.iter_mut() {
            h.fill(cplx(0.0).into());
        }
        self
    }

    /// Draws one coherence block: all channels plus their LMMSE estimates.
    pub fn draw(&self, rng: &mut Rng) -> (Vec<CVec>, Vec<CVec>) {
        let n_ues = self.h_bar.len();
        let h: Vec<CVec> = (0..n_ues)
            .map(|k| &self.h_bar[k] + &self.sqrt_r[k] * rng::crandn_vector(rng, self.j))
            .collect();
        let y: Vec<CVec> = (0..self.book.tau_p)
            .map(|t| crate::estimation::pilot_projection(&h, &self.book, t, self.j, rng))
            .collect();
        let h_hat = (0..n_ues)
            .map(|u| {
                let y_bar = crate::estimation::projection_mean(&self.h_bar, &self.book, u, self.j);
                crate::estimation::lmmse_estimate(
                    &y[self.book.assignment[u]],
                    &y_bar,
                    &self.h_bar[u],
                    &self.r_h[u],
                    &self.est[u].psi,
                    self.book.powers[u],
                )
                .unwrap()
            })
            .collect();
        (h, h_hat)
    }
}
