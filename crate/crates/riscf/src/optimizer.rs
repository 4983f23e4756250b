//! Swarm optimization of the RIS phase shifts: the chaotic-sequence adaptive
//! variant (logistic-map initialization, sigmoid-decayed inertia, worst-
//! particle mutation, stalled-particle reset, early stopping) and the
//! conventional fixed-inertia baseline.

use std::f64::consts::PI;

use rand::RngExt as _;

use crate::error::{invalid, numeric, Result};
use crate::rng::{self, Rng};

/// Swarm parameters. `epsilon` is the absolute early-stop tolerance on the
/// gbest trace; when `None` it is set to 1e-4 x the initial gbest fitness.
#[derive(Debug, Clone)]
pub struct SwarmConfig {
    pub particles: usize,
    pub t_max: usize,
    pub t_check: usize,
    pub c1: f64,
    pub c2: f64,
    pub omega_min: f64,
    pub omega_max: f64,
    /// Fixed inertia of the conventional baseline.
    pub omega_fixed: f64,
    pub v_max: f64,
    /// Early-stop patience N_i.
    pub patience: usize,
    pub epsilon: Option<f64>,
    /// Logistic-map parameter, 4 for the fully chaotic regime.
    pub mu_tilde: f64,
}

impl Default for SwarmConfig {
    fn default() -> Self {
        Self {
            particles: 20,
            t_max: 100,
            t_check: 2,
            c1: 1.496,
            c2: 1.496,
            omega_min: 0.4,
            omega_max: 0.9,
            omega_fixed: 0.7298,
            v_max: 4.0,
            patience: 10,
            epsilon: None,
            mu_tilde: 4.0,
        }
    }
}

impl SwarmConfig {
    fn validate(&self) -> Result<()> {
        if self.particles == 0 || self.t_max == 0 {
            return Err(invalid("need at least one particle and one iteration"));
        }
        if !(self.omega_min > 0.0 && self.omega_min < self.omega_max && self.omega_max < 1.0) {
            return Err(invalid("need 0 < omega_min < omega_max < 1"));
        }
        if !(self.v_max > 0.0) || self.t_check == 0 {
            return Err(invalid("need v_max > 0 and T_check >= 1"));
        }
        Ok(())
    }
}

/// Wraps an angle into [-pi, pi). In-range values pass through untouched so
/// a zero velocity leaves positions bit-identical.
pub fn wrap_angle(theta: f64) -> f64 {
    if (-PI..PI).contains(&theta) {
        return theta;
    }
    let mut t = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if t >= PI {
        t = -PI;
    }
    t
}

/// Chaotic initial positions: per particle a logistic-map orbit
/// kappa(d+1) = mu kappa(d) (1 - kappa(d)) started from a uniform seed
/// rejected off the fixed points {0, 1/4, 1/2, 3/4, 1}, mapped affinely onto
/// [-pi, pi].
pub fn chaotic_init(
    particles: usize,
    dim: usize,
    mu_tilde: f64,
    rng: &mut Rng,
) -> Result<Vec<Vec<f64>>> {
    let forbidden = [0.0, 0.25, 0.5, 0.75, 1.0];
    let mut out = Vec::with_capacity(particles);
    for _ in 0..particles {
        let mut kappa = f64::NAN;
        let mut ok = false;
        for _ in 0..100 {
            kappa = rng.random_range(0.0..1.0);
            if forbidden.iter().all(|f| (kappa - f).abs() > 1e-12) {
                ok = true;
                break;
            }
        }
        if !ok {
            return Err(numeric("could not draw a valid logistic seed"));
        }
        let mut pos = Vec::with_capacity(dim);
        for _ in 0..dim {
            pos.push(-PI + 2.0 * PI * kappa);
            kappa = mu_tilde * kappa * (1.0 - kappa);
        }
        out.push(pos);
    }
    Ok(out)
}

/// Sigmoid-decayed inertia: with zeta = (T_max - t)/T_max,
/// omega = omega_min + (omega_max - omega_min)(2/(1 + e^{-5 zeta}) - 1).
pub fn adaptive_inertia(t: usize, t_max: usize, omega_min: f64, omega_max: f64) -> f64 {
    let zeta = (t_max - t) as f64 / t_max as f64;
    omega_min + (omega_max - omega_min) * (2.0 / (1.0 + (-5.0 * zeta).exp()) - 1.0)
}

/// Swarm state: positions/velocities plus personal and global bests.
#[derive(Debug, Clone)]
pub struct SwarmState {
    pub positions: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
    pub fitness: Vec<f64>,
    pub prev_fitness: Vec<f64>,
    pub pbest_pos: Vec<Vec<f64>>,
    pub pbest_fit: Vec<f64>,
    pub gbest_pos: Vec<f64>,
    pub gbest_fit: f64,
    pub stall: Vec<usize>,
}

impl SwarmState {
    fn new(positions: Vec<Vec<f64>>) -> Self {
        let n = positions.len();
        let dim = positions[0].len();
        Self {
            velocities: vec![vec![0.0; dim]; n],
            fitness: vec![f64::NEG_INFINITY; n],
            prev_fitness: vec![f64::NEG_INFINITY; n],
            pbest_pos: positions.clone(),
            pbest_fit: vec![f64::NEG_INFINITY; n],
            gbest_pos: positions[0].clone(),
            gbest_fit: f64::NEG_INFINITY,
            stall: vec![0; n],
            positions,
        }
    }

    fn update_bests(&mut self) {
        for i in 0..self.positions.len() {
            if self.fitness[i] > self.pbest_fit[i] {
                self.pbest_fit[i] = self.fitness[i];
                self.pbest_pos[i] = self.positions[i].clone();
            }
            if self.fitness[i] > self.gbest_fit {
                self.gbest_fit = self.fitness[i];
                self.gbest_pos = self.positions[i].clone();
            }
        }
    }

    fn worst_index(&self) -> usize {
        let mut worst = 0;
        for i in 1..self.fitness.len() {
            if self.fitness[i] < self.fitness[worst] {
                worst = i;
            }
        }
        worst
    }

    fn best_index(&self) -> usize {
        let mut best = 0;
        for i in 1..self.fitness.len() {
            if self.fitness[i] > self.fitness[best] {
                best = i;
            }
        }
        best
    }
}

/// v <- omega v + c1 r1 (pbest - x) + c2 r2 (gbest - x), clamped to
/// [-v_max, v_max]. r1, r2 are scalar draws per particle per iteration, and
/// the pulls use the wrapped (geodesic) phase difference so a particle near
/// +pi is attracted the short way to a best near -pi.
pub fn velocity_update(state: &mut SwarmState, omega: f64, cfg: &SwarmConfig, rng: &mut Rng) {
    for i in 0..state.positions.len() {
        let r1: f64 = rng.random_range(0.0..1.0);
        let r2: f64 = rng.random_range(0.0..1.0);
        for d in 0..state.positions[i].len() {
            let pull_p = wrap_angle(state.pbest_pos[i][d] - state.positions[i][d]);
            let pull_g = wrap_angle(state.gbest_pos[d] - state.positions[i][d]);
            let v = omega * state.velocities[i][d] + cfg.c1 * r1 * pull_p + cfg.c2 * r2 * pull_g;
            state.velocities[i][d] = v.clamp(-cfg.v_max, cfg.v_max);
        }
    }
}

/// x <- x + v, wrapped into [-pi, pi): phases are periodic.
pub fn position_update(state: &mut SwarmState) {
    for i in 0..state.positions.len() {
        for d in 0..state.positions[i].len() {
            state.positions[i][d] = wrap_angle(state.positions[i][d] + state.velocities[i][d]);
        }
    }
}

/// Replaces the worst particle's position with gbest + N(0, sigma_t^2 I),
/// sigma_t = 2 pi (1 - t / T_max). The best particle is never the mutation
/// target when the swarm has at least two members.
pub fn mutate_worst(state: &mut SwarmState, t: usize, t_max: usize, rng: &mut Rng) {
    let mut worst = state.worst_index();
    if state.positions.len() >= 2 && worst == state.best_index() {
        worst = (worst + 1) % state.positions.len();
    }
    let sigma = 2.0 * PI * (1.0 - t as f64 / t_max as f64);
    for d in 0..state.positions[worst].len() {
        let step = sigma * rng::randn(rng);
        state.positions[worst][d] = wrap_angle(state.gbest_pos[d] + step);
    }
}

/// For every particle whose fitness has been unchanged for more than
/// `t_check` iterations, redraw each coordinate from
/// N((gbest_d - pbest_d)/2, |gbest_d - pbest_d|) and reset the counter.
pub fn reset_stalled(state: &mut SwarmState, t_check: usize, rng: &mut Rng) {
    for i in 0..state.positions.len() {
        if state.stall[i] > t_check {
            for d in 0..state.positions[i].len() {
                let diff = state.gbest_pos[d] - state.pbest_pos[i][d];
                let draw = diff / 2.0 + diff.abs() * rng::randn(rng);
                state.positions[i][d] = wrap_angle(draw);
            }
            state.stall[i] = 0;
        }
    }
}

/// One row of the optimizer trace.
#[derive(Debug, Clone, Copy)]
pub struct IterationRecord {
    pub iteration: usize,
    pub gbest: f64,
    pub mean_fitness: f64,
    pub omega: f64,
}

/// Optimization outcome: the best position, its fitness and the full trace.
#[derive(Debug, Clone)]
pub struct SwarmResult {
    pub best_position: Vec<f64>,
    pub best_fitness: f64,
    pub trace: Vec<IterationRecord>,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Variant {
    Chaotic,
    Conventional,
}

fn run_swarm<F>(
    objective: &F,
    dim: usize,
    cfg: &SwarmConfig,
    seed: u64,
    variant: Variant,
) -> Result<SwarmResult>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    cfg.validate()?;
    let mut rng = rng::stream(seed, 0);
    let positions = match variant {
        Variant::Chaotic => chaotic_init(cfg.particles, dim, cfg.mu_tilde, &mut rng)?,
        Variant::Conventional => (0..cfg.particles)
            .map(|_| (0..dim).map(|_| rng.random_range(-PI..PI)).collect())
            .collect(),
    };
    let mut state = SwarmState::new(positions);
    let mut trace = Vec::with_capacity(cfg.t_max);
    let mut evaluations = 0;
    let mut epsilon = cfg.epsilon;
    let mut quiet = 0usize;
    let mut prev_gbest = f64::NEG_INFINITY;

    for t in 0..cfg.t_max {
        // Fitness of every particle; evaluations are pure so this is a
        // deterministic parallel map.
        use rayon::prelude::*;
        let fits: Vec<f64> = state
            .positions
            .par_iter()
            .map(|p| objective(p))
            .collect::<Result<_>>()
            .map_err(|e| numeric(format!("objective failed at iteration {t}: {e}")))?;
        evaluations += fits.len();
        state.prev_fitness = std::mem::replace(&mut state.fitness, fits);
        for i in 0..cfg.particles {
            let unchanged = if state.prev_fitness[i].is_finite() {
                let scale = state.fitness[i].abs().max(1e-300);
                (state.fitness[i] - state.prev_fitness[i]).abs() < 1e-12 * scale
            } else {
                false
            };
            if unchanged {
                state.stall[i] += 1;
            } else {
                state.stall[i] = 0;
            }
        }
        state.update_bests();

        if epsilon.is_none() {
            epsilon = Some(1e-4 * state.gbest_fit.abs().max(1e-300));
        }
        let omega = match variant {
            Variant::Chaotic => adaptive_inertia(t, cfg.t_max, cfg.omega_min, cfg.omega_max),
            Variant::Conventional => cfg.omega_fixed,
        };
        trace.push(IterationRecord {
            iteration: t,
            gbest: state.gbest_fit,
            mean_fitness: state.fitness.iter().sum::<f64>() / cfg.particles as f64,
            omega,
        });

        // Early stop on a quiet gbest trace.
        if prev_gbest.is_finite() && (state.gbest_fit - prev_gbest).abs() < epsilon.unwrap() {
            quiet += 1;
            if quiet >= cfg.patience {
                break;
            }
        } else {
            quiet = 0;
        }
        prev_gbest = state.gbest_fit;

        if variant == Variant::Chaotic {
            mutate_worst(&mut state, t, cfg.t_max, &mut rng);
        }
        velocity_update(&mut state, omega, cfg, &mut rng);
        position_update(&mut state);
        if variant == Variant::Chaotic {
            reset_stalled(&mut state, cfg.t_check, &mut rng);
        }
    }

    // The returned optimum reflects the best evaluated position.
    Ok(SwarmResult {
        best_position: state.gbest_pos.clone(),
        best_fitness: state.gbest_fit,
        trace,
        evaluations,
    })
}

/// Chaotic-sequence adaptive swarm search maximizing `objective`.
pub fn run_csa_pso<F>(objective: &F, dim: usize, cfg: &SwarmConfig, seed: u64) -> Result<SwarmResult>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    run_swarm(objective, dim, cfg, seed, Variant::Chaotic)
}

/// Conventional swarm baseline: uniform random initialization, fixed inertia,
/// no mutation, no reset.
pub fn run_pso<F>(objective: &F, dim: usize, cfg: &SwarmConfig, seed: u64) -> Result<SwarmResult>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    run_swarm(objective, dim, cfg, seed, Variant::Conventional)
}

/// Static penalty for per-UE QoS: fitness = ee - penalty sum_u max(0, qos - se_u).
pub fn penalized_fitness(ee: f64, se_per_ue: &[f64], qos_min: f64, penalty: f64) -> f64 {
    let violation: f64 = se_per_ue.iter().map(|se| (qos_min - se).max(0.0)).sum();
    ee - penalty * violation
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logistic_map_examples() {
        let mut r = rng::stream(1, 0);
        let pos = chaotic_init(10, 64, 4.0, &mut r).unwrap();
        for p in &pos {
            assert!(p.iter().all(|&x| (-PI..=PI).contains(&x)));
        }
        // kappa = 0.3 -> 4 * 0.3 * 0.7 = 0.84.
        let k = 0.3f64;
        assert!((4.0 * k * (1.0 - k) - 0.84).abs() < 1e-15);
        // 0.5 is a forbidden seed: it maps to 1 then sticks at 0.
        let k = 0.5f64;
        let next = 4.0 * k * (1.0 - k);
        assert_eq!(next, 1.0);
        assert_eq!(4.0 * next * (1.0 - next), 0.0);
    }

    #[test]
    fn inertia_examples() {
        assert!((adaptive_inertia(100, 100, 0.4, 0.9) - 0.4).abs() < 1e-12);
        let w0 = adaptive_inertia(0, 100, 0.4, 0.9);
        assert!((w0 - 0.8933).abs() < 1e-4, "omega(0) = {w0}");
        let mut prev = f64::INFINITY;
        for t in 0..=100 {
            let w = adaptive_inertia(t, 100, 0.4, 0.9);
            assert!(w <= prev + 1e-15, "inertia must not increase");
            prev = w;
        }
    }

    #[test]
    fn velocity_fixed_point_and_clamp() {
        let cfg = SwarmConfig::default();
        let mut state = SwarmState::new(vec![vec![1.0, -0.5]]);
        state.pbest_pos = vec![vec![1.0, -0.5]];
        state.gbest_pos = vec![1.0, -0.5];
        let mut r = rng::stream(2, 0);
        velocity_update(&mut state, 0.9, &cfg, &mut r);
        assert_eq!(state.velocities[0], vec![0.0, 0.0], "fixed point");

        // Clamp: a raw component of 7 truncates to v_max = 4.
        let mut state = SwarmState::new(vec![vec![0.0]]);
        state.velocities[0][0] = 7.0;
        state.pbest_pos = vec![vec![0.0]];
        state.gbest_pos = vec![0.0];
        velocity_update(&mut state, 1.0, &cfg, &mut r);
        assert!(state.velocities[0][0] <= 4.0);

        // omega = 0 leaves pure attraction toward the bests.
        let mut state = SwarmState::new(vec![vec![0.0]]);
        state.velocities[0][0] = 3.0;
        state.pbest_pos = vec![vec![1.0]];
        state.gbest_pos = vec![1.0];
        let cfg2 = SwarmConfig {
            c1: 1.0,
            c2: 1.0,
            ..SwarmConfig::default()
        };
        velocity_update(&mut state, 0.0, &cfg2, &mut r);
        assert!(state.velocities[0][0] > 0.0 && state.velocities[0][0] <= 2.0);
    }

    #[test]
    fn position_wraps_periodically() {
        let mut state = SwarmState::new(vec![vec![PI - 0.1]]);
        state.velocities[0][0] = 0.2;
        position_update(&mut state);
        assert!((state.positions[0][0] - (-PI + 0.1)).abs() < 1e-12);
        let mut state = SwarmState::new(vec![vec![0.4]]);
        position_update(&mut state);
        assert_eq!(state.positions[0][0], 0.4, "zero velocity keeps position");
    }

    #[test]
    fn wrap_preserves_phase_objective() {
        // Any 2 pi-periodic objective takes the same value on wrapped angles.
        let objective = |x: &[f64]| x.iter().map(|t| t.cos() + (2.0 * t).sin()).sum::<f64>();
        let raw = vec![5.0, -9.3, 12.0];
        let wrapped: Vec<f64> = raw.iter().map(|&t| wrap_angle(t)).collect();
        assert!((objective(&raw) - objective(&wrapped)).abs() < 1e-10);
        assert!(wrapped.iter().all(|&t| (-PI..PI).contains(&t)));
    }

    #[test]
    fn mutation_examples() {
        let mut r = rng::stream(5, 0);
        let mut state = SwarmState::new(vec![vec![0.5; 3], vec![-1.0; 3]]);
        state.fitness = vec![1.0, 0.0];
        state.gbest_pos = vec![0.5; 3];
        state.gbest_fit = 1.0;
        // t = T_max: sigma = 0, the worst becomes an exact copy of gbest.
        mutate_worst(&mut state, 50, 50, &mut r);
        assert_eq!(state.positions[1], vec![0.5; 3]);
        assert_eq!(state.positions[0], vec![0.5; 3], "best untouched");
        // t = 0: sigma = 2 pi.
        assert!((2.0 * PI * (1.0 - 0.0) - 2.0 * PI).abs() < 1e-15);
    }

    #[test]
    fn reset_examples() {
        let mut r = rng::stream(6, 0);
        let mut state = SwarmState::new(vec![vec![1.0; 2], vec![2.0; 2]]);
        state.pbest_pos = vec![vec![0.3; 2], vec![0.7; 2]];
        state.gbest_pos = vec![0.3; 2];
        state.stall = vec![0, 5];
        reset_stalled(&mut state, 2, &mut r);
        assert_eq!(state.positions[0], vec![1.0; 2], "below threshold untouched");
        assert_eq!(state.stall[1], 0, "counter reset");
        assert!(state.positions[1].iter().all(|&t| (-PI..PI).contains(&t)));
        // Degenerate gbest = pbest: the redraw collapses to zero.
        let mut state = SwarmState::new(vec![vec![1.0; 2], vec![2.0; 2]]);
        state.pbest_pos = vec![vec![0.3; 2], vec![0.3; 2]];
        state.gbest_pos = vec![0.3; 2];
        state.stall = vec![3, 0];
        reset_stalled(&mut state, 2, &mut r);
        assert_eq!(state.positions[0], vec![0.0; 2]);
    }

    fn quadratic_target(target: Vec<f64>) -> impl Fn(&[f64]) -> Result<f64> + Sync {
        move |x: &[f64]| {
            Ok(-x.iter()
                .zip(&target)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>())
        }
    }

    #[test]
    fn csa_converges_on_synthetic_quadratic() {
        let target = vec![0.7, -1.9, 2.4, 0.1];
        let objective = quadratic_target(target.clone());
        let cfg = SwarmConfig {
            particles: 20,
            t_max: 200,
            patience: 200,
            ..SwarmConfig::default()
        };
        let res = run_csa_pso(&objective, 4, &cfg, 3).unwrap();
        for d in 0..4 {
            assert!(
                (res.best_position[d] - target[d]).abs() < 1e-2,
                "coordinate {d}: {} vs {}",
                res.best_position[d],
                target[d]
            );
        }
        for w in res.trace.windows(2) {
            assert!(w[1].gbest >= w[0].gbest, "gbest must never decrease");
        }
    }

    #[test]
    fn pso_converges_looser_and_keeps_fixed_inertia() {
        let target = vec![0.5, -0.5];
        let objective = quadratic_target(target.clone());
        let cfg = SwarmConfig {
            particles: 20,
            t_max: 200,
            patience: 200,
            ..SwarmConfig::default()
        };
        let res = run_pso(&objective, 2, &cfg, 7).unwrap();
        for d in 0..2 {
            assert!((res.best_position[d] - target[d]).abs() < 1e-1);
        }
        assert!(res.trace.iter().all(|r| r.omega == 0.7298));
        for w in res.trace.windows(2) {
            assert!(w[1].gbest >= w[0].gbest);
        }
    }

    #[test]
    fn runs_are_seed_deterministic() {
        let objective = quadratic_target(vec![1.0, 2.0, -2.0]);
        let cfg = SwarmConfig {
            particles: 8,
            t_max: 40,
            ..SwarmConfig::default()
        };
        let a = run_csa_pso(&objective, 3, &cfg, 11).unwrap();
        let b = run_csa_pso(&objective, 3, &cfg, 11).unwrap();
        assert_eq!(a.best_position, b.best_position);
        assert_eq!(a.trace.len(), b.trace.len());
        for (x, y) in a.trace.iter().zip(&b.trace) {
            assert_eq!(x.gbest.to_bits(), y.gbest.to_bits());
        }
    }

    #[test]
    fn early_stop_kicks_in_on_flat_objective() {
        let objective = |_x: &[f64]| Ok(1.0);
        let cfg = SwarmConfig {
            particles: 5,
            t_max: 500,
            patience: 10,
            ..SwarmConfig::default()
        };
        let res = run_csa_pso(&objective, 3, &cfg, 1).unwrap();
        assert!(res.trace.len() <= 12, "ran {} iterations", res.trace.len());
    }

    #[test]
    fn penalty_handles_qos() {
        let fit = penalized_fitness(5.0, &[1.0, 0.2], 0.5, 100.0);
        assert!((fit - (5.0 - 100.0 * 0.3)).abs() < 1e-12);
        let ok = penalized_fitness(5.0, &[1.0, 0.8], 0.5, 100.0);
        assert_eq!(ok, 5.0);
    }
}

#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn wrap_angle_is_periodic_and_in_range(theta in -50.0..50.0f64, k in -3i32..=3) {
            let w = wrap_angle(theta);
            prop_assert!((-PI..PI).contains(&w));
            let shifted = wrap_angle(theta + k as f64 * 2.0 * PI);
            // Same point on the circle.
            let d = (w - shifted).abs();
            prop_assert!(d < 1e-9 || (d - 2.0 * PI).abs() < 1e-9);
            // Idempotent.
            prop_assert_eq!(wrap_angle(w).to_bits(), w.to_bits());
        }
    }
}
