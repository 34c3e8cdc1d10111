//! Discrete algorithms: ASGD with geometric staleness, mini-batch ASGD,
//! momentum SGD, and the exact reformulations through expected reads and
//! auxiliary gradient accumulators.
//!
//! Pre-history convention: `x_l = x_0` for all `l <= 0`, so a delayed read
//! with staleness larger than the current step returns the initial point.
//! Full iterate history is retained; staleness is unbounded.

use crate::objectives::Objective;
use crate::rng::SimRng;
use crate::{Error, Result, Vector};
use rand::Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

/// Geometric staleness law: `P(tau = l) = (1 - mu) mu^l`, `l >= 0`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StalenessModel {
    mu: f64,
}

impl StalenessModel {
    pub fn new(mu: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&mu) {
            return Err(Error::Parameter(format!("mu must lie in [0, 1), got {mu}")));
        }
        Ok(Self { mu })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Expected staleness `mu / (1 - mu)`.
    pub fn mean(&self) -> f64 {
        self.mu / (1.0 - self.mu)
    }
}

/// Draw one staleness value.
pub fn sample_staleness(model: &StalenessModel, rng: &mut SimRng) -> u64 {
    if model.mu == 0.0 {
        return 0;
    }
    Geometric::new(1.0 - model.mu)
        .expect("valid geometric parameter")
        .sample(rng)
}

/// Run parameters shared by the discrete simulators.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    /// Step size (eta, or eta' for MSGD).
    pub eta: f64,
    pub steps: usize,
    pub x0: Vector,
    /// Master seed for self-seeded runs.
    pub seed: u64,
    /// Per-iteration batch sizes `1 + u_k` (mini-batch ASGD only).
    pub batch_sizes: Option<Vec<u32>>,
    /// Momentum parameter mu' (MSGD only).
    pub momentum_mu_prime: Option<f64>,
    /// Diagnostic: replace batch sampling by full enumeration of components.
    pub enumerate_batches: bool,
    /// Draw a fresh staleness per gradient inside a batch instead of one per
    /// step. Not the reading used by the update rule here; kept for
    /// sensitivity studies.
    pub per_gradient_staleness: bool,
}

impl RunConfig {
    pub fn new(eta: f64, steps: usize, x0: Vector, seed: u64) -> Self {
        Self {
            eta,
            steps,
            x0,
            seed,
            batch_sizes: None,
            momentum_mu_prime: None,
            enumerate_batches: false,
            per_gradient_staleness: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if !self.eta.is_finite() || self.eta < 0.0 {
            return Err(Error::Parameter(format!(
                "step size must be finite and >= 0, got {}",
                self.eta
            )));
        }
        if self.x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        if let Some(b) = &self.batch_sizes {
            if b.len() < self.steps {
                return Err(Error::Parameter(format!(
                    "batch schedule has {} entries for {} steps",
                    b.len(),
                    self.steps
                )));
            }
            if b.iter().any(|&v| v == 0) {
                return Err(Error::Parameter("batch sizes must be >= 1".into()));
            }
        }
        Ok(())
    }
}

/// Iterates plus the per-step draws that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// `x_0 .. x_K`.
    pub iterates: Vec<Vector>,
    /// Sampled staleness per step (empty for MSGD; more than one entry per
    /// step only with `per_gradient_staleness`).
    pub staleness_log: Vec<Vec<u64>>,
    /// Sampled component indices per step (len 1 without batching).
    pub component_log: Vec<Vec<u32>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.iterates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterates.is_empty()
    }

    pub fn final_iterate(&self) -> &Vector {
        self.iterates.last().expect("nonempty trajectory")
    }
}

/// Pre-drawn `(gamma_k, tau_k)` streams, for runs that must share randomness.
#[derive(Debug, Clone)]
pub struct DrawStreams {
    pub taus: Vec<u64>,
    pub gammas: Vec<u32>,
}

/// Sample `(gamma, tau)` streams for `steps` iterations.
pub fn sample_draws(
    model: &StalenessModel,
    n_components: usize,
    steps: usize,
    rng: &mut SimRng,
) -> DrawStreams {
    let mut taus = Vec::with_capacity(steps);
    let mut gammas = Vec::with_capacity(steps);
    for _ in 0..steps {
        taus.push(sample_staleness(model, rng));
        gammas.push(rng.random_range(0..n_components as u32));
    }
    DrawStreams { taus, gammas }
}

fn delayed_index(k: usize, tau: u64) -> usize {
    k.saturating_sub(tau as usize)
}

/// ASGD: `x_{k+1} = x_k - eta * grad f_{gamma_k}(x_{k - tau_k})`.
pub fn asgd_run(
    obj: &Objective,
    model: &StalenessModel,
    cfg: &RunConfig,
    rng: &mut SimRng,
) -> Result<Trajectory> {
    if cfg.batch_sizes.is_some() {
        return Err(Error::Parameter(
            "batch schedule present; use asgd_minibatch_run".into(),
        ));
    }
    cfg.validate()?;
    let draws = sample_draws(model, obj.n_components(), cfg.steps, rng);
    asgd_run_with_draws(obj, cfg, &draws)
}

/// ASGD driven by pre-drawn `(gamma, tau)` streams.
pub fn asgd_run_with_draws(
    obj: &Objective,
    cfg: &RunConfig,
    draws: &DrawStreams,
) -> Result<Trajectory> {
    cfg.validate()?;
    let d = obj.dim();
    let mut iterates = Vec::with_capacity(cfg.steps + 1);
    iterates.push(cfg.x0.clone());
    let mut grad = Vector::zeros(d);
    let mut staleness_log = Vec::with_capacity(cfg.steps);
    let mut component_log = Vec::with_capacity(cfg.steps);
    for k in 0..cfg.steps {
        let tau = draws.taus[k];
        let gamma = draws.gammas[k];
        let read = &iterates[delayed_index(k, tau)];
        obj.grad_component_into(gamma as usize, read, &mut grad)?;
        let mut next = iterates[k].clone();
        next.axpy(-cfg.eta, &grad, 1.0);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { step: k + 1 });
        }
        iterates.push(next);
        staleness_log.push(vec![tau]);
        component_log.push(vec![gamma]);
    }
    Ok(Trajectory {
        iterates,
        staleness_log,
        component_log,
    })
}

/// Mini-batch ASGD:
/// `x_{k+1} = x_k - eta/(1+u_k) * sum_j grad f_{gamma_j}(x_{k - tau_k})`,
/// with one shared staleness per step and components drawn i.i.d. with
/// replacement.
pub fn asgd_minibatch_run(
    obj: &Objective,
    model: &StalenessModel,
    cfg: &RunConfig,
    rng: &mut SimRng,
) -> Result<Trajectory> {
    cfg.validate()?;
    let batches = cfg
        .batch_sizes
        .as_ref()
        .ok_or_else(|| Error::Parameter("mini-batch run needs batch_sizes".into()))?;
    let d = obj.dim();
    let n = obj.n_components();
    let mut iterates = Vec::with_capacity(cfg.steps + 1);
    iterates.push(cfg.x0.clone());
    let mut grad = Vector::zeros(d);
    let mut acc = Vector::zeros(d);
    let mut staleness_log = Vec::with_capacity(cfg.steps);
    let mut component_log = Vec::with_capacity(cfg.steps);
    for k in 0..cfg.steps {
        let b = batches[k] as usize;
        let mut taus = vec![sample_staleness(model, rng)];
        if cfg.per_gradient_staleness {
            for _ in 1..b {
                taus.push(sample_staleness(model, rng));
            }
        }
        let gammas: Vec<u32> = if cfg.enumerate_batches {
            (0..b as u32).map(|j| j % n as u32).collect()
        } else {
            (0..b).map(|_| rng.random_range(0..n as u32)).collect()
        };
        acc.fill(0.0);
        for (j, &gamma) in gammas.iter().enumerate() {
            let tau = if cfg.per_gradient_staleness {
                taus[j]
            } else {
                taus[0]
            };
            let read = &iterates[delayed_index(k, tau)];
            obj.grad_component_into(gamma as usize, read, &mut grad)?;
            acc += &grad;
        }
        let mut next = iterates[k].clone();
        next.axpy(-cfg.eta / b as f64, &acc, 1.0);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { step: k + 1 });
        }
        iterates.push(next);
        staleness_log.push(taus);
        component_log.push(gammas);
    }
    Ok(Trajectory {
        iterates,
        staleness_log,
        component_log,
    })
}

/// Momentum SGD: `v_{k+1} = mu' v_k - eta' grad f_{gamma_k}(x_k)`,
/// `x_{k+1} = x_k + v_{k+1}`, `v_0 = 0`. No staleness.
pub fn msgd_run(obj: &Objective, cfg: &RunConfig, rng: &mut SimRng) -> Result<Trajectory> {
    cfg.validate()?;
    let mu_prime = cfg
        .momentum_mu_prime
        .ok_or_else(|| Error::Parameter("MSGD run needs momentum_mu_prime".into()))?;
    if !(0.0..1.0).contains(&mu_prime) {
        return Err(Error::Parameter(format!(
            "momentum parameter must lie in [0, 1), got {mu_prime}"
        )));
    }
    let d = obj.dim();
    let n = obj.n_components();
    let mut iterates = Vec::with_capacity(cfg.steps + 1);
    iterates.push(cfg.x0.clone());
    let mut velocity = Vector::zeros(d);
    let mut grad = Vector::zeros(d);
    let mut component_log = Vec::with_capacity(cfg.steps);
    for k in 0..cfg.steps {
        let gamma = rng.random_range(0..n as u32);
        obj.grad_component_into(gamma as usize, &iterates[k], &mut grad)?;
        velocity *= mu_prime;
        velocity.axpy(-cfg.eta, &grad, 1.0);
        let next = &iterates[k] + &velocity;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { step: k + 1 });
        }
        iterates.push(next);
        component_log.push(vec![gamma]);
    }
    Ok(Trajectory {
        iterates,
        staleness_log: Vec::new(),
        component_log,
    })
}

/// Expected-read sequence: `m_0 = x_0`, `m_{k+1} = (1-mu) x_{k+1} + mu m_k`
/// (the constant pre-history collapses the geometric sum at k = 0).
pub fn expected_read_sequence(iterates: &[Vector], mu: f64) -> Vec<Vector> {
    let mut out = Vec::with_capacity(iterates.len());
    if iterates.is_empty() {
        return out;
    }
    out.push(iterates[0].clone());
    for x in &iterates[1..] {
        let prev = out.last().unwrap();
        out.push(x * (1.0 - mu) + prev * mu);
    }
    out
}

/// Auxiliary accumulator proportional to the expected gradient:
/// `y_0 = -alpha grad f(x_0)`,
/// `y_{k+1} = mu y_k - alpha (1-mu) grad f(x_{k+1})`,
/// with `alpha = sqrt(eta / (1-mu))`.
pub fn auxiliary_y_sequence(
    iterates: &[Vector],
    obj: &Objective,
    mu: f64,
    eta: f64,
) -> Result<Vec<Vector>> {
    let alpha = (eta / (1.0 - mu)).sqrt();
    let mut out = Vec::with_capacity(iterates.len());
    if iterates.is_empty() {
        return Ok(out);
    }
    out.push(obj.grad_full(&iterates[0])? * (-alpha));
    for x in &iterates[1..] {
        let prev = out.last().unwrap();
        out.push(prev * mu - obj.grad_full(x)? * (alpha * (1.0 - mu)));
    }
    Ok(out)
}

/// Invert [`expected_read_sequence`]: `x_{k+1} = (m_{k+1} - mu m_k)/(1-mu)`.
pub fn reconstruct_from_expected_read(m_seq: &[Vector], mu: f64) -> Result<Vec<Vector>> {
    if !(0.0..1.0).contains(&mu) {
        return Err(Error::Parameter(format!(
            "mu must lie in [0, 1) to invert, got {mu}"
        )));
    }
    let mut out = Vec::with_capacity(m_seq.len());
    if m_seq.is_empty() {
        return Ok(out);
    }
    out.push(m_seq[0].clone());
    for k in 1..m_seq.len() {
        out.push((&m_seq[k] - &m_seq[k - 1] * mu) / (1.0 - mu));
    }
    Ok(out)
}

/// The `(m, p)` reformulation of ASGD on the SME time grid
/// `dt = sqrt(eta (1-mu))`:
///
/// ```text
/// p_{k+1} = p_k - dt sqrt((1-mu)/eta) p_k - dt grad f(m_k)
///               + dt (grad f(m_k) - grad f_{gamma_k}(x_{k - tau_k}))
/// m_{k+1} = m_k + dt p_{k+1}
/// ```
///
/// driven by the same `(gamma, tau)` streams as a direct ASGD run, with the
/// iterates reconstructed from `m` for the delayed reads. Algebraically
/// identical to ASGD for any objective. Returns `(m, p, x)` sequences.
pub fn expected_read_system_run(
    obj: &Objective,
    mu: f64,
    cfg: &RunConfig,
    draws: &DrawStreams,
) -> Result<(Vec<Vector>, Vec<Vector>, Vec<Vector>)> {
    cfg.validate()?;
    if !(0.0..1.0).contains(&mu) {
        return Err(Error::Parameter(format!("mu must lie in [0, 1), got {mu}")));
    }
    let d = obj.dim();
    let dt = (cfg.eta * (1.0 - mu)).sqrt();
    let friction = ((1.0 - mu) / cfg.eta).sqrt();
    let mut m_seq = vec![cfg.x0.clone()];
    // constant pre-history: p_0 = (m_0 - m_{-1})/dt = 0
    let mut p_seq = vec![Vector::zeros(d)];
    let mut x_seq = vec![cfg.x0.clone()];
    let mut grad_comp = Vector::zeros(d);
    let mut grad_m = Vector::zeros(d);
    for k in 0..cfg.steps {
        let read = &x_seq[delayed_index(k, draws.taus[k])];
        obj.grad_component_into(draws.gammas[k] as usize, read, &mut grad_comp)?;
        obj.grad_full_into(&m_seq[k], &mut grad_m)?;
        let mut p_next = p_seq[k].clone();
        p_next.axpy(-dt * friction, &p_seq[k], 1.0);
        p_next.axpy(-dt, &grad_m, 1.0);
        // noise term dt (grad f(m_k) - grad f_gamma(read))
        p_next.axpy(dt, &grad_m, 1.0);
        p_next.axpy(-dt, &grad_comp, 1.0);
        let m_next = &m_seq[k] + &p_next * dt;
        let x_next = (&m_next - &m_seq[k] * mu) / (1.0 - mu);
        if x_next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { step: k + 1 });
        }
        p_seq.push(p_next);
        m_seq.push(m_next);
        x_seq.push(x_next);
    }
    Ok((m_seq, p_seq, x_seq))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{builtin_objective, BuiltinParams};
    use crate::rng::trajectory_rng;

    fn v1(x: f64) -> Vector {
        Vector::from_vec(vec![x])
    }

    fn quad1d() -> Objective {
        builtin_objective("quad1d", &BuiltinParams::default()).unwrap()
    }

    #[test]
    fn staleness_degenerate_and_mean() {
        let model = StalenessModel::new(0.0).unwrap();
        let mut rng = trajectory_rng(1, 0);
        assert!((0..1000).all(|_| sample_staleness(&model, &mut rng) == 0));

        let model = StalenessModel::new(0.9).unwrap();
        let mut rng = trajectory_rng(1, 1);
        let n = 1_000_000u64;
        let mut sum = 0u64;
        let mut zeros = 0u64;
        for _ in 0..n {
            let t = sample_staleness(&model, &mut rng);
            sum += t;
            zeros += (t == 0) as u64;
        }
        let mean = sum as f64 / n as f64;
        assert!((mean - 9.0).abs() < 0.05, "empirical mean {mean}");
        let p0 = zeros as f64 / n as f64;
        assert!((p0 - 0.1).abs() < 0.002, "empirical P(tau=0) {p0}");
    }

    #[test]
    fn staleness_rejects_bad_mu() {
        assert!(StalenessModel::new(1.0).is_err());
        assert!(StalenessModel::new(-0.1).is_err());
    }

    #[test]
    fn asgd_deterministic_single_component() {
        // f = x^2 single component: x_{k+1} = 0.8 x_k at eta = 0.1
        let obj = builtin_objective(
            "scaled-quad",
            &BuiltinParams {
                a: Some(2.0),
                ..Default::default()
            },
        )
        .unwrap();
        let model = StalenessModel::new(0.0).unwrap();
        let cfg = RunConfig::new(0.1, 50, v1(1.0), 3);
        let mut rng = trajectory_rng(3, 0);
        let traj = asgd_run(&obj, &model, &cfg, &mut rng).unwrap();
        for (k, x) in traj.iterates.iter().enumerate() {
            assert!((x[0] - 0.8f64.powi(k as i32)).abs() < 1e-12);
        }
    }

    #[test]
    fn asgd_zero_step_size_is_constant() {
        let obj = quad1d();
        let model = StalenessModel::new(0.7).unwrap();
        let cfg = RunConfig::new(0.0, 100, v1(0.3), 5);
        let mut rng = trajectory_rng(5, 0);
        let traj = asgd_run(&obj, &model, &cfg, &mut rng).unwrap();
        assert!(traj.iterates.iter().all(|x| x[0] == 0.3));
    }

    #[test]
    fn asgd_divergence_reports_step() {
        // explosive step size on the quartic
        let obj = builtin_objective("quartic1d", &BuiltinParams::default()).unwrap();
        let model = StalenessModel::new(0.0).unwrap();
        let cfg = RunConfig::new(10.0, 1000, v1(2.0), 5);
        let mut rng = trajectory_rng(5, 0);
        match asgd_run(&obj, &model, &cfg, &mut rng) {
            Err(Error::Diverged { step }) => assert!(step >= 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn asgd_is_deterministic_given_seed() {
        let obj = quad1d();
        let model = StalenessModel::new(0.9).unwrap();
        let cfg = RunConfig::new(0.01, 500, v1(1.0), 42);
        let a = asgd_run(&obj, &model, &cfg, &mut trajectory_rng(42, 0)).unwrap();
        let b = asgd_run(&obj, &model, &cfg, &mut trajectory_rng(42, 0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn minibatch_of_one_matches_asgd() {
        let obj = quad1d();
        let model = StalenessModel::new(0.8).unwrap();
        let mut cfg = RunConfig::new(0.02, 300, v1(1.0), 9);
        let plain = asgd_run(&obj, &model, &cfg, &mut trajectory_rng(9, 0)).unwrap();
        cfg.batch_sizes = Some(vec![1; 300]);
        let batched = asgd_minibatch_run(&obj, &model, &cfg, &mut trajectory_rng(9, 0)).unwrap();
        assert_eq!(plain.iterates, batched.iterates);
    }

    #[test]
    fn enumerated_full_batch_is_full_gradient_descent() {
        let obj = quad1d();
        let model = StalenessModel::new(0.0).unwrap();
        let mut cfg = RunConfig::new(0.05, 40, v1(1.0), 9);
        cfg.batch_sizes = Some(vec![2; 40]);
        cfg.enumerate_batches = true;
        let traj = asgd_minibatch_run(&obj, &model, &cfg, &mut trajectory_rng(9, 0)).unwrap();
        // full gradient of quad1d is 2x: x_{k+1} = (1 - 0.1) x_k
        for (k, x) in traj.iterates.iter().enumerate() {
            assert!((x[0] - 0.9f64.powi(k as i32)).abs() < 1e-12);
        }
    }

    #[test]
    fn batch_noise_variance_scales_inversely() {
        // per-step noise variance at a fixed read point scales as Sigma/(1+u)
        let obj = builtin_objective("linquad", &BuiltinParams::default()).unwrap();
        let x = v1(1.0);
        let sigma = obj.component_covariance(&x).unwrap()[(0, 0)];
        let mean = obj.grad_full(&x).unwrap()[0];
        let mut rng = trajectory_rng(11, 0);
        for &b in &[1usize, 4, 10] {
            let draws = 100_000;
            let mut acc = 0.0;
            for _ in 0..draws {
                let mut g = 0.0;
                for _ in 0..b {
                    let i = rng.random_range(0..obj.n_components());
                    g += obj.grad_component(i, &x).unwrap()[0];
                }
                let dev = g / b as f64 - mean;
                acc += dev * dev;
            }
            let var = acc / draws as f64;
            let expect = sigma / b as f64;
            assert!(
                (var - expect).abs() / expect < 0.05,
                "batch {b}: var {var}, expected {expect}"
            );
        }
    }

    #[test]
    fn msgd_limits() {
        let obj = builtin_objective(
            "scaled-quad",
            &BuiltinParams {
                a: Some(2.0),
                ..Default::default()
            },
        )
        .unwrap();
        // mu' = 0: plain gradient descent recursion
        let mut cfg = RunConfig::new(0.1, 30, v1(1.0), 2);
        cfg.momentum_mu_prime = Some(0.0);
        let traj = msgd_run(&obj, &cfg, &mut trajectory_rng(2, 0)).unwrap();
        for (k, x) in traj.iterates.iter().enumerate() {
            assert!((x[0] - 0.8f64.powi(k as i32)).abs() < 1e-12);
        }
        // eta' = 0: constant
        let mut cfg = RunConfig::new(0.0, 30, v1(0.4), 2);
        cfg.momentum_mu_prime = Some(0.9);
        let traj = msgd_run(&obj, &cfg, &mut trajectory_rng(2, 0)).unwrap();
        assert!(traj.iterates.iter().all(|x| x[0] == 0.4));
    }

    #[test]
    fn expected_read_examples() {
        let c = vec![v1(2.5); 5];
        for m in expected_read_sequence(&c, 0.6) {
            assert_eq!(m[0], 2.5);
        }

        let xs = vec![v1(0.0), v1(1.0)];
        let m = expected_read_sequence(&xs, 0.5);
        assert_eq!(m[0][0], 0.0);
        assert_eq!(m[1][0], 0.5);

        let xs = vec![v1(0.0), v1(1.0), v1(2.0)];
        let m = expected_read_sequence(&xs, 0.9);
        assert!((m[1][0] - 0.1).abs() < 1e-15);
        assert!((m[2][0] - 0.29).abs() < 1e-15);
    }

    #[test]
    fn reconstruct_inverts_expected_read() {
        let mu = 0.9;
        let m = vec![v1(0.0), v1(0.1), v1(0.29)];
        let x = reconstruct_from_expected_read(&m, mu).unwrap();
        assert!((x[0][0]).abs() < 1e-12);
        assert!((x[1][0] - 1.0).abs() < 1e-12);
        assert!((x[2][0] - 2.0).abs() < 1e-12);

        // round-trip on a random trajectory
        let mut rng = trajectory_rng(17, 0);
        let xs: Vec<Vector> = (0..200).map(|_| v1(rng.random_range(-2.0..2.0))).collect();
        for &mu in &[0.0, 0.35, 0.9, 0.99] {
            let m = expected_read_sequence(&xs, mu);
            let back = reconstruct_from_expected_read(&m, mu).unwrap();
            let err = xs
                .iter()
                .zip(&back)
                .map(|(a, b)| (a - b).amax())
                .fold(0.0f64, f64::max);
            assert!(err <= 1e-12, "round-trip error {err} at mu={mu}");
        }

        assert!(reconstruct_from_expected_read(&m, 1.0).is_err());
    }

    #[test]
    fn auxiliary_y_examples() {
        let obj = quad1d();
        // frozen at the stationary point of f: y = 0 throughout
        let xs = vec![v1(0.0); 10];
        let ys = auxiliary_y_sequence(&xs, &obj, 0.5, 0.125).unwrap();
        assert!(ys.iter().all(|y| y[0] == 0.0));

        // alpha = 0.5: y_0 = -1, y_1 = 0.5*(-1) - 0.25*0 = -0.5
        let xs = vec![v1(1.0), v1(0.0)];
        let ys = auxiliary_y_sequence(&xs, &obj, 0.5, 0.125).unwrap();
        assert!((ys[0][0] + 1.0).abs() < 1e-15);
        assert!((ys[1][0] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn auxiliary_y_matches_gradient_at_expected_read_for_linear() {
        // for linear gradients y_k = -alpha grad f(m_k)
        let obj = quad1d();
        let (mu, eta) = (0.8f64, 0.04f64);
        let alpha = (eta / (1.0 - mu)).sqrt();
        let mut rng = trajectory_rng(23, 0);
        let xs: Vec<Vector> = (0..100).map(|_| v1(rng.random_range(-1.0..1.0))).collect();
        let ys = auxiliary_y_sequence(&xs, &obj, mu, eta).unwrap();
        let ms = expected_read_sequence(&xs, mu);
        for (y, m) in ys.iter().zip(&ms) {
            assert!((y[0] - (-alpha * 2.0 * m[0])).abs() < 1e-12);
        }
    }

    #[test]
    fn expected_read_system_matches_asgd() {
        let obj = quad1d();
        let model = StalenessModel::new(0.9).unwrap();
        let cfg = RunConfig::new(0.01, 2000, v1(1.0), 31);
        let draws = sample_draws(&model, 2, cfg.steps, &mut trajectory_rng(31, 0));
        let direct = asgd_run_with_draws(&obj, &cfg, &draws).unwrap();
        let (m_seq, _p, x_seq) = expected_read_system_run(&obj, 0.9, &cfg, &draws).unwrap();
        let err = direct
            .iterates
            .iter()
            .zip(&x_seq)
            .map(|(a, b)| (a - b).amax())
            .fold(0.0f64, f64::max);
        assert!(err <= 1e-10, "reconstruction error {err}");
        // m is the expected-read sequence of the reconstructed x
        let ms = expected_read_sequence(&x_seq, 0.9);
        let err = ms
            .iter()
            .zip(&m_seq)
            .map(|(a, b)| (a - b).amax())
            .fold(0.0f64, f64::max);
        assert!(err <= 1e-10);
    }

    #[test]
    fn noise_term_is_centered() {
        // empirical mean of grad f(m_k) - grad f_gamma(x_{k-tau}) over
        // independent redraws at a fixed history is 0 within 4 standard errors
        let obj = quad1d();
        let model = StalenessModel::new(0.85).unwrap();
        let cfg = RunConfig::new(0.01, 60, v1(1.0), 37);
        let mut rng = trajectory_rng(37, 0);
        let base = asgd_run(&obj, &model, &cfg, &mut rng).unwrap();
        let k = base.iterates.len() - 1;
        let ms = expected_read_sequence(&base.iterates, model.mu());
        let gm = obj.grad_full(&ms[k]).unwrap()[0];

        let redraws = 100_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..redraws {
            let tau = sample_staleness(&model, &mut rng);
            let gamma = rng.random_range(0..2usize);
            let read = &base.iterates[delayed_index(k, tau)];
            let noise = gm - obj.grad_component(gamma, read).unwrap()[0];
            sum += noise;
            sumsq += noise * noise;
        }
        let mean = sum / redraws as f64;
        let var = sumsq / redraws as f64 - mean * mean;
        let se = (var / redraws as f64).sqrt();
        assert!(
            mean.abs() <= 4.0 * se,
            "noise mean {mean} exceeds 4 se = {}",
            4.0 * se
        );
    }
}
