//! Maximum-likelihood fit of the nested-logit parameters.
//!
//! The search runs BFGS on `(β, ln μ)` (plus free ASCs when enabled), so
//! the nest scales stay positive without explicit bounds. The objective is
//! the mean negative log-likelihood; its gradient is analytic.

use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Mode, Nest, NlEvaluation, NlParams, Observation};
use crate::error::{Error, Result};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimationConfig {
    /// Estimate ASCs for every mode but walk. Off by default: all ASCs
    /// stay at their initial values.
    pub free_asc: bool,
    /// Number of BFGS runs: the initial point plus jittered copies.
    pub starts: usize,
    /// Stop once the Euclidean norm of the mean log-likelihood gradient
    /// falls below this.
    pub gradient_tolerance: f64,
    pub max_iterations: usize,
    pub jitter: f64,
    pub seed: u64,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        Self { free_asc: false, starts: 3, gradient_tolerance: 1e-6, max_iterations: 500, jitter: 0.25, seed: 0x5eed }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimationStatus {
    Converged,
    /// No descent step could be found before the gradient tolerance was
    /// met; the likelihood is flat or badly conditioned there.
    Flat,
    IterationLimit,
    /// The data cannot pin down the parameters; the initial guess is
    /// returned unchanged.
    NotIdentified,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub params: NlParams,
    pub log_likelihood: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub status: EstimationStatus,
}

#[derive(Clone, Copy)]
struct Layout {
    free_asc: bool,
}

const N_CORE: usize = 6;

impl Layout {
    fn dim(&self) -> usize {
        N_CORE + if self.free_asc { Mode::COUNT - 1 } else { 0 }
    }

    fn pack(&self, p: &NlParams) -> Vec<f64> {
        let mut theta = vec![p.beta_ovtt, p.beta_ivtt, p.beta_cost, math::ln(p.mu[0]), math::ln(p.mu[1]), math::ln(p.mu[2])];
        if self.free_asc {
            theta.extend_from_slice(&p.asc[1..]);
        }
        theta
    }

    fn unpack(&self, theta: &[f64], template: &NlParams) -> NlParams {
        let mut p = *template;
        p.beta_ovtt = theta[0];
        p.beta_ivtt = theta[1];
        p.beta_cost = theta[2];
        for n in 0..Nest::COUNT {
            p.mu[n] = math::exp(theta[3 + n]);
        }
        if self.free_asc {
            p.asc[0] = 0.0;
            p.asc[1..].copy_from_slice(&theta[N_CORE..]);
        }
        p
    }
}

/// Mean negative log-likelihood and its gradient in packed coordinates.
fn objective(layout: Layout, template: &NlParams, obs: &[Observation], theta: &[f64], grad: &mut [f64]) -> f64 {
    let params = layout.unpack(theta, template);
    grad.iter_mut().for_each(|g| *g = 0.0);
    let mut ll = 0.0;
    for o in obs {
        let Ok(eval) = NlEvaluation::new(&params.mu, &params.utilities(&o.attributes)) else {
            return f64::INFINITY;
        };
        let j = o.chosen;
        let lp = eval.log_prob[j.index()];
        if !lp.is_finite() {
            return f64::INFINITY;
        }
        ll += lp;
        for k in o.attributes.available() {
            let d = eval.dlogp_dv(j, k);
            let a = o.attributes.get(k);
            grad[0] += d * a.ovtt;
            grad[1] += d * a.ivtt;
            grad[2] += d * a.cost;
            if layout.free_asc && k != Mode::Walk {
                grad[N_CORE + k.index() - 1] += d;
            }
        }
        for nest in Nest::ALL {
            grad[3 + nest.index()] += params.mu[nest.index()] * eval.dlogp_dmu(j, nest);
        }
    }
    let n = obs.len() as f64;
    grad.iter_mut().for_each(|g| *g = -*g / n);
    -ll / n
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    math::sqrt(dot(a, a))
}

struct Run {
    theta: Vec<f64>,
    value: f64,
    gradient_norm: f64,
    iterations: usize,
    status: EstimationStatus,
}

fn bfgs<F>(mut f: F, x0: Vec<f64>, tol: f64, max_iter: usize) -> Option<Run>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    if !fx.is_finite() {
        return None;
    }
    let mut h = identity(n);
    let mut first = true;
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];

    for iter in 0..max_iter {
        let gnorm = norm(&g);
        if gnorm <= tol {
            return Some(Run { theta: x, value: fx, gradient_norm: gnorm, iterations: iter, status: EstimationStatus::Converged });
        }
        let mut d: Vec<f64> = (0..n).map(|i| -dot(&h[i * n..(i + 1) * n], &g)).collect();
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            h = identity(n);
            d = g.iter().map(|v| -v).collect();
            slope = -gnorm * gnorm;
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            for i in 0..n {
                x_new[i] = x[i] + step * d[i];
            }
            let f_new = f(&x_new, &mut g_new);
            if f_new.is_finite() && f_new <= fx + 1e-4 * step * slope {
                accepted = Some(f_new);
                break;
            }
            step *= 0.5;
        }
        let Some(f_new) = accepted else {
            return Some(Run { theta: x, value: fx, gradient_norm: gnorm, iterations: iter, status: EstimationStatus::Flat });
        };

        let s: Vec<f64> = (0..n).map(|i| x_new[i] - x[i]).collect();
        let y: Vec<f64> = (0..n).map(|i| g_new[i] - g[i]).collect();
        let sy = dot(&s, &y);
        if sy > 1e-16 {
            if first {
                let scale = sy / dot(&y, &y);
                h.iter_mut().for_each(|v| *v *= scale);
                first = false;
            }
            bfgs_update(&mut h, &s, &y, sy);
        }
        let tiny_step = norm(&s) < 1e-14;
        x.copy_from_slice(&x_new);
        g.copy_from_slice(&g_new);
        fx = f_new;
        if tiny_step {
            return Some(Run { theta: x, value: fx, gradient_norm: norm(&g), iterations: iter + 1, status: EstimationStatus::Flat });
        }
    }
    let gradient_norm = norm(&g);
    let status = if gradient_norm <= tol { EstimationStatus::Converged } else { EstimationStatus::IterationLimit };
    Some(Run { theta: x, value: fx, gradient_norm, iterations: max_iter, status })
}

fn identity(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    m
}

/// `H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ`.
fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n).map(|i| dot(&h[i * n..(i + 1) * n], y)).collect();
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}

fn identified(observations: &[Observation]) -> bool {
    let first = observations[0].chosen;
    let varied = observations.iter().any(|o| o.chosen != first);
    let has_choice = observations.iter().any(|o| o.attributes.available().count() >= 2);
    varied && has_choice
}

/// Fits the nested-logit parameters to `observations`, starting from `init`.
///
/// Errors if the log-likelihood is not finite at `init`. Degenerate data
/// (a single chosen alternative, or no observation with a real choice)
/// returns `init` with [`EstimationStatus::NotIdentified`].
pub fn estimate(observations: &[Observation], init: &NlParams, config: &EstimationConfig) -> Result<Estimate> {
    init.validate()?;
    if observations.is_empty() {
        return Ok(Estimate { params: *init, log_likelihood: 0.0, gradient_norm: 0.0, iterations: 0, status: EstimationStatus::NotIdentified });
    }
    let layout = Layout { free_asc: config.free_asc };
    let theta0 = layout.pack(init);
    let mut grad = vec![0.0; layout.dim()];
    let f0 = objective(layout, init, observations, &theta0, &mut grad);
    if !f0.is_finite() {
        return Err(Error::NonFiniteLikelihood);
    }
    let n = observations.len() as f64;
    if !identified(observations) {
        return Ok(Estimate { params: *init, log_likelihood: -f0 * n, gradient_norm: norm(&grad), iterations: 0, status: EstimationStatus::NotIdentified });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut best: Option<Run> = None;
    for start in 0..config.starts.max(1) {
        let x0: Vec<f64> = if start == 0 {
            theta0.clone()
        } else {
            theta0
                .iter()
                .enumerate()
                .map(|(i, &t)| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    let scale = if i < 3 { math::abs(t).max(0.01) } else { 1.0 };
                    t + config.jitter * z * scale
                })
                .collect()
        };
        let run = bfgs(|theta, g| objective(layout, init, observations, theta, g), x0, config.gradient_tolerance, config.max_iterations);
        if let Some(run) = run {
            if best.as_ref().is_none_or(|b| run.value < b.value) {
                best = Some(run);
            }
        }
    }
    let best = best.expect("the unjittered start has a finite objective");
    Ok(Estimate {
        params: layout.unpack(&best.theta, init),
        log_likelihood: -best.value * n,
        gradient_norm: best.gradient_norm,
        iterations: best.iterations,
        status: best.status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::choice::{log_likelihood, sample_choice};
    use crate::demand::{AltAttributes, ModeAttributes};
    use rand::Rng;

    /// Synthetic choice situations resembling the simulated market.
    fn synthetic(truth: &NlParams, n: usize, seed: u64) -> Vec<Observation> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let km: f64 = rng.random_range(0.5..25.0);
                let mut a = ModeAttributes::default();
                a.set(Mode::Walk, AltAttributes::new(0.0, 12.0 * km, 0.0));
                a.set(Mode::Bike, AltAttributes::new(0.0, 3.75 * km, 0.0));
                a.set(Mode::Car, AltAttributes::new(0.0, 2.4 * km, 0.33 * km));
                a.set(Mode::Taxi, AltAttributes::new(5.0, 2.4 * km, 3.0 + 1.56 * km));
                a.set(Mode::Transit, AltAttributes::new(rng.random_range(10.0..40.0), km, 2.75));
                if rng.random_bool(0.8) {
                    a.set(Mode::Rideshare, AltAttributes::new(rng.random_range(1.0..12.0), 2.4 * km * rng.random_range(1.0..1.5), rng.random_range(0.5..8.0)));
                }
                if rng.random_bool(0.7) {
                    a.set(Mode::RideshareTransit, AltAttributes::new(rng.random_range(8.0..30.0), km * rng.random_range(1.0..2.0), rng.random_range(2.0..8.0)));
                }
                let p = truth.probabilities(&a).unwrap();
                Observation::new(a, sample_choice(&mut rng, &p).unwrap()).unwrap()
            })
            .collect()
    }

    #[test]
    fn recovers_reference_parameters() {
        let truth = NlParams::reference_truth();
        let obs = synthetic(&truth, 5000, 1);
        let init = NlParams::reference_initial_guess();
        let est = estimate(&obs, &init, &EstimationConfig::default()).unwrap();
        assert_eq!(est.status, EstimationStatus::Converged, "{est:?}");
        assert!(est.gradient_norm <= 1e-6);
        assert!(est.params.gap(&truth) < 0.5, "gap {}", est.params.gap(&truth));
        let ll_truth = log_likelihood(&truth, &obs).unwrap();
        assert!(est.log_likelihood >= ll_truth - 1e-9);
        assert!((log_likelihood(&est.params, &obs).unwrap() - est.log_likelihood).abs() < 1e-6);
    }

    #[test]
    fn estimation_is_deterministic() {
        let obs = synthetic(&NlParams::reference_truth(), 800, 2);
        let init = NlParams::reference_initial_guess();
        let a = estimate(&obs, &init, &EstimationConfig::default()).unwrap();
        let b = estimate(&obs, &init, &EstimationConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn degenerate_data_is_flagged() {
        let mut a = ModeAttributes::default();
        a.set(Mode::Car, AltAttributes::new(0.0, 20.0, 3.0));
        let obs: Vec<Observation> = (0..20).map(|_| Observation::new(a, Mode::Car).unwrap()).collect();
        let init = NlParams::reference_initial_guess();
        let est = estimate(&obs, &init, &EstimationConfig::default()).unwrap();
        assert_eq!(est.status, EstimationStatus::NotIdentified);
        assert_eq!(est.params, init);

        let mut b = a;
        b.set(Mode::Walk, AltAttributes::new(0.0, 60.0, 0.0));
        let obs: Vec<Observation> = (0..20).map(|_| Observation::new(b, Mode::Car).unwrap()).collect();
        let est = estimate(&obs, &init, &EstimationConfig::default()).unwrap();
        assert_eq!(est.status, EstimationStatus::NotIdentified);
    }

    #[test]
    fn rejects_invalid_init() {
        let obs = synthetic(&NlParams::reference_truth(), 10, 3);
        let mut init = NlParams::reference_initial_guess();
        init.mu[1] = 0.0;
        assert!(estimate(&obs, &init, &EstimationConfig::default()).is_err());
    }

    #[test]
    fn likelihood_gradient_matches_finite_differences() {
        let obs = synthetic(&NlParams::reference_truth(), 200, 4);
        for free_asc in [false, true] {
            let layout = Layout { free_asc };
            let mut template = NlParams::reference_truth();
            template.asc = [0.0, 0.3, -0.2, 0.1, 0.4, -0.5, 0.2];
            let theta = layout.pack(&template);
            let mut g = vec![0.0; layout.dim()];
            objective(layout, &template, &obs, &theta, &mut g);
            let mut scratch = vec![0.0; layout.dim()];
            for i in 0..layout.dim() {
                let h = 1e-6;
                let mut up = theta.clone();
                up[i] += h;
                let mut dn = theta.clone();
                dn[i] -= h;
                let fd = (objective(layout, &template, &obs, &up, &mut scratch) - objective(layout, &template, &obs, &dn, &mut scratch)) / (2.0 * h);
                assert!((fd - g[i]).abs() <= 1e-5 * g[i].abs().max(1e-3), "coord {i}: fd {fd} an {}", g[i]);
            }
        }
    }

    #[test]
    fn free_asc_fit_runs() {
        let mut truth = NlParams::reference_truth();
        truth.asc = [0.0, 0.2, 0.0, -0.3, 0.0, 0.1, 0.0];
        let obs = synthetic(&truth, 3000, 5);
        let cfg = EstimationConfig { free_asc: true, ..Default::default() };
        let est = estimate(&obs, &NlParams::reference_initial_guess(), &cfg).unwrap();
        assert!(matches!(est.status, EstimationStatus::Converged | EstimationStatus::Flat));
        assert_eq!(est.params.asc[0], 0.0);
        assert!(est.log_likelihood >= log_likelihood(&truth, &obs).unwrap() - 1e-9);
    }
}
