//! Simultaneous-perturbation stochastic approximation: two cost evaluations
//! per iteration along a random +/-1 direction, with decaying gain sequences.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Gain schedules and stopping rules. `a_k = a / (A + k + 1)^alpha` and
/// `c_k = c / (k + 1)^gamma`; when `a` is left unset it is calibrated from
/// probe evaluations at the starting point so the first update moves each
/// component by about `target_first_step`.
#[derive(Debug, Clone)]
pub struct SpsaOptions {
    pub a: Option<f64>,
    pub c: f64,
    /// Stability constant `A`; defaults to `max_iter / 10`.
    pub stability: Option<f64>,
    pub alpha: f64,
    pub gamma: f64,
    pub max_iter: usize,
    /// Stop after this many iterations without material improvement of the
    /// best cost.
    pub patience: usize,
    /// Relative improvement of the best cost that resets the patience counter.
    pub rel_improvement: f64,
    pub target_first_step: f64,
    pub seed: u64,
}

impl Default for SpsaOptions {
    fn default() -> Self {
        Self {
            a: None,
            c: 0.1,
            stability: None,
            alpha: 0.602,
            gamma: 0.101,
            max_iter: 300,
            patience: 20,
            rel_improvement: 1e-4,
            target_first_step: 0.1,
            seed: 0,
        }
    }
}

/// One accepted iterate.
#[derive(Debug, Clone, Serialize)]
pub struct TraceEntry {
    pub step: usize,
    pub theta: Vec<f64>,
    pub cost: f64,
    /// Filled in by pipelines that attach a spectrum snapshot per iterate.
    pub spectrum: Option<Vec<f64>>,
}

/// Full optimization history. `final_theta` is the last accepted iterate;
/// the best-seen iterate is tracked separately because the trajectory is
/// stochastic.
#[derive(Debug, Clone, Serialize)]
pub struct OptimizationTrace {
    pub iterations: Vec<TraceEntry>,
    pub final_theta: Vec<f64>,
    pub best_theta: Vec<f64>,
    pub best_cost: f64,
    /// True when the patience rule fired; false when `max_iter` ran out.
    pub converged: bool,
    pub seed: u64,
}

/// Raised when the cost turns non-finite; carries everything recorded so far
/// so callers can flush a partial trace.
#[derive(Debug)]
pub struct SpsaAbort {
    pub step: usize,
    pub trace: OptimizationTrace,
}

impl std::fmt::Display for SpsaAbort {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "cost function returned a non-finite value at step {}", self.step)
    }
}

impl std::error::Error for SpsaAbort {}

fn rademacher(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..dim).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect()
}

fn shifted(theta: &[f64], delta: &[f64], step: f64) -> Vec<f64> {
    theta.iter().zip(delta.iter()).map(|(t, d)| t + step * d).collect()
}

pub fn spsa_minimize(
    mut cost: impl FnMut(&[f64]) -> f64,
    theta0: &[f64],
    options: &SpsaOptions,
) -> Result<OptimizationTrace, Box<SpsaAbort>> {
    let dim = theta0.len();
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let stability = options.stability.unwrap_or(options.max_iter as f64 / 10.0);

    let mut trace = OptimizationTrace {
        iterations: Vec::with_capacity(options.max_iter + 1),
        final_theta: theta0.to_vec(),
        best_theta: theta0.to_vec(),
        best_cost: f64::INFINITY,
        converged: false,
        seed: options.seed,
    };
    let record =
        |trace: &mut OptimizationTrace, step: usize, theta: &[f64], value: f64| {
            trace.iterations.push(TraceEntry {
                step,
                theta: theta.to_vec(),
                cost: value,
                spectrum: None,
            });
        };
    let abort = |trace: OptimizationTrace, step: usize| Box::new(SpsaAbort { step, trace });

    let initial = cost(theta0);
    if !initial.is_finite() {
        return Err(abort(trace, 0));
    }
    record(&mut trace, 0, theta0, initial);
    trace.best_cost = initial;

    // Calibrate the step scale from probe gradients when not given.
    let gain_a = match options.a {
        Some(a) => a,
        None => {
            let probes = 10;
            let mut mean_diff = 0.0;
            for _ in 0..probes {
                let delta = rademacher(dim, &mut rng);
                let plus = cost(&shifted(theta0, &delta, options.c));
                let minus = cost(&shifted(theta0, &delta, -options.c));
                if !plus.is_finite() || !minus.is_finite() {
                    return Err(abort(trace, 0));
                }
                mean_diff += (plus - minus).abs();
            }
            mean_diff /= probes as f64;
            let scale = (stability + 1.0).powf(options.alpha);
            if mean_diff < 1e-12 {
                options.target_first_step * scale
            } else {
                options.target_first_step * scale * 2.0 * options.c / mean_diff
            }
        }
    };

    let mut theta = theta0.to_vec();
    let mut stall = 0usize;
    for k in 0..options.max_iter {
        let a_k = gain_a / (stability + k as f64 + 1.0).powf(options.alpha);
        let c_k = options.c / (k as f64 + 1.0).powf(options.gamma);
        let delta = rademacher(dim, &mut rng);
        let plus = cost(&shifted(&theta, &delta, c_k));
        let minus = cost(&shifted(&theta, &delta, -c_k));
        if !plus.is_finite() || !minus.is_finite() {
            trace.final_theta = theta;
            return Err(abort(trace, k + 1));
        }
        let slope = (plus - minus) / (2.0 * c_k);
        for (t, d) in theta.iter_mut().zip(delta.iter()) {
            // 1/delta_i = delta_i for +/-1 perturbations
            *t -= a_k * slope * d;
        }
        let value = cost(&theta);
        if !value.is_finite() {
            trace.final_theta = theta;
            return Err(abort(trace, k + 1));
        }
        record(&mut trace, k + 1, &theta, value);

        let margin = options.rel_improvement * trace.best_cost.abs().max(f64::MIN_POSITIVE);
        if value < trace.best_cost - margin {
            stall = 0;
        } else {
            stall += 1;
        }
        if value < trace.best_cost {
            trace.best_cost = value;
            trace.best_theta = theta.clone();
        }
        if stall >= options.patience {
            trace.converged = true;
            break;
        }
    }
    trace.final_theta = theta;
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl_converges() {
        let options = SpsaOptions { max_iter: 200, seed: 4, ..SpsaOptions::default() };
        let trace = spsa_minimize(
            |theta| theta.iter().map(|t| t * t).sum(),
            &[1.0, 1.0, 1.0],
            &options,
        )
        .unwrap();
        assert!(trace.best_cost < 1e-3, "best cost {}", trace.best_cost);
        assert!(trace.iterations.len() <= 201);
    }

    #[test]
    fn constant_cost_converges_at_patience_without_drift() {
        let options = SpsaOptions { max_iter: 500, seed: 1, ..SpsaOptions::default() };
        let trace = spsa_minimize(|_| 2.5, &[0.3, -0.4], &options).unwrap();
        assert!(trace.converged);
        // zero gradient estimate: theta never moves
        assert_eq!(trace.final_theta, vec![0.3, -0.4]);
        assert_eq!(trace.iterations.len(), options.patience + 1);
    }

    #[test]
    fn seeded_runs_are_identical() {
        let options = SpsaOptions { max_iter: 50, seed: 9, ..SpsaOptions::default() };
        let run = |_: ()| {
            spsa_minimize(
                |theta| (theta[0] - 1.0).powi(2) + 0.5 * theta[1].powi(2),
                &[0.0, 0.0],
                &options,
            )
            .unwrap()
        };
        let a = run(());
        let b = run(());
        assert_eq!(a.final_theta, b.final_theta);
        assert_eq!(a.best_cost, b.best_cost);
        assert_eq!(a.iterations.len(), b.iterations.len());
    }

    #[test]
    fn non_finite_cost_aborts_with_partial_trace() {
        // calls 1..=21 cover the initial evaluation and calibration probes;
        // the failure lands inside the second iteration
        let mut calls = 0;
        let result = spsa_minimize(
            move |theta| {
                calls += 1;
                if calls > 25 {
                    f64::NAN
                } else {
                    theta[0].powi(2)
                }
            },
            &[1.0],
            &SpsaOptions { seed: 3, ..SpsaOptions::default() },
        );
        let abort = result.unwrap_err();
        assert!(abort.step > 0);
        assert!(!abort.trace.iterations.is_empty());
    }

    #[test]
    fn non_finite_calibration_aborts_at_step_zero() {
        let result = spsa_minimize(|_| f64::INFINITY, &[1.0], &SpsaOptions::default());
        assert_eq!(result.unwrap_err().step, 0);
    }

    #[test]
    fn steps_are_strictly_increasing() {
        let options = SpsaOptions { max_iter: 30, seed: 2, ..SpsaOptions::default() };
        let trace =
            spsa_minimize(|theta| theta[0].cos(), &[0.2], &options).unwrap();
        for pair in trace.iterations.windows(2) {
            assert!(pair[1].step == pair[0].step + 1);
        }
        assert_eq!(
            trace.final_theta,
            trace.iterations.last().unwrap().theta
        );
    }
}
