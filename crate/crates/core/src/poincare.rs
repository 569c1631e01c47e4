//! The impulse-to-impulse map `Q`, orbits, cycle classification and 1-cycle
//! fixed points.
//!
//! `Xₙ = x(tₙ⁻)` is the plant state just before the n-th firing; it obeys
//! `Xₙ₊₁ = Q(Xₙ) = exp(A·Φ(CXₙ))·(Xₙ + F(CXₙ)·B)`.

use nalgebra::Matrix3;
use serde::Serialize;

use crate::error::{IgoError, Result};
use crate::exec::{map_slice, Execution};
use crate::model::Modulation;
use crate::numerics::{opitz_apply, ChainPlant, Mat3, ScalarFunction, StateVec};

/// Default ceiling on any state component during iteration.
pub const DEFAULT_STATE_CEILING: f64 = 1e12;

/// Target weight `λ` and period `T` of a 1-cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CycleSpec {
    pub weight: f64,
    pub period: f64,
}

impl CycleSpec {
    /// `weight ≥ 0` (zero is accepted for the trivial cycle) and `period > 0`.
    pub fn new(weight: f64, period: f64) -> Result<Self> {
        if !(weight >= 0.0 && weight.is_finite()) {
            return Err(IgoError::InvalidArgument(format!(
                "impulse weight must be non-negative, got {weight}"
            )));
        }
        if !(period > 0.0 && period.is_finite()) {
            return Err(IgoError::InvalidArgument(format!(
                "period must be positive, got {period}"
            )));
        }
        Ok(Self { weight, period })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPoint {
    pub state: StateVec,
    /// `y₀ = C·X`.
    pub output: f64,
    pub spec: CycleSpec,
}

pub fn map_q(plant: &ChainPlant, modulation: &Modulation, x: &StateVec) -> StateVec {
    let y = x[2];
    let weight = modulation.eval_f(y);
    let period = modulation.eval_phi(y);
    plant.flow(&(x + plant.b() * weight), period)
}

/// Derivative of `Q` at an arbitrary state:
/// `e^{AΦ}(I + F'·BC) + Φ'·A·Q(x)·C`, slopes evaluated at `y = Cx`.
pub fn map_q_derivative(plant: &ChainPlant, modulation: &Modulation, x: &StateVec) -> Mat3 {
    let y = x[2];
    let period = modulation.eval_phi(y);
    let weight = modulation.eval_f(y);
    let e = plant.propagator(period);
    let image = e * (x + plant.b() * weight);
    let mut jac = e;
    let f_term = e * plant.b() * modulation.f_slope_at(y);
    let phi_term = plant.a() * image * modulation.phi_slope_at(y);
    let col = f_term + phi_term;
    // (F'·J + Φ'·A·Q(x))·C only touches the third column.
    for i in 0..3 {
        jac[(i, 2)] += col[i];
    }
    jac
}

/// `[X₀, Q(X₀), …, Qᴺ(X₀)]`, aborting if a component exceeds the default ceiling.
pub fn iterate(
    plant: &ChainPlant,
    modulation: &Modulation,
    x0: &StateVec,
    steps: usize,
) -> Result<Vec<StateVec>> {
    iterate_with_ceiling(plant, modulation, x0, steps, DEFAULT_STATE_CEILING)
}

pub fn iterate_with_ceiling(
    plant: &ChainPlant,
    modulation: &Modulation,
    x0: &StateVec,
    steps: usize,
    ceiling: f64,
) -> Result<Vec<StateVec>> {
    let mut orbit = Vec::with_capacity(steps + 1);
    orbit.push(*x0);
    let mut x = *x0;
    for step in 1..=steps {
        x = map_q(plant, modulation, &x);
        if let Some(&v) = x.iter().find(|v| !(v.abs() <= ceiling)) {
            return Err(IgoError::StateCeiling {
                step,
                value: v,
                ceiling,
            });
        }
        orbit.push(x);
    }
    Ok(orbit)
}

/// Closed-form fixed point of the 1-cycle with weight `λ` and period `T`:
/// `X = λ·μ(TA)·B`, `μ(x) = 1/(e^{-x} - 1)`, evaluated by the Opitz formula.
pub fn fixed_point_analytic(plant: &ChainPlant, spec: CycleSpec) -> Result<FixedPoint> {
    let mu = opitz_apply(ScalarFunction::Mu, plant, spec.period)?;
    let state: StateVec = mu.column(0) * spec.weight;
    Ok(FixedPoint {
        state,
        output: state[2],
        spec,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    /// Converged when `‖X - Q(X)‖ ≤ tol·(1 + ‖X‖)`.
    pub tol: f64,
    pub max_iterations: usize,
    /// Step halvings attempted before falling back to a damped iteration.
    pub max_halvings: usize,
    /// Relaxation of the fallback step `X ← X + β·(Q(X) - X)`.
    pub damping: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iterations: 200,
            max_halvings: 8,
            damping: 0.5,
        }
    }
}

/// Fixed point of `Q` for a general modulation by damped Newton iteration.
pub fn fixed_point_numeric(
    plant: &ChainPlant,
    modulation: &Modulation,
    x_init: &StateVec,
) -> Result<FixedPoint> {
    fixed_point_numeric_with(plant, modulation, x_init, NewtonOptions::default())
}

pub fn fixed_point_numeric_with(
    plant: &ChainPlant,
    modulation: &Modulation,
    x_init: &StateVec,
    opts: NewtonOptions,
) -> Result<FixedPoint> {
    modulation.ensure_valid()?;
    if x_init.iter().any(|v| !(*v >= 0.0)) {
        return Err(IgoError::InvalidArgument(format!(
            "initial state must be non-negative, got {x_init:?}"
        )));
    }
    let residual = |x: &StateVec| x - map_q(plant, modulation, x);
    let converged = |x: &StateVec, r: f64| r <= opts.tol * (1.0 + x.norm());

    let mut x = *x_init;
    let mut r = residual(&x);
    let mut history = vec![r.norm()];
    for _ in 0..opts.max_iterations {
        if converged(&x, r.norm()) {
            return Ok(finish(modulation, x));
        }
        let jac = Matrix3::identity() - map_q_derivative(plant, modulation, &x);
        let mut accepted = false;
        if let Some(step) = jac.lu().solve(&r) {
            let mut alpha = 1.0;
            for _ in 0..=opts.max_halvings {
                let cand = x - step * alpha;
                let rc = residual(&cand);
                if rc.norm() < r.norm() {
                    x = cand;
                    r = rc;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
        }
        if !accepted {
            x -= r * opts.damping;
            r = residual(&x);
        }
        history.push(r.norm());
    }
    if converged(&x, r.norm()) {
        return Ok(finish(modulation, x));
    }
    Err(IgoError::NoConvergence {
        iterations: opts.max_iterations,
        residuals: history,
    })
}

/// Independent Newton solves from each start, results in start order.
pub fn fixed_point_multistart(
    plant: &ChainPlant,
    modulation: &Modulation,
    starts: &[StateVec],
    exec: Execution,
) -> Vec<Result<FixedPoint>> {
    map_slice(starts, exec, |x| fixed_point_numeric(plant, modulation, x))
}

fn finish(modulation: &Modulation, state: StateVec) -> FixedPoint {
    let y = state[2];
    FixedPoint {
        state,
        output: y,
        spec: CycleSpec {
            weight: modulation.eval_f(y),
            period: modulation.eval_phi(y),
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CycleClass {
    /// Least number of firings per period.
    Period(usize),
    Aperiodic,
}

/// Smallest `m ≤ m_max` such that `‖X_{n+m} - X_n‖ ≤ tol·(1 + ‖X_n‖)` for all
/// pairs whose later index lies in the final quarter of the orbit.
///
/// Taking the smallest qualifying `m` means no divisor of it qualifies, so a
/// 1-cycle is never reported as a 2-cycle.
pub fn detect_cycle(orbit: &[StateVec], m_max: usize, tol: f64) -> Result<CycleClass> {
    if m_max == 0 {
        return Err(IgoError::InvalidArgument("m_max must be at least 1".into()));
    }
    let len = orbit.len();
    let required = 4 * m_max;
    if len < required {
        return Err(IgoError::OrbitTooShort { len, required });
    }
    let quarter = len / 4;
    for m in 1..=m_max {
        let periodic = (len - quarter..len).all(|later| {
            let a = &orbit[later - m];
            (orbit[later] - a).norm() <= tol * (1.0 + a.norm())
        });
        if periodic {
            return Ok(CycleClass::Period(m));
        }
    }
    Ok(CycleClass::Aperiodic)
}

/// Coarse sup-norm bound on orbit tails under bounded modulation:
/// `10 · F₂ · ‖e^{AΦ₁}‖_∞ / (1 - e^{-a₁Φ₁})`.
pub fn ultimate_bound(plant: &ChainPlant, modulation: &Modulation) -> f64 {
    let b = &modulation.bounds;
    let e = plant.propagator(b.phi_min);
    let row_norm = e
        .row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let a1 = plant.rates()[0];
    10.0 * b.f_max * row_norm / (1.0 - (-a1 * b.phi_min).exp())
}
