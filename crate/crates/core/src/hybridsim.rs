//! Continuous-time reconstruction of closed-loop trajectories.
//!
//! Between firings the plant is autonomous, so on `(tₙ, tₙ₊₁)` the state is
//! `x(t) = e^{(t-tₙ)A}(Xₙ + λₙB)`. Every sample is evaluated from that closed
//! form relative to the last firing; there is no time stepping and the sample
//! step only sets plot resolution.

use std::io::{self, Write};

use serde::Serialize;

use crate::error::{IgoError, Result};
use crate::format::fixed12;
use crate::model::Modulation;
use crate::numerics::{ChainPlant, StateVec};
use crate::poincare::{detect_cycle, CycleClass, FixedPoint, DEFAULT_STATE_CEILING};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Horizon {
    /// Simulate over `[0, t_end]`.
    Time(f64),
    /// Simulate exactly this many firings; the trace ends just before the next.
    Firings(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub x: StateVec,
}

impl Sample {
    pub fn y(&self) -> f64 {
        self.x[2]
    }
}

/// One firing of the impulsive feedback.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiringEvent {
    pub n: usize,
    pub t: f64,
    /// Output sampled by the modulation, `y(tₙ)`.
    pub y: f64,
    /// Interval to the next firing, `Tₙ = Φ(y(tₙ))`.
    pub period: f64,
    /// Impulse weight `λₙ = F(y(tₙ))`.
    pub weight: f64,
    /// Left limit `Xₙ = x(tₙ⁻)`; the right limit is `Xₙ + λₙB`.
    pub state: StateVec,
}

#[derive(Debug, Clone)]
pub struct SimTrace {
    /// Time-ordered; each firing contributes a pre- and post-jump sample at the
    /// same instant.
    pub samples: Vec<Sample>,
    pub events: Vec<FiringEvent>,
    pub plant: ChainPlant,
    pub modulation: Modulation,
    pub initial: StateVec,
    pub sample_step: f64,
}

impl SimTrace {
    pub fn event_states(&self) -> Vec<StateVec> {
        self.events.iter().map(|e| e.state).collect()
    }

    /// Cycle multiplicity of the firing sequence.
    pub fn classify(&self, m_max: usize, tol: f64) -> Result<CycleClass> {
        detect_cycle(&self.event_states(), m_max, tol)
    }

    pub fn write_samples_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,x1,x2,x3,y")?;
        for s in &self.samples {
            writeln!(
                w,
                "{},{},{},{},{}",
                fixed12(s.t),
                fixed12(s.x[0]),
                fixed12(s.x[1]),
                fixed12(s.x[2]),
                fixed12(s.y())
            )?;
        }
        Ok(())
    }

    pub fn write_events_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "n,t_n,y_n,T_n,lambda_n,X1,X2,X3")?;
        for e in &self.events {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                e.n,
                fixed12(e.t),
                fixed12(e.y),
                fixed12(e.period),
                fixed12(e.weight),
                fixed12(e.state[0]),
                fixed12(e.state[1]),
                fixed12(e.state[2])
            )?;
        }
        Ok(())
    }
}

/// Event-driven simulation from `x(0⁻) = x0` with the first firing at `t = 0`.
pub fn simulate(
    plant: &ChainPlant,
    modulation: &Modulation,
    x0: &StateVec,
    horizon: Horizon,
    sample_step: f64,
) -> Result<SimTrace> {
    if !(sample_step > 0.0 && sample_step.is_finite()) {
        return Err(IgoError::InvalidArgument(format!(
            "sample step must be positive, got {sample_step}"
        )));
    }
    if let Horizon::Time(t_end) = horizon {
        if !(t_end >= 0.0 && t_end.is_finite()) {
            return Err(IgoError::InvalidArgument(format!(
                "time horizon must be non-negative, got {t_end}"
            )));
        }
    }
    if x0.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(IgoError::InvalidArgument(format!(
            "initial state must be non-negative, got {x0:?}"
        )));
    }

    let b = plant.b();
    let mut samples = Vec::new();
    let mut events = Vec::new();
    let mut t = 0.0;
    let mut x = *x0;
    loop {
        let fire = match horizon {
            Horizon::Firings(n) => events.len() < n,
            Horizon::Time(t_end) => t < t_end,
        };
        if !fire {
            samples.push(Sample { t, x });
            break;
        }
        let y = x[2];
        let weight = modulation.eval_f(y);
        let period = modulation.eval_phi(y);
        events.push(FiringEvent {
            n: events.len(),
            t,
            y,
            period,
            weight,
            state: x,
        });
        samples.push(Sample { t, x });
        let post = x + b * weight;
        samples.push(Sample { t, x: post });

        let seg_end = match horizon {
            Horizon::Time(t_end) if t + period > t_end => t_end - t,
            _ => period,
        };
        let pieces = (seg_end / sample_step).ceil().max(1.0) as usize;
        for i in 1..pieces {
            let tau = seg_end * i as f64 / pieces as f64;
            samples.push(Sample {
                t: t + tau,
                x: plant.flow(&post, tau),
            });
        }
        if seg_end < period {
            samples.push(Sample {
                t: t + seg_end,
                x: plant.flow(&post, seg_end),
            });
            break;
        }
        // Same expression as the impulse-to-impulse map.
        x = plant.flow(&post, period);
        t += period;
        if let Some(&v) = x.iter().find(|v| !(v.abs() <= DEFAULT_STATE_CEILING)) {
            return Err(IgoError::StateCeiling {
                step: events.len(),
                value: v,
                ceiling: DEFAULT_STATE_CEILING,
            });
        }
    }
    Ok(SimTrace {
        samples,
        events,
        plant: *plant,
        modulation: *modulation,
        initial: *x0,
        sample_step,
    })
}

/// Distances to the fixed point below this (relative to `1 + ‖X‖`) are noise.
const CONVERGED_TOL: f64 = 1e-9;
/// Upper edge of the linear regime used for rate fitting, relative to `‖X‖`.
const LINEAR_REGIME: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransientMetrics {
    /// `‖Xₙ - X‖` per firing.
    pub distances: Vec<f64>,
    /// Fitted per-firing contraction factor; `None` once converged.
    pub ratio: Option<f64>,
    /// Firing indices `[start, end)` used for the fit.
    pub window: (usize, usize),
    /// Distances are not monotone over the window.
    pub overshoot: bool,
    pub converged: bool,
}

/// Transient diagnostics of a trace relative to a 1-cycle fixed point.
///
/// The asymptotic ratio is `exp(slope)` of a least-squares line through
/// `ln dₙ` over the window of firings where the orbit is in the linear regime
/// (`1e-9·(1+‖X‖) < dₙ < 1e-2·‖X‖`), falling back to the second half of the
/// non-converged firings when that window has fewer than three points. A
/// log-linear fit is used because, with a complex multiplier pair, single-step
/// ratios oscillate around the spectral radius.
pub fn transient_metrics(trace: &SimTrace, fp: &FixedPoint) -> Result<TransientMetrics> {
    let n = trace.events.len();
    if n < 10 {
        return Err(IgoError::InvalidArgument(format!(
            "transient metrics need at least 10 firings, got {n}"
        )));
    }
    let x_norm = fp.state.norm();
    let distances: Vec<f64> = trace
        .events
        .iter()
        .map(|e| (e.state - fp.state).norm())
        .collect();
    let noise = CONVERGED_TOL * (1.0 + x_norm);
    let live: Vec<usize> = (0..n).filter(|&i| distances[i] > noise).collect();
    if live.is_empty() {
        return Ok(TransientMetrics {
            distances,
            ratio: None,
            window: (n, n),
            overshoot: false,
            converged: true,
        });
    }
    let linear: Vec<usize> = live
        .iter()
        .copied()
        .filter(|&i| distances[i] < LINEAR_REGIME * x_norm)
        .collect();
    let (start, end) = match (linear.first(), linear.last()) {
        (Some(&s), Some(&e)) if linear.len() >= 3 => (s, e + 1),
        _ => {
            let last = *live.last().unwrap_or(&0);
            (last / 2, last + 1)
        }
    };
    let idx: Vec<usize> = (start..end).filter(|&i| distances[i] > noise).collect();
    let ratio = if idx.len() >= 2 {
        Some(log_linear_rate(&idx, &distances))
    } else {
        None
    };
    let overshoot = distances[start..end].windows(2).any(|w| w[1] > w[0]);
    Ok(TransientMetrics {
        distances,
        ratio,
        window: (start, end),
        overshoot,
        converged: false,
    })
}

fn log_linear_rate(idx: &[usize], distances: &[f64]) -> f64 {
    let m = idx.len() as f64;
    let mean_x = idx.iter().map(|&i| i as f64).sum::<f64>() / m;
    let mean_y = idx.iter().map(|&i| distances[i].ln()).sum::<f64>() / m;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &i in idx {
        let dx = i as f64 - mean_x;
        sxy += dx * (distances[i].ln() - mean_y);
        sxx += dx * dx;
    }
    (sxy / sxx).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorridorReport {
    /// Share of all samples with `y ∈ [y_lo, y_hi]`.
    pub fraction: f64,
    /// Same share over the final third of the simulated time.
    pub tail_fraction: f64,
    pub tail_min: f64,
    pub tail_max: f64,
}

pub fn corridor_check(trace: &SimTrace, y_lo: f64, y_hi: f64) -> Result<CorridorReport> {
    if !(y_lo <= y_hi) {
        return Err(IgoError::InvalidArgument(format!(
            "empty corridor [{y_lo}, {y_hi}]"
        )));
    }
    let (first, last) = match (trace.samples.first(), trace.samples.last()) {
        (Some(f), Some(l)) => (f.t, l.t),
        _ => return Err(IgoError::InvalidArgument("trace has no samples".into())),
    };
    let tail_start = first + 2.0 * (last - first) / 3.0;
    let inside = |s: &Sample| (y_lo..=y_hi).contains(&s.y());
    let all = trace.samples.iter().filter(|s| inside(s)).count();
    let tail: Vec<&Sample> = trace.samples.iter().filter(|s| s.t >= tail_start).collect();
    let tail_in = tail.iter().filter(|s| inside(s)).count();
    Ok(CorridorReport {
        fraction: all as f64 / trace.samples.len() as f64,
        tail_fraction: tail_in as f64 / tail.len() as f64,
        tail_min: tail.iter().map(|s| s.y()).fold(f64::INFINITY, f64::min),
        tail_max: tail.iter().map(|s| s.y()).fold(f64::NEG_INFINITY, f64::max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModulationBounds;
    use crate::poincare::{fixed_point_analytic, iterate, CycleSpec};

    fn setup(f_slope: f64, phi_slope: f64) -> (ChainPlant, FixedPoint, Modulation) {
        let p = ChainPlant::atracurium();
        let fp = fixed_point_analytic(&p, CycleSpec::new(300.0, 20.0).unwrap()).unwrap();
        let m = Modulation::saturated_affine(
            fp.output,
            300.0,
            20.0,
            f_slope,
            phi_slope,
            ModulationBounds::around(300.0, 20.0),
        );
        (p, fp, m)
    }

    #[test]
    fn one_cycle_from_fixed_point() {
        for phi_slope in [4.0, 5.5] {
            let (p, fp, m) = setup(-1.0, phi_slope);
            let trace = simulate(&p, &m, &fp.state, Horizon::Firings(20), 0.1).unwrap();
            assert_eq!(trace.events.len(), 20);
            for e in &trace.events {
                assert!((e.period - 20.0).abs() < 1e-9);
                assert!((e.weight - 300.0).abs() < 1e-9);
                assert!((e.t - 20.0 * e.n as f64).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn zero_firings() {
        let (p, fp, m) = setup(-1.0, 4.0);
        let trace = simulate(&p, &m, &fp.state, Horizon::Firings(0), 0.1).unwrap();
        assert!(trace.events.is_empty());
        assert_eq!(trace.samples.len(), 1);
    }

    #[test]
    fn time_horizon_ends_exactly() {
        let (p, fp, m) = setup(-1.0, 4.0);
        let trace = simulate(&p, &m, &fp.state, Horizon::Time(50.0), 0.3).unwrap();
        assert_eq!(trace.events.len(), 3);
        let last = trace.samples.last().unwrap();
        assert_eq!(last.t, 50.0);
        assert!(trace.samples.windows(2).all(|w| w[1].t >= w[0].t));
        assert!(trace
            .samples
            .windows(2)
            .all(|w| w[1].t - w[0].t <= 0.3 + 1e-12));
    }

    #[test]
    fn jumps_only_in_first_state() {
        let (p, fp, m) = setup(-1.0, 5.5);
        let x0 = fp.state * 0.4;
        let trace = simulate(&p, &m, &x0, Horizon::Firings(30), 0.5).unwrap();
        for pair in trace.samples.windows(2) {
            if pair[0].t == pair[1].t {
                let jump = pair[1].x - pair[0].x;
                let e = trace.events.iter().find(|e| e.t == pair[0].t).unwrap();
                assert!((jump[0] - e.weight).abs() < 1e-12);
                assert!(jump[1].abs() < 1e-9 && jump[2].abs() < 1e-9);
            }
        }
    }

    #[test]
    fn events_match_poincare_orbit() {
        let (p, fp, m) = setup(-1.0, 5.5);
        let x0 = fp.state + StateVec::new(1.0, 0.0, 0.0);
        let trace = simulate(&p, &m, &x0, Horizon::Firings(200), 5.0).unwrap();
        let orbit = iterate(&p, &m, &x0, 199).unwrap();
        for (e, x) in trace.events.iter().zip(&orbit) {
            assert!((e.state - x).amax() <= 1e-10);
        }
        assert_eq!(trace.classify(8, 1e-6).unwrap(), CycleClass::Period(2));
    }

    #[test]
    fn samples_are_closed_form() {
        let (p, fp, m) = setup(-0.1, 0.29);
        let trace = simulate(&p, &m, &(fp.state * 0.3), Horizon::Firings(8), 0.7).unwrap();
        for s in &trace.samples {
            let e = trace.events.iter().rev().find(|e| e.t <= s.t).unwrap();
            if s.t == e.t {
                continue;
            }
            let direct = p.propagator(s.t - e.t) * (e.state + p.b() * e.weight);
            assert!((direct - s.x).amax() <= 1e-12);
            assert!(s.x.iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn transient_converged_at_fixed_point() {
        let (p, fp, m) = setup(-1.0, 4.0);
        let trace = simulate(&p, &m, &fp.state, Horizon::Firings(20), 1.0).unwrap();
        let tm = transient_metrics(&trace, &fp).unwrap();
        assert!(tm.converged);
        assert!(tm.ratio.is_none());
        assert!(tm.distances.iter().all(|d| *d <= 1e-9));
        let short = simulate(&p, &m, &fp.state, Horizon::Firings(5), 1.0).unwrap();
        assert!(transient_metrics(&short, &fp).is_err());
    }

    #[test]
    fn transient_real_multipliers_monotone() {
        let (p, fp, m) = setup(-0.1, 0.29);
        let trace = simulate(&p, &m, &(fp.state * 0.3), Horizon::Firings(60), 1.0).unwrap();
        let tm = transient_metrics(&trace, &fp).unwrap();
        assert!(!tm.overshoot, "{:?}", tm);
        assert!((tm.ratio.unwrap() - 0.2348).abs() < 0.05, "{:?}", tm.ratio);
    }

    #[test]
    fn transient_complex_pair_overshoots() {
        let (p, fp, m) = setup(-1.0, 4.0);
        let trace = simulate(&p, &m, &(fp.state * 0.3), Horizon::Firings(120), 1.0).unwrap();
        let tm = transient_metrics(&trace, &fp).unwrap();
        assert!(tm.overshoot);
        assert!((tm.ratio.unwrap() - 0.5302).abs() < 0.05, "{:?}", tm.ratio);
    }

    #[test]
    fn corridor() {
        let (p, fp, m) = setup(-1.0, 4.0);
        let trace = simulate(&p, &m, &fp.state, Horizon::Firings(9), 0.1).unwrap();
        let first: Vec<f64> = trace
            .samples
            .iter()
            .filter(|s| s.t <= 20.0)
            .map(|s| s.y())
            .collect();
        let lo = first.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = first.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let r = corridor_check(&trace, lo - 1e-9, hi + 1e-9).unwrap();
        assert_eq!(r.tail_fraction, 1.0);
        assert_eq!(r.fraction, 1.0);
        let r = corridor_check(&trace, 0.0, 0.0).unwrap();
        assert_eq!(r.fraction, 0.0);
        assert!(corridor_check(&trace, 2.0, 1.0).is_err());

        let (p2, _, m2) = setup(-1.0, 5.5);
        let x0 = fp.state + StateVec::new(1.0, 0.0, 0.0);
        let doubled = simulate(&p2, &m2, &x0, Horizon::Firings(200), 0.1).unwrap();
        let r = corridor_check(&doubled, lo, hi).unwrap();
        let width = hi - lo;
        assert!(r.tail_fraction < 1.0);
        assert!(
            r.tail_min >= lo - 2.0 * width && r.tail_max <= hi + 2.0 * width,
            "{r:?}"
        );
    }

    #[test]
    fn csv_headers_and_digits() {
        let (p, fp, m) = setup(-1.0, 4.0);
        let trace = simulate(&p, &m, &fp.state, Horizon::Firings(2), 5.0).unwrap();
        let mut buf = Vec::new();
        trace.write_events_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("n,t_n,y_n,T_n,lambda_n,X1,X2,X3"));
        assert!(lines.next().unwrap().starts_with("0,0,13.6370185"));
        let mut buf = Vec::new();
        trace.write_samples_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("t,x1,x2,x3,y\n0,269.597430"));
    }
}
