//! Amplitude and frequency modulation functions of the impulsive feedback.
//!
//! The next impulse weight is `F(y(tₙ))` and the next inter-firing interval is
//! `Φ(y(tₙ))`. `F` is non-increasing, `Φ` non-decreasing, and both are confined
//! to positive bands `[F₁, F₂]` and `[Φ₁, Φ₂]`. Every kind is parameterised by
//! its value and slope at an anchor output `y₀`, which is all the 1-cycle
//! design fixes; the global shape is a modelling choice.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{IgoError, Result};

/// Lower clamp used when the default band would reach zero.
const MIN_DEFAULT_BOUND: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModulationKind {
    /// Affine through the anchor with the given slopes, clamped to the bounds.
    SaturatedAffine,
    /// Anchor values everywhere; slopes are ignored.
    Constant,
    /// Hill-type sigmoids between the bounds, matched to anchor value and slope.
    Hill,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulationBounds {
    pub f_min: f64,
    pub f_max: f64,
    pub phi_min: f64,
    pub phi_max: f64,
}

impl ModulationBounds {
    /// Band of half-width `anchor / 2` around each anchor value.
    pub fn around(weight: f64, period: f64) -> Self {
        let (f_min, f_max) = band(weight);
        let (phi_min, phi_max) = band(period);
        Self {
            f_min,
            f_max,
            phi_min,
            phi_max,
        }
    }
}

fn band(anchor: f64) -> (f64, f64) {
    let half = 0.5 * anchor;
    ((anchor - half).max(MIN_DEFAULT_BOUND), anchor + half)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Modulation {
    pub kind: ModulationKind,
    /// Output value `y₀` at which the anchors are imposed.
    pub anchor_y: f64,
    /// `F(y₀)`, the impulse weight on the designed cycle.
    pub weight: f64,
    /// `Φ(y₀)`, the firing period on the designed cycle.
    pub period: f64,
    /// `F'(y₀)`.
    pub f_slope: f64,
    /// `Φ'(y₀)`.
    pub phi_slope: f64,
    pub bounds: ModulationBounds,
}

impl Modulation {
    pub fn saturated_affine(
        anchor_y: f64,
        weight: f64,
        period: f64,
        f_slope: f64,
        phi_slope: f64,
        bounds: ModulationBounds,
    ) -> Self {
        Self {
            kind: ModulationKind::SaturatedAffine,
            anchor_y,
            weight,
            period,
            f_slope,
            phi_slope,
            bounds,
        }
    }

    /// `F ≡ weight`, `Φ ≡ period`, with degenerate bounds at the anchors.
    pub fn constant(weight: f64, period: f64) -> Self {
        Self {
            kind: ModulationKind::Constant,
            anchor_y: 0.0,
            weight,
            period,
            f_slope: 0.0,
            phi_slope: 0.0,
            bounds: ModulationBounds {
                f_min: weight,
                f_max: weight,
                phi_min: period,
                phi_max: period,
            },
        }
    }

    pub fn hill(
        anchor_y: f64,
        weight: f64,
        period: f64,
        f_slope: f64,
        phi_slope: f64,
        bounds: ModulationBounds,
    ) -> Self {
        Self {
            kind: ModulationKind::Hill,
            ..Self::saturated_affine(anchor_y, weight, period, f_slope, phi_slope, bounds)
        }
    }

    /// Amplitude modulation `F(y)`.
    pub fn eval_f(&self, y: f64) -> f64 {
        let b = &self.bounds;
        match self.kind {
            ModulationKind::Constant => self.weight,
            ModulationKind::SaturatedAffine => clamp(
                self.weight + self.f_slope * (y - self.anchor_y),
                b.f_min,
                b.f_max,
            ),
            ModulationKind::Hill => match self.f_sigmoid() {
                Some(s) => clamp(
                    b.f_max - (b.f_max - b.f_min) * s.fraction(y),
                    b.f_min,
                    b.f_max,
                ),
                None => self.weight,
            },
        }
    }

    /// Frequency modulation `Φ(y)`.
    pub fn eval_phi(&self, y: f64) -> f64 {
        let b = &self.bounds;
        match self.kind {
            ModulationKind::Constant => self.period,
            ModulationKind::SaturatedAffine => clamp(
                self.period + self.phi_slope * (y - self.anchor_y),
                b.phi_min,
                b.phi_max,
            ),
            ModulationKind::Hill => match self.phi_sigmoid() {
                Some(s) => clamp(
                    b.phi_min + (b.phi_max - b.phi_min) * s.fraction(y),
                    b.phi_min,
                    b.phi_max,
                ),
                None => self.period,
            },
        }
    }

    /// `dF/dy` at `y`. At a saturation kink the one-sided slope from the
    /// interior is returned.
    pub fn f_slope_at(&self, y: f64) -> f64 {
        let b = &self.bounds;
        match self.kind {
            ModulationKind::Constant => 0.0,
            ModulationKind::SaturatedAffine => {
                let raw = self.weight + self.f_slope * (y - self.anchor_y);
                if raw < b.f_min || raw > b.f_max {
                    0.0
                } else {
                    self.f_slope
                }
            }
            ModulationKind::Hill => self
                .f_sigmoid()
                .map_or(0.0, |s| -(b.f_max - b.f_min) * s.derivative(y)),
        }
    }

    /// `dΦ/dy` at `y`, same convention as [`Modulation::f_slope_at`].
    pub fn phi_slope_at(&self, y: f64) -> f64 {
        let b = &self.bounds;
        match self.kind {
            ModulationKind::Constant => 0.0,
            ModulationKind::SaturatedAffine => {
                let raw = self.period + self.phi_slope * (y - self.anchor_y);
                if raw < b.phi_min || raw > b.phi_max {
                    0.0
                } else {
                    self.phi_slope
                }
            }
            ModulationKind::Hill => self
                .phi_sigmoid()
                .map_or(0.0, |s| (b.phi_max - b.phi_min) * s.derivative(y)),
        }
    }

    fn f_sigmoid(&self) -> Option<Sigmoid> {
        let b = &self.bounds;
        // F falls from f_max towards f_min: F = f_max - (f_max - f_min)·fraction.
        Sigmoid::fit(
            self.anchor_y,
            (b.f_max - self.weight) / (b.f_max - b.f_min),
            -self.f_slope / (b.f_max - b.f_min),
        )
    }

    fn phi_sigmoid(&self) -> Option<Sigmoid> {
        let b = &self.bounds;
        Sigmoid::fit(
            self.anchor_y,
            (self.period - b.phi_min) / (b.phi_max - b.phi_min),
            self.phi_slope / (b.phi_max - b.phi_min),
        )
    }

    /// All invariant violations; empty when the modulation is admissible.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let b = &self.bounds;
        let fields = [
            ("anchor_y", self.anchor_y),
            ("weight", self.weight),
            ("period", self.period),
            ("f_slope", self.f_slope),
            ("phi_slope", self.phi_slope),
            ("f_min", b.f_min),
            ("f_max", b.f_max),
            ("phi_min", b.phi_min),
            ("phi_max", b.phi_max),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                out.push(Violation::NonFinite(name));
            }
        }
        if !out.is_empty() {
            return out;
        }
        for (name, v) in [("f_min", b.f_min), ("phi_min", b.phi_min)] {
            if v <= 0.0 {
                out.push(Violation::NonPositiveBound { name, value: v });
            }
        }
        for (what, value, lo, hi) in [
            ("weight", self.weight, b.f_min, b.f_max),
            ("period", self.period, b.phi_min, b.phi_max),
        ] {
            if !(lo <= value && value <= hi) {
                out.push(Violation::AnchorOutsideBounds {
                    what,
                    value,
                    lo,
                    hi,
                });
            }
        }
        if self.kind != ModulationKind::Constant {
            if self.f_slope > 0.0 {
                out.push(Violation::IncreasingAmplitude(self.f_slope));
            }
            if self.phi_slope < 0.0 {
                out.push(Violation::DecreasingFrequency(self.phi_slope));
            }
        }
        if self.kind == ModulationKind::Hill && out.is_empty() {
            out.extend(self.hill_findings());
        }
        out
    }

    fn hill_findings(&self) -> Vec<Violation> {
        let b = &self.bounds;
        let mut out = Vec::new();
        if self.anchor_y <= 0.0 {
            out.push(Violation::HillAnchor("anchor output must be positive"));
        }
        if self.f_slope < 0.0 && !(b.f_min < self.weight && self.weight < b.f_max) {
            out.push(Violation::HillAnchor(
                "weight must lie strictly inside its bounds",
            ));
        }
        if self.phi_slope > 0.0 && !(b.phi_min < self.period && self.period < b.phi_max) {
            out.push(Violation::HillAnchor(
                "period must lie strictly inside its bounds",
            ));
        }
        if !out.is_empty() {
            return out;
        }
        // Sampled monotonicity on [0, HILL_GRID_SPAN·y₀].
        let top = HILL_GRID_SPAN * self.anchor_y;
        let ys: Vec<f64> = (0..=HILL_GRID_POINTS)
            .map(|i| top * i as f64 / HILL_GRID_POINTS as f64)
            .collect();
        for w in ys.windows(2) {
            if self.eval_f(w[1]) > self.eval_f(w[0]) {
                out.push(Violation::NonMonotone { what: "F", y: w[1] });
                break;
            }
        }
        for w in ys.windows(2) {
            if self.eval_phi(w[1]) < self.eval_phi(w[0]) {
                out.push(Violation::NonMonotone {
                    what: "Phi",
                    y: w[1],
                });
                break;
            }
        }
        out
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let violations = self.validate();
        if violations.is_empty() {
            Ok(())
        } else {
            Err(IgoError::InvalidModulation { violations })
        }
    }
}

const HILL_GRID_SPAN: f64 = 10.0;
const HILL_GRID_POINTS: usize = 2000;

fn clamp(v: f64, lo: f64, hi: f64) -> f64 {
    v.max(lo).min(hi)
}

/// `s/(1+s)` with `s = s₀·(y/y₀)ⁿ`, fitted to a value `u` and a normalised
/// slope at `y₀`.
#[derive(Debug, Clone, Copy)]
struct Sigmoid {
    anchor_y: f64,
    s0: f64,
    n: f64,
}

impl Sigmoid {
    fn fit(anchor_y: f64, u: f64, slope: f64) -> Option<Self> {
        if !(slope > 0.0 && anchor_y > 0.0 && u > 0.0 && u < 1.0) {
            return None;
        }
        Some(Self {
            anchor_y,
            s0: u / (1.0 - u),
            n: slope * anchor_y / (u * (1.0 - u)),
        })
    }

    fn ratio(&self, y: f64) -> f64 {
        if y <= 0.0 {
            0.0
        } else {
            self.s0 * (y / self.anchor_y).powf(self.n)
        }
    }

    fn fraction(&self, y: f64) -> f64 {
        let s = self.ratio(y);
        if s.is_infinite() {
            1.0
        } else {
            s / (1.0 + s)
        }
    }

    fn derivative(&self, y: f64) -> f64 {
        let s = self.ratio(y);
        if y <= 0.0 || !s.is_finite() {
            return 0.0;
        }
        self.n * s / (y * (1.0 + s) * (1.0 + s))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonFinite(&'static str),
    NonPositiveBound {
        name: &'static str,
        value: f64,
    },
    AnchorOutsideBounds {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
    IncreasingAmplitude(f64),
    DecreasingFrequency(f64),
    HillAnchor(&'static str),
    NonMonotone {
        what: &'static str,
        y: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonFinite(name) => write!(f, "{name} is not finite"),
            Violation::NonPositiveBound { name, value } => {
                write!(f, "lower bound {name} = {value} must be positive")
            }
            Violation::AnchorOutsideBounds {
                what,
                value,
                lo,
                hi,
            } => {
                write!(
                    f,
                    "anchor outside bounds: {what} = {value} not in [{lo}, {hi}]"
                )
            }
            Violation::IncreasingAmplitude(s) => {
                write!(f, "amplitude modulation must be non-increasing (slope {s})")
            }
            Violation::DecreasingFrequency(s) => {
                write!(f, "frequency modulation must be non-decreasing (slope {s})")
            }
            Violation::HillAnchor(msg) => write!(f, "Hill modulation: {msg}"),
            Violation::NonMonotone { what, y } => {
                write!(f, "{what} is not monotone near y = {y}")
            }
        }
    }
}
