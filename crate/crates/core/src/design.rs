//! Slope design for prescribed 1-cycles.
//!
//! A target `(λ, T)` fixes the fixed point and its output `y₀` independently of
//! the modulation slopes, so the slope plane `(F'(y₀), Φ'(y₀))` can be scanned
//! and searched with the cycle held fixed.

use std::io::{self, Write};

use serde::Serialize;

use crate::error::{IgoError, Result};
use crate::exec::{map_indices, Execution};
use crate::format::{fixed12, round12};
use crate::model::{Modulation, ModulationBounds};
use crate::numerics::{eig3, ChainPlant, Mat3, StateVec};
use crate::poincare::{fixed_point_analytic, CycleSpec, FixedPoint};
use crate::stability::{
    border_coefficients, spectral_floor, BorderCoefficients, StabilityReport, SPECTRAL_TOL,
};

/// Cells with `|ρ - 1|` below this are treated as on the stability border.
pub const BORDER_BAND: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct Design {
    pub modulation: Modulation,
    pub fixed_point: FixedPoint,
    pub report: StabilityReport,
}

/// Anchored saturated-affine modulation realizing `spec` with the given slopes.
///
/// Bounds default to [`ModulationBounds::around`] the targets.
pub fn design_for_target(
    plant: &ChainPlant,
    spec: CycleSpec,
    f_slope: f64,
    phi_slope: f64,
    bounds: Option<ModulationBounds>,
) -> Result<Design> {
    plant.require_ordered()?;
    if !(f_slope <= 0.0 && phi_slope >= 0.0) {
        return Err(IgoError::SlopeSign { f_slope, phi_slope });
    }
    let bounds = bounds.unwrap_or_else(|| ModulationBounds::around(spec.weight, spec.period));
    within("lambda", spec.weight, bounds.f_min, bounds.f_max)?;
    within("T", spec.period, bounds.phi_min, bounds.phi_max)?;
    let fixed_point = fixed_point_analytic(plant, spec)?;
    let modulation = Modulation::saturated_affine(
        fixed_point.output,
        spec.weight,
        spec.period,
        f_slope,
        phi_slope,
        bounds,
    );
    modulation.ensure_valid()?;
    let report = StabilityReport::evaluate(plant, &fixed_point, f_slope, phi_slope)?;
    Ok(Design {
        modulation,
        fixed_point,
        report,
    })
}

fn within(what: &'static str, value: f64, lo: f64, hi: f64) -> Result<()> {
    if (lo..=hi).contains(&value) {
        Ok(())
    } else {
        Err(IgoError::TargetOutsideBounds {
            what,
            value,
            lo,
            hi,
        })
    }
}

/// Rectangle in the slope plane with `F' ≤ 0 ≤ Φ'`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeBox {
    pub f_range: (f64, f64),
    pub phi_range: (f64, f64),
}

impl SlopeBox {
    pub fn new(f_range: (f64, f64), phi_range: (f64, f64)) -> Result<Self> {
        let (f_lo, f_hi) = f_range;
        let (p_lo, p_hi) = phi_range;
        if [f_lo, f_hi, p_lo, p_hi].iter().any(|v| !v.is_finite()) || f_lo > f_hi || p_lo > p_hi {
            return Err(IgoError::InvalidArgument(format!(
                "slope ranges must be finite and ordered, got F' {f_range:?}, Phi' {phi_range:?}"
            )));
        }
        if f_hi > 0.0 || p_lo < 0.0 {
            return Err(IgoError::SlopeSign {
                f_slope: f_hi,
                phi_slope: p_lo,
            });
        }
        Ok(Self { f_range, phi_range })
    }

    fn clamp(&self, p: [f64; 2]) -> [f64; 2] {
        [
            p[0].clamp(self.f_range.0, self.f_range.1),
            p[1].clamp(self.phi_range.0, self.phi_range.1),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepSpec {
    pub slopes: SlopeBox,
    pub n_f: usize,
    pub n_p: usize,
}

impl SweepSpec {
    pub fn new(slopes: SlopeBox, n_f: usize, n_p: usize) -> Result<Self> {
        if n_f == 0 || n_p == 0 {
            return Err(IgoError::InvalidArgument(format!(
                "sweep grid must be nonempty, got {n_f}x{n_p}"
            )));
        }
        Ok(Self { slopes, n_f, n_p })
    }

    pub fn f_values(&self) -> Vec<f64> {
        linspace(self.slopes.f_range, self.n_f)
    }

    pub fn phi_values(&self) -> Vec<f64> {
        linspace(self.slopes.phi_range, self.n_p)
    }
}

impl Default for SweepSpec {
    /// 61×61 over `F' ∈ [-2, 0]`, `Φ' ∈ [0, 6]`.
    fn default() -> Self {
        Self {
            slopes: SlopeBox {
                f_range: (-2.0, 0.0),
                phi_range: (0.0, 6.0),
            },
            n_f: 61,
            n_p: 61,
        }
    }
}

fn linspace((lo, hi): (f64, f64), n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepCell {
    pub f_slope: f64,
    pub phi_slope: f64,
    pub rho: f64,
    pub stable_linear: bool,
    pub stable_det: bool,
    pub stable_eigen: bool,
}

impl SweepCell {
    pub fn in_border_band(&self) -> bool {
        (self.rho - 1.0).abs() < BORDER_BAND
    }
}

/// Quantities shared by every cell of one cycle.
struct CellEvaluator {
    exp_at: Mat3,
    j: StateVec,
    d: StateVec,
    border: BorderCoefficients,
}

impl CellEvaluator {
    fn new(plant: &ChainPlant, fp: &FixedPoint) -> Self {
        let exp_at = plant.propagator(fp.spec.period);
        Self {
            exp_at,
            j: exp_at * plant.b(),
            d: plant.a() * fp.state,
            border: border_coefficients(plant, fp),
        }
    }

    fn cell(&self, plant: &ChainPlant, f_slope: f64, phi_slope: f64) -> SweepCell {
        let jac = self.exp_at + (self.j * f_slope + self.d * phi_slope) * plant.c();
        let rho = eig3(&jac).spectral_radius;
        SweepCell {
            f_slope,
            phi_slope,
            rho,
            stable_linear: self.border.lhs(f_slope, phi_slope) > -1.0,
            stable_det: (-Mat3::identity() - jac).determinant() < 0.0,
            stable_eigen: rho < 1.0 - SPECTRAL_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub spec: SweepSpec,
    pub cycle: CycleSpec,
    pub output: f64,
    pub border: BorderCoefficients,
    pub spectral_floor: f64,
    /// Row-major with `F'` as the outer index.
    pub cells: Vec<SweepCell>,
}

impl SweepGrid {
    pub fn cell(&self, i_f: usize, i_p: usize) -> &SweepCell {
        &self.cells[i_f * self.spec.n_p + i_p]
    }

    /// Cells outside the border band whose scalar verdicts differ from the
    /// eigenvalue verdict.
    pub fn disagreements(&self) -> Vec<&SweepCell> {
        self.cells
            .iter()
            .filter(|c| !c.in_border_band())
            .filter(|c| c.stable_linear != c.stable_eigen || c.stable_det != c.stable_eigen)
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "Fp,Phip,rho,stable_linear,stable_det")?;
        for c in &self.cells {
            writeln!(
                w,
                "{},{},{},{},{}",
                fixed12(c.f_slope),
                fixed12(c.phi_slope),
                fixed12(c.rho),
                c.stable_linear,
                c.stable_det
            )?;
        }
        Ok(())
    }

    pub fn border_summary(&self) -> BorderSummary {
        let stable = self.cells.iter().filter(|c| c.stable_eigen).count();
        BorderSummary {
            c_j: round12(self.border.c_j),
            c_d: round12(self.border.c_d),
            inequality: format!(
                "{} * Fp {} {} * Phip > -1",
                fixed12(self.border.c_j),
                if self.border.c_d < 0.0 { '-' } else { '+' },
                fixed12(self.border.c_d.abs())
            ),
            y0: round12(self.output),
            lambda: round12(self.cycle.weight),
            period: round12(self.cycle.period),
            spectral_floor: round12(self.spectral_floor),
            cells: self.cells.len(),
            stable_cells: stable,
            disagreements: self.disagreements().len(),
        }
    }
}

/// JSON summary accompanying a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BorderSummary {
    #[serde(rename = "c_J")]
    pub c_j: f64,
    #[serde(rename = "c_D")]
    pub c_d: f64,
    pub inequality: String,
    pub y0: f64,
    pub lambda: f64,
    #[serde(rename = "T")]
    pub period: f64,
    pub spectral_floor: f64,
    pub cells: usize,
    pub stable_cells: usize,
    pub disagreements: usize,
}

/// Spectral radius and verdicts over a rectangular slope grid.
pub fn slope_sweep(
    plant: &ChainPlant,
    cycle: CycleSpec,
    spec: &SweepSpec,
    exec: Execution,
) -> Result<SweepGrid> {
    plant.require_ordered()?;
    let fp = fixed_point_analytic(plant, cycle)?;
    let eval = CellEvaluator::new(plant, &fp);
    let fs = spec.f_values();
    let ps = spec.phi_values();
    let n_p = spec.n_p;
    let cells = map_indices(spec.n_f * n_p, exec, |k| {
        eval.cell(plant, fs[k / n_p], ps[k % n_p])
    });
    Ok(SweepGrid {
        spec: *spec,
        cycle,
        output: fp.output,
        border: eval.border,
        spectral_floor: spectral_floor(plant, cycle.period),
        cells,
    })
}

const COARSE_POINTS: usize = 41;
const REFINE_BUDGET: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimizedSlopes {
    pub f_slope: f64,
    pub phi_slope: f64,
    pub rho: f64,
    /// Best value found by the coarse grid alone.
    pub coarse_rho: f64,
    pub refine_evaluations: usize,
}

/// Minimizes `ρ(Q'(X))` over a slope box, restricted to Schur-stable slopes.
///
/// A coarse grid seeds a Nelder–Mead refinement with a fixed evaluation budget;
/// iterates are clamped to the box and unstable points score `+∞`.
pub fn optimize_slopes(
    plant: &ChainPlant,
    cycle: CycleSpec,
    slopes: SlopeBox,
    exec: Execution,
) -> Result<OptimizedSlopes> {
    let n_f = if slopes.f_range.0 == slopes.f_range.1 {
        1
    } else {
        COARSE_POINTS
    };
    let n_p = if slopes.phi_range.0 == slopes.phi_range.1 {
        1
    } else {
        COARSE_POINTS
    };
    let grid = slope_sweep(plant, cycle, &SweepSpec::new(slopes, n_f, n_p)?, exec)?;
    let best = grid
        .cells
        .iter()
        .filter(|c| c.stable_eigen)
        .min_by(|a, b| a.rho.total_cmp(&b.rho))
        .copied()
        .ok_or(IgoError::NoStableSlopes {
            c_j: grid.border.c_j,
            c_d: grid.border.c_d,
        })?;

    let fp = fixed_point_analytic(plant, cycle)?;
    let eval = CellEvaluator::new(plant, &fp);
    let objective = |p: [f64; 2]| {
        let c = eval.cell(plant, p[0], p[1]);
        if c.stable_eigen {
            c.rho
        } else {
            f64::INFINITY
        }
    };
    let step = [
        (slopes.f_range.1 - slopes.f_range.0) / (n_f.max(2) - 1) as f64,
        (slopes.phi_range.1 - slopes.phi_range.0) / (n_p.max(2) - 1) as f64,
    ];
    let (point, rho, used) = nelder_mead(
        objective,
        [best.f_slope, best.phi_slope],
        best.rho,
        step,
        &slopes,
        REFINE_BUDGET,
    );
    Ok(OptimizedSlopes {
        f_slope: point[0],
        phi_slope: point[1],
        rho,
        coarse_rho: best.rho,
        refine_evaluations: used,
    })
}

/// Box-clamped 2-D Nelder–Mead. Returns the best point ever evaluated, so the
/// result is never worse than `start`.
fn nelder_mead<F: Fn([f64; 2]) -> f64>(
    f: F,
    start: [f64; 2],
    start_value: f64,
    step: [f64; 2],
    bounds: &SlopeBox,
    budget: usize,
) -> ([f64; 2], f64, usize) {
    let used = std::cell::Cell::new(0usize);
    let eval = |p: [f64; 2]| {
        used.set(used.get() + 1);
        f(p)
    };
    let mut simplex: Vec<([f64; 2], f64)> = vec![(start, start_value)];
    for axis in 0..2 {
        if step[axis] == 0.0 {
            continue;
        }
        let mut p = start;
        p[axis] += step[axis];
        if bounds.clamp(p) == start {
            p[axis] = start[axis] - step[axis];
        }
        let p = bounds.clamp(p);
        simplex.push((p, eval(p)));
    }
    if simplex.len() < 2 {
        return (start, start_value, used.get());
    }
    let dim = simplex.len() - 1;
    let mut best = simplex[0];
    while used.get() + 2 <= budget {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if simplex[0].1 < best.1 {
            best = simplex[0];
        }
        let worst = simplex[dim];
        let mut centroid = [0.0; 2];
        for (p, _) in &simplex[..dim] {
            centroid[0] += p[0] / dim as f64;
            centroid[1] += p[1] / dim as f64;
        }
        let along = |t: f64| {
            bounds.clamp([
                centroid[0] + t * (worst.0[0] - centroid[0]),
                centroid[1] + t * (worst.0[1] - centroid[1]),
            ])
        };
        let reflected = along(-1.0);
        let fr = eval(reflected);
        if fr < simplex[0].1 {
            let expanded = along(-2.0);
            let fe = eval(expanded);
            simplex[dim] = if fe < fr {
                (expanded, fe)
            } else {
                (reflected, fr)
            };
        } else if fr < simplex[dim - 1].1 {
            simplex[dim] = (reflected, fr);
        } else {
            let contracted = along(0.5);
            let fc = eval(contracted);
            if fc < worst.1 {
                simplex[dim] = (contracted, fc);
            } else {
                let anchor = simplex[0].0;
                for v in simplex.iter_mut().skip(1) {
                    let p = [
                        anchor[0] + 0.5 * (v.0[0] - anchor[0]),
                        anchor[1] + 0.5 * (v.0[1] - anchor[1]),
                    ];
                    *v = (p, eval(p));
                }
            }
        }
    }
    for v in &simplex {
        if v.1 < best.1 {
            best = *v;
        }
    }
    (best.0, best.1, used.get())
}
