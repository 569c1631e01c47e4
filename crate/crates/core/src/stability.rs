//! Local orbital stability of 1-cycles.
//!
//! At a fixed point `X` with `T = Φ(y₀)`, `λ = F(y₀)` the Jacobian of the map is
//!
//! ```text
//! Q'(X) = e^{AT} + (F'(y₀)·J + Φ'(y₀)·D)·C,   J = e^{AT}B,  D = AX.
//! ```
//!
//! The 1-cycle is locally orbitally stable iff `Q'(X)` is Schur. Besides the
//! eigenvalue test this module evaluates two scalar tests that are affine in the
//! slopes: the sign of `det(-I - Q'(X))` and the linear form
//! `C(I + e^{AT})^{-1}(F'J + Φ'D) > -1`. The two scalar tests are algebraically
//! equivalent to each other; their agreement with the eigenvalue test is a
//! property that [`StabilityReport`] exposes rather than assumes.
//!
//! The family `𝒬(T, ξ, η) = e^{AT} + (ξJ + ηD̄)C`, `D̄ = A(e^{-AT} - I)^{-1}B`,
//! reparameterises the Jacobian (`ξ = F'`, `η = λΦ'`); [`spectral_bounds_check`] tests
//! spectral bounds for it.

use nalgebra::{Matrix3, RowVector3};
use serde::Serialize;

use crate::error::{IgoError, Result};
use crate::numerics::eig3::C64;
use crate::numerics::{
    divided_difference, eig3, opitz_apply, ChainPlant, Eigen3, Mat3, ScalarFunction, StateVec,
};
use crate::poincare::FixedPoint;

/// Absolute tolerance for boolean spectral comparisons.
pub const SPECTRAL_TOL: f64 = 1e-9;

/// `J = e^{AT}B` and `D = AX` at a fixed point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JdVectors {
    pub j: StateVec,
    pub d: StateVec,
    /// `X = 0`, hence `D = 0`: the trivial cycle.
    pub degenerate: bool,
}

pub fn compute_jd(plant: &ChainPlant, fp: &FixedPoint) -> Result<JdVectors> {
    let j = plant.propagator(fp.spec.period) * plant.b();
    let d = plant.a() * fp.state;
    let degenerate = d.iter().all(|v| *v == 0.0);
    if j.iter().any(|v| !(*v > 0.0)) {
        return Err(IgoError::Inconsistent(format!("J = {j:?} is not positive")));
    }
    if !degenerate && d.iter().any(|v| !(*v < 0.0)) {
        return Err(IgoError::Inconsistent(format!(
            "D = A·X = {d:?} is not negative; fixed point does not match plant"
        )));
    }
    Ok(JdVectors { j, d, degenerate })
}

/// `e^{AT} + (F'·J + Φ'·D)·C`.
pub fn jacobian(plant: &ChainPlant, fp: &FixedPoint, f_slope: f64, phi_slope: f64) -> Mat3 {
    let e = plant.propagator(fp.spec.period);
    let j = e * plant.b();
    let d = plant.a() * fp.state;
    e + (j * f_slope + d * phi_slope) * plant.c()
}

/// `e^{AT}(I + F'·BC) + Φ'·A·X·C`, the product form of the same Jacobian.
pub fn jacobian_product_form(
    plant: &ChainPlant,
    fp: &FixedPoint,
    f_slope: f64,
    phi_slope: f64,
) -> Mat3 {
    let e = plant.propagator(fp.spec.period);
    let bc = plant.b() * plant.c();
    e * (Matrix3::identity() + bc * f_slope) + plant.a() * fp.state * plant.c() * phi_slope
}

fn check_hypotheses(plant: &ChainPlant, f_slope: f64, phi_slope: f64) -> Result<()> {
    plant.require_ordered()?;
    if !(f_slope <= 0.0 && phi_slope >= 0.0) {
        return Err(IgoError::SlopeSign { f_slope, phi_slope });
    }
    Ok(())
}

/// `C(I + e^{AT})^{-1}`.
fn resolvent_row(plant: &ChainPlant, period: f64) -> RowVector3<f64> {
    let m = Matrix3::identity() + plant.propagator(period);
    // I + e^{AT} is lower triangular with diagonal > 1.
    let inv = m.try_inverse().expect("I + exp(TA) is invertible");
    plant.c() * inv
}

/// Coefficients `(c_J, c_D)` with `lhs = c_J·F' + c_D·Φ'` in the linear criterion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BorderCoefficients {
    pub c_j: f64,
    pub c_d: f64,
}

impl BorderCoefficients {
    pub fn lhs(&self, f_slope: f64, phi_slope: f64) -> f64 {
        self.c_j * f_slope + self.c_d * phi_slope
    }

    /// `Φ'` on the border `c_J·F' + c_D·Φ' = -1` for a given `F'`, if any.
    pub fn border_phi_slope(&self, f_slope: f64) -> Option<f64> {
        if self.c_d == 0.0 {
            None
        } else {
            Some((-1.0 - self.c_j * f_slope) / self.c_d)
        }
    }
}

pub fn border_coefficients(plant: &ChainPlant, fp: &FixedPoint) -> BorderCoefficients {
    let row = resolvent_row(plant, fp.spec.period);
    let j = plant.propagator(fp.spec.period) * plant.b();
    let d = plant.a() * fp.state;
    BorderCoefficients {
        c_j: (row * j)[0],
        c_d: (row * d)[0],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearCriterion {
    pub lhs: f64,
    pub stable: bool,
}

/// `C(I + e^{AT})^{-1}(F'J + Φ'D) > -1`.
pub fn criterion_linear(
    plant: &ChainPlant,
    fp: &FixedPoint,
    f_slope: f64,
    phi_slope: f64,
) -> Result<LinearCriterion> {
    check_hypotheses(plant, f_slope, phi_slope)?;
    let lhs = border_coefficients(plant, fp).lhs(f_slope, phi_slope);
    Ok(LinearCriterion {
        lhs,
        stable: lhs > -1.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetCriterion {
    /// `χ(-1) = det(-I - Q'(X))`.
    pub chi_at_minus_1: f64,
    pub stable: bool,
}

/// `det(-I - Q'(X)) < 0`.
pub fn criterion_det(
    plant: &ChainPlant,
    fp: &FixedPoint,
    f_slope: f64,
    phi_slope: f64,
) -> Result<DetCriterion> {
    check_hypotheses(plant, f_slope, phi_slope)?;
    let q = jacobian(plant, fp, f_slope, phi_slope);
    let chi = (-Matrix3::identity() - q).determinant();
    Ok(DetCriterion {
        chi_at_minus_1: chi,
        stable: chi < 0.0,
    })
}

/// Lower bound `e^{-a₃T}` on the spectral radius claimed for the closed loop.
pub fn spectral_floor(plant: &ChainPlant, period: f64) -> f64 {
    (-plant.rates()[2] * period).exp()
}

/// Parameters of the Jacobian family `𝒬(T, ξ, η)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScriptQParams {
    pub period: f64,
    /// Plays the role of `F'(y₀)`.
    pub xi: f64,
    /// Plays the role of `λ·Φ'(y₀)`.
    pub eta: f64,
}

impl ScriptQParams {
    pub fn from_slopes(fp: &FixedPoint, f_slope: f64, phi_slope: f64) -> Self {
        Self {
            period: fp.spec.period,
            xi: f_slope,
            eta: fp.spec.weight * phi_slope,
        }
    }
}

/// `D̄ = A(e^{-AT} - I)^{-1}B = A·μ(TA)·B`; the fixed point is `X = λ·μ(TA)B`.
pub fn d_bar(plant: &ChainPlant, period: f64) -> Result<StateVec> {
    let mu = opitz_apply(ScalarFunction::Mu, plant, period)?;
    Ok(plant.a() * mu.column(0))
}

pub fn script_q(plant: &ChainPlant, p: &ScriptQParams) -> Result<Mat3> {
    let e = plant.propagator(p.period);
    let j = e * plant.b();
    let d = d_bar(plant, p.period)?;
    Ok(e + (j * p.xi + d * p.eta) * plant.c())
}

/// `χ(z) = det(zI - 𝒬)` for complex `z`.
pub fn chi(q: &Mat3, z: C64) -> C64 {
    let m = q.map(|v| C64::new(-v, 0.0)) + Matrix3::<C64>::identity() * z;
    m.determinant()
}

/// `w(z) = 1 - C(zI - e^{AT})^{-1}(ξJ + ηD̄)` for real `z ∉ {e^{-aᵢT}}`.
pub fn w_function(plant: &ChainPlant, p: &ScriptQParams, z: f64) -> Result<f64> {
    let e = plant.propagator(p.period);
    let j = e * plant.b();
    let d = d_bar(plant, p.period)?;
    let resolvent = (Matrix3::identity() * z - e)
        .try_inverse()
        .ok_or_else(|| IgoError::InvalidArgument(format!("z = {z} is an eigenvalue of e^(AT)")))?;
    Ok(1.0 - (plant.c() * resolvent * (j * p.xi + d * p.eta))[0])
}

/// `w(z)` through the modal decomposition `1 - Σ c̄ᵢ b̄ᵢ ρ_z(-aᵢ)` with
/// `ρ_z(s) = (ξe^{Ts} + ηs(e^{-Ts} - 1)^{-1}) / (z - e^{Ts})`.
pub fn w_function_modal(plant: &ChainPlant, p: &ScriptQParams, z: f64) -> f64 {
    let (s, s_inv) = diagonalizer(plant);
    let b_bar = s_inv * plant.b();
    let c_bar = plant.c() * s;
    let t = p.period;
    let rho = |s: f64| (p.xi * (t * s).exp() + p.eta * s / (-t * s).exp_m1()) / (z - (t * s).exp());
    let rates = plant.rates();
    1.0 - (0..3)
        .map(|i| c_bar[i] * b_bar[i] * rho(-rates[i]))
        .sum::<f64>()
}

/// Eigenvector matrix `S` of `A` (unit diagonal) and its inverse, both in
/// closed form, so that `S⁻¹AS = diag(-a₁, -a₂, -a₃)`.
pub fn diagonalizer(plant: &ChainPlant) -> (Mat3, Mat3) {
    let [a1, a2, a3] = plant.rates();
    let [g1, g2] = plant.gains();
    let s = Matrix3::new(
        1.0,
        0.0,
        0.0,
        g1 / (a2 - a1),
        1.0,
        0.0,
        g1 * g2 / ((a2 - a1) * (a3 - a1)),
        g2 / (a3 - a2),
        1.0,
    );
    let s_inv = Matrix3::new(
        1.0,
        0.0,
        0.0,
        -g1 / (a2 - a1),
        1.0,
        0.0,
        g1 * g2 / ((a3 - a2) * (a3 - a1)),
        -g2 / (a3 - a2),
        1.0,
    );
    (s, s_inv)
}

/// The two routes to `C·A·(I - e^{AT})^{-1}·B`: direct matrix algebra and
/// `T·g₁g₂·ψ[-a₁T, -a₂T, -a₃T]` from the Opitz formula for `ψ(x) = x/(1 - eˣ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiIdentity {
    pub direct: f64,
    pub via_psi: f64,
}

pub fn psi_identity(plant: &ChainPlant, period: f64) -> Result<PsiIdentity> {
    let e = plant.propagator(period);
    let inv = (Matrix3::identity() - e)
        .try_inverse()
        .ok_or_else(|| IgoError::InvalidArgument("I - exp(TA) is singular".into()))?;
    let direct = (plant.c() * plant.a() * inv * plant.b())[0];
    let [g1, g2] = plant.gains();
    let dd = divided_difference(ScalarFunction::Psi, &plant.scaled_points(period))?;
    Ok(PsiIdentity {
        direct,
        via_psi: period * g1 * g2 * dd,
    })
}

/// Outcome of the spectral checks on `𝒬(T, ξ, η)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralBoundsReport {
    pub eigen: Eigen3,
    /// No real eigenvalue exceeds `e^{-a₁T}`.
    pub no_eigenvalue_above_slowest_mode: bool,
    /// Some real eigenvalue lies in `[e^{-a₃T}, e^{-a₁T}]`.
    pub real_eigenvalue_in_band: bool,
    /// Product of the two eigenvalues other than `z₁` is at most `e^{-(a₁+a₂)T}`.
    pub pair_product_bounded: bool,
    /// Loss of Schur stability coincides with a real eigenvalue `≤ -1`.
    pub instability_iff_real_below_minus_one: bool,
    /// `det 𝒬 ≤ e^{-(a₁+a₂+a₃)T}`.
    pub det_bounded: bool,
    /// The real eigenvalue taken as `z₁`: the one in the band if any,
    /// otherwise the real eigenvalue closest to the band.
    pub z1: f64,
    pub pair_product: f64,
    pub det: f64,
}

impl SpectralBoundsReport {
    pub fn all_hold(&self) -> bool {
        self.no_eigenvalue_above_slowest_mode
            && self.real_eigenvalue_in_band
            && self.pair_product_bounded
            && self.instability_iff_real_below_minus_one
            && self.det_bounded
    }
}

pub fn spectral_bounds_check(
    plant: &ChainPlant,
    p: &ScriptQParams,
) -> Result<SpectralBoundsReport> {
    plant.require_ordered()?;
    if !(p.period > 0.0) {
        return Err(IgoError::InvalidArgument(format!(
            "period must be positive, got {}",
            p.period
        )));
    }
    if !(p.xi <= 0.0 && p.eta >= 0.0) {
        return Err(IgoError::SlopeSign {
            f_slope: p.xi,
            phi_slope: p.eta,
        });
    }
    let q = script_q(plant, p)?;
    let eigen = eig3(&q);
    let [a1, a2, a3] = plant.rates();
    let t = p.period;
    let upper = (-a1 * t).exp();
    let lower = (-a3 * t).exp();
    let reals = eigen.real_values();

    let no_above = reals.iter().all(|&z| z <= upper + SPECTRAL_TOL);
    let distance = |z: f64| {
        if z < lower {
            lower - z
        } else if z > upper {
            z - upper
        } else {
            0.0
        }
    };
    // A real eigenvalue always exists for a real cubic.
    let z1_index = eigen
        .values
        .iter()
        .enumerate()
        .filter(|(_, z)| z.im == 0.0)
        .min_by(|(_, a), (_, b)| distance(a.re).total_cmp(&distance(b.re)))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let z1 = eigen.values[z1_index].re;
    let in_band = distance(z1) <= SPECTRAL_TOL;
    let pair_product = eigen
        .values
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != z1_index)
        .fold(C64::new(1.0, 0.0), |acc, (_, z)| acc * z)
        .re;
    let pair_bounded = pair_product <= (-(a1 + a2) * t).exp() + SPECTRAL_TOL;

    let unstable = eigen.spectral_radius >= 1.0;
    let real_below = reals.iter().any(|&z| z <= -1.0);
    let det = q.determinant();
    Ok(SpectralBoundsReport {
        eigen,
        no_eigenvalue_above_slowest_mode: no_above,
        real_eigenvalue_in_band: in_band,
        pair_product_bounded: pair_bounded,
        instability_iff_real_below_minus_one: unstable == real_below,
        det_bounded: det <= (-(a1 + a2 + a3) * t).exp() + SPECTRAL_TOL,
        z1,
        pair_product,
        det,
    })
}

/// Everything known about the local stability of one designed 1-cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub period: f64,
    pub output: f64,
    pub weight: f64,
    pub f_slope: f64,
    pub phi_slope: f64,
    pub j: StateVec,
    pub d: StateVec,
    pub jacobian: Mat3,
    pub eigen: Eigen3,
    pub spectral_radius: f64,
    pub border: BorderCoefficients,
    pub criterion_linear_lhs: f64,
    pub chi_at_minus_1: f64,
    pub verdict_linear: bool,
    pub verdict_det: bool,
    /// `ρ(Q'(X)) < 1 - 1e-9`.
    pub verdict_eigen: bool,
    pub spectral_floor: f64,
}

impl StabilityReport {
    pub fn evaluate(
        plant: &ChainPlant,
        fp: &FixedPoint,
        f_slope: f64,
        phi_slope: f64,
    ) -> Result<Self> {
        let jd = compute_jd(plant, fp)?;
        let linear = criterion_linear(plant, fp, f_slope, phi_slope)?;
        let det = criterion_det(plant, fp, f_slope, phi_slope)?;
        let jac = jacobian(plant, fp, f_slope, phi_slope);
        let eigen = eig3(&jac);
        Ok(Self {
            period: fp.spec.period,
            output: fp.output,
            weight: fp.spec.weight,
            f_slope,
            phi_slope,
            j: jd.j,
            d: jd.d,
            jacobian: jac,
            eigen,
            spectral_radius: eigen.spectral_radius,
            border: border_coefficients(plant, fp),
            criterion_linear_lhs: linear.lhs,
            chi_at_minus_1: det.chi_at_minus_1,
            verdict_linear: linear.stable,
            verdict_det: det.stable,
            verdict_eigen: eigen.spectral_radius < 1.0 - SPECTRAL_TOL,
            spectral_floor: spectral_floor(plant, fp.spec.period),
        })
    }

    pub fn verdicts_agree(&self) -> bool {
        self.verdict_linear == self.verdict_det && self.verdict_det == self.verdict_eigen
    }

    /// Schur stability of the Jacobian, decided by its eigenvalues.
    pub fn stable(&self) -> bool {
        self.verdict_eigen
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::expm_oracle;
    use crate::poincare::{fixed_point_analytic, CycleSpec};

    fn setup() -> (ChainPlant, FixedPoint) {
        let p = ChainPlant::atracurium();
        let fp = fixed_point_analytic(&p, CycleSpec::new(300.0, 20.0).unwrap()).unwrap();
        (p, fp)
    }

    #[test]
    fn jd_atracurium() {
        let (p, fp) = setup();
        let jd = compute_jd(&p, &fp).unwrap();
        let j = [0.4733, 0.1410, 0.0221];
        let d = [-10.0829, -2.5705, -0.3633];
        for i in 0..3 {
            assert!((jd.j[i] - j[i]).abs() < 5e-4);
            assert!((jd.d[i] - d[i]).abs() < 5e-4, "{}", jd.d[i]);
        }
        assert!(!jd.degenerate);
    }

    #[test]
    fn jd_degenerate_at_zero() {
        let (p, _) = setup();
        let fp = fixed_point_analytic(&p, CycleSpec::new(0.0, 20.0).unwrap()).unwrap();
        let jd = compute_jd(&p, &fp).unwrap();
        assert!(jd.degenerate);
        assert_eq!(jd.d, StateVec::zeros());
    }

    #[test]
    fn jd_rejects_foreign_fixed_point() {
        let (p, mut fp) = setup();
        fp.state = StateVec::new(1.0, 500.0, 1.0);
        assert!(matches!(
            compute_jd(&p, &fp),
            Err(IgoError::Inconsistent(_))
        ));
    }

    #[test]
    fn jacobian_forms_agree() {
        let (p, fp) = setup();
        assert_eq!(jacobian(&p, &fp, 0.0, 0.0), p.propagator(20.0));
        for (fs, ps) in [(-0.1, 0.29), (-1.0, 4.0), (-3.0, 0.5)] {
            let a = jacobian(&p, &fp, fs, ps);
            let b = jacobian_product_form(&p, &fp, fs, ps);
            assert!((a - b).amax() < 1e-12);
        }
    }

    #[test]
    fn jacobian_traces() {
        let (p, fp) = setup();
        let t1 = jacobian(&p, &fp, -0.1, 0.29).trace();
        assert!((t1 - 0.4165).abs() < 1e-3, "{t1}");
        let t2 = jacobian(&p, &fp, -1.0, 4.0).trace();
        assert!((t2 + 0.9514).abs() < 2e-3, "{t2}");
    }

    #[test]
    fn criteria_zero_slopes() {
        let (p, fp) = setup();
        let lin = criterion_linear(&p, &fp, 0.0, 0.0).unwrap();
        assert_eq!(lin.lhs, 0.0);
        assert!(lin.stable);
        let det = criterion_det(&p, &fp, 0.0, 0.0).unwrap();
        let expected = -p
            .rates()
            .iter()
            .map(|a| 1.0 + (-a * 20.0).exp())
            .product::<f64>();
        assert!((det.chi_at_minus_1 - expected).abs() < 1e-12);
        assert!(det.stable);
    }

    #[test]
    fn criteria_classify_design_points() {
        let (p, fp) = setup();
        let stable = StabilityReport::evaluate(&p, &fp, -1.0, 4.0).unwrap();
        assert!(stable.verdict_linear && stable.verdict_det && stable.verdict_eigen);
        let unstable = StabilityReport::evaluate(&p, &fp, -1.0, 5.5).unwrap();
        assert!(!unstable.verdict_linear && !unstable.verdict_det && !unstable.verdict_eigen);
    }

    #[test]
    fn hypothesis_violations() {
        let (p, fp) = setup();
        assert!(matches!(
            criterion_linear(&p, &fp, 0.5, 1.0),
            Err(IgoError::SlopeSign { .. })
        ));
        assert!(matches!(
            criterion_det(&p, &fp, -0.5, -1.0),
            Err(IgoError::SlopeSign { .. })
        ));
        let unordered = ChainPlant::new([0.3, 0.2, 0.1], [0.1, 0.1]).unwrap();
        assert!(matches!(
            criterion_linear(&unordered, &fp, -1.0, 1.0),
            Err(IgoError::RateOrdering(_))
        ));
    }

    #[test]
    fn linear_lhs_is_homogeneous() {
        let (p, fp) = setup();
        let base = criterion_linear(&p, &fp, -0.7, 2.3).unwrap().lhs;
        for alpha in [0.0, 0.25, 1.0, 3.5] {
            let scaled = criterion_linear(&p, &fp, -0.7 * alpha, 2.3 * alpha)
                .unwrap()
                .lhs;
            assert!((scaled - alpha * base).abs() <= 1e-12 * (1.0 + base.abs()));
        }
    }

    #[test]
    fn script_q_reparameterises_jacobian() {
        let (p, fp) = setup();
        let sq = script_q(
            &p,
            &ScriptQParams {
                period: 20.0,
                xi: 0.0,
                eta: 0.0,
            },
        )
        .unwrap();
        assert_eq!(sq, p.propagator(20.0));
        let params = ScriptQParams {
            period: 20.0,
            xi: -1.0,
            eta: 1200.0,
        };
        assert_eq!(params, ScriptQParams::from_slopes(&fp, -1.0, 4.0));
        let diff = script_q(&p, &params).unwrap() - jacobian(&p, &fp, -1.0, 4.0);
        assert!(diff.amax() < 1e-9);
        let d = d_bar(&p, 20.0).unwrap() * 300.0 - p.a() * fp.state;
        assert!(d.amax() < 1e-9);
    }

    #[test]
    fn spectral_floor_values() {
        let p = ChainPlant::atracurium();
        assert!((spectral_floor(&p, 20.0) - (-7.48f64).exp()).abs() < 1e-18);
        assert!((spectral_floor(&p, 20.0) - 5.63e-4).abs() < 2e-6);
        assert!((spectral_floor(&p, 1e-12) - 1.0).abs() < 1e-12);
        let doubled = ChainPlant::new([0.0374, 0.1496, 0.748], [0.0374, 0.056]).unwrap();
        assert!((spectral_floor(&doubled, 20.0) - (-2.0 * 0.374 * 20.0f64).exp()).abs() < 1e-18);
    }

    #[test]
    fn spectral_bounds_zero_feedback() {
        let p = ChainPlant::atracurium();
        let r = spectral_bounds_check(
            &p,
            &ScriptQParams {
                period: 20.0,
                xi: 0.0,
                eta: 0.0,
            },
        )
        .unwrap();
        assert!(r.all_hold(), "{r:?}");
        let mut re: Vec<f64> = r.eigen.real_values();
        re.sort_by(f64::total_cmp);
        for (z, a) in re.iter().zip(p.rates().iter().rev()) {
            assert!((z - (-a * 20.0).exp()).abs() < 1e-14);
        }
    }

    #[test]
    fn spectral_bounds_at_complex_pair_design() {
        // Full precision: spectrum is a complex pair plus a real eigenvalue just
        // below zero, so no real eigenvalue sits in [e^{-a3 T}, e^{-a1 T}] and
        // the pair product exceeds e^{-(a1+a2)T}. Recorded, not suppressed.
        let p = ChainPlant::atracurium();
        let r = spectral_bounds_check(
            &p,
            &ScriptQParams {
                period: 20.0,
                xi: -1.0,
                eta: 1200.0,
            },
        )
        .unwrap();
        assert!(r.no_eigenvalue_above_slowest_mode);
        assert!(r.det_bounded);
        assert!(r.instability_iff_real_below_minus_one);
        assert!(!r.real_eigenvalue_in_band, "z1 = {}", r.z1);
        assert!(r.z1 < 0.0 && r.z1 > -1e-4, "z1 = {}", r.z1);
        assert!((r.pair_product - 0.2814).abs() < 1e-3, "{}", r.pair_product);
        assert!(!r.pair_product_bounded);
    }

    #[test]
    fn diagonalization_closed_forms() {
        for plant in [
            ChainPlant::atracurium(),
            ChainPlant::new([0.01, 0.5, 3.0], [2.0, 0.1]).unwrap(),
        ] {
            let (s, s_inv) = diagonalizer(&plant);
            assert!((s * s_inv - Mat3::identity()).amax() < 1e-12);
            let d = s_inv * plant.a() * s;
            let expected = Mat3::from_diagonal(&nalgebra::Vector3::from(plant.rates().map(|a| -a)));
            assert!((d - expected).amax() < 1e-12);
        }
    }

    #[test]
    fn w_function_routes_agree() {
        let (p, fp) = setup();
        let params = ScriptQParams::from_slopes(&fp, -1.0, 4.0);
        let q = script_q(&p, &params).unwrap();
        let e = p.propagator(20.0);
        for z in [-1.5, -1.0, -0.3, 0.1, 0.3, 0.9, 2.0] {
            let w = w_function(&p, &params, z).unwrap();
            let modal = w_function_modal(&p, &params, z);
            assert!(
                (w - modal).abs() < 1e-9 * (1.0 + w.abs()),
                "z = {z}: {w} vs {modal}"
            );
            let direct = chi(&q, C64::new(z, 0.0)).re;
            let factored = (Matrix3::identity() * z - e).determinant() * w;
            assert!((direct - factored).abs() < 1e-9, "z = {z}");
        }
    }

    #[test]
    fn psi_identity_and_sign() {
        let p = ChainPlant::atracurium();
        for t in [0.5, 5.0, 20.0, 60.0] {
            let r = psi_identity(&p, t).unwrap();
            assert!(
                (r.direct - r.via_psi).abs() < 1e-10 * (1.0 + r.direct.abs()),
                "{r:?}"
            );
            assert!(r.direct <= 0.0);
        }
    }

    #[test]
    fn exp_of_jacobian_base_matches_oracle() {
        let (p, fp) = setup();
        let jd = compute_jd(&p, &fp).unwrap();
        let oracle = expm_oracle(&(p.a() * 20.0));
        assert!((jd.j - oracle.column(0)).amax() < 1e-12);
    }
}
