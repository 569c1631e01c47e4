use nalgebra::{Matrix3, RowVector3, Vector3};

use super::divdiff::chain_exp_entry;
use super::{Mat3, StateVec};
use crate::error::{IgoError, Result};

/// Third-order positive chain `ẋ = A x`, `y = x₃`.
///
/// `A` has `-a₁, -a₂, -a₃` on the diagonal and `g₁, g₂` on the subdiagonal;
/// it is Hurwitz and Metzler by construction. Impulses enter the first state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainPlant {
    rates: [f64; 3],
    gains: [f64; 2],
}

impl ChainPlant {
    pub fn new(rates: [f64; 3], gains: [f64; 2]) -> Result<Self> {
        if rates.iter().chain(gains.iter()).any(|v| !v.is_finite()) {
            return Err(IgoError::InvalidPlant("non-finite parameter".into()));
        }
        if let Some(a) = rates.iter().find(|&&a| a <= 0.0) {
            return Err(IgoError::InvalidPlant(format!("rate {a} is not positive")));
        }
        if let Some(g) = gains.iter().find(|&&g| g <= 0.0) {
            return Err(IgoError::InvalidPlant(format!("gain {g} is not positive")));
        }
        for i in 0..3 {
            for j in i + 1..3 {
                if rates[i] == rates[j] {
                    return Err(IgoError::InvalidPlant(format!(
                        "rates must be pairwise distinct, a{} = a{} = {}",
                        i + 1,
                        j + 1,
                        rates[i]
                    )));
                }
            }
        }
        Ok(Self { rates, gains })
    }

    /// Population-mean atracurium pharmacokinetic/pharmacodynamic chain.
    pub fn atracurium() -> Self {
        Self {
            rates: [0.0374, 0.1496, 0.3740],
            gains: [0.0374, 0.0560],
        }
    }

    pub fn rates(&self) -> [f64; 3] {
        self.rates
    }

    pub fn gains(&self) -> [f64; 2] {
        self.gains
    }

    /// Checks `a₁ < a₂ < a₃`, the ordering assumed by the stability results.
    pub fn require_ordered(&self) -> Result<()> {
        let [a1, a2, a3] = self.rates;
        if a1 < a2 && a2 < a3 {
            Ok(())
        } else {
            Err(IgoError::RateOrdering(self.rates))
        }
    }

    pub fn a(&self) -> Mat3 {
        let [a1, a2, a3] = self.rates;
        let [g1, g2] = self.gains;
        Matrix3::new(-a1, 0.0, 0.0, g1, -a2, 0.0, 0.0, g2, -a3)
    }

    /// Impulse input direction `B = e₁`.
    pub fn b(&self) -> StateVec {
        Vector3::new(1.0, 0.0, 0.0)
    }

    /// Output row `C = e₃ᵀ`.
    pub fn c(&self) -> RowVector3<f64> {
        RowVector3::new(0.0, 0.0, 1.0)
    }

    /// Diagonal of `T·A`: `(-a₁T, -a₂T, -a₃T)`.
    pub fn scaled_points(&self, t: f64) -> [f64; 3] {
        self.rates.map(|a| -a * t)
    }

    /// Free-flow propagator `exp(τA)` for any finite `τ`.
    ///
    /// Uses the Opitz formula with a confluence-safe divided difference of
    /// `exp`, so small `τ` (including zero) is handled without cancellation.
    pub fn propagator(&self, tau: f64) -> Mat3 {
        let pts = self.scaled_points(tau);
        let [g1, g2] = self.gains;
        let mut m = Mat3::zeros();
        for i in 0..3 {
            m[(i, i)] = pts[i].exp();
        }
        m[(1, 0)] = tau * g1 * chain_exp_entry(&pts[0..2]);
        m[(2, 1)] = tau * g2 * chain_exp_entry(&pts[1..3]);
        m[(2, 0)] = tau * tau * g1 * g2 * chain_exp_entry(&pts[0..3]);
        m
    }

    /// State at time `τ` after starting from `x` with no impulses.
    pub fn flow(&self, x: &StateVec, tau: f64) -> StateVec {
        self.propagator(tau) * x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::expm_oracle;

    #[test]
    fn rejects_bad_parameters() {
        assert!(ChainPlant::new([0.1, 0.2, 0.3], [0.1, 0.1]).is_ok());
        assert!(ChainPlant::new([0.0, 0.2, 0.3], [0.1, 0.1]).is_err());
        assert!(ChainPlant::new([0.1, 0.2, 0.3], [-0.1, 0.1]).is_err());
        assert!(ChainPlant::new([0.1, 0.2, 0.1], [0.1, 0.1]).is_err());
        assert!(ChainPlant::new([0.1, f64::NAN, 0.3], [0.1, 0.1]).is_err());
    }

    #[test]
    fn ordering_is_checked_separately() {
        let p = ChainPlant::new([0.3, 0.2, 0.1], [0.1, 0.1]).unwrap();
        assert!(matches!(
            p.require_ordered(),
            Err(IgoError::RateOrdering(_))
        ));
        assert!(ChainPlant::atracurium().require_ordered().is_ok());
    }

    #[test]
    fn a_is_hurwitz_and_metzler() {
        let a = ChainPlant::atracurium().a();
        for i in 0..3 {
            assert!(a[(i, i)] < 0.0);
            for j in 0..3 {
                if i != j {
                    assert!(a[(i, j)] >= 0.0);
                }
            }
        }
    }

    #[test]
    fn propagator_matches_oracle() {
        let p = ChainPlant::atracurium();
        for &tau in &[0.0, 1e-9, 0.01, 0.5, 7.0, 20.0, 80.0] {
            let diff = p.propagator(tau) - expm_oracle(&(p.a() * tau));
            assert!(diff.amax() < 1e-13, "tau = {tau}: {diff}");
        }
        assert_eq!(p.propagator(0.0), Mat3::identity());
    }

    #[test]
    fn propagator_semigroup() {
        let p = ChainPlant::new([0.05, 0.051, 0.9], [0.3, 2.0]).unwrap();
        let lhs = p.propagator(3.0) * p.propagator(4.5);
        let rhs = p.propagator(7.5);
        assert!((lhs - rhs).amax() < 1e-14);
    }
}
