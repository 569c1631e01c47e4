use super::divdiff::{divided_difference, ScalarFunction};
use super::{ChainPlant, Mat3};
use crate::error::{IgoError, Result};

/// Smallest admissible gap between scaled diagonal points `aᵢT`.
pub const MIN_SCALED_SEPARATION: f64 = 1e-6;

/// `f(T·A)` for a chain plant via the Opitz formula.
///
/// Entry `(i, j)`, `i ≥ j`, is `(∏_{k=j}^{i-1} T·g_k) · f[-a_jT, …, -a_iT]`;
/// entries above the diagonal are zero.
pub fn opitz_apply(f: ScalarFunction, plant: &ChainPlant, t: f64) -> Result<Mat3> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(IgoError::InvalidArgument(format!(
            "time scale must be positive and finite, got {t}"
        )));
    }
    let pts = plant.scaled_points(t);
    for i in 0..3 {
        for j in i + 1..3 {
            if (pts[i] - pts[j]).abs() < MIN_SCALED_SEPARATION {
                return Err(IgoError::CoincidentRates {
                    left: pts[i],
                    right: pts[j],
                    min_separation: MIN_SCALED_SEPARATION,
                });
            }
        }
    }
    let gains = plant.gains();
    let mut m = Mat3::zeros();
    for j in 0..3 {
        let mut prefactor = 1.0;
        for i in j..3 {
            if i > j {
                prefactor *= t * gains[i - 1];
            }
            m[(i, j)] = prefactor * divided_difference(f, &pts[j..=i])?;
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::expm_oracle;

    #[test]
    fn identity_gives_scaled_matrix() {
        let p = ChainPlant::atracurium();
        let m = opitz_apply(ScalarFunction::Identity, &p, 20.0).unwrap();
        assert_eq!(m, p.a() * 20.0);
    }

    #[test]
    fn exp_first_column_for_atracurium() {
        let p = ChainPlant::atracurium();
        let m = opitz_apply(ScalarFunction::Exp, &p, 20.0).unwrap();
        let expected = [0.4733, 0.1410, 0.0221];
        for i in 0..3 {
            assert!((m[(i, 0)] - expected[i]).abs() < 5e-4, "{}", m[(i, 0)]);
        }
        assert_eq!(m[(0, 1)], 0.0);
        assert_eq!(m[(1, 2)], 0.0);
    }

    #[test]
    fn mu_is_inverse_of_exp_minus_identity() {
        let p = ChainPlant::atracurium();
        let mu = opitz_apply(ScalarFunction::Mu, &p, 20.0).unwrap();
        let e = expm_oracle(&(p.a() * -20.0)) - Mat3::identity();
        let prod = e * mu;
        assert!((prod - Mat3::identity()).amax() < 1e-10, "{prod}");
    }

    #[test]
    fn coincident_scaled_points_rejected() {
        let p = ChainPlant::new([0.1, 0.1 + 1e-9, 0.5], [1.0, 1.0]).unwrap();
        assert!(matches!(
            opitz_apply(ScalarFunction::Exp, &p, 1.0),
            Err(IgoError::CoincidentRates { .. })
        ));
        assert!(opitz_apply(ScalarFunction::Exp, &ChainPlant::atracurium(), 0.0).is_err());
    }
}
