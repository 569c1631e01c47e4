use super::Mat3;

/// Scaled norm bound for the Taylor stage.
const SCALED_NORM: f64 = 0.5;
const MAX_TERMS: usize = 30;

/// Matrix exponential of an arbitrary real 3×3 matrix by scaling and squaring
/// a truncated Taylor series.
///
/// The matrix is scaled by `2^-s` so its 1-norm is at most 0.5, where 30 Taylor
/// terms leave a truncation error far below 1e-16; the result is then squared
/// `s` times. Kept independent of the Opitz route so the two can cross-check.
pub fn expm_oracle(m: &Mat3) -> Mat3 {
    let norm = one_norm(m);
    let s = if norm > SCALED_NORM {
        (norm / SCALED_NORM).log2().ceil() as i32
    } else {
        0
    };
    let scaled = m * 0.5f64.powi(s);
    let mut sum = Mat3::identity();
    let mut term = Mat3::identity();
    for k in 1..=MAX_TERMS {
        term = term * scaled / k as f64;
        sum += term;
        if one_norm(&term) <= f64::EPSILON * 1e-3 * one_norm(&sum) {
            break;
        }
    }
    for _ in 0..s {
        sum = sum * sum;
    }
    sum
}

fn one_norm(m: &Mat3) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::ChainPlant;

    #[test]
    fn zero_gives_identity() {
        assert_eq!(expm_oracle(&Mat3::zeros()), Mat3::identity());
    }

    #[test]
    fn diagonal() {
        let d = Mat3::from_diagonal(&nalgebra::Vector3::new(-0.748, -2.992, -7.48));
        let e = expm_oracle(&d);
        let expected = Mat3::from_diagonal(&nalgebra::Vector3::new(
            (-0.748f64).exp(),
            (-2.992f64).exp(),
            (-7.48f64).exp(),
        ));
        assert!((e - expected).amax() < 1e-14);
    }

    #[test]
    fn atracurium_first_column() {
        let p = ChainPlant::atracurium();
        let e = expm_oracle(&(p.a() * 20.0));
        for (i, v) in [0.4733, 0.1410, 0.0221].iter().enumerate() {
            assert!((e[(i, 0)] - v).abs() < 5e-4);
        }
    }

    #[test]
    fn rotation_generator() {
        // exp of a skew matrix is a rotation by θ about e₃.
        let th = 2.5f64;
        let k = Mat3::new(0.0, -th, 0.0, th, 0.0, 0.0, 0.0, 0.0, 0.0);
        let r = expm_oracle(&k);
        let expected = Mat3::new(
            th.cos(),
            -th.sin(),
            0.0,
            th.sin(),
            th.cos(),
            0.0,
            0.0,
            0.0,
            1.0,
        );
        assert!((r - expected).amax() < 1e-14);
    }

    #[test]
    fn inverse_property() {
        let m = Mat3::new(0.3, -1.2, 0.7, 2.0, -0.4, 0.1, -0.5, 0.9, 1.1);
        let prod = expm_oracle(&m) * expm_oracle(&-m);
        assert!((prod - Mat3::identity()).amax() < 1e-13);
    }
}
