//! Deterministic number formatting for exported data.

/// Significant digits used for every exported number.
pub const SIG_DIGITS: usize = 12;

/// Fixed-point decimal rendering with [`SIG_DIGITS`] significant digits.
///
/// Zero renders as `0`; non-finite values as `NaN`, `inf`, `-inf`.
pub fn fixed12(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    if v == 0.0 {
        return "0".to_string();
    }
    // Round in scientific form first so the exponent reflects carries
    // such as 9.9999999999996 -> 1.00000000000e1.
    let sci = format!("{:.*e}", SIG_DIGITS - 1, v);
    let exp: i32 = sci
        .rsplit_once('e')
        .and_then(|(_, e)| e.parse().ok())
        .unwrap_or(0);
    let decimals = (SIG_DIGITS as i32 - 1 - exp).max(0) as usize;
    format!("{:.*}", decimals, v)
}

/// Rounds to [`SIG_DIGITS`] significant digits, for JSON emission.
pub fn round12(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    format!("{:.*e}", SIG_DIGITS - 1, v).parse().unwrap_or(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_digits() {
        assert_eq!(fixed12(269.597430920123), "269.597430920");
        assert_eq!(fixed12(0.0221), "0.0221000000000");
        assert_eq!(fixed12(-10.0829), "-10.0829000000");
        assert_eq!(fixed12(0.0), "0");
        assert_eq!(fixed12(20.0), "20.0000000000");
        assert_eq!(fixed12(9.99999999999996), "10.0000000000");
        assert_eq!(fixed12(1.5e13), "15000000000000");
    }

    #[test]
    fn rounding() {
        assert_eq!(round12(0.1 + 0.2), 0.3);
        assert_eq!(round12(-1.23456789012345e-7), -1.23456789012e-7);
        assert!(round12(f64::NAN).is_nan());
    }
}
