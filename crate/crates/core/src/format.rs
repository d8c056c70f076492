//! Fixed-precision decimal formatting for floating-point report columns.

/// Significant digits used for every floating-point value written to CSV or JSON.
pub const SIG_DIGITS: i32 = 12;

/// Formats `x` as a plain decimal with 12 significant digits.
///
/// Output is a pure function of the bits of `x`, so reports stay byte-identical
/// across runs.
pub fn sig12(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-6..=15).contains(&exp) {
        return format!("{:.*e}", (SIG_DIGITS - 1) as usize, x);
    }
    let decimals = (SIG_DIGITS - 1 - exp).max(0) as usize;
    format!("{x:.decimals$}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(sig12(0.0), "0");
        assert_eq!(sig12(1.0), "1.00000000000");
        assert_eq!(sig12(std::f64::consts::PI), "3.14159265359");
        assert_eq!(sig12(123456.789), "123456.789000");
        assert_eq!(sig12(-0.00123), "-0.00123000000000");
        assert_eq!(sig12(1e-9), "1.00000000000e-9");
    }
}
