//! Numeric text formatting shared by the CSV/PGM writers.

use crate::scalar::Real;

/// 17-significant-digit scientific notation: round-trip exact for `f64`.
pub fn g17<S: Real>(x: S) -> String {
    format!("{:.16e}", x.as_f64())
}

/// Format a `{−1,+1}`-valued scalar as an integer.
pub fn bit<S: Real>(x: S) -> String {
    format!("{}", x.as_f64() as i64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g17_round_trips() {
        for &x in &[0.1, -1.5, 0.75, 2.0 / 3.0, 1e-300, 123456.789] {
            let s = g17(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
    }

    #[test]
    fn bit_formats_labels() {
        assert_eq!(bit(1.0), "1");
        assert_eq!(bit(-1.0), "-1");
    }
}
