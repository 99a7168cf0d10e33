//! 8-bit quantization of normalized scalars onto the numeric token band.

use super::{LangError, NUM_MAX, NUM_MIN};

/// Width of one quantization level.
pub const QUANTUM: f64 = 1.0 / 255.0;

/// Map `p` in `[0, 1]` to a numeric token value in `[11, 266]`.
///
/// Rounds half up; monotone non-decreasing in `p`.
pub fn quantize_scalar(p: f64) -> Result<u16, LangError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(LangError::Domain(p, "[0, 1]"));
    }
    // f64::round ties away from zero, which is half-up for non-negative p.
    Ok(NUM_MIN + (p * 255.0).round() as u16)
}

/// Inverse of [`quantize_scalar`]: map a numeric token back to `[0, 1]`.
pub fn dequantize_scalar(q: u16) -> f64 {
    debug_assert!((NUM_MIN..=NUM_MAX).contains(&q));
    f64::from(q - NUM_MIN) / 255.0
}

/// Checked variant used when decoding untrusted token streams.
pub fn try_dequantize(q: u16) -> Result<f64, LangError> {
    if !(NUM_MIN..=NUM_MAX).contains(&q) {
        return Err(LangError::Domain(f64::from(q), "[11, 266]"));
    }
    Ok(dequantize_scalar(q))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds() {
        assert_eq!(quantize_scalar(0.0).unwrap(), 11);
        assert_eq!(quantize_scalar(1.0).unwrap(), 266);
        assert_eq!(dequantize_scalar(11), 0.0);
        assert_eq!(dequantize_scalar(266), 1.0);
    }

    #[test]
    fn midpoint_value_from_round_trip_oracle() {
        // Oracle: scan all 256 levels for those reconstructing 0.5 within
        // half a quantum. 0.5 sits exactly on the 138/139 tie; half-up
        // rounding must select the upper level.
        let candidates: Vec<u16> = (NUM_MIN..=NUM_MAX)
            .filter(|&q| (dequantize_scalar(q) - 0.5).abs() <= 1.0 / 510.0 + 1e-12)
            .collect();
        assert_eq!(candidates, vec![138, 139]);
        assert_eq!(quantize_scalar(0.5).unwrap(), 139);
        assert!((dequantize_scalar(139) - 128.0 / 255.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(quantize_scalar(-0.001).is_err());
        assert!(quantize_scalar(1.001).is_err());
        assert!(try_dequantize(10).is_err());
        assert!(try_dequantize(267).is_err());
    }

    #[test]
    fn round_trip_error_bounded_and_monotone() {
        let mut prev = 0;
        for i in 0..=10_000 {
            let p = f64::from(i) / 10_000.0;
            let q = quantize_scalar(p).unwrap();
            assert!(q >= prev, "monotonicity violated at p={p}");
            prev = q;
            assert!(
                (dequantize_scalar(q) - p).abs() <= 1.0 / 510.0 + 1e-12,
                "round-trip error too large at p={p}"
            );
        }
    }
}
