use crate::error::{Error, Result};

/// Two-sided 95% critical value of the standard normal.
pub const Z_CRITICAL_95: f64 = 1.959_963_984_540_054;

/// Compares two correlation coefficients from `n` samples each with a Fisher
/// z-test. Returns 1 when `b` is significantly higher, -1 when significantly
/// lower, and 0 when the difference is not significant.
pub fn significance(a: f64, b: f64, n: usize) -> Result<i8> {
    if n < 4 {
        return Err(Error::InvalidParameter(format!(
            "significance test needs n >= 4, got {n}"
        )));
    }
    for r in [a, b] {
        if !(r > -1.0 && r < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "correlation {r} is outside (-1, 1); Fisher z is unbounded"
            )));
        }
    }
    let se = (2.0 / (n as f64 - 3.0)).sqrt();
    let z = (b.atanh() - a.atanh()) / se;
    Ok(if z.abs() <= Z_CRITICAL_95 {
        0
    } else if z > 0.0 {
        1
    } else {
        -1
    })
}
