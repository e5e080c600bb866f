use crate::error::{Error, Result};
use crate::scalar::Real;

/// Bisection for a sign change of `f` on `[lo, hi]`, stopping once the bracket
/// is narrower than `rel_tol` relative to its midpoint.
pub fn bisect<T: Real, F: FnMut(T) -> T>(mut f: F, mut lo: T, mut hi: T, rel_tol: T) -> Result<T> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == T::zero() {
        return Ok(lo);
    }
    if fhi == T::zero() {
        return Ok(hi);
    }
    if flo.is_nan() || fhi.is_nan() || (flo > T::zero()) == (fhi > T::zero()) {
        return Err(Error::Numeric(format!("root not bracketed on [{}, {}]: f = ({}, {})", lo, hi, flo, fhi)));
    }
    for _ in 0..400 {
        let mid = (lo + hi) * T::lit(0.5);
        if hi - lo <= rel_tol * mid.abs().max(T::min_positive_value()) || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == T::zero() {
            return Ok(mid);
        }
        if (fm > T::zero()) == (flo > T::zero()) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi) * T::lit(0.5))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_sqrt_two() {
        let r = bisect(|x: f64| x * x - 2.0, 0.0, 2.0, 1e-15).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn rejects_unbracketed() {
        assert!(bisect(|x: f64| x * x + 1.0, -1.0, 1.0, 1e-12).is_err());
    }
}
