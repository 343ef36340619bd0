//! Bezier curve evaluation by de Casteljau's algorithm.

use crate::Real;

/// Value and first two derivatives of the Bezier curve with the given
/// control values, with respect to the curve parameter `s`.
///
/// Derivatives not defined by the control polygon (degree below 2, or 1)
/// come back as zero.
pub fn eval_with_derivatives<T: Real>(coeffs: &[T], s: T) -> (T, T, T) {
    assert!(!coeffs.is_empty(), "a Bezier curve needs control values");
    let value = de_casteljau(coeffs, s);
    if coeffs.len() < 2 {
        return (value, T::zero(), T::zero());
    }
    let degree = T::from_usize(coeffs.len() - 1).unwrap();
    let hodo1: Vec<T> = coeffs.windows(2).map(|w| (w[1] - w[0]) * degree).collect();
    let dvalue = de_casteljau(&hodo1, s);
    if hodo1.len() < 2 {
        return (value, dvalue, T::zero());
    }
    let degree1 = T::from_usize(hodo1.len() - 1).unwrap();
    let hodo2: Vec<T> = hodo1.windows(2).map(|w| (w[1] - w[0]) * degree1).collect();
    (value, dvalue, de_casteljau(&hodo2, s))
}

fn de_casteljau<T: Real>(coeffs: &[T], s: T) -> T {
    let mut work = coeffs.to_vec();
    let t = T::one() - s;
    for round in (1..work.len()).rev() {
        for i in 0..round {
            work[i] = work[i] * t + work[i + 1] * s;
        }
    }
    work[0]
}
