//! Small helpers on complex slices.

use num_complex::Complex64;

/// `<x, y> = sum_i x_i * conj(y_i)`.
pub fn inner(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a * b.conj()).sum()
}

pub fn norm_sqr(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum()
}

pub fn norm(x: &[Complex64]) -> f64 {
    norm_sqr(x).sqrt()
}

pub fn max_abs(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// `exp(2 pi i num / den)`, with `num` reduced modulo `den` first.
pub fn root_of_unity(num: i64, den: usize) -> Complex64 {
    let r = num.rem_euclid(den as i64) as f64;
    Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * r / den as f64)
}

/// Circular translation `(T_shift x)(l) = x(l - shift)`.
pub fn translate(x: &[Complex64], shift: i64) -> Vec<Complex64> {
    let n = x.len() as i64;
    (0..n)
        .map(|l| x[(l - shift).rem_euclid(n) as usize])
        .collect()
}

/// Modulation `(M_f x)(l) = x(l) exp(2 pi i f l / n)`.
pub fn modulate(x: &[Complex64], f: i64) -> Vec<Complex64> {
    let n = x.len();
    x.iter()
        .enumerate()
        .map(|(l, v)| v * root_of_unity(f * l as i64, n))
        .collect()
}
