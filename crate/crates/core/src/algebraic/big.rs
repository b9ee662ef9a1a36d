//! Arbitrary-precision complex helpers: univariate polynomials, roots,
//! determinants.

use num_complex::Complex64;
use rug::float::Constant;
use rug::{Complex, Float};

type C64 = Complex64;

pub fn big(prec: u32, z: C64) -> Complex {
    Complex::with_val(prec, (z.re, z.im))
}

pub fn zero(prec: u32) -> Complex {
    Complex::new(prec)
}

pub fn one(prec: u32) -> Complex {
    Complex::with_val(prec, 1)
}

pub fn to_c64(z: &Complex) -> C64 {
    C64::new(z.real().to_f64(), z.imag().to_f64())
}

pub fn modulus(z: &Complex) -> f64 {
    Float::with_val(64, z.abs_ref()).to_f64()
}

/// `exp(2πi·k/n)` at full precision.
pub fn root_of_unity(prec: u32, k: i64, n: usize) -> Complex {
    let mut angle = Float::with_val(prec, Constant::Pi);
    angle *= 2 * k;
    angle /= n as u32;
    Complex::with_val(prec, (Float::with_val(prec, 0), angle)).exp()
}

/// Univariate polynomial, `coeffs[i]` multiplies `t^i`.
pub type UPoly = Vec<Complex>;

pub fn upoly_mul(a: &[Complex], b: &[Complex], prec: u32) -> UPoly {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![zero(prec); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += &Complex::with_val(prec, x * y);
        }
    }
    out
}

pub fn upoly_eval(p: &[Complex], t: &Complex, prec: u32) -> Complex {
    let mut acc = zero(prec);
    for c in p.iter().rev() {
        acc *= t;
        acc += c;
    }
    acc
}

fn upoly_eval_with_derivative(p: &[Complex], t: &Complex, prec: u32) -> (Complex, Complex) {
    let mut v = zero(prec);
    let mut dv = zero(prec);
    for c in p.iter().rev() {
        dv *= t;
        dv += &v;
        v *= t;
        v += c;
    }
    (v, dv)
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn determinant(mut m: Vec<Vec<Complex>>, prec: u32) -> Complex {
    let n = m.len();
    let mut det = one(prec);
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&a, &b| modulus(&m[a][col]).total_cmp(&modulus(&m[b][col])))
            .unwrap_or(col);
        if modulus(&m[piv][col]) == 0.0 {
            return zero(prec);
        }
        if piv != col {
            m.swap(piv, col);
            det = -det;
        }
        det *= &m[col][col];
        let pivot = m[col][col].clone();
        for r in col + 1..n {
            let factor = Complex::with_val(prec, &m[r][col] / &pivot);
            if modulus(&factor) == 0.0 {
                continue;
            }
            for c in col..n {
                let sub = Complex::with_val(prec, &factor * &m[col][c]);
                m[r][c] -= &sub;
            }
        }
    }
    det
}

/// Sylvester resultant of two univariate polynomials of formal degrees
/// `a.len()-1` and `b.len()-1`.
pub fn resultant(a: &[Complex], b: &[Complex], prec: u32) -> Complex {
    let da = a.len() - 1;
    let db = b.len() - 1;
    let n = da + db;
    if n == 0 {
        return one(prec);
    }
    let mut m = vec![vec![zero(prec); n]; n];
    for r in 0..db {
        for (i, c) in a.iter().rev().enumerate() {
            m[r][r + i] = c.clone();
        }
    }
    for r in 0..da {
        for (i, c) in b.iter().rev().enumerate() {
            m[db + r][r + i] = c.clone();
        }
    }
    determinant(m, prec)
}

/// All roots of a polynomial: Aberth iteration in double precision, then
/// refined at full precision.
pub fn poly_roots(p: &[Complex], prec: u32) -> Vec<Complex> {
    let mut p: Vec<Complex> = p.to_vec();
    while p.len() > 1 && modulus(p.last().unwrap()) == 0.0 {
        p.pop();
    }
    let n = p.len() - 1;
    if n == 0 {
        return Vec::new();
    }
    let pf: Vec<C64> = p.iter().map(to_c64).collect();
    let lead = pf[n];
    let radius = 1.0 + pf[..n].iter().map(|c| (c / lead).norm()).fold(0.0, f64::max);
    let mut z: Vec<C64> = (0..n)
        .map(|k| C64::from_polar(radius.min(1e6) * 0.5, 0.4 + std::f64::consts::TAU * k as f64 / n as f64))
        .collect();
    for _ in 0..500 {
        let mut moved = 0.0f64;
        for i in 0..n {
            let (v, dv) = eval_f64(&pf, z[i]);
            if v == C64::new(0.0, 0.0) {
                continue;
            }
            let ratio = v / dv;
            let s: C64 = (0..n).filter(|&j| j != i).map(|j| 1.0 / (z[i] - z[j])).sum();
            let w = ratio / (1.0 - ratio * s);
            if w.is_finite() {
                z[i] -= w;
                moved = moved.max(w.norm() / (1.0 + z[i].norm()));
            }
        }
        if moved < 1e-15 {
            break;
        }
    }
    let mut zb: Vec<Complex> = z.iter().map(|&c| big(prec, c)).collect();
    let tol = Float::with_val(prec, Float::i_exp(1, -(prec as i32) + 16)).to_f64();
    for _ in 0..(prec as usize / 4) {
        let mut moved = 0.0f64;
        for i in 0..n {
            let (v, dv) = upoly_eval_with_derivative(&p, &zb[i], prec);
            if modulus(&v) == 0.0 {
                continue;
            }
            let ratio = Complex::with_val(prec, &v / &dv);
            let mut s = zero(prec);
            for j in 0..n {
                if j != i {
                    let diff = Complex::with_val(prec, &zb[i] - &zb[j]);
                    s += diff.recip();
                }
            }
            let denom = Complex::with_val(prec, 1 - Complex::with_val(prec, &ratio * &s));
            let w = Complex::with_val(prec, &ratio / &denom);
            let mw = modulus(&w);
            if mw.is_finite() {
                zb[i] -= &w;
                moved = moved.max(mw / (1.0 + modulus(&zb[i])));
            }
        }
        if moved < tol {
            break;
        }
    }
    zb
}

fn eval_f64(p: &[C64], t: C64) -> (C64, C64) {
    let mut v = C64::new(0.0, 0.0);
    let mut dv = C64::new(0.0, 0.0);
    for c in p.iter().rev() {
        dv = dv * t + v;
        v = v * t + c;
    }
    (v, dv)
}

/// Coefficients of the polynomial of degree `< n` taking the given values at
/// the `n`-th roots of unity (inverse DFT).
pub fn interpolate_roots_of_unity(values: &[Complex], prec: u32) -> UPoly {
    let n = values.len();
    (0..n)
        .map(|a| {
            let mut acc = zero(prec);
            for (i, v) in values.iter().enumerate() {
                let w = root_of_unity(prec, -((i * a) as i64 % n as i64), n);
                acc += &Complex::with_val(prec, v * &w);
            }
            acc / n as u32
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roots_of_cubic() {
        let prec = 256;
        // (t-1)(t-2)(t+3) = t³ - 7t + 6
        let p: Vec<Complex> = [6.0, -7.0, 0.0, 1.0].iter().map(|&c| big(prec, C64::new(c, 0.0))).collect();
        let mut r: Vec<f64> = poly_roots(&p, prec).iter().map(|z| to_c64(z).re).collect();
        r.sort_by(f64::total_cmp);
        for (a, b) in r.iter().zip([-3.0, 1.0, 2.0]) {
            assert!((a - b).abs() < 1e-60);
        }
    }

    #[test]
    fn resultant_detects_common_root() {
        let prec = 128;
        let c = |v: &[f64]| -> Vec<Complex> { v.iter().map(|&x| big(prec, C64::new(x, 0.0))).collect() };
        // (t-1)(t-2) and (t-1)(t+5) share t = 1.
        let r = resultant(&c(&[2.0, -3.0, 1.0]), &c(&[-5.0, 4.0, 1.0]), prec);
        assert!(modulus(&r) < 1e-30);
        // t - 2 and t - 5: resultant ±3.
        let r = resultant(&c(&[-2.0, 1.0]), &c(&[-5.0, 1.0]), prec);
        assert!((modulus(&r) - 3.0).abs() < 1e-30);
    }

    #[test]
    fn interpolation_recovers_coefficients() {
        let prec = 128;
        let p: Vec<Complex> = [1.0, -2.0, 0.5].iter().map(|&c| big(prec, C64::new(c, 0.3))).collect();
        let n = 4;
        let vals: Vec<Complex> = (0..n).map(|i| upoly_eval(&p, &root_of_unity(prec, i as i64, n), prec)).collect();
        let q = interpolate_roots_of_unity(&vals, prec);
        for (a, b) in p.iter().zip(&q) {
            assert!(modulus(&Complex::with_val(prec, a - b)) < 1e-30);
        }
        assert!(modulus(&q[3]) < 1e-30);
    }
}
