//! Cylinder functions of integer order.
//!
//! `J_n(z)` for complex `z` comes from Miller's backward recurrence,
//! normalized with the generating-function identity
//! `e^{∓iz} = J_0 + 2 Σ (∓i)^k J_k`, choosing the sign that keeps the
//! normalization sum free of cancellation. For real arguments,
//! `Y_0`/`Y_1` use Neumann series in the already available `J_{2k}` below
//! `x = 25` and the Hankel asymptotic expansion above it; higher orders
//! follow from forward recurrence, which is stable for `Y_n`.

use num_complex::Complex64;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Largest modulus accepted by the evaluators.
pub const MAX_ARGUMENT: f64 = 1.0e5;
/// Largest `|Im z|` accepted before `e^{|Im z|}` growth risks overflow.
pub const MAX_IMAG: f64 = 600.0;

/// Switch point between the Neumann series and the asymptotic expansion.
const ASYMPTOTIC_THRESHOLD: f64 = 25.0;

fn check_argument(z: Complex64) -> Result<()> {
    if !z.re.is_finite() || !z.im.is_finite() || z.norm() > MAX_ARGUMENT || z.im.abs() > MAX_IMAG {
        return Err(Error::BesselRange { arg: format!("{z}") });
    }
    Ok(())
}

fn parity(n: i32) -> f64 {
    if n.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `J_0(z) .. J_top(z)` by Miller's algorithm; `top` is at least `nmax`.
fn miller(nmax: usize, z: Complex64) -> Vec<Complex64> {
    let zero = Complex64::new(0.0, 0.0);
    if z.norm() == 0.0 {
        let mut out = vec![zero; nmax + 1];
        out[0] = Complex64::new(1.0, 0.0);
        return out;
    }
    let a = z.norm();
    let top = (nmax as f64).max(a.ceil());
    let mut start = (top + 20.0 + (40.0 * top).sqrt()).ceil() as usize;
    if start % 2 == 1 {
        start += 1;
    }
    // Normalize against e^{-iz} when Im z >= 0, e^{iz} otherwise.
    let upper = z.im >= 0.0;
    let unit_pow = |k: usize| -> Complex64 {
        // (-i)^k or (i)^k
        let r = k % 4;
        let (re, im) = match r {
            0 => (1.0, 0.0),
            1 => (0.0, 1.0),
            2 => (-1.0, 0.0),
            _ => (0.0, -1.0),
        };
        if upper {
            Complex64::new(re, -im)
        } else {
            Complex64::new(re, im)
        }
    };

    let mut vals = vec![zero; start + 1];
    let mut next = zero;
    let mut cur = Complex64::new(1.0e-30, 0.0);
    vals[start] = cur;
    let mut sum = zero;
    for k in (1..=start).rev() {
        let prev = Complex64::new(2.0 * k as f64, 0.0) / z * cur - next;
        next = cur;
        cur = prev;
        vals[k - 1] = cur;
        if k - 1 > 0 {
            sum += 2.0 * unit_pow(k - 1) * cur;
        }
        if cur.norm() > 1.0e200 {
            let s = 1.0e-200;
            for v in vals[k - 1..].iter_mut() {
                *v *= s;
            }
            next *= s;
            cur *= s;
            sum *= s;
        }
    }
    sum += vals[0];
    if z.im == 0.0 {
        // real axis: J_0 + 2 Σ J_{2k} = 1 keeps the result exactly real
        let even: f64 = vals[0].re + 2.0 * vals.iter().skip(2).step_by(2).map(|v| v.re).sum::<f64>();
        let scale = 1.0 / even;
        for v in vals.iter_mut() {
            *v = Complex64::new(v.re * scale, 0.0);
        }
        return vals;
    }
    let exact = if upper {
        (-Complex64::i() * z).exp()
    } else {
        (Complex64::i() * z).exp()
    };
    let scale = exact / sum;
    for v in vals.iter_mut() {
        *v *= scale;
    }
    vals
}

/// Hankel asymptotic `(P, Q)` for order 0 or 1 at real `x >= 25`.
fn hankel_pq(nu: u32, x: f64) -> (f64, f64) {
    let mu = 4.0 * (nu * nu) as f64;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..60 {
        let odd = (2 * k - 1) as f64;
        term *= (mu - odd * odd) / (k as f64 * 8.0 * x);
        if term.abs() > last || term.abs() < 1e-18 {
            break;
        }
        last = term.abs();
        // a_k / x^k alternates between Q (odd k) and P (even k) with sign (-1)^{floor(k/2)}
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 1 {
            q += sign * term;
        } else {
            p += sign * term;
        }
    }
    (p, q)
}

fn asymptotic_jy(nu: u32, x: f64) -> (f64, f64) {
    let (p, q) = hankel_pq(nu, x);
    let chi = x - (nu as f64 * FRAC_PI_2 + FRAC_PI_4);
    let amp = (2.0 / (PI * x)).sqrt();
    let (s, c) = chi.sin_cos();
    (amp * (p * c - q * s), amp * (p * s + q * c))
}

/// `J_order(z)` for complex `z`.
pub fn bessel_j(order: i32, z: Complex64) -> Result<Complex64> {
    check_argument(z)?;
    let n = order.unsigned_abs() as usize;
    if z.im == 0.0 && z.re.abs() > ASYMPTOTIC_THRESHOLD && n <= 1 {
        let x = z.re.abs();
        let (j, _) = asymptotic_jy(n as u32, x);
        // J_n(-x) = (-1)^n J_n(x)
        let j = if z.re < 0.0 && n == 1 { -j } else { j };
        return Ok(Complex64::new(parity(order.min(0)) * j, 0.0));
    }
    let vals = miller(n, z);
    let s = if order < 0 { parity(order) } else { 1.0 };
    Ok(vals[n] * s)
}

/// `J_order(x)` for real `x`.
pub fn bessel_j_real(order: i32, x: f64) -> Result<f64> {
    Ok(bessel_j(order, Complex64::new(x, 0.0))?.re)
}

/// `[J_0(z), .., J_nmax(z)]`.
pub fn bessel_j_array(nmax: usize, z: Complex64) -> Result<Vec<Complex64>> {
    check_argument(z)?;
    let mut vals = miller(nmax, z);
    vals.truncate(nmax + 1);
    Ok(vals)
}

/// `J_n` and `Y_n` for `n = 0..=nmax` at a real positive argument.
#[derive(Debug, Clone)]
pub struct RealCylinder {
    pub j: Vec<f64>,
    pub y: Vec<f64>,
}

impl RealCylinder {
    pub fn new(nmax: usize, x: f64) -> Result<Self> {
        if !(x > 0.0) {
            return Err(Error::BesselRange { arg: format!("{x} (Y_n needs x > 0)") });
        }
        check_argument(Complex64::new(x, 0.0))?;
        let full = miller(nmax + 1, Complex64::new(x, 0.0));
        let jr: Vec<f64> = full.iter().map(|v| v.re).collect();
        let (y0, y1) = if x > ASYMPTOTIC_THRESHOLD {
            (asymptotic_jy(0, x).1, asymptotic_jy(1, x).1)
        } else {
            let l = (x / 2.0).ln() + EULER_GAMMA;
            let mut s0 = 0.0;
            let mut s1 = 0.0;
            let mut k = 1;
            while 2 * k + 1 < jr.len() {
                let sgn = if k % 2 == 0 { 1.0 } else { -1.0 };
                s0 += sgn * jr[2 * k] / k as f64;
                s1 += sgn * (jr[2 * k - 1] - jr[2 * k + 1]) / k as f64;
                k += 1;
            }
            let y0 = 2.0 / PI * (l * jr[0] - 2.0 * s0);
            let y1 = 2.0 / PI * (l * jr[1] - jr[0] / x + s1);
            (y0, y1)
        };
        let mut y = Vec::with_capacity(nmax + 1);
        y.push(y0);
        if nmax >= 1 {
            y.push(y1);
        }
        for n in 1..nmax {
            let v = 2.0 * n as f64 / x * y[n] - y[n - 1];
            if !v.is_finite() {
                return Err(Error::BesselRange { arg: format!("Y_{}({x}) overflows", n + 1) });
            }
            y.push(v);
        }
        let mut j: Vec<f64> = jr;
        if x > ASYMPTOTIC_THRESHOLD {
            // the asymptotic pair is sharper than Miller for the two lowest orders
            j[0] = asymptotic_jy(0, x).0;
            if j.len() > 1 {
                j[1] = asymptotic_jy(1, x).0;
            }
        }
        j.truncate(nmax + 1);
        Ok(Self { j, y })
    }

    /// `H^(1)_n = J_n + i Y_n` for `n = 0..=nmax`.
    pub fn hankel1(&self) -> Vec<Complex64> {
        self.j.iter().zip(&self.y).map(|(&j, &y)| Complex64::new(j, y)).collect()
    }
}

/// `Y_order(x)` for real `x > 0`.
pub fn bessel_y(order: i32, x: f64) -> Result<f64> {
    let n = order.unsigned_abs() as usize;
    let c = RealCylinder::new(n, x)?;
    let s = if order < 0 { parity(order) } else { 1.0 };
    Ok(c.y[n] * s)
}

/// `H^(1)_order(x)` for real `x > 0`.
pub fn hankel1(order: i32, x: f64) -> Result<Complex64> {
    let n = order.unsigned_abs() as usize;
    let c = RealCylinder::new(n, x)?;
    let s = if order < 0 { parity(order) } else { 1.0 };
    Ok(Complex64::new(c.j[n], c.y[n]) * s)
}

/// Extends a table `f_0..f_N` of a cylinder function to signed orders
/// `-L..=L` (index `m + L`) and returns values and derivatives with respect
/// to the argument. Needs `N >= L + 1`.
pub fn signed_orders_with_derivative<T>(table: &[T], l: usize) -> (Vec<T>, Vec<T>)
where
    T: Copy + std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T>,
{
    assert!(table.len() > l + 1, "table too short for derivative at order {l}");
    let at = |m: i64| -> T {
        let n = m.unsigned_abs() as usize;
        if m < 0 && n % 2 == 1 {
            table[n] * -1.0
        } else {
            table[n]
        }
    };
    let li = l as i64;
    let vals = (-li..=li).map(at).collect();
    let ders = (-li..=li).map(|m| (at(m - 1) - at(m + 1)) * 0.5).collect();
    (vals, ders)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    // Reference values from mpmath at 30 digits.
    #[test]
    fn real_j_matches_reference() {
        let cases = [
            (0, 1.0, 0.7651976865579666),
            (1, 1.0, 0.4400505857449335),
            (5, 10.0, -0.23406152818679363),
            (0, 100.0, 0.019985850304223122),
            (1, 50.5, -0.058062876421320686),
            (10, 3.0, 1.2928351645715883e-05),
            (2, 75.3, -0.06008928055979747),
            (30, 20.0, 0.00012401536360354327),
        ];
        for (n, x, want) in cases {
            let got = bessel_j_real(n, x).unwrap();
            assert!(rel(got, want) < 1e-12, "J_{n}({x}) = {got}, want {want}");
        }
    }

    #[test]
    fn trivial_values() {
        assert_eq!(bessel_j_real(0, 0.0).unwrap(), 1.0);
        assert_eq!(bessel_j_real(1, 0.0).unwrap(), 0.0);
        assert!(bessel_j_real(0, 2.404825557695773).unwrap().abs() < 1e-12);
    }

    #[test]
    fn real_y_matches_reference() {
        let cases = [
            (0, 1.0, 0.08825696421567696),
            (1, 1.0, -0.7812128213002887),
            (0, 0.01, -3.005455637083646),
            (1, 0.01, -63.67859628206065),
            (5, 10.0, 0.13540304768936232),
            (0, 30.0, -0.11729573168666403),
            (1, 40.0, -0.005793505821549633),
            (8, 0.04, -6.267083994802274e+16),
            (3, 7.5, 0.15970759193793513),
            (0, 20.0, 0.06264059680938383),
            (1, 24.9, -0.08600255759555425),
            (1, 25.1, -0.11062223322783099),
        ];
        for (n, x, want) in cases {
            let got = bessel_y(n, x).unwrap();
            assert!(rel(got, want) < 1e-12, "Y_{n}({x}) = {got}, want {want}");
        }
    }

    #[test]
    fn complex_j_matches_reference() {
        let cases = [
            (0, Complex64::new(2.0, 3.0), Complex64::new(-0.46951719204407016, -4.3137884094689225)),
            (3, Complex64::new(2.0, 3.0), Complex64::new(-0.8663250261534319, 1.078786775258142)),
            (1, Complex64::new(10.0, 40.0), Complex64::new(-6369666771958185.0, -1.3019859424128972e16)),
            (2, Complex64::new(-1.0, 0.5), Complex64::new(0.09772335325070329, -0.10960574538743005)),
            (7, Complex64::new(30.0, -20.0), Complex64::new(21584291.999790154, 5153563.061003785)),
        ];
        for (n, z, want) in cases {
            let got = bessel_j(n, z).unwrap();
            assert!((got - want).norm() / want.norm() < 1e-12, "J_{n}({z}) = {got}, want {want}");
        }
    }

    #[test]
    fn negative_orders_and_arguments() {
        let x = 3.7;
        for n in 1..6 {
            let p = bessel_j_real(n, x).unwrap();
            let m = bessel_j_real(-n, x).unwrap();
            assert!((m - parity(n) * p).abs() < 1e-15);
            let neg = bessel_j_real(n, -x).unwrap();
            assert!((neg - parity(n) * p).abs() < 1e-14);
        }
        let big = bessel_j_real(1, -60.0).unwrap();
        assert!((big + bessel_j_real(1, 60.0).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn wronskian_holds() {
        for &x in &[0.05, 0.7, 4.0, 19.0, 26.0, 80.0] {
            let c = RealCylinder::new(6, x).unwrap();
            for n in 0..5 {
                let w = c.j[n + 1] * c.y[n] - c.j[n] * c.y[n + 1];
                assert!(rel(w, 2.0 / (PI * x)) < 1e-11, "x={x} n={n} w={w}");
            }
        }
    }

    #[test]
    fn out_of_range_is_an_error() {
        assert!(bessel_j(0, Complex64::new(1.0, 700.0)).is_err());
        assert!(bessel_j(0, Complex64::new(2.0e5, 0.0)).is_err());
        assert!(bessel_j(0, Complex64::new(f64::NAN, 0.0)).is_err());
        assert!(bessel_y(0, 0.0).is_err());
    }

    #[test]
    fn signed_order_table() {
        let c = RealCylinder::new(5, 2.0).unwrap();
        let (v, d) = signed_orders_with_derivative(&c.j, 3);
        assert_eq!(v.len(), 7);
        // J_0' = -J_1
        assert!((d[3] + c.j[1]).abs() < 1e-15);
        // J_{-1} = -J_1
        assert!((v[2] + c.j[1]).abs() < 1e-15);
    }
}
