//! Spherical Bessel functions of the first kind and their zeros.
//!
//! `j_l(z) = sqrt(π/(2z)) J_{l+1/2}(z)`, so the zeros of `j_l` are those of
//! `J_{l+1/2}`.

use crate::error::{Error, Result};

/// j_l(z) for z ≥ 0.
pub fn spherical_jn(l: u32, z: f64) -> f64 {
    if z < l as f64 + 1.0 {
        return series(l, z);
    }
    let (s, c) = z.sin_cos();
    let j0 = s / z;
    if l == 0 {
        return j0;
    }
    let mut prev = j0;
    let mut cur = s / (z * z) - c / z;
    for k in 1..l {
        let next = (2 * k + 1) as f64 / z * cur - prev;
        prev = cur;
        cur = next;
    }
    cur
}

fn series(l: u32, z: f64) -> f64 {
    let mut lead = 1.0;
    for k in 0..l {
        lead *= z / (2 * k + 3) as f64;
    }
    let mut term = 1.0;
    let mut sum = 1.0;
    let x = -0.5 * z * z;
    for k in 1..200 {
        term *= x / (k as f64 * (2 * l + 2 * k + 1) as f64);
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    lead * sum
}

/// d/dz j_l(z).
pub fn spherical_jn_prime(l: u32, z: f64) -> f64 {
    if l == 0 {
        -spherical_jn(1, z)
    } else {
        spherical_jn(l - 1, z) - (l + 1) as f64 / z * spherical_jn(l, z)
    }
}

/// Riccati–Bessel ψ_l(z) = z·j_l(z).
pub fn riccati_psi(l: u32, z: f64) -> f64 {
    if l == 0 {
        z.sin()
    } else {
        z * spherical_jn(l, z)
    }
}

/// ψ_l'(z).
pub fn riccati_psi_prime(l: u32, z: f64) -> f64 {
    if l == 0 {
        z.cos()
    } else {
        z * spherical_jn(l - 1, z) - l as f64 * spherical_jn(l, z)
    }
}

/// The first `count` positive zeros of j_l in increasing order.
pub fn spherical_jn_zeros(l: u32, count: usize) -> Result<Vec<f64>> {
    let f = |z: f64| spherical_jn(l, z);
    let mut zeros = Vec::with_capacity(count);
    let step = 0.25;
    // j_l keeps its sign on (0, l]; the first zero lies beyond l + 1.
    let mut a = l as f64 + 0.5;
    let mut fa = f(a);
    let limit = a + (count as f64 + l as f64 + 10.0) * std::f64::consts::PI;
    while zeros.len() < count {
        let b = a + step;
        if b > limit {
            return Err(Error::RootBracket { l: l as usize, n: zeros.len() + 1 });
        }
        let fb = f(b);
        if fa == 0.0 {
            zeros.push(a);
        } else if fa.signum() != fb.signum() && fb != 0.0 {
            zeros.push(refine(l, a, b, fa));
        }
        a = b;
        fa = fb;
    }
    Ok(zeros)
}

fn refine(l: u32, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let fm = spherical_jn(l, mid);
        if fm == 0.0 {
            return mid;
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    let mut z = 0.5 * (a + b);
    for _ in 0..3 {
        let d = spherical_jn_prime(l, z);
        let next = z - spherical_jn(l, z) / d;
        if !(next > a - 1e-9 && next < b + 1e-9) {
            break;
        }
        z = next;
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn closed_j1(z: f64) -> f64 {
        z.sin() / (z * z) - z.cos() / z
    }

    fn closed_j2(z: f64) -> f64 {
        (3.0 / (z * z) - 1.0) * z.sin() / z - 3.0 * z.cos() / (z * z)
    }

    #[test]
    fn matches_closed_forms() {
        for &z in &[0.3, 1.0, 2.5, 4.0, 7.7, 15.0, 40.0] {
            assert!((spherical_jn(0, z) - z.sin() / z).abs() < 1e-15);
            assert!((spherical_jn(1, z) - closed_j1(z)).abs() < 1e-13, "{z}");
            assert!((spherical_jn(2, z) - closed_j2(z)).abs() < 1e-12, "{z}");
        }
        assert!((spherical_jn(0, 1e-8) - 1.0).abs() < 1e-15);
        let two_terms = 1e-9 / 105.0 * (1.0 - 1e-6 / 18.0);
        assert!((spherical_jn(3, 1e-3) - two_terms).abs() < 1e-14 * two_terms);
    }

    #[test]
    fn series_and_recurrence_agree_at_the_switch() {
        for l in 0..8 {
            let z = l as f64 + 1.0;
            let s = series(l, z);
            let r = spherical_jn(l, z);
            assert!((s - r).abs() < 1e-12, "l={l}: {s} {r}");
        }
    }

    #[test]
    fn derivative_matches_differences() {
        for l in 0..4 {
            for &z in &[0.7, 2.0, 5.5, 11.0] {
                let h = 1e-5;
                let fd = (spherical_jn(l, z + h) - spherical_jn(l, z - h)) / (2.0 * h);
                assert!((spherical_jn_prime(l, z) - fd).abs() < 1e-8);
                let fd = (riccati_psi(l, z + h) - riccati_psi(l, z - h)) / (2.0 * h);
                assert!((riccati_psi_prime(l, z) - fd).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn zeros_for_l0_are_multiples_of_pi() {
        let z = spherical_jn_zeros(0, 8).unwrap();
        for (n, x) in z.iter().enumerate() {
            assert!((x - (n + 1) as f64 * PI).abs() < 1e-13);
        }
    }

    #[test]
    fn first_zero_for_l1_solves_tan_x_eq_x() {
        // Independent bisection on tan x − x over (π, 3π/2).
        let g = |x: f64| x.tan() - x;
        let (mut a, mut b) = (PI + 1e-9, 1.5 * PI - 1e-9);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if g(a).signum() == g(m).signum() {
                a = m;
            } else {
                b = m;
            }
        }
        let z = spherical_jn_zeros(1, 3).unwrap();
        assert!((z[0] - 0.5 * (a + b)).abs() < 1e-12);
        assert!((z[0] - 4.493409).abs() < 1e-6);
    }

    #[test]
    fn zeros_are_increasing_and_accurate() {
        for l in 0..6 {
            let z = spherical_jn_zeros(l, 12).unwrap();
            assert!(z.windows(2).all(|w| w[1] > w[0] + 2.5));
            for &x in &z {
                let jnu = (2.0 * x / PI).sqrt() * spherical_jn(l, x);
                assert!(jnu.abs() < 1e-12, "l={l} x={x} {jnu}");
            }
        }
    }
}
