//! Tridiagonal solves with partial pivoting.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Solves `A x = rhs` for tridiagonal `A` given by `sub` (length n−1), `diag`
/// (n) and `sup` (n−1). Exactly singular pivots are nudged so that the solve
/// doubles as an inverse-iteration step at an exact eigenvalue.
pub fn solve(sub: &[Complex64], diag: &[Complex64], sup: &[Complex64], rhs: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = diag.len();
    if n == 0 || sub.len() + 1 != n || sup.len() + 1 != n || rhs.len() != n {
        return Err(Error::invalid("tridiagonal solve: inconsistent lengths"));
    }
    let scale = diag.iter().chain(sub).chain(sup).map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let tiny = f64::EPSILON * scale;
    let mut d = diag.to_vec();
    let mut du: Vec<Complex64> = sup.to_vec();
    du.push(Complex64::new(0.0, 0.0));
    let mut du2 = vec![Complex64::new(0.0, 0.0); n];
    let mut dl: Vec<Complex64> = sub.to_vec();
    let mut b = rhs.to_vec();
    for i in 0..n - 1 {
        if d[i].norm() >= dl[i].norm() {
            if d[i].norm() <= tiny {
                d[i] = Complex64::new(tiny, 0.0);
            }
            let f = dl[i] / d[i];
            d[i + 1] -= f * du[i];
            b[i + 1] = b[i + 1] - f * b[i];
            dl[i] = Complex64::new(0.0, 0.0);
        } else {
            let f = d[i] / dl[i];
            d[i] = dl[i];
            let t = d[i + 1];
            d[i + 1] = du[i] - f * t;
            du[i] = t;
            if i + 1 < n - 1 {
                du2[i] = du[i + 1];
                du[i + 1] = -f * du2[i];
            }
            b.swap(i, i + 1);
            b[i + 1] = b[i + 1] - f * b[i];
        }
    }
    if d[n - 1].norm() <= tiny {
        d[n - 1] = Complex64::new(tiny, 0.0);
    }
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for i in (0..n).rev() {
        let mut v = b[i];
        if i + 1 < n {
            v -= du[i] * x[i + 1];
        }
        if i + 2 < n {
            v -= du2[i] * x[i + 2];
        }
        x[i] = v / d[i];
    }
    if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("tridiagonal solve"));
    }
    Ok(x)
}

pub fn solve_real(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let c = |v: &[f64]| v.iter().map(|&x| Complex64::new(x, 0.0)).collect::<Vec<_>>();
    Ok(solve(&c(sub), &c(diag), &c(sup), &c(rhs))?.into_iter().map(|z| z.re).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn apply(sub: &[Complex64], diag: &[Complex64], sup: &[Complex64], x: &[Complex64]) -> Vec<Complex64> {
        let n = diag.len();
        (0..n)
            .map(|i| {
                let mut v = diag[i] * x[i];
                if i > 0 {
                    v += sub[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    v += sup[i] * x[i + 1];
                }
                v
            })
            .collect()
    }

    #[test]
    fn solves_systems_that_need_pivoting() {
        let c = |re: f64, im: f64| Complex64::new(re, im);
        let n = 50;
        let diag: Vec<_> = (0..n).map(|i| c(if i % 7 == 0 { 0.0 } else { 4.0 + 0.1 * i as f64 }, 0.1)).collect();
        let sub: Vec<_> = (0..n - 1).map(|i| c(3.0 + 0.1 * i as f64, -0.5)).collect();
        let sup: Vec<_> = (0..n - 1).map(|i| c(2.0, i as f64 * 0.01)).collect();
        let truth: Vec<_> = (0..n).map(|i| c((i as f64).sin(), (i as f64).cos())).collect();
        let rhs = apply(&sub, &diag, &sup, &truth);
        let x = solve(&sub, &diag, &sup, &rhs).unwrap();
        for (a, b) in x.iter().zip(&truth) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn inverse_iteration_at_an_exact_eigenvalue() {
        // 1D Dirichlet Laplacian: eigenvalue 2 − 2cos(π/(n+1)), eigenvector sin.
        let n = 30;
        let lam = 2.0 - 2.0 * (std::f64::consts::PI / (n as f64 + 1.0)).cos();
        let diag = vec![2.0 - lam; n];
        let off = vec![-1.0; n - 1];
        let mut v = vec![1.0; n];
        for _ in 0..2 {
            v = solve_real(&off, &diag, &off, &v).unwrap();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= norm);
        }
        let s: Vec<f64> = (1..=n).map(|i| (std::f64::consts::PI * i as f64 / (n as f64 + 1.0)).sin()).collect();
        let ns = s.iter().map(|x| x * x).sum::<f64>().sqrt();
        let overlap: f64 = v.iter().zip(&s).map(|(a, b)| a * b / ns).sum();
        assert!((overlap.abs() - 1.0).abs() < 1e-10);
    }
}
