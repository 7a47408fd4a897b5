//! Dense nonsymmetric eigenvalue computation.
//!
//! Matrices are balanced by diagonal similarity (powers of two, so the
//! scaling is exact) before the Hessenberg–QR reduction, which is delegated to
//! `faer`. Everything here is reentrant.

use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// |Im λ| ≤ `REAL_TOL`·(1 + |Re λ|) classifies λ as real.
pub const REAL_TOL: f64 = 1e-7;

pub fn is_real(z: Complex64) -> bool {
    z.im.abs() <= REAL_TOL * (1.0 + z.re.abs())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub grid_m: Option<usize>,
    pub profile: Option<String>,
    pub bc: Option<String>,
    pub parameter: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SpectrumSample {
    pub eigenvalues: Vec<Complex64>,
    /// Right eigenvectors as columns (unit 2-norm), if requested.
    pub vectors: Option<Mat<Complex64>>,
    pub meta: SampleMeta,
}

impl SpectrumSample {
    pub fn from_values(eigenvalues: Vec<Complex64>) -> Self {
        Self { eigenvalues, vectors: None, meta: SampleMeta::default() }
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn with_meta(mut self, meta: SampleMeta) -> Self {
        self.meta = meta;
        self
    }

    /// Largest distance from an eigenvalue's conjugate to the nearest
    /// eigenvalue, relative to max |λ|.
    pub fn conjugation_defect(&self) -> f64 {
        let scale = self.eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
        self.eigenvalues
            .iter()
            .map(|z| {
                let c = z.conj();
                self.eigenvalues.iter().map(|w| (w - c).norm()).fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
            / scale
    }

    /// Eigenvalues sorted by increasing modulus.
    pub fn by_modulus(&self) -> Vec<Complex64> {
        let mut v = self.eigenvalues.clone();
        v.sort_by(|a, b| a.norm().total_cmp(&b.norm()).then(cmp_complex(a, b)));
        v
    }

    /// Eigenvalues sorted by decreasing real part.
    pub fn by_real_part_desc(&self) -> Vec<Complex64> {
        let mut v = self.eigenvalues.clone();
        v.sort_by(|a, b| b.re.total_cmp(&a.re).then(a.im.total_cmp(&b.im)));
        v
    }
}

fn cmp_complex(a: &Complex64, b: &Complex64) -> std::cmp::Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

pub fn frobenius_norm(a: &Mat<f64>) -> f64 {
    let mut s = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            s += a[(i, j)] * a[(i, j)];
        }
    }
    s.sqrt()
}

/// Diagonal similarity scaling D⁻¹·A·D in place; returns the diagonal of D.
pub fn balance(a: &mut Mat<f64>) -> Vec<f64> {
    const RADIX: f64 = 2.0;
    let n = a.nrows();
    let mut d = vec![1.0; n];
    let mut converged = false;
    let mut sweeps = 0;
    while !converged && sweeps < 100 {
        converged = true;
        sweeps += 1;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / RADIX;
            while c < g {
                f *= RADIX;
                c *= RADIX * RADIX;
            }
            g = r * RADIX;
            while c > g {
                f /= RADIX;
                c /= RADIX * RADIX;
            }
            if (c + r) / f < 0.95 * s {
                converged = false;
                d[i] *= f;
                for j in 0..n {
                    a[(i, j)] /= f;
                    a[(j, i)] *= f;
                }
            }
        }
    }
    d
}

/// All eigenvalues (and optionally right eigenvectors) of a real square matrix.
pub fn eig_general(matrix: &Mat<f64>, with_vectors: bool) -> Result<SpectrumSample> {
    let n = matrix.nrows();
    if n == 0 || matrix.ncols() != n {
        return Err(Error::invalid(format!(
            "eig_general needs a non-empty square matrix, got {}x{}",
            n,
            matrix.ncols()
        )));
    }
    for j in 0..n {
        for i in 0..n {
            if !matrix[(i, j)].is_finite() {
                return Err(Error::NonFinite("eigensolver input"));
            }
        }
    }
    let mut b = matrix.clone();
    let d = balance(&mut b);
    if !with_vectors {
        let eigenvalues = b.eigenvalues().map_err(|_| Error::NoConvergence { index: n })?;
        return Ok(SpectrumSample::from_values(eigenvalues));
    }
    let evd = b.eigen().map_err(|_| Error::NoConvergence { index: n })?;
    let s = evd.S();
    let u = evd.U();
    let eigenvalues: Vec<Complex64> = (0..n).map(|i| s[i]).collect();
    let mut vectors = Mat::<Complex64>::zeros(n, n);
    for j in 0..n {
        let mut norm = 0.0;
        for i in 0..n {
            let v = u[(i, j)] * d[i];
            vectors[(i, j)] = v;
            norm += v.norm_sqr();
        }
        let norm = norm.sqrt();
        if norm > 0.0 {
            for i in 0..n {
                vectors[(i, j)] /= norm;
            }
        }
    }
    Ok(SpectrumSample { eigenvalues, vectors: Some(vectors), meta: SampleMeta::default() })
}

/// Second-order Richardson extrapolation from grids M and 2M.
pub fn richardson(value_m: Complex64, value_2m: Complex64) -> Complex64 {
    (4.0 * value_2m - value_m) / 3.0
}

fn upper(z: &Complex64) -> bool {
    z.im.is_sign_positive()
}

/// Greedy matching on globally sorted distances between `from` and `to`
/// (indices into the full lists). Ties go to the smaller real part, then the
/// smaller imaginary part, of the source and then of the target.
fn greedy(
    prev: &[Complex64],
    curr: &[Complex64],
    from: &[usize],
    to: &[usize],
    perm: &mut [Option<usize>],
    taken: &mut [bool],
) {
    let mut cand: Vec<(f64, usize, usize)> = Vec::with_capacity(from.len() * to.len());
    for &i in from {
        for &j in to {
            cand.push(((prev[i] - curr[j]).norm(), i, j));
        }
    }
    cand.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then_with(|| cmp_complex(&prev[a.1], &prev[b.1]))
            .then_with(|| cmp_complex(&curr[a.2], &curr[b.2]))
    });
    for (_, i, j) in cand {
        if perm[i].is_none() && !taken[j] {
            perm[i] = Some(j);
            taken[j] = true;
        }
    }
}

/// Bijection `perm` with `prev[i]` continued by `current[perm[i]]`.
///
/// Upper-half-plane members (sign of the imaginary part, so `-0.0` counts as
/// lower) are matched first; their conjugates then follow the conjugate of
/// the chosen partner where it exists. Whatever is left is matched greedily.
pub fn pair_spectra(previous: &SpectrumSample, current: &SpectrumSample) -> Result<Vec<usize>> {
    let (prev, curr) = (&previous.eigenvalues, &current.eigenvalues);
    if prev.len() != curr.len() {
        return Err(Error::invalid(format!(
            "cannot pair spectra of lengths {} and {}",
            prev.len(),
            curr.len()
        )));
    }
    let n = prev.len();
    let mut perm = vec![None; n];
    let mut taken = vec![false; n];
    let pu: Vec<usize> = (0..n).filter(|&i| upper(&prev[i])).collect();
    let cu: Vec<usize> = (0..n).filter(|&j| upper(&curr[j])).collect();
    greedy(prev, curr, &pu, &cu, &mut perm, &mut taken);

    // Mirror onto the lower half.
    for i in (0..n).filter(|&i| !upper(&prev[i])) {
        let conj = prev[i].conj();
        let Some(partner) = pu
            .iter()
            .copied()
            .filter(|&p| perm[p].is_some())
            .min_by(|&a, &b| (prev[a] - conj).norm().total_cmp(&(prev[b] - conj).norm()))
        else {
            continue;
        };
        if (prev[partner] - conj).norm() > 1e-12 * (1.0 + conj.norm()) {
            continue;
        }
        let target = curr[perm[partner].unwrap()].conj();
        let hit = (0..n)
            .filter(|&j| !taken[j] && !upper(&curr[j]))
            .min_by(|&a, &b| (curr[a] - target).norm().total_cmp(&(curr[b] - target).norm()));
        if let Some(j) = hit {
            if (curr[j] - target).norm() <= 1e-12 * (1.0 + target.norm()) {
                perm[i] = Some(j);
                taken[j] = true;
            }
        }
    }

    let rest_from: Vec<usize> = (0..n).filter(|&i| perm[i].is_none()).collect();
    let rest_to: Vec<usize> = (0..n).filter(|&j| !taken[j]).collect();
    greedy(prev, curr, &rest_from, &rest_to, &mut perm, &mut taken);
    Ok(perm.into_iter().map(|p| p.expect("square assignment is complete")).collect())
}
