//! Parameter sweeps and branch assembly, exceptional points (order 2),
//! triple points (order 3) and the box-cutoff study of the soliton model.

use argmin::core::{CostFunction, Executor};
use argmin::solver::neldermead::NelderMead;
use faer::linalg::solvers::Solve;
use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eig::{self, SpectrumSample};
use crate::error::{Error, Result};
use crate::operator::{self, BoundarySpec, PencilSign};
use crate::output::fmt;
use crate::profiles::{AlphaProfile, FourierTerm, FIG1_COEFFS};
use crate::soliton::{self, TAIL_OFFSET};

/// One-parameter profile families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Family {
    /// α ≡ p.
    Constant,
    /// α = p·(c0 + c2 r² + c3 r³ + c4 r⁴).
    Quartic { coeffs: [f64; 4] },
    /// The field-reversal quartic, p = C.
    Fig1,
    /// The ζ-quartic at fixed ζ, p = C.
    Fig2 { zeta: f64 },
    /// α = p + Σ terms.
    Fourier { terms: Vec<FourierTerm> },
    /// Unit soliton centred at x0 = p.
    Soliton,
}

impl Family {
    pub fn profile(&self, p: f64) -> Result<AlphaProfile> {
        let profile = match self {
            Family::Constant => AlphaProfile::constant(p),
            Family::Quartic { coeffs } => AlphaProfile::quartic(p, *coeffs),
            Family::Fig1 => AlphaProfile::quartic(p, FIG1_COEFFS),
            Family::Fig2 { zeta } => AlphaProfile::fig2(*zeta, p),
            Family::Fourier { terms } => AlphaProfile::fourier(p, terms.clone()),
            Family::Soliton => AlphaProfile::unit_soliton(p),
        };
        profile.validate()?;
        Ok(profile)
    }

    pub fn parameter_name(&self) -> &'static str {
        match self {
            Family::Constant | Family::Fourier { .. } => "alpha0",
            Family::Quartic { .. } | Family::Fig1 | Family::Fig2 { .. } => "C",
            Family::Soliton => "x0",
        }
    }
}

fn default_track() -> usize {
    10
}

fn default_jump() -> f64 {
    0.05
}

fn default_depth() -> u32 {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub family: Family,
    pub range: [f64; 2],
    pub steps: usize,
    pub bc: BoundarySpec,
    #[serde(rename = "M")]
    pub m: usize,
    /// Number of eigenvalues followed, largest real parts first.
    #[serde(default = "default_track")]
    pub track: usize,
    /// Refine where a paired eigenvalue moves by more than this fraction of
    /// its distance to the nearest other eigenvalue.
    #[serde(default = "default_jump")]
    pub jump_fraction: f64,
    #[serde(default = "default_depth")]
    pub max_depth: u32,
}

impl SweepConfig {
    pub fn new(family: Family, range: [f64; 2], steps: usize, bc: BoundarySpec, m: usize) -> Self {
        Self {
            family,
            range,
            steps,
            bc,
            m,
            track: default_track(),
            jump_fraction: default_jump(),
            max_depth: default_depth(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps < 2 {
            return Err(Error::invalid(format!("a sweep needs at least 2 steps, got {}", self.steps)));
        }
        let [a, b] = self.range;
        if !(a.is_finite() && b.is_finite() && b > a) {
            return Err(Error::invalid(format!("sweep range [{a}, {b}] must be finite and increasing")));
        }
        if self.track == 0 {
            return Err(Error::invalid("track must be positive"));
        }
        if !(self.jump_fraction > 0.0) {
            return Err(Error::invalid("jump_fraction must be positive"));
        }
        self.bc.validate()
    }

    fn width(&self) -> f64 {
        self.range[1] - self.range[0]
    }

    /// The `track` eigenvalues of largest real part at parameter `p`.
    pub fn spectrum_at(&self, p: f64) -> Result<Vec<Complex64>> {
        let op = operator::assemble(&self.family.profile(p)?, &self.bc, self.m)?;
        let mut v = eig::eig_general(&op.matrix, false)?.by_real_part_desc();
        v.truncate(self.track);
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub param: f64,
    pub values: Vec<Complex64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchSample {
    pub param: f64,
    pub lambda: Complex64,
    pub is_real: bool,
    pub grid_m: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub id: usize,
    pub points: Vec<BranchSample>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub samples: Vec<Sample>,
    pub branches: Vec<Branch>,
    /// Intervals still above the jump threshold at the refinement cap.
    pub unresolved: Vec<(f64, f64)>,
    pub m: usize,
}

fn pair(a: &[Complex64], b: &[Complex64]) -> Result<Vec<usize>> {
    eig::pair_spectra(&SpectrumSample::from_values(a.to_vec()), &SpectrumSample::from_values(b.to_vec()))
}

fn jump_exceeds(a: &[Complex64], b: &[Complex64], fraction: f64) -> Result<bool> {
    let perm = pair(a, b)?;
    let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    for (i, &j) in perm.iter().enumerate() {
        let spacing = a
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != i)
            .map(|(_, z)| (z - a[i]).norm())
            .fold(f64::INFINITY, f64::min)
            .max(1e-3 * scale);
        if (b[j] - a[i]).norm() > fraction * spacing {
            return Ok(true);
        }
    }
    Ok(false)
}

type Refined = (Vec<Sample>, Vec<(f64, f64)>);

fn refine(cfg: &SweepConfig, a: &Sample, b: &Sample, depth: u32) -> Result<Refined> {
    if !jump_exceeds(&a.values, &b.values, cfg.jump_fraction)? {
        return Ok((vec![], vec![]));
    }
    if depth >= cfg.max_depth {
        return Ok((vec![], vec![(a.param, b.param)]));
    }
    let p = 0.5 * (a.param + b.param);
    let mid = Sample { param: p, values: cfg.spectrum_at(p)? };
    let (mut left, mut bad) = refine(cfg, a, &mid, depth + 1)?;
    let (right, bad_right) = refine(cfg, &mid, b, depth + 1)?;
    left.push(mid);
    left.extend(right);
    bad.extend(bad_right);
    Ok((left, bad))
}

/// Eigensolves over a uniform parameter grid with adaptive midpoint
/// insertion, chained into branches by [`eig::pair_spectra`].
pub fn sweep(cfg: &SweepConfig) -> Result<Sweep> {
    cfg.validate()?;
    let n = cfg.steps;
    let params: Vec<f64> =
        (0..n).map(|k| cfg.range[0] + cfg.width() * k as f64 / (n - 1) as f64).collect();
    let coarse = params
        .par_iter()
        .map(|&p| Ok(Sample { param: p, values: cfg.spectrum_at(p)? }))
        .collect::<Result<Vec<_>>>()?;
    let refined = (0..n - 1)
        .into_par_iter()
        .map(|k| refine(cfg, &coarse[k], &coarse[k + 1], 0))
        .collect::<Result<Vec<_>>>()?;
    let mut samples = Vec::new();
    let mut unresolved = Vec::new();
    for (k, (inner, bad)) in refined.into_iter().enumerate() {
        samples.push(coarse[k].clone());
        samples.extend(inner);
        unresolved.extend(bad);
    }
    samples.push(coarse[n - 1].clone());
    let branches = chain(&samples, cfg.m)?;
    Ok(Sweep { samples, branches, unresolved, m: cfg.m })
}

/// Links consecutive samples into branches. From the third sample on, each
/// branch is paired from its linear extrapolation, which keeps straight
/// crossings apart.
fn chain(samples: &[Sample], m: usize) -> Result<Vec<Branch>> {
    let k = samples[0].values.len();
    let mut branches: Vec<Branch> = (0..k).map(|id| Branch { id, points: Vec::with_capacity(samples.len()) }).collect();
    for (s, sample) in samples.iter().enumerate() {
        let idx: Vec<usize> = if s == 0 {
            (0..k).collect()
        } else {
            let predicted: Vec<Complex64> = branches
                .iter()
                .map(|b| {
                    let last = b.points[s - 1];
                    if s < 2 {
                        return last.lambda;
                    }
                    let before = b.points[s - 2];
                    let t = (sample.param - last.param) / (last.param - before.param);
                    last.lambda + (last.lambda - before.lambda) * t
                })
                .collect();
            pair(&predicted, &sample.values)?
        };
        for (b, &i) in branches.iter_mut().zip(&idx) {
            let z = sample.values[i];
            b.points.push(BranchSample { param: sample.param, lambda: z, is_real: eig::is_real(z), grid_m: m });
        }
    }
    Ok(branches)
}

pub const BRANCH_HEADER: [&str; 6] = ["branch_id", "param", "re_lambda", "im_lambda", "is_real", "grid_M"];

/// Rows of the branch table; lower-half-plane members are omitted.
pub fn branch_records(branches: &[Branch]) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for b in branches {
        for p in &b.points {
            if !p.is_real && p.lambda.im < 0.0 {
                continue;
            }
            rows.push(vec![
                b.id.to_string(),
                fmt(p.param),
                fmt(p.lambda.re),
                fmt(p.lambda.im),
                u8::from(p.is_real).to_string(),
                p.grid_m.to_string(),
            ]);
        }
    }
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub order: u8,
    /// One parameter for order 2, (ζ, C) for order 3.
    pub params: Vec<f64>,
    pub lambda: Complex64,
    pub branches: Vec<usize>,
    pub residual: f64,
}

pub const BRANCH_POINT_HEADER: [&str; 6] = ["order", "param_1", "param_2", "re_lambda", "im_lambda", "residual"];

pub fn branch_point_record(p: &BranchPoint) -> Vec<String> {
    vec![
        p.order.to_string(),
        fmt(p.params[0]),
        p.params.get(1).map(|v| fmt(*v)).unwrap_or_default(),
        fmt(p.lambda.re),
        fmt(p.lambda.im),
        fmt(p.residual),
    ]
}

/// Relative coalescence gap above which a bracketed transition is not
/// declared an exceptional point.
pub const EP_RESIDUAL: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct EpScan {
    pub points: Vec<BranchPoint>,
    /// Parameter intervals whose transition could not be bracketed.
    pub flagged: Vec<(f64, f64)>,
}

fn real_within(z: Complex64, tol: f64) -> bool {
    z.im.abs() <= tol * (1.0 + z.re.abs())
}

fn nearest_two(values: &[Complex64], c: Complex64) -> Option<(Complex64, Complex64)> {
    let mut v: Vec<Complex64> = values.to_vec();
    v.sort_by(|a, b| (a - c).norm().total_cmp(&(b - c).norm()));
    (v.len() >= 2).then(|| (v[0], v[1]))
}

/// `tol` is the relative realness tolerance for eigenvalues. Brackets each real↔complex transition of the swept branches by bisection
/// to 1e−6 of the parameter range.
pub fn detect_branch_points(cfg: &SweepConfig, sw: &Sweep, tol: f64) -> Result<EpScan> {
    let mut scan = EpScan::default();
    let ptol = 1e-6 * cfg.width();
    for s in 0..sw.samples.len().saturating_sub(1) {
        for (i, b) in sw.branches.iter().enumerate() {
            let (za, zb) = (b.points[s].lambda, b.points[s + 1].lambda);
            let (ra, rb) = (real_within(za, tol), real_within(zb, tol));
            if ra == rb {
                continue;
            }
            let (zc, complex_at, real_at) = if ra { (zb, s + 1, s) } else { (za, s, s + 1) };
            if zc.im < 0.0 {
                continue;
            }
            let Some(k) = (0..sw.branches.len())
                .filter(|&k| k != i)
                .min_by(|&x, &y| {
                    let d = |k: usize| (sw.branches[k].points[complex_at].lambda - zc.conj()).norm();
                    d(x).total_cmp(&d(y))
                })
            else {
                continue;
            };
            let zr = (b.points[real_at].lambda, sw.branches[k].points[real_at].lambda);
            let (p_real, p_complex) = (sw.samples[real_at].param, sw.samples[complex_at].param);
            if !real_within(zr.1, tol) {
                scan.flagged.push((p_real.min(p_complex), p_real.max(p_complex)));
                continue;
            }
            let c_real = 0.5 * (zr.0 + zr.1);
            let c_complex = Complex64::new(zc.re, 0.0);
            let centroid = |p: f64| {
                let t = (p - p_real) / (p_complex - p_real);
                c_real + (c_complex - c_real) * t
            };
            let probe = |p: f64| -> Result<(bool, Complex64, Complex64)> {
                let values = cfg.spectrum_at(p)?;
                let (u, v) = nearest_two(&values, centroid(p)).ok_or(Error::invalid("too few tracked values"))?;
                Ok((!real_within(u, tol) && !real_within(v, tol), u, v))
            };
            let (mut lo, mut hi) = (p_real, p_complex);
            let mut real_pair = probe(lo)?;
            let mut complex_pair = probe(hi)?;
            if real_pair.0 || !complex_pair.0 {
                scan.flagged.push((lo.min(hi), lo.max(hi)));
                continue;
            }
            while (hi - lo).abs() > ptol {
                let mid = 0.5 * (lo + hi);
                let r = probe(mid)?;
                if r.0 {
                    hi = mid;
                    complex_pair = r;
                } else {
                    lo = mid;
                    real_pair = r;
                }
            }
            let lambda = 0.25 * (real_pair.1 + real_pair.2 + complex_pair.1 + complex_pair.2);
            let gap = (real_pair.1 - real_pair.2).norm().max((complex_pair.1 - complex_pair.2).norm());
            let residual = gap / (1.0 + lambda.norm());
            if residual > EP_RESIDUAL {
                scan.flagged.push((lo.min(hi), lo.max(hi)));
                continue;
            }
            let mut ids = vec![i, k];
            ids.sort_unstable();
            scan.points.push(BranchPoint {
                order: 2,
                params: vec![0.5 * (lo + hi)],
                lambda: Complex64::new(lambda.re, 0.0),
                branches: ids,
                residual,
            });
        }
    }
    scan.points.sort_by(|a, b| a.params[0].total_cmp(&b.params[0]));
    Ok(scan)
}

/// Two-parameter families searched for triple points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Plane {
    /// The ζ-quartic over (ζ, C).
    Fig2,
    /// α ≡ first coordinate; the second is inert.
    Constant,
}

impl Plane {
    fn profile(self, zeta: f64, c: f64) -> AlphaProfile {
        match self {
            Plane::Fig2 => AlphaProfile::fig2(zeta, c),
            Plane::Constant => AlphaProfile::constant(zeta),
        }
    }
}

fn default_plane() -> Plane {
    Plane::Fig2
}

fn default_grid() -> usize {
    7
}

fn default_pool() -> usize {
    8
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripleConfig {
    #[serde(default = "default_plane")]
    pub plane: Plane,
    pub zeta: [f64; 2],
    #[serde(rename = "C")]
    pub c: [f64; 2],
    pub bc: BoundarySpec,
    #[serde(rename = "M")]
    pub m: usize,
    /// Coarse scan resolution per axis.
    #[serde(default = "default_grid")]
    pub grid: usize,
    /// Eigenvalues of largest real part considered for clustering.
    #[serde(default = "default_pool")]
    pub pool: usize,
    /// Polish the minimizer by Newton's method on the cluster's
    /// characteristic polynomial.
    #[serde(default = "default_true")]
    pub newton: bool,
    /// Grid used for the coarse scan and Nelder–Mead stage; defaults to
    /// min(M, 100). Newton polishing and the reported residual use M.
    #[serde(default, rename = "search_M")]
    pub search_m: Option<usize>,
}

impl TripleConfig {
    pub fn fig2(m: usize) -> Self {
        Self {
            plane: Plane::Fig2,
            zeta: [0.3, 0.6],
            c: [0.7, 1.0],
            bc: BoundarySpec::physical(1),
            m,
            grid: default_grid(),
            pool: default_pool(),
            newton: true,
            search_m: None,
        }
    }

    fn at_m(&self, m: usize) -> Self {
        Self { m, ..self.clone() }
    }

    fn validate(&self) -> Result<()> {
        for (name, w) in [("zeta", self.zeta), ("C", self.c)] {
            if !(w[0].is_finite() && w[1].is_finite() && w[1] > w[0]) {
                return Err(Error::invalid(format!("{name} window must be finite and increasing")));
            }
        }
        if self.grid < 2 || self.pool < 3 {
            return Err(Error::invalid("triple search needs grid ≥ 2 and pool ≥ 3"));
        }
        self.bc.validate()
    }

    fn matrix(&self, zeta: f64, c: f64) -> Result<Mat<f64>> {
        Ok(operator::assemble(&self.plane.profile(zeta, c), &self.bc, self.m)?.matrix)
    }

    fn inside(&self, zeta: f64, c: f64) -> bool {
        (self.zeta[0]..=self.zeta[1]).contains(&zeta) && (self.c[0]..=self.c[1]).contains(&c)
    }
}

/// The triple among `values` with the smallest sum of pairwise distances.
pub fn tightest_triple(values: &[Complex64]) -> Option<(f64, [usize; 3])> {
    let n = values.len();
    let mut best: Option<(f64, [usize; 3])> = None;
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                let t = (values[a] - values[b]).norm() + (values[a] - values[c]).norm() + (values[b] - values[c]).norm();
                if best.is_none_or(|(bt, _)| t < bt) {
                    best = Some((t, [a, b, c]));
                }
            }
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Cluster {
    t: f64,
    mean: Complex64,
    members: [usize; 3],
}

fn cluster_at(cfg: &TripleConfig, zeta: f64, c: f64) -> Result<Cluster> {
    let mut v = eig::eig_general(&cfg.matrix(zeta, c)?, false)?.by_real_part_desc();
    v.truncate(cfg.pool);
    let (t, members) = tightest_triple(&v).ok_or(Error::invalid("fewer than three eigenvalues"))?;
    let mean = members.iter().map(|&i| v[i]).sum::<Complex64>() / 3.0;
    Ok(Cluster { t, mean, members })
}

struct Objective<'a>(&'a TripleConfig);

impl CostFunction for Objective<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, x: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        let cfg = self.0;
        if !cfg.inside(x[0], x[1]) {
            return Ok(f64::MAX);
        }
        Ok(cluster_at(cfg, x[0], x[1]).map(|c| c.t).unwrap_or(f64::MAX))
    }
}

/// Orthonormal basis of the invariant subspace of the three eigenvalues
/// nearest `sigma`, by shift-invert subspace iteration.
fn cluster_subspace(a: &Mat<f64>, sigma: f64) -> Result<Mat<f64>> {
    let n = a.nrows();
    let mut shifted = a.clone();
    for i in 0..n {
        shifted[(i, i)] -= sigma;
    }
    let lu = shifted.partial_piv_lu();
    let mut x = Mat::<f64>::from_fn(n, 3, |i, j| ((i + 1) as f64 * (0.37 + 0.61 * j as f64)).sin());
    for _ in 0..12 {
        let y = lu.solve(&x);
        if (0..n).any(|i| (0..3).any(|j| !y[(i, j)].is_finite())) {
            return Err(Error::NonFinite("shift-invert subspace iteration"));
        }
        x = y.qr().compute_thin_Q();
    }
    Ok(x)
}

/// Normalized coefficients (p/μ², q/|μ|³) of the centred characteristic
/// polynomial z³ + pz + q of the 3×3 restriction, and the mean μ.
fn centred_pq(a: &Mat<f64>, sigma: f64) -> Result<([f64; 2], f64)> {
    let q = cluster_subspace(a, sigma)?;
    let aq = a * &q;
    let b = q.transpose() * &aq;
    let mu = (b[(0, 0)] + b[(1, 1)] + b[(2, 2)]) / 3.0;
    let c = Mat::<f64>::from_fn(3, 3, |i, j| b[(i, j)] - if i == j { mu } else { 0.0 });
    let minor = |i: usize, j: usize| c[(i, i)] * c[(j, j)] - c[(i, j)] * c[(j, i)];
    let p = minor(0, 1) + minor(0, 2) + minor(1, 2);
    let det = c[(0, 0)] * (c[(1, 1)] * c[(2, 2)] - c[(1, 2)] * c[(2, 1)])
        - c[(0, 1)] * (c[(1, 0)] * c[(2, 2)] - c[(1, 2)] * c[(2, 0)])
        + c[(0, 2)] * (c[(1, 0)] * c[(2, 1)] - c[(1, 1)] * c[(2, 0)]);
    Ok(([p / (mu * mu), -det / mu.abs().powi(3)], mu))
}

/// Newton's method on (p, q) = 0 over (ζ, C). Returns the best point, its
/// |(p, q)| and the cluster mean, or `None` if it leaves the window or never
/// gets below 1e−8.
fn newton_polish(cfg: &TripleConfig, start: [f64; 2], mu0: f64) -> Result<Option<([f64; 2], f64, f64)>> {
    let mut x = start;
    let mut mu = mu0;
    let mut best: Option<([f64; 2], f64, f64)> = None;
    let offset = |mu: f64| 1e-3 * (1.0 + mu.abs());
    for _ in 0..30 {
        let (g, m1) = centred_pq(&cfg.matrix(x[0], x[1])?, mu + offset(mu))?;
        mu = m1;
        let norm = g[0].hypot(g[1]);
        if best.is_none_or(|b| norm < b.1) {
            best = Some((x, norm, mu));
        }
        if norm < 1e-12 {
            break;
        }
        let d = 1e-6;
        let (gz, _) = centred_pq(&cfg.matrix(x[0] + d, x[1])?, mu + offset(mu))?;
        let (gc, _) = centred_pq(&cfg.matrix(x[0], x[1] + d)?, mu + offset(mu))?;
        let j = [[(gz[0] - g[0]) / d, (gc[0] - g[0]) / d], [(gz[1] - g[1]) / d, (gc[1] - g[1]) / d]];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let dz = (j[1][1] * g[0] - j[0][1] * g[1]) / det;
        let dc = (j[0][0] * g[1] - j[1][0] * g[0]) / det;
        x = [x[0] - dz, x[1] - dc];
        if !cfg.inside(x[0], x[1]) {
            return Ok(None);
        }
        if dz.hypot(dc) < 1e-12 {
            break;
        }
    }
    Ok(best.filter(|b| b.1 < 1e-8))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cusp {
    pub delta: f64,
    pub slope_left: f64,
    pub slope_right: f64,
    /// Largest change of slope between neighbouring intervals away from the
    /// point.
    pub smooth_variation: f64,
    pub is_cusp: bool,
}

/// One-sided slopes of max |Im λ| over the cluster along a C-slice.
pub fn cusp_diagnostic(cfg: &TripleConfig, zeta: f64, c: f64, lambda: Complex64, delta: f64) -> Result<Cusp> {
    let f = |k: i32| -> Result<f64> {
        let mut v = eig::eig_general(&cfg.matrix(zeta, c + k as f64 * delta)?, false)?.eigenvalues;
        v.sort_by(|a, b| (a - lambda).norm().total_cmp(&(b - lambda).norm()));
        Ok(v.iter().take(3).map(|z| z.im.abs()).fold(0.0, f64::max))
    };
    let vals = (-3..=3).into_par_iter().map(f).collect::<Result<Vec<_>>>()?;
    let s: Vec<f64> = vals.windows(2).map(|w| (w[1] - w[0]) / delta).collect();
    let (slope_left, slope_right) = (s[2], s[3]);
    let smooth_variation = (s[1] - s[0]).abs().max((s[5] - s[4]).abs());
    Ok(Cusp {
        delta,
        slope_left,
        slope_right,
        smooth_variation,
        is_cusp: (slope_right - slope_left).abs() > 10.0 * smooth_variation,
    })
}

/// Declaring threshold relative to |λ|.
pub const TRIPLE_THRESHOLD: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriplePoint {
    pub zeta: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub lambda: Complex64,
    /// Sum of pairwise distances of the tightest triple.
    pub residual: f64,
    pub threshold: f64,
    pub found: bool,
    /// |(p/μ², q/|μ|³)| after Newton polishing, if it converged.
    pub polynomial_residual: Option<f64>,
    pub members: [usize; 3],
    pub m: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cusp: Option<Cusp>,
}

impl TriplePoint {
    pub fn branch_point(&self) -> BranchPoint {
        BranchPoint {
            order: 3,
            params: vec![self.zeta, self.c],
            lambda: self.lambda,
            branches: self.members.to_vec(),
            residual: self.residual,
        }
    }
}

/// Coarse scan, Nelder–Mead on the clustering objective, then Newton
/// polishing. A not-found result still carries the best candidate.
pub fn find_triple_point(cfg: &TripleConfig) -> Result<TriplePoint> {
    cfg.validate()?;
    let coarse = cfg.at_m(cfg.search_m.unwrap_or(cfg.m.min(100)));
    let g = cfg.grid;
    let at = |w: [f64; 2], k: usize| w[0] + (w[1] - w[0]) * k as f64 / (g - 1) as f64;
    let grid: Vec<(f64, f64)> = (0..g).flat_map(|i| (0..g).map(move |j| (i, j))).map(|(i, j)| (at(cfg.zeta, i), at(cfg.c, j))).collect();
    let costs = grid
        .par_iter()
        .map(|&(z, c)| Ok((cluster_at(&coarse, z, c)?.t, z, c)))
        .collect::<Result<Vec<_>>>()?;
    let &(_, z0, c0) = costs.iter().min_by(|a, b| a.0.total_cmp(&b.0)).expect("non-empty grid");

    let dz = 0.5 * (cfg.zeta[1] - cfg.zeta[0]) / (g - 1) as f64;
    let dc = 0.5 * (cfg.c[1] - cfg.c[0]) / (g - 1) as f64;
    let shrink = |v: f64, w: [f64; 2], d: f64| if v + d > w[1] { v - d } else { v + d };
    let simplex = vec![vec![z0, c0], vec![shrink(z0, cfg.zeta, dz), c0], vec![z0, shrink(c0, cfg.c, dc)]];
    let solver = NelderMead::new(simplex)
        .with_sd_tolerance(1e-12)
        .map_err(|e| Error::invalid(e.to_string()))?;
    let res = Executor::new(Objective(&coarse), solver)
        .configure(|s| s.max_iters(120))
        .run()
        .map_err(|e| Error::invalid(e.to_string()))?;
    let best = res.state.best_param.clone().unwrap_or(vec![z0, c0]);
    let (mut zeta, mut c) = (best[0], best[1]);
    let mut cl = cluster_at(cfg, zeta, c)?;

    let mut polynomial_residual = None;
    if cfg.newton && cl.mean.im.abs() <= 1e-6 * (1.0 + cl.mean.norm()) {
        if let Some((x, r, _)) = newton_polish(cfg, [zeta, c], cl.mean.re)? {
            let polished = cluster_at(cfg, x[0], x[1])?;
            if polished.t <= cl.t {
                zeta = x[0];
                c = x[1];
                cl = polished;
                polynomial_residual = Some(r);
            }
        }
    }
    let threshold = TRIPLE_THRESHOLD * cl.mean.norm();
    Ok(TriplePoint {
        zeta,
        c,
        lambda: cl.mean,
        residual: cl.t,
        threshold,
        found: cl.t < threshold,
        polynomial_residual,
        members: cl.members,
        m: cfg.m,
        cusp: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutoffConfig {
    /// Unit soliton, or the zero profile for the empty box.
    pub profile: AlphaProfile,
    pub l: u32,
    #[serde(rename = "X")]
    pub xs: Vec<f64>,
    pub modes: usize,
    /// Nodes per unit length; M = density·X − 1.
    #[serde(default = "default_density")]
    pub density: f64,
}

fn default_density() -> f64 {
    soliton::MIN_DENSITY
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffMode {
    pub n: usize,
    pub lambda: Vec<f64>,
    /// Least-squares slope of ln|λ| against ln X, for modes with λ < 0 at
    /// every X.
    pub exponent: Option<f64>,
    /// (max − min)/|λ(first X)|.
    pub variation: f64,
    /// Overlap with the same mode at the previous X on the common interval.
    pub overlaps: Vec<f64>,
    pub identity_flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffStudy {
    pub xs: Vec<f64>,
    pub ms: Vec<usize>,
    /// X > x0 + 5 for each box.
    pub tail_room: Vec<bool>,
    pub modes: Vec<CutoffMode>,
}

fn lsq_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn overlap_on(a: &[Complex64], b: &[Complex64], len: usize) -> f64 {
    let (a, b) = (&a[..len], &b[..len]);
    let dot: Complex64 = a.iter().zip(b).map(|(u, v)| u.conj() * v).sum();
    let na: f64 = a.iter().map(|z| z.norm_sqr()).sum();
    let nb: f64 = b.iter().map(|z| z.norm_sqr()).sum();
    dot.norm() / (na * nb).sqrt()
}

/// λ_n(X) of the `+` pencil's principal modes (Re ϵ > 0, descending λ; the
/// BS is n = 1 when present) on a fixed physical grid density.
pub fn cutoff_study(cfg: &CutoffConfig) -> Result<CutoffStudy> {
    if cfg.xs.len() < 3 || cfg.xs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("cutoff study needs at least 3 increasing box sizes"));
    }
    if cfg.modes == 0 || !(cfg.density > 0.0) {
        return Err(Error::invalid("modes and density must be positive"));
    }
    let x0 = match cfg.profile {
        AlphaProfile::Soliton { x0, .. } => Some(x0),
        _ => None,
    };
    let ms: Vec<usize> = cfg.xs.iter().map(|x| (cfg.density * x).round() as usize - 1).collect();
    let spectra = cfg
        .xs
        .par_iter()
        .zip(&ms)
        .map(|(&x, &m)| {
            let sp = soliton::pencil_spectrum_of(PencilSign::Plus, &cfg.profile, cfg.l, x, m)?;
            let mut modes: Vec<_> = sp.modes.into_iter().filter(|md| md.epsilon.re > 0.0).collect();
            modes.sort_by(|a, b| b.lambda.re.total_cmp(&a.lambda.re));
            if modes.len() < cfg.modes {
                return Err(Error::invalid(format!("only {} principal modes at X = {x}", modes.len())));
            }
            modes.truncate(cfg.modes);
            Ok(modes)
        })
        .collect::<Result<Vec<_>>>()?;
    let common = ms[0];
    let lx: Vec<f64> = cfg.xs.iter().map(|x| x.ln()).collect();
    let modes = (0..cfg.modes)
        .map(|n| {
            let lambda: Vec<f64> = spectra.iter().map(|s| s[n].lambda.re).collect();
            let exponent = lambda
                .iter()
                .all(|&v| v < 0.0)
                .then(|| lsq_slope(&lx, &lambda.iter().map(|v| v.abs().ln()).collect::<Vec<_>>()));
            let (lo, hi) = lambda.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            let overlaps: Vec<f64> =
                spectra.windows(2).map(|w| overlap_on(&w[0][n].f, &w[1][n].f, common)).collect();
            CutoffMode {
                n: n + 1,
                variation: (hi - lo) / lambda[0].abs(),
                identity_flagged: overlaps.iter().any(|&o| o < soliton::OVERLAP_THRESHOLD),
                overlaps,
                lambda,
                exponent,
            }
        })
        .collect();
    Ok(CutoffStudy {
        xs: cfg.xs.clone(),
        ms,
        tail_room: cfg.xs.iter().map(|&x| x0.is_none_or(|x0| x > x0 + TAIL_OFFSET)).collect(),
        modes,
    })
}

pub const CUTOFF_HEADER: [&str; 8] = ["n", "X", "M", "lambda", "exponent", "variation", "overlap_prev", "identity_flagged"];

pub fn cutoff_records(st: &CutoffStudy) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for md in &st.modes {
        for (k, x) in st.xs.iter().enumerate() {
            rows.push(vec![
                md.n.to_string(),
                fmt(*x),
                st.ms[k].to_string(),
                fmt(md.lambda[k]),
                md.exponent.map(fmt).unwrap_or_default(),
                fmt(md.variation),
                if k == 0 { String::new() } else { fmt(md.overlaps[k - 1]) },
                u8::from(md.identity_flagged).to_string(),
            ]);
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh;
    use std::f64::consts::PI;

    #[test]
    fn constant_family_branches_are_affine_and_real() {
        let m = 40;
        let cfg = SweepConfig { track: 2 * m, max_depth: 1, ..SweepConfig::new(Family::Constant, [0.0, 10.0], 41, BoundarySpec::idealized(0), m) };
        let sw = sweep(&cfg).unwrap();
        let rho = operator::discrete_rho(0, m).unwrap();
        for b in &sw.branches {
            let slopes: Vec<f64> = b.points.windows(2).map(|w| (w[1].lambda.re - w[0].lambda.re) / (w[1].param - w[0].param)).collect();
            let s = slopes[slopes.len() - 1];
            assert!(rho.iter().any(|r| (s.abs() - r.sqrt()).abs() < 1e-6 * r.sqrt()), "{s}");
            assert!(slopes.iter().all(|v| (v - s).abs() < 1e-6 * s.abs()), "{slopes:?}");
        }
        let eps = detect_branch_points(&cfg, &sw, eig::REAL_TOL).unwrap();
        assert!(eps.points.is_empty() && eps.flagged.is_empty());
    }

    #[test]
    fn sweep_is_deterministic() {
        let cfg = SweepConfig::new(Family::Fig1, [0.0, 2.0], 4, BoundarySpec::physical(1), 60);
        assert_eq!(sweep(&cfg).unwrap(), sweep(&cfg).unwrap());
    }

    #[test]
    fn complex_bubble_has_two_exceptional_points() {
        // Opposite-type DP (n, m) = (2, 1) at α₀ = π, coupled by sin 2πr.
        let dps = mesh::diabolical_points(0, 3, (0.0, 4.0)).unwrap();
        let dp = dps
            .iter()
            .find(|d| !d.same_type && d.j == Some(3) && (d.alpha0_c - PI).abs() < 1e-9)
            .expect("DP at α₀ = π");
        let phi = AlphaProfile::fourier(0.0, vec![FourierTerm::sin(1, 1.0)]);
        assert!(mesh::dp_unfold(dp, &phi, 0.05).unwrap().complex_split);
        let family = Family::Fourier { terms: vec![FourierTerm::sin(1, 0.05)] };
        let cfg = SweepConfig::new(family, [PI - 0.6, PI + 0.6], 13, BoundarySpec::idealized(0), 200);
        let sw = sweep(&cfg).unwrap();
        let eps = detect_branch_points(&cfg, &sw, eig::REAL_TOL).unwrap();
        let bubble: Vec<&BranchPoint> = eps.points.iter().filter(|p| (p.lambda.re + 2.0 * PI * PI).abs() < 1.0).collect();
        assert_eq!(bubble.len(), 2, "{:?}", eps);
        let (a, b) = (bubble[0].params[0], bubble[1].params[0]);
        assert!(a < PI && PI < b);
        // Beyond an EP the pair is conjugate.
        let mid = cfg.spectrum_at(PI).unwrap();
        let c = mid.iter().find(|z| z.im > 1e-6).unwrap();
        assert!(mid.iter().any(|z| (z - c.conj()).norm() < 1e-8 * c.norm()));
    }

    #[test]
    fn leading_eigenvalue_of_the_reversal_profile_crosses_zero() {
        let lead = |c: f64| {
            let cfg = SweepConfig { track: 1, ..SweepConfig::new(Family::Fig1, [0.0, 1.0], 2, BoundarySpec::physical(1), 100) };
            cfg.spectrum_at(c).unwrap()[0].re
        };
        assert!(lead(0.0) < 0.0);
        assert!(lead(30.0) > 0.0);
    }

    #[test]
    fn tightest_triple_finds_the_cluster() {
        let v: Vec<Complex64> = [5.0, 1.0, 1.1, 0.9, -3.0].iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let (t, m) = tightest_triple(&v).unwrap();
        assert_eq!(m, [1, 2, 3]);
        assert!((t - 0.4).abs() < 1e-12);
    }

    #[test]
    fn constant_plane_has_no_triple_point() {
        let cfg = TripleConfig {
            plane: Plane::Constant,
            zeta: [2.0, 8.0],
            c: [0.0, 1.0],
            bc: BoundarySpec::idealized(0),
            m: 80,
            grid: 5,
            pool: 8,
            newton: true,
            search_m: None,
        };
        let tp = find_triple_point(&cfg).unwrap();
        assert!(!tp.found, "{tp:?}");
    }

    #[test]
    fn centred_polynomial_of_a_jordan_block_vanishes() {
        // Upper-triangular matrix with a 3×3 Jordan block at −2 and spectators.
        let n = 6;
        let mut a = Mat::<f64>::zeros(n, n);
        for i in 0..3 {
            a[(i, i)] = -2.0;
        }
        a[(0, 1)] = 1.0;
        a[(1, 2)] = 1.0;
        a[(3, 3)] = 5.0;
        a[(4, 4)] = -9.0;
        a[(5, 5)] = 11.0;
        a[(2, 4)] = 0.3;
        let (g, mu) = centred_pq(&a, -1.99).unwrap();
        assert!((mu + 2.0).abs() < 1e-10);
        assert!(g[0].abs() < 1e-10 && g[1].abs() < 1e-10, "{g:?}");
    }

    #[test]
    fn empty_box_cutoff_scaling_is_exact() {
        let cfg = CutoffConfig { profile: AlphaProfile::constant(0.0), l: 0, xs: vec![10.0, 20.0, 40.0], modes: 3, density: 20.0 };
        let st = cutoff_study(&cfg).unwrap();
        for md in &st.modes {
            for (k, x) in cfg.xs.iter().enumerate() {
                let exact = -(md.n as f64 * PI / x).powi(2);
                assert!((md.lambda[k] - exact).abs() < 1e-3 * exact.abs(), "{} {}", md.lambda[k], exact);
            }
            assert!((md.exponent.unwrap() + 2.0).abs() < 1e-3);
        }
        assert!(st.tail_room.iter().all(|&t| t));
    }
}
