//! The soliton-profile model α(x) = 2/cosh(x − x0) on a box (0, X).
//!
//! Its spectrum is carried by the quadratic pencils
//! `(T ∓ ϵα − ϵ²)F± = 0`, `λ = 1/2 − ϵ²`. The bound-state (BS) branch is the
//! localized `+` mode with real ϵ; where ϵ changes sign (the Jordan point
//! x_J) the pencil description degenerates and `T` itself has a kernel.
//! Away from x_J the factorization `T = L†L`, `L = −∂ + w`, `w = u'/u`, turns
//! the pencil into a first-order Dirac system.

use faer::linalg::solvers::Solve;
use faer::Mat;
use num_complex::Complex64;
use ode_solvers::{Dopri5, System, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eig;
use crate::error::{Error, Result};
use crate::operator::{self, lambda_from_epsilon, PencilOperator, PencilSign};
use crate::profiles::AlphaProfile;
use crate::tridiag;

/// |ϵ| at or below this is treated as the Jordan configuration.
pub const NEAR_JORDAN: f64 = 1e-8;
/// Distance beyond x0 where tail mass is measured.
pub const TAIL_OFFSET: f64 = 5.0;
pub const MIN_DENSITY: f64 = 20.0;
/// Eigenfunctions with overlap below this are considered different modes.
pub const OVERLAP_THRESHOLD: f64 = 0.8;

#[derive(Debug, Clone)]
pub struct PencilMode {
    pub epsilon: Complex64,
    pub lambda: Complex64,
    /// Eigenfunction on the interior nodes, max |F| = 1 with that entry real
    /// and positive.
    pub f: Vec<Complex64>,
    pub tail_mass: f64,
    pub localized: bool,
    pub near_jordan: bool,
}

impl PencilMode {
    /// Real ϵ with positive real part (the principal root of 1/2 − λ).
    pub fn is_principal_real(&self) -> bool {
        eig::is_real(self.epsilon) && self.epsilon.re > NEAR_JORDAN
    }
}

#[derive(Debug, Clone)]
pub struct PencilSpectrum {
    pub sign: PencilSign,
    pub l: u32,
    pub profile: AlphaProfile,
    pub x: f64,
    pub h: f64,
    pub nodes: Vec<f64>,
    pub modes: Vec<PencilMode>,
}

impl PencilSpectrum {
    /// Localized modes with principal real ϵ and λ > 0.
    pub fn bound_states(&self) -> Vec<&PencilMode> {
        self.modes.iter().filter(|m| m.localized && m.is_principal_real() && m.lambda.re > 0.0).collect()
    }

    /// The same eigenpairs seen from the opposite pencil: ϵ ↦ −ϵ, F unchanged.
    pub fn mirrored(&self) -> PencilSpectrum {
        let sign = match self.sign {
            PencilSign::Plus => PencilSign::Minus,
            PencilSign::Minus => PencilSign::Plus,
        };
        let modes = self.modes.iter().map(|m| PencilMode { epsilon: -m.epsilon, ..m.clone() }).collect();
        PencilSpectrum { sign, modes, ..self.clone() }
    }
}

fn centre(profile: &AlphaProfile) -> f64 {
    match *profile {
        AlphaProfile::Soliton { x0, .. } => x0,
        _ => 0.0,
    }
}

/// Fraction of Σ|F|² at nodes beyond `from`.
pub fn tail_mass(nodes: &[f64], f: &[Complex64], from: f64) -> f64 {
    let total: f64 = f.iter().map(|z| z.norm_sqr()).sum();
    if total == 0.0 {
        return 0.0;
    }
    nodes.iter().zip(f).filter(|(x, _)| **x > from).map(|(_, z)| z.norm_sqr()).sum::<f64>() / total
}

fn normalize_max(f: &mut [Complex64]) {
    let (mut k, mut big) = (0, 0.0);
    for (i, z) in f.iter().enumerate() {
        if z.norm() > big {
            big = z.norm();
            k = i;
        }
    }
    if big > 0.0 {
        let phase = f[k].conj() / (big * big);
        f.iter_mut().for_each(|z| *z *= phase);
    }
}

/// Kernel vector of `T − sϵα − ϵ²` by inverse iteration.
fn pencil_vector(t: &PencilOperator, s: f64, eps: Complex64) -> Result<Vec<Complex64>> {
    let m = t.len();
    let off = vec![Complex64::new(t.off, 0.0); m - 1];
    let diag: Vec<Complex64> = (0..m).map(|i| t.diag[i] - s * eps * t.alpha[i] - eps * eps).collect();
    let mut v: Vec<Complex64> = (0..m).map(|i| Complex64::new(1.0 + 0.1 * ((i * 7919) % 13) as f64, 0.0)).collect();
    for _ in 0..3 {
        v = tridiag::solve(&off, &diag, &off, &v)?;
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        v.iter_mut().for_each(|z| *z /= norm);
    }
    normalize_max(&mut v);
    Ok(v)
}

fn check_box(profile: &AlphaProfile, x: f64, m: usize) -> Result<()> {
    let x0 = centre(profile);
    if !(x > x0 + TAIL_OFFSET) {
        return Err(Error::Precondition(format!("box X = {x} leaves less than {TAIL_OFFSET} beyond x0 = {x0}")));
    }
    if ((m + 1) as f64) < MIN_DENSITY * x * (1.0 - 1e-12) {
        return Err(Error::Precondition(format!(
            "M = {m} gives fewer than {MIN_DENSITY} nodes per unit length on (0, {x})"
        )));
    }
    Ok(())
}

/// Full pencil spectrum with eigenfunctions and localization flags.
pub fn pencil_spectrum(sign: PencilSign, l: u32, x0: f64, x: f64, m: usize) -> Result<PencilSpectrum> {
    let profile = AlphaProfile::unit_soliton(x0);
    check_box(&profile, x, m)?;
    pencil_spectrum_of(sign, &profile, l, x, m)
}

/// As [`pencil_spectrum`] for any admissible pencil profile, without the
/// tail-room and density preconditions.
pub fn pencil_spectrum_of(sign: PencilSign, profile: &AlphaProfile, l: u32, x: f64, m: usize) -> Result<PencilSpectrum> {
    let lin = operator::assemble_pencil(sign, profile, l, x, m)?;
    let values = eig::eig_general(&lin.matrix, false)?.eigenvalues;
    let s = sign.factor();
    let from = centre(profile) + TAIL_OFFSET;
    let t = &lin.t;
    let modes = values
        .par_iter()
        .map(|&eps| {
            let f = pencil_vector(t, s, eps)?;
            let tail = tail_mass(&t.nodes, &f, from);
            Ok(PencilMode {
                epsilon: eps,
                lambda: lambda_from_epsilon(eps),
                tail_mass: tail,
                localized: tail < 0.5,
                near_jordan: eps.norm() <= NEAR_JORDAN,
                f,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PencilSpectrum { sign, l, profile: profile.clone(), x, h: t.h, nodes: t.nodes.clone(), modes })
}

/// Real eigenpair of `T − ϵα − ϵ²` refined by Rayleigh-functional iteration.
#[derive(Debug, Clone)]
pub struct BoundState {
    pub epsilon: f64,
    pub f: Vec<f64>,
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn rayleigh_epsilon(t: &PencilOperator, f: &[f64], near: f64) -> Option<f64> {
    let tf = t.apply(f);
    let a = dot(f, f);
    let b: f64 = f.iter().zip(&t.alpha).map(|(v, al)| v * v * al).sum();
    let c = dot(f, &tf);
    // c − ϵb − ϵ²a = 0
    let disc = b * b + 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let r = disc.sqrt();
    let roots = [(-b + r) / (2.0 * a), (-b - r) / (2.0 * a)];
    roots.into_iter().min_by(|x, y| (x - near).abs().total_cmp(&(y - near).abs()))
}

fn pencil_residual(t: &PencilOperator, f: &[f64], eps: f64) -> f64 {
    let tf = t.apply(f);
    let r: f64 = (0..f.len()).map(|i| (tf[i] - eps * t.alpha[i] * f[i] - eps * eps * f[i]).powi(2)).sum();
    (r / dot(f, f)).sqrt()
}

pub fn refine_bound_state(t: &PencilOperator, guess: &[f64], eps0: f64) -> Result<BoundState> {
    let m = t.len();
    let off = vec![t.off; m - 1];
    let mut f = guess.to_vec();
    // A few fixed-shift steps first so a rough guess cannot jump branches.
    for _ in 0..3 {
        let diag: Vec<f64> = (0..m).map(|i| t.diag[i] - eps0 * t.alpha[i] - eps0 * eps0).collect();
        let y = tridiag::solve_real(&off, &diag, &off, &f)?;
        let norm = dot(&y, &y).sqrt();
        f = y.into_iter().map(|v| v / norm).collect();
    }
    let mut eps = rayleigh_epsilon(t, &f, eps0).unwrap_or(eps0);
    for _ in 0..60 {
        let diag: Vec<f64> = (0..m).map(|i| t.diag[i] - eps * t.alpha[i] - eps * eps).collect();
        let mut y = tridiag::solve_real(&off, &diag, &off, &f)?;
        let norm = dot(&y, &y).sqrt();
        y.iter_mut().for_each(|v| *v /= norm);
        let k = y.iter().enumerate().max_by(|a, b| a.1.abs().total_cmp(&b.1.abs())).unwrap().0;
        let sgn = y[k].signum();
        y.iter_mut().for_each(|v| *v *= sgn);
        f = y;
        let next = rayleigh_epsilon(t, &f, eps).ok_or(Error::NoConvergence { index: 0 })?;
        let done = (next - eps).abs() <= 1e-14 * (1.0 + eps.abs());
        eps = next;
        if done {
            break;
        }
    }
    let big = f.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    f.iter_mut().for_each(|v| *v /= big);
    let residual = pencil_residual(t, &f, eps) / (4.0 / (t.h * t.h));
    if residual > 1e-10 {
        return Err(Error::NoConvergence { index: 0 });
    }
    Ok(BoundState { epsilon: eps, f, residual })
}

/// Linear interpolation of node values `f` (zero at both ends) shifted by `d`.
fn shifted(nodes: &[f64], h: f64, f: &[f64], d: f64) -> Vec<f64> {
    let m = f.len();
    let at = |i: isize| if i < 0 || i as usize >= m { 0.0 } else { f[i as usize] };
    nodes
        .iter()
        .map(|&x| {
            let s = (x - d) / h - 1.0;
            let i = s.floor();
            let w = s - i;
            (1.0 - w) * at(i as isize) + w * at(i as isize + 1)
        })
        .collect()
}

fn overlap(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b).abs() / (dot(a, a) * dot(b, b)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchSample {
    pub x0: f64,
    pub lambda: f64,
    pub epsilon: f64,
    pub tail_mass: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundStateBranch {
    pub l: u32,
    pub x: f64,
    pub m: usize,
    pub samples: Vec<BranchSample>,
    pub x_j: Option<f64>,
    /// Where and why the branch could not be seeded or continued.
    pub notes: Vec<String>,
}

impl BoundStateBranch {
    pub fn below_jordan(&self) -> impl Iterator<Item = &BranchSample> {
        let xj = self.x_j.unwrap_or(f64::INFINITY);
        self.samples.iter().filter(move |s| s.x0 < xj)
    }

    pub fn is_increasing_below_jordan(&self) -> bool {
        let v: Vec<f64> = self.below_jordan().map(|s| s.lambda).collect();
        v.windows(2).all(|w| w[1] > w[0])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BranchConfig {
    pub x0_min: f64,
    pub x0_max: f64,
    pub steps: usize,
    #[serde(rename = "X")]
    pub x: f64,
    pub density: f64,
}

impl Default for BranchConfig {
    fn default() -> Self {
        Self { x0_min: 0.25, x0_max: 8.0, steps: 32, x: 100.0, density: MIN_DENSITY }
    }
}

impl BranchConfig {
    pub fn m(&self) -> usize {
        (self.density * self.x).round() as usize - 1
    }

    fn grid(&self) -> Vec<f64> {
        let n = self.steps.max(2);
        (0..n).map(|k| self.x0_min + (self.x0_max - self.x0_min) * k as f64 / (n - 1) as f64).collect()
    }
}

/// Dense seed on a reduced box: the localized `+` mode with real ϵ > 0 and
/// largest λ in (0, 1/2).
fn seed(l: u32, x0: f64, cfg: &BranchConfig) -> Result<Option<(f64, Vec<f64>, Vec<f64>, f64)>> {
    let xs = (x0 + 20.0).min(cfg.x);
    let m = (cfg.density * xs).round() as usize - 1;
    let sp = pencil_spectrum_of(PencilSign::Plus, &AlphaProfile::unit_soliton(x0), l, xs, m)?;
    let best = sp
        .bound_states()
        .into_iter()
        .filter(|md| md.lambda.re < 0.5)
        .max_by(|a, b| a.lambda.re.total_cmp(&b.lambda.re));
    Ok(best.map(|md| (md.epsilon.re, md.f.iter().map(|z| z.re).collect(), sp.nodes.clone(), sp.h)))
}

fn extend(f: &[f64], m: usize) -> Vec<f64> {
    let mut v = f.to_vec();
    v.resize(m, 0.0);
    v
}

fn track_to(l: u32, x: f64, m: usize, from_x0: f64, f: &[f64], eps: f64, to_x0: f64) -> Result<(BoundState, PencilOperator, f64)> {
    let t = operator::pencil_operator(&AlphaProfile::unit_soliton(to_x0), l, x, m)?;
    let guess = shifted(&t.nodes, t.h, f, to_x0 - from_x0);
    let bs = refine_bound_state(&t, &guess, eps)?;
    let ov = overlap(&guess, &bs.f);
    Ok((bs, t, ov))
}

/// Tracks the BS branch upward in x0 by Rayleigh-functional continuation and
/// locates x_J as the sign change of ϵ, bisected to 1e-4.
pub fn bound_state_branch(l: u32, cfg: &BranchConfig) -> Result<BoundStateBranch> {
    if !(cfg.x0_min > 0.0 && cfg.x0_max > cfg.x0_min && cfg.x0_max < cfg.x - TAIL_OFFSET) {
        return Err(Error::invalid("x0 range must lie within (0, X − 5)"));
    }
    let m = cfg.m();
    let grid = cfg.grid();
    let mut notes = Vec::new();
    let mut start = None;
    for (k, &x0) in grid.iter().enumerate() {
        if let Some((eps, f, _, _)) = seed(l, x0, cfg)? {
            start = Some((k, eps, extend(&f, m)));
            break;
        }
        notes.push(format!("no localized overcritical mode at x0 = {x0}"));
    }
    let Some((k0, eps0, f0)) = start else {
        return Ok(BoundStateBranch { l, x: cfg.x, m, samples: vec![], x_j: None, notes });
    };

    let mut samples = Vec::new();
    let (mut prev_x0, mut prev_f, mut prev_eps) = (grid[k0], f0, eps0);
    let mut states: Vec<(f64, Vec<f64>, f64)> = Vec::new();
    for &x0 in &grid[k0..] {
        let (bs, t, ov) = match track_to(l, cfg.x, m, prev_x0, &prev_f, prev_eps, x0) {
            Ok(v) => v,
            Err(e) => {
                notes.push(format!("tracking failed at x0 = {x0}: {e}"));
                break;
            }
        };
        if ov < OVERLAP_THRESHOLD {
            notes.push(format!("eigenfunction overlap {ov:.3} below {OVERLAP_THRESHOLD} at x0 = {x0}"));
            break;
        }
        let fc: Vec<Complex64> = bs.f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let tail = tail_mass(&t.nodes, &fc, x0 + TAIL_OFFSET);
        samples.push(BranchSample {
            x0,
            lambda: lambda_from_epsilon(Complex64::new(bs.epsilon, 0.0)).re,
            epsilon: bs.epsilon,
            tail_mass: tail,
        });
        states.push((x0, bs.f.clone(), bs.epsilon));
        prev_x0 = x0;
        prev_f = bs.f;
        prev_eps = bs.epsilon;
    }

    let mut x_j = None;
    for w in states.windows(2) {
        let ((xa, fa, ea), (xb, _, eb)) = (&w[0], &w[1]);
        if ea.signum() != eb.signum() {
            let (mut lo, mut hi) = (*xa, *xb);
            let (mut f_lo, mut e_lo) = (fa.clone(), *ea);
            while hi - lo > 1e-4 {
                let mid = 0.5 * (lo + hi);
                let (bs, _, _) = track_to(l, cfg.x, m, lo, &f_lo, e_lo, mid)?;
                if bs.epsilon.signum() == ea.signum() {
                    lo = mid;
                    f_lo = bs.f;
                    e_lo = bs.epsilon;
                } else {
                    hi = mid;
                }
            }
            x_j = Some(0.5 * (lo + hi));
            break;
        }
    }
    Ok(BoundStateBranch { l, x: cfg.x, m, samples, x_j, notes })
}

/// The BS eigenpair at one x0, seeded densely and refined on the full box.
pub fn bound_state_at(l: u32, x0: f64, x: f64, m: usize) -> Result<Option<(BoundState, PencilOperator)>> {
    let cfg = BranchConfig { x, density: (m + 1) as f64 / x, ..Default::default() };
    let Some((eps, f, _, _)) = seed(l, x0, &cfg)? else {
        return Ok(None);
    };
    let t = operator::pencil_operator(&AlphaProfile::unit_soliton(x0), l, x, m)?;
    let bs = refine_bound_state(&t, &extend(&f, m), eps)?;
    Ok(Some((bs, t)))
}

pub const BRANCH_HEADER: [&str; 9] =
    ["l", "x0", "re_lambda", "im_lambda", "epsilon_re", "epsilon_im", "localized_flag", "X", "M"];

pub fn branch_records(b: &BoundStateBranch) -> Vec<Vec<String>> {
    use crate::output::fmt;
    b.samples
        .iter()
        .map(|s| {
            vec![
                b.l.to_string(),
                fmt(s.x0),
                fmt(s.lambda),
                fmt(0.0),
                fmt(s.epsilon),
                fmt(0.0),
                u8::from(s.tail_mass < 0.5).to_string(),
                fmt(b.x),
                b.m.to_string(),
            ]
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JordanReport {
    pub x_j: f64,
    pub kernel_residual: f64,
    pub xi1_residual: f64,
    /// Smallest |eigenvalue| of T relative to its norm bound 4/h² + max|V₀|.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_min_ratio: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct JordanSystem {
    pub xi0: Vec<f64>,
    pub xi1: Vec<f64>,
    pub report: JordanReport,
}

fn t_norm(t: &PencilOperator) -> f64 {
    (0..t.len()).map(|i| t.diag[i].abs() + 2.0 * t.off.abs()).fold(0.0, f64::max)
}

/// Solves the Jordan-type pair `(∂² − V₀)Ξ₀ = 0`, `(∂² − V₀)Ξ₁ = V₁Ξ₀` at
/// x0 = x_J, with Ξ₁ the least-squares solution orthogonal to the kernel.
pub fn jordan_system_solve(l: u32, x_j: f64, x: f64, m: usize) -> Result<JordanSystem> {
    let t = operator::pencil_operator(&AlphaProfile::unit_soliton(x_j), l, x, m)?;
    let n = t.len();
    let norm = t_norm(&t);
    let off = vec![t.off; n - 1];
    let mut xi0: Vec<f64> = (0..n).map(|i| (-(t.nodes[i] - x_j).powi(2) / 4.0).exp()).collect();
    for _ in 0..6 {
        let y = tridiag::solve_real(&off, &t.diag, &off, &xi0)?;
        let s = dot(&y, &y).sqrt();
        xi0 = y.into_iter().map(|v| v / s).collect();
    }
    let t0 = t.apply(&xi0);
    let kernel_residual = dot(&t0, &t0).sqrt() / norm;
    if kernel_residual > 1e-4 {
        return Err(Error::Precondition(format!(
            "T is not near-singular at x0 = {x_j} (kernel residual {kernel_residual:e}); x_J is mislocated"
        )));
    }
    // T Ξ₁ = αΞ₀ − μΞ₀ with Ξ₀ᵀΞ₁ = 0 (bordered system).
    let b: Vec<f64> = (0..n).map(|i| t.alpha[i] * xi0[i]).collect();
    let mut k = Mat::<f64>::zeros(n + 1, n + 1);
    for i in 0..n {
        k[(i, i)] = t.diag[i];
        if i + 1 < n {
            k[(i, i + 1)] = t.off;
            k[(i + 1, i)] = t.off;
        }
        k[(i, n)] = xi0[i];
        k[(n, i)] = xi0[i];
    }
    let mut rhs = Mat::<f64>::zeros(n + 1, 1);
    for i in 0..n {
        rhs[(i, 0)] = b[i];
    }
    let sol = k.partial_piv_lu().solve(&rhs);
    let xi1: Vec<f64> = (0..n).map(|i| sol[(i, 0)]).collect();
    let c = dot(&xi0, &b);
    let pb: Vec<f64> = (0..n).map(|i| b[i] - c * xi0[i]).collect();
    let t1 = t.apply(&xi1);
    // Residual of the projected equation P(TΞ₁) = Pb.
    let d = dot(&xi0, &t1);
    let r: f64 = (0..n).map(|i| (t1[i] - d * xi0[i] - pb[i]).powi(2)).sum::<f64>().sqrt();
    let xi1_residual = r / dot(&pb, &pb).sqrt().max(f64::MIN_POSITIVE);
    Ok(JordanSystem {
        xi0,
        xi1,
        report: JordanReport { x_j, kernel_residual, xi1_residual, sigma_min_ratio: Some(kernel_residual) },
    })
}

#[derive(Debug, Clone)]
pub struct Superpotential {
    pub l: u32,
    pub nodes: Vec<f64>,
    /// Solution of T u = 0, rescaled piecewise (only ratios are meaningful).
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    /// Locations where u changes sign (poles of w).
    pub singular: Vec<f64>,
    potential: Vec<f64>,
}

struct RadialOde<'a> {
    ll: f64,
    profile: &'a AlphaProfile,
}

impl RadialOde<'_> {
    fn v(&self, x: f64) -> f64 {
        let a = self.profile.evaluate(x).unwrap_or(0.0);
        self.ll / (x * x) - 0.5 * a * a + 0.5
    }
}

impl System<f64, Vector2<f64>> for RadialOde<'_> {
    fn system(&self, x: f64, y: &Vector2<f64>, dy: &mut Vector2<f64>) {
        dy[0] = y[1];
        dy[1] = self.v(x) * y[0];
    }
}

/// Integrates T u = 0 outward from u ~ x^{l+1} with an adaptive
/// Dormand–Prince method and samples w = u'/u at the interior nodes of
/// (0, X).
pub fn superpotential(profile: &AlphaProfile, l: u32, x: f64, m: usize) -> Result<Superpotential> {
    operator::pencil_operator(profile, l, x, m)?;
    let (h, nodes) = operator::uniform_nodes(x, m);
    let ode = RadialOde { ll: (l * (l + 1)) as f64, profile };
    // Frobenius start: u = x^{l+1}(1 + c x²), c = V_reg(0)/(2(2l+3)).
    let a0 = profile.evaluate(0.0)?;
    let c = (0.5 - 0.5 * a0 * a0) / (2.0 * (2 * l + 3) as f64);
    let x1 = nodes[0];
    let lp = (l + 1) as f64;
    let mut y = Vector2::new(x1.powi(l as i32 + 1) * (1.0 + c * x1 * x1), lp * x1.powi(l as i32) + c * (lp + 2.0) * x1.powi(l as i32 + 2));
    let s = y.norm();
    y /= s;
    let mut u = vec![y[0]];
    let mut w = vec![y[1] / y[0]];
    for i in 1..m {
        let mut solver = Dopri5::new(
            RadialOde { ll: ode.ll, profile },
            nodes[i - 1],
            nodes[i],
            h,
            y,
            1e-12,
            1e-14,
        );
        solver.integrate().map_err(|_| Error::NoConvergence { index: i })?;
        y = *solver.y_out().last().ok_or(Error::NoConvergence { index: i })?;
        if !(y[0].is_finite() && y[1].is_finite()) {
            return Err(Error::NonFinite("superpotential integration"));
        }
        // w is scale invariant; keep |y| of order one.
        let s = y.norm();
        if s > 1e8 || s < 1e-8 {
            y /= s;
        }
        u.push(y[0]);
        w.push(y[1] / y[0]);
    }
    let mut singular = Vec::new();
    for i in 1..m {
        if u[i - 1].signum() != u[i].signum() {
            // Linear estimate of the zero between the nodes.
            let t = u[i - 1] / (u[i - 1] - u[i]);
            singular.push(nodes[i - 1] + t * h);
        }
    }
    let potential = nodes.iter().map(|&xx| ode.v(xx)).collect();
    Ok(Superpotential { l, nodes, u, w, singular, potential })
}

impl Superpotential {
    pub fn h(&self) -> f64 {
        self.nodes[1] - self.nodes[0]
    }

    pub fn near_singularity(&self, x: f64, radius: f64) -> bool {
        self.singular.iter().any(|s| (x - s).abs() < radius)
    }

    /// max |w² + w' − V| over nodes whose five-point stencil stays at least
    /// `exclusion` away from every pole of w, the origin included.
    pub fn riccati_defect(&self, exclusion: f64) -> f64 {
        let h = self.h();
        let n = self.nodes.len();
        let r = exclusion + 2.0 * h;
        (2..n.saturating_sub(2))
            .filter(|&i| self.nodes[i] >= r && !self.near_singularity(self.nodes[i], r))
            .map(|i| {
                let w = &self.w;
                let dw = (w[i - 2] - 8.0 * w[i - 1] + 8.0 * w[i + 1] - w[i + 2]) / (12.0 * h);
                (w[i] * w[i] + dw - self.potential[i]).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Exclusion half-width around poles of w in the Dirac residual.
pub const DIRAC_EXCLUSION: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiracResidual {
    pub residual: f64,
    /// Fraction of F's support removed because w is singular there.
    pub excluded_fraction: f64,
    pub unreliable: bool,
}

/// ‖γΨ' + V±Ψ − ϵΨ‖ / ‖Ψ‖ with Ψ = (F, ϵ⁻¹(−F' + wF)), all derivatives by
/// centred differences on the pencil grid. Two nodes at each end are left out.
pub fn dirac_residual(
    sign: PencilSign,
    epsilon: f64,
    f: &[f64],
    alpha: &[f64],
    sp: &Superpotential,
) -> Result<DiracResidual> {
    let n = f.len();
    if sp.nodes.len() != n || alpha.len() != n {
        return Err(Error::invalid("eigenfunction, profile and superpotential grids differ"));
    }
    if epsilon.abs() <= 1e-6 {
        return Err(Error::Precondition(format!("|ϵ| = {} is too close to the Jordan configuration", epsilon.abs())));
    }
    let h = sp.h();
    let at = |v: &[f64], i: isize| if i < 0 || i as usize >= n { 0.0 } else { v[i as usize] };
    let df: Vec<f64> = (0..n as isize).map(|i| (at(f, i + 1) - at(f, i - 1)) / (2.0 * h)).collect();
    let psi2: Vec<f64> = (0..n).map(|i| (-df[i] + sp.w[i] * f[i]) / epsilon).collect();
    let s = sign.factor();
    let big = f.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let (mut num, mut den) = (0.0, 0.0);
    let (mut support, mut excluded) = (0usize, 0usize);
    for i in 2..n - 2 {
        let in_support = f[i].abs() > 1e-3 * big;
        support += usize::from(in_support);
        if sp.near_singularity(sp.nodes[i], DIRAC_EXCLUSION) {
            excluded += usize::from(in_support);
            continue;
        }
        let dpsi2 = (psi2[i + 1] - psi2[i - 1]) / (2.0 * h);
        let r1 = dpsi2 - s * alpha[i] * f[i] + sp.w[i] * psi2[i] - epsilon * f[i];
        let r2 = -df[i] + sp.w[i] * f[i] - epsilon * psi2[i];
        num += r1 * r1 + r2 * r2;
        den += f[i] * f[i] + psi2[i] * psi2[i];
    }
    let excluded_fraction = if support == 0 { 0.0 } else { excluded as f64 / support as f64 };
    Ok(DiracResidual {
        residual: (num / den).sqrt(),
        excluded_fraction,
        unreliable: excluded_fraction > 0.2,
    })
}
