//! Finite-difference discretization of the l-mode dynamo operator
//!
//! ```text
//!     A = [ -Q[1]   α    ]      Q[α] = -∂ α ∂ + α l(l+1)/r²
//!         [ Q[α]   -Q[1] ]
//! ```
//!
//! and the companion linearization of the soliton quadratic pencils
//! `(T ∓ ϵα − ϵ²)F = 0`, `T = −∂² + l(l+1)/x² − α²/2 + 1/2`.

use std::io::Write;
use std::ops::Range;

use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::eig::{self, SampleMeta, SpectrumSample};
use crate::error::{Error, Result};
use crate::profiles::AlphaProfile;

pub const MIN_NODES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundaryKind {
    /// Vacuum exterior: ∂u₁ + (l/r)u₁ = 0 and u₂ = 0 at r = 1.
    PhysicalVacuum,
    /// Superconducting exterior: u = 0 at r = 1.
    IdealizedDirichlet,
    /// Dirichlet at a cutoff x = X.
    BoxDirichlet {
        #[serde(rename = "X")]
        x: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundarySpec {
    #[serde(flatten)]
    pub kind: BoundaryKind,
    pub l: u32,
}

impl BoundarySpec {
    pub fn physical(l: u32) -> Self {
        Self { kind: BoundaryKind::PhysicalVacuum, l }
    }

    pub fn idealized(l: u32) -> Self {
        Self { kind: BoundaryKind::IdealizedDirichlet, l }
    }

    pub fn boxed(x: f64, l: u32) -> Self {
        Self { kind: BoundaryKind::BoxDirichlet { x }, l }
    }

    pub fn domain_length(&self) -> f64 {
        match self.kind {
            BoundaryKind::BoxDirichlet { x } => x,
            _ => 1.0,
        }
    }

    pub fn is_dirichlet(&self) -> bool {
        !matches!(self.kind, BoundaryKind::PhysicalVacuum)
    }

    pub fn validate(&self) -> Result<()> {
        if let BoundaryKind::BoxDirichlet { x } = self.kind {
            if !(x.is_finite() && x > 0.0) {
                return Err(Error::invalid(format!("box length X must be positive, got {x}")));
            }
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        match self.kind {
            BoundaryKind::PhysicalVacuum => format!("physical_vacuum(l={})", self.l),
            BoundaryKind::IdealizedDirichlet => format!("idealized_dirichlet(l={})", self.l),
            BoundaryKind::BoxDirichlet { x } => format!("box_dirichlet(X={x},l={})", self.l),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub h: f64,
    /// Nodes carrying unknowns of the first component.
    pub nodes: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockLayout {
    pub u1: Range<usize>,
    pub u2: Range<usize>,
}

#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub matrix: Mat<f64>,
    pub grid: Grid,
    pub bc: BoundarySpec,
    pub profile: AlphaProfile,
    pub layout: BlockLayout,
    pub m: usize,
}

fn check_nodes(m: usize) -> Result<()> {
    if m < MIN_NODES {
        return Err(Error::invalid(format!("need at least {MIN_NODES} interior nodes, got {m}")));
    }
    Ok(())
}

fn check_domain(profile: &AlphaProfile, bc: &BoundarySpec) -> Result<()> {
    let length = bc.domain_length();
    if profile.is_soliton() && !matches!(bc.kind, BoundaryKind::BoxDirichlet { .. }) {
        return Err(Error::invalid("soliton profiles live on a box (0, X)"));
    }
    if let Some(upper) = profile.upper_bound() {
        if length > upper * (1.0 + 1e-12) {
            return Err(Error::invalid(format!(
                "profile is defined on [0, {upper}] but the boundary regime needs [0, {length}]"
            )));
        }
    }
    Ok(())
}

fn sample(profile: &AlphaProfile, r: f64) -> Result<f64> {
    let v = profile.evaluate(r)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite("profile evaluation"))
    }
}

/// Interior nodes r_i = i·h, i = 1..=m, h = length/(m+1).
pub fn uniform_nodes(length: f64, m: usize) -> (f64, Vec<f64>) {
    let h = length / (m as f64 + 1.0);
    (h, (1..=m).map(|i| i as f64 * h).collect())
}

pub fn assemble(profile: &AlphaProfile, bc: &BoundarySpec, m: usize) -> Result<DiscreteOperator> {
    check_nodes(m)?;
    profile.validate()?;
    bc.validate()?;
    check_domain(profile, bc)?;

    let length = bc.domain_length();
    let (h, mut nodes) = uniform_nodes(length, m);
    let h2 = h * h;
    let ll = (bc.l * (bc.l + 1)) as f64;
    let vacuum = !bc.is_dirichlet();
    let n1 = if vacuum { m + 1 } else { m };
    if vacuum {
        nodes.push(length);
    }
    let n = n1 + m;
    let mut a = Mat::<f64>::zeros(n, n);

    for i in 0..m {
        let r = nodes[i];
        let diag = -(2.0 / h2 + ll / (r * r));
        // −Q[1] on both components.
        a[(i, i)] = diag;
        a[(n1 + i, n1 + i)] = diag;
        if i > 0 {
            a[(i, i - 1)] = 1.0 / h2;
            a[(n1 + i, n1 + i - 1)] = 1.0 / h2;
        }
        if i + 1 < n1 {
            a[(i, i + 1)] = 1.0 / h2;
        }
        if i + 1 < m {
            a[(n1 + i, n1 + i + 1)] = 1.0 / h2;
        }

        let alpha = sample(profile, r)?;
        let lo = sample(profile, r - 0.5 * h)?;
        let hi = sample(profile, r + 0.5 * h)?;
        a[(i, n1 + i)] = alpha;
        a[(n1 + i, i)] = (lo + hi) / h2 + alpha * ll / (r * r);
        if i > 0 {
            a[(n1 + i, i - 1)] = -lo / h2;
        }
        if i + 1 < n1 {
            a[(n1 + i, i + 1)] = -hi / h2;
        }
    }
    if vacuum {
        // Ghost node from (u_{M+2} − u_M)/(2h) + l·u_{M+1} = 0 at r = 1.
        let b = m;
        let l = bc.l as f64;
        a[(b, b - 1)] = 2.0 / h2;
        a[(b, b)] = -(2.0 + 2.0 * h * l) / h2 - ll;
    }
    Ok(DiscreteOperator {
        matrix: a,
        grid: Grid { h, nodes },
        bc: *bc,
        profile: profile.clone(),
        layout: BlockLayout { u1: 0..n1, u2: n1..n },
        m,
    })
}

impl DiscreteOperator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// max |(JA) − (JA)ᵀ| / ‖A‖_F with J the block swap; `None` when the
    /// two blocks have different sizes.
    pub fn krein_asymmetry(&self) -> Option<f64> {
        let m = self.layout.u1.len();
        if m != self.layout.u2.len() {
            return None;
        }
        let a = &self.matrix;
        let ja = |i: usize, j: usize| if i < m { a[(i + m, j)] } else { a[(i - m, j)] };
        let mut worst: f64 = 0.0;
        for i in 0..2 * m {
            for j in 0..i {
                worst = worst.max((ja(i, j) - ja(j, i)).abs());
            }
        }
        Some(worst / eig::frobenius_norm(a))
    }

    pub fn spectrum(&self, with_vectors: bool) -> Result<SpectrumSample> {
        Ok(eig::eig_general(&self.matrix, with_vectors)?.with_meta(SampleMeta {
            grid_m: Some(self.m),
            profile: Some(serde_json::to_string(&self.profile)?),
            bc: Some(self.bc.label()),
            parameter: None,
        }))
    }

    /// One row per line, whitespace separated.
    pub fn write_text<W: Write>(&self, out: &mut W) -> Result<()> {
        write_dense(&self.matrix, out)
    }
}

pub fn write_dense<W: Write>(a: &Mat<f64>, out: &mut W) -> Result<()> {
    for i in 0..a.nrows() {
        let row: Vec<String> = (0..a.ncols()).map(|j| format!("{:e}", a[(i, j)])).collect();
        writeln!(out, "{}", row.join(" "))?;
    }
    Ok(())
}

/// Eigenvalues of the Dirichlet discretization of Q[1] on (0, 1), ascending.
pub fn discrete_rho(l: u32, m: usize) -> Result<Vec<f64>> {
    check_nodes(m)?;
    let (h, nodes) = uniform_nodes(1.0, m);
    let ll = (l * (l + 1)) as f64;
    if l == 0 {
        return Ok((1..=m)
            .map(|n| (4.0 / (h * h)) * (n as f64 * std::f64::consts::PI * h / 2.0).sin().powi(2))
            .collect());
    }
    let q = Mat::<f64>::from_fn(m, m, |i, j| {
        if i == j {
            2.0 / (h * h) + ll / (nodes[i] * nodes[i])
        } else if i.abs_diff(j) == 1 {
            -1.0 / (h * h)
        } else {
            0.0
        }
    });
    let mut v = q
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .map_err(|_| Error::NoConvergence { index: m })?;
    v.sort_by(f64::total_cmp);
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PencilSign {
    /// (T − ϵα − ϵ²)F = 0
    Plus,
    /// (T + ϵα − ϵ²)F = 0
    Minus,
}

impl PencilSign {
    pub fn factor(self) -> f64 {
        match self {
            PencilSign::Plus => 1.0,
            PencilSign::Minus => -1.0,
        }
    }
}

/// Symmetric tridiagonal `T` on the interior nodes of (0, X).
#[derive(Debug, Clone)]
pub struct PencilOperator {
    pub diag: Vec<f64>,
    /// Constant off-diagonal −1/h².
    pub off: f64,
    pub alpha: Vec<f64>,
    pub h: f64,
    pub nodes: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PencilLinearization {
    pub matrix: Mat<f64>,
    pub sign: PencilSign,
    pub l: u32,
    pub x: f64,
    pub profile: AlphaProfile,
    pub t: PencilOperator,
}

fn check_pencil_profile(profile: &AlphaProfile, x: f64) -> Result<()> {
    match *profile {
        AlphaProfile::Soliton { x0, .. } => {
            if !(x > x0) {
                return Err(Error::invalid(format!("box X = {x} must exceed the soliton centre {x0}")));
            }
        }
        // Amplitude-zero soliton.
        AlphaProfile::Constant { alpha0 } if alpha0 == 0.0 => {}
        _ => return Err(Error::invalid("pencil linearization needs a soliton profile")),
    }
    if !(x.is_finite() && x > 0.0) {
        return Err(Error::invalid(format!("box length X must be positive, got {x}")));
    }
    Ok(())
}

pub fn pencil_operator(profile: &AlphaProfile, l: u32, x: f64, m: usize) -> Result<PencilOperator> {
    check_nodes(m)?;
    profile.validate()?;
    check_pencil_profile(profile, x)?;
    let (h, nodes) = uniform_nodes(x, m);
    let ll = (l * (l + 1)) as f64;
    let alpha = nodes.iter().map(|&r| sample(profile, r)).collect::<Result<Vec<_>>>()?;
    let diag = nodes
        .iter()
        .zip(&alpha)
        .map(|(&r, &a)| 2.0 / (h * h) + ll / (r * r) - 0.5 * a * a + 0.5)
        .collect();
    Ok(PencilOperator { diag, off: -1.0 / (h * h), alpha, h, nodes })
}

impl PencilOperator {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn dense(&self) -> Mat<f64> {
        let m = self.len();
        Mat::from_fn(m, m, |i, j| {
            if i == j {
                self.diag[i]
            } else if i.abs_diff(j) == 1 {
                self.off
            } else {
                0.0
            }
        })
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let m = self.len();
        (0..m)
            .map(|i| {
                let mut v = self.diag[i] * f[i];
                if i > 0 {
                    v += self.off * f[i - 1];
                }
                if i + 1 < m {
                    v += self.off * f[i + 1];
                }
                v
            })
            .collect()
    }
}

pub fn assemble_pencil(
    sign: PencilSign,
    profile: &AlphaProfile,
    l: u32,
    x: f64,
    m: usize,
) -> Result<PencilLinearization> {
    let t = pencil_operator(profile, l, x, m)?;
    let s = sign.factor();
    let mut a = Mat::<f64>::zeros(2 * m, 2 * m);
    for i in 0..m {
        a[(i, m + i)] = 1.0;
        a[(m + i, i)] = t.diag[i];
        if i > 0 {
            a[(m + i, i - 1)] = t.off;
        }
        if i + 1 < m {
            a[(m + i, i + 1)] = t.off;
        }
        a[(m + i, m + i)] = -s * t.alpha[i];
    }
    Ok(PencilLinearization { matrix: a, sign, l, x, profile: profile.clone(), t })
}

impl PencilLinearization {
    pub fn m(&self) -> usize {
        self.t.len()
    }
}

pub fn lambda_from_epsilon(epsilon: Complex64) -> Complex64 {
    0.5 - epsilon * epsilon
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn by_modulus(a: &Mat<f64>) -> Vec<Complex64> {
        SpectrumSample::from_values(eig::eig_general(a, false).unwrap().eigenvalues).by_modulus()
    }

    #[test]
    fn doubled_decay_mode() {
        let op = assemble(&AlphaProfile::constant(0.0), &BoundarySpec::idealized(0), 200).unwrap();
        let v = by_modulus(&op.matrix);
        for z in &v[..2] {
            assert!((z.re + PI * PI).abs() <= 2e-4 * PI * PI, "{z}");
            assert!(z.im.abs() < 1e-10);
        }
    }

    #[test]
    fn krein_symmetry_of_dirichlet_assemblies() {
        let op = assemble(&AlphaProfile::constant(1.0), &BoundarySpec::idealized(0), 100).unwrap();
        assert!(op.krein_asymmetry().unwrap() <= 1e-13);
        let op = assemble(&AlphaProfile::fig1(3.0), &BoundarySpec::idealized(2), 60).unwrap();
        assert!(op.krein_asymmetry().unwrap() <= 1e-13);
        let op = assemble(&AlphaProfile::unit_soliton(4.0), &BoundarySpec::boxed(12.0, 1), 80).unwrap();
        assert!(op.krein_asymmetry().unwrap() <= 1e-13);
        let op = assemble(&AlphaProfile::fig1(1.0), &BoundarySpec::physical(1), 40).unwrap();
        assert_eq!(op.dim(), 81);
        assert!(op.krein_asymmetry().is_none());
    }

    #[test]
    fn block_structure() {
        let p = AlphaProfile::fourier(0.7, vec![crate::profiles::FourierTerm::sin(1, 0.2)]);
        let op = assemble(&p, &BoundarySpec::idealized(1), 20).unwrap();
        let m = 20;
        for i in 0..m {
            assert_eq!(op.matrix[(i, m + i)], p.evaluate(op.grid.nodes[i]).unwrap());
            for j in 0..m {
                assert_eq!(op.matrix[(i, j)], op.matrix[(m + i, m + j)]);
                if i != j {
                    assert_eq!(op.matrix[(i, m + j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        let p = AlphaProfile::constant(1.0);
        assert!(assemble(&p, &BoundarySpec::idealized(0), 4).is_err());
        assert!(assemble(&AlphaProfile::fig1(1.0), &BoundarySpec::boxed(3.0, 0), 50).is_err());
        assert!(assemble(&AlphaProfile::unit_soliton(3.0), &BoundarySpec::idealized(0), 50).is_err());
        assert!(assemble(&p, &BoundarySpec::boxed(-1.0, 0), 50).is_err());
        assert!(assemble_pencil(PencilSign::Plus, &AlphaProfile::unit_soliton(6.0), 0, 5.0, 50).is_err());
        assert!(assemble_pencil(PencilSign::Plus, &AlphaProfile::constant(1.0), 0, 5.0, 50).is_err());
    }

    /// Shooting on −u'' + 2u/r² = λu, u ~ r² at 0, returning u'(1) + u(1).
    fn shoot(lambda: f64) -> f64 {
        let k = (-lambda).sqrt();
        // Exact regular solution: Riccati–Bessel ψ₁(kr) = sin(kr)/(kr) − cos(kr).
        let u = |r: f64| (k * r).sin() / (k * r) - (k * r).cos();
        let du = |r: f64| {
            let z = k * r;
            k * (z.cos() / z - z.sin() / (z * z) + z.sin())
        };
        du(1.0) + u(1.0)
    }

    #[test]
    fn vacuum_dipole_matches_shooting() {
        // u'(1) + u(1) = 0 for l = 1 reduces to sin k = 0, first root k = π.
        let (mut lo, mut hi) = (-(3.5f64).powi(2), -(2.5f64).powi(2));
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if shoot(lo).signum() == shoot(mid).signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let oracle = 0.5 * (lo + hi);
        assert!((oracle + PI * PI).abs() < 1e-10);

        let op = assemble(&AlphaProfile::constant(0.0), &BoundarySpec::physical(1), 400).unwrap();
        let n1 = op.layout.u1.len();
        let u1 = Mat::<f64>::from_fn(n1, n1, |i, j| op.matrix[(i, j)]);
        let lead = eig::eig_general(&u1, false)
            .unwrap()
            .eigenvalues
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((lead - oracle).abs() < 1e-4 * oracle.abs(), "{lead} vs {oracle}");
    }

    #[test]
    fn second_order_convergence_against_the_mesh() {
        let alpha0 = 2.0;
        let exact = -PI * PI + alpha0 * PI;
        let err = |m| {
            let op = assemble(&AlphaProfile::constant(alpha0), &BoundarySpec::idealized(0), m).unwrap();
            let v = by_modulus(&op.matrix);
            v.iter().map(|z| (z.re - exact).abs()).fold(f64::INFINITY, f64::min)
        };
        let ratio = err(100) / err(200);
        assert!((3.5..=4.5).contains(&ratio), "{ratio}");
    }

    #[test]
    fn discrete_rho_matches_the_tridiagonal_spectrum() {
        let r0 = discrete_rho(0, 50).unwrap();
        assert!((r0[0] - PI * PI).abs() < 1e-2);
        let r1 = discrete_rho(1, 400).unwrap();
        assert!((r1[0].sqrt() - 4.493409457909064).abs() < 1e-4);
    }

    #[test]
    fn empty_pencil() {
        let p = assemble_pencil(PencilSign::Plus, &AlphaProfile::constant(0.0), 0, 10.0, 400).unwrap();
        let eps = eig::eig_general(&p.matrix, false).unwrap().eigenvalues;
        let mut lam: Vec<f64> = eps.iter().map(|&e| lambda_from_epsilon(e).re).collect();
        lam.sort_by(|a, b| b.total_cmp(a));
        let target = -(PI / 10.0).powi(2);
        assert!((lam[0] - target).abs() < 1e-4, "{}", lam[0]);
        assert!((lam[1] - target).abs() < 1e-4);
        for e in &eps {
            let n = ((e.re * e.re - 0.5).max(0.0)).sqrt() * 10.0 / PI;
            assert!((n - n.round()).abs() < 0.05 * n.max(1.0), "{e}");
        }
    }

    #[test]
    fn pencil_signs_mirror() {
        let prof = AlphaProfile::unit_soliton(4.0);
        let sp = |s| {
            let p = assemble_pencil(s, &prof, 1, 14.0, 120).unwrap();
            let mut v = eig::eig_general(&p.matrix, false).unwrap().eigenvalues;
            v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
            v
        };
        let plus = sp(PencilSign::Plus);
        let mut minus: Vec<Complex64> = sp(PencilSign::Minus).into_iter().map(|z| -z).collect();
        minus.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        for (a, b) in plus.iter().zip(&minus) {
            assert!((a - b).norm() < 1e-8 * (1.0 + a.norm()), "{a} {b}");
        }
    }

    #[test]
    fn pencil_eigenvectors_are_companion_consistent() {
        let p = assemble_pencil(PencilSign::Plus, &AlphaProfile::unit_soliton(5.0), 0, 15.0, 150).unwrap();
        let s = eig::eig_general(&p.matrix, true).unwrap();
        let v = s.vectors.unwrap();
        let m = p.m();
        for (k, e) in s.eigenvalues.iter().enumerate() {
            if e.norm() <= 1e-8 {
                continue;
            }
            let fnorm: f64 = (0..m).map(|i| v[(i, k)].norm_sqr()).sum::<f64>().sqrt();
            let defect: f64 =
                (0..m).map(|i| (v[(m + i, k)] - e * v[(i, k)]).norm_sqr()).sum::<f64>().sqrt();
            assert!(defect <= 1e-8 * fnorm.max(1e-300) * (1.0 + e.norm()), "{e}: {defect} {fnorm}");
        }
    }

    #[test]
    fn lambda_epsilon_examples() {
        assert_eq!(lambda_from_epsilon(c(0.0, 0.0)), c(0.5, 0.0));
        assert_eq!(lambda_from_epsilon(c(1.0, 0.0)), c(-0.5, 0.0));
        assert_eq!(lambda_from_epsilon(c(0.0, 0.5)), c(0.75, 0.0));
    }

    #[test]
    fn text_export_round_trips() {
        let op = assemble(&AlphaProfile::constant(1.5), &BoundarySpec::idealized(1), 10).unwrap();
        let mut buf = Vec::new();
        op.write_text(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let rows: Vec<Vec<f64>> = text
            .lines()
            .map(|l| l.split_whitespace().map(|t| t.parse().unwrap()).collect())
            .collect();
        assert_eq!(rows.len(), 20);
        for i in 0..20 {
            for j in 0..20 {
                assert_eq!(rows[i][j], op.matrix[(i, j)]);
            }
        }
    }
}
