//! Constant-α baseline under idealized Dirichlet conditions.
//!
//! The eigenfunctions of Q[1] are orthonormal Riccati–Bessel functions and
//! the branches λ_n^ε(α₀) = −ρ_n + ε α₀ √ρ_n form a mesh whose nodes are
//! diabolical points. A small inhomogeneous perturbation α₀ + amplitude·φ(r)
//! unfolds each node according to a quadratic in the first-order shift λ₁,
//! built from the Krein products
//!
//! ```text
//! [B u_m^δ, u_n^ε] = ∫₀¹ φ [(εδ √(ρ_n ρ_m) + l(l+1)/r²) u_m u_n + u_m' u_n'] dr.
//! ```

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eig;
use crate::error::{Error, Result};
use crate::operator::{self, BoundarySpec};
use crate::profiles::{AlphaProfile, FourierTerm};
use crate::quadrature;
use crate::special::{riccati_psi, riccati_psi_prime, spherical_jn, spherical_jn_zeros};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Krein {
    Plus,
    Minus,
}

impl Krein {
    pub fn sign(self) -> f64 {
        match self {
            Krein::Plus => 1.0,
            Krein::Minus => -1.0,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Krein::Plus => '+',
            Krein::Minus => '-',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialMode {
    pub n: usize,
    pub l: u32,
    pub sqrt_rho: f64,
    /// N_n = √2 / J_{l+3/2}(√ρ_n).
    pub norm: f64,
}

impl RadialMode {
    pub fn rho(&self) -> f64 {
        self.sqrt_rho * self.sqrt_rho
    }

    /// u_n(r) = N_n r^{1/2} J_{l+1/2}(√ρ_n r).
    pub fn value(&self, r: f64) -> f64 {
        let k = self.sqrt_rho;
        self.norm * (2.0 / (PI * k)).sqrt() * riccati_psi(self.l, k * r)
    }

    pub fn derivative(&self, r: f64) -> f64 {
        let k = self.sqrt_rho;
        self.norm * (2.0 * k / PI).sqrt() * riccati_psi_prime(self.l, k * r)
    }
}

pub fn radial_modes(l: u32, count: usize) -> Result<Vec<RadialMode>> {
    if count == 0 {
        return Err(Error::invalid("need at least one radial mode"));
    }
    Ok(spherical_jn_zeros(l, count)?
        .into_iter()
        .enumerate()
        .map(|(i, k)| {
            let j_next = (2.0 * k / PI).sqrt() * spherical_jn(l + 1, k);
            RadialMode { n: i + 1, l, sqrt_rho: k, norm: std::f64::consts::SQRT_2 / j_next }
        })
        .collect())
}

fn mode(l: u32, n: usize) -> Result<RadialMode> {
    if n == 0 {
        return Err(Error::invalid("radial mode numbers start at 1"));
    }
    Ok(radial_modes(l, n)?[n - 1])
}

pub fn mesh_eigenvalue(n: usize, eps: Krein, l: u32, alpha0: f64) -> Result<f64> {
    let m = mode(l, n)?;
    Ok(-m.rho() + eps.sign() * alpha0 * m.sqrt_rho)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiabolicalPoint {
    pub l: u32,
    pub n: usize,
    pub eps: Krein,
    pub m: usize,
    pub delta: Krein,
    pub sqrt_rho_n: f64,
    pub sqrt_rho_m: f64,
    pub alpha0_c: f64,
    pub lambda0: f64,
    pub same_type: bool,
    /// Parabola index for l = 0: n + m for opposite type, |n − m| for same type.
    pub j: Option<u32>,
}

impl DiabolicalPoint {
    pub fn new(a: &RadialMode, eps: Krein, b: &RadialMode, delta: Krein) -> Self {
        let same_type = eps == delta;
        let j = (a.l == 0).then(|| {
            if same_type {
                a.n.abs_diff(b.n) as u32
            } else {
                (a.n + b.n) as u32
            }
        });
        Self {
            l: a.l,
            n: a.n,
            eps,
            m: b.n,
            delta,
            sqrt_rho_n: a.sqrt_rho,
            sqrt_rho_m: b.sqrt_rho,
            alpha0_c: eps.sign() * a.sqrt_rho + delta.sign() * b.sqrt_rho,
            lambda0: eps.sign() * delta.sign() * a.sqrt_rho * b.sqrt_rho,
            same_type,
            j,
        }
    }

    /// λ = (α₀² − j²π²)/4 evaluated at the DP's α₀ (l = 0 only).
    pub fn parabola_value(&self) -> Option<f64> {
        self.j.map(|j| (self.alpha0_c.powi(2) - (j as f64 * PI).powi(2)) / 4.0)
    }

    pub fn label(&self) -> String {
        format!("({},{})x({},{})", self.n, self.eps.symbol(), self.m, self.delta.symbol())
    }
}

/// All crossings among the first `n_max` radial modes of both Krein types
/// with α₀ᶜ in `[lo, hi]`, ordered by (α₀ᶜ, λ₀). Each unordered pair of
/// branches appears once, with the higher-ranked (mode, type) first.
pub fn diabolical_points(l: u32, n_max: usize, window: (f64, f64)) -> Result<Vec<DiabolicalPoint>> {
    if n_max < 2 {
        return Err(Error::invalid("diabolical point catalogue needs n_max >= 2"));
    }
    let modes = radial_modes(l, n_max)?;
    let labels: Vec<(usize, Krein)> =
        (0..n_max).flat_map(|i| [(i, Krein::Plus), (i, Krein::Minus)]).collect();
    let mut out = Vec::new();
    for (ia, &(a, ea)) in labels.iter().enumerate() {
        for &(b, eb) in &labels[ia + 1..] {
            // Put the larger mode number first, + before − on ties.
            let (p, q) = if (modes[a].n, eb) >= (modes[b].n, ea) {
                ((a, ea), (b, eb))
            } else {
                ((b, eb), (a, ea))
            };
            let dp = DiabolicalPoint::new(&modes[p.0], p.1, &modes[q.0], q.1);
            if dp.alpha0_c >= window.0 - 1e-12 && dp.alpha0_c <= window.1 + 1e-12 {
                out.push(dp);
            }
        }
    }
    out.sort_by(|x, y| x.alpha0_c.total_cmp(&y.alpha0_c).then(x.lambda0.total_cmp(&y.lambda0)));
    Ok(out)
}

fn check_weight(phi: &AlphaProfile) -> Result<()> {
    match phi {
        AlphaProfile::Fourier { .. } | AlphaProfile::Constant { .. } => phi.validate(),
        _ => Err(Error::invalid("perturbation shapes are constant plus Fourier terms")),
    }
}

/// [B u_m^δ, u_n^ε] with φ as weight.
pub fn krein_product_b(
    phi: &AlphaProfile,
    (um, delta): (&RadialMode, Krein),
    (un, eps): (&RadialMode, Krein),
) -> Result<f64> {
    check_weight(phi)?;
    if um.l != un.l {
        return Err(Error::invalid("Krein products need modes of equal l"));
    }
    let ll = (un.l * (un.l + 1)) as f64;
    let cross = eps.sign() * delta.sign() * un.sqrt_rho * um.sqrt_rho;
    let mut failed = None;
    let value = quadrature::integrate(
        |r| {
            let w = match phi.evaluate(r) {
                Ok(w) => w,
                Err(e) => {
                    failed.get_or_insert(e);
                    0.0
                }
            };
            w * ((cross + ll / (r * r)) * um.value(r) * un.value(r) + um.derivative(r) * un.derivative(r))
        },
        0.0,
        1.0,
    )?;
    match failed {
        Some(e) => Err(e),
        None => Ok(value),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KreinProducts {
    pub nn: f64,
    pub mm: f64,
    pub nm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Unfolding {
    pub lambda1: [Complex64; 2],
    pub predicted: [Complex64; 2],
    pub discriminant: f64,
    pub complex_split: bool,
    pub products: KreinProducts,
}

/// Roots of λ₁² − bλ₁ + c = 0 with coefficients from the three Krein products.
pub fn unfold_roots(dp: &DiabolicalPoint, p: &KreinProducts) -> ([Complex64; 2], f64) {
    let (e, d) = (dp.eps.sign(), dp.delta.sign());
    let (sn, sm) = (dp.sqrt_rho_n, dp.sqrt_rho_m);
    let b = e * p.nn / (2.0 * sn) + d * p.mm / (2.0 * sm);
    let c = e * d * (p.nn * p.mm - p.nm * p.nm) / (4.0 * sn * sm);
    // Written as a square plus εδ·(off-diagonal)² so that same-type
    // discriminants cannot come out negative through cancellation.
    let a_n = e * p.nn / (2.0 * sn);
    let a_m = d * p.mm / (2.0 * sm);
    let disc = (a_n - a_m).powi(2) + e * d * p.nm * p.nm / (sn * sm);
    debug_assert!((disc - (b * b - 4.0 * c)).abs() <= 1e-8 * (1.0 + b * b + 4.0 * c.abs()));
    let root = Complex64::new(disc, 0.0).sqrt();
    ([(b + root) / 2.0, (b - root) / 2.0], disc)
}

pub fn dp_unfold(dp: &DiabolicalPoint, phi: &AlphaProfile, amplitude: f64) -> Result<Unfolding> {
    let modes = radial_modes(dp.l, dp.n.max(dp.m))?;
    let (un, um) = (&modes[dp.n - 1], &modes[dp.m - 1]);
    let products = KreinProducts {
        nn: krein_product_b(phi, (un, dp.eps), (un, dp.eps))?,
        mm: krein_product_b(phi, (um, dp.delta), (um, dp.delta))?,
        nm: krein_product_b(phi, (um, dp.delta), (un, dp.eps))?,
    };
    let (lambda1, disc) = unfold_roots(dp, &products);
    let scale = (dp.sqrt_rho_n * dp.sqrt_rho_m).max(1.0);
    Ok(Unfolding {
        lambda1,
        predicted: lambda1.map(|z| dp.lambda0 + amplitude * z),
        discriminant: disc,
        complex_split: disc < -1e-12 * scale * scale,
        products,
    })
}

/// The DP located on the discrete mesh of `M` nodes, where the branch
/// crossing of the assembled constant-α operator is exact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteNode {
    pub alpha0_c: f64,
    pub lambda0: f64,
}

pub fn discrete_node(dp: &DiabolicalPoint, rho_h: &[f64]) -> Result<DiscreteNode> {
    let k = dp.n.max(dp.m);
    if rho_h.len() < k {
        return Err(Error::invalid("discrete Q[1] spectrum too short for this crossing"));
    }
    let (sn, sm) = (rho_h[dp.n - 1].sqrt(), rho_h[dp.m - 1].sqrt());
    let (e, d) = (dp.eps.sign(), dp.delta.sign());
    Ok(DiscreteNode { alpha0_c: e * sn + d * sm, lambda0: e * d * sn * sm })
}

/// The two eigenvalues of the assembled perturbed operator that continue the
/// crossing, matched to `targets`, and their difference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservedSplit {
    pub eigenvalues: [Complex64; 2],
    pub split: Complex64,
}

pub fn observe_split(
    dp: &DiabolicalPoint,
    phi: &AlphaProfile,
    amplitude: f64,
    node: &DiscreteNode,
    targets: [Complex64; 2],
    m: usize,
) -> Result<ObservedSplit> {
    let profile = perturbed(phi, node.alpha0_c, amplitude)?;
    let op = operator::assemble(&profile, &BoundarySpec::idealized(dp.l), m)?;
    let values = eig::eig_general(&op.matrix, false)?.eigenvalues;
    let shift = node.lambda0 - dp.lambda0;
    let mut taken = usize::MAX;
    let mut picked = [Complex64::new(0.0, 0.0); 2];
    for (slot, t) in targets.iter().enumerate() {
        let t = t + shift;
        let (idx, _) = values
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != taken)
            .min_by(|a, b| (a.1 - t).norm().total_cmp(&(b.1 - t).norm()))
            .expect("spectrum has at least two values");
        taken = idx;
        picked[slot] = values[idx];
    }
    Ok(ObservedSplit { eigenvalues: picked, split: picked[0] - picked[1] })
}

/// α₀ + amplitude·φ as a Fourier profile.
pub fn perturbed(phi: &AlphaProfile, alpha0: f64, amplitude: f64) -> Result<AlphaProfile> {
    check_weight(phi)?;
    let (base, terms): (f64, Vec<FourierTerm>) = match phi {
        AlphaProfile::Constant { alpha0 } => (*alpha0, vec![]),
        AlphaProfile::Fourier { alpha0, terms } => (*alpha0, terms.clone()),
        _ => unreachable!(),
    };
    Ok(AlphaProfile::fourier(
        alpha0 + amplitude * base,
        terms.into_iter().map(|t| FourierTerm { amplitude: amplitude * t.amplitude, ..t }).collect(),
    ))
}

#[derive(Debug, Clone, Serialize)]
pub struct ResonanceRow {
    pub dp: DiabolicalPoint,
    pub unfolding: Unfolding,
    pub predicted_split: Complex64,
    /// Splitting at +amplitude.
    pub observed_split: Complex64,
    /// Splitting at −amplitude.
    pub observed_split_reversed: Complex64,
}

impl ResonanceRow {
    pub fn displacement(&self) -> f64 {
        self.unfolding.lambda1.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonanceConfig {
    pub n_max: usize,
    pub amplitude: f64,
    pub m: usize,
    /// Only crossings with α₀ᶜ in this window are scanned.
    pub window: (f64, f64),
}

pub fn resonance_scan(phi: &AlphaProfile, cfg: &ResonanceConfig) -> Result<Vec<ResonanceRow>> {
    let dps = diabolical_points(0, cfg.n_max, cfg.window)?;
    let rho_h = operator::discrete_rho(0, cfg.m)?;
    let mut rows: Vec<ResonanceRow> = dps
        .par_iter()
        .map(|dp| {
            let unfolding = dp_unfold(dp, phi, cfg.amplitude)?;
            let node = discrete_node(dp, &rho_h)?;
            let plus = observe_split(dp, phi, cfg.amplitude, &node, unfolding.predicted, cfg.m)?;
            let reversed = unfolding.lambda1.map(|z| dp.lambda0 - cfg.amplitude * z);
            let minus = observe_split(dp, phi, -cfg.amplitude, &node, reversed, cfg.m)?;
            Ok(ResonanceRow {
                dp: *dp,
                predicted_split: cfg.amplitude * (unfolding.lambda1[0] - unfolding.lambda1[1]),
                unfolding,
                observed_split: plus.split,
                observed_split_reversed: minus.split,
            })
        })
        .collect::<Result<_>>()?;
    rows.sort_by(|a, b| a.dp.j.cmp(&b.dp.j).then(a.dp.alpha0_c.total_cmp(&b.dp.alpha0_c)));
    Ok(rows)
}

pub const RESONANCE_HEADER: [&str; 13] = [
    "dp_n",
    "dp_m",
    "eps",
    "delta",
    "alpha0_c",
    "lambda0",
    "j",
    "lambda1_re_1",
    "lambda1_im_1",
    "lambda1_re_2",
    "lambda1_im_2",
    "observed_split_re",
    "observed_split_im",
];

pub fn resonance_record(row: &ResonanceRow) -> Vec<String> {
    use crate::output::fmt;
    let dp = &row.dp;
    let l1 = row.unfolding.lambda1;
    vec![
        dp.n.to_string(),
        dp.m.to_string(),
        (dp.eps.sign() as i32).to_string(),
        (dp.delta.sign() as i32).to_string(),
        fmt(dp.alpha0_c),
        fmt(dp.lambda0),
        dp.j.map(|j| j.to_string()).unwrap_or_default(),
        fmt(l1[0].re),
        fmt(l1[0].im),
        fmt(l1[1].re),
        fmt(l1[1].im),
        fmt(row.observed_split.re),
        fmt(row.observed_split.im),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one() -> AlphaProfile {
        AlphaProfile::fourier(1.0, vec![])
    }

    fn trig(kind: &str, k: u32) -> AlphaProfile {
        let t = if kind == "cos" { FourierTerm::cos(k, 1.0) } else { FourierTerm::sin(k, 1.0) };
        AlphaProfile::fourier(0.0, vec![t])
    }

    #[test]
    fn l0_modes_are_sines() {
        let modes = radial_modes(0, 5).unwrap();
        for m in &modes {
            assert!((m.sqrt_rho - m.n as f64 * PI).abs() < 1e-13);
            for &r in &[0.1, 0.37, 0.8] {
                let s = (m.n as f64 * PI * r).sin() * std::f64::consts::SQRT_2;
                assert!((m.value(r).abs() - s.abs()).abs() < 1e-12);
            }
        }
        assert!((radial_modes(1, 1).unwrap()[0].sqrt_rho - 4.493409).abs() < 1e-6);
    }

    #[test]
    fn modes_are_orthonormal() {
        for l in 0..4 {
            let modes = radial_modes(l, 4).unwrap();
            for a in &modes {
                for b in &modes {
                    let v = quadrature::integrate(|r| a.value(r) * b.value(r), 0.0, 1.0).unwrap();
                    let expect = if a.n == b.n { 1.0 } else { 0.0 };
                    assert!((v - expect).abs() < 1e-8, "l={l} {} {} {v}", a.n, b.n);
                }
            }
        }
    }

    #[test]
    fn derivative_is_analytic() {
        for l in 0..3 {
            for m in radial_modes(l, 3).unwrap() {
                let h = 1e-6;
                for &r in &[0.2, 0.55, 0.9] {
                    let fd = (m.value(r + h) - m.value(r - h)) / (2.0 * h);
                    assert!((m.derivative(r) - fd).abs() < 1e-6 * m.rho());
                }
            }
        }
    }

    #[test]
    fn mesh_eigenvalue_examples() {
        assert!(mesh_eigenvalue(1, Krein::Plus, 0, PI).unwrap().abs() < 1e-12);
        assert!((mesh_eigenvalue(1, Krein::Minus, 0, PI).unwrap() + 2.0 * PI * PI).abs() < 1e-12);
        assert!((mesh_eigenvalue(1, Krein::Plus, 0, 0.0).unwrap() + PI * PI).abs() < 1e-12);
    }

    fn find(dps: &[DiabolicalPoint], n: usize, e: Krein, m: usize, d: Krein) -> DiabolicalPoint {
        *dps.iter()
            .find(|p| (p.n, p.eps, p.m, p.delta) == (n, e, m, d))
            .unwrap_or_else(|| panic!("missing ({n},{e:?})x({m},{d:?})"))
    }

    #[test]
    fn diabolical_point_examples() {
        let dps = diabolical_points(0, 4, (-100.0, 100.0)).unwrap();
        let a = find(&dps, 2, Krein::Plus, 1, Krein::Minus);
        assert!((a.alpha0_c - PI).abs() < 1e-12);
        assert!((a.lambda0 + 2.0 * PI * PI).abs() < 1e-12);
        assert!(!a.same_type);
        assert_eq!(a.j, Some(3));
        let b = find(&dps, 2, Krein::Plus, 1, Krein::Plus);
        assert!((b.alpha0_c - 3.0 * PI).abs() < 1e-12);
        assert!((b.lambda0 - 2.0 * PI * PI).abs() < 1e-12);
        assert!(b.same_type);
        assert_eq!(b.j, Some(1));
        // Eight branches give C(8, 2) crossings.
        assert_eq!(dps.len(), 28);
    }

    #[test]
    fn crossings_lie_on_both_branches_and_on_parabolas() {
        for l in 0..3 {
            for dp in diabolical_points(l, 12, (-200.0, 200.0)).unwrap() {
                let ln = -dp.sqrt_rho_n.powi(2) + dp.eps.sign() * dp.alpha0_c * dp.sqrt_rho_n;
                let lm = -dp.sqrt_rho_m.powi(2) + dp.delta.sign() * dp.alpha0_c * dp.sqrt_rho_m;
                let scale = dp.sqrt_rho_n * dp.sqrt_rho_m;
                assert!((ln - dp.lambda0).abs() < 1e-12 * scale);
                assert!((lm - dp.lambda0).abs() < 1e-12 * scale);
                assert_eq!(dp.same_type, dp.lambda0 > 0.0);
            }
        }
        // Brute force over n, m ≤ 12 with √ρ = nπ.
        for dp in diabolical_points(0, 12, (-200.0, 200.0)).unwrap() {
            let lam = dp.parabola_value().unwrap();
            assert!((lam - dp.lambda0).abs() < 1e-9 * (1.0 + dp.lambda0.abs()), "{}", dp.label());
        }
    }

    #[test]
    fn krein_products_with_unit_weight() {
        for l in 0..3 {
            let modes = radial_modes(l, 3).unwrap();
            for a in &modes {
                for b in &modes {
                    for (ea, eb) in [(Krein::Plus, Krein::Plus), (Krein::Plus, Krein::Minus)] {
                        let v = krein_product_b(&one(), (a, ea), (b, eb)).unwrap();
                        if a.n == b.n && ea == eb {
                            assert!((v - 2.0 * a.rho()).abs() < 1e-8 * a.rho().max(1.0));
                        } else if a.n != b.n {
                            assert!(v.abs() < 1e-8 * a.rho().max(b.rho()));
                        }
                    }
                }
            }
        }
    }

    /// Closed form for l = 0: u_n = ±√2 sin(nπr), so the integrand reduces to
    /// 2nmπ²·φ·cos(jπr) with j = n − m (same type) or n + m (opposite type).
    fn closed_l0(phi_kind: &str, k: u32, n: usize, m: usize, same: bool) -> f64 {
        let sign = if (n + m) % 2 == 0 { 1.0 } else { -1.0 };
        let j = if same { n as i64 - m as i64 } else { (n + m) as i64 };
        let j = j.unsigned_abs() as f64;
        let q = 2.0 * k as f64;
        let integral = match phi_kind {
            "cos" => {
                if (q - j).abs() < 1e-12 {
                    0.5
                } else {
                    0.0
                }
            }
            _ => {
                // ∫ sin(qπr) cos(jπr) dr
                let part = |s: f64| if s.abs() < 1e-12 { 0.0 } else { (1.0 - (s * PI).cos()) / (2.0 * s * PI) };
                part(q + j) + part(q - j)
            }
        };
        sign * 2.0 * (n * m) as f64 * PI * PI * integral
    }

    #[test]
    fn l0_products_match_elementary_integrals() {
        let modes = radial_modes(0, 10).unwrap();
        for kind in ["cos", "sin"] {
            for k in 1..=2 {
                let phi = trig(kind, k);
                for a in &modes {
                    for b in &modes {
                        for same in [true, false] {
                            let (ea, eb) = if same { (Krein::Plus, Krein::Plus) } else { (Krein::Plus, Krein::Minus) };
                            let v = krein_product_b(&phi, (b, eb), (a, ea)).unwrap();
                            let w = closed_l0(kind, k, a.n, b.n, same);
                            assert!((v - w).abs() < 1e-8, "{kind}{k} {} {} {same}: {v} {w}", a.n, b.n);
                        }
                    }
                }
            }
        }
        let (a, b) = (&modes[2], &modes[0]);
        assert!(krein_product_b(&trig("cos", 2), (b, Krein::Minus), (a, Krein::Plus)).unwrap().abs() > 1.0);
    }

    #[test]
    fn krein_product_is_symmetric() {
        let phi = AlphaProfile::fourier(0.3, vec![FourierTerm::sin(1, 0.7), FourierTerm::cos(2, -0.2)]);
        for l in 0..3 {
            let modes = radial_modes(l, 4).unwrap();
            for a in &modes {
                for b in &modes {
                    let x = krein_product_b(&phi, (a, Krein::Plus), (b, Krein::Minus)).unwrap();
                    let y = krein_product_b(&phi, (b, Krein::Minus), (a, Krein::Plus)).unwrap();
                    assert!((x - y).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn cosine_selectivity_by_enumeration() {
        let modes = radial_modes(0, 10).unwrap();
        for k in 1..=3u32 {
            let phi = trig("cos", k);
            for a in &modes {
                for b in &modes {
                    let opp = krein_product_b(&phi, (b, Krein::Minus), (a, Krein::Plus)).unwrap();
                    assert_eq!(opp.abs() > 1e-8, a.n + b.n == 2 * k as usize, "{} {}", a.n, b.n);
                    let same = krein_product_b(&phi, (b, Krein::Plus), (a, Krein::Plus)).unwrap();
                    if a.n != b.n {
                        assert_eq!(same.abs() > 1e-8, a.n.abs_diff(b.n) == 2 * k as usize);
                    }
                }
            }
        }
    }

    #[test]
    fn unit_weight_unfolding_shifts_each_branch() {
        let dps = diabolical_points(0, 3, (-50.0, 50.0)).unwrap();
        let dp = find(&dps, 2, Krein::Plus, 1, Krein::Minus);
        let u = dp_unfold(&dp, &one(), 0.1).unwrap();
        let mut l1: Vec<f64> = u.lambda1.iter().map(|z| z.re).collect();
        l1.sort_by(f64::total_cmp);
        assert!((l1[0] + PI).abs() < 1e-7 && (l1[1] - 2.0 * PI).abs() < 1e-7, "{l1:?}");
        assert!(!u.complex_split);
    }

    #[test]
    fn krein_rule_over_the_catalogue() {
        let shapes = [one(), trig("cos", 1), trig("cos", 2), trig("sin", 1), trig("sin", 2)];
        for phi in &shapes {
            for dp in diabolical_points(0, 6, (0.0, f64::INFINITY)).unwrap() {
                let u = dp_unfold(&dp, phi, 0.05).unwrap();
                let [a, b] = u.lambda1;
                if dp.same_type {
                    assert!(a.im == 0.0 && b.im == 0.0);
                } else {
                    assert!((a.im == 0.0 && b.im == 0.0) || (a - b.conj()).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn sine_opens_a_complex_bubble_at_j3() {
        let dps = diabolical_points(0, 3, (0.0, 50.0)).unwrap();
        let dp = find(&dps, 2, Krein::Plus, 1, Krein::Minus);
        let phi = trig("sin", 1);
        let u = dp_unfold(&dp, &phi, 0.05).unwrap();
        assert!(u.complex_split);
        let m = 300;
        let node = discrete_node(&dp, &operator::discrete_rho(0, m).unwrap()).unwrap();
        let obs = observe_split(&dp, &phi, 0.05, &node, u.predicted, m).unwrap();
        let pred = 0.05 * (u.lambda1[0] - u.lambda1[1]);
        assert!((obs.split - pred).norm() <= 0.1 * pred.norm(), "{} vs {}", obs.split, pred);
    }

    #[test]
    fn record_has_header_width() {
        let dps = diabolical_points(0, 2, (0.0, 50.0)).unwrap();
        let u = dp_unfold(&dps[0], &one(), 0.01).unwrap();
        let row = ResonanceRow {
            dp: dps[0],
            unfolding: u,
            predicted_split: Complex64::new(0.0, 0.0),
            observed_split: Complex64::new(0.0, 0.0),
            observed_split_reversed: Complex64::new(0.0, 0.0),
        };
        assert_eq!(resonance_record(&row).len(), RESONANCE_HEADER.len());
    }
}
