//! Composite Gauss–Legendre quadrature with panel doubling.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::GaussLegendre;

use crate::error::{Error, Result};

pub const POINTS: usize = 8;
pub const START_PANELS: usize = 64;
pub const TOLERANCE: f64 = 1e-8;
const MAX_DOUBLINGS: usize = 8;

fn rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(NonZeroUsize::new(POINTS).unwrap()))
}

pub fn composite<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, panels: usize) -> f64 {
    let w = (b - a) / panels as f64;
    (0..panels)
        .map(|p| {
            let lo = a + p as f64 * w;
            rule().integrate(lo, lo + w, &mut f)
        })
        .sum()
}

/// Doubles the panel count from [`START_PANELS`] until two successive values
/// agree to [`TOLERANCE`].
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64) -> Result<f64> {
    let mut panels = START_PANELS;
    let mut prev = composite(&mut f, a, b, panels);
    let mut diff = f64::INFINITY;
    for _ in 0..MAX_DOUBLINGS {
        panels *= 2;
        let next = composite(&mut f, a, b, panels);
        diff = (next - prev).abs();
        if diff <= TOLERANCE {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::Quadrature { difference: diff })
}
