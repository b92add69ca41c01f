//! Convex fluxes, entropy/entropy-flux pairs and shock-local algebra.
//!
//! All fluxes are polynomials on the normalized value slab `[0, 1]`. This
//! keeps every derived quantity (Taylor shifts, closed-form entropy fluxes,
//! affine rescaling) exact up to rounding.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;

/// Number of samples used to certify convexity on `[0, 1]`.
const CONVEXITY_SAMPLES: usize = 1000;
const EQUAL_STATE_TOL: f64 = 1e-14;

/// Flux as it appears in a scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FluxSpec {
    Burgers,
    /// `f(u) = coeffs[0] + coeffs[1] u + coeffs[2] u^2 + ...`
    Polynomial { coeffs: Vec<f64> },
}

impl FluxSpec {
    pub fn build(&self) -> Result<Flux> {
        match self {
            FluxSpec::Burgers => Flux::burgers(),
            FluxSpec::Polynomial { coeffs } => Flux::polynomial(coeffs.clone()),
        }
    }
}

/// A uniformly convex polynomial flux on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Flux {
    coeffs: Vec<f64>,
    alpha: f64,
    s_max: f64,
}

fn horner(coeffs: &[f64], u: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * u + c)
}

fn derivative(coeffs: &[f64]) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &c)| k as f64 * c)
        .collect()
}

/// Coefficients of `p(shift + scale * w)` as a polynomial in `w`.
fn compose_affine(coeffs: &[f64], shift: f64, scale: f64) -> Vec<f64> {
    let n = coeffs.len();
    let mut out = vec![0.0; n];
    // (shift + scale w)^k expanded with a running row of binomials
    let mut power = vec![1.0];
    for &c in coeffs {
        for (j, p) in power.iter().enumerate() {
            out[j] += c * p;
        }
        let mut next = vec![0.0; power.len() + 1];
        for (j, p) in power.iter().enumerate() {
            next[j] += p * shift;
            next[j + 1] += p * scale;
        }
        power = next;
    }
    out
}

impl Flux {
    pub fn burgers() -> Result<Self> {
        Self::polynomial(vec![0.0, 0.0, 0.5])
    }

    /// `u^4/4 + u^2/2`, the stock non-quadratic example.
    pub fn quartic() -> Result<Self> {
        Self::polynomial(vec![0.0, 0.0, 0.5, 0.0, 0.25])
    }

    pub fn polynomial(mut coeffs: Vec<f64>) -> Result<Self> {
        while coeffs.len() > 1 && coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        if coeffs.len() < 3 {
            return Err(Error::InvalidFlux(
                "a convex flux needs degree at least 2".into(),
            ));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidFlux("non-finite coefficient".into()));
        }
        let second = derivative(&derivative(&coeffs));
        let alpha = (0..=CONVEXITY_SAMPLES)
            .map(|i| horner(&second, i as f64 / CONVEXITY_SAMPLES as f64))
            .fold(f64::INFINITY, f64::min);
        if !(alpha > 0.0) {
            return Err(Error::NonConvexFlux {
                min_curvature: alpha,
            });
        }
        let first = derivative(&coeffs);
        let s_max = horner(&first, 0.0).abs().max(horner(&first, 1.0).abs());
        Ok(Flux {
            coeffs,
            alpha,
            s_max,
        })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Uniform convexity bound, `min f''` on `[0, 1]`.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Maximal characteristic speed `sup |f'|` on `[0, 1]`.
    pub fn s_max(&self) -> f64 {
        self.s_max
    }

    pub fn f(&self, u: f64) -> f64 {
        horner(&self.coeffs, u)
    }

    pub fn df(&self, u: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (k, &c)| acc * u + k as f64 * c)
    }

    pub fn ddf(&self, u: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(2)
            .rev()
            .fold(0.0, |acc, (k, &c)| acc * u + (k * (k - 1)) as f64 * c)
    }

    /// Taylor coefficients of `f` about `center`.
    pub fn taylor_at(&self, center: f64) -> Vec<f64> {
        compose_affine(&self.coeffs, center, 1.0)
    }

    /// Flux for the rescaled unknown `w = (u - lo) / (hi - lo)`, so that data
    /// in `[lo, hi]` becomes data in `[0, 1]` with identical wave speeds.
    pub fn rescaled(&self, lo: f64, hi: f64) -> Result<Self> {
        let scale = hi - lo;
        if !(scale > 0.0) {
            return Err(Error::InvalidFlux(format!(
                "cannot rescale to empty range [{lo}, {hi}]"
            )));
        }
        let coeffs = compose_affine(&self.coeffs, lo, scale)
            .into_iter()
            .map(|c| c / scale)
            .collect();
        Flux::polynomial(coeffs)
    }

    /// Rankine-Hugoniot speed of the jump `(u_l, u_r)`.
    pub fn rh_speed(&self, u_l: f64, u_r: f64) -> Result<f64> {
        if (u_l - u_r).abs() < EQUAL_STATE_TOL {
            return Err(Error::EqualStates(u_l, u_r));
        }
        Ok((self.f(u_l) - self.f(u_r)) / (u_l - u_r))
    }

    /// The unique level `v` with `f'(v) = sigma`.
    pub fn sonic_level(&self, sigma: f64) -> Result<f64> {
        let (lo, hi) = (self.df(0.0), self.df(1.0));
        let slack = 1e-14 * (1.0 + lo.abs().max(hi.abs()));
        if sigma < lo - slack || sigma > hi + slack {
            return Err(Error::SpeedOutOfRange { sigma, lo, hi });
        }
        Ok(quad::bisect(|v| self.df(v) - sigma, 0.0, 1.0, 0.0).clamp(0.0, 1.0))
    }

    /// Shock-local data for the jump `(u_left, u_right)`.
    pub fn shock(&self, u_left: f64, u_right: f64) -> Result<ShockData> {
        let sigma = self.rh_speed(u_left, u_right)?;
        let (lo, hi) = if u_left < u_right {
            (u_left, u_right)
        } else {
            (u_right, u_left)
        };
        // the sonic level is strictly inside the jump by convexity; bracket there
        let v_sonic = quad::bisect(|v| self.df(v) - sigma, lo, hi, 0.0);
        let taylor = self.taylor_at(v_sonic);
        Ok(ShockData {
            u_left,
            u_right,
            sigma,
            v_sonic,
            entropic: u_left > u_right,
            taylor,
        })
    }
}

impl fmt::Display for Flux {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms: Vec<String> = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(k, c)| match k {
                0 => format!("{c}"),
                1 => format!("{c}u"),
                _ => format!("{c}u^{k}"),
            })
            .collect();
        write!(f, "f(u) = {}", terms.join(" + "))
    }
}

/// Shock-local quantities for one jump.
#[derive(Debug, Clone, PartialEq)]
pub struct ShockData {
    pub u_left: f64,
    pub u_right: f64,
    pub sigma: f64,
    pub v_sonic: f64,
    pub entropic: bool,
    // Taylor coefficients of f about v_sonic; gives E without cancellation
    taylor: Vec<f64>,
}

/// Outcome of a level reassignment at a shock.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounce {
    pub level: f64,
    /// The incoming level was the sonic level itself (fixed point).
    pub sonic: bool,
}

impl ShockData {
    pub fn lower(&self) -> f64 {
        self.u_left.min(self.u_right)
    }

    pub fn upper(&self) -> f64 {
        self.u_left.max(self.u_right)
    }

    /// `E(w) = f(w) - f(v_sonic) - sigma (w - v_sonic)`.
    pub fn potential(&self, w: f64) -> f64 {
        let h = w - self.v_sonic;
        self.taylor
            .iter()
            .skip(2)
            .rev()
            .fold(0.0, |acc, &c| acc * h + c)
            * h
            * h
    }

    /// Measure-preserving level reassignment across the shock: the unique
    /// level on the other side of `v_sonic` with the same potential.
    pub fn bounce(&self, v: f64) -> Result<Bounce> {
        let (lo, hi) = (self.lower(), self.upper());
        if !(v > lo && v < hi) {
            return Err(Error::LevelOutsideShock {
                v,
                u_left: self.u_left,
                u_right: self.u_right,
            });
        }
        if v == self.v_sonic {
            return Ok(Bounce {
                level: v,
                sonic: true,
            });
        }
        let target = self.potential(v);
        let g = |w: f64| self.potential(w) - target;
        let level = if v > self.v_sonic {
            quad::bisect(g, lo, self.v_sonic, 0.0)
        } else {
            quad::bisect(g, self.v_sonic, hi, 0.0)
        };
        Ok(Bounce {
            level,
            sonic: false,
        })
    }

    /// Entropy production per unit time carried by the front:
    /// `sigma (eta(u_l) - eta(u_r)) - (q(u_l) - q(u_r))`.
    pub fn dissipation_rate(&self, pair: &EntropyPair) -> f64 {
        self.sigma * (pair.eta(self.u_left) - pair.eta(self.u_right))
            - (pair.q(self.u_left) - pair.q(self.u_right))
    }
}

/// Normalization point of an entropy pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Anchor {
    /// `eta(0) = q(0) = 0`, pairs with hypograph representations.
    ZeroAt0,
    /// `eta(1) = q(1) = 0`, pairs with epigraph representations.
    ZeroAt1,
}

impl Anchor {
    fn point(self) -> f64 {
        match self {
            Anchor::ZeroAt0 => 0.0,
            Anchor::ZeroAt1 => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Anchor::ZeroAt0 => "zero-at-0",
            Anchor::ZeroAt1 => "zero-at-1",
        }
    }
}

pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Which entropy to build.
#[derive(Clone)]
pub enum EntropyKind {
    /// `eta = u^2 / 2`
    Quadratic,
    /// `eta = (u - a)^+`, `q = (f(u) - f(a)) 1_{u >= a}`
    Kruzkov { a: f64 },
    /// `eta = (a - u)^+`, `q = (f(a) - f(u)) 1_{u <= a}`
    KruzkovDown { a: f64 },
    /// User-supplied entropy and derivative; the flux is built by quadrature.
    Custom { eta: RealFn, deta: RealFn },
}

impl fmt::Debug for EntropyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EntropyKind::Quadratic => write!(f, "Quadratic"),
            EntropyKind::Kruzkov { a } => write!(f, "Kruzkov({a})"),
            EntropyKind::KruzkovDown { a } => write!(f, "KruzkovDown({a})"),
            EntropyKind::Custom { .. } => write!(f, "Custom"),
        }
    }
}

/// An entropy/entropy-flux pair normalized at one end of the value slab.
///
/// `deta` follows the right-limit convention at kinks; `deta_left` gives the
/// left limit.
#[derive(Clone, Debug)]
pub struct EntropyPair {
    kind: EntropyKind,
    anchor: Anchor,
    flux: Flux,
    eta_offset: f64,
    q_offset: f64,
}

impl EntropyPair {
    pub fn new(kind: EntropyKind, flux: &Flux, anchor: Anchor) -> Result<Self> {
        Self::build(kind, flux, anchor, false)
    }

    /// Like [`EntropyPair::new`] but rejects non-convex custom entropies.
    pub fn new_convex(kind: EntropyKind, flux: &Flux, anchor: Anchor) -> Result<Self> {
        Self::build(kind, flux, anchor, true)
    }

    pub fn quadratic(flux: &Flux, anchor: Anchor) -> Self {
        Self::new(EntropyKind::Quadratic, flux, anchor).expect("quadratic entropy is valid")
    }

    fn build(kind: EntropyKind, flux: &Flux, anchor: Anchor, require_convex: bool) -> Result<Self> {
        match &kind {
            EntropyKind::Kruzkov { a } | EntropyKind::KruzkovDown { a } => {
                if !(0.0..=1.0).contains(a) {
                    return Err(Error::InvalidFlux(format!(
                        "Kruzkov level {a} outside [0, 1]"
                    )));
                }
            }
            EntropyKind::Custom { deta, .. } if require_convex => {
                let mut prev = deta(0.0);
                for i in 1..=CONVEXITY_SAMPLES {
                    let u = i as f64 / CONVEXITY_SAMPLES as f64;
                    let d = deta(u);
                    if d < prev - 1e-12 {
                        return Err(Error::NonConvexEntropy(u));
                    }
                    prev = d;
                }
            }
            _ => {}
        }
        let mut pair = EntropyPair {
            kind,
            anchor,
            flux: flux.clone(),
            eta_offset: 0.0,
            q_offset: 0.0,
        };
        pair.eta_offset = pair.raw_eta(anchor.point());
        pair.q_offset = pair.raw_q(anchor.point());
        Ok(pair)
    }

    pub fn kind(&self) -> &EntropyKind {
        &self.kind
    }

    pub fn anchor(&self) -> Anchor {
        self.anchor
    }

    fn raw_eta(&self, u: f64) -> f64 {
        match &self.kind {
            EntropyKind::Quadratic => 0.5 * u * u,
            EntropyKind::Kruzkov { a } => (u - a).max(0.0),
            EntropyKind::KruzkovDown { a } => (a - u).max(0.0),
            EntropyKind::Custom { eta, .. } => eta(u),
        }
    }

    fn raw_q(&self, u: f64) -> f64 {
        match &self.kind {
            // q = int_0^u v f'(v) dv = sum_k k c_k u^{k+1} / (k+1)
            EntropyKind::Quadratic => self
                .flux
                .coeffs()
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| k as f64 * c * u.powi(k as i32 + 1) / (k as f64 + 1.0))
                .sum(),
            EntropyKind::Kruzkov { a } => {
                if u >= *a {
                    self.flux.f(u) - self.flux.f(*a)
                } else {
                    0.0
                }
            }
            EntropyKind::KruzkovDown { a } => {
                if u <= *a {
                    self.flux.f(*a) - self.flux.f(u)
                } else {
                    0.0
                }
            }
            EntropyKind::Custom { deta, .. } => {
                let g = |v: f64| deta(v) * self.flux.df(v);
                quad::adaptive_simpson(&g, 0.0, u, 1e-12)
            }
        }
    }

    pub fn eta(&self, u: f64) -> f64 {
        self.raw_eta(u) - self.eta_offset
    }

    pub fn q(&self, u: f64) -> f64 {
        self.raw_q(u) - self.q_offset
    }

    /// Right limit of `eta'`.
    pub fn deta(&self, u: f64) -> f64 {
        match &self.kind {
            EntropyKind::Quadratic => u,
            EntropyKind::Kruzkov { a } => {
                if u >= *a {
                    1.0
                } else {
                    0.0
                }
            }
            EntropyKind::KruzkovDown { a } => {
                if u < *a {
                    -1.0
                } else {
                    0.0
                }
            }
            EntropyKind::Custom { deta, .. } => deta(u),
        }
    }

    /// Left limit of `eta'`.
    pub fn deta_left(&self, u: f64) -> f64 {
        match &self.kind {
            EntropyKind::Kruzkov { a } => {
                if u > *a {
                    1.0
                } else {
                    0.0
                }
            }
            EntropyKind::KruzkovDown { a } => {
                if u <= *a {
                    -1.0
                } else {
                    0.0
                }
            }
            _ => self.deta(u),
        }
    }
}
