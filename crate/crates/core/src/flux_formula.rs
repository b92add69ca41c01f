//! Entropy flux across a Lipschitz curve `Σ = {x = s(t)}`, evaluated from the
//! Lagrangian side (crossings and bounces of ensemble curves) and from the
//! Eulerian side (traces of the solution).
//!
//! `Σ⁺` is the region to the right of the graph.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flux_model::{Anchor, EntropyPair};
use crate::front_tracking::FrontSolution;
use crate::lagrangian::{Ensemble, LagCurve, Side};
use crate::par::{self, Exec};
use crate::quad;
use crate::testfn::TestFunction;

/// Distances to `Σ` below this are treated as zero.
pub const ZERO_TOL: f64 = 1e-10;
const TRACE_SLACK: f64 = 1e-10;
const QUAD_TOL: f64 = 1e-9;

/// Piecewise-linear graph `x = s(t)` on `[t_a, t_b]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct Surface {
    vertices: Vec<(f64, f64)>,
}

impl TryFrom<Vec<(f64, f64)>> for Surface {
    type Error = Error;

    fn try_from(v: Vec<(f64, f64)>) -> Result<Self> {
        Surface::new(v)
    }
}

impl From<Surface> for Vec<(f64, f64)> {
    fn from(s: Surface) -> Self {
        s.vertices
    }
}

impl Surface {
    /// Vertices `(t, x)` with strictly increasing `t`.
    pub fn new(vertices: Vec<(f64, f64)>) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::InvalidSurface("need at least two vertices".into()));
        }
        if vertices.iter().any(|(t, x)| !t.is_finite() || !x.is_finite()) {
            return Err(Error::InvalidSurface("non-finite vertex".into()));
        }
        if vertices.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidSurface("vertex times must increase".into()));
        }
        Ok(Surface { vertices })
    }

    /// `x = x0` for `t` in `[t_a, t_b]`.
    pub fn vertical(x0: f64, t_a: f64, t_b: f64) -> Result<Self> {
        Surface::new(vec![(t_a, x0), (t_b, x0)])
    }

    /// Straight segment through `(t_a, x_a)` with the given slope.
    pub fn line(t_a: f64, x_a: f64, t_b: f64, slope: f64) -> Result<Self> {
        Surface::new(vec![(t_a, x_a), (t_b, x_a + slope * (t_b - t_a))])
    }

    pub fn vertices(&self) -> &[(f64, f64)] {
        &self.vertices
    }

    pub fn t_range(&self) -> (f64, f64) {
        (self.vertices[0].0, self.vertices.last().unwrap().0)
    }

    fn segment(&self, t: f64) -> usize {
        let k = self.vertices.partition_point(|v| v.0 <= t);
        k.saturating_sub(1).min(self.vertices.len() - 2)
    }

    fn seg_slope(&self, k: usize) -> f64 {
        let (a, b) = (self.vertices[k], self.vertices[k + 1]);
        (b.1 - a.1) / (b.0 - a.0)
    }

    pub fn s(&self, t: f64) -> f64 {
        let k = self.segment(t);
        self.vertices[k].1 + self.seg_slope(k) * (t - self.vertices[k].0)
    }

    /// Right derivative of `s`.
    pub fn slope(&self, t: f64) -> f64 {
        self.seg_slope(self.segment(t))
    }

    pub fn lipschitz_bound(&self) -> f64 {
        (0..self.vertices.len() - 1)
            .map(|k| self.seg_slope(k).abs())
            .fold(0.0, f64::max)
    }

    /// Interior vertex times.
    pub fn breakpoints(&self) -> Vec<f64> {
        let n = self.vertices.len();
        self.vertices[1..n - 1].iter().map(|v| v.0).collect()
    }

    /// Unit normal pointing into `Σ⁺` at time `t`.
    pub fn normal(&self, t: f64) -> (f64, f64) {
        let m = self.slope(t);
        let r = (1.0 + m * m).sqrt();
        (-m / r, 1.0 / r)
    }

    /// Times in `(t_a, t_b)` where `s(t) + offset` meets the line
    /// `x = x0 + c (t - t0)` restricted to `t` in `[lo, hi]`.
    fn meets_line(&self, offset: f64, t0: f64, x0: f64, c: f64, lo: f64, hi: f64) -> Vec<f64> {
        let mut out = Vec::new();
        for k in 0..self.vertices.len() - 1 {
            let (ta, xa) = self.vertices[k];
            let tb = self.vertices[k + 1].0;
            let m = self.seg_slope(k);
            if (m - c).abs() < 1e-15 {
                continue;
            }
            // xa + offset + m (t - ta) = x0 + c (t - t0)
            let t = (x0 - xa - offset + m * ta - c * t0) / (m - c);
            if t >= ta.max(lo) && t <= tb.min(hi) {
                out.push(t);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CrossingClass {
    /// From `Σ⁻` to `Σ⁺`.
    Iplus,
    /// From `Σ⁺` to `Σ⁻`.
    Iminus,
    /// Touch from `Σ⁻` and return.
    Bminus,
    /// Touch from `Σ⁺` and return.
    Bplus,
}

/// One intersection of a curve with `Σ`. For a transverse intersection the
/// entry and exit coincide; a stretch riding on `Σ` is collapsed into one
/// record spanning `[t, t_exit]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossingRecord {
    pub t: f64,
    pub t_exit: f64,
    pub x: f64,
    pub x_exit: f64,
    pub class: CrossingClass,
    pub v_minus: f64,
    pub v_plus: f64,
}

/// Signed distance `x(t) - s(t)` at merged breakpoints, with interior roots
/// inserted. Consecutive samples bound pieces on which the curve has constant
/// level and the distance is linear.
fn distance_samples(curve: &LagCurve, surface: &Surface) -> Vec<(f64, f64)> {
    let (ta, tb) = surface.t_range();
    let mut ts: Vec<f64> = vec![ta, tb];
    ts.extend(curve.times.iter().copied().filter(|&t| t > ta && t < tb));
    ts.extend(surface.breakpoints());
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let snap = |d: f64| if d.abs() <= ZERO_TOL { 0.0 } else { d };
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(ts.len() + 4);
    for t in ts {
        let d = snap(curve.position(t) - surface.s(t));
        if let Some(&(t0, d0)) = out.last() {
            if d0 * d < 0.0 {
                out.push((t0 + (t - t0) * d0 / (d0 - d), 0.0));
            }
        }
        out.push((t, d));
    }
    out
}

/// Maximal runs `[i, j]` of zero samples.
fn zero_runs(pts: &[(f64, f64)]) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut i = 0;
    while i < pts.len() {
        if pts[i].1 == 0.0 {
            let mut j = i;
            while j + 1 < pts.len() && pts[j + 1].1 == 0.0 {
                j += 1;
            }
            runs.push((i, j));
            i = j + 1;
        } else {
            i += 1;
        }
    }
    runs
}

/// Intersections of `curve` with `Σ` inside the open time interval of `Σ`.
/// Contacts at the interval ends are dropped.
pub fn classify_intersections(curve: &LagCurve, surface: &Surface) -> Vec<CrossingRecord> {
    let pts = distance_samples(curve, surface);
    let last = pts.len() - 1;
    zero_runs(&pts)
        .into_iter()
        .filter(|&(i, j)| i > 0 && j < last)
        .map(|(i, j)| {
            let (before, after) = (pts[i - 1].1 < 0.0, pts[j + 1].1 < 0.0);
            let class = match (before, after) {
                (true, false) => CrossingClass::Iplus,
                (false, true) => CrossingClass::Iminus,
                (true, true) => CrossingClass::Bminus,
                (false, false) => CrossingClass::Bplus,
            };
            let (t, t_exit) = (pts[i].0, pts[j].0);
            CrossingRecord {
                t,
                t_exit,
                x: curve.position(t),
                x_exit: curve.position(t_exit),
                class,
                v_minus: curve.level_left(t),
                v_plus: curve.level(t_exit),
            }
        })
        .collect()
}

/// Contributions `[I⁺, I⁻, B⁻]` of one curve to `⟨F⁻, η ⊗ Φ⟩`.
pub fn curve_flux_terms(records: &[CrossingRecord], pair: &EntropyPair, phi: &TestFunction) -> [f64; 3] {
    let mut terms = [0.0; 3];
    for r in records {
        let entry = pair.deta(r.v_minus) * phi.value(r.t, r.x);
        let exit = pair.deta(r.v_plus) * phi.value(r.t_exit, r.x_exit);
        match r.class {
            CrossingClass::Iplus => terms[0] += entry,
            CrossingClass::Iminus => terms[1] -= exit,
            CrossingClass::Bminus => terms[2] += entry - exit,
            CrossingClass::Bplus => {}
        }
    }
    terms
}

/// `Σ_{I⁺} η'(v⁻)Φ - Σ_{I⁻} η'(v⁺)Φ + Σ_{B⁻} (η'(v⁻) - η'(v⁺))Φ`.
pub fn curve_flux_pairing(records: &[CrossingRecord], pair: &EntropyPair, phi: &TestFunction) -> f64 {
    let [a, b, c] = curve_flux_terms(records, pair, phi);
    a + b + c
}

/// The same pairing computed as `-Σ_{t∈Σ} Δ(χψ)(t)`, where `χ` marks the
/// open side `Σ⁻` and `ψ = η'(γ_v) Φ(t, γ_x)`. The jumps on `Σ` are obtained by
/// telescoping: total change of `χψ` minus its continuous variation and its
/// jumps away from `Σ`.
pub fn theta_psi_pairing(curve: &LagCurve, surface: &Surface, pair: &EntropyPair, phi: &TestFunction) -> f64 {
    let pts = distance_samples(curve, surface);
    let n = pts.len();
    let mut anchored = vec![false; n];
    for (i, j) in zero_runs(&pts) {
        if i == 0 || j == n - 1 {
            anchored[i..=j].iter_mut().for_each(|a| *a = true);
        }
    }
    let phi_at = |t: f64| phi.value(t, curve.position(t));
    // chi on the open piece (t_k, t_{k+1})
    let chi: Vec<f64> = (0..n - 1)
        .map(|k| {
            let (d0, d1) = (pts[k].1, pts[k + 1].1);
            let inside = d0 < 0.0 || d1 < 0.0 || (d0 == 0.0 && d1 == 0.0 && anchored[k] && anchored[k + 1]);
            if inside {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let start = chi[0] * pair.deta(curve.level(pts[0].0)) * phi_at(pts[0].0);
    let end = chi[n - 2] * pair.deta(curve.level_left(pts[n - 1].0)) * phi_at(pts[n - 1].0);
    let continuous: f64 = (0..n - 1)
        .filter(|&k| chi[k] == 1.0)
        .map(|k| pair.deta(curve.level(pts[k].0)) * (phi_at(pts[k + 1].0) - phi_at(pts[k].0)))
        .sum();
    let off_surface: f64 = (1..n - 1)
        .filter(|&k| pts[k].1 != 0.0 || anchored[k])
        .map(|k| {
            let t = pts[k].0;
            let p = phi_at(t);
            chi[k] * pair.deta(curve.level(t)) * p - chi[k - 1] * pair.deta(curve.level_left(t)) * p
        })
        .sum();
    -(end - start - continuous - off_surface)
}

fn check_anchor(side: Side, pair: &EntropyPair) -> Result<()> {
    let want = match side {
        Side::Hypograph => Anchor::ZeroAt0,
        Side::Epigraph => Anchor::ZeroAt1,
    };
    if pair.anchor() != want {
        return Err(Error::AnchorMismatch {
            side: side.name(),
            found: pair.anchor().name(),
        });
    }
    Ok(())
}

/// Lagrangian flux split by crossing class, with record counts.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FluxBreakdown {
    pub total: f64,
    pub iplus: f64,
    pub iminus: f64,
    pub bminus: f64,
    pub counts: BTreeMap<String, usize>,
}

/// `∫ ⟨F⁻_γ, η ⊗ Φ⟩ dω(γ)`, negated for epigraph ensembles.
pub fn lagrangian_flux_breakdown(
    ensemble: &Ensemble,
    surface: &Surface,
    pair: &EntropyPair,
    phi: &TestFunction,
    exec: Exec,
) -> Result<FluxBreakdown> {
    check_anchor(ensemble.side, pair)?;
    let sign = match ensemble.side {
        Side::Hypograph => 1.0,
        Side::Epigraph => -1.0,
    };
    let per_curve = par::map(exec, &ensemble.curves, |c| {
        let records = classify_intersections(c, surface);
        let terms = curve_flux_terms(&records, pair, phi);
        let mut counts = [0usize; 4];
        for r in &records {
            counts[r.class as usize] += 1;
        }
        (terms.map(|x| x * c.weight), counts)
    });
    let mut out = FluxBreakdown::default();
    let mut counts = [0usize; 4];
    for (terms, c) in per_curve {
        out.iplus += sign * terms[0];
        out.iminus += sign * terms[1];
        out.bminus += sign * terms[2];
        for k in 0..4 {
            counts[k] += c[k];
        }
    }
    out.total = out.iplus + out.iminus + out.bminus;
    for (name, c) in ["iplus", "iminus", "bminus", "bplus"].into_iter().zip(counts) {
        out.counts.insert(name.to_string(), c);
    }
    Ok(out)
}

pub fn lagrangian_flux(
    ensemble: &Ensemble,
    surface: &Surface,
    pair: &EntropyPair,
    phi: &TestFunction,
    exec: Exec,
) -> Result<f64> {
    lagrangian_flux_breakdown(ensemble, surface, pair, phi, exec).map(|b| b.total)
}

/// Times where the integrands along `s(t) + offset` may be non-smooth.
fn cut_times(sol: &FrontSolution, surface: &Surface, phi: &TestFunction, offset: f64) -> Vec<f64> {
    let (ta, tb) = surface.t_range();
    let mut cuts = surface.breakpoints();
    cuts.extend(sol.event_times(ta, tb));
    cuts.extend(phi.t.knots());
    for f in &sol.fronts {
        cuts.extend(surface.meets_line(offset, f.birth, f.x_birth, f.speed, f.birth, f.death));
    }
    for knot in phi.x.knots() {
        cuts.extend(surface.meets_line(offset, 0.0, knot, 0.0, ta, tb));
    }
    cuts
}

/// `∫ [-s'(t) η(u⁻) + q(u⁻)] Φ(t, s(t)) dt` along `Σ`.
pub fn trace_flux(sol: &FrontSolution, surface: &Surface, pair: &EntropyPair, phi: &TestFunction) -> f64 {
    let (ta, tb) = surface.t_range();
    let integrand = |t: f64| {
        let x = surface.s(t);
        let (u_minus, _) = sol.trace(t, x, TRACE_SLACK);
        (-surface.slope(t) * pair.eta(u_minus) + pair.q(u_minus)) * phi.value(t, x)
    };
    let cuts = cut_times(sol, surface, phi, 0.0);
    quad::piecewise_simpson(&integrand, ta, tb, &cuts, QUAD_TOL)
}

/// `∬ (η(u), q(u)) · ∇G_δ Φ dt dx` with `G_δ = clamp((x - s(t))/δ + 1, 0, 1)`,
/// i.e. the flux averaged over a strip of width `δ` to the left of `Σ`.
pub fn mollified_flux(
    sol: &FrontSolution,
    surface: &Surface,
    pair: &EntropyPair,
    phi: &TestFunction,
    delta: f64,
) -> Result<f64> {
    let (ta, tb) = surface.t_range();
    let x_lo = phi.x.support().0;
    let reach = surface
        .vertices()
        .iter()
        .map(|v| v.1)
        .fold(f64::INFINITY, f64::min);
    if !(delta > 0.0) || reach - delta < x_lo && phi_touches(surface, phi) {
        return Err(Error::RampTooWide { delta });
    }
    let integrand = |t: f64| {
        let s = surface.s(t);
        let m = surface.slope(t);
        let pt = phi.t.value(t);
        if pt == 0.0 {
            return 0.0;
        }
        sol.pieces(t, s - delta, s)
            .into_iter()
            .map(|(a, b, u)| (-m * pair.eta(u) + pair.q(u)) * phi.x.integral(a, b))
            .sum::<f64>()
            * pt
            / delta
    };
    let mut cuts = cut_times(sol, surface, phi, 0.0);
    cuts.extend(cut_times(sol, surface, phi, -delta));
    Ok(quad::piecewise_simpson(&integrand, ta, tb, &cuts, QUAD_TOL))
}

/// Whether `Φ` is nonzero somewhere along `Σ`.
fn phi_touches(surface: &Surface, phi: &TestFunction) -> bool {
    let ((pa, pb), (xa, xb)) = phi.support();
    let (ta, tb) = surface.t_range();
    if pb <= ta || pa >= tb {
        return false;
    }
    surface.vertices().iter().any(|v| v.1 > xa && v.1 < xb)
        || surface.vertices().windows(2).any(|w| w[0].1.min(w[1].1) < xb && w[0].1.max(w[1].1) > xa)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntersectionStats {
    pub max_count: usize,
    /// count -> number of curves
    pub histogram: BTreeMap<usize, usize>,
    /// `(ε, weight of near-tangential curves)`
    pub tangency: Vec<(f64, f64)>,
    /// Least-squares slope of tangency mass against `ε`.
    pub fit_slope: f64,
    pub fit_r2: f64,
}

/// Whether some piece of `curve` moves within `eps` of the slope of `Σ`
/// while lying within `eps` of it.
fn near_tangent(curve: &LagCurve, surface: &Surface, eps: f64) -> bool {
    let pts = distance_samples(curve, surface);
    pts.windows(2).any(|w| {
        let (t0, d0) = w[0];
        let (t1, d1) = w[1];
        let mid = 0.5 * (t0 + t1);
        let rel = curve.slopes[curve.segment(mid)] - surface.slope(mid);
        let dist = if d0 * d1 <= 0.0 { 0.0 } else { d0.abs().min(d1.abs()) };
        t1 > t0 && rel.abs() <= eps && dist <= eps
    })
}

/// Ordinary least squares `y = a + b x`; returns `(b, R²)`.
pub fn linear_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return (0.0, 0.0);
    }
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (sxy / sxx, r2)
}

pub fn intersection_statistics(ensemble: &Ensemble, surface: &Surface, epsilons: &[f64], exec: Exec) -> IntersectionStats {
    let counts = par::map(exec, &ensemble.curves, |c| classify_intersections(c, surface).len());
    let mut histogram = BTreeMap::new();
    for &c in &counts {
        *histogram.entry(c).or_insert(0) += 1;
    }
    let tangency: Vec<(f64, f64)> = epsilons
        .iter()
        .map(|&eps| {
            let mass = par::ordered_sum(exec, &ensemble.curves, |c| {
                if near_tangent(c, surface, eps) {
                    c.weight
                } else {
                    0.0
                }
            });
            (eps, mass)
        })
        .collect();
    let (fit_slope, fit_r2) = if tangency.len() >= 2 {
        linear_fit(&tangency)
    } else {
        (0.0, 0.0)
    };
    IntersectionStats {
        max_count: counts.iter().copied().max().unwrap_or(0),
        histogram,
        tangency,
        fit_slope,
        fit_r2,
    }
}

/// Both sides of the flux identity for one surface and entropy pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxReport {
    pub lagrangian: FluxBreakdown,
    pub trace: f64,
    pub mollified: Vec<(f64, f64)>,
    pub abs_error: f64,
    pub rel_error: f64,
}

pub fn compare_fluxes(
    sol: &FrontSolution,
    ensemble: &Ensemble,
    surface: &Surface,
    pair: &EntropyPair,
    phi: &TestFunction,
    deltas: &[f64],
    exec: Exec,
) -> Result<FluxReport> {
    let lagrangian = lagrangian_flux_breakdown(ensemble, surface, pair, phi, exec)?;
    let trace = trace_flux(sol, surface, pair, phi);
    let mollified = deltas
        .iter()
        .map(|&d| mollified_flux(sol, surface, pair, phi, d).map(|m| (d, m)))
        .collect::<Result<Vec<_>>>()?;
    let abs_error = (lagrangian.total - trace).abs();
    Ok(FluxReport {
        rel_error: if trace != 0.0 { abs_error / trace.abs() } else { f64::NAN },
        lagrangian,
        trace,
        mollified,
        abs_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux_model::Flux;
    use crate::front_tracking::{evolve, InitialData, InteractionMode, JumpMode, DEFAULT_MESH};
    use crate::lagrangian::{build_ensemble, evolve_curve, GridSpec};
    use approx::assert_abs_diff_eq;

    fn shock_solution(horizon: f64) -> FrontSolution {
        let flux = Flux::burgers().unwrap();
        let data = InitialData::riemann(1.0, 0.0, 1.0, JumpMode::Entropic).unwrap();
        evolve(&flux, &data, horizon, DEFAULT_MESH, InteractionMode::Entropic).unwrap()
    }

    fn flat() -> TestFunction {
        TestFunction::plateau(-1.0, 10.0, -10.0, 10.0, 0.5)
    }

    #[test]
    fn surface_validation_and_geometry() {
        assert!(Surface::new(vec![(0.0, 0.0)]).is_err());
        assert!(Surface::new(vec![(0.5, 0.0), (0.5, 1.0)]).is_err());
        let s = Surface::new(vec![(0.0, 0.0), (1.0, 1.0), (2.0, 0.0)]).unwrap();
        assert_abs_diff_eq!(s.s(0.5), 0.5);
        assert_abs_diff_eq!(s.s(1.5), 0.5);
        assert_eq!(s.breakpoints(), vec![1.0]);
        assert_abs_diff_eq!(s.lipschitz_bound(), 1.0);
        let (nt, nx) = s.normal(0.5);
        assert!(nx > 0.0 && nt < 0.0);
        let parsed: Surface = serde_json::from_str("[[0.0, 1.0], [1.0, 2.0]]").unwrap();
        assert_abs_diff_eq!(parsed.slope(0.3), 1.0);
    }

    #[test]
    fn straight_crossing_is_iplus() {
        let c = LagCurve::straight(0, 1.0, 0.0, 1.0, 1.0, 1.0);
        let s = Surface::vertical(0.5, 0.0, 1.0).unwrap();
        let r = classify_intersections(&c, &s);
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].class, CrossingClass::Iplus);
        assert_abs_diff_eq!(r[0].t, 0.5, epsilon = 1e-15);
        assert_eq!((r[0].v_minus, r[0].v_plus), (1.0, 1.0));
        let eta = EntropyPair::quadratic(&Flux::burgers().unwrap(), Anchor::ZeroAt0);
        assert_abs_diff_eq!(curve_flux_pairing(&r, &eta, &flat()), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn bounce_on_shock_path_is_bminus() {
        let sol = shock_solution(6.0);
        let c = evolve_curve(&sol, Side::Hypograph, 0, 0.0, 0.75, 1.0).unwrap();
        let s = Surface::line(0.0, 1.0, 6.0, 0.5).unwrap();
        let r = classify_intersections(&c, &s);
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].class, CrossingClass::Bminus);
        assert_abs_diff_eq!(r[0].t, 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r[0].v_minus, 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(r[0].v_plus, 0.25, epsilon = 1e-12);
        let eta = EntropyPair::quadratic(&sol.flux, Anchor::ZeroAt0);
        assert_abs_diff_eq!(curve_flux_pairing(&r, &eta, &flat()), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(theta_psi_pairing(&c, &s, &eta, &flat()), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn curve_left_of_surface_has_no_records() {
        let c = LagCurve::straight(0, 1.0, -1.0, 0.1, 0.1, 1.0);
        let s = Surface::vertical(2.0, 0.0, 1.0).unwrap();
        assert!(classify_intersections(&c, &s).is_empty());
    }

    #[test]
    fn bplus_only_pairs_to_zero() {
        let r = CrossingRecord {
            t: 0.5,
            t_exit: 0.5,
            x: 0.0,
            x_exit: 0.0,
            class: CrossingClass::Bplus,
            v_minus: 0.2,
            v_plus: 0.8,
        };
        let eta = EntropyPair::quadratic(&Flux::burgers().unwrap(), Anchor::ZeroAt0);
        assert_eq!(curve_flux_pairing(&[r], &eta, &flat()), 0.0);
    }

    #[test]
    fn coincidence_interval_collapses_to_one_record() {
        // rides on Σ over [0.4, 0.6] then leaves to the right
        let c = LagCurve {
            id: 0,
            weight: 1.0,
            times: vec![0.0, 0.4, 0.6, 1.0],
            xs: vec![-0.4, 0.0, 0.0, 0.4],
            levels: vec![1.0, 0.0, 1.0],
            slopes: vec![1.0, 0.0, 1.0],
            jumps: Vec::new(),
        };
        let s = Surface::vertical(0.0, 0.0, 1.0).unwrap();
        let r = classify_intersections(&c, &s);
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].class, CrossingClass::Iplus);
        assert_eq!((r[0].t, r[0].t_exit), (0.4, 0.6));
        let eta = EntropyPair::quadratic(&Flux::burgers().unwrap(), Anchor::ZeroAt0);
        let phi = TestFunction::plateau(0.0, 1.0, -1.0, 1.0, 0.3);
        assert_abs_diff_eq!(
            curve_flux_pairing(&r, &eta, &phi),
            theta_psi_pairing(&c, &s, &eta, &phi),
            epsilon = 1e-14
        );
    }

    #[test]
    fn steady_far_surface_sees_nothing() {
        let sol = shock_solution(1.0);
        let g = GridSpec {
            nx: 64,
            nv: 64,
            x_min: -1.0,
            x_max: 3.0,
            seed: 1,
        };
        let e = build_ensemble(&sol, Side::Hypograph, g, Exec::Sequential).unwrap();
        let eta = EntropyPair::quadratic(&sol.flux, Anchor::ZeroAt0);
        let s = Surface::vertical(2.0, 0.0, 1.0).unwrap();
        assert_eq!(lagrangian_flux(&e, &s, &eta, &flat(), Exec::Sequential).unwrap(), 0.0);
        let mut empty = e.clone();
        empty.curves.clear();
        assert_eq!(lagrangian_flux(&empty, &s, &eta, &flat(), Exec::Sequential).unwrap(), 0.0);
    }

    #[test]
    fn anchor_mismatch_is_an_error() {
        let sol = shock_solution(1.0);
        let g = GridSpec {
            nx: 4,
            nv: 4,
            x_min: 0.0,
            x_max: 2.0,
            seed: 1,
        };
        let e = build_ensemble(&sol, Side::Epigraph, g, Exec::Sequential).unwrap();
        let eta = EntropyPair::quadratic(&sol.flux, Anchor::ZeroAt0);
        let s = Surface::vertical(1.5, 0.1, 0.9).unwrap();
        assert!(matches!(
            lagrangian_flux(&e, &s, &eta, &flat(), Exec::Sequential),
            Err(Error::AnchorMismatch { .. })
        ));
    }

    #[test]
    fn trace_flux_examples() {
        let sol = shock_solution(1.0);
        let eta = EntropyPair::quadratic(&sol.flux, Anchor::ZeroAt0);
        let s = Surface::vertical(1.25, 0.6, 0.9).unwrap();
        assert_abs_diff_eq!(trace_flux(&sol, &s, &eta, &flat()), 0.1, epsilon = 1e-9);
        let path = Surface::line(0.0, 1.0, 1.0, 0.5).unwrap();
        assert_abs_diff_eq!(trace_flux(&sol, &path, &eta, &flat()), 1.0 / 12.0, epsilon = 1e-9);
        let zero = evolve(
            &sol.flux,
            &InitialData::constant(0.0).unwrap(),
            1.0,
            DEFAULT_MESH,
            InteractionMode::Entropic,
        )
        .unwrap();
        assert_eq!(trace_flux(&zero, &s, &eta, &flat()), 0.0);
        assert_eq!(mollified_flux(&zero, &s, &eta, &flat(), 1e-3).unwrap(), 0.0);
    }

    #[test]
    fn mollified_flux_converges_first_order() {
        let sol = shock_solution(1.0);
        let eta = EntropyPair::quadratic(&sol.flux, Anchor::ZeroAt0);
        let phi = flat();
        // the shock crosses this surface at t = 0.5
        let s = Surface::vertical(1.25, 0.3, 0.9).unwrap();
        let exact = trace_flux(&sol, &s, &eta, &phi);
        let e1 = (mollified_flux(&sol, &s, &eta, &phi, 0.02).unwrap() - exact).abs();
        let e2 = (mollified_flux(&sol, &s, &eta, &phi, 0.01).unwrap() - exact).abs();
        assert!(e1 > 0.0);
        assert!((e2 / e1 - 0.5).abs() < 0.05, "{e1} {e2}");
        assert!((mollified_flux(&sol, &s, &eta, &phi, 1e-3).unwrap() - exact).abs() < 1e-2);
    }

    #[test]
    fn ramp_too_wide_rejected() {
        let sol = shock_solution(1.0);
        let eta = EntropyPair::quadratic(&sol.flux, Anchor::ZeroAt0);
        let phi = TestFunction::plateau(0.0, 1.0, 1.0, 1.5, 0.1);
        let s = Surface::vertical(1.25, 0.3, 0.9).unwrap();
        assert!(matches!(
            mollified_flux(&sol, &s, &eta, &phi, 0.5),
            Err(Error::RampTooWide { .. })
        ));
        assert!(mollified_flux(&sol, &s, &eta, &phi, -1.0).is_err());
    }

    #[test]
    fn parallel_lines_have_no_intersections() {
        let curves: Vec<LagCurve> = (0..10)
            .map(|i| LagCurve::straight(i, 0.1, i as f64 * 0.1, 0.5, 0.5, 1.0))
            .collect();
        let sol = shock_solution(1.0);
        let mut e = build_ensemble(
            &sol,
            Side::Hypograph,
            GridSpec {
                nx: 1,
                nv: 1,
                x_min: 0.0,
                x_max: 1.0,
                seed: 0,
            },
            Exec::Sequential,
        )
        .unwrap();
        e.curves = curves;
        let s = Surface::line(0.0, 5.0, 1.0, 0.5).unwrap();
        let st = intersection_statistics(&e, &s, &[0.1, 0.05], Exec::Sequential);
        assert_eq!(st.max_count, 0);
        assert_eq!(st.histogram.get(&0), Some(&10));
    }

    #[test]
    fn linear_fit_recovers_line() {
        let (b, r2) = linear_fit(&[(0.0, 1.0), (1.0, 3.0), (2.0, 5.0)]);
        assert_abs_diff_eq!(b, 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r2, 1.0, epsilon = 1e-14);
    }
}
