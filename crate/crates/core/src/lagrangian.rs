//! Weighted curve ensembles representing the hypograph `{v < u}` or the
//! epigraph `{v > u}` of a front-tracking solution.
//!
//! A curve `(x(t), v(t))` moves at speed `f'(v)` and keeps its level until it
//! meets a front. If its level is still inside the represented region on the
//! far side it crosses unchanged; otherwise the level is reassigned by the
//! shock's bounce map and the curve turns back. The bounce map conserves the
//! flux of levels through the front, which is what keeps the time-`t` pushforward
//! equal to Lebesgue measure on the region.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::front_tracking::{FrontSolution, Slab};
use crate::par::{self, Exec};

/// Positions closer than this are considered coincident.
pub const POSITION_SLACK: f64 = 1e-10;
const LOCATE_TOL: f64 = 1e-11;
const MAX_STEPS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Hypograph,
    Epigraph,
}

impl Side {
    /// Whether level `v` lies in the region above/below the state `u`.
    pub fn contains(self, v: f64, u: f64) -> bool {
        match self {
            Side::Hypograph => v < u,
            Side::Epigraph => v > u,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Side::Hypograph => "hypograph",
            Side::Epigraph => "epigraph",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpCause {
    /// Bounce off a front approached from its left.
    BounceLeft,
    /// Bounce off a front approached from its right.
    BounceRight,
    /// Level exactly sonic at a front; zero-size jump.
    SonicFlag,
}

impl JumpCause {
    pub fn name(self) -> &'static str {
        match self {
            JumpCause::BounceLeft => "bounce_left",
            JumpCause::BounceRight => "bounce_right",
            JumpCause::SonicFlag => "sonic_flag",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelJump {
    pub t: f64,
    pub x: f64,
    pub v_minus: f64,
    pub v_plus: f64,
    pub cause: JumpCause,
    /// Front responsible for the jump.
    pub front: usize,
}

/// Piecewise-linear position, piecewise-constant level.
///
/// Segment `k` spans `[times[k], times[k+1]]` at level `levels[k]` with
/// slope `slopes[k] = f'(levels[k])`.
#[derive(Debug, Clone, PartialEq)]
pub struct LagCurve {
    pub id: usize,
    pub weight: f64,
    pub times: Vec<f64>,
    pub xs: Vec<f64>,
    pub levels: Vec<f64>,
    pub slopes: Vec<f64>,
    pub jumps: Vec<LevelJump>,
}

impl LagCurve {
    /// Straight curve of constant level; mostly useful for tests and
    /// hand-built detectors.
    pub fn straight(id: usize, weight: f64, x0: f64, level: f64, slope: f64, horizon: f64) -> Self {
        LagCurve {
            id,
            weight,
            times: vec![0.0, horizon],
            xs: vec![x0, x0 + slope * horizon],
            levels: vec![level],
            slopes: vec![slope],
            jumps: Vec::new(),
        }
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Segment containing `t`, preferring the later one at breakpoints.
    pub fn segment(&self, t: f64) -> usize {
        let k = self.times.partition_point(|&s| s <= t);
        k.saturating_sub(1).min(self.levels.len() - 1)
    }

    pub fn position(&self, t: f64) -> f64 {
        let k = self.segment(t);
        self.xs[k] + self.slopes[k] * (t - self.times[k])
    }

    /// Right-continuous level.
    pub fn level(&self, t: f64) -> f64 {
        self.levels[self.segment(t)]
    }

    /// Left limit of the level.
    pub fn level_left(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s < t);
        self.levels[k.saturating_sub(1).min(self.levels.len() - 1)]
    }

    pub fn total_variation(&self) -> f64 {
        self.jumps.iter().map(|j| (j.v_plus - j.v_minus).abs()).sum()
    }

    /// Largest `|x(t2) - x(t1)| / |t2 - t1|` over segments.
    pub fn lipschitz_constant(&self) -> f64 {
        self.slopes.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    /// Worst violation of the slope law `slope = f'(level)` and of position
    /// consistency between breakpoints.
    pub fn slope_residual(&self, df: impl Fn(f64) -> f64) -> f64 {
        (0..self.levels.len())
            .map(|k| {
                let law = (self.slopes[k] - df(self.levels[k])).abs();
                let dt = self.times[k + 1] - self.times[k];
                let drift = (self.xs[k + 1] - self.xs[k] - self.slopes[k] * dt).abs();
                law.max(drift)
            })
            .fold(0.0, f64::max)
    }
}

/// Sampling grid for an ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub nv: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub seed: u64,
}

impl GridSpec {
    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.nx as f64
    }

    pub fn dv(&self) -> f64 {
        1.0 / self.nv as f64
    }
}

/// Axis-aligned rectangle in `(x, v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub v0: f64,
    pub v1: f64,
}

impl Rect {
    pub fn contains(&self, x: f64, v: f64) -> bool {
        x >= self.x0 && x < self.x1 && v >= self.v0 && v < self.v1
    }

    pub fn perimeter(&self) -> f64 {
        2.0 * ((self.x1 - self.x0) + (self.v1 - self.v0))
    }
}

/// `per_axis x per_axis` congruent rectangles tiling `[x0, x1] x [0, 1]`.
pub fn dyadic_rectangles(x0: f64, x1: f64, per_axis: usize) -> Vec<Rect> {
    let (hx, hv) = ((x1 - x0) / per_axis as f64, 1.0 / per_axis as f64);
    (0..per_axis)
        .flat_map(|i| {
            (0..per_axis).map(move |j| Rect {
                x0: x0 + i as f64 * hx,
                x1: x0 + (i + 1) as f64 * hx,
                v0: j as f64 * hv,
                v1: (j + 1) as f64 * hv,
            })
        })
        .collect()
}

/// Exact area of `rect` intersected with the region of `side` at time `t`.
pub fn region_area(sol: &FrontSolution, side: Side, t: f64, rect: &Rect) -> f64 {
    let height = rect.v1 - rect.v0;
    sol.pieces(t, rect.x0, rect.x1)
        .into_iter()
        .map(|(a, b, u)| {
            let h = match side {
                Side::Hypograph => u - rect.v0,
                Side::Epigraph => rect.v1 - u,
            };
            (b - a) * h.clamp(0.0, height)
        })
        .sum()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EnsembleDiagnostics {
    pub sonic_flags: usize,
    /// Curves found sitting on a front at a slab boundary whose side had to
    /// be inferred from the region rule.
    pub ambiguous_locates: usize,
    pub degenerate_bounces: usize,
}

/// Discrete surrogate for a Lagrangian representation.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub side: Side,
    pub grid: GridSpec,
    pub horizon: f64,
    pub s_max: f64,
    pub curves: Vec<LagCurve>,
    pub diagnostics: EnsembleDiagnostics,
}

#[derive(Default)]
struct CurveDiag {
    sonic: usize,
    ambiguous: usize,
    degenerate: usize,
}

/// Which gap of `slab` holds a curve at `(t, x)` with level `v`.
fn locate(sol: &FrontSolution, slab: &Slab, side: Side, t: f64, x: f64, v: f64) -> (usize, bool) {
    let tol = LOCATE_TOL * x.abs().max(1.0);
    let pos = |j: usize| sol.fronts[slab.active[j]].position(t);
    let n = slab.active.len();
    let lo = (0..n).take_while(|&j| pos(j) < x - tol).count();
    let hi = lo + (lo..n).take_while(|&j| pos(j) <= x + tol).count();
    if lo == hi {
        return (lo, false);
    }
    let c = sol.flux.df(v);
    let speed = |j: usize| sol.fronts[slab.active[j]].speed;
    let fits = |h: usize| side.contains(v, sol.gap_state(slab, h));
    // prefer a gap whose coincident neighbors separate from the curve
    let separating = (lo..=hi).find(|&h| {
        fits(h) && (h == hi || c <= speed(h)) && (h == lo || c >= speed(h - 1))
    });
    let gap = separating
        .or_else(|| (lo..=hi).find(|&h| fits(h)))
        .unwrap_or(lo);
    (gap, true)
}

/// Evolve one curve from `(x0, v0)` at `t = 0` through the solution.
pub fn evolve_curve(
    sol: &FrontSolution,
    side: Side,
    id: usize,
    x0: f64,
    v0: f64,
    weight: f64,
) -> Result<LagCurve> {
    evolve_curve_diag(sol, side, id, x0, v0, weight).map(|(c, _)| c)
}

fn evolve_curve_diag(
    sol: &FrontSolution,
    side: Side,
    id: usize,
    x0: f64,
    v0: f64,
    weight: f64,
) -> Result<(LagCurve, CurveDiag)> {
    if !side.contains(v0, sol.initial.value_at(x0)) || !(0.0..=1.0).contains(&v0) {
        return Err(Error::StartOutsideRegion { id, x0, v0 });
    }
    let flux = &sol.flux;
    let mut diag = CurveDiag::default();
    let mut curve = LagCurve {
        id,
        weight,
        times: vec![0.0],
        xs: vec![x0],
        levels: Vec::new(),
        slopes: Vec::new(),
        jumps: Vec::new(),
    };
    let (mut t, mut x, mut v) = (0.0, x0, v0);
    let mut c = flux.df(v);
    let mut steps = 0usize;
    // bounding front ids from the previous slab, for logical relocation
    let mut bounds: (Option<usize>, Option<usize>) = (None, None);

    for (k, slab) in sol.slabs.iter().enumerate() {
        let n = slab.active.len();
        let index_of = |id: Option<usize>| id.and_then(|id| slab.active.iter().position(|&a| a == id));
        let mut gap = match (k, index_of(bounds.1), index_of(bounds.0)) {
            (0, ..) => locate(sol, slab, side, t, x, v).0,
            (_, Some(r), _) => r,
            (_, None, Some(l)) => l + 1,
            _ => {
                let (g, ambiguous) = locate(sol, slab, side, t, x, v);
                diag.ambiguous += ambiguous as usize;
                g
            }
        };
        loop {
            steps += 1;
            if steps > MAX_STEPS {
                return Err(Error::RunawayCurve(id));
            }
            let mut hit: Option<(f64, bool)> = None;
            if gap > 0 {
                let front = &sol.fronts[slab.active[gap - 1]];
                if front.speed > c {
                    let dt = ((x - front.position(t)) / (front.speed - c)).max(0.0);
                    hit = Some((dt, false));
                }
            }
            if gap < n {
                let front = &sol.fronts[slab.active[gap]];
                if c > front.speed {
                    let dt = ((front.position(t) - x) / (c - front.speed)).max(0.0);
                    if hit.is_none_or(|(d, _)| dt < d) {
                        hit = Some((dt, true));
                    }
                }
            }
            let Some((dt, from_left)) = hit.filter(|&(dt, _)| t + dt < slab.t1) else {
                x += c * (slab.t1 - t);
                t = slab.t1;
                break;
            };
            x += c * dt;
            t += dt;
            let front_idx = if from_left { gap } else { gap - 1 };
            let front = &sol.fronts[slab.active[front_idx]];
            let far = if from_left {
                front.u_right
            } else {
                front.u_left
            };
            if side.contains(v, far) {
                gap = if from_left { gap + 1 } else { gap - 1 };
                continue;
            }
            let (level, cause) = match front.shock.bounce(v) {
                Ok(b) if b.sonic => (b.level, JumpCause::SonicFlag),
                Ok(b) => (
                    b.level,
                    if from_left {
                        JumpCause::BounceLeft
                    } else {
                        JumpCause::BounceRight
                    },
                ),
                Err(_) => {
                    // level on the boundary of the jump: a null event, cross it
                    diag.degenerate += 1;
                    gap = if from_left { gap + 1 } else { gap - 1 };
                    continue;
                }
            };
            if cause == JumpCause::SonicFlag {
                diag.sonic += 1;
            }
            curve.levels.push(v);
            curve.slopes.push(c);
            curve.times.push(t);
            curve.xs.push(x);
            curve.jumps.push(LevelJump {
                t,
                x,
                v_minus: v,
                v_plus: level,
                cause,
                front: front.id,
            });
            v = level;
            c = flux.df(v);
        }
        bounds = (
            gap.checked_sub(1).map(|g| slab.active[g]),
            slab.active.get(gap).copied(),
        );
    }
    curve.levels.push(v);
    curve.slopes.push(c);
    curve.times.push(sol.horizon);
    curve.xs.push(x);
    Ok((curve, diag))
}

/// Jittered cell representatives of the region at `t = 0`, in cell order.
pub fn sample_starts(sol: &FrontSolution, side: Side, grid: &GridSpec) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(grid.seed);
    let (dx, dv) = (grid.dx(), grid.dv());
    let mut starts = Vec::new();
    for i in 0..grid.nx {
        for j in 0..grid.nv {
            let (jx, jv): (f64, f64) = (rng.gen(), rng.gen());
            let x = grid.x_min + (i as f64 + jx) * dx;
            let v = (j as f64 + jv) * dv;
            if side.contains(v, sol.initial.value_at(x)) {
                starts.push((x, v));
            }
        }
    }
    starts
}

/// Sample and evolve an ensemble.
pub fn build_ensemble(sol: &FrontSolution, side: Side, grid: GridSpec, exec: Exec) -> Result<Ensemble> {
    if grid.nx == 0 || grid.nv == 0 {
        return Err(Error::InvalidGrid("Nx and Nv must be at least 1".into()));
    }
    if !(grid.x_max > grid.x_min) {
        return Err(Error::InvalidGrid(format!(
            "empty x-window [{}, {}]",
            grid.x_min, grid.x_max
        )));
    }
    let weight = grid.dx() * grid.dv();
    let starts = sample_starts(sol, side, &grid);
    let evolved = par::map_range(exec, starts.len(), |id| {
        let (x0, v0) = starts[id];
        evolve_curve_diag(sol, side, id, x0, v0, weight)
    });
    let mut curves = Vec::with_capacity(evolved.len());
    let mut diagnostics = EnsembleDiagnostics::default();
    for result in evolved {
        let (curve, d) = result?;
        diagnostics.sonic_flags += d.sonic;
        diagnostics.ambiguous_locates += d.ambiguous;
        diagnostics.degenerate_bounces += d.degenerate;
        curves.push(curve);
    }
    Ok(Ensemble {
        side,
        grid,
        horizon: sol.horizon,
        s_max: sol.flux.s_max(),
        curves,
        diagnostics,
    })
}

/// Summary written next to the per-curve CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub side: Side,
    pub curves: usize,
    pub mass: f64,
    pub total_variation: f64,
    pub jumps_by_cause: BTreeMap<String, usize>,
    pub diagnostics: EnsembleDiagnostics,
}

impl Ensemble {
    pub fn dx(&self) -> f64 {
        self.grid.dx()
    }

    pub fn dv(&self) -> f64 {
        self.grid.dv()
    }

    pub fn total_mass(&self) -> f64 {
        self.curves.iter().map(|c| c.weight).sum()
    }

    /// Sub-window whose domain of dependence lies inside the sampled window.
    pub fn interior(&self) -> (f64, f64) {
        let margin = self.s_max * self.horizon;
        (self.grid.x_min + margin, self.grid.x_max - margin)
    }

    /// `(x(t), v(t+))` for every curve, in curve order.
    pub fn states_at(&self, t: f64, exec: Exec) -> Vec<(f64, f64)> {
        par::map(exec, &self.curves, |c| (c.position(t), c.level(t)))
    }

    /// `|mass of curves in R at time t - area(R ∩ region(t))|` per rectangle.
    pub fn pushforward_check(&self, sol: &FrontSolution, t: f64, rects: &[Rect], exec: Exec) -> Vec<f64> {
        let states = self.states_at(t, exec);
        rects
            .iter()
            .map(|r| {
                let mass: f64 = self
                    .curves
                    .iter()
                    .zip(&states)
                    .filter(|(_, (x, v))| r.contains(*x, *v))
                    .map(|(c, _)| c.weight)
                    .sum();
                (mass - region_area(sol, self.side, t, r)).abs()
            })
            .collect()
    }

    /// Weighted total variation of the levels inside `[t0, t1] x [x0, x1]`.
    pub fn tv_dissipation(&self, t0: f64, t1: f64, x0: f64, x1: f64, exec: Exec) -> f64 {
        par::ordered_sum(exec, &self.curves, |c| {
            let tv: f64 = c
                .jumps
                .iter()
                .filter(|j| j.t >= t0 && j.t <= t1 && j.x >= x0 && j.x <= x1)
                .map(|j| (j.v_plus - j.v_minus).abs())
                .sum();
            c.weight * tv
        })
    }

    pub fn jump_counts(&self) -> BTreeMap<JumpCause, usize> {
        let mut counts = BTreeMap::new();
        for j in self.curves.iter().flat_map(|c| &c.jumps) {
            *counts.entry(j.cause).or_insert(0) += 1;
        }
        counts
    }

    pub fn summary(&self) -> EnsembleSummary {
        EnsembleSummary {
            side: self.side,
            curves: self.curves.len(),
            mass: self.total_mass(),
            total_variation: self
                .curves
                .iter()
                .map(|c| c.weight * c.total_variation())
                .sum(),
            jumps_by_cause: self
                .jump_counts()
                .into_iter()
                .map(|(k, v)| (k.name().to_string(), v))
                .collect(),
            diagnostics: self.diagnostics.clone(),
        }
    }

    /// One row per curve; breakpoints as `t:x` and jumps as
    /// `t:x:v_minus:v_plus:cause`, each list separated by `;`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,weight,breakpoints,jumps\n");
        for c in &self.curves {
            let bps: Vec<String> = c
                .times
                .iter()
                .zip(&c.xs)
                .map(|(t, x)| format!("{t}:{x}"))
                .collect();
            let jumps: Vec<String> = c
                .jumps
                .iter()
                .map(|j| format!("{}:{}:{}:{}:{}", j.t, j.x, j.v_minus, j.v_plus, j.cause.name()))
                .collect();
            out.push_str(&format!("{},{},{},{}\n", c.id, c.weight, bps.join(";"), jumps.join(";")));
        }
        out
    }
}

/// Whether `a` is strictly left of `b` at some breakpoint and strictly right
/// of it at a later one (beyond `slack`).
pub fn crosses_left_to_right(a: &LagCurve, b: &LagCurve, slack: f64) -> bool {
    let mut times: Vec<f64> = a.times.iter().chain(&b.times).copied().collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let mut was_left = false;
    for &t in &times {
        let d = a.position(t) - b.position(t);
        if d < -slack {
            was_left = true;
        } else if d > slack && was_left {
            return true;
        }
    }
    false
}

/// Count hypograph/epigraph pairs where the hypograph curve crosses the
/// epigraph curve from left to right. With `max_pairs = None` every pair is
/// checked; otherwise that many pairs are drawn with the given seed.
pub fn check_no_crossing(
    hyp: &Ensemble,
    epi: &Ensemble,
    max_pairs: Option<usize>,
    seed: u64,
    exec: Exec,
) -> usize {
    if hyp.curves.is_empty() || epi.curves.is_empty() {
        return 0;
    }
    let pairs: Vec<(usize, usize)> = match max_pairs {
        None => (0..hyp.curves.len())
            .flat_map(|i| (0..epi.curves.len()).map(move |j| (i, j)))
            .collect(),
        Some(n) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..n)
                .map(|_| {
                    (
                        rng.gen_range(0..hyp.curves.len()),
                        rng.gen_range(0..epi.curves.len()),
                    )
                })
                .collect()
        }
    };
    par::map(exec, &pairs, |&(i, j)| {
        crosses_left_to_right(&hyp.curves[i], &epi.curves[j], POSITION_SLACK) as usize
    })
    .into_iter()
    .sum()
}
