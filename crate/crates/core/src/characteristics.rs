//! Generalized characteristics built as barriers for the hypograph ensemble.
//!
//! On each interval `(t_k, t_{k+1}]` the barrier follows the right-most
//! position reachable by hypograph curves that were strictly left of it at
//! `t_k`. Halving the interval length gives a sequence of curves whose limit
//! is a generalized characteristic.

use serde::{Deserialize, Serialize};

use crate::flux_model::Flux;
use crate::front_tracking::{FrontKind, FrontSolution};
use crate::lagrangian::{crosses_left_to_right, Ensemble, LagCurve, POSITION_SLACK};
use crate::par::{self, Exec};

/// Curves up to this far right of the barrier still count as lying left of
/// it, so the curve that defines the barrier carries it across a restart.
pub const LEFT_SLACK: f64 = 1e-12;
/// Default number of sample steps over `[t0, T]`.
pub const DEFAULT_RESOLUTION: usize = 512;

/// Indices of curves left of `x` at `t` that could still beat the
/// vacuum line `x + f'(0)(s - t)` before `t + span`.
fn candidates(ens: &Ensemble, flux: &Flux, t: f64, x: f64, span: f64, exec: Exec) -> Vec<usize> {
    let reach = (flux.df(1.0) - flux.df(0.0)) * span;
    par::map_range(exec, ens.curves.len(), |i| {
        let xc = ens.curves[i].position(t);
        (xc < x + LEFT_SLACK && xc >= x - reach - LEFT_SLACK).then_some(i)
    })
    .into_iter()
    .flatten()
    .collect()
}

fn reach_from(ens: &Ensemble, idx: &[usize], fallback: f64, s: f64, exec: Exec) -> f64 {
    par::max_by(exec, idx, |&i| Some(ens.curves[i].position(s)))
        .map_or(fallback, |m| m.max(fallback))
}

/// Right-most position at time `s` of hypograph curves lying left of `x` at
/// time `t`, never left of the vacuum line `x + f'(0)(s - t)`.
pub fn rightmost_reachable(ens: &Ensemble, flux: &Flux, t: f64, x: f64, s: f64, exec: Exec) -> f64 {
    let idx = candidates(ens, flux, t, x, s - t, exec);
    reach_from(ens, &idx, x + flux.df(0.0) * (s - t), s, exec)
}

/// Sampled piecewise-linear curve `t -> x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Barrier {
    pub times: Vec<f64>,
    pub xs: Vec<f64>,
    /// Restart times `t_k`.
    pub restarts: Vec<f64>,
}

impl Barrier {
    pub fn position(&self, t: f64) -> f64 {
        let k = self
            .times
            .partition_point(|&s| s <= t)
            .clamp(1, self.times.len() - 1);
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let w = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
        self.xs[k - 1] + w * (self.xs[k] - self.xs[k - 1])
    }

    /// Largest secant slope between consecutive samples.
    pub fn lipschitz_constant(&self) -> f64 {
        self.times
            .windows(2)
            .zip(self.xs.windows(2))
            .map(|(t, x)| ((x[1] - x[0]) / (t[1] - t[0])).abs())
            .fold(0.0, f64::max)
    }

    fn as_curve(&self) -> LagCurve {
        let slopes: Vec<f64> = self
            .times
            .windows(2)
            .zip(self.xs.windows(2))
            .map(|(t, x)| (x[1] - x[0]) / (t[1] - t[0]))
            .collect();
        LagCurve {
            id: usize::MAX,
            weight: 0.0,
            times: self.times.clone(),
            xs: self.xs.clone(),
            levels: vec![0.0; slopes.len()],
            slopes,
            jumps: Vec::new(),
        }
    }
}

/// Barrier from `(t0, x0)` with `n_intervals` restarts on `[t0, T]`, sampled
/// at `resolution` equal steps (rounded up to a multiple of `n_intervals`).
pub fn build_barrier(
    ens: &Ensemble,
    flux: &Flux,
    t0: f64,
    x0: f64,
    n_intervals: usize,
    resolution: usize,
    exec: Exec,
) -> Barrier {
    let n_intervals = n_intervals.max(1);
    let sub = resolution.div_ceil(n_intervals).max(1);
    let steps = n_intervals * sub;
    let h = (ens.horizon - t0) / steps as f64;
    let time = |j: usize| if j == steps { ens.horizon } else { t0 + j as f64 * h };
    let mut times = vec![t0];
    let mut xs = vec![x0];
    let mut restarts = Vec::with_capacity(n_intervals);
    let mut x = x0;
    for k in 0..n_intervals {
        let tk = time(k * sub);
        restarts.push(tk);
        let idx = candidates(ens, flux, tk, x, time((k + 1) * sub) - tk, exec);
        for j in 1..=sub {
            let s = time(k * sub + j);
            let fallback = x + flux.df(0.0) * (s - tk);
            times.push(s);
            xs.push(reach_from(ens, &idx, fallback, s, exec));
        }
        x = *xs.last().unwrap();
    }
    Barrier { times, xs, restarts }
}

/// Dyadic sequence of barriers and its limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Characteristic {
    pub t0: f64,
    pub x0: f64,
    pub curve: Barrier,
    /// Interval lengths used, coarse to fine.
    pub delta_levels: Vec<f64>,
    /// `sup_t |x^{δ/2} - x^δ|` between consecutive levels.
    pub level_gaps: Vec<f64>,
    /// `inf_t (x^{δ/2} - x^δ)`; the continuum sequence is nondecreasing.
    pub monotonicity_defects: Vec<f64>,
}

impl Characteristic {
    pub fn position(&self, t: f64) -> f64 {
        self.curve.position(t)
    }
}

/// Barriers for `δ = (T - t0)/2, (T - t0)/4, ...`; returns the finest one.
pub fn refine_barrier(ens: &Ensemble, flux: &Flux, t0: f64, x0: f64, n_levels: usize, exec: Exec) -> Characteristic {
    let n_levels = n_levels.max(1);
    let resolution = DEFAULT_RESOLUTION.max(1 << n_levels);
    let mut delta_levels = Vec::new();
    let mut level_gaps = Vec::new();
    let mut monotonicity_defects = Vec::new();
    let mut prev: Option<Barrier> = None;
    for n in 1..=n_levels {
        let b = build_barrier(ens, flux, t0, x0, 1 << n, resolution, exec);
        delta_levels.push((ens.horizon - t0) / (1u64 << n) as f64);
        if let Some(p) = &prev {
            // both levels share the sample grid
            let diffs: Vec<f64> = b.xs.iter().zip(&p.xs).map(|(a, c)| a - c).collect();
            level_gaps.push(diffs.iter().fold(0.0_f64, |m, d| m.max(d.abs())));
            monotonicity_defects.push(diffs.iter().copied().fold(f64::INFINITY, f64::min));
        }
        prev = Some(b);
    }
    Characteristic {
        t0,
        x0,
        curve: prev.unwrap(),
        delta_levels,
        level_gaps,
        monotonicity_defects,
    }
}

/// Per-cell check of the speed law along a characteristic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub t_start: f64,
    pub t_end: f64,
    pub x: f64,
    pub u_minus: f64,
    pub u_plus: f64,
    pub xprime: f64,
    /// Speed law at the cell midpoint.
    pub target_speed: f64,
    /// Smallest and largest speed-law values sampled across the cell.
    pub speed_range: (f64, f64),
    pub violation: bool,
    /// Kruzkov chord inequalities violated (continuity cells only).
    pub kruzkov_violation: bool,
}

impl CellRecord {
    pub fn traces_differ(&self) -> bool {
        self.u_minus != self.u_plus
    }

    /// Distance from the secant slope to the speed range over the cell.
    pub fn residual(&self) -> f64 {
        let (lo, hi) = self.speed_range;
        if lo.is_nan() || hi.is_nan() {
            return f64::NAN;
        }
        (lo - self.xprime).max(self.xprime - hi).max(0.0)
    }

    pub fn width(&self) -> f64 {
        self.t_end - self.t_start
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub tol: f64,
    pub cells: Vec<CellRecord>,
    /// Time measure of cells violating the speed law.
    pub violation_measure: f64,
    pub kruzkov_violation_measure: f64,
    /// Verified time span `[t0, T]`.
    pub span: f64,
    /// Length of `[0, T]`, the reference for violation fractions.
    pub horizon: f64,
}

impl VerifyReport {
    /// Violating time as a fraction of `[0, T]`.
    pub fn violation_fraction(&self) -> f64 {
        self.violation_measure / self.horizon
    }

    /// Fraction of jump cells (by time) whose residual is at most `tol`.
    pub fn jump_pass_fraction(&self, tol: f64) -> Option<f64> {
        let (mut total, mut ok) = (0.0, 0.0);
        for c in self.cells.iter().filter(|c| c.traces_differ()) {
            total += c.width();
            if c.residual() <= tol {
                ok += c.width();
            }
        }
        (total > 0.0).then(|| ok / total)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x,u_minus,u_plus,xprime,target_speed,violation_flag\n");
        for c in &self.cells {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                0.5 * (c.t_start + c.t_end),
                c.x,
                c.u_minus,
                c.u_plus,
                c.xprime,
                c.target_speed,
                c.violation as u8
            ));
        }
        out
    }
}

/// Split `[t0, T]` into `n_cells` cells; in each, compare the secant slope of
/// the characteristic with `f'(u)` (equal traces) or the Rankine-Hugoniot
/// speed (distinct traces). Traces are read at the cell midpoint with spatial
/// slack `slack`. Continuity cells are also tested against the Kruzkov chord
/// inequalities `x' >= (f(u) - f(a))/(u - a)` for `a < u` and
/// `x' <= (f(a) - f(u))/(a - u)` for `a > u`, `a` on a uniform grid.
/// Traces at `(t, x)` seen through a window of half-width `slack`. Fronts
/// of a tracked rarefaction resolve a continuous wave, so a window holding
/// only those falls back to the pointwise traces.
fn cell_trace(sol: &FrontSolution, t: f64, x: f64, slack: f64) -> (f64, f64) {
    let shock_near = sol.front_positions(t).iter().any(|(p, f)| {
        (p - x).abs() <= slack && f.kind != FrontKind::RarefactionFront
    });
    sol.trace(t, x, if shock_near { slack } else { POSITION_SLACK })
}

pub fn verify_characteristic(
    ch: &Characteristic,
    sol: &FrontSolution,
    tol: f64,
    n_cells: usize,
    slack: f64,
) -> VerifyReport {
    let flux = &sol.flux;
    let (t0, t1) = (ch.t0, sol.horizon);
    let h = (t1 - t0) / n_cells as f64;
    let kruzkov: Vec<f64> = (1..32).map(|i| i as f64 / 32.0).collect();
    let speed = |um: f64, up: f64| {
        if um == up {
            flux.df(um)
        } else {
            flux.rh_speed(um, up).unwrap_or(f64::NAN)
        }
    };
    let cells: Vec<CellRecord> = (0..n_cells)
        .map(|k| {
            let (a, b) = (t0 + k as f64 * h, t0 + (k + 1) as f64 * h);
            let mid = 0.5 * (a + b);
            let x = ch.position(mid);
            let xprime = (ch.position(b) - ch.position(a)) / h;
            let (u_minus, u_plus) = cell_trace(sol, mid, x, slack);
            let target_speed = speed(u_minus, u_plus);
            // the secant averages x' over the cell, so compare with the range
            // of the speed law across it
            let eps = 1e-9 * h;
            let (lo, hi) = [a + eps, mid, b - eps].iter().fold((target_speed, target_speed), |(lo, hi), &t| {
                let (um, up) = cell_trace(sol, t, ch.position(t), slack);
                let s = speed(um, up);
                (lo.min(s), hi.max(s))
            });
            let kruzkov_violation = u_minus == u_plus
                && kruzkov.iter().any(|&c| {
                    let u = u_minus;
                    if (c - u).abs() < 1e-12 {
                        return false;
                    }
                    let chord = (flux.f(u) - flux.f(c)) / (u - c);
                    if c < u {
                        xprime < chord - tol
                    } else {
                        xprime > chord + tol
                    }
                });
            let cell = CellRecord {
                t_start: a,
                t_end: b,
                x,
                u_minus,
                u_plus,
                xprime,
                target_speed,
                speed_range: (lo, hi),
                violation: false,
                kruzkov_violation,
            };
            CellRecord {
                violation: !(cell.residual() <= tol),
                ..cell
            }
        })
        .collect();
    let measure = |pred: fn(&CellRecord) -> bool| cells.iter().filter(|c| pred(c)).map(|c| c.width()).sum();
    VerifyReport {
        tol,
        violation_measure: measure(|c| c.violation),
        kruzkov_violation_measure: measure(|c| c.kruzkov_violation),
        span: t1 - t0,
        horizon: t1,
        cells,
    }
}

/// Epigraph curves crossing the characteristic from right to left.
pub fn check_right_barrier(ch: &Characteristic, epi: &Ensemble, exec: Exec) -> usize {
    let c = ch.curve.as_curve();
    par::map(exec, &epi.curves, |g| {
        crosses_left_to_right(&c, &clip(g, ch.t0), POSITION_SLACK) as usize
    })
    .into_iter()
    .sum()
}

/// Hypograph curves left of the barrier at a restart time that are right of
/// it at a later sample time of the same interval.
pub fn check_left_barrier(ch: &Characteristic, hyp: &Ensemble, exec: Exec) -> usize {
    let b = &ch.curve;
    let mut bounds = b.restarts.clone();
    bounds.push(*b.times.last().unwrap());
    par::map(exec, &hyp.curves, |g| {
        bounds
            .windows(2)
            .filter(|w| {
                if g.position(w[0]) >= b.position(w[0]) + LEFT_SLACK {
                    return false;
                }
                b.times
                    .iter()
                    .zip(&b.xs)
                    .filter(|(t, _)| **t > w[0] && **t <= w[1])
                    .any(|(&t, &x)| g.position(t) > x + POSITION_SLACK)
            })
            .count()
    })
    .into_iter()
    .sum()
}

/// Restriction of a curve to `[t0, T]`.
fn clip(g: &LagCurve, t0: f64) -> LagCurve {
    if t0 <= g.times[0] {
        return g.clone();
    }
    let k = g.segment(t0);
    let mut c = g.clone();
    c.times.drain(..=k);
    c.xs.drain(..=k);
    c.times.insert(0, t0);
    c.xs.insert(0, g.position(t0));
    c.levels.drain(..k);
    c.slopes.drain(..k);
    c
}

/// `ν(B_r) / r` over sup-norm balls around `(t0, x0)`, with `ν` estimated by
/// the total variation of curve levels.
pub fn dissipation_ratio(hyp: &Ensemble, t0: f64, x0: f64, radii: &[f64], exec: Exec) -> Vec<f64> {
    radii
        .iter()
        .map(|&r| hyp.tv_dissipation(t0 - r, t0 + r, x0 - r, x0 + r, exec) / r)
        .collect()
}
