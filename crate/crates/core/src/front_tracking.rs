//! Exact event-driven evolution of piecewise-constant weak solutions.
//!
//! Every front is a straight segment moving at the Rankine-Hugoniot speed of
//! its two adjacent states. A collision kills the incoming fronts and emits
//! the fronts of the Riemann problem between the outermost states. Between
//! two consecutive collision times the set of live fronts is constant; that
//! interval is a [`Slab`].

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flux_model::{EntropyPair, Flux, ShockData};
use crate::quad;
use crate::testfn::TestFunction;

/// Collisions closer than this in time are merged into one event.
pub const EVENT_TOL: f64 = 1e-12;
/// Default rarefaction sub-jump size.
pub const DEFAULT_MESH: f64 = 1.0 / 64.0;
const MAX_EVENTS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrontKind {
    EntropicShock,
    RarefactionFront,
    NonEntropicShock,
}

impl fmt::Display for FrontKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FrontKind::EntropicShock => "entropic_shock",
            FrontKind::RarefactionFront => "rarefaction_front",
            FrontKind::NonEntropicShock => "non_entropic_shock",
        })
    }
}

/// How a single jump is resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpMode {
    #[default]
    Entropic,
    NonEntropic,
}

/// How collisions are resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionMode {
    /// Always resolve the outgoing Riemann problem entropically.
    #[default]
    Entropic,
    /// A collision involving a non-entropic front re-emits a single front.
    Preserve,
}

/// A front before it is placed in space-time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontTemplate {
    pub u_left: f64,
    pub u_right: f64,
    pub speed: f64,
    pub kind: FrontKind,
}

/// Fronts resolving the jump `(u_l, u_r)`, ordered left to right.
pub fn solve_riemann(
    flux: &Flux,
    u_l: f64,
    u_r: f64,
    mode: JumpMode,
    mesh: f64,
) -> Result<Vec<FrontTemplate>> {
    if !(mesh > 0.0) {
        return Err(Error::InvalidInitialData(format!(
            "rarefaction mesh must be positive, got {mesh}"
        )));
    }
    if (u_l - u_r).abs() < 1e-14 {
        return Ok(Vec::new());
    }
    let single = |kind| -> Result<Vec<FrontTemplate>> {
        Ok(vec![FrontTemplate {
            u_left: u_l,
            u_right: u_r,
            speed: flux.rh_speed(u_l, u_r)?,
            kind,
        }])
    };
    if u_l > u_r {
        return single(FrontKind::EntropicShock);
    }
    if mode == JumpMode::NonEntropic {
        return single(FrontKind::NonEntropicShock);
    }
    // rounding guard so that e.g. 1/0.25 does not become 5 pieces
    let pieces = (((u_r - u_l) / mesh) - 1e-9).ceil().max(1.0) as usize;
    let step = (u_r - u_l) / pieces as f64;
    (0..pieces)
        .map(|k| {
            let a = u_l + k as f64 * step;
            let b = if k + 1 == pieces {
                u_r
            } else {
                u_l + (k + 1) as f64 * step
            };
            Ok(FrontTemplate {
                u_left: a,
                u_right: b,
                speed: flux.rh_speed(a, b)?,
                kind: FrontKind::RarefactionFront,
            })
        })
        .collect()
}

/// Piecewise-constant initial datum: `values[0]` left of `breakpoints[0]`,
/// `values[i]` on `[breakpoints[i-1], breakpoints[i])`, and so on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialData {
    pub values: Vec<f64>,
    pub breakpoints: Vec<f64>,
    #[serde(default)]
    pub modes: Vec<JumpMode>,
}

impl InitialData {
    pub fn new(values: Vec<f64>, breakpoints: Vec<f64>) -> Result<Self> {
        let modes = vec![JumpMode::Entropic; breakpoints.len()];
        Self::with_modes(values, breakpoints, modes)
    }

    pub fn with_modes(values: Vec<f64>, breakpoints: Vec<f64>, modes: Vec<JumpMode>) -> Result<Self> {
        let data = InitialData {
            values,
            breakpoints,
            modes,
        };
        data.validate()?;
        Ok(data)
    }

    pub fn constant(u: f64) -> Result<Self> {
        Self::new(vec![u], Vec::new())
    }

    /// Single jump from `u_l` to `u_r` at `x`.
    pub fn riemann(u_l: f64, u_r: f64, x: f64, mode: JumpMode) -> Result<Self> {
        Self::with_modes(vec![u_l, u_r], vec![x], vec![mode])
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.len() != self.breakpoints.len() + 1 {
            return Err(Error::InvalidInitialData(format!(
                "{} values need {} breakpoints, got {}",
                self.values.len(),
                self.values.len().saturating_sub(1),
                self.breakpoints.len()
            )));
        }
        if !self.modes.is_empty() && self.modes.len() != self.breakpoints.len() {
            return Err(Error::InvalidInitialData(
                "one entropy mode per breakpoint required".into(),
            ));
        }
        if self.breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidInitialData(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        if let Some(v) = self.values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidInitialData(format!(
                "value {v} outside [0, 1]; normalize first"
            )));
        }
        Ok(())
    }

    fn mode(&self, i: usize) -> JumpMode {
        self.modes.get(i).copied().unwrap_or_default()
    }

    /// Right-continuous evaluation.
    pub fn value_at(&self, x: f64) -> f64 {
        let k = self.breakpoints.partition_point(|&b| b <= x);
        self.values[k]
    }

    /// Affinely rescale arbitrary bounded values into `[0, 1]`, returning the
    /// rescaled data, the matching flux and the `(lo, hi)` range used.
    pub fn normalize(
        values: Vec<f64>,
        breakpoints: Vec<f64>,
        modes: Vec<JumpMode>,
        flux: &Flux,
    ) -> Result<(Self, Flux, (f64, f64))> {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidInitialData("no finite values".into()));
        }
        if lo >= 0.0 && hi <= 1.0 {
            let data = Self::with_modes(values, breakpoints, modes)?;
            return Ok((data, flux.clone(), (0.0, 1.0)));
        }
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo, lo + 1.0) };
        let scaled = values.iter().map(|v| (v - lo) / (hi - lo)).collect();
        let data = Self::with_modes(scaled, breakpoints, modes)?;
        Ok((data, flux.rescaled(lo, hi)?, (lo, hi)))
    }
}

/// One straight front.
#[derive(Debug, Clone, PartialEq)]
pub struct Front {
    pub id: usize,
    pub kind: FrontKind,
    pub u_left: f64,
    pub u_right: f64,
    pub speed: f64,
    pub birth: f64,
    pub death: f64,
    pub x_birth: f64,
    pub shock: ShockData,
}

impl Front {
    pub fn position(&self, t: f64) -> f64 {
        self.x_birth + self.speed * (t - self.birth)
    }

    pub fn alive_at(&self, t: f64) -> bool {
        self.birth <= t && t <= self.death
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InteractionEvent {
    pub t: f64,
    pub x: f64,
    pub incoming: Vec<usize>,
    pub outgoing: Vec<usize>,
    /// Part of a group of collisions merged within [`EVENT_TOL`].
    pub simultaneous: bool,
}

/// Time interval with a constant set of live fronts, ordered by position.
#[derive(Debug, Clone, PartialEq)]
pub struct Slab {
    pub t0: f64,
    pub t1: f64,
    pub active: Vec<usize>,
}

/// A piecewise-constant weak solution on `[0, horizon]`.
#[derive(Debug, Clone)]
pub struct FrontSolution {
    pub flux: Flux,
    pub initial: InitialData,
    pub horizon: f64,
    pub mesh: f64,
    pub mode: InteractionMode,
    pub fronts: Vec<Front>,
    pub events: Vec<InteractionEvent>,
    pub slabs: Vec<Slab>,
}

struct Builder<'a> {
    flux: &'a Flux,
    mesh: f64,
    fronts: Vec<Front>,
}

impl Builder<'_> {
    fn emit(&mut self, templates: &[FrontTemplate], t: f64, x: f64) -> Result<Vec<usize>> {
        templates
            .iter()
            .map(|tpl| {
                let id = self.fronts.len();
                self.fronts.push(Front {
                    id,
                    kind: tpl.kind,
                    u_left: tpl.u_left,
                    u_right: tpl.u_right,
                    speed: tpl.speed,
                    birth: t,
                    death: f64::INFINITY,
                    x_birth: x,
                    shock: self.flux.shock(tpl.u_left, tpl.u_right)?,
                });
                Ok(id)
            })
            .collect()
    }
}

/// Evolve `initial` up to time `horizon`.
pub fn evolve(
    flux: &Flux,
    initial: &InitialData,
    horizon: f64,
    mesh: f64,
    mode: InteractionMode,
) -> Result<FrontSolution> {
    initial.validate()?;
    if !(horizon > 0.0) {
        return Err(Error::InvalidInitialData(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    let mut b = Builder {
        flux,
        mesh,
        fronts: Vec::new(),
    };
    let mut active = Vec::new();
    for (i, &x) in initial.breakpoints.iter().enumerate() {
        let tpl = solve_riemann(
            flux,
            initial.values[i],
            initial.values[i + 1],
            initial.mode(i),
            mesh,
        )?;
        active.extend(b.emit(&tpl, 0.0, x)?);
    }

    let mut events = Vec::new();
    let mut slabs = Vec::new();
    let mut t = 0.0;
    loop {
        if events.len() > MAX_EVENTS {
            return Err(Error::InvalidInitialData(
                "front interactions did not terminate".into(),
            ));
        }
        // earliest collision of adjacent fronts
        let collisions: Vec<(usize, f64)> = active
            .windows(2)
            .enumerate()
            .filter_map(|(i, w)| {
                let (a, c) = (&b.fronts[w[0]], &b.fronts[w[1]]);
                let closing = a.speed - c.speed;
                if closing <= 1e-15 {
                    return None;
                }
                let gap = (c.position(t) - a.position(t)).max(0.0);
                Some((i, t + gap / closing))
            })
            .collect();
        let t_next = collisions
            .iter()
            .map(|&(_, tc)| tc)
            .fold(f64::INFINITY, f64::min);
        if t_next >= horizon {
            slabs.push(Slab {
                t0: t,
                t1: horizon,
                active: active.clone(),
            });
            break;
        }
        slabs.push(Slab {
            t0: t,
            t1: t_next,
            active: active.clone(),
        });

        // clusters of chained colliding pairs, leftmost first
        let hits: Vec<usize> = collisions
            .iter()
            .filter(|&&(_, tc)| tc <= t_next + EVENT_TOL)
            .map(|&(i, _)| i)
            .collect();
        let mut clusters: Vec<(usize, usize)> = Vec::new();
        for &i in &hits {
            match clusters.last_mut() {
                Some((_, end)) if *end == i => *end = i + 1,
                _ => clusters.push((i, i + 1)),
            }
        }
        let simultaneous = clusters.len() > 1;
        let mut next_active = Vec::with_capacity(active.len());
        let mut cursor = 0;
        for &(lo, hi) in &clusters {
            next_active.extend_from_slice(&active[cursor..lo]);
            let incoming: Vec<usize> = active[lo..=hi].to_vec();
            let x = incoming
                .iter()
                .map(|&id| b.fronts[id].position(t_next))
                .sum::<f64>()
                / incoming.len() as f64;
            let u_l = b.fronts[incoming[0]].u_left;
            let u_r = b.fronts[*incoming.last().unwrap()].u_right;
            let preserve = mode == InteractionMode::Preserve
                && incoming
                    .iter()
                    .any(|&id| b.fronts[id].kind == FrontKind::NonEntropicShock);
            for &id in &incoming {
                b.fronts[id].death = t_next;
            }
            let jump_mode = if preserve {
                JumpMode::NonEntropic
            } else {
                JumpMode::Entropic
            };
            let tpl = solve_riemann(flux, u_l, u_r, jump_mode, b.mesh)?;
            let outgoing = b.emit(&tpl, t_next, x)?;
            next_active.extend_from_slice(&outgoing);
            events.push(InteractionEvent {
                t: t_next,
                x,
                incoming,
                outgoing,
                simultaneous: simultaneous || hi - lo > 1,
            });
            cursor = hi + 1;
        }
        next_active.extend_from_slice(&active[cursor..]);
        active = next_active;
        t = t_next;
    }
    for front in &mut b.fronts {
        front.death = front.death.min(horizon);
    }
    Ok(FrontSolution {
        flux: flux.clone(),
        initial: initial.clone(),
        horizon,
        mesh,
        mode,
        fronts: b.fronts,
        events,
        slabs,
    })
}

impl FrontSolution {
    pub fn left_state(&self) -> f64 {
        self.initial.values[0]
    }

    pub fn right_state(&self) -> f64 {
        *self.initial.values.last().unwrap()
    }

    /// Index of the slab containing `t` (the later one at event times).
    pub fn slab_index(&self, t: f64) -> usize {
        self.slabs
            .partition_point(|s| s.t0 <= t)
            .saturating_sub(1)
    }

    pub fn slab_at(&self, t: f64) -> &Slab {
        &self.slabs[self.slab_index(t)]
    }

    /// State between `slab.active[gap - 1]` and `slab.active[gap]`.
    pub fn gap_state(&self, slab: &Slab, gap: usize) -> f64 {
        if gap == 0 {
            self.left_state()
        } else {
            self.fronts[slab.active[gap - 1]].u_right
        }
    }

    /// Positions of the fronts live at `t`, left to right.
    pub fn front_positions(&self, t: f64) -> Vec<(f64, &Front)> {
        self.slab_at(t)
            .active
            .iter()
            .map(|&id| {
                let f = &self.fronts[id];
                (f.position(t), f)
            })
            .collect()
    }

    /// Value of the solution at `(t, x)`, right-continuous across fronts.
    pub fn sample(&self, t: f64, x: f64) -> f64 {
        let fronts = self.front_positions(t);
        let k = fronts.partition_point(|(p, _)| *p <= x);
        if k == 0 {
            self.left_state()
        } else {
            fronts[k - 1].1.u_right
        }
    }

    /// One-sided limits `(u_minus, u_plus)` at `(t, x)`. Fronts within
    /// `slack` of `x` are treated as passing through the point.
    pub fn trace(&self, t: f64, x: f64, slack: f64) -> (f64, f64) {
        let fronts = self.front_positions(t);
        let lo = fronts.partition_point(|(p, _)| *p < x - slack);
        let hi = fronts.partition_point(|(p, _)| *p <= x + slack);
        if lo < hi {
            (fronts[lo].1.u_left, fronts[hi - 1].1.u_right)
        } else {
            let u = if lo == 0 {
                self.left_state()
            } else {
                fronts[lo - 1].1.u_right
            };
            (u, u)
        }
    }

    /// Constant pieces of `u(t, .)` on `[x0, x1]` as `(a, b, u)` triples.
    pub fn pieces(&self, t: f64, x0: f64, x1: f64) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::new();
        let mut a = x0;
        let mut u = self.sample(t, x0);
        for (p, front) in self.front_positions(t) {
            if p <= x0 {
                continue;
            }
            if p >= x1 {
                break;
            }
            out.push((a, p, u));
            a = p;
            u = front.u_right;
        }
        out.push((a, x1, u));
        out
    }

    /// Slab boundaries inside `(t0, t1)`.
    pub fn event_times(&self, t0: f64, t1: f64) -> Vec<f64> {
        self.slabs
            .iter()
            .map(|s| s.t0)
            .filter(|&t| t > t0 && t < t1)
            .collect()
    }

    /// Times in `(t0, t1)` at which some front passes the fixed position `x`.
    pub fn crossing_times_at(&self, x: f64, t0: f64, t1: f64) -> Vec<f64> {
        self.fronts
            .iter()
            .filter(|f| f.speed != 0.0)
            .filter_map(|f| {
                let t = f.birth + (x - f.x_birth) / f.speed;
                (t > t0 && t < t1 && f.alive_at(t)).then_some(t)
            })
            .collect()
    }

    /// Entropy production of `pair` inside `[t0, t1] x [x0, x1]`; the
    /// measure lives on fronts, each contributing rate times residence time.
    pub fn entropy_production(&self, pair: &EntropyPair, t0: f64, t1: f64, x0: f64, x1: f64) -> f64 {
        self.fronts
            .iter()
            .map(|f| {
                let (a, b) = residence(f, t0.max(f.birth), t1.min(f.death), x0, x1);
                if b > a {
                    f.shock.dissipation_rate(pair) * (b - a)
                } else {
                    0.0
                }
            })
            .sum()
    }

    /// Total variation of the entropy production of `pair` in the window:
    /// like `entropy_production` but adding the rates of each front in
    /// absolute value.
    pub fn dissipation_measure(&self, pair: &EntropyPair, t0: f64, t1: f64, x0: f64, x1: f64) -> f64 {
        self.fronts
            .iter()
            .map(|f| {
                let (a, b) = residence(f, t0.max(f.birth), t1.min(f.death), x0, x1);
                if b > a {
                    f.shock.dissipation_rate(pair).abs() * (b - a)
                } else {
                    0.0
                }
            })
            .sum()
    }

    /// `int int (u Phi_t + f(u) Phi_x) dx dt + int u_0 Phi(0, x) dx`.
    pub fn weak_residual(&self, phi: &TestFunction) -> f64 {
        let ((ta, tb), (xa, xb)) = phi.support();
        let t_hi = tb.min(self.horizon);
        let inner = |t: f64| -> f64 {
            let (a_t, da_t) = (phi.t.value(t), phi.t.derivative(t));
            self.pieces(t, xa, xb)
                .into_iter()
                .map(|(a, b, u)| {
                    u * da_t * phi.x.integral(a, b)
                        + self.flux.f(u) * a_t * (phi.x.value(b) - phi.x.value(a))
                })
                .sum()
        };
        let mut cuts = self.event_times(0.0, t_hi);
        cuts.extend(phi.t.knots());
        for knot in phi.x.knots() {
            cuts.extend(self.crossing_times_at(knot, 0.0, t_hi));
        }
        let bulk = quad::piecewise_simpson(&inner, ta.max(0.0), t_hi, &cuts, 1e-12);
        let initial: f64 = self
            .pieces(0.0, xa, xb)
            .into_iter()
            .map(|(a, b, u)| u * phi.x.integral(a, b))
            .sum();
        bulk + initial * phi.t.value(0.0)
    }

    /// Front segments as CSV rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_start,t_end,x_start,speed,u_left,u_right,kind\n");
        for f in &self.fronts {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                f.birth, f.death, f.x_birth, f.speed, f.u_left, f.u_right, f.kind
            ));
        }
        out
    }
}

/// Sub-interval of `[ta, tb]` during which the front lies in `[x0, x1]`.
fn residence(f: &Front, ta: f64, tb: f64, x0: f64, x1: f64) -> (f64, f64) {
    if tb <= ta {
        return (ta, ta);
    }
    if f.speed == 0.0 {
        return if f.x_birth >= x0 && f.x_birth <= x1 {
            (ta, tb)
        } else {
            (ta, ta)
        };
    }
    let s0 = f.birth + (x0 - f.x_birth) / f.speed;
    let s1 = f.birth + (x1 - f.x_birth) / f.speed;
    let (lo, hi) = if s0 < s1 { (s0, s1) } else { (s1, s0) };
    (ta.max(lo), tb.min(hi))
}
