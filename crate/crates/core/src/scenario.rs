//! Scenario files and the orchestration of checks over them.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::characteristics::{
    check_left_barrier, check_right_barrier, refine_barrier, verify_characteristic,
};
use crate::error::{Error, Result};
use crate::flux_formula::{
    classify_intersections, curve_flux_pairing, intersection_statistics, lagrangian_flux_breakdown,
    mollified_flux, theta_psi_pairing, trace_flux, Surface,
};
use crate::flux_model::{Anchor, EntropyKind, EntropyPair, Flux, FluxSpec};
use crate::front_tracking::{evolve, FrontSolution, InitialData, InteractionMode, JumpMode};
use crate::lagrangian::{build_ensemble, check_no_crossing, dyadic_rectangles, Ensemble, GridSpec, Side};
use crate::par::{self, Exec};
use crate::report::{Metric, ReportBundle};
use crate::testfn::TestFunction;

fn d_mesh() -> f64 {
    1.0 / 64.0
}
fn d_n() -> usize {
    256
}
fn d_levels() -> usize {
    6
}
fn d_cells() -> usize {
    32
}
fn d_bumps() -> usize {
    10
}
fn d_pairs() -> usize {
    10_000
}
fn d_deltas() -> Vec<f64> {
    vec![1e-3]
}
fn d_entropies() -> Vec<EntropySpec> {
    vec![EntropySpec::Quadratic]
}

/// Physical and numerical defaults, overridable per scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Defaults {
    #[serde(default = "d_mesh")]
    pub mesh: f64,
    #[serde(default = "d_n")]
    pub nx: usize,
    #[serde(default = "d_n")]
    pub nv: usize,
    /// Dyadic refinement levels for characteristics.
    #[serde(default = "d_levels")]
    pub levels: usize,
    /// Time cells used to verify characteristics.
    #[serde(default = "d_cells")]
    pub verify_cells: usize,
    /// Random bumps for the weak-solution residual.
    #[serde(default = "d_bumps")]
    pub bumps: usize,
    /// Sampled hypograph/epigraph pairs for the no-crossing check.
    #[serde(default = "d_pairs")]
    pub pairs: usize,
}

impl Default for Defaults {
    fn default() -> Self {
        Defaults {
            mesh: d_mesh(),
            nx: d_n(),
            nv: d_n(),
            levels: d_levels(),
            verify_cells: d_cells(),
            bumps: d_bumps(),
            pairs: d_pairs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    pub values: Vec<f64>,
    #[serde(default)]
    pub breakpoints: Vec<f64>,
    /// One per breakpoint; entropic when omitted.
    #[serde(default)]
    pub modes: Vec<JumpMode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub x_min: f64,
    pub x_max: f64,
    #[serde(default)]
    pub seed: u64,
    pub nx: Option<usize>,
    pub nv: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceSpec {
    pub name: String,
    /// `[[t, x], ...]`
    pub vertices: Surface,
    /// Defaults to a plateau equal to one over the whole window.
    pub phi: Option<TestFunction>,
    #[serde(default = "d_deltas")]
    pub deltas: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EntropySpec {
    Quadratic,
    Kruzkov { a: f64 },
    KruzkovDown { a: f64 },
}

impl EntropySpec {
    pub fn label(&self) -> String {
        match self {
            EntropySpec::Quadratic => "quadratic".into(),
            EntropySpec::Kruzkov { a } => format!("kruzkov({a})"),
            EntropySpec::KruzkovDown { a } => format!("kruzkov_down({a})"),
        }
    }

    pub fn pair(&self, flux: &Flux, anchor: Anchor) -> Result<EntropyPair> {
        let kind = match *self {
            EntropySpec::Quadratic => EntropyKind::Quadratic,
            EntropySpec::Kruzkov { a } => EntropyKind::Kruzkov { a },
            EntropySpec::KruzkovDown { a } => EntropyKind::KruzkovDown { a },
        };
        EntropyPair::new(kind, flux, anchor)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CharacteristicSpec {
    pub x0: f64,
    #[serde(default)]
    pub t0: f64,
    pub levels: Option<usize>,
    /// Expected path `x0 + speed (t - t0)`, checked when given.
    pub expect_speed: Option<f64>,
    /// Allowed sup distance from the expected path; one spatial cell by default.
    pub expect_tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub defaults: Defaults,
    pub flux: FluxSpec,
    pub initial: InitialSpec,
    pub horizon: f64,
    #[serde(default)]
    pub interaction: InteractionMode,
    pub grid: GridConfig,
    #[serde(default)]
    pub surfaces: Vec<SurfaceSpec>,
    #[serde(default = "d_entropies")]
    pub entropies: Vec<EntropySpec>,
    #[serde(default)]
    pub characteristics: Vec<CharacteristicSpec>,
    pub output: Option<PathBuf>,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let sc: Scenario = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path)?;
        let sc = Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        Ok((sc, text))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad(format!("horizon must be positive, got {}", self.horizon));
        }
        let d = &self.defaults;
        if !(d.mesh > 0.0 && d.mesh <= 1.0) {
            return bad(format!("mesh must lie in (0, 1], got {}", d.mesh));
        }
        if d.levels == 0 || d.verify_cells == 0 {
            return bad("levels and verify_cells must be at least 1".into());
        }
        if !(self.grid.x_max > self.grid.x_min) {
            return bad("grid.x_max must exceed grid.x_min".into());
        }
        if self.grid_size().0 == 0 || self.grid_size().1 == 0 {
            return bad("grid sizes must be at least 1".into());
        }
        for s in &self.surfaces {
            let (ta, tb) = s.vertices.t_range();
            if !(ta > 0.0 && tb < self.horizon) {
                return bad(format!("surface '{}' must lie inside (0, {})", s.name, self.horizon));
            }
            if s.deltas.iter().any(|&d| !(d > 0.0)) {
                return bad(format!("surface '{}': mollifier widths must be positive", s.name));
            }
        }
        for c in &self.characteristics {
            if !(c.t0 >= 0.0 && c.t0 < self.horizon) {
                return bad(format!("characteristic start time {} outside [0, T)", c.t0));
            }
        }
        for e in &self.entropies {
            if let EntropySpec::Kruzkov { a } | EntropySpec::KruzkovDown { a } = e {
                if !(0.0..=1.0).contains(a) {
                    return bad(format!("Kruzkov level {a} outside [0, 1]"));
                }
            }
        }
        self.flux.build().map_err(|e| Error::Config(e.to_string()))?;
        self.initial_data().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn grid_size(&self) -> (usize, usize) {
        (
            self.grid.nx.unwrap_or(self.defaults.nx),
            self.grid.nv.unwrap_or(self.defaults.nv),
        )
    }

    pub fn grid_spec(&self) -> GridSpec {
        let (nx, nv) = self.grid_size();
        GridSpec {
            nx,
            nv,
            x_min: self.grid.x_min,
            x_max: self.grid.x_max,
            seed: self.grid.seed,
        }
    }

    /// Normalized initial data, matching flux and the original value range.
    pub fn initial_data(&self) -> Result<(InitialData, Flux, (f64, f64))> {
        let flux = self.flux.build()?;
        let modes = if self.initial.modes.is_empty() {
            vec![JumpMode::Entropic; self.initial.breakpoints.len()]
        } else {
            self.initial.modes.clone()
        };
        InitialData::normalize(
            self.initial.values.clone(),
            self.initial.breakpoints.clone(),
            modes,
            &flux,
        )
    }

    pub fn solve(&self) -> Result<FrontSolution> {
        let (data, flux, _) = self.initial_data()?;
        evolve(&flux, &data, self.horizon, self.defaults.mesh, self.interaction)
    }

    pub fn default_phi(&self) -> TestFunction {
        TestFunction::plateau(0.0, self.horizon, self.grid.x_min, self.grid.x_max, 0.25)
    }
}

/// Which groups of checks to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stages {
    pub lagrangian: bool,
    pub flux: bool,
    pub characteristics: bool,
}

impl Stages {
    pub const SIMULATE: Stages = Stages {
        lagrangian: false,
        flux: false,
        characteristics: false,
    };
    pub const ALL: Stages = Stages {
        lagrangian: true,
        flux: true,
        characteristics: true,
    };

    fn needs_ensembles(self) -> bool {
        self.lagrangian || self.flux || self.characteristics
    }
}

/// Everything built for one run.
pub struct Run {
    pub solution: FrontSolution,
    pub hyp: Option<Ensemble>,
    pub epi: Option<Ensemble>,
    pub bundle: ReportBundle,
}

fn is_quadratic(flux: &Flux) -> bool {
    flux.coeffs().iter().skip(3).all(|&c| c == 0.0)
}

pub fn run_scenario(sc: &Scenario, config_text: &str, stages: Stages, exec: Exec) -> Result<Run> {
    let grid = sc.grid_spec();
    let mut b = ReportBundle::new(&sc.name, grid.seed, config_text);
    let (_, _, range) = sc.initial_data()?;
    let sol = sc.solve()?;
    let flux = sol.flux.clone();
    b.value("value_range", range);
    b.value("fronts", sol.fronts.len());
    b.value("interactions", sol.events.len());
    b.table(
        "fronts.csv",
        "t_start, t_end [time], x_start [length], speed [length/time], u_left, u_right [normalized state], kind [label]",
        sol.to_csv(),
    );

    let mut rng = ChaCha8Rng::seed_from_u64(grid.seed ^ 0x5eed);
    let x_range = (grid.x_min, grid.x_max);
    let bumps: Vec<TestFunction> = (0..sc.defaults.bumps)
        .map(|_| TestFunction::random_bump(&mut rng, (-0.5 * sc.horizon, sc.horizon), x_range))
        .collect();
    let residual = par::max_by(exec, &bumps, |phi| Some(sol.weak_residual(phi).abs())).unwrap_or(0.0);
    b.push(Metric::at_most("weak_residual", residual, 1e-6));
    for e in &sc.entropies {
        let pair = e.pair(&flux, Anchor::ZeroAt0)?;
        let mu = sol.entropy_production(&pair, 0.0, sc.horizon, f64::NEG_INFINITY, f64::INFINITY);
        b.value(format!("entropy_production/{}", e.label()), mu);
    }

    if !stages.needs_ensembles() {
        return Ok(Run {
            solution: sol,
            hyp: None,
            epi: None,
            bundle: b,
        });
    }
    let hyp = build_ensemble(&sol, Side::Hypograph, grid, exec)?;
    let epi_grid = GridSpec {
        seed: grid.seed.wrapping_add(1),
        ..grid
    };
    let epi = build_ensemble(&sol, Side::Epigraph, epi_grid, exec)?;
    let (ix0, ix1) = hyp.interior();
    b.value("interior", (ix0, ix1));
    b.value("hypograph", hyp.summary());
    b.value("epigraph", epi.summary());

    if stages.lagrangian {
        lagrangian_checks(sc, &sol, &hyp, &epi, &mut b, exec);
    }
    if stages.flux {
        flux_checks(sc, &sol, &hyp, &epi, &mut b, exec)?;
    }
    if stages.characteristics {
        characteristic_checks(sc, &sol, &hyp, &epi, &mut b, exec);
    }
    Ok(Run {
        solution: sol,
        hyp: Some(hyp),
        epi: Some(epi),
        bundle: b,
    })
}

fn lagrangian_checks(
    sc: &Scenario,
    sol: &FrontSolution,
    hyp: &Ensemble,
    epi: &Ensemble,
    b: &mut ReportBundle,
    exec: Exec,
) {
    let (x0, x1) = hyp.interior();
    let bound = 2.0 * (hyp.dx() + hyp.dv());
    if x1 > x0 {
        let rects = dyadic_rectangles(x0, x1, 8);
        for ens in [hyp, epi] {
            let worst = [0.0, 0.5, 1.0]
                .iter()
                .flat_map(|&s| ens.pushforward_check(sol, s * sc.horizon, &rects, exec))
                .zip(rects.iter().cycle())
                .map(|(d, r)| d / r.perimeter())
                .fold(0.0, f64::max);
            b.push(Metric::at_most(format!("pushforward/{}", ens.side.name()), worst, bound));
        }
        let tv = hyp.tv_dissipation(0.0, sc.horizon, x0, x1, exec);
        let quad = EntropyPair::quadratic(&sol.flux, Anchor::ZeroAt0);
        let nu = sol.dissipation_measure(&quad, 0.0, sc.horizon, x0, x1);
        b.value("tv_dissipation", tv);
        b.value("quadratic_dissipation", nu);
        if is_quadratic(&sol.flux) {
            // resolution floor: mesh-sized jumps over a cell-wide band of the interior
            let floor = sc.defaults.mesh * (hyp.dx() + hyp.dv()) * (x1 - x0);
            let err = (tv - nu).abs() / nu.max(floor);
            b.push(Metric::at_most("dissipation_identity", err, 0.03));
        }
    } else {
        b.value("warning", "window narrower than the domain of dependence; interior checks skipped");
    }
    let pairs = sc.defaults.pairs;
    let crossings = check_no_crossing(hyp, epi, Some(pairs), hyp.grid.seed ^ 0xc805, exec);
    b.push(Metric::at_most("no_crossing", crossings as f64, 0.0));
    b.table("curves_hypograph.csv", "t [time], x [length], v [normalized state]", hyp.to_csv());
    b.table("curves_epigraph.csv", "t [time], x [length], v [normalized state]", epi.to_csv());
}

fn flux_checks(
    sc: &Scenario,
    sol: &FrontSolution,
    hyp: &Ensemble,
    epi: &Ensemble,
    b: &mut ReportBundle,
    exec: Exec,
) -> Result<()> {
    let mut csv = String::from(
        "surface,entropy,side,lagrangian,trace,abs_error,rel_error,iplus,iminus,bminus,n_iplus,n_iminus,n_bminus,n_bplus\n",
    );
    for s in &sc.surfaces {
        let phi = s.phi.unwrap_or_else(|| sc.default_phi());
        let (ta, tb) = s.vertices.t_range();
        for e in &sc.entropies {
            for (ens, anchor) in [(hyp, Anchor::ZeroAt0), (epi, Anchor::ZeroAt1)] {
                let pair = e.pair(&sol.flux, anchor)?;
                let lag = lagrangian_flux_breakdown(ens, &s.vertices, &pair, &phi, exec)?;
                let tr = trace_flux(sol, &s.vertices, &pair, &phi);
                // natural flux scale: largest |q| over the duration of the surface
                let q_scale = (0..=64)
                    .map(|k| pair.q(k as f64 / 64.0).abs())
                    .fold(0.0, f64::max)
                    * (tb - ta);
                let abs = (lag.total - tr).abs();
                let rel = abs / tr.abs().max(q_scale);
                let key = format!("{}/{}/{}", s.name, e.label(), ens.side.name());
                b.push(Metric::at_most(format!("flux/{key}"), rel, 0.02));
                let c = |k: &str| lag.counts.get(k).copied().unwrap_or(0);
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                    s.name,
                    e.label(),
                    ens.side.name(),
                    lag.total,
                    tr,
                    abs,
                    rel,
                    lag.iplus,
                    lag.iminus,
                    lag.bminus,
                    c("iplus"),
                    c("iminus"),
                    c("bminus"),
                    c("bplus")
                ));
                if anchor == Anchor::ZeroAt0 {
                    for &d in &s.deltas {
                        let m = mollified_flux(sol, &s.vertices, &pair, &phi, d)?;
                        b.push(Metric::at_most(format!("mollified/{key}/{d}"), (m - tr).abs(), 10.0 * d));
                    }
                }
                let tp = par::max_by(exec, &ens.curves, |g| {
                    let a = curve_flux_pairing(&classify_intersections(g, &s.vertices), &pair, &phi);
                    Some((a - theta_psi_pairing(g, &s.vertices, &pair, &phi)).abs())
                })
                .unwrap_or(0.0);
                b.push(Metric::at_most(format!("theta_psi/{key}"), tp, 1e-12));
            }
        }
        let eps = [0.1, 0.05, 0.025, 0.0125];
        for ens in [hyp, epi] {
            let st = intersection_statistics(ens, &s.vertices, &eps, exec);
            let bound = sol.fronts.len() + s.vertices.breakpoints().len() + 1;
            let key = format!("{}/{}", s.name, ens.side.name());
            b.push(Metric::at_most(format!("intersections/{key}"), st.max_count as f64, bound as f64));
            b.value(format!("tangency/{key}"), &st);
        }
    }
    if !sc.surfaces.is_empty() {
        b.table(
            "flux.csv",
            "fluxes [entropy flux x time], counts [curves]",
            csv,
        );
    }
    Ok(())
}

fn characteristic_checks(
    sc: &Scenario,
    sol: &FrontSolution,
    hyp: &Ensemble,
    epi: &Ensemble,
    b: &mut ReportBundle,
    exec: Exec,
) {
    let s_max = sol.flux.s_max();
    let tol = (2.0 * hyp.dv()).max(2.0 * sc.defaults.mesh) * (1.0 + s_max);
    for (k, c) in sc.characteristics.iter().enumerate() {
        let levels = c.levels.unwrap_or(sc.defaults.levels);
        let ch = refine_barrier(hyp, &sol.flux, c.t0, c.x0, levels, exec);
        let rep = verify_characteristic(&ch, sol, tol, sc.defaults.verify_cells, hyp.dx());
        let key = format!("characteristic/{k}");
        b.push(Metric::at_most(
            format!("{key}/lipschitz"),
            ch.curve.lipschitz_constant(),
            s_max * (1.0 + 1e-9),
        ));
        b.push(Metric::at_most(format!("{key}/speed_law_violation"), rep.violation_fraction(), 0.05));
        b.push(Metric::at_most(
            format!("{key}/left_barrier"),
            check_left_barrier(&ch, hyp, exec) as f64,
            0.0,
        ));
        b.push(Metric::at_most(
            format!("{key}/right_barrier"),
            check_right_barrier(&ch, epi, exec) as f64,
            0.0,
        ));
        let defect = ch.monotonicity_defects.iter().copied().fold(0.0, f64::min);
        b.push(Metric::at_least(format!("{key}/monotonicity"), defect, -hyp.dx()));
        if let Some(speed) = c.expect_speed {
            let dist = ch
                .curve
                .times
                .iter()
                .zip(&ch.curve.xs)
                .map(|(t, x)| (x - (c.x0 + speed * (t - c.t0))).abs())
                .fold(0.0, f64::max);
            b.push(Metric::at_most(format!("{key}/expected_path"), dist, c.expect_tol.unwrap_or(hyp.dx())));
        }
        b.value(format!("{key}/start"), (c.t0, c.x0));
        b.value(format!("{key}/end"), ch.position(sc.horizon));
        b.value(format!("{key}/level_gaps"), &ch.level_gaps);
        b.value(
            format!("{key}/kruzkov_violation_fraction"),
            rep.kruzkov_violation_measure / rep.horizon,
        );
        b.table(
            format!("characteristic_{k}.csv"),
            "t [time], x [length], u [normalized state], xprime and target_speed [length/time]",
            rep.to_csv(),
        );
    }
}

/// One row of a convergence table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub dx: f64,
    pub dv: f64,
    /// Largest hypograph flux-formula gap over surfaces and entropies.
    pub flux_gap: f64,
    /// Mean speed-law residual of the first characteristic.
    pub char_residual: f64,
    /// Largest hypograph pushforward discrepancy per unit perimeter.
    pub pushforward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// Fitted orders `p` in `err ~ n^-p` for the three columns.
    pub rates: [f64; 3],
}

impl ConvergenceTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,dx,dv,flux_gap,char_residual,pushforward\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.n, r.dx, r.dv, r.flux_gap, r.char_residual, r.pushforward
            ));
        }
        out
    }
}

/// Order `p` of the least-squares fit `log err = c - p log n`, ignoring
/// zero errors; `NaN` with fewer than two usable points.
fn fitted_order(ns: &[usize], errs: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = ns
        .iter()
        .zip(errs)
        .filter(|(_, e)| **e > 0.0)
        .map(|(n, e)| ((*n as f64).ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    -crate::flux_formula::linear_fit(&pts).0
}

/// Re-run the hypograph checks at `Nx = Nv = n` for each `n`.
pub fn convergence_study(sc: &Scenario, grids: &[usize], exec: Exec) -> Result<ConvergenceTable> {
    if grids.len() < 3 {
        return Err(Error::Config("a convergence study needs at least 3 grid levels".into()));
    }
    let sol = sc.solve()?;
    let mut rows = Vec::new();
    for &n in grids {
        let grid = GridSpec {
            nx: n,
            nv: n,
            ..sc.grid_spec()
        };
        let hyp = build_ensemble(&sol, Side::Hypograph, grid, exec)?;
        let mut flux_gap = 0.0_f64;
        for s in &sc.surfaces {
            let phi = s.phi.unwrap_or_else(|| sc.default_phi());
            for e in &sc.entropies {
                let pair = e.pair(&sol.flux, Anchor::ZeroAt0)?;
                let lag = lagrangian_flux_breakdown(&hyp, &s.vertices, &pair, &phi, exec)?;
                flux_gap = flux_gap.max((lag.total - trace_flux(&sol, &s.vertices, &pair, &phi)).abs());
            }
        }
        let char_residual = match sc.characteristics.first() {
            Some(c) => {
                let levels = c.levels.unwrap_or(sc.defaults.levels);
                let ch = refine_barrier(&hyp, &sol.flux, c.t0, c.x0, levels, exec);
                let rep = verify_characteristic(&ch, &sol, f64::INFINITY, sc.defaults.verify_cells, hyp.dx());
                rep.cells.iter().map(|c| c.residual()).sum::<f64>() / rep.cells.len() as f64
            }
            None => 0.0,
        };
        let (x0, x1) = hyp.interior();
        let pushforward = if x1 > x0 {
            let rects = dyadic_rectangles(x0, x1, 8);
            hyp.pushforward_check(&sol, sc.horizon, &rects, exec)
                .iter()
                .zip(&rects)
                .map(|(d, r)| d / r.perimeter())
                .fold(0.0, f64::max)
        } else {
            f64::NAN
        };
        rows.push(ConvergenceRow {
            n,
            dx: grid.dx(),
            dv: grid.dv(),
            flux_gap,
            char_residual,
            pushforward,
        });
    }
    let col = |f: fn(&ConvergenceRow) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    let ns: Vec<usize> = rows.iter().map(|r| r.n).collect();
    let rates = [
        fitted_order(&ns, &col(|r| r.flux_gap)),
        fitted_order(&ns, &col(|r| r.char_residual)),
        fitted_order(&ns, &col(|r| r.pushforward)),
    ];
    Ok(ConvergenceTable { rows, rates })
}

/// Trace error of the front-tracking solution at `t = T` for one mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshRow {
    pub mesh: f64,
    /// Largest error over the probe points.
    pub probe_error: f64,
    /// L1 error over the window.
    pub l1_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshTable {
    pub rows: Vec<MeshRow>,
    pub probes: Vec<f64>,
    /// `exact` for a single Riemann problem, otherwise the finest mesh over 8.
    pub reference: String,
    /// Fitted orders `p` in `err ~ mesh^p` for the two columns.
    pub rates: [f64; 2],
}

impl MeshTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("mesh,probe_error,l1_error\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{}\n", r.mesh, r.probe_error, r.l1_error));
        }
        out
    }
}

/// Entropy solution of the Riemann problem at `x0`, or the non-entropic
/// front when `mode` says so.
fn riemann_exact(flux: &Flux, ul: f64, ur: f64, x0: f64, mode: JumpMode) -> impl Fn(f64, f64) -> f64 + '_ {
    move |t: f64, x: f64| {
        let xi = (x - x0) / t;
        if ul < ur && mode == JumpMode::Entropic {
            if xi <= flux.df(ul) {
                ul
            } else if xi >= flux.df(ur) {
                ur
            } else {
                flux.sonic_level(xi).unwrap_or(f64::NAN)
            }
        } else if ul == ur {
            ul
        } else {
            let sigma = flux.rh_speed(ul, ur).unwrap_or(f64::NAN);
            if xi < sigma {
                ul
            } else {
                ur
            }
        }
    }
}

/// Re-run the front tracking at each rarefaction mesh and compare with the
/// exact solution at fixed points of the final time.
pub fn mesh_study(sc: &Scenario, meshes: &[f64]) -> Result<MeshTable> {
    if meshes.len() < 3 {
        return Err(Error::Config("a mesh study needs at least 3 meshes".into()));
    }
    if meshes.iter().any(|&m| !(m > 0.0 && m <= 1.0)) {
        return Err(Error::Config("meshes must lie in (0, 1]".into()));
    }
    let (data, flux, _) = sc.initial_data()?;
    let t = sc.horizon;
    let solve = |mesh: f64| evolve(&flux, &data, t, mesh, sc.interaction);
    let finest = meshes.iter().copied().fold(f64::INFINITY, f64::min) / 8.0;
    let (reference, exact): (String, Box<dyn Fn(f64, f64) -> f64>) = if data.values.len() == 2 {
        let f = riemann_exact(&flux, data.values[0], data.values[1], data.breakpoints[0], data.modes[0]);
        ("exact".into(), Box::new(f))
    } else {
        let r = solve(finest)?;
        (format!("mesh {finest}"), Box::new(move |t, x| r.sample(t, x)))
    };
    let (a, b) = (sc.grid.x_min, sc.grid.x_max);
    let probes: Vec<f64> = (1..=9).map(|k| a + (b - a) * k as f64 / 10.0).collect();
    let cells = 4096;
    let h = (b - a) / cells as f64;
    let mut rows = Vec::new();
    for &mesh in meshes {
        let sol = solve(mesh)?;
        let probe_error = probes
            .iter()
            .map(|&x| (sol.sample(t, x) - exact(t, x)).abs())
            .fold(0.0, f64::max);
        let l1_error = (0..cells)
            .map(|i| {
                let x = a + (i as f64 + 0.5) * h;
                (sol.sample(t, x) - exact(t, x)).abs() * h
            })
            .sum();
        rows.push(MeshRow {
            mesh,
            probe_error,
            l1_error,
        });
    }
    // err ~ mesh^p, i.e. order p against 1/mesh
    let inv: Vec<usize> = rows.iter().map(|r| (1.0 / r.mesh).round() as usize).collect();
    let col = |f: fn(&MeshRow) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    let rates = [
        fitted_order(&inv, &col(|r| r.probe_error)),
        fitted_order(&inv, &col(|r| r.l1_error)),
    ];
    Ok(MeshTable {
        rows,
        probes,
        reference,
        rates,
    })
}
