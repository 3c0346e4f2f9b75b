//! Vanishing-viscosity sweeps, vacuum-floor ladders and grid self-convergence.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{check_conservation, uniform_monitor, Recorder};
use crate::error::{Error, Result};
use crate::grid::{Field, Grid1D, Norms};
use crate::initdata::{
    build_eps_family, build_initial_data, DataFamilySpec, EpsFamilySpec, InitialData,
};
use crate::model::FluidParams;
use crate::solver::{run, RunOutput, Sink, SolverConfig, State, StepLog};

pub const DEFAULT_EPS_LADDER: [f64; 7] = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 3e-4, 1e-4];
pub const SWEEP_HEADER: &str = "eps,sup_err_c,sup_err_u,final_err_c,final_err_u,monitor";
/// Ladder entries clamped on more than this fraction of cells are left out of the fit.
pub const FLOOR_FRACTION_LIMIT: f64 = 0.01;
/// Fits below this coefficient of determination are not reported.
pub const MIN_R2: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataMode {
    /// Every run starts from the same `(rho0, u0)`.
    #[default]
    Shared,
    /// Viscous runs start from the epsilon-family data, the inviscid one from its limit.
    Family,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    pub eps_ladder: Vec<f64>,
    pub data_mode: DataMode,
    pub s_prime: usize,
    pub window_r: f64,
    pub t_end: f64,
    /// Common snapshot interval; `t_end / 10` when `None`.
    pub snapshot_dt: Option<f64>,
    pub grid: Grid1D,
    pub data: DataFamilySpec,
    pub solver: SolverConfig,
    /// Ladder entries made to fail on purpose, to exercise partial results.
    pub forced_failures: Vec<f64>,
}

impl SweepPlan {
    /// Default ladder on `[-L, L]` with `R = L/2` and `s' = 1`.
    pub fn standard(grid: Grid1D, data: DataFamilySpec, t_end: f64) -> Self {
        SweepPlan {
            eps_ladder: DEFAULT_EPS_LADDER.to_vec(),
            data_mode: DataMode::Shared,
            s_prime: 1,
            window_r: 0.5 * grid.half_width(),
            t_end,
            snapshot_dt: None,
            grid,
            data,
            solver: SolverConfig::default(),
            forced_failures: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.eps_ladder.is_empty() {
            return Err(Error::InvalidConfig("empty epsilon ladder".into()));
        }
        if self
            .eps_ladder
            .iter()
            .any(|e| !(*e >= 0.0 && e.is_finite()))
        {
            return Err(Error::InvalidConfig(
                "ladder entries must be finite and >= 0".into(),
            ));
        }
        if self.eps_ladder.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::InvalidConfig(
                "epsilon ladder must be strictly decreasing".into(),
            ));
        }
        if self.s_prime > 2 {
            return Err(Error::InvalidConfig(format!(
                "s_prime must be <= 2, got {}",
                self.s_prime
            )));
        }
        if !(self.window_r < self.grid.half_width()) {
            return Err(Error::WindowExceedsDomain {
                radius: self.window_r,
                half_width: self.grid.half_width(),
            });
        }
        if !(self.t_end > 0.0) {
            return Err(Error::InvalidConfig("sweep t_end must be positive".into()));
        }
        self.solver.validate()
    }

    fn config(&self) -> SolverConfig {
        SolverConfig {
            t_end: self.t_end,
            snapshot_dt: Some(self.snapshot_dt.unwrap_or(self.t_end / 10.0)),
            ..self.solver
        }
    }

    fn data_for(&self, p: &FluidParams, eps: f64) -> Result<InitialData> {
        match self.data_mode {
            DataMode::Family if eps > 0.0 => build_eps_family(
                &EpsFamilySpec { base: self.data },
                p,
                &self.grid,
                eps.min(1.0),
            ),
            _ => build_initial_data(&self.data, p, &self.grid),
        }
    }
}

/// One ladder entry of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsResult {
    pub eps: f64,
    pub sup_err_c: f64,
    pub sup_err_u: f64,
    pub final_err_c: f64,
    pub final_err_u: f64,
    /// `sup_t (|c|_3^2 + |u|_3^2 + eps |psi|^2_{D1 cap D2})`
    pub monitor: f64,
    pub max_floor_fraction: f64,
    /// Initial-data distance `|c0^eps - c0|_3` (zero in shared mode).
    pub data_err_c3: f64,
    pub failure: Option<String>,
}

impl EpsResult {
    /// Sup-in-time error of the pair `(c, u)`.
    pub fn sup_err(&self) -> f64 {
        self.sup_err_c.hypot(self.sup_err_u)
    }

    fn failed(eps: f64, e: &Error) -> Self {
        EpsResult {
            eps,
            sup_err_c: f64::NAN,
            sup_err_u: f64::NAN,
            final_err_c: f64::NAN,
            final_err_u: f64::NAN,
            monitor: f64::NAN,
            max_floor_fraction: f64::NAN,
            data_err_c3: f64::NAN,
            failure: Some(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderFit {
    pub order: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: usize,
}

impl OrderFit {
    pub fn reportable(&self) -> bool {
        self.r2 >= MIN_R2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub per_eps: Vec<EpsResult>,
    /// Least-squares fit of `log err` against `log eps` over the admissible entries.
    pub fit: Option<OrderFit>,
    pub euler_steps: usize,
    pub euler_snapshots: usize,
}

impl SweepResult {
    pub fn any_failed(&self) -> bool {
        self.per_eps.iter().any(|r| r.failure.is_some())
    }

    /// Sup errors strictly decrease along the ladder, for `c` and `u` separately.
    pub fn strictly_decreasing(&self) -> bool {
        self.per_eps
            .windows(2)
            .all(|w| w[1].sup_err_c < w[0].sup_err_c && w[1].sup_err_u < w[0].sup_err_u)
    }

    /// `max / min` of the uniform monitor over successful entries.
    pub fn monitor_spread(&self) -> f64 {
        let vals: Vec<f64> = self
            .per_eps
            .iter()
            .filter(|r| r.failure.is_none())
            .map(|r| r.monitor)
            .collect();
        let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        max / min
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(SWEEP_HEADER);
        out.push('\n');
        for r in &self.per_eps {
            let _ = writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.eps, r.sup_err_c, r.sup_err_u, r.final_err_c, r.final_err_u, r.monitor
            );
        }
        out
    }

    pub fn summary_line(&self) -> String {
        let failed = self.per_eps.iter().filter(|r| r.failure.is_some()).count();
        match self.fit {
            Some(f) if f.reportable() => format!(
                "sweep_summary fitted_order={:.6} r2={:.6} points={} failed={}",
                f.order, f.r2, f.points, failed
            ),
            Some(f) => format!(
                "sweep_summary fitted_order=unreported r2={:.6} points={} failed={}",
                f.r2, f.points, failed
            ),
            None => {
                format!("sweep_summary fitted_order=unreported r2=nan points=0 failed={failed}")
            }
        }
    }
}

/// Keeps the snapshots and the diagnostics of one run.
struct Collect {
    states: Vec<State>,
    rec: Recorder,
}

impl Sink for Collect {
    fn snapshot(&mut self, s: &State) -> Result<()> {
        self.states.push(s.clone());
        self.rec.snapshot(s)
    }

    fn step(&mut self, log: &StepLog) -> Result<()> {
        self.rec.step(log)
    }
}

fn run_collect(
    data: &InitialData,
    p: &FluidParams,
    cfg: &SolverConfig,
) -> Result<(Collect, RunOutput)> {
    let s0 = State::from_density(&data.rho0, &data.u0, p, cfg)?;
    let mut sink = Collect {
        states: Vec::new(),
        rec: Recorder::new(p),
    };
    let out = run(&s0, p, cfg, &mut sink)?;
    Ok((sink, out))
}

/// Least-squares line through `(x_i, y_i)`.
pub fn fit_line(x: &[f64], y: &[f64]) -> Option<OrderFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let order = sxy / sxx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    Some(OrderFit {
        order,
        intercept: my - order * mx,
        r2,
        points: n,
    })
}

/// Viscous runs along the ladder compared against the inviscid run on the same grid
/// and snapshot times.
pub fn run_sweep(plan: &SweepPlan, p: &FluidParams) -> Result<SweepResult> {
    plan.validate()?;
    let cfg = plan.config();
    let p_euler = p.with_epsilon(0.0)?;
    let base = build_initial_data(&plan.data, &p_euler, &plan.grid)?;
    let (euler, euler_out) =
        run_collect(&base, &p_euler, &cfg).map_err(|e| Error::EulerBlowup(Box::new(e)))?;
    let c0_ref = euler.states[0].c.clone();
    let norms = Norms::interior();

    let per_eps: Vec<EpsResult> = plan
        .eps_ladder
        .par_iter()
        .map(|&eps| {
            let attempt = || -> Result<EpsResult> {
                if plan.forced_failures.contains(&eps) {
                    return Err(Error::InvalidConfig(format!(
                        "forced failure at eps = {eps}"
                    )));
                }
                let pe = p.with_epsilon(eps)?;
                let data = plan.data_for(&pe, eps)?;
                let (run, out) = run_collect(&data, &pe, &cfg)?;
                if run.states.len() != euler.states.len() {
                    return Err(Error::InvalidConfig(
                        "snapshot times differ from the reference".into(),
                    ));
                }
                let mut r = EpsResult {
                    eps,
                    sup_err_c: 0.0,
                    sup_err_u: 0.0,
                    final_err_c: 0.0,
                    final_err_u: 0.0,
                    monitor: uniform_monitor(&run.rec.records)?.sup_monitor,
                    max_floor_fraction: out.max_floor_fraction,
                    data_err_c3: norms.hs(&run.states[0].c.sub(&c0_ref), 3)?,
                    failure: None,
                };
                for (a, b) in run.states.iter().zip(&euler.states) {
                    let ec = norms.windowed_hs(&a.c, &b.c, plan.s_prime, plan.window_r)?;
                    let eu = norms.windowed_hs(&a.u, &b.u, plan.s_prime, plan.window_r)?;
                    r.sup_err_c = r.sup_err_c.max(ec);
                    r.sup_err_u = r.sup_err_u.max(eu);
                    r.final_err_c = ec;
                    r.final_err_u = eu;
                }
                Ok(r)
            };
            attempt().unwrap_or_else(|e| EpsResult::failed(eps, &e))
        })
        .collect();

    let (xs, ys): (Vec<f64>, Vec<f64>) = per_eps
        .iter()
        .filter(|r| {
            r.failure.is_none()
                && r.eps > 0.0
                && r.sup_err() > 0.0
                && r.max_floor_fraction <= FLOOR_FRACTION_LIMIT
        })
        .map(|r| (r.eps.ln(), r.sup_err().ln()))
        .unzip();
    Ok(SweepResult {
        fit: fit_line(&xs, &ys),
        per_eps,
        euler_steps: euler_out.steps,
        euler_snapshots: euler.states.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EtaPlan {
    /// Floors, in decreasing order; the last one is the reference.
    pub eta_ladder: Vec<f64>,
    pub eps: f64,
    pub window_r: f64,
    pub t_end: f64,
    pub grid: Grid1D,
    pub data: DataFamilySpec,
    pub solver: SolverConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EtaReport {
    pub etas: Vec<f64>,
    /// Windowed H1 distance of the final `(c, u)` to the reference run.
    pub differences: Vec<f64>,
    pub mass_drifts: Vec<f64>,
    pub floor_fractions: Vec<f64>,
}

impl EtaReport {
    /// Differences decrease along the ladder, ignoring the reference itself.
    pub fn monotone(&self) -> bool {
        let d = &self.differences[..self.differences.len().saturating_sub(1)];
        d.windows(2).all(|w| w[1] < w[0])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("eta,difference,mass_drift,floor_fraction\n");
        for i in 0..self.etas.len() {
            let _ = writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e}",
                self.etas[i], self.differences[i], self.mass_drifts[i], self.floor_fractions[i]
            );
        }
        out
    }
}

pub fn run_eta_ladder(plan: &EtaPlan, p: &FluidParams) -> Result<EtaReport> {
    if plan.eta_ladder.is_empty() || plan.eta_ladder.iter().any(|e| !(*e >= 0.0)) {
        return Err(Error::InvalidConfig(
            "eta ladder must be nonempty and nonnegative".into(),
        ));
    }
    if plan.eta_ladder.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidConfig(
            "eta ladder must be non-increasing".into(),
        ));
    }
    if !(plan.window_r < plan.grid.half_width()) {
        return Err(Error::WindowExceedsDomain {
            radius: plan.window_r,
            half_width: plan.grid.half_width(),
        });
    }
    let pe = p.with_epsilon(plan.eps)?;
    let data = build_initial_data(&plan.data, &pe, &plan.grid)?;
    let runs: Vec<Result<(State, f64, f64)>> = plan
        .eta_ladder
        .iter()
        .map(|&eta| {
            let cfg = SolverConfig {
                eta,
                t_end: plan.t_end,
                ..plan.solver
            };
            cfg.validate()?;
            let (c, out) = run_collect(&data, &pe, &cfg)?;
            let drift = check_conservation(&c.rec.records, 0.0)
                .map(|r| r.mass_drift)
                .unwrap_or(0.0);
            Ok((out.final_state, drift, out.max_floor_fraction))
        })
        .collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let reference = &runs.last().expect("nonempty ladder").0;
    let norms = Norms::interior();
    let mut differences = Vec::with_capacity(runs.len());
    for (s, _, _) in &runs {
        let dc = norms.windowed_hs(&s.c, &reference.c, 1, plan.window_r)?;
        let du = norms.windowed_hs(&s.u, &reference.u, 1, plan.window_r)?;
        differences.push(dc.hypot(du));
    }
    Ok(EtaReport {
        etas: plan.eta_ladder.clone(),
        differences,
        mass_drifts: runs.iter().map(|r| r.1).collect(),
        floor_fractions: runs.iter().map(|r| r.2).collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinePlan {
    /// Cell counts, each the double of the previous.
    pub n_ladder: Vec<usize>,
    pub half_width: f64,
    pub eps: f64,
    pub t_end: f64,
    pub data: DataFamilySpec,
    pub solver: SolverConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineReport {
    pub ns: Vec<usize>,
    /// `|q_n - R q_2n|_2` for consecutive pairs, `R` averaging fine-cell pairs.
    pub diff_c: Vec<f64>,
    pub diff_u: Vec<f64>,
    /// `log2` of consecutive difference ratios.
    pub order_c: Vec<f64>,
    pub order_u: Vec<f64>,
}

impl RefineReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,diff_c,diff_u,order_c,order_u\n");
        for i in 0..self.diff_c.len() {
            let oc = if i == 0 {
                f64::NAN
            } else {
                self.order_c[i - 1]
            };
            let ou = if i == 0 {
                f64::NAN
            } else {
                self.order_u[i - 1]
            };
            let _ = writeln!(
                out,
                "{},{:.16e},{:.16e},{:.6},{:.6}",
                self.ns[i], self.diff_c[i], self.diff_u[i], oc, ou
            );
        }
        out
    }
}

/// Restricts a field on `2n` cells to `n` cells by pairwise averaging.
pub fn restrict(fine: &Field, coarse: &Grid1D) -> Result<Field> {
    if fine.len() != 2 * coarse.n() {
        return Err(Error::InvalidGrid(format!(
            "cannot restrict {} cells to {}",
            fine.len(),
            coarse.n()
        )));
    }
    let v = fine.values();
    Field::new(
        *coarse,
        (0..coarse.n())
            .map(|i| 0.5 * (v[2 * i] + v[2 * i + 1]))
            .collect(),
    )
}

/// Distance between a coarse field and a fine one restricted onto it.
pub fn self_difference(coarse: &Field, fine: &Field) -> Result<f64> {
    let r = restrict(fine, coarse.grid())?;
    Ok(Norms::interior().lp(&coarse.sub(&r), 2.0))
}

pub fn run_refinement(plan: &RefinePlan, p: &FluidParams) -> Result<RefineReport> {
    if plan.n_ladder.len() < 2 || plan.n_ladder.windows(2).any(|w| w[1] != 2 * w[0]) {
        return Err(Error::InvalidConfig(
            "n ladder must double at every entry".into(),
        ));
    }
    let pe = p.with_epsilon(plan.eps)?;
    let cfg = SolverConfig {
        t_end: plan.t_end,
        ..plan.solver
    };
    cfg.validate()?;
    let finals: Vec<Result<State>> = plan
        .n_ladder
        .iter()
        .map(|&n| {
            let g = Grid1D::new(plan.half_width, n)?;
            let d = build_initial_data(&plan.data, &pe, &g)?;
            let s0 = State::from_density(&d.rho0, &d.u0, &pe, &cfg)?;
            Ok(run(&s0, &pe, &cfg, &mut ())?.final_state)
        })
        .collect();
    let finals = finals.into_iter().collect::<Result<Vec<_>>>()?;
    let mut diff_c = Vec::new();
    let mut diff_u = Vec::new();
    for w in finals.windows(2) {
        diff_c.push(self_difference(&w[0].c, &w[1].c)?);
        diff_u.push(self_difference(&w[0].u, &w[1].u)?);
    }
    let orders = |d: &[f64]| {
        d.windows(2)
            .map(|w| (w[0] / w[1]).log2())
            .collect::<Vec<_>>()
    };
    Ok(RefineReport {
        ns: plan.n_ladder.clone(),
        order_c: orders(&diff_c),
        order_u: orders(&diff_u),
        diff_c,
        diff_u,
    })
}
