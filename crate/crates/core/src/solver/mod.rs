//! Time integration of the reformulated system
//!
//! ```text
//! h_t + u h_x + (delta-1)/2 h u_x = 0
//! c_t + u c_x + (gamma-1)/2 c u_x = 0
//! u_t + u u_x + 2/(gamma-1) c c_x - eps (h^2 + nu^2) lame u_xx = 2 delta eps/(delta-1) h psi stress u_x
//! ```
//!
//! with `psi = h_x`. Transport terms are explicit (centred differences plus a
//! local Lax-Friedrichs dissipation built from a linearly reconstructed
//! interface jump), the elliptic term is implicit. The two-stage IMEX pair has
//! Heun's method (SSP-RK2) as its explicit part and an L-stable diagonally
//! implicit part with coefficient `1 - 1/sqrt(2)`; the tridiagonal viscous solve
//! follows each explicit stage. With `eps = 0` the implicit part vanishes
//! identically and the scheme is Heun's method for the Euler equations.

mod tridiag;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{diff, Field, Grid1D, Norms};
use crate::model::{c_to_h, c_to_rho, rho_to_c, FluidParams, DEFAULT_C_MIN};

pub use tridiag::solve_tridiagonal;

/// Diagonal coefficient of the implicit part.
pub const IMEX_GAMMA: f64 = 1.0 - std::f64::consts::FRAC_1_SQRT_2;

/// Reformulated unknowns at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    pub h: Field,
    pub c: Field,
    pub u: Field,
}

impl State {
    /// Builds `(h, c, u)` from `(rho0, u0)` applying the vacuum floor of `cfg`.
    pub fn from_density(
        rho0: &Field,
        u0: &Field,
        p: &FluidParams,
        cfg: &SolverConfig,
    ) -> Result<State> {
        let grid = *rho0.grid();
        let c_floor = cfg.c_floor(p);
        let c_raw = rho_to_c(rho0.values(), p)?;
        let (c, h) = match cfg.data_floor {
            DataFloor::Clamp => {
                let c: Vec<f64> = c_raw.iter().map(|&v| v.max(c_floor)).collect();
                let h = c_to_h(&c, p, 0.0)?;
                (c, h)
            }
            DataFloor::Shift => {
                let shifted: Vec<f64> = c_raw.iter().map(|&v| v + c_floor).collect();
                let h = c_to_h(&shifted, p, 0.0)?;
                let c = c_raw.iter().map(|&v| v.max(c_floor)).collect();
                (c, h)
            }
        };
        Ok(State {
            t: 0.0,
            h: Field::new(grid, h)?,
            c: Field::new(grid, c)?,
            u: u0.clone(),
        })
    }

    /// State with `h` computed from `c`.
    pub fn from_sound_speed(c: Field, u: Field, p: &FluidParams) -> Result<State> {
        let h = Field::new(*c.grid(), c_to_h(c.values(), p, DEFAULT_C_MIN)?)?;
        Ok(State { t: 0.0, h, c, u })
    }

    pub fn grid(&self) -> &Grid1D {
        self.c.grid()
    }

    pub fn rho(&self, p: &FluidParams) -> Result<Field> {
        Field::new(*self.grid(), c_to_rho(self.c.values(), p)?)
    }

    pub fn psi(&self) -> Result<Field> {
        diff(&self.h, 1)
    }

    /// `|| h - (A gamma)^(-iota/2) c^iota ||_2`.
    pub fn compat_drift(&self, p: &FluidParams, norms: &Norms) -> f64 {
        let k = p.h_prefactor();
        let iota = p.iota();
        let d = self.h.zip_map(&self.c, |h, c| h - k * c.powf(iota));
        norms.lp(&d, 2.0)
    }

    pub fn check_finite(&self) -> Result<()> {
        for (name, f) in [("h", &self.h), ("c", &self.c), ("u", &self.u)] {
            if let Some(index) = f.values().iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteState { field: name, index });
            }
        }
        Ok(())
    }

    /// `x,rho,c,h,u,psi` snapshot table.
    pub fn to_csv(&self, p: &FluidParams) -> Result<String> {
        use std::fmt::Write as _;
        let rho = self.rho(p)?;
        let psi = self.psi()?;
        let g = self.grid();
        let mut out = String::from("x,rho,c,h,u,psi\n");
        for i in 0..g.n() {
            let _ = writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                g.x(i),
                rho.values()[i],
                self.c.values()[i],
                self.h.values()[i],
                self.u.values()[i],
                psi.values()[i]
            );
        }
        Ok(out)
    }
}

/// Per-step fixed-point iteration settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum Picard {
    Off,
    On { tol: f64, max_iter: usize },
}

/// How the vacuum floor enters the initial data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataFloor {
    /// `c0 <- max(c0, c_eta)`, `h0 = K c0^iota`.
    #[default]
    Clamp,
    /// `h0 = K (c0 + c_eta)^iota` with `c0` clamped only for positivity.
    Shift,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub cfl: f64,
    /// Artificial viscosity added to `h^2` in the elliptic coefficient.
    pub nu: f64,
    /// Vacuum floor in density units.
    pub eta: f64,
    pub data_floor: DataFloor,
    pub picard: Picard,
    pub t_end: f64,
    /// Snapshot every this many steps (ignored when `snapshot_dt` is set).
    pub snapshot_every: usize,
    /// When set, steps are shortened to land on multiples of this interval
    /// and a snapshot is taken at each of them.
    pub snapshot_dt: Option<f64>,
    /// Largest admissible `max(|u| + c)`.
    pub blowup_guard: f64,
    /// Outer cells pinned to their initial values on each side.
    pub boundary_cells: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            cfl: 0.4,
            nu: 0.0,
            eta: 1e-6,
            data_floor: DataFloor::Clamp,
            picard: Picard::Off,
            t_end: 0.1,
            snapshot_every: 1,
            snapshot_dt: None,
            blowup_guard: 1e6,
            boundary_cells: 2,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return bad(format!("cfl must lie in (0, 1], got {}", self.cfl));
        }
        if !(self.nu >= 0.0) || !(self.eta >= 0.0) {
            return bad("nu and eta must be nonnegative".into());
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be finite and >= 0, got {}", self.t_end));
        }
        if self.snapshot_every == 0 {
            return bad("snapshot_every must be >= 1".into());
        }
        if let Some(dt) = self.snapshot_dt {
            if !(dt > 0.0) {
                return bad(format!("snapshot_dt must be positive, got {dt}"));
            }
        }
        if self.boundary_cells < 2 {
            return bad("boundary_cells must be >= 2".into());
        }
        if let Picard::On { tol, max_iter } = self.picard {
            if !(tol > 0.0) || max_iter == 0 {
                return bad("picard needs tol > 0 and max_iter >= 1".into());
            }
        }
        Ok(())
    }

    /// `sqrt(A gamma) eta^((gamma-1)/2)`, never below [`DEFAULT_C_MIN`].
    pub fn c_floor(&self, p: &FluidParams) -> f64 {
        let c_eta =
            (p.entropy_constant() * p.gamma()).sqrt() * self.eta.powf(0.5 * (p.gamma() - 1.0));
        c_eta.max(DEFAULT_C_MIN)
    }
}

/// External source terms `(f_h, f_c, f_u)` added to the explicit part.
pub trait Forcing: Sync {
    fn eval(&self, t: f64, x: f64) -> [f64; 3];
}

/// Tendencies of the transport part.
#[derive(Debug, Clone, PartialEq)]
pub struct Tendencies {
    pub dh: Field,
    pub dc: Field,
    pub du: Field,
}

/// Coefficient fields of the linearized operator.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    pub u: Vec<f64>,
    pub c: Vec<f64>,
    pub h: Vec<f64>,
    pub ux: Vec<f64>,
    /// Local wave-speed bound per node.
    pub speed: Vec<f64>,
}

struct Ctx<'a> {
    p: &'a FluidParams,
    grid: Grid1D,
    nb: usize,
    lame: f64,
    nu: f64,
    /// `2 delta eps / (delta - 1) * stress`
    sigma: f64,
    forcing: Option<&'a dyn Forcing>,
}

fn central(v: &[f64], i: usize, dx: f64) -> f64 {
    (v[i + 1] - v[i - 1]) / (2.0 * dx)
}

// Jump wR - wL at interface i+1/2 from centred-slope linear reconstruction.
fn jump(w: &[f64], i: usize) -> f64 {
    0.25 * (-w[i + 2] + 3.0 * w[i + 1] - 3.0 * w[i] + w[i - 1])
}

impl<'a> Ctx<'a> {
    fn new(
        p: &'a FluidParams,
        grid: Grid1D,
        cfg: &SolverConfig,
        forcing: Option<&'a dyn Forcing>,
    ) -> Self {
        let ops = p.operators();
        Ctx {
            p,
            grid,
            nb: cfg.boundary_cells,
            lame: ops.lame_coeff,
            nu: cfg.nu,
            sigma: 2.0 * p.delta() * p.epsilon() / (p.delta() - 1.0) * ops.stress_coeff,
            forcing,
        }
    }

    fn interior(&self) -> std::ops::Range<usize> {
        self.nb..self.grid.n() - self.nb
    }

    fn coefficients(&self, h: &[f64], c: &[f64], u: &[f64]) -> Coefficients {
        let n = self.grid.n();
        let dx = self.grid.dx();
        let mut ux = vec![0.0; n];
        let mut speed = vec![0.0; n];
        for i in 0..n {
            let (dux, dhx) = if i == 0 || i == n - 1 {
                (0.0, 0.0)
            } else {
                (central(u, i, dx), central(h, i, dx))
            };
            ux[i] = dux;
            speed[i] = u[i].abs() + c[i].max(0.0) + (self.sigma * h[i] * dhx).abs();
        }
        Coefficients {
            u: u.to_vec(),
            c: c.to_vec(),
            h: h.to_vec(),
            ux,
            speed,
        }
    }

    /// Explicit tendencies (transport, dissipation, singular source, forcing).
    fn explicit(&self, h: &[f64], c: &[f64], u: &[f64], k: &Coefficients, t: f64) -> [Vec<f64>; 3] {
        let n = self.grid.n();
        let dx = self.grid.dx();
        let p = self.p;
        let kh = 0.5 * (p.delta() - 1.0);
        let kc = 0.5 * (p.gamma() - 1.0);
        let ku = 2.0 / (p.gamma() - 1.0);
        let mut dh = vec![0.0; n];
        let mut dc = vec![0.0; n];
        let mut du = vec![0.0; n];
        // interface speeds and jumps, index j <-> interface j+1/2
        let lo = self.nb - 1;
        let hi = n - self.nb;
        let mut flux = vec![[0.0; 3]; n];
        for j in lo..hi {
            let lam = k.speed[j].max(k.speed[j + 1]);
            flux[j] = [lam * jump(h, j), lam * jump(c, j), lam * jump(u, j)];
        }
        let inv2dx = 0.5 / dx;
        for i in self.interior() {
            let hx = central(h, i, dx);
            let cx = central(c, i, dx);
            let ux = central(u, i, dx);
            dh[i] = -k.u[i] * hx - kh * k.h[i] * k.ux[i] + (flux[i][0] - flux[i - 1][0]) * inv2dx;
            dc[i] = -k.u[i] * cx - kc * k.c[i] * ux + (flux[i][1] - flux[i - 1][1]) * inv2dx;
            du[i] = -k.u[i] * ux - ku * k.c[i] * cx
                + self.sigma * h[i] * hx * ux
                + (flux[i][2] - flux[i - 1][2]) * inv2dx;
            if let Some(f) = self.forcing {
                let [fh, fc, fu] = f.eval(t, self.grid.x(i));
                dh[i] += fh;
                dc[i] += fc;
                du[i] += fu;
            }
        }
        [dh, dc, du]
    }

    /// Solves `(I - theta dt eps (h^2+nu^2) lame d_xx) u = rhs` with pinned ends.
    fn implicit_solve(&self, rhs: &[f64], h: &[f64], theta_dt: f64) -> Result<Vec<f64>> {
        let eps = self.p.epsilon();
        if eps == 0.0 {
            return Ok(rhs.to_vec());
        }
        let n = self.grid.n();
        let dx = self.grid.dx();
        let mut lower = vec![0.0; n];
        let mut diag = vec![1.0; n];
        let mut upper = vec![0.0; n];
        for i in self.interior() {
            let k = theta_dt * eps * (h[i] * h[i] + self.nu * self.nu) * self.lame / (dx * dx);
            lower[i] = -k;
            upper[i] = -k;
            diag[i] = 1.0 + 2.0 * k;
        }
        solve_tridiagonal(&lower, &diag, &upper, rhs)
    }

    fn max_speed(&self, k: &Coefficients) -> f64 {
        k.speed.iter().fold(
            0.0,
            |m: f64, &v| if v.is_nan() { f64::NAN } else { m.max(v) },
        )
    }

    /// One IMEX step of length `dt`; `frozen` switches to the linearized operator.
    fn imex(&self, s: &State, dt: f64, frozen: Option<&Coefficients>) -> Result<State> {
        let g = IMEX_GAMMA;
        let n = self.grid.n();
        let (h, c, u) = (s.h.values(), s.c.values(), s.u.values());

        let u1 = self.implicit_solve(u, h, g * dt)?;
        let d1: Vec<f64> = if self.p.epsilon() == 0.0 {
            vec![0.0; n]
        } else {
            u1.iter().zip(u).map(|(a, b)| (a - b) / (g * dt)).collect()
        };
        let own1;
        let k1 = match frozen {
            Some(k) => k,
            None => {
                own1 = self.coefficients(h, c, &u1);
                &own1
            }
        };
        let [eh1, ec1, eu1] = self.explicit(h, c, &u1, k1, s.t);

        let h2: Vec<f64> = (0..n).map(|i| h[i] + dt * eh1[i]).collect();
        let c2: Vec<f64> = (0..n).map(|i| c[i] + dt * ec1[i]).collect();
        let u2s: Vec<f64> = (0..n)
            .map(|i| u[i] + dt * eu1[i] + dt * (1.0 - 2.0 * g) * d1[i])
            .collect();
        let u2 = self.implicit_solve(&u2s, &h2, g * dt)?;
        let d2: Vec<f64> = if self.p.epsilon() == 0.0 {
            vec![0.0; n]
        } else {
            u2.iter()
                .zip(&u2s)
                .map(|(a, b)| (a - b) / (g * dt))
                .collect()
        };
        let own2;
        let k2 = match frozen {
            Some(k) => k,
            None => {
                own2 = self.coefficients(&h2, &c2, &u2);
                &own2
            }
        };
        let [eh2, ec2, eu2] = self.explicit(&h2, &c2, &u2, k2, s.t + dt);

        let half = 0.5 * dt;
        let hn: Vec<f64> = (0..n).map(|i| h[i] + half * (eh1[i] + eh2[i])).collect();
        let cn: Vec<f64> = (0..n).map(|i| c[i] + half * (ec1[i] + ec2[i])).collect();
        let un: Vec<f64> = (0..n)
            .map(|i| u[i] + half * (eu1[i] + eu2[i]) + half * (d1[i] + d2[i]))
            .collect();
        Ok(State {
            t: s.t + dt,
            h: Field::from_raw(self.grid, hn),
            c: Field::from_raw(self.grid, cn),
            u: Field::from_raw(self.grid, un),
        })
    }
}

/// Clamps `c` at the floor and recomputes `h` where it fires (or where `h`
/// lost positivity). Returns the number of clamped cells.
fn apply_floor(s: &mut State, p: &FluidParams, c_floor: f64) -> usize {
    let k = p.h_prefactor();
    let iota = p.iota();
    let mut hits = 0;
    let n = s.c.len();
    for i in 0..n {
        let c = s.c.values()[i];
        let h = s.h.values()[i];
        if c < c_floor || !(h > 0.0) {
            let cf = c.max(c_floor);
            s.c.values_mut()[i] = cf;
            s.h.values_mut()[i] = k * cf.powf(iota);
            hits += 1;
        }
    }
    hits
}

/// Transport tendencies `(dh, dc, du_hyp)` without the viscous source.
pub fn rhs_hyperbolic(s: &State, p: &FluidParams) -> Result<Tendencies> {
    s.check_finite()?;
    let inviscid = p.with_epsilon(0.0)?;
    let ctx = Ctx::new(&inviscid, *s.grid(), &SolverConfig::default(), None);
    let (h, c, u) = (s.h.values(), s.c.values(), s.u.values());
    let k = ctx.coefficients(h, c, u);
    let [dh, dc, du] = ctx.explicit(h, c, u, &k, s.t);
    let g = *s.grid();
    Ok(Tendencies {
        dh: Field::from_raw(g, dh),
        dc: Field::from_raw(g, dc),
        du: Field::from_raw(g, du),
    })
}

/// `2 delta eps/(delta-1) h psi (2 alpha + beta) u_x` pointwise.
pub fn rhs_singular_source(s: &State, p: &FluidParams) -> Result<Field> {
    s.check_finite()?;
    let sigma = 2.0 * p.delta() * p.epsilon() / (p.delta() - 1.0) * p.operators().stress_coeff;
    let psi = diff(&s.h, 1)?;
    let ux = diff(&s.u, 1)?;
    let vals = (0..s.h.len())
        .map(|i| sigma * s.h.values()[i] * psi.values()[i] * ux.values()[i])
        .collect();
    Ok(Field::from_raw(*s.grid(), vals))
}

/// Backward-Euler solve of the viscous term over `dt`.
pub fn implicit_viscous_step(
    u_in: &Field,
    h: &Field,
    dt: f64,
    p: &FluidParams,
    cfg: &SolverConfig,
) -> Result<Field> {
    if !(dt > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "dt must be positive, got {dt}"
        )));
    }
    if p.epsilon() == 0.0 {
        return Ok(u_in.clone());
    }
    let ctx = Ctx::new(p, *u_in.grid(), cfg, None);
    let out = ctx.implicit_solve(u_in.values(), h.values(), dt)?;
    Ok(Field::from_raw(*u_in.grid(), out))
}

/// One Heun step of `h_t + u h_x + (delta-1)/2 h u_x = 0` with `u` frozen,
/// using the same spatial operator as the full scheme. `dt` may be negative.
pub fn transport_substep(h: &Field, u: &Field, dt: f64, p: &FluidParams) -> Result<Field> {
    let inviscid = p.with_epsilon(0.0)?;
    let grid = *h.grid();
    let ctx = Ctx::new(&inviscid, grid, &SolverConfig::default(), None);
    let zero = vec![0.0; grid.n()];
    let hx = |hv: &[f64]| {
        let mut k = ctx.coefficients(hv, &zero, u.values());
        // frozen advection speed and frozen u_x; h enters linearly
        k.speed = u.values().iter().map(|v| v.abs()).collect();
        ctx.explicit_linear_h(hv, &k)
    };
    let e1 = hx(h.values());
    let h1: Vec<f64> = h
        .values()
        .iter()
        .zip(&e1)
        .map(|(a, b)| a + dt * b)
        .collect();
    let e2 = hx(&h1);
    let out = (0..grid.n())
        .map(|i| h.values()[i] + 0.5 * dt * (e1[i] + e2[i]))
        .collect();
    Ok(Field::from_raw(grid, out))
}

impl Ctx<'_> {
    // h-equation with the source term linear in h (coefficient u_x frozen).
    fn explicit_linear_h(&self, h: &[f64], k: &Coefficients) -> Vec<f64> {
        let n = self.grid.n();
        let dx = self.grid.dx();
        let kh = 0.5 * (self.p.delta() - 1.0);
        let mut dh = vec![0.0; n];
        let mut flux = vec![0.0; n];
        for j in self.nb - 1..n - self.nb {
            flux[j] = k.speed[j].max(k.speed[j + 1]) * jump(h, j);
        }
        for i in self.interior() {
            dh[i] = -k.u[i] * central(h, i, dx) - kh * h[i] * k.ux[i]
                + (flux[i] - flux[i - 1]) * 0.5 / dx;
        }
        dh
    }
}

/// Time step from the CFL condition, or an error if the state blew up.
pub fn stable_dt(s: &State, p: &FluidParams, cfg: &SolverConfig) -> Result<f64> {
    let ctx = Ctx::new(p, *s.grid(), cfg, None);
    let k = ctx.coefficients(s.h.values(), s.c.values(), s.u.values());
    let speed = ctx.max_speed(&k);
    check_speed(s.t, speed, cfg)?;
    Ok(cfg.cfl * s.grid().dx() / speed.max(1e-300))
}

fn check_speed(t: f64, speed: f64, cfg: &SolverConfig) -> Result<()> {
    if !speed.is_finite() || speed > cfg.blowup_guard {
        return Err(Error::BlowupDetected {
            t,
            max_speed: speed,
        });
    }
    Ok(())
}

/// Outcome of one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: State,
    pub dt: f64,
    pub max_speed: f64,
    pub picard_iters: usize,
    pub floor_hits: usize,
}

/// Stepper bound to one parameter set, configuration and optional forcing.
pub struct Stepper<'a> {
    p: FluidParams,
    cfg: SolverConfig,
    forcing: Option<&'a dyn Forcing>,
}

impl<'a> Stepper<'a> {
    pub fn new(p: &FluidParams, cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Stepper {
            p: *p,
            cfg: *cfg,
            forcing: None,
        })
    }

    pub fn with_forcing(mut self, forcing: &'a dyn Forcing) -> Self {
        self.forcing = Some(forcing);
        self
    }

    pub fn params(&self) -> &FluidParams {
        &self.p
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    fn ctx(&self, grid: Grid1D) -> Ctx<'_> {
        Ctx::new(&self.p, grid, &self.cfg, self.forcing)
    }

    /// CFL step size and the wave speed it was derived from.
    pub fn cfl_dt(&self, s: &State) -> Result<(f64, f64)> {
        s.check_finite()?;
        let ctx = self.ctx(*s.grid());
        let k = ctx.coefficients(s.h.values(), s.c.values(), s.u.values());
        let speed = ctx.max_speed(&k);
        check_speed(s.t, speed, &self.cfg)?;
        Ok((self.cfg.cfl * s.grid().dx() / speed.max(1e-300), speed))
    }

    /// Nonlinear IMEX step of exactly `dt`.
    pub fn step_dt(&self, s: &State, dt: f64) -> Result<StepOutcome> {
        let ctx = self.ctx(*s.grid());
        let mut next = ctx.imex(s, dt, None)?;
        let floor_hits = apply_floor(&mut next, &self.p, self.cfg.c_floor(&self.p));
        self.finish(next, dt, 0, floor_hits)
    }

    fn finish(
        &self,
        next: State,
        dt: f64,
        picard_iters: usize,
        floor_hits: usize,
    ) -> Result<StepOutcome> {
        next.check_finite()?;
        let ctx = self.ctx(*next.grid());
        let k = ctx.coefficients(next.h.values(), next.c.values(), next.u.values());
        let max_speed = ctx.max_speed(&k);
        check_speed(next.t, max_speed, &self.cfg)?;
        Ok(StepOutcome {
            state: next,
            dt,
            max_speed,
            picard_iters,
            floor_hits,
        })
    }

    /// One step with the CFL time step.
    pub fn step(&self, s: &State) -> Result<StepOutcome> {
        let (dt, _) = self.cfl_dt(s)?;
        self.step_dt(s, dt)
    }

    /// Linear step with coefficients frozen at `k`.
    pub fn linear_step(&self, s: &State, dt: f64, k: &Coefficients) -> Result<State> {
        Ok(self.linear_step_counted(s, dt, k)?.0)
    }

    fn linear_step_counted(&self, s: &State, dt: f64, k: &Coefficients) -> Result<(State, usize)> {
        let ctx = self.ctx(*s.grid());
        let mut next = ctx.imex(s, dt, Some(k))?;
        let hits = apply_floor(&mut next, &self.p, self.cfg.c_floor(&self.p));
        Ok((next, hits))
    }

    /// Coefficients of the linearization around the midpoint of `s` and `w`.
    pub fn midpoint_coefficients(&self, s: &State, w: &State) -> Coefficients {
        let avg = |a: &Field, b: &Field| -> Vec<f64> {
            a.values()
                .iter()
                .zip(b.values())
                .map(|(x, y)| 0.5 * (x + y))
                .collect()
        };
        let ctx = self.ctx(*s.grid());
        ctx.coefficients(&avg(&s.h, &w.h), &avg(&s.c, &w.c), &avg(&s.u, &w.u))
    }

    /// Picard iteration seeded with the plain step; coefficients are frozen at
    /// the midpoint of the start state and the current iterate.
    pub fn step_picard(&self, s: &State) -> Result<StepOutcome> {
        self.step_picard_with(s, Linearization::Midpoint)
    }

    pub fn step_picard_with(&self, s: &State, lin: Linearization) -> Result<StepOutcome> {
        let seed = self.step(s)?;
        self.picard_from(s, seed, &lin)
    }

    /// Picard step with a prescribed `dt`.
    pub fn step_picard_dt(&self, s: &State, dt: f64) -> Result<StepOutcome> {
        let seed = self.step_dt(s, dt)?;
        self.picard_from(s, seed, &Linearization::Midpoint)
    }

    // Iterates w_{k+1} = Phi(w_k) from the seed and stops at the first k with
    // |w_{k+1} - w_k| < tol, returning w_k.
    fn picard_from(
        &self,
        s: &State,
        seed: StepOutcome,
        lin: &Linearization,
    ) -> Result<StepOutcome> {
        let Picard::On { tol, max_iter } = self.cfg.picard else {
            return Err(Error::InvalidConfig(
                "picard iteration requires picard = on".into(),
            ));
        };
        let dt = seed.dt;
        let mut current = seed.state;
        let mut hits = seed.floor_hits;
        let mut residual = f64::INFINITY;
        for k in 0..max_iter {
            let coeffs = match lin {
                Linearization::Midpoint => self.midpoint_coefficients(s, &current),
                Linearization::Fixed(c) => c.clone(),
            };
            let (next, next_hits) = self.linear_step_counted(s, dt, &coeffs)?;
            residual = state_distance(&next, &current);
            if residual < tol {
                return self.finish(current, dt, k, hits);
            }
            current = next;
            hits = next_hits;
        }
        Err(Error::PicardNoConvergence {
            iterations: max_iter,
            residual,
        })
    }

    /// Successive differences `|w_{k+1} - w_k|` of the midpoint iteration.
    pub fn picard_residuals(&self, s: &State, iterations: usize) -> Result<Vec<f64>> {
        let seed = self.step(s)?;
        let mut current = seed.state;
        let mut out = Vec::with_capacity(iterations);
        for _ in 0..iterations {
            let coeffs = self.midpoint_coefficients(s, &current);
            let next = self.linear_step(s, seed.dt, &coeffs)?;
            out.push(state_distance(&next, &current));
            current = next;
        }
        Ok(out)
    }

    /// Single step, iterated when Picard is switched on.
    pub fn advance(&self, s: &State) -> Result<StepOutcome> {
        match self.cfg.picard {
            Picard::Off => self.step(s),
            Picard::On { .. } => self.step_picard(s),
        }
    }
}

/// How [`Stepper::step_picard_with`] freezes coefficients.
#[derive(Debug, Clone, PartialEq)]
pub enum Linearization {
    Midpoint,
    /// Iterate-independent coefficients: the linear problem.
    Fixed(Coefficients),
}

/// Discrete L2 distance over all three unknowns.
pub fn state_distance(a: &State, b: &State) -> f64 {
    let n = Norms::full();
    let dh = n.lp(&a.h.sub(&b.h), 2.0);
    let dc = n.lp(&a.c.sub(&b.c), 2.0);
    let du = n.lp(&a.u.sub(&b.u), 2.0);
    (dh * dh + dc * dc + du * du).sqrt()
}

/// Free-function form of [`Stepper::step`].
pub fn step(s: &State, p: &FluidParams, cfg: &SolverConfig) -> Result<State> {
    Ok(Stepper::new(p, cfg)?.step(s)?.state)
}

/// Free-function form of [`Stepper::step_picard`]; returns the iteration count.
pub fn step_picard(s: &State, p: &FluidParams, cfg: &SolverConfig) -> Result<(State, usize)> {
    let out = Stepper::new(p, cfg)?.step_picard(s)?;
    Ok((out.state, out.picard_iters))
}

/// One line of the run log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLog {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub max_speed: f64,
    pub picard_iters: usize,
    pub floor_hits: usize,
}

/// Receives snapshots and step logs during [`run`].
pub trait Sink {
    fn snapshot(&mut self, state: &State) -> Result<()>;
    fn step(&mut self, _log: &StepLog) -> Result<()> {
        Ok(())
    }
}

impl Sink for () {
    fn snapshot(&mut self, _state: &State) -> Result<()> {
        Ok(())
    }
}

/// Keeps every snapshot in memory.
#[derive(Debug, Default, Clone)]
pub struct Snapshots(pub Vec<State>);

impl Sink for Snapshots {
    fn snapshot(&mut self, state: &State) -> Result<()> {
        self.0.push(state.clone());
        Ok(())
    }
}

/// Summary of a finished integration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub final_state: State,
    pub steps: usize,
    pub snapshots: usize,
    /// Largest fraction of cells clamped by the floor in any step.
    pub max_floor_fraction: f64,
    pub total_floor_hits: usize,
}

/// Integrates to `cfg.t_end`, calling `sink` at t = 0, at every snapshot and at the end.
pub fn run(
    initial: &State,
    p: &FluidParams,
    cfg: &SolverConfig,
    sink: &mut dyn Sink,
) -> Result<RunOutput> {
    run_with(&Stepper::new(p, cfg)?, initial, sink)
}

pub fn run_with(stepper: &Stepper<'_>, initial: &State, sink: &mut dyn Sink) -> Result<RunOutput> {
    let cfg = *stepper.config();
    initial.check_finite()?;
    let t_end = cfg.t_end;
    let n = initial.grid().n() as f64;
    let mut state = initial.clone();
    sink.snapshot(&state)?;
    let mut out = RunOutput {
        final_state: state.clone(),
        steps: 0,
        snapshots: 1,
        max_floor_fraction: 0.0,
        total_floor_hits: 0,
    };
    let mut next_snap = 1usize;
    // relative slack so that round-off does not create sliver steps
    let tiny = 1e-12 * t_end.max(1.0);
    while state.t < t_end - tiny {
        let wrap = |e: Error| Error::StepFailed {
            t: state.t,
            source: Box::new(e),
        };
        let (mut dt, _) = stepper.cfl_dt(&state).map_err(wrap)?;
        let mut target = t_end;
        if let Some(sdt) = cfg.snapshot_dt {
            target = target.min(next_snap as f64 * sdt);
        }
        let mut lands = false;
        if state.t + dt >= target - tiny {
            dt = target - state.t;
            lands = true;
        }
        let mut outcome = match cfg.picard {
            Picard::Off => stepper.step_dt(&state, dt),
            Picard::On { .. } => stepper.step_picard_dt(&state, dt),
        }
        .map_err(wrap)?;
        if lands {
            // snap exactly onto the target time
            outcome.state.t = target;
        }
        out.steps += 1;
        out.total_floor_hits += outcome.floor_hits;
        out.max_floor_fraction = out.max_floor_fraction.max(outcome.floor_hits as f64 / n);
        state = outcome.state;
        sink.step(&StepLog {
            step: out.steps,
            t: state.t,
            dt: outcome.dt,
            max_speed: outcome.max_speed,
            picard_iters: outcome.picard_iters,
            floor_hits: outcome.floor_hits,
        })?;
        let at_end = state.t >= t_end - tiny;
        let snap = match cfg.snapshot_dt {
            Some(_) => {
                if lands && !at_end {
                    next_snap += 1;
                    true
                } else {
                    at_end
                }
            }
            None => out.steps.is_multiple_of(cfg.snapshot_every) || at_end,
        };
        if snap {
            sink.snapshot(&state)?;
            out.snapshots += 1;
        }
    }
    out.final_state = state;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::initdata::{build_initial_data, DataFamilySpec};
    use crate::model::RawParams;

    fn params(eps: f64) -> FluidParams {
        FluidParams::new(&RawParams {
            epsilon: eps,
            ..RawParams::default()
        })
        .unwrap()
    }

    fn pulse(p: &FluidParams, n: usize) -> State {
        let g = Grid1D::new(5.0, n).unwrap();
        let d = build_initial_data(&DataFamilySpec::default(), p, &g).unwrap();
        State::from_density(&d.rho0, &d.u0, p, &SolverConfig::default()).unwrap()
    }

    fn uniform(p: &FluidParams, g: Grid1D, c: f64, u: f64) -> State {
        State::from_sound_speed(g.sample(|_| c), g.sample(|_| u), p).unwrap()
    }

    #[test]
    fn hyperbolic_vanishes_on_constant_states() {
        let p = params(0.1);
        let g = Grid1D::new(3.0, 64).unwrap();
        for u in [0.0, 0.7] {
            let t = rhs_hyperbolic(&uniform(&p, g, 0.8, u), &p).unwrap();
            for f in [&t.dh, &t.dc, &t.du] {
                assert!(f.values().iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn hyperbolic_rejects_nan() {
        let p = params(0.1);
        let mut s = pulse(&p, 64);
        s.u.values_mut()[10] = f64::NAN;
        assert!(matches!(
            rhs_hyperbolic(&s, &p),
            Err(Error::NonFiniteState {
                field: "u",
                index: 10
            })
        ));
    }

    #[test]
    fn implicit_is_identity_without_viscosity() {
        let p = params(0.0);
        let g = Grid1D::new(3.0, 64).unwrap();
        let u = g.sample(|x| (3.0 * x).sin() + x * x);
        let out = implicit_viscous_step(&u, &g.sample(|_| 2.0), 0.3, &p, &SolverConfig::default())
            .unwrap();
        assert_eq!(out, u);
    }

    #[test]
    fn implicit_damps_sine_by_backward_euler_factor() {
        let eps = 0.05;
        let p = params(eps);
        let k = 2.0;
        // whole number of periods on [-L, L] so the pinned ends sit on the sine
        let half = 4.0 * std::f64::consts::PI / k;
        let g = Grid1D::new(half, 800).unwrap();
        let u = g.sample(|x| (k * x).sin());
        let dt = 0.1;
        let out = implicit_viscous_step(&u, &g.sample(|_| 1.0), dt, &p, &SolverConfig::default())
            .unwrap();
        let dx = g.dx();
        let s2 = (0.5 * k * dx).sin().powi(2);
        let discrete = 1.0 / (1.0 + dt * eps * 2.0 * 4.0 * s2 / (dx * dx));
        let exact = 1.0 / (1.0 + dt * eps * 2.0 * k * k);
        for i in 200..600 {
            let ui = u.values()[i];
            if ui.abs() > 0.5 {
                let factor = out.values()[i] / ui;
                assert!(
                    (factor - discrete).abs() < 1e-8,
                    "node {i}: {factor} vs {discrete}"
                );
                assert!((factor - exact).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn implicit_preserves_constants() {
        let p = params(0.3);
        let g = Grid1D::new(3.0, 100).unwrap();
        let h = g.sample(|x| 1.0 + x * x);
        let out = implicit_viscous_step(&g.sample(|_| 1.5), &h, 10.0, &p, &SolverConfig::default())
            .unwrap();
        assert!(out.values().iter().all(|v| (v - 1.5).abs() < 1e-13));
    }

    #[test]
    fn singular_source_examples() {
        let g = Grid1D::new(4.005, 801).unwrap();
        let h = g.sample(|x| (-x * x).exp());
        let c = g.sample(|_| 1.0);
        let u = g.sample(|x| x);
        let p = FluidParams::new(&RawParams {
            delta: 0.5,
            epsilon: 1.0,
            ..RawParams::default()
        })
        .unwrap();
        let s = State {
            t: 0.0,
            h,
            c: c.clone(),
            u: u.clone(),
        };
        let f = rhs_singular_source(&s, &p).unwrap();
        assert!((g.x(450) - 0.5).abs() < 1e-12);
        let want = 8.0 * 0.5 * (-0.5f64).exp();
        assert!((want - 2.4261).abs() < 1e-4);
        assert!((f.values()[450] - want).abs() < 1e-4 * want);

        let zero = rhs_singular_source(&s, &p.with_epsilon(0.0).unwrap()).unwrap();
        assert!(zero.values().iter().all(|&v| v == 0.0));
        let flat = State {
            t: 0.0,
            h: g.sample(|_| 2.0),
            c,
            u,
        };
        assert!(rhs_singular_source(&flat, &p)
            .unwrap()
            .values()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn vacuum_rest_state_is_fixed() {
        let p = params(0.01);
        let cfg = SolverConfig::default();
        let g = Grid1D::new(5.0, 128).unwrap();
        let s = uniform(&p, g, cfg.c_floor(&p), 0.0);
        let next = Stepper::new(&p, &cfg).unwrap().step(&s).unwrap();
        assert_eq!(next.state.c, s.c);
        assert_eq!(next.state.h, s.h);
        assert_eq!(next.state.u, s.u);
        assert!(next.state.t > 0.0);
    }

    #[test]
    fn transport_substep_reverses() {
        let p = params(0.0);
        let g = Grid1D::new(4.0, 200).unwrap();
        let h = g.sample(|x| 1.0 + 0.5 * (-x * x).exp());
        let u = g.sample(|x| 0.4 * (-(x - 0.3) * (x - 0.3)).exp());
        let err = |dt: f64| {
            let fwd = transport_substep(&h, &u, dt, &p).unwrap();
            let back = transport_substep(&fwd, &u, -dt, &p).unwrap();
            back.sub(&h).max_abs()
        };
        let (e1, e2) = (err(0.02), err(0.01));
        assert!(e1 < 1e-6 && e2 < e1 / 8.0, "{e1} {e2}");
    }

    #[test]
    fn picard_with_huge_tolerance_returns_seed() {
        let p = params(0.01);
        let cfg = SolverConfig {
            picard: Picard::On {
                tol: 1e30,
                max_iter: 5,
            },
            ..SolverConfig::default()
        };
        let st = Stepper::new(&p, &cfg).unwrap();
        let s = pulse(&p, 200);
        let plain = st.step(&s).unwrap();
        let iter = st.step_picard(&s).unwrap();
        assert_eq!(iter.picard_iters, 0);
        assert_eq!(iter.state, plain.state);
    }

    #[test]
    fn picard_on_linear_problem_takes_one_iteration() {
        let p = params(0.01);
        let cfg = SolverConfig {
            picard: Picard::On {
                tol: 1e-12,
                max_iter: 10,
            },
            ..SolverConfig::default()
        };
        let st = Stepper::new(&p, &cfg).unwrap();
        let s = pulse(&p, 200);
        let frozen = st.midpoint_coefficients(&s, &s);
        let out = st
            .step_picard_with(&s, Linearization::Fixed(frozen))
            .unwrap();
        assert_eq!(out.picard_iters, 1);
    }

    #[test]
    fn picard_contracts_on_smooth_state() {
        let p = params(0.01);
        let cfg = SolverConfig {
            cfl: 0.1,
            picard: Picard::On {
                tol: 1e-10,
                max_iter: 20,
            },
            ..SolverConfig::default()
        };
        let st = Stepper::new(&p, &cfg).unwrap();
        let s = pulse(&p, 400);
        let out = st.step_picard(&s).unwrap();
        assert!(out.picard_iters <= 5, "{} iterations", out.picard_iters);
        let r = st.picard_residuals(&s, 4).unwrap();
        for w in r.windows(2) {
            assert!(w[1] <= 0.5 * w[0], "{r:?}");
        }
    }

    #[test]
    fn picard_reports_no_convergence() {
        let p = params(0.01);
        let cfg = SolverConfig {
            picard: Picard::On {
                tol: 1e-300,
                max_iter: 2,
            },
            ..SolverConfig::default()
        };
        let st = Stepper::new(&p, &cfg).unwrap();
        let err = st.step_picard(&pulse(&p, 100)).unwrap_err();
        assert!(matches!(
            err,
            Error::PicardNoConvergence { iterations: 2, .. }
        ));
    }

    #[test]
    fn zero_time_run_keeps_initial_state() {
        let p = params(0.01);
        let cfg = SolverConfig {
            t_end: 0.0,
            ..SolverConfig::default()
        };
        let s = pulse(&p, 100);
        let mut snaps = Snapshots::default();
        let out = run(&s, &p, &cfg, &mut snaps).unwrap();
        assert_eq!(out.steps, 0);
        assert_eq!(snaps.0, vec![s.clone()]);
        assert_eq!(out.final_state, s);
    }

    #[test]
    fn runs_are_bit_identical() {
        let p = params(0.01);
        let cfg = SolverConfig {
            t_end: 0.05,
            ..SolverConfig::default()
        };
        let s = pulse(&p, 200);
        let a = run(&s, &p, &cfg, &mut ()).unwrap();
        let b = run(&s, &p, &cfg, &mut ()).unwrap();
        assert_eq!(
            a.final_state.to_csv(&p).unwrap(),
            b.final_state.to_csv(&p).unwrap()
        );
    }

    #[test]
    fn snapshots_land_on_interval() {
        let p = params(0.01);
        let cfg = SolverConfig {
            t_end: 0.1,
            snapshot_dt: Some(0.025),
            ..SolverConfig::default()
        };
        let mut snaps = Snapshots::default();
        run(&pulse(&p, 200), &p, &cfg, &mut snaps).unwrap();
        let times: Vec<f64> = snaps.0.iter().map(|s| s.t).collect();
        assert_eq!(times.len(), 5);
        for (k, t) in times.iter().enumerate() {
            assert!((t - 0.025 * k as f64).abs() < 1e-14, "{times:?}");
        }
    }

    #[test]
    fn blowup_guard_trips() {
        let p = params(0.01);
        let cfg = SolverConfig {
            blowup_guard: 0.5,
            ..SolverConfig::default()
        };
        let err = run(&pulse(&p, 100), &p, &cfg, &mut ()).unwrap_err();
        assert!(matches!(err, Error::StepFailed { .. }));
        assert!(err.is_blowup());
    }

    #[test]
    fn config_validation() {
        let bad = [
            SolverConfig {
                cfl: 0.0,
                ..SolverConfig::default()
            },
            SolverConfig {
                cfl: 1.5,
                ..SolverConfig::default()
            },
            SolverConfig {
                picard: Picard::On {
                    tol: 0.0,
                    max_iter: 3,
                },
                ..SolverConfig::default()
            },
            SolverConfig {
                picard: Picard::On {
                    tol: 1e-8,
                    max_iter: 0,
                },
                ..SolverConfig::default()
            },
            SolverConfig {
                boundary_cells: 1,
                ..SolverConfig::default()
            },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
        assert!(SolverConfig::default().validate().is_ok());
    }

    #[test]
    fn data_floor_modes() {
        let p = params(0.01);
        let g = Grid1D::new(10.0, 200).unwrap();
        let d = build_initial_data(&DataFamilySpec::default(), &p, &g).unwrap();
        let clamp = SolverConfig::default();
        let shift = SolverConfig {
            data_floor: DataFloor::Shift,
            ..clamp
        };
        let a = State::from_density(&d.rho0, &d.u0, &p, &clamp).unwrap();
        let b = State::from_density(&d.rho0, &d.u0, &p, &shift).unwrap();
        let cf = clamp.c_floor(&p);
        assert!(a.c.values().iter().all(|&c| c >= cf));
        assert_eq!(a.c, b.c);
        // the shifted h stays below the clamped one since iota < 0
        assert!(a.h.values().iter().zip(b.h.values()).all(|(x, y)| y <= x));
        assert!(a.compat_drift(&p, &Norms::full()) < 1e-12);
    }
}
