//! Manufactured-solution verification of the full scheme.
//!
//! ```text
//! c*(t,x) = 1 + 0.2 exp(-x^2) (1 + 0.5 sin 2t)
//! u*(t,x) = 0.3 x exp(-x^2) cos t
//! h*      = (A gamma)^(-iota/2) c*^iota
//! ```
//!
//! The residuals of the three equations are injected as forcing, so `(h*, c*, u*)`
//! solves the forced system exactly and the discrete error measures truncation only.

use crate::error::{Error, Result};
use crate::grid::{Field, Grid1D, Norms};
use crate::model::FluidParams;
use crate::solver::{run_with, Forcing, SolverConfig, State, Stepper};

pub const MMS_HALF_WIDTH: f64 = 8.0;

#[derive(Debug, Clone, Copy)]
pub struct Manufactured {
    p: FluidParams,
    nu: f64,
}

/// Values and first derivatives of one unknown.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Jet {
    v: f64,
    t: f64,
    x: f64,
}

impl Manufactured {
    pub fn new(p: &FluidParams, cfg: &SolverConfig) -> Self {
        Manufactured { p: *p, nu: cfg.nu }
    }

    fn c(&self, t: f64, x: f64) -> Jet {
        let g = (-x * x).exp();
        let s = 1.0 + 0.5 * (2.0 * t).sin();
        Jet {
            v: 1.0 + 0.2 * g * s,
            t: 0.2 * g * (2.0 * t).cos(),
            x: -0.4 * x * g * s,
        }
    }

    fn u(&self, t: f64, x: f64) -> (Jet, f64) {
        let g = (-x * x).exp();
        let jet = Jet {
            v: 0.3 * x * g * t.cos(),
            t: -0.3 * x * g * t.sin(),
            x: 0.3 * g * (1.0 - 2.0 * x * x) * t.cos(),
        };
        let uxx = 0.3 * g * (4.0 * x * x * x - 6.0 * x) * t.cos();
        (jet, uxx)
    }

    fn h(&self, c: &Jet) -> Jet {
        let k = self.p.h_prefactor();
        let iota = self.p.iota();
        let d = k * iota * c.v.powf(iota - 1.0);
        Jet {
            v: k * c.v.powf(iota),
            t: d * c.t,
            x: d * c.x,
        }
    }

    /// Exact `(h, c, u)`.
    pub fn exact(&self, t: f64, x: f64) -> [f64; 3] {
        let c = self.c(t, x);
        [self.h(&c).v, c.v, self.u(t, x).0.v]
    }

    pub fn exact_state(&self, grid: &Grid1D, t: f64) -> Result<State> {
        let pick = |k: usize| {
            Field::new(
                *grid,
                grid.nodes().iter().map(|&x| self.exact(t, x)[k]).collect(),
            )
        };
        Ok(State {
            t,
            h: pick(0)?,
            c: pick(1)?,
            u: pick(2)?,
        })
    }
}

impl Forcing for Manufactured {
    fn eval(&self, t: f64, x: f64) -> [f64; 3] {
        let p = &self.p;
        let c = self.c(t, x);
        let h = self.h(&c);
        let (u, uxx) = self.u(t, x);
        let kh = 0.5 * (p.delta() - 1.0);
        let kc = 0.5 * (p.gamma() - 1.0);
        let ops = p.operators();
        let sigma = 2.0 * p.delta() * p.epsilon() / (p.delta() - 1.0) * ops.stress_coeff;
        let fh = h.t + u.v * h.x + kh * h.v * u.x;
        let fc = c.t + u.v * c.x + kc * c.v * u.x;
        let fu = u.t + u.v * u.x + 2.0 / (p.gamma() - 1.0) * c.v * c.x
            - p.epsilon() * ops.lame_coeff * (h.v * h.v + self.nu * self.nu) * uxx
            - sigma * h.v * h.x * u.x;
        [fh, fc, fu]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MmsStudy {
    pub ns: Vec<usize>,
    pub t_end: f64,
    pub solver: SolverConfig,
}

impl Default for MmsStudy {
    fn default() -> Self {
        MmsStudy {
            ns: vec![200, 400, 800],
            t_end: 0.5,
            solver: SolverConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MmsReport {
    pub ns: Vec<usize>,
    /// L2 error of `(h, c, u)` at `t_end`.
    pub errors: Vec<f64>,
    pub orders: Vec<f64>,
}

impl MmsReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,error,order\n");
        for (i, (n, e)) in self.ns.iter().zip(&self.errors).enumerate() {
            let o = if i == 0 { f64::NAN } else { self.orders[i - 1] };
            out.push_str(&format!("{n},{e:.16e},{o:.6}\n"));
        }
        out
    }
}

/// Error of the forced scheme against the manufactured solution on one grid.
pub fn mms_error(p: &FluidParams, n: usize, t_end: f64, solver: &SolverConfig) -> Result<f64> {
    let grid = Grid1D::new(MMS_HALF_WIDTH, n)?;
    let cfg = SolverConfig {
        t_end,
        snapshot_every: usize::MAX,
        snapshot_dt: None,
        ..*solver
    };
    let m = Manufactured::new(p, &cfg);
    let stepper = Stepper::new(p, &cfg)?.with_forcing(&m);
    let s0 = m.exact_state(&grid, 0.0)?;
    let out = run_with(&stepper, &s0, &mut ())?;
    let exact = m.exact_state(&grid, out.final_state.t)?;
    let norms = Norms::interior();
    let s = &out.final_state;
    let e = [
        norms.lp(&s.h.sub(&exact.h), 2.0),
        norms.lp(&s.c.sub(&exact.c), 2.0),
        norms.lp(&s.u.sub(&exact.u), 2.0),
    ];
    Ok((e[0] * e[0] + e[1] * e[1] + e[2] * e[2]).sqrt())
}

pub fn run_mms(p: &FluidParams, study: &MmsStudy) -> Result<MmsReport> {
    if study.ns.len() < 2 || study.ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig(
            "mms grid ladder must be increasing with two entries or more".into(),
        ));
    }
    let errors = study
        .ns
        .iter()
        .map(|&n| mms_error(p, n, study.t_end, &study.solver))
        .collect::<Result<Vec<_>>>()?;
    let orders = study
        .ns
        .windows(2)
        .zip(errors.windows(2))
        .map(|(n, e)| (e[0] / e[1]).ln() / (n[1] as f64 / n[0] as f64).ln())
        .collect();
    Ok(MmsReport {
        ns: study.ns.clone(),
        errors,
        orders,
    })
}
