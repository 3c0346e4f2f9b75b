//! Admissible initial data with far-field vacuum.
//!
//! The basic family is
//!
//! ```text
//! rho0(x) = f(x) chi(x / s) + 1 / (1 + |x|^(2a)),     u0 in H^3,
//! ```
//!
//! with a C^3 bump `f >= 0`, a cut-off `chi` equal to 1 on `|x| <= 1` and 0 on
//! `|x| >= 2`, and the tail exponent `a` inside the admissible window.
//! [`build_eps_family`] builds the epsilon-indexed approximations of given
//! inviscid data.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{diff, Field, Grid1D, Norms};
use crate::model::{c_to_rho, rho_to_c, rho_to_h, FluidParams};

/// Open interval for the tail exponent `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub lower: f64,
    pub upper: f64,
}

impl Window {
    pub fn is_empty(&self) -> bool {
        self.lower >= self.upper
    }

    pub fn contains(&self, a: f64) -> bool {
        a > self.lower && a < self.upper
    }
}

impl std::fmt::Display for Window {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_empty() {
            write!(f, "empty")
        } else {
            write!(f, "({}, {})", fmt_num(self.lower), fmt_num(self.upper))
        }
    }
}

/// Shortest decimal rendering at 12 significant fractional digits.
pub fn fmt_num(x: f64) -> String {
    let s = format!("{x:.12}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

/// Window `(3/(2(gamma-1)), 1/(2(1-delta)))` for three space dimensions.
pub fn admissible_window(p: &FluidParams) -> Window {
    Window {
        lower: 1.5 / (p.gamma() - 1.0),
        upper: 0.5 / (1.0 - p.delta()),
    }
}

/// One-dimensional analog `(1/(2(gamma-1)), 3/(2(1-delta)))`: the same
/// integrability requirements on `c0`, `grad h0` and `grad rho0^((delta-1)/4)`
/// evaluated with the 1D volume element.
pub fn admissible_window_1d(p: &FluidParams) -> Window {
    Window {
        lower: 0.5 / (p.gamma() - 1.0),
        upper: 1.5 / (1.0 - p.delta()),
    }
}

/// Which window [`build_initial_data`] enforces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowPolicy {
    #[default]
    Dim3,
    Dim1,
    /// No check; for exploring data outside the admissible class.
    Unchecked,
}

impl WindowPolicy {
    pub fn window(&self, p: &FluidParams) -> Option<Window> {
        match self {
            WindowPolicy::Dim3 => Some(admissible_window(p)),
            WindowPolicy::Dim1 => Some(admissible_window_1d(p)),
            WindowPolicy::Unchecked => None,
        }
    }
}

/// Cut-off: 1 on `|x| <= 1`, 0 on `|x| >= 2`, quintic smoothstep between.
pub fn chi(x: f64) -> f64 {
    let t = x.abs() - 1.0;
    if t <= 0.0 {
        1.0
    } else if t >= 1.0 {
        0.0
    } else {
        1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
    }
}

/// The compactly supported part `f` of the density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bump {
    pub amplitude: f64,
    pub support: f64,
}

impl Bump {
    /// `amplitude (1 - (x/support)^2)^4` inside the support.
    pub fn eval(&self, x: f64) -> f64 {
        let r = x / self.support;
        if r.abs() >= 1.0 {
            0.0
        } else {
            self.amplitude * (1.0 - r * r).powi(4)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VelocityProfile {
    Zero,
    /// `U x exp(-x^2/w^2)`; odd, zero momentum on symmetric density.
    Odd {
        amplitude: f64,
        width: f64,
    },
    /// `U exp(-(x-x0)^2/w^2)`; nonzero momentum.
    ShiftedGaussian {
        amplitude: f64,
        center: f64,
        width: f64,
    },
}

impl VelocityProfile {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            VelocityProfile::Zero => 0.0,
            VelocityProfile::Odd { amplitude, width } => {
                amplitude * x * (-(x / width).powi(2)).exp()
            }
            VelocityProfile::ShiftedGaussian {
                amplitude,
                center,
                width,
            } => amplitude * (-((x - center) / width).powi(2)).exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataFamilySpec {
    /// Tail exponent in `1/(1+|x|^(2a))`.
    pub a: f64,
    pub bump: Bump,
    /// Scale `s` of the cut-off `chi(x/s)`.
    pub trunc_scale: f64,
    pub velocity: VelocityProfile,
    pub window: WindowPolicy,
}

impl Default for DataFamilySpec {
    fn default() -> Self {
        DataFamilySpec {
            a: 4.0,
            bump: Bump {
                amplitude: 0.5,
                support: 2.0,
            },
            trunc_scale: 10.0,
            velocity: VelocityProfile::Odd {
                amplitude: 0.3,
                width: 1.0,
            },
            window: WindowPolicy::Dim3,
        }
    }
}

impl DataFamilySpec {
    pub fn tail(&self, x: f64) -> f64 {
        1.0 / (1.0 + x.abs().powf(2.0 * self.a))
    }

    pub fn density(&self, x: f64) -> f64 {
        self.bump.eval(x) * chi(x / self.trunc_scale) + self.tail(x)
    }

    pub fn check_window(&self, p: &FluidParams) -> Result<()> {
        match self.window.window(p) {
            Some(w) if !w.contains(self.a) => Err(Error::WindowViolation {
                a: self.a,
                window: w.to_string(),
            }),
            _ => Ok(()),
        }
    }
}

/// Sampled `(rho0, u0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub rho0: Field,
    pub u0: Field,
}

pub fn build_initial_data(
    spec: &DataFamilySpec,
    p: &FluidParams,
    g: &Grid1D,
) -> Result<InitialData> {
    spec.check_window(p)?;
    if !(spec.bump.amplitude >= 0.0 && spec.bump.support > 0.0 && spec.trunc_scale > 0.0) {
        return Err(Error::InvalidConfig(
            "bump amplitude must be >= 0 and scales positive".into(),
        ));
    }
    Ok(InitialData {
        rho0: g.sample(|x| spec.density(x)),
        u0: g.sample(|x| spec.velocity.eval(x)),
    })
}

/// Epsilon-indexed data whose limit is the base data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsFamilySpec {
    pub base: DataFamilySpec,
}

impl EpsFamilySpec {
    /// `1 / (6 (3 - iota))`
    pub fn r0(&self, p: &FluidParams) -> f64 {
        1.0 / (6.0 * (3.0 - p.iota()))
    }

    /// `1 / (6 a (gamma - 1) (3 - iota))`
    pub fn q0(&self, p: &FluidParams) -> f64 {
        1.0 / (6.0 * self.base.a * (p.gamma() - 1.0) * (3.0 - p.iota()))
    }

    /// `r + a q (gamma - 1)`, which must lie in `(0, 1/(6 - 2 iota))`.
    pub fn combined_exponent(&self, p: &FluidParams) -> f64 {
        self.r0(p) + self.base.a * self.q0(p) * (p.gamma() - 1.0)
    }
}

/// `(rho0^eps)^k = rho0^k chi(eps^q0 x) + eps^r0 f^k` with `k = (gamma-1)/2`
/// and `f = 1/(1+|x|^(2a))`; velocity unchanged.
pub fn build_eps_family(
    spec: &EpsFamilySpec,
    p: &FluidParams,
    g: &Grid1D,
    eps: f64,
) -> Result<InitialData> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "family epsilon must lie in (0, 1], got {eps}"
        )));
    }
    let base = build_initial_data(&spec.base, p, g)?;
    let k = 0.5 * (p.gamma() - 1.0);
    let scale = eps.powf(spec.q0(p));
    let weight = eps.powf(spec.r0(p));
    let rho = base
        .rho0
        .values()
        .iter()
        .enumerate()
        .map(|(i, &r0)| {
            let x = g.x(i);
            let pw = r0.powf(k) * chi(scale * x) + weight * spec.base.tail(x).powf(k);
            pw.powf(1.0 / k)
        })
        .collect();
    Ok(InitialData {
        rho0: Field::new(*g, rho)?,
        u0: base.u0,
    })
}

/// The three contributions to `E0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct E0Report {
    /// `||(c0, u0)||_3`
    pub sobolev: f64,
    /// `eps^(1/2) ||grad rho0^((delta-1)/2)||_{D1 cap D2}`
    pub psi_term: f64,
    /// `eps^(1/4) |grad rho0^((delta-1)/4)|_4`
    pub n_term: f64,
}

impl E0Report {
    pub fn total(&self) -> f64 {
        self.sobolev + self.psi_term + self.n_term
    }
}

pub fn e0_quantity(rho0: &Field, u0: &Field, p: &FluidParams) -> Result<E0Report> {
    e0_with_norms(rho0, u0, p, &Norms::interior())
}

pub fn e0_with_norms(rho0: &Field, u0: &Field, p: &FluidParams, norms: &Norms) -> Result<E0Report> {
    let grid = *rho0.grid();
    // checks rho0 > 0
    let h = Field::new(grid, rho_to_h(rho0.values(), p)?)?;
    let c = Field::new(grid, rho_to_c(rho0.values(), p)?)?;
    let eps = p.epsilon();
    let c3 = norms.hs(&c, 3)?;
    let u3 = norms.hs(u0, 3)?;
    let sobolev = (c3 * c3 + u3 * u3).sqrt();
    let psi_term = if eps == 0.0 {
        0.0
    } else {
        eps.sqrt() * norms.d1d2(&diff(&h, 1)?)?
    };
    let n_term = if eps == 0.0 {
        0.0
    } else {
        let quarter = h.map(f64::sqrt); // rho^((delta-1)/4)
        eps.powf(0.25) * norms.lp(&diff(&quarter, 1)?, 4.0)
    };
    Ok(E0Report {
        sobolev,
        psi_term,
        n_term,
    })
}

/// `x,rho0,c0,u0,h0,psi0` table for the initial data.
pub fn initial_data_csv(data: &InitialData, p: &FluidParams) -> Result<String> {
    let grid = *data.rho0.grid();
    let c = rho_to_c(data.rho0.values(), p)?;
    let h = Field::new(grid, rho_to_h(data.rho0.values(), p)?)?;
    let psi = diff(&h, 1)?;
    let mut out = String::from("x,rho0,c0,u0,h0,psi0\n");
    for i in 0..grid.n() {
        let _ = writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            grid.x(i),
            data.rho0.values()[i],
            c[i],
            data.u0.values()[i],
            h.values()[i],
            psi.values()[i]
        );
    }
    Ok(out)
}

/// Density recovered from sound speed, for callers holding `c0`.
pub fn density_from_sound_speed(c: &Field, p: &FluidParams) -> Result<Field> {
    Field::new(*c.grid(), c_to_rho(c.values(), p)?)
}
