//! Fluid parameters, variable transforms and the 1D symmetrizer structure.
//!
//! The solver works in the reformulated unknowns
//!
//! ```text
//! c = sqrt(A gamma) rho^((gamma-1)/2)      (sound speed)
//! h = rho^((delta-1)/2) = (A gamma)^(-iota/2) c^iota,   iota = (delta-1)/(gamma-1) < 0
//! ```
//!
//! and `(c, u)` obey a symmetric hyperbolic system `A0 U_t + A1(U) U_x = ...`
//! whose 1D symbols are assembled by [`assemble_symbols`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default lower bound on `c` accepted by [`c_to_h`].
pub const DEFAULT_C_MIN: f64 = 1e-10;

/// Unvalidated parameter tuple, as read from configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RawParams {
    #[serde(rename = "A")]
    pub a: f64,
    pub gamma: f64,
    pub delta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
}

impl Default for RawParams {
    fn default() -> Self {
        RawParams {
            a: 1.0,
            gamma: 1.4,
            delta: 0.9,
            alpha: 1.0,
            beta: 0.0,
            epsilon: 0.01,
        }
    }
}

/// Validated physical constants plus derived exponents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluidParams {
    a: f64,
    gamma: f64,
    delta: f64,
    alpha: f64,
    beta: f64,
    epsilon: f64,
    iota: f64,
    a1: f64,
}

fn check(ok: bool, constraint: &'static str, value: f64) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::ParamOutOfRange { constraint, value })
    }
}

/// Validate a raw tuple: `A > 0`, `gamma > 1`, `0 < delta < 1`, `alpha > 0`,
/// `alpha + beta >= 0`, `0 <= epsilon <= 1`.
pub fn validate_params(raw: &RawParams) -> Result<FluidParams> {
    let all = [
        raw.a,
        raw.gamma,
        raw.delta,
        raw.alpha,
        raw.beta,
        raw.epsilon,
    ];
    if let Some(v) = all.iter().find(|v| !v.is_finite()) {
        return Err(Error::ParamOutOfRange {
            constraint: "finite",
            value: *v,
        });
    }
    check(raw.a > 0.0, "A > 0", raw.a)?;
    check(raw.gamma > 1.0, "gamma > 1", raw.gamma)?;
    check(
        raw.delta > 0.0 && raw.delta < 1.0,
        "0 < delta < 1",
        raw.delta,
    )?;
    check(raw.alpha > 0.0, "alpha > 0", raw.alpha)?;
    check(
        raw.alpha + raw.beta >= 0.0,
        "alpha + beta >= 0",
        raw.alpha + raw.beta,
    )?;
    check(
        (0.0..=1.0).contains(&raw.epsilon),
        "0 <= epsilon <= 1",
        raw.epsilon,
    )?;
    Ok(FluidParams {
        a: raw.a,
        gamma: raw.gamma,
        delta: raw.delta,
        alpha: raw.alpha,
        beta: raw.beta,
        epsilon: raw.epsilon,
        iota: (raw.delta - 1.0) / (raw.gamma - 1.0),
        a1: (raw.gamma - 1.0).powi(2) / 4.0,
    })
}

impl FluidParams {
    pub fn new(raw: &RawParams) -> Result<Self> {
        validate_params(raw)
    }

    pub fn raw(&self) -> RawParams {
        RawParams {
            a: self.a,
            gamma: self.gamma,
            delta: self.delta,
            alpha: self.alpha,
            beta: self.beta,
            epsilon: self.epsilon,
        }
    }

    /// Same fluid with a different viscosity strength.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        validate_params(&RawParams {
            epsilon,
            ..self.raw()
        })
    }

    pub fn entropy_constant(&self) -> f64 {
        self.a
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn delta(&self) -> f64 {
        self.delta
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
    /// `(delta - 1)/(gamma - 1)`, always negative.
    pub fn iota(&self) -> f64 {
        self.iota
    }
    /// `(gamma - 1)^2 / 4`.
    pub fn a1(&self) -> f64 {
        self.a1
    }
    /// `2 a1 delta / (delta - 1)`.
    pub fn a2(&self) -> f64 {
        2.0 * self.a1 * self.delta / (self.delta - 1.0)
    }
    /// `(A gamma)^(-1/(gamma-1))`, so that `rho = a3 c^(2/(gamma-1))`.
    pub fn a3(&self) -> f64 {
        (self.a * self.gamma).powf(-1.0 / (self.gamma - 1.0))
    }

    pub fn operators(&self) -> OneDOperators {
        OneDOperators::new(self)
    }

    /// `(A gamma)^(-iota/2)`, the prefactor in `h = K c^iota`.
    pub fn h_prefactor(&self) -> f64 {
        (self.a * self.gamma).powf(-self.iota / 2.0)
    }

    pub fn pressure(&self, rho: f64) -> f64 {
        self.a * rho.powf(self.gamma)
    }
}

/// Scalar coefficients of the 1D Lamé operator `Lu = -lame u_xx` and the
/// stress `Q(u) = stress u_x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneDOperators {
    pub lame_coeff: f64,
    pub stress_coeff: f64,
}

impl OneDOperators {
    pub fn new(p: &FluidParams) -> Self {
        let k = 2.0 * p.alpha + p.beta;
        OneDOperators {
            lame_coeff: k,
            stress_coeff: k,
        }
    }
}

/// `c = sqrt(A gamma) rho^((gamma-1)/2)`.
pub fn rho_to_c(rho: &[f64], p: &FluidParams) -> Result<Vec<f64>> {
    let pref = (p.a * p.gamma).sqrt();
    let e = (p.gamma - 1.0) / 2.0;
    rho.iter()
        .enumerate()
        .map(|(index, &r)| {
            if r < 0.0 || r.is_nan() {
                Err(Error::NegativeDensity { index, value: r })
            } else {
                Ok(pref * r.powf(e))
            }
        })
        .collect()
}

/// Inverse of [`rho_to_c`]: `rho = a3 c^(2/(gamma-1))`.
pub fn c_to_rho(c: &[f64], p: &FluidParams) -> Result<Vec<f64>> {
    let a3 = p.a3();
    let e = 2.0 / (p.gamma - 1.0);
    c.iter()
        .enumerate()
        .map(|(index, &v)| {
            if v < 0.0 || v.is_nan() {
                Err(Error::NegativeSoundSpeed { index, value: v })
            } else {
                Ok(a3 * v.powf(e))
            }
        })
        .collect()
}

/// `h = (A gamma)^(-iota/2) c^iota`; refuses `c <= c_min`.
pub fn c_to_h(c: &[f64], p: &FluidParams, c_min: f64) -> Result<Vec<f64>> {
    let k = p.h_prefactor();
    c.iter()
        .enumerate()
        .map(|(index, &v)| {
            if !(v > c_min) {
                Err(Error::VacuumEncountered {
                    index,
                    value: v,
                    floor: c_min,
                })
            } else {
                Ok(k * v.powf(p.iota))
            }
        })
        .collect()
}

/// `h = rho^((delta-1)/2)` computed directly from the density.
pub fn rho_to_h(rho: &[f64], p: &FluidParams) -> Result<Vec<f64>> {
    let e = (p.delta - 1.0) / 2.0;
    rho.iter()
        .enumerate()
        .map(|(index, &r)| {
            if !(r > 0.0) {
                Err(Error::VacuumEncountered {
                    index,
                    value: r,
                    floor: 0.0,
                })
            } else {
                Ok(r.powf(e))
            }
        })
        .collect()
}

/// A 2x2 real matrix, row-major.
pub type Mat2 = [[f64; 2]; 2];

/// 1D reduction of the symmetrizer `A0` and flux Jacobian `A1` for `U = (c, u)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Symbols {
    pub a0: Mat2,
    pub a1: Mat2,
}

pub fn assemble_symbols(c: f64, u: f64, p: &FluidParams) -> Symbols {
    assemble_with_a1(c, u, p.gamma, p.a1)
}

fn assemble_with_a1(c: f64, u: f64, gamma: f64, a1: f64) -> Symbols {
    let off = 0.5 * (gamma - 1.0) * c;
    Symbols {
        a0: [[1.0, 0.0], [0.0, a1]],
        a1: [[u, off], [off, a1 * u]],
    }
}

/// Generalized eigenvalues of the pencil `(A1, A0)` plus the transport
/// speed of the `psi` equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharacteristicSpeeds {
    /// Ascending: `[u - c, u + c]`.
    pub acoustic: [f64; 2],
    pub transport: f64,
}

impl CharacteristicSpeeds {
    pub fn max_abs(&self) -> f64 {
        self.acoustic[0]
            .abs()
            .max(self.acoustic[1].abs())
            .max(self.transport.abs())
    }
}

/// Solves `A1 v = lambda A0 v` for a diagonal, positive definite `A0`.
pub fn pencil_eigenvalues(s: &Symbols) -> [f64; 2] {
    let d0 = s.a0[0][0].sqrt();
    let d1 = s.a0[1][1].sqrt();
    // A0^{-1/2} A1 A0^{-1/2}, symmetrised entry-wise
    let p = s.a1[0][0] / (d0 * d0);
    let q = s.a1[1][1] / (d1 * d1);
    let r = 0.5 * (s.a1[0][1] + s.a1[1][0]) / (d0 * d1);
    let mean = 0.5 * (p + q);
    let rad = (0.5 * (p - q)).hypot(r);
    [mean - rad, mean + rad]
}

pub fn characteristic_speeds(c: f64, u: f64, p: &FluidParams) -> CharacteristicSpeeds {
    CharacteristicSpeeds {
        acoustic: pencil_eigenvalues(&assemble_symbols(c, u, p)),
        transport: u,
    }
}

/// Outcome of the randomized structure check.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureReport {
    pub states: usize,
    pub max_asymmetry: f64,
    pub min_a0_diag: f64,
    /// max |lambda - (u -/+ c)| / (|u| + c)
    pub max_eig_rel_err: f64,
}

impl StructureReport {
    pub fn passes(&self, eig_tol: f64) -> bool {
        self.max_asymmetry == 0.0 && self.min_a0_diag > 0.0 && self.max_eig_rel_err <= eig_tol
    }
}

/// Options for [`verify_structure`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructureCheck {
    pub states: usize,
    pub seed: u64,
    pub c_max: f64,
    pub u_max: f64,
    /// Multiplies `a1` before assembly; anything other than 1 corrupts the symmetrizer.
    pub a1_scale: f64,
}

impl Default for StructureCheck {
    fn default() -> Self {
        StructureCheck {
            states: 1000,
            seed: 0x5eed,
            c_max: 10.0,
            u_max: 10.0,
            a1_scale: 1.0,
        }
    }
}

/// Draws random `(c, u, gamma)` states and checks symmetry, positivity of
/// `A0` and that the pencil eigenvalues are `u -/+ c`.
pub fn verify_structure(
    base: &FluidParams,
    gammas: &[f64],
    opts: &StructureCheck,
) -> Result<StructureReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut report = StructureReport {
        states: 0,
        max_asymmetry: 0.0,
        min_a0_diag: f64::INFINITY,
        max_eig_rel_err: 0.0,
    };
    let gammas: Vec<f64> = if gammas.is_empty() {
        vec![base.gamma]
    } else {
        gammas.to_vec()
    };
    for k in 0..opts.states {
        let gamma = gammas[k % gammas.len()];
        let p = FluidParams::new(&RawParams {
            gamma,
            ..base.raw()
        })?;
        // c in (0, c_max]
        let c = opts.c_max * (1.0 - rng.gen::<f64>());
        let u = opts.u_max * (2.0 * rng.gen::<f64>() - 1.0);
        let s = assemble_with_a1(c, u, gamma, p.a1 * opts.a1_scale);
        let asym = (s.a1[0][1] - s.a1[1][0])
            .abs()
            .max((s.a0[0][1] - s.a0[1][0]).abs());
        report.max_asymmetry = report.max_asymmetry.max(asym);
        report.min_a0_diag = report.min_a0_diag.min(s.a0[0][0].min(s.a0[1][1]));
        let lam = pencil_eigenvalues(&s);
        let scale = u.abs() + c;
        let err = (lam[0] - (u - c)).abs().max((lam[1] - (u + c)).abs()) / scale;
        report.max_eig_rel_err = report.max_eig_rel_err.max(err);
        report.states += 1;
    }
    Ok(report)
}
