//! Integral identities, bounds and consistency residuals along a trajectory.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::grid::{diff, Field, Norms};
use crate::model::FluidParams;
use crate::solver::{Sink, State, StepLog};

pub const DIAG_HEADER: &str = "t,mass,momentum,energy,kinetic,dissipation,sup_u,c_h3,u_h3,eps_psi_d1d2_sq,weighted_visc_acc,compat_drift,psi_residual";

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub mass: f64,
    pub momentum: f64,
    pub energy: f64,
    pub kinetic: f64,
    /// `eps (2 alpha + beta) int rho^delta u_x^2`
    pub dissipation: f64,
    pub sup_u: f64,
    pub c_h3: f64,
    pub u_h3: f64,
    pub eps_psi_d1d2_sq: f64,
    /// `eps sum_{i=1..4} |h d^i u|_2^2` at this instant.
    pub weighted_visc: f64,
    /// Time integral of `weighted_visc` up to `t`.
    pub weighted_visc_acc: f64,
    pub compat_drift: f64,
    /// L2 residual of the `psi` equation between this and the previous record.
    pub psi_residual: f64,
}

impl DiagnosticsRecord {
    /// `|c|_3^2 + |u|_3^2 + eps |psi|^2_{D1 cap D2}`.
    pub fn monitor(&self) -> f64 {
        self.c_h3 * self.c_h3 + self.u_h3 * self.u_h3 + self.eps_psi_d1d2_sq
    }

    pub fn pressure_energy(&self) -> f64 {
        self.energy - self.kinetic
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            self.t,
            self.mass,
            self.momentum,
            self.energy,
            self.kinetic,
            self.dissipation,
            self.sup_u,
            self.c_h3,
            self.u_h3,
            self.eps_psi_d1d2_sq,
            self.weighted_visc_acc,
            self.compat_drift,
            self.psi_residual
        )
    }
}

/// Instantaneous diagnostics of one state over the interior band.
pub fn record(s: &State, p: &FluidParams) -> Result<DiagnosticsRecord> {
    record_with(s, p, &Norms::interior())
}

pub fn record_with(s: &State, p: &FluidParams, norms: &Norms) -> Result<DiagnosticsRecord> {
    s.check_finite()?;
    let rho = s.rho(p)?;
    let u = &s.u;
    let ux = diff(u, 1)?;
    let a = p.entropy_constant();
    let g = p.gamma();
    let mass = norms.integral(&rho);
    let momentum = norms.integral(&rho.zip_map(u, |r, v| r * v));
    let kinetic = 0.5 * norms.integral(&rho.zip_map(u, |r, v| r * v * v));
    let pressure = norms.integral(&rho.map(|r| a * r.powf(g) / (g - 1.0)));
    let visc = p.epsilon() * p.operators().lame_coeff;
    let dissipation = visc * norms.integral(&rho.zip_map(&ux, |r, d| r.powf(p.delta()) * d * d));
    let psi = s.psi()?;
    let psi_d = norms.d1d2(&psi)?;
    let mut weighted = 0.0;
    for k in 1..=4 {
        let w = s.h.zip_map(&diff(u, k)?, |h, d| h * d);
        let l2 = norms.lp(&w, 2.0);
        weighted += l2 * l2;
    }
    Ok(DiagnosticsRecord {
        t: s.t,
        mass,
        momentum,
        energy: kinetic + pressure,
        kinetic,
        dissipation,
        sup_u: norms.lp(u, f64::INFINITY),
        c_h3: norms.hs(&s.c, 3)?,
        u_h3: norms.hs(u, 3)?,
        eps_psi_d1d2_sq: p.epsilon() * psi_d * psi_d,
        weighted_visc: p.epsilon() * weighted,
        weighted_visc_acc: 0.0,
        compat_drift: s.compat_drift(p, norms),
        psi_residual: 0.0,
    })
}

/// Residual of `psi_t + (u psi)_x + (delta-1)/2 (psi u_x + h u_xx) = 0` between two
/// states: difference quotient in time, spatial terms at the midpoint.
pub fn psi_residual(a: &State, b: &State, p: &FluidParams, norms: &Norms) -> Result<Field> {
    let dt = b.t - a.t;
    if !(dt > 0.0) {
        return Err(Error::InvalidConfig(
            "psi residual needs increasing times".into(),
        ));
    }
    let mid = |x: &Field, y: &Field| x.zip_map(y, |p, q| 0.5 * (p + q));
    let h = mid(&a.h, &b.h);
    let u = mid(&a.u, &b.u);
    let psi_a = a.psi()?;
    let psi_b = b.psi()?;
    let psi = mid(&psi_a, &psi_b);
    let k = 0.5 * (p.delta() - 1.0);
    let flux = diff(&u.zip_map(&psi, |v, q| v * q), 1)?;
    let ux = diff(&u, 1)?;
    let uxx = diff(&u, 2)?;
    let n = h.len();
    let mut r = vec![0.0; n];
    for i in norms.range(h.grid()) {
        r[i] = (psi_b.values()[i] - psi_a.values()[i]) / dt
            + flux.values()[i]
            + k * (psi.values()[i] * ux.values()[i] + h.values()[i] * uxx.values()[i]);
    }
    Field::new(*h.grid(), r)
}

/// Sink that records diagnostics at every snapshot and keeps the step log.
#[derive(Debug, Clone)]
pub struct Recorder {
    p: FluidParams,
    norms: Norms,
    prev: Option<State>,
    pub records: Vec<DiagnosticsRecord>,
    pub steps: Vec<StepLog>,
    pub keep_states: bool,
    pub states: Vec<State>,
}

impl Recorder {
    pub fn new(p: &FluidParams) -> Self {
        Recorder {
            p: *p,
            norms: Norms::interior(),
            prev: None,
            records: Vec::new(),
            steps: Vec::new(),
            keep_states: false,
            states: Vec::new(),
        }
    }

    pub fn keeping_states(mut self) -> Self {
        self.keep_states = true;
        self
    }

    pub fn diag_csv(&self) -> String {
        diag_csv(&self.records)
    }

    pub fn step_log_csv(&self) -> String {
        let mut out = String::from("step,t,dt,max_speed,picard_iters\n");
        for l in &self.steps {
            let _ = writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e},{}",
                l.step, l.t, l.dt, l.max_speed, l.picard_iters
            );
        }
        out
    }
}

impl Sink for Recorder {
    fn snapshot(&mut self, state: &State) -> Result<()> {
        let mut rec = record_with(state, &self.p, &self.norms)?;
        if let (Some(prev), Some(last)) = (&self.prev, self.records.last()) {
            let dt = state.t - prev.t;
            rec.weighted_visc_acc =
                last.weighted_visc_acc + 0.5 * dt * (last.weighted_visc + rec.weighted_visc);
            let r = psi_residual(prev, state, &self.p, &self.norms)?;
            rec.psi_residual = self.norms.lp(&r, 2.0);
        }
        self.records.push(rec);
        if self.keep_states {
            self.states.push(state.clone());
        }
        self.prev = Some(state.clone());
        Ok(())
    }

    fn step(&mut self, log: &StepLog) -> Result<()> {
        self.steps.push(*log);
        Ok(())
    }
}

pub fn diag_csv(records: &[DiagnosticsRecord]) -> String {
    let mut out = String::with_capacity(records.len() * 256);
    out.push_str(DIAG_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConservationReport {
    /// `max_t |m(t) - m(0)| / m(0)`
    pub mass_drift: f64,
    /// `max_t |P(t) - P(0)| / (|P(0)| + m(0))`
    pub momentum_drift: f64,
    pub tol: f64,
    pub passed: bool,
}

pub fn check_conservation(traj: &[DiagnosticsRecord], tol: f64) -> Result<ConservationReport> {
    let first = first_of(traj)?;
    let m0 = first.mass;
    let p0 = first.momentum;
    let mut mass_drift: f64 = 0.0;
    let mut momentum_drift: f64 = 0.0;
    for r in traj {
        mass_drift = mass_drift.max((r.mass - m0).abs() / m0);
        momentum_drift = momentum_drift.max((r.momentum - p0).abs() / (p0.abs() + m0));
    }
    Ok(ConservationReport {
        mass_drift,
        momentum_drift,
        tol,
        passed: mass_drift <= tol && momentum_drift <= tol,
    })
}

fn first_of(traj: &[DiagnosticsRecord]) -> Result<&DiagnosticsRecord> {
    if traj.len() < 2 {
        return Err(Error::InvalidConfig(
            "trajectory needs at least two records".into(),
        ));
    }
    Ok(&traj[0])
}

#[derive(Debug, Clone, PartialEq)]
pub struct DissipationReport {
    /// `(E(t+D) - E(t))/D + (D(t) + D(t+D))/2` per record pair.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    /// Largest single-interval increase of E relative to E(0).
    pub max_energy_increase: f64,
    pub energy_monotone: bool,
    pub passed: bool,
}

/// Energy-identity residual; `E` may rise by at most `1e-8 E(0)` per interval.
pub fn check_dissipation(traj: &[DiagnosticsRecord], tol: f64) -> Result<DissipationReport> {
    let e0 = first_of(traj)?.energy;
    let mut residuals = Vec::with_capacity(traj.len() - 1);
    let mut max_inc: f64 = f64::NEG_INFINITY;
    for w in traj.windows(2) {
        let dt = w[1].t - w[0].t;
        if !(dt > 0.0) {
            return Err(Error::InvalidConfig("record times must increase".into()));
        }
        residuals
            .push((w[1].energy - w[0].energy) / dt + 0.5 * (w[0].dissipation + w[1].dissipation));
        max_inc = max_inc.max((w[1].energy - w[0].energy) / e0);
    }
    let max_residual = residuals.iter().fold(0.0, |m: f64, r| m.max(r.abs()));
    let energy_monotone = max_inc <= 1e-8;
    Ok(DissipationReport {
        residuals,
        max_residual,
        max_energy_increase: max_inc,
        energy_monotone,
        passed: energy_monotone && max_residual <= tol,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayReport {
    pub p0: f64,
    pub m0: f64,
    /// `|P(0)|^2 / (2 m(0))`
    pub kinetic_bound: f64,
    /// `|P(0)| / m(0)`
    pub sup_u_bound: f64,
    pub min_kinetic: f64,
    pub min_sup_u: f64,
    /// `2 E_k(t) / (m(0) |u|_inf^2)` at its worst; at most one in the continuum.
    pub implied_cu: f64,
    pub passed: bool,
}

/// Lower bounds on kinetic energy and sup-velocity implied by a nonzero momentum,
/// with 10 percent slack.
pub fn check_decay_bound(traj: &[DiagnosticsRecord]) -> Result<DecayReport> {
    let first = first_of(traj)?;
    let (p0, m0) = (first.momentum, first.mass);
    if p0.abs() <= 1e-12 * m0 {
        return Err(Error::DegenerateCheck("initial momentum vanishes"));
    }
    let kinetic_bound = p0 * p0 / (2.0 * m0);
    let sup_u_bound = p0.abs() / m0;
    let min_kinetic = traj.iter().map(|r| r.kinetic).fold(f64::INFINITY, f64::min);
    let min_sup_u = traj.iter().map(|r| r.sup_u).fold(f64::INFINITY, f64::min);
    let implied_cu = traj
        .iter()
        .map(|r| 2.0 * r.kinetic / (m0 * r.sup_u * r.sup_u))
        .fold(0.0, f64::max);
    Ok(DecayReport {
        p0,
        m0,
        kinetic_bound,
        sup_u_bound,
        min_kinetic,
        min_sup_u,
        implied_cu,
        passed: min_kinetic >= 0.9 * kinetic_bound && min_sup_u >= 0.9 * sup_u_bound,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorReport {
    /// `sup_t (|c|_3^2 + |u|_3^2 + eps |psi|^2_{D1 cap D2})`
    pub sup_monitor: f64,
    /// `eps int sum_{i=1..4} |h d^i u|_2^2 dt` over the trajectory.
    pub weighted_visc: f64,
}

pub fn uniform_monitor(traj: &[DiagnosticsRecord]) -> Result<MonitorReport> {
    let last = traj
        .last()
        .ok_or(Error::InvalidConfig("empty trajectory".into()))?;
    let sup_monitor = traj
        .iter()
        .map(DiagnosticsRecord::monitor)
        .fold(0.0, f64::max);
    Ok(MonitorReport {
        sup_monitor,
        weighted_visc: last.weighted_visc_acc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid1D;
    use crate::model::RawParams;

    fn params(eps: f64) -> FluidParams {
        FluidParams::new(&RawParams {
            epsilon: eps,
            ..RawParams::default()
        })
        .unwrap()
    }

    fn state_from(rho: &Field, u: &Field, p: &FluidParams) -> State {
        let c = Field::new(
            *rho.grid(),
            crate::model::rho_to_c(rho.values(), p).unwrap(),
        )
        .unwrap();
        State::from_sound_speed(c, u.clone(), p).unwrap()
    }

    #[test]
    fn rest_state() {
        let p = params(0.1);
        let g = Grid1D::new(4.0, 200).unwrap();
        let rho = g.sample(|x| 0.5 + 0.3 * (-x * x).exp());
        let s = state_from(&rho, &g.zeros(), &p);
        let r = record(&s, &p).unwrap();
        assert_eq!(r.momentum, 0.0);
        assert_eq!(r.kinetic, 0.0);
        assert_eq!(r.dissipation, 0.0);
        let pressure = Norms::interior().integral(&rho.map(|v| v.powf(1.4) / 0.4));
        assert!((r.energy - pressure).abs() <= 1e-14 * pressure);
    }

    #[test]
    fn constant_integrals() {
        let p = params(0.1);
        // band of 4 cells each side, interior spans [-1, 1]
        let n = 208;
        let dx = 2.0 / 200.0;
        let g = Grid1D::new(n as f64 * dx / 2.0, n).unwrap();
        let s = state_from(&g.sample(|_| 1.0), &g.sample(|_| 2.0), &p);
        let r = record(&s, &p).unwrap();
        assert!((r.mass - 2.0).abs() < 1e-12);
        assert!((r.momentum - 4.0).abs() < 1e-12);
        assert!((r.kinetic - 4.0).abs() < 1e-12);
    }

    #[test]
    fn quadrature_oracle() {
        let p = params(0.01);
        let rho_f = |x: f64| 0.2 + (-x * x).exp();
        let u_f = |x: f64| 0.4 * x * (-x * x).exp() + 0.1;
        let g = Grid1D::new(6.0, 400).unwrap();
        let s = state_from(&g.sample(rho_f), &g.sample(u_f), &p);
        let r = record(&s, &p).unwrap();
        // composite Simpson on the same interval, ten times finer
        let band = Norms::interior().band;
        let a = g.x(band) - 0.5 * g.dx();
        let b = g.x(g.n() - band - 1) + 0.5 * g.dx();
        let simpson = |f: &dyn Fn(f64) -> f64| {
            let m = 8000;
            let h = (b - a) / m as f64;
            let mut acc = f(a) + f(b);
            for k in 1..m {
                acc += if k % 2 == 1 { 4.0 } else { 2.0 } * f(a + k as f64 * h);
            }
            acc * h / 3.0
        };
        let mass = simpson(&|x| rho_f(x));
        let mom = simpson(&|x| rho_f(x) * u_f(x));
        let kin = simpson(&|x| 0.5 * rho_f(x) * u_f(x).powi(2));
        let en = kin + simpson(&|x| rho_f(x).powf(1.4) / 0.4);
        for (got, want) in [
            (r.mass, mass),
            (r.momentum, mom),
            (r.kinetic, kin),
            (r.energy, en),
        ] {
            assert!(((got - want) / want).abs() < 1e-6, "{got} vs {want}");
        }
    }

    #[test]
    fn energy_splits() {
        let p = params(0.05);
        let g = Grid1D::new(5.0, 300).unwrap();
        let s = state_from(
            &g.sample(|x| 0.1 + (-x * x).exp()),
            &g.sample(|x| x.sin()),
            &p,
        );
        let r = record(&s, &p).unwrap();
        assert!(r.energy >= r.kinetic && r.kinetic >= 0.0 && r.dissipation >= 0.0);
        assert_eq!(r.energy - r.kinetic, r.pressure_energy());
    }

    fn rec(
        t: f64,
        mass: f64,
        momentum: f64,
        energy: f64,
        kinetic: f64,
        sup_u: f64,
    ) -> DiagnosticsRecord {
        DiagnosticsRecord {
            t,
            mass,
            momentum,
            energy,
            kinetic,
            sup_u,
            ..Default::default()
        }
    }

    #[test]
    fn stationary_drift_zero() {
        let traj = vec![rec(0.0, 1.0, 0.0, 1.0, 0.0, 0.0); 5];
        let r = check_conservation(&traj, 1e-12).unwrap();
        assert_eq!(r.mass_drift, 0.0);
        assert_eq!(r.momentum_drift, 0.0);
        assert!(r.passed);
    }

    #[test]
    fn decay_formula() {
        let traj = vec![
            rec(0.0, 1.0, 0.5, 1.0, 0.2, 0.9),
            rec(0.1, 1.0, 0.5, 1.0, 0.15, 0.8),
        ];
        let r = check_decay_bound(&traj).unwrap();
        assert_eq!(r.kinetic_bound, 0.125);
        assert!(r.passed);
        let zero = vec![rec(0.0, 1.0, 0.0, 1.0, 0.1, 0.5); 2];
        assert!(matches!(
            check_decay_bound(&zero),
            Err(Error::DegenerateCheck(_))
        ));
    }

    #[test]
    fn dissipation_residual_of_exact_decay() {
        // E = exp(-t), D = exp(-t): residual is the trapezoid error only
        let traj: Vec<_> = (0..=100)
            .map(|k| {
                let t = k as f64 * 1e-3;
                DiagnosticsRecord {
                    t,
                    energy: (-t).exp(),
                    dissipation: (-t).exp(),
                    ..Default::default()
                }
            })
            .collect();
        let r = check_dissipation(&traj, 1e-6).unwrap();
        assert!(r.max_residual < 1e-6);
        assert!(r.energy_monotone && r.passed);
    }

    #[test]
    fn monitor_of_constant_trajectory() {
        let mut r = rec(0.0, 1.0, 0.0, 1.0, 0.0, 0.0);
        r.c_h3 = 2.0;
        r.u_h3 = 1.0;
        let traj = vec![r; 3];
        assert_eq!(uniform_monitor(&traj).unwrap().sup_monitor, 5.0);
    }
}
