//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::fs;
use std::time::Instant;

use vflab::cli::{cmd_run, RunConfig};
use vflab::diagnostics::{
    check_conservation, check_decay_bound, check_dissipation, DiagnosticsRecord, Recorder,
};
use vflab::initdata::{
    build_eps_family, build_initial_data, e0_quantity, fmt_num, DataFamilySpec, EpsFamilySpec,
};
use vflab::limit_study::{run_eta_ladder, run_sweep, EtaPlan, SweepPlan, DEFAULT_EPS_LADDER};
use vflab::mms::{run_mms, MmsStudy};
use vflab::model::{c_to_h, c_to_rho, rho_to_c, rho_to_h, verify_structure, StructureCheck};
use vflab::solver::{implicit_viscous_step, run};
use vflab::{scenario, Field, FluidParams, Grid1D, Norms, RawParams, SolverConfig, State};

type Outcome = (bool, String);

fn params(eps: f64) -> FluidParams {
    FluidParams::new(&scenario::standard_params(eps)).unwrap()
}

/// Records at every step, so per-interval checks see every step.
fn trajectory(
    data: &DataFamilySpec,
    p: &FluidParams,
    n: usize,
    t_end: f64,
) -> Vec<DiagnosticsRecord> {
    let grid = Grid1D::new(scenario::STANDARD_HALF_WIDTH, n).unwrap();
    let cfg = SolverConfig {
        t_end,
        snapshot_every: 1,
        snapshot_dt: None,
        ..SolverConfig::default()
    };
    let d = build_initial_data(data, p, &grid).unwrap();
    let s0 = State::from_density(&d.rho0, &d.u0, p, &cfg).unwrap();
    let mut rec = Recorder::new(p);
    run(&s0, p, &cfg, &mut rec).unwrap();
    rec.records
}

fn ratios(v: &[f64]) -> Vec<f64> {
    v.windows(2).map(|w| w[0] / w[1]).collect()
}

fn sci(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x:.3e}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn fixed(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x:.3}"))
        .collect::<Vec<_>>()
        .join(", ")
}

const GAMMAS: [f64; 3] = [1.4, 2.0, 3.0];

fn structure() -> Outcome {
    let p = params(0.01);
    let opts = StructureCheck {
        states: 1000,
        c_max: 10.0,
        u_max: 10.0,
        ..StructureCheck::default()
    };
    let r = verify_structure(&p, &GAMMAS, &opts).unwrap();
    (
        r.states == 1000 && r.passes(1e-9),
        format!(
            "asymmetry={:e} min_a0_diag={:.3e} eig_rel_err={:.3e}",
            r.max_asymmetry, r.min_a0_diag, r.max_eig_rel_err
        ),
    )
}

fn transforms() -> Outcome {
    let rho: Vec<f64> = (0..=220)
        .map(|k| 10f64.powf(-8.0 + 11.0 * k as f64 / 220.0))
        .collect();
    let mut worst: f64 = 0.0;
    for gamma in GAMMAS {
        for delta in [0.2, 0.5, 0.9] {
            let p = FluidParams::new(&RawParams {
                gamma,
                delta,
                ..scenario::standard_params(0.01)
            })
            .unwrap();
            let c = rho_to_c(&rho, &p).unwrap();
            let back = c_to_rho(&c, &p).unwrap();
            let h_direct = rho_to_h(&rho, &p).unwrap();
            let h_via_c = c_to_h(&c, &p, 0.0).unwrap();
            for i in 0..rho.len() {
                worst = worst.max((back[i] - rho[i]).abs() / rho[i]);
                worst = worst.max((h_via_c[i] - h_direct[i]).abs() / h_direct[i]);
            }
        }
    }
    (worst <= 1e-12, format!("max relative error={worst:.3e}"))
}

fn mms() -> Outcome {
    let p = FluidParams::new(&RawParams {
        epsilon: 0.01,
        ..RawParams::default()
    })
    .unwrap();
    let start = Instant::now();
    let r = run_mms(
        &p,
        &MmsStudy {
            ns: vec![200, 400, 800],
            t_end: 0.5,
            solver: SolverConfig::default(),
        },
    )
    .unwrap();
    let secs = start.elapsed().as_secs_f64();
    let ok = r.orders.iter().all(|o| (1.7..=2.3).contains(o)) && secs < 60.0;
    (
        ok,
        format!(
            "errors=[{}] orders=[{}] runtime={secs:.2}s",
            sci(&r.errors),
            fixed(&r.orders)
        ),
    )
}

const PULSE_NS: [usize; 3] = [400, 800, 1600];

fn pulse_runs() -> Vec<Vec<DiagnosticsRecord>> {
    let p = params(0.01);
    let data = scenario::pulse_data();
    PULSE_NS
        .iter()
        .map(|&n| trajectory(&data, &p, n, 0.1))
        .collect()
}

fn conservation(runs: &[Vec<DiagnosticsRecord>]) -> Outcome {
    let reps: Vec<_> = runs
        .iter()
        .map(|t| check_conservation(t, 1e-6).unwrap())
        .collect();
    let mass: Vec<f64> = reps.iter().map(|r| r.mass_drift).collect();
    let mom: Vec<f64> = reps.iter().map(|r| r.momentum_drift).collect();
    let (rm, rp) = (ratios(&mass), ratios(&mom));
    let ok = reps.last().unwrap().passed && rm.iter().chain(&rp).all(|r| *r >= 1.8);
    (
        ok,
        format!(
            "mass=[{}] momentum=[{}] ratios mass=[{}] momentum=[{}]",
            sci(&mass),
            sci(&mom),
            fixed(&rm),
            fixed(&rp)
        ),
    )
}

fn dissipation(runs: &[Vec<DiagnosticsRecord>]) -> Outcome {
    let reps: Vec<_> = runs
        .iter()
        .map(|t| check_dissipation(t, f64::INFINITY).unwrap())
        .collect();
    let res: Vec<f64> = reps.iter().map(|r| r.max_residual).collect();
    let rr = ratios(&res);
    let monotone = reps.iter().all(|r| r.energy_monotone);
    let worst_inc = reps
        .iter()
        .map(|r| r.max_energy_increase)
        .fold(f64::NEG_INFINITY, f64::max);

    // backward-Euler damping of a sine with h = 1, against its closed-form factor
    let eps = 0.05;
    let p = params(eps);
    let k = 2.0;
    let grid = Grid1D::new(4.0 * std::f64::consts::PI / k, 800).unwrap();
    let u = grid.sample(|x| (k * x).sin());
    let dt = 0.1;
    let out =
        implicit_viscous_step(&u, &grid.sample(|_| 1.0), dt, &p, &SolverConfig::default()).unwrap();
    let dx = grid.dx();
    let lame = p.operators().lame_coeff;
    let factor = 1.0 / (1.0 + dt * eps * lame * 4.0 * (0.5 * k * dx).sin().powi(2) / (dx * dx));
    let band = 200..600;
    let e_in: f64 = u.values()[band.clone()].iter().map(|v| v * v).sum();
    let e_out: f64 = out.values()[band].iter().map(|v| v * v).sum();
    let sine_err = (e_out / e_in - factor * factor).abs();

    let ok = monotone && rr.iter().all(|r| *r >= 2.0) && sine_err <= 1e-8;
    (
        ok,
        format!(
            "max dE/E0={worst_inc:.3e} residuals=[{}] ratios=[{}] sine energy factor err={sine_err:.3e}",
            sci(&res),
            fixed(&rr)
        ),
    )
}

fn decay_bound() -> Outcome {
    let p = params(0.01);
    let traj = trajectory(&scenario::pulse_data(), &p, 800, 0.2);
    let r = check_decay_bound(&traj).unwrap();
    (
        r.passed && r.p0.abs() > 0.0,
        format!(
            "P0={:.4} min Ek={:.4e} >= 0.9*{:.4e}, min |u|inf={:.4} >= 0.9*{:.4}",
            r.p0, r.min_kinetic, r.kinetic_bound, r.min_sup_u, r.sup_u_bound
        ),
    )
}

fn sweep_plan() -> SweepPlan {
    let grid = Grid1D::new(scenario::STANDARD_HALF_WIDTH, 800).unwrap();
    let mut plan = SweepPlan::standard(grid, scenario::standard_data(), 0.1);
    plan.eps_ladder = DEFAULT_EPS_LADDER.to_vec();
    plan
}

fn sweep_and_monitor() -> (Outcome, Outcome) {
    let p = params(0.01);
    let res = run_sweep(&sweep_plan(), &p).unwrap();
    let errs: Vec<f64> = res.per_eps.iter().map(|r| r.sup_err()).collect();
    let c7 = (
        !res.any_failed() && res.strictly_decreasing(),
        format!(
            "errors=[{}] fitted order={} R2={}",
            sci(&errs),
            res.fit.map_or("n/a".into(), |f| format!("{:.3}", f.order)),
            res.fit.map_or("n/a".into(), |f| format!("{:.4}", f.r2)),
        ),
    );
    let mons: Vec<f64> = res.per_eps.iter().map(|r| r.monitor).collect();
    let spread = res.monitor_spread();
    let c8 = (
        spread <= 2.0,
        format!("monitors=[{}] max/min={spread:.3}", fixed(&mons)),
    );
    (c7, c8)
}

fn family() -> Outcome {
    let base = params(1.0);
    let spec = EpsFamilySpec {
        base: scenario::standard_data(),
    };
    let grid = Grid1D::new(scenario::STANDARD_HALF_WIDTH, 800).unwrap();
    let speed = |rho: &Field, p: &FluidParams| {
        Field::new(grid, rho_to_c(rho.values(), p).unwrap()).unwrap()
    };
    let c0 = speed(
        &build_initial_data(&spec.base, &base, &grid).unwrap().rho0,
        &base,
    );
    let mut e0 = Vec::new();
    let mut dist = Vec::new();
    for eps in [1.0, 1e-1, 1e-2, 1e-3, 1e-4] {
        let p = base.with_epsilon(eps).unwrap();
        let d = build_eps_family(&spec, &p, &grid, eps).unwrap();
        e0.push(e0_quantity(&d.rho0, &d.u0, &p).unwrap().total());
        dist.push(Norms::full().hs(&speed(&d.rho0, &p).sub(&c0), 3).unwrap());
    }
    let spread =
        e0.iter().cloned().fold(0.0, f64::max) / e0.iter().cloned().fold(f64::INFINITY, f64::min);
    let decreasing = dist.windows(2).all(|w| w[1] < w[0]);
    let r0 = format!("1/{}", fmt_num(1.0 / spec.r0(&base)));
    let q0 = format!("1/{}", fmt_num(1.0 / spec.q0(&base)));
    (
        spread <= 10.0 && decreasing && r0 == "1/19.5" && q0 == "1/31.2",
        format!(
            "E0 max/min={spread:.3} |c0eps-c0|_3=[{}] r0={r0} q0={q0}",
            sci(&dist)
        ),
    )
}

fn eta_robustness() -> Outcome {
    let p = params(0.01);
    let plan = EtaPlan {
        eta_ladder: vec![1e-3, 1e-4, 1e-5, 1e-6],
        eps: 0.01,
        window_r: 5.0,
        t_end: 0.1,
        grid: Grid1D::new(10.0, 1600).unwrap(),
        data: scenario::standard_data(),
        solver: SolverConfig::default(),
    };
    let r = run_eta_ladder(&plan, &p).unwrap();
    (
        r.monotone(),
        format!("differences=[{}]", sci(&r.differences)),
    )
}

/// Domain for the reformulation check: the pinned far field is close to stationary here.
const WIDE_HALF_WIDTH: f64 = 10.0;
/// Below the smallest initial density on the wide domain, so the floor never fires.
const INACTIVE_ETA: f64 = 1e-14;

fn max_drift_and_residual(half_width: f64, n: usize, p: &FluidParams) -> (f64, f64) {
    let grid = Grid1D::new(half_width, n).unwrap();
    let cfg = SolverConfig {
        t_end: 0.1,
        snapshot_every: 1,
        snapshot_dt: None,
        eta: INACTIVE_ETA,
        ..SolverConfig::default()
    };
    let d = build_initial_data(&scenario::standard_data(), p, &grid).unwrap();
    let s0 = State::from_density(&d.rho0, &d.u0, p, &cfg).unwrap();
    let mut rec = Recorder::new(p);
    run(&s0, p, &cfg, &mut rec).unwrap();
    let drift = rec
        .records
        .iter()
        .map(|r| r.compat_drift)
        .fold(0.0, f64::max);
    let resid = rec.records[1..]
        .iter()
        .map(|r| r.psi_residual)
        .fold(0.0, f64::max);
    (drift, resid)
}

fn reformulation() -> Outcome {
    let p = params(0.01);
    let scale = WIDE_HALF_WIDTH / scenario::STANDARD_HALF_WIDTH;
    let (drift, resid): (Vec<_>, Vec<_>) = PULSE_NS
        .iter()
        .map(|&n| max_drift_and_residual(WIDE_HALF_WIDTH, (n as f64 * scale) as usize, &p))
        .unzip();
    let narrow: Vec<_> = PULSE_NS
        .iter()
        .map(|&n| max_drift_and_residual(scenario::STANDARD_HALF_WIDTH, n, &p).1)
        .collect();
    let (rd, rr) = (ratios(&drift), ratios(&resid));
    (
        rd.iter().chain(&rr).all(|r| *r >= 2.0),
        format!(
            "L={WIDE_HALF_WIDTH} eta={INACTIVE_ETA:e} compat drift=[{}] ratios=[{}] psi residual=[{}] ratios=[{}] (L={} psi ratios=[{}])",
            sci(&drift),
            fixed(&rd),
            sci(&resid),
            fixed(&rr),
            scenario::STANDARD_HALF_WIDTH,
            fixed(&ratios(&narrow))
        ),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::default();
    let mut sink = Vec::new();
    let outs: Vec<_> = ["a", "b"].iter().map(|s| dir.path().join(s)).collect();
    for o in &outs {
        fs::create_dir_all(o).unwrap();
        assert_eq!(cmd_run(&cfg, o, &mut sink).unwrap(), 0);
    }
    let mut names: Vec<_> = fs::read_dir(&outs[0])
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .filter(|n| n.to_string_lossy() == "diag.csv" || n.to_string_lossy().starts_with("snap_"))
        .collect();
    names.sort();
    let same = names
        .iter()
        .all(|n| fs::read(outs[0].join(n)).ok() == fs::read(outs[1].join(n)).ok());
    (
        same && names.len() > 2,
        format!("{} files compared", names.len()),
    )
}

fn main() {
    let start = Instant::now();
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    results.push(("1 structure", structure()));
    results.push(("2 transforms", transforms()));
    results.push(("3 mms convergence", mms()));
    let runs = pulse_runs();
    results.push(("4 conservation", conservation(&runs)));
    results.push(("5 energy dissipation", dissipation(&runs)));
    results.push(("6 decay bound", decay_bound()));
    let (c7, c8) = sweep_and_monitor();
    results.push(("7 vanishing viscosity", c7));
    results.push(("8 uniform monitor", c8));
    results.push(("9 epsilon family", family()));
    results.push(("10 eta robustness", eta_robustness()));
    results.push(("11 reformulation consistency", reformulation()));
    results.push(("12 determinism", determinism()));
    let mut failed = 0;
    for (name, (ok, detail)) in &results {
        println!(
            "{} criterion {name}: {detail}",
            if *ok { "PASS" } else { "FAIL" }
        );
        failed += usize::from(!ok);
    }
    println!(
        "acceptance: {} of {} passed in {:.1}s",
        results.len() - failed,
        results.len(),
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
