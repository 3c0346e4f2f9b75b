//! Single run of the shifted-Gaussian pulse with conservation, energy and decay checks.

use vflab::diagnostics::{
    check_conservation, check_decay_bound, check_dissipation, uniform_monitor, Recorder,
};
use vflab::initdata::build_initial_data;
use vflab::solver::run;
use vflab::{scenario, FluidParams, Grid1D, SolverConfig, State};

fn main() -> vflab::Result<()> {
    let p = FluidParams::new(&scenario::standard_params(0.01))?;
    let grid = Grid1D::new(scenario::STANDARD_HALF_WIDTH, 800)?;
    let cfg = SolverConfig {
        t_end: 0.2,
        snapshot_dt: Some(0.01),
        ..SolverConfig::default()
    };
    let data = build_initial_data(&scenario::pulse_data(), &p, &grid)?;
    let s0 = State::from_density(&data.rho0, &data.u0, &p, &cfg)?;
    let mut rec = Recorder::new(&p);
    let out = run(&s0, &p, &cfg, &mut rec)?;
    println!(
        "steps = {}, floor hits = {}",
        out.steps, out.total_floor_hits
    );
    println!("{:?}", check_conservation(&rec.records, 1e-6)?);
    let d = check_dissipation(&rec.records, 1e-3)?;
    println!(
        "max dissipation residual {:.3e}, energy monotone {}",
        d.max_residual, d.energy_monotone
    );
    println!("{:?}", check_decay_bound(&rec.records)?);
    println!("{:?}", uniform_monitor(&rec.records)?);
    Ok(())
}
