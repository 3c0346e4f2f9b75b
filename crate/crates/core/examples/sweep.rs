//! Vanishing-viscosity sweep: errors against the inviscid run and the fitted rate.

use vflab::limit_study::{run_sweep, SweepPlan};
use vflab::{scenario, FluidParams, Grid1D, SolverConfig};

fn main() -> vflab::Result<()> {
    let p = FluidParams::new(&scenario::standard_params(0.01))?;
    let grid = Grid1D::new(scenario::STANDARD_HALF_WIDTH, 800)?;
    let mut plan = SweepPlan::standard(grid, scenario::standard_data(), scenario::STANDARD_T_END);
    plan.solver = SolverConfig {
        snapshot_dt: Some(0.01),
        ..SolverConfig::default()
    };
    let res = run_sweep(&plan, &p)?;
    print!("{}", res.to_csv());
    println!("{}", res.summary_line());
    println!(
        "strictly decreasing: {}, monitor spread: {:.3}",
        res.strictly_decreasing(),
        res.monitor_spread()
    );
    Ok(())
}
