//! Dependence of a viscous run on the vacuum floor.

use vflab::limit_study::{run_eta_ladder, EtaPlan};
use vflab::{scenario, FluidParams, Grid1D, SolverConfig};

fn main() -> vflab::Result<()> {
    let p = FluidParams::new(&scenario::standard_params(0.01))?;
    let grid = Grid1D::new(10.0, 1600)?;
    let plan = EtaPlan {
        eta_ladder: vec![1e-3, 1e-4, 1e-5, 1e-6],
        eps: 0.01,
        window_r: 5.0,
        t_end: 0.1,
        grid,
        data: scenario::standard_data(),
        solver: SolverConfig::default(),
    };
    let r = run_eta_ladder(&plan, &p)?;
    print!("{}", r.to_csv());
    println!("monotone: {}", r.monotone());
    Ok(())
}
