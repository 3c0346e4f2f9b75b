//! Grid self-convergence at fixed viscosity.

use vflab::limit_study::{run_refinement, RefinePlan};
use vflab::{scenario, FluidParams, SolverConfig};

fn main() -> vflab::Result<()> {
    let p = FluidParams::new(&scenario::standard_params(0.01))?;
    let plan = RefinePlan {
        n_ladder: vec![200, 400, 800, 1600],
        half_width: scenario::STANDARD_HALF_WIDTH,
        eps: 0.01,
        t_end: 0.1,
        data: scenario::standard_data(),
        solver: SolverConfig::default(),
    };
    print!("{}", run_refinement(&plan, &p)?.to_csv());
    Ok(())
}
