//! Plain step against the Picard-iterated step, with the contraction of successive iterates.

use vflab::initdata::build_initial_data;
use vflab::solver::{state_distance, Picard, Stepper};
use vflab::{scenario, FluidParams, Grid1D, SolverConfig, State};

fn main() -> vflab::Result<()> {
    let p = FluidParams::new(&scenario::standard_params(0.05))?;
    let grid = Grid1D::new(scenario::STANDARD_HALF_WIDTH, 400)?;
    let cfg = SolverConfig {
        picard: Picard::On {
            tol: 1e-12,
            max_iter: 20,
        },
        ..SolverConfig::default()
    };
    let data = build_initial_data(&scenario::pulse_data(), &p, &grid)?;
    let s0 = State::from_density(&data.rho0, &data.u0, &p, &cfg)?;
    let stepper = Stepper::new(&p, &cfg)?;
    let plain = stepper.step(&s0)?;
    let iterated = stepper.step_picard(&s0)?;
    println!("picard iterations: {}", iterated.picard_iters);
    println!(
        "|plain - iterated| = {:.3e}",
        state_distance(&plain.state, &iterated.state)
    );
    for (k, r) in stepper.picard_residuals(&s0, 6)?.iter().enumerate() {
        println!("iterate {k}: {r:.3e}");
    }
    Ok(())
}
