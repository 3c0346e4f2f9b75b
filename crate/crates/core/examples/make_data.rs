//! Builds the epsilon-family of initial data and prints E0 along the ladder,
//! together with the distance of the sound speed to the base data.

use vflab::initdata::{build_eps_family, build_initial_data, e0_quantity, EpsFamilySpec};
use vflab::model::rho_to_c;
use vflab::{scenario, Field, FluidParams, Grid1D, Norms};

fn sound_speed(rho: &Field, p: &FluidParams) -> vflab::Result<Field> {
    Field::new(*rho.grid(), rho_to_c(rho.values(), p)?)
}

fn main() -> vflab::Result<()> {
    let grid = Grid1D::new(scenario::STANDARD_HALF_WIDTH, 800)?;
    let base = FluidParams::new(&scenario::standard_params(1.0))?;
    let spec = EpsFamilySpec {
        base: scenario::standard_data(),
    };
    let c0 = sound_speed(&build_initial_data(&spec.base, &base, &grid)?.rho0, &base)?;
    println!("r0 = {:.6}, q0 = {:.6}", spec.r0(&base), spec.q0(&base));
    println!("{:>8} {:>14} {:>14}", "eps", "E0", "|c0eps - c0|_3");
    for eps in [1.0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5] {
        let p = base.with_epsilon(eps)?;
        let d = build_eps_family(&spec, &p, &grid, eps)?;
        let e0 = e0_quantity(&d.rho0, &d.u0, &p)?.total();
        let dc = Norms::full().hs(&sound_speed(&d.rho0, &p)?.sub(&c0), 3)?;
        println!("{eps:>8.0e} {e0:>14.6} {dc:>14.6e}");
    }
    Ok(())
}
