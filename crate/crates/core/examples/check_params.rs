//! Tail-exponent windows and family rates for a few parameter sets.

use vflab::initdata::{admissible_window, admissible_window_1d, fmt_num, EpsFamilySpec};
use vflab::{scenario, FluidParams, RawParams};

fn main() -> vflab::Result<()> {
    for (gamma, delta) in [(1.4, 0.9), (2.0, 0.5), (3.0, 0.2), (1.1, 0.99)] {
        let p = FluidParams::new(&RawParams {
            gamma,
            delta,
            ..scenario::standard_params(0.01)
        })?;
        let fam = EpsFamilySpec {
            base: scenario::standard_data(),
        };
        println!(
            "gamma={gamma} delta={delta} iota={} window={} window_1d={} r0=1/{} q0=1/{}",
            fmt_num(p.iota()),
            admissible_window(&p),
            admissible_window_1d(&p),
            fmt_num(1.0 / fam.r0(&p)),
            fmt_num(1.0 / fam.q0(&p)),
        );
    }
    Ok(())
}
