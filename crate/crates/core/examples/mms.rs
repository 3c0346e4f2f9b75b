//! Manufactured-solution convergence of the full scheme.

use vflab::mms::{run_mms, MmsStudy};
use vflab::{FluidParams, RawParams, SolverConfig};

fn main() -> vflab::Result<()> {
    let p = FluidParams::new(&RawParams {
        epsilon: 0.05,
        ..RawParams::default()
    })?;
    let study = MmsStudy {
        ns: vec![100, 200, 400, 800, 1600],
        t_end: 0.5,
        solver: SolverConfig::default(),
    };
    print!("{}", run_mms(&p, &study)?.to_csv());
    Ok(())
}
