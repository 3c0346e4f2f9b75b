//! Randomized check of the symmetrizer and characteristic speeds for several gammas.

use vflab::model::{
    assemble_symbols, characteristic_speeds, pencil_eigenvalues, verify_structure, StructureCheck,
};
use vflab::{scenario, FluidParams};

fn main() -> vflab::Result<()> {
    let p = FluidParams::new(&scenario::standard_params(0.01))?;
    let s = assemble_symbols(0.8, 0.3, &p);
    println!(
        "pencil eigenvalues {:?}, expected [-0.5, 1.1]",
        pencil_eigenvalues(&s)
    );
    println!("{:?}", characteristic_speeds(0.8, 0.3, &p));
    let report = verify_structure(&p, &[1.4, 2.0, 3.0], &StructureCheck::default())?;
    println!("{report:#?}");
    println!("passes: {}", report.passes(1e-9));
    Ok(())
}
