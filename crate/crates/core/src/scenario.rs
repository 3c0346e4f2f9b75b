//! Reference setups shared by the examples, the CLI defaults and the test suites.
//!
//! The standard fluid is `A = 0.05, gamma = 1.4, delta = 0.9, alpha = 1, beta = 0`
//! on `[-5, 5]`, where the default density stays above the `1e-6` floor and the
//! inviscid solution remains smooth well past `t = 0.1`.

use crate::initdata::{DataFamilySpec, VelocityProfile};
use crate::model::RawParams;

pub const STANDARD_ENTROPY: f64 = 0.05;
pub const STANDARD_HALF_WIDTH: f64 = 5.0;
pub const STANDARD_T_END: f64 = 0.1;

pub fn standard_params(epsilon: f64) -> RawParams {
    RawParams {
        a: STANDARD_ENTROPY,
        epsilon,
        ..RawParams::default()
    }
}

/// Default family data: bump plus tail with the odd, momentum-free velocity.
pub fn standard_data() -> DataFamilySpec {
    DataFamilySpec::default()
}

/// Same density with a shifted Gaussian velocity, so the momentum is nonzero.
pub fn pulse_data() -> DataFamilySpec {
    DataFamilySpec {
        velocity: VelocityProfile::ShiftedGaussian {
            amplitude: 0.2,
            center: 0.5,
            width: 1.0,
        },
        ..DataFamilySpec::default()
    }
}
