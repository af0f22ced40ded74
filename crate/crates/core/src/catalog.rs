//! Named example schemes.

use crate::bijection::{BijectionError, BijectionSetup};
use crate::cutproject::{Parallelotope, Projector, Scheme, SchemeError, Window};
use crate::matrix::{IntMatrix, Vector};
use crate::scalar::ExactScalar;

pub const PRESETS: &[&str] = &["fibonacci", "fibonacci-n2", "brs-golden", "brs-sqrt2", "penrose"];

/// `(1+√5)/2`.
pub fn golden() -> ExactScalar {
    ExactScalar::quadratic(1, 1, 5, 2)
}

fn fibonacci_spaces() -> (Vec<Vector>, Vec<Vector>) {
    let phi = golden();
    let physical = vec![vec![phi.clone(), ExactScalar::one()]];
    let internal = vec![vec![ExactScalar::from_int(-1), phi]];
    (physical, internal)
}

/// Offset of the Fibonacci windows; rational and non-integral, so no lattice
/// point projects onto a window endpoint.
pub fn fibonacci_offset() -> Vector {
    vec![ExactScalar::ratio(1, 3), ExactScalar::ratio(1, 7)]
}

/// `Γ = ℤ²`, `V_p = span((φ,1))`, window `ρ_i(o + [0,1)²)` tiled into pieces.
pub fn fibonacci_square() -> Scheme {
    let (physical, internal) = fibonacci_spaces();
    let rho_i = Projector::new(&internal, &physical, 2).expect("complementary");
    let gens = vec![
        rho_i.apply(&[ExactScalar::one(), ExactScalar::zero()]),
        rho_i.apply(&[ExactScalar::zero(), ExactScalar::one()]),
    ];
    let window = Window::zonotope(&internal, rho_i.apply(&fibonacci_offset()), gens).expect("nondegenerate");
    Scheme::new(physical, internal, IntMatrix::identity(2), window, true).expect("valid scheme")
}

/// Window `ρ_i(o + [0,1)·(n,n))`, a fundamental domain image for `Z/nΛ` with
/// `Z = span((1,1))`.
pub fn fibonacci_strip(n: i64) -> Scheme {
    let (physical, internal) = fibonacci_spaces();
    let rho_i = Projector::new(&internal, &physical, 2).expect("complementary");
    let nn = ExactScalar::from_int(n);
    let window = Window::single(Parallelotope {
        origin: rho_i.apply(&fibonacci_offset()),
        generators: vec![rho_i.apply(&[nn.clone(), nn])],
    });
    Scheme::new(physical, internal, IntMatrix::identity(2), window, true).expect("valid scheme")
}

/// `Z = span((1,1))`, `Λ′ = nℤ(1,1)`, `Λ_c = ℤ(0,1)`.
pub fn fibonacci_setup(n: i64) -> Result<BijectionSetup, BijectionError> {
    let z = IntMatrix::from_i64_rows(&[&[1, 1]]);
    let lp = IntMatrix::from_i64_rows(&[&[n, n]]);
    let lc = IntMatrix::from_i64_rows(&[&[0, 1]]);
    BijectionSetup::new(fibonacci_strip(n), &z, &lp, Some(&lc))
}

/// Bijection setup from a preset name.
pub fn setup(name: &str) -> Result<BijectionSetup, BijectionError> {
    match name {
        "fibonacci" => fibonacci_setup(1),
        "fibonacci-n2" => fibonacci_setup(2),
        "brs-golden" | "brs-sqrt2" => brs_instance(name)
            .expect("listed preset")
            .build_setup()
            .map_err(|e| BijectionError::InvariantBreach(e.to_string())),
        other => Err(SchemeError::Malformed(format!(
            "unknown setup preset {other:?}; expected fibonacci, fibonacci-n2, brs-golden or brs-sqrt2"
        ))
        .into()),
    }
}

pub fn brs_instance(name: &str) -> Result<crate::brs::BrsInstance, SchemeError> {
    match name {
        "brs-golden" => Ok(crate::brs::BrsInstance::golden()),
        "brs-sqrt2" => Ok(crate::brs::BrsInstance::sqrt2()),
        other => Err(SchemeError::Malformed(format!(
            "unknown instance preset {other:?}; expected brs-golden or brs-sqrt2"
        ))),
    }
}

/// Scheme from a preset name.
pub fn scheme(name: &str) -> Result<Scheme, SchemeError> {
    match name {
        "fibonacci" => Ok(fibonacci_square()),
        "fibonacci-n2" => Ok(fibonacci_strip(2)),
        "brs-golden" => Ok(crate::brs::BrsInstance::golden().build_scheme().expect("valid preset")),
        "brs-sqrt2" => Ok(crate::brs::BrsInstance::sqrt2().build_scheme().expect("valid preset")),
        "penrose" => crate::penrose::penrose_scheme(&crate::penrose::default_offset()),
        other => Err(SchemeError::Malformed(format!(
            "unknown preset {other:?}; expected one of {}",
            PRESETS.join(", ")
        ))),
    }
}
