//! Cut-and-project schemes: `X = ℝⁿ = V_p ⊕ V_i`, a lattice `Γ`, and a window
//! `W ⊂ V_i` made of half-open parallelotopes.

mod io;
mod patch;
mod window;

pub use io::{
    parse_scalar_row, patch_csv, patch_json, ScalarText, SchemeFile, WindowFile, PATCH_SCHEMA_VERSION,
};
pub use patch::{LiftedPoint, Region, RegionSpec};
pub use window::{Parallelotope, PieceInfo, Window};
pub(crate) use patch::{ellipsoid_points, odometer};
pub(crate) use window::{generators_in, zonotope_volume};

use num_bigint::BigInt;
use thiserror::Error;

use crate::form::AffineForm;
use crate::matrix::{big_vec, inverse, mat_mul, rank, solve_in_span, sub_vec, vec_mat, IntMatrix, Matrix, Vector};
use crate::scalar::{common_field, ExactScalar};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SchemeError {
    #[error("degenerate decomposition: {0}")]
    DegenerateDecomposition(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("coordinates mix incompatible quadratic fields")]
    MixedFields,
    #[error("lattice basis is not of full rank")]
    LatticeNotFullRank,
    #[error("window is degenerate: {0}")]
    DegenerateWindow(String),
    #[error("vector does not lie in the internal space")]
    NotInInternal,
    #[error("singular offset: lattice point {gamma:?} lies on a facet of window piece {piece}")]
    SingularOffset { gamma: Vec<i64>, piece: usize },
    #[error("unbounded region: {0}")]
    UnboundedRegion(String),
    #[error("malformed scheme description: {0}")]
    Malformed(String),
}

/// Which projection to apply.
#[derive(Debug, Clone, Copy)]
pub enum Target<'a> {
    Physical,
    Internal,
    /// Projection onto `V_p` along the given subspace (rows span it).
    Oblique(&'a [Vector]),
}

/// Linear projection `x ↦ x·M` onto `V_p` along a complement.
#[derive(Clone, Debug)]
pub struct Projector {
    matrix: Matrix,
}

impl Projector {
    /// Projection onto the span of `onto` along the span of `along`.
    pub fn new(onto: &[Vector], along: &[Vector], dim: usize) -> Result<Self, SchemeError> {
        if onto.len() + along.len() != dim {
            return Err(SchemeError::DegenerateDecomposition(format!(
                "dimensions {} + {} do not add up to {dim}",
                onto.len(),
                along.len()
            )));
        }
        let stacked: Matrix = onto.iter().chain(along).cloned().collect();
        let inv = inverse(&stacked).ok_or_else(|| {
            SchemeError::DegenerateDecomposition("subspaces intersect nontrivially".into())
        })?;
        let k = onto.len();
        let left: Matrix = inv.iter().map(|r| r[..k].to_vec()).collect();
        Ok(Projector {
            matrix: mat_mul(&left, onto),
        })
    }

    pub fn apply(&self, x: &[ExactScalar]) -> Vector {
        vec_mat(x, &self.matrix)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }
}

#[derive(Clone, Debug)]
pub struct Scheme {
    dim: usize,
    radicand: u64,
    physical: Matrix,
    internal: Matrix,
    lattice: IntMatrix,
    window: Window,
    generic: bool,
    rho_p: Projector,
    physical_forms: Vec<AffineForm>,
    piece_forms: Vec<Vec<AffineForm>>,
}

impl Scheme {
    /// Validates the decomposition and the window.
    ///
    /// With `generic` set, enumeration rejects lattice points whose internal
    /// image falls on a facet of a window piece.
    pub fn new(
        physical: Matrix,
        internal: Matrix,
        lattice: IntMatrix,
        window: Window,
        generic: bool,
    ) -> Result<Self, SchemeError> {
        let dim = lattice.ncols();
        let all_rows = physical.iter().chain(&internal);
        if physical.iter().chain(&internal).any(|r| r.len() != dim) || lattice.nrows() != dim {
            return Err(SchemeError::DimensionMismatch(format!(
                "ambient dimension {dim} is inconsistent across bases"
            )));
        }
        let radicand = common_field(all_rows.flatten().chain(window.scalars())).ok_or(SchemeError::MixedFields)?;
        if rank(&physical) != physical.len() || rank(&internal) != internal.len() {
            return Err(SchemeError::DegenerateDecomposition("subspace basis is dependent".into()));
        }
        let rho_p = Projector::new(&physical, &internal, dim)?;
        if lattice.rank() != dim {
            return Err(SchemeError::LatticeNotFullRank);
        }
        let mut scheme = Scheme {
            dim,
            radicand,
            physical,
            internal,
            lattice,
            window,
            generic,
            rho_p,
            physical_forms: Vec::new(),
            piece_forms: Vec::new(),
        };
        for piece in scheme.window.pieces() {
            if piece.generators.len() != scheme.internal.len() {
                return Err(SchemeError::DegenerateWindow(format!(
                    "piece has {} generators, internal space has dimension {}",
                    piece.generators.len(),
                    scheme.internal.len()
                )));
            }
            if rank(&piece.generators) != piece.generators.len() {
                return Err(SchemeError::DegenerateWindow("piece generators are dependent".into()));
            }
            for v in piece.generators.iter().chain(std::iter::once(&piece.origin)) {
                if !scheme.in_internal(v) {
                    return Err(SchemeError::NotInInternal);
                }
            }
        }
        if scheme.window.pieces().is_empty() {
            return Err(SchemeError::DegenerateWindow("window has no pieces".into()));
        }
        let zero = vec![ExactScalar::zero(); dim];
        scheme.physical_forms = scheme.lattice_forms(scheme.rho_p.matrix(), &zero);
        scheme.piece_forms = scheme
            .window
            .pieces()
            .iter()
            .map(|p| {
                let t = scheme.piece_coordinate_matrix(p);
                let c: Vector = vec_mat(&p.origin, &t).iter().map(|x| -x).collect();
                scheme.lattice_forms(&t, &c)
            })
            .collect();
        Ok(scheme)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn physical_dim(&self) -> usize {
        self.physical.len()
    }

    pub fn internal_dim(&self) -> usize {
        self.internal.len()
    }

    /// Square-free radicand of the coordinate field, `0` for ℚ.
    pub fn radicand(&self) -> u64 {
        self.radicand
    }

    pub fn physical_basis(&self) -> &Matrix {
        &self.physical
    }

    pub fn internal_basis(&self) -> &Matrix {
        &self.internal
    }

    pub fn lattice(&self) -> &IntMatrix {
        &self.lattice
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn requires_generic(&self) -> bool {
        self.generic
    }

    /// Same data with another window.
    pub fn with_window(&self, window: Window) -> Result<Self, SchemeError> {
        Scheme::new(
            self.physical.clone(),
            self.internal.clone(),
            self.lattice.clone(),
            window,
            self.generic,
        )
    }

    pub fn in_internal(&self, v: &[ExactScalar]) -> bool {
        solve_in_span(&self.internal, v).is_some()
    }

    pub fn in_physical(&self, v: &[ExactScalar]) -> bool {
        solve_in_span(&self.physical, v).is_some()
    }

    pub fn rho_p(&self, x: &[ExactScalar]) -> Vector {
        self.rho_p.apply(x)
    }

    pub fn rho_i(&self, x: &[ExactScalar]) -> Vector {
        sub_vec(x, &self.rho_p(x))
    }

    pub fn project(&self, x: &[ExactScalar], target: Target<'_>) -> Result<Vector, SchemeError> {
        if x.len() != self.dim {
            return Err(SchemeError::DimensionMismatch(format!(
                "point has {} coordinates, expected {}",
                x.len(),
                self.dim
            )));
        }
        Ok(match target {
            Target::Physical => self.rho_p(x),
            Target::Internal => self.rho_i(x),
            Target::Oblique(z) => self.oblique_projector(z)?.apply(x),
        })
    }

    /// `φ_p` for the decomposition `X = V_p ⊕ Z`.
    pub fn oblique_projector(&self, z: &[Vector]) -> Result<Projector, SchemeError> {
        if rank(z) != z.len() {
            return Err(SchemeError::DegenerateDecomposition("Z basis is dependent".into()));
        }
        Projector::new(&self.physical, z, self.dim)
    }

    /// Point of `X` with Γ-coordinates `γ`.
    pub fn embed(&self, gamma: &[i64]) -> Vector {
        let g: Vec<BigInt> = gamma.iter().map(|&x| BigInt::from(x)).collect();
        big_vec(&self.lattice.left_mul_vec(&g))
    }

    /// Affine forms giving the coordinates of `γ ↦ (γ·B)·M + c`.
    pub(crate) fn lattice_forms(&self, m: &Matrix, constant: &[ExactScalar]) -> Vec<AffineForm> {
        let b = self.lattice.to_exact();
        let bm = mat_mul(&b, m);
        (0..constant.len())
            .map(|j| {
                let coeffs: Vec<ExactScalar> = bm.iter().map(|r| r[j].clone()).collect();
                AffineForm::new(&coeffs, &constant[j])
            })
            .collect()
    }

    /// Matrix mapping `x` to the coordinates of `ρ_i(x)` in the generator
    /// basis of `piece`.
    pub(crate) fn piece_coordinate_matrix(&self, piece: &Parallelotope) -> Matrix {
        let stacked: Matrix = self.physical.iter().chain(&piece.generators).cloned().collect();
        let inv = inverse(&stacked).expect("validated piece");
        let kp = self.physical.len();
        inv.iter().map(|r| r[kp..].to_vec()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::add_vec;

    fn s(x: &str) -> ExactScalar {
        x.parse().unwrap()
    }

    fn fib() -> Scheme {
        let phi = s("(1+√5)/2");
        let physical = vec![vec![phi.clone(), s("1")]];
        let internal = vec![vec![s("-1"), phi]];
        let generators: Matrix = vec![vec![s("1"), s("0")], vec![s("0"), s("1")]]
            .iter()
            .map(|g| {
                let p = Projector::new(&internal, &physical, 2).unwrap();
                p.apply(g)
            })
            .collect();
        let window = Window::zonotope(&internal, vec![s("0"), s("0")], generators).unwrap();
        Scheme::new(physical, internal, IntMatrix::identity(2), window, false).unwrap()
    }

    #[test]
    fn decomposition_reconstitutes() {
        let sc = fib();
        let x = vec![s("1"), s("0")];
        let p = sc.project(&x, Target::Physical).unwrap();
        let i = sc.project(&x, Target::Internal).unwrap();
        assert_eq!(add_vec(&p, &i), x);
        assert!(sc.in_physical(&p));
        assert!(sc.in_internal(&i));
        assert_eq!(sc.rho_p(&p), p);
    }

    #[test]
    fn oblique_projection() {
        let sc = fib();
        let z = vec![vec![s("1"), s("1")]];
        let x = vec![s("0"), s("1")];
        let y = sc.project(&x, Target::Oblique(&z)).unwrap();
        assert!(sc.in_physical(&y));
        let rest = sub_vec(&x, &y);
        assert!(solve_in_span(&z, &rest).is_some());
        let bad = vec![vec![s("(1+√5)/2"), s("1")]];
        assert!(matches!(
            sc.project(&x, Target::Oblique(&bad)),
            Err(SchemeError::DegenerateDecomposition(_))
        ));
    }

    #[test]
    fn degenerate_subspaces_rejected() {
        let physical = vec![vec![s("1"), s("0")]];
        let internal = vec![vec![s("2"), s("0")]];
        let window = Window::single(Parallelotope {
            origin: vec![s("0"), s("0")],
            generators: vec![vec![s("1"), s("0")]],
        });
        assert!(matches!(
            Scheme::new(physical, internal, IntMatrix::identity(2), window, false),
            Err(SchemeError::DegenerateDecomposition(_))
        ));
    }
}
