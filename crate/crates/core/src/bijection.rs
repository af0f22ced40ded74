//! Bounded-distance bijection from a cut-and-project multiset onto a lattice.
//!
//! Given `Z` complementary to `V_p`, the splitting `Γ = Λ ⊕ Λ_c` with
//! `Λ = Z ∩ Γ`, and a window that is the internal image of a fundamental
//! domain of `Z/Λ′`, every coset `Z + λ` (`λ ∈ Λ_c`) carries exactly
//! `N = [Λ:Λ′]` accepted points. Labelling them `0..N` and sending label `j`
//! of coset `λ` to `φ_p(λ) + (j/N)γ₁′` gives a bijection onto the lattice
//! generated by `γ₁′/N, γ₂′, …`.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cutproject::{LiftedPoint, Parallelotope, Projector, Region, Scheme, SchemeError, SchemeFile};
use crate::lattice::{self, coordinates_in, is_direct_sum_decomposition, LatticeError};
use crate::matrix::{
    determinant, dot, inverse, scale_vec, solve_in_span, sub_vec, vec_mat, IntMatrix, Matrix,
    Vector,
};
use crate::metric::RadicalSum;
use crate::scalar::ExactScalar;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BijectionError {
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("Λ′ is not a finite-index sublattice of Z ∩ Γ: {0}")]
    SublatticeMismatch(String),
    #[error("Γ is not the direct sum of Z ∩ Γ and the given complement")]
    NotDirectSum,
    #[error("window is not the internal image of a fundamental domain for Z/Λ′: {0}")]
    NotFundamentalDomain(String),
    #[error("lattice point {0:?} is not accepted by the window")]
    NotAccepted(Vec<i64>),
    #[error("internal invariant violated: {0}")]
    InvariantBreach(String),
}

/// How the fundamental-domain hypothesis was established.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainCheck {
    /// The window generators lift to a basis of Λ′.
    Structural,
    /// Exact volume identity plus a randomized tiling test.
    VolumeAndTiling { samples: usize },
}

#[derive(Clone, Debug)]
pub struct BijectionSetup {
    scheme: Scheme,
    lambda: IntMatrix,
    lambda_prime: IntMatrix,
    lambda_c: IntMatrix,
    index: BigInt,
    phi_p: Projector,
    z_basis: Matrix,
    gamma_primes: Matrix,
    target_basis: Matrix,
    w_z: Vec<Parallelotope>,
    wz_vertices: Vec<Vec<f64>>,
    wz_physical: Vec<Vec<f64>>,
    gamma_primes_f64: Vec<Vec<f64>>,
    lattice_inverse: Vec<Vec<f64>>,
    split_inverse: IntMatrix,
    coset_transform: IntMatrix,
    coset_moduli: Vec<BigInt>,
    domain_check: DomainCheck,
}

/// Accepted points of one coset `Z + λ`, in label order.
#[derive(Clone, Debug)]
pub struct FiberRecord {
    /// Coordinates of `λ` in the Λ_c basis.
    pub lambda: Vec<BigInt>,
    pub points: Vec<LiftedPoint>,
    pub labels: Vec<usize>,
    pub images: Vec<Vector>,
    /// Whether the whole slab over this coset lies inside the region.
    pub complete: bool,
}

/// `d((N−1)/N·γ₁′, 0) + max d(v, z′)` over window and `W_Z` vertices.
#[derive(Clone, Debug, Serialize)]
pub struct DisplacementBound {
    pub step_term_sq: String,
    pub vertex_term_sq: String,
    pub total: RadicalSum,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub schema_version: u32,
    pub precision: String,
    pub index: String,
    pub divided_generator: usize,
    pub domain_check: DomainCheck,
    pub points: usize,
    pub fibers: usize,
    pub complete_fibers: usize,
    pub boundary_fibers: usize,
    pub core_targets: usize,
    pub bound: f64,
    pub bound_exact: DisplacementBound,
    pub max_displacement: f64,
    pub max_displacement_sq: String,
    pub bound_ok: bool,
    pub injective: bool,
    pub core_surjective: bool,
    pub fiber_counts_ok: bool,
    pub failures: Vec<String>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.bound_ok && self.injective && self.core_surjective && self.fiber_counts_ok
    }
}

fn to_f64s(v: &[ExactScalar]) -> Vec<f64> {
    v.iter().map(ExactScalar::to_f64).collect()
}

fn norm_f64(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn independent_rows(m: &IntMatrix) -> IntMatrix {
    let mut keep: Vec<Vec<BigInt>> = Vec::new();
    for i in 0..m.nrows() {
        let mut trial = keep.clone();
        trial.push(m.row_vec(i));
        if IntMatrix::from_rows(&trial, m.ncols()).rank() == trial.len() {
            keep = trial;
        }
    }
    IntMatrix::from_rows(&keep, m.ncols())
}

impl BijectionSetup {
    /// Validates the hypotheses and precomputes the bijection data.
    ///
    /// `z_span` spans `Z` by vectors of Γ-coordinates; `lambda_prime` is a
    /// basis of `Λ′` in Γ-coordinates; the complement defaults to the Smith
    /// normal form complement of `Λ`.
    pub fn new(
        scheme: Scheme,
        z_span: &IntMatrix,
        lambda_prime: &IntMatrix,
        lambda_c: Option<&IntMatrix>,
    ) -> Result<Self, BijectionError> {
        let n = scheme.dim();
        if z_span.ncols() != n || lambda_prime.ncols() != n {
            return Err(SchemeError::DimensionMismatch("Z and Λ′ must live in Γ-coordinates".into()).into());
        }
        let lambda = lattice::saturate(&independent_rows(z_span))?;
        let embed = |m: &IntMatrix| -> Matrix {
            let b = scheme.lattice().to_exact();
            m.to_exact().iter().map(|r| vec_mat(r, &b)).collect()
        };
        let z_basis = embed(&lambda);
        let phi_p = scheme.oblique_projector(&z_basis)?;

        if lambda_prime.nrows() != lambda.nrows() {
            return Err(BijectionError::SublatticeMismatch(format!(
                "Λ′ has rank {}, Z ∩ Γ has rank {}",
                lambda_prime.nrows(),
                lambda.nrows()
            )));
        }
        let index = lattice::index(&lambda, lambda_prime)
            .map_err(|e| BijectionError::SublatticeMismatch(e.to_string()))?;

        let lambda_c = match lambda_c {
            Some(c) => {
                if !is_direct_sum_decomposition(&lambda, c) {
                    return Err(BijectionError::NotDirectSum);
                }
                c.clone()
            }
            None => lattice::complement(&lambda)?,
        };
        let split_inverse = lambda
            .stack(&lambda_c)
            .unimodular_inverse()
            .ok_or(BijectionError::NotDirectSum)?;

        let coords = coordinates_in(&lambda, lambda_prime)?;
        let snf = lattice::smith_normal_form(&coords);
        let coset_moduli = snf.invariants();

        let gamma_primes: Matrix = embed(&lambda_c).iter().map(|g| phi_p.apply(g)).collect();
        let nn = ExactScalar::from_bigint(index.clone());
        let target_basis: Matrix = gamma_primes
            .iter()
            .enumerate()
            .map(|(j, g)| if j == 0 { scale_vec(&nn.recip(), g) } else { g.clone() })
            .collect();

        let w_z: Vec<Parallelotope> = scheme
            .window()
            .pieces()
            .iter()
            .map(|p| Parallelotope {
                origin: sub_vec(&p.origin, &phi_p.apply(&p.origin)),
                generators: p.generators.iter().map(|g| sub_vec(g, &phi_p.apply(g))).collect(),
            })
            .collect();

        let wz_vertices: Vec<Vec<f64>> = w_z.iter().flat_map(|p| p.vertices()).map(|v| to_f64s(&v)).collect();
        let wz_physical: Vec<Vec<f64>> =
            w_z.iter().flat_map(|p| p.vertices()).map(|v| to_f64s(&scheme.rho_p(&v))).collect();
        let lattice_inverse = inverse(&scheme.lattice().to_exact())
            .expect("full rank")
            .iter()
            .map(|r| to_f64s(r))
            .collect();
        let mut setup = BijectionSetup {
            wz_vertices,
            wz_physical,
            gamma_primes_f64: gamma_primes.iter().map(|g| to_f64s(g)).collect(),
            lattice_inverse,
            lambda_prime: lambda_prime.clone(),
            lambda,
            lambda_c,
            index,
            phi_p,
            z_basis,
            gamma_primes,
            target_basis,
            w_z,
            split_inverse,
            coset_transform: snf.right,
            coset_moduli,
            domain_check: DomainCheck::Structural,
            scheme,
        };
        setup.domain_check = setup.check_fundamental_domain()?;
        Ok(setup)
    }

    fn check_fundamental_domain(&self) -> Result<DomainCheck, BijectionError> {
        let lp = {
            let b = self.scheme.lattice().to_exact();
            self.lambda_prime.to_exact().iter().map(|r| vec_mat(r, &b)).collect::<Matrix>()
        };
        if let [piece] = self.w_z.as_slice() {
            let lifted: Option<Vec<Vec<BigInt>>> = piece
                .generators
                .iter()
                .map(|g| {
                    let c = solve_in_span(&lp, g)?;
                    c.iter()
                        .map(|x| x.is_integer().then(|| x.rational_part().to_integer()))
                        .collect()
                })
                .collect();
            if let Some(rows) = lifted {
                let m = IntMatrix::from_rows(&rows, self.lambda_prime.nrows());
                if m.determinant().abs().is_one() {
                    return Ok(DomainCheck::Structural);
                }
            }
        }
        // volume of W_Z in Λ′-coordinates must be 1, then sample the tiling
        let mut pieces_in_lp = Vec::new();
        let mut volume = ExactScalar::zero();
        for p in &self.w_z {
            let gens: Option<Matrix> = p.generators.iter().map(|g| solve_in_span(&lp, g)).collect();
            let origin = solve_in_span(&lp, &p.origin);
            let (Some(gens), Some(origin)) = (gens, origin) else {
                return Err(BijectionError::NotFundamentalDomain("window preimage leaves Z".into()));
            };
            volume += &determinant(&gens).abs();
            pieces_in_lp.push((origin, gens));
        }
        if volume != ExactScalar::one() {
            return Err(BijectionError::NotFundamentalDomain(format!(
                "volume of the preimage is {volume} times the covolume of Λ′"
            )));
        }
        let samples = 200;
        let k = self.lambda_prime.nrows();
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for _ in 0..samples {
            let u: Vector = (0..k)
                .map(|_| ExactScalar::ratio(rng.gen_range(-3000..3000), 997))
                .collect();
            let mut hits = 0;
            for (origin, gens) in &pieces_in_lp {
                let inv = inverse(gens).expect("nonzero volume");
                let base = sub_vec(&u, origin);
                // μ ∈ ℤᵏ with (base − μ)·inv ∈ [0,1)ᵏ, i.e. μ ∈ base − [0,1)ᵏ·gens
                let gf: Vec<Vec<f64>> = gens.iter().map(|r| to_f64s(r)).collect();
                let bf = to_f64s(&base);
                let ranges: Vec<(i64, i64)> = (0..k)
                    .map(|l| {
                        let lo: f64 = gf.iter().map(|r| r[l].max(0.0)).sum();
                        let hi: f64 = gf.iter().map(|r| r[l].min(0.0)).sum();
                        ((bf[l] - lo - 1e-6).floor() as i64, (bf[l] - hi + 1e-6).ceil() as i64)
                    })
                    .collect();
                for mu in crate::cutproject::odometer(&ranges) {
                    let muv: Vector = mu.iter().map(|&x| ExactScalar::from_int(x)).collect();
                    let t = vec_mat(&sub_vec(&base, &muv), &inv);
                    if t.iter().all(|x| x.signum() >= 0 && x < &ExactScalar::one()) {
                        hits += 1;
                    }
                }
            }
            if hits != 1 {
                return Err(BijectionError::NotFundamentalDomain(format!(
                    "sample point covered {hits} times by Λ′-translates"
                )));
            }
        }
        Ok(DomainCheck::VolumeAndTiling { samples })
    }

    pub fn scheme(&self) -> &Scheme {
        &self.scheme
    }

    /// `Λ = Z ∩ Γ` in Γ-coordinates.
    pub fn lambda(&self) -> &IntMatrix {
        &self.lambda
    }

    pub fn lambda_prime(&self) -> &IntMatrix {
        &self.lambda_prime
    }

    pub fn lambda_c(&self) -> &IntMatrix {
        &self.lambda_c
    }

    /// `N = [Λ : Λ′]`.
    pub fn index(&self) -> &BigInt {
        &self.index
    }

    pub fn z_basis(&self) -> &Matrix {
        &self.z_basis
    }

    /// `γⱼ′ = φ_p(γⱼ)` for the Λ_c basis.
    pub fn gamma_primes(&self) -> &Matrix {
        &self.gamma_primes
    }

    /// Basis `γ₁′/N, γ₂′, …` of the target lattice `Λ_c′`.
    pub fn target_basis(&self) -> &Matrix {
        &self.target_basis
    }

    /// `W_Z = ρ_i⁻¹(W) ∩ Z` as parallelotopes in `X`.
    pub fn w_z(&self) -> &[Parallelotope] {
        &self.w_z
    }

    pub fn domain_check(&self) -> &DomainCheck {
        &self.domain_check
    }

    pub fn phi_p(&self, x: &[ExactScalar]) -> Vector {
        self.phi_p.apply(x)
    }

    /// `[Λ_c′ : φ_p(Λ_c)]` from the Smith normal form of the inclusion.
    pub fn target_index(&self) -> Result<BigInt, BijectionError> {
        let mut rows = Vec::new();
        for g in &self.gamma_primes {
            let c = solve_in_span(&self.target_basis, g)
                .ok_or_else(|| BijectionError::InvariantBreach("φ_p(Λ_c) ⊄ Λ_c′".into()))?;
            let ints: Option<Vec<BigInt>> = c
                .iter()
                .map(|x| x.is_integer().then(|| x.rational_part().to_integer()))
                .collect();
            rows.push(ints.ok_or_else(|| BijectionError::InvariantBreach("φ_p(Λ_c) ⊄ Λ_c′".into()))?);
        }
        let m = IntMatrix::from_rows(&rows, self.target_basis.len());
        Ok(lattice::smith_normal_form(&m).invariants().iter().product())
    }

    /// Splits Γ-coordinates into `(Λ-coordinates, Λ_c-coordinates)`.
    pub fn split(&self, gamma: &[i64]) -> (Vec<BigInt>, Vec<BigInt>) {
        let g: Vec<BigInt> = gamma.iter().map(|&x| BigInt::from(x)).collect();
        let c = self.split_inverse.left_mul_vec(&g);
        let k = self.lambda.nrows();
        (c[..k].to_vec(), c[k..].to_vec())
    }

    /// Label of a point within its coset: the mixed-radix rank of its
    /// Λ/Λ′-class in Smith coordinates.
    pub fn label(&self, lambda_coords: &[BigInt]) -> usize {
        let s = self.coset_transform.left_mul_vec(lambda_coords);
        let mut j = BigInt::zero();
        for (x, d) in s.iter().zip(&self.coset_moduli) {
            let r = num_integer::Integer::mod_floor(x, d);
            j = j * d + r;
        }
        j.to_usize().expect("label fits in usize")
    }

    /// `φ_p(λ) + (j/N)γ₁′`.
    pub fn target_point(&self, lambda_c_coords: &[BigInt], j: usize) -> Vector {
        let mut v = vec![ExactScalar::zero(); self.scheme.dim()];
        let mut axpy = |k: &ExactScalar, g: &[ExactScalar]| {
            for (vi, gi) in v.iter_mut().zip(g) {
                *vi += &(k * gi);
            }
        };
        for (b, g) in lambda_c_coords.iter().zip(&self.gamma_primes) {
            if !b.is_zero() {
                axpy(&ExactScalar::from_bigint(b.clone()), g);
            }
        }
        if j > 0 {
            let s = &ExactScalar::from_int(j as i64) / &ExactScalar::from_bigint(self.index.clone());
            axpy(&s, &self.gamma_primes[0]);
        }
        v
    }

    /// Image of an accepted point under the bijection.
    pub fn map_point(&self, y: &LiftedPoint) -> Result<Vector, BijectionError> {
        if self.scheme.accept(&y.gamma).is_none() {
            return Err(BijectionError::NotAccepted(y.gamma.clone()));
        }
        let (a, b) = self.split(&y.gamma);
        Ok(self.target_point(&b, self.label(&a)))
    }

    pub fn displacement_bound(&self) -> DisplacementBound {
        let nn = ExactScalar::from_bigint(self.index.clone());
        let frac = &(&nn - &ExactScalar::one()) / &nn;
        let g1 = &self.gamma_primes[0];
        let step = &(&frac * &frac) * &dot(g1, g1);
        let mut far = ExactScalar::zero();
        for p in self.scheme.window().pieces() {
            for v in p.vertices() {
                for q in &self.w_z {
                    for z in q.vertices() {
                        let d = sub_vec(&v, &z);
                        far = far.max(dot(&d, &d));
                    }
                }
            }
        }
        DisplacementBound {
            step_term_sq: step.to_string(),
            vertex_term_sq: far.to_string(),
            total: RadicalSum::new(vec![step, far]),
        }
    }

    fn physical_reach(&self) -> f64 {
        self.wz_physical.iter().map(|v| norm_f64(v)).fold(0.0, f64::max)
    }

    /// Whether every point of the slab `φ_p(λ) + W_Z` lies in the region,
    /// decided conservatively.
    pub fn slab_inside(&self, lambda_c_coords: &[BigInt], region: &Region) -> bool {
        let mut base = vec![0.0; self.scheme.dim()];
        for (b, g) in lambda_c_coords.iter().zip(&self.gamma_primes_f64) {
            let b = b.to_f64().expect("finite coordinate");
            for (x, gi) in base.iter_mut().zip(g) {
                *x += b * gi;
            }
        }
        let shifted = |v: &Vec<f64>| -> Vec<f64> { base.iter().zip(v).map(|(a, b)| a + b).collect() };
        match region {
            Region::Ball { center, radius } => {
                let c = to_f64s(&self.scheme.rho_p(center));
                let r = radius.to_f64();
                let tol = 1e-9 * (1.0 + r);
                self.wz_physical.iter().all(|v| {
                    let d: Vec<f64> = shifted(v).iter().zip(&c).map(|(a, b)| a - b).collect();
                    norm_f64(&d) <= r - tol
                })
            }
            Region::Box { lo, hi } => self.wz_vertices.iter().all(|v| {
                let x = shifted(v);
                (0..x.len()).all(|i| {
                    let g: f64 = x.iter().zip(&self.lattice_inverse).map(|(xj, r)| xj * r[i]).sum();
                    let tol = 1e-9 * (1.0 + g.abs());
                    g >= lo[i] as f64 + tol && g <= hi[i] as f64 - tol
                })
            }),
        }
    }

    /// Λ_c-coordinates of every coset whose slab lies inside the region.
    pub fn core_cosets(&self, region: &Region) -> Vec<Vec<BigInt>> {
        let (centre, radius) = match region {
            Region::Ball { center, radius } => (to_f64s(&self.scheme.rho_p(center)), radius.to_f64()),
            Region::Box { lo, hi } => {
                if lo.iter().zip(hi).any(|(a, b)| a > b) {
                    return Vec::new();
                }
                let b = self.scheme.lattice().to_exact();
                let corners: Vec<Vec<f64>> = (0..1usize << lo.len())
                    .map(|mask| {
                        let g: Vector = (0..lo.len())
                            .map(|i| ExactScalar::from_int(if mask >> i & 1 == 1 { hi[i] } else { lo[i] }))
                            .collect();
                        to_f64s(&self.scheme.rho_p(&vec_mat(&g, &b)))
                    })
                    .collect();
                let dim = corners[0].len();
                let c: Vec<f64> = (0..dim)
                    .map(|d| corners.iter().map(|p| p[d]).sum::<f64>() / corners.len() as f64)
                    .collect();
                let r = corners
                    .iter()
                    .map(|p| norm_f64(&p.iter().zip(&c).map(|(a, b)| a - b).collect::<Vec<_>>()))
                    .fold(0.0, f64::max);
                (c, r)
            }
        };
        if radius < 0.0 {
            return Vec::new();
        }
        let basis: Vec<Vec<f64>> = self.gamma_primes.iter().map(|g| to_f64s(g)).collect();
        let mut out: Vec<Vec<BigInt>> = crate::cutproject::ellipsoid_points(&basis, &centre, radius + self.physical_reach())
            .into_iter()
            .map(|l| l.into_iter().map(BigInt::from).collect::<Vec<_>>())
            .filter(|l| self.slab_inside(l, region))
            .collect();
        out.sort();
        out
    }

    /// Groups the points of a patch by coset, ordered by their labels.
    pub fn fibers(&self, patch: &[LiftedPoint], region: &Region) -> Result<Vec<FiberRecord>, BijectionError> {
        self.fibers_with(patch, region, &|_, j| j)
    }

    /// As [`fibers`](Self::fibers) with labels permuted per coset by
    /// `relabel(λ, j)`, which must be a permutation of `0..N` for every `λ`.
    pub fn fibers_with(
        &self,
        patch: &[LiftedPoint],
        region: &Region,
        relabel: &(dyn Fn(&[BigInt], usize) -> usize + Sync),
    ) -> Result<Vec<FiberRecord>, BijectionError> {
        let mut groups: BTreeMap<Vec<BigInt>, Vec<(usize, LiftedPoint)>> = BTreeMap::new();
        for y in patch {
            let (a, b) = self.split(&y.gamma);
            let j = relabel(&b, self.label(&a));
            groups.entry(b).or_default().push((j, y.clone()));
        }
        let records: Vec<FiberRecord> = groups
            .into_par_iter()
            .map(|(lambda, mut pts)| {
                pts.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.gamma.cmp(&b.1.gamma)));
                let complete = self.slab_inside(&lambda, region);
                let images = pts.iter().map(|(j, _)| self.target_point(&lambda, *j)).collect();
                FiberRecord {
                    labels: pts.iter().map(|(j, _)| *j).collect(),
                    points: pts.into_iter().map(|(_, p)| p).collect(),
                    images,
                    complete,
                    lambda,
                }
            })
            .collect();
        Ok(records)
    }

    pub fn verify_patch(&self, patch: &[LiftedPoint], region: &Region) -> Result<VerificationReport, BijectionError> {
        self.verify_patch_with(patch, region, &|_, j| j)
    }

    /// Checks fiber cardinalities, injectivity, surjectivity onto the core
    /// and the displacement bound on a patch generated over `region`.
    pub fn verify_patch_with(
        &self,
        patch: &[LiftedPoint],
        region: &Region,
        relabel: &(dyn Fn(&[BigInt], usize) -> usize + Sync),
    ) -> Result<VerificationReport, BijectionError> {
        for y in patch {
            if self.scheme.accept(&y.gamma).is_none() {
                return Err(BijectionError::NotAccepted(y.gamma.clone()));
            }
        }
        let n = self.index.to_usize().expect("index fits in usize");
        let fibers = self.fibers_with(patch, region, relabel)?;
        let bound = self.displacement_bound();
        let mut failures = Vec::new();

        let mut fiber_counts_ok = true;
        for f in fibers.iter().filter(|f| f.complete) {
            let distinct: HashSet<usize> = f.labels.iter().copied().collect();
            if f.points.len() != n || distinct.len() != n || f.labels.iter().any(|&j| j >= n) {
                fiber_counts_ok = false;
                failures.push(format!("coset {:?} has {} points, expected {n}", f.lambda, f.points.len()));
            }
        }

        let mut seen = HashSet::new();
        let mut injective = true;
        for f in &fibers {
            for img in &f.images {
                if !seen.insert(img.clone()) {
                    injective = false;
                    failures.push(format!("image {:?} hit twice", to_f64s(img)));
                }
            }
        }

        let core = self.core_cosets(region);
        let by_lambda: BTreeMap<&Vec<BigInt>, &FiberRecord> = fibers.iter().map(|f| (&f.lambda, f)).collect();
        let mut core_surjective = true;
        for l in &core {
            let ok = by_lambda.get(l).is_some_and(|f| {
                let distinct: HashSet<usize> = f.labels.iter().copied().collect();
                f.points.len() == n && distinct.len() == n
            });
            if !ok {
                core_surjective = false;
                failures.push(format!("core coset {l:?} is not hit exactly {n} times"));
            }
        }
        let complete_fibers = fibers.iter().filter(|f| f.complete).count();
        if complete_fibers != core.len() {
            core_surjective = false;
            failures.push(format!(
                "{complete_fibers} complete cosets in the patch but {} cosets in the core",
                core.len()
            ));
        }

        let sq: Vec<ExactScalar> = fibers
            .par_iter()
            .flat_map_iter(|f| {
                f.points.iter().zip(&f.images).map(|(p, img)| {
                    let d = sub_vec(img, &p.physical);
                    dot(&d, &d)
                })
            })
            .collect();
        let mut max_sq = ExactScalar::zero();
        let mut bound_ok = true;
        for d in &sq {
            if !bound.total.bounds_sqrt(d) {
                bound_ok = false;
                failures.push(format!("displacement {} exceeds the bound", d.to_f64().sqrt()));
            }
            if d > &max_sq {
                max_sq = d.clone();
            }
        }
        failures.truncate(50);

        Ok(VerificationReport {
            schema_version: REPORT_SCHEMA_VERSION,
            precision: "exact".into(),
            index: self.index.to_string(),
            divided_generator: 0,
            domain_check: self.domain_check.clone(),
            points: patch.len(),
            fibers: fibers.len(),
            complete_fibers,
            boundary_fibers: fibers.len() - complete_fibers,
            core_targets: core.len() * n,
            bound: bound.total.to_f64(),
            bound_exact: bound,
            max_displacement: max_sq.to_f64().sqrt(),
            max_displacement_sq: max_sq.to_string(),
            bound_ok,
            injective,
            core_surjective,
            fiber_counts_ok,
            failures,
        })
    }

    /// CSV of `y`, `f(y)` and `d(f(y), y)` for each point.
    pub fn pairs_csv(&self, patch: &[LiftedPoint]) -> Result<String, BijectionError> {
        let dim = self.scheme.dim();
        let mut out = String::new();
        let cols: Vec<String> = ["y", "fy"]
            .iter()
            .flat_map(|p| (0..dim).map(move |i| format!("{p}_{i}")))
            .chain(["displacement".to_string(), "precision".to_string()])
            .collect();
        out.push_str(&cols.join(","));
        out.push('\n');
        for y in patch {
            let fy = self.map_point(y)?;
            let d = sub_vec(&fy, &y.physical);
            let fields: Vec<String> = to_f64s(&y.physical)
                .iter()
                .chain(to_f64s(&fy).iter())
                .map(|x| format!("{x:.15e}"))
                .chain([format!("{:.15e}", dot(&d, &d).to_f64().sqrt()), "exact".into()])
                .collect();
            let _ = writeln!(out, "{}", fields.join(","));
        }
        Ok(out)
    }
}

/// Description file: a scheme plus `Z`, `Λ′` and optionally `Λ_c`, all in
/// Γ-coordinates.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetupFile {
    pub scheme: SchemeFile,
    pub z: Vec<Vec<i64>>,
    pub lambda_prime: Vec<Vec<i64>>,
    #[serde(default)]
    pub lambda_c: Option<Vec<Vec<i64>>>,
}

impl SetupFile {
    pub fn from_toml(text: &str) -> Result<Self, BijectionError> {
        toml::from_str(text).map_err(|e| SchemeError::Malformed(e.to_string()).into())
    }

    pub fn build(&self) -> Result<BijectionSetup, BijectionError> {
        let scheme = self.scheme.build()?;
        let n = scheme.dim();
        let rows = |r: &[Vec<i64>], what: &str| -> Result<IntMatrix, BijectionError> {
            if r.is_empty() || r.iter().any(|v| v.len() != n) {
                return Err(SchemeError::Malformed(format!("{what} rows must have {n} entries")).into());
            }
            Ok(IntMatrix::from_rows(r, n))
        };
        let lc = match &self.lambda_c {
            Some(c) => Some(rows(c, "lambda_c")?),
            None => None,
        };
        BijectionSetup::new(scheme, &rows(&self.z, "z")?, &rows(&self.lambda_prime, "lambda_prime")?, lc.as_ref())
    }
}

/// Γ-coordinates of an ambient vector, when integral.
pub fn gamma_coordinates(scheme: &Scheme, x: &[ExactScalar]) -> Option<Vec<BigInt>> {
    let b = scheme.lattice().to_exact();
    let c = solve_in_span(&b, x)?;
    c.iter().map(|v| v.is_integer().then(|| v.rational_part().to_integer())).collect()
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{fibonacci_setup, fibonacci_strip};
    use crate::cutproject::Window;

    fn big(v: &[i64]) -> Vec<BigInt> {
        v.iter().map(|&x| BigInt::from(x)).collect()
    }

    #[test]
    fn fibonacci_setup_data() {
        let s = fibonacci_setup(1).unwrap();
        assert_eq!(s.index(), &BigInt::from(1));
        assert_eq!(s.lambda(), &IntMatrix::from_i64_rows(&[&[1, 1]]));
        assert_eq!(s.domain_check(), &DomainCheck::Structural);
        assert_eq!(s.target_index().unwrap(), BigInt::from(1));
        // ℤ(1,1) ⊕ ℤ(0,1) reaches every point of a box exactly once
        let mut hit = HashSet::new();
        for a in -6..=6i64 {
            for b in -6..=6i64 {
                hit.insert((a, a + b));
            }
        }
        for x in -3..=3 {
            for y in -3..=3 {
                assert!(hit.contains(&(x, y)));
                let (a, b) = s.split(&[x, y]);
                assert_eq!(a, big(&[x]));
                assert_eq!(b, big(&[y - x]));
            }
        }
    }

    #[test]
    fn doubled_sublattice_has_index_two() {
        let s = fibonacci_setup(2).unwrap();
        assert_eq!(s.index(), &BigInt::from(2));
        assert_eq!(s.target_index().unwrap(), BigInt::from(2));
        assert_eq!(s.label(&big(&[3])), 1);
        assert_eq!(s.label(&big(&[-4])), 0);
    }

    #[test]
    fn complete_fibers_have_n_points() {
        for n in [1, 2] {
            let s = fibonacci_setup(n).unwrap();
            let region = Region::cube(2, 0, 20);
            let patch = s.scheme().generate_patch(&region).unwrap();
            let fibers = s.fibers(&patch, &region).unwrap();
            let complete: Vec<_> = fibers.iter().filter(|f| f.complete).collect();
            assert!(!complete.is_empty());
            for f in complete {
                assert_eq!(f.points.len(), n as usize);
            }
            assert!(s.fibers(&[], &region).unwrap().is_empty());
        }
    }

    #[test]
    fn images_form_progression() {
        let s = fibonacci_setup(1).unwrap();
        let region = Region::cube(2, 0, 30);
        let patch = s.scheme().generate_patch(&region).unwrap();
        let mut imgs: Vec<Vector> = patch.iter().map(|y| s.map_point(y).unwrap()).collect();
        imgs.sort_by(|a, b| a[0].cmp(&b[0]));
        let gap = &s.gamma_primes()[0];
        let step = dot(gap, gap);
        for w in imgs.windows(2) {
            let d = sub_vec(&w[1], &w[0]);
            assert_eq!(dot(&d, &d), step);
        }
    }

    #[test]
    fn verification_passes() {
        for n in [1, 2] {
            let s = fibonacci_setup(n).unwrap();
            let region = Region::cube(2, -40, 40);
            let patch = s.scheme().generate_patch(&region).unwrap();
            let r = s.verify_patch(&patch, &region).unwrap();
            assert!(r.passed(), "{:?}", r.failures);
            assert!(r.max_displacement <= r.bound);
        }
    }

    #[test]
    fn doubling_halves_first_term() {
        let a = fibonacci_setup(2).unwrap().displacement_bound();
        let g = &fibonacci_setup(2).unwrap().gamma_primes()[0].clone();
        let expect = &dot(g, g) / &ExactScalar::from_int(4);
        assert_eq!(a.step_term_sq, expect.to_string());
        assert_eq!(fibonacci_setup(1).unwrap().displacement_bound().step_term_sq, "0");
    }

    #[test]
    fn unaccepted_point_rejected() {
        let s = fibonacci_setup(1).unwrap();
        let y = s.scheme().lift(&[5, -9], 0);
        if s.scheme().accept(&[5, -9]).is_none() {
            assert!(matches!(s.map_point(&y), Err(BijectionError::NotAccepted(_))));
        }
    }

    #[test]
    fn z_inside_physical_space_is_degenerate() {
        let one = ExactScalar::one();
        let zero = ExactScalar::zero();
        let window = Window::single(Parallelotope {
            origin: vec![zero.clone(), zero.clone()],
            generators: vec![vec![zero.clone(), one.clone()]],
        });
        let scheme = Scheme::new(
            vec![vec![one.clone(), zero.clone()]],
            vec![vec![zero, one]],
            IntMatrix::identity(2),
            window,
            false,
        )
        .unwrap();
        let z = IntMatrix::from_i64_rows(&[&[1, 0]]);
        let err = BijectionSetup::new(scheme, &z, &z, None).unwrap_err();
        assert!(matches!(err, BijectionError::Scheme(SchemeError::DegenerateDecomposition(_))));
        assert!(err.to_string().contains("degenerate decomposition"));
    }

    #[test]
    fn wrong_window_rejected() {
        // window built for Λ′ = 2Λ but declared with Λ′ = Λ
        let z = IntMatrix::from_i64_rows(&[&[1, 1]]);
        let err = BijectionSetup::new(fibonacci_strip(2), &z, &z, None).unwrap_err();
        assert!(matches!(err, BijectionError::NotFundamentalDomain(_)));
        let bad = IntMatrix::from_i64_rows(&[&[1, 2]]);
        assert!(matches!(
            BijectionSetup::new(fibonacci_strip(1), &z, &bad, None),
            Err(BijectionError::SublatticeMismatch(_))
        ));
    }
}
