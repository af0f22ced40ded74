use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::io::{parse_scalar_row, ScalarText};
use super::{Projector, Scheme, SchemeError};
use crate::form::{AffineForm, Placement};
use crate::hp::{Ambiguous, HpFloat};
use crate::matrix::{dot, inverse, mat_mul, sub_vec, Matrix, Vector};
use crate::scalar::ExactScalar;

/// Lattice point together with its two projections.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LiftedPoint {
    pub gamma: Vec<i64>,
    pub physical: Vector,
    pub internal: Vector,
    pub piece: usize,
}

/// Finite enumeration region.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Region {
    /// Γ-coordinates with `lo[i] ≤ γᵢ ≤ hi[i]`.
    Box { lo: Vec<i64>, hi: Vec<i64> },
    /// Points whose physical image lies within `radius` of `ρ_p(center)`.
    Ball { center: Vector, radius: ExactScalar },
}

impl Region {
    pub fn cube(dim: usize, lo: i64, hi: i64) -> Self {
        Region::Box {
            lo: vec![lo; dim],
            hi: vec![hi; dim],
        }
    }

    pub fn ball(dim: usize, radius: ExactScalar) -> Self {
        Region::Ball {
            center: vec![ExactScalar::zero(); dim],
            radius,
        }
    }
}

/// Serialized region: either both box bounds or a radius.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    #[serde(default)]
    pub box_lo: Option<Vec<i64>>,
    #[serde(default)]
    pub box_hi: Option<Vec<i64>>,
    #[serde(default)]
    pub radius: Option<ScalarText>,
    #[serde(default)]
    pub center: Option<Vec<ScalarText>>,
}

impl RegionSpec {
    pub fn to_region(&self, dim: usize) -> Result<Region, SchemeError> {
        match (&self.box_lo, &self.box_hi, &self.radius) {
            (Some(lo), Some(hi), None) => {
                if lo.len() != dim || hi.len() != dim {
                    return Err(SchemeError::DimensionMismatch(format!(
                        "box bounds must have {dim} coordinates"
                    )));
                }
                Ok(Region::Box {
                    lo: lo.clone(),
                    hi: hi.clone(),
                })
            }
            (None, None, Some(r)) => {
                let radius = r.parse().map_err(|e| SchemeError::UnboundedRegion(format!("radius: {e}")))?;
                let center = match &self.center {
                    Some(c) => parse_scalar_row(c)?,
                    None => vec![ExactScalar::zero(); dim],
                };
                if center.len() != dim {
                    return Err(SchemeError::DimensionMismatch(format!("center must have {dim} coordinates")));
                }
                Ok(Region::Ball { center, radius })
            }
            (None, None, None) => Err(SchemeError::UnboundedRegion("no bounds given".into())),
            (Some(_), None, _) | (None, Some(_), _) => {
                Err(SchemeError::UnboundedRegion("box is missing one of its bounds".into()))
            }
            _ => Err(SchemeError::UnboundedRegion("give either a box or a radius, not both".into())),
        }
    }
}

/// Precomputed data for enumerating the lattice points over one window piece.
struct PieceScan<'a> {
    piece: usize,
    forms: &'a [AffineForm],
    subset: Vec<usize>,
    rest: Vec<usize>,
    fiber_inv: Vec<Vec<f64>>,
    rest_coeffs: Vec<Vec<f64>>,
    constant: Vec<f64>,
    spread: Vec<(f64, f64)>,
    psi_rest: Vec<Vec<f64>>,
    reach: f64,
}

fn to_f64_matrix(m: &Matrix) -> Vec<Vec<f64>> {
    m.iter().map(|r| r.iter().map(ExactScalar::to_f64).collect()).collect()
}

fn norm_f64(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl Scheme {
    fn piece_scan(&self, piece: usize) -> PieceScan<'_> {
        let n = self.dim;
        let k = self.internal.len();
        let p = &self.window.pieces()[piece];
        let tmat = self.piece_coordinate_matrix(p);
        let a = mat_mul(&self.lattice.to_exact(), &tmat);
        let b: Vector = (0..k).map(|j| -dot(&p.origin, &tmat.iter().map(|r| r[j].clone()).collect::<Vec<_>>())).collect();

        // choose the fiber coordinates so that candidate boxes are tight
        let mut best: Option<(f64, Vec<usize>, Matrix)> = None;
        for s in super::window::k_subsets(n, k) {
            let a_s: Matrix = s.iter().map(|&i| a[i].clone()).collect();
            let Some(inv) = inverse(&a_s) else { continue };
            let det = crate::matrix::determinant(&a_s).abs().to_f64();
            let inv_f = to_f64_matrix(&inv);
            let boxvol: f64 = (0..k)
                .map(|l| inv_f.iter().map(|r| r[l].abs()).sum::<f64>() + 1.0)
                .product();
            let cost = det * boxvol;
            if best.as_ref().map_or(true, |(c, _, _)| cost < *c * (1.0 - 1e-9)) {
                best = Some((cost, s, inv));
            }
        }
        let (_, subset, inv) = best.expect("window piece spans the internal space");
        let rest: Vec<usize> = (0..n).filter(|i| !subset.contains(i)).collect();
        let fiber_inv = to_f64_matrix(&inv);
        let spread = (0..k)
            .map(|l| {
                let lo: f64 = fiber_inv.iter().map(|r| r[l].min(0.0)).sum();
                let hi: f64 = fiber_inv.iter().map(|r| r[l].max(0.0)).sum();
                (lo, hi)
            })
            .collect();

        let basis = self.lattice.to_exact();
        let along: Matrix = subset.iter().map(|&i| basis[i].clone()).collect();
        let psi = Projector::new(&self.physical, &along, n).expect("fiber directions complement V_p");
        let psi_rest = rest.iter().map(|&i| psi.apply(&basis[i]).iter().map(ExactScalar::to_f64).collect()).collect();
        let reach = p
            .vertices()
            .iter()
            .map(|v| norm_f64(&psi.apply(v).iter().map(ExactScalar::to_f64).collect::<Vec<_>>()))
            .fold(0.0, f64::max);

        PieceScan {
            piece,
            forms: &self.piece_forms[piece],
            rest_coeffs: rest.iter().map(|&i| a[i].iter().map(ExactScalar::to_f64).collect()).collect(),
            constant: b.iter().map(ExactScalar::to_f64).collect(),
            subset,
            rest,
            fiber_inv,
            spread,
            psi_rest,
            reach,
        }
    }

    /// Placement of each piece coordinate of `ρ_i(γ)`.
    fn placements(&self, piece: usize, gamma: &[i64]) -> Vec<Placement> {
        self.piece_forms[piece].iter().map(|f| f.placement(gamma)).collect()
    }

    /// Window piece containing `ρ_i(γ)` (half-open, exact).
    pub fn accept(&self, gamma: &[i64]) -> Option<usize> {
        (0..self.window.len()).find(|&i| self.placements(i, gamma).iter().all(|p| p.in_half_open()))
    }

    /// Like [`accept`](Self::accept), but reports lattice points on a facet of
    /// some piece when the scheme requires a generic offset.
    pub fn accept_checked(&self, gamma: &[i64]) -> Result<Option<usize>, SchemeError> {
        let mut found = None;
        for i in 0..self.window.len() {
            let pl = self.placements(i, gamma);
            if self.generic && pl.iter().all(|p| p.in_closed()) && pl.iter().any(|p| p.on_boundary()) {
                return Err(SchemeError::SingularOffset {
                    gamma: gamma.to_vec(),
                    piece: i,
                });
            }
            if found.is_none() && pl.iter().all(|p| p.in_half_open()) {
                found = Some(i);
            }
        }
        Ok(found)
    }

    /// Acceptance evaluated in binary fixed point with `bits` fractional bits.
    /// Returns the accepting piece and the smallest distance to a facet seen
    /// among the coordinates that decided the outcome.
    pub fn accept_float(&self, gamma: &[i64], bits: u32) -> Result<(Option<usize>, f64), Ambiguous> {
        let one = HpFloat::from_int(1, bits);
        let mut margin = f64::INFINITY;
        for (i, forms) in self.piece_forms.iter().enumerate() {
            let mut outside = false;
            let mut ambiguous = None;
            let mut local = f64::INFINITY;
            for f in forms {
                let (coeffs, c0) = f.coefficients();
                let t = coeffs
                    .iter()
                    .zip(gamma)
                    .fold(HpFloat::from_exact(&c0, bits), |acc, (c, &g)| {
                        acc + HpFloat::from_exact(c, bits) * HpFloat::from_int(g, bits)
                    });
                let lo = t.sign();
                let hi = (one.clone() - t.clone()).sign();
                local = local.min(t.abs().to_f64()).min((one.clone() - t).abs().to_f64());
                match (lo, hi) {
                    (Ok(-1), _) | (_, Ok(-1)) => outside = true,
                    (Err(e), _) | (_, Err(e)) => ambiguous = Some(e),
                    _ => {}
                }
            }
            if outside {
                continue;
            }
            if let Some(e) = ambiguous {
                return Err(e);
            }
            margin = margin.min(local);
            return Ok((Some(i), margin));
        }
        Ok((None, margin))
    }

    /// Exact lift of an accepted lattice point.
    pub fn lift(&self, gamma: &[i64], piece: usize) -> LiftedPoint {
        let physical: Vector = self.physical_forms.iter().map(|f| f.eval(gamma)).collect();
        let internal = sub_vec(&self.embed(gamma), &physical);
        LiftedPoint {
            gamma: gamma.to_vec(),
            physical,
            internal,
            piece,
        }
    }

    /// All accepted lattice points in `region`, sorted lexicographically by
    /// their Γ-coordinates.
    pub fn generate_patch(&self, region: &Region) -> Result<Vec<LiftedPoint>, SchemeError> {
        let mut out = Vec::new();
        for piece in 0..self.window.len() {
            out.extend(self.generate_piece(piece, region)?);
        }
        out.sort_by(|a, b| a.gamma.cmp(&b.gamma).then(a.piece.cmp(&b.piece)));
        Ok(out)
    }

    /// Accepted lattice points of one window piece.
    pub fn generate_piece(&self, piece: usize, region: &Region) -> Result<Vec<LiftedPoint>, SchemeError> {
        let scan = self.piece_scan(piece);
        let (slices, box_bounds, ball) = match region {
            Region::Box { lo, hi } => {
                if lo.len() != self.dim || hi.len() != self.dim {
                    return Err(SchemeError::DimensionMismatch("box bounds".into()));
                }
                if lo.iter().zip(hi).any(|(a, b)| a > b) {
                    return Ok(Vec::new());
                }
                let ranges: Vec<(i64, i64)> = scan.rest.iter().map(|&i| (lo[i], hi[i])).collect();
                (odometer(&ranges), Some((lo.clone(), hi.clone())), None)
            }
            Region::Ball { center, radius } => {
                if center.len() != self.dim {
                    return Err(SchemeError::DimensionMismatch("ball center".into()));
                }
                if radius.signum() < 0 {
                    return Ok(Vec::new());
                }
                let c = self.rho_p(center);
                let cf: Vec<f64> = c.iter().map(ExactScalar::to_f64).collect();
                let rho = radius.to_f64() + scan.reach;
                (ellipsoid_points(&scan.psi_rest, &cf, rho), None, Some((c, radius * radius)))
            }
        };

        let results: Vec<Result<Vec<LiftedPoint>, SchemeError>> = slices
            .par_iter()
            .map(|lam| {
                let mut found = Vec::new();
                for gamma in scan.candidates(lam, box_bounds.as_ref()) {
                    let pl: Vec<Placement> = scan.forms.iter().map(|f| f.placement(&gamma)).collect();
                    if !pl.iter().all(|p| p.in_closed()) {
                        continue;
                    }
                    if self.generic && pl.iter().any(|p| p.on_boundary()) {
                        return Err(SchemeError::SingularOffset {
                            gamma,
                            piece: scan.piece,
                        });
                    }
                    if !pl.iter().all(|p| p.in_half_open()) {
                        continue;
                    }
                    let lp = self.lift(&gamma, scan.piece);
                    if let Some((c, r2)) = &ball {
                        let d = sub_vec(&lp.physical, c);
                        if &dot(&d, &d) > r2 {
                            continue;
                        }
                    }
                    found.push(lp);
                }
                Ok(found)
            })
            .collect();
        let mut out = Vec::new();
        for r in results {
            out.extend(r?);
        }
        Ok(out)
    }
}

impl PieceScan<'_> {
    /// Integer points `γ` with the given off-fiber coordinates whose fiber
    /// coordinates lie in the bounding box of the window preimage.
    fn candidates(&self, lam: &[i64], bounds: Option<&(Vec<i64>, Vec<i64>)>) -> Vec<Vec<i64>> {
        let k = self.subset.len();
        let n = k + self.rest.len();
        // centre c = −(b + λ·A_rest)·A_S⁻¹
        let shift: Vec<f64> = (0..k)
            .map(|j| self.constant[j] + lam.iter().zip(&self.rest_coeffs).map(|(&x, r)| x as f64 * r[j]).sum::<f64>())
            .collect();
        let mut ranges = Vec::with_capacity(k);
        for l in 0..k {
            let c: f64 = -(0..k).map(|j| shift[j] * self.fiber_inv[j][l]).sum::<f64>();
            let margin = 1e-7 * (1.0 + c.abs());
            let mut lo = (c + self.spread[l].0 - margin).ceil() as i64;
            let mut hi = (c + self.spread[l].1 + margin).floor() as i64;
            if let Some((blo, bhi)) = bounds {
                let i = self.subset[l];
                lo = lo.max(blo[i]);
                hi = hi.min(bhi[i]);
            }
            if lo > hi {
                return Vec::new();
            }
            ranges.push((lo, hi));
        }
        odometer(&ranges)
            .into_iter()
            .map(|fib| {
                let mut g = vec![0i64; n];
                for (&i, &x) in self.subset.iter().zip(&fib) {
                    g[i] = x;
                }
                for (&i, &x) in self.rest.iter().zip(lam) {
                    g[i] = x;
                }
                g
            })
            .collect()
    }
}

/// All integer vectors in a product of inclusive ranges, lexicographically.
pub(crate) fn odometer(ranges: &[(i64, i64)]) -> Vec<Vec<i64>> {
    if ranges.iter().any(|(a, b)| a > b) {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut cur: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    loop {
        out.push(cur.clone());
        let mut i = ranges.len();
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] < ranges[i].1 {
                cur[i] += 1;
                for j in i + 1..ranges.len() {
                    cur[j] = ranges[j].0;
                }
                break;
            }
        }
    }
}

/// Integer coefficient vectors `λ` with `|Σ λⱼ uⱼ − c| ≤ ρ` (slightly padded),
/// for independent vectors `uⱼ`.
pub(crate) fn ellipsoid_points(u: &[Vec<f64>], c: &[f64], rho: f64) -> Vec<Vec<i64>> {
    let k = u.len();
    if k == 0 {
        return if norm_f64(c) <= rho + 1e-9 { vec![Vec::new()] } else { Vec::new() };
    }
    let gram: Vec<Vec<f64>> = u.iter().map(|a| u.iter().map(|b| dot_f64(a, b)).collect()).collect();
    let ginv = invert_f64(&gram);
    let uc: Vec<f64> = u.iter().map(|a| dot_f64(a, c)).collect();
    let centre: Vec<f64> = (0..k).map(|i| (0..k).map(|j| ginv[i][j] * uc[j]).sum()).collect();
    let pad = 1e-7 * (1.0 + rho);
    let ranges: Vec<(i64, i64)> = (0..k)
        .map(|i| {
            let w = (rho + pad) * ginv[i][i].max(0.0).sqrt();
            ((centre[i] - w).floor() as i64, (centre[i] + w).ceil() as i64)
        })
        .collect();
    odometer(&ranges)
        .into_iter()
        .filter(|lam| {
            let p: Vec<f64> = (0..c.len())
                .map(|d| lam.iter().zip(u).map(|(&l, v)| l as f64 * v[d]).sum::<f64>() - c[d])
                .collect();
            norm_f64(&p) <= rho + pad
        })
        .collect()
}

fn dot_f64(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn invert_f64(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
            .expect("nonempty");
        a.swap(c, p);
        let d = a[c][c];
        for x in a[c].iter_mut() {
            *x /= d;
        }
        for i in 0..n {
            if i != c {
                let f = a[i][c];
                let pivot = a[c].clone();
                for (x, y) in a[i].iter_mut().zip(&pivot) {
                    *x -= f * y;
                }
            }
        }
    }
    a.into_iter().map(|r| r[n..].to_vec()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn odometer_order() {
        let v = odometer(&[(0, 1), (5, 6)]);
        assert_eq!(v, vec![vec![0, 5], vec![0, 6], vec![1, 5], vec![1, 6]]);
        assert!(odometer(&[(1, 0)]).is_empty());
        assert_eq!(odometer(&[]), vec![Vec::<i64>::new()]);
    }

    #[test]
    fn ellipsoid_covers_disc() {
        let u = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let pts = ellipsoid_points(&u, &[0.0, 0.0], 2.0);
        // 13 lattice points with x² + y² ≤ 4
        assert_eq!(pts.len(), 13);
    }

    #[test]
    fn region_spec_validation() {
        let spec = RegionSpec {
            box_lo: Some(vec![0, 0]),
            ..Default::default()
        };
        assert!(matches!(spec.to_region(2), Err(SchemeError::UnboundedRegion(_))));
        assert!(matches!(RegionSpec::default().to_region(2), Err(SchemeError::UnboundedRegion(_))));
        let ball = RegionSpec {
            radius: Some(ScalarText::Text("5/2".into())),
            ..Default::default()
        };
        assert!(matches!(ball.to_region(2), Ok(Region::Ball { .. })));
    }
}
