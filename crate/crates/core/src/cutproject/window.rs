use serde::Serialize;

use super::SchemeError;
use crate::matrix::{add_vec, determinant, inverse, scale_vec, solve_in_span, vec_mat, Matrix, Vector};
use crate::scalar::ExactScalar;

/// `{origin + Σ tⱼ gⱼ : 0 ≤ tⱼ < 1}` with everything in ambient coordinates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Parallelotope {
    pub origin: Vector,
    pub generators: Matrix,
}

impl Parallelotope {
    /// The `2^k` corners of the closure, indexed by bit masks.
    pub fn vertices(&self) -> Vec<Vector> {
        let k = self.generators.len();
        (0..1usize << k)
            .map(|mask| {
                (0..k)
                    .filter(|j| mask >> j & 1 == 1)
                    .fold(self.origin.clone(), |acc, j| add_vec(&acc, &self.generators[j]))
            })
            .collect()
    }

    /// Generator coordinates of `w − origin`, if `w` lies in the affine span.
    pub fn coordinates(&self, w: &[ExactScalar]) -> Option<Vector> {
        let d: Vector = w.iter().zip(&self.origin).map(|(a, b)| a - b).collect();
        solve_in_span(&self.generators, &d)
    }

    pub fn contains(&self, w: &[ExactScalar]) -> bool {
        let one = ExactScalar::one();
        self.coordinates(w)
            .is_some_and(|t| t.iter().all(|x| x.signum() >= 0 && x < &one))
    }

    pub fn translated(&self, v: &[ExactScalar]) -> Self {
        Parallelotope {
            origin: add_vec(&self.origin, v),
            generators: self.generators.clone(),
        }
    }
}

/// Provenance of a window piece produced by a zonotope decomposition.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PieceInfo {
    /// Indices of the zonotope generators spanning the piece.
    pub subset: Vec<usize>,
    /// Generators used with reversed sign to fix the half-open side.
    pub reversed: Vec<usize>,
}

/// Finite disjoint union of half-open parallelotopes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Window {
    pieces: Vec<Parallelotope>,
    info: Vec<PieceInfo>,
}

impl Window {
    pub fn single(p: Parallelotope) -> Self {
        let k = p.generators.len();
        Window {
            pieces: vec![p],
            info: vec![PieceInfo {
                subset: (0..k).collect(),
                reversed: Vec::new(),
            }],
        }
    }

    pub fn from_pieces(pieces: Vec<Parallelotope>) -> Self {
        let info = pieces
            .iter()
            .map(|p| PieceInfo {
                subset: (0..p.generators.len()).collect(),
                reversed: Vec::new(),
            })
            .collect();
        Window { pieces, info }
    }

    /// Half-open tiling of the zonotope `origin + Σ [0,1) gⱼ` by one
    /// parallelotope per independent `k`-subset of generators, where `k` is
    /// the dimension of the span `basis` the generators live in.
    ///
    /// Tiles come from the lower faces of a generically lifted zonotope; the
    /// open and closed sides of each tile are assigned by pushing points
    /// slightly along a generic direction, which makes the tiles disjoint.
    pub fn zonotope(basis: &Matrix, origin: Vector, generators: Matrix) -> Result<Self, SchemeError> {
        let k = basis.len();
        let m = generators.len();
        if m < k {
            return Err(SchemeError::DegenerateWindow(format!(
                "{m} generators cannot span a {k}-dimensional window"
            )));
        }
        if m == k {
            if determinant(&generators_in(basis, &generators)?).is_zero() {
                return Err(SchemeError::DegenerateWindow("generators are dependent".into()));
            }
            return Ok(Window::single(Parallelotope { origin, generators }));
        }
        let coords = generators_in(basis, &generators)?;
        let subsets: Vec<Vec<usize>> = k_subsets(m, k)
            .into_iter()
            .filter(|s| !determinant(&select(&coords, s)).is_zero())
            .collect();
        if subsets.is_empty() {
            return Err(SchemeError::DegenerateWindow("generators do not span".into()));
        }
        let lifts = (0..64)
            .find_map(|attempt| lower_faces(&coords, &subsets, attempt))
            .ok_or_else(|| SchemeError::DegenerateWindow("no generic lifting found".into()))?;
        let directions = (0..64)
            .find_map(|attempt| side_choices(&coords, &subsets, attempt))
            .ok_or_else(|| SchemeError::DegenerateWindow("no generic direction found".into()))?;

        let mut pieces = Vec::new();
        let mut info = Vec::new();
        for ((s, eps), negative) in subsets.iter().zip(lifts).zip(directions) {
            let mut o = origin.clone();
            for j in (0..m).filter(|j| eps[*j]) {
                o = add_vec(&o, &generators[j]);
            }
            let mut gens = Vec::new();
            let mut reversed = Vec::new();
            for (l, &j) in s.iter().enumerate() {
                if negative[l] {
                    o = add_vec(&o, &generators[j]);
                    gens.push(scale_vec(&ExactScalar::from_int(-1), &generators[j]));
                    reversed.push(j);
                } else {
                    gens.push(generators[j].clone());
                }
            }
            pieces.push(Parallelotope {
                origin: o,
                generators: gens,
            });
            info.push(PieceInfo {
                subset: s.clone(),
                reversed,
            });
        }
        Ok(Window { pieces, info })
    }

    pub fn pieces(&self) -> &[Parallelotope] {
        &self.pieces
    }

    pub fn info(&self) -> &[PieceInfo] {
        &self.info
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn piece(&self, i: usize) -> Window {
        Window {
            pieces: vec![self.pieces[i].clone()],
            info: vec![self.info[i].clone()],
        }
    }

    pub fn translated(&self, v: &[ExactScalar]) -> Self {
        Window {
            pieces: self.pieces.iter().map(|p| p.translated(v)).collect(),
            info: self.info.clone(),
        }
    }

    pub(crate) fn scalars(&self) -> impl Iterator<Item = &ExactScalar> {
        self.pieces
            .iter()
            .flat_map(|p| p.origin.iter().chain(p.generators.iter().flatten()))
    }

    /// Pieces containing `w` (exact, half-open).
    pub fn locate(&self, w: &[ExactScalar]) -> Vec<usize> {
        (0..self.pieces.len()).filter(|&i| self.pieces[i].contains(w)).collect()
    }

    /// Volume measured in the coordinates of `basis`.
    pub fn volume_in(&self, basis: &Matrix) -> Result<ExactScalar, SchemeError> {
        let mut total = ExactScalar::zero();
        for p in &self.pieces {
            total += &determinant(&generators_in(basis, &p.generators)?).abs();
        }
        Ok(total)
    }
}

/// Volume of `Σ [0,1) gⱼ` measured in the coordinates of `basis`.
pub(crate) fn zonotope_volume(basis: &Matrix, generators: &Matrix) -> Result<ExactScalar, SchemeError> {
    let coords = generators_in(basis, generators)?;
    let mut total = ExactScalar::zero();
    for s in k_subsets(generators.len(), basis.len()) {
        total += &determinant(&select(&coords, &s)).abs();
    }
    Ok(total)
}

pub(crate) fn generators_in(basis: &Matrix, generators: &Matrix) -> Result<Matrix, SchemeError> {
    generators
        .iter()
        .map(|g| solve_in_span(basis, g).ok_or(SchemeError::NotInInternal))
        .collect()
}

fn select(rows: &Matrix, s: &[usize]) -> Matrix {
    s.iter().map(|&j| rows[j].clone()).collect()
}

pub(crate) fn k_subsets(m: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, m: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for j in start..m {
            cur.push(j);
            rec(j + 1, m, k, cur, out);
            cur.pop();
        }
    }
    rec(0, m, k, &mut cur, &mut out);
    out
}

/// For each subset, which of the remaining generators are added to the tile
/// origin; `None` if the heights of this attempt are not generic.
fn lower_faces(coords: &Matrix, subsets: &[Vec<usize>], attempt: i64) -> Option<Vec<Vec<bool>>> {
    let m = coords.len();
    let k = coords[0].len();
    let lifted: Matrix = coords
        .iter()
        .enumerate()
        .map(|(j, g)| {
            let j = j as i64 + 1;
            let h = ExactScalar::ratio(j * j * (attempt + 2) + j * j * j, attempt + 1);
            let mut v = g.clone();
            v.push(h);
            v
        })
        .collect();
    let mut result = Vec::new();
    for s in subsets {
        let rows = select(&lifted, s);
        let mut normal: Vector = (0..=k)
            .map(|c| {
                let minor: Matrix = rows
                    .iter()
                    .map(|r| r.iter().enumerate().filter(|(i, _)| *i != c).map(|(_, x)| x.clone()).collect())
                    .collect();
                let d = determinant(&minor);
                if c % 2 == 0 {
                    d
                } else {
                    -d
                }
            })
            .collect();
        if normal[k].signum() > 0 {
            normal = normal.iter().map(|x| -x).collect();
        }
        let mut eps = vec![false; m];
        for j in (0..m).filter(|j| !s.contains(j)) {
            let side = crate::matrix::dot(&normal, &lifted[j]).signum();
            if side == 0 {
                return None;
            }
            eps[j] = side > 0;
        }
        result.push(eps);
    }
    Some(result)
}

/// For each subset, which generators must be reversed so that the tile is
/// closed on the sides a generic direction enters through.
fn side_choices(coords: &Matrix, subsets: &[Vec<usize>], attempt: i64) -> Option<Vec<Vec<bool>>> {
    let k = coords[0].len();
    let a = attempt + 2;
    let omega: Vector = (0..k as u32)
        .map(|i| ExactScalar::ratio(a.pow(i) + i as i64, (i as i64 + 1) * 3 + attempt))
        .collect();
    let mut result = Vec::new();
    for s in subsets {
        let inv = inverse(&select(coords, s))?;
        let t = vec_mat(&omega, &inv);
        if t.iter().any(ExactScalar::is_zero) {
            return None;
        }
        result.push(t.iter().map(|x| x.signum() < 0).collect());
    }
    Some(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(x: &str) -> ExactScalar {
        x.parse().unwrap()
    }

    fn v(xs: &[&str]) -> Vector {
        xs.iter().map(|x| s(x)).collect()
    }

    #[test]
    fn subsets_are_lexicographic() {
        assert_eq!(k_subsets(4, 2).len(), 6);
        assert_eq!(k_subsets(5, 3).len(), 10);
        assert_eq!(k_subsets(3, 2), vec![vec![0, 1], vec![0, 2], vec![1, 2]]);
    }

    #[test]
    fn planar_zonotope_tiles_exactly() {
        let basis = vec![v(&["1", "0"]), v(&["0", "1"])];
        let gens = vec![v(&["1", "0"]), v(&["0", "1"]), v(&["1", "1"])];
        let w = Window::zonotope(&basis, v(&["0", "0"]), gens.clone()).unwrap();
        assert_eq!(w.len(), 3);
        assert_eq!(w.volume_in(&basis).unwrap(), zonotope_volume(&basis, &gens).unwrap());
        // rational grid points of the open zonotope lie in exactly one tile
        for i in 1..40 {
            for j in 1..40 {
                let t = [ExactScalar::ratio(i, 41), ExactScalar::ratio(j, 43), ExactScalar::ratio(i * j % 37 + 1, 39)];
                let p = (0..3).fold(v(&["0", "0"]), |acc, l| add_vec(&acc, &scale_vec(&t[l], &gens[l])));
                assert_eq!(w.locate(&p).len(), 1, "point {p:?}");
            }
        }
    }

    #[test]
    fn vertices_of_square() {
        let p = Parallelotope {
            origin: v(&["0", "0"]),
            generators: vec![v(&["1", "0"]), v(&["0", "1"])],
        };
        assert_eq!(p.vertices().len(), 4);
        assert!(p.contains(&v(&["0", "0"])));
        assert!(!p.contains(&v(&["1", "0"])));
        assert!(p.contains(&v(&["1/2", "99/100"])));
    }
}
