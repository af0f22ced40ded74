//! Penrose vertex sets as a cut-and-project set from `ℤ⁵`, the tiling of the
//! projected cube into ten parallelotopes, and counting over unions of unit
//! squares.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bijection::{BijectionError, BijectionSetup, DomainCheck, VerificationReport};
use crate::cutproject::{generators_in, zonotope_volume, LiftedPoint, Projector, Region, Scheme, SchemeError, Window};
use crate::form::AffineForm;
use crate::matrix::{determinant, inverse, scale_vec, sub_vec, vec_mat, IntMatrix, Matrix, Vector};
use crate::metric::OrthoFrame;
use crate::scalar::ExactScalar;

pub const PENROSE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PenroseError {
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error(transparent)]
    Bijection(#[from] BijectionError),
    #[error("window decomposition failed: {0}")]
    Decomposition(String),
    #[error("overlapping cubes: {0:?} listed twice")]
    OverlappingCubes(Vec<i64>),
    #[error("cube {cube:?} has dimension {found}, expected {expected}")]
    CubeDimension { cube: Vec<i64>, expected: usize, found: usize },
    #[error("malformed region file: {0}")]
    Malformed(String),
}

fn q(p: i64, s: i64, r: i64) -> ExactScalar {
    ExactScalar::quadratic(p, s, 5, r)
}

/// `Re ζᵏ` and `Im ζᵏ / sin(2π/5)` for `k = 0..4`.
pub fn physical_basis() -> Matrix {
    let (a, b) = (q(-1, 1, 4), q(-1, -1, 4));
    let inv_phi = q(-1, 1, 2);
    let one = ExactScalar::one();
    vec![
        vec![one.clone(), a.clone(), b.clone(), b, a],
        vec![ExactScalar::zero(), one.clone(), inv_phi.clone(), -&inv_phi, -&one],
    ]
}

/// `Re ζ²ᵏ`, `Im ζ²ᵏ / sin(2π/5)` and the diagonal.
pub fn internal_basis() -> Matrix {
    let (a, b) = (q(-1, 1, 4), q(-1, -1, 4));
    let inv_phi = q(-1, 1, 2);
    let one = ExactScalar::one();
    vec![
        vec![one.clone(), b.clone(), a.clone(), a, b],
        vec![ExactScalar::zero(), inv_phi.clone(), -&one, one.clone(), -&inv_phi],
        vec![one.clone(); 5],
    ]
}

/// Ambient translate whose internal projection offsets the window.
pub fn default_offset() -> Vector {
    vec![
        ExactScalar::ratio(1, 7),
        ExactScalar::ratio(2, 11),
        ExactScalar::quadratic(0, 1, 5, 13),
        ExactScalar::ratio(3, 17),
        ExactScalar::ratio(-1, 19),
    ]
}

fn unit(j: usize) -> Vector {
    (0..5).map(|i| ExactScalar::from_int((i == j) as i64)).collect()
}

/// Scheme together with the internal corner `ρ_i(offset)` of its window.
#[derive(Clone, Debug)]
pub struct PenroseScheme {
    pub scheme: Scheme,
    pub corner: Vector,
}

/// `W = ρ_i(offset) + ρ_i([0,1)⁵)`, tiled into ten parallelotopes.
pub fn build_penrose(offset: &[ExactScalar]) -> Result<PenroseScheme, SchemeError> {
    if offset.len() != 5 {
        return Err(SchemeError::DimensionMismatch("offset must have 5 coordinates".into()));
    }
    let physical = physical_basis();
    let internal = internal_basis();
    let rho_i = Projector::new(&internal, &physical, 5)?;
    let gens: Matrix = (0..5).map(|j| rho_i.apply(&unit(j))).collect();
    let corner = rho_i.apply(offset);
    let window = Window::zonotope(&internal, corner.clone(), gens)?;
    Ok(PenroseScheme {
        scheme: Scheme::new(physical, internal, IntMatrix::identity(5), window, true)?,
        corner,
    })
}

pub fn penrose_scheme(offset: &[ExactScalar]) -> Result<Scheme, SchemeError> {
    Ok(build_penrose(offset)?.scheme)
}

/// Orthonormal coordinates on `V_p`.
pub fn physical_frame() -> OrthoFrame {
    OrthoFrame::new(&physical_basis())
}

#[derive(Clone, Debug)]
pub struct PieceData {
    pub index: usize,
    pub subset: Vec<usize>,
    pub reversed: Vec<usize>,
    pub volume: ExactScalar,
    pub setup: BijectionSetup,
    /// `N / covol(φ_p(Λ_c))`.
    pub kappa: f64,
}

#[derive(Clone, Debug)]
pub struct WindowDecomposition {
    pub scheme: Scheme,
    pub pieces: Vec<PieceData>,
    pub window_volume: ExactScalar,
    pub samples: usize,
}

impl WindowDecomposition {
    pub fn kappa(&self) -> f64 {
        self.pieces.iter().map(|p| p.kappa).sum()
    }
}

/// Splits the window into its pieces, builds one bijection setup per piece
/// and checks the tiling exactly: volumes add up, and `samples` random
/// rational points of `W` each fall in exactly one piece.
pub fn decompose_window(
    penrose: &PenroseScheme,
    samples: usize,
    seed: u64,
) -> Result<WindowDecomposition, PenroseError> {
    let scheme = &penrose.scheme;
    let window = scheme.window();
    if window.len() != 10 {
        return Err(PenroseError::Decomposition(format!("{} pieces instead of 10", window.len())));
    }
    let internal = scheme.internal_basis();
    let gens: Matrix = (0..5).map(|j| scheme.rho_i(&unit(j))).collect();
    let window_volume = zonotope_volume(internal, &gens)?;
    let piece_volume = window.volume_in(internal)?;
    if piece_volume != window_volume {
        return Err(PenroseError::Decomposition(format!(
            "piece volumes sum to {piece_volume}, window volume is {window_volume}"
        )));
    }

    // sample points corner + Σ (aⱼ/D) gⱼ; each piece coordinate is an affine
    // form in the integers aⱼ
    const DENOM: i64 = 3600;
    let coords = |v: &Vector| -> Result<Vector, SchemeError> { Ok(generators_in(internal, &vec![v.clone()])?.remove(0)) };
    let gens_c = generators_in(internal, &gens)?;
    let corner = coords(&penrose.corner)?;
    let scale = ExactScalar::ratio(1, DENOM);
    let forms: Vec<Vec<AffineForm>> = window
        .pieces()
        .iter()
        .map(|p| {
            let inv = inverse(&generators_in(internal, &p.generators)?).expect("validated piece");
            let base = vec_mat(&sub_vec(&corner, &coords(&p.origin)?), &inv);
            let g: Matrix = gens_c.iter().map(|r| scale_vec(&scale, &vec_mat(r, &inv))).collect();
            Ok((0..3)
                .map(|k| {
                    let coeffs: Vector = g.iter().map(|r| r[k].clone()).collect();
                    AffineForm::new(&coeffs, &base[k])
                })
                .collect())
        })
        .collect::<Result<_, SchemeError>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<[i64; 5]> = (0..samples)
        .map(|_| std::array::from_fn(|_| rng.gen_range(1..DENOM)))
        .collect();
    let hits = |a: &[i64; 5]| -> usize {
        forms
            .iter()
            .filter(|fs| fs.iter().all(|f| f.placement(a).in_half_open()))
            .count()
    };
    if let Some((a, h)) = points.par_iter().map(|a| (a, hits(a))).find_first(|(_, h)| *h != 1) {
        return Err(PenroseError::Decomposition(format!(
            "point with cube coordinates {a:?}/{DENOM} lies in {h} pieces"
        )));
    }

    let frame = physical_frame();
    let pieces = window
        .pieces()
        .iter()
        .zip(window.info())
        .enumerate()
        .map(|(index, (piece, info))| {
            let sub = scheme.with_window(window.piece(index))?;
            let rest: Vec<usize> = (0..5).filter(|j| !info.subset.contains(j)).collect();
            let rows = |idx: &[usize]| -> IntMatrix {
                let r: Vec<Vec<i64>> = idx.iter().map(|&j| (0..5).map(|i| (i == j) as i64).collect()).collect();
                IntMatrix::from_rows(&r, 5)
            };
            let z = rows(&info.subset);
            let setup = BijectionSetup::new(sub, &z, &z, Some(&rows(&rest)))?;
            let u: Vec<Vec<f64>> = setup.gamma_primes().iter().map(|g| frame.approx_coordinates(g)).collect();
            let covol = (u[0][0] * u[1][1] - u[0][1] * u[1][0]).abs();
            let n = setup.index().to_f64().unwrap_or(f64::NAN);
            Ok(PieceData {
                index,
                subset: info.subset.clone(),
                reversed: info.reversed.clone(),
                volume: determinant(&generators_in(internal, &piece.generators)?).abs(),
                kappa: n / covol,
                setup,
            })
        })
        .collect::<Result<Vec<_>, PenroseError>>()?;
    Ok(WindowDecomposition {
        scheme: scheme.clone(),
        pieces,
        window_volume,
        samples,
    })
}

/// Number of lattice points per unit cube, keyed by the cube's integer
/// corner.
#[derive(Clone, Debug, Default)]
pub struct CellCounts {
    dim: usize,
    map: HashMap<Vec<i64>, u64>,
}

impl CellCounts {
    pub fn new(dim: usize) -> Self {
        CellCounts {
            dim,
            map: HashMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn add(&mut self, cell: Vec<i64>) {
        *self.map.entry(cell).or_insert(0) += 1;
    }

    pub fn get(&self, cell: &[i64]) -> u64 {
        self.map.get(cell).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.map.values().sum()
    }

    /// Exact cells of the physical images of `points`.
    pub fn from_points(points: &[LiftedPoint]) -> Self {
        let frame = physical_frame();
        let cells: Vec<Vec<i64>> = points
            .par_iter()
            .map(|p| frame.cell(&p.physical).iter().map(|c| c.to_i64().expect("cell fits")).collect())
            .collect();
        let mut out = CellCounts::new(frame.dim());
        for c in cells {
            out.add(c);
        }
        out
    }
}

/// Finite union of distinct axis-aligned unit cubes `c + [0,1)ᵈ`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CubeRegion {
    dim: usize,
    cells: BTreeSet<Vec<i64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionFile {
    pub cubes: Vec<Vec<i64>>,
}

impl CubeRegion {
    pub fn new(dim: usize, cubes: Vec<Vec<i64>>) -> Result<Self, PenroseError> {
        let mut cells = BTreeSet::new();
        for c in cubes {
            if c.len() != dim {
                return Err(PenroseError::CubeDimension {
                    found: c.len(),
                    cube: c,
                    expected: dim,
                });
            }
            if cells.contains(&c) {
                return Err(PenroseError::OverlappingCubes(c));
            }
            cells.insert(c);
        }
        Ok(CubeRegion { dim, cells })
    }

    pub fn from_json(dim: usize, text: &str) -> Result<Self, PenroseError> {
        let f: RegionFile = serde_json::from_str(text).map_err(|e| PenroseError::Malformed(e.to_string()))?;
        CubeRegion::new(dim, f.cubes)
    }

    pub fn to_file(&self) -> RegionFile {
        RegionFile {
            cubes: self.cells.iter().cloned().collect(),
        }
    }

    pub fn cells(&self) -> impl Iterator<Item = &Vec<i64>> {
        self.cells.iter()
    }

    /// `|𝒞|_d`.
    pub fn volume(&self) -> usize {
        self.cells.len()
    }

    /// `|∂𝒞|_{d−1}`: facets shared with a cube outside the region.
    pub fn boundary(&self) -> usize {
        let mut exposed = 0;
        for c in &self.cells {
            for axis in 0..self.dim {
                for step in [-1, 1] {
                    let mut n = c.clone();
                    n[axis] += step;
                    if !self.cells.contains(&n) {
                        exposed += 1;
                    }
                }
            }
        }
        exposed
    }

    /// Largest distance from the origin to a point of the region.
    pub fn reach(&self) -> f64 {
        self.cells
            .iter()
            .map(|c| {
                c.iter()
                    .map(|&x| {
                        let m = (x as f64).abs().max((x as f64 + 1.0).abs());
                        m * m
                    })
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }
}

/// Random polyomino of `size` squares grown from `start` by adding a
/// uniformly chosen boundary square at each step.
pub fn random_polyomino(rng: &mut ChaCha8Rng, size: usize, start: [i64; 2]) -> CubeRegion {
    let mut cells: BTreeSet<Vec<i64>> = BTreeSet::new();
    let mut frontier: Vec<[i64; 2]> = vec![start];
    let mut queued: HashSet<[i64; 2]> = HashSet::from([start]);
    while cells.len() < size {
        let i = rng.gen_range(0..frontier.len());
        let c = frontier.swap_remove(i);
        cells.insert(c.to_vec());
        for d in [[1, 0], [-1, 0], [0, 1], [0, -1]] {
            let n = [c[0] + d[0], c[1] + d[1]];
            if queued.insert(n) {
                frontier.push(n);
            }
        }
    }
    CubeRegion { dim: 2, cells }
}

#[derive(Clone, Debug, Serialize)]
pub struct LaczkovichReport {
    pub cubes: usize,
    pub count: u64,
    pub kappa: f64,
    pub residual: f64,
    pub boundary: usize,
    pub ratio: f64,
}

/// `|#(S ∩ 𝒞) − κ|𝒞||` against `|∂𝒞|`.
pub fn laczkovich_residual(counts: &CellCounts, region: &CubeRegion, kappa: f64) -> LaczkovichReport {
    let count: u64 = region.cells.iter().map(|c| counts.get(c)).sum();
    let residual = (count as f64 - kappa * region.volume() as f64).abs();
    let boundary = region.boundary();
    LaczkovichReport {
        cubes: region.volume(),
        count,
        kappa,
        residual,
        boundary,
        ratio: if boundary == 0 { 0.0 } else { residual / boundary as f64 },
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LaczkovichSweep {
    pub samples: Vec<LaczkovichReport>,
    pub max_ratio: f64,
    /// Least-squares slope of `log(1 + residual)` against `log |∂𝒞|`.
    pub slope: f64,
}

/// Polyominoes with sizes spaced geometrically from 1 to `max_size`, grown
/// from random squares near the origin.
pub fn polyomino_family(count: usize, max_size: usize, seed: u64) -> Vec<CubeRegion> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let frac = if count > 1 { i as f64 / (count - 1) as f64 } else { 1.0 };
            let size = (max_size as f64).powf(frac).round().max(1.0) as usize;
            let start = [rng.gen_range(-10..=10), rng.gen_range(-10..=10)];
            random_polyomino(&mut rng, size, start)
        })
        .collect()
}

pub fn laczkovich_sweep(counts: &CellCounts, regions: &[CubeRegion], kappa: f64) -> LaczkovichSweep {
    let samples: Vec<LaczkovichReport> = regions.par_iter().map(|r| laczkovich_residual(counts, r, kappa)).collect();
    let max_ratio = samples.iter().map(|s| s.ratio).fold(0.0, f64::max);
    let xs: Vec<f64> = samples.iter().map(|s| (s.boundary as f64).ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.residual.ln_1p()).collect();
    LaczkovichSweep {
        slope: ols_slope(&xs, &ys),
        samples,
        max_ratio,
    }
}

fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return 0.0;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// `#(S ∩ B(0,R)) / vol B(0,R)`.
pub fn density_estimate(points: &[Vec<f64>], radius: f64) -> f64 {
    let dim = points.first().map_or(2, Vec::len);
    let inside = points
        .iter()
        .filter(|p| p.iter().map(|x| x * x).sum::<f64>() <= radius * radius)
        .count();
    inside as f64 / ball_volume(dim, radius)
}

fn ball_volume(dim: usize, r: f64) -> f64 {
    match dim {
        0 => 1.0,
        1 => 2.0 * r,
        d => ball_volume(d - 2, r) * 2.0 * std::f64::consts::PI * r * r / d as f64,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PieceReport {
    pub index: usize,
    pub subset: Vec<usize>,
    pub reversed: Vec<usize>,
    pub volume: String,
    pub kappa: f64,
    pub density: f64,
    pub n: String,
    pub target_index: String,
    pub domain_check: DomainCheck,
    pub verification: VerificationReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct PenroseReport {
    pub schema_version: u32,
    pub precision: String,
    pub offset: Vec<String>,
    pub pieces: usize,
    pub window_volume: String,
    pub decomposition_samples: usize,
    pub patch_radius: f64,
    pub patch_points: usize,
    pub kappa: f64,
    pub density: f64,
    pub piece_reports: Vec<PieceReport>,
    pub laczkovich: LaczkovichSweep,
    pub extra_regions: Vec<LaczkovichReport>,
    pub passed: bool,
}

#[derive(Clone, Debug)]
pub struct PenroseConfig {
    pub offset: Vector,
    pub radius: f64,
    pub decomposition_samples: usize,
    pub regions: usize,
    pub max_region: usize,
    pub seed: u64,
    pub max_slope: f64,
    /// Extra regions evaluated alongside the random polyominoes.
    pub extra_regions: Vec<CubeRegion>,
}

impl Default for PenroseConfig {
    fn default() -> Self {
        PenroseConfig {
            offset: default_offset(),
            radius: 60.0,
            decomposition_samples: 10_000,
            regions: 100,
            max_region: 10_000,
            seed: 1,
            max_slope: 1.1,
            extra_regions: Vec::new(),
        }
    }
}

/// Per-piece points of a patch, indexed like the window pieces.
pub fn split_by_piece(points: &[LiftedPoint], pieces: usize) -> Vec<Vec<LiftedPoint>> {
    let mut out: BTreeMap<usize, Vec<LiftedPoint>> = (0..pieces).map(|i| (i, Vec::new())).collect();
    for p in points {
        out.entry(p.piece).or_default().push(p.clone());
    }
    out.into_values().collect()
}

/// Decomposition, per-piece verification on a ball patch, and the counting
/// sweep over random polyominoes.
pub fn run_pipeline(config: &PenroseConfig) -> Result<PenroseReport, PenroseError> {
    Ok(run_pipeline_with_patch(config)?.0)
}

/// As [`run_pipeline`], also returning the generated patch.
pub fn run_pipeline_with_patch(config: &PenroseConfig) -> Result<(PenroseReport, Vec<LiftedPoint>), PenroseError> {
    let penrose = build_penrose(&config.offset)?;
    let scheme = &penrose.scheme;
    let dec = decompose_window(&penrose, config.decomposition_samples, config.seed)?;
    let regions = polyomino_family(config.regions, config.max_region, config.seed);
    let reach = regions
        .iter()
        .chain(&config.extra_regions)
        .map(CubeRegion::reach)
        .fold(0.0, f64::max);
    let radius = config.radius.max(reach + 1.0);
    let ball = Region::ball(5, ExactScalar::from_int(radius.ceil() as i64));
    let patch = scheme.generate_patch(&ball)?;
    let frame = physical_frame();
    let coords: Vec<Vec<f64>> = patch.par_iter().map(|p| frame.approx_coordinates(&p.physical)).collect();
    let by_piece = split_by_piece(&patch, dec.pieces.len());
    let piece_reports = dec
        .pieces
        .par_iter()
        .zip(by_piece.par_iter())
        .map(|(piece, pts)| {
            let verification = piece.setup.verify_patch(pts, &ball)?;
            let pc: Vec<Vec<f64>> = pts.iter().map(|p| frame.approx_coordinates(&p.physical)).collect();
            Ok(PieceReport {
                index: piece.index,
                subset: piece.subset.clone(),
                reversed: piece.reversed.clone(),
                volume: piece.volume.to_string(),
                kappa: piece.kappa,
                density: density_estimate(&pc, radius * 0.95),
                n: piece.setup.index().to_string(),
                target_index: piece.setup.target_index()?.to_string(),
                domain_check: piece.setup.domain_check().clone(),
                verification,
            })
        })
        .collect::<Result<Vec<_>, PenroseError>>()?;
    let counts = CellCounts::from_points(&patch);
    let laczkovich = laczkovich_sweep(&counts, &regions, dec.kappa());
    let extra_regions = config
        .extra_regions
        .iter()
        .map(|r| laczkovich_residual(&counts, r, dec.kappa()))
        .collect();
    let passed = piece_reports.iter().all(|p| p.verification.passed() && p.target_index == p.n)
        && laczkovich.slope <= config.max_slope;
    let report = PenroseReport {
        schema_version: PENROSE_SCHEMA_VERSION,
        precision: "exact".into(),
        offset: config.offset.iter().map(ToString::to_string).collect(),
        pieces: dec.pieces.len(),
        window_volume: dec.window_volume.to_string(),
        decomposition_samples: dec.samples,
        patch_radius: radius,
        patch_points: patch.len(),
        kappa: dec.kappa(),
        density: density_estimate(&coords, radius * 0.95),
        piece_reports,
        laczkovich,
        extra_regions,
        passed,
    };
    Ok((report, patch))
}

/// CSV of orthonormal `V_p` coordinates `u_0, u_1` and the piece index.
pub fn patch_plot_csv(points: &[LiftedPoint], precision: &str) -> String {
    let frame = physical_frame();
    let rows: Vec<String> = points
        .par_iter()
        .map(|p| {
            let u = frame.approx_coordinates(&p.physical);
            format!("{:.15e},{:.15e},{},{precision}\n", u[0], u[1], p.piece)
        })
        .collect();
    let mut out = String::from("u_0,u_1,piece,precision\n");
    out.extend(rows);
    out
}
