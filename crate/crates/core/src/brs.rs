//! Bounded remainder parallelotopes for irrational rotations of the torus.
//!
//! For `α ∈ ℝˢ` and `vⱼ = n⁽ʲ⁾ − n⁽ʲ⁾ₛ₊₁α`, the parallelotope `P` spanned by the
//! `vⱼ` is realised as the window `P − x` of a cut-and-project scheme in
//! `ℝˢ⁺¹` with `V_p = span((α,1))`, and the bijection onto a lattice bounds the
//! discrepancy of the return times.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bijection::{BijectionError, BijectionSetup};
use crate::cutproject::{Parallelotope, ScalarText, Scheme, SchemeError, Window};
use crate::form::{AffineForm, Placement};
use crate::hp::{Ambiguous, HpFloat};
use crate::matrix::{determinant, dot, inverse, rank, vec_mat, IntMatrix, Matrix, Vector};
use crate::metric::RadicalSum;
use crate::scalar::{common_field, ExactScalar};

pub const BRS_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BrsError {
    #[error("dependent vectors: v_1..v_s do not span ℝ^s")]
    DependentVectors,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("coordinates mix incompatible quadratic fields")]
    MixedFields,
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error(transparent)]
    Bijection(#[from] BijectionError),
    #[error("precision exhausted at n = {n}: {source}")]
    PrecisionExhausted { n: i64, source: Ambiguous },
    #[error("malformed instance: {0}")]
    Malformed(String),
    #[error("P is not spanned by vectors of αℤ + ℤˢ with known lifts")]
    NoLift,
}

/// `n⁽ʲ⁾ ∈ ℤˢ` and `n⁽ʲ⁾ₛ₊₁ ∈ ℤ`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lift {
    pub n: Vec<i64>,
    pub last: i64,
}

#[derive(Clone, Debug)]
pub struct BrsInstance {
    alpha: Vector,
    lifts: Option<Vec<Lift>>,
    x: Vector,
    v: Matrix,
    volume: ExactScalar,
    radicand: u64,
}

/// Sum convention for the discrepancy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    /// `n = 0..M−1`.
    Rotation,
    /// `n = 1..M`.
    Suspension,
}

#[derive(Clone, Debug, Serialize)]
pub struct Independence {
    /// Rank over ℚ of `{1, α₁, …, αₛ}`.
    pub rank: usize,
    pub independent: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Kesten {
    Brs(i64),
    NotFound,
}

impl BrsInstance {
    pub fn new(alpha: Vector, lifts: Vec<Lift>, x: Vector) -> Result<Self, BrsError> {
        let s = alpha.len();
        if s == 0 || lifts.len() != s || x.len() != s || lifts.iter().any(|l| l.n.len() != s) {
            return Err(BrsError::DimensionMismatch(format!("expected {s} lifts of length {s} and |x| = {s}")));
        }
        let v: Matrix = lifts
            .iter()
            .map(|l| {
                let last = ExactScalar::from_int(l.last);
                l.n.iter()
                    .zip(&alpha)
                    .map(|(&n, a)| &ExactScalar::from_int(n) - &(&last * a))
                    .collect()
            })
            .collect();
        BrsInstance::build(alpha, Some(lifts), v, x)
    }

    /// Parallelotope spanned by arbitrary rows `v`; only hit counting and
    /// discrepancy are available.
    pub fn from_vectors(alpha: Vector, v: Matrix, x: Vector) -> Result<Self, BrsError> {
        let s = alpha.len();
        if s == 0 || v.len() != s || x.len() != s || v.iter().any(|r| r.len() != s) {
            return Err(BrsError::DimensionMismatch(format!("expected {s} vectors of length {s} and |x| = {s}")));
        }
        BrsInstance::build(alpha, None, v, x)
    }

    fn build(alpha: Vector, lifts: Option<Vec<Lift>>, v: Matrix, x: Vector) -> Result<Self, BrsError> {
        let radicand = common_field(alpha.iter().chain(&x).chain(v.iter().flatten())).ok_or(BrsError::MixedFields)?;
        if rank(&v) < alpha.len() {
            return Err(BrsError::DependentVectors);
        }
        let volume = determinant(&v).abs();
        Ok(BrsInstance {
            alpha,
            lifts,
            x,
            v,
            volume,
            radicand,
        })
    }

    /// `α = (√5−1)/2`, `P = [0, α)`.
    pub fn golden() -> Self {
        let alpha = ExactScalar::quadratic(-1, 1, 5, 2);
        BrsInstance::interval(alpha, 1, 0).expect("valid instance")
    }

    /// `α = (√2−1, 3−2√2)`, `vⱼ = eⱼ − α`.
    pub fn sqrt2() -> Self {
        let alpha = vec![ExactScalar::quadratic(-1, 1, 2, 1), ExactScalar::quadratic(3, -2, 2, 1)];
        let lifts = vec![Lift { n: vec![1, 0], last: 1 }, Lift { n: vec![0, 1], last: 1 }];
        BrsInstance::new(alpha, lifts, vec![ExactScalar::zero(), ExactScalar::zero()]).expect("valid instance")
    }

    /// One-dimensional interval of signed length `kα + m`.
    pub fn interval(alpha: ExactScalar, k: i64, m: i64) -> Result<Self, BrsError> {
        BrsInstance::new(vec![alpha], vec![Lift { n: vec![m], last: -k }], vec![ExactScalar::zero()])
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &Vector {
        &self.alpha
    }

    pub fn lifts(&self) -> Option<&[Lift]> {
        self.lifts.as_deref()
    }

    pub fn x(&self) -> &Vector {
        &self.x
    }

    /// Rows `v₁, …, vₛ`.
    pub fn vectors(&self) -> &Matrix {
        &self.v
    }

    /// `|P| = |det(v₁, …, vₛ)|`.
    pub fn volume(&self) -> &ExactScalar {
        &self.volume
    }

    /// Expected gap `γ = |P|⁻¹`.
    pub fn gap(&self) -> ExactScalar {
        self.volume.recip()
    }

    pub fn radicand(&self) -> u64 {
        self.radicand
    }

    pub fn with_x(&self, x: Vector) -> Result<Self, BrsError> {
        if x.len() != self.dim() {
            return Err(BrsError::DimensionMismatch("translate".into()));
        }
        BrsInstance::build(self.alpha.clone(), self.lifts.clone(), self.v.clone(), x)
    }

    /// `λⱼ = (n⁽ʲ⁾, n⁽ʲ⁾ₛ₊₁)`.
    pub fn lambdas(&self) -> Result<IntMatrix, BrsError> {
        let rows: Vec<Vec<i64>> = self
            .lifts
            .as_ref()
            .ok_or(BrsError::NoLift)?
            .iter()
            .map(|l| l.n.iter().copied().chain(std::iter::once(l.last)).collect())
            .collect();
        Ok(IntMatrix::from_rows(&rows, self.dim() + 1))
    }

    /// Rank of `{1, α₁, …, αₛ}` over ℚ, from rational and surd parts.
    pub fn independence(&self) -> Independence {
        let rows: Matrix = std::iter::once(ExactScalar::one())
            .chain(self.alpha.iter().cloned())
            .map(|a| vec![ExactScalar::from_rational(a.rational_part().clone()), ExactScalar::from_rational(a.surd_part().clone())])
            .collect();
        let r = rank(&rows);
        Independence {
            rank: r,
            independent: r == self.dim() + 1,
        }
    }

    /// `X = ℝˢ⁺¹`, `Γ = ℤˢ⁺¹`, `V_p = span((α,1))`, `V_i = span(e₁..eₛ)`,
    /// `W = P − x`.
    pub fn build_scheme(&self) -> Result<Scheme, BrsError> {
        self.lambdas()?;
        let s = self.dim();
        let lift = |v: &[ExactScalar]| -> Vector { v.iter().cloned().chain(std::iter::once(ExactScalar::zero())).collect() };
        let physical = vec![self.alpha.iter().cloned().chain(std::iter::once(ExactScalar::one())).collect()];
        let internal: Matrix = (0..s)
            .map(|i| (0..=s).map(|j| ExactScalar::from_int((i == j) as i64)).collect())
            .collect();
        let minus_x: Vector = self.x.iter().map(|a| -a).collect();
        let window = Window::single(Parallelotope {
            origin: lift(&minus_x),
            generators: self.v.iter().map(|r| lift(r)).collect(),
        });
        Ok(Scheme::new(physical, internal, IntMatrix::identity(s + 1), window, false)?)
    }

    /// Setup with `Z = span(λⱼ)` and `Λ′ = ℤλ₁ + … + ℤλₛ`.
    pub fn build_setup(&self) -> Result<BijectionSetup, BrsError> {
        let l = self.lambdas()?;
        Ok(BijectionSetup::new(self.build_scheme()?, &l, &l, None)?)
    }

    /// Displacement constant `C` and the discrepancy bounds derived from it.
    pub fn bound(&self) -> Result<BrsBound, BrsError> {
        let setup = self.build_setup()?;
        let c = setup.displacement_bound().total;
        let physical: Vector = self.alpha.iter().cloned().chain(std::iter::once(ExactScalar::one())).collect();
        let len = dot(&physical, &physical).to_f64().sqrt();
        let vol = self.volume.to_f64();
        Ok(BrsBound {
            c_value: c.to_f64(),
            count_bound: vol * c.to_f64() + 1.0,
            transfer_bound: 2.0 * vol * c.to_f64() / len + 1.0,
            index: setup.index().to_string(),
            c,
        })
    }

    pub fn counter(&self) -> HitCounter {
        HitCounter::new(self)
    }

    /// `#{m ∈ ℤˢ : nα + m ∈ P − x}`.
    pub fn hit_count(&self, n: i64) -> u32 {
        self.counter().count(n)
    }

    pub fn discrepancy(&self, horizon: u64, convention: Convention) -> Discrepancy {
        Discrepancy::from_counter(&self.counter(), self.volume.clone(), horizon, convention)
    }

    pub fn return_times(&self, lo: i64, hi: i64) -> ReturnTimes {
        let counter = self.counter();
        let entries = (lo..=hi)
            .into_par_iter()
            .map(|n| (n, counter.count(n)))
            .filter(|&(_, c)| c > 0)
            .collect();
        ReturnTimes { entries }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BrsBound {
    /// Displacement bound of the bijection in `ℝˢ⁺¹`.
    pub c: RadicalSum,
    pub c_value: f64,
    /// `|P|·C + 1`.
    pub count_bound: f64,
    /// `2|P|·C/|(α,1)| + 1`, the bound obtained by transferring `C` to the
    /// time axis.
    pub transfer_bound: f64,
    pub index: String,
}

impl BrsBound {
    /// Exact test of `|d| ≤ |P|·C + 1`.
    pub fn admits(&self, d: &ExactScalar, volume: &ExactScalar) -> bool {
        let y = &(&d.abs() - &ExactScalar::one()) / volume;
        self.c.bounds(&y)
    }
}

/// Precomputed hit test for one instance.
#[derive(Clone, Debug)]
pub struct HitCounter {
    s: usize,
    forms: Vec<AffineForm>,
    a: Vec<f64>,
    w: Vec<Vec<f64>>,
    c: Vec<f64>,
    alpha: Vec<f64>,
    x: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

const FAST_EPS: f64 = 1e-7;

impl HitCounter {
    fn new(inst: &BrsInstance) -> Self {
        let s = inst.dim();
        let vinv = inverse(&inst.v).expect("independent vectors");
        let a = vec_mat(&inst.alpha, &vinv);
        let c = vec_mat(&inst.x, &vinv);
        let forms = (0..s)
            .map(|j| {
                let coeffs: Vec<ExactScalar> =
                    std::iter::once(a[j].clone()).chain(vinv.iter().map(|r| r[j].clone())).collect();
                AffineForm::new(&coeffs, &c[j])
            })
            .collect();
        let f = |v: &[ExactScalar]| v.iter().map(ExactScalar::to_f64).collect::<Vec<f64>>();
        let vf: Vec<Vec<f64>> = inst.v.iter().map(|r| f(r)).collect();
        HitCounter {
            s,
            forms,
            a: f(&a),
            w: vinv.iter().map(|r| f(r)).collect(),
            c: f(&c),
            alpha: f(&inst.alpha),
            x: f(&inst.x),
            lo: (0..s).map(|l| vf.iter().map(|r| r[l].min(0.0)).sum()).collect(),
            hi: (0..s).map(|l| vf.iter().map(|r| r[l].max(0.0)).sum()).collect(),
        }
    }

    fn candidates(&self, n: i64) -> Vec<(i64, i64)> {
        (0..self.s)
            .map(|l| {
                let shift = n as f64 * self.alpha[l] + self.x[l];
                (
                    (self.lo[l] - shift - FAST_EPS).ceil() as i64,
                    (self.hi[l] - shift + FAST_EPS).floor() as i64,
                )
            })
            .collect()
    }

    pub fn count(&self, n: i64) -> u32 {
        let mut hits = 0;
        for m in crate::cutproject::odometer(&self.candidates(n)) {
            let mut decided = true;
            let mut inside = true;
            for j in 0..self.s {
                let t = n as f64 * self.a[j] + m.iter().zip(&self.w).map(|(&ml, r)| ml as f64 * r[j]).sum::<f64>() + self.c[j];
                if t < -FAST_EPS || t > 1.0 + FAST_EPS {
                    inside = false;
                    break;
                }
                if t < FAST_EPS || t > 1.0 - FAST_EPS {
                    decided = false;
                }
            }
            if !inside {
                continue;
            }
            if !decided {
                let vars: Vec<i64> = std::iter::once(n).chain(m.iter().copied()).collect();
                inside = self.forms.iter().all(|f| f.placement(&vars) == Placement::Inside || f.placement(&vars) == Placement::AtZero);
            }
            if inside {
                hits += 1;
            }
        }
        hits
    }
}

/// Hit counts for `n = 0..=horizon` and the resulting discrepancy.
#[derive(Clone, Debug)]
pub struct Discrepancy {
    hits: Vec<u32>,
    prefix: Vec<i64>,
    volume: ExactScalar,
    volume_f64: f64,
    convention: Convention,
}

#[derive(Clone, Debug, Serialize)]
pub struct DiscrepancySummary {
    pub horizon: u64,
    pub convention: Convention,
    pub max_abs: f64,
    pub argmax: u64,
    pub value_at_argmax: String,
}

impl Discrepancy {
    fn from_counter(counter: &HitCounter, volume: ExactScalar, horizon: u64, convention: Convention) -> Self {
        let hits: Vec<u32> = (0..=horizon as i64).into_par_iter().map(|n| counter.count(n)).collect();
        Discrepancy::from_hits(hits, volume, convention)
    }

    pub fn from_hits(hits: Vec<u32>, volume: ExactScalar, convention: Convention) -> Self {
        let mut prefix = Vec::with_capacity(hits.len() + 1);
        prefix.push(0i64);
        for &h in &hits {
            prefix.push(prefix.last().unwrap() + h as i64);
        }
        Discrepancy {
            volume_f64: volume.to_f64(),
            hits,
            prefix,
            volume,
            convention,
        }
    }

    pub fn horizon(&self) -> u64 {
        self.hits.len() as u64 - 1
    }

    pub fn hits(&self) -> &[u32] {
        &self.hits
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    /// Hits counted by `D(M)`.
    pub fn hit_sum(&self, m: u64) -> i64 {
        let m = m as usize;
        match self.convention {
            Convention::Rotation => self.prefix[m],
            Convention::Suspension => self.prefix[m + 1] - self.prefix[1],
        }
    }

    pub fn value(&self, m: u64) -> ExactScalar {
        &ExactScalar::from_int(self.hit_sum(m)) - &(&ExactScalar::from_int(m as i64) * &self.volume)
    }

    pub fn value_f64(&self, m: u64) -> f64 {
        self.hit_sum(m) as f64 - m as f64 * self.volume_f64
    }

    /// `M ↦ D(M)` for `M = 1..=horizon` (the last one only for the rotation
    /// convention when the horizon allows).
    pub fn max_m(&self) -> u64 {
        match self.convention {
            Convention::Rotation => self.horizon(),
            Convention::Suspension => self.horizon(),
        }
    }

    pub fn summary(&self) -> DiscrepancySummary {
        let (argmax, max_abs) = (1..=self.max_m())
            .map(|m| (m, self.value_f64(m).abs()))
            .fold((0, 0.0), |acc, p| if p.1 > acc.1 { p } else { acc });
        DiscrepancySummary {
            horizon: self.horizon(),
            convention: self.convention,
            max_abs,
            argmax,
            value_at_argmax: self.value(argmax).to_string(),
        }
    }

    /// Every `M` with `|D(M)| > |P|·C + 1`, decided exactly near the bound.
    pub fn violations(&self, bound: &BrsBound) -> Vec<u64> {
        (1..=self.max_m())
            .into_par_iter()
            .filter(|&m| {
                let d = self.value_f64(m).abs();
                if d < bound.count_bound - 1e-6 {
                    return false;
                }
                !bound.admits(&self.value(m), &self.volume)
            })
            .collect()
    }

    /// CSV with columns `M`, `D`, `precision`.
    pub fn curve_csv(&self, precision: &str) -> String {
        let mut out = String::from("M,D,precision\n");
        for m in 1..=self.max_m() {
            let _ = writeln!(out, "{m},{:.12e},{precision}", self.value_f64(m));
        }
        out
    }
}

/// Return times with multiplicities, sorted.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ReturnTimes {
    pub entries: Vec<(i64, u32)>,
}

impl ReturnTimes {
    pub fn times(&self) -> Vec<i64> {
        self.entries.iter().map(|e| e.0).collect()
    }

    pub fn total(&self) -> u64 {
        self.entries.iter().map(|e| e.1 as u64).sum()
    }

    /// Index of `n₀`, the last return time `≤ 0`.
    pub fn origin_index(&self) -> Option<usize> {
        self.entries.iter().rposition(|e| e.0 <= 0)
    }

    pub fn gaps(&self) -> Vec<i64> {
        self.entries.windows(2).map(|w| w[1].0 - w[0].0).collect()
    }

    pub fn distinct_gaps(&self) -> Vec<i64> {
        let mut g = self.gaps();
        g.sort_unstable();
        g.dedup();
        g
    }
}

/// `BRS(k)` when `ℓ ≡ kα (mod 1)` for some `|k| ≤ depth`, smallest `|k|`
/// first, positive before negative.
pub fn kesten_predict(alpha: &ExactScalar, ell: &ExactScalar, depth: u32) -> Kesten {
    for k in 0..=depth as i64 {
        for k in [k, -k] {
            if (ell - &(&ExactScalar::from_int(k) * alpha)).is_integer() {
                return Kesten::Brs(k);
            }
            if k == 0 {
                break;
            }
        }
    }
    Kesten::NotFound
}

/// Deterministic offsets in `[0,1)ˢ`, each shifted by an irrational amount
/// from the instance field so that no lattice point lands on a facet.
pub fn offset_grid(s: usize, radicand: u64, count: usize) -> Vec<Vector> {
    let surd = if radicand > 1 {
        let r = ExactScalar::sqrt_of(radicand);
        &r - &ExactScalar::from_bigint(r.floor())
    } else {
        ExactScalar::ratio(1, 7919)
    };
    (0..count)
        .map(|k| {
            (0..s)
                .map(|l| {
                    let base = ExactScalar::ratio(((k * (2 * l + 1) * 37) % count) as i64, count as i64);
                    let tweak = &surd * &ExactScalar::ratio((k + l + 1) as i64, 1000 * (l as i64 + 1));
                    (&base + &tweak).fract()
                })
                .collect()
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct OffsetResult {
    pub x: Vec<String>,
    pub max_abs: f64,
    pub argmax: u64,
    pub count_bound: f64,
    pub transfer_bound: f64,
    pub violations: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub schema_version: u32,
    pub precision: String,
    pub horizon: u64,
    pub volume: f64,
    pub convention: Convention,
    pub independence: Independence,
    pub offsets: Vec<OffsetResult>,
    pub max_abs: f64,
    pub worst_ratio: f64,
    pub within_bound: bool,
    pub within_transfer_bound: bool,
}

/// Runs the discrepancy over a set of translates, comparing each with its
/// own bound.
pub fn sweep(inst: &BrsInstance, horizon: u64, offsets: &[Vector], convention: Convention) -> Result<SweepReport, BrsError> {
    let results: Vec<OffsetResult> = offsets
        .iter()
        .map(|x| {
            let shifted = inst.with_x(x.clone())?;
            let bound = shifted.bound()?;
            let d = shifted.discrepancy(horizon, convention);
            let summary = d.summary();
            Ok(OffsetResult {
                x: x.iter().map(ToString::to_string).collect(),
                max_abs: summary.max_abs,
                argmax: summary.argmax,
                count_bound: bound.count_bound,
                transfer_bound: bound.transfer_bound,
                violations: d.violations(&bound).len(),
            })
        })
        .collect::<Result<_, BrsError>>()?;
    let max_abs = results.iter().map(|r| r.max_abs).fold(0.0, f64::max);
    let worst_ratio = results.iter().map(|r| r.max_abs / r.count_bound).fold(0.0, f64::max);
    Ok(SweepReport {
        schema_version: BRS_SCHEMA_VERSION,
        precision: "exact".into(),
        horizon,
        volume: inst.volume().to_f64(),
        convention,
        independence: inst.independence(),
        within_bound: results.iter().all(|r| r.violations == 0),
        within_transfer_bound: results.iter().all(|r| r.max_abs <= r.transfer_bound),
        offsets: results,
        max_abs,
        worst_ratio,
    })
}

/// Hit counting with `α` and `x` held as fixed-point numbers.
#[derive(Clone, Debug)]
pub struct FloatInstance {
    bits: u32,
    alpha: Vec<HpFloat>,
    x: Vec<HpFloat>,
    a: Vec<HpFloat>,
    w: Vec<Vec<HpFloat>>,
    c: Vec<HpFloat>,
    volume: HpFloat,
    counter: HitCounter,
}

fn hp_inverse(m: &[Vec<HpFloat>]) -> Option<(Vec<Vec<HpFloat>>, HpFloat)> {
    let n = m.len();
    let bits = m[0][0].bits();
    let mut a: Vec<Vec<HpFloat>> = m
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| HpFloat::from_int((i == j) as i64, bits)));
            row
        })
        .collect();
    let mut det = HpFloat::from_int(1, bits);
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].to_f64().abs().total_cmp(&a[j][col].to_f64().abs()))?;
        if a[piv][col].is_zero() {
            return None;
        }
        if piv != col {
            a.swap(piv, col);
            det = -det;
        }
        let p = a[col][col].clone();
        det = det * p.clone();
        for k in 0..2 * n {
            a[col][k] = a[col][k].clone() / p.clone();
        }
        for i in 0..n {
            if i != col {
                let f = a[i][col].clone();
                for k in 0..2 * n {
                    a[i][k] = a[i][k].clone() - f.clone() * a[col][k].clone();
                }
            }
        }
    }
    Some((a.into_iter().map(|r| r[n..].to_vec()).collect(), det.abs()))
}

impl FloatInstance {
    pub fn new(alpha: Vec<HpFloat>, lifts: &[Lift], x: Vec<HpFloat>, bits: u32) -> Result<Self, BrsError> {
        let s = alpha.len();
        if s == 0 || lifts.len() != s || x.len() != s || lifts.iter().any(|l| l.n.len() != s) {
            return Err(BrsError::DimensionMismatch(format!("expected {s} lifts of length {s} and |x| = {s}")));
        }
        let alpha: Vec<HpFloat> = alpha.iter().map(|a| a.with_bits(bits)).collect();
        let v: Vec<Vec<HpFloat>> = lifts
            .iter()
            .map(|l| {
                l.n.iter()
                    .zip(&alpha)
                    .map(|(&n, a)| HpFloat::from_int(n, bits) - HpFloat::from_int(l.last, bits) * a.clone())
                    .collect()
            })
            .collect();
        FloatInstance::from_vectors(alpha, v, x, bits)
    }

    fn from_vectors(alpha: Vec<HpFloat>, v: Vec<Vec<HpFloat>>, x: Vec<HpFloat>, bits: u32) -> Result<Self, BrsError> {
        let s = alpha.len();
        let x: Vec<HpFloat> = x.iter().map(|a| a.with_bits(bits)).collect();
        let (vinv, volume) = hp_inverse(&v).ok_or(BrsError::DependentVectors)?;
        if volume.sign().is_err() {
            return Err(BrsError::DependentVectors);
        }
        let mul = |row: &[HpFloat], m: &[Vec<HpFloat>]| -> Vec<HpFloat> {
            (0..s)
                .map(|j| {
                    row.iter()
                        .zip(m)
                        .fold(HpFloat::zero(bits), |acc, (r, mr)| acc + r.clone() * mr[j].clone())
                })
                .collect()
        };
        let a = mul(&alpha, &vinv);
        let c = mul(&x, &vinv);
        let to_f = |v: &[HpFloat]| v.iter().map(HpFloat::to_f64).collect::<Vec<f64>>();
        let vf: Vec<Vec<f64>> = v.iter().map(|r| to_f(r)).collect();
        let counter = HitCounter {
            s,
            forms: Vec::new(),
            a: to_f(&a),
            w: vinv.iter().map(|r| to_f(r)).collect(),
            c: to_f(&c),
            alpha: to_f(&alpha),
            x: to_f(&x),
            lo: (0..s).map(|l| vf.iter().map(|r| r[l].min(0.0)).sum()).collect(),
            hi: (0..s).map(|l| vf.iter().map(|r| r[l].max(0.0)).sum()).collect(),
        };
        Ok(FloatInstance {
            bits,
            alpha,
            x,
            a,
            w: vinv,
            c,
            volume,
            counter,
        })
    }

    pub fn from_exact(inst: &BrsInstance, bits: u32) -> Result<Self, BrsError> {
        let conv = |v: &[ExactScalar]| v.iter().map(|a| HpFloat::from_exact(a, bits)).collect();
        let v = inst.v.iter().map(|r| conv(r)).collect();
        FloatInstance::from_vectors(conv(&inst.alpha), v, conv(&inst.x), bits)
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn volume(&self) -> &HpFloat {
        &self.volume
    }

    pub fn alpha(&self) -> &[HpFloat] {
        &self.alpha
    }

    pub fn x(&self) -> &[HpFloat] {
        &self.x
    }

    /// Hit count and the smallest distance of a tested `t`-coordinate from
    /// `{0, 1}`.
    pub fn hit_count(&self, n: i64) -> Result<(u32, f64), BrsError> {
        let s = self.alpha.len();
        let nn = HpFloat::from_int(n, self.bits);
        let one = HpFloat::from_int(1, self.bits);
        let mut hits = 0;
        let mut margin = f64::INFINITY;
        for m in crate::cutproject::odometer(&self.counter.candidates(n)) {
            let mut inside = true;
            for j in 0..s {
                let t = m.iter().zip(&self.w).fold(nn.clone() * self.a[j].clone() + self.c[j].clone(), |acc, (&ml, r)| {
                    acc + HpFloat::from_int(ml, self.bits) * r[j].clone()
                });
                let lo = t.sign().map_err(|source| BrsError::PrecisionExhausted { n, source })?;
                let hi = (t.clone() - one.clone())
                    .sign()
                    .map_err(|source| BrsError::PrecisionExhausted { n, source })?;
                let tf = t.to_f64();
                margin = margin.min(tf.abs()).min((tf - 1.0).abs());
                if lo < 0 || hi >= 0 {
                    inside = false;
                    break;
                }
            }
            if inside {
                hits += 1;
            }
        }
        Ok((hits, margin))
    }

    /// Hit counts for `n = 0..=horizon` with the overall margin.
    pub fn hits(&self, horizon: u64) -> Result<(Vec<u32>, f64), BrsError> {
        let parts: Vec<(u32, f64)> = (0..=horizon as i64)
            .into_par_iter()
            .map(|n| self.hit_count(n))
            .collect::<Result<_, _>>()?;
        let margin = parts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        Ok((parts.into_iter().map(|p| p.0).collect(), margin))
    }
}

/// Instance description file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub alpha: Vec<ScalarText>,
    pub lifts: Vec<Lift>,
    #[serde(default)]
    pub x: Option<Vec<ScalarText>>,
    #[serde(default)]
    pub horizon: Option<u64>,
    #[serde(default)]
    pub offsets: Option<usize>,
}

impl InstanceFile {
    pub fn from_toml(text: &str) -> Result<Self, BrsError> {
        toml::from_str(text).map_err(|e| BrsError::Malformed(e.to_string()))
    }

    pub fn build(&self) -> Result<BrsInstance, BrsError> {
        let alpha = crate::cutproject::parse_scalar_row(&self.alpha)?;
        let x = match &self.x {
            Some(x) => crate::cutproject::parse_scalar_row(x)?,
            None => vec![ExactScalar::zero(); alpha.len()],
        };
        BrsInstance::new(alpha, self.lifts.clone(), x)
    }

    /// Parses `α` and `x` as decimals (or exact expressions) at `bits`.
    pub fn build_float(&self, bits: u32) -> Result<FloatInstance, BrsError> {
        let parse = |t: &ScalarText| -> Result<HpFloat, BrsError> {
            match t {
                ScalarText::Int(n) => Ok(HpFloat::from_int(*n, bits)),
                ScalarText::Text(s) => HpFloat::parse_decimal(s, bits)
                    .or_else(|_| t.parse().map(|e| HpFloat::from_exact(&e, bits)).map_err(BrsError::from)),
            }
        };
        let alpha: Vec<HpFloat> = self.alpha.iter().map(parse).collect::<Result<_, _>>()?;
        let x = match &self.x {
            Some(x) => x.iter().map(parse).collect::<Result<_, _>>()?,
            None => vec![HpFloat::zero(bits); alpha.len()],
        };
        FloatInstance::new(alpha, &self.lifts, x, bits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    #[test]
    fn golden_hits() {
        let g = BrsInstance::golden();
        assert_eq!(g.hit_count(0), 1);
        assert_eq!(g.hit_count(1), 0);
        assert_eq!(g.hit_count(2), 1);
        let rt = g.return_times(0, 9);
        assert_eq!(rt.times(), vec![0, 2, 4, 5, 7, 9]);
        assert_eq!(rt.origin_index(), Some(0));
    }

    #[test]
    fn golden_discrepancy() {
        let g = BrsInstance::golden();
        let d = g.discrepancy(10, Convention::Rotation);
        let alpha = g.alpha()[0].clone();
        assert_eq!(d.value(1), &ExactScalar::one() - &alpha);
        assert_eq!(d.hit_sum(10), 6);
        assert_eq!(d.value(10), &ExactScalar::from_int(6) - &(&ExactScalar::from_int(10) * &alpha));
    }

    #[test]
    fn conventions_differ_by_endpoint_hits() {
        let g = BrsInstance::golden();
        let a = g.discrepancy(200, Convention::Rotation);
        let b = g.discrepancy(200, Convention::Suspension);
        for m in 1..200 {
            let diff = &b.value(m) - &a.value(m);
            assert_eq!(diff, ExactScalar::from_int(a.hits()[m as usize] as i64 - a.hits()[0] as i64));
        }
    }

    #[test]
    fn full_cube_has_zero_discrepancy() {
        let alpha = vec![ExactScalar::quadratic(-1, 1, 2, 1), ExactScalar::quadratic(3, -2, 2, 1)];
        let lifts = vec![Lift { n: vec![1, 0], last: 0 }, Lift { n: vec![0, 1], last: 0 }];
        let inst = BrsInstance::new(alpha, lifts, vec![ExactScalar::ratio(1, 3), ExactScalar::ratio(2, 7)]).unwrap();
        let d = inst.discrepancy(500, Convention::Rotation);
        assert!((1..=500).all(|m| d.value(m).is_zero()));
    }

    #[test]
    fn dependent_vectors_rejected() {
        let alpha = vec![ExactScalar::quadratic(-1, 1, 2, 1), ExactScalar::quadratic(3, -2, 2, 1)];
        let lifts = vec![Lift { n: vec![1, 0], last: 1 }, Lift { n: vec![1, 0], last: 1 }];
        let err = BrsInstance::new(alpha, lifts, vec![ExactScalar::zero(), ExactScalar::zero()]).unwrap_err();
        assert_eq!(err, BrsError::DependentVectors);
        assert!(err.to_string().contains("dependent vectors"));
    }

    #[test]
    fn golden_setup() {
        let g = BrsInstance::golden();
        let s = g.build_setup().unwrap();
        assert_eq!(s.index(), &BigInt::from(1));
        assert_eq!(s.lambda(), &IntMatrix::from_i64_rows(&[&[0, 1]]));
        assert!(g.independence().independent);
    }

    #[test]
    fn sqrt2_instance_is_valid_but_dependent_over_q() {
        let inst = BrsInstance::sqrt2();
        let ind = inst.independence();
        assert_eq!(ind.rank, 2);
        assert!(!ind.independent);
        assert_eq!(inst.build_setup().unwrap().index(), &BigInt::from(1));
    }

    #[test]
    fn kesten() {
        let a = BrsInstance::golden().alpha()[0].clone();
        assert_eq!(kesten_predict(&a, &a, 50), Kesten::Brs(1));
        let two = &(&ExactScalar::from_int(2) * &a) - &ExactScalar::one();
        assert_eq!(kesten_predict(&a, &two, 50), Kesten::Brs(2));
        assert_eq!(kesten_predict(&a, &ExactScalar::ratio(1, 2), 50), Kesten::NotFound);
    }

    #[test]
    fn three_gaps() {
        let rt = BrsInstance::golden().return_times(0, 5000);
        assert!(rt.distinct_gaps().len() <= 3);
        let inst = BrsInstance::interval(BrsInstance::golden().alpha()[0].clone(), -3, 2).unwrap();
        assert!(inst.return_times(-2000, 2000).distinct_gaps().len() <= 3);
    }

    #[test]
    fn float_mode_agrees() {
        for inst in [BrsInstance::golden(), BrsInstance::sqrt2()] {
            let x: Vector = offset_grid(inst.dim(), inst.radicand(), 5).pop().unwrap();
            let inst = inst.with_x(x).unwrap();
            let f = FloatInstance::from_exact(&inst, 256).unwrap();
            let (hits, margin) = f.hits(300).unwrap();
            let exact: Vec<u32> = (0..=300).map(|n| inst.hit_count(n)).collect();
            assert_eq!(hits, exact);
            assert!(margin > 0.0);
        }
    }

    #[test]
    fn float_mode_reports_exhaustion() {
        // P = [0, α), x = 0: the point n = 0 sits on a facet
        let f = FloatInstance::from_exact(&BrsInstance::golden(), 128).unwrap();
        assert!(matches!(f.hit_count(0), Err(BrsError::PrecisionExhausted { n: 0, .. })));
    }

    #[test]
    fn instance_file_roundtrip() {
        let text = r#"
alpha = ["(-1+√5)/2"]
lifts = [{ n = [0], last = -1 }]
horizon = 100
"#;
        let f = InstanceFile::from_toml(text).unwrap();
        let inst = f.build().unwrap();
        assert_eq!(inst.volume(), BrsInstance::golden().volume());
        let fl = f.build_float(256).unwrap();
        assert!((fl.volume().to_f64() - 0.618033988749895).abs() < 1e-12);
    }
}
