use std::collections::{BTreeSet, HashSet};

use bdlattice::brs::BrsInstance;
use bdlattice::catalog::{fibonacci_setup, fibonacci_square};
use bdlattice::cutproject::{Parallelotope, Region, Scheme, Window};
use bdlattice::lattice::{complement, coordinates_in, index, saturate, smith_normal_form};
use bdlattice::matrix::{solve_in_span, IntMatrix};
use bdlattice::penrose::penrose_scheme;
use bdlattice::ExactScalar;
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use proptest::prelude::*;

fn int_matrix(rows: &[Vec<i64>]) -> IntMatrix {
    IntMatrix::from_rows(rows, rows[0].len())
}

fn exact_rows(m: &IntMatrix) -> Vec<Vec<ExactScalar>> {
    m.to_exact()
}

/// Determinant of the `k × k` minor on the given rows and columns.
fn minor(a: &IntMatrix, rows: &[usize], cols: &[usize]) -> BigInt {
    let sub: Vec<Vec<BigInt>> = rows.iter().map(|&r| cols.iter().map(|&c| a[(r, c)].clone()).collect()).collect();
    IntMatrix::from_rows(&sub, cols.len()).determinant()
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    (0..n)
        .flat_map(|first| {
            subsets(n, k - 1)
                .into_iter()
                .filter(move |rest| rest.first().map_or(true, |&r| r > first))
                .map(move |mut rest| {
                    rest.insert(0, first);
                    rest
                })
        })
        .collect()
}

/// `gcd` of all `k × k` minors.
fn determinantal_divisor(a: &IntMatrix, k: usize) -> BigInt {
    let mut g = BigInt::zero();
    for rows in subsets(a.nrows(), k) {
        for cols in subsets(a.ncols(), k) {
            g = g.gcd(&minor(a, &rows, &cols));
        }
    }
    g
}

fn matrix_strategy(max_rows: usize, max_cols: usize, bound: i64) -> impl Strategy<Value = Vec<Vec<i64>>> {
    (1..=max_rows, 1..=max_cols).prop_flat_map(move |(r, c)| {
        prop::collection::vec(prop::collection::vec(-bound..=bound, c), r)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn snf_matches_determinantal_divisors(rows in matrix_strategy(3, 3, 6)) {
        let a = int_matrix(&rows);
        let snf = smith_normal_form(&a);
        let inv = snf.invariants();
        let mut prefix = BigInt::one();
        for (k, d) in inv.iter().enumerate() {
            let dk = determinantal_divisor(&a, k + 1);
            if dk.is_zero() {
                prop_assert!(d.is_zero());
            } else {
                prefix *= d;
                prop_assert_eq!(&prefix, &dk);
            }
        }
        for w in inv.windows(2) {
            prop_assert!(w[1].is_zero() || (!w[0].is_zero() && w[1].is_multiple_of(&w[0])));
        }
    }

    #[test]
    fn index_counts_cosets(rows in prop::collection::vec(prop::collection::vec(-4i64..=4, 2), 2)) {
        let sub = int_matrix(&rows);
        let det = sub.determinant().abs();
        prop_assume!(!det.is_zero());
        let ambient = IntMatrix::identity(2);
        prop_assert_eq!(index(&ambient, &sub).unwrap(), det.clone());
        // D·ℤ² ⊂ Λ′, so the box [0, D)² meets every coset.
        let d: i64 = det.try_into().unwrap();
        let basis = exact_rows(&sub);
        let mut classes = HashSet::new();
        for x in 0..d {
            for y in 0..d {
                let c = solve_in_span(&basis, &[ExactScalar::from_int(x), ExactScalar::from_int(y)]).unwrap();
                classes.insert(c.iter().map(|t| t.fract().to_string()).collect::<Vec<_>>());
            }
        }
        prop_assert_eq!(classes.len() as i64, d);
    }

    #[test]
    fn saturation_and_complement(rows in prop::collection::vec(prop::collection::vec(-4i64..=4, 3), 1..=2)) {
        let b = int_matrix(&rows);
        prop_assume!(b.rank() == rows.len());
        let sat = saturate(&b).unwrap();
        prop_assert_eq!(sat.nrows(), rows.len());
        // B lies in its saturation.
        prop_assert!(coordinates_in(&sat, &b).is_ok());
        // Every integer point of the span in a box is an integer combination.
        let basis = exact_rows(&sat);
        let raw = exact_rows(&b);
        for x in -4i64..=4 {
            for y in -4i64..=4 {
                for z in -4i64..=4 {
                    let v = [ExactScalar::from_int(x), ExactScalar::from_int(y), ExactScalar::from_int(z)];
                    if solve_in_span(&raw, &v).is_some() {
                        let c = solve_in_span(&basis, &v).unwrap();
                        prop_assert!(c.iter().all(ExactScalar::is_integer), "{:?}", (x, y, z));
                    }
                }
            }
        }
        let comp = complement(&sat).unwrap();
        prop_assert_eq!(sat.stack(&comp).determinant().abs(), BigInt::one());
    }

    #[test]
    fn sign_matches_decimal_expansion(a in -1_000_000i64..=1_000_000, b in -1_000_000i64..=1_000_000,
                                      d in prop::sample::select(vec![2u64, 3, 5, 6, 7, 10, 11, 13, 41])) {
        let x = ExactScalar::quadratic(a, b, d, 1);
        // ⌊√d·10¹⁰⁰⌋ brackets b√d·10¹⁰⁰ within |b|.
        let scale = BigInt::from(10u32).pow(100);
        let s = (BigInt::from(d) * &scale * &scale).sqrt();
        let lo = BigInt::from(a) * &scale + BigInt::from(b) * &s;
        let hi = &lo + BigInt::from(b);
        let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        let expected = if lo.is_positive() { 1 } else if hi.is_negative() { -1 } else { 0 };
        prop_assert_ne!(expected, 0, "oracle interval straddles zero");
        prop_assert_eq!(x.signum(), expected);
    }

    #[test]
    fn field_operations_roundtrip(p in -50i64..50, q in -50i64..50, r in 1i64..20, s in -50i64..50, t in -50i64..50) {
        let x = ExactScalar::quadratic(p, q, 5, r);
        let y = ExactScalar::quadratic(s, t, 5, 1);
        prop_assert_eq!(&(&(&x + &y) - &y), &x);
        if !y.is_zero() {
            prop_assert_eq!(&(&(&x * &y) / &y), &x);
        }
        let f = x.floor();
        let fx = ExactScalar::from_bigint(f.clone());
        prop_assert!(fx <= x && x < &fx + &ExactScalar::one());
        prop_assert!((x.to_f64() - y.to_f64()).signum() == (&x - &y).signum() as f64 || x == y);
    }
}

/// `V_p = span((1, θ))`, `V_i = span((−θ, 1))`, `θ = (p + √d)/q`, window an
/// interval of `V_i`.
fn quadratic_scheme(p: i64, q: i64, d: u64, start: i64, len: i64) -> Scheme {
    let theta = ExactScalar::quadratic(p, 1, d, q);
    let dir = vec![-theta.clone(), ExactScalar::one()];
    let scale = |k: &ExactScalar| dir.iter().map(|c| c * k).collect::<Vec<_>>();
    let window = Window::single(Parallelotope {
        origin: scale(&ExactScalar::ratio(start, 7)),
        generators: vec![scale(&ExactScalar::ratio(len, 5))],
    });
    Scheme::new(
        vec![vec![ExactScalar::one(), theta]],
        vec![dir],
        IntMatrix::identity(2),
        window,
        false,
    )
    .expect("valid scheme")
}

fn boxed(dim: usize, lo: i64, hi: i64) -> Vec<Vec<i64>> {
    let mut out = vec![vec![]];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|p: Vec<i64>| {
                (lo..=hi).map(move |v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    out
}

/// `ρ_i` of the basis vectors; `ρ_i(γ)` is their integer combination.
fn internal_columns(scheme: &Scheme) -> Vec<Vec<ExactScalar>> {
    (0..scheme.dim())
        .map(|j| {
            let mut e = vec![0; scheme.dim()];
            e[j] = 1;
            scheme.rho_i(&scheme.embed(&e))
        })
        .collect()
}

fn internal_image(columns: &[Vec<ExactScalar>], g: &[i64]) -> Vec<ExactScalar> {
    let mut w = vec![ExactScalar::zero(); columns[0].len()];
    for (c, &k) in columns.iter().zip(g) {
        if k != 0 {
            let k = ExactScalar::from_int(k);
            for (wi, ci) in w.iter_mut().zip(c) {
                *wi += &(&k * ci);
            }
        }
    }
    w
}

/// Accepted points and pieces by testing every lattice point of the box.
fn brute_force(scheme: &Scheme, lo: i64, hi: i64) -> BTreeSet<(Vec<i64>, usize)> {
    let columns = internal_columns(scheme);
    boxed(scheme.dim(), lo, hi)
        .into_iter()
        .filter_map(|g| {
            let w = internal_image(&columns, &g);
            let hits: Vec<usize> = (0..scheme.window().len())
                .filter(|&i| scheme.window().pieces()[i].contains(&w))
                .collect();
            assert!(hits.len() <= 1, "pieces overlap at {g:?}");
            hits.first().map(|&i| (g, i))
        })
        .collect()
}

fn patch_set(scheme: &Scheme, lo: i64, hi: i64) -> BTreeSet<(Vec<i64>, usize)> {
    let points = scheme.generate_patch(&Region::cube(scheme.dim(), lo, hi)).expect("patch");
    let set: BTreeSet<_> = points.iter().map(|p| (p.gamma.clone(), p.piece)).collect();
    assert_eq!(set.len(), points.len(), "duplicate points");
    set
}

/// Float acceptance matches exact acceptance, and is only undecided for
/// points lying exactly on a facet.
fn float_agrees(scheme: &Scheme, lo: i64, hi: i64) {
    let columns = internal_columns(scheme);
    for g in boxed(scheme.dim(), lo, hi) {
        match scheme.accept_float(&g, 128) {
            Ok((piece, margin)) => {
                assert_eq!(piece, scheme.accept(&g), "{g:?}");
                assert!(margin >= 0.0);
            }
            Err(_) => {
                let w = internal_image(&columns, &g);
                let on_facet = scheme.window().pieces().iter().any(|p| {
                    p.coordinates(&w)
                        .is_some_and(|t| t.iter().any(|c| c.is_zero() || c == &ExactScalar::one()))
                });
                assert!(on_facet, "{g:?} undecided but off every facet");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn planar_patch_matches_filter(p in -3i64..=3, q in 1i64..=3, d in prop::sample::select(vec![2u64, 3, 5, 7]),
                                   start in -10i64..=10, len in 1i64..=15, lo in -4i64..=0, side in 0i64..=8) {
        let scheme = quadratic_scheme(p, q, d, start, len);
        let hi = lo + side;
        prop_assert_eq!(patch_set(&scheme, lo, hi), brute_force(&scheme, lo, hi));
        float_agrees(&scheme, lo, hi);
    }

    #[test]
    fn three_dimensional_patch_matches_filter(a in 0i64..97, b in 0i64..89, lo in -3i64..=0, side in 0i64..=5) {
        let x = vec![ExactScalar::ratio(a, 97), &ExactScalar::ratio(b, 89) + &ExactScalar::quadratic(0, 1, 2, 11)];
        let scheme = BrsInstance::sqrt2().with_x(x).unwrap().build_scheme().unwrap();
        let hi = lo + side;
        prop_assert_eq!(patch_set(&scheme, lo, hi), brute_force(&scheme, lo, hi));
        float_agrees(&scheme, lo, hi);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn penrose_patch_matches_filter(a in 1i64..50, b in 1i64..50, c in 1i64..50) {
        let offset = vec![
            ExactScalar::ratio(a, 53),
            ExactScalar::ratio(b, 59),
            ExactScalar::quadratic(0, 1, 5, 13),
            ExactScalar::ratio(c, 61),
            ExactScalar::ratio(-1, 19),
        ];
        let scheme = penrose_scheme(&offset).unwrap();
        prop_assert_eq!(patch_set(&scheme, -1, 2), brute_force(&scheme, -1, 2));
        float_agrees(&scheme, -1, 1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn fiber_labels_enumerate_cosets(n in 1i64..=6, shift in -20i64..20) {
        let setup = fibonacci_setup(n).unwrap();
        let labels: BTreeSet<usize> = (0..n)
            .map(|k| {
                let (a, _) = setup.split(&[shift + k, shift + k]);
                setup.label(&a)
            })
            .collect();
        prop_assert_eq!(labels, (0..n as usize).collect::<BTreeSet<_>>());
    }

    #[test]
    fn permuted_fibers_stay_bounded(seed in any::<u64>()) {
        let setup = fibonacci_setup(2).unwrap();
        let region = Region::ball(2, ExactScalar::from_int(400));
        let patch = setup.scheme().generate_patch(&region).unwrap();
        let swap = move |lambda: &[BigInt], j: usize| -> usize {
            let h = lambda.iter().fold(seed, |h, c| {
                let c: i64 = c.try_into().unwrap();
                (h ^ c as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15).rotate_left(29)
            });
            if h & 1 == 1 { 1 - j } else { j }
        };
        let report = setup.verify_patch_with(&patch, &region, &swap).unwrap();
        prop_assert!(report.bound_ok, "{:?}", report.failures);
        prop_assert!(report.injective);
        prop_assert!(report.fiber_counts_ok);
    }
}

#[test]
fn fibonacci_density_within_two_percent() {
    let scheme = fibonacci_square();
    let r = 10_000;
    let points = scheme.generate_patch(&Region::ball(2, ExactScalar::from_int(r))).unwrap();
    // |ρ_i([0,1)²)| = (1+φ)/√(1+φ²) = φ²/√(φ+2).
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let expected = 2.0 * r as f64 * phi * phi / (phi + 2.0).sqrt();
    let rel = (points.len() as f64 - expected).abs() / expected;
    assert!(rel < 0.02, "{} points, expected {expected:.1}", points.len());
}
