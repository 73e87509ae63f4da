use num_complex::Complex64;
use proptest::prelude::*;

use cnls_lab::diagnostics::{build_morawetz_kernel_strided, morawetz_mr};
use cnls_lab::experiment::suite::{Bump, SmoothField};
use cnls_lab::experiment::{Ini, RunConfig};
use cnls_lab::functionals::{classify_norms, Norms};
use cnls_lab::ground_state::reference_refs;
use cnls_lab::radial::{inner, laplacian4};
use cnls_lab::variational::sobolev_quotient;
use cnls_lab::{Field, RadialGrid, RegionLabel, ScalingPair, Threshold};

fn grid() -> RadialGrid {
    RadialGrid::new(12.0, 1200).unwrap()
}

fn bump(complex: bool) -> impl Strategy<Value = Bump> {
    (-1.0..1.0f64, 0.0..3.0f64, 0.5..2.0f64, -1.0..1.0f64).prop_map(move |(a, c, w, p)| Bump {
        a,
        c,
        w,
        p: if complex { p } else { 0.0 },
    })
}

fn field(complex: bool) -> impl Strategy<Value = Field> {
    proptest::collection::vec(bump(complex), 1..=3)
        .prop_filter("nonzero", |t| t.iter().any(|b| b.a.abs() > 1e-3))
        .prop_map(|terms| SmoothField { terms }.sample(grid()))
}

fn omega_pair() -> impl Strategy<Value = ScalingPair> {
    // unit directions in the cone: angles from -atan(5/6) to π/2
    (-(5.0f64 / 6.0).atan()..std::f64::consts::FRAC_PI_2)
        .prop_map(|th| ScalingPair::new(th.cos(), th.sin()))
        .prop_filter("in the cone", |p| p.in_omega())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sharp_sobolev(u in field(true)) {
        let c4 = reference_refs().c4;
        let n = Norms::of(&u);
        prop_assert!(n.l4_4.powf(0.25) <= c4 * n.grad_sq.sqrt() * 1.005);
        // equivalently, the quotient never drops below the threshold
        prop_assert!(sobolev_quotient(&u).unwrap() >= reference_refs().m * (1.0 - 0.02));
    }

    #[test]
    fn quotient_is_scale_invariant(u in field(false), c in 0.01..100.0f64) {
        let a = sobolev_quotient(&u).unwrap();
        let b = sobolev_quotient(&u.scaled(c)).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a);
    }

    #[test]
    fn trapping_bound(u in field(true), s in 0.1..4.0f64) {
        let n = Norms::of(&u.scaled(s));
        prop_assume!(n.k(ScalingPair::CANONICAL) >= 0.0);
        let e = n.energy();
        let tol = 1e-12 * n.energy_scale();
        prop_assert!(n.grad_sq / 4.0 + n.l10_3 / 10.0 <= e + tol);
        prop_assert!(e <= n.grad_sq / 2.0 + 0.3 * n.l10_3 + tol);
    }

    #[test]
    fn region_label_is_pair_independent(
        u in field(true),
        s in 0.1..6.0f64,
        pairs in proptest::collection::vec(omega_pair(), 10),
    ) {
        let n = Norms::of(&u.scaled(s));
        let m = Threshold::analytic();
        prop_assume!(n.energy() < m.value());
        let base = classify_norms(&n, m, ScalingPair::CANONICAL);
        prop_assert_ne!(base, RegionLabel::AboveThreshold);
        for p in pairs {
            prop_assert_eq!(classify_norms(&n, m, p), base, "{:?}", p);
        }
    }

    #[test]
    fn h_is_positive(u in field(true), p in omega_pair()) {
        let n = Norms::of(&u);
        prop_assert!(n.h(p) > 0.0);
        prop_assert!(n.h_c(p) >= 0.0);
    }

    #[test]
    fn below_the_ground_state_gradient_the_cubic_energy_dominates(u in field(true), s in 0.1..5.0f64) {
        let n = Norms::of(&u.scaled(s));
        prop_assume!(n.grad_sq < reference_refs().grad_w_sq);
        prop_assert!(n.energy_c() >= 0.25 * n.grad_sq);
    }

    #[test]
    fn laplacian_is_symmetric_and_nonpositive(
        re in proptest::collection::vec(-1.0..1.0f64, 61),
        im in proptest::collection::vec(-1.0..1.0f64, 61),
        re2 in proptest::collection::vec(-1.0..1.0f64, 61),
    ) {
        let g = RadialGrid::new(3.0, 60).unwrap();
        let mk = |a: &[f64], b: Option<&[f64]>| {
            let mut v: Vec<Complex64> = a
                .iter()
                .enumerate()
                .map(|(i, &x)| Complex64::new(x, b.map_or(0.0, |b| b[i])))
                .collect();
            v[60] = Complex64::new(0.0, 0.0);
            Field::from_values(g, v).unwrap()
        };
        let u = mk(&re, Some(&im));
        let v = mk(&re2, None);
        let lhs = inner(&laplacian4(&u), &v).unwrap();
        let rhs = inner(&u, &laplacian4(&v)).unwrap();
        let scale = inner(&laplacian4(&u), &laplacian4(&u)).unwrap().re.sqrt()
            * inner(&v, &v).unwrap().re.sqrt();
        prop_assert!((lhs - rhs).norm() <= 1e-12 * scale.max(1.0));
        prop_assert!(inner(&laplacian4(&v), &v).unwrap().re <= 1e-12);
    }

    #[test]
    fn grid_and_solver_settings_round_trip(
        r_max in 5.0..100.0f64,
        n in 50usize..5000,
        dt0 in 1e-5..1e-2f64,
        stride in 1usize..500,
        a in 0.01..3.0f64,
    ) {
        let text = format!(
            "[grid]\nr_max = {r_max}\nn = {n}\n[solver]\ndt0 = {dt0}\nrecord_stride = {stride}\n[initial]\nkind = gaussian\na = {a}\n"
        );
        let cfg = RunConfig::preset("scan").unwrap().apply(&Ini::parse(&text).unwrap()).unwrap();
        let back = RunConfig::preset("scan").unwrap().apply(&Ini::parse(&cfg.canonical()).unwrap()).unwrap();
        prop_assert_eq!(back.canonical(), cfg.canonical());
        prop_assert_eq!(back.hash(), cfg.hash());
        prop_assert_eq!(back.grid.r_max(), r_max);
        prop_assert_eq!(back.solver.dt0, dt0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn morawetz_vanishes_on_real_fields(u in field(false), radius in 1.0..6.0f64) {
        let k = build_morawetz_kernel_strided(*u.grid(), radius, 64, 10).unwrap();
        prop_assert_eq!(morawetz_mr(&u, &k).unwrap(), 0.0);
    }
}
