use num_complex::Complex64;
use parareg::exponents::ExponentSet;
use parareg::mollify::*;
use parareg::probes::white_noise;
use parareg::{Grid, GridFunction, Verdict};
use proptest::prelude::*;
use std::f64::consts::PI;

fn box_grid(n: usize) -> Grid {
    Grid::new(1, n, n, 2.0 * PI, 2.0 * PI, 1).unwrap()
}

#[test]
fn constants_survive_exactly() {
    let g = Grid::new(2, 16, 16, 2.0, 2.0, 2).unwrap();
    let f = GridFunction::from_real_fn(g, |_, _, c| 1.5 - c as f64).unwrap();
    let out = mollify(&f, 0.2).unwrap();
    for (a, b) in out.values().iter().zip(f.values()) {
        assert!((a - b).norm() < 1e-14);
    }
}

#[test]
fn step_in_time_converges_at_half_order() {
    let errs: Vec<(f64, f64)> = [256usize]
        .iter()
        .flat_map(|&n| {
            let g = Grid::new(1, n, 8, 2.0 * PI, 2.0 * PI, 1).unwrap();
            let f = GridFunction::from_real_fn(g, |t, _, _| if (t - PI).abs() < 1.0 { 1.0 } else { 0.0 }).unwrap();
            [0.4, 0.2, 0.1].into_iter().map(move |e| (e, mollify(&f, e).unwrap().sub(&f).unwrap().l2_norm()))
        })
        .collect();
    for w in errs.windows(2) {
        let order = (w[0].1 / w[1].1).ln() / (w[0].0 / w[1].0).ln();
        assert!(order >= 0.5, "{errs:?}");
    }
}

#[test]
fn translation_by_grid_steps_commutes() {
    let g = Grid::new(1, 16, 32, 2.0 * PI, 2.0 * PI, 1).unwrap();
    let f = white_noise(&g, 4);
    let shift = |h: &GridFunction| {
        let mut out = h.clone();
        for it in 0..16 {
            for ix in 0..32 {
                out.values_mut()[g.index((it + 3) % 16, (ix + 5) % 32, 0)] = h.get(it, ix, 0);
            }
        }
        out
    };
    let a = shift(&mollify(&f, 0.7).unwrap());
    let b = mollify(&shift(&f), 0.7).unwrap();
    assert_eq!(a, b);
}

#[test]
fn mollified_localized_field_stays_near_support() {
    let g = box_grid(64);
    let nd = NestedDomains::standard(&g);
    let chi = build_cutoff(&g, &nd).unwrap();
    let u = white_noise(&g, 8);
    let eps = 0.4;
    let v = mollify(&chi.localize(&u).unwrap(), eps).unwrap();
    let widen = |i: Interval| Interval::new(i.lo - eps - 1e-12, i.hi + eps + 1e-12);
    for it in 0..64 {
        for ix in 0..64 {
            let t = g.time_at(it);
            let mut x = [0.0];
            g.spatial_coords(ix, &mut x);
            if !(widen(nd.time.middle).contains(t) && widen(nd.space.middle).contains(x[0])) {
                assert!(v.get(it, ix, 0).norm() <= 1e-12);
            }
        }
    }
}

#[test]
fn cutoff_levels_and_gradient() {
    let g = Grid::new(2, 64, 64, 8.0, 8.0, 1).unwrap();
    for frac in [0.05, 0.1, 0.15, 0.2] {
        // Inner fraction shrinks as the middle/inner margin grows.
        let inner = 0.5 - 2.0 * frac;
        let nd = NestedDomains {
            time: Nested::centered(8.0, [0.75, 0.5, inner]),
            space: Nested::centered(8.0, [0.75, 0.5, inner]),
        };
        let cut = build_cutoff(&g, &nd).unwrap();
        let margin = nd.min_margin();
        assert!(cut.max_discrete_gradient() <= 4.0 / margin, "frac={frac}");
        let mut x = [0.0, 0.0];
        for it in 0..64 {
            for ix in 0..g.spatial_nodes() {
                let t = g.time_at(it);
                g.spatial_coords(ix, &mut x);
                let v = cut.chi.get(it, ix, 0).re;
                assert!((0.0..=1.0).contains(&v));
                if nd.contains(2, t, &x) {
                    assert_eq!(v, 1.0);
                }
                if !nd.contains(1, t, &x) {
                    assert_eq!(v, 0.0);
                }
            }
        }
    }
}

#[test]
fn degenerate_domains_are_rejected() {
    let g = box_grid(32);
    let mut nd = NestedDomains::standard(&g);
    nd.space.inner = nd.space.middle;
    assert!(build_cutoff(&g, &nd).is_err());
    let mut nd = NestedDomains::standard(&g);
    nd.time.outer = Interval::new(0.0, 2.0 * PI);
    assert!(build_cutoff(&g, &nd).is_err());
}

fn exps() -> ExponentSet {
    ExponentSet::new(2.0, 0.5, 2.0, 1).unwrap()
}

#[test]
fn apriori_norms_of_zero_vanish() {
    let g = box_grid(32);
    let chi = build_cutoff(&g, &NestedDomains::standard(&g)).unwrap();
    let r = apriori_bounds_check(&GridFunction::zeros(g), &chi, &[0.4, 0.2], &exps()).unwrap();
    assert!(r.rows.iter().all(|row| row.space_norm == 0.0 && row.time_norm == 0.0));
}

#[test]
fn apriori_norms_of_heat_solution_are_stable() {
    let g = box_grid(128);
    let chi = build_cutoff(&g, &NestedDomains::standard(&g)).unwrap();
    let u = GridFunction::from_real_fn(g, |t, x, _| (-t).exp() * x[0].sin()).unwrap();
    let r = apriori_bounds_check(&u, &chi, &[0.2, 0.1, 0.05, 0.025], &exps()).unwrap();
    assert_eq!(r.verdict, Verdict::Pass);
    for key in [|r: &AprioriRow| r.space_norm, |r: &AprioriRow| r.time_norm] {
        let v: Vec<f64> = r.rows.iter().map(key).collect();
        let (lo, hi) = v.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
        assert!(hi / lo < 1.1, "{v:?}");
    }
}

#[test]
fn jumps_outside_the_cutoff_are_invisible() {
    let g = box_grid(64);
    let nd = NestedDomains::standard(&g);
    let chi = build_cutoff(&g, &nd).unwrap();
    let u = GridFunction::from_real_fn(g, |t, x, _| (-t).exp() * x[0].sin()).unwrap();
    let t_jump = nd.time.middle.hi + 0.3;
    let jumped = GridFunction::from_real_fn(g, |t, x, _| (-t).exp() * x[0].sin() + if t > t_jump { 5.0 } else { 0.0 }).unwrap();
    let eps = [0.4, 0.2];
    let a = apriori_bounds_check(&u, &chi, &eps, &exps()).unwrap();
    let b = apriori_bounds_check(&jumped, &chi, &eps, &exps()).unwrap();
    for (x, y) in a.rows.iter().zip(&b.rows) {
        assert!((x.space_norm - y.space_norm).abs() <= 1e-10 * x.space_norm);
        assert!((x.time_norm - y.time_norm).abs() <= 1e-10 * x.time_norm);
    }
}

#[test]
fn eps_list_must_decrease() {
    let g = box_grid(32);
    let chi = build_cutoff(&g, &NestedDomains::standard(&g)).unwrap();
    let u = GridFunction::zeros(g);
    assert!(apriori_bounds_check(&u, &chi, &[0.2, 0.4], &exps()).is_err());
    assert!(apriori_bounds_check(&u, &chi, &[0.2], &exps()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mollification_is_self_adjoint(seed in 0u64..10_000, eps in 0.15f64..0.7) {
        let g = Grid::new(1, 32, 32, 2.0 * PI, 2.0 * PI, 1).unwrap();
        let (f, phi) = (white_noise(&g, seed), white_noise(&g, seed + 1));
        let a = mollify(&f, eps).unwrap().pairing(&phi).unwrap();
        let b = f.pairing(&mollify(&phi, eps).unwrap()).unwrap();
        prop_assert!((a - b).norm() <= 1e-12 * f.l2_norm() * phi.l2_norm());
    }

    #[test]
    fn mollification_contracts_lq(seed in 0u64..10_000, eps in 0.15f64..0.7) {
        let g = Grid::new(1, 32, 32, 2.0 * PI, 2.0 * PI, 2).unwrap();
        let f = white_noise(&g, seed);
        let out = mollify(&f, eps).unwrap();
        for q in [1.0, 2.0, f64::INFINITY] {
            prop_assert!(out.lp_norm(q) <= f.lp_norm(q) * (1.0 + 1e-12));
        }
        let z = Complex64::new(0.0, 0.0);
        prop_assert!(out.values().iter().all(|v| v.im == z.im));
    }
}
