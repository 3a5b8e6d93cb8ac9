//! Property tests for structural invariants across modules.

use std::sync::Arc;

use proptest::prelude::*;

use ncpdo::exemplars;
use ncpdo::grid::{self, GridSpec, OpFn};
use ncpdo::io::{self, Record, View};
use ncpdo::lp::{build_lp_family, Profile};
use ncpdo::norms::{Exponent, NormContext, SpaceDescriptor};
use ncpdo::pdo::{apply_pdo, Operator, Side, DEFAULT_BUDGET_BYTES};
use ncpdo::qtorus::{qt_multiply, QtElement, ThetaMatrix};
use ncpdo::rng::{random_band_limited, random_samples, seeded};
use ncpdo::C64;

fn rel_gap(a: &[C64], b: &[C64]) -> f64 {
    let scale = b.iter().map(|z| z.norm()).fold(1e-300, f64::max);
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max) / scale
}

fn grid_strategy() -> impl Strategy<Value = GridSpec> {
    (1usize..=3, 3u32..=5, 1usize..=3).prop_filter_map("small grids", |(d, e, q)| {
        let n = 1usize << e;
        (n.pow(d as u32) <= 4096).then(|| GridSpec::new(d, n, q).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn transforms_are_linear_and_invertible(g in grid_strategy(), seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let mut r = seeded(seed);
        let f = random_samples(&g, &mut r);
        let h = random_samples(&g, &mut r);
        let (ca, cb) = (C64::new(a, 0.5), C64::new(-0.25, b));
        let mix: Vec<C64> = f.iter().zip(&h).map(|(x, y)| ca * x + cb * y).collect();
        let (ff, fh) = (grid::forward(&g, &f), grid::forward(&g, &h));
        let want: Vec<C64> = ff.iter().zip(&fh).map(|(x, y)| ca * x + cb * y).collect();
        prop_assert!(rel_gap(&grid::forward(&g, &mix), &want) < 1e-12);
        prop_assert!(rel_gap(&grid::inverse(&g, &ff), &f) < 1e-12);
    }

    #[test]
    fn lp_partition_holds_on_every_grid(d in 1usize..=2, e in 3u32..=7) {
        let fam = build_lp_family(GridSpec::new(d, 1 << e, 1).unwrap()).unwrap();
        prop_assert!(fam.partition_residual() <= 1e-10);
        prop_assert_eq!(fam.support_violations(), 0);
    }

    #[test]
    fn operators_are_linear_and_adjoints_pair(name in prop::sample::select(exemplars::NAMES.to_vec()), seed in any::<u64>(), row in any::<bool>()) {
        let g = GridSpec::new(2, 16, 1).unwrap();
        let sym = exemplars::by_name(name, g, &Profile::standard()).unwrap();
        let side = if row { Side::Row } else { Side::Column };
        let mut r = seeded(seed);
        let f = random_band_limited(&g, 7.0, 0.0, &mut r);
        let h = random_band_limited(&g, 7.0, 0.0, &mut r);
        let (ca, cb) = (C64::new(1.5, -0.5), C64::new(0.0, 2.0));
        let lhs = apply_pdo(&sym, &f.lincomb(ca, &h, cb).unwrap(), side).unwrap();
        let rhs = apply_pdo(&sym, &f, side).unwrap().lincomb(ca, &apply_pdo(&sym, &h, side).unwrap(), cb).unwrap();
        prop_assert!(rel_gap(lhs.coeffs(), rhs.coeffs()) < 1e-12);

        let op = Operator::new(&sym, side, DEFAULT_BUDGET_BYTES).unwrap();
        let pair = |a: &OpFn, b: &OpFn| -> C64 { a.coeffs().iter().zip(b.coeffs()).map(|(x, y)| y.conj() * x).sum() };
        let left = pair(&op.apply(&f).unwrap(), &h);
        let right = pair(&f, &op.apply_adjoint(&h).unwrap());
        prop_assert!((left - right).norm() <= 1e-11 * left.norm().max(1.0));
    }

    #[test]
    fn norms_are_seminorms(seed in any::<u64>(), c in -4.0f64..4.0, tag in prop::sample::select(vec!["L1N", "LinfN", "L1ML2c", "h1c", "F1a", "F2a", "Finfa", "B1infa", "H2a"])) {
        let g = GridSpec::new(2, 16, 2).unwrap();
        let ctx = NormContext::for_grid(&g).unwrap();
        let space = SpaceDescriptor::parse(tag, 0.5, None, None).unwrap();
        let mut r = seeded(seed);
        let f = random_band_limited(&g, 7.0, -0.5, &mut r);
        let h = random_band_limited(&g, 7.0, 0.5, &mut r);
        let nf = space.norm(&f, &ctx).unwrap();
        let nh = space.norm(&h, &ctx).unwrap();
        let scale = C64::new(c, 1.0);
        let ns = space.norm(&f.scale(scale), &ctx).unwrap();
        prop_assert!((ns - scale.norm() * nf).abs() <= 1e-12 * ns.max(1.0));
        let sum = space.norm(&f.lincomb(C64::new(1.0, 0.0), &h, C64::new(1.0, 0.0)).unwrap(), &ctx).unwrap();
        prop_assert!(sum <= (nf + nh) * (1.0 + 1e-10));
        prop_assert_eq!(space.norm(&OpFn::zeros(g), &ctx).unwrap(), 0.0);
    }

    #[test]
    fn twisted_product_is_associative_and_tracial(num in -5i64..=5, den in 1u64..=7, seed in any::<u64>()) {
        let theta = Arc::new(ThetaMatrix::rational2(num, den).unwrap());
        let mut r = seeded(seed);
        let x = QtElement::random(theta.clone(), 16, 2, &mut r).unwrap();
        let y = QtElement::random(theta.clone(), 16, 2, &mut r).unwrap();
        let z = QtElement::random(theta.clone(), 16, 2, &mut r).unwrap();
        let (xy, _) = qt_multiply(&x, &y).unwrap();
        let (yz, _) = qt_multiply(&y, &z).unwrap();
        let (a, la) = qt_multiply(&xy, &z).unwrap();
        let (b, lb) = qt_multiply(&x, &yz).unwrap();
        prop_assert_eq!(la.truncation_loss, 0.0);
        prop_assert_eq!(lb.truncation_loss, 0.0);
        prop_assert!(rel_gap(a.coeffs(), b.coeffs()) < 1e-12);
        let (yx, _) = qt_multiply(&y, &x).unwrap();
        prop_assert!((xy.trace() - yx.trace()).norm() < 1e-12 * xy.l2().max(1.0));
    }

    #[test]
    fn dumps_roundtrip_bitwise(g in grid_strategy(), seed in any::<u64>(), coeffs in any::<bool>()) {
        let f = OpFn::from_samples(g, random_samples(&g, &mut seeded(seed))).unwrap();
        let view = if coeffs { View::Coeffs } else { View::Samples };
        let mut buf = Vec::new();
        io::write_records(&mut buf, &[Record::from_fn(&f, view)]).unwrap();
        let back = io::read_records(&mut buf.as_slice()).unwrap().pop().unwrap().into_fn().unwrap();
        let (a, b) = if coeffs { (f.coeffs(), back.coeffs()) } else { (f.samples(), back.samples()) };
        prop_assert!(a == b);
    }
}

#[test]
fn qt_p2_norm_is_coefficient_l2() {
    let theta = Arc::new(ThetaMatrix::rational2(2, 5).unwrap());
    let x = QtElement::random(theta, 8, 3, &mut seeded(2)).unwrap();
    let via_coeffs = ncpdo::qtorus::qt_lp_norm(&x, Exponent::Two).unwrap();
    let via_rep = ncpdo::qtorus::qt_lp_norm_via_representation(&x, Exponent::Two).unwrap();
    assert!((via_coeffs - via_rep).abs() < 1e-12 * via_coeffs);
    assert!((via_coeffs - x.l2()).abs() < 1e-12 * via_coeffs);
}
