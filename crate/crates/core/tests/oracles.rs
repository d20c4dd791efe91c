//! Values computed independently (high-precision quadrature, closed forms)
//! and frozen here.

use std::f64::consts::PI;

use kinemat_core::braid::{permutation_of, BraidRep, BraidWord, C64};
use kinemat_core::fields::{BumpProfile, Point, VectorField};
use kinemat_core::flows::flow_point;
use kinemat_core::harness::{RunConfig, Suite};

#[test]
fn bump_profile_values() {
    assert_eq!(BumpProfile::value(0.0), 1.0);
    assert!((BumpProfile::value(0.5) - 0.367_879_441_171_442_32).abs() < 1e-16);
    assert_eq!(BumpProfile::value(1.0), 0.0);
    assert_eq!(BumpProfile::value(1.5), 0.0);
    // d/du at u = 0.5: -beta / (1 - u)^2
    assert!((BumpProfile::derivative(0.5) + 4.0 * 0.367_879_441_171_442_32).abs() < 1e-15);
}

#[test]
fn translation_transit_time() {
    // int_{-1}^{1} ds / beta(s^2 / 2.25), 30-digit quadrature
    let transit = 2.522_395_179_469_081_6;
    let g = VectorField::translate(Point::from_vec(vec![0.0]), 1.5, Point::from_vec(vec![1.0])).unwrap();
    let end = flow_point(&g, transit, &Point::from_vec(vec![-1.0]), 1e-12).unwrap();
    assert!((end[0] - 1.0).abs() < 1e-8, "{}", end[0]);
}

#[test]
fn rotation_half_turn_swaps_the_pair() {
    // pi / beta(0.25 / 1.44)
    let t = 3.876_039_633_986_083_6;
    let g = VectorField::rotate(Point::from_vec(vec![0.0, 0.0]), 1.2, 1.0).unwrap();
    let a = flow_point(&g, t, &Point::from_vec(vec![0.5, 0.0]), 1e-12).unwrap();
    let b = flow_point(&g, t, &Point::from_vec(vec![-0.5, 0.0]), 1e-12).unwrap();
    assert!((a[0] + 0.5).abs() < 1e-7 && a[1].abs() < 1e-7, "{a}");
    assert!((b[0] - 0.5).abs() < 1e-7 && b[1].abs() < 1e-7, "{b}");
    // a quarter turn is counterclockwise
    let q = flow_point(&g, t / 2.0, &Point::from_vec(vec![0.5, 0.0]), 1e-12).unwrap();
    assert!(q[0].abs() < 1e-7 && (q[1] - 0.5).abs() < 1e-7, "{q}");
}

#[test]
fn braid_word_images() {
    let w = BraidWord::from_pairs(3, &[(1, 1), (2, 1)]).unwrap();
    assert_eq!(permutation_of(&w).as_slice(), &[2, 0, 1]);
    let phase = BraidRep::abelian(3, PI / 3.0).unwrap().eval(&w).unwrap()[(0, 0)];
    assert!((phase - C64::new(-0.5, 0.75f64.sqrt())).norm() < 1e-15);
    let rel = BraidWord::from_pairs(3, &[(1, 1), (2, 1), (1, 1), (2, -1), (1, -1), (2, -1)]).unwrap();
    assert!(permutation_of(&rel).is_identity());
    assert_eq!(rel.to_string(), "s1 s2 s1 s2^-1 s1^-1 s2^-1");
}

#[test]
fn config_digest_is_frozen() {
    let cfg = RunConfig::new(Suite::Cocycle, 7);
    assert_eq!(cfg.digest(), "2499feb634edc439cd3e6ffb0fd11601861e957d6a4d405db54275760cd88cd5");
}
