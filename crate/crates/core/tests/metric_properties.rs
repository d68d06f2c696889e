//! Label-permutation invariance and edge cases of the external metrics.

use mdh_core::metrics::{ari, nmi};
use proptest::prelude::*;

fn labels() -> impl Strategy<Value = (Vec<u8>, Vec<u8>)> {
    (1usize..150).prop_flat_map(|n| (prop::collection::vec(0u8..6, n), prop::collection::vec(0u8..6, n)))
}

proptest! {
    #[test]
    fn metrics_ignore_label_names((t, p) in labels(), shift in 1u8..6) {
        let rename = |xs: &[u8]| xs.iter().map(|x| (x + shift) % 6).collect::<Vec<_>>();
        let (t2, p2) = (rename(&t), rename(&p));
        prop_assert!((nmi(&t, &p).unwrap() - nmi(&t2, &p).unwrap()).abs() < 1e-12);
        prop_assert!((nmi(&t, &p).unwrap() - nmi(&t, &p2).unwrap()).abs() < 1e-12);
        prop_assert!((ari(&t, &p).unwrap() - ari(&t2, &p2).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn metrics_are_bounded_and_symmetric((t, p) in labels()) {
        let n = nmi(&t, &p).unwrap();
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&n));
        prop_assert!((n - nmi(&p, &t).unwrap()).abs() < 1e-12);
        prop_assert!((ari(&t, &p).unwrap() - ari(&p, &t).unwrap()).abs() < 1e-12);
        prop_assert!(ari(&t, &p).unwrap() <= 1.0 + 1e-12);
    }
}

#[test]
fn worked_example() {
    let t = [0, 0, 1, 1];
    let p = [0, 1, 0, 1];
    assert!((ari(&t, &p).unwrap() + 0.5).abs() < 1e-12);
    let t = ["x", "x", "y", "y"];
    let p = [0, 1, 1, 1];
    assert!((nmi(&t, &p).unwrap() - 0.345_59).abs() < 5e-6);
    assert!(ari(&t, &p).unwrap().abs() < 1e-15);
}

#[test]
fn degenerate_partitions() {
    assert_eq!(nmi(&[1, 1, 1], &[4, 4, 4]).unwrap(), 1.0);
    assert_eq!(nmi(&[1, 1, 1], &[1, 2, 3]).unwrap(), 0.0);
    assert_eq!(ari(&[1, 1, 1], &[4, 4, 4]).unwrap(), 1.0);
    assert!(nmi::<u8, u8>(&[], &[]).is_err());
    assert!(ari(&[1, 2], &[1]).is_err());
}
