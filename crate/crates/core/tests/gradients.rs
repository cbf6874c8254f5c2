mod common;

use common::{causality_holds, gradient_check, perturbed_vectors, tiny_config};
use treecomp::wordrep::{Composition, Extractor};

#[test]
fn finite_differences_agree_for_every_configuration() {
    for &e in Extractor::ALL {
        for &c in Composition::ALL {
            let err = gradient_check(tiny_config(e, c));
            println!("{e}+{c}: max relative error {err:.2e}");
            assert!(err < 1e-4, "{e}+{c}: {err}");
        }
    }
}

#[test]
fn one_directional_extractors_are_causal() {
    assert!(causality_holds(Extractor::Fw));
    assert!(causality_holds(Extractor::Bw));
}

#[test]
fn bidirectional_vectors_see_both_sides() {
    let (a, b) = perturbed_vectors(Extractor::Bi, 3);
    for i in 1..=5 {
        assert_ne!(a[i], b[i], "position {i}");
    }
}
