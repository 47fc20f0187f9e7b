use topojscc::gradcheck::{loss_suite, op_suite};

#[test]
fn every_autodiff_op_matches_finite_differences() {
    for seed in 0..3 {
        for r in op_suite(seed).unwrap() {
            assert!(r.passed(), "seed {seed}: {} rel err {:e}", r.name, r.rel_err);
        }
    }
}

#[test]
fn losses_and_layers_match_finite_differences() {
    for seed in 0..5 {
        for r in loss_suite(seed).unwrap() {
            assert!(r.passed(), "seed {seed}: {} rel err {:e}", r.name, r.rel_err);
        }
    }
}
