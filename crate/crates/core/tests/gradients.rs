//! Analytic gradients of the weighted loss against central differences.

mod common;

#[test]
fn gradients_match_central_differences() {
    for seed in 0..20 {
        let inst = common::random_instance(seed);
        let err = common::max_relative_error(&inst, 1e-5);
        assert!(err < 1e-4, "seed {seed}: relative error {err}");
    }
}
