//! Fixtures shared by the benchmarks.

use pulse_core::{center, sem, Dataset, Intervention, Roles};

/// Centred sample from the single-regressor design with `q` instruments.
pub fn univariate_sample(q: usize, n: usize, seed: u64) -> Dataset {
    let model = sem::univariate_design(q, 0.5, 0.1).expect("valid design");
    center(&sem::sample(&model, n, seed, &Intervention::None).expect("sampling"), Roles::ALL)
}
