use nalgebra::{DMatrix, DVector};

use crate::data::Dataset;
use crate::rng::NormalStream;

pub struct Lcg(NormalStream);

impl Lcg {
    pub fn new(seed: u64) -> Self {
        Lcg(NormalStream::new(seed, 99))
    }

    pub fn normal(&mut self) -> f64 {
        self.0.normal()
    }
}

/// Confounded linear IV data: X = A Pi + c H + e, Y = X b + c H + e.
pub fn random_dataset(rng: &mut Lcg, n: usize, d: usize, q: usize, confounding: f64) -> Dataset {
    let a = DMatrix::from_fn(n, q, |_, _| rng.normal());
    let pi = DMatrix::from_fn(q, d, |_, _| rng.normal());
    let h = DVector::from_fn(n, |_, _| rng.normal());
    let mut x = &a * pi;
    for j in 0..d {
        for i in 0..n {
            x[(i, j)] += confounding * h[i] + rng.normal();
        }
    }
    let beta = DVector::from_fn(d, |_, _| rng.normal());
    let mut y = &x * beta;
    for i in 0..n {
        y[i] += confounding * h[i] + rng.normal();
    }
    Dataset::new(y, x, a).unwrap()
}
