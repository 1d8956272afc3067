//! Shared fixtures for the criterion benchmarks.

use fedauth_core::datagen::{gen_population, LabeledDataset, PopulationSpec};
use fedauth_core::nn::{Matrix, Network};
use fedauth_core::rng::SeededRng;

pub fn bench_network(dims: &[usize], seed: u64) -> Network {
    let mut rng = SeededRng::from_seed(seed);
    Network::dense(dims, &mut rng).expect("valid dims")
}

pub fn bench_batch(rows: usize, cols: usize, classes: usize, seed: u64) -> (Matrix, Vec<usize>) {
    let mut rng = SeededRng::from_seed(seed);
    let mut x = Matrix::zeros(rows, cols);
    for v in x.data.iter_mut() {
        *v = rng.uniform_in(-1.0, 1.0);
    }
    let labels = (0..rows).map(|_| rng.index(classes)).collect();
    (x, labels)
}

pub fn bench_population(num_users: usize, input_dim: usize, seed: u64) -> LabeledDataset {
    gen_population(&PopulationSpec {
        num_users,
        input_dim,
        samples_per_user: 50,
        separation: 5.0,
        within_scale: 1.0,
        seed,
    })
    .expect("valid spec")
    .data
}
