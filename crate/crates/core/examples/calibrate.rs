//! Measures accuracy and centroid counts over 20 seeds; the acceptance suite
//! pins its budgets from this output.
//!
//! cargo run --release -p tdigest-core --example calibrate

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use tdigest_core::verify::{q_space_error, SortedSamples};
use tdigest_core::{Digest, ScaleKind, ScaleSpec};

const SEEDS: u64 = 20;
const N: usize = 100_000;

fn uniform(seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..N).map(|_| rng.random::<f64>()).collect()
}

fn build(kind: ScaleKind, delta: f64, data: &[f64]) -> Digest {
    let mut d = Digest::new(ScaleSpec::new(kind, delta).unwrap());
    d.extend(data.iter().copied()).unwrap();
    d.compact();
    d
}

fn error_at(d: &Digest, oracle: &SortedSamples, q: f64) -> f64 {
    q_space_error(d, oracle.quantile(q).unwrap(), q).unwrap()
}

fn main() {
    let qs = [0.001, 0.01, 0.5, 0.99, 0.999];
    for kind in ScaleKind::ALL {
        let mut worst = [0.0f64; 5];
        let mut tail_over_mid = 0usize;
        for seed in 0..SEEDS {
            let data = uniform(seed);
            let oracle = SortedSamples::new(data.clone()).unwrap();
            let d = build(kind, 100.0, &data);
            let errs: Vec<f64> = qs.iter().map(|&q| error_at(&d, &oracle, q)).collect();
            for (w, e) in worst.iter_mut().zip(&errs) {
                *w = w.max(*e);
            }
            if errs[0].max(errs[4]) > errs[2] {
                tail_over_mid += 1;
            }
        }
        println!("accuracy {kind} delta=100 worst q-err at {qs:?}: {worst:?}; seeds with tail > mid: {tail_over_mid}");
    }

    for kind in ScaleKind::ALL {
        for delta in [50.0, 100.0, 500.0] {
            let max = (0..SEEDS).map(|s| build(kind, delta, &uniform(s)).centroids().len()).max().unwrap();
            println!("centroids {kind} delta={delta}: max {max}");
        }
    }

    let mut shard_worst = [0.0f64; 3];
    for seed in 0..SEEDS {
        let data = uniform(seed);
        let oracle = SortedSamples::new(data.clone()).unwrap();
        let shards: Vec<Digest> = data.chunks(N / 10).map(|c| build(ScaleKind::K1, 100.0, c)).collect();
        let merged = Digest::merge_all(&shards).unwrap().unwrap();
        for (w, q) in shard_worst.iter_mut().zip([0.01, 0.5, 0.99]) {
            *w = w.max(error_at(&merged, &oracle, q));
        }
    }
    println!("10-shard merge k1 delta=100 worst q-err at [0.01, 0.5, 0.99]: {shard_worst:?}");

    let mut round_trip = 0.0f64;
    for seed in 0..SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..N).map(|_| StandardNormal.sample(&mut rng)).collect();
        let d = build(ScaleKind::K1, 100.0, &data);
        for q in [0.01, 0.25, 0.5, 0.75, 0.99] {
            round_trip = round_trip.max((d.cdf(d.quantile(q).unwrap()).unwrap() - q).abs());
        }
    }
    println!("cdf(quantile(q)) round trip on normal data: worst {round_trip:e}");
}
