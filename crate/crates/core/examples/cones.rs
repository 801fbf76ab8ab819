//! Trains on the synthetic cones data under the four sampling arms and
//! prints test accuracy, stopping iteration and the mass of `q` on the
//! informative columns.
//!
//! ```text
//! cargo run --release -p mpboost --example cones [seeds]
//! ```

use std::time::Instant;

use mpboost::{generate_cones, train_test_split, train_with_test, Hyperparams};

fn main() -> Result<(), mpboost::Error> {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let data = generate_cones::<f64>(2500, 10, 90, 0.3, 0)?;
    let (train, test) = train_test_split(&data, 0.2, 0)?;
    for (rows, cols) in [(true, true), (true, false), (false, true), (false, false)] {
        let mut total = 0.0;
        for seed in 0..seeds {
            let mut hp = Hyperparams::for_shape(train.n_rows(), train.n_cols());
            hp.adaptive_rows = rows;
            hp.adaptive_cols = cols;
            hp.seed = seed;
            let start = Instant::now();
            let (model, diag) = train_with_test(&train, Some(&test), &hp)?;
            let acc = model.accuracy(&test, true)?;
            let informative: f64 = model.final_q().as_slice()[..10].iter().sum();
            println!(
                "rows={rows:5} cols={cols:5} seed={seed} acc={acc:.4} T={} iters={} q_inf={informative:.3} {:.2?}",
                model.best_iteration(),
                diag.records.len(),
                start.elapsed()
            );
            total += acc;
        }
        println!("mean acc {:.4}", total / seeds as f64);
    }
    Ok(())
}
