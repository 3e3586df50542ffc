//! Clusters four Gaussian blobs with a 2-10-10-4 network and VAT.
//!
//! `cargo run --release --example cluster_blobs -- [seeds] [epochs]`
//!
//! 800 points give only four mini-batches per epoch, hence the large default
//! epoch count.

use imsat::data::{gen_blobs, BlobParams};
use imsat::eval::clustering_accuracy;
use imsat::trainer::{encode, train_clustering, TrainConfig};

fn main() -> imsat::Result<()> {
    let arg = |i: usize| std::env::args().nth(i).and_then(|s| s.parse().ok());
    let seeds: u64 = arg(1).unwrap_or(3);
    let epochs = arg(2).map_or(2000, |e: u64| e as usize);
    for seed in 0..seeds {
        let ds = gen_blobs(&BlobParams {
            seed,
            ..BlobParams::default()
        })?;
        let mut cfg = TrainConfig::clustering(4);
        cfg.hidden = vec![10, 10];
        cfg.epochs = epochs;
        cfg.seed = seed;
        match train_clustering(&ds.features, &cfg) {
            Ok((model, report)) => {
                let codes = encode(&model, &ds.features)?;
                let acc = clustering_accuracy(&codes, ds.labels.as_ref().unwrap())?;
                println!(
                    "seed {seed}: ACC {:.4}  KL {:.5} (delta {:.5})  mu {}  {:.1}s",
                    acc.acc,
                    report.final_kl.unwrap(),
                    report.delta.unwrap(),
                    report.mu_final.unwrap(),
                    report.seconds
                );
            }
            Err(e) => println!("seed {seed}: {e}"),
        }
    }
    Ok(())
}
