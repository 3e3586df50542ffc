//! 16-bit hash codes for Gaussian blobs, scored by Hamming-ranking retrieval.
//!
//! `cargo run --release --example hash_blobs`

use std::collections::BTreeMap;

use imsat::data::{gen_blobs, BlobParams};
use imsat::eval::{retrieval_metrics, RetrievalOptions};
use imsat::trainer::{encode, train_hashing, TrainConfig};

fn main() -> imsat::Result<()> {
    let ds = gen_blobs(&BlobParams::default())?;
    let labels = ds.labels.as_ref().unwrap();
    for hidden in [vec![200, 200], vec![60, 30]] {
        let mut cfg = TrainConfig::hashing(16);
        cfg.hidden = hidden.clone();
        let (model, report) = train_hashing(&ds.features, &cfg)?;
        let codes = encode(&model, &ds.features)?;
        // 100 queries per class leave a 400-point gallery.
        let opts = RetrievalOptions {
            top_n: 100,
            ..RetrievalOptions::default()
        };
        let m = retrieval_metrics(&codes, labels, &opts)?;
        println!(
            "{hidden:?}: mAP {:.4}  P@100 {:.4}  P@r=2 {:.4}  ({:.1}s)",
            m.map.unwrap(),
            m.p_at_n.unwrap(),
            m.p_at_r.unwrap(),
            report.seconds
        );
        let mut per_class: BTreeMap<usize, BTreeMap<String, usize>> = BTreeMap::new();
        for (line, &c) in codes.to_lines().into_iter().zip(&labels.labels) {
            *per_class.entry(c).or_default().entry(line).or_default() += 1;
        }
        for (c, counts) in per_class {
            let top: Vec<String> = counts.iter().map(|(code, n)| format!("{code}×{n}")).take(4).collect();
            println!("    class {c}: {}", top.join(" "));
        }
    }
    Ok(())
}
