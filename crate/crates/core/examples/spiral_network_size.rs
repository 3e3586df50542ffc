//! IMSAT (VAT) versus weight decay on the three-arm spiral, for growing
//! hidden layers. Prints per-setting ACC and the cluster id along each arm.
//!
//! `cargo run --release --example spiral_network_size -- [epochs]`

use imsat::data::{gen_spiral, SpiralParams};
use imsat::eval::clustering_accuracy;
use imsat::trainer::{encode, train_clustering, Regularizer, TrainConfig};
use imsat::Error;

fn main() -> imsat::Result<()> {
    let epochs: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(300);
    let ds = gen_spiral(&SpiralParams::default())?;
    let labels = ds.labels.as_ref().unwrap();
    for (name, reg) in [("vat", Regularizer::Vat), ("weight decay", Regularizer::WeightDecay)] {
        for h in [5, 10, 20] {
            let mut cfg = TrainConfig::clustering(3);
            cfg.hidden = vec![h, h];
            cfg.epochs = epochs;
            cfg.regularizer = reg;
            if reg == Regularizer::WeightDecay {
                cfg.weight_decay_rate = 0.0005;
            }
            let model = match train_clustering(&ds.features, &cfg) {
                Ok((m, _)) => m,
                // Still worth looking at the least-violating model.
                Err(Error::ConstraintUnsatisfied { model, .. }) => *model,
                Err(e) => return Err(e),
            };
            let codes = encode(&model, &ds.features)?;
            let acc = clustering_accuracy(&codes, labels)?;
            println!("{name:>12} {h:>2}-{h:<2}  ACC {:.3}", acc.acc);
            let ids = codes.cluster_ids();
            for arm in 0..3 {
                let row: String = (0..300).step_by(6).map(|j| char::from(b'0' + ids[arm * 300 + j] as u8)).collect();
                println!("    arm {arm}: {row}");
            }
        }
    }
    Ok(())
}
