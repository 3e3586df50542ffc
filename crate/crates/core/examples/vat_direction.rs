//! Virtual adversarial directions versus random directions of the same length
//! on a trained blob model.
//!
//! `cargo run --release --example vat_direction`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use imsat::augment::{radius_table, rpt_perturbation, sat_per_row, vat_direction, VatOptions};
use imsat::data::{gen_blobs, BlobParams};
use imsat::nn::Mode;
use imsat::trainer::{train_clustering, TrainConfig};
use imsat::Matrix;

fn main() -> imsat::Result<()> {
    let ds = gen_blobs(&BlobParams::default())?;
    let mut cfg = TrainConfig::clustering(4);
    cfg.hidden = vec![10, 10];
    cfg.epochs = 2000;
    let (model, _) = train_clustering(&ds.features, &cfg).or_else(|e| match e {
        imsat::Error::ConstraintUnsatisfied { model, report, .. } => Ok((*model, *report)),
        e => Err(e),
    })?;

    let eps = radius_table(&ds.features, cfg.alpha, cfg.t_neighbor)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let clean = model.forward(&ds.features, Mode::Infer)?.heads;
    let base = sat_per_row(&clean, &clean);
    // Mean increase of the per-point loss over the unperturbed input.
    let sat_gain = |r: &Matrix| -> imsat::Result<f64> {
        let out = model.forward(&ds.features.add(r)?, Mode::Infer)?.heads;
        let per_row = sat_per_row(&clean, &out);
        Ok(per_row.iter().zip(&base).map(|(a, b)| a - b).sum::<f64>() / per_row.len() as f64)
    };
    for scale in [1.0, 4.0, 16.0, 64.0] {
        let e: Vec<f64> = eps.eps.iter().map(|v| v * scale).collect();
        for xi in [0.1, 10.0] {
            let opts = VatOptions {
                xi,
                mode: Mode::Infer,
                ..VatOptions::default()
            };
            let r_vat = vat_direction(&model, &ds.features, &e, &opts, &mut rng)?;
            let r_rand = rpt_perturbation(ds.len(), ds.dim(), &e, &mut rng)?;
            println!(
                "radius ×{scale:<4} xi {xi:<4}: loss increase  vat {:.3e}  random {:.3e}",
                sat_gain(&r_vat)?,
                sat_gain(&r_rand)?
            );
        }
    }
    Ok(())
}
