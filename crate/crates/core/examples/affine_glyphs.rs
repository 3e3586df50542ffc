//! Affine distortion of small glyph images, then clustering the glyphs with
//! VAT alone and with the VAT + affine mixture.
//!
//! `cargo run --release --example affine_glyphs -- [seed]`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use imsat::augment::{affine_distort, AffineRanges};
use imsat::data::{gen_glyphs, glyph_templates, GLYPH_SIZE};
use imsat::eval::{assignment_accuracy, purity};
use imsat::trainer::{encode, train_clustering, TrainConfig, Variant};
use imsat::{Error, Matrix};

fn show(img: &Matrix) {
    for r in 0..img.rows() {
        let line: String = img.row(r).iter().map(|&v| if v > 0.5 { '#' } else if v > 0.0 { '+' } else { '.' }).collect();
        println!("  {line}");
    }
}

fn main() -> imsat::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ranges = AffineRanges::default();
    let templates = glyph_templates();
    let k = templates.len();

    // Templates live in [-1, 1]; shift to [0, 2] so zero padding is background.
    let first = templates[0].map(|v| v + 1.0);
    println!("template 0:");
    show(&first.map(|v| v - 1.0));
    println!("distorted:");
    show(&affine_distort(&first, &ranges, &mut rng)?.map(|v| v - 1.0));

    let ds = gen_glyphs(100, &ranges, seed)?;
    let labels = &ds.labels.as_ref().unwrap().labels;
    for v in [Variant::ImsatVat, Variant::ImsatVatAffine] {
        let mut cfg = TrainConfig::clustering(k).with_variant(v);
        cfg.image_shape = Some((GLYPH_SIZE, GLYPH_SIZE));
        cfg.batch_size = 100;
        cfg.seed = seed;
        let model = match train_clustering(&ds.features, &cfg) {
            Ok((m, _)) => m,
            Err(Error::ConstraintUnsatisfied { model, .. }) => *model,
            Err(e) => return Err(e),
        };
        let ids = encode(&model, &ds.features)?.cluster_ids();
        println!(
            "{v:?}: ACC {:.4}  purity {:.4}",
            assignment_accuracy(&ids, labels, k, k)?.acc,
            purity(&ids, labels, k, k)?
        );
    }
    Ok(())
}
