//! Saves a trained model and its dataset, reloads both and checks that the
//! predictions are bit-identical.
//!
//! `cargo run --release --example checkpoint_roundtrip`

use imsat::data::{gen_blobs, BlobParams, Dataset};
use imsat::nn::checkpoint;
use imsat::trainer::{encode, train_clustering, TrainConfig};
use imsat::Error;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join(format!("imsat-checkpoint-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;

    let ds = gen_blobs(&BlobParams::default())?;
    let mut cfg = TrainConfig::clustering(4);
    cfg.hidden = vec![10, 10];
    cfg.epochs = 100;
    let model = match train_clustering(&ds.features, &cfg) {
        Ok((m, _)) => m,
        Err(Error::ConstraintUnsatisfied { model, .. }) => *model,
        Err(e) => return Err(e.into()),
    };

    let data_path = dir.join("blobs.imsd");
    let model_path = dir.join("model.ckpt");
    ds.save(&data_path)?;
    checkpoint::save(&model, &model_path)?;

    let ds2 = Dataset::load(&data_path)?;
    let model2 = checkpoint::load(&model_path)?;
    println!("dataset fingerprint {} -> {}", ds.fingerprint(), ds2.fingerprint());
    println!("{} parameters, hidden {:?}", model2.num_params(), model2.hidden_dims());

    let a = model.predict(&ds.features)?;
    let b = model2.predict(&ds2.features)?;
    let same = a.iter().zip(&b).all(|(x, y)| x.as_slice() == y.as_slice());
    let ids = encode(&model2, &ds2.features)?.cluster_ids();
    println!("identical predictions: {same}; first ids {:?}", &ids[..10]);

    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
