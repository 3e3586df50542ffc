//! Evaluation utilities on hand-made inputs: Hungarian accuracy, Hamming
//! retrieval metrics and the shared hyper-parameter selector.
//!
//! `cargo run --example metrics_and_selection`

use imsat::eval::{
    assignment_accuracy, hamming_ranking, mean_average_precision, precision_at_n, precision_at_radius, purity,
    relative_scores, select_shared_hyperparameter,
};

fn main() -> imsat::Result<()> {
    // Clusters are an arbitrary renaming of the classes plus one mistake.
    let pred = [2, 2, 2, 0, 0, 0, 1, 1, 0];
    let truth = [0, 0, 0, 1, 1, 1, 2, 2, 2];
    let acc = assignment_accuracy(&pred, &truth, 3, 3)?;
    println!("ACC {:.4} ({} correct), mapping {:?}", acc.acc, acc.correct, acc.mapping);
    println!("purity {:.4}", purity(&pred, &truth, 3, 3)?);

    let gallery = [0b0000u64, 0b0001, 0b0011, 0b1111, 0b1110];
    let gallery_labels = [0, 0, 1, 1, 1];
    println!("ranking for 0000: {:?}", hamming_ranking(0, &gallery));
    let queries = [0b0000u64, 0b1111];
    let query_labels = [0, 1];
    let map = mean_average_precision(&queries, &query_labels, &gallery, &gallery_labels)?;
    let p2 = precision_at_n(&queries, &query_labels, &gallery, &gallery_labels, 2)?;
    let pr = precision_at_radius(&queries, &query_labels, &gallery, &gallery_labels, 1)?;
    println!("mAP {:.4}  P@2 {:.4}  P@r=1 {:.4} ({} empty)", map.map, p2, pr.precision, pr.empty);

    // Rows are datasets, columns candidate values.
    let grid = vec![vec![0.90, 0.95, 0.80], vec![0.50, 0.45, 0.60], vec![0.70, 0.72, 0.71]];
    println!("relative scores {:?}", relative_scores(&grid)?);
    println!("selected candidate {}", select_shared_hyperparameter(&grid)?);
    Ok(())
}
