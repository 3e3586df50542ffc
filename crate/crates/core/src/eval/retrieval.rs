//! Hamming-ranking retrieval metrics. Relevance means "same class label".
//! Gallery items at equal distance are ranked by ascending gallery index.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub fn hamming_distance(a: u64, b: u64) -> u32 {
    (a ^ b).count_ones()
}

fn check(q_codes: &[u64], q_labels: &[usize], g_codes: &[u64], g_labels: &[usize]) -> Result<()> {
    if q_codes.len() != q_labels.len() || g_codes.len() != g_labels.len() {
        return Err(Error::Shape("codes and labels differ in length".into()));
    }
    if q_codes.is_empty() || g_codes.is_empty() {
        return Err(Error::InvalidInput("query and gallery must be nonempty".into()));
    }
    Ok(())
}

/// Gallery indices ordered by distance to `query`, ties by index.
pub fn hamming_ranking(query: u64, gallery: &[u64]) -> Vec<usize> {
    // Counting sort over distances 0..=64 keeps index order inside each bucket.
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); 65];
    for (i, &g) in gallery.iter().enumerate() {
        buckets[hamming_distance(query, g) as usize].push(i);
    }
    buckets.into_iter().flatten().collect()
}

/// Average precision of one ranked relevance list; `None` if nothing is relevant.
pub fn average_precision(relevant_by_rank: &[bool]) -> Option<f64> {
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (k, &rel) in relevant_by_rank.iter().enumerate() {
        if rel {
            hits += 1;
            sum += hits as f64 / (k + 1) as f64;
        }
    }
    (hits > 0).then(|| sum / hits as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapResult {
    pub map: f64,
    /// Queries without any relevant gallery item; they are left out of the mean.
    pub excluded: usize,
}

pub fn mean_average_precision(
    q_codes: &[u64],
    q_labels: &[usize],
    g_codes: &[u64],
    g_labels: &[usize],
) -> Result<MapResult> {
    check(q_codes, q_labels, g_codes, g_labels)?;
    let mut total = 0.0;
    let mut counted = 0usize;
    for (&q, &ql) in q_codes.iter().zip(q_labels) {
        let rel: Vec<bool> = hamming_ranking(q, g_codes)
            .into_iter()
            .map(|i| g_labels[i] == ql)
            .collect();
        if let Some(ap) = average_precision(&rel) {
            total += ap;
            counted += 1;
        }
    }
    let excluded = q_codes.len() - counted;
    if excluded > 0 {
        log::warn!("{excluded} query(ies) have no relevant gallery item and were excluded from mAP");
    }
    if counted == 0 {
        return Err(Error::InvalidInput("no query has a relevant gallery item".into()));
    }
    Ok(MapResult {
        map: total / counted as f64,
        excluded,
    })
}

pub fn precision_at_n(
    q_codes: &[u64],
    q_labels: &[usize],
    g_codes: &[u64],
    g_labels: &[usize],
    n: usize,
) -> Result<f64> {
    check(q_codes, q_labels, g_codes, g_labels)?;
    if n == 0 || g_codes.len() < n {
        return Err(Error::InvalidConfig(format!(
            "precision@N needs 1 <= N <= gallery size ({}), got N = {n}",
            g_codes.len()
        )));
    }
    let mut total = 0.0;
    for (&q, &ql) in q_codes.iter().zip(q_labels) {
        let hits = hamming_ranking(q, g_codes)
            .into_iter()
            .take(n)
            .filter(|&i| g_labels[i] == ql)
            .count();
        total += hits as f64 / n as f64;
    }
    Ok(total / q_codes.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusResult {
    pub precision: f64,
    /// Queries that retrieved nothing; each contributed precision 0.
    pub empty: usize,
}

pub fn precision_at_radius(
    q_codes: &[u64],
    q_labels: &[usize],
    g_codes: &[u64],
    g_labels: &[usize],
    r: u32,
) -> Result<RadiusResult> {
    check(q_codes, q_labels, g_codes, g_labels)?;
    let mut total = 0.0;
    let mut empty = 0;
    for (&q, &ql) in q_codes.iter().zip(q_labels) {
        let (mut got, mut rel) = (0usize, 0usize);
        for (&g, &gl) in g_codes.iter().zip(g_labels) {
            if hamming_distance(q, g) <= r {
                got += 1;
                rel += usize::from(gl == ql);
            }
        }
        if got == 0 {
            empty += 1;
        } else {
            total += rel as f64 / got as f64;
        }
    }
    Ok(RadiusResult {
        precision: total / q_codes.len() as f64,
        empty,
    })
}

/// Splits point indices into `per_class` random queries from every class and
/// a gallery made of everything else. Both lists are sorted.
pub fn stratified_split(labels: &[usize], per_class: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if per_class == 0 {
        return Err(Error::InvalidConfig("queries per class must be at least 1".into()));
    }
    let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut queries = Vec::new();
    for (c, idx) in by_class.iter_mut().enumerate() {
        if idx.is_empty() {
            continue;
        }
        if idx.len() <= per_class {
            return Err(Error::InvalidConfig(format!(
                "class {c} has {} points, cannot draw {per_class} queries and keep a gallery",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        queries.extend_from_slice(&idx[..per_class]);
    }
    queries.sort_unstable();
    let mut is_query = vec![false; labels.len()];
    for &q in &queries {
        is_query[q] = true;
    }
    let gallery = (0..labels.len()).filter(|&i| !is_query[i]).collect();
    Ok((queries, gallery))
}
