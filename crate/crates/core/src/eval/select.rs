use crate::error::{Error, Result};

/// Picks one hyper-parameter for several datasets.
///
/// `acc_grid[dataset][candidate]` holds accuracies. Each candidate is scored by
/// the sum over datasets of its accuracy relative to that dataset's best
/// candidate; the highest score wins and ties go to the smallest index.
pub fn select_shared_hyperparameter(acc_grid: &[Vec<f64>]) -> Result<usize> {
    let scores = relative_scores(acc_grid)?;
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Per-candidate scores used by [`select_shared_hyperparameter`].
pub fn relative_scores(acc_grid: &[Vec<f64>]) -> Result<Vec<f64>> {
    let cands = acc_grid
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::InvalidInput("empty accuracy grid".into()))?;
    if cands == 0 || acc_grid.iter().any(|r| r.len() != cands) {
        return Err(Error::Shape("accuracy grid must be rectangular and nonempty".into()));
    }
    let mut scores = vec![0.0; cands];
    for (d, row) in acc_grid.iter().enumerate() {
        if let Some(v) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidInput(format!("accuracy {v} outside [0, 1]")));
        }
        let best = row.iter().copied().fold(0.0, f64::max);
        if best <= 0.0 {
            return Err(Error::InvalidInput(format!("dataset {d} has best accuracy 0")));
        }
        for (s, v) in scores.iter_mut().zip(row) {
            *s += v / best;
        }
    }
    Ok(scores)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(select_shared_hyperparameter(&[vec![0.2, 0.7, 0.5]]).unwrap(), 1);
        assert_eq!(select_shared_hyperparameter(&[vec![0.9, 0.8], vec![0.4, 0.6]]).unwrap(), 1);
        assert_eq!(select_shared_hyperparameter(&[vec![0.5, 0.5]]).unwrap(), 0);
        assert_eq!(
            select_shared_hyperparameter(&[vec![0.3, 0.9, 0.1], vec![0.2, 0.8, 0.7]]).unwrap(),
            1
        );
    }

    #[test]
    fn errors() {
        assert!(matches!(select_shared_hyperparameter(&[vec![0.0, 0.0]]), Err(Error::InvalidInput(_))));
        assert!(select_shared_hyperparameter(&[]).is_err());
        assert!(select_shared_hyperparameter(&[vec![0.5], vec![0.5, 0.1]]).is_err());
        assert!(select_shared_hyperparameter(&[vec![1.5]]).is_err());
    }
}
