//! ROC curve and rank-based AUC.

use alloc::vec::Vec;

use super::AdversarialError;

/// Probability that a random positive outscores a random negative, ties
/// counted one half (Mann-Whitney U over midranks).
pub fn roc_auc(labels: &[bool], scores: &[f64]) -> Result<f64, AdversarialError> {
    if labels.len() != scores.len() {
        return Err(AdversarialError::Shape("labels and scores differ in length"));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(AdversarialError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based midrank of the tie group
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            if labels[k] {
                rank_sum += mid;
            }
        }
        i = j + 1;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// ROC points `(fpr, tpr)` from the highest threshold down, starting at
/// `(0, 0)` and ending at `(1, 1)`.
pub fn roc_curve(labels: &[bool], scores: &[f64]) -> Result<Vec<(f64, f64)>, AdversarialError> {
    if labels.len() != scores.len() {
        return Err(AdversarialError::Shape("labels and scores differ in length"));
    }
    let n_pos = labels.iter().filter(|&&l| l).count() as f64;
    let n_neg = labels.len() as f64 - n_pos;
    if n_pos == 0.0 || n_neg == 0.0 {
        return Err(AdversarialError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut pts = alloc::vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0.0, 0.0);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            i += 1;
        }
        pts.push((fp / n_neg, tp / n_pos));
    }
    Ok(pts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auc_examples() {
        assert_eq!(roc_auc(&[true, true, false, false], &[0.9, 0.4, 0.6, 0.1]).unwrap(), 0.75);
        assert_eq!(roc_auc(&[true, false], &[2.0, 1.0]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[true, false, true], &[1.0, 1.0, 1.0]).unwrap(), 0.5);
        assert!(roc_auc(&[true, true], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn curve_area_matches_auc() {
        let labels = [true, false, true, false, true, false, false];
        let scores = [0.8, 0.8, 0.3, 0.1, 0.9, 0.5, 0.3];
        let pts = roc_curve(&labels, &scores).unwrap();
        assert_eq!(pts.last(), Some(&(1.0, 1.0)));
        let area: f64 = pts.windows(2).map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0).sum();
        assert!((area - roc_auc(&labels, &scores).unwrap()).abs() < 1e-12);
    }
}
