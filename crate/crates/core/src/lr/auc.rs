//! Area under the ROC curve via the Mann-Whitney rank statistic.
//!
//! The statistic is accumulated as a doubled integer (each tied pair counts 1,
//! each won pair counts 2), so the result is one exact division and agrees
//! bit for bit with a brute-force pair count.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AucResult {
    pub auc: f64,
    /// Labels hold a single class; `auc` is reported as 0.5.
    pub degenerate: bool,
}

/// AUC of `scores` against binary `labels`; 0.5 for single-class input.
pub fn auc(scores: &[f64], labels: &[u8]) -> f64 {
    auc_checked(scores, labels).auc
}

pub fn auc_checked(scores: &[f64], labels: &[u8]) -> AucResult {
    assert_eq!(scores.len(), labels.len(), "scores and labels differ in length");
    let positives = labels.iter().filter(|&&y| y != 0).count() as u64;
    let negatives = labels.len() as u64 - positives;
    if positives == 0 || negatives == 0 {
        return AucResult {
            auc: 0.5,
            degenerate: true,
        };
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut doubled_u: u128 = 0;
    let mut negatives_below: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let mut j = i;
        let (mut pos, mut neg) = (0u64, 0u64);
        while j < order.len() && scores[order[j]].total_cmp(&s).is_eq() {
            if labels[order[j]] != 0 {
                pos += 1;
            } else {
                neg += 1;
            }
            j += 1;
        }
        doubled_u += u128::from(pos) * u128::from(2 * negatives_below + neg);
        negatives_below += neg;
        i = j;
    }
    let pairs = 2 * u128::from(positives) * u128::from(negatives);
    AucResult {
        auc: doubled_u as f64 / pairs as f64,
        degenerate: false,
    }
}
