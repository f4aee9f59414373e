//! Brute-force all-pairs AUC.

/// Fraction of (faulty, healthy) pairs ranked correctly, ties counting half.
pub fn auc_all_pairs(scores: &[f64], truth: &[u8]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        if truth[i] != 1 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if truth[j] != 0 {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Confusion counts `(tp, fp, tn, fn)` by direct enumeration.
pub fn confusion(labels: &[u8], truth: &[u8]) -> (usize, usize, usize, usize) {
    let mut c = (0, 0, 0, 0);
    for (&l, &t) in labels.iter().zip(truth) {
        match (l, t) {
            (1, 1) => c.0 += 1,
            (1, 0) => c.1 += 1,
            (0, 0) => c.2 += 1,
            _ => c.3 += 1,
        }
    }
    c
}

/// Random scores with frequent ties and both classes present.
pub fn random_auc_instance<R: rand::Rng>(rng: &mut R) -> (Vec<f64>, Vec<u8>) {
    let n = rng.random_range(2..=200);
    let levels = rng.random_range(1..=20);
    let scores = (0..n)
        .map(|_| rng.random_range(0..levels) as f64 * 0.25)
        .collect();
    let mut truth: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
    truth[0] = 0;
    truth[1] = 1;
    (scores, truth)
}
