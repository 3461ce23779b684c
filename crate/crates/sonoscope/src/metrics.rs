//! Evaluation metrics: confusion matrices, accuracy/precision/recall/F1,
//! multiclass MCC, the log Fisher discriminant ratio, and cross-seed
//! aggregation.

use crate::error::{Error, Result};

/// K×K confusion counts, rows = true class, columns = predicted class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn zeros(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::EmptyMatrix);
        }
        Ok(ConfusionMatrix { k, counts: vec![0; k * k] })
    }

    pub fn from_labels(y_true: &[usize], y_pred: &[usize], k: usize) -> Result<Self> {
        if y_true.len() != y_pred.len() {
            return Err(Error::Shape(format!(
                "label lengths differ: {} true vs {} predicted",
                y_true.len(),
                y_pred.len()
            )));
        }
        let mut cm = ConfusionMatrix::zeros(k)?;
        for (&t, &p) in y_true.iter().zip(y_pred) {
            cm.record(t, p)?;
        }
        Ok(cm)
    }

    pub fn from_counts(k: usize, counts: Vec<u64>) -> Result<Self> {
        if k == 0 || counts.len() != k * k {
            return Err(Error::Shape(format!(
                "confusion counts: got {} entries for k={k}",
                counts.len()
            )));
        }
        Ok(ConfusionMatrix { k, counts })
    }

    pub fn record(&mut self, y_true: usize, y_pred: usize) -> Result<()> {
        if y_true >= self.k {
            return Err(Error::Label { label: y_true, classes: self.k });
        }
        if y_pred >= self.k {
            return Err(Error::Label { label: y_pred, classes: self.k });
        }
        self.counts[y_true * self.k + y_pred] += 1;
        Ok(())
    }

    pub fn classes(&self) -> usize {
        self.k
    }

    pub fn count(&self, y_true: usize, y_pred: usize) -> u64 {
        self.counts[y_true * self.k + y_pred]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k).map(|i| self.counts[i * self.k + i]).sum()
    }

    /// Row sums = per-class supports.
    pub fn row_sums(&self) -> Vec<u64> {
        (0..self.k).map(|i| self.counts[i * self.k..(i + 1) * self.k].iter().sum()).collect()
    }

    /// Column sums = per-class prediction counts.
    pub fn col_sums(&self) -> Vec<u64> {
        let mut sums = vec![0u64; self.k];
        for row in self.counts.chunks_exact(self.k) {
            for (s, &c) in sums.iter_mut().zip(row) {
                *s += c;
            }
        }
        sums
    }

    /// Rows divided by their sums; all-zero rows stay zero.
    pub fn row_normalized(&self) -> Vec<f64> {
        let sums = self.row_sums();
        let mut out = vec![0.0; self.k * self.k];
        for i in 0..self.k {
            if sums[i] == 0 {
                continue;
            }
            for j in 0..self.k {
                out[i * self.k + j] = self.counts[i * self.k + j] as f64 / sums[i] as f64;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub mcc: f64,
    pub per_class: Vec<ClassMetrics>,
}

/// Table 1 metrics from a confusion matrix. Averages are support-weighted;
/// zero denominators follow the 0-convention; multiclass MCC uses the
/// Gorodkin formula with degenerate factors mapped to 0.
pub fn summary(cm: &ConfusionMatrix) -> Result<MetricsReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::EmptyMatrix);
    }
    let k = cm.classes();
    let rows = cm.row_sums();
    let cols = cm.col_sums();

    let mut per_class = Vec::with_capacity(k);
    let (mut w_precision, mut w_recall, mut w_f1) = (0.0, 0.0, 0.0);
    for c in 0..k {
        let tp = cm.count(c, c) as f64;
        let precision = if cols[c] == 0 { 0.0 } else { tp / cols[c] as f64 };
        let recall = if rows[c] == 0 { 0.0 } else { tp / rows[c] as f64 };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        let weight = rows[c] as f64 / total as f64;
        w_precision += weight * precision;
        w_recall += weight * recall;
        w_f1 += weight * f1;
        per_class.push(ClassMetrics { precision, recall, f1, support: rows[c] });
    }

    let s = total as f64;
    let c_trace = cm.trace() as f64;
    let dot: f64 = rows.iter().zip(&cols).map(|(&t, &p)| t as f64 * p as f64).sum();
    let sum_p2: f64 = cols.iter().map(|&p| (p as f64).powi(2)).sum();
    let sum_t2: f64 = rows.iter().map(|&t| (t as f64).powi(2)).sum();
    let denom2 = (s * s - sum_p2) * (s * s - sum_t2);
    let mcc = if denom2 <= 0.0 { 0.0 } else { (c_trace * s - dot) / denom2.sqrt() };

    Ok(MetricsReport {
        accuracy: c_trace / s,
        precision: w_precision,
        recall: w_recall,
        f1: w_f1,
        mcc,
        per_class,
    })
}

/// In-place Cholesky factorization of a symmetric positive definite matrix
/// (lower triangle), then two triangular solves per right-hand side.
struct Cholesky {
    dim: usize,
    l: Vec<f64>,
}

impl Cholesky {
    fn new(mut a: Vec<f64>, dim: usize) -> Result<Self> {
        for j in 0..dim {
            for i in j..dim {
                let mut sum = a[i * dim + j];
                for p in 0..j {
                    sum -= a[i * dim + p] * a[j * dim + p];
                }
                if i == j {
                    if sum <= 0.0 {
                        return Err(Error::Degenerate(format!(
                            "scatter matrix not positive definite at pivot {j}"
                        )));
                    }
                    a[i * dim + j] = sum.sqrt();
                } else {
                    a[i * dim + j] = sum / a[j * dim + j];
                }
            }
        }
        Ok(Cholesky { dim, l: a })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut y = b.to_vec();
        for i in 0..n {
            for j in 0..i {
                y[i] -= self.l[i * n + j] * y[j];
            }
            y[i] /= self.l[i * n + i];
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                y[i] -= self.l[j * n + i] * y[j];
            }
            y[i] /= self.l[i * n + i];
        }
        y
    }
}

/// log(1 + trace(S_W^+ S_B)) over feature vectors grouped by label, with the
/// pseudo-inverse realized as a ridge solve (lambda = 1e-6 * tr(S_W) / dim).
pub fn log_fdr(features: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    if features.is_empty() {
        return Err(Error::EmptyInput("log_fdr features"));
    }
    if features.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} feature vectors vs {} labels",
            features.len(),
            labels.len()
        )));
    }
    let dim = features[0].len();
    if dim == 0 || features.iter().any(|f| f.len() != dim) {
        return Err(Error::Shape("feature vectors must share a positive length".into()));
    }
    let k = labels.iter().max().unwrap() + 1;
    let mut class_n = vec![0usize; k];
    for &l in labels {
        class_n[l] += 1;
    }
    let populated = class_n.iter().filter(|&&n| n > 0).count();
    if populated < 2 {
        return Err(Error::Degenerate("log_fdr needs at least 2 classes".into()));
    }
    if class_n.contains(&1) {
        return Err(Error::Degenerate("every class needs at least 2 samples".into()));
    }

    let n_total = features.len() as f64;
    let mut grand = vec![0.0; dim];
    let mut class_means = vec![vec![0.0; dim]; k];
    for (f, &l) in features.iter().zip(labels) {
        for d in 0..dim {
            class_means[l][d] += f[d];
            grand[d] += f[d];
        }
    }
    for g in grand.iter_mut() {
        *g /= n_total;
    }
    for (mean, &n) in class_means.iter_mut().zip(&class_n) {
        if n > 0 {
            for v in mean.iter_mut() {
                *v /= n as f64;
            }
        }
    }

    // S_W = sum of within-class outer products.
    let mut s_w = vec![0.0; dim * dim];
    for (f, &l) in features.iter().zip(labels) {
        let mean = &class_means[l];
        for i in 0..dim {
            let di = f[i] - mean[i];
            for j in i..dim {
                s_w[i * dim + j] += di * (f[j] - mean[j]);
            }
        }
    }
    for i in 0..dim {
        for j in 0..i {
            s_w[i * dim + j] = s_w[j * dim + i];
        }
    }
    let tr_w: f64 = (0..dim).map(|i| s_w[i * dim + i]).sum();
    let mut lambda = 1e-6 * tr_w / dim as f64;
    if lambda <= 0.0 {
        lambda = 1e-12;
    }
    for i in 0..dim {
        s_w[i * dim + i] += lambda;
    }
    let chol = Cholesky::new(s_w, dim)?;

    // trace(S_W^+ S_B) = sum_k n_k * u_k' S_W^+ u_k with u_k = m_k - m.
    let mut trace = 0.0;
    for (mean, &n) in class_means.iter().zip(&class_n) {
        if n == 0 {
            continue;
        }
        let u: Vec<f64> = mean.iter().zip(&grand).map(|(m, g)| m - g).collect();
        let x = chol.solve(&u);
        let quad: f64 = u.iter().zip(&x).map(|(a, b)| a * b).sum();
        trace += n as f64 * quad;
    }
    Ok((1.0 + trace.max(0.0)).ln())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

fn mean_std(values: &[f64]) -> MeanStd {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    MeanStd { mean, std }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateReport {
    pub runs: usize,
    pub accuracy: MeanStd,
    pub precision: MeanStd,
    pub recall: MeanStd,
    pub f1: MeanStd,
    pub mcc: MeanStd,
}

/// Mean and sample standard deviation (n−1 denominator, σ = 0 for n = 1)
/// of each Table 1 metric across runs.
pub fn aggregate(reports: &[MetricsReport]) -> Result<AggregateReport> {
    if reports.is_empty() {
        return Err(Error::EmptyInput("aggregate reports"));
    }
    let pick = |f: fn(&MetricsReport) -> f64| mean_std(&reports.iter().map(f).collect::<Vec<_>>());
    Ok(AggregateReport {
        runs: reports.len(),
        accuracy: pick(|r| r.accuracy),
        precision: pick(|r| r.precision),
        recall: pick(|r| r.recall),
        f1: pick(|r| r.f1),
        mcc: pick(|r| r.mcc),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hand_counted_confusion() {
        let cm = ConfusionMatrix::from_labels(&[0, 0, 1, 1], &[0, 1, 1, 1], 2).unwrap();
        assert_eq!(cm.counts(), [1, 1, 0, 2]);
        assert_eq!(cm.row_sums(), vec![2, 2]);
        assert_eq!(cm.total(), 4);
        assert!(ConfusionMatrix::from_labels(&[0, 2], &[0, 0], 2).is_err());
        assert!(ConfusionMatrix::from_labels(&[0], &[0, 1], 2).is_err());
    }

    #[test]
    fn perfect_predictions_are_diagonal() {
        let y = [0, 1, 2, 3, 2, 1];
        let cm = ConfusionMatrix::from_labels(&y, &y, 4).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert_eq!(cm.count(i, j), 0);
                }
            }
        }
        let rep = summary(&cm).unwrap();
        assert_eq!(rep.accuracy, 1.0);
        assert!((rep.precision - 1.0).abs() < 1e-12);
        assert!((rep.recall - 1.0).abs() < 1e-12);
        assert!((rep.f1 - 1.0).abs() < 1e-12);
        assert!((rep.mcc - 1.0).abs() < 1e-12);
    }

    #[test]
    fn summary_hand_values() {
        let cm = ConfusionMatrix::from_counts(2, vec![1, 1, 0, 2]).unwrap();
        let rep = summary(&cm).unwrap();
        assert!((rep.accuracy - 0.75).abs() < 1e-12);
        // (c*s - dot) / sqrt((s^2 - sum p^2)(s^2 - sum t^2)) = 4 / sqrt(48)
        assert!((rep.mcc - 4.0 / 48f64.sqrt()).abs() < 1e-12);
        assert!((rep.mcc - 0.577).abs() < 1e-3);
        assert!((rep.recall - rep.accuracy).abs() < 1e-12);
        assert!((rep.precision - (0.5 + 0.5 * 2.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn single_predicted_class_gives_zero_mcc() {
        let cm = ConfusionMatrix::from_counts(2, vec![2, 0, 2, 0]).unwrap();
        let rep = summary(&cm).unwrap();
        assert_eq!(rep.mcc, 0.0);
        assert!((rep.accuracy - 0.5).abs() < 1e-12);
    }

    #[test]
    fn empty_matrix_rejected() {
        let cm = ConfusionMatrix::zeros(3).unwrap();
        assert!(matches!(summary(&cm), Err(Error::EmptyMatrix)));
    }

    #[test]
    fn row_normalization() {
        let cm = ConfusionMatrix::from_counts(2, vec![1, 3, 0, 0]).unwrap();
        let norm = cm.row_normalized();
        assert!((norm[0] - 0.25).abs() < 1e-12);
        assert!((norm[1] - 0.75).abs() < 1e-12);
        assert_eq!(&norm[2..], [0.0, 0.0]);
    }

    fn random_cm(rng: &mut ChaCha8Rng) -> ConfusionMatrix {
        let k = rng.gen_range(2..6usize);
        loop {
            let counts: Vec<u64> = (0..k * k).map(|_| rng.gen_range(0..20)).collect();
            if counts.iter().sum::<u64>() > 0 {
                return ConfusionMatrix::from_counts(k, counts).unwrap();
            }
        }
    }

    #[test]
    fn weighted_recall_is_accuracy_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..1000 {
            let cm = random_cm(&mut rng);
            let rep = summary(&cm).unwrap();
            assert!((rep.recall - rep.accuracy).abs() < 1e-12);
            assert!((-1.0..=1.0).contains(&rep.mcc));
        }
    }

    #[test]
    fn summary_invariant_under_class_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..100 {
            let cm = random_cm(&mut rng);
            let k = cm.classes();
            let mut perm: Vec<usize> = (0..k).collect();
            for i in (1..k).rev() {
                perm.swap(i, rng.gen_range(0..=i));
            }
            let mut permuted = vec![0u64; k * k];
            for i in 0..k {
                for j in 0..k {
                    permuted[perm[i] * k + perm[j]] = cm.count(i, j);
                }
            }
            let a = summary(&cm).unwrap();
            let b = summary(&ConfusionMatrix::from_counts(k, permuted).unwrap()).unwrap();
            assert!((a.accuracy - b.accuracy).abs() < 1e-12);
            assert!((a.precision - b.precision).abs() < 1e-12);
            assert!((a.f1 - b.f1).abs() < 1e-12);
            assert!((a.mcc - b.mcc).abs() < 1e-12);
        }
    }

    fn cloud(center: &[f64], spread: f64, n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| {
                center.iter().map(|c| c + spread * rng.gen_range(-1.0..1.0)).collect::<Vec<_>>()
            })
            .collect()
    }

    #[test]
    fn fdr_grows_with_separation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut prev = -1.0;
        for sep in [1.0, 4.0, 16.0] {
            let mut feats = cloud(&[0.0, 0.0], 0.1, 20, &mut rng);
            feats.extend(cloud(&[sep, 0.0], 0.1, 20, &mut rng));
            let labels: Vec<usize> = (0..40).map(|i| i / 20).collect();
            let score = log_fdr(&feats, &labels).unwrap();
            assert!(score > prev, "sep {sep}: {score} <= {prev}");
            assert!(score >= 0.0);
            prev = score;
        }
    }

    #[test]
    fn fdr_near_zero_for_identical_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = cloud(&[1.0, -1.0, 0.5], 1.0, 200, &mut rng);
        let b = cloud(&[1.0, -1.0, 0.5], 1.0, 200, &mut rng);
        let feats: Vec<Vec<f64>> = a.into_iter().chain(b).collect();
        let labels: Vec<usize> = (0..400).map(|i| i / 200).collect();
        let score = log_fdr(&feats, &labels).unwrap();
        assert!(score < 0.05, "score {score}");
    }

    #[test]
    fn fdr_invariant_under_invertible_linear_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let dim = 6;
        let mut feats = Vec::new();
        let mut labels = Vec::new();
        for k in 0..3usize {
            let center: Vec<f64> = (0..dim).map(|d| (k * d) as f64 * 0.3).collect();
            feats.extend(cloud(&center, 0.5, 15, &mut rng));
            labels.extend(std::iter::repeat_n(k, 15));
        }
        let base = log_fdr(&feats, &labels).unwrap();

        // Identity + small random perturbation is invertible with high probability.
        let mut map = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                map[i * dim + j] = if i == j { 1.0 } else { 0.0 } + 0.2 * rng.gen_range(-1.0..1.0);
            }
        }
        let mapped: Vec<Vec<f64>> = feats
            .iter()
            .map(|f| {
                (0..dim)
                    .map(|i| (0..dim).map(|j| map[i * dim + j] * f[j]).sum::<f64>())
                    .collect()
            })
            .collect();
        let transformed = log_fdr(&mapped, &labels).unwrap();
        assert!((base - transformed).abs() < 1e-6, "{base} vs {transformed}");
    }

    #[test]
    fn fdr_degenerate_inputs() {
        let feats = vec![vec![0.0, 1.0]; 6];
        assert!(matches!(log_fdr(&feats, &[0; 6]), Err(Error::Degenerate(_))));
        assert!(matches!(
            log_fdr(&feats, &[0, 0, 0, 0, 0, 1]),
            Err(Error::Degenerate(_))
        ));
        assert!(log_fdr(&[], &[]).is_err());
    }

    #[test]
    fn aggregate_hand_values() {
        let rep = |acc: f64| MetricsReport {
            accuracy: acc,
            precision: acc,
            recall: acc,
            f1: acc,
            mcc: acc,
            per_class: vec![],
        };
        let single = aggregate(&[rep(0.8)]).unwrap();
        assert_eq!(single.accuracy.mean, 0.8);
        assert_eq!(single.accuracy.std, 0.0);

        let two = aggregate(&[rep(0.6), rep(0.7)]).unwrap();
        assert!((two.accuracy.mean - 0.65).abs() < 1e-12);
        assert!((two.accuracy.std - 0.0707).abs() < 1e-4);

        let same = aggregate(&[rep(0.5), rep(0.5), rep(0.5)]).unwrap();
        assert_eq!(same.accuracy.std, 0.0);
        assert!(aggregate(&[]).is_err());
    }

    proptest! {
        #[test]
        fn mcc_bounded_and_diagonal_is_one(counts in proptest::collection::vec(0u64..30, 16)) {
            let total: u64 = counts.iter().sum();
            prop_assume!(total > 0);
            let cm = ConfusionMatrix::from_counts(4, counts).unwrap();
            let rep = summary(&cm).unwrap();
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&rep.mcc));
        }

        #[test]
        fn diagonal_mcc_is_one(diag in proptest::collection::vec(1u64..30, 4)) {
            let mut counts = vec![0u64; 16];
            for (i, &d) in diag.iter().enumerate() {
                counts[i * 4 + i] = d;
            }
            let rep = summary(&ConfusionMatrix::from_counts(4, counts).unwrap()).unwrap();
            prop_assert!((rep.mcc - 1.0).abs() < 1e-12);
        }
    }
}
