//! Orthonormal DCT-II, the cepstral step shared by MFCC and GFCC.

/// First `n_keep` coefficients of the orthonormal DCT-II of `v`:
/// c[k] = s(k)·Σ_n v[n]·cos(πk(2n+1)/(2N)), s(0) = √(1/N), s(k>0) = √(2/N).
///
/// # Panics
/// If `v` is empty or `n_keep` is not in `1..=v.len()`.
pub fn dct_ii(v: &[f64], n_keep: usize) -> Vec<f64> {
    let n = v.len();
    assert!(n > 0 && (1..=n).contains(&n_keep), "dct_ii: bad n_keep {n_keep} for length {n}");
    let norm0 = (1.0 / n as f64).sqrt();
    let norm = (2.0 / n as f64).sqrt();
    let step = std::f64::consts::PI / (2 * n) as f64;
    (0..n_keep)
        .map(|k| {
            let sum: f64 =
                v.iter().enumerate().map(|(i, &x)| x * ((k * (2 * i + 1)) as f64 * step).cos()).sum();
            sum * if k == 0 { norm0 } else { norm }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Inverse of the orthonormal DCT-II (a DCT-III), used as a test oracle.
    fn inverse(c: &[f64]) -> Vec<f64> {
        let n = c.len();
        let norm0 = (1.0 / n as f64).sqrt();
        let norm = (2.0 / n as f64).sqrt();
        let step = std::f64::consts::PI / (2 * n) as f64;
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|k| {
                        let s = if k == 0 { norm0 } else { norm };
                        s * c[k] * ((k * (2 * i + 1)) as f64 * step).cos()
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn constant_vector_collapses_to_dc() {
        let c = dct_ii(&[1.0; 8], 8);
        assert!((c[0] - 8f64.sqrt()).abs() < 1e-12);
        for (k, &v) in c.iter().enumerate().skip(1) {
            assert!(v.abs() < 1e-12, "coefficient {k} = {v}");
        }
    }

    #[test]
    fn inverse_reconstructs() {
        let v: Vec<f64> = (0..17).map(|i| ((i * 31 + 7) % 13) as f64 - 6.0).collect();
        let back = inverse(&dct_ii(&v, v.len()));
        for (a, b) in v.iter().zip(&back) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn linear() {
        let a: Vec<f64> = (0..12).map(|i| (i as f64 * 0.7).sin()).collect();
        let b: Vec<f64> = (0..12).map(|i| (i as f64 * 1.3).cos()).collect();
        let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let ca = dct_ii(&a, 12);
        let cb = dct_ii(&b, 12);
        let cs = dct_ii(&sum, 12);
        for k in 0..12 {
            assert!((cs[k] - ca[k] - cb[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn keeps_prefix() {
        let v: Vec<f64> = (0..44).map(|i| (i as f64).sqrt()).collect();
        let full = dct_ii(&v, 44);
        let head = dct_ii(&v, 16);
        assert_eq!(head.len(), 16);
        assert_eq!(&full[..16], &head[..]);
    }
}
