//! Seeds, error bars and crossing estimates shared by the Monte Carlo drivers.

use serde::{Deserialize, Serialize};

/// Mixes a master seed with stream labels (splitmix64 finalizer per label).
pub fn derive_seed(master: u64, labels: &[u64]) -> u64 {
    let mut z = master;
    for &l in labels {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15 ^ l.wrapping_mul(0xd1b5_4a32_d192_ed03));
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
    }
    z
}

/// Sample mean and standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Delete-one jackknife of `f(column means)`. `columns[c][i]` is sample `i` of quantity `c`.
pub fn jackknife(columns: &[Vec<f64>], f: impl Fn(&[f64]) -> f64) -> (f64, f64) {
    let n = columns.first().map_or(0, Vec::len);
    let sums: Vec<f64> = columns.iter().map(|c| c.iter().sum()).collect();
    let full: Vec<f64> = sums.iter().map(|s| s / n as f64).collect();
    let estimate = f(&full);
    if n < 2 {
        return (estimate, 0.0);
    }
    let leave_out: Vec<f64> = (0..n)
        .map(|i| {
            let m: Vec<f64> = columns.iter().zip(&sums).map(|(c, s)| (s - c[i]) / (n - 1) as f64).collect();
            f(&m)
        })
        .collect();
    let bar = leave_out.iter().sum::<f64>() / n as f64;
    let var = leave_out.iter().map(|x| (x - bar).powi(2)).sum::<f64>() * (n - 1) as f64 / n as f64;
    (estimate, var.sqrt())
}

/// First sign change of `b - a` along the grid, linearly interpolated.
pub fn crossing(xs: &[f64], a: &[f64], b: &[f64]) -> Option<f64> {
    let d: Vec<f64> = a.iter().zip(b).map(|(a, b)| b - a).collect();
    for i in 1..xs.len().min(d.len()) {
        if d[i - 1] == 0.0 {
            return Some(xs[i - 1]);
        }
        if d[i - 1].signum() != d[i].signum() {
            return Some(xs[i - 1] + (xs[i] - xs[i - 1]) * d[i - 1] / (d[i - 1] - d[i]));
        }
    }
    None
}

/// Number of blocks a single time series is cut into for error estimates.
pub const N_BINS: usize = 20;

/// Overall mean and the means of `n_bins` equal consecutive blocks (the tail
/// that does not fill a block is dropped from the blocks only).
pub fn block_means<const K: usize>(series: &[[f64; K]], n_bins: usize) -> ([f64; K], Vec<[f64; K]>) {
    let mut total = [0.0; K];
    for row in series {
        for (t, v) in total.iter_mut().zip(row) {
            *t += v;
        }
    }
    let n = series.len().max(1) as f64;
    total.iter_mut().for_each(|t| *t /= n);
    let per = series.len() / n_bins.max(1);
    let bins = if per == 0 {
        series.to_vec()
    } else {
        series
            .chunks_exact(per)
            .take(n_bins)
            .map(|chunk| {
                let mut m = [0.0; K];
                for row in chunk {
                    for (t, v) in m.iter_mut().zip(row) {
                        *t += v / per as f64;
                    }
                }
                m
            })
            .collect()
    };
    (total, bins)
}

/// Transposes rows of observables into per-observable columns.
pub fn columns<const K: usize>(rows: &[[f64; K]]) -> Vec<Vec<f64>> {
    (0..K).map(|k| rows.iter().map(|r| r[k]).collect()).collect()
}

/// One line of the Monte Carlo results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McRow {
    pub model: String,
    #[serde(rename = "L")]
    pub l: usize,
    pub p_or_alpha: f64,
    pub beta: f64,
    pub observable: String,
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: usize,
    pub seed: u64,
}
