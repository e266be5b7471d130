//! Fixed-width histogram of `sigma_u Z_u` over `[-1, 1]`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{CfnError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub bin_left: f64,
    pub bin_right: f64,
    pub count: u64,
    pub frequency: f64,
}

/// Bins are half-open except the last, which includes `+1`.
pub fn histogram(samples: &[(i8, f64)], bins: usize) -> Result<Vec<HistogramBin>> {
    if bins < 2 {
        return Err(CfnError::Config(format!(
            "bins must be at least 2, got {bins}"
        )));
    }
    let width = 2.0 / bins as f64;
    let mut counts = vec![0u64; bins];
    for &(sigma, z) in samples {
        let x = (sigma as f64 * z).clamp(-1.0, 1.0);
        let i = (((x + 1.0) / width) as usize).min(bins - 1);
        counts[i] += 1;
    }
    let total = samples.len().max(1) as f64;
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistogramBin {
            bin_left: -1.0 + i as f64 * width,
            bin_right: if i + 1 == bins {
                1.0
            } else {
                -1.0 + (i + 1) as f64 * width
            },
            count,
            frequency: count as f64 / total,
        })
        .collect())
}

/// Writes the histogram as CSV with header `bin_left,bin_right,count,frequency`.
pub fn emit_histogram<W: Write>(samples: &[(i8, f64)], bins: usize, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for bin in histogram(samples, bins)? {
        w.serialize(bin)?;
    }
    w.flush().map_err(|e| CfnError::io("<csv>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_at_plus_one() {
        let h = histogram(&[(1, 1.0); 50], 10).unwrap();
        assert_eq!(h.iter().filter(|b| b.count > 0).count(), 1);
        assert_eq!(h[9].count, 50);
        assert_eq!(h[9].bin_right, 1.0);
    }

    #[test]
    fn sign_flips_into_unsigned_value() {
        let h = histogram(&[(-1, 1.0), (1, -1.0), (-1, -1.0)], 4).unwrap();
        assert_eq!(h[0].count, 2);
        assert_eq!(h[3].count, 1);
    }

    #[test]
    fn uniform_input_is_flat() {
        let n = 100_000;
        let xs: Vec<(i8, f64)> = (0..n)
            .map(|i| (1, -1.0 + 2.0 * (i as f64 + 0.5) / n as f64))
            .collect();
        let h = histogram(&xs, 20).unwrap();
        for b in &h {
            assert!((b.frequency - 0.05).abs() < 1e-3);
        }
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        emit_histogram(&[(1, 0.5)], 2, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "bin_left,bin_right,count,frequency\n-1.0,0.0,0,0.0\n0.0,1.0,1,1.0\n"
        );
        assert!(histogram(&[], 1).is_err());
    }
}
