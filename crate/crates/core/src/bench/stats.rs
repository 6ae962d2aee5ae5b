use serde::{Deserialize, Serialize};

use super::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); 0 for a single sample.
    pub sd: f64,
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

pub fn latency_stats(samples: &[f64]) -> Result<LatencyStats, BenchError> {
    if samples.is_empty() {
        return Err(BenchError::EmptySamples);
    }
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let sd = if n == 1 {
        0.0
    } else {
        let ss: f64 = samples.iter().map(|x| (x - mean).powi(2)).sum();
        (ss / (n - 1) as f64).sqrt()
    };
    let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let max = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(LatencyStats { mean, sd, min, max, n })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singleton() {
        let s = latency_stats(&[5.0]).unwrap();
        assert_eq!((s.mean, s.sd, s.min, s.max), (5.0, 0.0, 5.0, 5.0));
    }

    #[test]
    fn hand_computed() {
        let s = latency_stats(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((s.mean, s.sd, s.min, s.max), (2.0, 1.0, 1.0, 3.0));
    }

    #[test]
    fn empty_is_error() {
        assert!(matches!(latency_stats(&[]), Err(BenchError::EmptySamples)));
    }
}
