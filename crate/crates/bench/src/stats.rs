use serde::Serialize;

/// Order statistics of a timing sample, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub median: f64,
    pub p95: f64,
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    /// Nearest-rank percentiles; sample standard deviation.
    pub fn of(samples: &[f64]) -> Summary {
        assert!(!samples.is_empty(), "no timings");
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        let rank = |q: f64| s[((q * s.len() as f64).ceil() as usize).clamp(1, s.len()) - 1];
        let n = s.len() as f64;
        let mean = s.iter().sum::<f64>() / n;
        let var = if s.len() > 1 {
            s.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Summary {
            median: rank(0.5),
            p95: rank(0.95),
            mean,
            std: var.sqrt(),
        }
    }
}
