//! Dense LU factorization with partial pivoting.

pub(crate) struct Lu {
    n: usize,
    // row-major packed L (unit diagonal, below) and U (on/above diagonal)
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl Lu {
    /// Factors the row-major `n x n` matrix `a`; `None` if it is singular.
    pub(crate) fn factor(n: usize, mut a: Vec<f64>) -> Option<Lu> {
        assert_eq!(a.len(), n * n);
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let pivot = (k..n)
                .max_by(|&i, &j| a[i * n + k].abs().total_cmp(&a[j * n + k].abs()))?;
            if a[pivot * n + k] == 0.0 {
                return None;
            }
            if pivot != k {
                for c in 0..n {
                    a.swap(k * n + c, pivot * n + c);
                }
                perm.swap(k, pivot);
            }
            let diag = a[k * n + k];
            for i in k + 1..n {
                let f = a[i * n + k] / diag;
                if f == 0.0 {
                    continue;
                }
                a[i * n + k] = f;
                for c in k + 1..n {
                    a[i * n + c] -= f * a[k * n + c];
                }
            }
        }
        Some(Lu { n, lu: a, perm })
    }

    pub(crate) fn solve(&self, b: Vec<f64>) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for c in 0..i {
                s -= self.lu[i * n + c] * x[c];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for c in i + 1..n {
                s -= self.lu[i * n + c] * x[c];
            }
            x[i] = s / self.lu[i * n + i];
        }
        x
    }
}
