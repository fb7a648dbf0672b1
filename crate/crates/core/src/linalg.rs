//! Small dense helpers. Vectors are plain `f64` slices; the only matrix that
//! is ever stored densely is the adversary's orthogonal rotation.

use serde::{Deserialize, Serialize};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Square row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self { n, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "matrix must be square");
        Self {
            n,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| dot(self.row(i), x)).collect()
    }

    pub fn matvec_t(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (i, vi) in v.iter().enumerate() {
            if *vi != 0.0 {
                axpy(*vi, self.row(i), &mut out);
            }
        }
        out
    }

    /// Left-multiplies by the reflection `I - 2 w wᵀ / (wᵀw)`, where `w` is
    /// supported on the first `w.len()` coordinates. Only those rows change.
    pub fn reflect_rows(&mut self, w: &[f64]) {
        let n = self.n;
        let m = w.len();
        let wtw = dot(w, w);
        if wtw == 0.0 {
            return;
        }
        // p = wᵀ U[0..m, :]
        let mut p = vec![0.0; n];
        for (i, wi) in w.iter().enumerate() {
            axpy(*wi, &self.data[i * n..(i + 1) * n], &mut p);
        }
        let scale = 2.0 / wtw;
        for i in 0..m {
            let coef = scale * w[i];
            if coef != 0.0 {
                axpy(-coef, &p, &mut self.data[i * n..(i + 1) * n]);
            }
        }
    }

    /// `max |UᵀU - I|` over all entries.
    pub fn orthogonality_residual(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for b in a..n {
                let mut s = 0.0;
                for i in 0..n {
                    s += self.get(i, a) * self.get(i, b);
                }
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((s - target).abs());
            }
        }
        worst
    }

    /// One modified Gram-Schmidt pass over the columns.
    pub fn reorthogonalize(&mut self) {
        let n = self.n;
        let mut cols: Vec<Vec<f64>> = (0..n)
            .map(|j| (0..n).map(|i| self.get(i, j)).collect())
            .collect();
        for j in 0..n {
            for p in 0..j {
                let (done, rest) = cols.split_at_mut(j);
                let r = dot(&done[p], &rest[0]);
                axpy(-r, &done[p], &mut rest[0]);
            }
            let nrm = norm(&cols[j]);
            if nrm > 0.0 {
                cols[j].iter_mut().for_each(|v| *v /= nrm);
            }
        }
        for (j, col) in cols.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                self.data[i * n + j] = *v;
            }
        }
    }
}
