//! Worst-case logistic regression datasets.
//!
//! Every dataset in the family is a vertical stack of scaled copies of the
//! `k x k` operator `W`, whose row `i < k` is `-e_{k-i} + e_{k-i+1}` and whose
//! last row is `e_1`. `W` is never stored: products are index arithmetic and
//! cost `O(k)` per block.

mod export;

pub use export::{
    export, parse_csv, parse_libsvm, write_csv, write_libsvm, write_matrix_csv, DatasetMeta,
    ExportFormat, ParsedDataset,
};

use std::fmt;
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix};

/// The implicit `k x k` operator `W`. It is symmetric, so `apply` also computes `Wᵀx`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WOperator {
    k: usize,
}

impl WOperator {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidDimension(k));
        }
        Ok(Self { k })
    }

    pub fn dim(&self) -> usize {
        self.k
    }

    /// `out = W x`, no allocation.
    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let k = self.k;
        debug_assert_eq!(x.len(), k);
        debug_assert_eq!(out.len(), k);
        for r in 0..k - 1 {
            out[r] = x[k - 1 - r] - x[k - 2 - r];
        }
        out[k - 1] = x[0];
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(x, self.k)?;
        let mut out = vec![0.0; self.k];
        self.apply_into(x, &mut out);
        Ok(out)
    }

    /// Nonzero entries `(column, value)` of row `r` (0-based), in column order.
    pub fn row_entries(&self, r: usize) -> Vec<(usize, f64)> {
        let k = self.k;
        assert!(r < k, "row index out of range");
        if r == k - 1 {
            vec![(0, 1.0)]
        } else {
            vec![(k - 2 - r, -1.0), (k - 1 - r, 1.0)]
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.k)
            .map(|r| {
                let mut row = vec![0.0; self.k];
                for (c, v) in self.row_entries(r) {
                    row[c] = v;
                }
                row
            })
            .collect()
    }
}

/// Which stacked dataset to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// `A = (2σW; -2ζW; -2σW; 2ζW)`, `b = (1; 1; -1; -1)`; optimal intercept is zero.
    FourBlock,
    /// `A = (2σW; 2ζW)`, `b = (1; -1)`.
    TwoBlock,
}

impl Variant {
    pub fn blocks(&self) -> usize {
        match self {
            Variant::FourBlock => 4,
            Variant::TwoBlock => 2,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::FourBlock => write!(f, "fourblock"),
            Variant::TwoBlock => write!(f, "twoblock"),
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fourblock" | "four" | "4" => Ok(Variant::FourBlock),
            "twoblock" | "two" | "2" => Ok(Variant::TwoBlock),
            other => Err(Error::InvalidParameter(format!(
                "unknown variant `{other}`"
            ))),
        }
    }
}

/// One `k`-row block of the data matrix: rows `scale * W`, all labelled `label`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Block {
    pub scale: f64,
    pub label: f64,
}

/// Anything that behaves like a data matrix `A` (N x k) with labels `b`.
pub trait DataMatrix {
    fn n_features(&self) -> usize;
    fn n_rows(&self) -> usize;
    fn labels(&self) -> Vec<f64>;
    /// `A x`
    fn matvec_a(&self, x: &[f64]) -> Result<Vec<f64>>;
    /// `Aᵀ v`
    fn matvec_at(&self, v: &[f64]) -> Result<Vec<f64>>;
    /// Dense row `i` of `A`.
    fn row(&self, i: usize) -> Vec<f64>;

    fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n_rows()).map(|i| self.row(i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstCaseInstance {
    w: WOperator,
    sigma: f64,
    zeta: f64,
    variant: Variant,
}

impl WorstCaseInstance {
    /// Requires `sigma > zeta > 0`. `sigma >= 2 zeta` is accepted with a warning:
    /// the dataset is fine but the closed-form bracket for `c` no longer exists.
    pub fn new(k: usize, sigma: f64, zeta: f64, variant: Variant) -> Result<Self> {
        let w = WOperator::new(k)?;
        if !(sigma.is_finite() && zeta.is_finite()) {
            return Err(Error::InvalidParameter(
                "sigma and zeta must be finite".into(),
            ));
        }
        if zeta <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "zeta must be positive, got {zeta}"
            )));
        }
        if sigma <= zeta {
            return Err(Error::InvalidParameter(format!(
                "sigma must exceed zeta, got sigma = {sigma}, zeta = {zeta}"
            )));
        }
        if sigma >= 2.0 * zeta {
            warn!(
                "sigma = {sigma} >= 2 zeta = {}: ratio constant C is undefined",
                2.0 * zeta
            );
        }
        Ok(Self {
            w,
            sigma,
            zeta,
            variant,
        })
    }

    pub fn four_block(k: usize, sigma: f64, zeta: f64) -> Result<Self> {
        Self::new(k, sigma, zeta, Variant::FourBlock)
    }

    pub fn k(&self) -> usize {
        self.w.dim()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn w(&self) -> &WOperator {
        &self.w
    }

    pub fn blocks(&self) -> Vec<Block> {
        let (s, z) = (2.0 * self.sigma, 2.0 * self.zeta);
        match self.variant {
            Variant::FourBlock => vec![
                Block {
                    scale: s,
                    label: 1.0,
                },
                Block {
                    scale: -z,
                    label: 1.0,
                },
                Block {
                    scale: -s,
                    label: -1.0,
                },
                Block {
                    scale: z,
                    label: -1.0,
                },
            ],
            Variant::TwoBlock => vec![
                Block {
                    scale: s,
                    label: 1.0,
                },
                Block {
                    scale: z,
                    label: -1.0,
                },
            ],
        }
    }

    /// Closed form of `Aᵀb`: a multiple of `e_k`.
    pub fn atb(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.k()];
        out[self.k() - 1] = self.blocks().iter().map(|b| b.scale * b.label).sum();
        out
    }

    /// Analytic bound `2 sqrt(Σ scale²)` on `‖A‖` from `‖W‖ <= 2`; for the
    /// four-block variant this is `4 sqrt(2(σ² + ζ²))`.
    pub fn norm_upper_bound(&self) -> f64 {
        match self.variant {
            Variant::FourBlock => norm_upper_bound(self.sigma, self.zeta),
            Variant::TwoBlock => {
                let sq: f64 = self.blocks().iter().map(|b| b.scale * b.scale).sum();
                2.0 * sq.sqrt()
            }
        }
    }
}

pub fn norm_upper_bound(sigma: f64, zeta: f64) -> f64 {
    4.0 * (2.0 * (sigma * sigma + zeta * zeta)).sqrt()
}

impl DataMatrix for WorstCaseInstance {
    fn n_features(&self) -> usize {
        self.k()
    }

    fn n_rows(&self) -> usize {
        self.variant.blocks() * self.k()
    }

    fn labels(&self) -> Vec<f64> {
        let k = self.k();
        self.blocks()
            .iter()
            .flat_map(|b| std::iter::repeat_n(b.label, k))
            .collect()
    }

    fn matvec_a(&self, x: &[f64]) -> Result<Vec<f64>> {
        let wx = self.w.apply(x)?;
        let mut out = Vec::with_capacity(self.n_rows());
        for b in self.blocks() {
            out.extend(wx.iter().map(|v| b.scale * v));
        }
        Ok(out)
    }

    fn matvec_at(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(v, self.n_rows())?;
        let k = self.k();
        let mut acc = vec![0.0; k];
        for (b, chunk) in self.blocks().iter().zip(v.chunks(k)) {
            linalg::axpy(b.scale, chunk, &mut acc);
        }
        let mut out = vec![0.0; k];
        self.w.apply_into(&acc, &mut out);
        Ok(out)
    }

    fn row(&self, i: usize) -> Vec<f64> {
        let k = self.k();
        let block = self.blocks()[i / k];
        let mut row = vec![0.0; k];
        for (c, v) in self.w.row_entries(i % k) {
            row[c] = block.scale * v;
        }
        row
    }
}

/// A worst-case instance whose effective data matrix is `A U` for an orthogonal `U`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotatedInstance {
    base: WorstCaseInstance,
    u: DenseMatrix,
}

impl RotatedInstance {
    pub fn new(base: WorstCaseInstance, u: DenseMatrix) -> Result<Self> {
        if u.dim() != base.k() {
            return Err(Error::DimensionMismatch {
                expected: base.k(),
                got: u.dim(),
            });
        }
        Ok(Self { base, u })
    }

    pub fn unrotated(base: WorstCaseInstance) -> Self {
        let u = DenseMatrix::identity(base.k());
        Self { base, u }
    }

    pub fn base(&self) -> &WorstCaseInstance {
        &self.base
    }

    pub fn rotation(&self) -> &DenseMatrix {
        &self.u
    }

    pub fn orthogonality_residual(&self) -> f64 {
        self.u.orthogonality_residual()
    }
}

impl DataMatrix for RotatedInstance {
    fn n_features(&self) -> usize {
        self.base.k()
    }

    fn n_rows(&self) -> usize {
        self.base.n_rows()
    }

    fn labels(&self) -> Vec<f64> {
        self.base.labels()
    }

    fn matvec_a(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(x, self.base.k())?;
        self.base.matvec_a(&self.u.matvec(x))
    }

    fn matvec_at(&self, v: &[f64]) -> Result<Vec<f64>> {
        Ok(self.u.matvec_t(&self.base.matvec_at(v)?))
    }

    fn row(&self, i: usize) -> Vec<f64> {
        let k = self.base.k();
        let block = self.base.blocks()[i / k];
        let mut row = vec![0.0; k];
        for (c, v) in self.base.w.row_entries(i % k) {
            linalg::axpy(block.scale * v, self.u.row(c), &mut row);
        }
        row
    }
}

/// Result of power iteration on `AᵀA`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralNorm {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub const POWER_TOL: f64 = 1e-10;
pub const POWER_MAX_ITER: usize = 10_000;

/// Largest singular value of `A` by power iteration on `AᵀA`, started from the
/// normalized all-ones vector. Stops when the Rayleigh quotient changes by at
/// most `1e-10` relative, or after 10k iterations (then `converged = false`).
pub fn spectral_norm<M: DataMatrix + ?Sized>(m: &M) -> SpectralNorm {
    let k = m.n_features();
    let mut v = vec![1.0 / (k as f64).sqrt(); k];
    let mut lambda = 0.0;
    for it in 1..=POWER_MAX_ITER {
        let w = m
            .matvec_at(&m.matvec_a(&v).expect("dimension fixed"))
            .expect("dimension fixed");
        let next = linalg::dot(&v, &w);
        let nrm = linalg::norm(&w);
        if nrm == 0.0 {
            return SpectralNorm {
                value: 0.0,
                iterations: it,
                converged: true,
            };
        }
        v = w.into_iter().map(|x| x / nrm).collect();
        if it > 1 && (next - lambda).abs() <= POWER_TOL * next.abs() {
            return SpectralNorm {
                value: next.sqrt(),
                iterations: it,
                converged: true,
            };
        }
        lambda = next;
    }
    warn!("power iteration did not converge in {POWER_MAX_ITER} iterations; norm estimate is a lower bound");
    SpectralNorm {
        value: lambda.sqrt(),
        iterations: POWER_MAX_ITER,
        converged: false,
    }
}

pub(crate) fn check_len(x: &[f64], expected: usize) -> Result<()> {
    if x.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got: x.len(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_mul(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        a.iter().map(|r| linalg::dot(r, x)).collect()
    }

    #[test]
    fn w_small_cases() {
        assert_eq!(WOperator::new(1).unwrap().to_dense(), vec![vec![1.0]]);
        assert_eq!(
            WOperator::new(3).unwrap().to_dense(),
            vec![
                vec![0.0, -1.0, 1.0],
                vec![-1.0, 1.0, 0.0],
                vec![1.0, 0.0, 0.0]
            ]
        );
        assert!(matches!(WOperator::new(0), Err(Error::InvalidDimension(0))));
    }

    #[test]
    fn w_maps_ones_and_ramp() {
        let w = WOperator::new(5).unwrap();
        assert_eq!(w.apply(&[1.0; 5]).unwrap(), vec![0.0, 0.0, 0.0, 0.0, 1.0]);
        let ramp: Vec<f64> = (1..=5).map(|i| 0.25 * i as f64).collect();
        assert_eq!(w.apply(&ramp).unwrap(), vec![0.25; 5]);
    }

    #[test]
    fn w_is_symmetric() {
        for k in 1..12 {
            let d = WOperator::new(k).unwrap().to_dense();
            for i in 0..k {
                for j in 0..k {
                    assert_eq!(d[i][j], d[j][i]);
                }
            }
        }
    }

    #[test]
    fn instance_examples() {
        let inst = WorstCaseInstance::four_block(4, 1.3, 1.0).unwrap();
        assert_eq!(inst.n_rows(), 16);
        let atb = inst.matvec_at(&inst.labels()).unwrap();
        assert_eq!(&atb[..3], &[0.0, 0.0, 0.0]);
        assert!((atb[3] - 1.2).abs() < 1e-15);
        assert_eq!(atb, inst.atb());

        let two = WorstCaseInstance::new(3, 2.0, 1.0, Variant::TwoBlock).unwrap();
        assert_eq!(two.n_rows(), 6);
        assert_eq!(two.labels(), vec![1.0, 1.0, 1.0, -1.0, -1.0, -1.0]);

        assert!(matches!(
            WorstCaseInstance::four_block(2, 1.0, 1.0),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            WorstCaseInstance::four_block(2, 1.0, 0.0),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            WorstCaseInstance::four_block(0, 1.3, 1.0),
            Err(Error::InvalidDimension(0))
        ));
        // sigma >= 2 zeta is only a warning
        assert!(WorstCaseInstance::four_block(3, 2.5, 1.0).is_ok());
    }

    #[test]
    fn matvec_at_optimum_shape() {
        let (s, z, k) = (1.3, 1.0, 6);
        let c = 0.1;
        let inst = WorstCaseInstance::four_block(k, s, z).unwrap();
        let x: Vec<f64> = (1..=k).map(|i| c * i as f64).collect();
        let ax = inst.matvec_a(&x).unwrap();
        let expect = [2.0 * s * c, -2.0 * z * c, -2.0 * s * c, 2.0 * z * c];
        for (blk, e) in expect.iter().enumerate() {
            for v in &ax[blk * k..(blk + 1) * k] {
                assert!((v - e).abs() < 1e-15);
            }
        }
        assert_eq!(inst.matvec_a(&[0.0; 6]).unwrap(), vec![0.0; 24]);
        assert_eq!(inst.matvec_at(&[0.0; 24]).unwrap(), vec![0.0; 6]);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let inst = WorstCaseInstance::four_block(3, 1.3, 1.0).unwrap();
        assert!(matches!(
            inst.matvec_a(&[1.0; 2]),
            Err(Error::DimensionMismatch {
                expected: 3,
                got: 2
            })
        ));
        assert!(matches!(
            inst.matvec_at(&[1.0; 5]),
            Err(Error::DimensionMismatch {
                expected: 12,
                got: 5
            })
        ));
    }

    #[test]
    fn rotated_rows_match_dense_product() {
        let base = WorstCaseInstance::four_block(4, 1.3, 1.0).unwrap();
        let mut u = DenseMatrix::identity(4);
        u.reflect_rows(&[0.3, -1.0, 2.0]);
        let rot = RotatedInstance::new(base, u).unwrap();
        let x = [0.5, -1.5, 2.0, 0.25];
        let dense = rot.to_dense();
        let ax = rot.matvec_a(&x).unwrap();
        for (a, b) in ax.iter().zip(dense_mul(&dense, &x)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn spectral_norm_one_by_one() {
        let (s, z) = (1.3, 1.0);
        let inst = WorstCaseInstance::four_block(1, s, z).unwrap();
        let est = spectral_norm(&inst);
        assert!(est.converged);
        let exact = 2.0 * (2.0 * (s * s + z * z)).sqrt();
        assert!((est.value - exact).abs() < 1e-14 * exact);
    }

    #[test]
    fn spectral_norm_below_bound() {
        let inst = WorstCaseInstance::four_block(50, 1.3, 1.0).unwrap();
        let est = spectral_norm(&inst);
        assert!(est.value <= inst.norm_upper_bound() + 1e-8);
        assert!(est.value < 8.0 * 1.3);
    }
}
