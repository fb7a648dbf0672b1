//! Binary logistic loss in the `h(Ax) - bᵀAx` form and the first-order oracle.
//!
//! `h(u) = Σ 2 log(2 cosh(u_i / 2))` is evaluated as `|u| + 2 log1p(exp(-|u|))`,
//! which never overflows. The naive form overflows once `|u|` passes ~1420.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::wcgen::{self, check_len, DataMatrix, Variant, WorstCaseInstance};

/// Stable `log(cosh(z))`.
pub fn log_cosh(z: f64) -> f64 {
    let a = z.abs();
    a + (-2.0 * a).exp().ln_1p() - LN_2
}

/// `2 log(1 + exp(z))` without overflow.
fn two_softplus(z: f64) -> f64 {
    2.0 * (z.max(0.0) + (-z.abs()).exp().ln_1p())
}

pub fn h_value(u: &[f64]) -> Result<f64> {
    let mut acc = 0.0;
    for &ui in u {
        if !ui.is_finite() {
            return Err(Error::NonFinite("h_value"));
        }
        let a = ui.abs();
        acc += a + 2.0 * (-a).exp().ln_1p();
    }
    Ok(acc)
}

/// `∇h(u) = tanh(u / 2)` componentwise.
pub fn h_grad(u: &[f64]) -> Vec<f64> {
    u.iter().map(|ui| (0.5 * ui).tanh()).collect()
}

/// What the oracle hands back for one query: `(f(x), ∇f(x))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResponse {
    pub value: f64,
    pub gradient: Vec<f64>,
}

/// `l(x) = h(Ax) - bᵀAx` and its gradient `Aᵀ(tanh(Ax/2) - b)`.
pub fn loss<M: DataMatrix + ?Sized>(m: &M, x: &[f64]) -> Result<OracleResponse> {
    check_len(x, m.n_features())?;
    let ax = m.matvec_a(x)?;
    let b = m.labels();
    let value = h_value(&ax)? - crate::linalg::dot(&b, &ax);
    let residual: Vec<f64> = h_grad(&ax).iter().zip(&b).map(|(t, bi)| t - bi).collect();
    let gradient = m.matvec_at(&residual)?;
    Ok(OracleResponse { value, gradient })
}

/// Gradient only, skipping the value.
pub fn gradient<M: DataMatrix + ?Sized>(m: &M, x: &[f64]) -> Result<Vec<f64>> {
    check_len(x, m.n_features())?;
    let ax = m.matvec_a(x)?;
    if ax.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("gradient"));
    }
    let residual: Vec<f64> = h_grad(&ax)
        .iter()
        .zip(m.labels())
        .map(|(t, bi)| t - bi)
        .collect();
    m.matvec_at(&residual)
}

/// The same loss written as `Σ 2 log(1 + exp(-b_i a_iᵀx))`.
pub fn loss_logistic_form<M: DataMatrix + ?Sized>(m: &M, x: &[f64]) -> Result<f64> {
    check_len(x, m.n_features())?;
    let ax = m.matvec_a(x)?;
    Ok(ax
        .iter()
        .zip(m.labels())
        .map(|(z, b)| two_softplus(-b * z))
        .sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiEval {
    pub value: f64,
    pub grad_x: Vec<f64>,
    pub grad_y: f64,
}

/// Full model with intercept: `Φ(x, y) = h(Ax + y1) - bᵀ(Ax + y1)`, with `1` of length N.
pub fn phi(inst: &WorstCaseInstance, x: &[f64], y: f64) -> Result<PhiEval> {
    if inst.variant() != Variant::FourBlock {
        return Err(Error::UnsupportedVariant(format!(
            "intercept model is only characterised for fourblock, got {}",
            inst.variant()
        )));
    }
    check_len(x, inst.k())?;
    let z: Vec<f64> = inst.matvec_a(x)?.into_iter().map(|v| v + y).collect();
    let b = inst.labels();
    let value = h_value(&z)? - crate::linalg::dot(&b, &z);
    let residual: Vec<f64> = h_grad(&z).iter().zip(&b).map(|(t, bi)| t - bi).collect();
    let grad_x = inst.matvec_at(&residual)?;
    let grad_y = residual.iter().sum();
    Ok(PhiEval {
        value,
        grad_x,
        grad_y,
    })
}

/// Smoothness constant `‖A‖² / 2`: each term of `h` has curvature at most 1/2.
pub fn lipschitz<M: DataMatrix + ?Sized>(m: &M) -> f64 {
    let n = wcgen::spectral_norm(m).value;
    0.5 * n * n
}

/// Black-box first-order oracle. Methods only ever see what `query` returns.
pub trait Oracle {
    fn dim(&self) -> usize;

    /// A counted, logged oracle call.
    fn query(&mut self, x: &[f64]) -> Result<OracleResponse>;

    /// Evaluation for reporting; not counted and not visible to the method.
    fn evaluate(&self, x: &[f64]) -> Result<OracleResponse>;

    /// Called once with the method's final iterate after its last query.
    fn finish(&mut self, _final_iterate: &[f64]) -> Result<()> {
        Ok(())
    }

    fn calls(&self) -> usize;
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QueryLog {
    entries: Vec<(Vec<f64>, OracleResponse)>,
}

impl QueryLog {
    pub fn push(&mut self, x: &[f64], response: &OracleResponse) {
        self.entries.push((x.to_vec(), response.clone()));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(Vec<f64>, OracleResponse)] {
        &self.entries
    }
}

/// Oracle backed by a fixed data matrix.
#[derive(Debug)]
pub struct InstanceOracle<'a, M: DataMatrix + ?Sized> {
    model: &'a M,
    log: QueryLog,
}

impl<'a, M: DataMatrix + ?Sized> InstanceOracle<'a, M> {
    pub fn new(model: &'a M) -> Self {
        Self {
            model,
            log: QueryLog::default(),
        }
    }

    pub fn log(&self) -> &QueryLog {
        &self.log
    }
}

impl<M: DataMatrix + ?Sized> Oracle for InstanceOracle<'_, M> {
    fn dim(&self) -> usize {
        self.model.n_features()
    }

    fn query(&mut self, x: &[f64]) -> Result<OracleResponse> {
        let r = loss(self.model, x)?;
        self.log.push(x, &r);
        Ok(r)
    }

    fn evaluate(&self, x: &[f64]) -> Result<OracleResponse> {
        loss(self.model, x)
    }

    fn calls(&self) -> usize {
        self.log.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm_inf;

    #[test]
    fn h_at_zero_and_large() {
        assert!((h_value(&[0.0]).unwrap() - 2.0 * LN_2).abs() < 1e-16);
        assert_eq!(h_value(&[1e6]).unwrap(), 1e6);
        assert_eq!(h_value(&[-1e6]).unwrap(), 1e6);
        assert!(h_value(&[f64::NAN]).is_err());
    }

    #[test]
    fn h_matches_naive_form() {
        let naive = |u: f64| 2.0 * (2.0 * (0.5 * u).cosh()).ln();
        let got = h_value(&[1.0, -1.0]).unwrap();
        assert!((got - 2.0 * naive(1.0)).abs() < 1e-14);
        // frozen from a 40-digit evaluation
        assert!((got - 3.253_046_750_072_891_3).abs() < 1e-14);
    }

    #[test]
    fn h_grad_values() {
        assert_eq!(h_grad(&[0.0, 0.0]), vec![0.0, 0.0]);
        let g = h_grad(&[2.0 * 0.5f64.atanh()]);
        assert!((g[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn h_grad_finite_differences() {
        let u = [0.3, -1.7, 2.2, 0.0, 5.0, -0.01, 1.1, -3.3, 0.7];
        let g = h_grad(&u);
        let step = 1e-6;
        for i in 0..u.len() {
            let mut up = u;
            let mut dn = u;
            up[i] += step;
            dn[i] -= step;
            let fd = (h_value(&up).unwrap() - h_value(&dn).unwrap()) / (2.0 * step);
            assert!((fd - g[i]).abs() < 1e-7, "component {i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn loss_at_origin() {
        let inst = WorstCaseInstance::four_block(5, 1.3, 1.0).unwrap();
        let r = loss(&inst, &[0.0; 5]).unwrap();
        assert!((r.value - 2.0 * 20.0 * LN_2).abs() < 1e-12);
        let mut expect = vec![0.0; 5];
        expect[4] = -4.0 * 0.3;
        for (a, b) in r.gradient.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn log_cosh_is_stable() {
        assert_eq!(log_cosh(0.0), 0.0);
        assert!((log_cosh(0.5) - 0.5f64.cosh().ln()).abs() < 1e-16);
        assert!((log_cosh(-2000.0) - (2000.0 - LN_2)).abs() < 1e-12);
    }

    #[test]
    fn phi_matches_loss_at_zero_intercept() {
        let inst = WorstCaseInstance::four_block(4, 1.3, 1.0).unwrap();
        let x = [0.1, -0.2, 0.3, 0.4];
        let p = phi(&inst, &x, 0.0).unwrap();
        let l = loss(&inst, &x).unwrap();
        assert_eq!(p.value, l.value);
        assert!(norm_inf(&crate::linalg::sub(&p.grad_x, &l.gradient)) == 0.0);
        let p0 = phi(&inst, &[0.0; 4], 0.0).unwrap();
        assert!((p0.value - 32.0 * LN_2).abs() < 1e-12);
        let two = WorstCaseInstance::new(4, 1.3, 1.0, Variant::TwoBlock).unwrap();
        assert!(matches!(
            phi(&two, &x, 0.0),
            Err(Error::UnsupportedVariant(_))
        ));
    }

    #[test]
    fn phi_finite_differences() {
        let inst = WorstCaseInstance::four_block(4, 1.3, 1.0).unwrap();
        let x = [0.4, -0.9, 0.25, 1.3];
        let y = -0.35;
        let p = phi(&inst, &x, y).unwrap();
        let h = 1e-6;
        for i in 0..4 {
            let mut up = x;
            let mut dn = x;
            up[i] += h;
            dn[i] -= h;
            let fd =
                (phi(&inst, &up, y).unwrap().value - phi(&inst, &dn, y).unwrap().value) / (2.0 * h);
            assert!((fd - p.grad_x[i]).abs() < 1e-7);
        }
        let fd = (phi(&inst, &x, y + h).unwrap().value - phi(&inst, &x, y - h).unwrap().value)
            / (2.0 * h);
        assert!((fd - p.grad_y).abs() < 1e-7);
    }

    #[test]
    fn lipschitz_one_by_one() {
        let (s, z) = (1.3, 1.0);
        let inst = WorstCaseInstance::four_block(1, s, z).unwrap();
        let l = lipschitz(&inst);
        assert!((l - 4.0 * (s * s + z * z)).abs() < 1e-12);
        let big = WorstCaseInstance::four_block(40, s, z).unwrap();
        assert!(lipschitz(&big) <= 16.0 * (s * s + z * z));
    }

    #[test]
    fn oracle_counts_and_logs() {
        let inst = WorstCaseInstance::four_block(3, 1.3, 1.0).unwrap();
        let mut o = InstanceOracle::new(&inst);
        let a = o.query(&[0.1, 0.2, 0.3]).unwrap();
        let b = o.query(&[0.1, 0.2, 0.3]).unwrap();
        let _ = o.evaluate(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(a, b);
        assert_eq!(o.calls(), 2);
        assert_eq!(o.log().len(), 2);
        assert!(matches!(
            o.query(&[0.0; 2]),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
