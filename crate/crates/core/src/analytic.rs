//! Closed-form quantities for the four-block instance: the scale `c` of the
//! minimizer `x* = c (1, 2, ..., k)`, the optimal value, the ratio constant
//! `C(σ/ζ)` and the lower-bound formulas.
//!
//! `c` is the unique positive root of `r(c) = σ tanh(σc) + ζ tanh(ζc) - (σ - ζ)`.
//! When `σ < 2ζ` it is bracketed by
//! `c_lb = atanh(1/2 - ζ/(2σ)) / σ` and `c_ub = atanh(σ/(2ζ) - 1/2) / ζ`.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logloss::{self, log_cosh};
use crate::optimizers;
use crate::wcgen::{DataMatrix, DatasetMeta, Variant, WorstCaseInstance};

const BISECTION_MAX_ITER: usize = 400;

fn check_params(sigma: f64, zeta: f64) -> Result<()> {
    if !(zeta > 0.0 && sigma > zeta && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "need sigma > zeta > 0, got sigma = {sigma}, zeta = {zeta}"
        )));
    }
    Ok(())
}

/// `r(c) = σ tanh(σc) + ζ tanh(ζc) - σ + ζ`; increasing in `c`.
pub fn root_residual(sigma: f64, zeta: f64, c: f64) -> f64 {
    sigma * (sigma * c).tanh() + zeta * (zeta * c).tanh() - sigma + zeta
}

/// `[c_lb, c_ub]`, defined only when `σ < 2ζ`.
pub fn c_bracket(sigma: f64, zeta: f64) -> Option<(f64, f64)> {
    if sigma >= 2.0 * zeta {
        return None;
    }
    let lb = (0.5 - zeta / (2.0 * sigma)).atanh() / sigma;
    let ub = (sigma / (2.0 * zeta) - 0.5).atanh() / zeta;
    Some((lb, ub))
}

/// Bisection for `c`. Uses `[c_lb, c_ub]` when available, otherwise `[0, B]`
/// with `B` doubled from 1 until `r(B) > 0`.
pub fn solve_c(sigma: f64, zeta: f64) -> Result<f64> {
    check_params(sigma, zeta)?;
    let r = |c: f64| root_residual(sigma, zeta, c);
    let (mut lo, mut hi) = match c_bracket(sigma, zeta) {
        Some(b) => b,
        None => {
            let mut b = 1.0;
            while r(b) <= 0.0 {
                b *= 2.0;
            }
            (0.0, b)
        }
    };
    // the closed-form bracket can be off by an ulp
    if r(lo) > 0.0 {
        lo = 0.0;
    }
    while r(hi) < 0.0 {
        hi *= 2.0;
    }

    let mut best = if r(lo).abs() < r(hi).abs() { lo } else { hi };
    for _ in 0..BISECTION_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        let rm = r(mid);
        if rm.abs() < r(best).abs() {
            best = mid;
        }
        if rm.abs() <= 1e-14 || hi - lo <= 1e-15 * mid.max(1.0) || mid <= lo || mid >= hi {
            break;
        }
        if rm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(best)
}

pub fn x_star(k: usize, c: f64) -> Vec<f64> {
    (1..=k).map(|i| c * i as f64).collect()
}

/// `‖x*‖² = c² k(k+1)(2k+1)/6`.
pub fn xstar_norm_sq(k: usize, c: f64) -> f64 {
    let k = k as f64;
    c * c * k * (k + 1.0) * (2.0 * k + 1.0) / 6.0
}

/// Per-coordinate gap `(σ-ζ)c - log cosh(σc) - log cosh(ζc)`.
pub fn coordinate_gap(sigma: f64, zeta: f64, c: f64) -> f64 {
    (sigma - zeta) * c - log_cosh(sigma * c) - log_cosh(zeta * c)
}

/// `f_k* = 8k log 2 - 4k [(σ-ζ)c - log cosh(σc) - log cosh(ζc)]`.
pub fn f_star(k: usize, sigma: f64, zeta: f64, c: f64) -> f64 {
    let k = k as f64;
    8.0 * k * LN_2 - 4.0 * k * coordinate_gap(sigma, zeta, c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticProfile {
    pub k: usize,
    pub c: f64,
    pub x_star: Vec<f64>,
    pub f_star: f64,
    pub xstar_norm_sq: f64,
    /// `C(σ/ζ)`, `None` when `σ >= 2ζ`.
    pub c_ratio: Option<f64>,
    pub c_lb: Option<f64>,
    pub c_ub: Option<f64>,
}

pub fn profile(inst: &WorstCaseInstance) -> Result<AnalyticProfile> {
    if inst.variant() != Variant::FourBlock {
        return Err(Error::UnsupportedVariant(format!(
            "closed-form optimum is derived for fourblock, got {}",
            inst.variant()
        )));
    }
    let (s, z, k) = (inst.sigma(), inst.zeta(), inst.k());
    let c = solve_c(s, z)?;
    let bracket = c_bracket(s, z);
    Ok(AnalyticProfile {
        k,
        c,
        x_star: x_star(k, c),
        f_star: f_star(k, s, z, c),
        xstar_norm_sq: xstar_norm_sq(k, c),
        c_ratio: constant_c_ratio(s, z).ok(),
        c_lb: bracket.map(|b| b.0),
        c_ub: bracket.map(|b| b.1),
    })
}

/// Optimum found by iteration, for variants without a closed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericProfile {
    pub x_star: Vec<f64>,
    pub f_star: f64,
    pub grad_norm: f64,
}

pub fn numeric_profile<M: DataMatrix + ?Sized>(m: &M) -> Result<NumericProfile> {
    let step = 1.0 / logloss::lipschitz(m);
    let x = optimizers::agd_minimize(
        |x| Ok(logloss::loss(m, x)?.gradient),
        vec![0.0; m.n_features()],
        step,
        2_000_000,
        1e-13,
    )?;
    let r = logloss::loss(m, &x)?;
    Ok(NumericProfile {
        grad_norm: crate::linalg::norm_inf(&r.gradient),
        f_star: r.value,
        x_star: x,
    })
}

/// JSON sidecar contents. Four-block uses the closed form; two-block uses
/// [`numeric_profile`] and reports `c` as the first coordinate of the optimum.
pub fn dataset_meta(inst: &WorstCaseInstance) -> Result<DatasetMeta> {
    let (c, f, nsq) = match inst.variant() {
        Variant::FourBlock => {
            let p = profile(inst)?;
            (p.c, p.f_star, p.xstar_norm_sq)
        }
        Variant::TwoBlock => {
            let p = numeric_profile(inst)?;
            let nsq = crate::linalg::dot(&p.x_star, &p.x_star);
            (p.x_star[0], p.f_star, nsq)
        }
    };
    Ok(DatasetMeta {
        k: inst.k(),
        sigma: inst.sigma(),
        zeta: inst.zeta(),
        variant: inst.variant(),
        n_rows: inst.n_rows(),
        c,
        f_star: f,
        xstar_norm_sq: nsq,
        spectral_norm_bound: inst.norm_upper_bound(),
    })
}

/// Ratio constant built from the bracket:
/// `C = [σc_lb tanh(σc_lb) - log cosh(σc_lb) + ζc_lb tanh(ζc_lb) - log cosh(ζc_lb)] / (c_ub² σ²)`.
///
/// It satisfies `coordinate_gap >= c² σ² C`, but it is loose: at `σ/ζ = 1.3`
/// it evaluates to about 0.275. See [`sharp_ratio_constant`].
pub fn constant_c_ratio(sigma: f64, zeta: f64) -> Result<f64> {
    check_params(sigma, zeta)?;
    let (lb, ub) = c_bracket(sigma, zeta).ok_or(Error::UndefinedConstant { sigma, zeta })?;
    let g = |a: f64| a * a.tanh() - log_cosh(a);
    Ok((g(sigma * lb) + g(zeta * lb)) / (ub * ub * sigma * sigma))
}

/// The exact ratio `coordinate_gap / (c² σ²)` at the true root. Depends only on `σ/ζ`.
pub fn sharp_ratio_constant(sigma: f64, zeta: f64) -> Result<f64> {
    let c = solve_c(sigma, zeta)?;
    Ok(coordinate_gap(sigma, zeta, c) / (c * c * sigma * sigma))
}

/// `min_{x ∈ K_{t,k}} f_k - f_k* = 4(k-t) [(σ-ζ)c - log cosh(σc) - log cosh(ζc)]`.
pub fn subspace_gap(k: usize, t: usize, sigma: f64, zeta: f64) -> Result<f64> {
    if t == 0 || t > k {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= t <= k, got t = {t}, k = {k}"
        )));
    }
    let c = solve_c(sigma, zeta)?;
    Ok(4.0 * (k - t) as f64 * coordinate_gap(sigma, zeta, c))
}

/// Largest absolute component outside `K_{t,k}`, i.e. among the first `k - t` coordinates.
pub fn subspace_leakage(x: &[f64], t: usize) -> f64 {
    let cut = x.len().saturating_sub(t);
    crate::linalg::norm_inf(&x[..cut])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerBound {
    pub gap_lb: f64,
    pub dist_lb_factor: f64,
}

/// Span-method bound on `k = 2T`: `3‖A‖² ‖x_0 - x*‖² / (32 (2T+1)(4T+1))`.
pub fn bound_linear_span(iterations: usize, a_norm: f64, dist0_sq: f64) -> Result<LowerBound> {
    if iterations == 0 {
        return Err(Error::ZeroIterations);
    }
    let t = iterations as f64;
    Ok(LowerBound {
        gap_lb: 3.0 * a_norm * a_norm * dist0_sq / (32.0 * (2.0 * t + 1.0) * (4.0 * t + 1.0)),
        dist_lb_factor: 0.125,
    })
}

/// Bound for arbitrary deterministic methods on `k = 4T + 2`:
/// `3‖A‖² ‖x_0 - z*‖² / (32 (4T+3)(8T+5))`. This is a lower bound on the gap.
pub fn bound_general(iterations: usize, a_norm: f64, dist0_sq: f64) -> Result<LowerBound> {
    if iterations == 0 {
        return Err(Error::ZeroIterations);
    }
    let t = iterations as f64;
    Ok(LowerBound {
        gap_lb: 3.0 * a_norm * a_norm * dist0_sq / (32.0 * (4.0 * t + 3.0) * (8.0 * t + 5.0)),
        dist_lb_factor: 0.125,
    })
}

/// Accelerated-gradient guarantee `2L ‖x_0 - x*‖² / (T+1)²`.
pub fn agd_upper_bound(lipschitz: f64, dist0_sq: f64, iterations: usize) -> f64 {
    let t1 = iterations as f64 + 1.0;
    2.0 * lipschitz * dist0_sq / (t1 * t1)
}

/// `agd_upper_bound / bound_linear_span` with `L = ‖A‖²/2`:
/// `32 (2T+1)(4T+1) / (3 (T+1)²)`, increasing to 256/3.
pub fn sandwich_ratio(iterations: usize) -> f64 {
    let t = iterations as f64;
    32.0 * (2.0 * t + 1.0) * (4.0 * t + 1.0) / (3.0 * (t + 1.0) * (t + 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm_inf;

    #[test]
    fn root_matches_reference() {
        // 40-digit reference root
        let c = solve_c(1.3, 1.0).unwrap();
        assert!((c - 0.112_193_881_441_485_63).abs() < 1e-15);
        assert!(root_residual(1.3, 1.0, c).abs() <= 1e-12);
    }

    #[test]
    fn root_scales_inversely() {
        let c = solve_c(1.3, 1.0).unwrap();
        for a in [0.5, 2.0, 10.0] {
            let ca = solve_c(1.3 * a, a).unwrap();
            assert!((ca * a - c).abs() <= 1e-10 * c, "alpha = {a}");
        }
    }

    #[test]
    fn bracket_signs() {
        for ratio in [1.01, 1.3, 1.7, 1.99] {
            let (lb, ub) = c_bracket(ratio, 1.0).unwrap();
            assert!(root_residual(ratio, 1.0, lb) <= 0.0);
            assert!(root_residual(ratio, 1.0, ub) >= 0.0);
        }
        assert!(c_bracket(2.0, 1.0).is_none());
    }

    #[test]
    fn root_without_bracket() {
        let c = solve_c(5.0, 1.0).unwrap();
        assert!(root_residual(5.0, 1.0, c).abs() <= 1e-12);
        assert!(solve_c(1.0, 1.0).is_err());
        assert!(solve_c(1.0, -1.0).is_err());
    }

    #[test]
    fn profile_matches_direct_evaluation() {
        let inst = WorstCaseInstance::four_block(5, 1.3, 1.0).unwrap();
        let p = profile(&inst).unwrap();
        let r = logloss::loss(&inst, &p.x_star).unwrap();
        assert!((r.value - p.f_star).abs() <= 1e-10 * p.f_star.abs());
        assert!(norm_inf(&r.gradient) <= 1e-9);
        // 40-digit direct evaluation of the logistic form
        assert!((p.f_star - 27.390_313_635_758_74).abs() < 1e-12);
        let two = WorstCaseInstance::new(5, 1.3, 1.0, Variant::TwoBlock).unwrap();
        assert!(matches!(profile(&two), Err(Error::UnsupportedVariant(_))));
    }

    #[test]
    fn norm_formula() {
        assert_eq!(xstar_norm_sq(3, 1.0), 14.0);
    }

    #[test]
    fn ratio_constant_values() {
        // bracket constant as printed; evaluated independently with scipy
        let c = constant_c_ratio(1.3, 1.0).unwrap();
        assert!((c - 0.275_354_629_309_615_1).abs() < 1e-12);
        for a in [0.1, 7.0] {
            assert!((constant_c_ratio(1.3 * a, a).unwrap() - c).abs() <= 1e-12);
        }
        let sharp = sharp_ratio_constant(1.3, 1.0).unwrap();
        assert!((sharp - 0.788_737_924_516_784_3).abs() < 1e-9);
        assert!(matches!(
            constant_c_ratio(2.0, 1.0),
            Err(Error::UndefinedConstant { .. })
        ));
    }

    #[test]
    fn ratio_constant_is_a_valid_lower_bound() {
        for i in 1..=50 {
            let ratio = 1.0 + i as f64 / 51.0;
            let c = solve_c(ratio, 1.0).unwrap();
            let bound = c * c * ratio * ratio * constant_c_ratio(ratio, 1.0).unwrap();
            assert!(coordinate_gap(ratio, 1.0, c) >= bound, "ratio = {ratio}");
        }
    }

    #[test]
    fn subspace_gap_cases() {
        assert_eq!(subspace_gap(6, 6, 1.3, 1.0).unwrap(), 0.0);
        let g = subspace_gap(6, 3, 1.3, 1.0).unwrap();
        let c = solve_c(1.3, 1.0).unwrap();
        let via_fstar = 8.0 * 3.0 * LN_2 + f_star(3, 1.3, 1.0, c) - f_star(6, 1.3, 1.0, c);
        assert!((g - via_fstar).abs() < 1e-12);
        assert!((g - 0.201_344_151_983_442_26).abs() < 1e-14);
        assert!(subspace_gap(3, 4, 1.3, 1.0).is_err());
    }

    #[test]
    fn bounds_arithmetic() {
        let b = bound_linear_span(1, 1.0, 1.0).unwrap();
        assert!((b.gap_lb - 1.0 / 160.0).abs() < 1e-18);
        assert_eq!(b.dist_lb_factor, 0.125);
        let b2 = bound_linear_span(1, 1.0, 2.0).unwrap();
        assert!((b2.gap_lb - 2.0 * b.gap_lb).abs() < 1e-18);
        let g = bound_general(1, 2.0, 3.0).unwrap();
        assert!((g.gap_lb - 3.0 * 4.0 * 3.0 / (32.0 * 7.0 * 13.0)).abs() < 1e-16);
        for t in 1..=10_000 {
            assert!(
                bound_general(t, 1.0, 1.0).unwrap().gap_lb
                    < bound_linear_span(t, 1.0, 1.0).unwrap().gap_lb
            );
        }
        assert!(bound_general(0, 1.0, 1.0).is_err());
    }

    #[test]
    fn sandwich_ratio_reference() {
        for (t, r) in [
            (5, 68.444_444_444_444_44),
            (25, 81.278_106_508_875_74),
            (50, 83.254_133_025_759_32),
        ] {
            assert!((sandwich_ratio(t) - r).abs() < 1e-11);
        }
    }

    #[test]
    fn two_block_numeric_optimum_has_ramp_shape() {
        let inst = WorstCaseInstance::new(6, 1.3, 1.0, Variant::TwoBlock).unwrap();
        let p = numeric_profile(&inst).unwrap();
        assert!(p.grad_norm <= 1e-12);
        let c = solve_c(1.3, 1.0).unwrap();
        for (i, v) in p.x_star.iter().enumerate() {
            assert!((v - c * (i + 1) as f64).abs() < 1e-10);
        }
        let meta = dataset_meta(&inst).unwrap();
        assert_eq!(meta.n_rows, 12);
        assert!((meta.c - c).abs() < 1e-10);
    }
}
