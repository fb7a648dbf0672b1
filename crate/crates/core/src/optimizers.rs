//! Deterministic first-order methods driven only through an [`Oracle`].
//!
//! A method is a small state machine: it names the point it wants queried,
//! absorbs the `(value, gradient)` answer, and exposes its current iterate.
//! It never sees the data matrix, the labels or the optimum.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, axpy, dot, norm, norm_inf};
use crate::logloss::{Oracle, OracleResponse};

pub const HEAVY_BALL_MOMENTUM: f64 = 0.9;
pub const DENSE_PROBE_SCALE: f64 = 1e-3;
pub const SPAN_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodKind {
    Gd,
    Agd,
    HeavyBall,
    DenseProbe,
}

impl MethodKind {
    pub const ALL: [MethodKind; 4] = [
        MethodKind::Gd,
        MethodKind::Agd,
        MethodKind::HeavyBall,
        MethodKind::DenseProbe,
    ];

    /// Whether iterates stay in the span of past gradients.
    pub fn is_span_method(&self) -> bool {
        !matches!(self, MethodKind::DenseProbe)
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MethodKind::Gd => "gd",
            MethodKind::Agd => "agd",
            MethodKind::HeavyBall => "heavyball",
            MethodKind::DenseProbe => "denseprobe",
        })
    }
}

impl FromStr for MethodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "gd" => Ok(MethodKind::Gd),
            "agd" | "nesterov" => Ok(MethodKind::Agd),
            "heavyball" | "hb" => Ok(MethodKind::HeavyBall),
            "denseprobe" | "probe" => Ok(MethodKind::DenseProbe),
            _ => Err(Error::UnknownMethod(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub kind: MethodKind,
    pub step_size: f64,
    /// Only read by heavy ball.
    pub momentum: f64,
}

impl MethodSpec {
    pub fn new(kind: MethodKind, step_size: f64) -> Self {
        Self {
            kind,
            step_size,
            momentum: HEAVY_BALL_MOMENTUM,
        }
    }

    /// Step `1/L`.
    pub fn with_lipschitz(kind: MethodKind, lipschitz: f64) -> Self {
        Self::new(kind, 1.0 / lipschitz)
    }

    pub fn start(&self, dim: usize) -> Box<dyn FirstOrderMethod> {
        let zero = vec![0.0; dim];
        match self.kind {
            MethodKind::Gd => Box::new(GradientDescent {
                x: zero,
                step: self.step_size,
            }),
            MethodKind::Agd => Box::new(Nesterov {
                x: zero.clone(),
                y: zero,
                iter: 0,
                step: self.step_size,
            }),
            MethodKind::HeavyBall => Box::new(HeavyBall {
                x: zero.clone(),
                prev: zero,
                step: self.step_size,
                beta: self.momentum,
            }),
            MethodKind::DenseProbe => Box::new(DenseProbe {
                x: zero,
                step: self.step_size,
            }),
        }
    }
}

pub trait FirstOrderMethod {
    /// Point the method wants the oracle to evaluate next.
    fn query_point(&self) -> &[f64];
    /// Absorb the answer at `query_point()` and advance one iteration.
    fn observe(&mut self, response: &OracleResponse);
    /// Current reported solution.
    fn iterate(&self) -> &[f64];
}

struct GradientDescent {
    x: Vec<f64>,
    step: f64,
}

impl FirstOrderMethod for GradientDescent {
    fn query_point(&self) -> &[f64] {
        &self.x
    }

    fn observe(&mut self, r: &OracleResponse) {
        axpy(-self.step, &r.gradient, &mut self.x);
    }

    fn iterate(&self) -> &[f64] {
        &self.x
    }
}

/// Constant-step Nesterov: `x_{t+1} = y_t - g(y_t)/L`,
/// `y_{t+1} = x_{t+1} + (t-1)/(t+2) (x_{t+1} - x_t)` with `t` the new index.
struct Nesterov {
    x: Vec<f64>,
    y: Vec<f64>,
    iter: usize,
    step: f64,
}

impl FirstOrderMethod for Nesterov {
    fn query_point(&self) -> &[f64] {
        &self.y
    }

    fn observe(&mut self, r: &OracleResponse) {
        let mut next = self.y.clone();
        axpy(-self.step, &r.gradient, &mut next);
        self.iter += 1;
        let t = self.iter as f64;
        let beta = (t - 1.0) / (t + 2.0);
        self.y = next
            .iter()
            .zip(&self.x)
            .map(|(n, o)| n + beta * (n - o))
            .collect();
        self.x = next;
    }

    fn iterate(&self) -> &[f64] {
        &self.x
    }
}

struct HeavyBall {
    x: Vec<f64>,
    prev: Vec<f64>,
    step: f64,
    beta: f64,
}

impl FirstOrderMethod for HeavyBall {
    fn query_point(&self) -> &[f64] {
        &self.x
    }

    fn observe(&mut self, r: &OracleResponse) {
        let next: Vec<f64> = self
            .x
            .iter()
            .zip(&self.prev)
            .zip(&r.gradient)
            .map(|((x, p), g)| x - self.step * g + self.beta * (x - p))
            .collect();
        self.prev = std::mem::replace(&mut self.x, next);
    }

    fn iterate(&self) -> &[f64] {
        &self.x
    }
}

/// Gradient step plus `1e-3 ‖g‖ · 1/√k`. The shift leaves the gradient span
/// but vanishes at a stationary point.
struct DenseProbe {
    x: Vec<f64>,
    step: f64,
}

impl FirstOrderMethod for DenseProbe {
    fn query_point(&self) -> &[f64] {
        &self.x
    }

    fn observe(&mut self, r: &OracleResponse) {
        axpy(-self.step, &r.gradient, &mut self.x);
        let shift = DENSE_PROBE_SCALE * norm(&r.gradient) / (self.x.len() as f64).sqrt();
        self.x.iter_mut().for_each(|v| *v += shift);
    }

    fn iterate(&self) -> &[f64] {
        &self.x
    }
}

/// One optimizer run. `iterates[0]` is the origin; `queries[t]` is the point
/// evaluated during iteration `t`, which differs from `iterates[t]` only for AGD.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub method: MethodKind,
    pub iterates: Vec<Vec<f64>>,
    pub queries: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    /// Sup-norm of the gradient at each iterate.
    pub grad_norms: Vec<f64>,
    pub oracle_calls: usize,
}

impl Trace {
    pub fn iterations(&self) -> usize {
        self.iterates.len() - 1
    }

    pub fn last(&self) -> &[f64] {
        self.iterates.last().expect("trace holds x_0")
    }

    pub fn final_value(&self) -> f64 {
        *self.values.last().expect("trace holds x_0")
    }

    pub fn gaps(&self, f_star: f64) -> Vec<f64> {
        self.values.iter().map(|v| v - f_star).collect()
    }

    pub fn dist_sq(&self, x_star: &[f64]) -> Vec<f64> {
        self.iterates
            .iter()
            .map(|x| linalg::dist_sq(x, x_star))
            .collect()
    }

    /// Columns `t,value,gap,dist_sq,grad_norm`.
    pub fn write_csv<W: Write>(&self, out: &mut W, f_star: f64, x_star: &[f64]) -> Result<()> {
        writeln!(out, "t,value,gap,dist_sq,grad_norm")?;
        let dists = self.dist_sq(x_star);
        for (t, ((v, d), g)) in self
            .values
            .iter()
            .zip(&dists)
            .zip(&self.grad_norms)
            .enumerate()
        {
            writeln!(out, "{t},{v:.16e},{:.16e},{d:.16e},{g:.16e}", v - f_star)?;
        }
        Ok(())
    }

    /// Full trace as JSON; iterates and queries are dropped unless `full`.
    pub fn to_json(&self, full: bool) -> Result<serde_json::Value> {
        let mut v = serde_json::to_value(self)?;
        if !full {
            if let Some(obj) = v.as_object_mut() {
                obj.remove("iterates");
                obj.remove("queries");
            }
        }
        Ok(v)
    }
}

/// Runs `method` for exactly `iterations` oracle calls starting from `x_0 = 0`.
pub fn run<O: Oracle + ?Sized>(
    method: &MethodSpec,
    oracle: &mut O,
    iterations: usize,
) -> Result<Trace> {
    if iterations == 0 {
        return Err(Error::ZeroIterations);
    }
    if !(method.step_size.is_finite() && method.step_size > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "step size must be positive, got {}",
            method.step_size
        )));
    }
    let mut state = method.start(oracle.dim());
    let mut iterates = vec![state.iterate().to_vec()];
    let mut queries = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let q = state.query_point().to_vec();
        let response = oracle.query(&q)?;
        queries.push(q);
        state.observe(&response);
        iterates.push(state.iterate().to_vec());
    }
    oracle.finish(state.iterate())?;

    let mut values = Vec::with_capacity(iterates.len());
    let mut grad_norms = Vec::with_capacity(iterates.len());
    for x in &iterates {
        let r = oracle.evaluate(x)?;
        values.push(r.value);
        grad_norms.push(norm_inf(&r.gradient));
    }
    Ok(Trace {
        method: method.kind,
        iterates,
        queries,
        values,
        grad_norms,
        oracle_calls: oracle.calls(),
    })
}

/// Incrementally built orthonormal basis (modified Gram-Schmidt, two passes).
#[derive(Debug, Default)]
struct SpanBasis {
    vectors: Vec<Vec<f64>>,
}

impl SpanBasis {
    fn project_out(&self, v: &mut [f64]) {
        for _ in 0..2 {
            for q in &self.vectors {
                let r = dot(q, v);
                axpy(-r, q, v);
            }
        }
    }

    fn add(&mut self, g: &[f64]) {
        let scale = norm(g);
        if scale == 0.0 {
            return;
        }
        let mut v = g.to_vec();
        self.project_out(&mut v);
        let n = norm(&v);
        if n > 1e-13 * scale {
            v.iter_mut().for_each(|x| *x /= n);
            self.vectors.push(v);
        }
    }

    fn residual(&self, x: &[f64]) -> f64 {
        let mut v = x.to_vec();
        self.project_out(&mut v);
        norm(&v)
    }
}

/// For each `t >= 1`, the distance from `x_t` (and the query at step `t`, when
/// it exists) to `span{∇f(q_0), ..., ∇f(q_{t-1})}`, scaled by `1 + ‖x_t‖`.
pub fn span_residuals<O: Oracle + ?Sized>(trace: &Trace, oracle: &O) -> Result<Vec<f64>> {
    let mut basis = SpanBasis::default();
    let mut out = Vec::with_capacity(trace.iterations());
    for t in 1..trace.iterates.len() {
        let g = oracle.evaluate(&trace.queries[t - 1])?.gradient;
        basis.add(&g);
        let x = &trace.iterates[t];
        let mut worst = basis.residual(x) / (1.0 + norm(x));
        if let Some(q) = trace.queries.get(t) {
            worst = worst.max(basis.residual(q) / (1.0 + norm(q)));
        }
        out.push(worst);
    }
    Ok(out)
}

/// True iff every iterate lies in the span of previously returned gradients,
/// up to `1e-8 (1 + ‖x_t‖)`.
pub fn check_linear_span<O: Oracle + ?Sized>(trace: &Trace, oracle: &O) -> Result<bool> {
    Ok(span_residuals(trace, oracle)?
        .iter()
        .all(|r| *r <= SPAN_TOL))
}

/// Nesterov iterations with gradient-based restart, for computing reference
/// optima. Stops after `max_iter` steps or once `‖∇f‖_∞ <= gtol`.
pub fn agd_minimize<F>(
    mut f: F,
    x0: Vec<f64>,
    step: f64,
    max_iter: usize,
    gtol: f64,
) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let mut x = x0.clone();
    let mut y = x0;
    let mut t = 0usize;
    for _ in 0..max_iter {
        let g = f(&y)?;
        if norm_inf(&g) <= gtol {
            return Ok(y);
        }
        let mut next = y.clone();
        axpy(-step, &g, &mut next);
        let delta = linalg::sub(&next, &x);
        if dot(&g, &delta) > 0.0 {
            t = 0;
        }
        t += 1;
        let beta = (t as f64 - 1.0) / (t as f64 + 2.0);
        y = next.iter().zip(&delta).map(|(n, d)| n + beta * d).collect();
        x = next;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logloss::{lipschitz, InstanceOracle};
    use crate::wcgen::WorstCaseInstance;

    struct FlatOracle {
        k: usize,
        calls: usize,
    }

    impl Oracle for FlatOracle {
        fn dim(&self) -> usize {
            self.k
        }
        fn query(&mut self, x: &[f64]) -> Result<OracleResponse> {
            self.calls += 1;
            self.evaluate(x)
        }
        fn evaluate(&self, _x: &[f64]) -> Result<OracleResponse> {
            Ok(OracleResponse {
                value: 1.0,
                gradient: vec![0.0; self.k],
            })
        }
        fn calls(&self) -> usize {
            self.calls
        }
    }

    #[test]
    fn stationary_start_stays_put() {
        for kind in MethodKind::ALL {
            let mut o = FlatOracle { k: 4, calls: 0 };
            let trace = run(&MethodSpec::new(kind, 0.5), &mut o, 10).unwrap();
            assert!(
                trace.iterates.iter().all(|x| x.iter().all(|v| *v == 0.0)),
                "{kind}"
            );
            assert_eq!(trace.oracle_calls, 10);
        }
    }

    #[test]
    fn gd_converges_in_one_dimension() {
        let inst = WorstCaseInstance::four_block(1, 1.3, 1.0).unwrap();
        let spec = MethodSpec::with_lipschitz(MethodKind::Gd, lipschitz(&inst));
        let mut o = InstanceOracle::new(&inst);
        let trace = run(&spec, &mut o, 200).unwrap();
        assert!(*trace.grad_norms.last().unwrap() <= 1e-6);
        assert_eq!(trace.iterations(), 200);
        assert_eq!(trace.iterates[0], vec![0.0]);
    }

    #[test]
    fn gd_is_monotone() {
        let inst = WorstCaseInstance::four_block(10, 1.3, 1.0).unwrap();
        let spec = MethodSpec::with_lipschitz(MethodKind::Gd, lipschitz(&inst));
        let mut o = InstanceOracle::new(&inst);
        let trace = run(&spec, &mut o, 200).unwrap();
        for w in trace.values.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn rejects_zero_iterations_and_bad_names() {
        let inst = WorstCaseInstance::four_block(3, 1.3, 1.0).unwrap();
        let mut o = InstanceOracle::new(&inst);
        assert!(matches!(
            run(&MethodSpec::new(MethodKind::Gd, 0.1), &mut o, 0),
            Err(Error::ZeroIterations)
        ));
        assert!(matches!(
            "bfgs".parse::<MethodKind>(),
            Err(Error::UnknownMethod(_))
        ));
        assert_eq!(
            "HeavyBall".parse::<MethodKind>().unwrap(),
            MethodKind::HeavyBall
        );
    }

    #[test]
    fn runs_are_bit_identical() {
        let inst = WorstCaseInstance::four_block(8, 1.3, 1.0).unwrap();
        let l = lipschitz(&inst);
        for kind in MethodKind::ALL {
            let spec = MethodSpec::with_lipschitz(kind, l);
            let a = run(&spec, &mut InstanceOracle::new(&inst), 15).unwrap();
            let b = run(&spec, &mut InstanceOracle::new(&inst), 15).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn span_detection() {
        let inst = WorstCaseInstance::four_block(6, 1.3, 1.0).unwrap();
        let l = lipschitz(&inst);
        for kind in MethodKind::ALL {
            let spec = MethodSpec::with_lipschitz(kind, l);
            let mut o = InstanceOracle::new(&inst);
            let trace = run(&spec, &mut o, 4).unwrap();
            assert_eq!(
                check_linear_span(&trace, &o).unwrap(),
                kind.is_span_method(),
                "{kind}"
            );
        }
    }

    #[test]
    fn csv_has_one_row_per_iterate() {
        let inst = WorstCaseInstance::four_block(3, 1.3, 1.0).unwrap();
        let spec = MethodSpec::with_lipschitz(MethodKind::Agd, lipschitz(&inst));
        let trace = run(&spec, &mut InstanceOracle::new(&inst), 5).unwrap();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf, 0.0, &[0.0; 3]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 7);
        assert!(text.starts_with("t,value,gap,dist_sq,grad_norm\n"));
        let json = trace.to_json(false).unwrap();
        assert!(json.get("iterates").is_none());
        assert!(trace.to_json(true).unwrap().get("iterates").is_some());
    }
}
