//! Resisting oracle for arbitrary deterministic methods.
//!
//! The adversary keeps an orthogonal `U` and answers every query with the loss
//! of the rotated data matrix `A U`. Before answering the query at step `s` it
//! left-multiplies `U` by a Householder reflection supported on coordinates
//! `1..k-2s`, chosen so that `U x_s ∈ K_{2s+1,k}`. The reflection is the
//! identity on `K_{2s,k}`, which contains `Aᵀb` and every earlier image
//! `U x_i` together with its gradient, so all earlier answers remain valid for
//! the final `U`. [`replay_check`] confirms this after the fact.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, norm, DenseMatrix};
use crate::logloss::{self, Oracle, OracleResponse, QueryLog};
use crate::optimizers::{self, MethodSpec, Trace};
use crate::wcgen::{RotatedInstance, WorstCaseInstance};

/// Leading-block norm at or below `ZERO_TOL (1 + ‖y‖)` counts as already trapped.
pub const ZERO_TOL: f64 = 1e-12;
/// Drift in `UᵀU - I` that triggers a Gram-Schmidt pass.
pub const DRIFT_TOL: f64 = 1e-12;
pub const CONTAINMENT_TOL: f64 = 1e-8;
pub const REPLAY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdversaryState {
    base: WorstCaseInstance,
    u: DenseMatrix,
    steps: usize,
    /// Points placed so far, `placed[i]` at step `i`.
    placed: Vec<Vec<f64>>,
    reorthogonalizations: usize,
}

/// How well the placed points sit in their trap subspaces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Containment {
    /// `max_i ‖(U x_i)[1..k-2i-1]‖ / max(1, ‖x_i‖)`: membership in `Uᵀ K_{2i+1}`.
    pub tight: f64,
    /// Same for the looser `Uᵀ K_{2i+3}`.
    pub loose: f64,
}

impl Containment {
    pub fn tight_holds(&self) -> bool {
        self.tight <= CONTAINMENT_TOL
    }

    pub fn loose_holds(&self) -> bool {
        self.loose <= CONTAINMENT_TOL
    }
}

impl AdversaryState {
    pub fn new(base: WorstCaseInstance) -> Self {
        let k = base.k();
        Self {
            base,
            u: DenseMatrix::identity(k),
            steps: 0,
            placed: Vec::new(),
            reorthogonalizations: 0,
        }
    }

    pub fn k(&self) -> usize {
        self.base.k()
    }

    /// Number of completed `fix_and_map` steps.
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Largest admissible step, `floor((k - 3) / 2)`.
    pub fn budget(&self) -> usize {
        self.k().saturating_sub(3) / 2
    }

    pub fn rotation(&self) -> &DenseMatrix {
        &self.u
    }

    pub fn placed(&self) -> &[Vec<f64>] {
        &self.placed
    }

    pub fn reorthogonalizations(&self) -> usize {
        self.reorthogonalizations
    }

    pub fn instance(&self) -> RotatedInstance {
        RotatedInstance::new(self.base.clone(), self.u.clone()).expect("U has dimension k")
    }

    /// Records `x_0`, which must already lie in `Uᵀ K_{1,k} = span(e_k)`.
    pub fn place_initial(&mut self, x0: &[f64]) -> Result<()> {
        crate::wcgen::check_len(x0, self.k())?;
        if !self.placed.is_empty() {
            return Err(Error::InvalidParameter(
                "initial iterate already placed".into(),
            ));
        }
        let y = self.u.matvec(x0);
        let leak = norm(&y[..self.k() - 1]);
        if leak > ZERO_TOL * (1.0 + norm(&y)) {
            return Err(Error::InitialIterate(leak));
        }
        self.placed.push(x0.to_vec());
        Ok(())
    }

    /// Step `s = steps + 1`: rotate so that `U_s x_new ∈ K_{2s+1,k}` while
    /// fixing `K_{2s,k}` pointwise.
    pub fn fix_and_map(&mut self, x_new: &[f64]) -> Result<()> {
        crate::wcgen::check_len(x_new, self.k())?;
        let s = self.steps + 1;
        if s > self.budget() {
            return Err(Error::StepBudgetExceeded {
                step: s,
                budget: self.budget(),
            });
        }
        if self.placed.is_empty() {
            return Err(Error::InvalidParameter("place x_0 before step 1".into()));
        }
        let k = self.k();
        let m = k - 2 * s;
        let y = self.u.matvec(x_new);
        let lead = &y[..m];
        let tail_leak = norm(&lead[..m - 1]);
        if tail_leak > ZERO_TOL * (1.0 + norm(&y)) {
            let w = householder_to_last(lead);
            self.u.reflect_rows(&w);
            if self.u.orthogonality_residual() > DRIFT_TOL {
                log::debug!("step {s}: reorthogonalizing rotation");
                self.u.reorthogonalize();
                self.reorthogonalizations += 1;
            }
        }
        self.steps = s;
        self.placed.push(x_new.to_vec());
        Ok(())
    }

    pub fn orthogonality_residual(&self) -> f64 {
        self.u.orthogonality_residual()
    }

    /// `‖Uᵀ(Aᵀb) - Aᵀb‖_∞`.
    pub fn atb_residual(&self) -> f64 {
        let atb = self.base.atb();
        linalg::max_abs_diff(&self.u.matvec_t(&atb), &atb)
    }

    pub fn containment(&self) -> Containment {
        let k = self.k();
        let mut tight: f64 = 0.0;
        let mut loose: f64 = 0.0;
        for (i, x) in self.placed.iter().enumerate() {
            let y = self.u.matvec(x);
            let scale = norm(x).max(1.0);
            let cut = |dim: usize| norm(&y[..k.saturating_sub(dim)]) / scale;
            tight = tight.max(cut(2 * i + 1));
            loose = loose.max(cut(2 * i + 3));
        }
        Containment { tight, loose }
    }

    pub fn answer(&self, x: &[f64]) -> Result<OracleResponse> {
        logloss::loss(&self.instance_view(), x)
    }

    fn instance_view(&self) -> RotatedView<'_> {
        RotatedView {
            base: &self.base,
            u: &self.u,
        }
    }
}

/// Householder vector `w` with `(I - 2wwᵀ/wᵀw) v = ‖v‖ e_last`. The last
/// component uses the cancellation-free form when `v_last > 0`.
fn householder_to_last(v: &[f64]) -> Vec<f64> {
    let m = v.len();
    let head_sq: f64 = v[..m - 1].iter().map(|x| x * x).sum();
    let vn = (head_sq + v[m - 1] * v[m - 1]).sqrt();
    let mut w = v.to_vec();
    w[m - 1] = if v[m - 1] <= 0.0 {
        v[m - 1] - vn
    } else {
        -head_sq / (v[m - 1] + vn)
    };
    w
}

/// Borrowing view of `A U` so answering a query does not clone `U`.
struct RotatedView<'a> {
    base: &'a WorstCaseInstance,
    u: &'a DenseMatrix,
}

impl crate::wcgen::DataMatrix for RotatedView<'_> {
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
        crate::wcgen::check_len(x, self.base.k())?;
        self.base.matvec_a(&self.u.matvec(x))
    }

    fn matvec_at(&self, v: &[f64]) -> Result<Vec<f64>> {
        Ok(self.u.matvec_t(&self.base.matvec_at(v)?))
    }

    fn row(&self, i: usize) -> Vec<f64> {
        RotatedInstance::new(self.base.clone(), self.u.clone())
            .expect("U has dimension k")
            .row(i)
    }
}

/// Oracle that rotates before answering.
#[derive(Debug)]
pub struct AdversarialOracle {
    state: AdversaryState,
    log: QueryLog,
}

impl AdversarialOracle {
    pub fn new(base: WorstCaseInstance) -> Self {
        Self {
            state: AdversaryState::new(base),
            log: QueryLog::default(),
        }
    }

    pub fn state(&self) -> &AdversaryState {
        &self.state
    }

    pub fn into_state(self) -> AdversaryState {
        self.state
    }

    pub fn log(&self) -> &QueryLog {
        &self.log
    }
}

impl Oracle for AdversarialOracle {
    fn dim(&self) -> usize {
        self.state.k()
    }

    fn query(&mut self, x: &[f64]) -> Result<OracleResponse> {
        if self.log.is_empty() {
            self.state.place_initial(x)?;
        } else {
            self.state.fix_and_map(x)?;
        }
        let r = self.state.answer(x)?;
        self.log.push(x, &r);
        Ok(r)
    }

    fn evaluate(&self, x: &[f64]) -> Result<OracleResponse> {
        self.state.answer(x)
    }

    /// Traps the final iterate as well, so `x_T ∈ Uᵀ K_{2T+1}`.
    fn finish(&mut self, final_iterate: &[f64]) -> Result<()> {
        self.state.fix_and_map(final_iterate)
    }

    fn calls(&self) -> usize {
        self.log.len()
    }
}

#[derive(Debug, Clone)]
pub struct AdversarialRun {
    pub trace: Trace,
    pub instance: RotatedInstance,
    pub state: AdversaryState,
    /// Every logged answer re-evaluated against the final instance; max sup-norm difference.
    pub answer_drift: f64,
}

/// Builds the four-block instance with `k = 4T + 2` and runs `method` for `T`
/// iterations against the resisting oracle.
pub fn adversarial_run(
    method: &MethodSpec,
    iterations: usize,
    sigma: f64,
    zeta: f64,
) -> Result<AdversarialRun> {
    if iterations == 0 {
        return Err(Error::ZeroIterations);
    }
    let base = WorstCaseInstance::four_block(4 * iterations + 2, sigma, zeta)?;
    let mut oracle = AdversarialOracle::new(base);
    let trace = optimizers::run(method, &mut oracle, iterations)?;
    let instance = oracle.state().instance();
    let mut answer_drift: f64 = 0.0;
    for (x, r) in oracle.log().entries() {
        let now = logloss::loss(&instance, x)?;
        answer_drift = answer_drift
            .max((now.value - r.value).abs())
            .max(linalg::max_abs_diff(&now.gradient, &r.gradient));
    }
    Ok(AdversarialRun {
        trace,
        instance,
        state: oracle.into_state(),
        answer_drift,
    })
}

/// Re-runs `method` against the fixed `final_inst` and compares iterates.
/// True iff they agree with `trace` to `1e-8` in sup-norm.
pub fn replay_check(
    method: &MethodSpec,
    final_inst: &RotatedInstance,
    trace: &Trace,
) -> Result<bool> {
    Ok(replay_deviation(method, final_inst, trace)? <= REPLAY_TOL)
}

pub fn replay_deviation(
    method: &MethodSpec,
    final_inst: &RotatedInstance,
    trace: &Trace,
) -> Result<f64> {
    if trace.iterates.len() < 2 {
        return Err(Error::LengthMismatch {
            expected: 2,
            got: trace.iterates.len(),
        });
    }
    let mut oracle = logloss::InstanceOracle::new(final_inst);
    let replay = optimizers::run(method, &mut oracle, trace.iterations())?;
    if replay.iterates.len() != trace.iterates.len() {
        return Err(Error::LengthMismatch {
            expected: trace.iterates.len(),
            got: replay.iterates.len(),
        });
    }
    Ok(replay
        .iterates
        .iter()
        .zip(&trace.iterates)
        .chain(replay.queries.iter().zip(&trace.queries))
        .map(|(a, b)| linalg::max_abs_diff(a, b))
        .fold(0.0, f64::max))
}
