//! Experiment harness behind the `hardlogit` binary.
//!
//! Every command returns a serializable report whose verdicts each name the
//! result they test. Reports serialize with sorted keys, so identical inputs
//! give identical bytes once the timestamp is switched off.

use std::f64::consts::LN_2;
use std::time::{SystemTime, UNIX_EPOCH};

use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{self, LowerBound};
use crate::error::{Error, Result};
use crate::linalg::{self, norm_inf};
use crate::logloss::{self, InstanceOracle};
use crate::optimizers::{self, MethodKind, MethodSpec, Trace};
use crate::resist::{self, AdversarialRun};
use crate::wcgen::{self, Variant, WorstCaseInstance};

pub const DEFAULT_SIGMA: f64 = 1.3;
pub const DEFAULT_ZETA: f64 = 1.0;
pub const THREADS_ENV: &str = "HARDLOGIT_THREADS";
const VERIFY_SEED: u64 = 0x5eed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    /// The result this assertion checks.
    pub anchor: String,
    pub passed: bool,
    /// Signed slack; positive when the assertion holds.
    pub margin: f64,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl Verdict {
    fn new(name: &str, anchor: &str, passed: bool, margin: f64) -> Self {
        Self {
            name: name.to_string(),
            anchor: anchor.to_string(),
            passed,
            margin,
            detail: String::new(),
        }
    }

    fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    /// `value <= limit`
    fn at_most(name: &str, anchor: &str, value: f64, limit: f64) -> Self {
        Self::new(name, anchor, value <= limit, limit - value)
            .with_detail(format!("value {value:.3e}, limit {limit:.3e}"))
    }

    /// `value > limit`
    fn above(name: &str, anchor: &str, value: f64, limit: f64) -> Self {
        Self::new(name, anchor, value > limit, value - limit)
            .with_detail(format!("value {value:.6e}, limit {limit:.6e}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub command: String,
    pub method: MethodKind,
    pub k: usize,
    pub sigma: f64,
    pub zeta: f64,
    pub iterations: usize,
    pub variant: Variant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measured {
    pub final_gap: f64,
    pub final_dist_sq: f64,
    pub dist0_sq: f64,
    pub a_norm: f64,
    pub a_norm_converged: bool,
    pub lipschitz: f64,
    pub oracle_calls: usize,
    /// Whether the run satisfied the linear-span property.
    pub span_method: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theoretical {
    /// `linear_span` or `general`.
    pub bound: String,
    pub gap_lower_bound: f64,
    pub dist_factor: f64,
    pub agd_upper_bound: f64,
    pub a_norm_upper_bound: f64,
    /// `agd_upper_bound / gap_lower_bound` as measured.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sandwich_ratio: Option<f64>,
    /// `32(2T+1)(4T+1) / (3(T+1)²)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sandwich_ratio_formula: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ReportConfig,
    pub measured: Measured,
    pub theoretical: Theoretical,
    pub verdicts: Vec<Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generated_unix: Option<u64>,
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub max_k: usize,
    pub checks: Vec<Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generated_unix: Option<u64>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|v| v.passed)
    }
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Canonical JSON: sorted keys, pretty-printed, trailing newline.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value)?;
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

/// Worker count for independent cells, capped by `HARDLOGIT_THREADS`.
pub fn cell_threads() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|n| *n > 0)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

/// Dataset plus its JSON sidecar contents.
pub fn cmd_generate(
    k: usize,
    sigma: f64,
    zeta: f64,
    variant: Variant,
) -> Result<(WorstCaseInstance, wcgen::DatasetMeta)> {
    let inst = WorstCaseInstance::new(k, sigma, zeta, variant)?;
    let meta = analytic::dataset_meta(&inst)?;
    Ok((inst, meta))
}

/// One `(method, T)` race cell with its trace.
#[derive(Debug, Clone)]
pub struct RaceCell {
    pub report: ExperimentReport,
    pub trace: Trace,
    pub f_star: f64,
    pub x_star: Vec<f64>,
}

/// Runs `method` for `T` iterations on the `k = 2T` four-block instance and
/// checks the span-method lower bound (and, for AGD, the upper bound).
pub fn race_cell(method: MethodKind, iterations: usize, sigma: f64, zeta: f64) -> Result<RaceCell> {
    if iterations == 0 {
        return Err(Error::ZeroIterations);
    }
    let k = 2 * iterations;
    let inst = WorstCaseInstance::four_block(k, sigma, zeta)?;
    let prof = analytic::profile(&inst)?;
    let a_norm = wcgen::spectral_norm(&inst);
    let l = 0.5 * a_norm.value * a_norm.value;
    let spec = MethodSpec::with_lipschitz(method, l);
    let mut oracle = InstanceOracle::new(&inst);
    let trace = optimizers::run(&spec, &mut oracle, iterations)?;
    let span = optimizers::check_linear_span(&trace, &oracle)?;

    let gap = trace.final_value() - prof.f_star;
    let dist = linalg::dist_sq(trace.last(), &prof.x_star);
    let dist0 = prof.xstar_norm_sq;
    let (bound_name, lb): (&str, LowerBound) = if span {
        (
            "linear_span",
            analytic::bound_linear_span(iterations, a_norm.value, dist0)?,
        )
    } else {
        (
            "general",
            analytic::bound_general(iterations, a_norm.value, dist0)?,
        )
    };
    let upper = analytic::agd_upper_bound(l, dist0, iterations);

    let anchor = if span {
        "span-method lower bound"
    } else {
        "general lower bound (downgraded)"
    };
    let mut verdicts = vec![
        Verdict::new(
            "linear_span_property",
            "linear span assumption",
            span == method.is_span_method(),
            0.0,
        )
        .with_detail(format!(
            "observed {span}, expected {}",
            method.is_span_method()
        )),
        Verdict::above("gap_exceeds_lower_bound", anchor, gap, lb.gap_lb),
        Verdict::above(
            "distance_exceeds_eighth",
            anchor,
            dist,
            lb.dist_lb_factor * dist0,
        ),
        Verdict::at_most(
            "norm_within_analytic_bound",
            "spectral norm bound",
            a_norm.value,
            inst.norm_upper_bound() + 1e-8,
        ),
    ];
    let (ratio, ratio_formula) = if method == MethodKind::Agd {
        verdicts.push(Verdict::at_most(
            "gap_within_agd_upper_bound",
            "accelerated gradient upper bound",
            gap,
            upper,
        ));
        let ratio = upper / lb.gap_lb;
        let formula = analytic::sandwich_ratio(iterations);
        verdicts.push(
            Verdict::at_most(
                "sandwich_ratio_matches_formula",
                "matching upper and lower bounds",
                (ratio - formula).abs() / formula,
                1e-12,
            )
            .with_detail(format!(
                "ratio {ratio:.12}, formula {formula:.12}, limit {:.6}",
                256.0 / 3.0
            )),
        );
        (Some(ratio), Some(formula))
    } else {
        (None, None)
    };

    let report = ExperimentReport {
        config: ReportConfig {
            command: "race".into(),
            method,
            k,
            sigma,
            zeta,
            iterations,
            variant: Variant::FourBlock,
        },
        measured: Measured {
            final_gap: gap,
            final_dist_sq: dist,
            dist0_sq: dist0,
            a_norm: a_norm.value,
            a_norm_converged: a_norm.converged,
            lipschitz: l,
            oracle_calls: trace.oracle_calls,
            span_method: span,
        },
        theoretical: Theoretical {
            bound: bound_name.into(),
            gap_lower_bound: lb.gap_lb,
            dist_factor: lb.dist_lb_factor,
            agd_upper_bound: upper,
            a_norm_upper_bound: inst.norm_upper_bound(),
            sandwich_ratio: ratio,
            sandwich_ratio_formula: ratio_formula,
        },
        verdicts,
        generated_unix: None,
    };
    Ok(RaceCell {
        report,
        trace,
        f_star: prof.f_star,
        x_star: prof.x_star,
    })
}

/// All cells of a race, run on at most [`cell_threads`] workers, in input order.
pub fn cmd_race(
    method: MethodKind,
    iterations: &[usize],
    sigma: f64,
    zeta: f64,
) -> Result<Vec<RaceCell>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cell_threads())
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    pool.install(|| {
        iterations
            .par_iter()
            .map(|&t| race_cell(method, t, sigma, zeta))
            .collect()
    })
}

#[derive(Debug, Clone)]
pub struct ResistOutcome {
    pub report: ExperimentReport,
    pub run: AdversarialRun,
    pub f_star: f64,
    /// `Uᵀ x*`, the minimizer of the rotated loss.
    pub z_star: Vec<f64>,
}

/// Adversarial run on `k = 4T + 2` with the general lower bound checks and replay.
pub fn cmd_resist(
    method: MethodKind,
    iterations: usize,
    sigma: f64,
    zeta: f64,
) -> Result<ResistOutcome> {
    if iterations == 0 {
        return Err(Error::ZeroIterations);
    }
    let k = 4 * iterations + 2;
    let base = WorstCaseInstance::four_block(k, sigma, zeta)?;
    let prof = analytic::profile(&base)?;
    let a_norm = wcgen::spectral_norm(&base);
    let l = 0.5 * a_norm.value * a_norm.value;
    let spec = MethodSpec::with_lipschitz(method, l);
    let run = resist::adversarial_run(&spec, iterations, sigma, zeta)?;

    let z_star = run.instance.rotation().matvec_t(&prof.x_star);
    let gap = run.trace.final_value() - prof.f_star;
    let dist = linalg::dist_sq(run.trace.last(), &z_star);
    let dist0 = prof.xstar_norm_sq;
    let lb = analytic::bound_general(iterations, a_norm.value, dist0)?;
    let replay_dev = resist::replay_deviation(&spec, &run.instance, &run.trace)?;
    let containment = run.state.containment();
    let at_z = logloss::loss(&run.instance, &z_star)?;
    let span = optimizers::check_linear_span(&run.trace, &InstanceOracle::new(&run.instance))?;

    let verdicts = vec![
        Verdict::above(
            "gap_exceeds_general_bound",
            "general lower bound",
            gap,
            lb.gap_lb,
        ),
        Verdict::above(
            "distance_exceeds_eighth",
            "general lower bound",
            dist,
            lb.dist_lb_factor * dist0,
        ),
        Verdict::at_most(
            "rotation_orthogonal",
            "orthogonal rotation",
            run.state.orthogonality_residual(),
            1e-10,
        ),
        Verdict::at_most(
            "rotation_fixes_atb",
            "rotation fixes Aᵀb",
            run.state.atb_residual(),
            1e-10,
        ),
        Verdict::at_most(
            "replay_matches",
            "indistinguishable oracle",
            replay_dev,
            resist::REPLAY_TOL,
        ),
        Verdict::at_most(
            "answers_unchanged",
            "indistinguishable oracle",
            run.answer_drift,
            resist::REPLAY_TOL,
        ),
        Verdict::at_most(
            "iterates_trapped",
            "rotated trap subspaces",
            containment.tight,
            resist::CONTAINMENT_TOL,
        )
        .with_detail(format!(
            "tight (2i+1) residual {:.3e}, loose (2i+3) residual {:.3e}",
            containment.tight, containment.loose
        )),
        Verdict::at_most(
            "rotated_optimum_value",
            "rotation preserves the optimal value",
            (at_z.value - prof.f_star).abs() / (1.0 + prof.f_star.abs()),
            1e-10,
        ),
    ];

    let report = ExperimentReport {
        config: ReportConfig {
            command: "resist".into(),
            method,
            k,
            sigma,
            zeta,
            iterations,
            variant: Variant::FourBlock,
        },
        measured: Measured {
            final_gap: gap,
            final_dist_sq: dist,
            dist0_sq: dist0,
            a_norm: a_norm.value,
            a_norm_converged: a_norm.converged,
            lipschitz: l,
            oracle_calls: run.trace.oracle_calls,
            span_method: span,
        },
        theoretical: Theoretical {
            bound: "general".into(),
            gap_lower_bound: lb.gap_lb,
            dist_factor: lb.dist_lb_factor,
            agd_upper_bound: analytic::agd_upper_bound(l, dist0, iterations),
            a_norm_upper_bound: base.norm_upper_bound(),
            sandwich_ratio: None,
            sandwich_ratio_formula: None,
        },
        verdicts,
        generated_unix: None,
    };
    Ok(ResistOutcome {
        report,
        run,
        f_star: prof.f_star,
        z_star,
    })
}

fn zeta_grid() -> [f64; 3] {
    [0.5, 1.0, 2.0]
}

/// Runs the analytic identity checks for every `k <= max_k`.
pub fn cmd_verify(max_k: usize) -> Result<VerifyReport> {
    if max_k < 2 {
        return Err(Error::InvalidParameter(format!(
            "max_k must be at least 2, got {max_k}"
        )));
    }
    let mut checks = Vec::new();
    let mut rng = rand::rngs::StdRng::seed_from_u64(VERIFY_SEED);

    // optimum, optimal value and zero intercept
    let (mut grad_worst, mut value_worst, mut icpt_worst) = (0.0f64, 0.0f64, 0.0f64);
    for zeta in zeta_grid() {
        let sigma = 1.3 * zeta;
        for k in 1..=max_k {
            let inst = WorstCaseInstance::four_block(k, sigma, zeta)?;
            let p = analytic::profile(&inst)?;
            let r = logloss::loss(&inst, &p.x_star)?;
            grad_worst = grad_worst.max(norm_inf(&r.gradient));
            value_worst = value_worst.max((r.value - p.f_star).abs() / (1.0 + p.f_star.abs()));
            icpt_worst = icpt_worst.max(logloss::phi(&inst, &p.x_star, 0.0)?.grad_y.abs());
        }
    }
    checks.push(Verdict::at_most(
        "gradient_at_optimum",
        "closed-form minimizer",
        grad_worst,
        1e-9,
    ));
    checks.push(Verdict::at_most(
        "optimal_value_formula",
        "closed-form optimal value",
        value_worst,
        1e-10,
    ));
    checks.push(Verdict::at_most(
        "intercept_partial_zero",
        "zero optimal intercept",
        icpt_worst,
        1e-9,
    ));

    // root quality and bracket
    let mut root_worst = 0.0f64;
    let mut in_bracket = true;
    for i in 1..=100 {
        let ratio = 1.0 + i as f64 / 101.0;
        let c = analytic::solve_c(ratio, 1.0)?;
        root_worst = root_worst.max(analytic::root_residual(ratio, 1.0, c).abs());
        let (lb, ub) = analytic::c_bracket(ratio, 1.0).expect("ratio < 2");
        in_bracket &= lb <= c && c <= ub;
    }
    checks.push(Verdict::at_most(
        "root_residual",
        "scale equation for c",
        root_worst,
        1e-12,
    ));
    checks.push(Verdict::new(
        "root_in_bracket",
        "bracket for c",
        in_bracket,
        0.0,
    ));

    let (s, z) = (DEFAULT_SIGMA, DEFAULT_ZETA);
    let sub_k = max_k.min(30);

    // gradient maps K_t into K_{t+1}
    let mut leak_worst = 0.0f64;
    for k in 2..=sub_k {
        let inst = WorstCaseInstance::four_block(k, s, z)?;
        for t in 1..k {
            for _ in 0..100 {
                let mut x = vec![0.0; k];
                for v in &mut x[k - t..] {
                    *v = rng.gen_range(-2.0..2.0);
                }
                let g = logloss::loss(&inst, &x)?.gradient;
                leak_worst = leak_worst.max(analytic::subspace_leakage(&g, t + 1));
            }
        }
    }
    checks.push(Verdict::at_most(
        "gradient_subspace_step",
        "gradient maps K_t into K_(t+1)",
        leak_worst,
        1e-10,
    ));

    // span methods stay trapped
    let mut trap_worst = 0.0f64;
    for k in 2..=sub_k {
        let inst = WorstCaseInstance::four_block(k, s, z)?;
        let l = logloss::lipschitz(&inst);
        for kind in [MethodKind::Gd, MethodKind::Agd, MethodKind::HeavyBall] {
            let spec = MethodSpec::with_lipschitz(kind, l);
            let trace = optimizers::run(&spec, &mut InstanceOracle::new(&inst), k)?;
            for (t, x) in trace.iterates.iter().enumerate() {
                trap_worst = trap_worst.max(analytic::subspace_leakage(x, t));
            }
            for (t, q) in trace.queries.iter().enumerate() {
                trap_worst = trap_worst.max(analytic::subspace_leakage(q, t));
            }
        }
    }
    checks.push(Verdict::at_most(
        "span_iterates_trapped",
        "span methods stay in K_t",
        trap_worst,
        1e-10,
    ));

    // restricted optimum identity
    let c = analytic::solve_c(s, z)?;
    let (mut restr_worst, mut restr_grad) = (0.0f64, 0.0f64);
    for k in 2..=max_k {
        let inst = WorstCaseInstance::four_block(k, s, z)?;
        let fk = analytic::f_star(k, s, z, c);
        for t in 1..k {
            let mut x = vec![0.0; k - t];
            x.extend(analytic::x_star(t, c));
            let r = logloss::loss(&inst, &x)?;
            let expect = 8.0 * (k - t) as f64 * LN_2 + analytic::f_star(t, s, z, c);
            restr_worst = restr_worst.max((r.value - expect).abs());
            restr_grad = restr_grad.max(norm_inf(&r.gradient[k - t..]));
            let gap = analytic::subspace_gap(k, t, s, z)?;
            restr_worst = restr_worst.max((gap - (expect - fk)).abs());
        }
    }
    checks.push(Verdict::at_most(
        "restricted_optimum_value",
        "restricted optimum identity",
        restr_worst,
        1e-9,
    ));
    checks.push(Verdict::at_most(
        "restricted_optimum_gradient",
        "restricted optimum identity",
        restr_grad,
        1e-9,
    ));

    // ratio constant
    let bracket_c = analytic::constant_c_ratio(s, z)?;
    checks.push(
        Verdict::above("ratio_constant_exceeds_half", "ratio constant C(1.3) > 1/2", bracket_c, 0.5)
            .with_detail(format!(
                "bracket constant C(1.3) = {bracket_c:.6}; the closed-form bracket loses a factor (c_lb/c_ub)^2"
            )),
    );
    let sharp = analytic::sharp_ratio_constant(s, z)?;
    let mut gap_margin = f64::INFINITY;
    for k in 2..=max_k {
        for t in 1..k {
            let bound = 2.0 * (k - t) as f64 * c * c * s * s;
            gap_margin = gap_margin.min(analytic::subspace_gap(k, t, s, z)? - bound);
        }
    }
    checks.push(
        Verdict::new(
            "subspace_gap_exceeds_half_constant",
            "coordinate gap >= c^2 sigma^2 / 2 at ratio 1.3",
            sharp > 0.5 && gap_margin >= 0.0,
            gap_margin,
        )
        .with_detail(format!("exact ratio constant {sharp:.6}")),
    );

    // spectral norm
    let (mut norm_margin, mut sigma_margin) = (f64::INFINITY, f64::INFINITY);
    for k in 1..=max_k {
        let inst = WorstCaseInstance::four_block(k, s, z)?;
        let n = wcgen::spectral_norm(&inst).value;
        norm_margin = norm_margin.min(inst.norm_upper_bound() + 1e-8 - n);
        sigma_margin = sigma_margin.min(8.0 * s - n);
    }
    checks.push(Verdict::new(
        "norm_bound",
        "spectral norm bound",
        norm_margin >= 0.0,
        norm_margin,
    ));
    checks.push(Verdict::new(
        "norm_below_eight_sigma",
        "norm below 8 sigma",
        sigma_margin > 0.0,
        sigma_margin,
    ));

    Ok(VerifyReport {
        max_k,
        checks,
        generated_unix: None,
    })
}
