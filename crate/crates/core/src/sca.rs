//! The outer successive-convex-approximation loop.
//!
//! Each case runs the same recipe: start from a strictly feasible lifted
//! iterate, assemble the linearized subproblem around it, solve, move the
//! expansion point to the solution, and stop once the surrogate objective
//! changes by less than `epsilon`. Because every solution of one
//! subproblem is feasible for the next (the surrogates are tight at their
//! expansion point), the objective trace is nondecreasing and, being
//! bounded by the power budget, converges.
//!
//! Initialization uses matched-filter precoders with a fixed power split;
//! when the case's sign pattern fails there, a feasibility-restoration
//! loop (maximize the minimum pattern slack with the same machinery) either
//! produces a valid start or declares the case infeasible for this channel.

use rayon::prelude::*;
use serde::Serialize;

use crate::cases::{
    assemble_restoration, assemble_shaped, iterate_from_design, original_case_residuals_shaped,
    CaseId, ScaIterate, SchemeShape, Sign, VarLayout, RHO_MIN_QOL, THETA_MIN,
};
use crate::channel::{ChannelSet, PowerBudget};
use crate::cx::{norm_sq, project_orthogonal};
use crate::error::{Error, Result};
use crate::rates::{achievable_rates, secrecy_sum_rate, PrecoderDesign, RateBundle};
use crate::schemes::SchemeId;
use crate::solver::{solve, SolverConfig, SolverStatus};
use num_complex::Complex64;

/// Relative slack used when deriving auxiliaries from true rates, so warm
/// starts sit strictly inside the surrogate constraints.
const START_SLACK: f64 = 1e-5;
/// Pattern margin the restoration loop must reach before a case start is
/// accepted.
const RESTORE_MARGIN: f64 = 3e-4;
/// Audit tolerance on the original nonconvex constraints.
pub const FEASIBILITY_TOL: f64 = 1e-6;

/// Outer-loop configuration.
#[derive(Debug, Clone)]
pub struct ScaConfig {
    /// Convergence tolerance on `|t[n] - t[n-1]|`.
    pub epsilon: f64,
    pub max_outer_iters: usize,
    pub solver: SolverConfig,
    /// Cap on feasibility-restoration rounds during initialization.
    pub max_restoration_iters: usize,
}

impl Default for ScaConfig {
    fn default() -> Self {
        ScaConfig {
            epsilon: 1e-3,
            max_outer_iters: 200,
            solver: SolverConfig::default(),
            max_restoration_iters: 10,
        }
    }
}

impl ScaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidValue(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        self.solver.validate()
    }
}

/// How a per-case run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CaseStatus {
    /// `|t[n] - t[n-1]| <= epsilon` reached.
    Converged,
    /// Outer-iteration cap hit first.
    IterCap,
    /// A subproblem solve failed or an invariant broke; the best point
    /// found so far is reported.
    Degraded,
    /// No strictly feasible start exists for this case on this channel.
    Infeasible,
}

/// Result of running the loop on one case.
#[derive(Debug, Clone)]
pub struct CaseSolution {
    pub case: CaseId,
    /// Best iterate encountered (by true secrecy sum rate).
    pub iterate: ScaIterate,
    /// Surrogate-objective trace `t[0..=n]`; `t[0]` is the value at the
    /// initial iterate.
    pub trace: Vec<f64>,
    /// Exact secrecy sum rate of `iterate.design`.
    pub true_ssr: f64,
    /// Outer iterations performed.
    pub iters: usize,
    pub status: CaseStatus,
    /// Worst original-constraint slack over all accepted iterates.
    pub min_original_slack: f64,
    /// Total interior-point Newton steps.
    pub newton_iters: usize,
    pub wall_ms: f64,
}

impl CaseSolution {
    fn infeasible(case: CaseId, n_t: usize, theta: f64) -> Self {
        CaseSolution {
            case,
            iterate: zero_iterate(n_t, theta),
            trace: Vec::new(),
            true_ssr: 0.0,
            iters: 0,
            status: CaseStatus::Infeasible,
            min_original_slack: f64::INFINITY,
            newton_iters: 0,
            wall_ms: 0.0,
        }
    }
}

/// Converged design for one scheme on one channel.
#[derive(Debug, Clone)]
pub struct Solution {
    pub scheme: SchemeId,
    /// One entry per attempted case.
    pub cases: Vec<CaseSolution>,
    /// Index of the winning case in `cases`.
    pub best: usize,
    /// Exact secrecy sum rate of the winning design.
    pub ssr: f64,
    pub rates: RateBundle,
    pub channel_fingerprint: String,
    pub epsilon: f64,
}

impl Solution {
    pub fn best_case(&self) -> &CaseSolution {
        &self.cases[self.best]
    }

    pub fn design(&self) -> &PrecoderDesign {
        &self.best_case().iterate.design
    }

    /// JSON document with the design (complex entries as `[re, im]`),
    /// per-case traces, the exact rate bundle and the configuration echo.
    pub fn to_json(&self) -> serde_json::Value {
        let pairs = |v: &[Complex64]| -> Vec<[f64; 2]> { v.iter().map(|z| [z.re, z.im]).collect() };
        let d = self.design();
        serde_json::json!({
            "scheme": self.scheme.label(),
            "ssr_bits": self.ssr,
            "design": {
                "p_c": pairs(&d.p_c),
                "p_1": pairs(&d.p_1),
                "p_2": pairs(&d.p_2),
                "theta": d.theta,
            },
            "rates": self.rates,
            "winning_case": self.best_case().case.label(),
            "cases": self.cases.iter().map(|c| serde_json::json!({
                "case": c.case.label(),
                "status": c.status,
                "objective_trace": c.trace,
                "true_ssr": c.true_ssr,
                "iters": c.iters,
                "min_original_slack": if c.min_original_slack.is_finite() {
                    serde_json::json!(c.min_original_slack)
                } else {
                    serde_json::Value::Null
                },
            })).collect::<Vec<_>>(),
            "channel_fingerprint": self.channel_fingerprint,
            "config": {
                "epsilon": self.epsilon,
            },
        })
    }
}

fn zero_iterate(n_t: usize, theta: f64) -> ScaIterate {
    ScaIterate {
        design: PrecoderDesign::zero(n_t, theta),
        alpha_p: [0.0; 4],
        alpha_c: [0.0; 3],
        beta_p: [0.0; 4],
        beta_c: [0.0; 3],
        rho_p: [RHO_MIN_QOL; 4],
        rho_c: [RHO_MIN_QOL; 3],
    }
}

// ---------------------------------------------------------------------------
// Starting points
// ---------------------------------------------------------------------------

fn unit_direction(v: &[Complex64], n_t: usize) -> Vec<Complex64> {
    let n = norm_sq(v).sqrt();
    if n < 1e-12 {
        let mut e = vec![Complex64::new(0.0, 0.0); n_t];
        e[0] = Complex64::new(1.0, 0.0);
        e
    } else {
        v.iter().map(|z| z / n).collect()
    }
}

/// Matched-filter start: private precoders along the user channels, the
/// common precoder along their sum, power split 40/30/30 (renormalized
/// over the active columns) at a small back-off from the budget.
fn matched_filter_design(shape: SchemeShape, cs: &ChannelSet, pb: &PowerBudget) -> PrecoderDesign {
    let mut w_c = if shape.common { 0.4 } else { 0.0 };
    let mut w = [0.0f64; 2];
    for k in 0..2 {
        if shape.private_active[k] {
            w[k] = 0.3;
        }
    }
    let total = w_c + w[0] + w[1];
    if total > 0.0 {
        w_c /= total;
        w[0] /= total;
        w[1] /= total;
    }
    let pt = pb.p_t * 0.99;
    let scaled = |dir: Vec<Complex64>, frac: f64| -> Vec<Complex64> {
        dir.into_iter().map(|z| z * (frac * pt).sqrt()).collect()
    };
    let sum: Vec<Complex64> = cs.h1.iter().zip(&cs.h2).map(|(a, b)| a + b).collect();
    PrecoderDesign {
        p_c: scaled(unit_direction(&sum, cs.n_t), w_c),
        p_1: scaled(unit_direction(&cs.h1, cs.n_t), w[0]),
        p_2: scaled(unit_direction(&cs.h2, cs.n_t), w[1]),
        theta: shape.theta_fixed.unwrap_or(0.5),
    }
}

/// Pulls an arbitrary design into the open region the linearizations need:
/// `theta` inside its bounds, power strictly inside the ball, and every
/// active column non-degenerate (a vanishing column would make its tangent
/// plane useless and the lifted chain infeasible).
fn prepare_design(
    shape: SchemeShape,
    case: CaseId,
    d: &PrecoderDesign,
    cs: &ChannelSet,
    pb: &PowerBudget,
) -> PrecoderDesign {
    let mut out = d.clone();
    out.theta = match shape.theta_fixed {
        Some(v) => v,
        None => out.theta.clamp(2.0 * THETA_MIN, 1.0 - 1e-9),
    };
    // A column whose power falls below this target makes its lifted rate
    // chain collapse onto the feasible-set boundary (its strict inequality
    // degenerates to 0 <= 0), so weak columns are topped up along a
    // direction that holds the inequality with real margin.
    let target = 1e-4 * pb.p_t;
    let top_up = |col: &mut Vec<Complex64>, dir: &[Complex64]| {
        let have = norm_sq(col);
        if have < target {
            let u = unit_direction(dir, cs.n_t);
            let a = (target - have).sqrt();
            for (c, d) in col.iter_mut().zip(&u) {
                *c += d * a;
            }
        }
    };
    let signs = case.signs();
    if shape.common {
        // point the common stream away from the eavesdropper so the
        // decodability guard C_ce < R_c holds strictly
        let sum: Vec<Complex64> = cs.h1.iter().zip(&cs.h2).map(|(a, b)| a + b).collect();
        let dir = pick_direction(project_orthogonal(&sum, &cs.g1), &cs.g1, cs.n_t);
        top_up(&mut out.p_c, &dir);
    } else {
        out.p_c = vec![Complex64::new(0.0, 0.0); cs.n_t];
    }
    for k in 0..2 {
        let (col, h) = if k == 0 { (&mut out.p_1, &cs.h1) } else { (&mut out.p_2, &cs.h2) };
        if !shape.private_active[k] {
            *col = vec![Complex64::new(0.0, 0.0); cs.n_t];
            continue;
        }
        let dir = match signs[k] {
            // retained secrecy: favor the user (R_pk > C_ke strictly)
            Sign::Ge => pick_direction(project_orthogonal(h, &cs.g1), &cs.g1, cs.n_t),
            // clamped secrecy: favor the leak (R_pk < C_ke strictly)
            Sign::Le => pick_direction(project_orthogonal(&cs.g1, h), h, cs.n_t),
        };
        top_up(col, &dir);
    }
    let power = out.power();
    let cap = pb.p_t * (1.0 - 1e-9);
    if power > cap {
        let s = (cap / power).sqrt();
        for col in [&mut out.p_c, &mut out.p_1, &mut out.p_2] {
            for z in col.iter_mut() {
                *z *= s;
            }
        }
    }
    out
}

/// Uses `preferred` unless it degenerated to (near) zero, in which case
/// any direction orthogonal to `avoid` serves.
fn pick_direction(preferred: Vec<Complex64>, avoid: &[Complex64], n_t: usize) -> Vec<Complex64> {
    if norm_sq(&preferred) > 1e-12 {
        return preferred;
    }
    for i in 0..n_t {
        let mut e = vec![Complex64::new(0.0, 0.0); n_t];
        e[i] = Complex64::new(1.0, 0.0);
        let p = project_orthogonal(&e, avoid);
        if norm_sq(&p) > 1e-6 {
            return p;
        }
    }
    preferred
}

/// Builds a strictly feasible start for `case` at (or near) `design`,
/// running restoration rounds when the sign pattern fails. `None` means
/// the case is infeasible for this channel.
fn make_start(
    shape: SchemeShape,
    case: CaseId,
    design: &PrecoderDesign,
    cs: &ChannelSet,
    pb: &PowerBudget,
    cfg: &ScaConfig,
) -> Option<ScaIterate> {
    let layout = VarLayout::build(cs.n_t, shape);
    let mut design = prepare_design(shape, case, design, cs, pb);
    let mut prev_slack = f64::NEG_INFINITY;

    for round in 0..=cfg.max_restoration_iters {
        let it = iterate_from_design(shape, case, &design, cs, pb, START_SLACK);
        let program = assemble_shaped(shape, case, &it, cs, pb).ok()?;
        let x = layout.vectorize(&it);
        if program.is_strictly_feasible(&x, 0.0) {
            return Some(it);
        }
        if round == cfg.max_restoration_iters {
            break;
        }

        // Restoration step: maximize the common pattern slack around the
        // current point.
        let (rp, s_slot) = assemble_restoration(shape, case, &it, cs, pb).ok()?;
        let mut warm = nalgebra::DVector::zeros(rp.n_vars);
        warm.rows_mut(0, x.len()).copy_from(&x);
        // worst pattern violation at the embedding (blocks that carry s)
        let mut worst = f64::NEG_INFINITY;
        for b in &rp.blocks {
            if let crate::program::BlockKind::Affine { a, b: c0 } = &b.kind {
                if a[s_slot] != 0.0 {
                    let mut v = *c0;
                    for i in 0..x.len() {
                        v += a[i] * x[i];
                    }
                    worst = worst.max(v);
                }
            }
        }
        if !worst.is_finite() {
            return None;
        }
        warm[s_slot] = -worst - 0.05 * (1.0 + worst.abs());
        let r = solve(&rp, &cfg.solver, Some(&warm));
        if !matches!(r.status, SolverStatus::Optimal | SolverStatus::MaxIters) {
            return None;
        }
        // The surrogate slack underestimates what the re-derived embedding
        // achieves (surrogates are conservative), so keep iterating while
        // it improves; a stalled negative margin certifies infeasibility.
        let slack = r.x[s_slot];
        if slack < RESTORE_MARGIN && slack <= prev_slack + 1e-7 {
            return None;
        }
        prev_slack = slack;
        let restored = layout.extract(&nalgebra::DVector::from(r.x.rows(0, layout.n_vars)));
        design = prepare_design(shape, case, &restored.design, cs, pb);
    }
    None
}

/// Builds the initial iterate of `case` for the full CRS scheme, or
/// signals that the case is infeasible on this channel.
pub fn initialize(case: CaseId, cs: &ChannelSet, pb: &PowerBudget) -> Result<ScaIterate> {
    initialize_shaped(SchemeShape::crs(), case, cs, pb, &ScaConfig::default())
}

pub fn initialize_shaped(
    shape: SchemeShape,
    case: CaseId,
    cs: &ChannelSet,
    pb: &PowerBudget,
    cfg: &ScaConfig,
) -> Result<ScaIterate> {
    let mf = matched_filter_design(shape, cs, pb);
    make_start(shape, case, &mf, cs, pb, cfg)
        .ok_or_else(|| Error::Domain(format!("{case} admits no feasible start on this channel")))
}

// ---------------------------------------------------------------------------
// The per-case loop
// ---------------------------------------------------------------------------

/// Crude upper bound on any case objective: three streams, each at the
/// best single-link rate the budget allows.
fn trace_bound(cs: &ChannelSet, pb: &PowerBudget) -> f64 {
    let best_gain = norm_sq(&cs.h1)
        .max(norm_sq(&cs.h2))
        .max(norm_sq(&cs.g1))
        .max(cs.h3.norm_sqr())
        .max(cs.g2.norm_sqr());
    let min_sigma = cs
        .sigma2
        .u1
        .min(cs.sigma2.u2)
        .min(cs.sigma2.u3)
        .min(cs.sigma2.e1)
        .min(cs.sigma2.e2);
    3.0 * (1.0 + pb.p_t.max(pb.p_r) * best_gain / min_sigma).log2()
}

/// Runs the SCA loop on one case of the full CRS scheme.
pub fn sca_solve_case(
    case: CaseId,
    init: ScaIterate,
    cs: &ChannelSet,
    pb: &PowerBudget,
    cfg: &ScaConfig,
) -> CaseSolution {
    sca_solve_case_shaped(SchemeShape::crs(), case, init, cs, pb, cfg)
}

pub fn sca_solve_case_shaped(
    shape: SchemeShape,
    case: CaseId,
    init: ScaIterate,
    cs: &ChannelSet,
    pb: &PowerBudget,
    cfg: &ScaConfig,
) -> CaseSolution {
    let start = std::time::Instant::now();
    let layout = VarLayout::build(cs.n_t, shape);
    let bound = trace_bound(cs, pb);

    let mut it = init.clone();
    let mut best_it = init.clone();
    let mut best_ssr = secrecy_sum_rate(&init.design, cs, pb);
    let mut trace = vec![init.case_objective(shape, case)];
    let mut min_slack = original_case_residuals_shaped(shape, case, &init, cs, pb).min_slack();
    let mut newton_iters = 0usize;
    let mut warm = layout.vectorize(&it);
    let mut status = CaseStatus::IterCap;
    let mut iters = 0usize;

    for n in 1..=cfg.max_outer_iters {
        iters = n;
        let program = match assemble_shaped(shape, case, &it, cs, pb) {
            Ok(p) => p,
            Err(_) => {
                status = CaseStatus::Degraded;
                break;
            }
        };
        let r = solve(&program, &cfg.solver, Some(&warm));
        newton_iters += r.iterations;
        // A near-optimal exit is still a valid SCA step as long as the
        // point is feasible and the duality gap is far below the outer
        // tolerance; only real breakdowns degrade the run.
        let usable = r.status == SolverStatus::Optimal
            || (r.status == SolverStatus::MaxIters
                && r.residuals.primal == 0.0
                && r.barrier_gap <= 1e-7);
        if !usable {
            status = CaseStatus::Degraded;
            break;
        }

        let t_prev = *trace.last().unwrap();
        let t_n = r.objective;
        trace.push(t_n);
        it = layout.extract(&r.x);
        warm = r.x;

        let slack = original_case_residuals_shaped(shape, case, &it, cs, pb).min_slack();
        min_slack = min_slack.min(slack);
        let ssr = secrecy_sum_rate(&it.design, cs, pb);
        if ssr > best_ssr {
            best_ssr = ssr;
            best_it = it.clone();
        }

        if t_n < t_prev - 1e-6 || t_n > bound {
            status = CaseStatus::Degraded;
            break;
        }
        if (t_n - t_prev).abs() <= cfg.epsilon {
            status = CaseStatus::Converged;
            break;
        }
    }

    CaseSolution {
        case,
        iterate: best_it,
        trace,
        true_ssr: best_ssr,
        iters,
        status,
        min_original_slack: min_slack,
        newton_iters,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    }
}

// ---------------------------------------------------------------------------
// The four-case dispatcher
// ---------------------------------------------------------------------------

/// A warm starting design for one case, typically a baseline scheme's
/// solution embedded into the CRS variable space.
#[derive(Debug, Clone)]
pub struct WarmStart {
    pub case: CaseId,
    pub design: PrecoderDesign,
}

/// Chooses the case whose sign pattern a design satisfies (ties and
/// boundary zeros fall to the clamped side, which the slack-backed
/// embedding can represent strictly).
pub fn matching_case(
    shape: SchemeShape,
    design: &PrecoderDesign,
    cs: &ChannelSet,
    pb: &PowerBudget,
) -> CaseId {
    let r = achievable_rates(design, cs, pb);
    let slacks = [r.r_p1 - r.c_1e, r.r_p2 - r.c_2e];
    let tol = 1e-4;
    let ge = [0usize, 1].map(|k| shape.private_active[k] && slacks[k] > tol);
    match ge {
        [true, true] => CaseId::Case1,
        [true, false] => CaseId::Case2,
        [false, true] => CaseId::Case3,
        [false, false] => CaseId::Case4,
    }
}

/// Solves the full CRS program: all four cases (skipping infeasible
/// ones), optionally warm-started, returning the case with the highest
/// exact secrecy sum rate.
pub fn solve_ssr(
    cs: &ChannelSet,
    pb: &PowerBudget,
    cfg: &ScaConfig,
    warm: &[WarmStart],
) -> Solution {
    solve_cases_shaped(SchemeShape::crs(), SchemeId::Crs, &CaseId::ALL, cs, pb, cfg, warm)
}

pub fn solve_cases_shaped(
    shape: SchemeShape,
    scheme: SchemeId,
    cases: &[CaseId],
    cs: &ChannelSet,
    pb: &PowerBudget,
    cfg: &ScaConfig,
    warm: &[WarmStart],
) -> Solution {
    let runs: Vec<CaseSolution> = cases
        .par_iter()
        .map(|&case| {
            let mf = matched_filter_design(shape, cs, pb);
            let mut starts: Vec<PrecoderDesign> = vec![mf];
            starts.extend(warm.iter().filter(|w| w.case == case).map(|w| w.design.clone()));

            let mut best: Option<CaseSolution> = None;
            for design in &starts {
                let Some(init) = make_start(shape, case, design, cs, pb, cfg) else {
                    continue;
                };
                let sol = sca_solve_case_shaped(shape, case, init, cs, pb, cfg);
                let better = match &best {
                    Some(b) => sol.true_ssr > b.true_ssr,
                    None => true,
                };
                if better {
                    best = Some(sol);
                }
            }
            best.unwrap_or_else(|| {
                CaseSolution::infeasible(case, cs.n_t, shape.theta_fixed.unwrap_or(0.5))
            })
        })
        .collect();

    let mut best = 0usize;
    for (i, c) in runs.iter().enumerate() {
        let cur = &runs[best];
        let better = match (c.status, cur.status) {
            (CaseStatus::Infeasible, _) => false,
            (_, CaseStatus::Infeasible) => true,
            _ => c.true_ssr > cur.true_ssr,
        };
        if better {
            best = i;
        }
    }
    // all cases infeasible: fall back to the zero design with zero rate
    let all_infeasible = runs.iter().all(|c| c.status == CaseStatus::Infeasible);
    let (rates, ssr) = if all_infeasible {
        let z = PrecoderDesign::zero(cs.n_t, shape.theta_fixed.unwrap_or(0.5));
        (achievable_rates(&z, cs, pb), 0.0)
    } else {
        let d = &runs[best].iterate.design;
        let r = achievable_rates(d, cs, pb);
        (r, r.total)
    };

    Solution {
        scheme,
        cases: runs,
        best,
        ssr,
        rates,
        channel_fingerprint: cs.fingerprint(),
        epsilon: cfg.epsilon,
    }
}
