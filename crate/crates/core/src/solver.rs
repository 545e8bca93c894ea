//! Log-barrier interior-point solver for the assembled subproblems.
//!
//! All constraint families are smooth convex functions on their domains,
//! so one uniform method covers every program the case assembler emits:
//! minimize `t*f0(x) - sum_i log(-g_i(x))` by damped Newton steps with
//! backtracking line search, increase `t` geometrically, and stop once the
//! duality-gap estimate `m/t` drops below the KKT tolerance. A phase-I
//! stage (minimize the maximum soft-constraint violation through an extra
//! slack variable) produces a strictly feasible start whenever the caller
//! cannot supply one.
//!
//! The solver is fully deterministic: identical programs, configurations
//! and warm starts produce bitwise identical results.

use nalgebra::{DMatrix, DVector};

use crate::program::{Block, BlockKind, ConvexProgram};

/// Interior-point configuration.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Bound on all three KKT residuals at an `Optimal` exit.
    pub kkt_tol: f64,
    /// Newton-iteration cap per barrier stage.
    pub max_iters: usize,
    /// Initial barrier weight (duality-gap estimate per constraint starts
    /// at this value).
    pub barrier_init: f64,
    /// Geometric barrier-weight reduction per stage, in (0, 1).
    pub barrier_reduction: f64,
    /// Armijo slope fraction for the backtracking line search.
    pub armijo: f64,
    /// Step shrink factor for the backtracking line search.
    pub backtrack: f64,
    /// Line-search iteration cap.
    pub max_backtracks: usize,
    /// Newton decrement threshold that ends a centering stage.
    pub newton_tol: f64,
    /// Emit one log line per Newton step on stderr.
    pub verbose: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            kkt_tol: 1e-8,
            max_iters: 100,
            barrier_init: 1.0,
            barrier_reduction: 0.1,
            armijo: 0.01,
            backtrack: 0.5,
            max_backtracks: 70,
            newton_tol: 1e-11,
            verbose: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> crate::Result<()> {
        if !(self.kkt_tol > 0.0) {
            return Err(crate::Error::InvalidValue(format!(
                "kkt_tol must be positive, got {}",
                self.kkt_tol
            )));
        }
        if !(self.barrier_reduction > 0.0 && self.barrier_reduction < 1.0) {
            return Err(crate::Error::InvalidValue(format!(
                "barrier_reduction must lie in (0, 1), got {}",
                self.barrier_reduction
            )));
        }
        Ok(())
    }
}

/// Exit condition of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverStatus {
    /// All KKT residuals at or below `kkt_tol`.
    Optimal,
    /// Iteration budget exhausted before reaching the tolerance.
    MaxIters,
    /// Phase-I could not find a strictly feasible point.
    InfeasibleDetected,
    /// Line search or linear algebra collapsed.
    NumericalFailure,
}

/// Stationarity, primal-feasibility and complementarity residuals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResiduals {
    /// `||grad f0 + sum lambda_i grad g_i||_inf`.
    pub stationarity: f64,
    /// `max_i max(0, g_i)`.
    pub primal: f64,
    /// `sum_i lambda_i * (-g_i)` (the duality-gap estimate).
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.primal).max(self.complementarity)
    }
}

/// Solver output: the primal point, per-constraint multiplier estimates and
/// bookkeeping.
#[derive(Debug, Clone)]
pub struct SolverResult {
    pub x: DVector<f64>,
    /// Value of the program's (maximized) objective at `x`.
    pub objective: f64,
    pub status: SolverStatus,
    pub residuals: KktResiduals,
    /// Duality-gap estimate straight from the barrier (`m/t` at exit),
    /// independent of the dual-certificate refinement behind `residuals`.
    pub barrier_gap: f64,
    /// Multiplier estimate per constraint block.
    pub multipliers: Vec<f64>,
    /// Total Newton iterations across all barrier stages.
    pub iterations: usize,
    pub wall_ms: f64,
}

struct Barrier<'a> {
    blocks: &'a [Block],
    /// minimize `t * f0` with `f0 = -objective . x`
    f0_grad: DVector<f64>,
}

impl<'a> Barrier<'a> {
    /// Barrier value `t*f0(x) - sum log(-g_i)`; `None` outside the interior.
    fn value(&self, t: f64, x: &DVector<f64>) -> Option<f64> {
        let mut v = t * self.f0_grad.dot(x);
        for b in self.blocks {
            if !b.kind.domain_ok(x) {
                return None;
            }
            let g = b.kind.eval(x);
            if g >= 0.0 {
                return None;
            }
            v -= (-g).ln();
        }
        Some(v)
    }

    /// Gradient and Hessian of the barrier at an interior point.
    fn grad_hess(&self, t: f64, x: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let n = x.len();
        let mut grad = &self.f0_grad * t;
        let mut hess = DMatrix::zeros(n, n);
        for b in self.blocks {
            let g = b.kind.eval(x);
            let gg = b.kind.grad(x);
            let inv = -1.0 / g; // positive in the interior
            grad.axpy(inv, &gg, 1.0);
            hess.ger(inv * inv, &gg, &gg, 1.0);
            b.kind.add_hessian(x, inv, &mut hess);
        }
        (grad, hess)
    }
}

/// Solves the Newton system `H d = -g` by Cholesky, retrying with an
/// escalating ridge when the factorization fails.
fn newton_direction(hess: &DMatrix<f64>, grad: &DVector<f64>) -> Option<DVector<f64>> {
    let n = hess.nrows();
    let scale = hess.diagonal().amax().max(1.0);
    let mut ridge = 0.0;
    for _ in 0..12 {
        let mut h = hess.clone();
        if ridge > 0.0 {
            for i in 0..n {
                h[(i, i)] += ridge;
            }
        }
        if let Some(chol) = h.cholesky() {
            return Some(chol.solve(&(-grad)));
        }
        ridge = if ridge == 0.0 { 1e-12 * scale } else { ridge * 100.0 };
    }
    None
}

/// Solves the program. `warm`, when given, should be strictly feasible;
/// otherwise (or when it is not) a phase-I search runs first.
pub fn solve(p: &ConvexProgram, cfg: &SolverConfig, warm: Option<&DVector<f64>>) -> SolverResult {
    let start = std::time::Instant::now();
    let fail = |status: SolverStatus, x: DVector<f64>, iters: usize| {
        let objective = p.objective.dot(&x);
        let (residuals, multipliers) = residuals_at(p, &x, f64::INFINITY);
        SolverResult {
            x,
            objective,
            status,
            residuals,
            barrier_gap: f64::INFINITY,
            multipliers,
            iterations: iters,
            wall_ms: ms_since(start),
        }
    };

    // Starting point: warm if strictly interior, else phase-I.
    let mut phase1_iters = 0;
    let x0 = match warm {
        Some(w) if p.is_strictly_feasible(w, 1e-12) => w.clone(),
        other => {
            let seed = other.cloned();
            match phase1(p, cfg, seed) {
                Phase1::Feasible { x, iters } => {
                    phase1_iters = iters;
                    x
                }
                Phase1::Infeasible { x, iters } => {
                    return fail(SolverStatus::InfeasibleDetected, x, iters)
                }
                Phase1::Failed { x, iters } => {
                    return fail(SolverStatus::NumericalFailure, x, iters)
                }
            }
        }
    };

    let barrier = Barrier { blocks: &p.blocks, f0_grad: -p.objective.clone() };
    let m = p.blocks.len().max(1) as f64;
    // Barrier weight mu is the duality-gap estimate per constraint: t = m/gap.
    let mut t = m / (m * cfg.barrier_init).max(cfg.kkt_tol);
    // Margin below the tolerance so the reported complementarity m/t clears
    // the check strictly.
    let t_final = m / (0.5 * cfg.kkt_tol);
    let mut x = x0;
    let mut total_iters = phase1_iters;
    let max_stages = 200;

    for _stage in 0..max_stages {
        let last = t >= t_final;
        match center(&barrier, t, x, cfg, last, &mut total_iters) {
            Centered::Ok(next) => x = next,
            Centered::Stalled(next) => {
                // Accept the stall only if we already satisfy the target gap;
                // otherwise report the breakdown honestly.
                x = next;
                if m / t > cfg.kkt_tol {
                    return fail(SolverStatus::NumericalFailure, x, total_iters);
                }
            }
        }
        if t >= t_final {
            break;
        }
        t = (t / cfg.barrier_reduction).min(t_final);
        if total_iters >= cfg.max_iters * max_stages {
            return fail(SolverStatus::MaxIters, x, total_iters);
        }
    }

    let objective = p.objective.dot(&x);
    let (raw_residuals, raw_multipliers) = residuals_at(p, &x, t);
    let barrier_gap = raw_residuals.complementarity;
    let (residuals, multipliers) = refine_multipliers(p, &x, raw_residuals, raw_multipliers);
    let status = if residuals.max() <= cfg.kkt_tol {
        SolverStatus::Optimal
    } else {
        SolverStatus::MaxIters
    };
    SolverResult {
        x,
        objective,
        status,
        residuals,
        barrier_gap,
        multipliers,
        iterations: total_iters,
        wall_ms: ms_since(start),
    }
}

fn ms_since(start: std::time::Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

enum Centered {
    Ok(DVector<f64>),
    Stalled(DVector<f64>),
}

/// Newton centering for a fixed barrier weight. On the final stage the
/// exit criterion is the stationarity residual itself, so `Optimal`
/// results genuinely satisfy the KKT tolerance.
fn center(
    barrier: &Barrier,
    t: f64,
    mut x: DVector<f64>,
    cfg: &SolverConfig,
    final_stage: bool,
    total_iters: &mut usize,
) -> Centered {
    let mut best_decrement = f64::INFINITY;
    let mut no_progress = 0usize;
    for _ in 0..cfg.max_iters {
        let (grad, hess) = barrier.grad_hess(t, &x);
        let stationarity = grad.amax() / t;
        let Some(dir) = newton_direction(&hess, &grad) else {
            return Centered::Stalled(x);
        };
        let decrement = -grad.dot(&dir); // lambda^2
        *total_iters += 1;
        if cfg.verbose {
            eprintln!(
                "  newton: t={t:.3e} lambda2={decrement:.3e} stat={stationarity:.3e}"
            );
        }
        // On the final stage, also accept once the raw stationarity itself
        // clears the tolerance (cheaper refinement downstream).
        if decrement <= cfg.newton_tol.max(1e-18 * t)
            || (final_stage && stationarity <= 0.25 * cfg.kkt_tol)
        {
            return Centered::Ok(x);
        }
        if !decrement.is_finite() {
            return Centered::Stalled(x);
        }
        if decrement <= 0.0 {
            // Direction lost descent (severe ill-conditioning); the point is
            // as centered as the arithmetic allows.
            return Centered::Ok(x);
        }
        // Floating-point plateau: near the central path the decrement stops
        // shrinking once roundoff dominates. Only treat it as convergence
        // when already deep in the quadratic basin (or on the final stage,
        // where the stationarity target may sit below what f64 can reach);
        // Newton's damped phase legitimately hovers for a while.
        if decrement < 0.9 * best_decrement {
            best_decrement = decrement;
            no_progress = 0;
        } else {
            no_progress += 1;
            let basin = decrement <= 1e-7 * (1.0 + t);
            if no_progress >= 6 && (basin || (final_stage && no_progress >= 12)) {
                return Centered::Ok(x);
            }
        }

        // Backtracking line search on the barrier value.
        let f_here = match barrier.value(t, &x) {
            Some(v) => v,
            None => return Centered::Stalled(x),
        };
        let slope = grad.dot(&dir);
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..cfg.max_backtracks {
            let cand = &x + &dir * step;
            if let Some(v) = barrier.value(t, &cand) {
                if v <= f_here + cfg.armijo * step * slope {
                    x = cand;
                    accepted = true;
                    break;
                }
            }
            step *= cfg.backtrack;
        }
        if !accepted {
            // Step collapse: treat a tiny decrement as converged, else stall.
            return if decrement <= 1e-6 * (1.0 + t) {
                Centered::Ok(x)
            } else {
                Centered::Stalled(x)
            };
        }
    }
    Centered::Ok(x)
}

enum Phase1 {
    Feasible { x: DVector<f64>, iters: usize },
    Infeasible { x: DVector<f64>, iters: usize },
    Failed { x: DVector<f64>, iters: usize },
}

/// Minimizes the maximum soft-constraint violation via an epigraph slack:
/// maximize `-s` subject to `g_i(x) - s <= 0` (soft blocks) and the hard
/// blocks unchanged. Exits early once `s` can be pushed strictly negative.
fn phase1(p: &ConvexProgram, cfg: &SolverConfig, seed: Option<DVector<f64>>) -> Phase1 {
    let n = p.n_vars;
    let s_slot = n;

    let mut x0 = seed.unwrap_or_else(|| DVector::zeros(n));
    repair_hard_start(p, &mut x0);
    // The hard blocks must hold strictly at the start.
    for b in p.blocks.iter().filter(|b| b.hard) {
        if !b.kind.domain_ok(&x0) || b.kind.eval(&x0) >= 0.0 {
            return Phase1::Failed { x: x0, iters: 0 };
        }
    }

    let mut q = ConvexProgram::new(n + 1, {
        let mut obj = DVector::zeros(n + 1);
        obj[s_slot] = -1.0;
        obj
    });
    for b in &p.blocks {
        if b.hard {
            q.push(b.label.clone(), true, extend_kind(&b.kind, n + 1, None));
        } else {
            q.push(b.label.clone(), false, extend_kind(&b.kind, n + 1, Some(s_slot)));
        }
    }

    // With no soft blocks the repaired start settles it directly.
    if p.blocks.iter().all(|b| b.hard) {
        return if p.is_strictly_feasible(&x0, 0.0) {
            Phase1::Feasible { x: x0, iters: 0 }
        } else {
            Phase1::Failed { x: x0, iters: 0 }
        };
    }

    // Initial slack above the worst soft violation.
    let soft_max = p
        .blocks
        .iter()
        .filter(|b| !b.hard)
        .map(|b| {
            if b.kind.domain_ok(&x0) {
                b.kind.eval(&x0)
            } else {
                f64::INFINITY
            }
        })
        .fold(f64::NEG_INFINITY, f64::max);
    if !soft_max.is_finite() {
        return Phase1::Failed { x: x0, iters: 0 };
    }
    let mut z = DVector::zeros(n + 1);
    z.rows_mut(0, n).copy_from(&x0);
    z[s_slot] = soft_max + 1.0 + 0.1 * soft_max.abs();

    let barrier = Barrier { blocks: &q.blocks, f0_grad: -q.objective.clone() };
    let m = q.blocks.len().max(1) as f64;
    let mut t = 1.0f64;
    let mut iters = 0usize;
    // Drive the slack clearly negative; stop once strictly feasible with
    // comfortable margin or the gap certifies s* >= 0.
    for _ in 0..60 {
        match center(&barrier, t, z, cfg, false, &mut iters) {
            Centered::Ok(nz) | Centered::Stalled(nz) => z = nz,
        }
        let s = z[s_slot];
        let x = DVector::from(z.rows(0, n));
        if s < 0.0 && p.is_strictly_feasible(&x, 0.0) {
            // Center a little further so the start is comfortably interior.
            if s < -1e-9 || m / t < 1e-10 {
                return Phase1::Feasible { x, iters };
            }
        }
        // Gap small and slack still positive: the program is infeasible.
        if m / t < 1e-10 {
            return if s >= 0.0 {
                Phase1::Infeasible { x, iters }
            } else {
                Phase1::Feasible { x, iters }
            };
        }
        t /= cfg.barrier_reduction;
    }
    let x = DVector::from(z.rows(0, n));
    if p.is_strictly_feasible(&x, 0.0) {
        Phase1::Feasible { x, iters }
    } else {
        Phase1::Failed { x, iters }
    }
}

/// Pads a block to `n_new` variables, optionally wiring `-s` into its
/// affine part.
fn extend_kind(kind: &BlockKind, n_new: usize, s_slot: Option<usize>) -> BlockKind {
    let pad = |v: &DVector<f64>| {
        let mut out = DVector::zeros(n_new);
        out.rows_mut(0, v.len()).copy_from(v);
        if let Some(s) = s_slot {
            out[s] -= 1.0;
        }
        out
    };
    let pad_plain = |v: &DVector<f64>| {
        let mut out = DVector::zeros(n_new);
        out.rows_mut(0, v.len()).copy_from(v);
        out
    };
    match kind {
        BlockKind::Affine { a, b } => BlockKind::Affine { a: pad(a), b: *b },
        BlockKind::Quadratic { q, a, b } => {
            let mut qq = DMatrix::zeros(n_new, n_new);
            qq.view_mut((0, 0), (q.nrows(), q.ncols())).copy_from(q);
            BlockKind::Quadratic { q: qq, a: pad(a), b: *b }
        }
        BlockKind::QuadOverLinear { m, m0, d, e, a, b } => {
            let mut mm = DMatrix::zeros(m.nrows(), n_new);
            mm.view_mut((0, 0), (m.nrows(), m.ncols())).copy_from(m);
            BlockKind::QuadOverLinear {
                m: mm,
                m0: m0.clone(),
                d: pad_plain(d),
                e: *e,
                a: pad(a),
                b: *b,
            }
        }
        BlockKind::Exponential { w, c0, a, b } => {
            BlockKind::Exponential { w: pad_plain(w), c0: *c0, a: pad(a), b: *b }
        }
        BlockKind::PowerBall { slots, limit } => {
            BlockKind::PowerBall { slots: slots.clone(), limit: *limit }
        }
    }
}

/// Pulls an arbitrary seed into the interior of the hard blocks (variable
/// bounds, power ball, quad-over-linear denominators).
fn repair_hard_start(p: &ConvexProgram, x: &mut DVector<f64>) {
    for _ in 0..20 {
        let mut moved = false;
        for b in &p.blocks {
            match &b.kind {
                BlockKind::QuadOverLinear { d, e, .. } => {
                    let v = d.dot(x) + e;
                    if v <= 1e-9 {
                        let dn = d.norm_squared();
                        if dn > 0.0 {
                            x.axpy((1e-6 - v + 1e-9) / dn, d, 1.0);
                            moved = true;
                        }
                    }
                }
                BlockKind::PowerBall { slots, limit } => {
                    let s: f64 = slots.iter().map(|&i| x[i] * x[i]).sum();
                    if s >= *limit {
                        let scale = (0.5 * limit / s).sqrt();
                        for &i in slots {
                            x[i] *= scale;
                        }
                        moved = true;
                    }
                }
                BlockKind::Affine { a, b: c } if b.hard => {
                    let g = a.dot(x) + c;
                    if g >= 0.0 {
                        let an = a.norm_squared();
                        if an > 0.0 {
                            x.axpy(-(g + 1e-6) / an, a, 1.0);
                            moved = true;
                        }
                    }
                }
                _ => {}
            }
        }
        if !moved {
            return;
        }
    }
}

/// Recomputes KKT residuals and multiplier estimates at `x` for barrier
/// weight `1/t` (pass `t = inf` for a bare feasibility report).
fn residuals_at(p: &ConvexProgram, x: &DVector<f64>, t: f64) -> (KktResiduals, Vec<f64>) {
    let mut primal = 0.0f64;
    let mut multipliers = Vec::with_capacity(p.blocks.len());
    for b in &p.blocks {
        let g = if b.kind.domain_ok(x) { b.kind.eval(x) } else { f64::INFINITY };
        primal = primal.max(g.max(0.0));
        let lambda = if g < 0.0 && t.is_finite() { 1.0 / (t * (-g)) } else { 0.0 };
        multipliers.push(lambda);
    }
    let mut stat = -&p.objective; // grad of f0 = -objective
    let mut comp = 0.0;
    for (b, &lambda) in p.blocks.iter().zip(&multipliers) {
        if lambda > 0.0 {
            stat.axpy(lambda, &b.kind.grad(x), 1.0);
            comp += lambda * (-b.kind.eval(x));
        }
    }
    (
        KktResiduals {
            stationarity: stat.amax(),
            primal,
            complementarity: comp,
        },
        multipliers,
    )
}

/// Polishes the dual certificate: the raw barrier multipliers
/// `lambda_i = 1/(t * -g_i)` inherit the floating-point limit of how
/// precisely `x` can straddle the central path, so the stationarity they
/// certify bottoms out around `eps * t`. A small nonnegative least-squares
/// fit over the near-active gradients produces a certificate that is as
/// tight as the geometry allows. The better of the two is kept.
fn refine_multipliers(
    p: &ConvexProgram,
    x: &DVector<f64>,
    raw: KktResiduals,
    raw_mult: Vec<f64>,
) -> (KktResiduals, Vec<f64>) {
    let lambda_max = raw_mult.iter().cloned().fold(0.0f64, f64::max);
    if lambda_max <= 0.0 {
        return (raw, raw_mult);
    }
    let grads: Vec<DVector<f64>> = p.blocks.iter().map(|b| b.kind.grad(x)).collect();
    let slacks: Vec<f64> = p
        .blocks
        .iter()
        .map(|b| if b.kind.domain_ok(x) { (-b.kind.eval(x)).max(0.0) } else { 0.0 })
        .collect();
    let f0 = -&p.objective;

    let score = |lam: &[f64]| -> KktResiduals {
        let mut stat = f0.clone();
        let mut comp = 0.0;
        let mut primal = 0.0f64;
        for (i, b) in p.blocks.iter().enumerate() {
            let g = if b.kind.domain_ok(x) { b.kind.eval(x) } else { f64::INFINITY };
            primal = primal.max(g.max(0.0));
            if lam[i] > 0.0 {
                stat.axpy(lam[i], &grads[i], 1.0);
                comp += lam[i] * (-g);
            }
        }
        KktResiduals { stationarity: stat.amax(), primal, complementarity: comp }
    };

    // Active-set nonnegative least squares with per-constraint Tikhonov
    // weight `slack^2`: minimize ||f0 + A lambda||^2 + sum slack_i^2
    // lambda_i^2, dropping the most negative coordinate until all stay
    // nonnegative. The weight keeps multipliers of inactive constraints
    // near zero (so complementarity stays tight) while leaving active ones
    // essentially unpenalized.
    let nnls = |mut support: Vec<usize>| -> Option<Vec<f64>> {
        let mut lam = vec![0.0; p.blocks.len()];
        for _ in 0..p.blocks.len() + 1 {
            if support.is_empty() {
                return Some(lam);
            }
            let k = support.len();
            let mut ata = DMatrix::zeros(k, k);
            let mut atb = DVector::zeros(k);
            for (r, &i) in support.iter().enumerate() {
                for (c, &j) in support.iter().enumerate() {
                    ata[(r, c)] = grads[i].dot(&grads[j]);
                }
                atb[r] = -grads[i].dot(&f0);
                ata[(r, r)] += slacks[i] * slacks[i];
                ata[(r, r)] += 1e-13 * ata[(r, r)].abs().max(1e-30);
            }
            let sol = match ata.clone().cholesky() {
                Some(ch) => ch.solve(&atb),
                None => ata.lu().solve(&atb)?,
            };
            let (mut worst, mut worst_val) = (None, 0.0f64);
            for (r, &v) in sol.iter().enumerate() {
                if v < worst_val {
                    worst_val = v;
                    worst = Some(r);
                }
            }
            match worst {
                Some(r) => {
                    support.remove(r);
                }
                None => {
                    for (r, &i) in support.iter().enumerate() {
                        lam[i] = sol[r];
                    }
                    return Some(lam);
                }
            }
        }
        None
    };

    // Candidate supports: everything the barrier weighted, and the
    // near-active set alone (blocks are normalized, so slacks are O(1)).
    let full: Vec<usize> = (0..p.blocks.len())
        .filter(|&i| raw_mult[i] > 1e-12 * lambda_max)
        .collect();
    let tight: Vec<usize> = (0..p.blocks.len()).filter(|&i| slacks[i] <= 1e-5).collect();

    let mut best = (raw, raw_mult);
    for support in [full, tight] {
        if support.is_empty() {
            continue;
        }
        if let Some(lam) = nnls(support) {
            let res = score(&lam);
            if res.max() < best.0.max() {
                best = (res, lam);
            }
        }
    }
    best
}

/// Recomputes the KKT residuals of a result from scratch and cross-checks
/// them against the values the solver reported.
pub fn check_kkt(p: &ConvexProgram, r: &SolverResult) -> KktResiduals {
    let mut primal = 0.0f64;
    let mut stat = -&p.objective;
    let mut comp = 0.0;
    for (b, &lambda) in p.blocks.iter().zip(&r.multipliers) {
        let g = if b.kind.domain_ok(&r.x) {
            b.kind.eval(&r.x)
        } else {
            f64::INFINITY
        };
        primal = primal.max(g.max(0.0));
        if lambda > 0.0 {
            stat.axpy(lambda, &b.kind.grad(&r.x), 1.0);
            comp += lambda * (-g);
        }
    }
    KktResiduals {
        stationarity: stat.amax(),
        primal,
        complementarity: comp,
    }
}

/// Compares analytic first and second derivatives of every block against
/// central finite differences at `x`; returns the worst relative deviation.
pub fn gradient_check(p: &ConvexProgram, x: &DVector<f64>) -> f64 {
    let n = p.n_vars;
    let mut worst = 0.0f64;
    for b in &p.blocks {
        if matches!(b.kind, BlockKind::Affine { .. }) {
            // The affine gradient is its coefficient vector by definition;
            // finite differences would only measure their own roundoff.
            continue;
        }
        let g = b.kind.grad(x);
        let scale = g.amax().max(1.0);
        for i in 0..n {
            let h = 1e-6 * (1.0 + x[i].abs());
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            if !(b.kind.domain_ok(&xp) && b.kind.domain_ok(&xm)) {
                continue;
            }
            let fd = (b.kind.eval(&xp) - b.kind.eval(&xm)) / (2.0 * h);
            worst = worst.max((fd - g[i]).abs() / scale);
        }
        // Hessian-vector product along a fixed probe direction.
        let mut v = DVector::zeros(n);
        for i in 0..n {
            v[i] = if i % 2 == 0 { 0.7 } else { -0.4 };
        }
        let eps = 1e-6;
        let xp = x + &v * eps;
        let xm = x - &v * eps;
        if b.kind.domain_ok(&xp) && b.kind.domain_ok(&xm) {
            let hv_fd = (b.kind.grad(&xp) - b.kind.grad(&xm)) / (2.0 * eps);
            let mut hess = DMatrix::zeros(n, n);
            b.kind.add_hessian(x, 1.0, &mut hess);
            let hv = hess * &v;
            let hs = hv.amax().max(1.0);
            worst = worst.max((&hv - &hv_fd).amax() / hs);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vecd(v: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(v)
    }

    /// maximize t s.t. t <= 3, t <= 5  ->  t* = 3
    #[test]
    fn epigraph_of_min() {
        let mut p = ConvexProgram::new(1, vecd(&[1.0]));
        p.push("t<=3", false, BlockKind::Affine { a: vecd(&[1.0]), b: -3.0 });
        p.push("t<=5", false, BlockKind::Affine { a: vecd(&[1.0]), b: -5.0 });
        let r = solve(&p, &SolverConfig::default(), None);
        assert_eq!(r.status, SolverStatus::Optimal, "residuals {:?}", r.residuals);
        assert!((r.objective - 3.0).abs() < 1e-6, "objective {}", r.objective);
    }

    /// maximize x + y s.t. x^2 + y^2 <= 2  ->  (1, 1)
    #[test]
    fn symmetric_ball() {
        let mut p = ConvexProgram::new(2, vecd(&[1.0, 1.0]));
        p.push("ball", true, BlockKind::PowerBall { slots: vec![0, 1], limit: 2.0 });
        let r = solve(&p, &SolverConfig::default(), None);
        assert_eq!(r.status, SolverStatus::Optimal);
        assert!((r.objective - 2.0).abs() < 1e-6);
        assert!((r.x[0] - 1.0).abs() < 1e-5 && (r.x[1] - 1.0).abs() < 1e-5);
    }

    /// maximize x s.t. 2^x <= 1 + y, y <= 3  ->  x* = 2
    #[test]
    fn exponential_cap_matches_grid() {
        let mut p = ConvexProgram::new(2, vecd(&[1.0, 0.0]));
        p.push(
            "2^x <= 1+y",
            false,
            BlockKind::Exponential {
                w: vecd(&[1.0, 0.0]),
                c0: 0.0,
                a: vecd(&[0.0, -1.0]),
                b: -1.0,
            },
        );
        p.push("y<=3", false, BlockKind::Affine { a: vecd(&[0.0, 1.0]), b: -3.0 });
        let r = solve(&p, &SolverConfig::default(), None);
        assert_eq!(r.status, SolverStatus::Optimal);

        // brute-force grid oracle
        let mut best = f64::NEG_INFINITY;
        let mut y = -0.999;
        while y <= 3.0 {
            let x = (1.0f64 + y).log2();
            if x > best {
                best = x;
            }
            y += 1e-3;
        }
        assert!((r.objective - 2.0).abs() < 1e-4, "objective {}", r.objective);
        assert!((r.objective - best).abs() < 1e-3);
    }

    #[test]
    fn infeasible_program_is_detected() {
        // x <= -1 and x >= 2 cannot both hold.
        let mut p = ConvexProgram::new(1, vecd(&[1.0]));
        p.push("x<=-1", false, BlockKind::Affine { a: vecd(&[1.0]), b: 1.0 });
        p.push("x>=2", false, BlockKind::Affine { a: vecd(&[-1.0]), b: 2.0 });
        let r = solve(&p, &SolverConfig::default(), None);
        assert_eq!(r.status, SolverStatus::InfeasibleDetected);
    }

    #[test]
    fn check_kkt_matches_reported() {
        let mut p = ConvexProgram::new(2, vecd(&[1.0, 1.0]));
        p.push("ball", true, BlockKind::PowerBall { slots: vec![0, 1], limit: 2.0 });
        p.push("x<=5", false, BlockKind::Affine { a: vecd(&[1.0, 0.0]), b: -5.0 });
        let r = solve(&p, &SolverConfig::default(), None);
        assert_eq!(r.status, SolverStatus::Optimal);
        let again = check_kkt(&p, &r);
        assert!((again.stationarity - r.residuals.stationarity).abs() <= 1e-10);
        assert!((again.primal - r.residuals.primal).abs() <= 1e-10);
        assert!((again.complementarity - r.residuals.complementarity).abs() <= 1e-10);
    }

    #[test]
    fn perturbed_point_fails_stationarity() {
        let mut p = ConvexProgram::new(2, vecd(&[1.0, 1.0]));
        p.push("ball", true, BlockKind::PowerBall { slots: vec![0, 1], limit: 2.0 });
        let cfg = SolverConfig::default();
        let r = solve(&p, &cfg, None);
        assert!(r.residuals.max() <= cfg.kkt_tol);
        let mut bad = r.clone();
        bad.x[0] += 1e-3;
        let res = check_kkt(&p, &bad);
        assert!(res.stationarity > cfg.kkt_tol, "stationarity {res:?}");
    }

    #[test]
    fn infeasible_point_primal_residual_is_violation() {
        let mut p = ConvexProgram::new(1, vecd(&[1.0]));
        p.push("x<=1", false, BlockKind::Affine { a: vecd(&[1.0]), b: -1.0 });
        let r = SolverResult {
            x: vecd(&[1.5]),
            objective: 1.5,
            status: SolverStatus::NumericalFailure,
            residuals: KktResiduals { stationarity: 0.0, primal: 0.0, complementarity: 0.0 },
            barrier_gap: f64::INFINITY,
            multipliers: vec![0.0],
            iterations: 0,
            wall_ms: 0.0,
        };
        let res = check_kkt(&p, &r);
        assert!((res.primal - 0.5).abs() < 1e-12);
    }

    #[test]
    fn gradient_check_families() {
        let mut p = ConvexProgram::new(3, vecd(&[1.0, 0.0, 0.0]));
        p.push("affine", false, BlockKind::Affine { a: vecd(&[1.0, 1.0, 0.0]), b: -4.0 });
        p.push(
            "qol",
            false,
            BlockKind::QuadOverLinear {
                m: DMatrix::from_row_slice(1, 3, &[1.0, -0.5, 0.0]),
                m0: vecd(&[0.2]),
                d: vecd(&[0.0, 0.0, 1.0]),
                e: 0.1,
                a: vecd(&[0.0, 0.0, 0.0]),
                b: -10.0,
            },
        );
        p.push(
            "exp",
            false,
            BlockKind::Exponential {
                w: vecd(&[0.5, 0.0, 0.3]),
                c0: 0.0,
                a: vecd(&[0.0, -1.0, 0.0]),
                b: -2.0,
            },
        );
        let x = vecd(&[0.3, 0.9, 0.8]);
        let dev = gradient_check(&p, &x);
        assert!(dev <= 1e-5, "max deviation {dev}");

        // affine-only program differentiates exactly
        let mut pa = ConvexProgram::new(2, vecd(&[1.0, 0.0]));
        pa.push("a", false, BlockKind::Affine { a: vecd(&[1.0, 2.0]), b: -1.0 });
        assert_eq!(gradient_check(&pa, &vecd(&[0.1, 0.1])), 0.0);
    }

    #[test]
    fn deterministic_bitwise() {
        let mut p = ConvexProgram::new(2, vecd(&[1.0, 0.5]));
        p.push("ball", true, BlockKind::PowerBall { slots: vec![0, 1], limit: 3.0 });
        p.push(
            "exp",
            false,
            BlockKind::Exponential {
                w: vecd(&[1.0, 0.0]),
                c0: 0.0,
                a: vecd(&[0.0, -1.0]),
                b: -1.0,
            },
        );
        let cfg = SolverConfig::default();
        let a = solve(&p, &cfg, None);
        let b = solve(&p, &cfg, None);
        assert_eq!(a.x.as_slice(), b.x.as_slice());
        assert_eq!(a.objective.to_bits(), b.objective.to_bits());
    }

    #[test]
    fn warm_start_is_used() {
        let mut p = ConvexProgram::new(1, vecd(&[1.0]));
        p.push("x<=3", false, BlockKind::Affine { a: vecd(&[1.0]), b: -3.0 });
        let warm = vecd(&[2.9]);
        let r = solve(&p, &SolverConfig::default(), Some(&warm));
        assert_eq!(r.status, SolverStatus::Optimal);
        assert!((r.objective - 3.0).abs() < 1e-6);
    }
}
