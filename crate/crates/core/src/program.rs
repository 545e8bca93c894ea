//! Assembled convex subproblems: typed constraint blocks over a real
//! variable vector, with analytic gradients and Hessians.
//!
//! Every constraint is written as `g(x) <= 0` with `g` smooth and convex on
//! its domain. Five families cover everything the case assembler produces:
//! affine, convex quadratic, quadratic-over-linear (positive denominator),
//! exponential (`2^(w.x+c)` bounded by an affine form) and the transmit
//! power ball.

use nalgebra::{DMatrix, DVector};

/// One constraint family instance, `g(x) <= 0`.
#[derive(Debug, Clone)]
pub enum BlockKind {
    /// `a.x + b <= 0`
    Affine { a: DVector<f64>, b: f64 },
    /// `x^T Q x + a.x + b <= 0`, `Q` symmetric positive semidefinite.
    Quadratic { q: DMatrix<f64>, a: DVector<f64>, b: f64 },
    /// `||M x + m0||^2 / (d.x + e) + a.x + b <= 0` on `d.x + e > 0`.
    QuadOverLinear {
        m: DMatrix<f64>,
        m0: DVector<f64>,
        d: DVector<f64>,
        e: f64,
        a: DVector<f64>,
        b: f64,
    },
    /// `2^(w.x + c0) + a.x + b <= 0`.
    Exponential { w: DVector<f64>, c0: f64, a: DVector<f64>, b: f64 },
    /// `sum_{i in slots} x_i^2 / limit - 1 <= 0`.
    PowerBall { slots: Vec<usize>, limit: f64 },
}

/// A labeled constraint. `hard` marks domain-shaping constraints (variable
/// bounds, the power ball) that phase-I feasibility search keeps exact
/// instead of relaxing.
#[derive(Debug, Clone)]
pub struct Block {
    pub label: String,
    pub hard: bool,
    pub kind: BlockKind,
}

const LN2: f64 = std::f64::consts::LN_2;

impl BlockKind {
    /// True when `x` lies in the open domain of `g`.
    pub fn domain_ok(&self, x: &DVector<f64>) -> bool {
        match self {
            BlockKind::QuadOverLinear { d, e, .. } => d.dot(x) + e > 0.0,
            _ => true,
        }
    }

    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        match self {
            BlockKind::Affine { a, b } => a.dot(x) + b,
            BlockKind::Quadratic { q, a, b } => (q * x).dot(x) + a.dot(x) + b,
            BlockKind::QuadOverLinear { m, m0, d, e, a, b } => {
                let u = m * x + m0;
                let v = d.dot(x) + e;
                u.norm_squared() / v + a.dot(x) + b
            }
            BlockKind::Exponential { w, c0, a, b } => (w.dot(x) + c0).exp2() + a.dot(x) + b,
            BlockKind::PowerBall { slots, limit } => {
                slots.iter().map(|&i| x[i] * x[i]).sum::<f64>() / limit - 1.0
            }
        }
    }

    pub fn grad(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            BlockKind::Affine { a, .. } => a.clone(),
            BlockKind::Quadratic { q, a, .. } => q * x * 2.0 + a,
            BlockKind::QuadOverLinear { m, m0, d, e, a, .. } => {
                let u = m * x + m0;
                let v = d.dot(x) + e;
                let mut g = m.transpose() * &u * (2.0 / v);
                g.axpy(-u.norm_squared() / (v * v), d, 1.0);
                g += a;
                g
            }
            BlockKind::Exponential { w, c0, a, .. } => {
                let ex = (w.dot(x) + c0).exp2();
                w * (LN2 * ex) + a
            }
            BlockKind::PowerBall { slots, limit } => {
                let mut g = DVector::zeros(x.len());
                for &i in slots {
                    g[i] = 2.0 * x[i] / limit;
                }
                g
            }
        }
    }

    /// Accumulates `weight * hess(g)(x)` into `h`.
    pub fn add_hessian(&self, x: &DVector<f64>, weight: f64, h: &mut DMatrix<f64>) {
        match self {
            BlockKind::Affine { .. } => {}
            BlockKind::Quadratic { q, .. } => {
                let s = 2.0 * weight;
                h.zip_apply(q, |hij, qij| *hij += s * qij);
            }
            BlockKind::QuadOverLinear { m, m0, d, e, .. } => {
                let u = m * x + m0;
                let v = d.dot(x) + e;
                let mtu = m.transpose() * &u;
                // 2 M^T M / v
                h.gemm_tr(2.0 * weight / v, m, m, 1.0);
                // -2 (M^T u d^T + d (M^T u)^T) / v^2
                let s = -2.0 * weight / (v * v);
                h.ger(s, &mtu, d, 1.0);
                h.ger(s, d, &mtu, 1.0);
                // 2 u^T u d d^T / v^3
                h.ger(2.0 * weight * u.norm_squared() / (v * v * v), d, d, 1.0);
            }
            BlockKind::Exponential { w, c0, .. } => {
                let ex = (w.dot(x) + c0).exp2();
                h.ger(weight * LN2 * LN2 * ex, w, w, 1.0);
            }
            BlockKind::PowerBall { slots, limit } => {
                for &i in slots {
                    h[(i, i)] += 2.0 * weight / limit;
                }
            }
        }
    }

    fn family(&self) -> &'static str {
        match self {
            BlockKind::Affine { .. } => "affine",
            BlockKind::Quadratic { .. } => "quadratic",
            BlockKind::QuadOverLinear { .. } => "quad-over-linear",
            BlockKind::Exponential { .. } => "exponential",
            BlockKind::PowerBall { .. } => "power-ball",
        }
    }
}

/// A fully assembled convex subproblem: maximize `objective . x` subject to
/// every block's `g(x) <= 0`.
#[derive(Debug, Clone)]
pub struct ConvexProgram {
    pub n_vars: usize,
    /// Linear objective, to be maximized.
    pub objective: DVector<f64>,
    pub blocks: Vec<Block>,
    pub var_names: Vec<String>,
}

impl ConvexProgram {
    pub fn new(n_vars: usize, objective: DVector<f64>) -> Self {
        assert_eq!(objective.len(), n_vars);
        ConvexProgram {
            n_vars,
            objective,
            blocks: Vec::new(),
            var_names: (0..n_vars).map(|i| format!("x{i}")).collect(),
        }
    }

    pub fn with_names(mut self, names: Vec<String>) -> Self {
        assert_eq!(names.len(), self.n_vars);
        self.var_names = names;
        self
    }

    pub fn push(&mut self, label: impl Into<String>, hard: bool, kind: BlockKind) {
        self.blocks.push(Block { label: label.into(), hard, kind });
    }

    /// All constraint values at `x`; `+inf` where `x` leaves a domain.
    pub fn eval_all(&self, x: &DVector<f64>) -> Vec<f64> {
        self.blocks
            .iter()
            .map(|b| {
                if b.kind.domain_ok(x) {
                    b.kind.eval(x)
                } else {
                    f64::INFINITY
                }
            })
            .collect()
    }

    /// Largest constraint value (positive means infeasible).
    pub fn max_violation(&self, x: &DVector<f64>) -> f64 {
        self.eval_all(x).into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    /// True when every block is satisfied with at least `margin` slack and
    /// every domain holds.
    pub fn is_strictly_feasible(&self, x: &DVector<f64>, margin: f64) -> bool {
        self.blocks
            .iter()
            .all(|b| b.kind.domain_ok(x) && b.kind.eval(x) <= -margin)
    }

    /// Solver-independent text dump of variables and constraint blocks.
    pub fn dump(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(out, "variables ({}):", self.n_vars);
        for (i, name) in self.var_names.iter().enumerate() {
            let _ = writeln!(out, "  [{i:3}] {name}  obj {:+.6e}", self.objective[i]);
        }
        let _ = writeln!(out, "blocks ({}):", self.blocks.len());
        for (i, b) in self.blocks.iter().enumerate() {
            let hard = if b.hard { " [hard]" } else { "" };
            let _ = writeln!(out, "  ({i:3}) {:<17} {}{hard}", b.kind.family(), b.label);
        }
        out
    }
}
