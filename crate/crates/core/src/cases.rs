//! Per-case convex subproblem assembly.
//!
//! The secrecy objective contains three `[.]+` clamps, so the nonconvex
//! program splits into four cases by the sign pattern of the two private
//! secrecy terms (the common term's clamp is handled by the epigraph
//! scalar and the eavesdropper-ordering constraints). For the retained
//! direction `R_pk >= C_ke` the legitimate rate chain is bounded from
//! below and the eavesdropper chain from above; for the swapped direction
//! the minorant/majorant roles exchange. Every nonconvex piece is replaced
//! by one of the five surrogates, so each assembled program is convex by
//! construction and conservative: any feasible point of the subproblem
//! satisfies the original case constraints.
//!
//! The same assembler also serves the baseline schemes: a [`SchemeShape`]
//! deactivates the relay slot (`theta` pinned), the common stream, or a
//! private stream, and the block set adapts.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::channel::{ChannelSet, PowerBudget};
use crate::cx::{gain, herm_rows, norm_sq, quad_tangent_row, realify, unrealify};
use crate::error::{Error, Result};
use crate::program::{BlockKind, ConvexProgram};
use crate::rates::{achievable_rates, compute_sinrs, PrecoderDesign};
use crate::surrogate::{gamma_bundle, phi_bundle, psi_bundle, theta_bundle};

/// Smallest admissible time-slot fraction; keeps the feasible set closed
/// for the interior-point method (the original bound is the open 0 < theta).
pub const THETA_MIN: f64 = 1e-3;
/// Floor for SINR variables that sit in quadratic-over-linear denominators.
pub const RHO_MIN_QOL: f64 = 1e-8;
/// Floor for SINR variables that only enter affinely (they still seed the
/// next linearization, whose formulas divide by them).
pub const RHO_MIN_LIN: f64 = 1e-12;

/// Which of the two private-secrecy sign patterns a user obeys.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    /// `R_pk >= C_ke`: the user's private secrecy term is retained.
    Ge,
    /// `R_pk <= C_ke`: the term is clamped to zero and dropped.
    Le,
}

/// The four sign-pattern cases of the decomposed secrecy program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CaseId {
    Case1,
    Case2,
    Case3,
    Case4,
}

impl CaseId {
    pub const ALL: [CaseId; 4] = [CaseId::Case1, CaseId::Case2, CaseId::Case3, CaseId::Case4];

    /// Sign of each user's private pattern, `[user1, user2]`.
    pub fn signs(self) -> [Sign; 2] {
        match self {
            CaseId::Case1 => [Sign::Ge, Sign::Ge],
            CaseId::Case2 => [Sign::Ge, Sign::Le],
            CaseId::Case3 => [Sign::Le, Sign::Ge],
            CaseId::Case4 => [Sign::Le, Sign::Le],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            CaseId::Case1 => "case1",
            CaseId::Case2 => "case2",
            CaseId::Case3 => "case3",
            CaseId::Case4 => "case4",
        }
    }
}

impl std::fmt::Display for CaseId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Structural restriction that realizes a transmission scheme on top of
/// the same machinery.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeShape {
    /// `Some(v)`: the time split is pinned to `v` (no relay optimization).
    pub theta_fixed: Option<f64>,
    /// Whether the common stream (and its rate chain) exists.
    pub common: bool,
    /// Whether each user carries a private stream.
    pub private_active: [bool; 2],
}

impl SchemeShape {
    pub fn crs() -> Self {
        SchemeShape { theta_fixed: None, common: true, private_active: [true, true] }
    }
    pub fn nrs() -> Self {
        SchemeShape { theta_fixed: Some(1.0), common: true, private_active: [true, true] }
    }
    pub fn mulp() -> Self {
        SchemeShape { theta_fixed: Some(1.0), common: false, private_active: [true, true] }
    }
    pub fn cnoma() -> Self {
        SchemeShape { theta_fixed: None, common: true, private_active: [true, false] }
    }
}

/// A full expansion point: the design plus every auxiliary rate/SINR
/// variable of the lifted program.
///
/// Auxiliary vectors follow the decomposition's ordering:
/// `alpha_p = [a_p1, a_p2, a_1e, a_2e]`, `alpha_c = [a_c1, a_c2, a_ce]`,
/// and the same layout for `beta_*` (per-slot rates) and `rho_*` (SINRs).
#[derive(Debug, Clone, PartialEq)]
pub struct ScaIterate {
    pub design: PrecoderDesign,
    pub alpha_p: [f64; 4],
    pub alpha_c: [f64; 3],
    pub beta_p: [f64; 4],
    pub beta_c: [f64; 3],
    pub rho_p: [f64; 4],
    pub rho_c: [f64; 3],
}

impl ScaIterate {
    pub fn a_p(&self, k: usize) -> f64 {
        self.alpha_p[k]
    }
    pub fn a_e(&self, k: usize) -> f64 {
        self.alpha_p[2 + k]
    }
    pub fn a_c(&self, k: usize) -> f64 {
        self.alpha_c[k]
    }
    pub fn a_ce(&self) -> f64 {
        self.alpha_c[2]
    }
    pub fn b_p(&self, k: usize) -> f64 {
        self.beta_p[k]
    }
    pub fn b_e(&self, k: usize) -> f64 {
        self.beta_p[2 + k]
    }
    pub fn b_c(&self, k: usize) -> f64 {
        self.beta_c[k]
    }
    pub fn b_ce(&self) -> f64 {
        self.beta_c[2]
    }
    pub fn r_p(&self, k: usize) -> f64 {
        self.rho_p[k]
    }
    pub fn r_e(&self, k: usize) -> f64 {
        self.rho_p[2 + k]
    }
    pub fn r_c(&self, k: usize) -> f64 {
        self.rho_c[k]
    }
    pub fn r_ce(&self) -> f64 {
        self.rho_c[2]
    }

    /// Value of the case objective at this iterate's auxiliaries.
    pub fn case_objective(&self, shape: SchemeShape, case: CaseId) -> f64 {
        let mut v = 0.0;
        if shape.common {
            v += self.a_c(0).min(self.a_c(1)) - self.a_ce();
        }
        for (k, sign) in case.signs().into_iter().enumerate() {
            if shape.private_active[k] && sign == Sign::Ge {
                v += self.a_p(k) - self.a_e(k);
            }
        }
        v
    }
}

/// Variable slot map of an assembled program.
#[derive(Debug, Clone)]
pub struct VarLayout {
    pub n_t: usize,
    pub n_vars: usize,
    pub shape: SchemeShape,
    /// Start of the `2*n_t` flattened slots of each active column.
    pub pc: Option<usize>,
    pub p: [Option<usize>; 2],
    pub theta: Option<usize>,
    pub t_c: Option<usize>,
    pub alpha_p: [Option<usize>; 2],
    pub alpha_e: [Option<usize>; 2],
    pub alpha_c: [Option<usize>; 2],
    pub alpha_ce: Option<usize>,
    pub beta_p: [Option<usize>; 2],
    pub beta_e: [Option<usize>; 2],
    pub beta_c: [Option<usize>; 2],
    pub beta_ce: Option<usize>,
    pub rho_p: [Option<usize>; 2],
    pub rho_e: [Option<usize>; 2],
    pub rho_c: [Option<usize>; 2],
    pub rho_ce: Option<usize>,
    pub names: Vec<String>,
}

impl VarLayout {
    pub fn build(n_t: usize, shape: SchemeShape) -> Self {
        let mut names: Vec<String> = Vec::new();
        let mut next = 0usize;

        fn col(names: &mut Vec<String>, next: &mut usize, n_t: usize, tag: &str) -> Option<usize> {
            let start = *next;
            for i in 0..n_t {
                names.push(format!("{tag}_re{i}"));
            }
            for i in 0..n_t {
                names.push(format!("{tag}_im{i}"));
            }
            *next += 2 * n_t;
            Some(start)
        }
        fn scalar(names: &mut Vec<String>, next: &mut usize, tag: String) -> Option<usize> {
            let s = *next;
            names.push(tag);
            *next += 1;
            Some(s)
        }

        let pc = shape.common.then(|| col(&mut names, &mut next, n_t, "pc").unwrap());
        let p = [0usize, 1].map(|k| {
            shape.private_active[k]
                .then(|| col(&mut names, &mut next, n_t, &format!("p{}", k + 1)).unwrap())
        });
        let theta = shape
            .theta_fixed
            .is_none()
            .then(|| scalar(&mut names, &mut next, "theta".into()).unwrap());
        let t_c = shape.common.then(|| scalar(&mut names, &mut next, "t_c".into()).unwrap());

        let mut per_user = |fmt: &dyn Fn(usize) -> String| {
            [0usize, 1].map(|k| {
                shape.private_active[k].then(|| scalar(&mut names, &mut next, fmt(k)).unwrap())
            })
        };
        let alpha_p = per_user(&|k| format!("alpha_p{}", k + 1));
        let alpha_e = per_user(&|k| format!("alpha_{}e", k + 1));
        let alpha_c = [0usize, 1].map(|k| {
            shape
                .common
                .then(|| scalar(&mut names, &mut next, format!("alpha_c{}", k + 1)).unwrap())
        });
        let alpha_ce = shape.common.then(|| scalar(&mut names, &mut next, "alpha_ce".into()).unwrap());
        let mut per_user = |fmt: &dyn Fn(usize) -> String| {
            [0usize, 1].map(|k| {
                shape.private_active[k].then(|| scalar(&mut names, &mut next, fmt(k)).unwrap())
            })
        };
        let beta_p = per_user(&|k| format!("beta_p{}", k + 1));
        let beta_e = per_user(&|k| format!("beta_{}e", k + 1));
        let beta_c = [0usize, 1].map(|k| {
            shape
                .common
                .then(|| scalar(&mut names, &mut next, format!("beta_c{}", k + 1)).unwrap())
        });
        let beta_ce = shape.common.then(|| scalar(&mut names, &mut next, "beta_ce".into()).unwrap());
        let mut per_user = |fmt: &dyn Fn(usize) -> String| {
            [0usize, 1].map(|k| {
                shape.private_active[k].then(|| scalar(&mut names, &mut next, fmt(k)).unwrap())
            })
        };
        let rho_p = per_user(&|k| format!("rho_p{}", k + 1));
        let rho_e = per_user(&|k| format!("rho_{}e", k + 1));
        let rho_c = [0usize, 1].map(|k| {
            shape
                .common
                .then(|| scalar(&mut names, &mut next, format!("rho_c{}", k + 1)).unwrap())
        });
        let rho_ce = shape.common.then(|| scalar(&mut names, &mut next, "rho_ce".into()).unwrap());

        VarLayout {
            n_t,
            n_vars: next,
            shape,
            pc,
            p,
            theta,
            t_c,
            alpha_p,
            alpha_e,
            alpha_c,
            alpha_ce,
            beta_p,
            beta_e,
            beta_c,
            beta_ce,
            rho_p,
            rho_e,
            rho_c,
            rho_ce,
            names,
        }
    }

    /// Embeds an iterate into the variable vector. The epigraph scalar is
    /// seeded just below `min(alpha_c1, alpha_c2)` so warm starts sit
    /// strictly inside the epigraph constraints.
    pub fn vectorize(&self, it: &ScaIterate) -> DVector<f64> {
        let mut x = DVector::zeros(self.n_vars);
        let put_col = |x: &mut DVector<f64>, start: Option<usize>, v: &[Complex64]| {
            if let Some(s) = start {
                for (i, val) in realify(v).into_iter().enumerate() {
                    x[s + i] = val;
                }
            }
        };
        put_col(&mut x, self.pc, &it.design.p_c);
        put_col(&mut x, self.p[0], &it.design.p_1);
        put_col(&mut x, self.p[1], &it.design.p_2);
        if let Some(s) = self.theta {
            x[s] = it.design.theta;
        }
        if let Some(s) = self.t_c {
            let m = it.a_c(0).min(it.a_c(1));
            x[s] = m - 1e-7 * (1.0 + m.abs());
        }
        for k in 0..2 {
            if let Some(s) = self.alpha_p[k] {
                x[s] = it.a_p(k);
            }
            if let Some(s) = self.alpha_e[k] {
                x[s] = it.a_e(k);
            }
            if let Some(s) = self.alpha_c[k] {
                x[s] = it.a_c(k);
            }
            if let Some(s) = self.beta_p[k] {
                x[s] = it.b_p(k);
            }
            if let Some(s) = self.beta_e[k] {
                x[s] = it.b_e(k);
            }
            if let Some(s) = self.beta_c[k] {
                x[s] = it.b_c(k);
            }
            if let Some(s) = self.rho_p[k] {
                x[s] = it.r_p(k);
            }
            if let Some(s) = self.rho_e[k] {
                x[s] = it.r_e(k);
            }
            if let Some(s) = self.rho_c[k] {
                x[s] = it.r_c(k);
            }
        }
        if let Some(s) = self.alpha_ce {
            x[s] = it.a_ce();
        }
        if let Some(s) = self.beta_ce {
            x[s] = it.b_ce();
        }
        if let Some(s) = self.rho_ce {
            x[s] = it.r_ce();
        }
        x
    }

    /// Reads an iterate back out of a solution vector. Inactive symbols
    /// come back as zeros (and `theta` as its pinned value).
    pub fn extract(&self, x: &DVector<f64>) -> ScaIterate {
        let col = |start: Option<usize>| -> Vec<Complex64> {
            match start {
                Some(s) => unrealify(&x.as_slice()[s..s + 2 * self.n_t]),
                None => vec![Complex64::new(0.0, 0.0); self.n_t],
            }
        };
        let sc = |slot: Option<usize>| slot.map(|s| x[s]).unwrap_or(0.0);
        let theta = match self.theta {
            Some(s) => x[s],
            None => self.shape.theta_fixed.unwrap_or(1.0),
        };
        ScaIterate {
            design: PrecoderDesign {
                p_c: col(self.pc),
                p_1: col(self.p[0]),
                p_2: col(self.p[1]),
                theta,
            },
            alpha_p: [
                sc(self.alpha_p[0]),
                sc(self.alpha_p[1]),
                sc(self.alpha_e[0]),
                sc(self.alpha_e[1]),
            ],
            alpha_c: [sc(self.alpha_c[0]), sc(self.alpha_c[1]), sc(self.alpha_ce)],
            beta_p: [
                sc(self.beta_p[0]),
                sc(self.beta_p[1]),
                sc(self.beta_e[0]),
                sc(self.beta_e[1]),
            ],
            beta_c: [sc(self.beta_c[0]), sc(self.beta_c[1]), sc(self.beta_ce)],
            rho_p: [sc(self.rho_p[0]), sc(self.rho_p[1]), sc(self.rho_e[0]), sc(self.rho_e[1])],
            rho_c: [sc(self.rho_c[0]), sc(self.rho_c[1]), sc(self.rho_ce)],
        }
    }
}

// ---------------------------------------------------------------------------
// Program assembly
// ---------------------------------------------------------------------------

struct Assembler<'a> {
    layout: &'a VarLayout,
    program: ConvexProgram,
    pb: &'a PowerBudget,
    /// extra variable used by restoration programs
    slack_slot: Option<usize>,
}

impl<'a> Assembler<'a> {
    fn zeros(&self) -> DVector<f64> {
        DVector::zeros(self.program.n_vars)
    }

    /// Full-width real/imaginary rows of `h^H p_col`.
    fn rows_for(&self, h: &[Complex64], col_start: usize) -> (DVector<f64>, DVector<f64>) {
        let (re, im) = herm_rows(h);
        let mut r = self.zeros();
        let mut s = self.zeros();
        for (i, (a, b)) in re.iter().zip(&im).enumerate() {
            r[col_start + i] = *a;
            s[col_start + i] = *b;
        }
        (r, s)
    }

    /// Adds `weight * |h^H p_col|^2` to a quadratic form.
    fn add_gain(&self, q: &mut DMatrix<f64>, h: &[Complex64], col_start: usize, weight: f64) {
        let (r, s) = self.rows_for(h, col_start);
        q.ger(weight, &r, &r, 1.0);
        q.ger(weight, &s, &s, 1.0);
    }

    /// Full-width tangent row of `|h^H p_col|^2` around `p0`.
    fn tangent(&self, h: &[Complex64], p0: &[Complex64], col_start: usize) -> DVector<f64> {
        let row = quad_tangent_row(h, p0);
        let mut out = self.zeros();
        for (i, v) in row.into_iter().enumerate() {
            out[col_start + i] = v;
        }
        out
    }

    /// `theta` as `(slot, pinned value)`.
    fn theta_affine(&self) -> (Option<usize>, f64) {
        match self.layout.theta {
            Some(s) => (Some(s), 0.0),
            None => (None, self.layout.shape.theta_fixed.unwrap_or(1.0)),
        }
    }

    /// Pattern constraints (case signs, eavesdropper ordering) acquire the
    /// restoration slack when one is present.
    fn push_pattern_affine(&mut self, label: String, mut a: DVector<f64>, b: f64) {
        if let Some(s) = self.slack_slot {
            a[s] += 1.0;
        }
        self.program.push(label, false, BlockKind::Affine { a, b });
    }

    /// `alpha - PROD_LB(theta, beta) - extra_affine <= 0` where `PROD_LB`
    /// is the concave minorant of `theta*beta` (or the exact product when
    /// `theta` is pinned).
    fn push_product_lower(
        &mut self,
        label: String,
        alpha_slot: usize,
        beta_slot: usize,
        theta0: f64,
        beta0: f64,
        extra: Option<(DVector<f64>, f64)>,
    ) {
        let (theta_slot, theta_const) = self.theta_affine();
        let (mut a, b) = match extra {
            Some((ea, eb)) => (-ea, -eb),
            None => (self.zeros(), 0.0),
        };
        a[alpha_slot] += 1.0;
        match theta_slot {
            Some(ts) => {
                let ph = phi_bundle((theta0, beta0));
                let n = self.program.n_vars;
                let mut q = DMatrix::zeros(n, n);
                q[(ts, ts)] = -ph.q_tt;
                q[(beta_slot, beta_slot)] = -ph.q_bb;
                q[(ts, beta_slot)] = -ph.q_tb;
                q[(beta_slot, ts)] = -ph.q_tb;
                a[ts] -= ph.l_theta;
                a[beta_slot] -= ph.l_beta;
                self.program.push(label, false, BlockKind::Quadratic { q, a, b: b - ph.c });
            }
            None => {
                a[beta_slot] -= theta_const;
                self.program.push(label, false, BlockKind::Affine { a, b });
            }
        }
    }

    /// `PROD_UB(theta, beta) + extra_affine - alpha <= 0` where `PROD_UB`
    /// is the convex majorant of `theta*beta`.
    fn push_product_upper(
        &mut self,
        label: String,
        alpha_slot: usize,
        beta_slot: usize,
        theta0: f64,
        beta0: f64,
        extra: Option<(DVector<f64>, f64)>,
    ) {
        let (theta_slot, theta_const) = self.theta_affine();
        let (mut a, b) = match extra {
            Some((ea, eb)) => (ea, eb),
            None => (self.zeros(), 0.0),
        };
        a[alpha_slot] -= 1.0;
        match theta_slot {
            Some(ts) => {
                let th = theta_bundle((theta0, beta0));
                let n = self.program.n_vars;
                let mut q = DMatrix::zeros(n, n);
                q[(ts, ts)] = th.q_tt;
                q[(beta_slot, beta_slot)] = th.q_bb;
                q[(ts, beta_slot)] = th.q_tb;
                q[(beta_slot, ts)] = th.q_tb;
                a[ts] += th.l_theta;
                a[beta_slot] += th.l_beta;
                self.program.push(label, false, BlockKind::Quadratic { q, a, b: b + th.c });
            }
            None => {
                a[beta_slot] += theta_const;
                self.program.push(label, false, BlockKind::Affine { a, b });
            }
        }
    }

    /// Exact convex constraint `2^beta - 1 - rho <= 0`, scaled by
    /// `1 + rho0` (the scale folds into the exponent's constant).
    fn push_exp(&mut self, label: String, beta_slot: usize, rho_slot: usize, rho0: f64) {
        let scale = 1.0 + rho0.max(0.0);
        let mut w = self.zeros();
        w[beta_slot] = 1.0;
        let mut a = self.zeros();
        a[rho_slot] = -1.0 / scale;
        self.program.push(
            label,
            false,
            BlockKind::Exponential { w, c0: -scale.log2(), a, b: -1.0 / scale },
        );
    }

    /// Linearized exponential `1 + rho - GAMMA(beta) <= 0` (affine).
    fn push_gamma(
        &mut self,
        label: String,
        beta_slot: usize,
        rho_slot: usize,
        beta0: f64,
        rho0: f64,
    ) {
        let scale = 1.0 + rho0.max(0.0);
        let g = gamma_bundle(beta0);
        let mut a = self.zeros();
        a[rho_slot] = 1.0 / scale;
        a[beta_slot] = -g.lin / scale;
        self.program.push(label, false, BlockKind::Affine { a, b: (1.0 - g.c) / scale });
    }

    /// DC block `sum_gains + sigma2 - PSI(p_col, h, rho) <= 0`: the signal
    /// side is linearized from below, the interference gains stay exact
    /// convex quadratics.
    #[allow(clippy::too_many_arguments)]
    fn push_psi_dc(
        &mut self,
        label: String,
        h: &[Complex64],
        interferer_cols: &[usize],
        sigma2: f64,
        signal_col: usize,
        signal_p0: &[Complex64],
        rho_slot: usize,
        rho0: f64,
    ) -> Result<()> {
        let psi = psi_bundle(h, signal_p0, rho0)?;
        let scale = sigma2 + self.pb.p_t * norm_sq(h);
        let n = self.program.n_vars;
        let mut q = DMatrix::zeros(n, n);
        for &col in interferer_cols {
            self.add_gain(&mut q, h, col, 1.0 / scale);
        }
        let mut a = self.tangent(h, signal_p0, signal_col) * (-1.0 / (rho0 * scale));
        a[rho_slot] -= psi.lin_rho / scale;
        self.program.push(label, false, BlockKind::Quadratic { q, a, b: sigma2 / scale });
        Ok(())
    }

    /// Majorant DC block `|h^H p_col|^2 / rho - tangents - sigma2 <= 0`:
    /// the signal-over-SINR side stays an exact quadratic-over-linear
    /// term, the interference gains are linearized from below.
    fn push_qol_dc(
        &mut self,
        label: String,
        h: &[Complex64],
        tangent_cols: &[(usize, &[Complex64])],
        sigma2: f64,
        signal_col: usize,
        rho_slot: usize,
    ) {
        let scale = sigma2 + self.pb.p_t * norm_sq(h);
        let rs = scale.sqrt();
        let (r, s) = self.rows_for(h, signal_col);
        let n = self.program.n_vars;
        let mut m = DMatrix::zeros(2, n);
        for i in 0..n {
            m[(0, i)] = r[i] / rs;
            m[(1, i)] = s[i] / rs;
        }
        let mut d = self.zeros();
        d[rho_slot] = 1.0;
        let mut a = self.zeros();
        let mut b = -sigma2 / scale;
        for &(col, p0) in tangent_cols {
            let t = self.tangent(h, p0, col);
            a -= t / scale;
            b += gain(h, p0) / scale;
        }
        self.program.push(
            label,
            false,
            BlockKind::QuadOverLinear { m, m0: DVector::zeros(2), d, e: 0.0, a, b },
        );
    }

    fn push_bound(&mut self, label: &str, slot: usize, lower: Option<f64>, upper: Option<f64>) {
        if let Some(lo) = lower {
            let mut a = self.zeros();
            let scale = lo.abs().max(1.0);
            a[slot] = -1.0 / scale;
            self.program
                .push(format!("{label} lower"), true, BlockKind::Affine { a, b: lo / scale });
        }
        if let Some(hi) = upper {
            let mut a = self.zeros();
            let scale = hi.abs().max(1.0);
            a[slot] = 1.0 / scale;
            self.program
                .push(format!("{label} upper"), true, BlockKind::Affine { a, b: -hi / scale });
        }
    }
}

/// Physical cap on a SINR variable driven by channel `h` and noise
/// `sigma2` under the transmit budget.
fn rho_cap(h: &[Complex64], sigma2: f64, p_t: f64) -> f64 {
    (1.01 * p_t * norm_sq(h) / sigma2).max(10.0 * RHO_MIN_QOL)
}

/// Relay-phase rate constants `(log2(1+sinr at U2), log2(1+sinr at E))`.
fn relay_rates(cs: &ChannelSet, pb: &PowerBudget) -> (f64, f64) {
    let l2r = (1.0 + pb.p_r * cs.h3.norm_sqr() / cs.sigma2.u3).log2();
    let ler = (1.0 + pb.p_r * cs.g2.norm_sqr() / cs.sigma2.e2).log2();
    (l2r, ler)
}

/// Assembles the linearized convex subproblem of `case` around `at` for
/// the full cooperative rate-splitting scheme.
pub fn assemble(
    case: CaseId,
    at: &ScaIterate,
    cs: &ChannelSet,
    pb: &PowerBudget,
) -> Result<ConvexProgram> {
    assemble_shaped(SchemeShape::crs(), case, at, cs, pb)
}

/// Assembles the subproblem for an arbitrary scheme shape.
pub fn assemble_shaped(
    shape: SchemeShape,
    case: CaseId,
    at: &ScaIterate,
    cs: &ChannelSet,
    pb: &PowerBudget,
) -> Result<ConvexProgram> {
    build_program(shape, case, at, cs, pb, false).map(|(p, _)| p)
}

/// Assembles the feasibility-restoration variant: maximize the common
/// slack `s` added to every pattern constraint. Returns the program and
/// the slot of `s` (the last variable).
pub fn assemble_restoration(
    shape: SchemeShape,
    case: CaseId,
    at: &ScaIterate,
    cs: &ChannelSet,
    pb: &PowerBudget,
) -> Result<(ConvexProgram, usize)> {
    build_program(shape, case, at, cs, pb, true)
}

fn build_program(
    shape: SchemeShape,
    case: CaseId,
    at: &ScaIterate,
    cs: &ChannelSet,
    pb: &PowerBudget,
    restoration: bool,
) -> Result<(ConvexProgram, usize)> {
    cs.validate()?;
    let layout = VarLayout::build(cs.n_t, shape);
    if at.design.p_c.len() != cs.n_t
        || at.design.p_1.len() != cs.n_t
        || at.design.p_2.len() != cs.n_t
    {
        return Err(Error::InvalidDimension(format!(
            "expansion design has column length {} but n_t = {}",
            at.design.p_c.len(),
            cs.n_t
        )));
    }
    // Every active rho of the expansion must be positive: the linearization
    // formulas divide by them.
    for k in 0..2 {
        if shape.private_active[k] && (at.r_p(k) <= 0.0 || at.r_e(k) <= 0.0) {
            return Err(Error::Domain(format!(
                "expansion rho for user {} must be positive (rho_p={}, rho_e={})",
                k + 1,
                at.r_p(k),
                at.r_e(k)
            )));
        }
        if shape.common && at.r_c(k) <= 0.0 {
            return Err(Error::Domain(format!(
                "expansion rho_c{} must be positive, got {}",
                k + 1,
                at.r_c(k)
            )));
        }
    }
    if shape.common && at.r_ce() <= 0.0 {
        return Err(Error::Domain(format!(
            "expansion rho_ce must be positive, got {}",
            at.r_ce()
        )));
    }

    let n_base = layout.n_vars;
    let n_vars = if restoration { n_base + 1 } else { n_base };
    let slack_slot = restoration.then_some(n_base);

    // Objective: the epigraph scalar plus the retained secrecy terms, or
    // the restoration slack alone.
    let mut objective = DVector::zeros(n_vars);
    let signs = case.signs();
    if let Some(s) = slack_slot {
        objective[s] = 1.0;
    } else {
        if let Some(t) = layout.t_c {
            objective[t] = 1.0;
        }
        if let Some(ace) = layout.alpha_ce {
            objective[ace] = -1.0;
        }
        for k in 0..2 {
            if shape.private_active[k] && signs[k] == Sign::Ge {
                objective[layout.alpha_p[k].unwrap()] += 1.0;
                objective[layout.alpha_e[k].unwrap()] -= 1.0;
            }
        }
    }

    let mut names = layout.names.clone();
    if restoration {
        names.push("s".into());
    }
    let program = ConvexProgram::new(n_vars, objective).with_names(names);
    let (l2r, ler) = relay_rates(cs, pb);
    let cap_u = [
        rho_cap(&cs.h1, cs.sigma2.u1, pb.p_t),
        rho_cap(&cs.h2, cs.sigma2.u2, pb.p_t),
    ];
    let cap_e = rho_cap(&cs.g1, cs.sigma2.e1, pb.p_t);
    let rate_box = {
        let r = (1.0 + cap_u[0].max(cap_u[1]).max(cap_e)).log2() + l2r.abs() + ler.abs();
        (4.0 * r + 32.0).max(64.0)
    };
    let mut asm = Assembler { layout: &layout, program, pb, slack_slot };

    let theta0 = match shape.theta_fixed {
        Some(v) => v,
        None => at.design.theta,
    };
    let users: Vec<usize> = (0..2).filter(|&k| shape.private_active[k]).collect();
    let h_of = |k: usize| if k == 0 { &cs.h1 } else { &cs.h2 };
    let sigma_of = |k: usize| if k == 0 { cs.sigma2.u1 } else { cs.sigma2.u2 };
    let p0_of = |k: usize| if k == 0 { &at.design.p_1 } else { &at.design.p_2 };

    // --- common-stream chain ---------------------------------------------
    if shape.common {
        let pc_slot = layout.pc.unwrap();
        let tc = layout.t_c.unwrap();
        let ace = layout.alpha_ce.unwrap();
        for k in 0..2 {
            let ack = layout.alpha_c[k].unwrap();
            let bck = layout.beta_c[k].unwrap();
            let rck = layout.rho_c[k].unwrap();

            // epigraph and eavesdropper ordering
            let mut a = asm.zeros();
            a[tc] = 1.0;
            a[ack] = -1.0;
            asm.program.push(
                format!("common epigraph u{}", k + 1),
                false,
                BlockKind::Affine { a, b: 0.0 },
            );
            let mut a = asm.zeros();
            a[ace] = 1.0;
            a[ack] = -1.0;
            asm.push_pattern_affine(format!("common order u{}", k + 1), a, 0.0);

            // decodable common rate, with the affine relay term at user 2
            let extra = (k == 1).then(|| {
                let (ts, tconst) = asm.theta_affine();
                let mut ea = asm.zeros();
                match ts {
                    Some(slot) => {
                        ea[slot] = -l2r;
                        (ea, l2r)
                    }
                    None => (ea, (1.0 - tconst) * l2r),
                }
            });
            asm.push_product_lower(
                format!("common rate u{}", k + 1),
                ack,
                bck,
                theta0,
                at.b_c(k),
                extra,
            );
            asm.push_psi_dc(
                format!("common sinr u{}", k + 1),
                h_of(k),
                &users.iter().map(|&u| layout.p[u].unwrap()).collect::<Vec<_>>(),
                sigma_of(k),
                pc_slot,
                &at.design.p_c,
                rck,
                at.r_c(k),
            )?;
            asm.push_exp(format!("common exp u{}", k + 1), bck, rck, at.r_c(k));
        }

        // eavesdropper side of the common stream
        let bce = layout.beta_ce.unwrap();
        let rce = layout.rho_ce.unwrap();
        let extra = {
            let (ts, tconst) = asm.theta_affine();
            let mut ea = asm.zeros();
            match ts {
                Some(slot) => {
                    ea[slot] = -ler;
                    Some((ea, ler))
                }
                None => Some((ea, (1.0 - tconst) * ler)),
            }
        };
        asm.push_product_upper("common leak rate".into(), ace, bce, theta0, at.b_ce(), extra);
        let tangents: Vec<(usize, &[Complex64])> = users
            .iter()
            .map(|&u| (layout.p[u].unwrap(), p0_of(u).as_slice()))
            .collect();
        asm.push_qol_dc(
            "common leak sinr".into(),
            &cs.g1,
            &tangents,
            cs.sigma2.e1,
            pc_slot,
            rce,
        );
        asm.push_gamma("common leak exp".into(), bce, rce, at.b_ce(), at.r_ce());
    }

    // --- private chains ----------------------------------------------------
    for &k in &users {
        let i = 1 - k; // the other user
        let apk = layout.alpha_p[k].unwrap();
        let aek = layout.alpha_e[k].unwrap();
        let bpk = layout.beta_p[k].unwrap();
        let bek = layout.beta_e[k].unwrap();
        let rpk = layout.rho_p[k].unwrap();
        let rek = layout.rho_e[k].unwrap();
        let pk_slot = layout.p[k].unwrap();

        match signs[k] {
            Sign::Ge => {
                // legitimate rate bounded below
                asm.push_product_lower(
                    format!("private rate u{}", k + 1),
                    apk,
                    bpk,
                    theta0,
                    at.b_p(k),
                    None,
                );
                let interferers: Vec<usize> = shape.private_active[i]
                    .then(|| layout.p[i].unwrap())
                    .into_iter()
                    .collect();
                asm.push_psi_dc(
                    format!("private sinr u{}", k + 1),
                    h_of(k),
                    &interferers,
                    sigma_of(k),
                    pk_slot,
                    p0_of(k),
                    rpk,
                    at.r_p(k),
                )?;
                asm.push_exp(format!("private exp u{}", k + 1), bpk, rpk, at.r_p(k));

                // eavesdropper leak bounded above
                asm.push_product_upper(
                    format!("leak rate u{}", k + 1),
                    aek,
                    bek,
                    theta0,
                    at.b_e(k),
                    None,
                );
                let mut tangents: Vec<(usize, &[Complex64])> = Vec::new();
                if shape.common {
                    tangents.push((layout.pc.unwrap(), at.design.p_c.as_slice()));
                }
                if shape.private_active[i] {
                    tangents.push((layout.p[i].unwrap(), p0_of(i).as_slice()));
                }
                asm.push_qol_dc(
                    format!("leak sinr u{}", k + 1),
                    &cs.g1,
                    &tangents,
                    cs.sigma2.e1,
                    pk_slot,
                    rek,
                );
                asm.push_gamma(format!("leak exp u{}", k + 1), bek, rek, at.b_e(k), at.r_e(k));

                // sign pattern: alpha_ke <= alpha_pk
                let mut a = asm.zeros();
                a[aek] = 1.0;
                a[apk] = -1.0;
                asm.push_pattern_affine(format!("sign u{} (ge)", k + 1), a, 0.0);
            }
            Sign::Le => {
                // mirror: legitimate rate bounded above ...
                asm.push_product_upper(
                    format!("private rate u{} (mirror)", k + 1),
                    apk,
                    bpk,
                    theta0,
                    at.b_p(k),
                    None,
                );
                let tangents: Vec<(usize, &[Complex64])> = shape.private_active[i]
                    .then(|| (layout.p[i].unwrap(), p0_of(i).as_slice()))
                    .into_iter()
                    .collect();
                asm.push_qol_dc(
                    format!("private sinr u{} (mirror)", k + 1),
                    h_of(k),
                    &tangents,
                    sigma_of(k),
                    pk_slot,
                    rpk,
                );
                asm.push_gamma(
                    format!("private exp u{} (mirror)", k + 1),
                    bpk,
                    rpk,
                    at.b_p(k),
                    at.r_p(k),
                );

                // ... and the leak bounded below
                asm.push_product_lower(
                    format!("leak rate u{} (mirror)", k + 1),
                    aek,
                    bek,
                    theta0,
                    at.b_e(k),
                    None,
                );
                let mut interferers: Vec<usize> = Vec::new();
                if shape.common {
                    interferers.push(layout.pc.unwrap());
                }
                if shape.private_active[i] {
                    interferers.push(layout.p[i].unwrap());
                }
                asm.push_psi_dc(
                    format!("leak sinr u{} (mirror)", k + 1),
                    &cs.g1,
                    &interferers,
                    cs.sigma2.e1,
                    pk_slot,
                    p0_of(k),
                    rek,
                    at.r_e(k),
                )?;
                asm.push_exp(format!("leak exp u{} (mirror)", k + 1), bek, rek, at.r_e(k));

                // sign pattern: alpha_pk <= alpha_ke
                let mut a = asm.zeros();
                a[apk] = 1.0;
                a[aek] = -1.0;
                asm.push_pattern_affine(format!("sign u{} (le)", k + 1), a, 0.0);
            }
        }
    }

    // --- shared feasible-set structure --------------------------------------
    let mut ball_slots = Vec::new();
    for start in [layout.pc, layout.p[0], layout.p[1]].into_iter().flatten() {
        ball_slots.extend(start..start + 2 * cs.n_t);
    }
    asm.program
        .push("transmit power", true, BlockKind::PowerBall { slots: ball_slots, limit: pb.p_t });
    if let Some(ts) = layout.theta {
        asm.push_bound("theta", ts, Some(THETA_MIN), Some(1.0));
    }

    // Boxes keep the barrier subproblems bounded in every auxiliary
    // direction; they sit far outside any attainable rate.
    for k in 0..2 {
        if shape.private_active[k] {
            // QoL denominators need the strong floor; affine-only rhos the
            // weak one.
            let (rp_floor, re_floor) = match signs[k] {
                Sign::Ge => (RHO_MIN_LIN, RHO_MIN_QOL),
                Sign::Le => (RHO_MIN_QOL, RHO_MIN_LIN),
            };
            asm.push_bound(
                &format!("rho_p{}", k + 1),
                layout.rho_p[k].unwrap(),
                Some(rp_floor),
                Some(cap_u[k]),
            );
            asm.push_bound(
                &format!("rho_{}e", k + 1),
                layout.rho_e[k].unwrap(),
                Some(re_floor),
                Some(cap_e),
            );
            for slot in [
                layout.alpha_p[k].unwrap(),
                layout.alpha_e[k].unwrap(),
                layout.beta_p[k].unwrap(),
                layout.beta_e[k].unwrap(),
            ] {
                let name = layout.names[slot].clone();
                asm.push_bound(&format!("box {name}"), slot, Some(-rate_box), Some(rate_box));
            }
        }
        if shape.common {
            asm.push_bound(
                &format!("rho_c{}", k + 1),
                layout.rho_c[k].unwrap(),
                Some(RHO_MIN_LIN),
                Some(cap_u[k]),
            );
            for slot in [layout.alpha_c[k].unwrap(), layout.beta_c[k].unwrap()] {
                let name = layout.names[slot].clone();
                asm.push_bound(&format!("box {name}"), slot, Some(-rate_box), Some(rate_box));
            }
        }
    }
    if shape.common {
        asm.push_bound("rho_ce", layout.rho_ce.unwrap(), Some(RHO_MIN_QOL), Some(cap_e));
        for slot in [layout.alpha_ce.unwrap(), layout.beta_ce.unwrap(), layout.t_c.unwrap()] {
            let name = layout.names[slot].clone();
            asm.push_bound(&format!("box {name}"), slot, Some(-rate_box), Some(rate_box));
        }
    }
    if let Some(s) = slack_slot {
        asm.push_bound("box s", s, Some(-rate_box), Some(rate_box));
    }

    Ok((asm.program, slack_slot.unwrap_or(usize::MAX)))
}

// ---------------------------------------------------------------------------
// Iterate construction and original-constraint audits
// ---------------------------------------------------------------------------

/// Builds the lifted iterate at `design` with every auxiliary set by
/// equality from the true SINRs/rates, then backed off by the relative
/// margin `slack` in the direction that leaves each surrogate constraint
/// strictly feasible for `case`. `slack = 0` gives the exact embedding.
pub fn iterate_from_design(
    shape: SchemeShape,
    case: CaseId,
    design: &PrecoderDesign,
    cs: &ChannelSet,
    pb: &PowerBudget,
    slack: f64,
) -> ScaIterate {
    let g = compute_sinrs(design, cs, pb);
    let theta = design.theta;
    let (l2r, ler) = relay_rates(cs, pb);
    let d = |v: f64| slack * (1.0 + v.abs());

    // lower chain (rate bounded below): shrink rho, beta, alpha
    let lower = |gamma: f64, floor: f64| -> (f64, f64, f64) {
        let rho = (gamma * (1.0 - slack)).max(floor * (1.0 + slack));
        let mut beta = (1.0 + rho).log2();
        beta -= d(beta);
        let alpha = theta * beta - d(theta * beta);
        (rho, beta, alpha)
    };
    // upper chain (leak bounded above): grow rho, beta, alpha
    let upper = |gamma: f64, floor: f64| -> (f64, f64, f64) {
        let rho = (gamma * (1.0 + slack)).max(floor * (1.0 + slack));
        let mut beta = (1.0 + rho).log2();
        beta += d(beta);
        let alpha = theta * beta + d(theta * beta);
        (rho, beta, alpha)
    };

    let signs = case.signs();
    let mut alpha_p = [0.0; 4];
    let mut beta_p = [0.0; 4];
    let mut rho_p = [RHO_MIN_LIN; 4];
    let gammas_p = [g.gp1, g.gp2];
    let gammas_e = [g.g1e, g.g2e];
    for k in 0..2 {
        if !shape.private_active[k] {
            continue;
        }
        match signs[k] {
            Sign::Ge => {
                let (r, b, a) = lower(gammas_p[k], RHO_MIN_LIN);
                rho_p[k] = r;
                beta_p[k] = b;
                alpha_p[k] = a;
                let (r, b, a) = upper(gammas_e[k], RHO_MIN_QOL);
                rho_p[2 + k] = r;
                beta_p[2 + k] = b;
                alpha_p[2 + k] = a;
            }
            Sign::Le => {
                let (r, b, a) = upper(gammas_p[k], RHO_MIN_QOL);
                rho_p[k] = r;
                beta_p[k] = b;
                alpha_p[k] = a;
                let (r, b, a) = lower(gammas_e[k], RHO_MIN_LIN);
                rho_p[2 + k] = r;
                beta_p[2 + k] = b;
                alpha_p[2 + k] = a;
            }
        }
    }

    let mut alpha_c = [0.0; 3];
    let mut beta_c = [0.0; 3];
    let mut rho_c = [RHO_MIN_LIN; 3];
    if shape.common {
        let (r1, b1, a1) = lower(g.gc1, RHO_MIN_LIN);
        rho_c[0] = r1;
        beta_c[0] = b1;
        alpha_c[0] = a1;
        let (r2, b2, a2) = lower(g.gc2, RHO_MIN_LIN);
        rho_c[1] = r2;
        beta_c[1] = b2;
        // the decodable rate at user 2 includes the relay term
        alpha_c[1] = a2 + (1.0 - theta) * l2r;
        let (re, be, ae) = upper(g.gce1, RHO_MIN_QOL);
        rho_c[2] = re;
        beta_c[2] = be;
        alpha_c[2] = ae + (1.0 - theta) * ler;
    }

    ScaIterate { design: design.clone(), alpha_p, alpha_c, beta_p, beta_c, rho_p, rho_c }
}

/// Signed slacks of the original (nonconvex) case constraints at an
/// iterate: positive means satisfied with margin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseResiduals {
    /// `R_c1 - C_ce` and `R_c2 - C_ce` (the eavesdropper must not decode
    /// the common message).
    pub common_guard: [f64; 2],
    /// `P_T - ||P||^2`.
    pub power: f64,
    /// `theta` and `1 - theta`.
    pub theta_low: f64,
    pub theta_high: f64,
    /// Per-user pattern slack (`R_pk - C_ke` or its negation, by case);
    /// `None` for users without a private stream.
    pub sign: [Option<f64>; 2],
}

impl CaseResiduals {
    pub fn min_slack(&self) -> f64 {
        let mut m = self
            .common_guard
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
            .min(self.power)
            .min(self.theta_low)
            .min(self.theta_high);
        for s in self.sign.into_iter().flatten() {
            m = m.min(s);
        }
        m
    }

    /// Smallest slack among the pattern constraints only (case signs and
    /// the common guard) -- the part restoration works on.
    pub fn min_pattern_slack(&self) -> f64 {
        let mut m = self.common_guard.iter().cloned().fold(f64::INFINITY, f64::min);
        for s in self.sign.into_iter().flatten() {
            m = m.min(s);
        }
        m
    }

    pub fn feasible(&self, tol: f64) -> bool {
        self.min_slack() >= -tol
    }
}

/// Evaluates the original case constraints at `x` through the exact rate
/// engine (never the surrogates).
pub fn original_case_residuals(
    case: CaseId,
    x: &ScaIterate,
    cs: &ChannelSet,
    pb: &PowerBudget,
) -> CaseResiduals {
    original_case_residuals_shaped(SchemeShape::crs(), case, x, cs, pb)
}

pub fn original_case_residuals_shaped(
    shape: SchemeShape,
    case: CaseId,
    x: &ScaIterate,
    cs: &ChannelSet,
    pb: &PowerBudget,
) -> CaseResiduals {
    let r = achievable_rates(&x.design, cs, pb);
    let signs = case.signs();
    let rates_p = [r.r_p1, r.r_p2];
    let leaks = [r.c_1e, r.c_2e];
    let sign = [0usize, 1].map(|k| {
        if !shape.private_active[k] {
            return None;
        }
        Some(match signs[k] {
            Sign::Ge => rates_p[k] - leaks[k],
            Sign::Le => leaks[k] - rates_p[k],
        })
    });
    CaseResiduals {
        common_guard: [r.r_c1 - r.c_ce, r.r_c2 - r.c_ce],
        power: pb.p_t - x.design.power(),
        theta_low: x.design.theta,
        theta_high: 1.0 - x.design.theta,
        sign,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate_channel_set_for_trial, ChannelStats};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn test_channel(trial: u64) -> ChannelSet {
        generate_channel_set_for_trial(1234, trial, 2, &ChannelStats::default()).unwrap()
    }

    /// Matched-filter design used by several tests.
    fn mf_design(cs: &ChannelSet, pb: &PowerBudget, theta: f64) -> PrecoderDesign {
        let scale = |v: &[Complex64], p: f64| -> Vec<Complex64> {
            let n = norm_sq(v).sqrt().max(1e-12);
            v.iter().map(|z| z * (p.sqrt() / n)).collect()
        };
        let sum: Vec<Complex64> = cs.h1.iter().zip(&cs.h2).map(|(a, b)| a + b).collect();
        let pt = pb.p_t * 0.99;
        PrecoderDesign {
            p_c: scale(&sum, 0.4 * pt),
            p_1: scale(&cs.h1, 0.3 * pt),
            p_2: scale(&cs.h2, 0.3 * pt),
            theta,
        }
    }

    #[test]
    fn layout_is_total_for_crs() {
        let layout = VarLayout::build(2, SchemeShape::crs());
        // 6*n_t precoder slots + theta + t_c + 7 alpha + 7 beta + 7 rho.
        assert_eq!(layout.n_vars, 12 + 2 + 21);
        assert_eq!(layout.names.len(), layout.n_vars);
        // every symbol maps to exactly one distinct slot
        let mut seen = std::collections::HashSet::new();
        for slot in [
            layout.theta,
            layout.t_c,
            layout.alpha_p[0],
            layout.alpha_p[1],
            layout.alpha_e[0],
            layout.alpha_e[1],
            layout.alpha_c[0],
            layout.alpha_c[1],
            layout.alpha_ce,
            layout.beta_p[0],
            layout.beta_p[1],
            layout.beta_e[0],
            layout.beta_e[1],
            layout.beta_c[0],
            layout.beta_c[1],
            layout.beta_ce,
            layout.rho_p[0],
            layout.rho_p[1],
            layout.rho_e[0],
            layout.rho_e[1],
            layout.rho_c[0],
            layout.rho_c[1],
            layout.rho_ce,
        ] {
            assert!(seen.insert(slot.unwrap()));
        }
    }

    #[test]
    fn layout_shrinks_with_shape() {
        let mulp = VarLayout::build(2, SchemeShape::mulp());
        // two private columns + 4 alpha + 4 beta + 4 rho, no theta/t_c/common
        assert_eq!(mulp.n_vars, 8 + 12);
        assert!(mulp.pc.is_none() && mulp.theta.is_none() && mulp.t_c.is_none());
        let cnoma = VarLayout::build(2, SchemeShape::cnoma());
        // pc + p1 columns + theta + t_c + 5 alpha + 5 beta + 5 rho
        assert_eq!(cnoma.n_vars, 8 + 2 + 15);
        assert!(cnoma.p[1].is_none());
    }

    #[test]
    fn vectorize_extract_round_trip() {
        let cs = test_channel(0);
        let pb = PowerBudget::new(10.0, 10.0).unwrap();
        let d = mf_design(&cs, &pb, 0.5);
        let it = iterate_from_design(SchemeShape::crs(), CaseId::Case1, &d, &cs, &pb, 1e-4);
        let layout = VarLayout::build(2, SchemeShape::crs());
        let x = layout.vectorize(&it);
        let back = layout.extract(&x);
        assert_eq!(back, it);
    }

    #[test]
    fn case4_objective_references_only_epigraph_and_common_leak() {
        let cs = test_channel(1);
        let pb = PowerBudget::new(10.0, 10.0).unwrap();
        let d = mf_design(&cs, &pb, 0.5);
        let it = iterate_from_design(SchemeShape::crs(), CaseId::Case4, &d, &cs, &pb, 1e-4);
        let p = assemble(CaseId::Case4, &it, &cs, &pb).unwrap();
        let layout = VarLayout::build(2, SchemeShape::crs());
        for i in 0..p.n_vars {
            let expect = if i == layout.t_c.unwrap() {
                1.0
            } else if i == layout.alpha_ce.unwrap() {
                -1.0
            } else {
                0.0
            };
            assert_eq!(p.objective[i], expect, "slot {} ({})", i, p.var_names[i]);
        }
    }

    #[test]
    fn case1_objective_has_private_terms() {
        let cs = test_channel(1);
        let pb = PowerBudget::new(10.0, 10.0).unwrap();
        let d = mf_design(&cs, &pb, 0.5);
        let it = iterate_from_design(SchemeShape::crs(), CaseId::Case1, &d, &cs, &pb, 1e-4);
        let p = assemble(CaseId::Case1, &it, &cs, &pb).unwrap();
        let layout = VarLayout::build(2, SchemeShape::crs());
        assert_eq!(p.objective[layout.alpha_p[0].unwrap()], 1.0);
        assert_eq!(p.objective[layout.alpha_e[1].unwrap()], -1.0);
    }

    #[test]
    fn expansion_point_is_feasible_when_pattern_holds() {
        // Zero-ish eavesdropper: case 1's pattern holds at any design, so
        // the slack-backed equality embedding must satisfy every block.
        let mut cs = test_channel(2);
        for z in cs.g1.iter_mut() {
            *z *= 1e-6;
        }
        cs.g2 *= 1e-6;
        let pb = PowerBudget::new(10.0, 10.0).unwrap();
        let d = mf_design(&cs, &pb, 0.5);
        let it = iterate_from_design(SchemeShape::crs(), CaseId::Case1, &d, &cs, &pb, 1e-4);
        let p = assemble(CaseId::Case1, &it, &cs, &pb).unwrap();
        let layout = VarLayout::build(2, SchemeShape::crs());
        let x = layout.vectorize(&it);
        let worst = p.max_violation(&x);
        assert!(worst <= 0.0, "violation {worst}");
    }

    #[test]
    fn tightness_carries_feasibility_across_shapes() {
        // Weak eavesdropper: Ge patterns hold; the embedding must be
        // strictly feasible for case 1 under every scheme shape.
        let mut cs = test_channel(7);
        for z in cs.g1.iter_mut() {
            *z *= 0.05;
        }
        cs.g2 *= 0.05;
        let pb = PowerBudget::new(20.0, 20.0).unwrap();
        for shape in [
            SchemeShape::crs(),
            SchemeShape::nrs(),
            SchemeShape::mulp(),
            SchemeShape::cnoma(),
        ] {
            let mut d = mf_design(&cs, &pb, if shape.theta_fixed.is_some() { 1.0 } else { 0.6 });
            if !shape.common {
                d.p_c = vec![c(0.0, 0.0); 2];
            }
            if !shape.private_active[1] {
                d.p_2 = vec![c(0.0, 0.0); 2];
            }
            let it = iterate_from_design(shape, CaseId::Case1, &d, &cs, &pb, 1e-4);
            let p = assemble_shaped(shape, CaseId::Case1, &it, &cs, &pb).unwrap();
            let layout = VarLayout::build(2, shape);
            let x = layout.vectorize(&it);
            assert!(
                p.is_strictly_feasible(&x, 0.0),
                "shape {shape:?}: violation {}",
                p.max_violation(&x),
            );
        }
    }

    #[test]
    fn zero_design_case4_common_guard_is_zero() {
        // The relay-phase leak term does not depend on the precoders, so
        // "everything zero at the zero design" needs g2 = 0.
        let mut cs = test_channel(3);
        cs.g2 = c(0.0, 0.0);
        let pb = PowerBudget::new(10.0, 10.0).unwrap();
        let design = PrecoderDesign::zero(2, 0.5);
        let it = iterate_from_design(SchemeShape::crs(), CaseId::Case4, &design, &cs, &pb, 0.0);
        let res = original_case_residuals(CaseId::Case4, &it, &cs, &pb);
        // both sides of the common guard are zero at user 1; user 2 keeps
        // its (nonnegative) relay bonus
        assert_eq!(res.common_guard[0], 0.0);
        assert!(res.common_guard[1] >= 0.0);
        // both private patterns sit on the boundary
        assert_eq!(res.sign[0].unwrap(), 0.0);
        assert_eq!(res.sign[1].unwrap(), 0.0);
    }

    #[test]
    fn power_violation_shows_in_residual() {
        let cs = test_channel(4);
        let pb = PowerBudget::new(10.0, 10.0).unwrap();
        let mut d = PrecoderDesign::zero(2, 0.5);
        // ||P||^2 = 1.1 * P_T
        d.p_1 = vec![c((1.1f64 * pb.p_t).sqrt(), 0.0), c(0.0, 0.0)];
        let it = iterate_from_design(SchemeShape::crs(), CaseId::Case1, &d, &cs, &pb, 0.0);
        let res = original_case_residuals(CaseId::Case1, &it, &cs, &pb);
        assert!((res.power - (-0.1 * pb.p_t)).abs() < 1e-9, "power {}", res.power);
    }

    #[test]
    fn nonpositive_expansion_rho_is_domain_error() {
        let cs = test_channel(5);
        let pb = PowerBudget::new(10.0, 10.0).unwrap();
        let d = mf_design(&cs, &pb, 0.5);
        let mut it = iterate_from_design(SchemeShape::crs(), CaseId::Case1, &d, &cs, &pb, 1e-4);
        it.rho_c[0] = 0.0;
        let err = assemble(CaseId::Case1, &it, &cs, &pb).unwrap_err();
        assert!(matches!(err, Error::Domain(_)), "got {err}");
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let cs = test_channel(5);
        let pb = PowerBudget::new(10.0, 10.0).unwrap();
        let d3 = PrecoderDesign::zero(3, 0.5);
        let it = ScaIterate {
            design: d3,
            alpha_p: [0.0; 4],
            alpha_c: [0.0; 3],
            beta_p: [0.0; 4],
            beta_c: [0.0; 3],
            rho_p: [1.0; 4],
            rho_c: [1.0; 3],
        };
        let err = assemble(CaseId::Case1, &it, &cs, &pb).unwrap_err();
        assert!(matches!(err, Error::InvalidDimension(_)), "got {err}");
    }

    #[test]
    fn blocks_pass_numerical_convexity_spot_check() {
        let cs = test_channel(6);
        let pb = PowerBudget::new(15.0, 15.0).unwrap();
        let d = mf_design(&cs, &pb, 0.5);
        let it = iterate_from_design(SchemeShape::crs(), CaseId::Case2, &d, &cs, &pb, 1e-4);
        let p = assemble(CaseId::Case2, &it, &cs, &pb).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for b in &p.blocks {
            for _ in 0..20 {
                let mut x1 = DVector::zeros(p.n_vars);
                let mut x2 = DVector::zeros(p.n_vars);
                for i in 0..p.n_vars {
                    x1[i] = rng.random_range(-1.0..1.0);
                    x2[i] = rng.random_range(-1.0..1.0);
                }
                // keep quad-over-linear denominators positive
                if let BlockKind::QuadOverLinear { d, e, .. } = &b.kind {
                    let fix = |x: &mut DVector<f64>| {
                        let v = d.dot(x) + e;
                        if v < 0.1 {
                            x.axpy(0.2 - v, d, 1.0);
                        }
                    };
                    fix(&mut x1);
                    fix(&mut x2);
                }
                let mid = (&x1 + &x2) * 0.5;
                let lhs = b.kind.eval(&mid);
                let rhs = 0.5 * (b.kind.eval(&x1) + b.kind.eval(&x2));
                assert!(
                    lhs <= rhs + 1e-9 * (1.0 + rhs.abs()),
                    "{} not convex: mid {lhs} vs avg {rhs}",
                    b.label
                );
            }
        }
    }

    #[test]
    fn restoration_program_has_slack_objective() {
        let cs = test_channel(8);
        let pb = PowerBudget::new(10.0, 10.0).unwrap();
        let d = mf_design(&cs, &pb, 0.5);
        let it = iterate_from_design(SchemeShape::crs(), CaseId::Case1, &d, &cs, &pb, 1e-4);
        let (p, s) =
            assemble_restoration(SchemeShape::crs(), CaseId::Case1, &it, &cs, &pb).unwrap();
        assert_eq!(s, p.n_vars - 1);
        for i in 0..p.n_vars {
            assert_eq!(p.objective[i], if i == s { 1.0 } else { 0.0 });
        }
        // the sign blocks carry the slack
        let sign_block = p.blocks.iter().find(|b| b.label.starts_with("sign u1")).unwrap();
        match &sign_block.kind {
            BlockKind::Affine { a, .. } => assert_eq!(a[s], 1.0),
            other => panic!("unexpected kind {other:?}"),
        }
    }
}
