//! The five first-order surrogates used by the convexification.
//!
//! Each surrogate replaces a nonconvex expression by a bound that is tight
//! at the expansion point and certified in one direction:
//!
//! | surrogate       | target                  | direction |
//! |-----------------|-------------------------|-----------|
//! | [`phi_lb`]      | `theta * beta`          | lower     |
//! | [`theta_ub`]    | `theta * beta`          | upper     |
//! | [`psi_lb`]      | `\|h^H p\|^2 / rho`     | lower     |
//! | [`omega_lb`]    | `\|g^H a\|^2+\|g^H b\|^2`| lower    |
//! | [`gamma_tangent`]| `2^beta`               | lower     |
//!
//! `phi_lb` and `theta_ub` come from writing the product as a difference of
//! squares, `theta*beta = ((theta+beta)^2 - (theta-beta)^2)/4`, and Taylor-
//! expanding one square; the rest are tangent planes of convex functions.
//!
//! Besides plain evaluators, every surrogate is exposed as a coefficient
//! bundle (constant, linear, quadratic parts) so the subproblem assembler
//! can stamp it directly into constraint matrices.

use num_complex::Complex64;

use crate::cx::{gain, quad_tangent_row, realify};
use crate::error::{Error, Result};

const LN2: f64 = std::f64::consts::LN_2;

// ---------------------------------------------------------------------------
// Phi / Theta: bounds on the bilinear product theta * beta
// ---------------------------------------------------------------------------

/// A quadratic function of `(theta, beta)`:
/// `value = c + l_theta*theta + l_beta*beta
///        + q_tt*theta^2 + 2*q_tb*theta*beta + q_bb*beta^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductBound {
    pub c: f64,
    pub l_theta: f64,
    pub l_beta: f64,
    pub q_tt: f64,
    pub q_tb: f64,
    pub q_bb: f64,
}

impl ProductBound {
    pub fn eval(&self, theta: f64, beta: f64) -> f64 {
        self.c
            + self.l_theta * theta
            + self.l_beta * beta
            + self.q_tt * theta * theta
            + 2.0 * self.q_tb * theta * beta
            + self.q_bb * beta * beta
    }

    /// `(d/dtheta, d/dbeta)`.
    pub fn grad(&self, theta: f64, beta: f64) -> (f64, f64) {
        (
            self.l_theta + 2.0 * self.q_tt * theta + 2.0 * self.q_tb * beta,
            self.l_beta + 2.0 * self.q_bb * beta + 2.0 * self.q_tb * theta,
        )
    }
}

/// Concave minorant of `theta*beta` expanded at `(theta0, beta0)`:
/// Taylor of `(theta+beta)^2/4` minus the exact `(theta-beta)^2/4`.
pub fn phi_bundle(at: (f64, f64)) -> ProductBound {
    let s0 = at.0 + at.1;
    ProductBound {
        c: -0.25 * s0 * s0,
        l_theta: 0.5 * s0,
        l_beta: 0.5 * s0,
        q_tt: -0.25,
        q_tb: 0.25,
        q_bb: -0.25,
    }
}

/// Convex majorant of `theta*beta` expanded at `(theta0, beta0)`:
/// exact `(theta+beta)^2/4` minus the Taylor of `(theta-beta)^2/4`.
pub fn theta_bundle(at: (f64, f64)) -> ProductBound {
    let d0 = at.0 - at.1;
    ProductBound {
        c: 0.25 * d0 * d0,
        l_theta: -0.5 * d0,
        l_beta: 0.5 * d0,
        q_tt: 0.25,
        q_tb: 0.25,
        q_bb: 0.25,
    }
}

/// Lower bound on `theta*beta`; tight at `at`.
pub fn phi_lb(theta: f64, beta: f64, at: (f64, f64)) -> f64 {
    phi_bundle(at).eval(theta, beta)
}

/// Upper bound on `theta*beta`; tight at `at`.
pub fn theta_ub(theta: f64, beta: f64, at: (f64, f64)) -> f64 {
    theta_bundle(at).eval(theta, beta)
}

// ---------------------------------------------------------------------------
// Psi: tangent minorant of the quadratic-over-linear form |h^H p|^2 / rho
// ---------------------------------------------------------------------------

/// The tangent plane of `|h^H p|^2 / rho` at `(p0, rho0)`, linear in the
/// flattened precoder coordinates and in `rho`.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiBundle {
    pub lin_p: Vec<f64>,
    pub lin_rho: f64,
}

impl PsiBundle {
    pub fn eval(&self, p: &[Complex64], rho: f64) -> f64 {
        let x = realify(p);
        self.lin_p.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() + self.lin_rho * rho
    }
}

/// Builds the tangent of `|h^H p|^2 / rho` at `(p0, rho0)`; `rho0` must be
/// positive.
pub fn psi_bundle(h: &[Complex64], p0: &[Complex64], rho0: f64) -> Result<PsiBundle> {
    if !(rho0 > 0.0) {
        return Err(Error::Domain(format!(
            "psi expansion requires rho0 > 0, got {rho0}"
        )));
    }
    let lin_p: Vec<f64> = quad_tangent_row(h, p0).iter().map(|v| v / rho0).collect();
    let lin_rho = -gain(h, p0) / (rho0 * rho0);
    Ok(PsiBundle { lin_p, lin_rho })
}

/// Lower bound on `|h^H p|^2 / rho`; tight at `(p0, rho0)`.
pub fn psi_lb(p: &[Complex64], h: &[Complex64], rho: f64, at: (&[Complex64], f64)) -> Result<f64> {
    Ok(psi_bundle(h, at.0, at.1)?.eval(p, rho))
}

// ---------------------------------------------------------------------------
// Omega: tangent minorant of a sum of squared channel gains
// ---------------------------------------------------------------------------

/// The tangent plane of `|g^H pa|^2 + |g^H pb|^2` at `(pa0, pb0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OmegaBundle {
    pub lin_pa: Vec<f64>,
    pub lin_pb: Vec<f64>,
    pub c: f64,
}

impl OmegaBundle {
    pub fn eval(&self, pa: &[Complex64], pb: &[Complex64]) -> f64 {
        let xa = realify(pa);
        let xb = realify(pb);
        self.lin_pa.iter().zip(&xa).map(|(a, b)| a * b).sum::<f64>()
            + self.lin_pb.iter().zip(&xb).map(|(a, b)| a * b).sum::<f64>()
            + self.c
    }
}

pub fn omega_bundle(g: &[Complex64], pa0: &[Complex64], pb0: &[Complex64]) -> OmegaBundle {
    OmegaBundle {
        lin_pa: quad_tangent_row(g, pa0),
        lin_pb: quad_tangent_row(g, pb0),
        c: -gain(g, pa0) - gain(g, pb0),
    }
}

/// Lower bound on `|g^H pa|^2 + |g^H pb|^2`; tight at `(pa0, pb0)`.
pub fn omega_lb(
    pa: &[Complex64],
    pb: &[Complex64],
    g: &[Complex64],
    at: (&[Complex64], &[Complex64]),
) -> f64 {
    omega_bundle(g, at.0, at.1).eval(pa, pb)
}

// ---------------------------------------------------------------------------
// Gamma: tangent minorant of 2^beta
// ---------------------------------------------------------------------------

/// The tangent line of `2^beta` at `beta0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaBundle {
    pub lin: f64,
    pub c: f64,
}

impl GammaBundle {
    pub fn eval(&self, beta: f64) -> f64 {
        self.c + self.lin * beta
    }
}

pub fn gamma_bundle(beta0: f64) -> GammaBundle {
    let e = beta0.exp2();
    GammaBundle { lin: e * LN2, c: e * (1.0 - beta0 * LN2) }
}

/// Lower bound on `2^beta`; tight at `beta0`, slope `ln(2) * 2^beta0`.
pub fn gamma_tangent(beta: f64, at: f64) -> f64 {
    gamma_bundle(at).eval(beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn phi_hand_values() {
        // tight at the expansion point
        assert!((phi_lb(0.5, 2.0, (0.5, 2.0)) - 1.0).abs() < 1e-15);
        // hand evaluation away from it
        let v = phi_lb(1.0, 2.0, (0.5, 1.0));
        assert!((v - 1.4375).abs() < 1e-15, "phi = {v}");
        assert!(v <= 2.0);
        // zero expansion point: phi = -(theta-beta)^2/4 and the gap is
        // exactly (theta+beta)^2/4
        for (t, b) in [(0.3, 0.7), (1.0, 0.0), (2.0, 5.0)] {
            let v = phi_lb(t, b, (0.0, 0.0));
            assert!((v + 0.25 * (t - b) * (t - b)).abs() < 1e-14);
            assert!((t * b - v - 0.25 * (t + b) * (t + b)).abs() < 1e-12);
        }
    }

    #[test]
    fn theta_hand_values() {
        assert!((theta_ub(0.5, 0.5, (0.5, 0.5)) - 0.25).abs() < 1e-15);
        let v = theta_ub(0.0, 1.0, (1.0, 0.0));
        assert!((v - 1.0).abs() < 1e-15, "theta_ub = {v}");
        assert!(v >= 0.0);
    }

    #[test]
    fn psi_hand_values() {
        let h = vec![c(1.0, 0.0)];
        let p0 = vec![c(1.0, 0.0)];
        let tight = psi_lb(&p0, &h, 1.0, (&p0, 1.0)).unwrap();
        assert!((tight - 1.0).abs() < 1e-15);
        let p = vec![c(2.0, 0.0)];
        let v = psi_lb(&p, &h, 1.0, (&p0, 1.0)).unwrap();
        assert!((v - 3.0).abs() < 1e-15, "psi = {v}");
        assert!(v <= 4.0);
        assert!(psi_bundle(&h, &p0, 0.0).is_err());
        assert!(psi_bundle(&h, &p0, -1.0).is_err());
    }

    #[test]
    fn omega_hand_values() {
        let g = vec![c(1.0, 0.0)];
        let one = vec![c(1.0, 0.0)];
        let two = vec![c(2.0, 0.0)];
        let v = omega_lb(&two, &two, &g, (&one, &one));
        assert!((v - 6.0).abs() < 1e-15, "omega = {v}");
        assert!(v <= 8.0);
        // tight at the expansion point
        let t = omega_lb(&one, &one, &g, (&one, &one));
        assert!((t - 2.0).abs() < 1e-15);
        // zero tangent
        let zero = vec![c(0.0, 0.0)];
        assert_eq!(omega_lb(&two, &two, &g, (&zero, &zero)), 0.0);
    }

    #[test]
    fn gamma_hand_values() {
        let v = gamma_tangent(2.0, 1.0);
        assert!((v - 2.0 * (1.0 + LN2)).abs() < 1e-15, "gamma = {v}");
        assert!(v <= 4.0);
        assert!((gamma_tangent(1.5, 1.5) - 1.5f64.exp2()).abs() < 1e-15);
        // finite-difference slope at the expansion point
        let b0 = 0.8;
        let h = 1e-6;
        let fd = (gamma_tangent(b0 + h, b0) - gamma_tangent(b0 - h, b0)) / (2.0 * h);
        assert!((fd - LN2 * b0.exp2()).abs() < 1e-6);
    }

    #[test]
    fn randomized_bound_audit() {
        // Quick version of the full acceptance audit (which runs 1e5 draws).
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..5_000 {
            let t0 = rng.random_range(0.0..1.5);
            let b0 = rng.random_range(0.0..6.0);
            let t = rng.random_range(0.0..1.5);
            let b = rng.random_range(0.0..6.0);
            assert!(phi_lb(t, b, (t0, b0)) <= t * b + 1e-12);
            assert!(theta_ub(t, b, (t0, b0)) >= t * b - 1e-12);
            assert!(gamma_tangent(b, b0) <= b.exp2() + 1e-12);

            let rv = |rng: &mut ChaCha8Rng| {
                vec![
                    c(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)),
                    c(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)),
                ]
            };
            let h = rv(&mut rng);
            let p = rv(&mut rng);
            let p0 = rv(&mut rng);
            let rho = rng.random_range(0.01..10.0);
            let rho0 = rng.random_range(0.01..10.0);
            let psi = psi_lb(&p, &h, rho, (&p0, rho0)).unwrap();
            assert!(psi <= gain(&h, &p) / rho + 1e-12);

            let pa = rv(&mut rng);
            let pb = rv(&mut rng);
            let pa0 = rv(&mut rng);
            let pb0 = rv(&mut rng);
            let om = omega_lb(&pa, &pb, &h, (&pa0, &pb0));
            assert!(om <= gain(&h, &pa) + gain(&h, &pb) + 1e-12);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = 1e-6;
        for _ in 0..200 {
            let at = (rng.random_range(0.1..1.0), rng.random_range(0.1..5.0));
            let t = rng.random_range(0.1..1.0);
            let b = rng.random_range(0.1..5.0);
            for bundle in [phi_bundle(at), theta_bundle(at)] {
                let (gt, gb) = bundle.grad(t, b);
                let fdt = (bundle.eval(t + h, b) - bundle.eval(t - h, b)) / (2.0 * h);
                let fdb = (bundle.eval(t, b + h) - bundle.eval(t, b - h)) / (2.0 * h);
                assert!((gt - fdt).abs() <= 1e-5 * gt.abs().max(1.0));
                assert!((gb - fdb).abs() <= 1e-5 * gb.abs().max(1.0));
            }
        }
    }
}
