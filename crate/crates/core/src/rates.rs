//! Exact SINR, rate and secrecy-sum-rate evaluation.
//!
//! These closed forms are the ground truth that every optimizer output is
//! scored against. All logarithms are base 2; rates are bits per channel
//! use. The `[.]+` clamp of the secrecy terms is applied here, in
//! reporting, and never inside the optimization (where the four-case
//! decomposition replaces it).

use num_complex::Complex64;
use serde::Serialize;

use crate::channel::{ChannelSet, PowerBudget};
use crate::cx::{gain, norm_sq};

/// A transmit design: the three precoder columns and the direct-phase
/// time fraction `theta` in `(0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderDesign {
    pub p_c: Vec<Complex64>,
    pub p_1: Vec<Complex64>,
    pub p_2: Vec<Complex64>,
    pub theta: f64,
}

impl PrecoderDesign {
    pub fn zero(n_t: usize, theta: f64) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); n_t];
        PrecoderDesign { p_c: z.clone(), p_1: z.clone(), p_2: z, theta }
    }

    /// Total transmit power `tr(P P^H)`.
    pub fn power(&self) -> f64 {
        norm_sq(&self.p_c) + norm_sq(&self.p_1) + norm_sq(&self.p_2)
    }
}

/// Every receive-side SINR of the two transmission phases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SinrBundle {
    /// Common stream at user k, direct phase.
    pub gc1: f64,
    pub gc2: f64,
    /// Private stream at user k, direct phase (after removing the common
    /// stream).
    pub gp1: f64,
    pub gp2: f64,
    /// Common stream at user 2, relay phase.
    pub gc2_p2: f64,
    /// Common stream at the eavesdropper, per phase.
    pub gce1: f64,
    pub gce2: f64,
    /// Private streams at the eavesdropper (common stream acts as noise).
    pub g1e: f64,
    pub g2e: f64,
}

/// All achievable rates plus the secrecy decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateBundle {
    pub r_c1: f64,
    pub r_c2: f64,
    /// `min(r_c1, r_c2)` -- the decodable common rate.
    pub r_c: f64,
    pub r_p1: f64,
    pub r_p2: f64,
    /// Eavesdropper rates on the common stream (both phases) and on each
    /// private stream.
    pub c_ce: f64,
    pub c_1e: f64,
    pub c_2e: f64,
    /// Clamped secrecy components and their sum.
    pub r_c_sec: f64,
    pub r_p1_sec: f64,
    pub r_p2_sec: f64,
    pub total: f64,
}

/// Evaluates every SINR of the design in closed form.
pub fn compute_sinrs(d: &PrecoderDesign, cs: &ChannelSet, pb: &PowerBudget) -> SinrBundle {
    let s = &cs.sigma2;
    let (h1, h2, g1) = (&cs.h1, &cs.h2, &cs.g1);

    let gc1 = gain(h1, &d.p_c) / (gain(h1, &d.p_1) + gain(h1, &d.p_2) + s.u1);
    let gc2 = gain(h2, &d.p_c) / (gain(h2, &d.p_1) + gain(h2, &d.p_2) + s.u2);
    let gp1 = gain(h1, &d.p_1) / (gain(h1, &d.p_2) + s.u1);
    let gp2 = gain(h2, &d.p_2) / (gain(h2, &d.p_1) + s.u2);
    let gc2_p2 = pb.p_r * cs.h3.norm_sqr() / s.u3;
    let gce1 = gain(g1, &d.p_c) / (gain(g1, &d.p_1) + gain(g1, &d.p_2) + s.e1);
    let gce2 = pb.p_r * cs.g2.norm_sqr() / s.e2;
    let g1e = gain(g1, &d.p_1) / (gain(g1, &d.p_c) + gain(g1, &d.p_2) + s.e1);
    let g2e = gain(g1, &d.p_2) / (gain(g1, &d.p_c) + gain(g1, &d.p_1) + s.e1);

    SinrBundle { gc1, gc2, gp1, gp2, gc2_p2, gce1, gce2, g1e, g2e }
}

fn rate(sinr: f64) -> f64 {
    (1.0 + sinr).log2()
}

/// Evaluates every achievable rate and the secrecy decomposition.
pub fn achievable_rates(d: &PrecoderDesign, cs: &ChannelSet, pb: &PowerBudget) -> RateBundle {
    let g = compute_sinrs(d, cs, pb);
    let th = d.theta;

    let r_c1 = th * rate(g.gc1);
    let r_c2 = th * rate(g.gc2) + (1.0 - th) * rate(g.gc2_p2);
    let r_c = r_c1.min(r_c2);
    let r_p1 = th * rate(g.gp1);
    let r_p2 = th * rate(g.gp2);
    let c_ce = th * rate(g.gce1) + (1.0 - th) * rate(g.gce2);
    let c_1e = th * rate(g.g1e);
    let c_2e = th * rate(g.g2e);

    let r_c_sec = (r_c - c_ce).max(0.0);
    let r_p1_sec = (r_p1 - c_1e).max(0.0);
    let r_p2_sec = (r_p2 - c_2e).max(0.0);
    let total = r_c_sec + r_p1_sec + r_p2_sec;

    RateBundle {
        r_c1,
        r_c2,
        r_c,
        r_p1,
        r_p2,
        c_ce,
        c_1e,
        c_2e,
        r_c_sec,
        r_p1_sec,
        r_p2_sec,
        total,
    }
}

/// The secrecy sum rate of the design, always nonnegative.
pub fn secrecy_sum_rate(d: &PrecoderDesign, cs: &ChannelSet, pb: &PowerBudget) -> f64 {
    achievable_rates(d, cs, pb).total
}
