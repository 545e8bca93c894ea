//! End-to-end checks of assemble -> solve on real channel draws.

use crs_core::cases::{
    assemble, iterate_from_design, original_case_residuals, CaseId, SchemeShape, VarLayout,
};
use crs_core::channel::{generate_channel_set_for_trial, ChannelStats, PowerBudget};
use crs_core::cx::norm_sq;
use crs_core::rates::{secrecy_sum_rate, PrecoderDesign};
use crs_core::solver::{solve, SolverConfig, SolverStatus};
use num_complex::Complex64;

fn mf_design(cs: &crs_core::ChannelSet, pb: &PowerBudget, theta: f64) -> PrecoderDesign {
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
fn one_subproblem_solves_and_improves() {
    // weak eavesdropper so case 1 is comfortably feasible at the start
    let mut cs = generate_channel_set_for_trial(99, 0, 2, &ChannelStats::default()).unwrap();
    for z in cs.g1.iter_mut() {
        *z *= 0.05;
    }
    cs.g2 *= 0.05;
    let pb = PowerBudget::new(10.0, 10.0).unwrap();
    let d = mf_design(&cs, &pb, 0.5);
    let it = iterate_from_design(SchemeShape::crs(), CaseId::Case1, &d, &cs, &pb, 1e-5);
    let layout = VarLayout::build(2, SchemeShape::crs());
    let warm = layout.vectorize(&it);

    let program = assemble(CaseId::Case1, &it, &cs, &pb).unwrap();
    assert!(
        program.is_strictly_feasible(&warm, 0.0),
        "warm start infeasible: {}",
        program.max_violation(&warm)
    );
    let t0 = program.objective.dot(&warm);

    let cfg = SolverConfig::default();
    let r = solve(&program, &cfg, Some(&warm));
    eprintln!(
        "status {:?} obj {} (warm obj {t0}) iters {} residuals {:?}",
        r.status, r.objective, r.iterations, r.residuals
    );
    assert_eq!(r.status, SolverStatus::Optimal);
    assert!(r.objective >= t0 - 1e-9, "no improvement: {} vs {t0}", r.objective);

    // the solution must satisfy the original nonconvex case constraints
    let out = layout.extract(&r.x);
    let res = original_case_residuals(CaseId::Case1, &out, &cs, &pb);
    assert!(res.feasible(1e-6), "residuals {res:?}");

    // and its true secrecy rate should not be absurdly below the surrogate
    let ssr = secrecy_sum_rate(&out.design, &cs, &pb);
    eprintln!("true ssr {ssr} vs surrogate objective {}", r.objective);
    assert!(ssr >= r.objective - 1e-6);
}
