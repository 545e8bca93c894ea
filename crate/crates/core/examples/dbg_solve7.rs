use crs_core::cases::*;
use crs_core::channel::{generate_channel_set_for_trial, ChannelStats, PowerBudget};
use crs_core::sca::{initialize_shaped, ScaConfig};
use crs_core::solver::solve;

fn main() {
    let cs = generate_channel_set_for_trial(42, 0, 2, &ChannelStats::default()).unwrap();
    let pb = PowerBudget::from_snr_db(0.0);
    let shape = SchemeShape::cnoma();
    let cfg = ScaConfig::default();
    let layout = VarLayout::build(2, shape);
    let mut it = initialize_shaped(shape, CaseId::Case1, &cs, &pb, &cfg).unwrap();
    let mut warm = layout.vectorize(&it);
    for n in 1..=10 {
        let p = assemble_shaped(shape, CaseId::Case1, &it, &cs, &pb).unwrap();
        let r = solve(&p, &cfg.solver, Some(&warm));
        let th = layout.theta.map(|s| r.x[s]).unwrap_or(1.0);
        eprintln!(
            "iter {n}: status {:?} obj {:.9} newton {} theta {:.6} residuals {:?}",
            r.status, r.objective, r.iterations, th, r.residuals
        );
        if !matches!(r.status, crs_core::solver::SolverStatus::Optimal) {
            // dump the slacks of the warm point and how far off it was
            let strictly = p.is_strictly_feasible(&warm, 1e-12);
            eprintln!("  warm strictly feasible: {strictly}, max viol {:.3e}", p.max_violation(&warm));
            for (b, g) in p.blocks.iter().zip(p.eval_all(&r.x)) {
                if g > -1e-9 {
                    eprintln!("  tight/violated at exit: {:>12.4e} {}", g, b.label);
                }
            }
            break;
        }
        it = layout.extract(&r.x);
        warm = r.x;
    }
}
