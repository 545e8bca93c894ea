use crs_core::cases::*;
use crs_core::channel::{generate_channel_set_for_trial, ChannelStats, PowerBudget};
use crs_core::sca::{initialize, ScaConfig};
use crs_core::solver::solve;

fn main() {
    let cs = generate_channel_set_for_trial(11, 3, 2, &ChannelStats::default()).unwrap();
    let pb = PowerBudget::from_snr_db(10.0);
    let cfg = ScaConfig::default();
    let layout = VarLayout::build(2, SchemeShape::crs());
    let mut it = initialize(CaseId::Case1, &cs, &pb).unwrap();
    let mut warm = layout.vectorize(&it);
    for n in 1..=14 {
        let p = assemble(CaseId::Case1, &it, &cs, &pb).unwrap();
        let r = solve(&p, &cfg.solver, Some(&warm));
        eprintln!(
            "iter {n}: {:?} obj {:.9} newton {} resid(s={:.1e},p={:.1e},c={:.1e})",
            r.status, r.objective, r.iterations,
            r.residuals.stationarity, r.residuals.primal, r.residuals.complementarity
        );
        let usable = r.status == crs_core::solver::SolverStatus::Optimal
            || (r.status == crs_core::solver::SolverStatus::MaxIters
                && r.residuals.primal == 0.0
                && r.residuals.complementarity <= 1e-7);
        if !usable {
            eprintln!("NOT USABLE");
            break;
        }
        it = layout.extract(&r.x);
        warm = r.x;
    }
}
