use crs_core::channel::{generate_channel_set_for_trial, ChannelStats, PowerBudget};
use crs_core::sca::ScaConfig;
use crs_core::schemes::{solve_scheme, SchemeId};

fn main() {
    let cs = generate_channel_set_for_trial(42, 0, 2, &ChannelStats::default()).unwrap();
    let pb = PowerBudget::from_snr_db(0.0);
    let cfg = ScaConfig::default();
    let sol = solve_scheme(SchemeId::Cnoma, &cs, &pb, &cfg);
    for c in &sol.cases {
        eprintln!(
            "case {} status {:?} iters {} ssr {:.6} slack {:.3e} trace(last 6) {:?}",
            c.case,
            c.status,
            c.iters,
            c.true_ssr,
            c.min_original_slack,
            &c.trace[c.trace.len().saturating_sub(6)..]
        );
    }
}
