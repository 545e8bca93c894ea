use crs_core::channel::{generate_channel_set_for_trial, ChannelStats, PowerBudget};
use crs_core::sca::ScaConfig;
use crs_core::schemes::{solve_scheme_warm, SchemeId};

fn main() {
    for snr in [0.0, 10.0, 20.0, 30.0] {
        let t0 = std::time::Instant::now();
        let mut newton = 0usize;
        for trial in 0..3u64 {
            let cs = generate_channel_set_for_trial(42, trial, 2, &ChannelStats::default()).unwrap();
            let pb = PowerBudget::from_snr_db(snr);
            let cfg = ScaConfig::default();
            let mut solved = Vec::new();
            for s in [SchemeId::Nrs, SchemeId::Mulp, SchemeId::Cnoma, SchemeId::Crs] {
                let warm: Vec<&_> = solved.iter().collect();
                let sol = solve_scheme_warm(s, &cs, &pb, &cfg, &warm);
                newton += sol.cases.iter().map(|c| c.newton_iters).sum::<usize>();
                solved.push(sol);
            }
            let labels: Vec<String> = solved.iter().map(|s| format!("{}={:.3}({})", s.scheme, s.ssr, format!("{:?}", s.best_case().status))).collect();
            if trial == 0 { eprintln!("  snr {snr}: {}", labels.join(" ")); }
        }
        eprintln!("snr {snr}: {:.2} s for 3 cells (4 schemes), newton {newton}", t0.elapsed().as_secs_f64());
    }
}
