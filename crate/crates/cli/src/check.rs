//! The `check` subcommand: fast re-runs of the core numerical invariants.

use crs_core::cases::{assemble, CaseId};
use crs_core::channel::{generate_channel_set_for_trial, ChannelStats, PowerBudget};
use crs_core::cx::gain;
use crs_core::sca::{initialize, sca_solve_case, CaseStatus, ScaConfig};
use crs_core::solver::gradient_check;
use crs_core::surrogate::{gamma_tangent, omega_lb, phi_lb, psi_lb, theta_ub};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(name: &str, pass: bool, detail: String) -> bool {
    println!("{}: {name} — {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}

pub fn run(verbose: bool) -> anyhow::Result<()> {
    let mut all = true;

    // surrogate bound directions and tightness
    {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut worst: f64 = 0.0;
        let draws = 100_000;
        for _ in 0..draws {
            let t0 = rng.random_range(0.0..1.5);
            let b0 = rng.random_range(0.0..6.0);
            let t = rng.random_range(0.0..1.5);
            let b = rng.random_range(0.0..6.0);
            worst = worst.max(phi_lb(t, b, (t0, b0)) - t * b);
            worst = worst.max(t * b - theta_ub(t, b, (t0, b0)));
            worst = worst.max(gamma_tangent(b, b0) - b.exp2());
            let rv = |rng: &mut ChaCha8Rng| {
                vec![
                    Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)),
                    Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)),
                ]
            };
            let h = rv(&mut rng);
            let p = rv(&mut rng);
            let p0 = rv(&mut rng);
            let rho = rng.random_range(0.01..10.0);
            let rho0 = rng.random_range(0.01..10.0);
            worst = worst.max(psi_lb(&p, &h, rho, (&p0, rho0)).unwrap() - gain(&h, &p) / rho);
            let pa = rv(&mut rng);
            let pb = rv(&mut rng);
            worst = worst
                .max(omega_lb(&pa, &pb, &h, (&p0, &p)) - gain(&h, &pa) - gain(&h, &pb));
        }
        all &= report(
            "surrogate bounds",
            worst <= 1e-12,
            format!("worst bound violation {worst:.2e} over {draws} draws"),
        );
    }

    // derivative consistency of assembled constraint families
    {
        let cs = generate_channel_set_for_trial(7, 0, 2, &ChannelStats::default())?;
        let pb = PowerBudget::new(10.0, 10.0)?;
        let init = initialize(CaseId::Case1, &cs, &pb)
            .map_err(|e| anyhow::anyhow!("no case-1 start: {e}"))?;
        let program = assemble(CaseId::Case1, &init, &cs, &pb)?;
        let layout = crs_core::cases::VarLayout::build(2, crs_core::cases::SchemeShape::crs());
        let x = layout.vectorize(&init);
        let dev = gradient_check(&program, &x);
        all &= report(
            "constraint derivatives",
            dev <= 1e-5,
            format!("max relative deviation {dev:.2e}"),
        );
    }

    // one SCA monotonicity probe
    {
        let cs = generate_channel_set_for_trial(11, 3, 2, &ChannelStats::default())?;
        let pb = PowerBudget::from_snr_db(10.0);
        let cfg = ScaConfig::default();
        match initialize(CaseId::Case1, &cs, &pb) {
            Ok(init) => {
                let sol = sca_solve_case(CaseId::Case1, init, &cs, &pb, &cfg);
                let monotone = sol.trace.windows(2).all(|w| w[1] >= w[0] - 1e-6);
                if verbose {
                    eprintln!("  trace: {:?}", sol.trace);
                }
                all &= report(
                    "sca monotonicity",
                    monotone && sol.status == CaseStatus::Converged,
                    format!(
                        "{} iters, status {:?}, feasibility slack {:.1e}",
                        sol.iters, sol.status, sol.min_original_slack
                    ),
                );
            }
            Err(e) => {
                all &= report("sca monotonicity", false, format!("initialization failed: {e}"));
            }
        }
    }

    if all {
        Ok(())
    } else {
        anyhow::bail!("one or more checks failed")
    }
}
