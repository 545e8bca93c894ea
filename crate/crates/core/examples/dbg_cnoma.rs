use crs_core::cases::*;
use crs_core::channel::{generate_channel_set_for_trial, ChannelStats, PowerBudget};
use crs_core::sca::ScaConfig;
use crs_core::solver::solve;

fn main() {
    let cs = generate_channel_set_for_trial(42, 0, 2, &ChannelStats::default()).unwrap();
    let pb = PowerBudget::from_snr_db(10.0);
    let shape = SchemeShape::cnoma();
    let cfg = ScaConfig::default();
    // replicate matched filter start
    let it0 = {
        use num_complex::Complex64;
        use crs_core::cx::norm_sq;
        let unit = |v: &[Complex64]| -> Vec<Complex64> {
            let n = norm_sq(v).sqrt();
            v.iter().map(|z| z / n).collect()
        };
        let sum: Vec<Complex64> = cs.h1.iter().zip(&cs.h2).map(|(a, b)| a + b).collect();
        let pt = pb.p_t * 0.99;
        let frac_c: f64 = 0.4 / 0.7;
        let frac_1: f64 = 0.3 / 0.7;
        let d = crs_core::rates::PrecoderDesign {
            p_c: unit(&sum).iter().map(|z| z * (frac_c * pt).sqrt()).collect(),
            p_1: unit(&cs.h1).iter().map(|z| z * (frac_1 * pt).sqrt()).collect(),
            p_2: vec![Complex64::new(0.0, 0.0); 2],
            theta: 0.5,
        };
        iterate_from_design(shape, CaseId::Case1, &d, &cs, &pb, 1e-5)
    };
    let layout = VarLayout::build(2, shape);
    let mut it = it0;
    for round in 0..10 {
        let p = assemble_shaped(shape, CaseId::Case1, &it, &cs, &pb).unwrap();
        let x = layout.vectorize(&it);
        let viol = p.max_violation(&x);
        eprintln!("round {round}: embedding max violation {viol:.6e}");
        if viol < 0.0 {
            eprintln!("feasible!");
            break;
        }
        let (rp, s_slot) = assemble_restoration(shape, CaseId::Case1, &it, &cs, &pb).unwrap();
        let mut warm = nalgebra::DVector::zeros(rp.n_vars);
        warm.rows_mut(0, x.len()).copy_from(&x);
        let mut worst = f64::NEG_INFINITY;
        for b in &rp.blocks {
            if let crs_core::program::BlockKind::Affine { a, b: c0 } = &b.kind {
                if a[s_slot] != 0.0 {
                    let v = c0 + (0..x.len()).map(|i| a[i] * x[i]).sum::<f64>();
                    worst = worst.max(v);
                }
            }
        }
        warm[s_slot] = -worst - 0.05 * (1.0 + worst.abs());
        let r = solve(&rp, &cfg.solver, Some(&warm));
        eprintln!(
            "  restoration: status {:?} slack {:.6e} theta {:.4}",
            r.status,
            r.x[s_slot],
            r.x[layout.theta.unwrap()]
        );
        let restored = layout.extract(&nalgebra::DVector::from(r.x.rows(0, layout.n_vars)));
        it = iterate_from_design(shape, CaseId::Case1, &restored.design, &cs, &pb, 1e-5);
    }
}
