// Scratch harness for shaping the headline scenario. Not part of the test
// suite; prints margin statistics for primed/unprimed runs.

use nalgebra::DMatrix;
use primer_gait_core::control::Gains;
use primer_gait_core::governor::{ConstraintSpec, PrimerParams};
use primer_gait_core::model::Vlip;
use primer_gait_core::path::{PathMode, ReferencePath};
use primer_gait_core::sim::{compare_runs, Scenario, Trace};
use primer_gait_core::state::GeneralizedState;

const DEG: usize = 30;
static mut PEAK_V: f64 = 2.9;
static mut ENTRY_V: usize = 9;

fn rows() -> DMatrix<f64> {
    let (t0, l0) = (0.30, 0.50);
    let mut th = vec![t0; DEG + 1];
    let mut ph = vec![0.0; DEG + 1];
    let ln = vec![l0; DEG + 1];
    // Heading sweep peaking at one third of the cycle, then a long crouch
    // holding the inclination under the floor before easing back up.
    let peak = unsafe { PEAK_V };
    for i in 1..=DEG {
        ph[i] = if i <= 8 {
            peak * i as f64 / 8.0
        } else {
            peak * (DEG - i) as f64 / (DEG - 8) as f64
        };
    }
    for w in unsafe { ENTRY_V }..=24 {
        th[w] = 0.015;
    }
    th[25] = 0.10;
    th[26] = 0.18;
    th[27] = 0.24;
    th[28] = 0.28;
    th[29] = 0.30;
    let mut coeffs = DMatrix::zeros(3, DEG + 1);
    for (row, data) in [th, ph, ln].iter().enumerate() {
        for (col, v) in data.iter().enumerate() {
            coeffs[(row, col)] = *v;
        }
    }
    coeffs
}










fn scenario() -> Scenario<f64, Vlip<f64>> {
    let path = ReferencePath::new(
        rows(),
        PathMode::Time {
            period: 2.0,
            periodic: true,
        },
        DMatrix::identity(3, 3),
    )
    .unwrap();

    let gains = Gains::diagonal(&[400.0, 400.0, 900.0], &[60.0, 40.0, 18.0]).unwrap();

    let mut constraints = ConstraintSpec::vlip_stance(0.45, 5.0_f64.to_radians(), 20.0);
    let scales = [5.0_f64.to_radians(), 14.0, 14.0, 40.0];
    let activations = [1.8, 1.2, 1.2, 0.3];
    for (i, c) in constraints.constraints.iter_mut().enumerate() {
        c.scale = scales[i];
        c.activation = activations[i];
    }

    let primer = PrimerParams {
        attraction: 8.0,
        repulsion: 18.0,
        rate_limit: 12.0,
        fd_step: 1e-4,
    };

    let eval = path.eval(0.0);
    let initial = GeneralizedState::new(eval.r.clone(), eval.dr.clone());

    Scenario {
        model: Vlip::point_mass(2.2),
        path,
        gains,
        constraints,
        primer,
        primer_enabled: true,
        dt: 1e-3,
        t_end: 2.0,
        initial,
        initial_omega: None,
    }
}

fn report(label: &str, trace: &Trace<f64>, sc: &Scenario<f64, Vlip<f64>>) {
    let summary = trace.summary(sc);
    let stat = |name: &str| {
        summary
            .channels
            .iter()
            .find(|c| c.name == name)
            .map(|c| (c.min, c.max))
            .unwrap()
    };
    let (theta_min, _) = stat("q_theta");
    let (fz_min, _) = stat("Fz");
    println!("== {label}");
    println!(
        "  min theta {:.3} deg   min Fz {:.2} N   margin mins: th {:.3} fx {:.3} fy {:.3} fz {:.3}",
        theta_min.to_degrees(),
        fz_min,
        stat("margin_theta_min").0,
        stat("margin_friction_x").0,
        stat("margin_friction_y").0,
        stat("margin_fz_min").0,
    );
    for v in &summary.violations {
        let longest = v
            .episodes
            .iter()
            .map(|e| e.duration)
            .fold(0.0_f64, f64::max);
        println!(
            "  {}: {} samples, {:.3} s total, longest episode {:.3} s",
            v.name, v.samples, v.duration, longest
        );
    }
    println!("  any-violation samples: {}", summary.any_violation_samples);
}

fn main() {
    println!("peak entry rate | u_any u_fz u_fx u_fy minfz_u minth_u | p_any p_th p_fx p_fy p_fz minfz_p ratio");
    for peak in [2.9, 3.1] {
        for entry in [9usize, 10] {
            for rate in [8.0, 12.0] {
                unsafe {
                    PEAK_V = peak;
                    ENTRY_V = entry;
                }
                let mut sc = scenario();
                sc.primer.repulsion = 14.0;
                sc.primer.rate_limit = rate;
                sc.gains = Gains::diagonal(&[400.0, 400.0, 900.0], &[60.0, 40.0, 18.0]).unwrap();
                let scales = [5.0_f64.to_radians(), 14.0, 14.0, 40.0];
                let activations = [1.8, 1.2, 1.2, 0.3];
                for (i, c) in sc.constraints.constraints.iter_mut().enumerate() {
                    c.scale = scales[i];
                    c.activation = activations[i];
                }
                let cmp = match compare_runs(&sc) {
                    Ok(c) => c,
                    Err(e) => {
                        println!("{peak} {entry} {rate} FAILED: {e}");
                        continue;
                    }
                };
                let u = cmp.unprimed.summary(&sc);
                let p = cmp.primed.summary(&sc);
                let vcount = |s: &primer_gait_core::sim::RunSummary<f64>, i: usize| s.violations[i].samples;
                let minof = |t: &primer_gait_core::sim::Trace<f64>, f: &dyn Fn(&primer_gait_core::sim::TraceRecord<f64>) -> f64| {
                    t.records.iter().map(|r| f(r)).fold(f64::INFINITY, f64::min)
                };
                let ratio = u.any_violation_samples as f64 / p.any_violation_samples.max(1) as f64;
                println!(
                    "{peak:4.1} {entry:3} {rate:4.0} | {:5} {:4} {:4} {:4} {:6.2} {:5.2} | {:5} {:4} {:4} {:4} {:4} {:6.2} {ratio:5.1}",
                    u.any_violation_samples, vcount(&u, 3), vcount(&u, 1), vcount(&u, 2),
                    minof(&cmp.unprimed, &|r| r.grf.unwrap().fz),
                    minof(&cmp.unprimed, &|r| r.q[0].to_degrees()),
                    p.any_violation_samples, vcount(&p, 0), vcount(&p, 1), vcount(&p, 2), vcount(&p, 3),
                    minof(&cmp.primed, &|r| r.grf.unwrap().fz),
                );
            }
        }
    }
}
