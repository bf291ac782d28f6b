use nalgebra::DVector;

use projfdi_core::additive::{residual, unified_filter, unified_threshold, AdditiveModel};
use projfdi_core::linalg::eye;
use projfdi_core::lti::simulate;
use projfdi_core::parity::{build_io_model, deadbeat_observer_gain, sliding_parity};
use projfdi_core::projection::projection_residual_norm;
use projfdi_core::random::{random_plant, trial_rng, uniform_mat};
use projfdi_core::thresholds::{adaptive_threshold_corrected, Verdict};
use projfdi_core::uncertainty::{inject_uncertainty, UncertaintyKind};
use projfdi_core::{normalized_gains, SignalWindow};

fn window(seed: u64, ch: usize, len: usize) -> SignalWindow {
    let m = uniform_mat(&mut trial_rng(seed, 7), ch, len);
    SignalWindow::from_flat(0, ch, m.as_slice().to_vec()).unwrap()
}

fn with_bias(y: &SignalWindow, from: usize, size: f64) -> SignalWindow {
    let mut flat = Vec::with_capacity(y.len() * y.channels());
    for k in 0..y.len() {
        flat.extend(y.row(k).iter().map(|v| if k >= from { v + size } else { *v }));
    }
    SignalWindow::from_flat(y.start(), y.channels(), flat).unwrap()
}

#[test]
fn open_loop_detects_bias_but_not_uncertainty() {
    let g = random_plant(&mut trial_rng(1, 0), 3, 1, 2);
    let rep = normalized_gains(&g).unwrap();
    let plant = inject_uncertainty(&rep, UncertaintyKind::RightCoprime, 0.15, 3).unwrap().plant;
    let u = window(2, 1, 200);
    let y = simulate(&plant, &u, &DVector::zeros(plant.states())).unwrap();
    let judge = |y: &SignalWindow| {
        let d = projection_residual_norm(&rep, &u, y).unwrap();
        adaptive_threshold_corrected(0.2, &d).unwrap().verdict
    };
    assert_eq!(judge(&y), Verdict::FaultFree);
    assert_eq!(judge(&with_bias(&y, 50, 2.0)), Verdict::Faulty);
}

#[test]
fn parity_flags_the_onset() {
    let g = random_plant(&mut trial_rng(4, 0), 2, 1, 1);
    let io = build_io_model(&g, &deadbeat_observer_gain(&g).unwrap(), 2, 2).unwrap();
    let u = window(5, 1, 120);
    let y = simulate(&g, &u, &DVector::zeros(2)).unwrap();
    let clean = sliding_parity(&io, 0.1, &u, &y).unwrap();
    assert!(clean.iter().all(|s| s.report.verdict == Verdict::FaultFree));
    let faulty = sliding_parity(&io, 0.1, &u, &with_bias(&y, 60, 1.0)).unwrap();
    let first = faulty.iter().find(|s| s.report.verdict == Verdict::Faulty).expect("an alarm");
    assert!((60..64).contains(&first.k), "{}", first.k);
}

#[test]
fn unified_filter_stays_quiet_under_bounded_disturbance() {
    let mut rng = trial_rng(6, 0);
    let g = random_plant(&mut rng, 2, 1, 2);
    let e_d = uniform_mat(&mut rng, 2, 2);
    let am = AdditiveModel::disturbance_only(g.clone(), e_d, eye(2) * 0.5, 1.0).unwrap();
    let uf = unified_filter(&am).unwrap();
    let rep = normalized_gains(&g).unwrap();
    let th = unified_threshold(&am, rep.l0(), rep.w0()).unwrap();
    assert!(th.unified < th.conservative || th.nd_norm <= 1.0);
    let raw = window(8, 2, 100).reframe(0, 300);
    let d = raw.scaled(0.9 / raw.norm());
    let u = SignalWindow::zeros(0, 1, 300);
    let y = simulate(&am.augmented(), &SignalWindow::stack(&[&u, &d]).unwrap(), &DVector::zeros(2)).unwrap();
    let r = residual(&g, &uf.l_d, &uf.w_d, &u, &y).unwrap();
    assert!(r.norm() <= th.unified);
    let fault = with_bias(&y, 100, 1.0);
    assert!(residual(&g, &uf.l_d, &uf.w_d, &u, &fault).unwrap().norm() > th.unified);
}
