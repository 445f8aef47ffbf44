use bfd_core::harness::study::{
    advance_row, convergence_study, decay_study, finish_row, start_row, DecayData, RowCheckpoint, Setup,
};
use bfd_core::harness::RunConfig;
use bfd_core::kinetic::KineticSolver;

fn tiny() -> RunConfig {
    let mut c = RunConfig::default();
    c.kernel.n_theta = 8;
    c.kernel.n_phi = 4;
    c.grid.n_per_axis = 4;
    c.grid.extent = 6.0;
    c.space.modes_per_axis = 8;
    c.t_final = 0.004;
    c.epsilons = vec![0.4, 0.2];
    c
}

#[test]
fn split_run_through_a_checkpoint_matches_the_whole_run() {
    let setup = Setup::new(&tiny()).unwrap();
    let coefs = setup.fluid_coefficients(&setup.transport().unwrap());
    let nl = setup.nonlinear_operator().unwrap();
    for &eps in &setup.config.epsilons {
        let mut solver = KineticSolver::new(&setup.space, &setup.op, Some(&nl)).unwrap();
        let start = start_row(&setup, coefs, eps).unwrap();
        let whole = advance_row(&setup, &mut solver, start.clone(), setup.config.t_final).unwrap();

        let half = (start.steps / 2) as f64 * start.dt;
        let mut solver = KineticSolver::new(&setup.space, &setup.op, Some(&nl)).unwrap();
        let first = advance_row(&setup, &mut solver, start, half).unwrap();
        let saved = RowCheckpoint::from_json(&first.to_json().unwrap()).unwrap();
        let mut solver = KineticSolver::new(&setup.space, &setup.op, Some(&nl)).unwrap();
        let split = advance_row(&setup, &mut solver, saved, setup.config.t_final).unwrap();

        let a = finish_row(&setup, &whole).unwrap();
        let b = finish_row(&setup, &split).unwrap();
        for (x, y) in [(a.e_sup, b.e_sup), (a.e_fluid, b.e_fluid), (a.e_micro, b.e_micro), (a.x_norm, b.x_norm)] {
            assert!((x - y).abs() <= 1e-10 * x.abs().max(1e-300), "{x} vs {y}");
        }
    }
}

#[test]
fn segment_ends_must_fall_on_the_step_grid() {
    let setup = Setup::new(&tiny()).unwrap();
    let coefs = setup.fluid_coefficients(&setup.transport().unwrap());
    let mut solver = KineticSolver::new(&setup.space, &setup.op, None).unwrap();
    let ck = start_row(&setup, coefs, 0.4).unwrap();
    let off = 0.37 * ck.dt;
    assert!(advance_row(&setup, &mut solver, ck, off).is_err());
}

#[test]
fn error_table_is_reproducible() {
    let setup = Setup::new(&tiny()).unwrap();
    let a = convergence_study(&setup).unwrap();
    let b = convergence_study(&setup).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert_eq!(a.rows.len(), 2);
    assert!(a.rows.iter().all(|r| r.failure.is_none()));
    assert!((a.envelope - 0.4).abs() < 1e-15);
}

#[test]
fn decay_without_microscopic_data_is_rejected() {
    let mut cfg = tiny();
    cfg.initial.micro_amplitude = 0.0;
    let setup = Setup::new(&cfg).unwrap();
    let err = decay_study(&setup, [1, 0], 0.1, DecayData::Micro).unwrap_err();
    assert!(err.to_string().contains("nonzero"), "{err}");
}

#[test]
fn fluid_mode_decays_at_the_shear_rate() {
    let mut cfg = RunConfig::default();
    cfg.space.modes_per_axis = 8;
    let setup = Setup::new(&cfg).unwrap();
    let t = setup.transport().unwrap();
    let fit = decay_study(&setup, [1, 0], 0.1, DecayData::Fluid).unwrap();
    let xi = 2.0 * std::f64::consts::PI / cfg.space.box_length;
    let want = t.nu_ns * xi * xi;
    assert!((fit.rate - want).abs() < 0.02 * want, "{} vs {want}", fit.rate);
}

#[test]
fn microscopic_decay_rate_scales_as_the_gap_over_epsilon_squared() {
    let mut cfg = tiny();
    cfg.grid.n_per_axis = 6;
    let setup = Setup::new(&cfg).unwrap();
    let a = decay_study(&setup, [1, 0], 0.1, DecayData::Micro).unwrap();
    let b = decay_study(&setup, [1, 0], 0.05, DecayData::Micro).unwrap();
    assert!((b.rate / a.rate - 4.0).abs() < 0.05, "{} {}", a.rate, b.rate);
    assert!(a.rescaled_rate >= 0.9 * a.gap, "{} vs gap {}", a.rescaled_rate, a.gap);
}
