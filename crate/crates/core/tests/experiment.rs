use sparsebeam::experiment::{certify_channel_file, generate_channels, solve_channel_file, RowStatus};
use sparsebeam::{run_sweep, ExperimentConfig, Scheme, SolveStatus};

fn small_config() -> ExperimentConfig {
    ExperimentConfig {
        runs: 2,
        epsilons: vec![0.0, 0.05, 0.2],
        gammas_db: vec![3.0],
        max_attempts: 2,
        seed: 5,
        ..Default::default()
    }
}

#[test]
fn sweep_rows_cover_the_grid() {
    let config = small_config();
    let out = run_sweep(&config, Some(1)).unwrap();
    assert_eq!(out.rows.len(), 3 * 3 * 2);
    assert_eq!(out.rows[0].scheme, Scheme::Perfect);
    for row in &out.rows {
        match row.status {
            RowStatus::Optimal => assert!(row.power.unwrap() > 0.0),
            RowStatus::Exhausted => assert!(row.power.is_none()),
        }
    }
    // The l2 design has no feasible draw at ε = 0.2, so the whole cell is
    // dropped for every scheme.
    assert!(out
        .rows
        .iter()
        .filter(|r| r.epsilon == 0.2)
        .all(|r| r.status == RowStatus::Exhausted));
    assert!(out
        .rows
        .iter()
        .filter(|r| r.epsilon < 0.1)
        .all(|r| r.status == RowStatus::Optimal));
    let p0 = out.mean_power(Scheme::Perfect, 0.0, 3.0).unwrap();
    let l1 = out.mean_power(Scheme::L1Robust, 0.0, 3.0).unwrap();
    assert!((p0 - l1).abs() <= 1e-3 * p0);
    assert_eq!(out.mean_power(Scheme::L1Robust, 0.2, 3.0), None);

    let mut csv = Vec::new();
    out.write_rows(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("scheme,epsilon,gamma_db,run,power,status,iterations,solve_time_ms")
    );
    assert!(text.contains(",,exhausted,"));
    assert_eq!(text.lines().count(), 1 + out.rows.len());
    let mut summary = Vec::new();
    out.write_summary(&mut summary).unwrap();
    assert!(String::from_utf8(summary)
        .unwrap()
        .starts_with("scheme,epsilon,gamma_db,runs_ok,mean_power\n"));
}

#[test]
fn sweep_is_independent_of_thread_count() {
    let config = ExperimentConfig {
        epsilons: vec![0.0, 0.1],
        ..small_config()
    };
    let strip = |threads| {
        let out = run_sweep(&config, Some(threads)).unwrap();
        out.rows
            .into_iter()
            .map(|r| {
                (
                    r.scheme,
                    r.epsilon.to_bits(),
                    r.run,
                    r.power.map(f64::to_bits),
                    r.status,
                    r.iterations,
                )
            })
            .collect::<Vec<_>>()
    };
    assert_eq!(strip(1), strip(3));
}

#[test]
fn channel_file_pipeline() {
    let config = ExperimentConfig {
        epsilon: 0.05,
        seed: 9,
        mc_samples: 200,
        ..Default::default()
    };
    let file = generate_channels(&config).unwrap();
    assert_eq!(file, generate_channels(&config).unwrap());
    assert_ne!(
        file,
        generate_channels(&ExperimentConfig {
            seed: 10,
            ..config.clone()
        })
        .unwrap()
    );
    let json = file.to_json().unwrap();
    let file = sparsebeam::channel::ChannelFile::from_json(&json).unwrap();

    let (record, sol) = solve_channel_file(&file, Scheme::L1Robust, 3.0, config.bound, &config.solver, true).unwrap();
    assert_eq!(record.status, SolveStatus::Optimal);
    assert_eq!(record.power, Some(sol.power()));
    let w = record.w.as_ref().unwrap().to_matrix(32).unwrap();
    assert_eq!(w, sol.beamformer.w);

    let report = certify_channel_file(&file, &w, &config).unwrap();
    assert_eq!(report.users.len(), 4);
    assert_eq!(report.mc_min_sinr.len(), 4);
    for (cert, mc) in report.users.iter().zip(&report.mc_min_sinr) {
        assert!(*mc >= 0.0 && cert.denominator > 0.0);
    }
}
