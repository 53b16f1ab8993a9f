use guardian_core::config::Config;
use guardian_core::eval::{
    compare, compare_to_csv, confusion_matrix, evaluate, parse_compare_csv, parse_eval_csv, EvalMatrix, EvalSummary,
    PolicySource,
};
use guardian_core::marl::{Algo, Checkpoint, Trainer};
use guardian_core::rng::stream;
use guardian_core::traj::{episodes_from_log, read_log, TrajectoryRecord};
use guardian_core::ScenarioId;
use rand::Rng;

fn untrained(algo: Algo, scenarios: &[ScenarioId], seed: u64) -> Checkpoint {
    let mut cfg = Config::default();
    cfg.train.seed = seed;
    cfg.train.hidden = vec![16, 16];
    Trainer::new(algo, scenarios, cfg).unwrap().checkpoint()
}

fn oracle_threat(distance: f64, kappa: f64, d_safe: f64) -> f64 {
    if distance >= d_safe {
        return 0.0;
    }
    let floor = (-kappa * d_safe).exp();
    ((-kappa * distance).exp() - floor) / (1.0 - floor)
}

/// Combined threat recomputed from a logged step's positions alone.
fn oracle_combined(r: &TrajectoryRecord, cfg: &Config) -> f64 {
    let p = &cfg.threat;
    let v = r.vip.pos;
    let mut survive = 1.0;
    for b in &r.bystanders {
        let (sx, sy) = (b.pos[0] - v[0], b.pos[1] - v[1]);
        let len_sq = sx * sx + sy * sy;
        let blocked = len_sq > 0.0
            && r.guards.iter().any(|g| {
                let (gx, gy) = (g.pos[0] - v[0], g.pos[1] - v[1]);
                let s = (gx * sx + gy * sy) / len_sq;
                let (fx, fy) = (gx - s * sx, gy - s * sy);
                s > 0.0 && s < 1.0 && (fx * fx + fy * fy).sqrt() <= p.block_width
            });
        if !blocked {
            survive *= 1.0 - oracle_threat(len_sq.sqrt(), p.kappa, p.d_safe);
        }
    }
    1.0 - survive
}

#[test]
fn single_episode_has_zero_spread() {
    let cfg = Config::default();
    let s = evaluate(&PolicySource::Qlb, ScenarioId::Street, 1, 11, &cfg, None).unwrap();
    assert_eq!(s.mean_avg_residual_threat, s.results[0].avg_residual_threat);
    assert_eq!(s.mean_crt, s.results[0].crt);
    assert_eq!(s.std_avg_residual_threat, 0.0);
    assert_eq!(s.std_crt, 0.0);
}

#[test]
fn episode_results_are_consistent() {
    let cfg = Config::default();
    for id in ScenarioId::ALL {
        let s = evaluate(&PolicySource::Qlb, id, 3, 5, &cfg, None).unwrap();
        for (k, r) in s.results.iter().enumerate() {
            assert_eq!(r.seed, 5 + k as u64);
            assert_eq!(r.steps, cfg.sim.horizon);
            assert!((0.0..=1.0).contains(&r.avg_residual_threat));
            let horizon = r.steps as f64 * cfg.sim.dt;
            assert!((r.crt - r.avg_residual_threat * horizon).abs() < 1e-9);
        }
    }
}

#[test]
fn standing_still_never_beats_formation_control() {
    let cfg = Config::default();
    for id in ScenarioId::ALL {
        let noop = evaluate(&PolicySource::Noop, id, 20, 0, &cfg, None).unwrap();
        let qlb = evaluate(&PolicySource::Qlb, id, 20, 0, &cfg, None).unwrap();
        assert!(
            noop.mean_avg_residual_threat >= qlb.mean_avg_residual_threat,
            "{id}: noop {} < qlb {}",
            noop.mean_avg_residual_threat,
            qlb.mean_avg_residual_threat
        );
    }
}

#[test]
fn log_replay_reproduces_reported_crt() {
    let cfg = Config::default();
    let mut rng = stream(2024, 0);
    let mut checked = 0;
    for _ in 0..50 {
        let id = ScenarioId::ALL[rng.gen_range(0..4)];
        let seed = rng.gen_range(0..1_000_000u64);
        let mut log = Vec::new();
        let s = evaluate(&PolicySource::Qlb, id, 1, seed, &cfg, Some(&mut log)).unwrap();
        let records = read_log(log.as_slice()).unwrap();
        assert_eq!(records.len(), cfg.sim.horizon);

        let eps = episodes_from_log(&records, cfg.sim.dt).unwrap();
        assert_eq!(eps.len(), 1);
        assert_eq!((eps[0].scenario, eps[0].seed), (id, seed));
        assert!((eps[0].crt - s.results[0].crt).abs() < 1e-9);

        let from_positions: f64 = records.iter().map(|r| oracle_combined(r, &cfg) * cfg.sim.dt).sum();
        assert!(
            (from_positions - s.results[0].crt).abs() < 1e-9,
            "{id} seed {seed}: {from_positions} vs {}",
            s.results[0].crt
        );
        checked += 1;
    }
    assert_eq!(checked, 50);
}

#[test]
fn multi_episode_log_splits_per_episode() {
    let cfg = Config::default();
    let mut log = Vec::new();
    let s = evaluate(
        &PolicySource::Noop,
        ScenarioId::PieInTheFace,
        4,
        30,
        &cfg,
        Some(&mut log),
    )
    .unwrap();
    let eps = episodes_from_log(&read_log(log.as_slice()).unwrap(), cfg.sim.dt).unwrap();
    assert_eq!(eps.len(), 4);
    for (e, r) in eps.iter().zip(&s.results) {
        assert_eq!(e.seed, r.seed);
        assert!((e.crt - r.crt).abs() < 1e-9);
    }
}

#[test]
fn matrix_is_composed_of_standalone_evaluations() {
    let cfg = Config::default();
    let ckpts: Vec<Checkpoint> = ScenarioId::ALL
        .iter()
        .enumerate()
        .map(|(k, &s)| untrained(Algo::Maddpg, &[s], k as u64))
        .collect();
    let sources: [PolicySource; 4] = std::array::from_fn(|k| PolicySource::Checkpoint(Box::new(ckpts[k].clone())));
    let m = confusion_matrix(&sources, 2, 9, &cfg).unwrap();
    for (r, src) in sources.iter().enumerate() {
        for c in ScenarioId::ALL {
            let s = evaluate(src, c, 2, 9, &cfg, None).unwrap();
            assert_eq!(m.mean[r][c.index()], s.mean_avg_residual_threat);
            assert_eq!(m.std[r][c.index()], s.std_avg_residual_threat);
        }
    }
    assert_eq!(EvalMatrix::from_csv(&m.to_csv()).unwrap(), m);
}

#[test]
fn same_policy_in_every_row_gives_identical_rows() {
    let cfg = Config::default();
    let src = PolicySource::Checkpoint(Box::new(untrained(Algo::Maddpg, &[ScenarioId::Street], 3)));
    let sources: [PolicySource; 4] = std::array::from_fn(|_| src.clone());
    let m = confusion_matrix(&sources, 2, 0, &cfg).unwrap();
    for r in 1..4 {
        assert_eq!(m.mean[r], m.mean[0]);
        assert_eq!(m.std[r], m.std[0]);
    }
}

#[test]
fn comparison_table_matches_standalone_evaluations() {
    let cfg = Config::default();
    let maupg = PolicySource::Checkpoint(Box::new(untrained(Algo::Maupg, &ScenarioId::ALL, 7)));
    let maddpg: [PolicySource; 4] = std::array::from_fn(|k| {
        PolicySource::Checkpoint(Box::new(untrained(Algo::Maddpg, &[ScenarioId::ALL[k]], k as u64)))
    });
    let rows = compare(&maupg, &maddpg, 2, 4, &cfg).unwrap();
    assert_eq!(rows.len(), 12);
    for row in &rows {
        let src = match row.method.as_str() {
            "maupg" => &maupg,
            "maddpg" => &maddpg[row.scenario.index()],
            "qlb" => &PolicySource::Qlb,
            other => panic!("unexpected method {other}"),
        };
        let s = evaluate(src, row.scenario, 2, 4, &cfg, None).unwrap();
        assert_eq!(row.mean, s.mean_avg_residual_threat);
        assert_eq!(row.std, s.std_avg_residual_threat);
    }
    let again = compare(&maupg, &maddpg, 2, 4, &cfg).unwrap();
    let qlb = |rs: &[guardian_core::eval::CompareRow]| {
        rs.iter()
            .filter(|r| r.method == "qlb")
            .map(|r| r.mean.to_bits())
            .collect::<Vec<_>>()
    };
    assert_eq!(qlb(&rows), qlb(&again));
    assert_eq!(parse_compare_csv(&compare_to_csv(&rows)).unwrap(), rows);
}

#[test]
fn summaries_round_trip_through_csv_and_json() {
    let cfg = Config::default();
    let s = evaluate(&PolicySource::Qlb, ScenarioId::ShoppingMall, 3, 2, &cfg, None).unwrap();
    assert_eq!(parse_eval_csv(&s.to_csv()).unwrap(), s.results);
    let back: EvalSummary = serde_json::from_str(&s.to_json().unwrap()).unwrap();
    assert_eq!(back, s);
}

#[test]
fn evaluation_leaves_checkpoint_files_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.gmrl");
    untrained(Algo::Maddpg, &[ScenarioId::RandomLandmark], 1)
        .save(&path)
        .unwrap();
    let before = std::fs::read(&path).unwrap();
    let ckpt = Checkpoint::load(&path).unwrap();
    let src = PolicySource::Checkpoint(Box::new(ckpt));
    evaluate(&src, ScenarioId::RandomLandmark, 2, 0, &Config::default(), None).unwrap();
    evaluate(&src, ScenarioId::Street, 2, 0, &Config::default(), None).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), before);
}

#[test]
fn evaluation_is_bit_reproducible() {
    let cfg = Config::default();
    let src = PolicySource::Checkpoint(Box::new(untrained(Algo::Maupg, &ScenarioId::ALL, 5)));
    let a = evaluate(&src, ScenarioId::PieInTheFace, 3, 8, &cfg, None).unwrap();
    let b = evaluate(&src, ScenarioId::PieInTheFace, 3, 8, &cfg, None).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
}

#[test]
fn default_config_round_trips_through_toml() {
    let cfg = Config::default();
    let text = cfg.to_toml_string().unwrap();
    assert_eq!(Config::from_toml_str(&text).unwrap(), cfg);
}

#[test]
fn zero_episodes_is_rejected() {
    assert!(evaluate(&PolicySource::Noop, ScenarioId::Street, 0, 0, &Config::default(), None).is_err());
}
