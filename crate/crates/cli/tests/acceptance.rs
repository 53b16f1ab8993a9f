//! Acceptance run: every criterion is evaluated and reported on its own
//! `PASS`/`FAIL` line on standard error.
//!
//! Criteria 5 and 6 read full-scale training artifacts from `results/` (or
//! `$GUARDIAN_RESULTS`), laid out as `maddpg_<S>_s<seed>/` and
//! `maupg_s<seed>/` directories written by `guardian train`. Their outcome is
//! reported but only enforced with `GUARDIAN_ACCEPTANCE_STRICT=1`; the other
//! criteria are always enforced.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use guardian_core::env::Env;
use guardian_core::eval::{confusion_matrix, evaluate, EvalMatrix, PolicySource};
use guardian_core::geom::Vec2;
use guardian_core::marl::{checkpoint_file_name, Algo, Checkpoint, JointLayout, ReplayBuffer, Transition};
use guardian_core::nn::random_spec_suite;
use guardian_core::qlb::{bisector, qlb_joint_action};
use guardian_core::rng::stream;
use guardian_core::scenario::{scenario_one_hot, N_SCENARIOS};
use guardian_core::sim::EntityState;
use guardian_core::svg::{grouped_bars_svg, heatmap_svg};
use guardian_core::threat::{base_threat, instantaneous_threat, residual_threat};
use guardian_core::traj::{episodes_from_log, read_log};
use guardian_core::{Config, ScenarioId};
use rand::seq::SliceRandom;
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

const SEEDS: [u64; 3] = [0, 1, 2];
const MADDPG_EPISODES: u64 = 8000;
const MAUPG_EPISODES: u64 = 16000;
const EVAL_EPISODES: usize = 100;

struct Verdict {
    pass: bool,
    enforced: bool,
}

fn report(n: usize, name: &str, pass: bool, detail: &str) -> Verdict {
    line(&format!(
        "criterion {n} [{}] {name}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    ));
    Verdict { pass, enforced: true }
}

fn line(s: &str) {
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{s}");
}

fn gradient_suite() -> Verdict {
    let start = Instant::now();
    let suite = random_spec_suite(24, 7, 1e-5).unwrap();
    let worst = suite.iter().map(|(_, r)| r.max_rel_error()).fold(0.0, f64::max);
    let checked: usize = suite.iter().map(|(_, r)| r.checked).sum();
    let shapes_ok = suite.iter().all(|(w, _)| w.len() <= 5 && w.iter().all(|&n| n <= 16));
    let took = start.elapsed();
    let pass = worst < 1e-4 && shapes_ok && suite.iter().all(|(_, r)| r.checked > 0) && took < Duration::from_secs(60);
    report(
        1,
        "gradient suite",
        pass,
        &format!(
            "{} nets, {checked} coordinates, max rel error {worst:.2e}, {:.2?}",
            suite.len(),
            took
        ),
    )
}

fn threat_suite() -> Verdict {
    let start = Instant::now();
    let cfg = Config::default();
    let p = &cfg.threat;
    let mut rng = stream(99, 0);
    let mut ok = base_threat(0.0, p) == 1.0;
    for _ in 0..10_000 {
        ok &= base_threat(rng.gen_range(p.d_safe..10.0), p) == 0.0;
    }
    ok &= base_threat(p.d_safe, p) == 0.0;

    let mut ds: Vec<f64> = (0..10_000).map(|_| rng.gen_range(0.0..1.5 * p.d_safe)).collect();
    ds.sort_by(f64::total_cmp);
    let monotone = ds.windows(2).all(|w| base_threat(w[1], p) <= base_threat(w[0], p));

    let mut permutation_ok = true;
    for k in 0..1000u64 {
        let id = ScenarioId::ALL[(k % 4) as usize];
        let mut env = Env::new(id, k, &cfg).unwrap();
        let steps = rng.gen_range(0..30);
        let mut action = vec![0.0; 4 * cfg.sim.action_dim()];
        for _ in 0..steps {
            action.iter_mut().for_each(|a| *a = rng.gen_range(-1.0..1.0));
            env.step(&action).unwrap();
        }
        let mut w = env.world().clone();
        let before = instantaneous_threat(&w, p).combined;
        w.bystanders.shuffle(&mut rng);
        permutation_ok &= (instantaneous_threat(&w, p).combined - before).abs() <= 1e-12;
    }

    let mut guard_ok = true;
    let h = cfg.sim.arena_half;
    let point = |rng: &mut dyn rand::RngCore| Vec2::new(rng.gen_range(-h..h), rng.gen_range(-h..h));
    for _ in 0..1000 {
        let vip = EntityState::at(point(&mut rng));
        let by = EntityState::at(vip.pos + Vec2::from_angle(rng.gen_range(-3.2..3.2)) * rng.gen_range(0.0..0.7));
        let mut guards: Vec<Vec2> = (0..rng.gen_range(0..4)).map(|_| point(&mut rng)).collect();
        let before = residual_threat(&vip, &by, &guards, p);
        let extra = if rng.gen_bool(0.5) {
            vip.pos + (by.pos - vip.pos) * rng.gen_range(0.0..1.0) + Vec2::new(rng.gen_range(-0.1..0.1), 0.0)
        } else {
            point(&mut rng)
        };
        guards.push(extra);
        guard_ok &= residual_threat(&vip, &by, &guards, p) <= before;
    }
    let took = start.elapsed();
    let pass = ok && monotone && permutation_ok && guard_ok && took < Duration::from_secs(60);
    report(
        2,
        "threat-model suite",
        pass,
        &format!(
            "endpoints {ok}, monotone {monotone}, permutation {permutation_ok}, extra guard {guard_ok}, {took:.2?}"
        ),
    )
}

fn metric_oracle() -> Verdict {
    let cfg = Config::default();
    let mut rng = stream(3, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let id = ScenarioId::ALL[rng.gen_range(0..N_SCENARIOS)];
        let seed = rng.gen_range(0..1_000_000u64);
        let mut log = Vec::new();
        let s = evaluate(&PolicySource::Qlb, id, 1, seed, &cfg, Some(&mut log)).unwrap();
        let eps = episodes_from_log(&read_log(log.as_slice()).unwrap(), cfg.sim.dt).unwrap();
        let err = if eps.len() == 1 {
            (eps[0].crt - s.results[0].crt).abs()
        } else {
            f64::INFINITY
        };
        worst = worst.max(err);
    }
    report(
        3,
        "metric oracle",
        worst <= 1e-9,
        &format!("50 QLB episodes, max |CRT difference| {worst:.2e}"),
    )
}

fn baseline_sanity() -> Verdict {
    let mut cfg = Config::default();
    cfg.sim.bystanders = 0;
    let r = cfg.qlb.ring_radius;
    let (mut worst, mut lo, mut hi): (f64, f64, f64) = (0.0, f64::INFINITY, 0.0);
    let mut in_band = true;
    for id in ScenarioId::ALL {
        let band = cfg.reward.get(id).clone();
        for seed in 0..50 {
            let mut env = Env::new(id, seed, &cfg).unwrap();
            while !env.done() {
                let w = env.world();
                if w.t >= 50 {
                    for (k, g) in w.guards.iter().enumerate() {
                        let slot = w.vip.pos + Vec2::from_angle(bisector(w, k)) * r;
                        worst = worst.max(g.pos.distance(slot));
                        let d = g.pos.distance(w.vip.pos);
                        lo = lo.min(d);
                        hi = hi.max(d);
                        in_band &= d >= band.m && d <= band.d;
                    }
                }
                let a = qlb_joint_action(w, &cfg.threat, &cfg.qlb, &cfg.sim);
                env.step(&a).unwrap();
            }
        }
    }
    report(
        4,
        "baseline sanity",
        worst <= 0.02 && in_band,
        &format!("max slot error from step 50 {worst:.4} (limit 0.02), standoff range [{lo:.3}, {hi:.3}]"),
    )
}

fn results_dir() -> PathBuf {
    std::env::var_os("GUARDIAN_RESULTS")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../results"))
}

fn maddpg_path(root: &Path, s: ScenarioId, seed: u64, episode: u64) -> PathBuf {
    root.join(format!("maddpg_{s}_s{seed}"))
        .join(checkpoint_file_name(Algo::Maddpg, episode))
}

fn maupg_path(root: &Path, seed: u64, episode: u64) -> PathBuf {
    root.join(format!("maupg_s{seed}"))
        .join(checkpoint_file_name(Algo::Maupg, episode))
}

fn load(path: &Path) -> Option<PolicySource> {
    Checkpoint::load(path)
        .ok()
        .map(|c| PolicySource::Checkpoint(Box::new(c)))
}

fn missing(n: usize, name: &str, paths: &[PathBuf]) -> Verdict {
    let first = paths.iter().find(|p| !p.exists()).unwrap();
    line(&format!(
        "criterion {n} [FAIL] {name}: full-scale artifacts missing ({} of {} checkpoints absent, e.g. {})",
        paths.iter().filter(|p| !p.exists()).count(),
        paths.len(),
        first.display()
    ));
    Verdict {
        pass: false,
        enforced: false,
    }
}

fn seed_averaged_matrix(root: &Path, cfg: &Config) -> Option<EvalMatrix> {
    let mut acc = EvalMatrix {
        mean: [[0.0; 4]; 4],
        std: [[0.0; 4]; 4],
        episodes: EVAL_EPISODES,
    };
    for seed in SEEDS {
        let sources: Vec<PolicySource> = ScenarioId::ALL
            .iter()
            .map(|&s| load(&maddpg_path(root, s, seed, MADDPG_EPISODES)))
            .collect::<Option<_>>()?;
        let m = confusion_matrix(&sources.try_into().ok()?, EVAL_EPISODES, 0, cfg).ok()?;
        for r in 0..4 {
            for c in 0..4 {
                acc.mean[r][c] += m.mean[r][c] / SEEDS.len() as f64;
                acc.std[r][c] += m.std[r][c] / SEEDS.len() as f64;
            }
        }
    }
    Some(acc)
}

fn generalization_gap(root: &Path, cfg: &Config, out: &Path) -> (Verdict, Option<EvalMatrix>) {
    let name = "generalization gap";
    let paths: Vec<PathBuf> = SEEDS
        .iter()
        .flat_map(|&seed| ScenarioId::ALL.map(|s| maddpg_path(root, s, seed, MADDPG_EPISODES)))
        .collect();
    if paths.iter().any(|p| !p.exists()) {
        return (missing(5, name, &paths), None);
    }
    let Some(m) = seed_averaged_matrix(root, cfg) else {
        line(&format!("criterion 5 [FAIL] {name}: checkpoints unreadable"));
        return (
            Verdict {
                pass: false,
                enforced: false,
            },
            None,
        );
    };
    let _ = std::fs::create_dir_all(out);
    let _ = std::fs::write(out.join("matrix.csv"), m.to_csv());
    let _ = std::fs::write(
        out.join("matrix.svg"),
        heatmap_svg(
            &m,
            "Seed-averaged average residual threat (rows: trained on, columns: tested on)",
        ),
    );
    for s in ScenarioId::ALL {
        let row: Vec<String> = m.mean[s.index()].iter().map(|v| format!("{v:.4}")).collect();
        line(&format!("    trained on {s}: {}", row.join("  ")));
    }
    let rows = m.diagonal_minimum_rows();
    let mut v = report(
        5,
        name,
        rows >= 3,
        &format!("{rows} of 4 rows have the diagonal as row minimum (need 3)"),
    );
    v.enforced = false;
    (v, Some(m))
}

fn mean_over_seeds(sources: &[PolicySource], s: ScenarioId, cfg: &Config) -> f64 {
    let n = sources.len() as f64;
    sources
        .iter()
        .map(|src| {
            evaluate(src, s, EVAL_EPISODES, 0, cfg, None)
                .unwrap()
                .mean_avg_residual_threat
                / n
        })
        .sum()
}

fn universal_policy(root: &Path, cfg: &Config, matrix: Option<&EvalMatrix>, out: &Path) -> Verdict {
    let name = "scenario-conditioned comparison";
    let paths: Vec<PathBuf> = SEEDS
        .iter()
        .map(|&seed| maupg_path(root, seed, MAUPG_EPISODES))
        .collect();
    if paths.iter().any(|p| !p.exists()) {
        return missing(6, name, &paths);
    }
    let Some(matrix) = matrix else {
        line(&format!(
            "criterion 6 [FAIL] {name}: needs the per-scenario matrix of criterion 5"
        ));
        return Verdict {
            pass: false,
            enforced: false,
        };
    };
    let Some(finals) = paths.iter().map(|p| load(p)).collect::<Option<Vec<_>>>() else {
        line(&format!("criterion 6 [FAIL] {name}: checkpoints unreadable"));
        return Verdict {
            pass: false,
            enforced: false,
        };
    };
    let mut rows = Vec::new();
    let (mut beats_cross, mut beats_qlb, mut within) = (0, 0, 0);
    for s in ScenarioId::ALL {
        let uni = mean_over_seeds(&finals, s, cfg);
        let qlb = evaluate(&PolicySource::Qlb, s, EVAL_EPISODES, 0, cfg, None)
            .unwrap()
            .mean_avg_residual_threat;
        let col = s.index();
        let cross = (0..4)
            .filter(|&r| r != col)
            .map(|r| matrix.mean[r][col])
            .fold(f64::INFINITY, f64::min);
        beats_cross += usize::from(uni < cross);
        beats_qlb += usize::from(uni < qlb);
        within += usize::from(uni <= 1.15 * qlb);
        line(&format!(
            "    {s}: maupg {uni:.4}  maddpg[{s}] {:.4}  best cross-scenario maddpg {cross:.4}  qlb {qlb:.4}",
            matrix.mean[col][col]
        ));
        for (method, mean) in [("maupg", uni), ("maddpg", matrix.mean[col][col]), ("qlb", qlb)] {
            rows.push(guardian_core::eval::CompareRow {
                scenario: s,
                method: method.into(),
                mean,
                std: 0.0,
                episodes: EVAL_EPISODES,
            });
        }
    }
    let _ = std::fs::create_dir_all(out);
    let _ = std::fs::write(out.join("compare.csv"), guardian_core::eval::compare_to_csv(&rows));
    let _ = std::fs::write(
        out.join("compare.svg"),
        grouped_bars_svg(&rows, "Seed-averaged average residual threat"),
    );

    let part_a = beats_cross >= 3;
    let part_b = beats_qlb >= 3;
    let mut detail =
        format!("(a) below every cross-scenario maddpg on {beats_cross}/4, (b) below qlb on {beats_qlb}/4");
    let mut pass = part_a && part_b;
    if part_a && !part_b {
        let third = MAUPG_EPISODES - MAUPG_EPISODES / 3;
        let marks: Vec<u64> = (1..=MAUPG_EPISODES / 1000)
            .map(|k| k * 1000)
            .filter(|&e| e >= third)
            .collect();
        let mut curve = Vec::new();
        for &ep in &marks {
            let srcs: Option<Vec<PolicySource>> = SEEDS.iter().map(|&seed| load(&maupg_path(root, seed, ep))).collect();
            let Some(srcs) = srcs else { break };
            curve.push(
                ScenarioId::ALL
                    .iter()
                    .map(|&s| mean_over_seeds(&srcs, s, cfg))
                    .sum::<f64>()
                    / 4.0,
            );
        }
        let monotone = curve.len() == marks.len() && curve.windows(2).all(|w| w[1] <= w[0]);
        let curve_txt: Vec<String> = curve.iter().map(|v| format!("{v:.4}")).collect();
        detail += &format!(
            "; scale-limited fallback: within 15% of qlb on {within}/4, final-third curve [{}] monotone {monotone}",
            curve_txt.join(", ")
        );
        pass = within == 4 && monotone;
    }
    let mut v = report(6, name, pass, &detail);
    v.enforced = false;
    v
}

fn guardian(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_guardian"))
        .args(args)
        .output()
        .unwrap()
}

fn strip_wall_clock(csv: &str) -> Vec<String> {
    csv.lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head).to_string())
        .collect()
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let mut streams = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let o = guardian(&[
            "train",
            "--algo",
            "maupg",
            "--scenarios",
            "A,B,C,D",
            "--episodes",
            "200",
            "--seed",
            "11",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        streams.push(strip_wall_clock(
            &std::fs::read_to_string(out.join("metrics.csv")).unwrap(),
        ));
    }
    let train_ok = streams[0].len() == 201 && streams[0] == streams[1];
    let ckpt_a = dir.path().join("a").join(checkpoint_file_name(Algo::Maupg, 200));
    let ckpt_b = dir.path().join("b").join(checkpoint_file_name(Algo::Maupg, 200));
    let ckpt_ok = std::fs::read(&ckpt_a).unwrap() == std::fs::read(&ckpt_b).unwrap();

    let mut eval_ok = true;
    for source in [
        vec!["--ckpt", ckpt_a.to_str().unwrap()],
        vec!["--algo", "qlb"],
        vec!["--algo", "noop"],
    ] {
        let mut outputs = Vec::new();
        for _ in 0..2 {
            let mut args = vec![
                "eval",
                "--scenario",
                "C",
                "--episodes",
                "10",
                "--seed",
                "4",
                "--format",
                "json",
            ];
            args.extend(&source);
            outputs.push(guardian(&args).stdout);
        }
        eval_ok &= !outputs[0].is_empty() && outputs[0] == outputs[1];
    }
    report(
        7,
        "determinism",
        train_ok && ckpt_ok && eval_ok,
        &format!(
            "200-episode metric streams equal {train_ok}, checkpoints equal {ckpt_ok}, eval reruns equal {eval_ok}"
        ),
    )
}

fn replay_statistics() -> Verdict {
    let layout = JointLayout {
        n_agents: 1,
        obs_dim: 1,
        act_dim: 1,
        scenario_dim: 0,
    };
    let tagged = |v: f64| Transition {
        obs: vec![v],
        actions: vec![0.0],
        rewards: vec![0.0],
        next_obs: vec![v],
        scenario: scenario_one_hot(ScenarioId::Street),
        done: false,
    };
    let n = 10;
    let mut buf = ReplayBuffer::new(&layout, n);
    let mut fifo = true;
    for k in 0..3 * n {
        buf.push(&tagged(k as f64)).unwrap();
        let first = (k + 1).saturating_sub(n);
        fifo &= (0..buf.len()).all(|a| buf.get(buf.oldest_slot(a)).obs[0] == (first + a) as f64);
    }
    let mut rng = stream(5, 4);
    let mut counts = vec![0usize; n];
    let draws = 100_000;
    for _ in 0..draws / n {
        for i in buf.sample_indices(n, &mut rng).unwrap() {
            counts[buf.get(i).obs[0] as usize - 2 * n] += 1;
        }
    }
    let expected = draws as f64 / n as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let critical = ChiSquared::new((n - 1) as f64).unwrap().inverse_cdf(0.99);
    report(
        8,
        "replay statistics",
        fifo && stat < critical,
        &format!("FIFO {fifo}, chi-square {stat:.2} < {critical:.2} over {draws} draws"),
    )
}

#[test]
fn acceptance() {
    let cfg = Config::default();
    let root = results_dir();
    let out = root.join("acceptance");
    line("acceptance criteria:");
    let mut verdicts = vec![gradient_suite(), threat_suite(), metric_oracle(), baseline_sanity()];
    let (gap, matrix) = generalization_gap(&root, &cfg, &out);
    verdicts.push(gap);
    verdicts.push(universal_policy(&root, &cfg, matrix.as_ref(), &out));
    verdicts.push(determinism());
    verdicts.push(replay_statistics());

    let strict = std::env::var("GUARDIAN_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let failed: Vec<usize> = verdicts
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.pass && (v.enforced || strict))
        .map(|(i, _)| i + 1)
        .collect();
    assert!(failed.is_empty(), "criteria failed: {failed:?}");
}
