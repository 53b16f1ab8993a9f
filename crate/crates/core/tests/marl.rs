use guardian_core::config::Config;
use guardian_core::marl::{
    actor_update, critic_target, critic_update, select_action, train_run, update_round, AgentNets, Algo, Batch,
    JointLayout, ReplayBuffer, ScenarioSampler, TrainConfig, Trainer, Transition, UpdateScratch,
};
use guardian_core::nn::{Activation, ForwardCache, Mlp, MlpSpec};
use guardian_core::report::parse_metrics_csv;
use guardian_core::rng::stream;
use guardian_core::scenario::{scenario_one_hot, ScenarioId};
use guardian_core::Error;
use rand::Rng;

fn tiny_layout(scenario_dim: usize) -> JointLayout {
    JointLayout {
        n_agents: 2,
        obs_dim: 3,
        act_dim: 2,
        scenario_dim,
    }
}

fn agents(layout: &JointLayout, seed: u64) -> Vec<AgentNets> {
    let mut rng = stream(seed, 2);
    (0..layout.n_agents)
        .map(|_| AgentNets::new(layout, &[8, 8], 1e-3, 1e-3, &mut rng).unwrap())
        .collect()
}

fn random_batch(layout: &JointLayout, size: usize, seed: u64) -> Batch {
    let mut rng = stream(seed, 9);
    let n = layout.n_agents;
    let ts: Vec<Transition> = (0..size)
        .map(|k| Transition {
            obs: (0..n * layout.obs_dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            actions: (0..n * layout.act_dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            rewards: (0..n).map(|_| rng.gen_range(-1.5..0.0)).collect(),
            next_obs: (0..n * layout.obs_dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            scenario: scenario_one_hot(ScenarioId::ALL[k % 4]),
            done: k % 5 == 4,
        })
        .collect();
    Batch::from_transitions(&ts)
}

fn cfg_with(gamma: f64) -> TrainConfig {
    TrainConfig {
        gamma,
        grad_clip: 0.0,
        ..TrainConfig::default()
    }
}

#[test]
fn terminal_and_undiscounted_targets_are_rewards() {
    let layout = tiny_layout(4);
    let ag = agents(&layout, 1);
    let mut batch = random_batch(&layout, 6, 2);
    let mut scratch = UpdateScratch::default();
    let ys = critic_target(&ag, &batch, &layout, 0.0, &mut scratch).unwrap();
    for (i, y) in ys.iter().enumerate() {
        for (k, v) in y.iter().enumerate() {
            assert_eq!(*v, batch.rewards[k * 2 + i]);
        }
    }
    batch.done.iter_mut().for_each(|d| *d = 1.0);
    let ys = critic_target(&ag, &batch, &layout, 0.95, &mut scratch).unwrap();
    for (i, y) in ys.iter().enumerate() {
        for (k, v) in y.iter().enumerate() {
            assert_eq!(*v, batch.rewards[k * 2 + i]);
        }
    }
}

#[test]
fn target_matches_hand_evaluation() {
    // One-dimensional observations and actions, no scenario code, two agents.
    let layout = JointLayout {
        n_agents: 2,
        obs_dim: 1,
        act_dim: 1,
        scenario_dim: 0,
    };
    let actor_spec = MlpSpec::new(vec![1, 1, 1], Activation::Tanh).unwrap();
    let critic_spec = MlpSpec::new(vec![4, 1, 1], Activation::Identity).unwrap();
    // actor(o) = tanh(c·relu(a·o) + d)
    let actor = |a: f64, c: f64, d: f64| Mlp::from_params(actor_spec.clone(), vec![a, 0.0, c, d]).unwrap();
    // critic(x) = v·relu(w·x + b) + e
    let critic = |w: [f64; 4], b: f64, v: f64, e: f64| {
        Mlp::from_params(critic_spec.clone(), vec![w[0], w[1], w[2], w[3], b, v, e]).unwrap()
    };
    let mut ag = agents(&layout, 3);
    ag[0].target_actor = actor(2.0, 0.5, 0.1);
    ag[1].target_actor = actor(-1.0, 1.5, -0.2);
    ag[0].target_critic = critic([0.3, -0.2, 0.7, 0.4], 0.05, 1.5, -0.3);
    ag[1].target_critic = critic([-0.6, 0.1, 0.2, -0.9], 0.4, -2.0, 0.25);
    let batch = Batch::from_transitions(&[Transition {
        obs: vec![0.0, 0.0],
        actions: vec![0.0, 0.0],
        rewards: vec![-0.4, -0.7],
        next_obs: vec![0.3, -0.5],
        scenario: [1.0, 0.0, 0.0, 0.0],
        done: false,
    }]);
    let a0 = (0.5 * (2.0f64 * 0.3).max(0.0) + 0.1).tanh();
    let a1 = (1.5 * (-1.0f64 * -0.5).max(0.0) - 0.2).tanh();
    let x = [0.3, -0.5, a0, a1];
    let q =
        |w: [f64; 4], b: f64, v: f64, e: f64| v * (w.iter().zip(&x).map(|(w, x)| w * x).sum::<f64>() + b).max(0.0) + e;
    let q0 = q([0.3, -0.2, 0.7, 0.4], 0.05, 1.5, -0.3);
    let q1 = q([-0.6, 0.1, 0.2, -0.9], 0.4, -2.0, 0.25);
    let ys = critic_target(&ag, &batch, &layout, 0.9, &mut UpdateScratch::default()).unwrap();
    assert!((ys[0][0] - (-0.4 + 0.9 * q0)).abs() < 1e-14);
    assert!((ys[1][0] - (-0.7 + 0.9 * q1)).abs() < 1e-14);
}

fn critic_rows(layout: &JointLayout, batch: &Batch) -> Vec<f64> {
    let mut x = Vec::new();
    let (o, a) = (layout.n_agents * layout.obs_dim, layout.n_agents * layout.act_dim);
    for k in 0..batch.size {
        x.extend_from_slice(&batch.obs[k * o..(k + 1) * o]);
        x.extend_from_slice(&batch.actions[k * a..(k + 1) * a]);
        x.extend_from_slice(&batch.scenario[k * 4..k * 4 + layout.scenario_dim]);
    }
    x
}

#[test]
fn critic_loss_is_the_mean_squared_error() {
    let layout = tiny_layout(4);
    let mut ag = agents(&layout, 4);
    let batch = random_batch(&layout, 7, 5);
    let ys: Vec<f64> = (0..7).map(|k| -0.1 * k as f64).collect();
    let x = critic_rows(&layout, &batch);
    let mut cache = ForwardCache::default();
    ag[1].critic.forward(&x, 7, &mut cache).unwrap();
    let oracle = cache
        .output()
        .iter()
        .zip(&ys)
        .map(|(q, y)| (q - y).powi(2))
        .sum::<f64>()
        / 7.0;
    let loss = critic_update(&mut ag[1], &batch, &ys, &layout, 0.0, &mut UpdateScratch::default()).unwrap();
    assert!((loss - oracle).abs() < 1e-13);
}

#[test]
fn critic_at_target_takes_no_step() {
    let layout = tiny_layout(4);
    let mut ag = agents(&layout, 6);
    let batch = random_batch(&layout, 5, 7);
    let mut cache = ForwardCache::default();
    ag[0]
        .critic
        .forward(&critic_rows(&layout, &batch), 5, &mut cache)
        .unwrap();
    let ys = cache.output().to_vec();
    let before = ag[0].critic.params.clone();
    let loss = critic_update(&mut ag[0], &batch, &ys, &layout, 0.0, &mut UpdateScratch::default()).unwrap();
    assert_eq!(loss, 0.0);
    assert!(ag[0].critic_opt.m.iter().all(|&m| m == 0.0));
    assert!(ag[0].critic_opt.v.iter().all(|&v| v == 0.0));
    assert_eq!(ag[0].critic.params, before);
}

#[test]
fn critic_loss_decreases_on_a_fixed_transition() {
    let layout = tiny_layout(4);
    let mut ag = agents(&layout, 8);
    let batch = random_batch(&layout, 1, 9);
    let ys = vec![-3.0];
    let mut scratch = UpdateScratch::default();
    let mut last = f64::INFINITY;
    for _ in 0..100 {
        let loss = critic_update(&mut ag[0], &batch, &ys, &layout, 0.0, &mut scratch).unwrap();
        assert!(loss < last, "loss {loss} did not drop below {last}");
        last = loss;
    }
}

/// Batch mean of `Q_i` with agent `i`'s action taken from `actor`.
fn actor_objective(layout: &JointLayout, agent: &AgentNets, actor: &Mlp, i: usize, batch: &Batch) -> f64 {
    let mut joint = batch.actions.clone();
    let (o, a, ad) = (
        layout.n_agents * layout.obs_dim,
        layout.n_agents * layout.act_dim,
        layout.act_dim,
    );
    let mut cache = ForwardCache::default();
    for k in 0..batch.size {
        let mut input = batch.obs[k * o + i * layout.obs_dim..k * o + (i + 1) * layout.obs_dim].to_vec();
        input.extend_from_slice(&batch.scenario[k * 4..k * 4 + layout.scenario_dim]);
        let out = actor.predict(&input, &mut cache).unwrap();
        joint[k * a + i * ad..k * a + (i + 1) * ad].copy_from_slice(&out);
    }
    let replaced = Batch {
        actions: joint,
        ..batch.clone()
    };
    agent
        .critic
        .forward(&critic_rows(layout, &replaced), batch.size, &mut cache)
        .unwrap();
    cache.output().iter().sum::<f64>() / batch.size as f64
}

#[test]
fn actor_gradient_matches_finite_differences() {
    let layout = tiny_layout(4);
    let ag = agents(&layout, 10);
    let batch = random_batch(&layout, 4, 11);
    for (i, base) in ag.iter().enumerate() {
        let mut agent = base.clone();
        let objective = actor_update(&mut agent, i, &batch, &layout, 0.0, &mut UpdateScratch::default()).unwrap();
        assert!((objective - actor_objective(&layout, base, &base.actor, i, &batch)).abs() < 1e-13);
        // After one step from zero moments, m = (1 − β1)·∇(−J).
        let analytic: Vec<f64> = agent
            .actor_opt
            .m
            .iter()
            .map(|m| -m / (1.0 - agent.actor_opt.beta1))
            .collect();
        let h = 1e-5;
        let mut probe = base.actor.clone();
        let mut worst: f64 = 0.0;
        for (k, &grad) in analytic.iter().enumerate() {
            let p0 = probe.params[k];
            probe.params[k] = p0 + h;
            let jp = actor_objective(&layout, base, &probe, i, &batch);
            probe.params[k] = p0 - h;
            let jm = actor_objective(&layout, base, &probe, i, &batch);
            probe.params[k] = p0;
            let fd = (jp - jm) / (2.0 * h);
            worst = worst.max(guardian_core::nn::rel_error(grad, fd));
        }
        assert!(worst < 1e-4, "agent {i}: worst relative error {worst}");
    }
}

#[test]
fn critic_blind_to_own_action_gives_zero_actor_step() {
    let layout = tiny_layout(4);
    let mut ag = agents(&layout, 12);
    let batch = random_batch(&layout, 5, 13);
    let i = 1;
    let cols = layout.action_columns(i);
    let n_in = layout.critic_input();
    let hidden = ag[i].critic.spec().widths()[1];
    for r in 0..hidden {
        for c in cols.clone() {
            ag[i].critic.params[r * n_in + c] = 0.0;
        }
    }
    let before = ag[i].actor.params.clone();
    actor_update(&mut ag[i], i, &batch, &layout, 0.0, &mut UpdateScratch::default()).unwrap();
    assert!(ag[i].actor_opt.m.iter().all(|&m| m == 0.0));
    assert_eq!(ag[i].actor.params, before);
}

#[test]
fn actor_update_touches_only_its_actor() {
    let layout = tiny_layout(4);
    let mut ag = agents(&layout, 14);
    let batch = random_batch(&layout, 5, 15);
    let before = ag.clone();
    actor_update(&mut ag[0], 0, &batch, &layout, 0.5, &mut UpdateScratch::default()).unwrap();
    assert_ne!(ag[0].actor.params, before[0].actor.params);
    assert_eq!(ag[0].critic, before[0].critic);
    assert_eq!(ag[0].critic_opt, before[0].critic_opt);
    assert_eq!(ag[0].target_actor, before[0].target_actor);
    assert_eq!(ag[0].target_critic, before[0].target_critic);
    assert_eq!(ag[1], before[1]);
}

#[test]
fn targets_lag_online_networks() {
    let layout = tiny_layout(4);
    let mut ag = agents(&layout, 16);
    let mut scratch = UpdateScratch::default();
    let cfg = cfg_with(0.95);
    // Move the online nets away from the targets first.
    for round in 0..5 {
        let batch = random_batch(&layout, 8, 100 + round);
        let before = ag.clone();
        update_round(&mut ag, &batch, &layout, &cfg, &mut scratch).unwrap();
        for (a, b) in ag.iter().zip(&before) {
            for (t_now, (t_before, o_now)) in a
                .target_actor
                .params
                .iter()
                .zip(b.target_actor.params.iter().zip(&a.actor.params))
            {
                let moved = (t_now - t_before).abs();
                assert!(moved <= cfg.tau * (o_now - t_before).abs() + 1e-15);
            }
            for (t_now, (t_before, o_now)) in a
                .target_critic
                .params
                .iter()
                .zip(b.target_critic.params.iter().zip(&a.critic.params))
            {
                let moved = (t_now - t_before).abs();
                assert!(moved <= cfg.tau * (o_now - t_before).abs() + 1e-15);
            }
        }
    }
}

/// Removes the scenario-code columns from the first layer of `net`.
fn strip_scenario(net: &Mlp, code_dim: usize) -> Mlp {
    let w = net.spec().widths().to_vec();
    let (n_in, n_out) = (w[0], w[1]);
    let mut widths = w.clone();
    widths[0] = n_in - code_dim;
    let spec = MlpSpec::new(widths, net.spec().output_activation()).unwrap();
    let mut params = Vec::with_capacity(spec.n_params());
    for r in 0..n_out {
        params.extend_from_slice(&net.params[r * n_in..r * n_in + n_in - code_dim]);
    }
    params.extend_from_slice(&net.params[n_in * n_out..]);
    Mlp::from_params(spec, params).unwrap()
}

fn zero_scenario_columns(net: &mut Mlp, code_dim: usize) {
    let w = net.spec().widths().to_vec();
    for r in 0..w[1] {
        for c in w[0] - code_dim..w[0] {
            net.params[r * w[0] + c] = 0.0;
        }
    }
}

#[test]
fn conditioned_update_reduces_to_unconditioned_one() {
    let full = tiny_layout(4);
    let bare = tiny_layout(0);
    let mut uni = agents(&full, 17);
    for a in &mut uni {
        for net in [&mut a.actor, &mut a.critic] {
            zero_scenario_columns(net, 4);
        }
        a.target_actor = a.actor.clone();
        a.target_critic = a.critic.clone();
    }
    let mut fixed: Vec<AgentNets> = uni
        .iter()
        .map(|a| {
            let actor = strip_scenario(&a.actor, 4);
            let critic = strip_scenario(&a.critic, 4);
            AgentNets {
                actor_opt: guardian_core::nn::AdamState::new(actor.params.len(), 1e-3),
                critic_opt: guardian_core::nn::AdamState::new(critic.params.len(), 1e-3),
                target_actor: actor.clone(),
                target_critic: critic.clone(),
                actor,
                critic,
            }
        })
        .collect();
    let batch = random_batch(&full, 9, 18);
    let ys_u = critic_target(&uni, &batch, &full, 0.95, &mut UpdateScratch::default()).unwrap();
    let ys_f = critic_target(&fixed, &batch, &bare, 0.95, &mut UpdateScratch::default()).unwrap();
    for (a, b) in ys_u.iter().flatten().zip(ys_f.iter().flatten()) {
        assert!((a - b).abs() < 1e-12);
    }
    // Critic and actor steps, each from the shared starting point. The
    // scenario-code weights start at zero, so every other parameter must
    // receive the same update in both layouts.
    let check = |u: &Mlp, f: &Mlp| {
        for (x, y) in strip_scenario(u, 4).params.iter().zip(&f.params) {
            assert!((x - y).abs() < 1e-12);
        }
    };
    for i in 0..2 {
        let (mut u, mut f) = (uni[i].clone(), fixed[i].clone());
        let lu = critic_update(&mut u, &batch, &ys_u[i], &full, 0.0, &mut UpdateScratch::default()).unwrap();
        let lf = critic_update(&mut f, &batch, &ys_f[i], &bare, 0.0, &mut UpdateScratch::default()).unwrap();
        assert!((lu - lf).abs() < 1e-12);
        check(&u.critic, &f.critic);

        let (mut u, mut f) = (uni[i].clone(), fixed[i].clone());
        let ju = actor_update(&mut u, i, &batch, &full, 0.0, &mut UpdateScratch::default()).unwrap();
        let jf = actor_update(&mut f, i, &batch, &bare, 0.0, &mut UpdateScratch::default()).unwrap();
        assert!((ju - jf).abs() < 1e-12);
        check(&u.actor, &f.actor);
    }
    let cfg = cfg_with(0.95);
    update_round(&mut uni, &batch, &full, &cfg, &mut UpdateScratch::default()).unwrap();
    update_round(&mut fixed, &batch, &bare, &cfg, &mut UpdateScratch::default()).unwrap();
}

#[test]
fn action_selection_contract() {
    let layout = tiny_layout(4);
    let ag = agents(&layout, 19);
    let obs = [0.2, -0.4, 0.9];
    let g = scenario_one_hot(ScenarioId::Street);
    let mut cache = ForwardCache::default();
    let mut rng = stream(1, 3);
    let clean = ag[0].actor.predict(&[&obs[..], &g[..]].concat(), &mut cache).unwrap();
    assert_eq!(
        select_action(&ag[0].actor, &obs, &g, 0.0, &mut rng, &mut cache).unwrap(),
        clean
    );
    for sigma in [0.1, 1.0, 50.0] {
        let a = select_action(&ag[0].actor, &obs, &g, sigma, &mut rng, &mut cache).unwrap();
        assert!(a.iter().all(|v| (-1.0..=1.0).contains(v)));
        assert_eq!(a[2..], clean[2..]);
    }
    let draw = |seed| {
        let mut r = stream(seed, 3);
        select_action(&ag[0].actor, &obs, &g, 0.3, &mut r, &mut ForwardCache::default()).unwrap()
    };
    assert_eq!(draw(5), draw(5));
    assert_ne!(draw(5), draw(6));
}

#[test]
fn replay_sampling_returns_bit_copies() {
    let layout = tiny_layout(4);
    let batch = random_batch(&layout, 20, 21);
    let mut buf = ReplayBuffer::new(&layout, 50);
    let n = layout.n_agents;
    let mut pushed = Vec::new();
    for k in 0..20 {
        let o = n * layout.obs_dim;
        let a = n * layout.act_dim;
        let t = Transition {
            obs: batch.obs[k * o..(k + 1) * o].to_vec(),
            actions: batch.actions[k * a..(k + 1) * a].to_vec(),
            rewards: batch.rewards[k * n..(k + 1) * n].to_vec(),
            next_obs: batch.next_obs[k * o..(k + 1) * o].to_vec(),
            scenario: batch.scenario[k * 4..(k + 1) * 4].try_into().unwrap(),
            done: batch.done[k] == 1.0,
        };
        buf.push(&t).unwrap();
        pushed.push(t);
    }
    let mut rng = stream(2, 4);
    for _ in 0..10 {
        for t in buf.sample(20, &mut rng).unwrap() {
            assert!(pushed.contains(&t));
        }
    }
}

fn small_config(episodes: usize) -> Config {
    let mut cfg = Config::default();
    cfg.train.episodes = episodes;
    cfg.train.warmup_episodes = 1;
    cfg.train.batch_size = 32;
    cfg.train.hidden = vec![16, 16];
    cfg.train.checkpoint_every = 0;
    cfg
}

#[test]
fn maddpg_requires_one_scenario() {
    let cfg = small_config(1);
    let err = Trainer::new(
        Algo::Maddpg,
        &[ScenarioId::RandomLandmark, ScenarioId::Street],
        cfg.clone(),
    );
    assert!(matches!(err, Err(Error::Config(_))));
    assert!(Trainer::new(Algo::Maupg, &[], cfg.clone()).is_err());
    assert!(Trainer::new(Algo::Maupg, &ScenarioId::ALL, cfg).is_ok());
}

#[test]
fn rerun_reproduces_the_metric_stream() {
    let cfg = small_config(6);
    let run = || {
        let mut out = Vec::new();
        train_run(Algo::Maupg, &ScenarioId::ALL, &cfg, None, &mut out).unwrap();
        parse_metrics_csv(&String::from_utf8(out).unwrap()).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.len(), 6);
    assert!(a[0].critic_loss_mean.is_nan());
    assert!(a[5].critic_loss_mean.is_finite());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.episode, y.episode);
        assert_eq!(x.scenario, y.scenario);
        for (u, v) in [
            (x.crt, y.crt),
            (x.avg_residual_threat, y.avg_residual_threat),
            (x.actor_loss_mean, y.actor_loss_mean),
            (x.critic_loss_mean, y.critic_loss_mean),
            (x.noise_sigma, y.noise_sigma),
        ] {
            assert_eq!(u.to_bits(), v.to_bits());
        }
    }
}

#[test]
fn scenario_draws_are_uniform() {
    let mut s = ScenarioSampler::new(ScenarioId::ALL.to_vec(), 0);
    let mut counts = [0usize; 4];
    let n = 100_000;
    for _ in 0..n {
        counts[s.next_scenario().index()] += 1;
    }
    for c in counts {
        assert!((c as f64 / n as f64 - 0.25).abs() < 0.01, "{counts:?}");
    }
}

#[test]
fn conditioned_actors_respond_to_the_scenario_code() {
    let cfg = small_config(4);
    let mut out = Vec::new();
    let (trainer, _) = train_run(Algo::Maupg, &ScenarioId::ALL, &cfg, None, &mut out).unwrap();
    let od = cfg.sim.obs_dim();
    let mut rng = stream(3, 7);
    let probes: Vec<Vec<f64>> = (0..32)
        .map(|_| (0..od).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let mut cache = ForwardCache::default();
    for agent in trainer.agents() {
        let means: Vec<Vec<f64>> = ScenarioId::ALL
            .iter()
            .map(|&id| {
                let g = scenario_one_hot(id);
                let mut m = vec![0.0; cfg.sim.action_dim()];
                for p in &probes {
                    let a = select_action(&agent.actor, p, &g, 0.0, &mut rng, &mut cache).unwrap();
                    m.iter_mut().zip(&a).for_each(|(m, a)| *m += a / probes.len() as f64);
                }
                m
            })
            .collect();
        for i in 0..4 {
            for j in i + 1..4 {
                assert_ne!(means[i], means[j]);
            }
        }
    }
}
