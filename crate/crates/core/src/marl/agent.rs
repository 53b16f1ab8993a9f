//! Per-agent networks and the critic/actor update rules.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{dim, Error, Result};
use crate::nn::{clip_grad_norm, polyak_update, Activation, AdamState, ForwardCache, Mlp, MlpSpec};

use super::{Batch, JointLayout, TrainConfig};

/// Online and target actor/critic for one guard, with their optimizers.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentNets {
    pub actor: Mlp,
    pub critic: Mlp,
    pub target_actor: Mlp,
    pub target_critic: Mlp,
    pub actor_opt: AdamState,
    pub critic_opt: AdamState,
}

impl AgentNets {
    pub fn new<R: Rng + ?Sized>(
        layout: &JointLayout,
        hidden: &[usize],
        actor_lr: f64,
        critic_lr: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let widths = |input: usize, output: usize| {
            let mut w = vec![input];
            w.extend_from_slice(hidden);
            w.push(output);
            w
        };
        let actor = Mlp::init(
            MlpSpec::new(widths(layout.actor_input(), layout.act_dim), Activation::Tanh)?,
            rng,
        );
        let critic = Mlp::init(
            MlpSpec::new(widths(layout.critic_input(), 1), Activation::Identity)?,
            rng,
        );
        Ok(Self {
            actor_opt: AdamState::new(actor.params.len(), actor_lr),
            critic_opt: AdamState::new(critic.params.len(), critic_lr),
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor,
            critic,
        })
    }
}

/// Reusable buffers for the update rules.
#[derive(Clone, Debug, Default)]
pub struct UpdateScratch {
    actor_cache: ForwardCache,
    critic_cache: ForwardCache,
    actor_in: Vec<f64>,
    critic_in: Vec<f64>,
    joint_actions: Vec<f64>,
    out_grad: Vec<f64>,
    action_grad: Vec<f64>,
    grad: Vec<f64>,
}

/// Deterministic actor output plus Gaussian noise of scale `sigma` on the
/// movement head, clamped to `[-1, 1]`. The utterance head is left clean.
pub fn select_action<R: Rng + ?Sized>(
    actor: &Mlp,
    obs: &[f64],
    scenario: &[f64],
    sigma: f64,
    rng: &mut R,
    cache: &mut ForwardCache,
) -> Result<Vec<f64>> {
    dim("actor input", actor.spec().input_dim(), obs.len() + scenario.len())?;
    let mut input = Vec::with_capacity(obs.len() + scenario.len());
    input.extend_from_slice(obs);
    input.extend_from_slice(scenario);
    let mut a = actor.predict(&input, cache)?;
    if sigma > 0.0 {
        for v in a.iter_mut().take(2) {
            let n: f64 = rng.sample(StandardNormal);
            *v += sigma * n;
        }
    }
    for v in &mut a {
        *v = v.clamp(-1.0, 1.0);
    }
    Ok(a)
}

/// Rows of `obs_j ++ g` for agent `j`, taken from a joint observation block.
fn actor_inputs(layout: &JointLayout, joint_obs: &[f64], scenario: &[f64], j: usize, out: &mut Vec<f64>) {
    let row = layout.n_agents * layout.obs_dim;
    let sd = layout.scenario_dim;
    out.clear();
    for (b, obs) in joint_obs.chunks_exact(row).enumerate() {
        out.extend_from_slice(&obs[j * layout.obs_dim..(j + 1) * layout.obs_dim]);
        out.extend_from_slice(&scenario[b * 4..b * 4 + sd]);
    }
}

/// Rows of `s ++ a ++ g`.
fn critic_inputs(layout: &JointLayout, joint_obs: &[f64], actions: &[f64], scenario: &[f64], out: &mut Vec<f64>) {
    let orow = layout.n_agents * layout.obs_dim;
    let arow = layout.n_agents * layout.act_dim;
    let sd = layout.scenario_dim;
    out.clear();
    for (b, (obs, act)) in joint_obs.chunks_exact(orow).zip(actions.chunks_exact(arow)).enumerate() {
        out.extend_from_slice(obs);
        out.extend_from_slice(act);
        out.extend_from_slice(&scenario[b * 4..b * 4 + sd]);
    }
}

fn check_batch(layout: &JointLayout, batch: &Batch) -> Result<()> {
    let b = batch.size;
    if b == 0 {
        return Err(Error::Config("empty batch".into()));
    }
    let n = layout.n_agents;
    dim("batch obs", b * n * layout.obs_dim, batch.obs.len())?;
    dim("batch next_obs", b * n * layout.obs_dim, batch.next_obs.len())?;
    dim("batch actions", b * n * layout.act_dim, batch.actions.len())?;
    dim("batch rewards", b * n, batch.rewards.len())?;
    dim("batch scenario", b * 4, batch.scenario.len())?;
    dim("batch done", b, batch.done.len())
}

/// `y_i = r_i + γ·(1 − done)·Q'_i(s', π'_1(o'_1, g), …, π'_N(o'_N, g), g)`
/// for every agent; returns one vector of `batch.size` targets per agent.
pub fn critic_target(
    agents: &[AgentNets],
    batch: &Batch,
    layout: &JointLayout,
    gamma: f64,
    scratch: &mut UpdateScratch,
) -> Result<Vec<Vec<f64>>> {
    check_batch(layout, batch)?;
    dim("agents", layout.n_agents, agents.len())?;
    let b = batch.size;
    let ad = layout.act_dim;
    let arow = layout.n_agents * ad;
    scratch.joint_actions.resize(b * arow, 0.0);
    for (j, agent) in agents.iter().enumerate() {
        actor_inputs(layout, &batch.next_obs, &batch.scenario, j, &mut scratch.actor_in);
        agent
            .target_actor
            .forward(&scratch.actor_in, b, &mut scratch.actor_cache)?;
        for (dst, src) in scratch
            .joint_actions
            .chunks_exact_mut(arow)
            .zip(scratch.actor_cache.output().chunks_exact(ad))
        {
            dst[j * ad..(j + 1) * ad].copy_from_slice(src);
        }
    }
    critic_inputs(
        layout,
        &batch.next_obs,
        &scratch.joint_actions,
        &batch.scenario,
        &mut scratch.critic_in,
    );
    let mut ys = Vec::with_capacity(agents.len());
    for (i, agent) in agents.iter().enumerate() {
        agent
            .target_critic
            .forward(&scratch.critic_in, b, &mut scratch.critic_cache)?;
        let q = scratch.critic_cache.output();
        let y: Vec<f64> = (0..b)
            .map(|k| batch.rewards[k * layout.n_agents + i] + gamma * (1.0 - batch.done[k]) * q[k])
            .collect();
        ys.push(y);
    }
    Ok(ys)
}

fn clip_and_step(params: &mut [f64], grad: &mut [f64], opt: &mut AdamState, clip: f64) -> Result<()> {
    if clip > 0.0 {
        clip_grad_norm(grad, clip);
    }
    opt.update(params, grad)
}

/// One Adam step on the mean squared TD error of agent `i`'s critic.
/// Returns the loss before the step.
pub fn critic_update(
    agent: &mut AgentNets,
    batch: &Batch,
    targets: &[f64],
    layout: &JointLayout,
    grad_clip: f64,
    scratch: &mut UpdateScratch,
) -> Result<f64> {
    check_batch(layout, batch)?;
    let b = batch.size;
    dim("critic targets", b, targets.len())?;
    critic_inputs(
        layout,
        &batch.obs,
        &batch.actions,
        &batch.scenario,
        &mut scratch.critic_in,
    );
    agent.critic.forward(&scratch.critic_in, b, &mut scratch.critic_cache)?;
    let q = scratch.critic_cache.output();
    let inv_b = 1.0 / b as f64;
    let loss = q.iter().zip(targets).map(|(q, y)| (q - y) * (q - y)).sum::<f64>() * inv_b;
    if !loss.is_finite() {
        return Err(Error::Divergence(format!("critic loss is {loss}")));
    }
    scratch.out_grad.clear();
    scratch
        .out_grad
        .extend(q.iter().zip(targets).map(|(q, y)| 2.0 * (q - y) * inv_b));
    scratch.grad.clear();
    scratch.grad.resize(agent.critic.params.len(), 0.0);
    agent.critic.backward(
        &mut scratch.critic_cache,
        &scratch.out_grad,
        Some(&mut scratch.grad),
        None,
    )?;
    clip_and_step(
        &mut agent.critic.params,
        &mut scratch.grad,
        &mut agent.critic_opt,
        grad_clip,
    )?;
    Ok(loss)
}

/// One ascent step for agent `i`'s actor on the batch mean of
/// `Q_i(s, a_1, …, π_i(o_i, g), …, a_N, g)`. Returns that mean before the step.
pub fn actor_update(
    agent: &mut AgentNets,
    i: usize,
    batch: &Batch,
    layout: &JointLayout,
    grad_clip: f64,
    scratch: &mut UpdateScratch,
) -> Result<f64> {
    check_batch(layout, batch)?;
    if i >= layout.n_agents {
        return Err(Error::Dimension {
            what: "agent index",
            expected: layout.n_agents,
            got: i,
        });
    }
    let b = batch.size;
    let ad = layout.act_dim;
    let arow = layout.n_agents * ad;
    actor_inputs(layout, &batch.obs, &batch.scenario, i, &mut scratch.actor_in);
    agent.actor.forward(&scratch.actor_in, b, &mut scratch.actor_cache)?;
    scratch.joint_actions.clear();
    scratch.joint_actions.extend_from_slice(&batch.actions);
    for (dst, src) in scratch
        .joint_actions
        .chunks_exact_mut(arow)
        .zip(scratch.actor_cache.output().chunks_exact(ad))
    {
        dst[i * ad..(i + 1) * ad].copy_from_slice(src);
    }
    critic_inputs(
        layout,
        &batch.obs,
        &scratch.joint_actions,
        &batch.scenario,
        &mut scratch.critic_in,
    );
    agent.critic.forward(&scratch.critic_in, b, &mut scratch.critic_cache)?;
    let inv_b = 1.0 / b as f64;
    let objective = scratch.critic_cache.output().iter().sum::<f64>() * inv_b;
    if !objective.is_finite() {
        return Err(Error::Divergence(format!("actor objective is {objective}")));
    }
    // Descend on −mean Q.
    scratch.out_grad.clear();
    scratch.out_grad.resize(b, -inv_b);
    scratch.action_grad.resize(b * ad, 0.0);
    agent.critic.backward(
        &mut scratch.critic_cache,
        &scratch.out_grad,
        None,
        Some((&mut scratch.action_grad, layout.action_columns(i))),
    )?;
    scratch.grad.clear();
    scratch.grad.resize(agent.actor.params.len(), 0.0);
    agent.actor.backward(
        &mut scratch.actor_cache,
        &scratch.action_grad,
        Some(&mut scratch.grad),
        None,
    )?;
    clip_and_step(
        &mut agent.actor.params,
        &mut scratch.grad,
        &mut agent.actor_opt,
        grad_clip,
    )?;
    Ok(objective)
}

/// Targets for every agent, then critic and actor steps agent by agent,
/// then Polyak averaging of all targets. Returns the mean actor objective
/// and mean critic loss over agents.
pub fn update_round(
    agents: &mut [AgentNets],
    batch: &Batch,
    layout: &JointLayout,
    cfg: &TrainConfig,
    scratch: &mut UpdateScratch,
) -> Result<(f64, f64)> {
    let ys = critic_target(agents, batch, layout, cfg.gamma, scratch)?;
    let mut actor_sum = 0.0;
    let mut critic_sum = 0.0;
    for (i, agent) in agents.iter_mut().enumerate() {
        critic_sum += critic_update(agent, batch, &ys[i], layout, cfg.grad_clip, scratch)?;
        actor_sum += actor_update(agent, i, batch, layout, cfg.grad_clip, scratch)?;
    }
    for agent in agents.iter_mut() {
        polyak_update(&mut agent.target_actor, &agent.actor, cfg.tau)?;
        polyak_update(&mut agent.target_critic, &agent.critic, cfg.tau)?;
    }
    let n = agents.len() as f64;
    Ok((actor_sum / n, critic_sum / n))
}
