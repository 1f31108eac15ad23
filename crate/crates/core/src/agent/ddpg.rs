use ndarray::{concatenate, s, Array2, Axis};
use rand::Rng;

use super::replay::{ReplayBuffer, Transition};
use crate::error::{Error, Result};
use crate::neural::{adam_step, soft_update, Activation, AdamConfig, AdamState, Mlp};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DdpgHyper {
    pub gamma: f64,
    pub tau: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub batch_size: usize,
}

impl Default for DdpgHyper {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            tau: 0.001,
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            batch_size: 32,
        }
    }
}

/// Actor, critic, their targets, optimizer state and replay memory of one agent.
#[derive(Debug, Clone)]
pub struct Agent {
    pub actor: Mlp,
    pub critic: Mlp,
    pub target_actor: Mlp,
    pub target_critic: Mlp,
    pub actor_opt: AdamState,
    pub critic_opt: AdamState,
    pub buffer: ReplayBuffer,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    /// Critic mean squared TD error before the step.
    pub critic_loss: f64,
    /// Batch mean of Q(s, pi(s)) before the actor step.
    pub actor_objective: f64,
}

impl Agent {
    /// Fresh agent: ReLU hidden layers, tanh actor output scaled by
    /// `action_bound`, linear critic output taking `[state, action]`.
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        action_bound: f64,
        hyper: &DdpgHyper,
        buffer_capacity: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut actor_sizes = vec![state_dim];
        actor_sizes.extend_from_slice(hidden);
        actor_sizes.push(action_dim);
        let mut critic_sizes = vec![state_dim + action_dim];
        critic_sizes.extend_from_slice(hidden);
        critic_sizes.push(1);
        let actor = Mlp::init(&actor_sizes, Activation::Relu, Activation::Tanh, action_bound, 3e-3, rng)?;
        let critic = Mlp::init(&critic_sizes, Activation::Relu, Activation::Linear, 1.0, 3e-3, rng)?;
        Ok(Self::from_networks(actor, critic, hyper, buffer_capacity))
    }

    pub fn from_networks(actor: Mlp, critic: Mlp, hyper: &DdpgHyper, buffer_capacity: usize) -> Self {
        Self {
            actor_opt: AdamState::new(&actor, AdamConfig::with_learning_rate(hyper.actor_lr)),
            critic_opt: AdamState::new(&critic, AdamConfig::with_learning_rate(hyper.critic_lr)),
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor,
            critic,
            buffer: ReplayBuffer::new(buffer_capacity),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.actor.is_finite() && self.critic.is_finite() && self.target_actor.is_finite() && self.target_critic.is_finite()
    }
}

fn stack<'a>(rows: impl Iterator<Item = &'a [f64]>, cols: usize) -> Array2<f64> {
    let flat: Vec<f64> = rows.flat_map(|r| r.iter().copied()).collect();
    let n = flat.len() / cols.max(1);
    Array2::from_shape_vec((n, cols), flat).expect("rows of equal width")
}

/// Critic mean squared error against fixed targets on a batch.
pub fn critic_loss(agent: &Agent, batch: &[&Transition], gamma: f64) -> Result<f64> {
    let (states, actions, targets) = prepare(agent, batch, gamma)?;
    let q = agent.critic.forward_batch(&concatenate![Axis(1), states, actions])?;
    Ok(q.column(0).iter().zip(&targets).map(|(q, y)| (q - y).powi(2)).sum::<f64>() / batch.len() as f64)
}

fn prepare(agent: &Agent, batch: &[&Transition], gamma: f64) -> Result<(Array2<f64>, Array2<f64>, Vec<f64>)> {
    let sd = agent.actor.input_dim();
    let ad = agent.actor.output_dim();
    if batch.iter().any(|t| t.state.0.len() != sd || t.next_state.0.len() != sd || t.action.0.len() != ad) {
        return Err(Error::Dimension("transition dims do not match the agent".into()));
    }
    let states = stack(batch.iter().map(|t| t.state.0.as_slice()), sd);
    let actions = stack(batch.iter().map(|t| t.action.0.as_slice()), ad);
    let next = stack(batch.iter().map(|t| t.next_state.0.as_slice()), sd);
    let next_actions = agent.target_actor.forward_batch(&next)?;
    let next_q = agent.target_critic.forward_batch(&concatenate![Axis(1), next, next_actions])?;
    let targets = batch
        .iter()
        .zip(next_q.column(0))
        .map(|(t, q)| t.reward + gamma * q)
        .collect();
    Ok((states, actions, targets))
}

/// One DDPG step on a batch: critic regression to r + gamma Q'(s', pi'(s')),
/// actor ascent on mean Q(s, pi(s)) through the updated critic, then soft
/// target updates.
pub fn ddpg_update(agent: &mut Agent, batch: &[&Transition], hyper: &DdpgHyper) -> Result<UpdateStats> {
    if batch.is_empty() {
        return Err(Error::config("DDPG update needs a non-empty batch"));
    }
    let n = batch.len() as f64;
    let (states, actions, targets) = prepare(agent, batch, hyper.gamma)?;

    let critic_in = concatenate![Axis(1), states.view(), actions.view()];
    let (q, cache) = agent.critic.forward_cached(&critic_in)?;
    let mut upstream = Array2::zeros(q.raw_dim());
    let mut loss = 0.0;
    for (i, y) in targets.iter().enumerate() {
        let err = q[[i, 0]] - y;
        loss += err * err;
        upstream[[i, 0]] = 2.0 * err / n;
    }
    loss /= n;
    let (critic_grads, _) = agent.critic.backward(&cache, &upstream)?;
    adam_step(&mut agent.critic, &critic_grads, &mut agent.critic_opt)?;

    let (policy, actor_cache) = agent.actor.forward_cached(&states)?;
    let (q_pi, q_cache) = agent
        .critic
        .forward_cached(&concatenate![Axis(1), states.view(), policy.view()])?;
    let objective = q_pi.sum() / n;
    let ascend = Array2::from_elem(q_pi.raw_dim(), -1.0 / n);
    let (_, input_grad) = agent.critic.backward(&q_cache, &ascend)?;
    let action_grad = input_grad.slice(s![.., states.ncols()..]).to_owned();
    let (actor_grads, _) = agent.actor.backward(&actor_cache, &action_grad)?;
    adam_step(&mut agent.actor, &actor_grads, &mut agent.actor_opt)?;

    soft_update(&mut agent.target_critic, &agent.critic, hyper.tau);
    soft_update(&mut agent.target_actor, &agent.actor, hyper.tau);

    if !agent.is_finite() || !loss.is_finite() {
        return Err(Error::Divergence(format!(
            "non-finite parameters after update (critic loss {loss})"
        )));
    }
    Ok(UpdateStats {
        critic_loss: loss,
        actor_objective: objective,
    })
}
