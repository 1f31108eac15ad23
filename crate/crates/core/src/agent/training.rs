use super::ddpg::{ddpg_update, Agent, DdpgHyper};
use super::replay::Transition;
use super::{behavior_action, build_state, reward, state_dim, MdpAction, MdpState, Normalization, Quantizer};
use crate::channel::ChannelState;
use crate::codebook::{dpic_apply, rvq_codebook, DirectionCodebook};
use crate::error::{Error, Result};
use crate::metaatom::Codeword;
use crate::neural::Mlp;
use crate::protocol::{argmax_first, effective_rate, run_block, time_overhead, BlockResult, FeedbackScheme};
use crate::rng::SeedTree;
use crate::scenario::Scenario;

/// How the exploration parameter epsilon is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// epsilon is the per-entry variance.
    Variance,
    /// epsilon is the per-entry standard deviation.
    StdDev,
}

/// Per-episode exploration level: epsilon_e = max(epsilon_min, decay * epsilon_{e-1}).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSchedule {
    pub epsilon0: f64,
    pub epsilon_min: f64,
    pub decay: f64,
    current: f64,
}

impl NoiseSchedule {
    pub fn new(epsilon0: f64, epsilon_min: f64, decay: f64) -> Result<Self> {
        if !(epsilon0 >= 0.0 && epsilon_min >= 0.0 && epsilon_min <= epsilon0 && (0.0..=1.0).contains(&decay)) {
            return Err(Error::config(format!(
                "bad noise schedule: epsilon0 {epsilon0}, epsilon_min {epsilon_min}, decay {decay}"
            )));
        }
        Ok(Self {
            epsilon0,
            epsilon_min,
            decay,
            current: epsilon0,
        })
    }

    pub fn current(&self) -> f64 {
        self.current
    }

    pub fn advance(&mut self) -> f64 {
        self.current = (self.decay * self.current).max(self.epsilon_min);
        self.current
    }

    /// Noise standard deviation in action units for the current epsilon
    /// (epsilon is in farads).
    pub fn noise_std(&self, mode: NoiseMode, action_scale: f64) -> f64 {
        let eps = self.current * action_scale;
        match mode {
            NoiseMode::Variance => eps.sqrt(),
            NoiseMode::StdDev => eps,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub episodes: usize,
    pub timesteps: usize,
    pub n_agents: usize,
    pub hidden: Vec<usize>,
    pub hyper: DdpgHyper,
    pub buffer_capacity: usize,
    pub noise: NoiseSchedule,
    pub noise_mode: NoiseMode,
    /// Clip-penalty weight nu, bits/s.
    pub nu: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeMetrics {
    pub episode: usize,
    /// Mean over timesteps of the best codeword's data rate, bits/s.
    pub mean_rate: f64,
    /// Mean over timesteps of the best codeword's effective rate, bits/s.
    pub mean_effective_rate: f64,
    /// Mean reward over all transitions stored this episode.
    pub mean_reward: f64,
    pub epsilon: f64,
}

pub struct TrainOutcome {
    pub agents: Vec<Agent>,
    pub episodes: Vec<EpisodeMetrics>,
}

struct Pending {
    state: MdpState,
    action: MdpAction,
    clipped: usize,
}

/// DDPG training of `n_agents` independent agents, agent m driving codeword m.
///
/// `on_episode` sees every episode's metrics as soon as they exist, so a
/// caller can persist progress before a later episode aborts.
pub fn train<F>(
    scenario: &Scenario,
    cfg: &TrainConfig,
    directions: &DirectionCodebook,
    seeds: &SeedTree,
    mut on_episode: F,
) -> Result<TrainOutcome>
where
    F: FnMut(&EpisodeMetrics) -> Result<()>,
{
    if cfg.n_agents == 0 || cfg.timesteps == 0 {
        return Err(Error::config("training needs at least one agent and one timestep"));
    }
    let n_bs = scenario.n_bs();
    let n_g = scenario.n_groups();
    if directions.dims() != n_g {
        return Err(Error::config(format!(
            "direction codebook has {} dims, expected {n_g}",
            directions.dims()
        )));
    }
    let norm = Normalization::new(&scenario.budget, n_bs, n_g);
    let quantizer = Quantizer::new(directions, norm.action_scale)?;
    let bound = scenario.steps.dpic * norm.action_scale;
    let scheme = FeedbackScheme::Dpic {
        directions: directions.len(),
    };
    let bounds = scenario.bounds;

    let mut agents = (0..cfg.n_agents)
        .map(|m| {
            let mut rng = seeds.stream("agent-init", m as u64);
            Agent::new(state_dim(n_bs, n_g), n_g, &cfg.hidden, bound, &cfg.hyper, cfg.buffer_capacity, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut replay_rngs: Vec<_> = (0..cfg.n_agents).map(|m| seeds.stream("replay", m as u64)).collect();

    let mut schedule = cfg.noise;
    let mut history = Vec::with_capacity(cfg.episodes);
    for e in 0..cfg.episodes {
        if e > 0 {
            schedule.advance();
        }
        let noise_std = schedule.noise_std(cfg.noise_mode, norm.action_scale);
        let mut channel_rng = seeds.stream("train-channel", e as u64);
        let mut noise_rng = seeds.stream("train-noise", e as u64);
        let mut state = ChannelState::sample_initial(&scenario.channel, &mut channel_rng)?;
        let mut codebook = rvq_codebook(
            cfg.n_agents,
            n_g,
            bounds.c_min,
            bounds.c_max,
            &mut seeds.stream("train-codebook", e as u64),
        );
        let mut pending: Vec<Option<Pending>> = (0..cfg.n_agents).map(|_| None).collect();
        let (mut rate_sum, mut eff_sum, mut reward_sum, mut reward_count) = (0.0, 0.0, 0.0, 0usize);

        for _t in 0..cfg.timesteps {
            let channels = codebook
                .iter()
                .map(|q| state.effective_channel(q, &scenario.profile))
                .collect::<Result<Vec<_>>>()?;
            let rates: Vec<f64> = channels
                .iter()
                .map(|h| crate::protocol::data_rate(h, &scenario.budget))
                .collect();

            // monitoring only: what the protocol would deliver with this codebook
            let best = argmax_first(&rates).expect("non-empty");
            let overhead = time_overhead(
                scheme,
                cfg.n_agents,
                &scenario.timings,
                scenario.budget.bandwidth,
                best + 1 != cfg.n_agents,
            )?;
            rate_sum += rates[best];
            eff_sum += effective_rate(rates[best], scenario.timings.coherence, overhead);

            for (m, agent) in agents.iter_mut().enumerate() {
                let s = build_state(&channels[m], &codebook[m], &norm, n_bs, n_g)?;
                if let Some(prev) = pending[m].take() {
                    let r = reward(rates[m], prev.clipped, cfg.nu, scenario.budget.bandwidth);
                    reward_sum += r;
                    reward_count += 1;
                    agent.buffer.push(Transition {
                        state: prev.state,
                        action: prev.action,
                        reward: r,
                        next_state: s.clone(),
                    });
                }
                let (u, k) = behavior_action(&agent.actor, &s, noise_std, bound, &quantizer, &mut noise_rng)?;
                let (next_q, clipped) = dpic_apply(&codebook[m], directions.get(k), &bounds);
                codebook[m] = next_q;
                pending[m] = Some(Pending {
                    state: s,
                    action: u,
                    clipped,
                });
                if agent.buffer.len() >= cfg.hyper.batch_size {
                    let batch = agent.buffer.sample(cfg.hyper.batch_size, &mut replay_rngs[m]);
                    let refs: Vec<&Transition> = batch.iter().collect();
                    ddpg_update(agent, &refs, &cfg.hyper)
                        .map_err(|err| Error::Divergence(format!("agent {}, episode {e}: {err}", m + 1)))?;
                }
            }
            state.evolve(scenario.timings.coherence, &mut channel_rng);
        }

        let steps = cfg.timesteps as f64;
        let metrics = EpisodeMetrics {
            episode: e,
            mean_rate: rate_sum / steps,
            mean_effective_rate: eff_sum / steps,
            mean_reward: if reward_count > 0 { reward_sum / reward_count as f64 } else { 0.0 },
            epsilon: schedule.current(),
        };
        on_episode(&metrics)?;
        history.push(metrics);
    }
    Ok(TrainOutcome {
        agents,
        episodes: history,
    })
}

/// One utilization block with trained actors: sound and select, then move
/// codeword m by agent `assign_agent(m)`'s noiseless quantized action.
pub fn utilization_step(
    actors: &[Mlp],
    codebook: &[Codeword],
    state: &ChannelState,
    scenario: &Scenario,
    directions: &DirectionCodebook,
    quantizer: &Quantizer,
) -> Result<(BlockResult, Vec<Codeword>)> {
    if actors.is_empty() {
        return Err(Error::config("utilization needs at least one trained agent"));
    }
    let scheme = FeedbackScheme::Dpic {
        directions: directions.len(),
    };
    let block = run_block(
        codebook,
        state,
        &scenario.profile,
        &scenario.budget,
        &scenario.timings,
        scheme,
    )?;
    let n_bs = scenario.n_bs();
    let n_g = scenario.n_groups();
    let norm = Normalization::new(&scenario.budget, n_bs, n_g);
    let bound = scenario.steps.dpic * norm.action_scale;
    // zero noise draws nothing from this stream
    let mut unused = SeedTree::new(0).stream("unused", 0);
    let next = codebook
        .iter()
        .zip(&block.channels)
        .enumerate()
        .map(|(m, (q, h))| {
            let actor = &actors[super::assign_agent(m + 1, actors.len()) - 1];
            let s = build_state(h, q, &norm, n_bs, n_g)?;
            let (_, k) = behavior_action(actor, &s, 0.0, bound, quantizer, &mut unused)?;
            Ok(dpic_apply(q, directions.get(k), &scenario.bounds).0)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((block, next))
}
