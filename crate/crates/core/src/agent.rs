//! DNN-policy codeword control.
//!
//! Each codeword is driven by an agent whose actor maps the MDP state
//! (normalized compound channel and normalized codeword) to a continuous step
//! direction. The step is quantized to the nearest entry of the shared
//! direction codebook, so only the entry index travels over the feedback
//! link. Agents are trained with DDPG and later reused without noise.
//!
//! State layout: `[Re h_1..Re h_N, Im h_1..Im h_N, q_1..q_G]` with `h` scaled
//! by `sqrt(P / (sigma^2 N_BS N_G))` and `q` by 1e12. Actions live in units of
//! 1e13 x farads.

mod ddpg;
mod replay;
mod training;

pub use ddpg::{critic_loss, ddpg_update, Agent, DdpgHyper, UpdateStats};
pub use replay::{ReplayBuffer, Transition};
pub use training::{
    train, utilization_step, EpisodeMetrics, NoiseMode, NoiseSchedule, TrainConfig, TrainOutcome,
};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::codebook::DirectionCodebook;
use crate::error::{Error, Result};
use crate::metaatom::Codeword;
use crate::protocol::LinkBudget;

/// Farads to state units.
pub const CODEWORD_SCALE: f64 = 1e12;
/// Farads to action units.
pub const ACTION_SCALE: f64 = 1e13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub channel_scale: f64,
    pub codeword_scale: f64,
    pub action_scale: f64,
    pub bandwidth: f64,
}

impl Normalization {
    pub fn new(budget: &LinkBudget, n_bs: usize, n_groups: usize) -> Self {
        Self {
            channel_scale: (budget.power / (budget.noise * (n_bs * n_groups) as f64)).sqrt(),
            codeword_scale: CODEWORD_SCALE,
            action_scale: ACTION_SCALE,
            bandwidth: budget.bandwidth,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MdpState(pub Vec<f64>);

#[derive(Debug, Clone, PartialEq)]
pub struct MdpAction(pub Vec<f64>);

pub fn state_dim(n_bs: usize, n_groups: usize) -> usize {
    2 * n_bs + n_groups
}

pub fn build_state(h_eff: &[Complex64], q: &Codeword, norm: &Normalization, n_bs: usize, n_groups: usize) -> Result<MdpState> {
    if h_eff.len() != n_bs || q.len() != n_groups {
        return Err(Error::Dimension(format!(
            "state expects {n_bs} channel entries and {n_groups} groups, got {} and {}",
            h_eff.len(),
            q.len()
        )));
    }
    let mut s = Vec::with_capacity(state_dim(n_bs, n_groups));
    s.extend(h_eff.iter().map(|h| h.re * norm.channel_scale));
    s.extend(h_eff.iter().map(|h| h.im * norm.channel_scale));
    s.extend(q.values().iter().map(|c| c * norm.codeword_scale));
    Ok(MdpState(s))
}

/// Inverse of [`build_state`].
pub fn unpack_state(s: &MdpState, norm: &Normalization, n_bs: usize) -> (Vec<Complex64>, Codeword) {
    let h = (0..n_bs)
        .map(|i| Complex64::new(s.0[i], s.0[n_bs + i]) / norm.channel_scale)
        .collect();
    let q = s.0[2 * n_bs..].iter().map(|v| v / norm.codeword_scale).collect();
    (h, Codeword::new(q))
}

/// r = R_next / W - (nu / W) N_clip.
pub fn reward(rate_next: f64, n_clip: usize, nu: f64, bandwidth: f64) -> f64 {
    rate_next / bandwidth - nu / bandwidth * n_clip as f64
}

/// 1-based agent index for 1-based codeword index `m`.
pub fn assign_agent(m: usize, n_agents: usize) -> usize {
    assert!(m >= 1 && n_agents >= 1, "indices are 1-based");
    (m - 1) % n_agents + 1
}

/// Direction codebook expressed in action units, for nearest-neighbour lookup.
#[derive(Debug, Clone)]
pub struct Quantizer {
    entries: Vec<Vec<f64>>,
}

impl Quantizer {
    pub fn new(directions: &DirectionCodebook, action_scale: f64) -> Result<Self> {
        if directions.is_empty() {
            return Err(Error::config("direction codebook is empty"));
        }
        Ok(Self {
            entries: directions
                .entries()
                .iter()
                .map(|d| d.iter().map(|v| v * action_scale).collect())
                .collect(),
        })
    }

    pub fn from_entries(entries: Vec<Vec<f64>>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::config("direction codebook is empty"));
        }
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// 0-based index of the closest entry in Euclidean distance, lowest index on ties.
    pub fn nearest(&self, u: &[f64]) -> usize {
        let mut best = (0, f64::INFINITY);
        for (k, d) in self.entries.iter().enumerate() {
            let dist: f64 = d.iter().zip(u).map(|(a, b)| (a - b) * (a - b)).sum();
            if dist < best.1 {
                best = (k, dist);
            }
        }
        best.0
    }
}

/// Continuous action clip(actor(s) + v, [-bound, bound]) and its quantized index.
///
/// `noise_std` is the per-entry standard deviation of the Gaussian
/// exploration noise, in action units; zero draws nothing from `rng`.
pub fn behavior_action<R: Rng + ?Sized>(
    actor: &crate::neural::Mlp,
    s: &MdpState,
    noise_std: f64,
    bound: f64,
    quantizer: &Quantizer,
    rng: &mut R,
) -> Result<(MdpAction, usize)> {
    let mut u = actor.forward(&s.0)?;
    if noise_std > 0.0 {
        let normal = Normal::new(0.0, noise_std).map_err(|e| Error::config(e.to_string()))?;
        for v in u.iter_mut() {
            *v += normal.sample(rng);
        }
    }
    for v in u.iter_mut() {
        *v = v.clamp(-bound, bound);
    }
    let k = quantizer.nearest(&u);
    Ok((MdpAction(u), k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{Activation, Dense, Mlp};
    use crate::rng::SeedTree;
    use ndarray::{Array1, Array2};

    fn budget() -> LinkBudget {
        LinkBudget::new(0.1, 1e-11, 10e6).unwrap()
    }

    fn zero_actor(n_in: usize, n_out: usize, scale: f64) -> Mlp {
        Mlp::from_layers(
            vec![
                Dense {
                    weights: Array2::zeros((8, n_in)),
                    bias: Array1::zeros(8),
                    activation: Activation::Relu,
                },
                Dense {
                    weights: Array2::zeros((n_out, 8)),
                    bias: Array1::zeros(n_out),
                    activation: Activation::Tanh,
                },
            ],
            scale,
        )
        .unwrap()
    }

    #[test]
    fn state_layout_and_scaling() {
        let norm = Normalization::new(&budget(), 5, 10);
        let h = vec![Complex64::new(0.0, 0.0); 5];
        let q = Codeword::uniform(0.4e-12, 10);
        let s = build_state(&h, &q, &norm, 5, 10).unwrap();
        assert_eq!(s.0.len(), 20);
        assert!(s.0[..10].iter().all(|v| *v == 0.0));
        assert!(s.0[10..].iter().all(|v| (v - 0.4).abs() < 1e-15));

        let h: Vec<Complex64> = (0..5).map(|i| Complex64::new(1e-6 * i as f64, -2e-6)).collect();
        let h2: Vec<Complex64> = h.iter().map(|v| v * 2.0).collect();
        let a = build_state(&h, &q, &norm, 5, 10).unwrap();
        let b = build_state(&h2, &q, &norm, 5, 10).unwrap();
        for i in 0..10 {
            assert_eq!(b.0[i], 2.0 * a.0[i]);
        }
        assert_eq!(a.0[10..], b.0[10..]);
        assert!(build_state(&h, &Codeword::uniform(1e-12, 3), &norm, 5, 10).is_err());
    }

    #[test]
    fn state_normalization_inverts() {
        let norm = Normalization::new(&budget(), 3, 4);
        let h = vec![Complex64::new(3e-6, -1e-7), Complex64::new(-2e-6, 5e-6), Complex64::new(1e-9, 0.0)];
        let q = Codeword::new(vec![0.41e-12, 1.3e-12, 2.2e-12, 2.69e-12]);
        let s = build_state(&h, &q, &norm, 3, 4).unwrap();
        let (h2, q2) = unpack_state(&s, &norm, 3);
        for (a, b) in h.iter().zip(&h2) {
            assert!((a - b).norm() <= 1e-12 * a.norm());
        }
        for (a, b) in q.values().iter().zip(q2.values()) {
            assert!((a - b).abs() <= 1e-12 * a.abs());
        }
    }

    #[test]
    fn rewards() {
        let w = 10e6;
        assert_eq!(reward(4.0 * w, 0, w, w), 4.0);
        assert_eq!(reward(4.0 * w, 2, w, w), 2.0);
        assert_eq!(reward(0.0, 10, w, w), -10.0);
    }

    #[test]
    fn agent_assignment() {
        assert_eq!(assign_agent(1, 8), 1);
        assert_eq!(assign_agent(8, 8), 8);
        assert_eq!(assign_agent(9, 8), 1);
        assert!((1..=5).all(|m| assign_agent(m, 1) == 1));
        let hit: std::collections::BTreeSet<usize> = (1..=7).map(|m| assign_agent(m, 3)).collect();
        assert_eq!(hit.into_iter().collect::<Vec<_>>(), vec![1, 2, 3]);
    }

    #[test]
    fn nearest_neighbour_cases() {
        let qz = Quantizer::from_entries(vec![vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!(qz.nearest(&[0.9, 0.8]), 1);
        let tie = Quantizer::from_entries(vec![vec![1.0], vec![-1.0]]).unwrap();
        assert_eq!(tie.nearest(&[0.0]), 0);
        assert!(Quantizer::from_entries(vec![]).is_err());
    }

    #[test]
    fn zero_actor_without_noise_picks_direction_nearest_origin() {
        let d = DirectionCodebook::generate(64, 4, 0.575e-12, 11).unwrap();
        let qz = Quantizer::new(&d, ACTION_SCALE).unwrap();
        let actor = zero_actor(12, 4, 5.75);
        let s = MdpState(vec![0.3; 12]);
        let mut rng = SeedTree::new(1).stream("noise", 0);
        let (u, k) = behavior_action(&actor, &s, 0.0, 5.75, &qz, &mut rng).unwrap();
        assert_eq!(u.0, vec![0.0; 4]);
        let norms: Vec<f64> = d.entries().iter().map(|e| e.iter().map(|v| v * v).sum()).collect();
        let closest = crate::protocol::argmax_first(&norms.iter().map(|v| -v).collect::<Vec<_>>()).unwrap();
        assert_eq!(k, closest);
    }

    #[test]
    fn noisy_actions_are_clipped() {
        let d = DirectionCodebook::generate(16, 3, 0.575e-12, 2).unwrap();
        let qz = Quantizer::new(&d, ACTION_SCALE).unwrap();
        let actor = zero_actor(9, 3, 5.75);
        let s = MdpState(vec![0.0; 9]);
        let mut rng = SeedTree::new(2).stream("noise", 0);
        for _ in 0..500 {
            let (u, k) = behavior_action(&actor, &s, 20.0, 5.75, &qz, &mut rng).unwrap();
            assert!(u.0.iter().all(|v| v.abs() <= 5.75));
            assert!(k < 16);
        }
    }
}
