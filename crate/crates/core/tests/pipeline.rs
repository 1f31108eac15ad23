use ndarray::{Array1, Array2};

use irs_core::agent::{state_dim, train, utilization_step, Normalization, Quantizer};
use irs_core::channel::ChannelState;
use irs_core::codebook::{dpic_apply, rvq_codebook};
use irs_core::harness::{Experiment, ExperimentConfig};
use irs_core::metaatom::Codeword;
use irs_core::neural::{Activation, Dense, Mlp};
use irs_core::protocol::{run_block, time_overhead, FeedbackScheme};
use irs_core::rng::SeedTree;

fn tiny(episodes: usize, timesteps: usize, agents: usize, capacity: usize) -> Experiment {
    let text = format!(
        r#"{{"n_bs":2,"n_irs":8,"n_groups":4,"n_paths":3,
            "direction_codebook":{{"k":16}},
            "training":{{"episodes":{episodes},"timesteps":{timesteps},"n_agents":{agents},
                         "hidden":[8,6],"batch_size":2,"buffer_capacity":{capacity}}}}}"#
    );
    Experiment::new(ExperimentConfig::from_json_str(&text).unwrap()).unwrap()
}

#[test]
fn one_step_pair_stores_exactly_one_transition() {
    let exp = tiny(1, 2, 1, 100);
    let out = train(&exp.scenario, &exp.train, &exp.directions, &SeedTree::new(1), |_| Ok(())).unwrap();
    assert_eq!(out.agents.len(), 1);
    assert_eq!(out.agents[0].buffer.len(), 1);
    assert_eq!(out.episodes.len(), 1);
}

#[test]
fn buffer_holds_min_of_capacity_and_stored() {
    for (capacity, expected) in [(100, 3 * 4), (5, 5)] {
        let exp = tiny(3, 5, 2, capacity);
        let mut seen = Vec::new();
        let out = train(&exp.scenario, &exp.train, &exp.directions, &SeedTree::new(2), |m| {
            seen.push(m.episode);
            Ok(())
        })
        .unwrap();
        assert_eq!(seen, vec![0, 1, 2]);
        for a in &out.agents {
            assert_eq!(a.buffer.len(), expected);
            assert!(a.is_finite());
        }
        let eps: Vec<f64> = out.episodes.iter().map(|m| m.epsilon).collect();
        assert!(eps.windows(2).all(|w| w[1] <= w[0]));
    }
}

#[test]
fn training_is_reproducible() {
    let exp = tiny(2, 6, 2, 50);
    let run = || {
        let out = train(&exp.scenario, &exp.train, &exp.directions, &SeedTree::new(3), |_| Ok(())).unwrap();
        (out.episodes, out.agents.into_iter().map(|a| a.actor).collect::<Vec<_>>())
    };
    assert_eq!(run(), run());
}

fn zero_actor(n_in: usize, n_out: usize, bound: f64) -> Mlp {
    Mlp::from_layers(
        vec![
            Dense {
                weights: Array2::zeros((5, n_in)),
                bias: Array1::zeros(5),
                activation: Activation::Relu,
            },
            Dense {
                weights: Array2::zeros((n_out, 5)),
                bias: Array1::zeros(n_out),
                activation: Activation::Tanh,
            },
        ],
        bound,
    )
    .unwrap()
}

#[test]
fn zero_actors_move_every_codeword_by_the_direction_nearest_origin() {
    let exp = tiny(1, 2, 2, 10);
    let s = &exp.scenario;
    let (n_bs, n_g) = (s.n_bs(), s.n_groups());
    let norm = Normalization::new(&s.budget, n_bs, n_g);
    let quantizer = Quantizer::new(&exp.directions, norm.action_scale).unwrap();
    let actors = vec![zero_actor(state_dim(n_bs, n_g), n_g, 5.75); 2];
    let seeds = SeedTree::new(4);
    let state = ChannelState::sample_initial(&s.channel, &mut seeds.stream("c", 0)).unwrap();
    let codebook = rvq_codebook(3, n_g, s.bounds.c_min, s.bounds.c_max, &mut seeds.stream("q", 0));

    let (block, next) = utilization_step(&actors, &codebook, &state, s, &exp.directions, &quantizer).unwrap();
    let k0 = quantizer.nearest(&vec![0.0; n_g]);
    for (q, moved) in codebook.iter().zip(&next) {
        assert_eq!(moved, &dpic_apply(q, exp.directions.get(k0), &s.bounds).0);
    }
    let direct = run_block(
        &codebook,
        &state,
        &s.profile,
        &s.budget,
        &s.timings,
        FeedbackScheme::Dpic {
            directions: exp.directions.len(),
        },
    )
    .unwrap();
    assert_eq!(block, direct);
    assert!(utilization_step(&[], &codebook, &state, s, &exp.directions, &quantizer).is_err());
}

#[test]
fn single_codeword_block_needs_no_final_reconfiguration() {
    let exp = tiny(1, 2, 1, 10);
    let s = &exp.scenario;
    let state = ChannelState::sample_initial(&s.channel, &mut SeedTree::new(5).stream("c", 0)).unwrap();
    let q = vec![Codeword::uniform(1e-12, s.n_groups())];
    for scheme in [FeedbackScheme::Rvq, FeedbackScheme::RandomAdjacency] {
        let b = run_block(&q, &state, &s.profile, &s.budget, &s.timings, scheme).unwrap();
        assert_eq!(b.selected, 1);
        assert_eq!(b.feedback_bits, 0);
        assert_eq!(b.overhead, s.timings.reconfig);
        assert_eq!(b.rates.len(), 1);
    }
}

#[test]
fn overhead_is_increasing_in_m() {
    let exp = tiny(1, 2, 1, 10);
    let t = &exp.scenario.timings;
    let w = exp.scenario.budget.bandwidth;
    let scheme = FeedbackScheme::Dpic { directions: 2048 };
    let values: Vec<f64> = (1..=8)
        .map(|m| time_overhead(scheme, m, t, w, true).unwrap())
        .collect();
    assert!(values.windows(2).all(|p| p[1] > p[0]), "{values:?}");
}

#[test]
fn direct_link_power_matches_path_loss() {
    let exp = tiny(1, 2, 1, 10);
    let mut cfg = exp.scenario.channel.clone();
    cfg.ue_radius = 0.0;
    let seeds = SeedTree::new(6);
    let n = 4000;
    let mut ratio = 0.0;
    for i in 0..n {
        let st = ChannelState::sample_initial(&cfg, &mut seeds.stream("mc", i)).unwrap();
        let power: f64 = st.h_ub.iter().map(|h| h.norm_sqr()).sum();
        ratio += power / (cfg.n_bs as f64 * st.pl_ub);
    }
    let ratio = ratio / n as f64;
    assert!((ratio - 1.0).abs() < 0.05, "E|h_ub|^2 / (N_BS PL_UB) = {ratio}");
}

#[test]
fn zero_rho_decorrelates_gains() {
    let exp = tiny(1, 2, 1, 10);
    let mut cfg = exp.scenario.channel.clone();
    cfg.rho = 0.0;
    let mut rng = SeedTree::new(7).stream("decor", 0);
    let mut st = ChannelState::sample_initial(&cfg, &mut rng).unwrap();
    let (mut cross, mut power) = (0.0, 0.0);
    for _ in 0..5000 {
        let prev = st.ub_paths.gains.clone();
        st.evolve(5e-3, &mut rng);
        for (a, b) in prev.iter().zip(&st.ub_paths.gains) {
            cross += (b * a.conj()).re;
            power += b.norm_sqr();
        }
    }
    assert!((cross / power).abs() < 0.03, "lag-1 correlation {}", cross / power);
}
