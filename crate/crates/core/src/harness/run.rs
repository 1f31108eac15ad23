use std::fmt;
use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::Experiment;
use crate::agent::{self, utilization_step, Agent, EpisodeMetrics, Normalization, Quantizer};
use crate::channel::ChannelState;
use crate::codebook::{ra_update, rvq_codebook};
use crate::error::{Error, Result};
use crate::metaatom::{gamma_grid, CapacitanceBounds, CircuitProfile};
use crate::neural::Mlp;
use crate::protocol::{run_block, FeedbackScheme};
use crate::rng::SeedTree;

pub const TRAINING_HEADER: [&str; 6] = [
    "episode",
    "mean_rate_bps",
    "mean_effective_rate_bps",
    "moving_avg_effective_rate_bps",
    "mean_reward",
    "epsilon",
];
pub const UTILIZATION_HEADER: [&str; 5] = [
    "scheme",
    "timestep",
    "mean_rate_bps",
    "mean_effective_rate_bps",
    "mean_overhead_s",
];
pub const SUMMARY_HEADER: [&str; 7] = [
    "scheme",
    "m",
    "episodes",
    "timesteps",
    "mean_rate_bps",
    "mean_effective_rate_bps",
    "mean_overhead_s",
];
pub const GAMMA_HEADER: [&str; 6] = ["capacitance_pf", "theta_deg", "gamma_re", "gamma_im", "magnitude", "phase_deg"];

const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Rvq,
    Ra,
    Sdpic,
    Mdpic,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Rvq, Scheme::Ra, Scheme::Sdpic, Scheme::Mdpic];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Rvq => "rvq",
            Scheme::Ra => "ra",
            Scheme::Sdpic => "sdpic",
            Scheme::Mdpic => "mdpic",
        }
    }

    pub fn needs_checkpoints(self) -> bool {
        matches!(self, Scheme::Sdpic | Scheme::Mdpic)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config(format!("unknown scheme {s:?}, expected rvq|ra|sdpic|mdpic")))
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalizationRecord {
    pub channel_scale: f64,
    pub codeword_scale: f64,
    pub action_scale: f64,
    pub bandwidth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectionRecord {
    pub seed: u64,
    pub k: usize,
    pub dims: usize,
    pub delta_f: f64,
    pub fingerprint: u64,
}

/// Everything needed to check that checkpoints fit an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub n_agents: usize,
    pub n_bs: usize,
    pub n_groups: usize,
    pub hidden: Vec<usize>,
    pub action_bound: f64,
    pub direction_codebook: DirectionRecord,
    pub normalization: NormalizationRecord,
    pub actors: Vec<String>,
    pub critics: Vec<String>,
}

impl Manifest {
    pub fn for_experiment(exp: &Experiment, n_agents: usize) -> Self {
        let s = &exp.scenario;
        let norm = Normalization::new(&s.budget, s.n_bs(), s.n_groups());
        Manifest {
            n_agents,
            n_bs: s.n_bs(),
            n_groups: s.n_groups(),
            hidden: exp.train.hidden.clone(),
            action_bound: s.steps.dpic * norm.action_scale,
            direction_codebook: DirectionRecord {
                seed: exp.directions.seed(),
                k: exp.directions.len(),
                dims: exp.directions.dims(),
                delta_f: exp.directions.delta(),
                fingerprint: exp.directions.fingerprint(),
            },
            normalization: NormalizationRecord {
                channel_scale: norm.channel_scale,
                codeword_scale: norm.codeword_scale,
                action_scale: norm.action_scale,
                bandwidth: norm.bandwidth,
            },
            actors: (1..=n_agents).map(|m| format!("actor_{m}.json")).collect(),
            critics: (1..=n_agents).map(|m| format!("critic_{m}.json")).collect(),
        }
    }
}

pub fn save_checkpoints(dir: &Path, exp: &Experiment, agents: &[Agent]) -> Result<()> {
    create_dir(dir)?;
    let manifest = Manifest::for_experiment(exp, agents.len());
    for (agent, (a, c)) in agents.iter().zip(manifest.actors.iter().zip(&manifest.critics)) {
        agent.actor.save_json(dir.join(a))?;
        agent.critic.save_json(dir.join(c))?;
    }
    let text = serde_json::to_string_pretty(&manifest)?;
    write_text(&dir.join(MANIFEST), &text)
}

/// Trained actors from a checkpoint directory, after checking the manifest
/// against the experiment.
pub fn load_checkpoints(dir: &Path, exp: &Experiment) -> Result<Vec<Mlp>> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path)
        .map_err(|e| Error::config(format!("missing checkpoints at {}: {e}", path.display())))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    let expected = Manifest::for_experiment(exp, manifest.n_agents);
    if manifest.n_agents == 0 {
        return Err(Error::config(format!("{}: no agents", path.display())));
    }
    if (manifest.n_bs, manifest.n_groups) != (expected.n_bs, expected.n_groups) {
        return Err(Error::config(format!(
            "checkpoints were trained for N_BS = {}, N_G = {}; config has {}, {}",
            manifest.n_bs, manifest.n_groups, expected.n_bs, expected.n_groups
        )));
    }
    if manifest.direction_codebook != expected.direction_codebook {
        return Err(Error::config("checkpoint direction codebook differs from the configured one"));
    }
    if manifest.normalization != expected.normalization || manifest.action_bound != expected.action_bound {
        return Err(Error::config("checkpoint normalization differs from the configured link budget"));
    }
    let actors = manifest
        .actors
        .iter()
        .map(|name| Mlp::load_json(dir.join(name)))
        .collect::<Result<Vec<_>>>()?;
    let sd = agent::state_dim(manifest.n_bs, manifest.n_groups);
    if actors.iter().any(|a| a.input_dim() != sd || a.output_dim() != manifest.n_groups) {
        return Err(Error::Dimension("actor shape does not match the manifest".into()));
    }
    Ok(actors)
}

/// Mean over episodes `max(0, e - window + 1)..=e` for every e.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for (e, v) in values.iter().enumerate() {
        sum += v;
        if e >= window {
            sum -= values[e - window];
        }
        out.push(sum / (e + 1).min(window) as f64);
    }
    out
}

pub struct TrainingReport {
    pub episodes: Vec<EpisodeMetrics>,
    pub moving_average: Vec<f64>,
    pub agents: Vec<Agent>,
    pub checkpoint_dir: PathBuf,
}

/// Train, writing `training.csv` row by row, then checkpoints under
/// `out/checkpoints`. The effective config goes to `out/config.json`.
pub fn run_training(exp: &Experiment, out: &Path) -> Result<TrainingReport> {
    create_dir(out)?;
    write_text(&out.join("config.json"), &exp.config.to_json_string())?;
    let csv_path = out.join("training.csv");
    let mut writer = csv_writer(&csv_path)?;
    writer.write_record(TRAINING_HEADER)?;
    writer.flush().map_err(|e| Error::io(&csv_path, e))?;

    let window = exp.config.training.moving_average;
    let mut raw = Vec::new();
    let mut averages = Vec::new();
    let seeds = SeedTree::new(exp.config.seed);
    let outcome = agent::train(&exp.scenario, &exp.train, &exp.directions, &seeds, |m| {
        raw.push(m.mean_effective_rate);
        let avg = *moving_average(&raw[raw.len().saturating_sub(window)..], window)
            .last()
            .expect("non-empty");
        averages.push(avg);
        writer.write_record([
            m.episode.to_string(),
            m.mean_rate.to_string(),
            m.mean_effective_rate.to_string(),
            avg.to_string(),
            m.mean_reward.to_string(),
            m.epsilon.to_string(),
        ])?;
        writer.flush().map_err(|e| Error::io(&csv_path, e))?;
        log::info!(
            "episode {}: effective rate {:.4e} bit/s (avg {:.4e}), epsilon {:.3e}",
            m.episode,
            m.mean_effective_rate,
            avg,
            m.epsilon
        );
        Ok(())
    })?;
    let checkpoint_dir = out.join("checkpoints");
    save_checkpoints(&checkpoint_dir, exp, &outcome.agents)?;
    Ok(TrainingReport {
        episodes: outcome.episodes,
        moving_average: averages,
        agents: outcome.agents,
        checkpoint_dir,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct UtilizationReport {
    pub scheme: Scheme,
    pub m: usize,
    pub episodes: usize,
    /// Per-timestep means over episodes.
    pub rate: Vec<f64>,
    pub effective_rate: Vec<f64>,
    pub overhead: Vec<f64>,
}

impl UtilizationReport {
    fn overall(v: &[f64]) -> f64 {
        v.iter().sum::<f64>() / v.len() as f64
    }

    pub fn mean_rate(&self) -> f64 {
        Self::overall(&self.rate)
    }

    pub fn mean_effective_rate(&self) -> f64 {
        Self::overall(&self.effective_rate)
    }

    pub fn mean_overhead(&self) -> f64 {
        Self::overall(&self.overhead)
    }
}

/// Utilization campaign of one scheme with codebook size `m`.
///
/// Every scheme sees the same channel trajectories and initial codebooks for
/// a given seed, so schemes are compared on paired draws.
pub fn run_utilization(exp: &Experiment, scheme: Scheme, m: usize, actors: Option<&[Mlp]>) -> Result<UtilizationReport> {
    if m == 0 {
        return Err(Error::config("codebook size M must be at least 1"));
    }
    let actors = match (scheme, actors) {
        (Scheme::Sdpic, Some(a)) if !a.is_empty() => &a[..1],
        (Scheme::Mdpic, Some(a)) if !a.is_empty() => a,
        (Scheme::Sdpic | Scheme::Mdpic, _) => {
            return Err(Error::config(format!("scheme {scheme} needs trained checkpoints")));
        }
        _ => &[][..],
    };
    let s = &exp.scenario;
    let u = &exp.config.utilization;
    let seeds = SeedTree::new(exp.config.seed);
    let norm = Normalization::new(&s.budget, s.n_bs(), s.n_groups());
    let quantizer = Quantizer::new(&exp.directions, norm.action_scale)?;
    let b = s.bounds;

    let steps = u.timesteps;
    let mut rate = vec![0.0; steps];
    let mut eff = vec![0.0; steps];
    let mut overhead = vec![0.0; steps];
    for e in 0..u.episodes {
        let e64 = e as u64;
        let mut channel_rng = seeds.stream("util-channel", e64);
        let mut draw_rng = seeds.stream("util-update", e64);
        let mut state = ChannelState::sample_initial(&s.channel, &mut channel_rng)?;
        let mut codebook = rvq_codebook(m, s.n_groups(), b.c_min, b.c_max, &mut seeds.stream("util-codebook", e64));
        for t in 0..steps {
            let block = match scheme {
                Scheme::Rvq => {
                    if t > 0 {
                        codebook = rvq_codebook(m, s.n_groups(), b.c_min, b.c_max, &mut draw_rng);
                    }
                    run_block(&codebook, &state, &s.profile, &s.budget, &s.timings, FeedbackScheme::Rvq)?
                }
                Scheme::Ra => {
                    let block = run_block(
                        &codebook,
                        &state,
                        &s.profile,
                        &s.budget,
                        &s.timings,
                        FeedbackScheme::RandomAdjacency,
                    )?;
                    codebook = ra_update(&codebook[block.selected - 1], m, s.steps.ra, &b, &mut draw_rng);
                    block
                }
                Scheme::Sdpic | Scheme::Mdpic => {
                    let (block, next) = utilization_step(actors, &codebook, &state, s, &exp.directions, &quantizer)?;
                    codebook = next;
                    block
                }
            };
            rate[t] += block.rate;
            eff[t] += block.effective_rate;
            overhead[t] += block.overhead;
            state.evolve(s.timings.coherence, &mut channel_rng);
        }
    }
    let n = u.episodes as f64;
    for v in rate.iter_mut().chain(eff.iter_mut()).chain(overhead.iter_mut()) {
        *v /= n;
    }
    Ok(UtilizationReport {
        scheme,
        m,
        episodes: u.episodes,
        rate,
        effective_rate: eff,
        overhead,
    })
}

fn summary_record(r: &UtilizationReport) -> [String; 7] {
    [
        r.scheme.to_string(),
        r.m.to_string(),
        r.episodes.to_string(),
        r.rate.len().to_string(),
        r.mean_rate().to_string(),
        r.mean_effective_rate().to_string(),
        r.mean_overhead().to_string(),
    ]
}

/// `utilization_<scheme>_m<M>.csv` (per timestep) and
/// `summary_<scheme>_m<M>.csv` (one row) under `out`.
pub fn write_utilization(report: &UtilizationReport, out: &Path) -> Result<(PathBuf, PathBuf)> {
    create_dir(out)?;
    let tag = format!("{}_m{}", report.scheme, report.m);
    let per_step = out.join(format!("utilization_{tag}.csv"));
    let mut w = csv_writer(&per_step)?;
    w.write_record(UTILIZATION_HEADER)?;
    for t in 0..report.rate.len() {
        w.write_record([
            report.scheme.to_string(),
            t.to_string(),
            report.rate[t].to_string(),
            report.effective_rate[t].to_string(),
            report.overhead[t].to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&per_step, e))?;

    let summary = out.join(format!("summary_{tag}.csv"));
    let mut w = csv_writer(&summary)?;
    w.write_record(SUMMARY_HEADER)?;
    w.write_record(summary_record(report))?;
    w.flush().map_err(|e| Error::io(&summary, e))?;
    Ok((per_step, summary))
}

/// One utilization campaign per M; rows land in `sweep_<scheme>.csv`.
pub fn sweep_m(exp: &Experiment, scheme: Scheme, ms: &[usize], actors: Option<&[Mlp]>) -> Result<Vec<UtilizationReport>> {
    if ms.is_empty() {
        return Err(Error::config("sweep needs at least one M"));
    }
    ms.iter()
        .map(|&m| {
            let r = run_utilization(exp, scheme, m, actors)?;
            log::info!(
                "{scheme} M = {m}: rate {:.4e}, effective {:.4e} bit/s",
                r.mean_rate(),
                r.mean_effective_rate()
            );
            Ok(r)
        })
        .collect()
}

pub fn write_sweep(reports: &[UtilizationReport], out: &Path) -> Result<PathBuf> {
    create_dir(out)?;
    let scheme = reports.first().map_or("empty", |r| r.scheme.name());
    let path = out.join(format!("sweep_{scheme}.csv"));
    let mut w = csv_writer(&path)?;
    w.write_record(SUMMARY_HEADER)?;
    for r in reports {
        w.write_record(summary_record(r))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Gamma over the capacitance range and [0, 90] deg as CSV.
pub fn write_gamma_map<W: Write>(
    profile: &CircuitProfile,
    bounds: &CapacitanceBounds,
    n_c: usize,
    n_theta: usize,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(GAMMA_HEADER)?;
    for p in gamma_grid(profile, bounds, n_c, n_theta)? {
        w.write_record([
            (p.capacitance * 1e12).to_string(),
            p.theta_deg.to_string(),
            p.gamma.re.to_string(),
            p.gamma.im.to_string(),
            p.gamma.norm().to_string(),
            p.gamma.arg().to_degrees().to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<gamma map>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moving_average_definition() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(moving_average(&v, 2), vec![1.0, 1.5, 2.5, 3.5, 4.5]);
        assert_eq!(moving_average(&v, 100), vec![1.0, 1.5, 2.0, 2.5, 3.0]);
        assert_eq!(moving_average(&v, 1), v.to_vec());
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
        assert!("dpic".parse::<Scheme>().unwrap_err().is_config());
    }
}
