use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::{DdpgHyper, NoiseMode, NoiseSchedule, TrainConfig};
use crate::channel::ChannelConfig;
use crate::codebook::{DirectionCodebook, StepSizes};
use crate::error::{Error, Result};
use crate::metaatom::{CapacitanceBounds, CircuitProfile, FREE_SPACE_IMPEDANCE};
use crate::protocol::{ceil_log2, LinkBudget, Timings};
use crate::scenario::Scenario;

const SPEED_OF_LIGHT: f64 = 3e8;
const PF: f64 = 1e-12;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Experiment description as stored on disk. Every key is optional; missing
/// keys take the full-scale defaults. Units are in the key names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub carrier_hz: f64,
    pub z0_ohm: f64,
    /// Circuit profile CSV; the built-in placeholder when absent.
    pub profile: Option<PathBuf>,
    pub n_bs: usize,
    pub n_irs: usize,
    pub n_groups: usize,
    pub n_paths: usize,
    pub c_min_pf: f64,
    pub c_max_pf: f64,
    pub power_dbm: f64,
    pub noise_dbm: f64,
    pub bandwidth_hz: f64,
    pub coherence_s: f64,
    pub reconfig_s: f64,
    pub feedback_rate_bps_per_hz: f64,
    pub rician_k: f64,
    pub ple_irs_bs: f64,
    pub ple_ue_bs: f64,
    pub ple_ue_irs: f64,
    pub rho: f64,
    pub angle_drift_deg: f64,
    pub ue_speed_kmh: f64,
    pub bs_pos_m: [f64; 2],
    pub irs_pos_m: [f64; 2],
    pub ue_center_m: [f64; 2],
    pub ue_radius_m: f64,
    pub bs_boresight_deg: f64,
    pub irs_boresight_deg: f64,
    pub bs_spacing_wavelengths: f64,
    pub irs_spacing_wavelengths: f64,
    /// Random adjacency half-width; (c_max - c_min)/5 when absent.
    pub ra_step_pf: Option<f64>,
    pub direction_codebook: DirectionCodebookConfig,
    pub training: TrainingConfig,
    pub utilization: UtilizationConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DirectionCodebookConfig {
    pub seed: u64,
    pub k: usize,
    /// Half-width of every entry and bound of the actor output;
    /// (c_max - c_min)/4 when absent.
    pub delta_pf: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub episodes: usize,
    pub timesteps: usize,
    pub n_agents: usize,
    pub hidden: Vec<usize>,
    pub gamma: f64,
    pub tau: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Initial exploration level in farads; (c_max - c_min)/5 when absent.
    pub epsilon0_f: Option<f64>,
    /// epsilon_min = epsilon0 / this.
    pub epsilon_floor_divisor: f64,
    pub epsilon_decay: f64,
    pub noise_mode: NoiseMode,
    /// Clip penalty nu as a multiple of the bandwidth.
    pub nu_per_hz: f64,
    pub moving_average: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UtilizationConfig {
    pub episodes: usize,
    pub timesteps: usize,
    pub m: usize,
    pub m_values: Vec<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            carrier_hz: 5.195e9,
            z0_ohm: FREE_SPACE_IMPEDANCE,
            profile: None,
            n_bs: 5,
            n_irs: 200,
            n_groups: 10,
            n_paths: 10,
            c_min_pf: 0.4,
            c_max_pf: 2.7,
            power_dbm: 20.0,
            noise_dbm: -80.0,
            bandwidth_hz: 10e6,
            coherence_s: 5e-3,
            reconfig_s: 100e-6,
            feedback_rate_bps_per_hz: 0.1,
            rician_k: 5.0,
            ple_irs_bs: 2.0,
            ple_ue_bs: 3.75,
            ple_ue_irs: 2.2,
            rho: 0.95,
            angle_drift_deg: 0.1,
            ue_speed_kmh: 3.0,
            bs_pos_m: [0.0, 0.0],
            irs_pos_m: [90.0, 30.0],
            ue_center_m: [100.0, 0.0],
            ue_radius_m: 5.0,
            bs_boresight_deg: 0.0,
            irs_boresight_deg: -90.0,
            bs_spacing_wavelengths: 0.5,
            irs_spacing_wavelengths: 0.1,
            ra_step_pf: None,
            direction_codebook: DirectionCodebookConfig::default(),
            training: TrainingConfig::default(),
            utilization: UtilizationConfig::default(),
        }
    }
}

impl Default for DirectionCodebookConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            k: 2048,
            delta_pf: None,
        }
    }
}

impl Default for TrainingConfig {
    fn default() -> Self {
        let hyper = DdpgHyper::default();
        Self {
            episodes: 1000,
            timesteps: 500,
            n_agents: 8,
            hidden: vec![400, 300],
            gamma: hyper.gamma,
            tau: hyper.tau,
            actor_lr: hyper.actor_lr,
            critic_lr: hyper.critic_lr,
            batch_size: hyper.batch_size,
            buffer_capacity: 500_000,
            epsilon0_f: None,
            epsilon_floor_divisor: 300.0,
            epsilon_decay: 0.99,
            noise_mode: NoiseMode::Variance,
            nu_per_hz: 1.0,
            moving_average: 100,
        }
    }
}

impl Default for UtilizationConfig {
    fn default() -> Self {
        Self {
            episodes: 2000,
            timesteps: 30,
            m: 8,
            m_values: vec![1, 2, 4, 8],
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(format!("{name} must be positive and finite, got {v}")))
    }
}

fn at_least_one(name: &str, v: usize) -> Result<()> {
    if v == 0 {
        return Err(Error::config(format!("{name} must be at least 1")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    pub fn bounds(&self) -> Result<CapacitanceBounds> {
        if !(self.c_min_pf < self.c_max_pf) {
            return Err(Error::config(format!(
                "c_min_pf ({}) must be below c_max_pf ({})",
                self.c_min_pf, self.c_max_pf
            )));
        }
        CapacitanceBounds::new(self.c_min_pf * PF, self.c_max_pf * PF)
    }

    pub fn steps(&self) -> Result<StepSizes> {
        let defaults = StepSizes::from_bounds(&self.bounds()?);
        StepSizes::new(
            self.ra_step_pf.map_or(defaults.ra, |v| v * PF),
            self.direction_codebook.delta_pf.map_or(defaults.dpic, |v| v * PF),
        )
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("carrier_hz", self.carrier_hz),
            ("z0_ohm", self.z0_ohm),
            ("bandwidth_hz", self.bandwidth_hz),
            ("coherence_s", self.coherence_s),
            ("reconfig_s", self.reconfig_s),
            ("feedback_rate_bps_per_hz", self.feedback_rate_bps_per_hz),
            ("ue_radius_m", self.ue_radius_m),
            ("bs_spacing_wavelengths", self.bs_spacing_wavelengths),
            ("irs_spacing_wavelengths", self.irs_spacing_wavelengths),
            ("training.epsilon_floor_divisor", self.training.epsilon_floor_divisor),
        ] {
            positive(name, v)?;
        }
        if !(self.power_dbm.is_finite() && self.noise_dbm.is_finite()) {
            return Err(Error::config("power_dbm and noise_dbm must be finite"));
        }
        if !(self.c_min_pf > 0.0) {
            return Err(Error::config(format!("c_min_pf must be positive, got {}", self.c_min_pf)));
        }
        self.bounds()?;
        self.steps()?;
        for (name, v) in [
            ("n_bs", self.n_bs),
            ("n_irs", self.n_irs),
            ("n_groups", self.n_groups),
            ("n_paths", self.n_paths),
            ("direction_codebook.k", self.direction_codebook.k),
            ("training.timesteps", self.training.timesteps),
            ("training.n_agents", self.training.n_agents),
            ("training.batch_size", self.training.batch_size),
            ("training.buffer_capacity", self.training.buffer_capacity),
            ("training.moving_average", self.training.moving_average),
            ("utilization.episodes", self.utilization.episodes),
            ("utilization.timesteps", self.utilization.timesteps),
            ("utilization.m", self.utilization.m),
        ] {
            at_least_one(name, v)?;
        }
        if self.training.hidden.contains(&0) {
            return Err(Error::config("training.hidden layer widths must be at least 1"));
        }
        let t = &self.training;
        if !(0.0..=1.0).contains(&t.gamma) || !(0.0..=1.0).contains(&t.tau) || !(0.0..=1.0).contains(&t.epsilon_decay) {
            return Err(Error::config("training.gamma, training.tau and training.epsilon_decay must lie in [0, 1]"));
        }
        positive("training.actor_lr", t.actor_lr)?;
        positive("training.critic_lr", t.critic_lr)?;
        if let Some(eps) = t.epsilon0_f {
            if !(eps >= 0.0) {
                return Err(Error::config(format!("training.epsilon0_f must be non-negative, got {eps}")));
            }
        }
        if !(t.nu_per_hz >= 0.0) {
            return Err(Error::config("training.nu_per_hz must be non-negative"));
        }
        let mut ms = self.utilization.m_values.clone();
        ms.push(self.utilization.m);
        for m in ms {
            at_least_one("utilization.m_values", m)?;
            if self.reconfig_s * m as f64 >= self.coherence_s {
                return Err(Error::config(format!(
                    "M = {m} reconfigurations of {} s do not fit the coherence time {} s",
                    self.reconfig_s, self.coherence_s
                )));
            }
        }
        self.channel_config().validate()?;
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    pub fn channel_config(&self) -> ChannelConfig {
        let lambda = self.wavelength();
        ChannelConfig {
            n_bs: self.n_bs,
            n_irs: self.n_irs,
            n_groups: self.n_groups,
            n_paths: self.n_paths,
            rician_k: self.rician_k,
            ple_ib: self.ple_irs_bs,
            ple_ub: self.ple_ue_bs,
            ple_ui: self.ple_ue_irs,
            rho: self.rho,
            angle_drift_deg: self.angle_drift_deg,
            wavelength: lambda,
            d_bs: self.bs_spacing_wavelengths * lambda,
            d_irs: self.irs_spacing_wavelengths * lambda,
            bs_pos: self.bs_pos_m,
            irs_pos: self.irs_pos_m,
            bs_boresight_deg: self.bs_boresight_deg,
            irs_boresight_deg: self.irs_boresight_deg,
            ue_center: self.ue_center_m,
            ue_radius: self.ue_radius_m,
            ue_speed: self.ue_speed_kmh / 3.6,
        }
    }

    pub fn train_config(&self, bounds: &CapacitanceBounds) -> Result<TrainConfig> {
        let t = &self.training;
        let eps0 = t.epsilon0_f.unwrap_or(bounds.width() / 5.0);
        Ok(TrainConfig {
            episodes: t.episodes,
            timesteps: t.timesteps,
            n_agents: t.n_agents,
            hidden: t.hidden.clone(),
            hyper: DdpgHyper {
                gamma: t.gamma,
                tau: t.tau,
                actor_lr: t.actor_lr,
                critic_lr: t.critic_lr,
                batch_size: t.batch_size,
            },
            buffer_capacity: t.buffer_capacity,
            noise: NoiseSchedule::new(eps0, eps0 / t.epsilon_floor_divisor, t.epsilon_decay)?,
            noise_mode: t.noise_mode,
            nu: t.nu_per_hz * self.bandwidth_hz,
        })
    }
}

/// A validated configuration together with everything derived from it in
/// linear units.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub scenario: Scenario,
    pub directions: DirectionCodebook,
    pub train: TrainConfig,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let profile = match &config.profile {
            Some(path) => CircuitProfile::load_csv(path, config.z0_ohm, config.carrier_hz)?,
            None => CircuitProfile::placeholder(config.carrier_hz).with_carrier(config.z0_ohm, config.carrier_hz)?,
        };
        let bounds = config.bounds()?;
        let steps = config.steps()?;
        let scenario = Scenario {
            channel: config.channel_config(),
            profile,
            budget: LinkBudget::new(
                dbm_to_watts(config.power_dbm),
                dbm_to_watts(config.noise_dbm),
                config.bandwidth_hz,
            )?,
            timings: Timings::new(config.coherence_s, config.reconfig_s, config.feedback_rate_bps_per_hz)?,
            bounds,
            steps,
        };
        let dc = &config.direction_codebook;
        let directions = DirectionCodebook::generate(dc.k, config.n_groups, steps.dpic, dc.seed)?;
        let train = config.train_config(&bounds)?;
        Ok(Self {
            config,
            scenario,
            directions,
            train,
        })
    }

    /// Feedback bits per entry of the direction codebook.
    pub fn direction_bits(&self) -> u64 {
        ceil_log2(self.directions.len() as u64)
    }
}

/// Read, default-fill and validate a JSON config. A relative profile path is
/// taken relative to the config file.
pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
    let mut cfg = ExperimentConfig::from_json_str(&text)
        .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
    if let Some(p) = cfg.profile.as_mut() {
        if p.is_relative() {
            if let Some(dir) = path.parent() {
                *p = dir.join(&*p);
            }
        }
    }
    Ok(cfg)
}
