//! Multi-path geometric channels for the UE-BS, IRS-BS and UE-IRS links.
//!
//! Both arrays are uniform linear arrays in azimuth. Angles are measured from
//! each array's boresight (normal), positive counter-clockwise.
//!
//! * UE-BS: `L` NLoS paths, `sqrt(PL/L) * sum beta_l a_BS(phi_l)`.
//! * IRS-BS: Rician. A geometric LoS dyad plus `L` NLoS dyads scaled by
//!   `1/sqrt(L)`.
//! * UE-IRS: `L` NLoS paths, each `sqrt(PL/L) beta_l a_IRS(theta_l)` with its
//!   own incident angle `theta_l` in [0, 90] deg.
//!
//! Small-scale gains follow a first-order Gauss-Markov process between
//! coherence blocks; the LoS dyad does not fade.

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::metaatom::{group_block, CircuitProfile, Codeword};
use crate::rng::{complex_normal, uniform};

/// Reference distance of the log-distance path-loss model, meters.
pub const REFERENCE_DISTANCE: f64 = 1.0;

/// Anything that maps (capacitance, incident angle) to a reflection coefficient.
pub trait Reflector {
    fn reflect(&self, capacitance: f64, theta_deg: f64) -> Result<Complex64>;
}

impl Reflector for CircuitProfile {
    fn reflect(&self, capacitance: f64, theta_deg: f64) -> Result<Complex64> {
        crate::metaatom::reflection_coefficient(capacitance, theta_deg, self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    pub n_bs: usize,
    pub n_irs: usize,
    pub n_groups: usize,
    pub n_paths: usize,
    pub rician_k: f64,
    pub ple_ib: f64,
    pub ple_ub: f64,
    pub ple_ui: f64,
    pub rho: f64,
    pub angle_drift_deg: f64,
    pub wavelength: f64,
    pub d_bs: f64,
    pub d_irs: f64,
    pub bs_pos: [f64; 2],
    pub irs_pos: [f64; 2],
    pub bs_boresight_deg: f64,
    pub irs_boresight_deg: f64,
    pub ue_center: [f64; 2],
    pub ue_radius: f64,
    pub ue_speed: f64,
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_bs == 0 || self.n_irs == 0 || self.n_paths == 0 {
            return Err(Error::config("N_BS, N_IRS and path count must be >= 1"));
        }
        group_block(self.n_irs, self.n_groups)?;
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::config(format!("rho = {} outside [0, 1]", self.rho)));
        }
        if !(self.rician_k >= 0.0) || self.angle_drift_deg < 0.0 || self.ue_speed < 0.0 || self.ue_radius < 0.0 {
            return Err(Error::config("K-factor, angle drift, UE speed and radius must be >= 0"));
        }
        if !(self.d_bs > 0.0 && self.d_irs > 0.0 && self.wavelength > 0.0) {
            return Err(Error::config("array spacings and wavelength must be positive"));
        }
        let finite = self
            .bs_pos
            .iter()
            .chain(&self.irs_pos)
            .chain(&self.ue_center)
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::config("positions must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub bs_pos: [f64; 2],
    pub irs_pos: [f64; 2],
    pub ue_pos: [f64; 2],
    pub ue_speed: f64,
    pub ue_heading: f64,
    pub d_bs: f64,
    pub d_irs: f64,
    pub wavelength: f64,
}

impl Geometry {
    pub fn advance(&mut self, dt: f64) {
        let step = self.ue_speed * dt;
        self.ue_pos[0] += step * self.ue_heading.cos();
        self.ue_pos[1] += step * self.ue_heading.sin();
    }
}

/// Per-path complex gains and angles for one link.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    pub gains: Vec<Complex64>,
    /// Arrival angle at the receiving array (the incident angle for UE-IRS).
    pub arrival_deg: Vec<f64>,
    /// Departure angle at the transmitting array; empty for single-antenna transmitters.
    pub departure_deg: Vec<f64>,
}

impl PathSet {
    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState {
    pub config: ChannelConfig,
    pub geometry: Geometry,
    pub ub_paths: PathSet,
    pub ib_paths: PathSet,
    pub ui_paths: PathSet,
    pub pl_ub: f64,
    pub pl_ib: f64,
    pub pl_ui: f64,
    /// Direct UE-BS channel, length N_BS.
    pub h_ub: Vec<Complex64>,
    /// IRS-BS channel, N_BS x N_IRS.
    pub h_ib: Array2<Complex64>,
    /// Per-path UE-IRS channels, each length N_IRS.
    pub h_ui: Vec<Vec<Complex64>>,
}

/// ULA response: entry k is exp(-j 2 pi k spacing sin(angle) / wavelength).
pub fn array_response(n: usize, spacing: f64, angle_deg: f64, wavelength: f64) -> Vec<Complex64> {
    let phase = -2.0 * std::f64::consts::PI * spacing * angle_deg.to_radians().sin() / wavelength;
    (0..n)
        .map(|k| Complex64::from_polar(1.0, phase * k as f64))
        .collect()
}

/// Log-distance power gain anchored at free space at 1 m.
pub fn path_loss(distance: f64, ple: f64, wavelength: f64) -> f64 {
    let d = if distance < REFERENCE_DISTANCE {
        log::warn!("distance {distance} m below reference distance, clamped to {REFERENCE_DISTANCE} m");
        REFERENCE_DISTANCE
    } else {
        distance
    };
    let anchor = wavelength / (4.0 * std::f64::consts::PI * REFERENCE_DISTANCE);
    anchor * anchor * (REFERENCE_DISTANCE / d).powf(ple)
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Angle of `to` seen from `from`, relative to a boresight azimuth, in (-180, 180].
fn relative_angle_deg(from: [f64; 2], to: [f64; 2], boresight_deg: f64) -> f64 {
    let az = (to[1] - from[1]).atan2(to[0] - from[0]).to_degrees();
    let mut rel = az - boresight_deg;
    while rel > 180.0 {
        rel -= 360.0;
    }
    while rel <= -180.0 {
        rel += 360.0;
    }
    rel
}

impl ChannelState {
    /// LoS arrival angle at the BS and departure angle at the IRS.
    pub fn los_angles(&self) -> (f64, f64) {
        let g = &self.geometry;
        (
            relative_angle_deg(g.bs_pos, g.irs_pos, self.config.bs_boresight_deg),
            relative_angle_deg(g.irs_pos, g.bs_pos, self.config.irs_boresight_deg),
        )
    }

    /// Pure LoS dyad of the IRS-BS link without path loss.
    pub fn los_dyad(&self) -> Array2<Complex64> {
        let (arr, dep) = self.los_angles();
        let g = &self.geometry;
        let a_bs = array_response(self.config.n_bs, g.d_bs, arr, g.wavelength);
        let a_irs = array_response(self.config.n_irs, g.d_irs, dep, g.wavelength);
        outer(&a_bs, &a_irs)
    }

    fn update_path_losses(&mut self) {
        let c = &self.config;
        let g = &self.geometry;
        self.pl_ub = path_loss(distance(g.ue_pos, g.bs_pos), c.ple_ub, g.wavelength);
        self.pl_ib = path_loss(distance(g.irs_pos, g.bs_pos), c.ple_ib, g.wavelength);
        self.pl_ui = path_loss(distance(g.ue_pos, g.irs_pos), c.ple_ui, g.wavelength);
    }

    /// Recompute the channel vectors and matrix from paths and path losses.
    fn rebuild(&mut self) {
        let c = &self.config;
        let g = &self.geometry;

        let l_ub = self.ub_paths.len() as f64;
        let scale_ub = (self.pl_ub / l_ub).sqrt();
        let mut h_ub = vec![Complex64::new(0.0, 0.0); c.n_bs];
        for (beta, &phi) in self.ub_paths.gains.iter().zip(&self.ub_paths.arrival_deg) {
            let a = array_response(c.n_bs, g.d_bs, phi, g.wavelength);
            for (h, a) in h_ub.iter_mut().zip(a) {
                *h += beta * a * scale_ub;
            }
        }

        let k = c.rician_k;
        let (los_w, nlos_w) = if k.is_infinite() {
            (1.0, 0.0)
        } else {
            ((k / (k + 1.0)).sqrt(), (1.0 / (k + 1.0)).sqrt())
        };
        let l_ib = self.ib_paths.len() as f64;
        let mut h_ib = self.los_dyad() * Complex64::new(los_w, 0.0);
        let nlos_scale = nlos_w / l_ib.sqrt();
        for ((beta, &arr), &dep) in self
            .ib_paths
            .gains
            .iter()
            .zip(&self.ib_paths.arrival_deg)
            .zip(&self.ib_paths.departure_deg)
        {
            let a_bs = array_response(c.n_bs, g.d_bs, arr, g.wavelength);
            let a_irs = array_response(c.n_irs, g.d_irs, dep, g.wavelength);
            let w = beta * nlos_scale;
            for (b, ab) in a_bs.iter().enumerate() {
                for (n, ai) in a_irs.iter().enumerate() {
                    h_ib[[b, n]] += w * ab * ai;
                }
            }
        }
        h_ib.mapv_inplace(|v| v * self.pl_ib.sqrt());

        let l_ui = self.ui_paths.len() as f64;
        let scale_ui = (self.pl_ui / l_ui).sqrt();
        let h_ui = self
            .ui_paths
            .gains
            .iter()
            .zip(&self.ui_paths.arrival_deg)
            .map(|(beta, &theta)| {
                array_response(c.n_irs, g.d_irs, theta, g.wavelength)
                    .into_iter()
                    .map(|a| beta * a * scale_ui)
                    .collect()
            })
            .collect();

        self.h_ub = h_ub;
        self.h_ib = h_ib;
        self.h_ui = h_ui;
    }

    /// Draw a fresh channel: UE position uniform in the configured disc,
    /// heading uniform in [0, 2 pi), all NLoS gains CN(0, 1).
    pub fn sample_initial<R: Rng + ?Sized>(config: &ChannelConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let r = config.ue_radius * rng.random::<f64>().sqrt();
        let a = uniform(rng, 0.0, 2.0 * std::f64::consts::PI);
        let ue_pos = [config.ue_center[0] + r * a.cos(), config.ue_center[1] + r * a.sin()];
        let ue_heading = uniform(rng, 0.0, 2.0 * std::f64::consts::PI);
        let geometry = Geometry {
            bs_pos: config.bs_pos,
            irs_pos: config.irs_pos,
            ue_pos,
            ue_speed: config.ue_speed,
            ue_heading,
            d_bs: config.d_bs,
            d_irs: config.d_irs,
            wavelength: config.wavelength,
        };
        let l = config.n_paths;
        let draw_gains = |rng: &mut R| (0..l).map(|_| complex_normal(rng)).collect::<Vec<_>>();
        let ub_gains = draw_gains(rng);
        let ib_gains = draw_gains(rng);
        let ui_gains = draw_gains(rng);
        let sector = |rng: &mut R, lo: f64, hi: f64| (0..l).map(|_| uniform(rng, lo, hi)).collect::<Vec<_>>();
        let ub_arrival = sector(rng, -90.0, 90.0);
        let ib_arrival = sector(rng, -90.0, 90.0);
        let ib_departure = sector(rng, -90.0, 90.0);
        let ui_incident = sector(rng, 0.0, 90.0);

        let mut state = ChannelState {
            config: config.clone(),
            geometry,
            ub_paths: PathSet {
                gains: ub_gains,
                arrival_deg: ub_arrival,
                departure_deg: Vec::new(),
            },
            ib_paths: PathSet {
                gains: ib_gains,
                arrival_deg: ib_arrival,
                departure_deg: ib_departure,
            },
            ui_paths: PathSet {
                gains: ui_gains,
                arrival_deg: ui_incident,
                departure_deg: Vec::new(),
            },
            pl_ub: 0.0,
            pl_ib: 0.0,
            pl_ui: 0.0,
            h_ub: Vec::new(),
            h_ib: Array2::zeros((config.n_bs, config.n_irs)),
            h_ui: Vec::new(),
        };
        state.update_path_losses();
        state.rebuild();
        Ok(state)
    }

    /// Advance one coherence block of length `dt` seconds.
    pub fn evolve<R: Rng + ?Sized>(&mut self, dt: f64, rng: &mut R) {
        let rho = self.config.rho;
        let innovation = (1.0 - rho * rho).max(0.0).sqrt();
        for paths in [&mut self.ub_paths, &mut self.ib_paths, &mut self.ui_paths] {
            for beta in paths.gains.iter_mut() {
                let w = complex_normal(rng);
                *beta = *beta * rho + w * innovation;
            }
        }
        let drift = self.config.angle_drift_deg;
        let jitter = |rng: &mut R, angles: &mut [f64]| {
            for a in angles.iter_mut() {
                *a += uniform(rng, -drift, drift);
            }
        };
        jitter(rng, &mut self.ub_paths.arrival_deg);
        jitter(rng, &mut self.ib_paths.arrival_deg);
        jitter(rng, &mut self.ib_paths.departure_deg);
        jitter(rng, &mut self.ui_paths.arrival_deg);
        for theta in self.ui_paths.arrival_deg.iter_mut() {
            *theta = theta.clamp(0.0, 90.0);
        }
        self.geometry.advance(dt);
        self.update_path_losses();
        self.rebuild();
    }

    /// Compound channel h_ub + H_ib * sum_l Phi(q, theta_l) h_ui_l.
    pub fn effective_channel<F: Reflector + ?Sized>(&self, q: &Codeword, reflector: &F) -> Result<Vec<Complex64>> {
        let c = &self.config;
        let block = group_block(c.n_irs, c.n_groups)?;
        if q.len() != c.n_groups {
            return Err(Error::config(format!(
                "codeword has {} entries, expected {} groups",
                q.len(),
                c.n_groups
            )));
        }
        if self.h_ib.dim() != (c.n_bs, c.n_irs) || self.h_ub.len() != c.n_bs {
            return Err(Error::config("channel dimensions inconsistent with configuration"));
        }
        // reflected field at each meta-atom, summed over incident paths
        let mut field = vec![Complex64::new(0.0, 0.0); c.n_irs];
        let mut gammas = vec![Complex64::new(0.0, 0.0); c.n_groups];
        for (h_path, &theta) in self.h_ui.iter().zip(&self.ui_paths.arrival_deg) {
            if h_path.len() != c.n_irs {
                return Err(Error::config("UE-IRS path length differs from N_IRS"));
            }
            for (g, &cap) in gammas.iter_mut().zip(q.values()) {
                *g = reflector.reflect(cap, theta)?;
            }
            for (n, (f, h)) in field.iter_mut().zip(h_path).enumerate() {
                *f += gammas[n / block] * h;
            }
        }
        let mut h_eff = self.h_ub.clone();
        for (b, out) in h_eff.iter_mut().enumerate() {
            let row = self.h_ib.row(b);
            *out += row.iter().zip(&field).map(|(h, f)| h * f).sum::<Complex64>();
        }
        Ok(h_eff)
    }
}

fn outer(a: &[Complex64], b: &[Complex64]) -> Array2<Complex64> {
    Array2::from_shape_fn((a.len(), b.len()), |(i, j)| a[i] * b[j])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedTree;
    use approx::assert_relative_eq;

    pub(crate) fn small_config(n_bs: usize, n_irs: usize, n_groups: usize, n_paths: usize) -> ChannelConfig {
        let wavelength = 3e8 / 5.195e9;
        ChannelConfig {
            n_bs,
            n_irs,
            n_groups,
            n_paths,
            rician_k: 5.0,
            ple_ib: 2.0,
            ple_ub: 3.75,
            ple_ui: 2.2,
            rho: 0.95,
            angle_drift_deg: 0.1,
            wavelength,
            d_bs: wavelength / 2.0,
            d_irs: wavelength / 10.0,
            bs_pos: [0.0, 0.0],
            irs_pos: [90.0, 30.0],
            bs_boresight_deg: 0.0,
            irs_boresight_deg: -90.0,
            ue_center: [100.0, 0.0],
            ue_radius: 5.0,
            ue_speed: 3.0 / 3.6,
        }
    }

    struct Fixed(Complex64);
    impl Reflector for Fixed {
        fn reflect(&self, _c: f64, _t: f64) -> Result<Complex64> {
            Ok(self.0)
        }
    }

    #[test]
    fn array_response_basics() {
        let a = array_response(6, 0.03, 0.0, 0.0577);
        assert!(a.iter().all(|v| (*v - Complex64::new(1.0, 0.0)).norm() < 1e-15));
        assert_eq!(array_response(1, 0.03, 42.0, 0.0577), vec![Complex64::new(1.0, 0.0)]);
        for v in array_response(16, 0.011, 33.3, 0.0577) {
            assert_relative_eq!(v.norm(), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn path_loss_model() {
        let lambda = 3e8 / 5.195e9;
        let anchor = (lambda / (4.0 * std::f64::consts::PI)).powi(2);
        assert_relative_eq!(path_loss(1.0, 2.0, lambda), anchor, max_relative = 1e-15);
        assert_relative_eq!(path_loss(20.0, 2.0, lambda) / path_loss(40.0, 2.0, lambda), 4.0, max_relative = 1e-12);
        // (lambda / 4 pi)^2 * 10^-3.75 evaluated by hand
        let expected = anchor * 10f64.powf(-3.75);
        assert_relative_eq!(path_loss(10.0, 3.75, lambda), expected, max_relative = 1e-14);
        // clamped below the reference distance
        assert_eq!(path_loss(0.2, 2.0, lambda), anchor);
    }

    #[test]
    fn full_scale_dimensions() {
        let cfg = small_config(5, 200, 10, 10);
        let mut rng = SeedTree::new(1).stream("channel", 0);
        let s = ChannelState::sample_initial(&cfg, &mut rng).unwrap();
        assert_eq!(s.h_ub.len(), 5);
        assert_eq!(s.h_ib.dim(), (5, 200));
        assert_eq!(s.h_ui.len(), 10);
        assert!(s.h_ui.iter().all(|h| h.len() == 200));
        assert!(s.ui_paths.arrival_deg.iter().all(|t| (0.0..=90.0).contains(t)));
    }

    #[test]
    fn rician_limit_is_los() {
        let mut cfg = small_config(4, 16, 4, 10);
        cfg.rician_k = 1e9;
        let mut rng = SeedTree::new(2).stream("channel", 0);
        let s = ChannelState::sample_initial(&cfg, &mut rng).unwrap();
        let los = s.los_dyad().mapv(|v| v * s.pl_ib.sqrt());
        let diff: f64 = (&s.h_ib - &los).iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let norm: f64 = los.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        assert!(diff / norm < 1e-3, "{}", diff / norm);
    }

    #[test]
    fn degenerate_evolution_keeps_gains() {
        let mut cfg = small_config(2, 4, 2, 3);
        cfg.rho = 1.0;
        cfg.angle_drift_deg = 0.0;
        cfg.ue_speed = 0.0;
        let mut rng = SeedTree::new(3).stream("channel", 0);
        let mut s = ChannelState::sample_initial(&cfg, &mut rng).unwrap();
        let before = s.clone();
        s.evolve(5e-3, &mut rng);
        assert_eq!(s.ub_paths, before.ub_paths);
        assert_eq!(s.ui_paths, before.ui_paths);
        assert_eq!(s.h_ub, before.h_ub);
        assert_eq!(s.h_ib, before.h_ib);
    }

    #[test]
    fn angles_stay_clamped() {
        let mut cfg = small_config(2, 4, 2, 10);
        cfg.angle_drift_deg = 5.0;
        let mut rng = SeedTree::new(4).stream("channel", 0);
        let mut s = ChannelState::sample_initial(&cfg, &mut rng).unwrap();
        for _ in 0..2000 {
            s.evolve(5e-3, &mut rng);
            assert!(s.ui_paths.arrival_deg.iter().all(|t| (0.0..=90.0).contains(t)));
        }
    }

    #[test]
    fn matched_surface_leaves_direct_path() {
        let cfg = small_config(3, 8, 4, 4);
        let mut rng = SeedTree::new(5).stream("channel", 0);
        let s = ChannelState::sample_initial(&cfg, &mut rng).unwrap();
        let q = Codeword::uniform(1e-12, 4);
        let h = s.effective_channel(&q, &Fixed(Complex64::new(0.0, 0.0))).unwrap();
        assert_eq!(h, s.h_ub);
    }

    #[test]
    fn single_element_single_path() {
        let cfg = small_config(1, 1, 1, 1);
        let mut rng = SeedTree::new(6).stream("channel", 0);
        let s = ChannelState::sample_initial(&cfg, &mut rng).unwrap();
        let gamma = Complex64::new(0.3, -0.7);
        let h = s.effective_channel(&Codeword::uniform(1e-12, 1), &Fixed(gamma)).unwrap();
        let expected = s.h_ub[0] + s.h_ib[[0, 0]] * gamma * s.h_ui[0][0];
        assert!((h[0] - expected).norm() <= 1e-15 * expected.norm());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let cfg = small_config(2, 8, 4, 2);
        let mut rng = SeedTree::new(7).stream("channel", 0);
        let s = ChannelState::sample_initial(&cfg, &mut rng).unwrap();
        let prof = CircuitProfile::placeholder(5.195e9);
        assert!(s.effective_channel(&Codeword::uniform(1e-12, 3), &prof).is_err());
    }

    #[test]
    fn identical_seeds_identical_trajectories() {
        let cfg = small_config(2, 8, 4, 10);
        let run = || {
            let mut rng = SeedTree::new(9).stream("channel", 0);
            let mut s = ChannelState::sample_initial(&cfg, &mut rng).unwrap();
            for _ in 0..20 {
                s.evolve(5e-3, &mut rng);
            }
            s
        };
        assert_eq!(run(), run());
    }
}
