//! Varactor meta-atom reflection physics.
//!
//! Each meta-atom is an equivalent circuit: a top layer (series `R_T`, `L_T`,
//! `C_T` and the tunable varactor `C`) in parallel with the bottom-layer
//! inductance `L_B`. The circuit parameters depend on the azimuth incident
//! angle and are tabulated in a [`CircuitProfile`]. The reflection
//! coefficient follows from the impedance step against free space.
//!
//! All quantities are SI internally. The profile CSV uses nH / pF.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Free-space wave impedance in ohms.
pub const FREE_SPACE_IMPEDANCE: f64 = 376.73;

/// Denominator magnitude below which the impedance is treated as singular.
const SINGULARITY_EPS: f64 = 1e-12;

const PROFILE_HEADER: [&str; 5] = ["theta_deg", "L_T_nH", "C_T_pF", "R_T_ohm", "L_B_nH"];

/// Equivalent-circuit parameters at one incident angle (SI units).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircuitParams {
    pub l_top: f64,
    pub c_top: f64,
    pub r_top: f64,
    pub l_bottom: f64,
}

impl CircuitParams {
    fn lerp(&self, other: &CircuitParams, t: f64) -> CircuitParams {
        let mix = |a: f64, b: f64| a + (b - a) * t;
        CircuitParams {
            l_top: mix(self.l_top, other.l_top),
            c_top: mix(self.c_top, other.c_top),
            r_top: mix(self.r_top, other.r_top),
            l_bottom: mix(self.l_bottom, other.l_bottom),
        }
    }

    fn validate(&self, theta_deg: f64) -> Result<()> {
        let ok = self.l_top > 0.0
            && self.c_top > 0.0
            && self.r_top >= 0.0
            && self.l_bottom > 0.0
            && [self.l_top, self.c_top, self.r_top, self.l_bottom]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!(
                "invalid circuit parameters at theta = {theta_deg} deg: {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircuitSample {
    pub theta_deg: f64,
    pub params: CircuitParams,
}

/// Angle-dependent circuit parameters plus the free-space impedance and
/// carrier frequency they are evaluated at.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitProfile {
    samples: Vec<CircuitSample>,
    z0: f64,
    freq_hz: f64,
}

impl CircuitProfile {
    pub fn new(samples: Vec<CircuitSample>, z0: f64, freq_hz: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::config("circuit profile has no samples"));
        }
        if !(z0 > 0.0 && z0.is_finite()) {
            return Err(Error::config(format!("Z0 must be positive, got {z0}")));
        }
        if !(freq_hz > 0.0 && freq_hz.is_finite()) {
            return Err(Error::config(format!("frequency must be positive, got {freq_hz}")));
        }
        for s in &samples {
            if !(0.0..=90.0).contains(&s.theta_deg) {
                return Err(Error::config(format!(
                    "profile angle {} outside [0, 90] deg",
                    s.theta_deg
                )));
            }
            s.params.validate(s.theta_deg)?;
        }
        for w in samples.windows(2) {
            if w[1].theta_deg <= w[0].theta_deg {
                return Err(Error::config(format!(
                    "profile angles must be strictly increasing ({} then {})",
                    w[0].theta_deg, w[1].theta_deg
                )));
            }
        }
        Ok(Self { samples, z0, freq_hz })
    }

    /// Placeholder profile shipped with the simulator.
    ///
    /// These values are not measured data. They were picked so the varactor
    /// range [0.4, 2.7] pF crosses the parallel resonance at 5.195 GHz at
    /// every tabulated angle (phase coverage near 320 degrees), with the phase
    /// spread fairly evenly over the range rather than packed into a narrow
    /// resonance, and drifting mildly with incident angle. Supply a measured
    /// profile with `CircuitProfile::load_csv` for realistic results.
    pub fn placeholder(freq_hz: f64) -> Self {
        let sample = |theta_deg, l_t_nh: f64, c_t_pf: f64, r_t, l_b_nh: f64| CircuitSample {
            theta_deg,
            params: CircuitParams {
                l_top: l_t_nh * 1e-9,
                c_top: c_t_pf * 1e-12,
                r_top: r_t,
                l_bottom: l_b_nh * 1e-9,
            },
        };
        let samples = vec![
            sample(0.0, 0.8, 0.8, 0.5, 1.0),
            sample(45.0, 0.85, 0.78, 0.6, 0.98),
            sample(90.0, 0.9, 0.75, 0.7, 0.95),
        ];
        Self::new(samples, FREE_SPACE_IMPEDANCE, freq_hz).expect("placeholder profile is valid")
    }

    pub fn samples(&self) -> &[CircuitSample] {
        &self.samples
    }

    pub fn z0(&self) -> f64 {
        self.z0
    }

    pub fn freq_hz(&self) -> f64 {
        self.freq_hz
    }

    pub fn omega(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.freq_hz
    }

    /// Same circuit table evaluated at a different carrier or free-space impedance.
    pub fn with_carrier(&self, z0: f64, freq_hz: f64) -> Result<Self> {
        Self::new(self.samples.clone(), z0, freq_hz)
    }

    /// Piecewise-linear in theta, constant beyond the first and last samples.
    pub fn interpolate(&self, theta_deg: f64) -> Result<CircuitParams> {
        check_angle(theta_deg)?;
        let first = &self.samples[0];
        let last = &self.samples[self.samples.len() - 1];
        if theta_deg <= first.theta_deg {
            return Ok(first.params);
        }
        if theta_deg >= last.theta_deg {
            return Ok(last.params);
        }
        // first index with sample angle > theta; theta is strictly inside the table
        let hi = self.samples.partition_point(|s| s.theta_deg <= theta_deg);
        let (a, b) = (&self.samples[hi - 1], &self.samples[hi]);
        if a.theta_deg == theta_deg {
            return Ok(a.params);
        }
        let t = (theta_deg - a.theta_deg) / (b.theta_deg - a.theta_deg);
        Ok(a.params.lerp(&b.params, t))
    }

    pub fn load_csv(path: impl AsRef<Path>, z0: f64, freq_hz: f64) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(file, z0, freq_hz)
    }

    /// Strict parse of `theta_deg,L_T_nH,C_T_pF,R_T_ohm,L_B_nH`.
    pub fn from_csv<R: Read>(reader: R, z0: f64, freq_hz: f64) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers()?.clone();
        if header.iter().ne(PROFILE_HEADER.iter().copied()) {
            return Err(Error::config(format!(
                "profile header must be `{}`, got `{}`",
                PROFILE_HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut samples = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            let mut vals = [0.0; 5];
            for (i, v) in vals.iter_mut().enumerate() {
                let field = record.get(i).unwrap_or("");
                *v = field.parse::<f64>().map_err(|_| {
                    Error::config(format!("profile row {}: bad number `{field}`", line + 1))
                })?;
                if !v.is_finite() {
                    return Err(Error::config(format!(
                        "profile row {}: non-finite value in `{}`",
                        line + 1,
                        PROFILE_HEADER[i]
                    )));
                }
            }
            samples.push(CircuitSample {
                theta_deg: vals[0],
                params: CircuitParams {
                    l_top: vals[1] * 1e-9,
                    c_top: vals[2] * 1e-12,
                    r_top: vals[3],
                    l_bottom: vals[4] * 1e-9,
                },
            });
        }
        Self::new(samples, z0, freq_hz)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(PROFILE_HEADER)?;
        for s in &self.samples {
            w.write_record(&[
                s.theta_deg.to_string(),
                (s.params.l_top * 1e9).to_string(),
                (s.params.c_top * 1e12).to_string(),
                s.params.r_top.to_string(),
                (s.params.l_bottom * 1e9).to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<profile csv>", e))?;
        Ok(())
    }
}

fn check_angle(theta_deg: f64) -> Result<()> {
    if (0.0..=90.0).contains(&theta_deg) {
        Ok(())
    } else {
        Err(Error::config(format!("incident angle {theta_deg} outside [0, 90] deg")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacitanceBounds {
    pub c_min: f64,
    pub c_max: f64,
}

impl CapacitanceBounds {
    pub fn new(c_min: f64, c_max: f64) -> Result<Self> {
        if !(c_min > 0.0 && c_min < c_max && c_max.is_finite()) {
            return Err(Error::config(format!(
                "capacitance bounds need 0 < c_min < c_max (c_min = {c_min:e}, c_max = {c_max:e})"
            )));
        }
        Ok(Self { c_min, c_max })
    }

    pub fn width(&self) -> f64 {
        self.c_max - self.c_min
    }

    pub fn clip(&self, c: f64) -> f64 {
        c.clamp(self.c_min, self.c_max)
    }

    pub fn contains(&self, c: f64) -> bool {
        (self.c_min..=self.c_max).contains(&c)
    }
}

/// One capacitance per control group, in farads.
#[derive(Debug, Clone, PartialEq)]
pub struct Codeword(pub Vec<f64>);

impl Codeword {
    pub fn new(values: Vec<f64>) -> Self {
        Codeword(values)
    }

    pub fn uniform(value: f64, n_groups: usize) -> Self {
        Codeword(vec![value; n_groups])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn within(&self, bounds: &CapacitanceBounds) -> bool {
        self.0.iter().all(|&c| bounds.contains(c))
    }
}

/// Meta-atom impedance Z(C, theta).
pub fn impedance(c: f64, theta_deg: f64, profile: &CircuitProfile) -> Result<Complex64> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::config(format!("capacitance must be positive, got {c:e}")));
    }
    let p = profile.interpolate(theta_deg)?;
    let w = profile.omega();
    let j = Complex64::i();
    let bottom = j * w * p.l_bottom;
    let top = Complex64::new(p.r_top, 0.0) + j * w * p.l_top
        + 1.0 / (j * w * p.c_top)
        + 1.0 / (j * w * c);
    let denom = bottom + top;
    if denom.norm() < SINGULARITY_EPS {
        return Err(Error::Singularity {
            capacitance: c,
            theta_deg,
        });
    }
    Ok(bottom * top / denom)
}

/// Reflection coefficient for a given impedance against `z0`.
pub fn reflection_from_impedance(z: Complex64, z0: f64, c: f64, theta_deg: f64) -> Result<Complex64> {
    let denom = z + z0;
    if denom.norm() == 0.0 {
        return Err(Error::Singularity {
            capacitance: c,
            theta_deg,
        });
    }
    Ok((z - z0) / denom)
}

/// Gamma(C, theta) = (Z - Z0) / (Z + Z0).
pub fn reflection_coefficient(c: f64, theta_deg: f64, profile: &CircuitProfile) -> Result<Complex64> {
    let z = impedance(c, theta_deg, profile)?;
    reflection_from_impedance(z, profile.z0(), c, theta_deg)
}

/// Contiguous-block group expansion: group g drives meta-atoms
/// `g*n_irs/n_g .. (g+1)*n_irs/n_g`.
pub fn expand_groups(q: &Codeword, n_irs: usize, n_g: usize) -> Result<Vec<f64>> {
    let block = group_block(n_irs, n_g)?;
    if q.len() != n_g {
        return Err(Error::config(format!(
            "codeword has {} entries, expected {n_g} groups",
            q.len()
        )));
    }
    Ok(q.values()
        .iter()
        .flat_map(|&c| std::iter::repeat_n(c, block))
        .collect())
}

pub(crate) fn group_block(n_irs: usize, n_g: usize) -> Result<usize> {
    if n_g == 0 || n_irs == 0 || n_irs % n_g != 0 {
        return Err(Error::config(format!(
            "group count {n_g} must divide meta-atom count {n_irs}"
        )));
    }
    Ok(n_irs / n_g)
}

/// Reflection coefficient of each group at one incident angle.
pub fn group_reflections(q: &Codeword, theta_deg: f64, profile: &CircuitProfile) -> Result<Vec<Complex64>> {
    q.values()
        .iter()
        .map(|&c| reflection_coefficient(c, theta_deg, profile))
        .collect()
}

/// Diagonal of the reflection matrix Phi(c, theta) for the full surface.
pub fn reflection_vector(
    q: &Codeword,
    theta_deg: f64,
    profile: &CircuitProfile,
    n_irs: usize,
    n_g: usize,
) -> Result<Vec<Complex64>> {
    let block = group_block(n_irs, n_g)?;
    if q.len() != n_g {
        return Err(Error::config(format!(
            "codeword has {} entries, expected {n_g} groups",
            q.len()
        )));
    }
    let per_group = group_reflections(q, theta_deg, profile)?;
    Ok(per_group
        .into_iter()
        .flat_map(|g| std::iter::repeat_n(g, block))
        .collect())
}

/// One point of the attenuation/phase map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaPoint {
    pub capacitance: f64,
    pub theta_deg: f64,
    pub gamma: Complex64,
}

/// Gamma over an `n_c` x `n_theta` grid spanning the capacitance bounds and [0, 90] deg.
pub fn gamma_grid(
    profile: &CircuitProfile,
    bounds: &CapacitanceBounds,
    n_c: usize,
    n_theta: usize,
) -> Result<Vec<GammaPoint>> {
    let n_c = n_c.max(2);
    let n_theta = n_theta.max(2);
    let mut out = Vec::with_capacity(n_c * n_theta);
    for i in 0..n_theta {
        let theta_deg = 90.0 * i as f64 / (n_theta - 1) as f64;
        for k in 0..n_c {
            let capacitance = bounds.c_min + bounds.width() * k as f64 / (n_c - 1) as f64;
            let gamma = reflection_coefficient(capacitance, theta_deg, profile)?;
            out.push(GammaPoint {
                capacitance,
                theta_deg,
                gamma,
            });
        }
    }
    Ok(out)
}

/// Span (max - min, degrees) of the unwrapped phase of Gamma as C sweeps the bounds.
pub fn phase_span_deg(
    profile: &CircuitProfile,
    bounds: &CapacitanceBounds,
    theta_deg: f64,
    steps: usize,
) -> Result<f64> {
    let steps = steps.max(2);
    let mut prev: Option<f64> = None;
    let mut unwrapped = 0.0;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for k in 0..steps {
        let c = bounds.c_min + bounds.width() * k as f64 / (steps - 1) as f64;
        let phase = reflection_coefficient(c, theta_deg, profile)?.arg();
        unwrapped = match prev {
            None => phase,
            Some(p) => {
                let mut d = phase - p;
                while d > std::f64::consts::PI {
                    d -= 2.0 * std::f64::consts::PI;
                }
                while d < -std::f64::consts::PI {
                    d += 2.0 * std::f64::consts::PI;
                }
                unwrapped + d
            }
        };
        prev = Some(phase);
        lo = lo.min(unwrapped);
        hi = hi.max(unwrapped);
    }
    Ok((hi - lo).to_degrees())
}
