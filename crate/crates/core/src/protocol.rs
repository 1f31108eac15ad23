//! The per-coherence-block limited feedback protocol.
//!
//! 1. The IRS sounds every codeword of the current codebook, in codebook order.
//! 2. The BS measures each compound channel and picks the highest-rate index
//!    (lowest index on ties).
//! 3. The BS feeds back the index (plus one direction index per codeword for
//!    the DNN-policy scheme) and the IRS applies the chosen codeword, unless
//!    it is already the last one sounded.
//! 4. Data transmission fills the rest of the block; the codebook update is
//!    done by the caller.

use num_complex::Complex64;

use crate::channel::{ChannelState, Reflector};
use crate::error::{Error, Result};
use crate::metaatom::Codeword;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    /// Transmit power, watts.
    pub power: f64,
    /// Noise power, watts.
    pub noise: f64,
    /// Bandwidth, hertz.
    pub bandwidth: f64,
}

impl LinkBudget {
    pub fn new(power: f64, noise: f64, bandwidth: f64) -> Result<Self> {
        if !(power > 0.0 && noise > 0.0 && bandwidth > 0.0) {
            return Err(Error::config("P, sigma^2 and W must all be positive"));
        }
        Ok(Self {
            power,
            noise,
            bandwidth,
        })
    }

    pub fn snr(&self, h: &[Complex64]) -> f64 {
        self.power * h.iter().map(|v| v.norm_sqr()).sum::<f64>() / self.noise
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timings {
    /// Coherence time, seconds.
    pub coherence: f64,
    /// Time for one IRS reconfiguration, seconds.
    pub reconfig: f64,
    /// Spectral efficiency of the feedback link, bits/s/Hz.
    pub feedback_rate: f64,
}

impl Timings {
    pub fn new(coherence: f64, reconfig: f64, feedback_rate: f64) -> Result<Self> {
        if !(coherence > 0.0 && reconfig > 0.0 && feedback_rate > 0.0) {
            return Err(Error::config("T_c, T_reconf and R_feedback must be positive"));
        }
        if coherence <= reconfig {
            return Err(Error::config("T_c must exceed T_reconf"));
        }
        Ok(Self {
            coherence,
            reconfig,
            feedback_rate,
        })
    }
}

/// How the codebook is maintained, which fixes the feedback payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeedbackScheme {
    RandomAdjacency,
    Rvq,
    /// DNN-policy control with a direction codebook of `directions` entries.
    Dpic { directions: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockResult {
    /// 1-based index of the selected codeword.
    pub selected: usize,
    /// Data rate of the selected codeword, bits/s.
    pub rate: f64,
    /// Protocol time overhead T_p, seconds.
    pub overhead: f64,
    /// Rate discounted by the overhead, bits/s.
    pub effective_rate: f64,
    pub feedback_bits: u64,
    /// Rate of every sounded codeword, in codebook order.
    pub rates: Vec<f64>,
    /// Compound channel of every sounded codeword, in codebook order.
    pub channels: Vec<Vec<Complex64>>,
}

/// W log2(1 + P ||h||^2 / sigma^2).
pub fn data_rate(h_eff: &[Complex64], budget: &LinkBudget) -> f64 {
    budget.bandwidth * (1.0 + budget.snr(h_eff)).log2()
}

/// Ceiling of log2 for n >= 1, exact in integers.
pub fn ceil_log2(n: u64) -> u64 {
    assert!(n >= 1, "ceil_log2 of zero");
    n.next_power_of_two().trailing_zeros() as u64
}

pub fn feedback_bits(scheme: FeedbackScheme, codebook_size: usize) -> u64 {
    let index_bits = ceil_log2(codebook_size as u64);
    match scheme {
        FeedbackScheme::RandomAdjacency | FeedbackScheme::Rvq => index_bits,
        FeedbackScheme::Dpic { directions } => {
            index_bits + codebook_size as u64 * ceil_log2(directions as u64)
        }
    }
}

/// T_p = M T_reconf + T_feedback + T_final.
pub fn time_overhead(
    scheme: FeedbackScheme,
    codebook_size: usize,
    timings: &Timings,
    bandwidth: f64,
    final_reconfig: bool,
) -> Result<f64> {
    let bits = feedback_bits(scheme, codebook_size) as f64;
    let sounding = codebook_size as f64 * timings.reconfig;
    let feedback = bits / (bandwidth * timings.feedback_rate);
    let tail = if final_reconfig { timings.reconfig } else { 0.0 };
    let total = sounding + feedback + tail;
    if total >= timings.coherence {
        return Err(Error::Infeasible {
            codebook_size,
            overhead: total,
            coherence: timings.coherence,
        });
    }
    Ok(total)
}

/// ((T_c - T_p) / T_c) * rate, zero when the overhead eats the block.
pub fn effective_rate(rate: f64, coherence: f64, overhead: f64) -> f64 {
    if overhead >= coherence {
        log::warn!("time overhead {overhead:e} s >= coherence time {coherence:e} s, effective rate is zero");
        return 0.0;
    }
    (coherence - overhead) / coherence * rate
}

/// Index of the maximum rate, lowest index on ties (0-based).
pub fn argmax_first(rates: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &r) in rates.iter().enumerate() {
        match best {
            Some((_, b)) if r <= b => {}
            _ => best = Some((i, r)),
        }
    }
    best.map(|(i, _)| i)
}

pub struct Sounding {
    /// 1-based.
    pub selected: usize,
    pub rates: Vec<f64>,
    pub channels: Vec<Vec<Complex64>>,
}

/// Steps 1-2: sound every codeword and select the best.
pub fn sound_and_select<F: Reflector + ?Sized>(
    codebook: &[Codeword],
    state: &ChannelState,
    reflector: &F,
    budget: &LinkBudget,
) -> Result<Sounding> {
    if codebook.is_empty() {
        return Err(Error::config("codebook is empty"));
    }
    let channels = codebook
        .iter()
        .map(|q| state.effective_channel(q, reflector))
        .collect::<Result<Vec<_>>>()?;
    let rates: Vec<f64> = channels.iter().map(|h| data_rate(h, budget)).collect();
    let selected = argmax_first(&rates).expect("non-empty") + 1;
    Ok(Sounding {
        selected,
        rates,
        channels,
    })
}

/// Steps 1-3 for one coherence block.
pub fn run_block<F: Reflector + ?Sized>(
    codebook: &[Codeword],
    state: &ChannelState,
    reflector: &F,
    budget: &LinkBudget,
    timings: &Timings,
    scheme: FeedbackScheme,
) -> Result<BlockResult> {
    let sounding = sound_and_select(codebook, state, reflector, budget)?;
    let m = codebook.len();
    let final_reconfig = sounding.selected != m;
    let overhead = time_overhead(scheme, m, timings, budget.bandwidth, final_reconfig)?;
    let rate = sounding.rates[sounding.selected - 1];
    Ok(BlockResult {
        selected: sounding.selected,
        rate,
        overhead,
        effective_rate: effective_rate(rate, timings.coherence, overhead),
        feedback_bits: feedback_bits(scheme, m),
        rates: sounding.rates,
        channels: sounding.channels,
    })
}
