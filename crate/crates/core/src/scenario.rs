//! Everything physical about one experiment, bundled for the training and
//! utilization loops.

use crate::channel::ChannelConfig;
use crate::codebook::StepSizes;
use crate::metaatom::{CapacitanceBounds, CircuitProfile};
use crate::protocol::{LinkBudget, Timings};

#[derive(Debug, Clone)]
pub struct Scenario {
    pub channel: ChannelConfig,
    pub profile: CircuitProfile,
    pub budget: LinkBudget,
    pub timings: Timings,
    pub bounds: CapacitanceBounds,
    pub steps: StepSizes,
}

impl Scenario {
    pub fn n_bs(&self) -> usize {
        self.channel.n_bs
    }

    pub fn n_groups(&self) -> usize {
        self.channel.n_groups
    }
}
