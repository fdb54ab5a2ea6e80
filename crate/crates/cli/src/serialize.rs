//! JSON wire formats for chain objects.
//!
//! A kernel sequence serializes as `{grid, m, n, kernels}` with row-major
//! matrices; decoding rebuilds bit-identical f64 values (serde_json emits
//! shortest round-trip decimals).

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use nhmc_core::kernel::{KernelSequence, StateGrid, StochasticKernel};
use nhmc_core::{ChainLaw, RewardFunctionArray};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct KernelSequenceDoc {
    pub grid: Vec<f64>,
    pub m: usize,
    pub n: usize,
    /// One row-major matrix per step.
    pub kernels: Vec<Vec<f64>>,
}

impl KernelSequenceDoc {
    pub fn from_seq(seq: &KernelSequence) -> Self {
        KernelSequenceDoc {
            grid: seq.grid().points().to_vec(),
            m: seq.lookahead(),
            n: seq.horizon(),
            kernels: seq.kernels().iter().map(|k| k.rows_flat().to_vec()).collect(),
        }
    }

    pub fn to_seq(&self) -> Result<KernelSequence, nhmc_core::Error> {
        let grid = Arc::new(StateGrid::new(self.grid.clone())?);
        let kernels = self
            .kernels
            .iter()
            .map(|rows| {
                StochasticKernel::new(Arc::clone(&grid), rows.clone()).map(Arc::new)
            })
            .collect::<Result<Vec<_>, _>>()?;
        KernelSequence::new(grid, kernels, self.n, self.m)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ChainLawDoc {
    pub initial: Vec<f64>,
    pub seq: KernelSequenceDoc,
}

impl ChainLawDoc {
    pub fn from_law(law: &ChainLaw) -> Self {
        ChainLawDoc {
            initial: law.initial().to_vec(),
            seq: KernelSequenceDoc::from_seq(law.seq()),
        }
    }

    pub fn to_law(&self) -> Result<ChainLaw, nhmc_core::Error> {
        ChainLaw::new(self.initial.clone(), self.seq.to_seq()?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RewardsDoc {
    pub horizon: usize,
    pub lookahead: usize,
    pub grid_len: usize,
    /// Effective (shift-applied) tensors, one per period.
    pub tensors: Vec<Vec<f64>>,
}

impl RewardsDoc {
    pub fn from_rewards(rewards: &RewardFunctionArray) -> Self {
        let tensors = (1..=rewards.horizon())
            .map(|i| {
                let shift = rewards.shifts()[i - 1];
                rewards.tensor(i).iter().map(|v| v - shift).collect()
            })
            .collect();
        RewardsDoc {
            horizon: rewards.horizon(),
            lookahead: rewards.lookahead(),
            grid_len: rewards.grid_len(),
            tensors,
        }
    }

    pub fn to_rewards(&self) -> Result<RewardFunctionArray, nhmc_core::Error> {
        RewardFunctionArray::from_dense(
            self.horizon,
            self.lookahead,
            self.grid_len,
            self.tensors.clone(),
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct InstanceBundleDoc {
    pub law: ChainLawDoc,
    pub rewards: RewardsDoc,
    pub provenance: String,
}

impl InstanceBundleDoc {
    pub fn from_bundle(bundle: &nhmc_core::fixtures::InstanceBundle) -> Self {
        InstanceBundleDoc {
            law: ChainLawDoc::from_law(&bundle.law),
            rewards: RewardsDoc::from_rewards(&bundle.rewards),
            provenance: bundle.provenance.to_string(),
        }
    }
}
