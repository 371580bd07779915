// SPDX-License-Identifier: Apache-2.0

pub mod benchmarks;
pub mod checker;
pub mod intrusion;
pub mod netlist;
pub mod pipeline;
pub mod sidechannel;
pub mod statespace;
pub mod techmodel;
