//! Simulation and analysis toolkit for a network of household freezers
//! monitored by battery-powered sensor nodes that report
//! storage conditions to an incentive lottery, plus genebank redundancy
//! analysis and replica placement.

pub mod config;
pub mod ledger;
pub mod node;
pub mod registry;
pub mod sim;
pub mod thermal;

pub use ledger::{EnterOutcome, Lottery, ValidityPolicy};
pub use node::{BatteryConfig, ChargeModel, DutyCycleConfig, PackedWord};
pub use sim::{SimConfig, SimSummary};
pub use thermal::{FreezerParams, FreezerState, Reading, SensorSpec};
