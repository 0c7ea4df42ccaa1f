//! Generators and independent oracles shared by the integration suites.
//! Nothing here calls into the code under test to decide an expected value.
#![allow(dead_code)]

pub mod api;
pub mod layout;
pub mod ops;
pub mod stats_oracle;

use std::sync::Arc;

use trove_core::clock::{Clock, StepClock, Timestamp};

pub fn clock() -> Arc<dyn Clock> {
    Arc::new(StepClock::new(Timestamp::from_millis(1_700_000_000_000), 7))
}
