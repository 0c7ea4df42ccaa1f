pub mod asset;
pub mod canonical;
pub mod capture;
pub mod clock;
pub mod model;
pub mod service;
pub mod stats;
pub mod store;
pub mod view;
