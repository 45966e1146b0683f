pub mod cluster;
pub mod dataset;
pub mod detection;
pub mod pipeline;
pub mod profile;
pub mod ranking;
pub mod viz;
