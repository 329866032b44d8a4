pub mod config;
pub mod conformance;
pub mod control_plane;
pub mod crypto;
pub mod dfl;
pub mod metrics;
pub mod privacy;
pub mod protocol;
pub mod scenario;
pub mod sim;
pub mod wire;
