pub mod quantum_demo;
pub mod sweep;
pub mod synthesize;
pub mod tm_recover;
