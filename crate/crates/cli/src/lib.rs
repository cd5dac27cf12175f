pub mod config;
pub mod diff;
pub mod error;
pub mod experiments;
pub mod output;
