pub mod config;
pub mod experiments;
pub mod formats;
pub mod output;
