//! Scenario configuration, experiment presets and result export around the
//! `csk-core` engines. The `csksim` binary in this crate drives everything;
//! the library surface exists so integration tests exercise the same code.

pub mod config;
pub mod kcache;
pub mod output;
pub mod presets;
pub mod runners;
pub mod units;
