//! Checkpoints, mesh formats, reports, the `isoedit` command-line tool and
//! the HTTP editing service on top of `isoedit-core`.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod error;
pub mod mesh_io;
pub mod ops;
pub mod report;
pub mod service;
pub mod session;

pub use error::{AppError, AppResult};
