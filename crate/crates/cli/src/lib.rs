pub mod config;
pub mod commands;
pub mod emit;
