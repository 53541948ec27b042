pub mod assertions;
pub mod cert;
pub mod cli;
pub mod exec;
mod jsonfmt;
pub mod rng;
pub mod sde;
pub mod syntax;
