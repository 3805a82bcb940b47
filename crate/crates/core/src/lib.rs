//! Control synthesis for a noisy differential-drive vehicle against bounded
//! linear temporal logic missions.

pub mod bltl;
pub mod dynamics;
pub mod env;
pub mod tracegen;
pub mod presets;
pub mod uncertainty;
pub mod mdp;
pub mod seeding;
pub mod synthesis;
pub mod config;
