//! Independent checks shared by the integration tests and the acceptance run.
#![allow(dead_code)]

pub mod gradcheck;
pub mod identities;
pub mod oracle;
pub mod table;
