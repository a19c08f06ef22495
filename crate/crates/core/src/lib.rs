pub mod cgen;
pub mod cli;
pub mod dependence;
pub mod facts;
pub mod frontend;
pub mod oracle;
pub mod phase1;
pub mod phase2;
pub mod pipeline;
pub mod report;
pub mod symbolic;
pub mod validate;
