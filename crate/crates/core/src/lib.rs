#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod energy;
pub mod error;
pub mod geometry;
pub mod grouping;
pub mod report;
pub mod rf_link;
pub mod scenario;
pub mod trajectory;
