#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod json17;
pub mod mdp;
pub mod rau;
pub mod risk_q;
pub mod vehicle;
pub mod fcu;
pub mod sim;
