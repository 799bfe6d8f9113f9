#![allow(dead_code)]

pub mod glmm_sim;
pub mod pipeline;
