#![allow(dead_code)]

pub mod run;
pub mod toy;
