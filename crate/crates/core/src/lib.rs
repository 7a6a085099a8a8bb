//! Construction and evaluation of D- and A-optimal screening designs.

#![allow(clippy::needless_range_loop)]

pub mod cli;
pub mod criteria;
pub mod data;
pub mod diagnostics;
pub mod exchange;
pub mod io;
pub mod matrix;
pub mod model;
pub mod reproduce;
pub mod search;
