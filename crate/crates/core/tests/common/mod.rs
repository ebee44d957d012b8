#![allow(dead_code)]

pub mod chebyshev;
