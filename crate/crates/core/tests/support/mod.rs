#![allow(dead_code)]

pub mod completions;
pub mod fixtures;
pub mod raster;
