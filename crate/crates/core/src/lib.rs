#![no_std]
extern crate alloc;

pub mod acc;
pub mod arclength;
pub mod bezier;
pub mod geometry;
pub mod lateral_planner;
pub mod sim;
pub mod spline;
pub mod stanley;
