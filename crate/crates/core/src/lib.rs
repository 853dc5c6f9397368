#![no_std]
extern crate alloc;

pub mod conformal;
pub mod corrector;
pub mod euler_sim;
pub mod experiments;
pub mod fields;
pub mod geometry;
pub mod quadrature;
