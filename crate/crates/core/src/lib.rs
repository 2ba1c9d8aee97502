#![no_std]
#![doc = "Cycle-memory amortized inference: chain complexes, persistence, cycle memory and the episode engine."]

extern crate alloc;
#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod chain;
pub mod engine;
pub mod eval;
pub mod gf2;
pub mod memory;
pub mod persistence;
pub mod rng;
pub mod tasks;
pub mod vecops;
