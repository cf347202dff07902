//! Concrete environments, behavior policies and offline data generation.

pub mod boltzmann;
pub mod collect;
pub mod hard;
pub mod mountain_car;
pub mod movielens;
pub mod nmf;
pub mod synthetic;
