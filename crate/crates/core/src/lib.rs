pub mod potential;
pub mod sphere;
pub mod flow;
pub mod asymptotics;
pub mod pde;
pub mod reduction;
pub mod runner;
