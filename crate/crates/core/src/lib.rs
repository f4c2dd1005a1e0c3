//! Simulator and controller-design toolkit for a three-wheel, spring-loaded
//! in-pipe robot.

pub mod config;
pub mod control;
pub mod estimation;
pub mod model;
pub mod plant;
pub mod power;
pub mod roots;
pub mod sim;
pub mod spring;
pub mod units;
