pub mod game;
pub mod params;
pub mod learner;
pub mod planner;
pub mod tuner;
pub mod runtime;
