pub mod convergence;
pub mod dissim;
pub mod invariance;
pub mod region;
pub mod reproduce_hw;
pub mod test_cmd;
