pub mod bernoulli;
pub mod density;
pub mod dirichlet;
pub mod ellcurve;
pub mod heegner;
pub mod numkernel;
pub mod qseries;
pub mod quadfield;
pub mod regression;
pub mod serde_util;
