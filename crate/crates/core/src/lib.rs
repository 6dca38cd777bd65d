pub mod data;
pub mod error;
pub mod gradcheck;
pub mod model;
pub mod reduce;
pub mod signal;
pub mod tensorgrad;
pub mod train;
