pub mod cconvex;
pub mod cli;
pub mod error;
pub mod io;
pub mod jet;
pub mod kantorovich;
pub mod measures;
pub mod mtw;
pub mod screening;
pub mod semidiscrete;
pub mod util;

pub use error::{MkError, Result};
