pub mod apply;
pub mod eval;
pub mod export;
pub mod simulate;
pub mod train;
