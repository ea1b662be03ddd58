pub mod population;
pub mod simulate;
pub mod transfer;
