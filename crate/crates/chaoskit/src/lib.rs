pub mod cli;
pub mod io;
pub mod simulate;
pub mod verify;
