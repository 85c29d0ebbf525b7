pub mod baseline;
pub mod cli;
pub mod coordinator;
pub mod draining;
pub mod io;
pub mod model;
pub mod nlp;
pub mod sim;
