pub mod channel;
pub mod cli;
pub mod enhance;
pub mod error;
pub mod io;
pub mod linalg;
pub mod rates;
pub mod sdp;
pub mod tracer;
