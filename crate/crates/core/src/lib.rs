pub mod analysis;
pub mod gateway;
pub mod logging;
pub mod metrics;
pub mod model;
pub mod prompt;
pub mod recommend;
pub mod response;
pub mod session;
pub mod text;
