//! The `graphy` service: configuration, offline scraping, and the REST API
//! the exploration and report UI talks to.

pub mod api;
pub mod app;
pub mod config;
pub mod scrape;
pub mod server;
pub mod sessions;

pub use app::App;
pub use config::AppConfig;
