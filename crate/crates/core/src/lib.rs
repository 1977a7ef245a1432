//! Query intent mining from search engine result pages.

pub mod characterize;
pub mod clustering;
pub mod evaluate;
pub mod features;
pub mod fetcher;
pub mod parser;
pub mod pipeline;
pub mod schema;
pub mod tagger;
