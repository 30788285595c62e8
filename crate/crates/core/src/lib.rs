pub mod chunking;
pub mod config;
pub mod corpus;
pub mod embedding;
pub mod evaluation;
pub mod index;
pub mod metadata;
pub mod pipeline;
pub mod providers;
pub mod retrieval;
pub mod tokenizer;
pub mod vector;
