//! Engine for a collaborative prompt-engineering workbench that generates
//! multi-hint tutoring pathways for structured textbook content.

pub mod answer;
pub mod consistency;
pub mod content_pool;
pub mod digest;
pub mod journal;
pub mod llm_gateway;
pub mod log_engine;
pub mod prompt_library;
pub mod sampler;
pub mod validator;
pub mod pipeline;
pub mod scratchpad;
pub mod fixtures;
pub mod workbench;
