pub mod blocks;
pub mod cli;
pub mod codegen;
pub mod interpreter;
pub mod model;
pub mod normalizer;
pub mod pipeline;
pub mod sdf;
pub mod translator;
pub mod validator;
