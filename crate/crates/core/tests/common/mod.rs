#![allow(dead_code)]

pub mod cc;

use mbd2sdf::model::{load_model, BlockModel};

pub fn fixture(name: &str) -> BlockModel {
    let path = format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    load_model(&std::fs::read_to_string(&path).expect("fixture readable")).expect("fixture loads")
}
pub mod random;
pub mod graphs;
