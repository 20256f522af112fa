#![allow(dead_code)]

use std::path::PathBuf;

use scver::scl::{self, Design, DesignAst};

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

pub fn corpus_text(name: &str) -> String {
    std::fs::read_to_string(corpus_dir().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn corpus_ast(name: &str) -> DesignAst {
    scl::parse(&corpus_text(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn corpus_design(name: &str) -> Design {
    scl::elaborate(&corpus_ast(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn ast(src: &str) -> DesignAst {
    scl::parse(src).unwrap()
}

pub fn design(src: &str) -> Design {
    scl::elaborate(&ast(src)).unwrap()
}

pub fn fixture(name: &str) -> scver::integration::InterfaceStub {
    let text = std::fs::read_to_string(corpus_dir().join("fixtures").join(name)).unwrap();
    scver::integration::InterfaceStub::from_json_str(&text).unwrap()
}

/// Every `.scl` file of the corpus, sorted.
pub fn corpus_models() -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(corpus_dir())
        .unwrap()
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".scl"))
        .collect();
    v.sort();
    v
}
