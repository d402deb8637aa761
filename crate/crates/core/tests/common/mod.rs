#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::{Arc, OnceLock};

use rapport_core::content::{load_assets, ContentBank};

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn bank() -> Arc<ContentBank> {
    static BANK: OnceLock<Arc<ContentBank>> = OnceLock::new();
    BANK.get_or_init(|| Arc::new(load_assets(data_dir()).expect("shipped bank is valid")))
        .clone()
}
