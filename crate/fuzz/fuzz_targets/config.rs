#![no_main]

use graphrel::llm::{Descriptions, EndpointConfig};
use graphrel::model::ModelConfig;
use graphrel::training::TrainConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(c) = toml::from_str::<TrainConfig>(text) {
        let _ = c.validate();
    }
    if let Ok(c) = toml::from_str::<ModelConfig>(text) {
        let _ = c.validate();
    }
    if let Ok(c) = toml::from_str::<EndpointConfig>(text) {
        let _ = c.validate();
    }
    let _ = toml::from_str::<Descriptions>(text);
});
