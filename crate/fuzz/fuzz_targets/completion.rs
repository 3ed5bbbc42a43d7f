#![no_main]

use graphrel::llm::{parse_completion, parse_completion_with, ParseStatus};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    let tolerant = parse_completion(&text);
    let strict = parse_completion_with(&text, true);
    if tolerant.status == ParseStatus::NoJson {
        assert!(tolerant.triples.is_empty());
    }
    // Whatever strict mode accepts, tolerant mode accepts too.
    if strict.status == ParseStatus::Ok {
        assert_eq!(strict.triples, tolerant.triples);
    }
});
