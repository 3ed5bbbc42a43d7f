#![no_main]

use graphrel::data::{encode_graph, parse_json_triples, to_json_triples, DataFormat, DatasetSpec};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(docs) = parse_json_triples(text, None) else { return };
    let spec = DatasetSpec::infer("fuzz", DataFormat::JsonTriples, &docs);
    for d in &docs {
        let _ = d.gold_triples();
        if d.validate(Some(&spec)).is_ok() {
            let _ = encode_graph(d, &spec);
        }
    }
    // Accepted input must survive a write and re-read unchanged.
    let again = parse_json_triples(&to_json_triples(&docs).unwrap(), None).unwrap();
    assert_eq!(again, docs);
});
