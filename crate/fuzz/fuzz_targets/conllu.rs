#![no_main]

use graphrel::data::{encode_graph, parse_conllu, DataFormat, DatasetSpec};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(docs) = parse_conllu(text) else { return };
    let spec = DatasetSpec::infer("fuzz", DataFormat::Conllu, &docs);
    for d in &docs {
        if d.validate(Some(&spec)).is_ok() {
            let _ = encode_graph(d, &spec);
        }
    }
});
