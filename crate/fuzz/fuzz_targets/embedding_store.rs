#![no_main]

use graphrel::embeddings::EmbeddingStore;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(store) = EmbeddingStore::from_bytes(data) {
        let bytes = store.to_bytes();
        let again = EmbeddingStore::from_bytes(&bytes).expect("re-read of written store");
        assert_eq!(again.to_bytes(), bytes);
    }
});
