#![no_main]

use graphrel::embeddings::ProviderSpec;
use graphrel::model::{ModelConfig, ParserModel};
use graphrel::numerics::checkpoint::Checkpoint;
use libfuzzer_sys::fuzz_target;

// Building a model allocates every parameter, so only small configurations
// that read no files are instantiated.
fn small(c: &ModelConfig) -> bool {
    let dims = [c.d_h, c.d_tag, c.l_psi, c.l_phi, c.d_lstm, c.d_edge, c.d_rel, c.top_k, c.embeddings.d_f()];
    let vocab_ok = match &c.embeddings {
        ProviderSpec::Precomputed { .. } => false,
        ProviderSpec::TrainableLookup { vocab, .. } => vocab.len() <= 64,
        ProviderSpec::HashRandom { .. } => true,
    };
    vocab_ok
        && dims.iter().all(|&d| d <= 32)
        && c.dataset.entity_labels.len() + c.dataset.relation_labels.len() <= 32
}

fuzz_target!(|data: &[u8]| {
    let Ok(ck) = Checkpoint::from_slice(data) else { return };
    let Ok(config) = serde_json::from_value::<ModelConfig>(ck.config.clone()) else { return };
    if small(&config) {
        let _ = ParserModel::from_checkpoint(&ck);
    }
});
