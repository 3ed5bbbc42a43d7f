#![no_main]

use graphrel::decoder::{brute_force_arborescence, is_valid_tree, max_arborescence, tree_energy};
use libfuzzer_sys::fuzz_target;

// First byte picks the size and root mode; each following byte is one
// energy, with 255 meaning a missing edge.
fuzz_target!(|data: &[u8]| {
    let Some((&head, rest)) = data.split_first() else { return };
    let n = 2 + (head % 5) as usize;
    let single_root = head & 0x80 != 0;
    if rest.len() < n * n {
        return;
    }
    let energy: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| match rest[i * n + j] {
                    _ if i == j => f64::NEG_INFINITY,
                    255 => f64::NEG_INFINITY,
                    b => b as f64 - 128.0,
                })
                .collect()
        })
        .collect();
    let fast = max_arborescence(&energy, single_root);
    let slow = brute_force_arborescence(&energy, single_root);
    match (fast, slow) {
        (Ok((heads, total)), Ok((_, best))) => {
            assert!(is_valid_tree(&heads, single_root));
            assert_eq!(tree_energy(&energy, &heads), total);
            assert_eq!(total, best);
        }
        (Err(_), Err(_)) => {}
        (f, s) => panic!("decoders disagree: {f:?} vs {s:?}"),
    }
});
