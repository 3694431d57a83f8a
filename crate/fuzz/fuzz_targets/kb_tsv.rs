#![no_main]

use std::io::BufReader;

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let reader = BufReader::new(std::io::Cursor::new(data.to_vec()));
    if let Ok(kb) = emofuse::knowledge::load_kb_from_reader(reader, "<fuzz>") {
        // queries stay symmetric and bounded for whatever loaded
        let rels = kb.query_relations("asleep", "kangaroo");
        assert_eq!(rels, kb.query_relations("kangaroo", "asleep"));
        assert!(rels.len() <= 3);
        let _ = kb.vocabulary_size();
        let _ = kb.relation_counts();
    }
});
