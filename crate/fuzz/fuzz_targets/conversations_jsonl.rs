#![no_main]

use std::io::BufReader;

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let reader = BufReader::new(std::io::Cursor::new(data.to_vec()));
    if let Ok(conversations) = emofuse::corpus::load_conversations_from_reader(reader, "<fuzz>") {
        for conv in &conversations {
            // windowing must hold its counting contract on anything that parses
            assert_eq!(
                emofuse::corpus::build_epc_instances(conv, 3).len(),
                conv.utterances.len() - 1
            );
            assert_eq!(
                emofuse::corpus::build_erc_instances(conv, 3).len(),
                conv.utterances.len()
            );
            let _ = emofuse::corpus::render_speaker_sequence(&conv.utterances);
        }
    }
});
