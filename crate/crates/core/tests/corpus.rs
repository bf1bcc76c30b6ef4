mod common;

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use matkb::corpus::{ingest_text, segment, CorpusError, DocumentHint, MetadataClient};
use matkb::ratelimit::{Backoff, TokenBucket};
use proptest::prelude::*;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

#[test]
fn two_paragraph_fixture_reassembles() {
    let doc = ingest_text(&fixtures().join("text/two_paragraphs.txt"), DocumentHint::default()).unwrap();
    assert_eq!(doc.reassemble(), doc.body);
    let chars: Vec<char> = doc.body.chars().collect();
    let mut last_end = 0;
    for (i, s) in doc.sentences.iter().enumerate() {
        assert_eq!(s.index, i);
        assert!(s.char_start >= last_end && s.char_end > s.char_start);
        assert_eq!(chars[s.char_start..s.char_end].iter().collect::<String>(), s.text);
        // gaps hold whitespace only
        assert!(chars[last_end..s.char_start].iter().all(|c| c.is_whitespace()));
        last_end = s.char_end;
    }
    assert!(chars[last_end..].iter().all(|c| c.is_whitespace()));
    let texts: Vec<&str> = doc.sentences.iter().map(|s| s.text.as_str()).collect();
    assert_eq!(
        texts,
        vec![
            "Two-dimensional MXenes such as Ti3C2Tx are layered carbides.",
            "Their specific capacitance reaches 537 F/g (at 2 A g⁻¹).",
            "Retention was 93% after 10,000 cycles.",
            "Monolayer WS2 was grown by CVD (cf. Fig. 2a).",
            "A band gap of 2.0 eV was measured, e.g. by photoluminescence.",
            "The films were annealed at 350 °C for 20 h.",
        ]
    );
}

#[test]
fn fixture_metadata_lookup() {
    let client = MetadataClient::fixtures(fixtures().join("works"));
    let meta = client.resolve("10.1038/s41598-020-68321-7").unwrap();
    assert_eq!(meta.year, Some(2020));
    assert!(!meta.title.is_empty());
    assert_eq!(meta.venue.as_deref(), Some("Scientific Reports"));
    // resolver prefix and case are normalized
    assert_eq!(client.resolve("https://doi.org/10.1038/S41598-020-68321-7").unwrap(), meta);
    assert!(matches!(client.resolve("10.1038/unknown-0000"), Err(CorpusError::NotFound(_))));
    assert!(matches!(client.resolve("abc"), Err(CorpusError::InvalidDoi(_))));
}

fn fast_client(base: &str, retries: u32) -> MetadataClient {
    MetadataClient::http_with(
        base,
        Arc::new(TokenBucket::per_second(1000.0)),
        Backoff { base: Duration::from_millis(5), max_retries: retries },
    )
}

#[test]
fn http_lookup_hits_works_endpoint() {
    let body = std::fs::read_to_string(fixtures().join("works/10.1038%2Fs41598-020-68321-7.json")).unwrap();
    let server = common::http::serve(vec![(200, body)]);
    let meta = fast_client(&server.base, 3).resolve("10.1038/s41598-020-68321-7").unwrap();
    assert_eq!(meta.doi, "10.1038/s41598-020-68321-7");
    let reqs = server.requests.lock().unwrap();
    assert_eq!(reqs.len(), 1);
    assert_eq!(reqs[0].method, "GET");
    assert_eq!(reqs[0].path, "/works/doi:10.1038/s41598-020-68321-7");
}

#[test]
fn http_retries_then_reports_attempts() {
    let server = common::http::serve(vec![(503, "{}".into())]);
    let err = fast_client(&server.base, 3).resolve("10.1038/s41598-020-68321-7").unwrap_err();
    match err {
        CorpusError::Transport { attempts, .. } => assert_eq!(attempts, 4),
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(server.requests.lock().unwrap().len(), 4);
}

#[test]
fn http_recovers_after_transient_failure() {
    let body = std::fs::read_to_string(fixtures().join("works/10.1038%2Fs41598-020-68321-7.json")).unwrap();
    let server = common::http::serve(vec![(429, "{}".into()), (200, body)]);
    assert!(fast_client(&server.base, 3).resolve("10.1038/s41598-020-68321-7").is_ok());
    assert_eq!(server.requests.lock().unwrap().len(), 2);
}

#[test]
fn http_not_found_is_lookup_miss() {
    let server = common::http::serve(vec![(404, "{}".into())]);
    assert!(matches!(
        fast_client(&server.base, 3).resolve("10.1038/s41598-020-00000-0"),
        Err(CorpusError::NotFound(_))
    ));
    assert_eq!(server.requests.lock().unwrap().len(), 1);
}

fn sentence() -> impl Strategy<Value = String> {
    ("[A-Z0-9]", "[a-z0-9 ,()%]{0,20}", "[a-z]", prop::sample::select(vec![".", "?", "!"]))
        .prop_map(|(a, b, c, d)| format!("{a}{b}{c}{d}"))
}

proptest! {
    #[test]
    fn segmentation_is_idempotent(sentences in prop::collection::vec(sentence(), 1..6)) {
        let text = sentences.join(" ");
        let first = segment(&text);
        let rejoined = first.iter().map(|s| s.text.as_str()).collect::<Vec<_>>().join(" ");
        let second = segment(&rejoined);
        prop_assert_eq!(&first, &second);
    }

    #[test]
    fn segmentation_covers_non_whitespace(text in "[A-Za-z0-9 .?!()\n]{0,60}") {
        let spans = segment(&text);
        let chars: Vec<char> = text.chars().collect();
        let mut covered = vec![false; chars.len()];
        let mut last = 0;
        for s in &spans {
            prop_assert!(s.char_start >= last);
            last = s.char_end;
            for c in covered.iter_mut().take(s.char_end).skip(s.char_start) {
                *c = true;
            }
        }
        for (i, c) in chars.iter().enumerate() {
            prop_assert!(covered[i] || c.is_whitespace());
        }
    }
}
