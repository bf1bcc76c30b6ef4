//! Normalizes an article and splits it into addressable sentences.
//!
//! cargo run -p matkb --example ingest_corpus

use matkb::corpus::{ingest_bytes, normalize_doi, DocumentHint, MetadataClient};

const TEXT: &str = "Lead phthalocyanine (PbPc) films were grown by vacuum deposition (Fig. 2a). \
The density was 1.91 g/cm ³ at 25 °C, e.g. close to the bulk value. \
WS2 monolayers were prepared by CVD at 850 °C.";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let doi = normalize_doi("https://doi.org/10.1000/PbPc.2021");
    println!("normalized doi: {doi:?}");
    let doc = ingest_bytes(TEXT.as_bytes(), "inline", DocumentHint { doi, title: None })?;
    println!("document {} ({} chars)", doc.id, doc.body.chars().count());
    for s in &doc.sentences {
        println!("[S{}] {}..{} {}", s.index, s.char_start, s.char_end, s.text);
    }
    assert_eq!(doc.reassemble(), doc.body);

    // Metadata comes from OpenAlex; point the client at a fixture directory
    // to run offline, or use MetadataClient::http("https://api.openalex.org").
    if let Some(dir) = std::env::args().nth(1) {
        let meta = MetadataClient::fixtures(dir).resolve(doc.doi.as_deref().unwrap_or_default())?;
        println!("{} ({:?}) by {}", meta.title, meta.year, meta.authors.join(", "));
    }
    Ok(())
}
