//! Extracts records from a document with a chat model.
//!
//! Runs against a scripted model by default. Pass a base URL and model name
//! to use any OpenAI-compatible server instead:
//!
//! cargo run -p matkb --example extract_records -- http://localhost:11434 qwen2.5:14b

use matkb::corpus::{ingest_bytes, DocumentHint};
use matkb::extraction::{build_context, extract, ExtractConfig};
use matkb::llm::{ChatClient, ChatEndpoint, OpenAiClient, Role, ScriptedChat};

const TEXT: &str = "PbPc films were deposited on glass. Their density was 1.91 g/cm ³. \
WS2 was synthesized by chemical vapor deposition using WO3 and sulfur powders at 850 °C.";

const REPLY: &str = r#"{
  "title": null,
  "doi": null,
  "performance": [
    {"material_name": "PbPc", "parameter": "density", "value": "1.91 g/cm ³", "sentences": [1]}
  ],
  "synthesis": [
    {"material_name": "WS2", "method_name": "chemical vapor deposition",
     "reagents": "WO3, sulfur", "conditions": "850 °C", "sentences": [2]}
  ]
}"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let doc = ingest_bytes(TEXT.as_bytes(), "inline", DocumentHint { doi: Some("10.1000/demo".into()), title: None })?;
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (client, model): (Box<dyn ChatClient>, String) = match args.as_slice() {
        [url, model, ..] => (Box::new(OpenAiClient::new(&ChatEndpoint::new(url.as_str()))?), model.clone()),
        _ => (Box::new(ScriptedChat::new().on(Role::Extractor, REPLY)), "scripted".into()),
    };
    let config = ExtractConfig::default().with_model(model);

    let ctx = build_context(&doc, 0, &config)?;
    println!("prompt for chunk 0: {} characters", ctx.len_chars());

    let result = extract(&doc, &*client, &config)?;
    println!("status {:?} after {} calls", result.status, result.attempt_count);
    for (r, cited) in result.performance.iter().zip(&result.provenance.performance) {
        println!("performance: {} {} = {}  (sentences {cited:?})", r.material_name, r.parameter, r.value);
    }
    for (r, cited) in result.synthesis.iter().zip(&result.provenance.synthesis) {
        println!("synthesis: {} by {}  (sentences {cited:?})", r.material_name, r.method_name);
    }
    Ok(())
}
