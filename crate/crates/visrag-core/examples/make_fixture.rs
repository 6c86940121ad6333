//! Write the synthetic corpus and query set to a directory:
//!
//! ```text
//! cargo run -p visrag-core --example make_fixture -- /tmp/corpus
//! ```
//!
//! Produces one bundle directory per document (manifest, payloads, sidecars)
//! plus `queries.jsonl`, ready for `visrag ingest` / `visrag eval`.

use std::path::PathBuf;

use visrag_core::eval::write_queries_jsonl;
use visrag_core::fixture;

fn main() {
    let root: PathBuf = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "fixture-corpus".to_string())
        .into();
    let bundles = match fixture::write_corpus(&root) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    };
    let queries = fixture::queries();
    let queries_path = root.join("queries.jsonl");
    if let Err(e) = write_queries_jsonl(&queries, &queries_path) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
    let images: usize = bundles.iter().map(|b| b.image_count()).sum();
    println!(
        "wrote {} documents ({} images) and {} queries under {}",
        bundles.len(),
        images,
        queries.len(),
        root.display()
    );
}
