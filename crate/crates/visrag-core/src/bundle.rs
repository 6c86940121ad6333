//! Document bundles: the on-disk unit of ingestion. A bundle directory holds
//! a `manifest.json` describing pages of ordered text blocks plus extracted
//! image assets, with payload files referenced by relative path and pinned by
//! SHA-256.
//!
//! Everything here is pure parsing, validation, and text-window selection;
//! no embedding or scoring happens at this layer.

use std::collections::BTreeSet;
use std::path::{Component, Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("schema error in {path}: {detail}")]
    Schema { path: PathBuf, detail: String },
    #[error("missing file: {path}")]
    MissingFile { path: PathBuf },
    #[error("content hash mismatch for image {image_id}: manifest says {expected}, payload is {actual}")]
    HashMismatch {
        image_id: String,
        expected: String,
        actual: String,
    },
    #[error("no image {image_id} in bundle {doc_id}")]
    UnknownImage { doc_id: String, image_id: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One contiguous run of page text. `bbox` is `[x0, y0, x1, y1]` in
/// normalized page coordinates when layout information survived extraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextBlock {
    pub order_index: u32,
    pub text: String,
    pub bbox: Option<[f64; 4]>,
}

/// An extracted image. `payload_path` is relative to the bundle root and the
/// payload bytes must hash to `content_hash`. `page_number` is derived from
/// the containing page at parse time and never serialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageAsset {
    pub image_id: String,
    #[serde(skip)]
    pub page_number: u32,
    pub payload_path: String,
    pub content_hash: String,
    pub anchor: Option<[f64; 4]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Page {
    pub page_number: u32,
    pub text_blocks: Vec<TextBlock>,
    pub images: Vec<ImageAsset>,
}

/// A parsed and validated bundle. `root` is the directory the manifest was
/// read from; payload paths resolve against it.
#[derive(Debug, Clone)]
pub struct DocumentBundle {
    pub doc_id: String,
    pub source_uri: String,
    pub pages: Vec<Page>,
    root: PathBuf,
}

/// Manifest identity ignores the filesystem root the bundle happens to live
/// in; two copies of the same bundle are equal.
impl PartialEq for DocumentBundle {
    fn eq(&self, other: &Self) -> bool {
        self.doc_id == other.doc_id
            && self.source_uri == other.source_uri
            && self.pages == other.pages
    }
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    doc_id: String,
    source_uri: String,
    pages: Vec<Page>,
}

impl DocumentBundle {
    /// Assemble a bundle in memory. `root` must already contain the payload
    /// files; the caller is responsible for correct ordering fields, which
    /// `validate` re-checks.
    pub fn new(
        doc_id: impl Into<String>,
        source_uri: impl Into<String>,
        pages: Vec<Page>,
        root: impl Into<PathBuf>,
    ) -> Self {
        DocumentBundle {
            doc_id: doc_id.into(),
            source_uri: source_uri.into(),
            pages,
            root: root.into(),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn image_count(&self) -> usize {
        self.pages.iter().map(|p| p.images.len()).sum()
    }

    pub fn find_image(&self, image_id: &str) -> Option<&ImageAsset> {
        self.pages
            .iter()
            .flat_map(|p| p.images.iter())
            .find(|img| img.image_id == image_id)
    }

    pub fn load_payload(&self, image: &ImageAsset) -> Result<Vec<u8>, BundleError> {
        let path = self.root.join(&image.payload_path);
        std::fs::read(&path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                BundleError::MissingFile { path }
            } else {
                BundleError::Io(e)
            }
        })
    }
}

/// Read and validate a bundle manifest. Payload files are hashed eagerly so
/// a corrupt or missing asset fails here rather than mid-build.
pub fn parse_bundle(manifest_path: &Path) -> Result<DocumentBundle, BundleError> {
    let content = std::fs::read_to_string(manifest_path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            BundleError::MissingFile {
                path: manifest_path.to_path_buf(),
            }
        } else {
            BundleError::Io(e)
        }
    })?;
    let manifest: Manifest = serde_json::from_str(&content).map_err(|e| BundleError::Schema {
        path: manifest_path.to_path_buf(),
        detail: e.to_string(),
    })?;
    let root = manifest_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .to_path_buf();
    let mut bundle = DocumentBundle {
        doc_id: manifest.doc_id,
        source_uri: manifest.source_uri,
        pages: manifest.pages,
        root,
    };
    // page_number on images is derived, not part of the wire format.
    for page in &mut bundle.pages {
        let n = page.page_number;
        for image in &mut page.images {
            image.page_number = n;
        }
    }
    validate(&bundle, manifest_path)?;
    Ok(bundle)
}

/// Write `manifest.json` plus payload files into `dir`. Payloads are copied
/// from the bundle's current root when the destination differs.
pub fn write_bundle(bundle: &DocumentBundle, dir: &Path) -> Result<(), BundleError> {
    std::fs::create_dir_all(dir)?;
    for page in &bundle.pages {
        for image in &page.images {
            let src = bundle.root.join(&image.payload_path);
            let dst = dir.join(&image.payload_path);
            if src != dst {
                if let Some(parent) = dst.parent() {
                    std::fs::create_dir_all(parent)?;
                }
                std::fs::copy(&src, &dst).map_err(|e| {
                    if e.kind() == std::io::ErrorKind::NotFound {
                        BundleError::MissingFile { path: src.clone() }
                    } else {
                        BundleError::Io(e)
                    }
                })?;
            }
        }
    }
    let manifest = Manifest {
        doc_id: bundle.doc_id.clone(),
        source_uri: bundle.source_uri.clone(),
        pages: bundle.pages.clone(),
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(dir.join("manifest.json"), json + "\n")?;
    Ok(())
}

fn schema_err(path: &Path, detail: impl Into<String>) -> BundleError {
    BundleError::Schema {
        path: path.to_path_buf(),
        detail: detail.into(),
    }
}

fn bbox_ok(b: &[f64; 4]) -> bool {
    b.iter().all(|v| v.is_finite())
        && 0.0 <= b[0]
        && b[0] < b[2]
        && b[2] <= 1.0
        && 0.0 <= b[1]
        && b[1] < b[3]
        && b[3] <= 1.0
}

fn is_lower_hex_256(s: &str) -> bool {
    s.len() == 64 && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
}

/// Reject payload paths that could escape the bundle root.
fn relative_inside_root(p: &str) -> bool {
    let path = Path::new(p);
    !p.is_empty()
        && path.is_relative()
        && path
            .components()
            .all(|c| matches!(c, Component::Normal(_) | Component::CurDir))
}

fn validate(bundle: &DocumentBundle, manifest_path: &Path) -> Result<(), BundleError> {
    if bundle.doc_id.is_empty() {
        return Err(schema_err(manifest_path, "doc_id is empty"));
    }
    if let Some(first) = bundle.pages.first() {
        if first.page_number != 1 {
            return Err(schema_err(manifest_path, "pages must start at page_number 1"));
        }
    }
    for w in bundle.pages.windows(2) {
        if w[1].page_number <= w[0].page_number {
            return Err(schema_err(
                manifest_path,
                format!(
                    "pages out of order: {} then {}",
                    w[0].page_number, w[1].page_number
                ),
            ));
        }
    }
    let mut seen_images: BTreeSet<&str> = BTreeSet::new();
    for page in &bundle.pages {
        if let Some(first) = page.text_blocks.first() {
            if first.order_index != 0 {
                return Err(schema_err(
                    manifest_path,
                    format!("page {}: text blocks must start at order_index 0", page.page_number),
                ));
            }
        }
        for w in page.text_blocks.windows(2) {
            if w[1].order_index <= w[0].order_index {
                return Err(schema_err(
                    manifest_path,
                    format!(
                        "page {}: block order_index {} then {}",
                        page.page_number, w[0].order_index, w[1].order_index
                    ),
                ));
            }
        }
        for block in &page.text_blocks {
            if let Some(b) = &block.bbox {
                if !bbox_ok(b) {
                    return Err(schema_err(
                        manifest_path,
                        format!("page {}: invalid block bbox {:?}", page.page_number, b),
                    ));
                }
            }
        }
        for image in &page.images {
            if image.image_id.is_empty() {
                return Err(schema_err(manifest_path, "image_id is empty"));
            }
            if !seen_images.insert(&image.image_id) {
                return Err(schema_err(
                    manifest_path,
                    format!("duplicate image_id {}", image.image_id),
                ));
            }
            if let Some(a) = &image.anchor {
                if !bbox_ok(a) {
                    return Err(schema_err(
                        manifest_path,
                        format!("image {}: invalid anchor {:?}", image.image_id, a),
                    ));
                }
            }
            if !is_lower_hex_256(&image.content_hash) {
                return Err(schema_err(
                    manifest_path,
                    format!("image {}: content_hash is not lowercase sha-256 hex", image.image_id),
                ));
            }
            if !relative_inside_root(&image.payload_path) {
                return Err(schema_err(
                    manifest_path,
                    format!(
                        "image {}: payload_path {:?} does not stay inside the bundle root",
                        image.image_id, image.payload_path
                    ),
                ));
            }
            let payload = bundle.load_payload(image)?;
            let actual = hex::encode(Sha256::digest(&payload));
            if actual != image.content_hash {
                return Err(BundleError::HashMismatch {
                    image_id: image.image_id.clone(),
                    expected: image.content_hash.clone(),
                    actual,
                });
            }
        }
    }
    Ok(())
}

/// The text chosen as an image's retrieval context, together with the blocks
/// it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct SurroundingContext {
    pub image_id: String,
    pub context_text: String,
    pub block_ids: Vec<u32>,
}

#[derive(Clone, Copy, PartialEq)]
enum Side {
    Above,
    Below,
}

/// Select the text blocks around an image and join them in reading order.
///
/// Anchored images rank the page's blocks by vertical distance between bbox
/// centers; blocks without a bbox rank by index distance to the median index
/// of the bbox-carrying blocks. Whole blocks are included greedily, nearest
/// first, until the character budget is spent on each side of the anchor
/// (blocks are never split). An image without an anchor takes the whole page.
pub fn extract_surrounding_text(
    bundle: &DocumentBundle,
    image_id: &str,
    window_chars: usize,
) -> Result<SurroundingContext, BundleError> {
    let image = bundle
        .find_image(image_id)
        .ok_or_else(|| BundleError::UnknownImage {
            doc_id: bundle.doc_id.clone(),
            image_id: image_id.to_string(),
        })?;
    let page = bundle
        .pages
        .iter()
        .find(|p| p.page_number == image.page_number)
        .expect("image always belongs to a page");

    let selected: Vec<&TextBlock> = match &image.anchor {
        None => page.text_blocks.iter().collect(),
        Some(anchor) => {
            let image_cy = (anchor[1] + anchor[3]) / 2.0;
            let anchored_indexes: Vec<u32> = page
                .text_blocks
                .iter()
                .filter(|b| b.bbox.is_some())
                .map(|b| b.order_index)
                .collect();
            // Fallback reference point when no block carries layout info.
            let median_index = if anchored_indexes.is_empty() {
                median_of(page.text_blocks.iter().map(|b| b.order_index))
            } else {
                median_of(anchored_indexes.iter().copied())
            };

            let mut ranked: Vec<(f64, Side, &TextBlock)> = page
                .text_blocks
                .iter()
                .map(|block| match &block.bbox {
                    Some(b) => {
                        let cy = (b[1] + b[3]) / 2.0;
                        let side = if cy <= image_cy { Side::Above } else { Side::Below };
                        ((cy - image_cy).abs(), side, block)
                    }
                    None => {
                        let d = (block.order_index as f64 - median_index).abs();
                        let side = if (block.order_index as f64) <= median_index {
                            Side::Above
                        } else {
                            Side::Below
                        };
                        (d, side, block)
                    }
                })
                .collect();
            ranked.sort_by(|a, b| {
                a.0.partial_cmp(&b.0)
                    .expect("distances are finite")
                    .then(a.2.order_index.cmp(&b.2.order_index))
            });

            let mut above = 0usize;
            let mut below = 0usize;
            let mut chosen: Vec<&TextBlock> = Vec::new();
            for (_, side, block) in &ranked {
                let budget = match side {
                    Side::Above => &mut above,
                    Side::Below => &mut below,
                };
                if *budget < window_chars {
                    chosen.push(block);
                    *budget += block.text.chars().count();
                }
            }
            // A zero or instantly-exhausted budget must still yield the
            // nearest block when the page has any text at all.
            if chosen.is_empty() {
                if let Some((_, _, block)) = ranked.first() {
                    chosen.push(block);
                }
            }
            chosen
        }
    };

    let mut ordered = selected;
    ordered.sort_by_key(|b| b.order_index);
    let context_text = ordered
        .iter()
        .map(|b| b.text.as_str())
        .collect::<Vec<_>>()
        .join(" ");
    Ok(SurroundingContext {
        image_id: image_id.to_string(),
        context_text,
        block_ids: ordered.iter().map(|b| b.order_index).collect(),
    })
}

fn median_of(values: impl Iterator<Item = u32>) -> f64 {
    let mut v: Vec<u32> = values.collect();
    if v.is_empty() {
        return 0.0;
    }
    v.sort_unstable();
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2] as f64
    } else {
        (v[n / 2 - 1] as f64 + v[n / 2] as f64) / 2.0
    }
}

/// All images of a bundle in a stable order: pages ascending, then within a
/// page anchored images in reading order (top-to-bottom, left-to-right),
/// then anchorless images by image_id.
pub fn enumerate_images(bundle: &DocumentBundle) -> Vec<&ImageAsset> {
    let mut out: Vec<&ImageAsset> = Vec::with_capacity(bundle.image_count());
    for page in &bundle.pages {
        let mut anchored: Vec<&ImageAsset> =
            page.images.iter().filter(|i| i.anchor.is_some()).collect();
        anchored.sort_by(|a, b| {
            let aa = a.anchor.as_ref().unwrap();
            let bb = b.anchor.as_ref().unwrap();
            aa[1].partial_cmp(&bb[1])
                .unwrap()
                .then(aa[0].partial_cmp(&bb[0]).unwrap())
                .then(a.image_id.cmp(&b.image_id))
        });
        let mut floating: Vec<&ImageAsset> =
            page.images.iter().filter(|i| i.anchor.is_none()).collect();
        floating.sort_by(|a, b| a.image_id.cmp(&b.image_id));
        out.extend(anchored);
        out.extend(floating);
    }
    out
}
