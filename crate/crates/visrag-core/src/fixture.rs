//! Synthetic help-center corpus for integration tests and examples.
//!
//! Twenty documents with seventy images total, nineteen canned queries, and
//! per-image caption/OCR sidecar files. Eight queries (q12 through q19) are
//! "visual answer" queries: the answer text lives only in the sidecars of one
//! target image, never in any document's surrounding text, so retrieval
//! comparisons between text-only and full fusion have a real signal to find.
//!
//! Document `d07` is the calibration star. Its second page carries a single
//! text block, so the surrounding context of `d07-img2` is exactly
//! [`ECHECKIN_CONTEXT`], and its sidecars carry the canonical caption and OCR
//! texts. [`calibrated_provider_set`] pins the cosine of those sidecar texts
//! (and of the image payload) against the demo question to fixed values,
//! which makes end-to-end component scores predictable to high precision.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::bundle::{
    parse_bundle, write_bundle, BundleError, DocumentBundle, ImageAsset, Page, TextBlock,
};
use crate::embedding::EmbeddingVector;
use crate::eval::EvalQuery;
use crate::providers::mock::{
    splitmix64, MockCaptioner, MockImageEmbedder, MockOcr, MockTextEmbedder, SidecarStore,
};
use crate::providers::{ImageEmbedder, ProviderError, ProviderSet, TextEmbedder};

/// The canonical demo question, also shipped as `q11` in [`queries`].
pub const ECHECKIN_QUESTION: &str =
    "What does the eCheck-in process look like before an appointment?";

/// Caption sidecar text of the demo image.
pub const ECHECKIN_CAPTION: &str = "This image shows a medical appointment interface for a \
virtual visit. It displays appointment details for a Family Medicine Physician at 7:00 AM, \
options for eCheck-In, review instructions for a remote consultation, and a highlighted \
\"Begin visit\" button for starting a video call.";

/// OCR sidecar text of the demo image.
pub const ECHECKIN_OCR: &str = "Appointments, Starts at 7:00 AM 15 minutes Cancel Appt Add to \
Calendar; Family Medicine Physician, MD, GET READY; eCheck-In Save time at your appointment by \
updating some of your information now. Begin Review Instructions - Please do not come to the \
clinic. -Someone from the clinic will be calling you. -Please have the required information \
ready when the clinic calls you. Connecting to your video visit, Begin visit";

/// The only text block on `d07` page 2, hence the exact surrounding context
/// of the demo image. Shares the tokens {echeck, in, appointment} with
/// [`ECHECKIN_QUESTION`] and contains no contiguous run of it, so the text
/// match component is 3/22 under default weights.
pub const ECHECKIN_CONTEXT: &str =
    "eCheck-in lets you confirm insurance information prior to your appointment.";

pub const ECHECKIN_DOC_ID: &str = "d07";
pub const ECHECKIN_IMAGE_ID: &str = "d07-img2";
pub const ECHECKIN_RECORD_ID: &str = "d07/d07-img2";

/// Pinned cosine of the demo image payload embedding against the question.
pub const CALIBRATED_IMAGE_SIM: f64 = 0.333;
/// Pinned cosine of the demo caption embedding against the question.
pub const CALIBRATED_CAPTION_SIM: f64 = 0.592;
/// Pinned cosine of the demo OCR embedding against the question.
pub const CALIBRATED_OCR_SIM: f64 = 0.615;

/// Per-question reference scores for the seven retrieval methods, used by the
/// aggregation and reporting tests and by `visrag eval --from-scores`.
pub fn reference_scores_csv() -> &'static str {
    include_str!("../fixtures/reference_scores.csv")
}

struct DocSpec {
    doc_id: &'static str,
    topic: &'static str,
    page1: [&'static str; 2],
    page2: &'static str,
    image_total: usize,
    sidecars: bool,
}

fn doc_specs() -> Vec<DocSpec> {
    vec![
        DocSpec {
            doc_id: "d01",
            topic: "password reset",
            page1: [
                "Reset a forgotten password from the portal sign in page.",
                "Click the reset link, answer your security questions, and choose a new password.",
            ],
            page2: "Accounts lock after five failed attempts and unlock on their own after \
                    fifteen minutes.",
            image_total: 3,
            sidecars: true,
        },
        DocSpec {
            doc_id: "d02",
            topic: "vpn access",
            page1: [
                "Connect to the VPN from home with the company client.",
                "Before connecting you need an enrolled device and a second factor token.",
            ],
            page2: "All traffic routes through the gateway while the tunnel is up.",
            image_total: 3,
            sidecars: true,
        },
        DocSpec {
            doc_id: "d03",
            topic: "expense reports",
            page1: [
                "Submit an expense report within thirty days of purchase.",
                "Attach itemized receipts to each line of the report before you submit.",
            ],
            page2: "Reports route to your cost center owner for approval.",
            image_total: 3,
            sidecars: true,
        },
        DocSpec {
            doc_id: "d04",
            topic: "benefits sign up",
            page1: [
                "The annual benefits sign up window opens on the first Monday of November.",
                "Changes outside the window require a qualifying life event.",
            ],
            page2: "Confirmation statements arrive by email within two weeks.",
            image_total: 3,
            sidecars: true,
        },
        DocSpec {
            doc_id: "d05",
            topic: "direct deposit",
            page1: [
                "Set up direct deposit from the payroll page of the portal.",
                "A direct deposit change takes one full pay cycle to apply.",
            ],
            page2: "Split deposits across up to three accounts by percentage.",
            image_total: 3,
            sidecars: true,
        },
        DocSpec {
            doc_id: "d06",
            topic: "email signature",
            page1: [
                "Email signatures follow the company template.",
                "Update the legal disclaimer in your email signature from the settings page.",
            ],
            page2: "Logos and personal quotes are not permitted below the disclaimer.",
            image_total: 3,
            sidecars: true,
        },
        DocSpec {
            doc_id: "d07",
            topic: "virtual visits",
            page1: [
                "Virtual visits are scheduled through the patient portal.",
                "You can schedule a virtual visit up to ninety days in advance.",
            ],
            page2: ECHECKIN_CONTEXT,
            image_total: 3,
            sidecars: true,
        },
        DocSpec {
            doc_id: "d08",
            topic: "laptop setup",
            page1: [
                "New laptops ship with a dock, a charger, and a headset on day one.",
                "Accessories beyond the standard kit go through a hardware request.",
            ],
            page2: "Disk encryption is enabled before the device leaves IT.",
            image_total: 3,
            sidecars: true,
        },
        DocSpec {
            doc_id: "d09",
            topic: "timesheet approval",
            page1: [
                "Timesheets are due by noon on the last Friday of the pay period.",
                "Your direct manager approves the timesheet at the end of the pay period.",
            ],
            page2: "Late approvals escalate to the department head.",
            image_total: 3,
            sidecars: true,
        },
        DocSpec {
            doc_id: "d10",
            topic: "travel policy",
            page1: [
                "The travel policy caps hotel stays at two hundred dollars nightly.",
                "Book flights and hotels through the booking tool.",
            ],
            page2: "Mileage is reimbursed at the federal rate.",
            image_total: 3,
            sidecars: true,
        },
        DocSpec {
            doc_id: "d11",
            topic: "door access",
            page1: [
                "Lobby security issues new staff credentials at the reception counter.",
                "The self service unit near the turnstiles guides activation on its display.",
            ],
            page2: "Lost credentials are deactivated immediately by calling security.",
            image_total: 4,
            sidecars: true,
        },
        DocSpec {
            doc_id: "d12",
            topic: "visitor network",
            page1: [
                "Visitors get temporary network access from reception.",
                "Ask reception for a printed day pass before your visit starts.",
            ],
            page2: "Day passes expire at midnight and cover one device.",
            image_total: 4,
            sidecars: true,
        },
        DocSpec {
            doc_id: "d13",
            topic: "room booking",
            page1: [
                "Rooms are booked through the calendar client.",
                "The display outside each room shows the current booking and the next free slot.",
            ],
            page2: "Recurring bookings release automatically after two missed confirmations.",
            image_total: 4,
            sidecars: true,
        },
        DocSpec {
            doc_id: "d14",
            topic: "garage access",
            page1: [
                "The garage gate opens automatically for registered vehicles.",
                "Register your plate with facilities during your first week.",
            ],
            page2: "Visitor vehicles use the ticket lane and validate at security.",
            image_total: 4,
            sidecars: true,
        },
        DocSpec {
            doc_id: "d15",
            topic: "cafe payments",
            page1: [
                "The cafe on level two takes contactless payment.",
                "Balances from the old lunch accounts were migrated in May.",
            ],
            page2: "Daily menus are posted on the intranet home page.",
            image_total: 4,
            sidecars: true,
        },
        DocSpec {
            doc_id: "d16",
            topic: "workstation ergonomics",
            page1: [
                "Ergonomic furniture requests go through facilities.",
                "Most workstations adjust between sitting and raised positions.",
            ],
            page2: "Chairs and monitor arms are stocked in the basement storeroom.",
            image_total: 4,
            sidecars: true,
        },
        DocSpec {
            doc_id: "d17",
            topic: "document disposal",
            page1: [
                "Confidential paper goes in the locked gray consoles on each floor.",
                "A vendor empties the consoles on the first Tuesday of the month.",
            ],
            page2: "Electronic media disposal goes through IT asset management.",
            image_total: 4,
            sidecars: true,
        },
        DocSpec {
            doc_id: "d18",
            topic: "emergency drills",
            page1: [
                "During a drill, leave by the nearest stairwell and gather outside.",
                "Floor captains wear orange vests and take attendance.",
            ],
            page2: "Drills run twice a year and are announced a week ahead.",
            image_total: 4,
            sidecars: true,
        },
        DocSpec {
            doc_id: "d19",
            topic: "printing",
            page1: [
                "Print queues are managed centrally by IT.",
                "Install the follow me queue from the software center and release jobs at any \
                 device.",
            ],
            page2: "Toner replacements are handled by the vendor under contract.",
            image_total: 4,
            sidecars: false,
        },
        DocSpec {
            doc_id: "d20",
            topic: "software licensing",
            page1: [
                "Paid software needs a license request in the service portal.",
                "Approval usually takes two business days from your cost center owner.",
            ],
            page2: "Licenses are reclaimed after ninety days of inactivity.",
            image_total: 4,
            sidecars: false,
        },
    ]
}

/// Caption and OCR sidecar texts for the target image (`img2`) of the eight
/// visual-answer documents. Each pair restates its query's wording and adds
/// the answer, so sidecar embeddings align with the query while the document
/// text stays silent about it.
fn visual_sidecars() -> Vec<(&'static str, &'static str, &'static str)> {
    vec![
        (
            "d11",
            "Place your finger flat on the biometric kiosk scanner to finish badge enrollment.",
            "Badge enrollment. Step 3 of 3. Place your finger on the scanner glass. Where do I \
             place my finger? Center it until the kiosk beeps, then press Finish.",
        ),
        (
            "d12",
            "The guest wifi splash screen with the voucher code field highlighted.",
            "Guest wifi. Enter your voucher code. Format: GUEST-XXXX-XXXX. The splash screen \
             does not accept codes with spaces. What voucher code format does it accept? Twelve \
             characters with dashes.",
        ),
        (
            "d13",
            "The conference room touch panel with the extend button next to the meeting timer.",
            "Conference room panel. Meeting ends in 10 minutes. Which button extends a meeting? \
             Tap the green Extend button on the touch panel to add 30 minutes.",
        ),
        (
            "d14",
            "A parking transponder mounted on the windshield behind the rear view mirror.",
            "Parking transponder placement. Where should the transponder be mounted? Mount it \
             on the windshield, lower left corner on the driver side, two inches from the edge.",
        ),
        (
            "d15",
            "The cafeteria meal card reload screen showing the maximum amount per transaction.",
            "Cafeteria meal card reload. What is the maximum amount? You can reload up to fifty \
             dollars onto a meal card in one transaction.",
        ),
        (
            "d16",
            "The standing desk controller with a height preset being saved.",
            "Standing desk controller. How do I save a height preset? Hold M until the display \
             blinks, then press 1 or 2 to save the preset at the current height.",
        ),
        (
            "d17",
            "A shredding bin with the green pickup tag that marks it as ready.",
            "Shredding bin tags. What color tag marks a bin as ready for pickup? Green means \
             ready, red means hold. Attach the tag to the bin handle.",
        ),
        (
            "d18",
            "The evacuation map with the assembly point for the engineering wing marked in blue.",
            "Evacuation map. Which assembly point is marked for the engineering wing? Assembly \
             point B on the north lawn, marked with a blue square on the map.",
        ),
    ]
}

/// The nineteen canned queries. q01 through q10 are answerable from document
/// text, q11 is [`ECHECKIN_QUESTION`], and q12 through q19 are the
/// visual-answer set.
pub fn queries() -> Vec<EvalQuery> {
    let raw: [(&str, &str); 19] = [
        ("q01", "How do I reset a forgotten portal password?"),
        ("q02", "What do I need before connecting to the VPN from home?"),
        ("q03", "Where do I attach receipts on an expense report?"),
        ("q04", "When does the annual benefits sign up window open?"),
        ("q05", "How long does a direct deposit change take to apply?"),
        (
            "q06",
            "How do I update the legal disclaimer in my email signature?",
        ),
        ("q07", "How far in advance can I schedule a virtual visit?"),
        ("q08", "What ships with a new laptop on day one?"),
        (
            "q09",
            "Who approves my timesheet at the end of the pay period?",
        ),
        (
            "q10",
            "What is the nightly cap for hotel stays under the travel policy?",
        ),
        ("q11", ECHECKIN_QUESTION),
        (
            "q12",
            "Where do I place my finger on the biometric kiosk scanner to finish badge \
             enrollment?",
        ),
        (
            "q13",
            "What voucher code format does the guest wifi splash screen accept?",
        ),
        (
            "q14",
            "Which button on the conference room touch panel extends a meeting?",
        ),
        (
            "q15",
            "Where should the parking transponder be mounted on the windshield?",
        ),
        (
            "q16",
            "What is the maximum amount I can reload onto a cafeteria meal card in one \
             transaction?",
        ),
        (
            "q17",
            "How do I save a height preset on the standing desk controller?",
        ),
        (
            "q18",
            "What color bin tag marks a shredding bin as ready for pickup?",
        ),
        (
            "q19",
            "Which assembly point on the evacuation map is marked for the engineering wing?",
        ),
    ];
    raw.iter()
        .map(|(qid, question)| EvalQuery {
            qid: qid.to_string(),
            question: question.to_string(),
        })
        .collect()
}

/// Query ids whose answers exist only in caption/OCR sidecars.
pub fn visual_answer_qids() -> &'static [&'static str] {
    &["q12", "q13", "q14", "q15", "q16", "q17", "q18", "q19"]
}

/// (qid, record_id) pairs naming the image each visual-answer query is about.
pub fn visual_targets() -> Vec<(&'static str, &'static str)> {
    vec![
        ("q12", "d11/d11-img2"),
        ("q13", "d12/d12-img2"),
        ("q14", "d13/d13-img2"),
        ("q15", "d14/d14-img2"),
        ("q16", "d15/d15-img2"),
        ("q17", "d16/d16-img2"),
        ("q18", "d17/d17-img2"),
        ("q19", "d18/d18-img2"),
    ]
}

/// Deterministic 64-byte payload for an image id.
pub fn payload_bytes(image_id: &str) -> Vec<u8> {
    let digest = Sha256::digest(image_id.as_bytes());
    let mut seed = u64::from_be_bytes(digest[..8].try_into().expect("digest is 32 bytes"));
    let mut out = Vec::with_capacity(64);
    for _ in 0..8 {
        out.extend_from_slice(&splitmix64(&mut seed).to_be_bytes());
    }
    out
}

fn title_case(topic: &str) -> String {
    let mut chars = topic.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}

fn block(order_index: u32, text: &str, bbox: Option<[f64; 4]>) -> TextBlock {
    TextBlock {
        order_index,
        text: text.to_string(),
        bbox,
    }
}

fn image(doc_id: &str, n: usize, page_number: u32, anchor: Option<[f64; 4]>) -> ImageAsset {
    let image_id = format!("{doc_id}-img{n}");
    let payload = payload_bytes(&image_id);
    ImageAsset {
        payload_path: format!("payloads/{image_id}.bin"),
        content_hash: hex::encode(Sha256::digest(&payload)),
        image_id,
        page_number,
        anchor,
    }
}

fn pages_for(spec: &DocSpec) -> Vec<Page> {
    let p1_blocks = vec![
        block(0, spec.page1[0], Some([0.08, 0.05, 0.92, 0.12])),
        block(1, spec.page1[1], Some([0.08, 0.55, 0.92, 0.62])),
    ];
    let p2_blocks = vec![block(0, spec.page2, Some([0.08, 0.05, 0.92, 0.12]))];
    if spec.doc_id == ECHECKIN_DOC_ID {
        // The demo image sits alone with the demo block on page 2 so its
        // surrounding context is that block verbatim.
        return vec![
            Page {
                page_number: 1,
                text_blocks: p1_blocks,
                images: vec![image(spec.doc_id, 1, 1, Some([0.10, 0.15, 0.48, 0.38]))],
            },
            Page {
                page_number: 2,
                text_blocks: p2_blocks,
                images: vec![
                    image(spec.doc_id, 2, 2, Some([0.10, 0.20, 0.60, 0.50])),
                    image(spec.doc_id, 3, 2, None),
                ],
            },
        ];
    }
    let mut page2_images = vec![image(spec.doc_id, 3, 2, None)];
    if spec.image_total == 4 {
        page2_images.push(image(spec.doc_id, 4, 2, Some([0.10, 0.20, 0.48, 0.45])));
    }
    vec![
        Page {
            page_number: 1,
            text_blocks: p1_blocks,
            images: vec![
                image(spec.doc_id, 1, 1, Some([0.10, 0.15, 0.48, 0.38])),
                image(spec.doc_id, 2, 1, Some([0.10, 0.66, 0.48, 0.90])),
            ],
        },
        Page {
            page_number: 2,
            text_blocks: p2_blocks,
            images: page2_images,
        },
    ]
}

fn write_sidecar(dir: &Path, image_id: &str, kind: &str, text: &str) -> std::io::Result<()> {
    // No trailing newline: the mock providers echo file contents verbatim and
    // the calibrated embedder matches override texts exactly.
    std::fs::write(dir.join(format!("{image_id}.{kind}.txt")), text)
}

/// Write the whole corpus under `root`, one directory per document, and
/// return the re-parsed bundles. Parsing on the way out keeps the fixture
/// honest: ordering, hash, and path rules are enforced by the same validator
/// production input goes through.
pub fn write_corpus(root: &Path) -> Result<Vec<DocumentBundle>, BundleError> {
    let visual: BTreeMap<&str, (&str, &str)> = visual_sidecars()
        .into_iter()
        .map(|(doc_id, caption, ocr)| (doc_id, (caption, ocr)))
        .collect();
    let mut bundles = Vec::new();
    for spec in doc_specs() {
        let doc_dir = root.join(spec.doc_id);
        std::fs::create_dir_all(doc_dir.join("payloads"))?;
        let pages = pages_for(&spec);
        for page in &pages {
            for img in &page.images {
                std::fs::write(
                    doc_dir.join(&img.payload_path),
                    payload_bytes(&img.image_id),
                )?;
            }
        }
        let slug = spec.topic.replace(' ', "-");
        let bundle = DocumentBundle::new(
            spec.doc_id,
            format!("https://intranet.example.com/kb/{slug}.pdf"),
            pages,
            &doc_dir,
        );
        write_bundle(&bundle, &doc_dir)?;
        if spec.sidecars {
            let sidecar_dir = doc_dir.join("sidecars");
            std::fs::create_dir_all(&sidecar_dir)?;
            let topic = title_case(spec.topic);
            for page in &bundle.pages {
                for img in &page.images {
                    let (caption, ocr) = if img.image_id == ECHECKIN_IMAGE_ID {
                        (ECHECKIN_CAPTION.to_string(), ECHECKIN_OCR.to_string())
                    } else if let Some((cap, ocr)) = visual
                        .get(spec.doc_id)
                        .filter(|_| img.image_id.ends_with("img2"))
                    {
                        (cap.to_string(), ocr.to_string())
                    } else {
                        (
                            format!("Screenshot of the {} page in the staff portal.", spec.topic),
                            format!("{topic} | Staff portal help center"),
                        )
                    };
                    write_sidecar(&sidecar_dir, &img.image_id, "caption", &caption)?;
                    write_sidecar(&sidecar_dir, &img.image_id, "ocr", &ocr)?;
                }
            }
        }
        bundles.push(parse_bundle(&doc_dir.join("manifest.json"))?);
    }
    Ok(bundles)
}

/// Mock providers with no sidecar store. Captions and OCR fall back to the
/// hash-derived markers.
pub fn mock_provider_set(dim: usize) -> ProviderSet {
    let text = Arc::new(MockTextEmbedder::new("mock-text-v1", dim));
    ProviderSet {
        text: text.clone(),
        image: Arc::new(MockImageEmbedder::new("mock-image-v1", dim)),
        captioner: Arc::new(MockCaptioner::new("mock-caption-v1", SidecarStore::empty())),
        ocr: Arc::new(MockOcr::new("mock-ocr-v1", SidecarStore::empty())),
        sentence: text,
    }
}

/// Mock providers backed by the sidecar files under `corpus_root`.
pub fn mock_provider_set_with_sidecars(
    dim: usize,
    corpus_root: &Path,
) -> std::io::Result<ProviderSet> {
    let sidecars = SidecarStore::load(corpus_root)?;
    let text = Arc::new(MockTextEmbedder::new("mock-text-v1", dim));
    Ok(ProviderSet {
        text: text.clone(),
        image: Arc::new(MockImageEmbedder::new("mock-image-v1", dim)),
        captioner: Arc::new(MockCaptioner::new("mock-caption-v1", sidecars.clone())),
        ocr: Arc::new(MockOcr::new("mock-ocr-v1", sidecars)),
        sentence: text,
    })
}

/// A text embedder that returns pinned vectors for a fixed set of exact
/// texts and defers to the mock embedder otherwise.
struct CalibratedTextEmbedder {
    id: String,
    inner: MockTextEmbedder,
    overrides: BTreeMap<String, EmbeddingVector>,
}

impl TextEmbedder for CalibratedTextEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn embed_text(&self, text: &str) -> Result<EmbeddingVector, ProviderError> {
        match self.overrides.get(text) {
            Some(v) => Ok(v.clone()),
            None => self.inner.embed_text(text),
        }
    }
}

/// Image counterpart of [`CalibratedTextEmbedder`], keyed by payload hash.
struct CalibratedImageEmbedder {
    id: String,
    inner: MockImageEmbedder,
    overrides: BTreeMap<String, EmbeddingVector>,
}

impl ImageEmbedder for CalibratedImageEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn embed_image(&self, image_bytes: &[u8]) -> Result<EmbeddingVector, ProviderError> {
        let key = hex::encode(Sha256::digest(image_bytes));
        match self.overrides.get(&key) {
            Some(v) => Ok(v.clone()),
            None => self.inner.embed_image(image_bytes),
        }
    }
}

/// Build a unit vector whose cosine against `anchor` is `target_cos`, using
/// a seeded direction orthogonalized against the anchor.
fn pinned_vector(anchor: &EmbeddingVector, target_cos: f64, tag: &str) -> EmbeddingVector {
    let digest = Sha256::digest(tag.as_bytes());
    let mut seed = u64::from_be_bytes(digest[..8].try_into().expect("digest is 32 bytes"));
    let mut raw: Vec<f64> = (0..anchor.dim())
        .map(|_| (splitmix64(&mut seed) as f64 / u64::MAX as f64) * 2.0 - 1.0)
        .collect();
    let q = anchor.values();
    let proj: f64 = raw.iter().zip(q).map(|(r, a)| r * a).sum();
    for (r, a) in raw.iter_mut().zip(q) {
        *r -= proj * a;
    }
    let norm: f64 = raw.iter().map(|r| r * r).sum::<f64>().sqrt();
    assert!(
        norm > 1e-6,
        "seeded direction collapsed onto the anchor for tag {tag}"
    );
    let residual = (1.0 - target_cos * target_cos).sqrt();
    let values: Vec<f64> = raw
        .iter()
        .zip(q)
        .map(|(r, a)| target_cos * a + residual * r / norm)
        .collect();
    EmbeddingVector::normalized_from(values).expect("pinned vector is finite")
}

/// Mock providers whose text and image embedders pin the demo record's
/// component cosines against [`ECHECKIN_QUESTION`] to the `CALIBRATED_*`
/// constants. Sidecars load from `corpus_root` as usual.
pub fn calibrated_provider_set(dim: usize, corpus_root: &Path) -> std::io::Result<ProviderSet> {
    let inner = MockTextEmbedder::new("calibrated-text-v1", dim);
    let anchor = inner
        .embed_text(ECHECKIN_QUESTION)
        .expect("question embeds");
    let mut text_overrides = BTreeMap::new();
    text_overrides.insert(
        ECHECKIN_CAPTION.to_string(),
        pinned_vector(&anchor, CALIBRATED_CAPTION_SIM, "fixture:caption-axis"),
    );
    text_overrides.insert(
        ECHECKIN_OCR.to_string(),
        pinned_vector(&anchor, CALIBRATED_OCR_SIM, "fixture:ocr-axis"),
    );
    let text = Arc::new(CalibratedTextEmbedder {
        id: "calibrated-text-v1".to_string(),
        inner,
        overrides: text_overrides,
    });

    let mut image_overrides = BTreeMap::new();
    image_overrides.insert(
        hex::encode(Sha256::digest(payload_bytes(ECHECKIN_IMAGE_ID))),
        pinned_vector(&anchor, CALIBRATED_IMAGE_SIM, "fixture:image-axis"),
    );
    let sidecars = SidecarStore::load(corpus_root)?;
    Ok(ProviderSet {
        text: text.clone(),
        image: Arc::new(CalibratedImageEmbedder {
            id: "calibrated-image-v1".to_string(),
            inner: MockImageEmbedder::new("calibrated-image-v1", dim),
            overrides: image_overrides,
        }),
        captioner: Arc::new(MockCaptioner::new("mock-caption-v1", sidecars.clone())),
        ocr: Arc::new(MockOcr::new("mock-ocr-v1", sidecars)),
        sentence: text,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::extract_surrounding_text;
    use crate::embedding::cosine;

    #[test]
    fn corpus_has_twenty_docs_and_seventy_images() {
        let dir = tempfile::TempDir::new().unwrap();
        let bundles = write_corpus(dir.path()).unwrap();
        assert_eq!(bundles.len(), 20);
        let total: usize = bundles.iter().map(|b| b.image_count()).sum();
        assert_eq!(total, 70);
        let ids: Vec<&str> = bundles.iter().map(|b| b.doc_id.as_str()).collect();
        assert_eq!(ids[0], "d01");
        assert_eq!(ids[19], "d20");
    }

    #[test]
    fn demo_image_context_is_the_demo_block() {
        let dir = tempfile::TempDir::new().unwrap();
        let bundles = write_corpus(dir.path()).unwrap();
        let d07 = bundles.iter().find(|b| b.doc_id == ECHECKIN_DOC_ID).unwrap();
        let ctx = extract_surrounding_text(d07, ECHECKIN_IMAGE_ID, 512).unwrap();
        assert_eq!(ctx.context_text, ECHECKIN_CONTEXT);
    }

    #[test]
    fn sidecars_cover_every_image_except_the_last_two_docs() {
        let dir = tempfile::TempDir::new().unwrap();
        let bundles = write_corpus(dir.path()).unwrap();
        let store = SidecarStore::load(dir.path()).unwrap();
        assert_eq!(store.caption(ECHECKIN_IMAGE_ID), Some(ECHECKIN_CAPTION));
        assert_eq!(store.ocr(ECHECKIN_IMAGE_ID), Some(ECHECKIN_OCR));
        assert!(store.caption("d11-img2").unwrap().contains("biometric"));
        for bundle in &bundles {
            let expect = bundle.doc_id != "d19" && bundle.doc_id != "d20";
            for page in &bundle.pages {
                for img in &page.images {
                    assert_eq!(store.caption(&img.image_id).is_some(), expect);
                    assert_eq!(store.ocr(&img.image_id).is_some(), expect);
                }
            }
        }
    }

    #[test]
    fn queries_are_nineteen_with_unique_qids() {
        let qs = queries();
        assert_eq!(qs.len(), 19);
        let mut qids: Vec<&str> = qs.iter().map(|q| q.qid.as_str()).collect();
        qids.dedup();
        assert_eq!(qids.len(), 19);
        assert_eq!(qs[10].qid, "q11");
        assert_eq!(qs[10].question, ECHECKIN_QUESTION);
        for qid in visual_answer_qids() {
            assert!(qs.iter().any(|q| q.qid == *qid));
        }
    }

    #[test]
    fn visual_targets_point_at_real_images() {
        let dir = tempfile::TempDir::new().unwrap();
        let bundles = write_corpus(dir.path()).unwrap();
        for (qid, record_id) in visual_targets() {
            assert!(visual_answer_qids().contains(&qid));
            let (doc_id, image_id) = record_id.split_once('/').unwrap();
            let bundle = bundles.iter().find(|b| b.doc_id == doc_id).unwrap();
            assert!(bundle.find_image(image_id).is_some(), "missing {record_id}");
        }
    }

    #[test]
    fn calibrated_embedders_pin_the_demo_cosines() {
        let dir = tempfile::TempDir::new().unwrap();
        write_corpus(dir.path()).unwrap();
        let providers = calibrated_provider_set(256, dir.path()).unwrap();
        let q = providers.text.embed_text(ECHECKIN_QUESTION).unwrap();
        let cap = providers.text.embed_text(ECHECKIN_CAPTION).unwrap();
        let ocr = providers.text.embed_text(ECHECKIN_OCR).unwrap();
        let img = providers
            .image
            .embed_image(&payload_bytes(ECHECKIN_IMAGE_ID))
            .unwrap();
        assert!((cosine(&q, &cap).unwrap() - CALIBRATED_CAPTION_SIM).abs() < 1e-9);
        assert!((cosine(&q, &ocr).unwrap() - CALIBRATED_OCR_SIM).abs() < 1e-9);
        assert!((cosine(&q, &img).unwrap() - CALIBRATED_IMAGE_SIM).abs() < 1e-9);
        // Unrelated inputs still go through the plain mock path.
        let other = providers.text.embed_text("unrelated text").unwrap();
        assert!(cosine(&q, &other).unwrap().abs() < 0.5);
    }

    #[test]
    fn payloads_are_deterministic_and_distinct() {
        assert_eq!(payload_bytes("d01-img1"), payload_bytes("d01-img1"));
        assert_ne!(payload_bytes("d01-img1"), payload_bytes("d01-img2"));
        assert_eq!(payload_bytes("d01-img1").len(), 64);
    }

    #[test]
    fn reference_scores_have_seven_methods_and_nineteen_rows() {
        let csv = reference_scores_csv();
        let mut lines = csv.lines();
        let header = lines.next().unwrap();
        assert_eq!(header.split(',').count(), 8);
        assert_eq!(lines.count(), 19);
    }
}
