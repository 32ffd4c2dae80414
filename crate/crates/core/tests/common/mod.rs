//! Shared helpers for integration tests: deterministic synthetic corpora.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

pub struct Corpus {
    pub gt_jsonl: String,
    pub pred_jsonl: String,
}

const OBJECT_NAMES: &[&str] = &[
    "coffee cup", "laptop", "bicycle", "street sign", "backpack", "umbrella", "guitar",
    "basketball", "newspaper", "potted plant",
];
const BRANDS: &[&str] = &["Acme", "Globex", "Initech", "Umbrella", "Stark"];
const ACTIVITIES: &[&str] = &[
    "riding a bicycle",
    "reading a newspaper",
    "drinking coffee",
    "playing guitar",
    "holding an umbrella",
];
const DESCRIPTIONS: &[&str] = &[
    "person in a red coat",
    "tall man with a hat",
    "woman with glasses",
    "child in a striped shirt",
    "elderly person with a cane",
];
const CELLS: &[&str] = &[
    "top-left", "top-center", "top-right", "middle-left", "center", "middle-right",
    "bottom-left", "bottom-center", "bottom-right",
];
const AGES: &[&str] = &["child", "teen", "adult", "elderly"];
const EXPRESSIONS: &[&str] = &["happy", "sad", "neutral", "angry"];
const WORDS: &[&str] = &[
    "OPEN", "SALE", "FRESH", "COFFEE", "DAILY", "SPECIAL", "TODAY", "WELCOME", "EXIT", "PARKING",
    "FREE", "WIFI", "MENU", "HOURS", "CLOSED",
];

fn grid(rng: &mut ChaCha8Rng) -> Vec<&'static str> {
    let n = rng.random_range(1..3usize);
    let mut cells: Vec<&str> = CELLS.choose_multiple(rng, n).copied().collect();
    cells.sort();
    cells
}

fn temporal(rng: &mut ChaCha8Rng) -> Vec<&'static str> {
    let all = ["start", "mid", "end", "inter"];
    let n = rng.random_range(1..3usize);
    let mut labels: Vec<&str> = all.choose_multiple(rng, n).copied().collect();
    labels.sort();
    labels
}

fn ocr_words(rng: &mut ChaCha8Rng) -> Vec<&'static str> {
    let n = rng.random_range(4..9usize);
    (0..n).map(|_| *WORDS.choose(rng).unwrap()).collect()
}

/// Groups words into blocks of 1-3 words.
fn segment(rng: &mut ChaCha8Rng, words: &[&str]) -> Vec<String> {
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < words.len() {
        let k = rng.random_range(1..4usize).min(words.len() - i);
        blocks.push(words[i..i + k].join(" "));
        i += k;
    }
    blocks
}

/// Builds a deterministic mixed corpus: conforming pairs with realistic
/// disagreements, a couple of fenced predictions, and one garbage line.
pub fn synthetic_corpus(samples: usize, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gt_lines = Vec::new();
    let mut pred_lines = Vec::new();

    for idx in 0..samples {
        let id = format!("sample_{idx:04}");
        let is_video = idx % 4 == 3;
        let kind = if is_video { "video" } else { "image" };

        let object_count = rng.random_range(1..4usize);
        let gt_objects: Vec<_> = (0..object_count)
            .map(|_| {
                let name = *OBJECT_NAMES.choose(&mut rng).unwrap();
                json!({
                    "name": name,
                    "pos": grid(&mut rng),
                    "temp": if is_video { temporal(&mut rng) } else { vec![] },
                    "conf": (rng.random_range(50..100) as f64) / 100.0,
                })
            })
            .collect();
        // predictions drop the last object half the time and add noise
        let mut pred_objects: Vec<_> = gt_objects.clone();
        if rng.random_bool(0.5) && pred_objects.len() > 1 {
            pred_objects.pop();
        }
        if rng.random_bool(0.3) {
            pred_objects.push(json!({
                "name": "mystery gadget",
                "pos": grid(&mut rng),
                "temp": if is_video { temporal(&mut rng) } else { vec![] },
                "conf": 0.5,
            }));
        }

        let human = |rng: &mut ChaCha8Rng| {
            json!({
                "activity": *ACTIVITIES.choose(rng).unwrap(),
                "description": *DESCRIPTIONS.choose(rng).unwrap(),
                "age": *AGES.choose(rng).unwrap(),
                "expression": *EXPRESSIONS.choose(rng).unwrap(),
                "face_visible": rng.random_bool(0.7),
                "pos": grid(rng),
                "temp": [],
                "conf": 0.9,
            })
        };
        let mut gt_humans = Vec::new();
        let mut pred_humans = Vec::new();
        if idx % 2 == 0 {
            let mut h = human(&mut rng);
            if is_video {
                h["temp"] = json!(temporal(&mut rng));
            }
            gt_humans.push(h.clone());
            // prediction keeps the matching key but may flip an attribute
            let mut ph = h.clone();
            if rng.random_bool(0.4) {
                ph["expression"] = json!(*EXPRESSIONS.choose(&mut rng).unwrap());
            }
            pred_humans.push(ph);
        }

        let gt_logos: Vec<_> = if idx % 3 == 0 {
            vec![json!({
                "brand": *BRANDS.choose(&mut rng).unwrap(),
                "pos": grid(&mut rng),
                "temp": if is_video { temporal(&mut rng) } else { vec![] },
                "conf": 0.8,
            })]
        } else {
            vec![]
        };
        let pred_logos = gt_logos.clone();

        let words = ocr_words(&mut rng);
        let gt_ocr = segment(&mut rng, &words);
        let pred_ocr = {
            let mut blocks = segment(&mut rng, &words);
            blocks.shuffle(&mut rng);
            blocks
        };

        let scene = if idx % 2 == 0 { "city street" } else { "cafe interior" };
        let description = format!(
            "The scene shows {}. A sign reads {}. The mood is calm.",
            scene,
            words.first().unwrap_or(&"nothing")
        );
        let media = json!({
            "description": description,
            "scene": scene,
            "camera_perspective": "eye-level",
            "quality": "high",
            "dominant_colors": ["red", "blue"],
            "nsfw": false,
        });
        let pred_media = {
            let mut m = media.clone();
            if rng.random_bool(0.3) {
                m["dominant_colors"] = json!(["red", "green"]);
            }
            if rng.random_bool(0.2) {
                m["quality"] = json!("low");
            }
            m
        };

        let gt = json!({
            "sample_id": id,
            "media_kind": kind,
            "objects": gt_objects,
            "humans": gt_humans,
            "logos": gt_logos,
            "ocr": gt_ocr,
            "media": media,
        });
        let pred = json!({
            "sample_id": id,
            "media_kind": kind,
            "objects": pred_objects,
            "humans": pred_humans,
            "logos": pred_logos,
            "ocr": pred_ocr,
            "media": pred_media,
        });

        gt_lines.push(gt.to_string());
        let pred_text = pred.to_string();
        // a couple of fenced outputs and one garbage line keep the
        // reliability metric honest
        if idx == 1 || idx == 5 {
            pred_lines.push(format!("```json\n{pred_text}\n```").replace('\n', " "));
        } else if idx == 7 {
            pred_lines.push("total nonsense, not json".to_string());
        } else {
            pred_lines.push(pred_text);
        }
    }

    Corpus {
        gt_jsonl: gt_lines.join("\n") + "\n",
        pred_jsonl: pred_lines.join("\n") + "\n",
    }
}
