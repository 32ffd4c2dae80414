//! Strict and lenient conversion of raw model output into records.
//!
//! The lenient repairs are deliberately bounded so the reliability metric
//! stays meaningful: code-fence stripping, first-balanced-object
//! extraction, unknown-field dropping, and enum case folding. Every repair
//! lands in the outcome's diagnostics. Anything else — type mismatches,
//! unknown enum values, unknown grid cells, missing required fields — is
//! invalid in both modes.

use serde_json::{Map, Value};

use super::{
    AgeGroup, AnnotationRecord, EntityHuman, EntityLogo, EntityObject, Expression, MediaDescription,
    MediaKind, OcrBlock, ParseOutcome,
};
use crate::grid::{GridCell, GridSet, TemporalLabel, TemporalSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseMode {
    Strict,
    Lenient,
}

/// Parses arbitrary model output into an annotation record. Total: any
/// input yields an outcome, never a panic.
pub fn parse_record(raw_text: &str, mode: ParseMode) -> ParseOutcome {
    let mut repairs: Vec<String> = Vec::new();

    let value = match mode {
        ParseMode::Strict => match serde_json::from_str::<Value>(raw_text) {
            Ok(v) => v,
            Err(e) => return ParseOutcome::invalid(vec![format!("not valid JSON: {e}")]),
        },
        ParseMode::Lenient => match lenient_json(raw_text, &mut repairs) {
            Some(v) => v,
            None => {
                repairs.push("no parseable JSON object found".into());
                return ParseOutcome::invalid(repairs);
            }
        },
    };

    let map = match value {
        Value::Object(map) => map,
        other => {
            repairs.push(format!(
                "top-level JSON value is {}, expected an object",
                kind_name(&other)
            ));
            return ParseOutcome::invalid(repairs);
        }
    };

    let mut ctx = Ctx {
        mode,
        repairs,
        errors: Vec::new(),
    };
    let record = walk_record(&map, &mut ctx);
    let Ctx { repairs, errors, .. } = ctx;
    if !errors.is_empty() {
        let mut diagnostics = repairs;
        diagnostics.extend(errors);
        return ParseOutcome::invalid(diagnostics);
    }
    let record = record.expect("record present when no errors");
    if repairs.is_empty() {
        ParseOutcome::valid(record)
    } else {
        ParseOutcome::repaired(record, repairs)
    }
}

/// Lenient front end: direct parse, then fence stripping, then balanced
/// object extraction.
fn lenient_json(raw: &str, repairs: &mut Vec<String>) -> Option<Value> {
    if let Ok(v) = serde_json::from_str::<Value>(raw) {
        return Some(v);
    }
    let mut text = raw;
    if let Some(stripped) = strip_code_fence(text) {
        repairs.push("stripped code fence".into());
        text = stripped;
        if let Ok(v) = serde_json::from_str::<Value>(text) {
            return Some(v);
        }
    }
    if let Some(v) = extract_parseable_object(text) {
        repairs.push("extracted first balanced JSON object".into());
        return Some(v);
    }
    None
}

/// Tries each `{` as a candidate object start (stray braces in chatter can
/// precede the real object) and returns the first balanced substring that
/// parses. Attempts are capped so adversarial inputs stay linear-ish.
fn extract_parseable_object(text: &str) -> Option<Value> {
    let mut from = 0;
    for _ in 0..64 {
        let start = from + text[from..].find('{')?;
        if let Some(candidate) = extract_balanced_object(&text[start..]) {
            if let Ok(v) = serde_json::from_str::<Value>(candidate) {
                if v.is_object() {
                    return Some(v);
                }
            }
        }
        from = start + 1;
    }
    None
}

fn strip_code_fence(text: &str) -> Option<&str> {
    let trimmed = text.trim();
    let rest = trimmed.strip_prefix("```")?;
    let rest = rest.strip_suffix("```")?;
    // Drop a language tag such as "json" on the opening line.
    match rest.find('\n') {
        Some(i) if !rest[..i].contains('{') => Some(&rest[i + 1..]),
        _ => Some(rest),
    }
}

/// Balanced `{...}` substring starting at the first byte (which must be
/// `{`), string- and escape-aware.
fn extract_balanced_object(text: &str) -> Option<&str> {
    let bytes = text.as_bytes();
    if bytes.first() != Some(&b'{') {
        return None;
    }
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (offset, &b) in bytes.iter().enumerate() {
        if in_string {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'"' {
                in_string = false;
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&text[..offset + 1]);
                }
            }
            _ => {}
        }
    }
    None
}

fn kind_name(value: &Value) -> &'static str {
    match value {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Array(_) => "an array",
        Value::Object(_) => "an object",
    }
}

struct Ctx {
    mode: ParseMode,
    repairs: Vec<String>,
    errors: Vec<String>,
}

impl Ctx {
    fn error(&mut self, msg: String) {
        self.errors.push(msg);
    }

    fn unknown_field(&mut self, path: &str, key: &str) {
        match self.mode {
            ParseMode::Strict => self.errors.push(format!("{path}.{key}: unknown field")),
            ParseMode::Lenient => self.repairs.push(format!("dropped unknown field {path}.{key}")),
        }
    }
}

fn check_keys(map: &Map<String, Value>, known: &[&str], path: &str, ctx: &mut Ctx) {
    for key in map.keys() {
        if !known.contains(&key.as_str()) {
            ctx.unknown_field(path, key);
        }
    }
}

fn want_str(value: &Value, path: &str, ctx: &mut Ctx) -> Option<String> {
    match value {
        Value::String(s) => Some(s.clone()),
        other => {
            ctx.error(format!("{path}: expected a string, got {}", kind_name(other)));
            None
        }
    }
}

fn want_bool(value: &Value, path: &str, ctx: &mut Ctx) -> Option<bool> {
    match value {
        Value::Bool(b) => Some(*b),
        other => {
            ctx.error(format!("{path}: expected a boolean, got {}", kind_name(other)));
            None
        }
    }
}

fn want_f64(value: &Value, path: &str, ctx: &mut Ctx) -> Option<f64> {
    match value {
        Value::Number(n) => n.as_f64().or_else(|| {
            ctx.error(format!("{path}: number out of range"));
            None
        }),
        other => {
            ctx.error(format!("{path}: expected a number, got {}", kind_name(other)));
            None
        }
    }
}

fn want_string_array(value: &Value, path: &str, ctx: &mut Ctx) -> Option<Vec<String>> {
    let items = match value {
        Value::Array(items) => items,
        other => {
            ctx.error(format!("{path}: expected an array, got {}", kind_name(other)));
            return None;
        }
    };
    let mut out = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        out.push(want_str(item, &format!("{path}[{i}]"), ctx)?);
    }
    Some(out)
}

/// Exact-case enum lookup, with case folding as a lenient repair.
fn want_enum<T: Copy>(
    raw: &str,
    variants: &[(&str, T)],
    path: &str,
    ctx: &mut Ctx,
) -> Option<T> {
    if let Some((_, v)) = variants.iter().find(|(name, _)| *name == raw) {
        return Some(*v);
    }
    let folded = raw.to_lowercase();
    if let Some((name, v)) = variants.iter().find(|(name, _)| *name == folded) {
        match ctx.mode {
            ParseMode::Strict => {
                ctx.error(format!("{path}: value {raw:?} has wrong case (expected {name:?})"));
                return None;
            }
            ParseMode::Lenient => {
                ctx.repairs.push(format!("coerced enum case at {path} ({raw:?} -> {name:?})"));
                return Some(*v);
            }
        }
    }
    let names: Vec<&str> = variants.iter().map(|(n, _)| *n).collect();
    ctx.error(format!(
        "{path}: unknown value {raw:?} (expected one of {names:?})"
    ));
    None
}

fn want_grid(value: &Value, path: &str, ctx: &mut Ctx) -> Option<GridSet> {
    let raw = want_string_array(value, path, ctx)?;
    let mut set = GridSet::default();
    for s in &raw {
        match GridCell::parse(s) {
            Some(cell) => {
                set.0.insert(cell);
            }
            None => {
                ctx.error(format!("{path}: unknown grid cell {s:?}"));
                return None;
            }
        }
    }
    Some(set)
}

fn want_temporal(value: &Value, path: &str, ctx: &mut Ctx) -> Option<TemporalSet> {
    let raw = want_string_array(value, path, ctx)?;
    let mut set = TemporalSet::default();
    for s in &raw {
        match TemporalLabel::parse(s) {
            Some(label) => {
                set.0.insert(label);
            }
            None => {
                ctx.error(format!("{path}: unknown temporal label {s:?}"));
                return None;
            }
        }
    }
    Some(set)
}

/// Shared position/temporal/confidence tail of every entity. Missing `pos`
/// reads as empty (validation flags it); missing `temp` is legal on image
/// records; missing `conf` defaults to 1.0.
fn entity_tail(
    map: &Map<String, Value>,
    path: &str,
    ctx: &mut Ctx,
) -> (GridSet, TemporalSet, f64) {
    let pos = map
        .get("pos")
        .and_then(|v| want_grid(v, &format!("{path}.pos"), ctx))
        .unwrap_or_default();
    let temp = map
        .get("temp")
        .and_then(|v| want_temporal(v, &format!("{path}.temp"), ctx))
        .unwrap_or_default();
    let conf = map
        .get("conf")
        .and_then(|v| want_f64(v, &format!("{path}.conf"), ctx))
        .unwrap_or(1.0);
    (pos, temp, conf)
}

fn walk_object(map: &Map<String, Value>, path: &str, ctx: &mut Ctx) -> Option<EntityObject> {
    check_keys(map, &["name", "pos", "temp", "conf"], path, ctx);
    let name = match map.get("name") {
        Some(v) => want_str(v, &format!("{path}.name"), ctx)?,
        None => {
            ctx.error(format!("{path}.name: missing required field"));
            return None;
        }
    };
    let (pos, temp, conf) = entity_tail(map, path, ctx);
    Some(EntityObject { name, pos, temp, conf })
}

const AGE_VARIANTS: [(&str, AgeGroup); 4] = [
    ("child", AgeGroup::Child),
    ("teen", AgeGroup::Teen),
    ("adult", AgeGroup::Adult),
    ("elderly", AgeGroup::Elderly),
];

const EXPRESSION_VARIANTS: [(&str, Expression); 4] = [
    ("happy", Expression::Happy),
    ("sad", Expression::Sad),
    ("neutral", Expression::Neutral),
    ("angry", Expression::Angry),
];

fn walk_human(map: &Map<String, Value>, path: &str, ctx: &mut Ctx) -> Option<EntityHuman> {
    check_keys(
        map,
        &["activity", "description", "age", "expression", "face_visible", "pos", "temp", "conf"],
        path,
        ctx,
    );
    let required_str = |key: &str, ctx: &mut Ctx| -> Option<String> {
        match map.get(key) {
            Some(v) => want_str(v, &format!("{path}.{key}"), ctx),
            None => {
                ctx.error(format!("{path}.{key}: missing required field"));
                None
            }
        }
    };
    let activity = required_str("activity", ctx);
    let description = required_str("description", ctx);
    let age_raw = required_str("age", ctx);
    let expression_raw = required_str("expression", ctx);
    let face_visible = match map.get("face_visible") {
        Some(v) => want_bool(v, &format!("{path}.face_visible"), ctx),
        None => {
            ctx.error(format!("{path}.face_visible: missing required field"));
            None
        }
    };
    let age = age_raw.and_then(|s| want_enum(&s, &AGE_VARIANTS, &format!("{path}.age"), ctx));
    let expression = expression_raw
        .and_then(|s| want_enum(&s, &EXPRESSION_VARIANTS, &format!("{path}.expression"), ctx));
    let (pos, temp, conf) = entity_tail(map, path, ctx);
    Some(EntityHuman {
        activity: activity?,
        description: description?,
        age: age?,
        expression: expression?,
        face_visible: face_visible?,
        pos,
        temp,
        conf,
    })
}

fn walk_logo(map: &Map<String, Value>, path: &str, ctx: &mut Ctx) -> Option<EntityLogo> {
    check_keys(map, &["brand", "pos", "temp", "conf"], path, ctx);
    let brand = match map.get("brand") {
        Some(v) => want_str(v, &format!("{path}.brand"), ctx)?,
        None => {
            ctx.error(format!("{path}.brand: missing required field"));
            return None;
        }
    };
    let (pos, temp, conf) = entity_tail(map, path, ctx);
    Some(EntityLogo { brand, pos, temp, conf })
}

fn walk_ocr_block(value: &Value, path: &str, ctx: &mut Ctx) -> Option<OcrBlock> {
    match value {
        // A bare string is accepted shorthand for a block without hints.
        Value::String(text) => Some(OcrBlock {
            text: text.clone(),
            pos: None,
            temp: None,
        }),
        Value::Object(map) => {
            check_keys(map, &["text", "pos", "temp"], path, ctx);
            let text = match map.get("text") {
                Some(v) => want_str(v, &format!("{path}.text"), ctx)?,
                None => {
                    ctx.error(format!("{path}.text: missing required field"));
                    return None;
                }
            };
            let pos = match map.get("pos") {
                Some(v) => Some(want_grid(v, &format!("{path}.pos"), ctx)?),
                None => None,
            };
            let temp = match map.get("temp") {
                Some(v) => Some(want_temporal(v, &format!("{path}.temp"), ctx)?),
                None => None,
            };
            Some(OcrBlock { text, pos, temp })
        }
        other => {
            ctx.error(format!(
                "{path}: expected a string or object, got {}",
                kind_name(other)
            ));
            None
        }
    }
}

fn walk_media(map: &Map<String, Value>, path: &str, ctx: &mut Ctx) -> MediaDescription {
    check_keys(
        map,
        &["description", "scene", "camera_perspective", "quality", "dominant_colors", "nsfw"],
        path,
        ctx,
    );
    let text_field = |key: &str, ctx: &mut Ctx| -> String {
        map.get(key)
            .and_then(|v| want_str(v, &format!("{path}.{key}"), ctx))
            .unwrap_or_default()
    };
    let description = text_field("description", ctx);
    let scene = text_field("scene", ctx);
    let camera_perspective = text_field("camera_perspective", ctx);
    let quality = text_field("quality", ctx);
    let dominant_colors = map
        .get("dominant_colors")
        .and_then(|v| want_string_array(v, &format!("{path}.dominant_colors"), ctx))
        .map(|colors| {
            colors
                .into_iter()
                .map(|c| c.trim().to_lowercase())
                .filter(|c| !c.is_empty())
                .collect()
        })
        .unwrap_or_default();
    let nsfw = map
        .get("nsfw")
        .and_then(|v| want_bool(v, &format!("{path}.nsfw"), ctx));
    MediaDescription {
        description,
        scene,
        camera_perspective,
        quality,
        dominant_colors,
        nsfw,
    }
}

const MEDIA_KIND_VARIANTS: [(&str, MediaKind); 2] =
    [("image", MediaKind::Image), ("video", MediaKind::Video)];

fn walk_entities<T>(
    map: &Map<String, Value>,
    key: &str,
    ctx: &mut Ctx,
    walk: impl Fn(&Map<String, Value>, &str, &mut Ctx) -> Option<T>,
) -> Vec<T> {
    let Some(value) = map.get(key) else {
        return Vec::new();
    };
    let items = match value {
        Value::Array(items) => items,
        other => {
            ctx.error(format!("$.{key}: expected an array, got {}", kind_name(other)));
            return Vec::new();
        }
    };
    let mut out = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        let path = format!("$.{key}[{i}]");
        match item {
            Value::Object(entity) => {
                if let Some(parsed) = walk(entity, &path, ctx) {
                    out.push(parsed);
                }
            }
            other => ctx.error(format!("{path}: expected an object, got {}", kind_name(other))),
        }
    }
    out
}

fn walk_record(map: &Map<String, Value>, ctx: &mut Ctx) -> Option<AnnotationRecord> {
    check_keys(
        map,
        &["sample_id", "media_kind", "objects", "humans", "logos", "ocr", "media", "media_description"],
        "$",
        ctx,
    );

    let sample_id = match map.get("sample_id") {
        Some(v) => want_str(v, "$.sample_id", ctx),
        None => None,
    };

    let media_kind = match map.get("media_kind") {
        Some(v) => want_str(v, "$.media_kind", ctx)
            .and_then(|s| want_enum(&s, &MEDIA_KIND_VARIANTS, "$.media_kind", ctx)),
        None => {
            ctx.error("$.media_kind: missing required field".into());
            None
        }
    };

    let objects = walk_entities(map, "objects", ctx, walk_object);
    let humans = walk_entities(map, "humans", ctx, walk_human);
    let logos = walk_entities(map, "logos", ctx, walk_logo);

    let ocr = match map.get("ocr") {
        None => Vec::new(),
        Some(Value::Array(items)) => {
            let mut out = Vec::with_capacity(items.len());
            for (i, item) in items.iter().enumerate() {
                if let Some(block) = walk_ocr_block(item, &format!("$.ocr[{i}]"), ctx) {
                    out.push(block);
                }
            }
            out
        }
        Some(other) => {
            ctx.error(format!("$.ocr: expected an array, got {}", kind_name(other)));
            Vec::new()
        }
    };

    // "media_description" is an accepted alias for "media".
    let media_value = match (map.get("media"), map.get("media_description")) {
        (Some(m), Some(_)) => {
            match ctx.mode {
                ParseMode::Strict => ctx.error(
                    "$.media_description: duplicates $.media".into(),
                ),
                ParseMode::Lenient => ctx
                    .repairs
                    .push("dropped duplicate field $.media_description".into()),
            }
            Some(m)
        }
        (Some(m), None) => Some(m),
        (None, Some(m)) => Some(m),
        (None, None) => None,
    };
    let media = match media_value {
        Some(Value::Object(m)) => walk_media(m, "$.media", ctx),
        Some(other) => {
            ctx.error(format!("$.media: expected an object, got {}", kind_name(other)));
            MediaDescription::default()
        }
        None => MediaDescription::default(),
    };

    if !ctx.errors.is_empty() {
        return None;
    }
    Some(AnnotationRecord {
        sample_id,
        media_kind: media_kind?,
        objects,
        humans,
        logos,
        ocr,
        media,
    })
}
