use std::ffi::{CStr, CString};
use std::fs;
use std::path::PathBuf;
use std::ptr;

use serp_intent_ffi::*;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = si_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn selectors() -> *mut SiSelectorConfig {
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { si_selector_config_default(&mut cfg) }, SiStatus::Ok);
    cfg
}

#[test]
fn parse_then_extract_matches_core() {
    let cfg = selectors();
    let html = c(&fs::read_to_string(fixtures().join("html/kitchen_sink.html")).unwrap());
    let mut json = ptr::null_mut();
    let status = unsafe { si_parse_html(cfg, html.as_ptr(), c("kitchen sink").as_ptr(), c("2024-01-01T00:00:00Z").as_ptr(), &mut json) };
    assert_eq!(status, SiStatus::Ok);
    let doc_json = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_string();
    assert!(doc_json.contains("\"query\""));

    let n = si_feature_count();
    assert_eq!(n, 19);
    let mut values = vec![f64::NAN; n];
    assert_eq!(unsafe { si_extract_features(json, values.as_mut_ptr(), n) }, SiStatus::Ok);

    let doc = serp_intent::schema::deserialize_document(&doc_json).unwrap();
    let spec = serp_intent::features::default_spec();
    let expected = serp_intent::features::extract_features(&doc, &spec).unwrap();
    assert_eq!(values, expected.values);

    let mut short = vec![0.0; n - 1];
    assert_eq!(unsafe { si_extract_features(json, short.as_mut_ptr(), n - 1) }, SiStatus::BufferTooSmall);
    unsafe {
        si_string_free(json);
        si_selector_config_free(cfg);
    }
}

#[test]
fn captcha_page_is_reported() {
    let cfg = selectors();
    let html = c(&fs::read_to_string(fixtures().join("html/captcha.html")).unwrap());
    let mut is_captcha = false;
    assert_eq!(unsafe { si_detect_captcha(cfg, html.as_ptr(), &mut is_captcha) }, SiStatus::Ok);
    assert!(is_captcha);
    let mut json = ptr::null_mut();
    let status = unsafe { si_parse_html(cfg, html.as_ptr(), c("q").as_ptr(), c("t").as_ptr(), &mut json) };
    assert_eq!(status, SiStatus::CaptchaDetected);
    assert!(json.is_null());
    unsafe { si_selector_config_free(cfg) };
}

#[test]
fn null_and_bad_utf8_arguments() {
    let cfg = selectors();
    let mut json = ptr::null_mut();
    let status = unsafe { si_parse_html(cfg, ptr::null(), c("q").as_ptr(), c("t").as_ptr(), &mut json) };
    assert_eq!(status, SiStatus::NullPointer);
    assert!(last_error().contains("html"));

    let bad = [0xffu8, 0xfe, 0];
    let mut flag = false;
    let status = unsafe { si_detect_captcha(cfg, bad.as_ptr().cast(), &mut flag) };
    assert_eq!(status, SiStatus::InvalidUtf8);

    assert_eq!(unsafe { si_detect_captcha(ptr::null(), c("x").as_ptr(), &mut flag) }, SiStatus::NullPointer);
    unsafe {
        si_selector_config_free(cfg);
        si_selector_config_free(ptr::null_mut());
        si_string_free(ptr::null_mut());
    }
}

#[test]
fn bad_selector_json_is_rejected() {
    let mut cfg = ptr::null_mut();
    let status = unsafe { si_selector_config_from_json(c("{not json").as_ptr(), &mut cfg) };
    assert_eq!(status, SiStatus::InvalidArgument);
    assert!(cfg.is_null());
    assert!(!last_error().is_empty());
}

#[test]
fn tagging_through_a_lexicon() {
    let lexicon = r#"{"informational": ["best"], "local_place": ["hotel", "beach"], "sexual_racism": ["lyrics"]}"#;
    let mut lex = ptr::null_mut();
    assert_eq!(unsafe { si_lexicon_from_json(c(lexicon).as_ptr(), &mut lex) }, SiStatus::Ok);

    let mut intent = SiIntent::Informational;
    let mut counts = [0usize; 3];
    let status = unsafe { si_tag_query(lex, c("beach hotel best deals").as_ptr(), false, &mut intent, counts.as_mut_ptr()) };
    assert_eq!(status, SiStatus::Ok);
    assert_eq!(intent, SiIntent::LocalPlace);
    assert_eq!(counts, [1, 2, 0]);

    // one hit each for informational and local: priority breaks the tie
    let status = unsafe { si_tag_query(lex, c("best hotel").as_ptr(), true, &mut intent, ptr::null_mut()) };
    assert_eq!(status, SiStatus::Ok);
    assert_eq!(intent, SiIntent::Informational);

    let mut bad = ptr::null_mut();
    assert_eq!(unsafe { si_lexicon_from_json(c(r#"{"spam": []}"#).as_ptr(), &mut bad) }, SiStatus::ParseFailed);
    unsafe { si_lexicon_free(lex) };
}

#[test]
fn kmeans_on_blobs() {
    let text = fs::read_to_string(fixtures().join("blobs.csv")).unwrap();
    let mut data = Vec::new();
    let mut rows = 0;
    for line in text.lines().skip(1) {
        let fields: Vec<f64> = line.split(',').filter_map(|f| f.trim().parse().ok()).collect();
        data.extend_from_slice(&fields[fields.len() - 2..]);
        rows += 1;
    }
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { si_kmeans_fit(data.as_ptr(), rows, 2, 3, 7, 10, &mut model) }, SiStatus::Ok);

    let mut wcss = 0.0;
    assert_eq!(unsafe { si_model_wcss(model, &mut wcss) }, SiStatus::Ok);
    assert!(wcss > 0.0 && wcss < 3.0 * 30.0 * 2.0, "{wcss}");

    let mut assignments = vec![usize::MAX; rows];
    assert_eq!(unsafe { si_model_assignments(model, assignments.as_mut_ptr(), rows) }, SiStatus::Ok);
    for group in assignments.chunks(30) {
        assert!(group.iter().all(|&a| a == group[0]));
    }

    let mut cluster = usize::MAX;
    assert_eq!(unsafe { si_model_predict(model, [12.1, -0.2].as_ptr(), 2, &mut cluster) }, SiStatus::Ok);
    assert_eq!(cluster, assignments[30]);
    assert_eq!(unsafe { si_model_predict(model, [1.0].as_ptr(), 1, &mut cluster) }, SiStatus::InvalidArgument);

    let mut bad = ptr::null_mut();
    assert_eq!(unsafe { si_kmeans_fit(data.as_ptr(), 2, 2, 3, 7, 10, &mut bad) }, SiStatus::InvalidArgument);
    unsafe { si_model_free(model) };
}

#[test]
fn precision_recall_on_table() {
    let cells: [u64; 9] = [1232, 54, 25, 904, 141, 26, 519, 25, 70];
    let mut p = [0.0; 3];
    let mut r = [0.0; 3];
    assert_eq!(unsafe { si_precision_recall(cells.as_ptr(), p.as_mut_ptr(), r.as_mut_ptr()) }, SiStatus::Ok);
    let expect_p = [1232.0 / 2655.0, 141.0 / 220.0, 70.0 / 121.0];
    let expect_r = [1232.0 / 1311.0, 141.0 / 1071.0, 70.0 / 614.0];
    for i in 0..3 {
        assert!((p[i] - expect_p[i]).abs() < 1e-12);
        assert!((r[i] - expect_r[i]).abs() < 1e-12);
    }
}

#[test]
fn header_declares_every_entry_point() {
    let header = fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/serp_intent.h")).unwrap();
    let src = fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("src/lib.rs")).unwrap();
    let exported: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exported.len() >= 18);
    for name in exported {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    for ty in ["typedef struct SiModel SiModel", "typedef struct SiLexicon SiLexicon", "SI_STATUS_PANIC = 99"] {
        assert!(header.contains(ty), "{ty}");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = std::process::Command::new("cc").arg("--version").output() else {
        eprintln!("no C compiler, skipping");
        return;
    };
    assert!(cc.status.success());
    let dir = tempfile_dir();
    let src = dir.join("use.c");
    fs::write(
        &src,
        "#include \"serp_intent.h\"\n\
         int main(void) {\n\
           SiModel *m = NULL;\n\
           double xs[4] = {0, 0, 1, 1};\n\
           SiStatus s = si_kmeans_fit(xs, 2, 2, 1, 0, 1, &m);\n\
           si_model_free(m);\n\
           return s == SI_STATUS_OK ? 0 : (int)s;\n\
         }\n",
    )
    .unwrap();
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let out = std::process::Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(include)
        .arg(&src)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let _ = fs::remove_dir_all(dir);
}

fn tempfile_dir() -> PathBuf {
    let dir = std::env::temp_dir().join(format!("serp-intent-ffi-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}
