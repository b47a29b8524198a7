//! Rendered prompts compared byte-for-byte against files in `tests/golden`.
//! Run with `UPDATE_GOLDEN=1` to rewrite them after a deliberate template change.

mod support;

use std::path::PathBuf;

use layoutforge_core::prompt::{build_edit_prompt, build_generation_prompt, build_judge_prompt, build_summary_prompt, PromptBundle};
use support::completions;

fn golden(name: &str, bundle: &PromptBundle) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(format!("{name}.txt"));
    let rendered = format!(
        "### template: {}\n### fingerprint: {}\n### system\n{}\n### user\n{}",
        bundle.template_id.as_str(),
        bundle.fingerprint(),
        bundle.system_text,
        bundle.user_text
    );
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, &rendered).unwrap();
        return;
    }
    let want = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}; run with UPDATE_GOLDEN=1", path.display()));
    assert!(want == rendered, "{name} differs from {}", path.display());
}

#[test]
fn generation() {
    golden("generate", &build_generation_prompt(&completions::task()).unwrap());
}

#[test]
fn edit_add_and_remove() {
    let l = completions::layout();
    golden("edit_add", &build_edit_prompt(&l, "add a floor lamp beside the desk").unwrap());
    golden("edit_remove", &build_edit_prompt(&l, "remove the bookshelf").unwrap());
}

#[test]
fn judge() {
    golden("judge", &build_judge_prompt(&completions::layout(), "warm and minimalist"));
}

#[test]
fn summary() {
    golden("summarize", &build_summary_prompt(&completions::layout()));
}

#[test]
fn fingerprints_separate_inputs() {
    let l = completions::layout();
    let a = build_edit_prompt(&l, "add a lamp").unwrap();
    let b = build_edit_prompt(&l, "add a rug").unwrap();
    assert_ne!(a.fingerprint(), b.fingerprint());
    assert_eq!(a.fingerprint(), build_edit_prompt(&l, "add a lamp").unwrap().fingerprint());
}
