//! Annotated completion corpus for the parser.

use layoutforge_core::prompt::{format_completion, parse_completion, parse_completion_for_task, ParseError};
use layoutforge_core::scene::{serialize_layout, BoxSize, FloorPlan, Layout, ObjectSpec, PlacedObject, Placement, Point3, RoomType, TaskSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    Strict,
    Task,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Expect {
    Objects(usize),
    NoAnswer,
    Malformed,
}

pub struct Case {
    pub name: &'static str,
    pub mode: Mode,
    pub text: String,
    pub expect: Expect,
}

pub fn task() -> TaskSpec {
    TaskSpec::new(
        "a study",
        RoomType::Bedroom,
        FloorPlan::rectangle(4.0, 3.6).unwrap(),
        vec![
            ObjectSpec::new("writing desk", 1, Some(BoxSize::new(1.2, 0.6, 0.75).unwrap())),
            ObjectSpec::new("office chair", 1, Some(BoxSize::new(0.5, 0.5, 0.9).unwrap())),
            ObjectSpec::new("bookshelf", 1, Some(BoxSize::new(0.9, 0.35, 1.8).unwrap())),
        ],
    )
    .unwrap()
}

pub fn layout() -> Layout {
    let t = task();
    let spots = [(0.0, 1.4, std::f64::consts::PI), (0.0, 0.75, 0.0), (-1.55, -1.0, std::f64::consts::FRAC_PI_2)];
    let objects = t
        .instance_ids()
        .into_iter()
        .zip(spots)
        .map(|((id, spec), (x, y, r))| PlacedObject::new(id, spec.description.clone(), spec.size.unwrap(), Placement::new(Point3::new(x, y, 0.0), r)))
        .collect();
    Layout::new(t.room_type, t.floor.clone(), objects).unwrap()
}

const TEMPLATE_ARRAY: &str = r#"[
  {"instance_id": "desk_1", "object": "writing desk", "coordinates": [{"x": 0.0, "y": 1.4, "z": 0.0}], "rotate": [{"angle": 3.14159}]},
  {"object": "office chair", "coordinates": [{"x": 0.0, "y": 0.75, "z": 0.0}], "rotate": [{"angle": 0.0}]},
  {"object": "bookshelf", "coordinates": [{"x": -1.55, "y": -1.0, "z": 0.0}], "rotate": [{"angle": 1.5708}]}
]"#;

pub fn corpus() -> Vec<Case> {
    let l = layout();
    let doc = serialize_layout(&l);
    let compact = serde_json::to_string(&l).unwrap();
    let canonical = format_completion("Desk against the wall, chair tucked in, shelf by the door.", &l);
    let wrap = |answer: &str| format!("<reasoning>\n[Reason]\nplan\n[/Reason]\n</reasoning>\n<answer>\n[Design]\n{answer}\n[/Design]\n</answer>");
    let with = |s: &str, from: &str, to: &str| s.replacen(from, to, 1);
    let mut v = Vec::new();
    let mut add = |name: &'static str, mode: Mode, text: String, expect: Expect| v.push(Case { name, mode, text, expect });

    add("canonical_tagged", Mode::Strict, canonical.clone(), Expect::Objects(3));
    add("uppercase_tags", Mode::Strict, canonical.replace("<reasoning>", "<REASONING>").replace("</reasoning>", "</REASONING>").replace("<answer>", "<Answer>").replace("</answer>", "</ANSWER>"), Expect::Objects(3));
    add("bracket_markers_only", Mode::Strict, format!("[Reason]\nplan\n[/Reason]\n[Design]\n{doc}\n[/Design]"), Expect::Objects(3));
    add("fenced_json", Mode::Strict, wrap(&format!("```json\n{doc}\n```")), Expect::Objects(3));
    add("prose_around_tags", Mode::Strict, format!("Sure, here is a design.\n{canonical}\nLet me know if you want changes."), Expect::Objects(3));
    add("prose_inside_answer", Mode::Strict, wrap(&format!("The final layout is {compact} as requested.")), Expect::Objects(3));
    add("unclosed_answer_complete_json", Mode::Strict, format!("<reasoning>plan</reasoning>\n<answer>\n{doc}\n"), Expect::Objects(3));
    add("truncated_mid_object", Mode::Strict, format!("<reasoning>plan</reasoning>\n<answer>\n{}", &doc[..doc.len() * 2 / 3]), Expect::Malformed);
    let cut = doc.find("office").unwrap() + 3;
    add("truncated_mid_string", Mode::Strict, format!("<answer>{}", &doc[..cut]), Expect::Malformed);
    add("bare_json_no_block", Mode::Strict, doc.clone(), Expect::NoAnswer);
    add("empty_answer", Mode::Strict, "<reasoning>plan</reasoning><answer></answer>".to_string(), Expect::Malformed);
    add("prose_only_answer", Mode::Strict, wrap("I could not decide on a layout."), Expect::Malformed);
    add("template_array_task", Mode::Task, wrap(TEMPLATE_ARRAY), Expect::Objects(3));
    add("template_array_strict", Mode::Strict, wrap(TEMPLATE_ARRAY), Expect::Malformed);
    add("objects_wrapper_task", Mode::Task, wrap(&format!("{{\"objects\": {TEMPLATE_ARRAY}}}")), Expect::Objects(3));
    add("echoed_input", Mode::Strict, wrap(&format!("{{\"task\": {{\"room_type\": \"bedroom\"}}, \"layout\": {compact}}}")), Expect::Objects(3));
    let last = compact.rfind("}]").unwrap();
    add("trailing_comma", Mode::Strict, wrap(&format!("{},{}", &compact[..=last], &compact[last + 1..])), Expect::Malformed);
    add("single_quoted", Mode::Strict, wrap(&compact.replace('"', "'")), Expect::Malformed);
    add("draft_object_first", Mode::Strict, wrap(&format!("Draft notes: {{\"note\": \"draft\"}}\nFinal: {compact}")), Expect::Objects(3));
    add("unicode_text", Mode::Strict, format_completion("Schreibtisch an der Wand, Stuhl davor. 书架靠门。", &l).replace("writing desk", "écritoire desk"), Expect::Objects(3));
    add("missing_coordinates", Mode::Strict, wrap(&with(&compact, "\"coordinates\"", "\"coords\"")), Expect::Malformed);
    add("negative_z", Mode::Strict, wrap(&with(&compact, "\"z\":0.0", "\"z\":-0.5")), Expect::Malformed);
    add("duplicate_ids", Mode::Strict, wrap(&compact.replace("office_chair_1", "writing_desk_1")), Expect::Malformed);
    add("scalar_rotate", Mode::Strict, wrap(&with(&compact, "{\"angle\":0.0}", "0.0")), Expect::Malformed);
    add("braces_in_strings", Mode::Strict, wrap(&compact.replace("bookshelf", "shelf {tall] unit")), Expect::Objects(3));
    add("escaped_quotes", Mode::Strict, wrap(&compact.replace("bookshelf", "9\\\" shelf")), Expect::Objects(3));
    add("design_without_close", Mode::Strict, format!("[Reason]plan[/Reason]\n[Design]\n{doc}\nthat is all"), Expect::Objects(3));
    add("reasoning_only", Mode::Strict, "<reasoning>\n[Reason]\nStill thinking.\n[/Reason]\n</reasoning>".to_string(), Expect::NoAnswer);
    add("empty_text", Mode::Strict, String::new(), Expect::NoAnswer);
    add("crlf_lines", Mode::Strict, canonical.replace('\n', "\r\n"), Expect::Objects(3));
    v
}

/// Runs one case; `Err` describes a mismatch with the annotation.
pub fn check(case: &Case) -> Result<(), String> {
    let t = task();
    let got = match case.mode {
        Mode::Strict => parse_completion(&case.text),
        Mode::Task => parse_completion_for_task(&case.text, &t),
    };
    match (case.expect, &got) {
        (Expect::Objects(n), Ok(p)) if p.layout.objects.len() == n => Ok(()),
        (Expect::NoAnswer, Err(ParseError::NoAnswerBlock)) => Ok(()),
        (Expect::Malformed, Err(ParseError::MalformedLayout { offset, .. })) if *offset <= case.text.len() => Ok(()),
        _ => Err(format!("{}: expected {:?}, got {:?}", case.name, case.expect, got.map(|p| p.layout.objects.len()))),
    }
}
