//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails without a documented deviation.

mod common;

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use image::{Rgba, RgbaImage};
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vetl_core::annotate::{annotate_elements, annotate_input, AnnotateError, AnnotateOptions, BLUE, RED};
use vetl_core::bandit::{softmax, BanditTables, Branch, SelectionContext};
use vetl_core::dom::DomDocument;
use vetl_core::explorer::{run, ActionKind, Models, RunConfig, RunResult, Variant};
use vetl_core::geometry::Viewport;
use vetl_core::model::{Matcher, ModelClient, ScriptEntry, ScriptedBackend};
use vetl_core::prompt::{
    build_element_prompt, build_input_prompt, parse_button_answer, parse_text_answer, AnswerKind, InputFlavor,
    PromptOptions, TEXT_MARKER,
};
use vetl_core::report::{load_run, verify_run};
use vetl_core::sim::{FixtureSite, SimBrowser};
use vetl_core::{ElementKey, Rect};

use common::{fixture_page, ideal_client, snapshot_of};

struct Outcome {
    pass: bool,
    detail: String,
    /// Set when a failure is an analysed, recorded deviation.
    known: Option<String>,
}

fn check(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass: ok, detail: detail.into(), known: None }
}

fn within(elapsed: Duration, limit: Duration, mut o: Outcome) -> Outcome {
    o.detail = format!("{}, {:.2}s (limit {}s)", o.detail, elapsed.as_secs_f64(), limit.as_secs());
    if elapsed > limit {
        o.pass = false;
    }
    o
}

fn timed(limit_secs: u64, f: impl FnOnce() -> Outcome) -> Outcome {
    let t = Instant::now();
    let o = f();
    within(t.elapsed(), Duration::from_secs(limit_secs), o)
}

fn attr_html(attrs: &[(&str, &str)]) -> String {
    attrs
        .iter()
        .map(|(k, v)| if v.is_empty() { k.to_string() } else { format!("{k}=\"{v}\"") })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Constraint rows with the pattern texts of the reference table.
fn constraint_rows() -> Vec<(&'static str, &'static str, &'static str, Vec<&'static str>)> {
    vec![
        ("input", "text", "maxlength", vec!["5", "32", "255"]),
        ("input", "text", "minlength", vec!["1", "3", "8"]),
        ("input", "password", "maxlength", vec!["12", "20", "64"]),
        ("input", "password", "minlength", vec!["6", "8", "10"]),
        ("input", "email", "multiple", vec!["", "multiple", "true"]),
        ("input", "number", "max", vec!["10", "100", "2.5"]),
        ("input", "number", "min", vec!["0", "-5", "1.5"]),
        ("input", "number", "step", vec!["1", "5", "0.01"]),
        ("input", "search", "/", vec!["a", "b", "c"]),
        ("input", "tel", "pattern", vec!["[0-9]{3}", "\\d{10}", "[0-9]{3}-[0-9]{4}"]),
        ("input", "url", "/", vec!["a", "b", "c"]),
        ("textarea", "/", "/", vec!["a", "b", "c"]),
    ]
}

fn expected_sentence(ty: &str, attr: &str, value: &str, min: &str) -> Option<String> {
    match (ty, attr) {
        ("text", "maxlength") => Some(format!("maximum length of text is {value}")),
        ("text", "minlength") => Some(format!("minimum length of text is {value}")),
        ("password", "maxlength") => Some(format!("maximum length of password is {value}")),
        ("password", "minlength") => Some(format!("minimum length of password is {value}")),
        ("email", "multiple") => Some("multiple emails are allowed, with each email separated by a comma".into()),
        ("number", "max") => Some(format!("maximum value of number is {value}")),
        ("number", "min") => Some(format!("minimum value of number is {value}")),
        ("number", "step") => Some(format!("number interval is {value} since {min}")),
        ("tel", "pattern") => Some(format!("telephone number has regular expression pattern {value}")),
        ("/", "/") => Some("multi-line input is allowed".into()),
        _ => None,
    }
}

fn criterion_1() -> Outcome {
    timed(1, || {
        let mut cases = 0;
        let mut mismatches = Vec::new();
        let mut rows_hit = BTreeSet::new();
        for (row, (tag, ty, attr, values)) in constraint_rows().into_iter().enumerate() {
            for (i, value) in values.iter().enumerate() {
                let min = ["2", "0", "-1"][i];
                let html = match (tag, attr) {
                    ("textarea", _) => format!("<textarea name=\"{value}\"></textarea>"),
                    (_, "/") => format!("<input type=\"{ty}\" name=\"{value}\">"),
                    (_, "step") => format!("<input type=\"{ty}\" {} min=\"{min}\">", attr_html(&[(attr, value)])),
                    _ => format!("<input type=\"{ty}\" {}>", attr_html(&[(attr, value)])),
                };
                let snap = snapshot_of(&format!("<html><body>{html}</body></html>"));
                let widgets = DomDocument::parse(&snap).unwrap().detect_input_widgets();
                let got: Vec<String> = widgets[0].constraints.iter().map(|c| c.text.clone()).collect();
                let mut want = Vec::new();
                if attr == "step" {
                    want.push(format!("minimum value of number is {min}"));
                }
                want.extend(expected_sentence(ty, attr, value, min));
                cases += 1;
                rows_hit.insert(row);
                if got != want {
                    mismatches.push(format!("{ty}/{attr}={value}: {got:?} != {want:?}"));
                }
            }
        }
        let rows = constraint_rows().len();
        check(
            mismatches.is_empty() && rows_hit.len() == rows,
            format!("{}/{rows} rows, {cases} cases, {} mismatches {:?}", rows_hit.len(), mismatches.len(), mismatches),
        )
    })
}

const REFERENCE_INPUT_PROMPT: &str = "You are working as a web tester and your task is to generate appropriate text input for the specified input box on the web page you are browsing. You are provided with a screenshot of the web page you are browsing, the input box to be filled is marked with a red frame. You are viewing the web page entitled: SplittyPie. This text is placed near the input box: How much? USD. The input has type number. The input is about amount. The input has the following constraints: minimum value is 0. Your job is to generate appropriate text for the highlighted input box. You should only return the generated text without any explanation. Use the following format for your answer: Generated Input Text: [answer]";

const REFERENCE_ELEMENT_PROMPT: &str = "You are working as a web tester and your task is to select a button on a web page that will be clicked after filling in the input box, such that the button clicking can submit the filled content and trigger followup web services. You are provided with a screenshot of the web page you are browsing, the input box to be filled is marked with a red frame and the buttons to be selected are marked with 1,2,3,4,5 and blue frames. You are viewing the web page entitled: SplittyPie. This text is placed near the input box: How much? USD. The input box will be filled with: 199. Your job is to select one of the labeled buttons and return the number on it without any explanation. Use the following format for your answer: Selected Button Number: [answer]";

fn ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Smallest (prefix, ours-middle, theirs-middle) split between two strings.
fn diff(ours: &str, theirs: &str) -> (String, String) {
    let a: Vec<char> = ours.chars().collect();
    let b: Vec<char> = theirs.chars().collect();
    let p = a.iter().zip(&b).take_while(|(x, y)| x == y).count();
    let s = a[p..].iter().rev().zip(b[p..].iter().rev()).take_while(|(x, y)| x == y).count();
    (a[p..a.len() - s].iter().collect(), b[p..b.len() - s].iter().collect())
}

fn criterion_2() -> Outcome {
    timed(1, || {
        let (_b, snap) = fixture_page("splitty", "/event/new");
        let doc = DomDocument::parse(&snap).unwrap();
        let amount = doc
            .detect_input_widgets()
            .into_iter()
            .find(|w| w.attrs.get("id").map(String::as_str) == Some("amount"))
            .unwrap();
        let o = PromptOptions::default();
        let gc = doc.global_context();
        let input = build_input_prompt(&gc, &amount.local_context, &amount, InputFlavor::Vision, &o);
        let buttons = doc.candidate_elements().iter().filter(|c| snap.in_viewport(&c.handle.rect)).count();
        let element = build_element_prompt(&gc, &amount.local_context, "199", buttons, &o);
        let element_ok = ws(&element.text) == ws(REFERENCE_ELEMENT_PROMPT);
        let input_ok = ws(&input.text) == ws(REFERENCE_INPUT_PROMPT);
        let (ours, theirs) = diff(&ws(&input.text), &ws(REFERENCE_INPUT_PROMPT));
        let detail = format!(
            "element prompt {}, input prompt {}{}",
            if element_ok { "exact" } else { "differs" },
            if input_ok { "exact" } else { "differs" },
            if input_ok { String::new() } else { format!(" (ours {ours:?} where the example has {theirs:?})") }
        );
        let mut o = check(element_ok && input_ok, detail);
        if element_ok && !input_ok && ours.trim() == "of number" && theirs.is_empty() {
            o.known = Some(
                "the example constraint sentence omits \"of number\" required by the constraint table".into(),
            );
        }
        o
    })
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let len = rng.random_range(1..50);
        let rewards: Vec<u64> = (0..len).map(|_| rng.random_range(0..500)).collect();
        let mut t = BanditTables::new(0.3, 0).unwrap();
        let key = ElementKey::from("k");
        for r in &rewards {
            t.update(&key, *r);
        }
        let mean = rewards.iter().sum::<u64>() as f64 / len as f64;
        worst = worst.max((t.q(&key) - mean).abs());
    }
    let key = ElementKey::from("k");
    let mut a = BanditTables::new(0.3, 0).unwrap();
    a.update(&key, 5);
    let first = (a.q(&key), a.count(&key));
    let mut b = BanditTables::new(0.3, 0).unwrap();
    for _ in 0..3 {
        b.update(&key, 2);
    }
    b.update(&key, 6);
    let second = (b.q(&key), b.count(&key));
    check(
        worst <= 1e-9 && first == (5.0, 1) && second == (3.0, 4),
        format!("10000 sequences, max |q - mean| = {worst:.2e}; (0,0,5) -> {first:?}; (2,3,6) -> {second:?}"),
    )
}

fn criterion_4() -> Outcome {
    timed(10, || {
        let keys: Vec<ElementKey> = ["a", "b", "c", "d"].iter().map(|k| ElementKey::from(*k)).collect();
        let ctx = SelectionContext::new(keys[..2].to_vec(), keys.clone()).unwrap();
        let mut t = BanditTables::new(0.3, 11).unwrap();
        let n = 100_000;
        let explore = (0..n).filter(|_| t.select_target(&ctx).unwrap().1 == Branch::Explore).count();
        let f_explore = explore as f64 / n as f64;

        let mut t = BanditTables::new(0.0, 12).unwrap();
        t.set_q(keys[0].clone(), 1.0);
        t.set_q(keys[1].clone(), 0.0);
        let ctx = SelectionContext::new(keys[..2].to_vec(), keys[..2].to_vec()).unwrap();
        let first = (0..n).filter(|_| t.select_target(&ctx).unwrap().0 == keys[0]).count();
        let f_first = first as f64 / n as f64;
        let expected = 1.0 / (1.0 + (-1.0f64).exp());

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut shift_err: f64 = 0.0;
        for _ in 0..1000 {
            let q: Vec<f64> = (0..rng.random_range(1..12)).map(|_| rng.random_range(-20.0..20.0)).collect();
            let c = rng.random_range(-500.0..500.0);
            let shifted: Vec<f64> = q.iter().map(|v| v + c).collect();
            for (x, y) in softmax(&q).iter().zip(softmax(&shifted)) {
                shift_err = shift_err.max((x - y).abs());
            }
        }
        check(
            (f_explore - 0.30).abs() <= 0.01
                && (f_first - 0.7311).abs() <= 0.01
                && (expected - 0.7311).abs() < 1e-4
                && shift_err <= 1e-9,
            format!(
                "explore {f_explore:.4}, exploit ({f_first:.4}, {:.4}), shift error {shift_err:.1e}",
                1.0 - f_first
            ),
        )
    })
}

/// Random document for the nearest-button oracle. Nodes are numbered in
/// document order; node 0 is the root container.
struct RandomDom {
    parent: Vec<Option<usize>>,
    kind: Vec<u8>,
}

impl RandomDom {
    fn generate(rng: &mut ChaCha8Rng, size: usize) -> Self {
        let mut children: Vec<Vec<usize>> = vec![Vec::new()];
        let mut kind = vec![0u8];
        let mut containers = vec![0usize];
        for i in 1..size {
            let k = match i {
                1 => 1,
                2 => 2,
                _ => rng.random_range(0..5u8),
            };
            let p = containers[rng.random_range(0..containers.len())];
            children[p].push(i);
            children.push(Vec::new());
            kind.push(k);
            if k == 0 {
                containers.push(i);
            }
        }
        let mut order = Vec::new();
        let mut stack = vec![0];
        while let Some(i) = stack.pop() {
            order.push(i);
            stack.extend(children[i].iter().rev());
        }
        let pos: HashMap<usize, usize> = order.iter().enumerate().map(|(p, &i)| (i, p)).collect();
        let mut parent = vec![None; size];
        let mut kinds = vec![0; size];
        for (i, c) in children.iter().enumerate() {
            kinds[pos[&i]] = kind[i];
            for &j in c {
                parent[pos[&j]] = Some(pos[&i]);
            }
        }
        RandomDom { parent, kind: kinds }
    }

    fn children(&self, i: usize) -> Vec<usize> {
        (0..self.parent.len()).filter(|&j| self.parent[j] == Some(i)).collect()
    }

    fn html(&self) -> String {
        fn emit(d: &RandomDom, i: usize, out: &mut String) {
            match d.kind[i] {
                0 => {
                    out.push_str(&format!("<div id=\"n{i}\">"));
                    for c in d.children(i) {
                        emit(d, c, out);
                    }
                    out.push_str("</div>");
                }
                1 => out.push_str(&format!("<input id=\"n{i}\" name=\"n{i}\">")),
                2 => out.push_str(&format!("<button id=\"n{i}\">b{i}</button>")),
                3 => out.push_str(&format!("<a id=\"n{i}\" href=\"/p{i}\">l{i}</a>")),
                _ => out.push_str(&format!("<span id=\"n{i}\">t{i}</span>")),
            }
        }
        let mut out = String::from("<html><body>");
        emit(self, 0, &mut out);
        out.push_str("</body></html>");
        out
    }

    fn bfs(&self, from: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.parent.len()];
        dist[from] = 0;
        let mut q = VecDeque::from([from]);
        while let Some(i) = q.pop_front() {
            let mut next = self.children(i);
            next.extend(self.parent[i]);
            for j in next {
                if dist[j] == usize::MAX {
                    dist[j] = dist[i] + 1;
                    q.push_back(j);
                }
            }
        }
        dist
    }
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut agree, mut total) = (0, 0);
    let mut failures = Vec::new();
    for case in 0..50 {
        let size = rng.random_range(3..=200);
        let dom = RandomDom::generate(&mut rng, size);
        let snap = snapshot_of(&dom.html());
        let doc = DomDocument::parse(&snap).unwrap();
        let candidates = doc.candidate_elements();
        let id_of = |h: &vetl_core::driver::ElementHandle| -> usize {
            let idx: usize = h.remote_id.parse().unwrap();
            let marker = format!("data-vetl-idx=\"{idx}\"");
            let at = snap.html.find(&marker).unwrap();
            let tag_start = snap.html[..at].rfind('<').unwrap();
            let tag = &snap.html[tag_start..snap.html[at..].find('>').unwrap() + at];
            let id_at = tag.find("id=\"n").unwrap() + 5;
            tag[id_at..].split('"').next().unwrap().parse().unwrap()
        };
        for w in doc.detect_input_widgets() {
            let me = id_of(&w.handle);
            let dist = dom.bfs(me);
            let want = (0..size)
                .filter(|&j| matches!(dom.kind[j], 2 | 3))
                .min_by_key(|&j| (dist[j], j))
                .unwrap();
            let got = id_of(&doc.nearest_button(&w, &candidates).unwrap().handle);
            total += 1;
            if got == want {
                agree += 1;
            } else if failures.len() < 3 {
                failures.push(format!("case {case} input n{me}: got n{got}, oracle n{want}"));
            }
        }
    }
    check(
        agree == total && total >= 50,
        format!("50 documents, {agree}/{total} widgets agree {failures:?}"),
    )
}

fn criterion_6() -> Outcome {
    let a = parse_text_answer("Generated Input Text: 199");
    let marker = a.kind == AnswerKind::GeneratedText && a.text() == Some("199");
    let b = parse_text_answer("199 dollars");
    let raw = b.kind == AnswerKind::FallbackRaw && b.text() == Some("199 dollars");
    let valid: BTreeSet<u32> = (1..=5).collect();
    let c = parse_button_answer("Selected Button Number: 7", &valid);
    let d = parse_button_answer("Selected Button Number: 2", &valid);
    let skip = c.kind == AnswerKind::FallbackSkip && d.number_value == Some(2);
    let mut runner = TestRunner::new(PropConfig { cases: 2000, failure_persistence: None, ..PropConfig::default() });
    let marker_lower = TEXT_MARKER.to_ascii_lowercase();
    let prop = runner.run(&"\\PC{0,80}", |s| {
        if s.to_ascii_lowercase().contains(&marker_lower) {
            return Ok(());
        }
        let p = parse_text_answer(&format!("{TEXT_MARKER}{s}"));
        proptest::prop_assert_eq!(p.text(), Some(s.trim()));
        Ok(())
    });
    check(
        marker && raw && skip && prop.is_ok(),
        format!("marker {marker}, fallback_raw {raw}, fallback_skip {skip}, round trip over 2000 strings {:?}", prop.map(|_| "ok")),
    )
}

fn splitty_client() -> Arc<ModelClient> {
    let backend = ScriptedBackend::new(
        vec![
            ScriptEntry::sticky(Matcher::Substring("The input is about amount.".into()), "Generated Input Text: 199"),
            ScriptEntry::sticky(
                Matcher::Substring("The input box will be filled with: 199.".into()),
                "Selected Button Number: 4",
            ),
            ScriptEntry::sticky(Matcher::Substring("The input box will be filled with".into()), "I am not sure."),
        ],
        "Generated Input Text: Alice",
    );
    Arc::new(ModelClient::new(Arc::new(backend)))
}

fn splitty_run(dir: &Path, epsilon: f64) -> RunResult {
    let site = FixtureSite::builtin("splitty").unwrap();
    let mut config = RunConfig::new(&format!("{}/", site.origin()), Variant::Vetl);
    config.action_budget = 50;
    config.rng_seed = 7;
    config.epsilon = epsilon;
    config.output_dir = Some(dir.to_path_buf());
    let mut b = SimBrowser::fixture("splitty", Viewport::default()).unwrap();
    let models = Models { vision: Some(splitty_client()), text: None };
    run(&mut b, config, models).unwrap()
}

/// Indices of amount fills with "199" whose next click (after the remaining
/// boxes of the form) targets `button`.
fn scripted_follow_ups(result: &RunResult, button: &str) -> (usize, usize) {
    let mut fills = 0;
    let mut followed = 0;
    for (i, s) in result.trace.iter().enumerate() {
        if s.action_kind == ActionKind::TypeText && s.text.as_deref() == Some("199") {
            fills += 1;
            let next = result.trace[i + 1..].iter().find(|t| t.action_kind == ActionKind::Click);
            if next.is_some_and(|c| c.label == button) {
                followed += 1;
            }
        }
    }
    (fills, followed)
}

fn criterion_7(root: &Path) -> Outcome {
    timed(120, || {
        let a = splitty_run(&root.join("splitty-a"), 0.3);
        splitty_run(&root.join("splitty-b"), 0.3);
        let ta = fs::read(root.join("splitty-a/trace.jsonl")).unwrap();
        let tb = fs::read(root.join("splitty-b/trace.jsonl")).unwrap();
        let identical = ta == tb && !ta.is_empty();
        let (fills, followed) = scripted_follow_ups(&a, "Create");
        let greedy = splitty_run(&root.join("splitty-greedy"), 0.0);
        let (g_fills, g_followed) = scripted_follow_ups(&greedy, "Create");
        let first = greedy.trace.iter().position(|s| s.text.as_deref() == Some("199"));
        let sequence_ok = first.is_some_and(|i| {
            let rest: Vec<_> = greedy.trace[i + 1..].iter().take_while(|s| s.action_kind == ActionKind::TypeText).collect();
            let click = &greedy.trace[i + 1 + rest.len()];
            click.action_kind == ActionKind::Click && click.label == "Create" && click.branch == Some(Branch::Exploit)
        });
        check(
            identical && a.trace.len() == 50 && fills > 0 && g_fills > 0 && g_followed == g_fills && sequence_ok,
            format!(
                "traces identical {identical} ({} bytes); eps 0.3: {followed}/{fills} amount fills followed by Create; \
                 eps 0: {g_followed}/{g_fills}",
                ta.len()
            ),
        )
    })
}

fn flow_run(dir: &Path, variant: Variant, seed: u64) -> usize {
    let site = FixtureSite::builtin("flow").unwrap();
    let mut config = RunConfig::new(&format!("{}/", site.origin()), variant);
    config.action_budget = 100;
    config.rng_seed = seed;
    config.output_dir = Some(dir.to_path_buf());
    config.save_screenshots = false;
    let models = match variant {
        Variant::Random => Models::default(),
        _ => Models { vision: Some(ideal_client("cats")), text: None },
    };
    let mut b = SimBrowser::fixture("flow", Viewport::default()).unwrap();
    let r = run(&mut b, config, models).unwrap();
    assert_eq!(r.metrics.actions_executed, 100);
    r.metrics.visited_states.len()
}

fn criterion_8(root: &Path) -> Outcome {
    timed(900, || {
        let seeds = 0..5u64;
        let vetl: Vec<usize> = seeds.clone().map(|s| flow_run(&root.join(format!("flow-vetl-{s}")), Variant::Vetl, s)).collect();
        let random: Vec<usize> = seeds.map(|s| flow_run(&root.join(format!("flow-random-{s}")), Variant::Random, s)).collect();
        let mean = |v: &[usize]| v.iter().sum::<usize>() as f64 / v.len() as f64;
        let gap = mean(&vetl) - mean(&random);
        check(
            gap >= 2.0,
            format!("states vetl {vetl:?} (mean {:.1}) vs random {random:?} (mean {:.1}), gap {gap:.1}", mean(&vetl), mean(&random)),
        )
    })
}

fn criterion_9(root: &Path) -> Outcome {
    let mut checked = 0;
    let mut problems = Vec::new();
    let mut dirs: Vec<_> = fs::read_dir(root).unwrap().map(|e| e.unwrap().path()).collect();
    dirs.sort();
    for dir in dirs {
        let run = load_run(&dir).unwrap();
        let v = verify_run(&run);
        checked += 1;
        if v.folded_states != v.recorded_states || !v.curve_monotone {
            problems.push(format!("{}: {:?}", dir.display(), v.problems()));
        }
    }
    check(problems.is_empty() && checked >= 13, format!("{checked} run directories re-folded, problems {problems:?}"))
}

fn band_is(img: &RgbaImage, x0: i64, y0: i64, x1: i64, y1: i64, color: Rgba<u8>) -> bool {
    (y0..y1).all(|y| (x0..x1).all(|x| *img.get_pixel(x as u32, y as u32) == color))
}

fn criterion_10() -> Outcome {
    let grey = Rgba([90, 90, 90, 255]);
    let img = RgbaImage::from_pixel(640, 480, grey);
    let o = AnnotateOptions::default();
    let (s, g) = (o.stroke as i64, o.margin as i64);
    // red frame around (120, 80, 150, 24)
    let (x, y, w, h) = (120i64, 80i64, 150i64, 24i64);
    let out = annotate_input(&img, &Rect::new(x as f64, y as f64, w as f64, h as f64), 1.0, &o).unwrap();
    let (ox0, oy0, ox1, oy1) = (x - g - s, y - g - s, x + w + g + s, y + h + g + s);
    let (ix0, iy0, ix1, iy1) = (x - g, y - g, x + w + g, y + h + g);
    let red_ok = band_is(&out.image, ox0, oy0, ox1, iy0, RED)
        && band_is(&out.image, ox0, iy1, ox1, oy1, RED)
        && band_is(&out.image, ox0, iy0, ix0, iy1, RED)
        && band_is(&out.image, ix1, iy0, ox1, iy1, RED)
        && band_is(&out.image, ix0, iy0, ix1, iy1, grey)
        && band_is(&out.image, ox0 - 1, oy0, ox0, oy1, grey)
        && band_is(&out.image, ox1, oy0, ox1 + 1, oy1, grey);
    let red_count = out.image.pixels().filter(|p| **p == RED).count() as i64;
    let red_exact = red_count == (ox1 - ox0) * (oy1 - oy0) - (ix1 - ix0) * (iy1 - iy0);

    let buttons: Vec<(ElementKey, Rect)> = (0..6)
        .map(|i| (ElementKey::from(format!("button-{i}").as_str()), Rect::new(40.0 + 95.0 * i as f64, 300.0, 70.0, 28.0)))
        .collect();
    let out = annotate_elements(&img, &Rect::new(x as f64, y as f64, w as f64, h as f64), &buttons, 1.0, &o).unwrap();
    let blue_ok = buttons.iter().all(|(_, r)| {
        let (bx, by, bw, bh) = (r.x as i64, r.y as i64, r.width as i64, r.height as i64);
        band_is(&out.image, bx + bw + g, by - g, bx + bw + g + s, by + bh + g, BLUE)
            && band_is(&out.image, bx - g, by + bh + g, bx + bw + g, by + bh + g + s, BLUE)
            && band_is(&out.image, bx + bw / 2, by, bx + bw, by + bh, grey)
    });
    let tags_ok = out.numbering.keys().all(|n| {
        let (_, r) = &buttons[*n as usize - 1];
        let (tx, ty) = (r.x as i64 - g - s, r.y as i64 - g - s);
        *out.image.get_pixel(tx as u32, ty as u32) == BLUE
            && (ty..ty + 18).any(|y| (tx..tx + 14).any(|x| *out.image.get_pixel(x as u32, y as u32) == Rgba([255, 255, 255, 255])))
    });
    let numbers: BTreeSet<u32> = out.numbering.keys().copied().collect();
    let values: BTreeSet<&ElementKey> = out.numbering.values().collect();
    let inputs: BTreeSet<&ElementKey> = buttons.iter().map(|(k, _)| k).collect();
    let bijective = numbers == (1..=6).collect::<BTreeSet<u32>>() && values == inputs;
    let ordered = out.numbering.iter().all(|(n, k)| buttons[*n as usize - 1].0 == *k);
    let off = Rect::new(600.0, 470.0, 80.0, 30.0);
    let oob = annotate_input(&img, &off, 1.0, &o).unwrap_err() == AnnotateError::RectOutOfBounds(off);
    let mut with_off = buttons.clone();
    with_off.push((ElementKey::from("off"), off));
    let oob2 = matches!(
        annotate_elements(&img, &Rect::new(10.0, 10.0, 20.0, 20.0), &with_off, 1.0, &o),
        Err(AnnotateError::RectOutOfBounds(_))
    );
    check(
        red_ok && red_exact && blue_ok && tags_ok && bijective && ordered && oob && oob2,
        format!(
            "red frame {red_ok} ({red_count} px, exact {red_exact}), blue frames {blue_ok}, number tags {tags_ok}, numbering bijective {bijective} \
             ordered {ordered}, out of bounds {oob}/{oob2}"
        ),
    )
}

fn main() {
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let root = tempfile::tempdir().unwrap();
    let runs = root.path().join("runs");
    fs::create_dir_all(&runs).unwrap();
    let criteria: Vec<(u32, &str, Box<dyn Fn() -> Outcome>)> = vec![
        (1, "constraint table conformance", Box::new(criterion_1)),
        (2, "prompt byte-exactness", Box::new(criterion_2)),
        (3, "update arithmetic", Box::new(criterion_3)),
        (4, "epsilon-greedy and softmax statistics", Box::new(criterion_4)),
        (5, "nearest-button oracle", Box::new(criterion_5)),
        (6, "answer parser fallbacks", Box::new(criterion_6)),
        (7, "deterministic end-to-end replay", Box::new(|| criterion_7(&runs))),
        (8, "exploration beats random clicking", Box::new(|| criterion_8(&runs))),
        (9, "metrics bookkeeping", Box::new(|| criterion_9(&runs))),
        (10, "annotation pixels", Box::new(criterion_10)),
    ];
    let mut blocking = 0;
    let mut results = BTreeMap::new();
    for (n, name, f) in &criteria {
        if filter.as_ref().is_some_and(|f| !name.contains(f.as_str())) {
            continue;
        }
        let o = f();
        let status = if o.pass { "PASS" } else { "FAIL" };
        let note = o.known.as_ref().map(|k| format!(" [documented deviation: {k}]")).unwrap_or_default();
        println!("{status} criterion {n:>2}: {name}: {}{note}", o.detail);
        if !o.pass && o.known.is_none() {
            blocking += 1;
        }
        results.insert(*n, o.pass);
    }
    let passed = results.values().filter(|p| **p).count();
    println!("acceptance: {passed}/{} criteria pass, {blocking} blocking failure(s)", results.len());
    if blocking > 0 {
        std::process::exit(1);
    }
}

