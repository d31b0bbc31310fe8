mod common;

use vetl_core::driver::{Browser, DriverError, WebDriverBrowser, WebDriverOptions};
use vetl_core::dom::DomDocument;
use vetl_core::geometry::Viewport;
use vetl_core::sim::{EmulatorOptions, FixtureSite, SimBrowser, WebDriverEmulator};

fn emulator(extra: Vec<FixtureSite>, options: EmulatorOptions) -> WebDriverEmulator {
    WebDriverEmulator::start(extra, options).unwrap()
}

fn origin(name: &str) -> String {
    FixtureSite::builtin(name).unwrap().origin()
}

fn connect(emu: &WebDriverEmulator, url: &str) -> WebDriverBrowser {
    WebDriverBrowser::connect(emu.endpoint(), url, Viewport::default(), WebDriverOptions::default()).unwrap()
}

#[test]
fn webdriver_snapshot_matches_the_in_process_browser() {
    let emu = emulator(vec![], EmulatorOptions::default());
    let url = format!("{}/event/new", origin("splitty"));
    let mut remote = connect(&emu, &url);
    let mut local = SimBrowser::fixture("splitty", Viewport::default()).unwrap();
    local.navigate(&url).unwrap();
    let a = remote.snapshot().unwrap();
    let b = local.snapshot().unwrap();
    assert_eq!(a.url, b.url);
    assert_eq!(a.title, "SplittyPie");
    assert_eq!(a.screenshot.dimensions(), (1280, 800));
    let keys = |s| {
        let d = DomDocument::parse(s).unwrap();
        (
            d.detect_input_widgets().into_iter().map(|w| (w.key, w.handle.rect)).collect::<Vec<_>>(),
            d.candidate_elements().into_iter().map(|c| (c.key, c.handle.rect)).collect::<Vec<_>>(),
        )
    };
    assert_eq!(keys(&a), keys(&b));
    remote.close().unwrap();
}

#[test]
fn typing_clicking_and_counting() {
    let emu = emulator(vec![], EmulatorOptions::default());
    let mut b = connect(&emu, &format!("{}/", origin("flow")));
    let snap = b.snapshot().unwrap();
    let doc = DomDocument::parse(&snap).unwrap();
    let w = doc.detect_input_widgets().remove(0);
    b.type_text(&w.handle, "cats").unwrap();
    assert_eq!(b.read_value(&w.handle).unwrap(), "cats");
    let search = doc.candidate_elements().into_iter().find(|c| c.label == "Search").unwrap();
    b.click(&search.handle).unwrap();
    assert_eq!(b.action_count(), 2);
    assert_eq!(b.current_url().unwrap(), format!("{}/results?q=cats", origin("flow")));
    let err = b.click(&search.handle).unwrap_err();
    assert!(matches!(err, DriverError::StaleElement(_)), "{err:?}");
    assert_eq!(b.action_count(), 2);
}

#[test]
fn console_failures_are_drained() {
    for log_endpoint in [true, false] {
        let emu = emulator(vec![], EmulatorOptions { log_endpoint, ..Default::default() });
        let mut b = connect(&emu, &format!("{}/report", origin("flow")));
        let snap = b.snapshot().unwrap();
        let send = DomDocument::parse(&snap)
            .unwrap()
            .candidate_elements()
            .into_iter()
            .find(|c| c.label == "Send report")
            .unwrap();
        b.click(&send.handle).unwrap();
        let failures = b.console_failures().unwrap();
        assert_eq!(failures.len(), 1, "log endpoint {log_endpoint}");
        assert!(failures[0].message.contains("description is empty"));
        assert!(b.console_failures().unwrap().is_empty());
    }
}

#[test]
fn redirect_during_capture_yields_a_consistent_snapshot() {
    let site = FixtureSite::new(
        "hop",
        [
            ("index.html", "<html><head><title>A</title><meta http-equiv=\"refresh\" content=\"0.1; url=/b\"></head><body><button>a</button></body></html>"),
            ("b.html", "<html><head><title>B</title></head><body><button>b1</button><button>b2</button></body></html>"),
        ],
    );
    let emu = emulator(vec![site.clone()], EmulatorOptions::default());
    let mut b = connect(&emu, &format!("{}/", site.origin()));
    let mut snap = b.snapshot().unwrap();
    for _ in 0..5 {
        if snap.title == "B" {
            break;
        }
        snap = b.snapshot().unwrap();
    }
    assert_eq!(snap.title, "B");
    assert!(snap.url.ends_with("/b"));
    let c = DomDocument::parse(&snap).unwrap().candidate_elements();
    assert_eq!(c.len(), 2);
    assert!(c.iter().all(|c| c.handle.generation == snap.generation));
}

#[test]
fn pixel_ratio_scales_the_screenshot() {
    let emu = emulator(vec![], EmulatorOptions { device_pixel_ratio: 2.0, ..Default::default() });
    let mut b = connect(&emu, &format!("{}/", origin("flow")));
    let snap = b.snapshot().unwrap();
    assert_eq!(snap.device_pixel_ratio, 2.0);
    assert_eq!(snap.screenshot.dimensions(), (2560, 1600));
}

#[test]
fn scrolling_brings_far_elements_into_view() {
    let filler = "<p>filler</p>".repeat(200);
    let html = format!("<html><body>{filler}<input name=last></body></html>");
    let site = FixtureSite::new("tall", [("index.html", html.as_str())]);
    let emu = emulator(vec![site.clone()], EmulatorOptions::default());
    let mut b = connect(&emu, &format!("{}/", site.origin()));
    let snap = b.snapshot().unwrap();
    let w = DomDocument::parse(&snap).unwrap().detect_input_widgets().remove(0);
    assert!(!snap.in_viewport(&w.handle.rect));
    b.scroll_into_view(&w.handle).unwrap();
    let snap = b.snapshot().unwrap();
    assert!(snap.scroll_y > 0.0);
    assert!(snap.in_viewport(&w.handle.rect));
}

#[test]
fn closed_sessions_are_lost() {
    let emu = emulator(vec![], EmulatorOptions::default());
    let mut b = connect(&emu, &format!("{}/", origin("flow")));
    b.close().unwrap();
    assert!(matches!(b.snapshot(), Err(DriverError::SessionLost(_))));
}

#[test]
fn connection_and_navigation_errors() {
    let err = WebDriverBrowser::connect("http://127.0.0.1:9", "http://x.test/", Viewport::default(), Default::default())
        .err()
        .unwrap();
    assert!(matches!(err, DriverError::ConnectionFailed(_)), "{err:?}");
    let emu = emulator(vec![], EmulatorOptions::default());
    let mut b = connect(&emu, &format!("{}/", origin("flow")));
    assert!(matches!(b.navigate("ftp://x/"), Err(DriverError::NavigationFailed(_))));
    assert!(matches!(b.navigate("not a url"), Err(DriverError::NavigationFailed(_))));
}

#[test]
fn sim_browser_counts_only_actions() {
    let mut b = SimBrowser::fixture("flow", Viewport::default()).unwrap();
    b.snapshot().unwrap();
    b.navigate(&format!("{}/about", origin("flow"))).unwrap();
    assert_eq!(b.action_count(), 0);
}
