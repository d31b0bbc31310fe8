//! Flow layout for the simulated browser.
//!
//! Deliberately coarse: block elements stack vertically, inline content
//! flows left to right and wraps at the content edge, text is a fixed 8 px
//! per character. Enough to give every element a stable rectangle.

use ego_tree::NodeRef;
use scraper::node::Node;

use crate::geometry::Rect;

pub(crate) const CHAR_WIDTH: f64 = 8.0;
const TEXT_HEIGHT: f64 = 18.0;
const BODY_MARGIN: f64 = 8.0;
const BLOCK_GAP: f64 = 6.0;
const INLINE_GAP: f64 = 8.0;

const BLOCK_TAGS: &[&str] = &[
    "html", "body", "div", "p", "form", "h1", "h2", "h3", "h4", "h5", "h6", "ul", "ol", "li",
    "section", "header", "footer", "nav", "main", "article", "aside", "table", "tr", "fieldset",
    "dl", "dt", "dd", "pre", "blockquote", "hr",
];

const NEVER_RENDERED: &[&str] = &[
    "head", "script", "style", "title", "meta", "link", "template", "noscript", "base",
];

/// What the renderer paints for a laid-out box.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Paint {
    Text { rect: Rect, chars: usize, link: bool },
    Field { rect: Rect, element: usize },
    Button { rect: Rect, chars: usize },
    Rule { rect: Rect },
}

#[derive(Debug, Default)]
pub(crate) struct LayoutResult {
    pub rects: Vec<Option<Rect>>,
    pub displayed: Vec<bool>,
    pub paints: Vec<Paint>,
    pub height: f64,
}

/// Inputs the layout needs besides the tree itself.
pub(crate) trait LayoutSource {
    fn index_of(&self, node: NodeRef<'_, Node>) -> Option<usize>;
    fn element_count(&self) -> usize;
}

struct Cursor {
    x: f64,
    y: f64,
    left: f64,
    right: f64,
    line_height: f64,
}

impl Cursor {
    fn newline(&mut self) {
        if self.x > self.left || self.line_height > 0.0 {
            self.y += self.line_height;
        }
        self.x = self.left;
        self.line_height = 0.0;
    }

    fn place(&mut self, width: f64, height: f64) -> Rect {
        if self.x > self.left && self.x + width > self.right {
            self.newline();
        }
        let rect = Rect::new(self.x, self.y, width, height);
        self.x += width + INLINE_GAP;
        self.line_height = self.line_height.max(height);
        rect
    }
}

pub(crate) fn is_hidden(node: &scraper::node::Element) -> bool {
    let tag = node.name();
    if NEVER_RENDERED.contains(&tag) || node.attr("hidden").is_some() {
        return true;
    }
    if tag == "input" && node.attr("type").is_some_and(|t| t.eq_ignore_ascii_case("hidden")) {
        return true;
    }
    style_has(node, "display", "none")
}

pub(crate) fn is_invisible(node: &scraper::node::Element) -> bool {
    style_has(node, "visibility", "hidden")
}

fn style_has(node: &scraper::node::Element, property: &str, value: &str) -> bool {
    node.attr("style").is_some_and(|style| {
        style.split(';').any(|decl| {
            let mut parts = decl.splitn(2, ':');
            let p = parts.next().unwrap_or("").trim();
            let v = parts.next().unwrap_or("").trim();
            p.eq_ignore_ascii_case(property) && v.eq_ignore_ascii_case(value)
        })
    })
}

pub(crate) fn collapse(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn inner_text_len(node: NodeRef<'_, Node>) -> usize {
    let mut text = String::new();
    for d in node.descendants() {
        if let Node::Text(t) = d.value() {
            text.push_str(t);
            text.push(' ');
        }
    }
    collapse(&text).chars().count()
}

pub(crate) fn layout(
    root: NodeRef<'_, Node>,
    source: &dyn LayoutSource,
    viewport_width: f64,
) -> LayoutResult {
    let mut result = LayoutResult {
        rects: vec![None; source.element_count()],
        displayed: vec![false; source.element_count()],
        paints: Vec::new(),
        height: 0.0,
    };
    let mut cursor = Cursor {
        x: BODY_MARGIN,
        y: BODY_MARGIN,
        left: BODY_MARGIN,
        right: viewport_width - BODY_MARGIN,
        line_height: 0.0,
    };
    lay(root, source, &mut cursor, &mut result, false, true);
    cursor.newline();
    result.height = cursor.y + BODY_MARGIN;
    result
}

fn lay(
    node: NodeRef<'_, Node>,
    source: &dyn LayoutSource,
    cursor: &mut Cursor,
    out: &mut LayoutResult,
    in_link: bool,
    visible: bool,
) -> Option<Rect> {
    match node.value() {
        Node::Text(text) => {
            let collapsed = collapse(text);
            if collapsed.is_empty() {
                return None;
            }
            let chars = collapsed.chars().count();
            let rect = cursor.place(chars as f64 * CHAR_WIDTH, TEXT_HEIGHT);
            if visible {
                out.paints.push(Paint::Text {
                    rect,
                    chars,
                    link: in_link,
                });
            }
            Some(rect)
        }
        Node::Element(element) => {
            if is_hidden(element) {
                return None;
            }
            let visible = visible && !is_invisible(element);
            let index = source.index_of(node);
            let tag = element.name();
            let rect = match tag {
                "input" => {
                    let kind = element.attr("type").unwrap_or("text").to_ascii_lowercase();
                    let (w, h, paint) = match kind.as_str() {
                        "submit" | "button" | "reset" | "image" => {
                            let label = element.attr("value").map(collapse).unwrap_or_else(|| {
                                if kind == "reset" { "Reset" } else { "Submit" }.to_string()
                            });
                            let chars = label.chars().count();
                            (chars as f64 * CHAR_WIDTH + 20.0, 30.0, Some(chars))
                        }
                        "checkbox" | "radio" => (16.0, 16.0, None),
                        "date" | "time" | "datetime-local" | "month" | "week" | "color" => {
                            (150.0, 28.0, None)
                        }
                        "range" => (150.0, 20.0, None),
                        _ => (220.0, 28.0, None),
                    };
                    let rect = cursor.place(w, h);
                    if visible {
                        out.paints.push(match paint {
                            Some(chars) => Paint::Button { rect, chars },
                            None => Paint::Field {
                                rect,
                                element: index.unwrap_or(usize::MAX),
                            },
                        });
                    }
                    rect
                }
                "textarea" => {
                    let rect = cursor.place(320.0, 72.0);
                    if visible {
                        out.paints.push(Paint::Field {
                            rect,
                            element: index.unwrap_or(usize::MAX),
                        });
                    }
                    rect
                }
                "select" => {
                    let rect = cursor.place(160.0, 28.0);
                    if visible {
                        out.paints.push(Paint::Field {
                            rect,
                            element: index.unwrap_or(usize::MAX),
                        });
                    }
                    rect
                }
                "button" => {
                    let chars = inner_text_len(node);
                    let rect = cursor.place(chars as f64 * CHAR_WIDTH + 24.0, 30.0);
                    if visible {
                        out.paints.push(Paint::Button { rect, chars });
                    }
                    rect
                }
                "img" => {
                    let dim = |a: &str, d: f64| {
                        element
                            .attr(a)
                            .and_then(|v| v.trim_end_matches("px").parse().ok())
                            .unwrap_or(d)
                    };
                    cursor.place(dim("width", 100.0), dim("height", 100.0))
                }
                "br" => {
                    let rect = Rect::new(cursor.x, cursor.y, 0.0, TEXT_HEIGHT);
                    cursor.line_height = cursor.line_height.max(TEXT_HEIGHT);
                    cursor.newline();
                    rect
                }
                _ if BLOCK_TAGS.contains(&tag) => {
                    cursor.newline();
                    if tag != "html" && tag != "body" {
                        cursor.y += BLOCK_GAP;
                    }
                    let top = cursor.y;
                    let link = in_link;
                    for child in node.children() {
                        lay(child, source, cursor, out, link, visible);
                    }
                    cursor.newline();
                    if tag == "hr" {
                        cursor.y += 2.0;
                    }
                    let rect = Rect::new(cursor.left, top, cursor.right - cursor.left, cursor.y - top);
                    if tag == "hr" && visible {
                        out.paints.push(Paint::Rule { rect });
                    }
                    rect
                }
                _ => {
                    let link = in_link || (tag == "a" && element.attr("href").is_some());
                    let start = Rect::new(cursor.x, cursor.y, 0.0, 0.0);
                    let mut bounds: Option<Rect> = None;
                    for child in node.children() {
                        if let Some(r) = lay(child, source, cursor, out, link, visible) {
                            bounds = Some(bounds.map_or(r, |b| b.union(&r)));
                        }
                    }
                    bounds.unwrap_or(start)
                }
            };
            if let Some(i) = index {
                out.rects[i] = Some(rect);
                out.displayed[i] = visible && !(rect.width == 0.0 && rect.height == 0.0);
            }
            Some(rect)
        }
        Node::Document | Node::Fragment => {
            for child in node.children() {
                lay(child, source, cursor, out, in_link, visible);
            }
            None
        }
        _ => None,
    }
}
