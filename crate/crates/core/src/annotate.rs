//! Visual prompts: a red frame around the input box being filled, blue
//! numbered frames around the candidate buttons.
//!
//! Rectangles are given in viewport CSS pixels and scaled by the device pixel
//! ratio here. Frames are drawn outside the element, so its pixels stay
//! untouched.

use std::collections::BTreeMap;
use std::io::Cursor;

use image::{ImageFormat, Rgba, RgbaImage};
use thiserror::Error;

use crate::dom::ElementKey;
use crate::geometry::Rect;

pub const RED: Rgba<u8> = Rgba([255, 0, 0, 255]);
pub const BLUE: Rgba<u8> = Rgba([0, 0, 255, 255]);
const WHITE: Rgba<u8> = Rgba([255, 255, 255, 255]);

#[derive(Debug, Error, PartialEq)]
pub enum AnnotateError {
    #[error("rectangle {0:?} is outside the screenshot")]
    RectOutOfBounds(Rect),
    #[error("rectangle {0:?} has no area")]
    DegenerateRect(Rect),
    #[error("no buttons to annotate")]
    NoButtons,
    #[error("png encoding failed: {0}")]
    Encode(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnotateOptions {
    /// Stroke width at scale 1.
    pub stroke: f64,
    /// Gap between element and frame at scale 1.
    pub margin: f64,
    pub input_color: Rgba<u8>,
    pub button_color: Rgba<u8>,
}

impl Default for AnnotateOptions {
    fn default() -> Self {
        AnnotateOptions {
            stroke: 3.0,
            margin: 2.0,
            input_color: RED,
            button_color: BLUE,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AnnotatedScreenshot {
    pub image: RgbaImage,
    pub numbering: BTreeMap<u32, ElementKey>,
    pub scale: f64,
}

impl AnnotatedScreenshot {
    pub fn to_png(&self) -> Result<Vec<u8>, AnnotateError> {
        encode_png(&self.image)
    }
}

pub fn encode_png(image: &RgbaImage) -> Result<Vec<u8>, AnnotateError> {
    let mut out = Vec::new();
    image
        .write_to(&mut Cursor::new(&mut out), ImageFormat::Png)
        .map_err(|e| AnnotateError::Encode(e.to_string()))?;
    Ok(out)
}

/// Pixel box `[x0, x1) × [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct PxBox {
    x0: i64,
    y0: i64,
    x1: i64,
    y1: i64,
}

impl PxBox {
    fn intersects(&self, o: &PxBox) -> bool {
        self.x0 < o.x1 && o.x0 < self.x1 && self.y0 < o.y1 && o.y0 < self.y1
    }
}

fn to_pixels(rect: &Rect, scale: f64, image: &RgbaImage) -> Result<PxBox, AnnotateError> {
    if rect.is_degenerate() {
        return Err(AnnotateError::DegenerateRect(*rect));
    }
    let r = rect.scale(scale);
    let px = PxBox {
        x0: r.x.round() as i64,
        y0: r.y.round() as i64,
        x1: r.right().round() as i64,
        y1: r.bottom().round() as i64,
    };
    if px.x1 <= px.x0 || px.y1 <= px.y0 {
        return Err(AnnotateError::DegenerateRect(*rect));
    }
    if px.x0 < 0 || px.y0 < 0 || px.x1 > image.width() as i64 || px.y1 > image.height() as i64 {
        return Err(AnnotateError::RectOutOfBounds(*rect));
    }
    Ok(px)
}

fn fill(image: &mut RgbaImage, b: PxBox, color: Rgba<u8>) {
    let x0 = b.x0.max(0);
    let y0 = b.y0.max(0);
    let x1 = b.x1.min(image.width() as i64);
    let y1 = b.y1.min(image.height() as i64);
    for y in y0..y1 {
        for x in x0..x1 {
            image.put_pixel(x as u32, y as u32, color);
        }
    }
}

/// Outline drawn around `inner`, `gap` pixels away, clamped to the image.
/// Returns the outer box.
fn frame(image: &mut RgbaImage, inner: PxBox, gap: i64, width: i64, color: Rgba<u8>) -> PxBox {
    let o = PxBox {
        x0: inner.x0 - gap - width,
        y0: inner.y0 - gap - width,
        x1: inner.x1 + gap + width,
        y1: inner.y1 + gap + width,
    };
    let i = PxBox {
        x0: inner.x0 - gap,
        y0: inner.y0 - gap,
        x1: inner.x1 + gap,
        y1: inner.y1 + gap,
    };
    fill(image, PxBox { y1: i.y0, ..o }, color);
    fill(image, PxBox { y0: i.y1, ..o }, color);
    fill(image, PxBox { x1: i.x0, y0: i.y0, y1: i.y1, ..o }, color);
    fill(image, PxBox { x0: i.x1, y0: i.y0, y1: i.y1, ..o }, color);
    o
}

fn stroke_px(options: &AnnotateOptions, scale: f64) -> (i64, i64) {
    let width = (options.stroke * scale).round().max(1.0) as i64;
    let gap = (options.margin * scale).round().max(0.0) as i64;
    (gap, width)
}

/// Red frame around the input box.
pub fn annotate_input(
    screenshot: &RgbaImage,
    widget_rect: &Rect,
    scale: f64,
    options: &AnnotateOptions,
) -> Result<AnnotatedScreenshot, AnnotateError> {
    let mut image = screenshot.clone();
    let b = to_pixels(widget_rect, scale, &image)?;
    let (gap, width) = stroke_px(options, scale);
    frame(&mut image, b, gap, width, options.input_color);
    Ok(AnnotatedScreenshot {
        image,
        numbering: BTreeMap::new(),
        scale,
    })
}

/// Red frame around the input box, numbered blue frames around `buttons`.
/// Numbers follow the order of `buttons`, starting at 1.
pub fn annotate_elements(
    screenshot: &RgbaImage,
    widget_rect: &Rect,
    buttons: &[(ElementKey, Rect)],
    scale: f64,
    options: &AnnotateOptions,
) -> Result<AnnotatedScreenshot, AnnotateError> {
    if buttons.is_empty() {
        return Err(AnnotateError::NoButtons);
    }
    let mut image = screenshot.clone();
    let widget = to_pixels(widget_rect, scale, &image)?;
    let boxes = buttons
        .iter()
        .map(|(_, r)| to_pixels(r, scale, &image))
        .collect::<Result<Vec<_>, _>>()?;
    let (gap, width) = stroke_px(options, scale);
    frame(&mut image, widget, gap, width, options.input_color);
    let outers: Vec<PxBox> = boxes
        .iter()
        .map(|b| frame(&mut image, *b, gap, width, options.button_color))
        .collect();
    let glyph = (scale.round() as i64).max(1) * 2;
    let mut placed: Vec<PxBox> = Vec::new();
    let mut numbering = BTreeMap::new();
    for (i, ((key, _), outer)) in buttons.iter().zip(&outers).enumerate() {
        let number = (i + 1) as u32;
        let digits = number.to_string();
        let pad = glyph;
        let w = digits.len() as i64 * (5 * glyph + glyph) - glyph + 2 * pad;
        let h = 7 * glyph + 2 * pad;
        let mut tag = PxBox {
            x0: outer.x0.max(0),
            y0: outer.y0.max(0),
            x1: outer.x0.max(0) + w,
            y1: outer.y0.max(0) + h,
        };
        while placed.iter().any(|p| p.intersects(&tag)) {
            tag.y0 += h + 1;
            tag.y1 += h + 1;
        }
        fill(&mut image, tag, options.button_color);
        for (j, ch) in digits.chars().enumerate() {
            let x = tag.x0 + pad + j as i64 * 6 * glyph;
            draw_digit(&mut image, ch, x, tag.y0 + pad, glyph, WHITE);
        }
        placed.push(tag);
        numbering.insert(number, key.clone());
    }
    Ok(AnnotatedScreenshot {
        image,
        numbering,
        scale,
    })
}

const DIGITS: [[u8; 7]; 10] = [
    [0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E],
    [0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E],
    [0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F],
    [0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E],
    [0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02],
    [0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E],
    [0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E],
    [0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08],
    [0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E],
    [0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C],
];

fn draw_digit(image: &mut RgbaImage, ch: char, x: i64, y: i64, size: i64, color: Rgba<u8>) {
    let Some(d) = ch.to_digit(10) else { return };
    for (row, bits) in DIGITS[d as usize].iter().enumerate() {
        for col in 0..5 {
            if bits & (0x10 >> col) != 0 {
                let px = x + col * size;
                let py = y + row as i64 * size;
                fill(image, PxBox { x0: px, y0: py, x1: px + size, y1: py + size }, color);
            }
        }
    }
}
