//! Annotated overlay: box borders, species label text, and a
//! semi-transparent tint over disease-mask pixels. Everything is drawn
//! inside the finding boxes so pixels outside all boxes stay untouched.

use image::{Rgb, RgbImage};

use super::OrangeFinding;
use crate::backends::MaskMap;

#[derive(Debug, Clone)]
pub struct OverlayStyle {
    pub box_color: Rgb<u8>,
    pub box_thickness: u32,
    pub text_color: Rgb<u8>,
    /// Alpha for disease tinting, 0..1.
    pub tint_alpha: f64,
    pub tint_color: Rgb<u8>,
}

impl Default for OverlayStyle {
    fn default() -> Self {
        Self {
            box_color: Rgb([255, 255, 255]),
            box_thickness: 2,
            text_color: Rgb([255, 255, 255]),
            tint_alpha: 0.5,
            tint_color: Rgb([255, 0, 0]),
        }
    }
}

// 5x7 bitmap glyphs, one u8 per row, low 5 bits used.
const GLYPH_W: u32 = 5;
const GLYPH_H: u32 = 7;

fn glyph(c: char) -> [u8; 7] {
    match c.to_ascii_uppercase() {
        'A' => [0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11],
        'B' => [0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E],
        'C' => [0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E],
        'D' => [0x1E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1E],
        'E' => [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F],
        'F' => [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10],
        'G' => [0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F],
        'H' => [0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11],
        'I' => [0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E],
        'J' => [0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C],
        'K' => [0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11],
        'L' => [0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F],
        'M' => [0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11],
        'N' => [0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11],
        'O' => [0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E],
        'P' => [0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10],
        'Q' => [0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D],
        'R' => [0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11],
        'S' => [0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E],
        'T' => [0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04],
        'U' => [0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E],
        'V' => [0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04],
        'W' => [0x11, 0x11, 0x11, 0x15, 0x15, 0x1B, 0x11],
        'X' => [0x11, 0x0A, 0x04, 0x04, 0x04, 0x0A, 0x11],
        'Y' => [0x11, 0x11, 0x0A, 0x04, 0x04, 0x04, 0x04],
        'Z' => [0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F],
        '0' => [0x0E, 0x13, 0x15, 0x15, 0x15, 0x19, 0x0E],
        '1' => [0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E],
        '2' => [0x0E, 0x11, 0x01, 0x06, 0x08, 0x10, 0x1F],
        '3' => [0x0E, 0x11, 0x01, 0x06, 0x01, 0x11, 0x0E],
        '4' => [0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02],
        '5' => [0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E],
        '6' => [0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E],
        '7' => [0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08],
        '8' => [0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E],
        '9' => [0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C],
        '.' => [0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C],
        '=' => [0x00, 0x00, 0x1F, 0x00, 0x1F, 0x00, 0x00],
        '-' => [0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00],
        _ => [0x00; 7], // unknown chars and space render blank
    }
}

fn draw_text(img: &mut RgbImage, text: &str, x0: u32, y0: u32, max_x: u32, color: Rgb<u8>) {
    let mut x = x0;
    for c in text.chars() {
        if x + GLYPH_W >= max_x {
            break;
        }
        let rows = glyph(c);
        for (dy, row) in rows.iter().enumerate() {
            for dx in 0..GLYPH_W {
                if row >> (GLYPH_W - 1 - dx) & 1 == 1 {
                    let (px, py) = (x + dx, y0 + dy as u32);
                    if px < img.width() && py < img.height() {
                        img.put_pixel(px, py, color);
                    }
                }
            }
        }
        x += GLYPH_W + 1;
    }
}

fn blend(src: Rgb<u8>, tint: Rgb<u8>, alpha: f64) -> Rgb<u8> {
    let mix = |s: u8, t: u8| ((1.0 - alpha) * s as f64 + alpha * t as f64).round() as u8;
    Rgb([mix(src[0], tint[0]), mix(src[1], tint[1]), mix(src[2], tint[2])])
}

/// Renders the findings over a copy of the source image. `masks` pairs each
/// finding with its crop mask (when segmentation succeeded) and the crop's
/// origin in source coordinates.
pub fn compose_overlay(
    image: &RgbImage,
    findings: &[OrangeFinding],
    masks: &[Option<(MaskMap, (u32, u32))>],
    style: &OverlayStyle,
) -> RgbImage {
    let mut out = image.clone();
    let (w, h) = out.dimensions();

    for (finding, mask) in findings.iter().zip(masks) {
        let [bx0, by0, bx1, by1] = finding.bbox_xyxy;
        let x0 = bx0.floor().max(0.0) as u32;
        let y0 = by0.floor().max(0.0) as u32;
        let x1 = (bx1.ceil() as u32).min(w);
        let y1 = (by1.ceil() as u32).min(h);

        // disease tint first so the border stays crisp; tint only inside the box
        if let Some((mask, (ox, oy))) = mask {
            for my in 0..mask.height {
                for mx in 0..mask.width {
                    if mask.class_at(mx, my) == 0 {
                        continue;
                    }
                    let (px, py) = (ox + mx, oy + my);
                    if px >= x0 && px < x1 && py >= y0 && py < y1 {
                        let blended = blend(*out.get_pixel(px, py), style.tint_color, style.tint_alpha);
                        out.put_pixel(px, py, blended);
                    }
                }
            }
        }

        // box border
        for t in 0..style.box_thickness {
            for px in x0..x1 {
                for py in [y0 + t, y1.saturating_sub(1 + t)] {
                    if py >= y0 && py < y1 {
                        out.put_pixel(px, py, style.box_color);
                    }
                }
            }
            for py in y0..y1 {
                for px in [x0 + t, x1.saturating_sub(1 + t)] {
                    if px >= x0 && px < x1 {
                        out.put_pixel(px, py, style.box_color);
                    }
                }
            }
        }

        // label text inside the box, under the top border
        if let Some(species) = &finding.species {
            let text = format!("{} p={:.2}", species.label, species.confidence);
            let tx = x0 + style.box_thickness + 2;
            let ty = y0 + style.box_thickness + 2;
            if ty + GLYPH_H < y1 {
                draw_text(&mut out, &text, tx, ty, x1, style.text_color);
            }
        }
    }
    out
}
