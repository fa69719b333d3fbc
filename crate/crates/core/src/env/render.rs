use std::path::Path;

use image::{Rgb, RgbImage};

use super::{Env, EnvError, EnvState, TileKind};

/// One character per tile, with the active labels on the first line.
pub fn render_text(env: &Env, s: &EnvState) -> String {
    let layout = env.layout();
    let labels = env.labels(s).atoms();
    let mut out = format!("labels: {}\n", if labels.is_empty() { "-".to_string() } else { labels.join(" ") });
    for y in 0..layout.height {
        for x in 0..layout.width {
            let c = super::Cell::new(x, y);
            let person = s.persons.iter().find(|p| p.pos() == Some(c));
            let ch = if s.agent == c {
                'A'
            } else if let Some(p) = person {
                if p.in_water() { 'd' } else { 'p' }
            } else if layout.goal == c {
                'G'
            } else {
                match layout.tile(c) {
                    TileKind::Land => 'L',
                    TileKind::Water => 'W',
                    TileKind::Bridge => '=',
                }
            };
            out.push(ch);
        }
        out.push('\n');
    }
    out
}

const TILE: u32 = 24;

const GLYPH_B: [u8; 7] = [0b11110, 0b10001, 0b10001, 0b11110, 0b10001, 0b10001, 0b11110];
const GLYPH_D: [u8; 7] = [0b11110, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b11110];

fn fill(img: &mut RgbImage, x0: u32, y0: u32, w: u32, h: u32, color: Rgb<u8>) {
    for y in y0..(y0 + h).min(img.height()) {
        for x in x0..(x0 + w).min(img.width()) {
            img.put_pixel(x, y, color);
        }
    }
}

fn disc(img: &mut RgbImage, cx: u32, cy: u32, r: u32, color: Rgb<u8>) {
    let r2 = (r * r) as i64;
    for y in cy.saturating_sub(r)..=cy + r {
        for x in cx.saturating_sub(r)..=cx + r {
            let (dx, dy) = (x as i64 - cx as i64, y as i64 - cy as i64);
            if dx * dx + dy * dy <= r2 && x < img.width() && y < img.height() {
                img.put_pixel(x, y, color);
            }
        }
    }
}

fn glyph(img: &mut RgbImage, rows: &[u8; 7], x0: u32, y0: u32) {
    for (dy, row) in rows.iter().enumerate() {
        for dx in 0..5 {
            if row >> (4 - dx) & 1 == 1 {
                fill(img, x0 + dx * 2, y0 + dy as u32 * 2, 2, 2, Rgb([0, 0, 0]));
            }
        }
    }
}

/// Raster rendering written as PNG.
pub fn render_png(env: &Env, s: &EnvState, path: &Path) -> Result<(), EnvError> {
    let layout = env.layout();
    let mut img = RgbImage::new(layout.width as u32 * TILE, layout.height as u32 * TILE);
    for y in 0..layout.height {
        for x in 0..layout.width {
            let c = super::Cell::new(x, y);
            let color = match layout.tile(c) {
                TileKind::Land => Rgb([120, 190, 90]),
                TileKind::Water => Rgb([70, 120, 220]),
                TileKind::Bridge => Rgb([150, 100, 60]),
            };
            fill(&mut img, x as u32 * TILE, y as u32 * TILE, TILE, TILE, color);
            if layout.goal == c {
                fill(&mut img, x as u32 * TILE + 4, y as u32 * TILE + 4, TILE - 8, TILE - 8, Rgb([240, 220, 60]));
            }
        }
    }
    let centre = |c: super::Cell| (c.x as u32 * TILE + TILE / 2, c.y as u32 * TILE + TILE / 2);
    for p in &s.persons {
        if let Some(c) = p.pos() {
            let (cx, cy) = centre(c);
            let color = if p.in_water() { Rgb([230, 60, 60]) } else { Rgb([250, 250, 250]) };
            disc(&mut img, cx, cy, TILE / 3, color);
        }
    }
    let (cx, cy) = centre(s.agent);
    fill(&mut img, cx - TILE / 4, cy - TILE / 4, TILE / 2, TILE / 2, Rgb([20, 20, 20]));
    let labels = env.labels(s);
    let mut x0 = 2;
    for (on, rows) in [(labels.bridge, &GLYPH_B), (labels.drowning, &GLYPH_D)] {
        if on {
            glyph(&mut img, rows, x0, 2);
            x0 += 12;
        }
    }
    img.save(path).map_err(|e| EnvError::Io(std::io::Error::other(e)))
}
