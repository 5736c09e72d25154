//! Embedded 16x16 bitmaps for the disc characters.

pub const GLYPH_SIZE: usize = 16;

const P: [&str; GLYPH_SIZE] = [
    "................",
    "..##########....",
    "..###########...",
    "..###.....####..",
    "..###......###..",
    "..###......###..",
    "..###.....####..",
    "..###########...",
    "..##########....",
    "..###...........",
    "..###...........",
    "..###...........",
    "..###...........",
    "..###...........",
    "..###...........",
    "................",
];

const K: [&str; GLYPH_SIZE] = [
    "................",
    "..###......###..",
    "..###.....###...",
    "..###....###....",
    "..###...###.....",
    "..###..###......",
    "..###.###.......",
    "..######........",
    "..######........",
    "..###.###.......",
    "..###..###......",
    "..###...###.....",
    "..###....###....",
    "..###.....###...",
    "..###......###..",
    "................",
];

const U: [&str; GLYPH_SIZE] = [
    "................",
    "..###......###..",
    "..###......###..",
    "..###......###..",
    "..###......###..",
    "..###......###..",
    "..###......###..",
    "..###......###..",
    "..###......###..",
    "..###......###..",
    "..###......###..",
    "..###......###..",
    "..####....####..",
    "...##########...",
    "....########....",
    "................",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Glyph {
    pub ch: char,
    rows: &'static [&'static str; GLYPH_SIZE],
}

impl Glyph {
    pub fn get(ch: char) -> Option<Glyph> {
        let rows = match ch.to_ascii_uppercase() {
            'P' => &P,
            'K' => &K,
            'U' => &U,
            _ => return None,
        };
        Some(Glyph {
            ch: ch.to_ascii_uppercase(),
            rows,
        })
    }

    /// Whether cell (`col`, `row`) is lit; out-of-range cells are dark.
    pub fn lit(&self, col: i64, row: i64) -> bool {
        if !(0..GLYPH_SIZE as i64).contains(&col) || !(0..GLYPH_SIZE as i64).contains(&row) {
            return false;
        }
        self.rows[row as usize].as_bytes()[col as usize] == b'#'
    }

    pub fn lit_cells(&self) -> usize {
        self.rows
            .iter()
            .map(|r| r.bytes().filter(|&b| b == b'#').count())
            .sum()
    }
}
