//! 5×7 bitmap digits.

pub const GLYPH_WIDTH: usize = 5;
pub const GLYPH_HEIGHT: usize = 7;

#[rustfmt::skip]
const DIGITS: [[&str; GLYPH_HEIGHT]; 10] = [
    [".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."],
    ["..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###."],
    [".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"],
    ["#####", "...#.", "..#..", "...#.", "....#", "#...#", ".###."],
    ["...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."],
    ["#####", "#....", "####.", "....#", "....#", "#...#", ".###."],
    ["..##.", ".#...", "#....", "####.", "#...#", "#...#", ".###."],
    ["#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."],
    [".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."],
    [".###.", "#...#", "#...#", ".####", "....#", "...#.", ".##.."],
];

/// The fixed bitmap for each digit, row-major, `true` = ink.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GlyphSet {
    glyphs: Vec<[[bool; GLYPH_WIDTH]; GLYPH_HEIGHT]>,
}

impl Default for GlyphSet {
    fn default() -> Self {
        let glyphs = DIGITS
            .iter()
            .map(|rows| {
                let mut g = [[false; GLYPH_WIDTH]; GLYPH_HEIGHT];
                for (r, line) in rows.iter().enumerate() {
                    for (c, ch) in line.chars().enumerate() {
                        g[r][c] = ch == '#';
                    }
                }
                g
            })
            .collect();
        GlyphSet { glyphs }
    }
}

impl GlyphSet {
    pub fn len(&self) -> usize {
        self.glyphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.glyphs.is_empty()
    }

    pub fn ink(&self, digit: usize, row: usize, col: usize) -> bool {
        self.glyphs[digit][row][col]
    }
}
