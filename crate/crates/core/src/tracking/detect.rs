use serde::{Deserialize, Serialize};

use crate::geom::BBox;
use crate::spike::SpikeFrame;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub tick: u64,
    /// Fired neurons making up the component.
    #[serde(skip)]
    pub mask: Vec<(u32, u32)>,
    pub bbox: BBox,
    pub centroid: (f64, f64),
}

impl Detection {
    pub fn area(&self) -> usize {
        self.mask.len()
    }
}

/// 8-connected components of `fired` with at least `min_area` members,
/// ordered by their first pixel in row-major order.
pub fn detect(fired: &SpikeFrame, width: u32, height: u32, min_area: usize) -> Vec<Detection> {
    let (w, h) = (width as usize, height as usize);
    debug_assert_eq!(fired.pixel_count(), w * h);
    let mut seen = vec![false; w * h];
    let mut stack = Vec::new();
    let mut out = Vec::new();
    for start in fired.ones() {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut mask = Vec::new();
        while let Some(idx) = stack.pop() {
            let (x, y) = (idx % w, idx / w);
            mask.push((x as u32, y as u32));
            for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    let n = ny * w + nx;
                    if !seen[n] && fired.get(n) {
                        seen[n] = true;
                        stack.push(n);
                    }
                }
            }
        }
        if mask.len() < min_area.max(1) {
            continue;
        }
        let (x0, y0) = mask[0];
        let mut bbox = BBox::point(x0 as i64, y0 as i64);
        let (mut sx, mut sy) = (0.0, 0.0);
        for &(x, y) in &mask {
            bbox.include(x as i64, y as i64);
            sx += x as f64;
            sy += y as f64;
        }
        let n = mask.len() as f64;
        out.push(Detection {
            tick: fired.tick_index,
            mask,
            bbox,
            centroid: (sx / n, sy / n),
        });
    }
    out
}

/// Merges detections whose bounding boxes are separated by at most `gap`
/// empty rows or columns, so a glyph whose strokes fire as
/// separate components is reported once. `gap = 0` leaves the list unchanged.
pub fn merge_nearby(detections: Vec<Detection>, gap: i64) -> Vec<Detection> {
    if gap <= 0 || detections.len() < 2 {
        return detections;
    }
    let n = detections.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (&detections[i].bbox, &detections[j].bbox);
            let dx = (b.x_min - a.x_max).max(a.x_min - b.x_max);
            let dy = (b.y_min - a.y_max).max(a.y_min - b.y_max);
            if dx.max(dy) <= gap + 1 {
                let (ri, rj) = (root(&mut parent, i), root(&mut parent, j));
                parent[ri.max(rj)] = ri.min(rj);
            }
        }
    }
    let mut groups: Vec<Option<Detection>> = vec![None; n];
    for (i, det) in detections.into_iter().enumerate() {
        let r = root(&mut parent, i);
        match &mut groups[r] {
            Some(g) => {
                g.mask.extend(det.mask);
                g.bbox.include(det.bbox.x_min, det.bbox.y_min);
                g.bbox.include(det.bbox.x_max, det.bbox.y_max);
            }
            slot => *slot = Some(det),
        }
    }
    groups
        .into_iter()
        .flatten()
        .map(|mut g| {
            let k = g.mask.len() as f64;
            let (sx, sy) = g
                .mask
                .iter()
                .fold((0.0, 0.0), |(sx, sy), &(x, y)| (sx + x as f64, sy + y as f64));
            g.centroid = (sx / k, sy / k);
            g
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask_from(rows: &[&str]) -> (SpikeFrame, u32, u32) {
        let w = rows[0].len() as u32;
        let h = rows.len() as u32;
        let bits: Vec<bool> = rows.iter().flat_map(|r| r.bytes().map(|b| b == b'#')).collect();
        (SpikeFrame::from_bools(&bits, 0), w, h)
    }

    #[test]
    fn empty_mask() {
        assert!(detect(&SpikeFrame::zeros(16, 0), 4, 4, 1).is_empty());
    }

    #[test]
    fn two_blocks() {
        let (f, w, h) = mask_from(&[
            "###.....",
            "###.....",
            "###..###",
            ".....###",
            ".....###",
        ]);
        let d = detect(&f, w, h, 4);
        assert_eq!(d.len(), 2);
        assert_eq!(d[0].bbox, BBox::new(0, 0, 2, 2));
        assert_eq!(d[1].bbox, BBox::new(5, 2, 7, 4));
        assert_eq!(d[0].centroid, (1.0, 1.0));
        assert_eq!(d[1].area(), 9);
    }

    #[test]
    fn diagonal_touch_is_connected() {
        let (f, w, h) = mask_from(&["##..", "##..", "..##", "..##"]);
        assert_eq!(detect(&f, w, h, 1).len(), 1);
    }

    #[test]
    fn speckle_below_min_area_dropped() {
        let (f, w, h) = mask_from(&["#...#", ".....", "..###", "..###"]);
        let d = detect(&f, w, h, 4);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].area(), 6);
    }

    #[test]
    fn nearby_fragments_merge() {
        let (f, w, h) = mask_from(&[
            "##.##.......",
            "##.##.......",
            "........####",
            "........####",
        ]);
        let d = detect(&f, w, h, 4);
        assert_eq!(d.len(), 3);
        let merged = merge_nearby(d.clone(), 1);
        assert_eq!(merged.len(), 2);
        assert_eq!(merged[0].bbox, BBox::new(0, 0, 4, 1));
        assert_eq!(merged[0].area(), 8);
        assert_eq!(merged[0].centroid, (2.0, 0.5));
        assert_eq!(merge_nearby(d.clone(), 0), d);
        assert_eq!(merge_nearby(d, 4).len(), 1);
    }
}
