//! Connected-component labeling and Moore-neighbor boundary tracing.

use crate::scalar::Real;
use crate::shapedesc::Contour;

use super::{BinaryMask, SlicedTemplate};

/// Bands 1 and 6 hold the shadow/reflection extremes and are skipped.
pub const RETAINED_BANDS: std::ops::RangeInclusive<u8> = 2..=5;
/// Objects kept per retained band.
pub const OBJECTS_PER_BAND: usize = 2;

/// One shape picked from a binarization band. Placeholders stand in for
/// missing objects so the code layout stays fixed; they report `min_area`
/// (the qualification floor) as their area.
#[derive(Debug, Clone)]
pub struct SelectedObject<T> {
    /// Source band, 2..=5.
    pub template_index: u8,
    /// 1 = largest, 2 = second largest.
    pub rank: u8,
    /// Component pixels as (x, y); empty for placeholders.
    pub pixels: Vec<(u32, u32)>,
    pub contour: Contour<T>,
    pub area: usize,
    pub placeholder: bool,
}

/// Picks the two largest 8-connected components (area >= `min_area`) of each
/// retained band and traces their boundaries. Bands short of two qualifying
/// components are padded with full-frame rectangle placeholders; the second
/// return value reports whether any placeholder was needed.
pub fn select_objects<T: Real>(
    sliced: &SlicedTemplate,
    min_area: usize,
) -> (Vec<SelectedObject<T>>, bool) {
    let mut selected = Vec::with_capacity(8);
    let mut degraded = false;
    for band in RETAINED_BANDS {
        let mask = sliced.band(band);
        let mut found = band_objects(mask, band, min_area);
        while found.len() < OBJECTS_PER_BAND {
            degraded = true;
            let rank = (found.len() + 1) as u8;
            found.push(placeholder_object(mask, band, rank, min_area));
        }
        selected.extend(found);
    }
    (selected, degraded)
}

type PixelList = Vec<(u32, u32)>;

fn band_objects<T: Real>(mask: &BinaryMask, band: u8, min_area: usize) -> Vec<SelectedObject<T>> {
    let components = label_components(mask);
    let mut candidates: Vec<(PixelList, Contour<T>)> = Vec::new();
    for pixels in components {
        if pixels.len() < min_area.max(1) {
            continue;
        }
        let Some(contour) = trace_component::<T>(mask, &pixels) else {
            continue;
        };
        candidates.push((pixels, contour));
    }
    // scan order of the first pixel is the deterministic tie-break
    candidates.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then(a.0[0].cmp(&b.0[0])));
    candidates
        .into_iter()
        .take(OBJECTS_PER_BAND)
        .enumerate()
        .map(|(i, (pixels, contour))| SelectedObject {
            template_index: band,
            rank: (i + 1) as u8,
            area: pixels.len(),
            pixels,
            contour,
            placeholder: false,
        })
        .collect()
}

fn placeholder_object<T: Real>(
    mask: &BinaryMask,
    band: u8,
    rank: u8,
    min_area: usize,
) -> SelectedObject<T> {
    let w = mask.width() as i64;
    let h = mask.height() as i64;
    let mut pts: Vec<[T; 2]> = Vec::with_capacity((2 * (w + h) - 4) as usize);
    let push = |pts: &mut Vec<[T; 2]>, x: i64, y: i64| {
        pts.push([T::from_i64(x).unwrap(), T::from_i64(y).unwrap()]);
    };
    for x in 0..w {
        push(&mut pts, x, 0);
    }
    for y in 1..h {
        push(&mut pts, w - 1, y);
    }
    for x in (0..w - 1).rev() {
        push(&mut pts, x, h - 1);
    }
    for y in (1..h - 1).rev() {
        push(&mut pts, 0, y);
    }
    SelectedObject {
        template_index: band,
        rank,
        pixels: Vec::new(),
        contour: Contour::new(pts).expect("frame rectangle is a valid contour"),
        area: min_area,
        placeholder: true,
    }
}

/// Outer boundary of the largest 8-connected component, or `None` when the
/// mask holds nothing traceable.
pub fn trace_boundary<T: Real>(mask: &BinaryMask) -> Option<Contour<T>> {
    let pixels = label_components(mask).into_iter().max_by_key(Vec::len)?;
    trace_component(mask, &pixels)
}

/// 8-connected components in scan order, each as its pixel list.
pub fn label_components(mask: &BinaryMask) -> Vec<PixelList> {
    let (w, h) = (mask.width(), mask.height());
    let mut visited = vec![false; w * h];
    let mut components = Vec::new();
    let mut queue = std::collections::VecDeque::new();
    for start_y in 0..h {
        for start_x in 0..w {
            let idx = start_y * w + start_x;
            if visited[idx] || !mask.get(start_x, start_y) {
                continue;
            }
            visited[idx] = true;
            queue.push_back((start_x, start_y));
            let mut pixels = Vec::new();
            while let Some((x, y)) = queue.pop_front() {
                pixels.push((x as u32, y as u32));
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        if dx == 0 && dy == 0 {
                            continue;
                        }
                        let nx = x as i64 + dx;
                        let ny = y as i64 + dy;
                        if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                            continue;
                        }
                        let (nx, ny) = (nx as usize, ny as usize);
                        let nidx = ny * w + nx;
                        if !visited[nidx] && mask.get(nx, ny) {
                            visited[nidx] = true;
                            queue.push_back((nx, ny));
                        }
                    }
                }
            }
            components.push(pixels);
        }
    }
    components
}

/// Clockwise Moore neighborhood offsets starting west.
const MOORE: [(i64, i64); 8] =
    [(-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1)];

/// Moore-neighbor boundary trace restricted to one component's pixels. The
/// walk stops when its (pixel, backtrack) state repeats, which yields exactly
/// one period of the boundary circuit; this subsumes the usual entry-direction
/// stopping rule and also terminates on configurations whose initial state is
/// transient. Returns `None` when the boundary is too short to make a valid
/// contour (tiny or line-like components).
fn trace_component<T: Real>(mask: &BinaryMask, pixels: &[(u32, u32)]) -> Option<Contour<T>> {
    let w = mask.width();
    let h = mask.height();
    let member: std::collections::HashSet<(u32, u32)> = pixels.iter().copied().collect();
    let inside = |x: i64, y: i64| -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < w
            && (y as usize) < h
            && member.contains(&(x as u32, y as u32))
    };

    // topmost-leftmost pixel; its west neighbor is guaranteed outside
    let &start = pixels.iter().min_by_key(|&&(x, y)| (y, x))?;
    let start = (start.0 as i64, start.1 as i64);

    let mut current = start;
    let mut backtrack = (start.0 - 1, start.1);
    type WalkState = ((i64, i64), (i64, i64));
    let mut trail: Vec<(i64, i64)> = Vec::new();
    let mut seen: std::collections::HashMap<WalkState, usize> = std::collections::HashMap::new();

    let cycle_start = loop {
        if let Some(&idx) = seen.get(&(current, backtrack)) {
            break idx;
        }
        seen.insert((current, backtrack), trail.len());
        trail.push(current);

        // direction index of the backtrack cell relative to current
        let bdir = MOORE
            .iter()
            .position(|&(dx, dy)| (current.0 + dx, current.1 + dy) == backtrack)
            .expect("backtrack is always a Moore neighbor");
        let mut moved = false;
        for step in 1..=8 {
            let dir = (bdir + step) % 8;
            let (dx, dy) = MOORE[dir];
            let candidate = (current.0 + dx, current.1 + dy);
            if inside(candidate.0, candidate.1) {
                let (px, py) = MOORE[(bdir + step - 1) % 8];
                backtrack = (current.0 + px, current.1 + py);
                current = candidate;
                moved = true;
                break;
            }
        }
        if !moved {
            // isolated pixel
            return None;
        }
    };

    let boundary: Vec<[T; 2]> = trail[cycle_start..]
        .iter()
        .map(|&(x, y)| [T::from_i64(x).unwrap(), T::from_i64(y).unwrap()])
        .collect();
    if boundary.len() < 8 {
        return None;
    }
    Contour::new(boundary).ok()
}
