//! 4D light fields and their structural transforms.
//!
//! A light field is stored as a tensor `[A, A, C, H, W]`: angular row `u`,
//! angular column `v`, channel, spatial row `y`, spatial column `x`.
//! Horizontal parallax therefore pairs `v` with `x`, vertical parallax pairs
//! `u` with `y`:
//!
//! * a horizontal EPI fixes `(y, u)` and spans `[v, x]`,
//! * a vertical EPI fixes `(x, v)` and spans `[u, y]`.
//!
//! Public angular positions ([`AngularPos`]) are 1-based.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};

/// 1-based angular coordinate `(u, v)` = (angular row, angular column).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AngularPos {
    pub u: usize,
    pub v: usize,
}

impl AngularPos {
    pub const fn new(u: usize, v: usize) -> Self {
        Self { u, v }
    }

    /// Centre of an odd `a × a` grid.
    pub fn center(a: usize) -> Self {
        Self::new(a.div_ceil(2), a.div_ceil(2))
    }

    fn index(self, a: usize) -> Result<(usize, usize)> {
        if self.u == 0 || self.v == 0 || self.u > a || self.v > a {
            return Err(Error::dim(format!(
                "angular position ({}, {}) outside a {a}x{a} grid",
                self.u, self.v
            )));
        }
        Ok((self.u - 1, self.v - 1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LightField<T: Element> {
    data: Tensor<T>,
}

impl<T: Element> LightField<T> {
    /// Wraps a `[A, A, C, H, W]` tensor.
    pub fn new(data: Tensor<T>) -> Result<Self> {
        let [a, b, c, h, w] = data.dims()?;
        if a != b || a == 0 {
            return Err(Error::dim(format!(
                "light field needs a square angular grid, got {a}x{b}"
            )));
        }
        if c == 0 || h == 0 || w == 0 {
            return Err(Error::dim("light field has an empty extent"));
        }
        Ok(Self { data })
    }

    /// Builds a light field from `a²` views in row-major angular order, each `[C, H, W]`.
    pub fn from_views(a: usize, views: &[Tensor<T>]) -> Result<Self> {
        if views.len() != a * a || a == 0 {
            return Err(Error::dim(format!("{} views do not fill an {a}x{a} grid", views.len())));
        }
        let shape = views[0].dims::<3>()?;
        let mut data = Vec::with_capacity(a * a * views[0].numel());
        for v in views {
            if v.dims::<3>()? != shape {
                return Err(Error::dim("all views must share the same shape"));
            }
            data.extend_from_slice(v.data());
        }
        Self::new(Tensor::new([a, a, shape[0], shape[1], shape[2]], data)?)
    }

    pub fn angular(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn channels(&self) -> usize {
        self.data.shape()[2]
    }

    pub fn height(&self) -> usize {
        self.data.shape()[3]
    }

    pub fn width(&self) -> usize {
        self.data.shape()[4]
    }

    pub fn data(&self) -> &Tensor<T> {
        &self.data
    }

    pub fn into_data(self) -> Tensor<T> {
        self.data
    }

    fn view_len(&self) -> usize {
        self.channels() * self.height() * self.width()
    }

    pub fn view(&self, pos: AngularPos) -> Result<Tensor<T>> {
        let (u, v) = pos.index(self.angular())?;
        let len = self.view_len();
        let start = (u * self.angular() + v) * len;
        Tensor::new(
            [self.channels(), self.height(), self.width()],
            self.data.data()[start..start + len].to_vec(),
        )
    }

    pub fn views(&self) -> Vec<Tensor<T>> {
        let shape = [self.channels(), self.height(), self.width()];
        self.data
            .data()
            .chunks(self.view_len())
            .map(|c| Tensor::new(shape, c.to_vec()).expect("view extents"))
            .collect()
    }

    pub fn positions(&self) -> Vec<AngularPos> {
        let a = self.angular();
        (1..=a)
            .flat_map(|u| (1..=a).map(move |v| AngularPos::new(u, v)))
            .collect()
    }

    /// Every element in `[0, 1]`.
    pub fn in_unit_range(&self) -> bool {
        self.data.data().iter().all(|&v| v >= T::zero() && v <= T::one())
    }

    /// Views as a single-image batch `[1, A², H, W]`; needs one channel.
    pub fn to_batch(&self) -> Result<Tensor<T>> {
        if self.channels() != 1 {
            return Err(Error::dim("batch layout needs a single-channel light field"));
        }
        let a = self.angular();
        self.data.clone().reshape([1, a * a, self.height(), self.width()])
    }

    /// Inverse of [`LightField::to_batch`] for one batch entry of `[b, A², H, W]`.
    pub fn from_batch(batch: &Tensor<T>, index: usize) -> Result<Self> {
        let [b, n, h, w] = batch.dims()?;
        let a = (n as f64).sqrt().round() as usize;
        if a * a != n || index >= b {
            return Err(Error::dim(format!(
                "cannot read light field {index} from {:?}",
                batch.shape()
            )));
        }
        let len = n * h * w;
        Self::new(Tensor::new(
            [a, a, 1, h, w],
            batch.data()[index * len..(index + 1) * len].to_vec(),
        )?)
    }

    pub fn map_views(&self, mut f: impl FnMut(&Tensor<T>) -> Result<Tensor<T>>) -> Result<Self> {
        let views = self.views().iter().map(&mut f).collect::<Result<Vec<_>>>()?;
        Self::from_views(self.angular(), &views)
    }

    /// Spatial crop `[y0, y0+h) × [x0, x0+w)` of every view.
    pub fn crop(&self, y0: usize, x0: usize, h: usize, w: usize) -> Result<Self> {
        self.map_views(|v| crop_image(v, y0, x0, h, w))
    }

    /// Single-channel light field of channel `c`.
    pub fn channel(&self, c: usize) -> Result<Self> {
        if c >= self.channels() {
            return Err(Error::dim(format!("channel {c} out of range")));
        }
        self.map_views(|v| {
            let [_, h, w] = v.dims()?;
            Tensor::new([1, h, w], v.data()[c * h * w..(c + 1) * h * w].to_vec())
        })
    }
}

/// Crops a `[C, H, W]` image.
pub fn crop_image<T: Element>(img: &Tensor<T>, y0: usize, x0: usize, h: usize, w: usize) -> Result<Tensor<T>> {
    let [c, ih, iw] = img.dims()?;
    if y0 + h > ih || x0 + w > iw || h == 0 || w == 0 {
        return Err(Error::dim(format!(
            "crop {h}x{w} at ({y0}, {x0}) exceeds image {ih}x{iw}"
        )));
    }
    let mut data = Vec::with_capacity(c * h * w);
    for ch in 0..c {
        for y in y0..y0 + h {
            let row = (ch * ih + y) * iw;
            data.extend_from_slice(&img.data()[row + x0..row + x0 + w]);
        }
    }
    Tensor::new([c, h, w], data)
}

/// Interleaved layout `[C, A·H, A·W]`: sample `(u, v)` of pixel `(y, x)` sits
/// at `(y·A + u, x·A + v)` (0-based).
#[derive(Debug, Clone, PartialEq)]
pub struct MacroPixelImage<T: Element> {
    pub angular: usize,
    pub data: Tensor<T>,
}

pub fn lf_to_macpi<T: Element>(lf: &LightField<T>) -> MacroPixelImage<T> {
    let (a, c, h, w) = (lf.angular(), lf.channels(), lf.height(), lf.width());
    let (mh, mw) = (a * h, a * w);
    let src = lf.data().data();
    let mut out = vec![T::zero(); c * mh * mw];
    for u in 0..a {
        for v in 0..a {
            for ch in 0..c {
                for y in 0..h {
                    for x in 0..w {
                        let s = ((((u * a + v) * c + ch) * h + y) * w) + x;
                        out[(ch * mh + y * a + u) * mw + x * a + v] = src[s];
                    }
                }
            }
        }
    }
    MacroPixelImage {
        angular: a,
        data: Tensor::new([c, mh, mw], out).expect("macpi extents"),
    }
}

pub fn macpi_to_lf<T: Element>(m: &Tensor<T>, a: usize) -> Result<LightField<T>> {
    let [c, mh, mw] = m.dims()?;
    if a == 0 || mh % a != 0 || mw % a != 0 {
        return Err(Error::dim(format!(
            "MacPI {mh}x{mw} is not divisible by angular extent {a}"
        )));
    }
    let (h, w) = (mh / a, mw / a);
    let src = m.data();
    let mut out = vec![T::zero(); c * mh * mw];
    for u in 0..a {
        for v in 0..a {
            for ch in 0..c {
                for y in 0..h {
                    for x in 0..w {
                        let d = ((((u * a + v) * c + ch) * h + y) * w) + x;
                        out[d] = src[(ch * mh + y * a + u) * mw + x * a + v];
                    }
                }
            }
        }
    }
    LightField::new(Tensor::new([a, a, c, h, w], out)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EpiOrientation {
    /// Fixed spatial row `y` and angular row `u`; spans `[v, x]`.
    Horizontal,
    /// Fixed spatial column `x` and angular column `v`; spans `[u, y]`.
    Vertical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpiSlice<T: Element> {
    pub orientation: EpiOrientation,
    /// `(spatial, angular)` fixed coordinates, 0-based spatial, 1-based angular.
    pub fixed: (usize, usize),
    /// `[angular extent, spatial extent]`.
    pub data: Tensor<T>,
}

/// Extracts one EPI of channel `channel`.
pub fn extract_epi<T: Element>(
    lf: &LightField<T>,
    orientation: EpiOrientation,
    spatial: usize,
    angular: usize,
    channel: usize,
) -> Result<EpiSlice<T>> {
    let (a, c, h, w) = (lf.angular(), lf.channels(), lf.height(), lf.width());
    if angular == 0 || angular > a || channel >= c {
        return Err(Error::dim(format!(
            "EPI angular index {angular} / channel {channel} out of range"
        )));
    }
    let fixed_ang = angular - 1;
    let src = lf.data().data();
    let at = |u: usize, v: usize, y: usize, x: usize| src[((((u * a + v) * c + channel) * h + y) * w) + x];
    let data = match orientation {
        EpiOrientation::Horizontal => {
            if spatial >= h {
                return Err(Error::dim(format!("EPI row {spatial} out of range (height {h})")));
            }
            Tensor::from_fn([a, w], |i| at(fixed_ang, i / w, spatial, i % w))
        }
        EpiOrientation::Vertical => {
            if spatial >= w {
                return Err(Error::dim(format!("EPI column {spatial} out of range (width {w})")));
            }
            Tensor::from_fn([a, h], |i| at(i / h, fixed_ang, i % h, spatial))
        }
    };
    Ok(EpiSlice {
        orientation,
        fixed: (spatial, angular),
        data,
    })
}

/// Central view plus the side views in row-major angular order.
#[derive(Debug, Clone, PartialEq)]
pub struct CenterSide<T: Element> {
    pub angular: usize,
    pub central: Tensor<T>,
    pub side: Vec<(AngularPos, Tensor<T>)>,
}

pub fn split_center_side<T: Element>(lf: &LightField<T>) -> Result<CenterSide<T>> {
    let a = lf.angular();
    if a.is_multiple_of(2) {
        return Err(Error::dim(format!(
            "centre/side split needs an odd angular extent, got {a}"
        )));
    }
    let center = AngularPos::center(a);
    let mut side = Vec::with_capacity(a * a - 1);
    let mut central = None;
    for (pos, view) in lf.positions().into_iter().zip(lf.views()) {
        if pos == center {
            central = Some(view);
        } else {
            side.push((pos, view));
        }
    }
    Ok(CenterSide {
        angular: a,
        central: central.expect("odd grid has a centre"),
        side,
    })
}

pub fn recombine<T: Element>(parts: &CenterSide<T>) -> Result<LightField<T>> {
    let a = parts.angular;
    let center = AngularPos::center(a);
    let mut views = Vec::with_capacity(a * a);
    let mut side = parts.side.iter();
    for u in 1..=a {
        for v in 1..=a {
            let pos = AngularPos::new(u, v);
            if pos == center {
                views.push(parts.central.clone());
            } else {
                let (p, view) = side.next().ok_or_else(|| Error::dim("too few side views"))?;
                if *p != pos {
                    return Err(Error::dim(format!("side view at ({}, {}) out of order", p.u, p.v)));
                }
                views.push(view.clone());
            }
        }
    }
    LightField::from_views(a, &views)
}

/// How side views are partitioned into 2×2 pseudo light fields.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupingPattern {
    /// Per concentric ring, the four-fold rotation orbits around the centre:
    /// corners first, then edge midpoints, then the remaining orbits.
    Rings,
    /// Side views in row-major order, chunked by four (no reorganisation).
    IndexOrder,
    /// Caller-supplied groups.
    Explicit(Vec<[AngularPos; 4]>),
}

/// Ordered groups of four side views, each laid out 2×2 in row-major order
/// of the original positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViewGrouping {
    pub angular: usize,
    pub pattern: GroupingPattern,
    pub groups: Vec<[AngularPos; 4]>,
}

fn side_positions(a: usize) -> Vec<AngularPos> {
    let c = AngularPos::center(a);
    (1..=a)
        .flat_map(|u| (1..=a).map(move |v| AngularPos::new(u, v)))
        .filter(|&p| p != c)
        .collect()
}

fn ring_groups(a: usize) -> Vec<[AngularPos; 4]> {
    let c = a.div_ceil(2) as i64;
    let mut groups = Vec::new();
    for r in 1..=(a as i64 / 2) {
        // Orbit representatives (r, k): corners, edge midpoints, then ±k outward.
        let mut reps = vec![r, 0];
        for k in 1..r {
            reps.push(k);
            reps.push(-k);
        }
        for k in reps {
            let mut orbit = Vec::with_capacity(4);
            let (mut du, mut dv) = (r, k);
            for _ in 0..4 {
                orbit.push(AngularPos::new((c + du) as usize, (c + dv) as usize));
                (du, dv) = (-dv, du);
            }
            orbit.sort();
            groups.push([orbit[0], orbit[1], orbit[2], orbit[3]]);
        }
    }
    groups
}

impl ViewGrouping {
    pub fn new(a: usize, pattern: GroupingPattern) -> Result<Self> {
        if a.is_multiple_of(2) || a < 3 {
            return Err(Error::dim(format!(
                "view reorganisation needs an odd grid of at least 3, got {a}"
            )));
        }
        let side = side_positions(a);
        let groups = match &pattern {
            GroupingPattern::Rings => ring_groups(a),
            GroupingPattern::IndexOrder => side.chunks(4).map(|c| [c[0], c[1], c[2], c[3]]).collect(),
            GroupingPattern::Explicit(groups) => groups.clone(),
        };
        let grouping = Self {
            angular: a,
            pattern,
            groups,
        };
        grouping.check_partition()?;
        Ok(grouping)
    }

    /// Disjoint groups of four whose union is exactly the side-view set.
    pub fn check_partition(&self) -> Result<()> {
        let side: BTreeSet<AngularPos> = side_positions(self.angular).into_iter().collect();
        let mut seen = BTreeSet::new();
        for g in &self.groups {
            for p in g {
                if !side.contains(p) {
                    return Err(Error::Config(format!("({}, {}) is not a side view", p.u, p.v)));
                }
                if !seen.insert(*p) {
                    return Err(Error::Config(format!("({}, {}) appears in two groups", p.u, p.v)));
                }
            }
        }
        if seen.len() != side.len() {
            return Err(Error::Config(format!(
                "groups cover {} of {} side views",
                seen.len(),
                side.len()
            )));
        }
        Ok(())
    }

    /// Flat `u·A + v` (0-based) view indices per group, in 2×2 row-major order.
    pub fn flat_indices(&self) -> Vec<[usize; 4]> {
        let a = self.angular;
        self.groups
            .iter()
            .map(|g| g.map(|p| (p.u - 1) * a + (p.v - 1)))
            .collect()
    }

    /// Gathers each group of `lf` into a 2×2 pseudo light field.
    pub fn pseudo_light_fields<T: Element>(&self, lf: &LightField<T>) -> Result<Vec<LightField<T>>> {
        if lf.angular() != self.angular {
            return Err(Error::dim("grouping and light field disagree on the angular extent"));
        }
        self.groups
            .iter()
            .map(|g| {
                let views = g.iter().map(|&p| lf.view(p)).collect::<Result<Vec<_>>>()?;
                LightField::from_views(2, &views)
            })
            .collect()
    }
}

pub fn reorganize_side_views(a: usize, pattern: GroupingPattern) -> Result<ViewGrouping> {
    ViewGrouping::new(a, pattern)
}

// BT.601 full-range, chroma offset 0.5.
const RGB_TO_YCBCR: [[f64; 3]; 3] = [
    [0.299, 0.587, 0.114],
    [-0.168_736, -0.331_264, 0.5],
    [0.5, -0.418_688, -0.081_312],
];

fn invert3(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    let mut inv = [[0.0; 3]; 3];
    for (i, row) in inv.iter_mut().enumerate() {
        for (j, out) in row.iter_mut().enumerate() {
            let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
            let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
            *out = (m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]) / det;
        }
    }
    inv
}

fn apply_color<T: Element>(img: &Tensor<T>, m: &[[f64; 3]; 3], pre: [f64; 3], post: [f64; 3]) -> Result<Tensor<T>> {
    let [c, h, w] = img.dims()?;
    if c != 3 {
        return Err(Error::dim(format!("colour conversion needs 3 channels, got {c}")));
    }
    let n = h * w;
    let d = img.data();
    let mut out = vec![T::zero(); 3 * n];
    for i in 0..n {
        let px = [
            d[i].as_f64() + pre[0],
            d[n + i].as_f64() + pre[1],
            d[2 * n + i].as_f64() + pre[2],
        ];
        for (ch, row) in m.iter().enumerate() {
            let v = row[0] * px[0] + row[1] * px[1] + row[2] * px[2] + post[ch];
            out[ch * n + i] = T::from_f64(v.clamp(0.0, 1.0));
        }
    }
    Tensor::new([3, h, w], out)
}

/// RGB `[3, H, W]` in `[0, 1]` → YCbCr, clamped to `[0, 1]`.
pub fn rgb_to_ycbcr<T: Element>(img: &Tensor<T>) -> Result<Tensor<T>> {
    apply_color(img, &RGB_TO_YCBCR, [0.0; 3], [0.0, 0.5, 0.5])
}

/// Exact inverse of [`rgb_to_ycbcr`] (before clamping).
pub fn ycbcr_to_rgb<T: Element>(img: &Tensor<T>) -> Result<Tensor<T>> {
    apply_color(img, &invert3(&RGB_TO_YCBCR), [0.0, -0.5, -0.5], [0.0; 3])
}

/// Luma channel `[1, H, W]` of an RGB image.
pub fn luma<T: Element>(img: &Tensor<T>) -> Result<Tensor<T>> {
    let ycc = rgb_to_ycbcr(img)?;
    let [_, h, w] = ycc.dims()?;
    Tensor::new([1, h, w], ycc.data()[..h * w].to_vec())
}

/// Joint spatial + angular augmentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Augment {
    /// Mirror columns and angular columns.
    HFlip,
    /// Mirror rows and angular rows.
    VFlip,
    /// Quarter turn: `out[i][j] = in[j][n − 1 − i]` on both grids.
    Rot90,
}

/// `(row, col)` in the output ← `(row, col)` in the input for a grid of `rows × cols`.
fn source_of(op: Augment, rows: usize, cols: usize, i: usize, j: usize) -> (usize, usize) {
    match op {
        Augment::HFlip => (i, cols - 1 - j),
        Augment::VFlip => (rows - 1 - i, j),
        // Output has shape cols × rows.
        Augment::Rot90 => (j, cols - 1 - i),
    }
}

fn out_dims(op: Augment, rows: usize, cols: usize) -> (usize, usize) {
    match op {
        Augment::Rot90 => (cols, rows),
        _ => (rows, cols),
    }
}

/// Applies `op` to the spatial grid of a `[C, H, W]` image.
pub fn augment_image<T: Element>(img: &Tensor<T>, op: Augment) -> Result<Tensor<T>> {
    let [c, h, w] = img.dims()?;
    let (oh, ow) = out_dims(op, h, w);
    let d = img.data();
    Ok(Tensor::from_fn([c, oh, ow], |idx| {
        let ch = idx / (oh * ow);
        let (i, j) = ((idx / ow) % oh, idx % ow);
        let (si, sj) = source_of(op, h, w, i, j);
        d[(ch * h + si) * w + sj]
    }))
}

impl<T: Element> LightField<T> {
    /// Applies `op` to every view and to the angular grid.
    pub fn augment(&self, op: Augment) -> Result<Self> {
        let a = self.angular();
        let views = self.views();
        let mut out = Vec::with_capacity(a * a);
        for i in 0..a {
            for j in 0..a {
                let (si, sj) = source_of(op, a, a, i, j);
                out.push(augment_image(&views[si * a + sj], op)?);
            }
        }
        Self::from_views(a, &out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_lf(a: usize, c: usize, h: usize, w: usize, seed: u64) -> LightField<f64> {
        let mut s = seed;
        LightField::new(Tensor::from_fn([a, a, c, h, w], |_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64
        }))
        .unwrap()
    }

    /// Light field whose views are a 1D ramp shifted by `d` columns per angular column step.
    fn shift_lf(a: usize, d: usize, w: usize) -> LightField<f64> {
        let c = (a / 2) as i64;
        LightField::new(Tensor::from_fn([a, a, 1, 2, w], |i| {
            let x = (i % w) as i64;
            let v = ((i / (2 * w)) % a) as i64;
            (x + (v - c) * d as i64) as f64
        }))
        .unwrap()
    }

    #[test]
    fn macpi_a2_layout() {
        let views: Vec<Tensor<f64>> = (1..=4).map(|v| Tensor::full([1, 1, 1], v as f64)).collect();
        let lf = LightField::from_views(2, &views).unwrap();
        let m = lf_to_macpi(&lf);
        assert_eq!(m.data.shape(), &[1, 2, 2]);
        assert_eq!(m.data.data(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn macpi_round_trip_is_exact() {
        for a in [1, 2, 3, 5, 7] {
            let lf = random_lf(a, 2, 3, 4, a as u64);
            let m = lf_to_macpi(&lf);
            assert_eq!(m.data.shape(), &[2, 3 * a, 4 * a]);
            assert_eq!(macpi_to_lf(&m.data, a).unwrap(), lf);
        }
        assert!(macpi_to_lf(&Tensor::<f64>::zeros([1, 7, 9]), 3).is_err());
    }

    #[test]
    fn epi_of_constant_is_constant_and_shaped() {
        let lf = LightField::new(Tensor::<f64>::full([3, 3, 1, 4, 6], 0.3)).unwrap();
        let e = extract_epi(&lf, EpiOrientation::Horizontal, 2, 1, 0).unwrap();
        assert_eq!(e.data.shape(), &[3, 6]);
        assert!(e.data.data().iter().all(|&v| v == 0.3));
        let e = extract_epi(&lf, EpiOrientation::Vertical, 5, 3, 0).unwrap();
        assert_eq!(e.data.shape(), &[3, 4]);
        assert!(extract_epi(&lf, EpiOrientation::Vertical, 6, 1, 0).is_err());
        assert!(extract_epi(&lf, EpiOrientation::Horizontal, 0, 4, 0).is_err());
    }

    #[test]
    fn epi_rows_of_shift_lf_are_shifted_copies() {
        let (a, d, w) = (3, 2, 12);
        let lf = shift_lf(a, d, w);
        let e = extract_epi(&lf, EpiOrientation::Horizontal, 1, 2, 0).unwrap();
        let row = |r: usize| &e.data.data()[r * w..(r + 1) * w];
        for r in 0..a - 1 {
            for x in 0..w - d {
                assert_eq!(row(r + 1)[x], row(r)[x + d]);
            }
        }
    }

    #[test]
    fn split_and_recombine() {
        let lf = random_lf(3, 1, 2, 2, 9);
        let parts = split_center_side(&lf).unwrap();
        assert_eq!(parts.side.len(), 8);
        assert_eq!(parts.central, lf.view(AngularPos::new(2, 2)).unwrap());
        assert_eq!(recombine(&parts).unwrap(), lf);
        assert_eq!(split_center_side(&random_lf(5, 1, 1, 1, 1)).unwrap().side.len(), 24);
        assert!(split_center_side(&random_lf(2, 1, 1, 1, 1)).is_err());
    }

    #[test]
    fn a3_groups_are_corners_then_edges() {
        let g = reorganize_side_views(3, GroupingPattern::Rings).unwrap();
        let p = AngularPos::new;
        assert_eq!(
            g.groups,
            vec![
                [p(1, 1), p(1, 3), p(3, 1), p(3, 3)],
                [p(1, 2), p(2, 1), p(2, 3), p(3, 2)],
            ]
        );
    }

    #[test]
    fn groupings_partition_side_views() {
        for (a, n) in [(3, 2), (5, 6), (7, 12)] {
            for pattern in [GroupingPattern::Rings, GroupingPattern::IndexOrder] {
                let g = reorganize_side_views(a, pattern).unwrap();
                assert_eq!(g.groups.len(), n);
                g.check_partition().unwrap();
            }
        }
        assert!(reorganize_side_views(4, GroupingPattern::Rings).is_err());
    }

    #[test]
    fn explicit_grouping_must_partition() {
        let p = AngularPos::new;
        let dup = vec![
            [p(1, 1), p(1, 3), p(3, 1), p(3, 3)],
            [p(1, 1), p(2, 1), p(2, 3), p(3, 2)],
        ];
        assert!(reorganize_side_views(3, GroupingPattern::Explicit(dup)).is_err());
        let center = vec![
            [p(1, 1), p(1, 3), p(3, 1), p(2, 2)],
            [p(1, 2), p(2, 1), p(2, 3), p(3, 2)],
        ];
        assert!(reorganize_side_views(3, GroupingPattern::Explicit(center)).is_err());
    }

    #[test]
    fn gray_maps_to_neutral_chroma() {
        let img = Tensor::<f64>::from_fn([3, 1, 3], |i| [0.0, 0.4, 1.0][i % 3]);
        let y = rgb_to_ycbcr(&img).unwrap();
        for i in 0..3 {
            assert!((y.data()[i] - [0.0, 0.4, 1.0][i]).abs() < 1e-12);
            assert!((y.data()[3 + i] - 0.5).abs() < 1e-12);
            assert!((y.data()[6 + i] - 0.5).abs() < 1e-12);
        }
        assert!(rgb_to_ycbcr(&Tensor::<f64>::zeros([2, 1, 1])).is_err());
    }

    #[test]
    fn color_round_trip() {
        let img = Tensor::<f64>::from_fn([3, 4, 4], |i| 0.25 + 0.5 * ((i as f64 * 0.37).sin() * 0.5 + 0.5));
        let back = ycbcr_to_rgb(&rgb_to_ycbcr(&img).unwrap()).unwrap();
        assert!(back.max_abs_diff(&img).unwrap() < 1e-6);
    }

    #[test]
    fn augment_group_laws() {
        let lf = random_lf(3, 1, 4, 4, 5);
        let twice = |op| lf.augment(op).unwrap().augment(op).unwrap();
        assert_eq!(twice(Augment::HFlip), lf);
        assert_eq!(twice(Augment::VFlip), lf);
        let mut r = lf.clone();
        for _ in 0..4 {
            r = r.augment(Augment::Rot90).unwrap();
        }
        assert_eq!(r, lf);
        // The central view stays central.
        for op in [Augment::HFlip, Augment::VFlip, Augment::Rot90] {
            let c = split_center_side(&lf.augment(op).unwrap()).unwrap().central;
            let want = augment_image(&split_center_side(&lf).unwrap().central, op).unwrap();
            assert_eq!(c, want);
        }
    }

    #[test]
    fn hflip_mirrors_the_epi() {
        // Joint flip maps E[v][x] to E[A-1-v][W-1-x]: the ramp gradient along x
        // changes sign while the EPI line orientation is kept.
        let (a, d, w) = (3, 1, 10);
        let lf = shift_lf(a, d, w);
        let f = lf.augment(Augment::HFlip).unwrap();
        let e = extract_epi(&lf, EpiOrientation::Horizontal, 0, 2, 0).unwrap();
        let ef = extract_epi(&f, EpiOrientation::Horizontal, 0, 2, 0).unwrap();
        for v in 0..a {
            for x in 0..w {
                assert_eq!(ef.data.data()[v * w + x], e.data.data()[(a - 1 - v) * w + (w - 1 - x)]);
            }
            let row = &ef.data.data()[v * w..(v + 1) * w];
            assert!(row.windows(2).all(|p| p[1] - p[0] == -1.0));
        }
    }
}
