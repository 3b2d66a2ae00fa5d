//! Binary instance masks and their run-length encoding.
//!
//! The encoding follows the uncompressed COCO layout: pixels are visited in
//! column-major order and the run list always begins with a (possibly zero)
//! run of background pixels.

use serde::{Deserialize, Serialize};

use crate::geometry::AxisAlignedBox2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RleMask {
    /// `[height, width]`, as COCO writes it.
    pub size: [u32; 2],
    pub counts: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RleError(pub String);

impl std::fmt::Display for RleError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl RleMask {
    pub fn height(&self) -> u32 {
        self.size[0]
    }

    pub fn width(&self) -> u32 {
        self.size[1]
    }

    /// Number of foreground pixels (odd-indexed runs).
    pub fn area(&self) -> u64 {
        self.counts.iter().skip(1).step_by(2).map(|&c| c as u64).sum()
    }

    pub fn decode(&self) -> Result<BitMask, RleError> {
        let (h, w) = (self.height() as usize, self.width() as usize);
        let total: u64 = self.counts.iter().map(|&c| c as u64).sum();
        if total != (h * w) as u64 {
            return Err(RleError(format!(
                "run lengths sum to {total}, image has {h}x{w} = {} pixels",
                h * w
            )));
        }
        let mut data = Vec::with_capacity(h * w);
        for (i, &run) in self.counts.iter().enumerate() {
            data.extend(std::iter::repeat_n(i % 2 == 1, run as usize));
        }
        Ok(BitMask {
            height: h as u32,
            width: w as u32,
            data,
        })
    }
}

/// Dense mask stored column-major (`index = x * height + y`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitMask {
    height: u32,
    width: u32,
    data: Vec<bool>,
}

impl BitMask {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            height,
            width,
            data: vec![false; (width as usize) * (height as usize)],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    fn index(&self, x: u32, y: u32) -> usize {
        x as usize * self.height as usize + y as usize
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        x < self.width && y < self.height && self.data[self.index(x, y)]
    }

    /// Mask value at the pixel containing continuous coordinates `(u, v)`.
    #[inline]
    pub fn get_continuous(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && v >= 0.0 && self.get(u as u32, v as u32)
    }

    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        if x < self.width && y < self.height {
            let i = self.index(x, y);
            self.data[i] = value;
        }
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&b| b)
    }

    pub fn pixels(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let h = self.height as usize;
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| ((i / h) as u32, (i % h) as u32))
    }

    /// Tight pixel-edge bounding rectangle of the foreground.
    pub fn bounding_box(&self) -> Option<AxisAlignedBox2> {
        let mut it = self.pixels();
        let (x0, y0) = it.next()?;
        let (mut x1, mut y1, mut x2, mut y2) = (x0, y0, x0, y0);
        for (x, y) in it {
            x1 = x1.min(x);
            y1 = y1.min(y);
            x2 = x2.max(x);
            y2 = y2.max(y);
        }
        AxisAlignedBox2::new(x1 as f64, y1 as f64, x2 as f64 + 1.0, y2 as f64 + 1.0).ok()
    }

    pub fn is_subset_of(&self, other: &BitMask) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.data.iter().zip(&other.data).all(|(&a, &b)| !a || b)
    }

    pub fn encode(&self) -> RleMask {
        let mut counts = Vec::new();
        let mut current = false;
        let mut run = 0u32;
        for &b in &self.data {
            if b != current {
                counts.push(run);
                run = 0;
                current = b;
            }
            run += 1;
        }
        counts.push(run);
        RleMask {
            size: [self.height, self.width],
            counts,
        }
    }

    /// Square-window morphology: a pixel is kept iff all pixels within
    /// Chebyshev distance `radius` are set. Out-of-image counts as background.
    pub fn eroded(&self, radius: u32) -> BitMask {
        self.morph(radius, true)
    }

    /// Square-window dilation, the dual of [`BitMask::eroded`].
    pub fn dilated(&self, radius: u32) -> BitMask {
        self.morph(radius, false)
    }

    fn morph(&self, radius: u32, erode: bool) -> BitMask {
        if radius == 0 {
            return self.clone();
        }
        let (w, h) = (self.width as usize, self.height as usize);
        let r = radius as usize;
        // Separable: vertical pass then horizontal pass, each a sliding count.
        let mut pass = vec![false; w * h];
        for x in 0..w {
            let col = &self.data[x * h..(x + 1) * h];
            sliding(col, &mut pass[x * h..(x + 1) * h], r, erode);
        }
        let mut out = vec![false; w * h];
        let mut row_in = vec![false; w];
        let mut row_out = vec![false; w];
        for y in 0..h {
            for x in 0..w {
                row_in[x] = pass[x * h + y];
            }
            sliding(&row_in, &mut row_out, r, erode);
            for x in 0..w {
                out[x * h + y] = row_out[x];
            }
        }
        BitMask {
            height: self.height,
            width: self.width,
            data: out,
        }
    }
}

/// 1-D min (erode) or max (dilate) filter over a window of `2r + 1`.
fn sliding(input: &[bool], output: &mut [bool], r: usize, erode: bool) {
    let n = input.len();
    let mut prefix = vec![0usize; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + input[i] as usize;
    }
    for i in 0..n {
        let lo = i.saturating_sub(r);
        let hi = (i + r + 1).min(n);
        let ones = prefix[hi] - prefix[lo];
        output[i] = if erode {
            // Window must lie fully inside and be all ones.
            i >= r && i + r < n && ones == 2 * r + 1
        } else {
            ones > 0
        };
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn square(w: u32, h: u32, x0: u32, y0: u32, side: u32) -> BitMask {
        let mut m = BitMask::new(w, h);
        for x in x0..x0 + side {
            for y in y0..y0 + side {
                m.set(x, y, true);
            }
        }
        m
    }

    #[test]
    fn encoding_starts_with_background_run() {
        let mut m = BitMask::new(2, 2);
        m.set(0, 0, true);
        assert_eq!(m.encode().counts, vec![0, 1, 3]);
        let empty = BitMask::new(3, 1);
        assert_eq!(empty.encode().counts, vec![3]);
    }

    #[test]
    fn column_major_order() {
        let mut m = BitMask::new(2, 3);
        m.set(1, 0, true);
        // pixels: (0,0),(0,1),(0,2),(1,0) -> fourth pixel set
        assert_eq!(m.encode().counts, vec![3, 1, 2]);
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let rle = RleMask {
            size: [2, 2],
            counts: vec![1, 1],
        };
        assert!(rle.decode().is_err());
    }

    #[test]
    fn erosion_of_square() {
        let m = square(200, 200, 50, 50, 100);
        let e = m.eroded(3);
        assert_eq!(e.count(), 94 * 94);
        assert_eq!(e.bounding_box().unwrap(), AxisAlignedBox2::new(53.0, 53.0, 147.0, 147.0).unwrap());
        assert_eq!(m.dilated(2).count(), 104 * 104);
    }

    #[test]
    fn erosion_at_image_border() {
        let m = square(10, 10, 0, 0, 10);
        assert_eq!(m.eroded(1).count(), 64);
    }

    fn arb_mask() -> impl Strategy<Value = BitMask> {
        (1u32..24, 1u32..24).prop_flat_map(|(w, h)| {
            proptest::collection::vec(any::<bool>(), (w * h) as usize).prop_map(move |bits| {
                let mut m = BitMask::new(w, h);
                for (i, b) in bits.into_iter().enumerate() {
                    m.set(i as u32 / h, i as u32 % h, b);
                }
                m
            })
        })
    }

    proptest! {
        #[test]
        fn rle_round_trip(m in arb_mask()) {
            let rle = m.encode();
            prop_assert_eq!(rle.area() as usize, m.count());
            let back = rle.decode().unwrap();
            prop_assert_eq!(&back, &m);
            prop_assert_eq!(back.encode(), rle);
        }

        #[test]
        fn erosion_shrinks(m in arb_mask(), r in 1u32..4) {
            let once = m.eroded(r);
            prop_assert!(once.is_subset_of(&m));
            prop_assert!(once.eroded(r).count() <= once.count());
        }
    }
}
