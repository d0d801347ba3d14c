//! Row-major indexing on the cube `[0, side)^dim`.

use crate::error::{Error, Result};

/// Shape of a `dim`-dimensional cube lattice stored in row-major order
/// (the last axis is contiguous).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Cube {
    pub dim: usize,
    pub side: usize,
}

impl Cube {
    pub fn new(dim: usize, side: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::arg("dim", "dimension must be at least 1"));
        }
        let cube = Cube { dim, side };
        cube.checked_len()
            .ok_or_else(|| Error::arg("side", format!("{side}^{dim} sites overflow usize")))?;
        Ok(cube)
    }

    pub fn checked_len(&self) -> Option<usize> {
        let mut len = 1usize;
        for _ in 0..self.dim {
            len = len.checked_mul(self.side)?;
        }
        Some(len)
    }

    /// Number of sites. Only call on cubes built through [`Cube::new`].
    pub fn len(&self) -> usize {
        self.side.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.side == 0
    }

    pub fn index(&self, k: &[usize]) -> usize {
        debug_assert_eq!(k.len(), self.dim);
        k.iter().fold(0, |acc, &c| {
            debug_assert!(c < self.side);
            acc * self.side + c
        })
    }

    pub fn unravel(&self, mut flat: usize, out: &mut [usize]) {
        for slot in out.iter_mut().rev() {
            *slot = flat % self.side;
            flat /= self.side;
        }
    }

    /// Iterate all multi-indices in row-major order.
    pub fn iter(&self) -> MultiIndexIter {
        MultiIndexIter {
            side: self.side,
            current: vec![0; self.dim],
            done: self.side == 0,
        }
    }
}

/// Iterator over `[0, side)^dim` in row-major order.
pub struct MultiIndexIter {
    side: usize,
    current: Vec<usize>,
    done: bool,
}

impl Iterator for MultiIndexIter {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.current.clone();
        let mut axis = self.current.len();
        loop {
            if axis == 0 {
                self.done = true;
                break;
            }
            axis -= 1;
            self.current[axis] += 1;
            if self.current[axis] < self.side {
                break;
            }
            self.current[axis] = 0;
        }
        Some(out)
    }
}

/// Visit every multi-index of a rectangular box with the given extents.
pub fn for_each_in_box(extents: &[usize], mut f: impl FnMut(&[usize])) {
    if extents.contains(&0) {
        return;
    }
    let mut k = vec![0usize; extents.len()];
    loop {
        f(&k);
        let mut axis = extents.len();
        loop {
            if axis == 0 {
                return;
            }
            axis -= 1;
            k[axis] += 1;
            if k[axis] < extents[axis] {
                break;
            }
            k[axis] = 0;
        }
    }
}

/// In-place inclusive prefix sums along every axis, so that afterwards
/// `data[j]` holds the sum over the box `[0, j]`.
pub fn prefix_sums(cube: Cube, data: &mut [f64]) {
    debug_assert_eq!(data.len(), cube.len());
    let n = cube.side;
    let mut stride = 1;
    for _ in 0..cube.dim {
        let block = stride * n;
        for chunk in data.chunks_mut(block) {
            for pos in stride..block {
                chunk[pos] += chunk[pos - stride];
            }
        }
        stride = block;
    }
}

/// In-place suffix sums along every axis: afterwards `data[j]` holds the
/// sum over all `i ⪰ j` inside the cube. Each pass adds nonnegative
/// terms in a fixed order, so for nonnegative input the result is
/// monotone in every coordinate even under rounding.
pub fn suffix_sums(cube: Cube, data: &mut [f64]) {
    debug_assert_eq!(data.len(), cube.len());
    let n = cube.side;
    let mut stride = 1;
    for _ in 0..cube.dim {
        let block = stride * n;
        for chunk in data.chunks_mut(block) {
            for pos in (0..block - stride).rev() {
                chunk[pos] += chunk[pos + stride];
            }
        }
        stride = block;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_major_round_trip() {
        let cube = Cube::new(3, 4).unwrap();
        let mut k = [0; 3];
        for (flat, idx) in cube.iter().enumerate() {
            assert_eq!(cube.index(&idx), flat);
            cube.unravel(flat, &mut k);
            assert_eq!(&k[..], &idx[..]);
        }
        assert_eq!(cube.iter().count(), 64);
    }

    #[test]
    fn prefix_and_suffix_sums_2d() {
        let cube = Cube::new(2, 3).unwrap();
        let mut p = vec![1.0; 9];
        prefix_sums(cube, &mut p);
        assert_eq!(p, vec![1., 2., 3., 2., 4., 6., 3., 6., 9.]);
        let mut s = vec![1.0; 9];
        suffix_sums(cube, &mut s);
        assert_eq!(s, vec![9., 6., 3., 6., 4., 2., 3., 2., 1.]);
    }

    #[test]
    fn overflow_is_rejected() {
        assert!(Cube::new(8, 1 << 20).is_err());
        assert!(Cube::new(0, 4).is_err());
    }

    #[test]
    fn box_visit_count() {
        let mut count = 0;
        for_each_in_box(&[2, 3, 4], |_| count += 1);
        assert_eq!(count, 24);
        for_each_in_box(&[2, 0], |_| panic!("empty box"));
    }
}
