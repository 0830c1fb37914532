//! Regular lattices over a domain and fields sampled on them.

use std::collections::VecDeque;
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fmt;
use crate::geometry::Domain;

/// Interior nodes must lie deeper than this multiple of `h`.
pub const INTERIOR_SAFETY: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Interior,
    Cut,
    Exterior,
}

impl NodeKind {
    pub fn letter(self) -> char {
        match self {
            NodeKind::Interior => 'i',
            NodeKind::Cut => 'c',
            NodeKind::Exterior => 'e',
        }
    }

    pub fn from_letter(c: &str) -> Option<Self> {
        match c {
            "i" => Some(NodeKind::Interior),
            "c" => Some(NodeKind::Cut),
            "e" => Some(NodeKind::Exterior),
            _ => None,
        }
    }
}

/// Boundary data attached to a cut node.
#[derive(Debug, Clone, PartialEq)]
pub struct CutNode {
    pub index: usize,
    /// Signed distance in units of `h` (negative outside the domain).
    pub fraction: f64,
    /// Per axis, distance to the boundary along that axis estimated from the
    /// normal, in units of `h`; infinite when the normal is orthogonal.
    pub axis_fractions: Vec<f64>,
    /// Mean curvature at the nearest boundary point.
    pub mean_curvature: f64,
}

/// Values on an `n`-dimensional lattice `origin + h·k`, `0 ≤ k_a < dims[a]`.
/// The last axis varies fastest in the flat index.
#[derive(Debug, Clone)]
pub struct GridField {
    pub n: usize,
    pub h: f64,
    pub origin: Vec<f64>,
    pub dims: Vec<usize>,
    pub values: Vec<f64>,
    pub mask: Vec<NodeKind>,
    /// Signed distance at every node (zero when read from a file).
    pub distance: Vec<f64>,
    pub cut: Vec<CutNode>,
}

impl GridField {
    /// Lattice nodes at `c + k·h` around the bounding-box centre `c`, so that the
    /// lattices for `h` and `2h` are nested.
    pub fn build(domain: &Domain, h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Precondition(format!("mesh width must be positive, got {h}")));
        }
        let n = domain.dim();
        let (lo, hi) = domain.bounding_box();
        let mut origin = Vec::with_capacity(n);
        let mut dims = Vec::with_capacity(n);
        for a in 0..n {
            let c = 0.5 * (lo[a] + hi[a]);
            let k = (0.5 * (hi[a] - lo[a]) / h).ceil() as usize + 2;
            origin.push(c - k as f64 * h);
            dims.push(2 * k + 1);
        }
        let total: usize = dims.iter().product();
        if total > 400_000_000 {
            return Err(Error::Precondition(format!("lattice with {total} nodes is too large")));
        }
        let mut field = GridField {
            n,
            h,
            origin,
            dims,
            values: vec![0.0; total],
            mask: vec![NodeKind::Exterior; total],
            distance: vec![0.0; total],
            cut: Vec::new(),
        };
        let distance: Result<Vec<f64>> = (0..total)
            .into_par_iter()
            .map(|i| domain.signed_distance(&field.position(i)))
            .collect();
        field.distance = distance?;
        let safety = INTERIOR_SAFETY * h;
        for i in 0..total {
            if field.distance[i] > safety {
                field.mask[i] = NodeKind::Interior;
            }
        }
        let mut cut_idx = Vec::new();
        for i in 0..total {
            if field.mask[i] != NodeKind::Interior && field.touches_interior(i) {
                cut_idx.push(i);
            }
        }
        let cut: Result<Vec<CutNode>> = cut_idx
            .par_iter()
            .map(|&i| {
                let p = domain.project(&field.position(i))?;
                let nrm = &p.boundary.interior_normal;
                Ok(CutNode {
                    index: i,
                    fraction: p.signed_distance / h,
                    axis_fractions: nrm
                        .iter()
                        .map(|c| {
                            if c.abs() > 1e-14 {
                                (p.signed_distance / (h * c.abs())).abs()
                            } else {
                                f64::INFINITY
                            }
                        })
                        .collect(),
                    mean_curvature: p.boundary.mean_curvature,
                })
            })
            .collect();
        field.cut = cut?;
        for c in &field.cut {
            field.mask[c.index] = NodeKind::Cut;
        }
        Ok(field)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.n];
        for a in (0..self.n.saturating_sub(1)).rev() {
            s[a] = s[a + 1] * self.dims[a + 1];
        }
        s
    }

    pub fn coords(&self, mut i: usize) -> Vec<usize> {
        let mut k = vec![0; self.n];
        for a in (0..self.n).rev() {
            k[a] = i % self.dims[a];
            i /= self.dims[a];
        }
        k
    }

    pub fn index(&self, k: &[usize]) -> usize {
        k.iter().zip(&self.dims).fold(0, |acc, (ki, d)| acc * d + ki)
    }

    pub fn position(&self, i: usize) -> Vec<f64> {
        self.coords(i)
            .iter()
            .zip(&self.origin)
            .map(|(&k, o)| o + k as f64 * self.h)
            .collect()
    }

    /// Neighbour of `i` one step along `axis` (`dir` is ±1).
    pub fn neighbor(&self, i: usize, axis: usize, dir: i32) -> Option<usize> {
        let stride = self.strides()[axis];
        let k = (i / stride) % self.dims[axis];
        if dir < 0 {
            (k > 0).then(|| i - stride)
        } else {
            (k + 1 < self.dims[axis]).then(|| i + stride)
        }
    }

    /// Whether any node of the 3^n block around `i` is interior.
    fn touches_interior(&self, i: usize) -> bool {
        let k = self.coords(i);
        let strides = self.strides();
        let mut offs = vec![-1i64; self.n];
        loop {
            let mut j = i as i64;
            let mut ok = true;
            for a in 0..self.n {
                let ka = k[a] as i64 + offs[a];
                if ka < 0 || ka >= self.dims[a] as i64 {
                    ok = false;
                    break;
                }
                j += offs[a] * strides[a] as i64;
            }
            if ok && j as usize != i && self.mask[j as usize] == NodeKind::Interior {
                return true;
            }
            let mut a = 0;
            loop {
                if a == self.n {
                    return false;
                }
                offs[a] += 1;
                if offs[a] <= 1 {
                    break;
                }
                offs[a] = -1;
                a += 1;
            }
        }
    }

    pub fn interior_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.mask[i] == NodeKind::Interior).collect()
    }

    /// Checks that the interior nodes form one axis-connected component.
    pub fn check_connected(&self) -> Result<()> {
        let interior = self.interior_indices();
        let Some(&start) = interior.first() else {
            return Err(Error::Precondition(format!(
                "no interior nodes at h = {}; refine the mesh",
                self.h
            )));
        };
        let mut seen = vec![false; self.len()];
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        let mut count = 1;
        while let Some(i) = queue.pop_front() {
            for a in 0..self.n {
                for dir in [-1, 1] {
                    if let Some(j) = self.neighbor(i, a, dir) {
                        if !seen[j] && self.mask[j] == NodeKind::Interior {
                            seen[j] = true;
                            count += 1;
                            queue.push_back(j);
                        }
                    }
                }
            }
        }
        if count != interior.len() {
            return Err(Error::Precondition(format!(
                "interior node set is disconnected at h = {} ({count} of {} reachable); refine the mesh",
                self.h,
                interior.len()
            )));
        }
        Ok(())
    }

    /// Multilinear interpolation at `x`. Returns `None` if `x` is outside the
    /// lattice or any corner of its cell is exterior.
    pub fn interpolate(&self, x: &[f64]) -> Option<f64> {
        let mut base = vec![0usize; self.n];
        let mut t = vec![0.0; self.n];
        for a in 0..self.n {
            let s = (x[a] - self.origin[a]) / self.h;
            if !(s >= 0.0) || s > (self.dims[a] - 1) as f64 {
                return None;
            }
            let k = (s.floor() as usize).min(self.dims[a] - 2);
            base[a] = k;
            t[a] = s - k as f64;
        }
        let strides = self.strides();
        let i0 = self.index(&base);
        let mut acc = 0.0;
        for corner in 0..(1usize << self.n) {
            let mut w = 1.0;
            let mut j = i0;
            for a in 0..self.n {
                if corner >> a & 1 == 1 {
                    w *= t[a];
                    j += strides[a];
                } else {
                    w *= 1.0 - t[a];
                }
            }
            if w == 0.0 {
                continue;
            }
            if self.mask[j] == NodeKind::Exterior {
                return None;
            }
            acc += w * self.values[j];
        }
        Some(acc)
    }

    /// Writes the header `n h dims origin` and one line `i j k mask v` per node.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        let dims: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        writeln!(
            out,
            "{} {} {} {}",
            self.n,
            fmt::f(self.h),
            dims.join(" "),
            self.origin.iter().map(|&o| fmt::f(o)).collect::<Vec<_>>().join(" ")
        )?;
        for i in 0..self.len() {
            let k = self.coords(i);
            let ks: Vec<String> = k.iter().map(|x| x.to_string()).collect();
            let v = if self.mask[i] == NodeKind::Exterior { 0.0 } else { self.values[i] };
            writeln!(out, "{} {} {}", ks.join(" "), self.mask[i].letter(), fmt::f(v))?;
        }
        Ok(())
    }

    /// Reads the format produced by [`GridField::write_text`]. Cut data and
    /// distances are not stored in the file and come back empty.
    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        let bad = |line: usize, msg: &str| Error::Parse(format!("line {}: {msg}", line + 1));
        let (_, header) = lines.next().ok_or_else(|| bad(0, "missing header"))?;
        let header = header?;
        let tok: Vec<&str> = header.split_whitespace().collect();
        let n: usize = tok.first().and_then(|t| t.parse().ok()).ok_or_else(|| bad(0, "bad dimension"))?;
        if tok.len() != 2 + 2 * n {
            return Err(bad(0, "header must read `n h dims origin`"));
        }
        let h: f64 = tok[1].parse().map_err(|_| bad(0, "bad mesh width"))?;
        let dims: Vec<usize> = tok[2..2 + n]
            .iter()
            .map(|t| t.parse().map_err(|_| bad(0, "bad dimension count")))
            .collect::<Result<_>>()?;
        let origin: Vec<f64> = tok[2 + n..]
            .iter()
            .map(|t| t.parse().map_err(|_| bad(0, "bad origin")))
            .collect::<Result<_>>()?;
        let total: usize = dims.iter().product();
        let mut field = GridField {
            n,
            h,
            origin,
            dims,
            values: vec![0.0; total],
            mask: vec![NodeKind::Exterior; total],
            distance: vec![0.0; total],
            cut: Vec::new(),
        };
        let mut seen = 0;
        for (ln, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let tok: Vec<&str> = line.split_whitespace().collect();
            if tok.len() != n + 2 {
                return Err(bad(ln, "expected `i j k mask v`"));
            }
            let k: Vec<usize> = tok[..n]
                .iter()
                .map(|t| t.parse().map_err(|_| bad(ln, "bad lattice index")))
                .collect::<Result<_>>()?;
            if k.iter().zip(&field.dims).any(|(a, d)| a >= d) {
                return Err(bad(ln, "lattice index out of range"));
            }
            let i = field.index(&k);
            field.mask[i] = NodeKind::from_letter(tok[n]).ok_or_else(|| bad(ln, "mask must be i, c or e"))?;
            field.values[i] = tok[n + 1].parse().map_err(|_| bad(ln, "bad value"))?;
            seen += 1;
        }
        if seen != total {
            return Err(Error::Parse(format!("expected {total} nodes, found {seen}")));
        }
        Ok(field)
    }

    /// `x_1, …, x_n, mask, v` rows for plotting; exterior nodes are skipped.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let names: Vec<String> = (1..=self.n).map(|a| format!("x{a}")).collect();
        writeln!(out, "{},mask,v", names.join(","))?;
        for i in 0..self.len() {
            if self.mask[i] == NodeKind::Exterior {
                continue;
            }
            writeln!(
                out,
                "{},{},{}",
                fmt::join(&self.position(i)),
                self.mask[i].letter(),
                fmt::f(self.values[i])
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_lattices() {
        let d = Domain::unit_ball(3).unwrap();
        let coarse = GridField::build(&d, 0.25).unwrap();
        let fine = GridField::build(&d, 0.125).unwrap();
        for i in 0..coarse.len() {
            let p = coarse.position(i);
            let s: Vec<f64> = p.iter().zip(&fine.origin).map(|(x, o)| (x - o) / fine.h).collect();
            for c in s {
                assert!((c - c.round()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mask_matches_distance() {
        let d = Domain::annulus(3, 0.5, 2.0).unwrap();
        let f = GridField::build(&d, 0.25).unwrap();
        for i in 0..f.len() {
            let interior = f.distance[i] > INTERIOR_SAFETY * f.h;
            assert_eq!(interior, f.mask[i] == NodeKind::Interior);
        }
        // every axis neighbour of an interior node carries a value
        for i in f.interior_indices() {
            for a in 0..3 {
                for dir in [-1, 1] {
                    let j = f.neighbor(i, a, dir).unwrap();
                    assert_ne!(f.mask[j], NodeKind::Exterior);
                }
            }
        }
        f.check_connected().unwrap();
    }

    #[test]
    fn text_round_trip() {
        let d = Domain::unit_ball(3).unwrap();
        let mut f = GridField::build(&d, 0.5).unwrap();
        for i in 0..f.len() {
            if f.mask[i] != NodeKind::Exterior {
                f.values[i] = 0.1 * i as f64 + 1.0 / 3.0;
            }
        }
        let mut buf = Vec::new();
        f.write_text(&mut buf).unwrap();
        let g = GridField::read_text(&buf[..]).unwrap();
        assert_eq!(g.dims, f.dims);
        assert_eq!(g.mask, f.mask);
        assert_eq!(g.values, f.values);
        assert_eq!(g.origin, f.origin);
    }

    #[test]
    fn interpolation_is_exact_for_linear_data() {
        let d = Domain::unit_ball(3).unwrap();
        let mut f = GridField::build(&d, 0.25).unwrap();
        for i in 0..f.len() {
            let p = f.position(i);
            f.values[i] = 1.0 + p[0] - 2.0 * p[1] + 0.5 * p[2];
        }
        let x = [0.1, -0.2, 0.3];
        let v = f.interpolate(&x).unwrap();
        assert!((v - (1.0 + 0.1 + 0.4 + 0.15)).abs() < 1e-12);
    }
}
