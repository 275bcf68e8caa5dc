//! Chain and square-lattice geometry shared by the dense and classical layers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatticeKind {
    Chain,
    Square,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Open,
    Periodic,
}

/// `lx x ly` sites indexed row-major (`site = y * lx + x`); a chain has `ly = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    pub kind: LatticeKind,
    pub lx: usize,
    #[serde(default = "one")]
    pub ly: usize,
    pub boundary: Boundary,
}

fn one() -> usize {
    1
}

impl LatticeSpec {
    pub fn chain(len: usize, boundary: Boundary) -> Self {
        LatticeSpec { kind: LatticeKind::Chain, lx: len, ly: 1, boundary }
    }

    pub fn square(lx: usize, ly: usize, boundary: Boundary) -> Self {
        LatticeSpec { kind: LatticeKind::Square, lx, ly, boundary }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lx == 0 || self.ly == 0 {
            return Err(Error::InvalidArgument("lattice dimensions must be positive".into()));
        }
        if self.kind == LatticeKind::Chain && self.ly != 1 {
            return Err(Error::InvalidArgument("a chain has ly = 1".into()));
        }
        Ok(())
    }

    pub fn n_sites(&self) -> usize {
        self.lx * self.ly
    }

    pub fn site(&self, x: usize, y: usize) -> usize {
        y * self.lx + x
    }

    pub fn coords(&self, site: usize) -> (usize, usize) {
        (site % self.lx, site / self.lx)
    }

    /// Nearest-neighbour bonds: horizontal bonds row-major, then vertical bonds
    /// row-major. Periodic wraps are skipped when they would duplicate a bond.
    pub fn bonds(&self) -> Vec<(usize, usize)> {
        let periodic = self.boundary == Boundary::Periodic;
        let mut out = Vec::new();
        for y in 0..self.ly {
            for x in 0..self.lx {
                if x + 1 < self.lx {
                    out.push((self.site(x, y), self.site(x + 1, y)));
                } else if periodic && self.lx > 2 {
                    out.push((self.site(0, y), self.site(x, y)));
                }
            }
        }
        if self.kind == LatticeKind::Square {
            for y in 0..self.ly {
                for x in 0..self.lx {
                    if y + 1 < self.ly {
                        out.push((self.site(x, y), self.site(x, y + 1)));
                    } else if periodic && self.ly > 2 {
                        out.push((self.site(x, 0), self.site(x, y)));
                    }
                }
            }
        }
        out
    }

    /// Minimum-image distance between two sites.
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        let (ax, ay) = self.coords(a);
        let (bx, by) = self.coords(b);
        let wrap = |d: usize, l: usize| if self.boundary == Boundary::Periodic { d.min(l - d) } else { d };
        let dx = wrap(ax.abs_diff(bx), self.lx) as f64;
        let dy = wrap(ay.abs_diff(by), self.ly) as f64;
        (dx * dx + dy * dy).sqrt()
    }

    /// A pair of sites at maximal separation.
    pub fn farthest_pair(&self) -> (usize, usize) {
        let n = self.n_sites();
        let mut best = (0, n.saturating_sub(1));
        let mut dist = -1.0;
        for b in 1..n {
            let d = self.distance(0, b);
            if d > dist {
                dist = d;
                best = (0, b);
            }
        }
        best
    }
}
