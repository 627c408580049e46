use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sweep::analytic_curve;
use crate::error::{Error, Result};
use crate::io::table::{Cell, Table};
use crate::replica::{RegularizedProblem, VolatilityProfile};

/// A straight piece of an iso-line, as `(eta, r)` endpoints.
pub type Segment = [(f64, f64); 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsoLine {
    pub level: f64,
    pub segments: Vec<Segment>,
}

/// `q0[i][j]` sits at `(etas[i], rs[j])`; `None` marks cells without a
/// saddle point (`r >= 2` or solver failure).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourGrid {
    pub rs: Vec<f64>,
    pub etas: Vec<f64>,
    pub q0: Vec<Vec<Option<f64>>>,
    pub lines: Vec<IsoLine>,
}

impl ContourGrid {
    pub fn table(&self) -> Table {
        let mut t = Table::new(["eta", "r", "q0"]);
        for (i, &eta) in self.etas.iter().enumerate() {
            for (j, &r) in self.rs.iter().enumerate() {
                t.push(vec![eta.into(), r.into(), Cell::from(self.q0[i][j].unwrap_or(f64::NAN))]);
            }
        }
        t
    }

    pub fn lines_table(&self) -> Table {
        let mut t = Table::new(["level", "segment", "eta0", "r0", "eta1", "r1"].map(String::from).to_vec());
        for line in &self.lines {
            for (k, [(x0, y0), (x1, y1)]) in line.segments.iter().enumerate() {
                t.push(vec![line.level.into(), k.into(), (*x0).into(), (*y0).into(), (*x1).into(), (*y1).into()]);
            }
        }
        t
    }

    /// Bilinear interpolation of `q0` at `(eta, r)`; `None` outside the grid
    /// or next to an unsolved cell.
    pub fn interpolate(&self, eta: f64, r: f64) -> Option<f64> {
        bilinear(&self.etas, &self.rs, &self.q0, eta, r)
    }
}

/// `q0` over the `(eta, r)` grid for the symmetric regularizer, with
/// iso-lines at `levels`.
pub fn contour_map(rs: &[f64], etas: &[f64], levels: &[f64], profile: &VolatilityProfile) -> Result<ContourGrid> {
    if rs.is_empty() || etas.is_empty() {
        return Err(Error::InvalidArgument("contour grid axes must be nonempty".into()));
    }
    let mut rs = rs.to_vec();
    let mut etas = etas.to_vec();
    rs.sort_by(f64::total_cmp);
    etas.sort_by(f64::total_cmp);
    let templates: Vec<RegularizedProblem> =
        etas.iter().map(|&eta| RegularizedProblem::symmetric(1.0, eta, profile.clone())).collect::<Result<_>>()?;
    let q0: Vec<Vec<Option<f64>>> = templates
        .par_iter()
        .map(|t| analytic_curve(t, &rs).into_iter().map(|p| p.values.map(|v| v.q0).filter(|q| q.is_finite())).collect())
        .collect();
    let lines = levels
        .iter()
        .map(|&level| IsoLine { level, segments: marching_squares(&etas, &rs, &q0, level) })
        .collect();
    Ok(ContourGrid { rs, etas, q0, lines })
}

/// Iso-line segments of `z[i][j]` (at `(xs[i], ys[j])`) with linear
/// interpolation along cell edges. Saddle cells are split by the value at
/// the cell centre.
pub fn marching_squares(xs: &[f64], ys: &[f64], z: &[Vec<Option<f64>>], level: f64) -> Vec<Segment> {
    let mut out = Vec::new();
    for i in 0..xs.len().saturating_sub(1) {
        for j in 0..ys.len().saturating_sub(1) {
            let (Some(z00), Some(z10), Some(z11), Some(z01)) = (z[i][j], z[i + 1][j], z[i + 1][j + 1], z[i][j + 1])
            else {
                continue;
            };
            let (x0, x1, y0, y1) = (xs[i], xs[i + 1], ys[j], ys[j + 1]);
            // Corners counter-clockwise from (x0, y0); edges k joins corner k and k+1.
            let corners = [(x0, y0, z00), (x1, y0, z10), (x1, y1, z11), (x0, y1, z01)];
            let above: Vec<bool> = corners.iter().map(|c| c.2 >= level).collect();
            let crossing = |k: usize| -> Option<(f64, f64)> {
                let (a, b) = (corners[k], corners[(k + 1) % 4]);
                if above[k] == above[(k + 1) % 4] {
                    return None;
                }
                let t = (level - a.2) / (b.2 - a.2);
                Some((a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1)))
            };
            let hits: Vec<(usize, (f64, f64))> = (0..4).filter_map(|k| crossing(k).map(|p| (k, p))).collect();
            match hits.len() {
                2 => out.push([hits[0].1, hits[1].1]),
                4 => {
                    // Alternating corners: pair edges so the centre stays on its side.
                    let centre_above = (z00 + z10 + z11 + z01) / 4.0 >= level;
                    let p: Vec<(f64, f64)> = hits.iter().map(|h| h.1).collect();
                    if centre_above == above[0] {
                        // Corner 0's region connects to corner 2: cut off corners 1 and 3.
                        out.push([p[0], p[1]]);
                        out.push([p[2], p[3]]);
                    } else {
                        out.push([p[3], p[0]]);
                        out.push([p[1], p[2]]);
                    }
                }
                _ => {}
            }
        }
    }
    out
}

/// Bilinear interpolation of `z[i][j]` on the rectilinear grid.
pub fn bilinear(xs: &[f64], ys: &[f64], z: &[Vec<Option<f64>>], x: f64, y: f64) -> Option<f64> {
    let locate = |v: &[f64], p: f64| -> Option<(usize, f64)> {
        if v.len() < 2 || p < v[0] || p > v[v.len() - 1] {
            return None;
        }
        let k = v.partition_point(|&a| a <= p).clamp(1, v.len() - 1) - 1;
        Some((k, (p - v[k]) / (v[k + 1] - v[k])))
    };
    let (i, u) = locate(xs, x)?;
    let (j, v) = locate(ys, y)?;
    let (z00, z10, z01, z11) = (z[i][j]?, z[i + 1][j]?, z[i][j + 1]?, z[i + 1][j + 1]?);
    Some((1.0 - u) * (1.0 - v) * z00 + u * (1.0 - v) * z10 + (1.0 - u) * v * z01 + u * v * z11)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(f: impl Fn(f64, f64) -> f64, xs: &[f64], ys: &[f64]) -> Vec<Vec<Option<f64>>> {
        xs.iter().map(|&x| ys.iter().map(|&y| Some(f(x, y))).collect()).collect()
    }

    #[test]
    fn circle_levels_reinterpolate() {
        let g: Vec<f64> = (0..21).map(|k| -1.0 + 0.1 * k as f64).collect();
        let z = field(|x, y| x * x + y * y, &g, &g);
        let segs = marching_squares(&g, &g, &z, 0.5);
        assert!(segs.len() > 20);
        for s in &segs {
            for &(x, y) in s {
                assert!((bilinear(&g, &g, &z, x, y).unwrap() - 0.5).abs() < 1e-12);
                assert!(((x * x + y * y).sqrt() - 0.5f64.sqrt()).abs() < 0.02);
            }
        }
    }

    #[test]
    fn saddle_cell_uses_centre() {
        let xs = [0.0, 1.0];
        let z = vec![vec![Some(1.0), Some(0.0)], vec![Some(0.0), Some(1.0)]];
        assert_eq!(marching_squares(&xs, &xs, &z, 0.4).len(), 2);
        assert_eq!(marching_squares(&xs, &xs, &z, 0.6).len(), 2);
    }

    #[test]
    fn missing_cells_are_skipped() {
        let xs = [0.0, 1.0, 2.0];
        let mut z = field(|x, _| x, &xs, &xs);
        z[2][2] = None;
        let segs = marching_squares(&xs, &xs, &z, 1.5);
        assert_eq!(segs.len(), 1);
        assert!(bilinear(&xs, &xs, &z, 1.5, 1.5).is_none());
    }

    #[test]
    fn q0_map_levels() {
        let rs: Vec<f64> = (1..=24).map(|k| 0.08 * k as f64).collect();
        let etas: Vec<f64> = (0..8).map(|k| 0.02 + 0.04 * k as f64).collect();
        let levels = [1.1025, 1.21, 1.44, 2.0, std::f64::consts::PI];
        let g = contour_map(&rs, &etas, &levels, &VolatilityProfile::uniform(1.0).unwrap()).unwrap();
        assert!(g.q0.iter().all(|row| row.iter().all(|v| v.is_some())));
        for line in &g.lines {
            assert!(!line.segments.is_empty(), "level {}", line.level);
            for s in &line.segments {
                for &(x, y) in s {
                    let back = g.interpolate(x, y).unwrap();
                    assert!((back / line.level - 1.0).abs() < 1e-3);
                }
            }
        }
        // Small error levels sit at nearly constant r.
        let r_span = |l: &IsoLine| {
            let r: Vec<f64> = l.segments.iter().flat_map(|s| s.iter().map(|p| p.1)).collect();
            r.iter().cloned().fold(f64::MIN, f64::max) - r.iter().cloned().fold(f64::MAX, f64::min)
        };
        assert!(r_span(&g.lines[0]) < 0.05);
        assert_eq!(g.table().len(), rs.len() * etas.len());
    }
}
