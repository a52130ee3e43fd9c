//! Eulerian reconstruction of a Lagrangian state: inversion of the flow map,
//! depth and velocity on a query grid inside Ω(t), the moving boundary Γ(t)
//! and the stress-free residual.
//!
//! Nodal fields are interpolated by tensor cubic splines, periodic in x1 and
//! not-a-knot in x2. The x2 nodes are cell-centred, so the end cubics are
//! continued the half cell out to Γ.

use faer::linalg::solvers::Solve;
use faer::Mat;
use serde::Serialize;

use crate::calculus::{diff_op, Axis};
use crate::error::{Error, Result};
use crate::grid::{extrapolate_to_boundary, Grid, WeightField};
use crate::kinematics::{FlowMapState, Mat2, VectorField};

/// Newton stopping tolerance on `|η(x) − y|`.
pub const INVERSION_TOLERANCE: f64 = 1e-10;
pub const MAX_NEWTON_STEPS: usize = 50;
/// Slack on `0 ≤ x2 ≤ 1` before a preimage counts as outside Ω.
const OUTSIDE_SLACK: f64 = 1e-9;

/// Four-point Gauss–Legendre rule on `[0, 1]`.
const GAUSS4: [(f64, f64); 4] = [
    (0.069_431_844_202_973_71, 0.173_927_422_568_726_93),
    (0.330_009_478_207_571_87, 0.326_072_577_431_273_07),
    (0.669_990_521_792_428_1, 0.326_072_577_431_273_07),
    (0.930_568_155_797_026_3, 0.173_927_422_568_726_93),
];

/// Weights of `(y_k, y_{k+1}, M_k, M_{k+1})` for the `deriv`-th derivative of
/// a cubic spline at local coordinate `t` of a cell of width `h`.
fn cubic_weights(t: f64, h: f64, deriv: usize) -> [f64; 4] {
    let s = 1.0 - t;
    match deriv {
        0 => [s, t, h * h / 6.0 * (s * s * s - s), h * h / 6.0 * (t * t * t - t)],
        1 => [-1.0 / h, 1.0 / h, -h / 6.0 * (3.0 * s * s - 1.0), h / 6.0 * (3.0 * t * t - 1.0)],
        _ => [0.0, 0.0, s, t],
    }
}

/// Dense map from nodal values to spline second derivatives.
fn second_derivative_operator(n: usize, h: f64, periodic: bool) -> Result<Mat<f64>> {
    let mut lhs = Mat::<f64>::zeros(n, n);
    let mut rhs = Mat::<f64>::zeros(n, n);
    let c = 6.0 / (h * h);
    for k in 0..n {
        if periodic {
            let (km, kp) = ((k + n - 1) % n, (k + 1) % n);
            lhs[(k, km)] += 1.0;
            lhs[(k, k)] += 4.0;
            lhs[(k, kp)] += 1.0;
            rhs[(k, km)] += c;
            rhs[(k, k)] -= 2.0 * c;
            rhs[(k, kp)] += c;
        } else if k == 0 || k == n - 1 {
            // not-a-knot: third derivative continuous across the second node
            let b = if k == 0 { 0 } else { n - 3 };
            lhs[(k, b)] = 1.0;
            lhs[(k, b + 1)] = -2.0;
            lhs[(k, b + 2)] = 1.0;
        } else {
            lhs[(k, k - 1)] = 1.0;
            lhs[(k, k)] = 4.0;
            lhs[(k, k + 1)] = 1.0;
            rhs[(k, k - 1)] = c;
            rhs[(k, k)] = -2.0 * c;
            rhs[(k, k + 1)] = c;
        }
    }
    let op = lhs.partial_piv_lu().solve(&rhs);
    if op.col_iter().flat_map(|c| c.iter().copied().collect::<Vec<_>>()).any(|v: f64| !v.is_finite()) {
        return Err(Error::LinearSolve("spline system is singular".into()));
    }
    Ok(op)
}

/// Precomputed line operators for one grid.
#[derive(Clone, Debug)]
pub struct SplineBasis {
    pub grid: Grid,
    periodic: Mat<f64>,
    not_a_knot: Mat<f64>,
}

impl SplineBasis {
    pub fn new(grid: Grid) -> Result<Self> {
        Ok(SplineBasis {
            grid,
            periodic: second_derivative_operator(grid.n1, grid.h1, true)?,
            not_a_knot: second_derivative_operator(grid.n2, grid.h2, false)?,
        })
    }

    fn along_x1(&self, f: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        let mut out = vec![0.0; g.len()];
        for j in 0..g.n2 {
            let row = &f[g.index(0, j)..g.index(0, j) + g.n1];
            for i in 0..g.n1 {
                out[g.index(i, j)] = (0..g.n1).map(|k| self.periodic[(i, k)] * row[k]).sum();
            }
        }
        out
    }

    fn along_x2(&self, f: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        let mut out = vec![0.0; g.len()];
        for i in 0..g.n1 {
            for j in 0..g.n2 {
                out[g.index(i, j)] = (0..g.n2).map(|k| self.not_a_knot[(j, k)] * f[g.index(i, k)]).sum();
            }
        }
        out
    }

    /// Interpolant of a nodal field.
    pub fn fit(&self, f: &[f64]) -> Result<TensorSpline> {
        self.grid.check_len(f)?;
        let m1 = self.along_x1(f);
        Ok(TensorSpline {
            grid: self.grid,
            f: f.to_vec(),
            m2: self.along_x2(f),
            m12: self.along_x2(&m1),
            m1,
        })
    }
}

/// Tensor cubic spline of one nodal field.
#[derive(Clone, Debug)]
pub struct TensorSpline {
    pub grid: Grid,
    f: Vec<f64>,
    m1: Vec<f64>,
    m2: Vec<f64>,
    m12: Vec<f64>,
}

impl TensorSpline {
    /// `∂₁^{d1} ∂₂^{d2}` of the interpolant at `(x1, x2)`; `x1` is wrapped,
    /// `x2` outside the node range uses the end cubics.
    pub fn eval(&self, x1: f64, x2: f64, d1: usize, d2: usize) -> f64 {
        let g = &self.grid;
        let s1 = x1.rem_euclid(1.0) / g.h1;
        let i0 = (s1.floor() as usize).min(g.n1 - 1);
        let i1 = (i0 + 1) % g.n1;
        let w1 = cubic_weights(s1 - i0 as f64, g.h1, d1);

        let s2 = x2 / g.h2 - 0.5;
        let j0 = (s2.floor().max(0.0) as usize).min(g.n2 - 2);
        let w2 = cubic_weights(s2 - j0 as f64, g.h2, d2);

        let along = |data: &[f64], other: &[f64], i: usize| {
            let (a, b) = (g.index(i, j0), g.index(i, j0 + 1));
            w2[0] * data[a] + w2[1] * data[b] + w2[2] * other[a] + w2[3] * other[b]
        };
        w1[0] * along(&self.f, &self.m2, i0)
            + w1[1] * along(&self.f, &self.m2, i1)
            + w1[2] * along(&self.m1, &self.m12, i0)
            + w1[3] * along(&self.m1, &self.m12, i1)
    }
}

/// Continuous interpolant of a flow-map state: `η = e + displacement` and
/// `v`, both as tensor splines.
#[derive(Clone, Debug)]
pub struct FlowMapInterpolant {
    pub grid: Grid,
    pub t: f64,
    displacement: [TensorSpline; 2],
    velocity: [TensorSpline; 2],
}

impl FlowMapInterpolant {
    pub fn new(state: &FlowMapState) -> Result<Self> {
        Self::with_basis(&SplineBasis::new(state.grid)?, state)
    }

    pub fn with_basis(basis: &SplineBasis, state: &FlowMapState) -> Result<Self> {
        if basis.grid != state.grid {
            return Err(Error::InvalidArgument("spline basis is for another grid".into()));
        }
        Ok(FlowMapInterpolant {
            grid: state.grid,
            t: state.t,
            displacement: [basis.fit(&state.displacement[0])?, basis.fit(&state.displacement[1])?],
            velocity: [basis.fit(&state.v[0])?, basis.fit(&state.v[1])?],
        })
    }

    pub fn eta(&self, x: [f64; 2]) -> [f64; 2] {
        [
            x[0] + self.displacement[0].eval(x[0], x[1], 0, 0),
            x[1] + self.displacement[1].eval(x[0], x[1], 0, 0),
        ]
    }

    /// `Dη` with `m[i][k] = ∂ₖηⁱ`.
    pub fn deta(&self, x: [f64; 2]) -> Mat2 {
        let d = |i: usize, k: usize| {
            let (d1, d2) = if k == 0 { (1, 0) } else { (0, 1) };
            f64::from(u8::from(i == k)) + self.displacement[i].eval(x[0], x[1], d1, d2)
        };
        [[d(0, 0), d(0, 1)], [d(1, 0), d(1, 1)]]
    }

    pub fn jacobian(&self, x: [f64; 2]) -> f64 {
        let m = self.deta(x);
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn velocity(&self, x: [f64; 2]) -> [f64; 2] {
        [self.velocity[0].eval(x[0], x[1], 0, 0), self.velocity[1].eval(x[0], x[1], 0, 0)]
    }

    /// `∂₁^d η` along a boundary row `x2 ∈ {0, 1}`.
    fn boundary_derivative(&self, x1: f64, x2: f64, d: usize) -> [f64; 2] {
        let base = if d == 1 { 1.0 } else { 0.0 };
        [
            base + self.displacement[0].eval(x1, x2, d, 0),
            self.displacement[1].eval(x1, x2, d, 0),
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Preimage {
    pub x: [f64; 2],
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Preimage within `0 ≤ x2 ≤ 1`.
    pub inside: bool,
}

fn newton_invert(map: &FlowMapInterpolant, y: [f64; 2]) -> Preimage {
    let residual = |x: [f64; 2]| {
        let e = map.eta(x);
        let mut r = [e[0] - y[0], e[1] - y[1]];
        // η¹ − x1 is periodic, so compare y1 modulo the period
        r[0] -= r[0].round();
        r
    };
    let norm = |r: [f64; 2]| r[0].hypot(r[1]);
    let mut x = y;
    let mut r = residual(x);
    let mut iterations = 0;
    while norm(r) > INVERSION_TOLERANCE && iterations < MAX_NEWTON_STEPS {
        iterations += 1;
        let m = map.deta(x);
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        if !det.is_normal() {
            break;
        }
        let dx = [
            -(m[1][1] * r[0] - m[0][1] * r[1]) / det,
            -(-m[1][0] * r[0] + m[0][0] * r[1]) / det,
        ];
        let mut lambda = 1.0;
        loop {
            let trial = [x[0] + lambda * dx[0], x[1] + lambda * dx[1]];
            let rt = residual(trial);
            if norm(rt) < norm(r) || lambda < 1.0 / 1024.0 {
                x = trial;
                r = rt;
                break;
            }
            lambda *= 0.5;
        }
    }
    let converged = norm(r) <= INVERSION_TOLERANCE;
    Preimage {
        x,
        residual: norm(r),
        iterations,
        converged,
        inside: (-OUTSIDE_SLACK..=1.0 + OUTSIDE_SLACK).contains(&x[1]),
    }
}

/// Preimages `x` with `η(x) = y` by damped Newton started at `y`.
/// Failures are reported per point.
pub fn invert_flow_map(state: &FlowMapState, query: &[[f64; 2]]) -> Result<Vec<Preimage>> {
    let map = FlowMapInterpolant::new(state)?;
    Ok(invert_with(&map, query))
}

pub fn invert_with(map: &FlowMapInterpolant, query: &[[f64; 2]]) -> Vec<Preimage> {
    query.iter().map(|&y| newton_invert(map, y)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundarySide {
    /// Image of `x2 = 0`.
    Bottom,
    /// Image of `x2 = 1`.
    Top,
}

impl BoundarySide {
    pub fn x2(self) -> f64 {
        match self {
            BoundarySide::Bottom => 0.0,
            BoundarySide::Top => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BoundarySide::Bottom => "bottom",
            BoundarySide::Top => "top",
        }
    }
}

/// One component of Γ(t): vertices `η(x1_i, x2_Γ)`, closed periodically by
/// the shift `(1, 0)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundaryCurve {
    pub side: BoundarySide,
    pub vertices: Vec<[f64; 2]>,
    /// Unit outward normals.
    pub normals: Vec<[f64; 2]>,
    pub curvature: Vec<f64>,
}

impl BoundaryCurve {
    fn trace(map: &FlowMapInterpolant, side: BoundarySide) -> Self {
        let g = &map.grid;
        let x2 = side.x2();
        let mut vertices = Vec::with_capacity(g.n1);
        let mut normals = Vec::with_capacity(g.n1);
        let mut curvature = Vec::with_capacity(g.n1);
        for i in 0..g.n1 {
            let x1 = g.x1(i);
            vertices.push(map.eta([x1, x2]));
            let d = map.boundary_derivative(x1, x2, 1);
            let dd = map.boundary_derivative(x1, x2, 2);
            let speed = d[0].hypot(d[1]);
            // Ω lies to the left of the bottom curve and to the right of the top
            let n = match side {
                BoundarySide::Bottom => [d[1] / speed, -d[0] / speed],
                BoundarySide::Top => [-d[1] / speed, d[0] / speed],
            };
            normals.push(n);
            curvature.push((d[0] * dd[1] - d[1] * dd[0]) / speed.powi(3));
        }
        BoundaryCurve {
            side,
            vertices,
            normals,
            curvature,
        }
    }

    /// Segments of one period, the last one closing onto the shifted first
    /// vertex.
    pub fn segments(&self) -> Vec<[[f64; 2]; 2]> {
        let n = self.vertices.len();
        (0..n)
            .map(|k| {
                let a = self.vertices[k];
                let b = if k + 1 < n {
                    self.vertices[k + 1]
                } else {
                    [self.vertices[0][0] + 1.0, self.vertices[0][1]]
                };
                [a, b]
            })
            .collect()
    }

    pub fn max_curvature(&self) -> f64 {
        self.curvature.iter().fold(0.0, |m, k| m.max(k.abs()))
    }
}

fn orientation(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn on_segment(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

/// Closed-segment intersection test.
pub fn segments_intersect(s: [[f64; 2]; 2], t: [[f64; 2]; 2]) -> bool {
    let (p1, p2, q1, q2) = (s[0], s[1], t[0], t[1]);
    let d1 = orientation(q1, q2, p1);
    let d2 = orientation(q1, q2, p2);
    let d3 = orientation(p1, p2, q1);
    let d4 = orientation(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

/// Crossings among the given periodic curves (self and mutual), found by a
/// sweep in y1 over three periods. Segments sharing an endpoint are
/// neighbours and are not compared.
pub fn count_crossings(curves: &[&BoundaryCurve]) -> usize {
    let mut segs: Vec<[[f64; 2]; 2]> = Vec::new();
    for c in curves {
        for s in c.segments() {
            for shift in [-1.0, 0.0, 1.0] {
                segs.push([[s[0][0] + shift, s[0][1]], [s[1][0] + shift, s[1][1]]]);
            }
        }
    }
    let lo = |s: &[[f64; 2]; 2]| s[0][0].min(s[1][0]);
    let hi = |s: &[[f64; 2]; 2]| s[0][0].max(s[1][0]);
    segs.sort_by(|a, b| lo(a).total_cmp(&lo(b)));
    let shares = |a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]| {
        let close = |p: [f64; 2], q: [f64; 2]| (p[0] - q[0]).abs() < 1e-12 && (p[1] - q[1]).abs() < 1e-12;
        close(a[0], b[0]) || close(a[0], b[1]) || close(a[1], b[0]) || close(a[1], b[1])
    };
    let mut active: Vec<usize> = Vec::new();
    let mut crossings = 0;
    for k in 0..segs.len() {
        let start = lo(&segs[k]);
        active.retain(|&a| hi(&segs[a]) >= start);
        for &a in &active {
            if !shares(&segs[a], &segs[k]) && segments_intersect(segs[a], segs[k]) {
                // count each crossing once, from the period that contains it
                let x = 0.5 * (start + hi(&segs[a]).min(hi(&segs[k])));
                if (0.0..1.0).contains(&x) {
                    crossings += 1;
                }
            }
        }
        active.push(k);
    }
    crossings
}

/// Depth and velocity at the query grid of Ω(t).
///
/// Query point `(i, j)` is `(y1_i, b(y1_i) + s_j (β(y1_i) − b(y1_i)))` where
/// `b` and `β` are the bottom and top curves as graphs over y1, `y1_i = i·h1`
/// and `s_j` is the cell-centred level of the Lagrangian grid.
#[derive(Clone, Debug, Serialize)]
pub struct EulerianSnapshot {
    pub t: f64,
    /// Layout of the query grid in `(y1, s)`.
    pub layout: Grid,
    pub points: Vec<[f64; 2]>,
    pub preimages: Vec<[f64; 2]>,
    pub rho: Vec<f64>,
    pub u: VectorField,
    /// Heights and slopes of the bottom and top curves at `y1_i`.
    pub edge_height: [Vec<f64>; 2],
    pub edge_slope: [Vec<f64>; 2],
    pub boundary: [BoundaryCurve; 2],
}

impl EulerianSnapshot {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `(y2, dy2/dy1)` of the boundary curve at abscissa `y1`.
fn boundary_graph(map: &FlowMapInterpolant, side: BoundarySide, y1: f64) -> Result<(f64, f64)> {
    let x2 = side.x2();
    let mut x1 = y1;
    for _ in 0..MAX_NEWTON_STEPS {
        let e = map.eta([x1, x2]);
        let r = e[0] - y1;
        let d = map.boundary_derivative(x1, x2, 1);
        if r.abs() <= INVERSION_TOLERANCE {
            return Ok((e[1], d[1] / d[0]));
        }
        if !d[0].is_normal() {
            break;
        }
        x1 -= r / d[0];
    }
    Err(Error::Inversion { failed: 1, total: 1 })
}

fn rho_at(map: &FlowMapInterpolant, w: &WeightField, x: [f64; 2]) -> f64 {
    w.eval(x[0], x[1].clamp(0.0, 1.0)) / map.jacobian(x)
}

/// Eulerian depth `ρ = ρ₀(η̃)/J(η̃)` and velocity `u = v(η̃)` on the query
/// grid of `layout`, with Γ(t) traced at the Lagrangian boundary nodes.
pub fn eulerian_fields(state: &FlowMapState, w: &WeightField, layout: Grid) -> Result<EulerianSnapshot> {
    let map = FlowMapInterpolant::new(state)?;
    eulerian_fields_with(&map, w, layout)
}

pub fn eulerian_fields_with(map: &FlowMapInterpolant, w: &WeightField, layout: Grid) -> Result<EulerianSnapshot> {
    let mut edge_height = [Vec::with_capacity(layout.n1), Vec::with_capacity(layout.n1)];
    let mut edge_slope = [Vec::with_capacity(layout.n1), Vec::with_capacity(layout.n1)];
    for i in 0..layout.n1 {
        for (c, side) in [BoundarySide::Bottom, BoundarySide::Top].into_iter().enumerate() {
            let (h, s) = boundary_graph(map, side, layout.x1(i))?;
            edge_height[c].push(h);
            edge_slope[c].push(s);
        }
    }
    let points: Vec<[f64; 2]> = (0..layout.len())
        .map(|k| {
            let (i, j) = (k % layout.n1, k / layout.n1);
            let (b, top) = (edge_height[0][i], edge_height[1][i]);
            [layout.x1(i), b + layout.x2(j) * (top - b)]
        })
        .collect();
    let pre = invert_with(map, &points);
    let failed = pre.iter().filter(|p| !p.converged || !p.inside).count();
    if failed > 0 {
        return Err(Error::Inversion {
            failed,
            total: pre.len(),
        });
    }
    let preimages: Vec<[f64; 2]> = pre.iter().map(|p| p.x).collect();
    let rho = preimages.iter().map(|&x| rho_at(map, w, x)).collect();
    let vel: Vec<[f64; 2]> = preimages.iter().map(|&x| map.velocity(x)).collect();
    Ok(EulerianSnapshot {
        t: map.t,
        layout,
        points,
        preimages,
        rho,
        u: [vel.iter().map(|v| v[0]).collect(), vel.iter().map(|v| v[1]).collect()],
        edge_height,
        edge_slope,
        boundary: [
            BoundaryCurve::trace(map, BoundarySide::Bottom),
            BoundaryCurve::trace(map, BoundarySide::Top),
        ],
    })
}

/// `max |∇ρ·𝔻(u)|` over Γ(t), with `𝔻(u) = (∇u + ∇uᵀ)/2`.
///
/// Derivatives are taken on the snapshot grid in `(y1, s)` and mapped to
/// `(y1, y2)`; the nodal field is extrapolated to `s = 0` and `s = 1`.
pub fn stress_free_residual(snap: &EulerianSnapshot) -> Result<f64> {
    let g = &snap.layout;
    // ∂_{y2} = ∂_s / L,  ∂_{y1} = ∂_{y1}|_s − (b' + s L') ∂_s / L
    let chain = |f: &[f64]| -> Result<[Vec<f64>; 2]> {
        let f1 = diff_op(g, f, Axis::X1, 1)?;
        let fs = diff_op(g, f, Axis::X2, 1)?;
        let mut d1 = vec![0.0; g.len()];
        let mut d2 = vec![0.0; g.len()];
        for k in 0..g.len() {
            let (i, j) = (k % g.n1, k / g.n1);
            let s = g.x2(j);
            let len = snap.edge_height[1][i] - snap.edge_height[0][i];
            let slope = snap.edge_slope[0][i] + s * (snap.edge_slope[1][i] - snap.edge_slope[0][i]);
            d2[k] = fs[k] / len;
            d1[k] = f1[k] - slope * d2[k];
        }
        Ok([d1, d2])
    };
    let drho = chain(&snap.rho)?;
    let du = [chain(&snap.u[0])?, chain(&snap.u[1])?];
    let mut worst = 0.0_f64;
    for i in 0..2 {
        let field: Vec<f64> = (0..g.len())
            .map(|p| {
                (0..2)
                    .map(|k| drho[k][p] * 0.5 * (du[k][i][p] + du[i][k][p]))
                    .sum()
            })
            .collect();
        let (bottom, top) = extrapolate_to_boundary(g, &field);
        worst = bottom.iter().chain(&top).fold(worst, |m, v| m.max(v.abs()));
    }
    Ok(worst)
}

/// Quadrature resolution of the mass integrals: trapezoid points in the
/// periodic direction and four-point Gauss panels across the layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MassQuadrature {
    pub n_periodic: usize,
    pub panels: usize,
}

impl MassQuadrature {
    pub fn for_grid(grid: &Grid) -> Self {
        MassQuadrature {
            n_periodic: 4 * grid.n1,
            panels: 2 * grid.n2,
        }
    }

    fn layer(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        let h = 1.0 / self.panels as f64;
        (0..self.panels)
            .map(|p| GAUSS4.iter().map(|&(x, wt)| wt * f((p as f64 + x) * h)).sum::<f64>() * h)
            .sum()
    }
}

/// `∫ ρ₀ dx` over the reference slab.
pub fn lagrangian_mass(w: &WeightField, q: MassQuadrature) -> f64 {
    let n = q.n_periodic;
    (0..n)
        .map(|i| {
            let x1 = i as f64 / n as f64;
            q.layer(|x2| w.eval(x1, x2))
        })
        .sum::<f64>()
        / n as f64
}

/// `∫_{Ω(t)} ρ dy`, integrating between the boundary curves.
pub fn eulerian_mass(map: &FlowMapInterpolant, w: &WeightField, q: MassQuadrature) -> Result<f64> {
    let n = q.n_periodic;
    let mut total = 0.0;
    let mut failed = 0;
    let mut count = 0;
    for i in 0..n {
        let y1 = i as f64 / n as f64;
        let (b, _) = boundary_graph(map, BoundarySide::Bottom, y1)?;
        let (top, _) = boundary_graph(map, BoundarySide::Top, y1)?;
        let col = q.layer(|s| {
            let p = newton_invert(map, [y1, b + s * (top - b)]);
            count += 1;
            if !p.converged {
                failed += 1;
            }
            rho_at(map, w, p.x)
        });
        total += (top - b) * col;
    }
    if failed > 0 {
        return Err(Error::Inversion { failed, total: count });
    }
    Ok(total / n as f64)
}

/// Relative gap between the Eulerian and Lagrangian masses of a state.
pub fn mass_defect(state: &FlowMapState, w: &WeightField) -> Result<f64> {
    let q = MassQuadrature::for_grid(&state.grid);
    let map = FlowMapInterpolant::new(state)?;
    let lag = lagrangian_mass(w, q);
    Ok((eulerian_mass(&map, w, q)? - lag).abs() / lag)
}

/// `max |x − η̃(η(x))|` over the Lagrangian nodes.
pub fn round_trip_error(state: &FlowMapState) -> Result<f64> {
    let map = FlowMapInterpolant::new(state)?;
    let g = state.grid;
    let nodes: Vec<[f64; 2]> = (0..g.len()).map(|k| g.node(k)).map(|(a, b)| [a, b]).collect();
    let images: Vec<[f64; 2]> = nodes.iter().map(|&x| map.eta(x)).collect();
    let pre = invert_with(&map, &images);
    if let Some(p) = pre.iter().find(|p| !p.converged) {
        return Err(Error::InvalidArgument(format!("inversion stalled at residual {:.3e}", p.residual)));
    }
    Ok(nodes
        .iter()
        .zip(&pre)
        .map(|(x, p)| {
            let d1 = x[0] - p.x[0];
            (d1 - d1.round()).hypot(x[1] - p.x[1])
        })
        .fold(0.0, f64::max))
}
