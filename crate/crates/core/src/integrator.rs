//! Fixed-step classical Runge-Kutta integration on a uniform grid, forward
//! for states and backward for adjoints, with cubic Hermite dense output.

use std::io::{Read, Write};

use crate::error::{Error, Result};

/// Tolerance used when checking that a grid lands on its end point and when
/// accepting query times marginally outside the grid.
pub const GRID_TOLERANCE: f64 = 1e-9;

/// Uniform time grid `t0, t0 + h, ..., tf` (days).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t0: f64,
    tf: f64,
    h: f64,
    steps: usize,
}

impl TimeGrid {
    /// Builds the grid; `(tf - t0) / h` must be an integer to within `1e-9`.
    /// `tf == t0` gives a single-node grid.
    pub fn new(t0: f64, tf: f64, h: f64) -> Result<Self> {
        if !(t0.is_finite() && tf.is_finite() && h.is_finite()) {
            return Err(Error::InvalidArgument("grid bounds must be finite".into()));
        }
        if h <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "step must be positive, got {h}"
            )));
        }
        if tf < t0 {
            return Err(Error::InvalidArgument(format!("tf ({tf}) < t0 ({t0})")));
        }
        let ratio = (tf - t0) / h;
        let steps = ratio.round();
        if (ratio - steps).abs() > GRID_TOLERANCE {
            return Err(Error::InvalidArgument(format!(
                "step {h} does not divide [{t0}, {tf}] evenly"
            )));
        }
        Ok(TimeGrid {
            t0,
            tf,
            h,
            steps: steps as usize,
        })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn tf(&self) -> f64 {
        self.tf
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Time of node `i`; the last node is `tf` exactly.
    pub fn time(&self, i: usize) -> f64 {
        if i == self.steps {
            self.tf
        } else {
            self.t0 + i as f64 * self.h
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|i| self.time(i))
    }

    /// Composite trapezoid weight of node `i`.
    pub fn trapezoid_weight(&self, i: usize) -> f64 {
        if self.steps == 0 {
            0.0
        } else if i == 0 || i == self.steps {
            0.5 * self.h
        } else {
            self.h
        }
    }

    /// Index of the node nearest to `t`, if `t` lies on that node to within
    /// the grid tolerance.
    pub fn node_at(&self, t: f64) -> Option<usize> {
        let s = ((t - self.t0) / self.h).round();
        if s < 0.0 || s > self.steps as f64 {
            return None;
        }
        let i = s as usize;
        ((t - self.time(i)).abs() <= GRID_TOLERANCE).then_some(i)
    }

    fn check_range(&self, t: f64) -> Result<f64> {
        if t < self.t0 - GRID_TOLERANCE || t > self.tf + GRID_TOLERANCE || t.is_nan() {
            return Err(Error::OutOfRange {
                t,
                t0: self.t0,
                tf: self.tf,
            });
        }
        Ok(t.clamp(self.t0, self.tf))
    }
}

/// Node values on a [`TimeGrid`], optionally with node derivatives for dense
/// output. Without derivatives the interpolant is piecewise linear.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<const D: usize> {
    grid: TimeGrid,
    values: Vec<[f64; D]>,
    derivatives: Option<Vec<[f64; D]>>,
}

impl<const D: usize> Trajectory<D> {
    pub fn new(grid: TimeGrid, values: Vec<[f64; D]>) -> Result<Self> {
        Self::build(grid, values, None)
    }

    pub fn with_derivatives(
        grid: TimeGrid,
        values: Vec<[f64; D]>,
        derivatives: Vec<[f64; D]>,
    ) -> Result<Self> {
        Self::build(grid, values, Some(derivatives))
    }

    /// Same value at every node.
    pub fn constant(grid: TimeGrid, value: [f64; D]) -> Result<Self> {
        Self::build(
            grid,
            vec![value; grid.len()],
            Some(vec![[0.0; D]; grid.len()]),
        )
    }

    fn build(
        grid: TimeGrid,
        values: Vec<[f64; D]>,
        derivatives: Option<Vec<[f64; D]>>,
    ) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(d) = &derivatives {
            if d.len() != grid.len() {
                return Err(Error::InvalidArgument("derivative count mismatch".into()));
            }
        }
        for (i, v) in values.iter().enumerate() {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::non_finite(grid.time(i), "trajectory value"));
            }
        }
        Ok(Trajectory {
            grid,
            values,
            derivatives,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[[f64; D]] {
        &self.values
    }

    pub fn derivatives(&self) -> Option<&[[f64; D]]> {
        self.derivatives.as_deref()
    }

    pub fn node(&self, i: usize) -> &[f64; D] {
        &self.values[i]
    }

    pub fn first(&self) -> &[f64; D] {
        &self.values[0]
    }

    pub fn last(&self) -> &[f64; D] {
        &self.values[self.values.len() - 1]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `(t, value)` pairs in node order.
    pub fn iter(&self) -> impl Iterator<Item = (f64, &[f64; D])> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| (self.grid.time(i), v))
    }

    /// One component as a series over the nodes.
    pub fn component(&self, k: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[k]).collect()
    }

    /// Dense value at `t`: exact at nodes, cubic Hermite between nodes when
    /// derivatives are stored, linear otherwise.
    pub fn interpolate(&self, t: f64) -> Result<[f64; D]> {
        let t = self.grid.check_range(t)?;
        if let Some(i) = self.grid.node_at(t) {
            if self.grid.time(i) == t {
                return Ok(self.values[i]);
            }
        }
        if self.grid.steps == 0 {
            return Ok(self.values[0]);
        }
        let h = self.grid.h;
        let i = (((t - self.grid.t0) / h).floor() as usize).min(self.grid.steps - 1);
        let (ta, tb) = (self.grid.time(i), self.grid.time(i + 1));
        let width = tb - ta;
        let theta = ((t - ta) / width).clamp(0.0, 1.0);
        let (ya, yb) = (&self.values[i], &self.values[i + 1]);
        let mut out = [0.0; D];
        match &self.derivatives {
            Some(dv) => {
                let (da, db) = (&dv[i], &dv[i + 1]);
                let t2 = theta * theta;
                let t3 = t2 * theta;
                let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
                let h10 = t3 - 2.0 * t2 + theta;
                let h01 = -2.0 * t3 + 3.0 * t2;
                let h11 = t3 - t2;
                for k in 0..D {
                    out[k] = h00 * ya[k] + h10 * width * da[k] + h01 * yb[k] + h11 * width * db[k];
                }
            }
            None => {
                for k in 0..D {
                    out[k] = ya[k] + theta * (yb[k] - ya[k]);
                }
            }
        }
        Ok(out)
    }

    /// Writes `t` followed by one column per component.
    pub fn write_csv<W: Write>(&self, writer: W, headers: &[&str]) -> Result<()> {
        if headers.len() != D {
            return Err(Error::InvalidArgument(format!(
                "expected {D} headers, got {}",
                headers.len()
            )));
        }
        let mut w = csv::Writer::from_writer(writer);
        let mut row = Vec::with_capacity(D + 1);
        row.push("t".to_string());
        row.extend(headers.iter().map(|h| h.to_string()));
        w.write_record(&row)?;
        for (t, v) in self.iter() {
            row.clear();
            row.push(t.to_string());
            row.extend(v.iter().map(|x| x.to_string()));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    /// Reads a CSV written by [`Trajectory::write_csv`]. Extra columns after
    /// the first `D` components are ignored; the `t` column must be uniform.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() < D + 1 || headers.get(0).map(str::trim) != Some("t") {
            return Err(Error::MalformedHeader(format!(
                "expected t plus {D} columns, got {:?}",
                headers.iter().collect::<Vec<_>>()
            )));
        }
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let parse = |k: usize| -> Result<f64> {
                rec.get(k)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::MalformedRows {
                        count: 1,
                        rows: vec![(row + 2, format!("column {k} is not a number"))],
                    })
            };
            times.push(parse(0)?);
            let mut v = [0.0; D];
            for (k, slot) in v.iter_mut().enumerate() {
                *slot = parse(k + 1)?;
            }
            values.push(v);
        }
        let grid = grid_from_times(&times)?;
        Trajectory::new(grid, values)
    }
}

/// Recovers a uniform grid from a list of node times.
pub fn grid_from_times(times: &[f64]) -> Result<TimeGrid> {
    match times {
        [] => Err(Error::EmptyInput),
        [t] => TimeGrid::new(*t, *t, 1.0),
        [t0, .., tf] => {
            let h = (tf - t0) / (times.len() - 1) as f64;
            let grid = TimeGrid::new(*t0, *tf, h)?;
            for (i, t) in times.iter().enumerate() {
                if (grid.time(i) - t).abs() > 1e-6 * h.max(1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "time column is not uniform at row {}",
                        i + 2
                    )));
                }
            }
            Ok(grid)
        }
    }
}

fn check_finite<const D: usize>(t: f64, v: &[f64; D], what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::non_finite(t, what))
    }
}

#[inline]
fn axpy<const D: usize>(y: &[f64; D], a: f64, k: &[f64; D]) -> [f64; D] {
    let mut out = [0.0; D];
    for i in 0..D {
        out[i] = y[i] + a * k[i];
    }
    out
}

/// Classical RK4 from `grid.t0()` to `grid.tf()`. Node 0 is `x0` exactly.
pub fn integrate_forward<const D: usize, F>(
    mut rhs: F,
    x0: [f64; D],
    grid: &TimeGrid,
) -> Result<Trajectory<D>>
where
    F: FnMut(f64, &[f64; D]) -> Result<[f64; D]>,
{
    check_finite(grid.t0, &x0, "initial value")?;
    let n = grid.len();
    let mut values = Vec::with_capacity(n);
    let mut derivs = Vec::with_capacity(n);
    values.push(x0);
    let mut y = x0;
    let mut k1 = rhs(grid.t0, &y)?;
    check_finite(grid.t0, &k1, "stage 1")?;
    derivs.push(k1);
    for i in 0..grid.steps {
        let t = grid.time(i);
        let t_next = grid.time(i + 1);
        let h = t_next - t;
        let k2 = rhs(t + 0.5 * h, &axpy(&y, 0.5 * h, &k1))?;
        check_finite(t + 0.5 * h, &k2, "stage 2")?;
        let k3 = rhs(t + 0.5 * h, &axpy(&y, 0.5 * h, &k2))?;
        check_finite(t + 0.5 * h, &k3, "stage 3")?;
        let k4 = rhs(t_next, &axpy(&y, h, &k3))?;
        check_finite(t_next, &k4, "stage 4")?;
        for j in 0..D {
            y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        check_finite(t_next, &y, "node value")?;
        k1 = rhs(t_next, &y)?;
        check_finite(t_next, &k1, "stage 1")?;
        values.push(y);
        derivs.push(k1);
    }
    Trajectory::with_derivatives(*grid, values, derivs)
}

/// Classical RK4 from `grid.tf()` down to `grid.t0()`. The terminal node is
/// `y_final` exactly; the result is stored in forward node order.
pub fn integrate_backward<const D: usize, F>(
    mut rhs: F,
    y_final: [f64; D],
    grid: &TimeGrid,
) -> Result<Trajectory<D>>
where
    F: FnMut(f64, &[f64; D]) -> Result<[f64; D]>,
{
    check_finite(grid.tf, &y_final, "terminal value")?;
    let n = grid.len();
    let mut values = vec![[0.0; D]; n];
    let mut derivs = vec![[0.0; D]; n];
    let mut y = y_final;
    let mut k1 = rhs(grid.tf, &y)?;
    check_finite(grid.tf, &k1, "stage 1")?;
    values[n - 1] = y;
    derivs[n - 1] = k1;
    for i in (0..grid.steps).rev() {
        let t = grid.time(i + 1);
        let t_prev = grid.time(i);
        let h = t_prev - t;
        let k2 = rhs(t + 0.5 * h, &axpy(&y, 0.5 * h, &k1))?;
        check_finite(t + 0.5 * h, &k2, "stage 2")?;
        let k3 = rhs(t + 0.5 * h, &axpy(&y, 0.5 * h, &k2))?;
        check_finite(t + 0.5 * h, &k3, "stage 3")?;
        let k4 = rhs(t_prev, &axpy(&y, h, &k3))?;
        check_finite(t_prev, &k4, "stage 4")?;
        for j in 0..D {
            y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        check_finite(t_prev, &y, "node value")?;
        k1 = rhs(t_prev, &y)?;
        check_finite(t_prev, &k1, "stage 1")?;
        values[i] = y;
        derivs[i] = k1;
    }
    Trajectory::with_derivatives(*grid, values, derivs)
}
