//! Ray marching for the cumulant and moment semigroups.
//!
//! Along the ray `y = x + t`, with `A(r) = α(y − r)` and trace `W(r) = V_r(r)`,
//!
//! ```text
//! V_y(t) = V₀(y) + ∫₀ᵗ A(r) [H(y − r, W(r)) − V_y(r)] dr
//! ```
//!
//! where `V = e^{−u}`, `V₀ = e^{−f}`, `H(a, w) = g(a, w)` for the cumulant and
//! `V = π f`, `V₀ = f`, `H(a, w) = m(a)·w` for the moment.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use super::{Form, Quadrature, SolverGrid};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::measure::AgeMeasure;
use crate::model::BranchingModel;

const FIXED_POINT_TOL: f64 = 1e-12;
const FIXED_POINT_MAX_ITER: usize = 500;

type Data = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kernel {
    Cumulant,
    Moment,
}

#[derive(Clone)]
struct Characteristics {
    model: BranchingModel,
    data: Data,
    grid: SolverGrid,
    kernel: Kernel,
    trace: Vec<f64>,
}

impl fmt::Debug for Characteristics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Characteristics")
            .field("kernel", &self.kernel)
            .field("grid", &self.grid)
            .field("trace_len", &self.trace.len())
            .finish()
    }
}

impl Characteristics {
    fn build(model: &BranchingModel, data: Data, grid: &SolverGrid, kernel: Kernel) -> Result<Self> {
        grid.validate()?;
        let c1 = model.constants().c1;
        if grid.quadrature == Quadrature::Trapezoid && grid.dt * c1 >= 1.0 {
            return Err(Error::Contraction {
                dt: grid.dt,
                product: grid.dt * c1,
            });
        }
        let mut s = Self {
            model: model.clone(),
            data,
            grid: *grid,
            kernel,
            trace: Vec::new(),
        };
        s.march_trace()?;
        Ok(s)
    }

    fn initial(&self, y: f64) -> f64 {
        let f = (self.data)(y);
        match self.kernel {
            Kernel::Cumulant => (-f).exp(),
            Kernel::Moment => f,
        }
    }

    fn source(&self, age: f64, w: f64) -> f64 {
        let law = self.model.offspring();
        match self.kernel {
            Kernel::Cumulant => law.pgf_unchecked(age, w.clamp(0.0, 1.0)),
            Kernel::Moment => law.mean(age) * w,
        }
    }

    fn output(&self, v: f64) -> f64 {
        match self.kernel {
            Kernel::Cumulant => -v.ln(),
            Kernel::Moment => v,
        }
    }

    /// Step coefficients `[E, w₀, w₁]` for a step of length `h` with rates `a0 → a1`.
    ///
    /// Renewal form: `V₁ = E·V₀ + w₀·a0·H₀ + w₁·a1·H₁`, the exact integral of the
    /// linearly interpolated source against `e^{−ā(h−r)}` (trapezoid) or of the
    /// left-point source against `e^{−a0(h−r)}` (rectangle).
    fn coeffs(&self, a0: f64, a1: f64, h: f64) -> [f64; 3] {
        match (self.grid.form, self.grid.quadrature) {
            (Form::Renewal, Quadrature::Trapezoid) => {
                let z = 0.5 * (a0 + a1) * h;
                let (phi1, phi2) = phi_functions(z);
                [(-z).exp(), h * (phi1 - phi2), h * phi2]
            }
            (Form::Renewal, Quadrature::Rectangle) => {
                let z = a0 * h;
                [(-z).exp(), h * phi_functions(z).0, 0.0]
            }
            (Form::Transport, _) => [1.0, 0.0, 0.0],
        }
    }

    /// One step of length `h` from `(v, a0, h0)` to the end point with `(a1, h1)`.
    /// Affine in `h1`.
    #[inline]
    #[allow(clippy::too_many_arguments)]
    fn step(&self, v: f64, a0: f64, a1: f64, c: &[f64; 3], h0: f64, h1: f64, h: f64) -> f64 {
        match (self.grid.form, self.grid.quadrature) {
            (Form::Renewal, _) => c[0] * v + c[1] * a0 * h0 + c[2] * a1 * h1,
            (Form::Transport, Quadrature::Trapezoid) => {
                (v + 0.5 * h * (a0 * (h0 - v) + a1 * h1)) / (1.0 + 0.5 * h * a1)
            }
            (Form::Transport, Quadrature::Rectangle) => v + h * a0 * (h0 - v),
        }
    }

    /// Runs `steps` grid steps of a ray whose age at time `t_k` is `age(j − k)`.
    fn march(
        &self,
        v0: f64,
        steps: usize,
        j: usize,
        alpha: &[f64],
        coeffs: &[[f64; 3]],
        age: impl Fn(usize) -> f64,
    ) -> f64 {
        let h = self.grid.dt;
        let mut v = v0;
        let mut h_start = self.source(age(j), self.trace[0]);
        for k in 0..steps {
            let (i0, i1) = (j - k, j - k - 1);
            let h_end = self.source(age(i1), self.trace[k + 1]);
            v = self.step(v, alpha[i0], alpha[i1], &coeffs[i1], h_start, h_end, h);
            h_start = h_end;
        }
        v
    }

    /// Alpha at `x + t_i` for `i = 0..=n`, and the step coefficients between consecutive nodes.
    fn ray_tables(&self, x: f64, n: usize) -> (Vec<f64>, Vec<[f64; 3]>) {
        let h = self.grid.dt;
        let alpha: Vec<f64> = (0..=n)
            .map(|i| self.model.alpha().eval(x + i as f64 * h))
            .collect();
        let coeffs = (0..n)
            .map(|i| self.coeffs(alpha[i + 1], alpha[i], h))
            .collect();
        (alpha, coeffs)
    }

    fn march_trace(&mut self) -> Result<()> {
        let n = self.grid.steps();
        let h = self.grid.dt;
        let (alpha, coeffs) = self.ray_tables(0.0, n);
        self.trace = Vec::with_capacity(n + 1);
        self.trace.push(self.initial(0.0));
        let age = |i: usize| i as f64 * h;
        for j in 1..=n {
            let v = self.march(self.initial(age(j)), j - 1, j, &alpha, &coeffs, age);
            let h0 = self.source(age(1), self.trace[j - 1]);
            let p = self.step(v, alpha[1], alpha[0], &coeffs[0], h0, 0.0, h);
            let q = self.step(v, alpha[1], alpha[0], &coeffs[0], h0, 1.0, h) - p;
            let w = if q == 0.0 {
                p
            } else {
                let mut w = self.trace[j - 1];
                let mut converged = false;
                let mut residual = f64::INFINITY;
                for _ in 0..FIXED_POINT_MAX_ITER {
                    let next = p + q * self.source(0.0, w);
                    residual = (next - w).abs();
                    w = next;
                    if residual <= FIXED_POINT_TOL * w.abs().max(1.0) {
                        converged = true;
                        break;
                    }
                }
                if !converged || !w.is_finite() {
                    return Err(Error::NonConvergence {
                        t: age(j),
                        residual,
                    });
                }
                w
            };
            self.trace.push(w);
        }
        Ok(())
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let horizon = self.grid.t_max;
        if !(t >= 0.0 && t <= horizon * (1.0 + 1e-12)) {
            return Err(Error::BeyondHorizon { t, horizon });
        }
        Ok(())
    }

    /// `V` at `(t, x)`.
    fn raw(&self, t: f64, x: f64) -> Result<f64> {
        self.check_time(t)?;
        if !(x >= 0.0 && x.is_finite()) {
            return Err(Error::Domain {
                what: "age",
                value: x,
                domain: "[0, inf)",
            });
        }
        let h = self.grid.dt;
        let n = self.grid.steps();
        let k = ((t / h + 1e-9).floor() as usize).min(n);
        let mut rem = t - k as f64 * h;
        if rem < 1e-12 * h || k == n {
            rem = 0.0;
        }
        if x == 0.0 && rem == 0.0 {
            return Ok(self.trace[k]);
        }
        let shifted = x + rem;
        let (alpha, coeffs) = self.ray_tables(shifted, k);
        let mut v = self.march(
            self.initial(x + t),
            k,
            k,
            &alpha,
            &coeffs,
            |i| shifted + i as f64 * h,
        );
        if rem > 0.0 {
            let a0 = alpha[0];
            let a1 = self.model.alpha().eval(x);
            let w_t = self.trace[k] + (self.trace[k + 1] - self.trace[k]) * rem / h;
            let h0 = self.source(shifted, self.trace[k]);
            let h1 = self.source(x, w_t);
            v = self.step(v, a0, a1, &self.coeffs(a0, a1, rem), h0, h1, rem);
        }
        Ok(v)
    }

    fn eval(&self, t: f64, x: f64) -> Result<f64> {
        if t == 0.0 {
            self.check_time(t)?;
            return Ok((self.data)(x));
        }
        self.raw(t, x).map(|v| self.output(v))
    }

    /// Values at every grid time for a fixed age `x`.
    fn row_at_age(&self, x: f64) -> Vec<f64> {
        let n = self.grid.steps();
        if x == 0.0 {
            return self.trace.iter().map(|v| self.output(*v)).collect();
        }
        let h = self.grid.dt;
        let (alpha, coeffs) = self.ray_tables(x, n);
        let age = |i: usize| x + i as f64 * h;
        let mut out = Vec::with_capacity(n + 1);
        out.push((self.data)(x));
        for j in 1..=n {
            let v = self.march(self.initial(age(j)), j, j, &alpha, &coeffs, age);
            out.push(self.output(v));
        }
        out
    }

    fn boundary(&self) -> Vec<(f64, f64)> {
        self.trace
            .iter()
            .enumerate()
            .map(|(j, v)| (self.grid.time(j), if j == 0 { (self.data)(0.0) } else { self.output(*v) }))
            .collect()
    }

    fn write_boundary_csv<W: Write>(&self, mut out: W, column: &str) -> std::io::Result<()> {
        writeln!(out, "t,{column}")?;
        for (t, b) in self.boundary() {
            writeln!(out, "{t},{b}")?;
        }
        Ok(())
    }

    fn write_table_csv<W: Write>(&self, mut out: W, times: &[f64], xs: &[f64]) -> Result<()> {
        writeln!(out, "t,x,value")?;
        for &t in times {
            for &x in xs {
                writeln!(out, "{t},{x},{}", self.eval(t, x)?)?;
            }
        }
        Ok(())
    }
}

/// `φ₁(z) = (1 − e^{−z})/z` and `φ₂(z) = (z − 1 + e^{−z})/z²`, with series near zero.
fn phi_functions(z: f64) -> (f64, f64) {
    if z.abs() < 1e-3 {
        let phi1 = 1.0 - z / 2.0 + z * z / 6.0 - z * z * z / 24.0;
        let phi2 = 0.5 - z / 6.0 + z * z / 24.0 - z * z * z / 120.0;
        (phi1, phi2)
    } else {
        let e = (-z).exp_m1();
        (-e / z, (z + e) / (z * z))
    }
}

macro_rules! solution_common {
    ($name:ident, $column:literal) => {
        impl $name {
            pub fn grid(&self) -> &SolverGrid {
                &self.inner.grid
            }

            pub fn horizon(&self) -> f64 {
                self.inner.grid.t_max
            }

            pub fn model(&self) -> &BranchingModel {
                &self.inner.model
            }

            /// Nominal order of the scheme: 1 (rectangle) or 2 (trapezoid).
            pub fn order(&self) -> u32 {
                self.inner.grid.order()
            }

            /// `(t_j, value at (t_j, 0))` on the grid.
            pub fn boundary(&self) -> Vec<(f64, f64)> {
                self.inner.boundary()
            }

            /// Value at `(t, x)` for `0 ≤ t ≤ horizon`.
            pub fn eval(&self, t: f64, x: f64) -> Result<f64> {
                self.inner.eval(t, x)
            }

            /// Values at every grid time for the fixed age `x`.
            pub fn row_at_age(&self, x: f64) -> Vec<f64> {
                self.inner.row_at_age(x)
            }

            /// `⟨σ, value(t, ·)⟩`.
            pub fn integrate(&self, sigma: &AgeMeasure, t: f64) -> Result<f64> {
                sigma
                    .ages()
                    .iter()
                    .try_fold(0.0, |acc, &a| Ok(acc + self.inner.eval(t, a)?))
            }

            /// CSV with columns `t,<value>` along the boundary trace.
            pub fn write_boundary_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
                self.inner.write_boundary_csv(out, $column)
            }

            /// CSV with columns `t,x,value` on the product of `times` and `xs`.
            pub fn write_table_csv<W: Write>(&self, out: W, times: &[f64], xs: &[f64]) -> Result<()> {
                self.inner.write_table_csv(out, times, xs)
            }
        }
    };
}

/// `u_t f` on `[0, horizon] × ℝ₊`.
#[derive(Debug, Clone)]
pub struct CumulantSolution {
    inner: Characteristics,
}

/// `π_t f` on `[0, horizon] × ℝ₊`.
#[derive(Debug, Clone)]
pub struct MomentSolution {
    inner: Characteristics,
}

solution_common!(CumulantSolution, "b");
solution_common!(MomentSolution, "m");

impl CumulantSolution {
    /// `e^{−u_t f(x)}`, without the round trip through the logarithm.
    pub fn laplace(&self, t: f64, x: f64) -> Result<f64> {
        if t == 0.0 {
            return self.eval(t, x).map(|u| (-u).exp());
        }
        self.inner.raw(t, x)
    }
}

fn field_data(f: &ScalarField) -> Result<Data> {
    f.validate()?;
    let f = f.clone();
    Ok(Arc::new(move |x| f.eval(x)))
}

pub fn solve_u(model: &BranchingModel, f: &ScalarField, grid: &SolverGrid) -> Result<CumulantSolution> {
    Characteristics::build(model, field_data(f)?, grid, Kernel::Cumulant)
        .map(|inner| CumulantSolution { inner })
}

/// `u_t f` for initial data given as a closure, e.g. another solution.
pub fn solve_u_with(
    model: &BranchingModel,
    f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    grid: &SolverGrid,
) -> Result<CumulantSolution> {
    Characteristics::build(model, Arc::new(f), grid, Kernel::Cumulant)
        .map(|inner| CumulantSolution { inner })
}

pub fn solve_pi(model: &BranchingModel, f: &ScalarField, grid: &SolverGrid) -> Result<MomentSolution> {
    Characteristics::build(model, field_data(f)?, grid, Kernel::Moment)
        .map(|inner| MomentSolution { inner })
}
