use std::fmt;
use std::sync::Arc;

use crate::error::Result;
use crate::model::kernel::Kernel;
use crate::quadrature;
use crate::scalar::Real;
use crate::state::HState;

pub type CustomFn<T> = Arc<dyn Fn(T, T) -> T + Send + Sync>;

/// Bilinear table `f₀(x, y)` on a rectangular node set, clamped outside the table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table<T> {
    pub x_nodes: Vec<T>,
    pub y_nodes: Vec<T>,
    /// Row-major, `values[i * y_nodes.len() + j] = f₀(x_i, y_j)`.
    pub values: Vec<T>,
}

impl<T: Real> Table<T> {
    fn locate(nodes: &[T], v: T) -> (usize, T) {
        let last = nodes.len() - 1;
        if last == 0 || v <= nodes[0] {
            return (0, T::zero());
        }
        if v >= nodes[last] {
            return (last.saturating_sub(1), T::one());
        }
        let i = nodes.partition_point(|&x| x <= v).saturating_sub(1).min(last - 1);
        (i, (v - nodes[i]) / (nodes[i + 1] - nodes[i]))
    }

    pub fn eval(&self, x: T, y: T) -> T {
        let ny = self.y_nodes.len();
        let at = |i: usize, j: usize| self.values[i * ny + j];
        let (i, fx) = Self::locate(&self.x_nodes, x);
        let (j, fy) = Self::locate(&self.y_nodes, y);
        let i1 = (i + 1).min(self.x_nodes.len() - 1);
        let j1 = (j + 1).min(ny - 1);
        let one = T::one();
        at(i, j) * (one - fx) * (one - fy)
            + at(i1, j) * fx * (one - fy)
            + at(i, j1) * (one - fx) * fy
            + at(i1, j1) * fx * fy
    }

    /// Largest cell slope in either direction; a Lipschitz bound for the interpolant.
    pub fn max_slope(&self) -> T {
        let ny = self.y_nodes.len();
        let mut m = T::zero();
        for i in 0..self.x_nodes.len() {
            for j in 0..ny {
                let v = self.values[i * ny + j];
                if i + 1 < self.x_nodes.len() {
                    let dx = self.x_nodes[i + 1] - self.x_nodes[i];
                    m = m.max(((self.values[(i + 1) * ny + j] - v) / dx).abs());
                }
                if j + 1 < ny {
                    let dy = self.y_nodes[j + 1] - self.y_nodes[j];
                    m = m.max(((self.values[i * ny + j + 1] - v) / dy).abs());
                }
            }
        }
        m
    }
}

/// The drift nonlinearity `f₀(x, y)`; `y` stands for the delay integral `∫ a(ξ) x(t+ξ) dξ`.
#[derive(Clone)]
pub enum Nonlinearity<T> {
    /// `a1 · min(x, cap) + a2 · min(y, cap) + b`.
    AffineSaturating { a1: T, a2: T, cap: T, b: T },
    Table(Table<T>),
    /// Arbitrary closure, mainly for planting hypothesis violations in tests.
    Custom(CustomFn<T>),
}

impl<T: fmt::Debug> fmt::Debug for Nonlinearity<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Nonlinearity::AffineSaturating { a1, a2, cap, b } => f
                .debug_struct("AffineSaturating")
                .field("a1", a1)
                .field("a2", a2)
                .field("cap", cap)
                .field("b", b)
                .finish(),
            Nonlinearity::Table(t) => f.debug_tuple("Table").field(t).finish(),
            Nonlinearity::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl<T: Real> Nonlinearity<T> {
    pub fn affine(a1: T, a2: T, cap: T, b: T) -> Self {
        Nonlinearity::AffineSaturating { a1, a2, cap, b }
    }

    /// `f₀ ≡ 0`; hypothesis-exempt, for analytic oracles.
    pub fn zero() -> Self {
        Self::affine(T::zero(), T::zero(), T::infinity(), T::zero())
    }

    pub fn custom(f: impl Fn(T, T) -> T + Send + Sync + 'static) -> Self {
        Nonlinearity::Custom(Arc::new(f))
    }

    /// A Lipschitz constant w.r.t. `|Δx| + |Δy|`, when one is known in closed form.
    pub fn lipschitz_bound(&self) -> Option<T> {
        match self {
            Nonlinearity::AffineSaturating { a1, a2, .. } => Some(a1.abs().max(a2.abs())),
            Nonlinearity::Table(t) => Some(t.max_slope()),
            Nonlinearity::Custom(_) => None,
        }
    }

    fn raw(&self, x: T, y: T) -> T {
        match self {
            Nonlinearity::AffineSaturating { a1, a2, cap, b } => {
                *a1 * x.min(*cap) + *a2 * y.min(*cap) + *b
            }
            Nonlinearity::Table(t) => t.eval(x, y),
            Nonlinearity::Custom(f) => f(x, y),
        }
    }
}

/// `f₀(x, y)` with the extension `f₀(x, y) = f₀(0, y)` for `x < 0`.
pub fn eval_f0<T: Real>(nl: &Nonlinearity<T>, x: T, y: T) -> T {
    nl.raw(x.max(T::zero()), y)
}

/// The delay integral `∫ a(ξ) η₁(ξ) dξ` by the trapezoid rule.
pub fn delay_integral<T: Real>(kernel: &Kernel<T>, eta1: &[T]) -> T {
    quadrature::trapezoid_product(&kernel.samples, eta1, kernel.dxi)
}

/// `f(η) = f₀(η₀, ∫ a η₁)`.
pub fn eval_drift<T: Real>(nl: &Nonlinearity<T>, kernel: &Kernel<T>, eta: &HState<T>) -> Result<T> {
    if eta.n() != kernel.n() || (eta.dxi - kernel.dxi).abs() > T::roundoff() * kernel.dxi {
        return Err(crate::Error::GridMismatch {
            expected: kernel.n(),
            found: eta.n(),
            expected_dxi: kernel.dxi.as_f64(),
            found_dxi: eta.dxi.as_f64(),
        });
    }
    Ok(eval_f0(nl, eta.eta0, delay_integral(kernel, &eta.eta1)))
}
