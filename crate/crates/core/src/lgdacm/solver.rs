//! Local Gaussian distribution fitting: statistics, energy and gradient flow.
//!
//! With `M1 = H(phi)`, `M2 = 1 - H(phi)` and a normalized Gaussian window
//! `w`, each region has local mean `u_i = w*(I M_i) / w*M_i` and variance
//! `v_i = w*(I^2 M_i) / w*M_i - u_i^2` at every pixel. The data energy is
//!
//! ```text
//! sum_x lambda_i M_i(x) sum_y w(y - x) [ log sqrt(2 pi v_i(y)) + (u_i(y) - I(x))^2 / (2 v_i(y)) ]
//! ```
//!
//! Convolutions use a zero border, so only in-grid samples contribute. The
//! window `w*1` over the whole image, `w*I` and `w*I^2` are computed once;
//! the outside-region sums follow by subtraction.

use crate::error::{Error, Result};
use crate::filter::{central_gradient, convolve_separable, gaussian_kernel, laplacian, Border};
use crate::grid::Grid;
use crate::scalar::Real;
use crate::volume::SliceImage;

use super::{LevelSetField, LgdParams};

/// Floor on window weights before division.
pub const DENOM_FLOOR: f64 = 1e-12;
/// Floor on `|grad phi|` inside the curvature.
pub const GRAD_FLOOR: f64 = 1e-10;

pub fn heaviside<T: Real>(z: T, eps: T) -> T {
    let half = T::lit(0.5);
    half * (T::one() + T::FRAC_2_PI() * (z / eps).atan())
}

pub fn dirac<T: Real>(z: T, eps: T) -> T {
    eps / (T::PI() * (eps * eps + z * z))
}

/// Local means and variances of the inside (1) and outside (2) regions.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalStats<T> {
    pub u1: Grid<T>,
    pub u2: Grid<T>,
    pub var1: Grid<T>,
    pub var2: Grid<T>,
}

/// Window sums `w*M`, `w*(I M)`, `w*(I^2 M)` for one region.
struct RegionSums<T> {
    s0: Grid<T>,
    s1: Grid<T>,
    s2: Grid<T>,
}

/// Image-dependent state shared by every iteration.
pub(crate) struct Lgd<'a, T> {
    img: &'a Grid<T>,
    p: &'a LgdParams,
    taps: Vec<T>,
    img2: Grid<T>,
    all: RegionSums<T>,
}

impl<'a, T: Real> Lgd<'a, T> {
    pub(crate) fn new(img: &'a Grid<T>, p: &'a LgdParams) -> Self {
        let taps = gaussian_kernel(T::lit(p.kernel_sigma), T::lit(4.0));
        let img2 = img.map(|v| v * v);
        let conv = |g: &Grid<T>| convolve_separable(g, &taps, Border::Zero);
        let all = RegionSums {
            s0: conv(&Grid::filled(img.rows(), img.cols(), T::one())),
            s1: conv(img),
            s2: conv(&img2),
        };
        Lgd { img, p, taps, img2, all }
    }

    fn conv(&self, g: &Grid<T>) -> Grid<T> {
        convolve_separable(g, &self.taps, Border::Zero)
    }

    fn sums(&self, h: &Grid<T>) -> (RegionSums<T>, RegionSums<T>) {
        let inside = RegionSums {
            s0: self.conv(h),
            s1: self.conv(&h.zip_map(self.img, |m, i| m * i)),
            s2: self.conv(&h.zip_map(&self.img2, |m, i2| m * i2)),
        };
        let sub = |a: &Grid<T>, b: &Grid<T>| a.zip_map(b, |x, y| x - y);
        let outside = RegionSums {
            s0: sub(&self.all.s0, &inside.s0),
            s1: sub(&self.all.s1, &inside.s1),
            s2: sub(&self.all.s2, &inside.s2),
        };
        (inside, outside)
    }

    fn moments(&self, s: &RegionSums<T>) -> (Grid<T>, Grid<T>) {
        let floor = T::lit(DENOM_FLOOR);
        let vfloor = T::lit(self.p.sigma_floor);
        let two = T::lit(2.0);
        let n = s.s0.len();
        let (mut u, mut v) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for k in 0..n {
            let d = s.s0.as_slice()[k].max(floor);
            let m1 = s.s1.as_slice()[k] / d;
            let m2 = s.s2.as_slice()[k] / d;
            u.push(m1);
            v.push((m2 - two * m1 * m1 + m1 * m1).max(vfloor));
        }
        let (rows, cols) = s.s0.shape();
        (Grid::from_vec(rows, cols, u), Grid::from_vec(rows, cols, v))
    }

    fn heaviside_field(&self, phi: &Grid<T>) -> Grid<T> {
        let eps = T::lit(self.p.epsilon);
        phi.map(|z| heaviside(z, eps))
    }

    pub(crate) fn stats(&self, phi: &Grid<T>) -> LocalStats<T> {
        let (inside, outside) = self.sums(&self.heaviside_field(phi));
        let (u1, var1) = self.moments(&inside);
        let (u2, var2) = self.moments(&outside);
        LocalStats { u1, u2, var1, var2 }
    }

    /// Per-pixel coefficients `(log sqrt(2 pi v) + u^2/(2v), 1/(2v), u/(2v))`.
    fn coefficients(u: &Grid<T>, v: &Grid<T>) -> (Grid<T>, Grid<T>, Grid<T>) {
        let two = T::lit(2.0);
        let two_pi = T::lit(2.0) * T::PI();
        let half = T::lit(0.5);
        let b = v.map(|v| T::one() / (two * v));
        let c = u.zip_map(&b, |u, b| u * b);
        let ad = Grid::from_fn(u.rows(), u.cols(), |r, col| {
            let (u, v, b) = (u.get(r, col), v.get(r, col), b.get(r, col));
            half * (two_pi * v).ln() + u * u * b
        });
        (ad, b, c)
    }

    /// `e_i(x)` for both regions, by the convolution expansion.
    pub(crate) fn energy_fields(&self, st: &LocalStats<T>) -> (Grid<T>, Grid<T>) {
        let field = |u: &Grid<T>, v: &Grid<T>| {
            let (ad, b, c) = Self::coefficients(u, v);
            let (wad, wb, wc) = (self.conv(&ad), self.conv(&b), self.conv(&c));
            let two = T::lit(2.0);
            Grid::from_fn(u.rows(), u.cols(), |r, col| {
                let i = self.img.get(r, col);
                wad.get(r, col) + i * i * wb.get(r, col) - two * i * wc.get(r, col)
            })
        };
        (field(&st.u1, &st.var1), field(&st.u2, &st.var2))
    }

    /// `lambda1 e1 - lambda2 e2`, using linearity to convolve each
    /// coefficient field once.
    fn data_force(&self, st: &LocalStats<T>) -> Grid<T> {
        let (l1, l2) = (T::lit(self.p.lambda1), T::lit(self.p.lambda2));
        let (ad1, b1, c1) = Self::coefficients(&st.u1, &st.var1);
        let (ad2, b2, c2) = Self::coefficients(&st.u2, &st.var2);
        let mix = |x: &Grid<T>, y: &Grid<T>| x.zip_map(y, |x, y| l1 * x - l2 * y);
        let wad = self.conv(&mix(&ad1, &ad2));
        let wb = self.conv(&mix(&b1, &b2));
        let wc = self.conv(&mix(&c1, &c2));
        let two = T::lit(2.0);
        Grid::from_fn(self.img.rows(), self.img.cols(), |r, col| {
            let i = self.img.get(r, col);
            wad.get(r, col) + i * i * wb.get(r, col) - two * i * wc.get(r, col)
        })
    }

    /// Full energy. The data term is evaluated through the window adjoint,
    /// `sum_x M(x) (w*f)(x) = sum_y f(y) (w*M)(y)`, which reuses the window
    /// sums already needed for the statistics.
    fn energy_from(&self, phi: &Grid<T>, h: &Grid<T>, sums: &(RegionSums<T>, RegionSums<T>)) -> T {
        let region = |s: &RegionSums<T>| {
            let (u, v) = self.moments(s);
            let (ad, b, c) = Self::coefficients(&u, &v);
            let two = T::lit(2.0);
            let mut acc = T::zero();
            for k in 0..u.len() {
                acc = acc + ad.as_slice()[k] * s.s0.as_slice()[k] + b.as_slice()[k] * s.s2.as_slice()[k]
                    - two * c.as_slice()[k] * s.s1.as_slice()[k];
            }
            acc
        };
        let data = T::lit(self.p.lambda1) * region(&sums.0) + T::lit(self.p.lambda2) * region(&sums.1);
        data + self.regularization_energy(phi, h)
    }

    fn regularization_energy(&self, phi: &Grid<T>, h: &Grid<T>) -> T {
        let (hr, hc) = central_gradient(h);
        let length: T = hr.as_slice().iter().zip(hc.as_slice()).map(|(a, b)| (*a * *a + *b * *b).sqrt()).sum();
        let (pr, pc) = central_gradient(phi);
        let half = T::lit(0.5);
        let dist: T = pr
            .as_slice()
            .iter()
            .zip(pc.as_slice())
            .map(|(a, b)| {
                let g = (*a * *a + *b * *b).sqrt() - T::one();
                half * g * g
            })
            .sum();
        T::lit(self.p.nu) * length + T::lit(self.p.mu) * dist
    }

    pub(crate) fn energy(&self, phi: &Grid<T>) -> T {
        let h = self.heaviside_field(phi);
        let sums = self.sums(&h);
        self.energy_from(phi, &h, &sums)
    }

    /// One explicit Euler step; optionally also the energy of the input field.
    fn step(&self, phi: &Grid<T>, with_energy: bool) -> (Grid<T>, Option<T>) {
        let h = self.heaviside_field(phi);
        let sums = self.sums(&h);
        let energy = with_energy.then(|| self.energy_from(phi, &h, &sums));
        let (u1, var1) = self.moments(&sums.0);
        let (u2, var2) = self.moments(&sums.1);
        let force = self.data_force(&LocalStats { u1, u2, var1, var2 });
        let kappa = curvature(phi);
        let lap = laplacian(phi);
        let p = self.p;
        let (tau, nu, mu, eps) = (T::lit(p.tau), T::lit(p.nu), T::lit(p.mu), T::lit(p.epsilon));
        let next = Grid::from_fn(phi.rows(), phi.cols(), |r, c| {
            let z = phi.get(r, c);
            let d = dirac(z, eps);
            let k = kappa.get(r, c);
            z + tau * (-d * force.get(r, c) + nu * d * k + mu * (lap.get(r, c) - k))
        });
        (next, energy)
    }
}

/// `div(grad phi / |grad phi|)` by central differences, replicated border.
pub fn curvature<T: Real>(phi: &Grid<T>) -> Grid<T> {
    let (gr, gc) = central_gradient(phi);
    let floor = T::lit(GRAD_FLOOR);
    let norm = gr.zip_map(&gc, |a, b| (a * a + b * b).sqrt().max(floor));
    let nr = gr.zip_map(&norm, |a, n| a / n);
    let nc = gc.zip_map(&norm, |a, n| a / n);
    let (nrr, _) = central_gradient(&nr);
    let (_, ncc) = central_gradient(&nc);
    nrr.zip_map(&ncc, |a, b| a + b)
}

fn check_shapes<T: Real>(img: &Grid<T>, phi: &Grid<T>) -> Result<()> {
    if img.shape() != phi.shape() {
        return Err(Error::ShapeMismatch {
            expected: (img.rows(), img.cols(), 1),
            found: (phi.rows(), phi.cols(), 1),
        });
    }
    Ok(())
}

pub fn local_gaussian_stats<T: Real>(img: &SliceImage<T>, phi: &LevelSetField<T>, p: &LgdParams) -> Result<LocalStats<T>> {
    check_shapes(&img.pixels, &phi.phi)?;
    Ok(Lgd::new(&img.pixels, p).stats(&phi.phi))
}

/// `(e1, e2)` by the convolution expansion.
pub fn local_energy_fields<T: Real>(img: &SliceImage<T>, phi: &LevelSetField<T>, p: &LgdParams) -> Result<(Grid<T>, Grid<T>)> {
    check_shapes(&img.pixels, &phi.phi)?;
    let lgd = Lgd::new(&img.pixels, p);
    Ok(lgd.energy_fields(&lgd.stats(&phi.phi)))
}

pub fn lgd_energy<T: Real>(img: &SliceImage<T>, phi: &LevelSetField<T>, p: &LgdParams) -> Result<T> {
    check_shapes(&img.pixels, &phi.phi)?;
    Ok(Lgd::new(&img.pixels, p).energy(&phi.phi))
}

/// Runs `iters` steps. With `full_trace` the energy is recorded before every
/// step and after the last; otherwise only the first and last are.
pub(crate) fn run<T: Real>(
    img: &SliceImage<T>,
    phi0: &LevelSetField<T>,
    p: &LgdParams,
    iters: usize,
    full_trace: bool,
) -> Result<(LevelSetField<T>, Vec<T>)> {
    check_shapes(&img.pixels, &phi0.phi)?;
    let lgd = Lgd::new(&img.pixels, p);
    let mut phi = phi0.phi.clone();
    let mut trace = Vec::with_capacity(if full_trace { iters + 1 } else { 2 });
    for it in 0..iters {
        let (next, e) = lgd.step(&phi, full_trace || it == 0);
        trace.extend(e);
        if next.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteField { iteration: it + 1 });
        }
        phi = next;
    }
    trace.push(lgd.energy(&phi));
    Ok((LevelSetField { phi }, trace))
}

/// `iters` steps of the gradient flow, plus the energy before every step
/// and after the last (`iters + 1` values).
pub fn evolve_with_trace<T: Real>(
    img: &SliceImage<T>,
    phi0: &LevelSetField<T>,
    p: &LgdParams,
    iters: usize,
) -> Result<(LevelSetField<T>, Vec<T>)> {
    run(img, phi0, p, iters, true)
}

pub fn evolve_level_set<T: Real>(img: &SliceImage<T>, phi0: &LevelSetField<T>, p: &LgdParams, iters: usize) -> Result<LevelSetField<T>> {
    Ok(run(img, phi0, p, iters, false)?.0)
}
