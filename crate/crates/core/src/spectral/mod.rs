//! Principal Dirichlet eigenvalue of the two-dimensional drift-diffusion
//! generator on the half-plane `x > beta*y`, truncated to a box, plus a
//! paired Monte Carlo estimator for the same decay rate.
//!
//! The operator is `L = (1/2)(d2/dx2 + d2/dy2) - mu1 x d/dx - mu2 y d/dy`
//! with zero boundary values on the tilted line and on the outer box.
//! `-L` is discretized with central diffusion and first-order upwinded
//! drift, which keeps the matrix an M-matrix; the smallest eigenvalue is
//! found by inverse power iteration with ILU(0)-preconditioned BiCGStab
//! inner solves.

pub mod sparse;

use crate::error::{Error, Result};
use crate::paths::OuParams;
use crate::rng::RngStream;
use crate::survival::{Estimator, SurvivalCurve, SurvivalEntry};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use sparse::{bicgstab, Csr, Ilu0};

/// Discretization of the tilted-half-plane eigenproblem.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralProblem {
    pub mu1: f64,
    pub mu2: f64,
    pub beta: f64,
    /// Outer box half-width: the domain is `[-l, l]^2` intersected with
    /// `x > beta*y`.
    pub l: f64,
    /// Grid spacing; `2l/h` must be an integer.
    pub h: f64,
}

impl SpectralProblem {
    pub fn new(mu1: f64, mu2: f64, beta: f64, l: f64, h: f64) -> Result<SpectralProblem> {
        let p = SpectralProblem { mu1, mu2, beta, l, h };
        p.validate()?;
        Ok(p)
    }

    /// Defaults for the headline parameter sets: spacing 0.05 and a box
    /// sized by the slowest coordinate's stationary spread `1/sqrt(2 mu)`
    /// (six standard deviations, clamped to `[4, 8]`). Oversizing the box
    /// buys no accuracy -- the trapped mass near the edge is already
    /// `O(exp(-mu l^2))` -- and strongly advected outer cells only make the
    /// linear systems harder.
    pub fn with_defaults(mu1: f64, mu2: f64, beta: f64) -> Result<SpectralProblem> {
        let h = 0.05;
        if !(mu1 > 0.0) || !(mu2 > 0.0) {
            // let `new` produce the canonical parameter-domain error
            return SpectralProblem::new(mu1, mu2, beta, 8.0, h);
        }
        let sd = 1.0 / (2.0 * mu1.min(mu2)).sqrt();
        let l = (6.0 * sd).clamp(4.0, 8.0);
        let l = (2.0 * l / h).round() * h / 2.0; // whole number of cells
        SpectralProblem::new(mu1, mu2, beta, l, h)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu1 > 0.0) || !(self.mu2 > 0.0) {
            return Err(Error::ParameterDomain(format!(
                "restoring rates must be positive, got ({}, {})",
                self.mu1, self.mu2
            )));
        }
        if !self.beta.is_finite() {
            return Err(Error::ParameterDomain("slope must be finite".into()));
        }
        if !(self.l > 0.0) || !(self.h > 0.0) {
            return Err(Error::InvalidInput(format!(
                "need positive box and spacing, got l={}, h={}",
                self.l, self.h
            )));
        }
        let n = 2.0 * self.l / self.h;
        if (n - n.round()).abs() > 1e-9 || n.round() < 4.0 {
            return Err(Error::InvalidInput(format!(
                "box width 2l={} must be an integer multiple (>= 4) of h={}",
                2.0 * self.l,
                self.h
            )));
        }
        // cell Peclet guard: drift at the box corner against unit diffusion
        let peclet = 2.0 * self.mu1.max(self.mu2) * self.l * self.h;
        if peclet > 2.0 {
            return Err(Error::InvalidInput(format!(
                "cell Peclet {peclet:.2} > 2 at the box edge; refine h or shrink l"
            )));
        }
        Ok(())
    }

    fn n_cells(&self) -> usize {
        (2.0 * self.l / self.h).round() as usize
    }
}

/// Node bookkeeping for the box-with-tilted-cut domain.
struct Mesh {
    n: usize, // cells per side; nodes are 0..=n
    h: f64,
    l: f64,
    /// interior unknown index per node, usize::MAX outside the domain
    index: Vec<usize>,
    /// (i, j) per unknown
    nodes: Vec<(usize, usize)>,
}

impl Mesh {
    fn build(p: &SpectralProblem) -> Mesh {
        let n = p.n_cells();
        let mut index = vec![usize::MAX; (n + 1) * (n + 1)];
        let mut nodes = Vec::new();
        for j in 1..n {
            for i in 1..n {
                let x = -p.l + i as f64 * p.h;
                let y = -p.l + j as f64 * p.h;
                if x - p.beta * y > 1e-12 {
                    index[j * (n + 1) + i] = nodes.len();
                    nodes.push((i, j));
                }
            }
        }
        Mesh { n, h: p.h, l: p.l, index, nodes }
    }

    fn at(&self, i: usize, j: usize) -> usize {
        self.index[j * (self.n + 1) + i]
    }

    fn coords(&self, i: usize, j: usize) -> (f64, f64) {
        (-self.l + i as f64 * self.h, -self.l + j as f64 * self.h)
    }
}

/// Assemble `-L` over the interior unknowns (Dirichlet neighbors dropped).
/// `mu1 = mu2 = 0` is allowed here so conservation tests can probe the
/// pure-diffusion stencil; the public solver path validates positivity.
fn assemble(p: &SpectralProblem, mesh: &Mesh) -> Result<Csr> {
    let h = p.h;
    let h2 = h * h;
    let mut trips = Vec::with_capacity(mesh.nodes.len() * 5);
    for (row, &(i, j)) in mesh.nodes.iter().enumerate() {
        let (x, y) = mesh.coords(i, j);
        let mut diag = 2.0 / h2;
        let push = |ii: usize, jj: usize, coef: f64, trips: &mut Vec<(usize, usize, f64)>| {
            let col = mesh.at(ii, jj);
            if col != usize::MAX {
                trips.push((row, col, coef));
            }
        };
        // diffusion: -(1/2) second differences
        push(i - 1, j, -0.5 / h2, &mut trips);
        push(i + 1, j, -0.5 / h2, &mut trips);
        push(i, j - 1, -0.5 / h2, &mut trips);
        push(i, j + 1, -0.5 / h2, &mut trips);
        // drift terms of -L: +mu x du/dx, upwinded to keep off-diagonals <= 0
        let dx = p.mu1 * x;
        if dx >= 0.0 {
            diag += dx / h;
            push(i - 1, j, -dx / h, &mut trips);
        } else {
            diag += -dx / h;
            push(i + 1, j, dx / h, &mut trips);
        }
        let dy = p.mu2 * y;
        if dy >= 0.0 {
            diag += dy / h;
            push(i, j - 1, -dy / h, &mut trips);
        } else {
            diag += -dy / h;
            push(i, j + 1, dy / h, &mut trips);
        }
        trips.push((row, row, diag));
    }
    Csr::from_triplets(mesh.nodes.len(), &trips)
}

/// Outcome of the eigen solve.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenResult {
    pub lambda1: f64,
    /// Relative eigen-residual `||A v - lambda v|| / lambda ||v||`.
    pub residual: f64,
    /// Fraction of eigenvector mass within 3 cells of the outer box; large
    /// values mean the box truncates the mode and `l` should grow.
    pub boundary_mass: f64,
    pub iterations: usize,
    pub n_unknowns: usize,
}

const EIGEN_TOL: f64 = 1e-8;
const MAX_OUTER: usize = 60;

/// Smallest eigenvalue of the assembled operator by inverse power
/// iteration. On non-convergence the error message carries the last
/// eigenvalue estimate and residual.
pub fn principal_eigenvalue(p: &SpectralProblem) -> Result<EigenResult> {
    p.validate()?;
    let mesh = Mesh::build(p);
    if mesh.nodes.len() < 9 {
        return Err(Error::InvalidInput(format!(
            "domain resolved by only {} interior nodes",
            mesh.nodes.len()
        )));
    }
    let a = assemble(p, &mesh)?;
    let pre = Ilu0::factor(&a)?;
    let m = mesh.nodes.len();
    let mut v = vec![1.0; m];
    normalize(&mut v);
    let mut lambda = 0.0;
    let mut residual = f64::INFINITY;
    let mut av = vec![0.0; m];
    for it in 1..=MAX_OUTER {
        let w = bicgstab(&a, &pre, &v, &v, 1e-10, 2000)?.0;
        v = w;
        normalize(&mut v);
        a.matvec(&v, &mut av);
        lambda = v.iter().zip(&av).map(|(x, y)| x * y).sum::<f64>();
        let r2: f64 = av
            .iter()
            .zip(&v)
            .map(|(y, x)| (y - lambda * x).powi(2))
            .sum::<f64>();
        residual = r2.sqrt() / lambda.abs().max(1e-300);
        if residual < EIGEN_TOL {
            let boundary_mass = outer_mass(&mesh, &v, p.mu1, p.mu2);
            return Ok(EigenResult {
                lambda1: lambda,
                residual,
                boundary_mass,
                iterations: it,
                n_unknowns: m,
            });
        }
    }
    Err(Error::NonConvergence(format!(
        "inverse iteration stalled: lambda ~ {lambda:.6} with residual {residual:.2e} after {MAX_OUTER} sweeps"
    )))
}

/// Eigenvalue for unequal diffusivities: rescaling each coordinate by its
/// own sigma maps the problem to the unit-diffusivity one with slope
/// `beta * sigma2 / sigma1` and leaves the decay rate unchanged.
pub fn principal_eigenvalue_scaled(
    mu1: f64,
    mu2: f64,
    sigma1: f64,
    sigma2: f64,
    beta: f64,
    l: f64,
    h: f64,
) -> Result<EigenResult> {
    if !(sigma1 > 0.0) || !(sigma2 > 0.0) {
        return Err(Error::ParameterDomain(format!(
            "noise scales must be positive, got ({sigma1}, {sigma2})"
        )));
    }
    let p = SpectralProblem::new(mu1, mu2, beta * sigma2 / sigma1, l, h)?;
    principal_eigenvalue(&p)
}

fn normalize(v: &mut [f64]) {
    let n: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
}

/// Box-truncation diagnostic: quasi-stationary mass within 3 cells of the
/// outer boundary. The raw eigenvector grows linearly away from the kill
/// line, so its own mass legitimately concentrates at large radius; the
/// physically normalized profile multiplies in the restoring process's
/// Gaussian stationary weight, which must have decayed to nothing at the
/// box edge when `l` is large enough.
fn outer_mass(mesh: &Mesh, v: &[f64], mu1: f64, mu2: f64) -> f64 {
    let mut near = 0.0;
    let mut total = 0.0;
    for (k, &(i, j)) in mesh.nodes.iter().enumerate() {
        let (x, y) = mesh.coords(i, j);
        let a = v[k].abs() * (-mu1 * x * x - mu2 * y * y).exp();
        total += a;
        if i <= 3 || i + 3 >= mesh.n || j <= 3 || j + 3 >= mesh.n {
            near += a;
        }
    }
    if total > 0.0 {
        near / total
    } else {
        0.0
    }
}

/// 1D oracle: decay rate of the restoring diffusion above a flat barrier,
/// solved with the same discretization but a direct tridiagonal inverse
/// iteration. The exact rate is `mu` (eigenfunction `u(x) = x`).
pub fn solve_1d(mu: f64, l: f64, h: f64) -> Result<f64> {
    if !(mu > 0.0) {
        return Err(Error::ParameterDomain(format!("rate {mu} must be positive")));
    }
    let n = (l / h).round() as usize;
    if n < 4 || ((l / h) - n as f64).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!("l={l} must be an integer multiple of h={h}")));
    }
    let m = n - 1; // unknowns at x = h..(l-h)
    let h2 = h * h;
    let mut diag = vec![0.0; m];
    let mut sub = vec![0.0; m];
    let mut sup = vec![0.0; m];
    for k in 0..m {
        let x = (k + 1) as f64 * h;
        diag[k] = 1.0 / h2 + mu * x / h;
        sub[k] = -0.5 / h2 - mu * x / h;
        sup[k] = -0.5 / h2;
    }
    let mut v = vec![1.0; m];
    normalize(&mut v);
    let mut lambda = 0.0;
    for _ in 0..200 {
        let w = thomas(&sub, &diag, &sup, &v)?;
        v = w;
        normalize(&mut v);
        // Rayleigh quotient
        let mut av = vec![0.0; m];
        for k in 0..m {
            av[k] = diag[k] * v[k]
                + if k > 0 { sub[k] * v[k - 1] } else { 0.0 }
                + if k + 1 < m { sup[k] * v[k + 1] } else { 0.0 };
        }
        let new = v.iter().zip(&av).map(|(x, y)| x * y).sum::<f64>();
        let resid: f64 = av
            .iter()
            .zip(&v)
            .map(|(y, x)| (y - new * x).powi(2))
            .sum::<f64>()
            .sqrt();
        lambda = new;
        if resid < 1e-12 * new.abs().max(1.0) {
            break;
        }
    }
    Ok(lambda)
}

fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut x = vec![0.0; n];
    c[0] = sup[0] / diag[0];
    d[0] = b[0] / diag[0];
    for k in 1..n {
        let denom = diag[k] - sub[k] * c[k - 1];
        if denom == 0.0 {
            return Err(Error::NonConvergence("singular tridiagonal system".into()));
        }
        c[k] = sup[k] / denom;
        d[k] = (b[k] - sub[k] * d[k - 1]) / denom;
    }
    x[n - 1] = d[n - 1];
    for k in (0..n - 1).rev() {
        x[k] = d[k] - c[k] * x[k + 1];
    }
    Ok(x)
}

/// Monte Carlo estimate of the paired survival probability
/// `P(X_t > beta * Y_t on [0, T])` for independent restoring diffusions
/// `X` (rate `mu1`) and `Y` (rate `mu2`), with a within-step crossing
/// correction on the gap coordinate. The long-horizon slope of `-log p`
/// against `t` estimates the same rate as the eigen solve.
#[allow(clippy::too_many_arguments)]
pub fn annealed_mc(
    mu1: f64,
    mu2: f64,
    beta: f64,
    x0: f64,
    y0: f64,
    dt: f64,
    horizons: &[f64],
    window: Option<(f64, f64)>,
    samples: usize,
    stream: RngStream,
) -> Result<SurvivalCurve> {
    if !(mu1 > 0.0) || !(mu2 > 0.0) {
        return Err(Error::ParameterDomain(format!(
            "restoring rates must be positive, got ({mu1}, {mu2})"
        )));
    }
    if !(dt > 0.0) || samples < 100 {
        return Err(Error::InvalidInput(format!(
            "need dt > 0 and >= 100 samples, got dt={dt}, samples={samples}"
        )));
    }
    if horizons.is_empty() || horizons.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("horizons must be strictly increasing".into()));
    }
    if let Some((a, b)) = window {
        if !(a < b) {
            return Err(Error::InvalidInput(format!("empty gap window ({a}, {b})")));
        }
    }
    if x0 - beta * y0 <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "start gap {} must be positive",
            x0 - beta * y0
        )));
    }
    let steps: Vec<usize> = horizons
        .iter()
        .map(|&t| {
            let s = t / dt;
            if (s - s.round()).abs() > 1e-9 * s.max(1.0) || s.round() < 1.0 {
                return Err(Error::InvalidInput(format!(
                    "horizon {t} is not a positive multiple of dt={dt}"
                )));
            }
            Ok(s.round() as usize)
        })
        .collect::<Result<_>>()?;
    let px = OuParams::new(mu1, 1.0)?;
    let py = OuParams::new(mu2, 1.0)?;
    let var_gap = 1.0 + beta * beta;
    let n_steps = *steps.last().unwrap();
    let mut rng = stream.rng();
    let mut alive_counts = vec![0u64; steps.len()];
    for _ in 0..samples {
        let (mut x, mut y) = (x0, y0);
        let mut gap = x - beta * y;
        let mut alive = true;
        let mut k = 0usize;
        for step in 1..=n_steps {
            let (mx, vx) = px.transition(x, dt);
            let (my, vy) = py.transition(y, dt);
            let zx: f64 = StandardNormal.sample(&mut rng);
            let zy: f64 = StandardNormal.sample(&mut rng);
            let nx = mx + vx.sqrt() * zx;
            let ny = my + vy.sqrt() * zy;
            let new_gap = nx - beta * ny;
            if new_gap <= 0.0 {
                alive = false;
            } else {
                // within-step crossing of the gap across 0
                let p_cross = (-2.0 * gap * new_gap / (var_gap * dt)).exp();
                if rng.random::<f64>() < p_cross {
                    alive = false;
                }
            }
            if !alive {
                break;
            }
            x = nx;
            y = ny;
            gap = new_gap;
            while k < steps.len() && steps[k] == step {
                let inside = match window {
                    None => true,
                    Some((a, b)) => gap > a && gap < b,
                };
                if inside {
                    alive_counts[k] += 1;
                }
                k += 1;
            }
        }
    }
    let entries = steps
        .iter()
        .zip(&alive_counts)
        .map(|(&s, &c)| {
            let t = s as f64 * dt;
            if c == 0 {
                SurvivalEntry {
                    horizon: t,
                    log_p: f64::NEG_INFINITY,
                    stderr: f64::INFINITY,
                    estimator: Estimator::Direct,
                    died: false,
                    low_ess: true,
                }
            } else {
                let p = c as f64 / samples as f64;
                SurvivalEntry {
                    horizon: t,
                    log_p: p.ln(),
                    stderr: ((1.0 - p) / (samples as f64 * p)).sqrt(),
                    estimator: Estimator::Direct,
                    died: false,
                    low_ess: c < 10,
                }
            }
        })
        .collect();
    Ok(SurvivalCurve { entries })
}

/// One CSV line per solved problem.
pub fn eigen_csv_header() -> &'static str {
    "mu1,mu2,beta,lambda1,residual,boundary_mass,l,h"
}

pub fn eigen_csv_line(p: &SpectralProblem, r: &EigenResult) -> String {
    format!(
        "{},{},{},{},{},{},{},{}",
        p.mu1, p.mu2, p.beta, r.lambda1, r.residual, r.boundary_mass, p.l, p.h
    )
}
