//! Independent reference computations on plain dense arrays. Nothing here
//! calls into the library's numerics.

#![allow(dead_code)]

use altproj::dynamics::AlternatingChainSpec;

/// Dense row-major `nx × ny` joint.
#[derive(Clone, Debug)]
pub struct Dense {
    pub nx: usize,
    pub ny: usize,
    pub w: Vec<f64>,
}

impl Dense {
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.w[x * self.ny + y]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.nx)
            .map(|x| (0..self.ny).map(|y| self.at(x, y)).sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        (0..self.ny)
            .map(|y| (0..self.nx).map(|x| self.at(x, y)).sum())
            .collect()
    }
}

/// Plain kernels copied out of a spec: `ygx[x][y]` and `xgy[y][x]`.
pub struct Kernels {
    pub nx: usize,
    pub ny: usize,
    pub ygx: Vec<Vec<f64>>,
    pub xgy: Vec<Vec<f64>>,
}

impl Kernels {
    pub fn of(spec: &AlternatingChainSpec<f64>) -> Self {
        Self {
            nx: spec.nx(),
            ny: spec.ny(),
            ygx: spec.kernel_y_given_x().rows(),
            xgy: spec.kernel_x_given_y().rows(),
        }
    }

    /// Even `t` resamples `y` given `x`, odd `t` resamples `x` given `y`.
    pub fn step(&self, pi: &Dense, t: usize) -> Dense {
        let mut w = vec![0.0; self.nx * self.ny];
        if t.is_multiple_of(2) {
            let mu = pi.row_sums();
            for x in 0..self.nx {
                for y in 0..self.ny {
                    w[x * self.ny + y] = mu[x] * self.ygx[x][y];
                }
            }
        } else {
            let nu = pi.col_sums();
            for x in 0..self.nx {
                for y in 0..self.ny {
                    w[x * self.ny + y] = nu[y] * self.xgy[y][x];
                }
            }
        }
        let total: f64 = w.iter().sum();
        Dense {
            nx: self.nx,
            ny: self.ny,
            w: w.into_iter().map(|v| v / total).collect(),
        }
    }
}

/// `KL(p ‖ q)` with `0 log 0 = 0` and `+∞` on absolute-continuity failure.
pub fn kl(p: &[f64], q: &[f64]) -> f64 {
    let mut s = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a > 0.0 {
            if b <= 0.0 {
                return f64::INFINITY;
            }
            s += a * (a / b).ln();
        }
    }
    s
}

/// Reference `(d_joint, d_mu, d_nu)` rows for `steps` half-steps from `pi0`
/// against a given stationary joint.
pub fn reference_trace(k: &Kernels, pi0: &Dense, es: &Dense, steps: usize) -> Vec<[f64; 3]> {
    let mut pi = pi0.clone();
    let mut rows = Vec::with_capacity(steps + 1);
    for t in 0..=steps {
        rows.push([
            kl(&pi.w, &es.w),
            kl(&pi.row_sums(), &es.row_sums()),
            kl(&pi.col_sums(), &es.col_sums()),
        ]);
        if t < steps {
            pi = k.step(&pi, t);
        }
    }
    rows
}

pub fn dirac(nx: usize, ny: usize, x: usize, y: usize) -> Dense {
    let mut w = vec![0.0; nx * ny];
    w[x * ny + y] = 1.0;
    Dense { nx, ny, w }
}

/// Brute-force support propagation over every single-point start, with no
/// grouping shortcut. Returns the first `t` at which all starts cover `mask`.
pub fn brute_force_burn_in(k: &Kernels, mask: &[bool], cap: usize) -> Option<usize> {
    let starts: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
    let mut current: Vec<Vec<bool>> = starts
        .iter()
        .map(|&i| {
            let mut m = vec![false; mask.len()];
            m[i] = true;
            m
        })
        .collect();
    for t in 0..=cap {
        if current.iter().all(|c| c == mask) {
            return Some(t);
        }
        for c in current.iter_mut() {
            let pi = Dense {
                nx: k.nx,
                ny: k.ny,
                w: c.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
            };
            let next = k.step(&pi, t);
            *c = next.w.iter().map(|&v| v > 0.0).collect();
        }
    }
    None
}

/// Potts model enumerated directly: for each coloring (base-q, vertex 0 least
/// significant) and each edge subset bitmask, the Edwards-Sokal weight.
pub struct PottsEnumeration {
    pub colorings: usize,
    pub subsets: usize,
    /// `weights[x][a]`, normalized.
    pub weights: Vec<Vec<f64>>,
    /// Gibbs measure `∝ exp(−β · #bichromatic edges)`.
    pub gibbs: Vec<f64>,
}

pub fn enumerate_potts(
    vertices: usize,
    edges: &[(usize, usize)],
    q: usize,
    beta: f64,
) -> PottsEnumeration {
    let colorings = q.pow(vertices as u32);
    let subsets = 1usize << edges.len();
    let p = 1.0 - (-beta).exp();
    let mut weights = vec![vec![0.0; subsets]; colorings];
    let mut gibbs = vec![0.0; colorings];
    for (x, row) in weights.iter_mut().enumerate() {
        let mut colors = Vec::with_capacity(vertices);
        let mut rest = x;
        for _ in 0..vertices {
            colors.push(rest % q);
            rest /= q;
        }
        let bichromatic = edges
            .iter()
            .filter(|&&(u, v)| colors[u] != colors[v])
            .count();
        gibbs[x] = (-beta * bichromatic as f64).exp();
        for (a, w) in row.iter_mut().enumerate() {
            let mut weight = 1.0;
            for (i, &(u, v)) in edges.iter().enumerate() {
                let open = a >> i & 1 == 1;
                if open && colors[u] != colors[v] {
                    weight = 0.0;
                    break;
                }
                weight *= if open { p } else { 1.0 - p };
            }
            *w = weight;
        }
    }
    let z: f64 = weights.iter().flatten().sum();
    for row in weights.iter_mut() {
        for w in row.iter_mut() {
            *w /= z;
        }
    }
    let zg: f64 = gibbs.iter().sum();
    for g in gibbs.iter_mut() {
        *g /= zg;
    }
    PottsEnumeration {
        colorings,
        subsets,
        weights,
        gibbs,
    }
}
