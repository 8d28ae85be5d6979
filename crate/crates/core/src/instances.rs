//! Instance generators: seeded random ergodic chains and the Edwards-Sokal
//! coupling of the Potts model on small graphs (Swendsen-Wang dynamics).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::AlternatingChainSpec;
use crate::error::{Error, Result};
use crate::measures::{conditional, ConditionalKernel, Direction, JointMeasure, SupportSet};
use crate::scalar::{compensated_sum, Real};

/// Default cap on `|X| · |Y|` for generated instances.
pub const DEFAULT_MAX_STATES: usize = 200_000;
/// Masks redrawn before giving up on finding an ergodic random instance.
pub const MAX_GENERATION_ATTEMPTS: usize = 100;

const WEIGHT_LOW: f64 = 0.1;
const WEIGHT_HIGH: f64 = 1.0;

/// A random spec together with the joint it was derived from.
#[derive(Clone, Debug)]
pub struct GeneratedInstance<T> {
    pub spec: AlternatingChainSpec<T>,
    pub joint: JointMeasure<T>,
}

fn validate_random_params(nx: usize, ny: usize, density: f64) -> Result<()> {
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidParameter(format!(
            "state counts must be positive, got {nx}x{ny}"
        )));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "density must lie in (0, 1], got {density}"
        )));
    }
    Ok(())
}

/// Draws a mask with roughly `density` of the pairs (rows and columns are
/// patched to be nonempty) and weights uniform on `[0.1, 1]`, normalized.
pub fn random_joint<T: Real, R: Rng>(
    nx: usize,
    ny: usize,
    density: f64,
    rng: &mut R,
) -> Result<JointMeasure<T>> {
    validate_random_params(nx, ny, density)?;
    let mut mask: Vec<bool> = (0..nx * ny)
        .map(|_| density >= 1.0 || rng.gen::<f64>() < density)
        .collect();
    for x in 0..nx {
        if !mask[x * ny..(x + 1) * ny].contains(&true) {
            let y = rng.gen_range(0..ny);
            mask[x * ny + y] = true;
        }
    }
    for y in 0..ny {
        if !(0..nx).any(|x| mask[x * ny + y]) {
            let x = rng.gen_range(0..nx);
            mask[x * ny + y] = true;
        }
    }
    let raw: Vec<T> = mask
        .iter()
        .map(|&m| {
            if m {
                T::lit(rng.gen_range(WEIGHT_LOW..=WEIGHT_HIGH))
            } else {
                T::zero()
            }
        })
        .collect();
    let total = compensated_sum(raw.iter().copied());
    let weights = raw.into_iter().map(|w| w / total).collect();
    JointMeasure::probability(SupportSet::new(nx, ny, mask)?, weights)
}

/// Seeded random ergodic spec; see [`random_instance_with_joint`].
pub fn random_instance<T: Real>(
    nx: usize,
    ny: usize,
    density: f64,
    seed: u64,
) -> Result<AlternatingChainSpec<T>> {
    random_instance_with_joint(nx, ny, density, seed).map(|g| g.spec)
}

/// Redraws masks until the induced primal chain is ergodic, at most
/// [`MAX_GENERATION_ATTEMPTS`] times. Identical arguments give identical output.
pub fn random_instance_with_joint<T: Real>(
    nx: usize,
    ny: usize,
    density: f64,
    seed: u64,
) -> Result<GeneratedInstance<T>> {
    validate_random_params(nx, ny, density)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_GENERATION_ATTEMPTS {
        let joint = random_joint::<T, _>(nx, ny, density, &mut rng)?;
        let kernels = (
            conditional(&joint, Direction::YGivenX)?,
            conditional(&joint, Direction::XGivenY)?,
        );
        match AlternatingChainSpec::new(kernels.0, kernels.1) {
            Ok(spec) => return Ok(GeneratedInstance { spec, joint }),
            Err(Error::NotErgodic { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::GenerationFailed {
        attempts: MAX_GENERATION_ATTEMPTS,
    })
}

/// q-state Potts model on a small graph at inverse temperature `beta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PottsInstance {
    pub vertices: usize,
    pub edges: Vec<(usize, usize)>,
    pub q: usize,
    pub beta: f64,
}

impl PottsInstance {
    pub fn new(vertices: usize, edges: Vec<(usize, usize)>, q: usize, beta: f64) -> Result<Self> {
        if vertices == 0 || q == 0 {
            return Err(Error::InvalidParameter(
                "Potts model needs at least one vertex and one color".into(),
            ));
        }
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "inverse temperature must be finite and nonnegative, got {beta}"
            )));
        }
        for &(u, v) in &edges {
            if u >= vertices || v >= vertices || u == v {
                return Err(Error::InvalidParameter(format!("bad edge {u}-{v}")));
            }
        }
        if edges.len() >= 64 {
            return Err(Error::InvalidParameter(
                "at most 63 edges are supported".into(),
            ));
        }
        Ok(Self {
            vertices,
            edges,
            q,
            beta,
        })
    }

    /// Bond probability `p = 1 − e^{−β}`.
    pub fn edge_probability(&self) -> f64 {
        -(-self.beta).exp_m1()
    }

    pub fn colorings(&self) -> Option<usize> {
        u32::try_from(self.vertices)
            .ok()
            .and_then(|v| self.q.checked_pow(v))
    }

    pub fn edge_subsets(&self) -> usize {
        1usize << self.edges.len()
    }

    /// `q^V · 2^|E|`, or `None` on overflow.
    pub fn state_count(&self) -> Option<usize> {
        self.colorings()?.checked_mul(self.edge_subsets())
    }
}

/// Colors of each vertex for coloring index `index` (base-q, little-endian).
pub fn decode_coloring(index: usize, vertices: usize, q: usize) -> Vec<usize> {
    let mut rest = index;
    (0..vertices)
        .map(|_| {
            let c = rest % q;
            rest /= q;
            c
        })
        .collect()
}

/// Bitmask (edge-list order) of edges whose endpoints share a color.
pub fn monochromatic_edges(colors: &[usize], edges: &[(usize, usize)]) -> u64 {
    edges
        .iter()
        .enumerate()
        .filter(|(_, &(u, v))| colors[u] == colors[v])
        .fold(0u64, |m, (i, _)| m | (1 << i))
}

/// Connected components of `(V, A)` for an edge subset bitmask `A`.
pub fn component_count(vertices: usize, edges: &[(usize, usize)], subset: u64) -> usize {
    let mut parent: Vec<usize> = (0..vertices).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let mut components = vertices;
    for (i, &(u, v)) in edges.iter().enumerate() {
        if subset & (1 << i) != 0 {
            let (a, b) = (find(&mut parent, u), find(&mut parent, v));
            if a != b {
                parent[a] = b;
                components -= 1;
            }
        }
    }
    components
}

/// A Potts spec plus the map from `Y` indices back to edge subsets. For
/// `β = 0` only the empty subset survives pruning.
#[derive(Clone, Debug)]
pub struct PottsSpec<T> {
    pub spec: AlternatingChainSpec<T>,
    pub instance: PottsInstance,
    /// `edge_subsets[y]` is the bitmask of edge subset `y`.
    pub edge_subsets: Vec<u64>,
}

/// Edwards-Sokal joint over (coloring, open-edge subset), weight
/// `p^|A| (1−p)^{|E|−|A|}` when every open edge is monochromatic.
/// Returns the normalized joint and the retained edge subsets.
pub fn potts_es_joint<T: Real>(
    inst: &PottsInstance,
    cap: usize,
) -> Result<(JointMeasure<T>, Vec<u64>)> {
    let total_states = inst.state_count().ok_or_else(|| Error::CapExceeded {
        what: "Potts state count".into(),
        cap,
    })?;
    if total_states > cap {
        return Err(Error::CapExceeded {
            what: format!("Potts state count {total_states}"),
            cap,
        });
    }
    let nx = inst.colorings().expect("checked above");
    let n_sub = inst.edge_subsets();
    let n_edges = inst.edges.len() as i32;
    let p = T::lit(inst.edge_probability());
    let one_minus_p = T::lit((-inst.beta).exp());

    let mut raw = vec![T::zero(); nx * n_sub];
    for x in 0..nx {
        let mono = monochromatic_edges(&decode_coloring(x, inst.vertices, inst.q), &inst.edges);
        for a in 0..n_sub as u64 {
            if a & !mono == 0 {
                let open = a.count_ones() as i32;
                raw[x * n_sub + a as usize] = p.powi(open) * one_minus_p.powi(n_edges - open);
            }
        }
    }
    let kept: Vec<u64> = (0..n_sub as u64)
        .filter(|&a| (0..nx).any(|x| raw[x * n_sub + a as usize] > T::zero()))
        .collect();
    let ny = kept.len();
    let z = compensated_sum(raw.iter().copied());
    let mut weights = vec![T::zero(); nx * ny];
    let mut mask = vec![false; nx * ny];
    for x in 0..nx {
        for (y, &a) in kept.iter().enumerate() {
            let w = raw[x * n_sub + a as usize];
            weights[x * ny + y] = w / z;
            mask[x * ny + y] = w > T::zero();
        }
    }
    let joint = JointMeasure::probability(SupportSet::new(nx, ny, mask)?, weights)?;
    Ok((joint, kept))
}

/// Builds the Swendsen-Wang alternating chain. The derived conditionals are
/// checked against their closed forms (independent bond percolation on
/// monochromatic edges; uniform recoloring of each open cluster).
pub fn potts_instance<T: Real>(inst: &PottsInstance, cap: usize) -> Result<PottsSpec<T>> {
    let (joint, edge_subsets) = potts_es_joint::<T>(inst, cap)?;
    let k_ygx = conditional(&joint, Direction::YGivenX)?;
    let k_xgy = conditional(&joint, Direction::XGivenY)?;
    check_potts_closed_forms(inst, &edge_subsets, &k_ygx, &k_xgy, T::lit(1e-12))?;
    let spec = AlternatingChainSpec::new(k_ygx, k_xgy)?;
    Ok(PottsSpec {
        spec,
        instance: inst.clone(),
        edge_subsets,
    })
}

fn check_potts_closed_forms<T: Real>(
    inst: &PottsInstance,
    edge_subsets: &[u64],
    k_ygx: &ConditionalKernel<T>,
    k_xgy: &ConditionalKernel<T>,
    tol: T,
) -> Result<()> {
    let p = T::lit(inst.edge_probability());
    let one_minus_p = T::lit((-inst.beta).exp());
    let q = T::from_usize(inst.q).expect("color count");
    let nx = k_ygx.conditioning_len();
    for x in 0..nx {
        let colors = decode_coloring(x, inst.vertices, inst.q);
        let mono = monochromatic_edges(&colors, &inst.edges);
        let n_mono = mono.count_ones() as i32;
        for (y, &a) in edge_subsets.iter().enumerate() {
            let bond = if a & !mono == 0 {
                let open = a.count_ones() as i32;
                p.powi(open) * one_minus_p.powi(n_mono - open)
            } else {
                T::zero()
            };
            if (k_ygx.get(x, y) - bond).abs() > tol {
                return Err(Error::InvalidKernel(format!(
                    "bond conditional mismatch at coloring {x}, subset {a:#b}"
                )));
            }
            let recolor = if a & !mono == 0 {
                let c = component_count(inst.vertices, &inst.edges, a) as i32;
                q.powi(-c)
            } else {
                T::zero()
            };
            if (k_xgy.get(y, x) - recolor).abs() > tol {
                return Err(Error::InvalidKernel(format!(
                    "cluster recoloring mismatch at coloring {x}, subset {a:#b}"
                )));
            }
        }
    }
    Ok(())
}
