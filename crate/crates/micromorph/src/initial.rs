//! Smooth initial data compatible with homogeneous boundary conditions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::Constraints;
use crate::grid::{CartesianGrid, SimulationState, TensorField, VectorField};
use crate::model::Tensor3;

fn wavenumbers(grid: &CartesianGrid, modes: [usize; 3]) -> [f64; 3] {
    let l = grid.lengths();
    let base = if grid.is_periodic() { 2.0 } else { 1.0 };
    std::array::from_fn(|a| base * std::f64::consts::PI * modes[a] as f64 / l[a])
}

/// Zeroes the components that homogeneous boundary conditions pin.
pub fn enforce_homogeneous(state: &mut SimulationState) {
    let grid = *state.grid();
    if grid.is_periodic() {
        return;
    }
    let c = Constraints::new(&grid, [true; 6]);
    c.mask(&mut state.u, &mut state.p);
    c.mask(&mut state.u_t, &mut state.p_t);
}

/// `u₀ = a ∏ sin(k_l x_l)` at rest, with `P₀ = ∇u₀` taken analytically.
pub fn standing_wave(grid: &CartesianGrid, amplitude: [f64; 3], modes: [usize; 3]) -> SimulationState {
    let k = wavenumbers(grid, modes);
    let mut s = SimulationState::zeros(grid);
    s.u = VectorField::from_fn(grid, |x| {
        let v: f64 = (0..3).map(|a| (k[a] * x[a]).sin()).product();
        amplitude.map(|c| c * v)
    });
    s.p = TensorField::from_fn(grid, |x| {
        let d: [f64; 3] = std::array::from_fn(|j| {
            (0..3)
                .map(|a| if a == j { k[a] * (k[a] * x[a]).cos() } else { (k[a] * x[a]).sin() })
                .product()
        });
        Tensor3::from_fn(|i, j| amplitude[i] * d[j])
    });
    enforce_homogeneous(&mut s);
    s
}

/// Parameters of [`random_modes`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomModes {
    pub seed: u64,
    /// Highest mode number per axis.
    pub max_mode: usize,
    /// Number of superposed modes per component.
    pub count: usize,
    pub amplitude: f64,
    /// Also draw initial velocities.
    pub with_velocity: bool,
}

impl Default for RandomModes {
    fn default() -> Self {
        Self {
            seed: 7,
            max_mode: 3,
            count: 4,
            amplitude: 1.0,
            with_velocity: true,
        }
    }
}

/// Random superposition of low modes. Displacements use sine products; column `j` of `P`
/// uses a cosine along axis `j` and sines along the others, so pinned components vanish.
pub fn random_modes(grid: &CartesianGrid, opts: &RandomModes) -> SimulationState {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let draw = |rng: &mut ChaCha8Rng| -> Vec<(f64, [f64; 3])> {
        (0..opts.count)
            .map(|_| {
                let m = std::array::from_fn(|_| rng.random_range(1..=opts.max_mode.max(1)));
                (opts.amplitude * rng.random_range(-1.0..1.0), wavenumbers(grid, m))
            })
            .collect()
    };
    let comp = |rng: &mut ChaCha8Rng, cos_axis: Option<usize>| {
        let terms = draw(rng);
        move |x: [f64; 3]| -> f64 {
            terms
                .iter()
                .map(|(c, k)| {
                    c * (0..3)
                        .map(|a| if Some(a) == cos_axis { (k[a] * x[a]).cos() } else { (k[a] * x[a]).sin() })
                        .product::<f64>()
                })
                .sum()
        }
    };
    let u_f: Vec<_> = (0..3).map(|_| comp(&mut rng, None)).collect();
    let p_f: Vec<_> = (0..9).map(|n| comp(&mut rng, Some(n % 3))).collect();
    let mut s = SimulationState::zeros(grid);
    s.u = VectorField::from_fn(grid, |x| std::array::from_fn(|i| u_f[i](x)));
    s.p = TensorField::from_fn(grid, |x| Tensor3::from_fn(|i, j| p_f[3 * i + j](x)));
    if opts.with_velocity {
        let ut_f: Vec<_> = (0..3).map(|_| comp(&mut rng, None)).collect();
        let pt_f: Vec<_> = (0..9).map(|n| comp(&mut rng, Some(n % 3))).collect();
        s.u_t = VectorField::from_fn(grid, |x| std::array::from_fn(|i| ut_f[i](x)));
        s.p_t = TensorField::from_fn(grid, |x| Tensor3::from_fn(|i, j| pt_f[3 * i + j](x)));
    }
    enforce_homogeneous(&mut s);
    s
}
