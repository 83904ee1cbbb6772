//! Single-excitation model of a two-level emitter coupled to a dimerized
//! (SSH) tight-binding chain.
//!
//! The chain has `N` sites with alternating hopping amplitudes
//! `J∓ = 1 ∓ delta` (bond `n` carries `J₋` for odd `n`, `J₊` for even `n`;
//! `J = 1` fixes the energy unit, times are in units of `1/J`). The emitter
//! couples to site 1 with strength `g` and has transition frequency
//! `detuning` relative to the band center.
//!
//! Everything lives in the single-excitation sector, where the Hamiltonian
//! is a real symmetric `(N+1) × (N+1)` matrix over the basis
//!
//! - index `0`: emitter excited, chain in vacuum,
//! - index `n` (1..=N): one boson on site `n`, emitter in its ground state.
//!
//! With this ordering the matrix is tridiagonal: the emitter-site coupling
//! sits right next to the diagonal.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use std::io::Write;

use crate::error::{Error, Result};

/// Dimensionless description of the emitter–chain system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Number of chain sites (`N >= 2`).
    pub n_sites: usize,
    /// Dimerization `delta`, with `|delta| < 1` so both hoppings stay positive.
    pub delta: f64,
    /// Emitter–chain coupling in units of `J`.
    pub g: f64,
    /// Emitter transition frequency in units of `J`.
    pub detuning: f64,
}

impl ModelParams {
    pub fn new(n_sites: usize, delta: f64, g: f64, detuning: f64) -> Result<Self> {
        let p = Self {
            n_sites,
            delta,
            g,
            detuning,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites < 2 {
            return Err(Error::InvalidParameter(format!(
                "n_sites must be >= 2, got {}",
                self.n_sites
            )));
        }
        if !(self.delta.abs() < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "dimerization must satisfy |delta| < 1, got {}",
                self.delta
            )));
        }
        for v in [self.delta, self.g, self.detuning] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter("non-finite parameter".into()));
            }
        }
        Ok(())
    }

    /// Weak hopping `J₋ = 1 - delta`.
    pub fn j_minus(&self) -> f64 {
        1.0 - self.delta
    }

    /// Strong hopping `J₊ = 1 + delta`.
    pub fn j_plus(&self) -> f64 {
        1.0 + self.delta
    }

    /// Hopping on bond `n` (connecting sites `n` and `n+1`, `1 <= n <= N-1`):
    /// `J₋` for odd `n`, `J₊` for even `n`.
    pub fn hopping(&self, bond: usize) -> f64 {
        if bond % 2 == 1 {
            self.j_minus()
        } else {
            self.j_plus()
        }
    }

    /// Half-width `2|delta|` of the middle band gap.
    pub fn gap_half_width(&self) -> f64 {
        2.0 * self.delta.abs()
    }

    /// Whether the emitter frequency sits strictly inside the middle gap
    /// in the analytically solvable regime (`0 < |g| < 2|delta|`).
    pub fn in_gap(&self) -> bool {
        self.g != 0.0 && self.g.abs() < self.gap_half_width()
    }
}

/// Chiral-symmetric off-diagonal disorder: every bond `n` picks up an
/// additive shift `w_n` drawn uniformly from `[-W/2, W/2]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DisorderSpec {
    /// Disorder strength `W >= 0` in units of `J`; stored as bits so the
    /// spec stays hashable/comparable.
    strength_bits: u64,
    /// RNG seed; a fixed seed reproduces the same bond shifts bit for bit.
    pub seed: u64,
}

impl DisorderSpec {
    pub fn new(strength: f64, seed: u64) -> Result<Self> {
        if !(strength >= 0.0) || !strength.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "disorder strength must be >= 0, got {strength}"
            )));
        }
        Ok(Self {
            strength_bits: strength.to_bits(),
            seed,
        })
    }

    pub fn strength(&self) -> f64 {
        f64::from_bits(self.strength_bits)
    }

    /// Draw the `n_bonds` bond shifts for this spec. Deterministic in
    /// `(strength, seed)`; consecutive seeds give independent streams.
    pub fn draw(&self, n_bonds: usize) -> Vec<f64> {
        let w = self.strength();
        if w == 0.0 {
            return vec![0.0; n_bonds];
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let dist = Uniform::new_inclusive(-w / 2.0, w / 2.0).expect("valid disorder range");
        (0..n_bonds).map(|_| dist.sample(&mut rng)).collect()
    }
}

/// The single-excitation Hamiltonian: a real symmetric tridiagonal matrix,
/// stored dense for the eigensolver.
#[derive(Debug, Clone)]
pub struct SingleExcitationHamiltonian {
    pub params: ModelParams,
    matrix: DMatrix<f64>,
}

impl SingleExcitationHamiltonian {
    /// Matrix dimension `N + 1`.
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Main diagonal: `detuning` on the emitter entry, zeros on the sites.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.matrix[(i, i)]).collect()
    }

    /// First off-diagonal: coupling `g` followed by the (possibly
    /// disordered) bond amplitudes `-J_n + w_n`.
    pub fn off_diagonal(&self) -> Vec<f64> {
        (0..self.dim() - 1)
            .map(|i| self.matrix[(i, i + 1)])
            .collect()
    }

    /// Infinity norm (max absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.dim())
            .map(|i| self.matrix.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0_f64, f64::max)
    }

    /// Dense row-major CSV dump, one matrix row per line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for i in 0..self.dim() {
            let row: Vec<String> = (0..self.dim())
                .map(|j| format!("{}", self.matrix[(i, j)]))
                .collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Build the single-excitation Hamiltonian, optionally with chiral-symmetric
/// bond disorder. The emitter row carries `(0,0) = detuning` and
/// `(0,1) = g`; bond `n` carries `-J_n + w_n`.
pub fn build_hamiltonian(
    params: &ModelParams,
    disorder: Option<&DisorderSpec>,
) -> Result<SingleExcitationHamiltonian> {
    params.validate()?;
    let n = params.n_sites;
    let dim = n + 1;
    let shifts = match disorder {
        Some(d) => d.draw(n - 1),
        None => vec![0.0; n - 1],
    };

    let mut m = DMatrix::<f64>::zeros(dim, dim);
    m[(0, 0)] = params.detuning;
    m[(0, 1)] = params.g;
    m[(1, 0)] = params.g;
    for bond in 1..n {
        let amp = -params.hopping(bond) + shifts[bond - 1];
        m[(bond, bond + 1)] = amp;
        m[(bond + 1, bond)] = amp;
    }
    Ok(SingleExcitationHamiltonian {
        params: *params,
        matrix: m,
    })
}

/// Diagonal of the chiral (sublattice) operator: `+1` on the emitter,
/// `(-1)^n` on site `n`.
pub fn chiral_operator(n_sites: usize) -> Vec<f64> {
    let mut c = Vec::with_capacity(n_sites + 1);
    c.push(1.0);
    for n in 1..=n_sites {
        c.push(if n % 2 == 0 { 1.0 } else { -1.0 });
    }
    c
}

/// Max-norm of `C H C + H`. Zero exactly when the Hamiltonian
/// anticommutes with the chiral operator, which holds for any bond
/// disorder as long as the detuning vanishes; a finite detuning
/// contributes `2 |detuning|` through the emitter diagonal.
pub fn chiral_residual(h: &SingleExcitationHamiltonian) -> f64 {
    let c = chiral_operator(h.params.n_sites);
    let m = h.matrix();
    let mut worst = 0.0_f64;
    for i in 0..h.dim() {
        for j in 0..h.dim() {
            let v = (c[i] * c[j] + 1.0) * m[(i, j)];
            worst = worst.max(v.abs());
        }
    }
    worst
}

/// Eigendecomposition of a single-excitation Hamiltonian.
#[derive(Debug, Clone)]
pub struct Spectrum {
    energies: Vec<f64>,
    /// Orthonormal eigenvectors; column `k` belongs to `energies[k]`.
    vectors: DMatrix<f64>,
}

impl Spectrum {
    /// Eigenvalues in ascending order.
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// Eigenvector for energy index `k`.
    pub fn vector(&self, k: usize) -> DVector<f64> {
        self.vectors.column(k).into_owned()
    }

    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    /// Emitter component `c_k = <emitter|Φ_k>` of every eigenvector.
    pub fn emitter_components(&self) -> Vec<f64> {
        self.vectors.row(0).iter().copied().collect()
    }

    /// Overlap weights `|c_k|^2` of the eigenvectors with the initially
    /// excited emitter; they sum to one by completeness.
    pub fn emitter_weights(&self) -> Vec<f64> {
        self.vectors.row(0).iter().map(|c| c * c).collect()
    }

    /// Indices of eigenvalues strictly inside the middle gap,
    /// `|E| < 2|delta| - epsilon`.
    pub fn in_gap_indices(&self, params: &ModelParams, epsilon: f64) -> Vec<usize> {
        let bound = params.gap_half_width() - epsilon;
        self.energies
            .iter()
            .enumerate()
            .filter(|(_, e)| e.abs() < bound)
            .map(|(k, _)| k)
            .collect()
    }
}

/// Dense symmetric eigensolve, eigenvalues sorted ascending.
pub fn eigendecompose(h: &SingleExcitationHamiltonian) -> Result<Spectrum> {
    let dim = h.dim();
    let eig = h
        .matrix
        .clone()
        .try_symmetric_eigen(f64::EPSILON, 100 * dim)
        .ok_or_else(|| Error::Numerical("symmetric eigensolver did not converge".into()))?;

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let energies: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = DMatrix::<f64>::zeros(dim, dim);
    for (col, &k) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(k));
    }
    Ok(Spectrum { energies, vectors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn params(n: usize, delta: f64, g: f64, detuning: f64) -> ModelParams {
        ModelParams::new(n, delta, g, detuning).unwrap()
    }

    #[test]
    fn small_chain_matrix_entries() {
        let h = build_hamiltonian(&params(3, 0.2, 0.1, 0.0), None).unwrap();
        let m = h.matrix();
        assert_eq!(h.dim(), 4);
        for j in 0..4 {
            assert_eq!(m[(0, j)], if j == 1 { 0.1 } else { 0.0 });
        }
        assert_abs_diff_eq!(m[(1, 2)], -0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(m[(2, 3)], -1.2, epsilon = 1e-15);
        assert_eq!(m[(1, 3)], 0.0);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(ModelParams::new(1, 0.2, 0.1, 0.0).is_err());
        assert!(ModelParams::new(10, 1.0, 0.1, 0.0).is_err());
        assert!(ModelParams::new(10, -1.2, 0.1, 0.0).is_err());
        assert!(ModelParams::new(10, f64::NAN, 0.1, 0.0).is_err());
    }

    #[test]
    fn zero_disorder_matches_clean_matrix() {
        let p = params(21, 0.2, 0.1, 0.0);
        let clean = build_hamiltonian(&p, None).unwrap();
        let spec = DisorderSpec::new(0.0, 42).unwrap();
        let dis = build_hamiltonian(&p, Some(&spec)).unwrap();
        assert_eq!(clean.matrix(), dis.matrix());
    }

    #[test]
    fn disorder_is_deterministic_and_bounded() {
        let spec = DisorderSpec::new(0.3, 7).unwrap();
        let a = spec.draw(40);
        let b = spec.draw(40);
        assert_eq!(a, b);
        assert_eq!(a.len(), 40);
        assert!(a.iter().all(|w| w.abs() <= 0.15));
        // different seed, different draw
        let c = DisorderSpec::new(0.3, 8).unwrap().draw(40);
        assert_ne!(a, c);
    }

    #[test]
    fn hamiltonian_is_symmetric_with_disorder() {
        let p = params(30, 0.2, 0.1, 0.3);
        let spec = DisorderSpec::new(0.2, 3).unwrap();
        let h = build_hamiltonian(&p, Some(&spec)).unwrap();
        assert_eq!(h.matrix(), &h.matrix().transpose());
    }

    #[test]
    fn chiral_operator_signs() {
        assert_eq!(chiral_operator(3), vec![1.0, -1.0, 1.0, -1.0]);
        assert_eq!(chiral_operator(2), vec![1.0, -1.0, 1.0]);
        assert!(chiral_operator(9).iter().all(|s| s.abs() == 1.0));
    }

    #[test]
    fn chiral_residual_detuning_only() {
        let p = params(20, 0.2, 0.1, 0.0);
        let spec = DisorderSpec::new(0.2, 11).unwrap();
        assert!(chiral_residual(&build_hamiltonian(&p, Some(&spec)).unwrap()) <= 1e-14);
        assert_eq!(
            chiral_residual(&build_hamiltonian(&p, None).unwrap()),
            0.0
        );

        let detuned = params(20, 0.2, 0.1, 0.3);
        let h = build_hamiltonian(&detuned, None).unwrap();
        assert_abs_diff_eq!(chiral_residual(&h), 0.6, epsilon = 1e-15);
    }

    #[test]
    fn spectrum_residual_and_orthonormality() {
        let p = params(41, 0.2, 0.1, 0.0);
        let h = build_hamiltonian(&p, None).unwrap();
        let s = eigendecompose(&h).unwrap();
        let dim = s.dim();
        let norm = s.energies().iter().fold(0.0_f64, |a, e| a.max(e.abs()));
        for k in 0..dim {
            let v = s.vector(k);
            let res = (h.matrix() * &v - s.energies()[k] * &v).abs().max();
            assert!(res <= 1e-10 * norm, "residual {res} too large");
        }
        let gram = s.vectors().transpose() * s.vectors();
        let dev = (&gram - DMatrix::<f64>::identity(dim, dim)).abs().max();
        assert!(dev <= 1e-10, "orthonormality defect {dev}");
    }

    #[test]
    fn in_gap_count_odd_chain() {
        let p = params(41, 0.2, 0.1, 0.0);
        let s = eigendecompose(&build_hamiltonian(&p, None).unwrap()).unwrap();
        assert_eq!(s.in_gap_indices(&p, 1e-6).len(), 2);
    }

    #[test]
    fn chiral_pairing_of_energies() {
        let p = params(41, 0.2, 0.1, 0.0);
        let spec = DisorderSpec::new(0.2, 5).unwrap();
        let s = eigendecompose(&build_hamiltonian(&p, Some(&spec)).unwrap()).unwrap();
        let e = s.energies();
        let dim = s.dim();
        for k in 0..dim {
            assert_abs_diff_eq!(e[k], -e[dim - 1 - k], epsilon = 1e-10);
        }
    }

    // Zero-mode oracle: solve the two-term recursion of the decoupled chain
    // directly. Even sites vanish; odd-site amplitudes follow the ratio
    // -J_minus / J_plus per unit cell.
    fn zero_mode_oracle(n: usize, delta: f64) -> Vec<f64> {
        let ratio = -(1.0 - delta) / (1.0 + delta);
        let mut v = vec![0.0; n + 1];
        let mut amp = 1.0;
        let mut site = 1;
        while site <= n {
            v[site] = amp;
            amp *= ratio;
            site += 2;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter().map(|x| x / norm).collect()
    }

    #[test]
    fn decoupled_odd_chain_has_one_zero_mode() {
        let p = params(21, 0.3, 0.0, 0.0);
        let s = eigendecompose(&build_hamiltonian(&p, None).unwrap()).unwrap();
        let zero: Vec<usize> = (0..s.dim())
            .filter(|&k| s.energies()[k].abs() < 1e-10)
            .collect();
        // emitter (decoupled, detuning 0) plus the chain zero mode
        assert_eq!(zero.len(), 2);

        // project the emitter direction out of the degenerate pair
        let u1 = s.vector(zero[0]);
        let u2 = s.vector(zero[1]);
        let mut chain = u1[0] * &u2 - u2[0] * &u1;
        let norm = chain.norm();
        assert!(norm > 1e-8);
        chain /= norm;
        if chain[1] < 0.0 {
            chain = -chain;
        }

        let oracle = zero_mode_oracle(21, 0.3);
        for i in 0..chain.len() {
            assert_abs_diff_eq!(chain[i], oracle[i], epsilon = 1e-9);
        }
        // amplitude ratio between consecutive odd sites
        let ratio = chain[3] / chain[1];
        assert_abs_diff_eq!(ratio, -(0.7 / 1.3), epsilon = 1e-9);
    }

    #[test]
    fn decoupled_even_chain_negative_delta_has_no_zero_mode() {
        let p = params(20, -0.3, 0.0, 0.0);
        let s = eigendecompose(&build_hamiltonian(&p, None).unwrap()).unwrap();
        // drop the trivial decoupled-emitter eigenpair (vector = e0)
        let chain_modes: Vec<usize> = (0..s.dim())
            .filter(|&k| s.vector(k)[0].abs() < 0.5)
            .collect();
        assert_eq!(chain_modes.len(), 20);
        for k in chain_modes {
            assert!(s.energies()[k].abs() > 1e-6);
        }
    }

    #[test]
    fn even_chain_zero_mode_localizes_right() {
        let p = params(40, 0.2, 0.1, 0.0);
        let s = eigendecompose(&build_hamiltonian(&p, None).unwrap()).unwrap();
        let ingap = s.in_gap_indices(&p, 1e-6);
        assert_eq!(ingap.len(), 3);
        let zm = *ingap
            .iter()
            .min_by(|&&a, &&b| s.energies()[a].abs().total_cmp(&s.energies()[b].abs()))
            .unwrap();
        let v = s.vector(zm);
        // weight on sites n >= 3N/4
        let weight: f64 = (30..=40).map(|i| v[i] * v[i]).sum();
        assert!(weight > 0.99, "right-quarter weight {weight}");
    }
}
