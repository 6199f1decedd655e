//! Two-photon simulation: mutually unbiased bases, coincidence statistics
//! under a local gate, state tomography, and entanglement-dimensionality
//! witnessing.
//!
//! Alice measures projectors onto MUB states `|M^μ_a⟩`; Bob's projectors are
//! conjugated, `|M^ν_b*⟩⟨M^ν_b*|`. On the maximally entangled state this
//! yields perfect correlations in every matched basis pair.

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use rand_distr::{Distribution, Poisson};
use std::f64::consts::PI;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, RngSeed};
use crate::metrics::DensityMatrix;

/// One of the d+1 mutually unbiased bases in prime dimension d.
///
/// μ = 0 is the computational ("pixel") basis; μ = 1 is the Fourier basis;
/// μ = k uses the quadratic Weyl phase with parameter k − 1:
/// `|M^μ_a⟩ = (1/√d) Σ_m ω^{am + (μ−1)m²}|m⟩`. The quadratic formula
/// degenerates for d = 2, where the Z/X/Y eigenbases are used instead.
#[derive(Debug, Clone, PartialEq)]
pub struct MubBasis {
    d: usize,
    mu: usize,
    /// d×d matrix whose columns are the basis states.
    states: CMatrix,
}

fn is_odd_prime(d: usize) -> bool {
    if d < 3 || d % 2 == 0 {
        return false;
    }
    let mut k = 3;
    while k * k <= d {
        if d % k == 0 {
            return false;
        }
        k += 2;
    }
    true
}

/// Build basis μ of the complete MUB set in dimension d (d = 2 or odd prime).
pub fn mub_basis(d: usize, mu: usize) -> Result<MubBasis> {
    if d != 2 && !is_odd_prime(d) {
        return Err(Error::UnsupportedDimension(d));
    }
    if mu > d {
        return Err(Error::IndexOutOfRange(format!(
            "basis index {mu} of {} bases",
            d + 1
        )));
    }
    let states = if mu == 0 {
        CMatrix::identity(d, d)
    } else if d == 2 {
        let s = 1.0 / 2f64.sqrt();
        match mu {
            // X eigenbasis
            1 => CMatrix::from_row_slice(
                2,
                2,
                &[
                    Complex64::new(s, 0.0),
                    Complex64::new(s, 0.0),
                    Complex64::new(s, 0.0),
                    Complex64::new(-s, 0.0),
                ],
            ),
            // Y eigenbasis
            _ => CMatrix::from_row_slice(
                2,
                2,
                &[
                    Complex64::new(s, 0.0),
                    Complex64::new(s, 0.0),
                    Complex64::new(0.0, s),
                    Complex64::new(0.0, -s),
                ],
            ),
        }
    } else {
        let k = mu - 1;
        let norm = 1.0 / (d as f64).sqrt();
        CMatrix::from_fn(d, d, |m, a| {
            let exponent = (a * m + k * m * m) % d;
            Complex64::from_polar(norm, 2.0 * PI * exponent as f64 / d as f64)
        })
    };
    Ok(MubBasis { d, mu, states })
}

/// The full set of d+1 mutually unbiased bases.
pub fn mub_family(d: usize) -> Result<Vec<MubBasis>> {
    (0..=d).map(|mu| mub_basis(d, mu)).collect()
}

impl MubBasis {
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn index(&self) -> usize {
        self.mu
    }

    /// Basis state a as a column vector.
    pub fn state(&self, a: usize) -> CVector {
        self.states.column(a).into_owned()
    }

    pub fn states(&self) -> &CMatrix {
        &self.states
    }

    /// The same basis with conjugated amplitudes (Bob's measurement side).
    pub fn conjugated(&self) -> MubBasis {
        MubBasis {
            d: self.d,
            mu: self.mu,
            states: self.states.map(|c| c.conj()),
        }
    }
}

/// A bipartite d×d state, stored as a d²-dimensional density matrix with
/// Alice as the first tensor factor.
#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteState {
    d: usize,
    rho: DensityMatrix,
}

impl BipartiteState {
    pub fn new(d: usize, rho: DensityMatrix) -> Result<Self> {
        if rho.dim() != d * d {
            return Err(Error::DimensionMismatch(format!(
                "density matrix of dimension {} for local dimension {d}",
                rho.dim()
            )));
        }
        Ok(BipartiteState { d, rho })
    }

    pub fn local_dim(&self) -> usize {
        self.d
    }

    pub fn density(&self) -> &DensityMatrix {
        &self.rho
    }

    /// Trace out Bob, leaving Alice's reduced state.
    pub fn reduced_alice(&self) -> Result<DensityMatrix> {
        let d = self.d;
        let m = self.rho.matrix();
        let red = CMatrix::from_fn(d, d, |ia, ja| {
            (0..d).map(|ib| m[(ia * d + ib, ja * d + ib)]).sum()
        });
        DensityMatrix::new(red)
    }

    /// Trace out Alice, leaving Bob's reduced state.
    pub fn reduced_bob(&self) -> Result<DensityMatrix> {
        let d = self.d;
        let m = self.rho.matrix();
        let red = CMatrix::from_fn(d, d, |ib, jb| {
            (0..d).map(|ia| m[(ia * d + ib, ia * d + jb)]).sum()
        });
        DensityMatrix::new(red)
    }
}

/// The maximally entangled state `|Φ⁺⟩ = (1/√d) Σ_m |mm⟩`.
pub fn maximally_entangled(d: usize) -> Result<BipartiteState> {
    if d < 2 {
        return Err(Error::InvalidDimension(
            "maximally entangled state needs d ≥ 2".into(),
        ));
    }
    let mut v = CVector::zeros(d * d);
    let amp = Complex64::new(1.0 / (d as f64).sqrt(), 0.0);
    for m in 0..d {
        v[m * d + m] = amp;
    }
    BipartiteState::new(d, DensityMatrix::from_pure(&v)?)
}

/// Maximally mixed bipartite state `I/d²`.
pub fn maximally_mixed_bipartite(d: usize) -> Result<BipartiteState> {
    BipartiteState::new(d, DensityMatrix::maximally_mixed(d * d)?)
}

/// Apply a (generally non-unitary) local transform on Bob's side:
/// `ρ → (𝕀⊗T̃)ρ(𝕀⊗T̃†)`, renormalized. Returns the state and the
/// pre-normalization trace (post-selection probability).
pub fn apply_local_gate(
    state: &BipartiteState,
    t_eff: &CMatrix,
) -> Result<(BipartiteState, f64)> {
    let d = state.local_dim();
    if t_eff.nrows() != d || t_eff.ncols() != d {
        return Err(Error::DimensionMismatch(format!(
            "local transform is {}x{} for d={d}",
            t_eff.nrows(),
            t_eff.ncols()
        )));
    }
    // K = I ⊗ T̃
    let k = CMatrix::from_fn(d * d, d * d, |row, col| {
        let (ra, rb) = (row / d, row % d);
        let (ca, cb) = (col / d, col % d);
        if ra == ca {
            t_eff[(rb, cb)]
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let sandwich = &k * state.rho.matrix() * k.adjoint();
    let norm: f64 = (0..d * d).map(|i| sandwich[(i, i)].re).sum();
    if norm <= 1e-300 {
        return Err(Error::InvalidState(
            "local transform annihilated the state".into(),
        ));
    }
    let herm = (&sandwich + sandwich.adjoint()) * Complex64::new(0.5 / norm, 0.0);
    Ok((BipartiteState::new(d, DensityMatrix::new(herm)?)?, norm))
}

/// One cell of a coincidence table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoincidenceRecord {
    pub mu: usize,
    pub nu: usize,
    pub a: usize,
    pub b: usize,
    pub count: f64,
}

/// Coincidence counts over the complete (μ, ν, a, b) grid of the declared
/// basis sets. Serializes to CSV with header `mu,nu,a,b,count`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoincidenceTable {
    d: usize,
    alice_bases: Vec<usize>,
    bob_bases: Vec<usize>,
    counts: Vec<f64>,
}

impl CoincidenceTable {
    /// Assemble a table from a complete grid of counts in the canonical
    /// order: Alice basis (as listed), Bob basis, Alice outcome, Bob outcome.
    pub fn from_counts(
        d: usize,
        alice_bases: Vec<usize>,
        bob_bases: Vec<usize>,
        counts: Vec<f64>,
    ) -> Result<Self> {
        let expected = alice_bases.len() * bob_bases.len() * d * d;
        if counts.len() != expected {
            return Err(Error::InvalidConfiguration(format!(
                "{} counts for a grid of {expected}",
                counts.len()
            )));
        }
        if counts.iter().any(|&c| c < 0.0 || !c.is_finite()) {
            return Err(Error::InvalidConfiguration(
                "counts must be finite and nonnegative".into(),
            ));
        }
        Ok(CoincidenceTable {
            d,
            alice_bases,
            bob_bases,
            counts,
        })
    }

    fn index_of(&self, mu: usize, nu: usize, a: usize, b: usize) -> Option<usize> {
        let mi = self.alice_bases.iter().position(|&x| x == mu)?;
        let ni = self.bob_bases.iter().position(|&x| x == nu)?;
        if a >= self.d || b >= self.d {
            return None;
        }
        Some(((mi * self.bob_bases.len() + ni) * self.d + a) * self.d + b)
    }

    pub fn local_dim(&self) -> usize {
        self.d
    }

    pub fn alice_bases(&self) -> &[usize] {
        &self.alice_bases
    }

    pub fn bob_bases(&self) -> &[usize] {
        &self.bob_bases
    }

    pub fn get(&self, mu: usize, nu: usize, a: usize, b: usize) -> Option<f64> {
        self.index_of(mu, nu, a, b).map(|i| self.counts[i])
    }

    /// Total counts in one basis pair.
    pub fn pair_total(&self, mu: usize, nu: usize) -> Option<f64> {
        let mut total = 0.0;
        for a in 0..self.d {
            for b in 0..self.d {
                total += self.get(mu, nu, a, b)?;
            }
        }
        Some(total)
    }

    pub fn records(&self) -> impl Iterator<Item = CoincidenceRecord> + '_ {
        let d = self.d;
        self.alice_bases.iter().enumerate().flat_map(move |(mi, &mu)| {
            self.bob_bases.iter().enumerate().flat_map(move |(ni, &nu)| {
                (0..d).flat_map(move |a| {
                    (0..d).map(move |b| CoincidenceRecord {
                        mu,
                        nu,
                        a,
                        b,
                        count: self.counts[((mi * self.bob_bases.len() + ni) * d + a) * d + b],
                    })
                })
            })
        })
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "mu,nu,a,b,count")?;
        for r in self.records() {
            writeln!(w, "{},{},{},{},{}", r.mu, r.nu, r.a, r.b, r.count)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<CoincidenceTable> {
        let mut records = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || (lineno == 0 && line.starts_with("mu")) {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 5 {
                return Err(Error::InvalidConfiguration(format!(
                    "bad coincidence CSV line {}: {line:?}",
                    lineno + 1
                )));
            }
            let parse_idx = |s: &str| -> Result<usize> {
                s.trim().parse().map_err(|_| {
                    Error::InvalidConfiguration(format!("bad index {s:?} in CSV"))
                })
            };
            let count: f64 = parts[4].trim().parse().map_err(|_| {
                Error::InvalidConfiguration(format!("bad count {:?} in CSV", parts[4]))
            })?;
            records.push((
                parse_idx(parts[0])?,
                parse_idx(parts[1])?,
                parse_idx(parts[2])?,
                parse_idx(parts[3])?,
                count,
            ));
        }
        if records.is_empty() {
            return Err(Error::Underdetermined("empty coincidence table".into()));
        }
        let d = records.iter().map(|r| r.2.max(r.3)).max().unwrap() + 1;
        let mut alice: Vec<usize> = records.iter().map(|r| r.0).collect();
        alice.sort_unstable();
        alice.dedup();
        let mut bob: Vec<usize> = records.iter().map(|r| r.1).collect();
        bob.sort_unstable();
        bob.dedup();
        let mut table = CoincidenceTable {
            d,
            alice_bases: alice,
            bob_bases: bob,
            counts: vec![f64::NAN; 0],
        };
        table.counts =
            vec![f64::NAN; table.alice_bases.len() * table.bob_bases.len() * d * d];
        for (mu, nu, a, b, count) in records {
            if count < 0.0 {
                return Err(Error::InvalidConfiguration(format!(
                    "negative count at ({mu},{nu},{a},{b})"
                )));
            }
            let idx = table.index_of(mu, nu, a, b).unwrap();
            table.counts[idx] = count;
        }
        if table.counts.iter().any(|c| c.is_nan()) {
            return Err(Error::Underdetermined(
                "coincidence grid is incomplete".into(),
            ));
        }
        Ok(table)
    }
}

/// Options for [`simulate_coincidences`].
#[derive(Debug, Clone)]
pub struct SimulationOptions {
    /// Expected total counts per basis pair (with unit-efficiency projectors).
    pub rate: f64,
    /// When set, cells are Poisson-sampled; otherwise exact expectations.
    pub poisson_seed: Option<RngSeed>,
    /// Optional per-(basis, outcome) detection efficiencies, default 1.
    pub alice_efficiency: Option<Vec<Vec<f64>>>,
    pub bob_efficiency: Option<Vec<Vec<f64>>>,
}

impl SimulationOptions {
    pub fn exact(rate: f64) -> Self {
        SimulationOptions {
            rate,
            poisson_seed: None,
            alice_efficiency: None,
            bob_efficiency: None,
        }
    }

    pub fn poisson(rate: f64, seed: RngSeed) -> Self {
        SimulationOptions {
            rate,
            poisson_seed: Some(seed),
            alice_efficiency: None,
            bob_efficiency: None,
        }
    }
}

/// Expected count `rate · η^μ_a η^ν_b · Tr((Π^μ_a ⊗ Π^{ν*}_b) ρ)` for every
/// cell of the declared grid; Poisson-sampled when a seed is given.
pub fn simulate_coincidences(
    state: &BipartiteState,
    alice_bases: &[MubBasis],
    bob_bases: &[MubBasis],
    opts: &SimulationOptions,
) -> Result<CoincidenceTable> {
    if opts.rate <= 0.0 {
        return Err(Error::InvalidConfiguration("rate must be positive".into()));
    }
    let d = state.local_dim();
    if alice_bases.iter().chain(bob_bases).any(|b| b.dim() != d) {
        return Err(Error::DimensionMismatch(
            "basis dimension differs from state dimension".into(),
        ));
    }
    let efficiency = |table: &Option<Vec<Vec<f64>>>, basis_pos: usize, outcome: usize| -> f64 {
        table
            .as_ref()
            .and_then(|t| t.get(basis_pos).and_then(|row| row.get(outcome)))
            .copied()
            .unwrap_or(1.0)
    };
    let rho = state.density().matrix();
    let mut counts =
        Vec::with_capacity(alice_bases.len() * bob_bases.len() * d * d);
    let mut rng = opts.poisson_seed.map(|s| s.rng());
    for (mi, abasis) in alice_bases.iter().enumerate() {
        for (ni, bbasis) in bob_bases.iter().enumerate() {
            let bconj = bbasis.conjugated();
            for a in 0..d {
                for b in 0..d {
                    let v = kron_vec(&abasis.state(a), &bconj.state(b));
                    let p = expectation(rho, &v).max(0.0);
                    let expected = opts.rate
                        * efficiency(&opts.alice_efficiency, mi, a)
                        * efficiency(&opts.bob_efficiency, ni, b)
                        * p;
                    let count = match rng.as_mut() {
                        Some(rng) if expected > 0.0 => {
                            Poisson::new(expected)
                                .map_err(|_| {
                                    Error::InvalidConfiguration(format!(
                                        "bad Poisson mean {expected}"
                                    ))
                                })?
                                .sample(rng)
                        }
                        _ => expected,
                    };
                    counts.push(count);
                }
            }
        }
    }
    Ok(CoincidenceTable {
        d,
        alice_bases: alice_bases.iter().map(|b| b.index()).collect(),
        bob_bases: bob_bases.iter().map(|b| b.index()).collect(),
        counts,
    })
}

fn kron_vec(a: &CVector, b: &CVector) -> CVector {
    let (da, db) = (a.len(), b.len());
    CVector::from_fn(da * db, |i, _| a[i / db] * b[i % db])
}

fn expectation(rho: &CMatrix, v: &CVector) -> f64 {
    // ⟨v|ρ|v⟩
    let rv = rho * v;
    v.dotc(&rv).re
}

/// Projected least-squares tomography from a complete MUB grid.
///
/// Alternates an unconstrained linear inversion (the MUB 2-design dual
/// frame) with projection onto the PSD unit-trace cone, jointly refitting
/// the global rate R, until the residual is stationary.
pub fn tomography(
    table: &CoincidenceTable,
    alice_bases: &[MubBasis],
    bob_bases: &[MubBasis],
) -> Result<BipartiteState> {
    let d = table.local_dim();
    let complete = |bases: &[MubBasis], declared: &[usize]| -> bool {
        if bases.len() != d + 1 || declared.len() != d + 1 {
            return false;
        }
        let mut mus: Vec<usize> = bases.iter().map(|b| b.index()).collect();
        mus.sort_unstable();
        let mut decl = declared.to_vec();
        decl.sort_unstable();
        mus == (0..=d).collect::<Vec<_>>() && decl == (0..=d).collect::<Vec<_>>()
    };
    if !complete(alice_bases, table.alice_bases())
        || !complete(bob_bases, table.bob_bases())
    {
        return Err(Error::Underdetermined(
            "tomography needs the complete set of d+1 MUBs on both sides".into(),
        ));
    }
    if alice_bases.iter().chain(bob_bases).any(|b| b.dim() != d) {
        return Err(Error::DimensionMismatch("basis dimension mismatch".into()));
    }

    // cache projector vectors in record order
    let mut projectors = Vec::new();
    let mut counts = Vec::new();
    for abasis in alice_bases {
        for bbasis in bob_bases {
            let bconj = bbasis.conjugated();
            for a in 0..d {
                for b in 0..d {
                    projectors.push(kron_vec(&abasis.state(a), &bconj.state(b)));
                    counts.push(
                        table
                            .get(abasis.index(), bbasis.index(), a, b)
                            .ok_or_else(|| {
                                Error::Underdetermined("missing grid cell".into())
                            })?,
                    );
                }
            }
        }
    }

    // initial rate: every basis pair resolves the identity, so the total
    // counts per pair estimate R
    let pairs = (d + 1) * (d + 1);
    let mut rate = counts.iter().sum::<f64>() / pairs as f64;
    if rate <= 0.0 {
        return Err(Error::Underdetermined("table has no counts".into()));
    }

    let dim = d * d;
    let mut rho = CMatrix::identity(dim, dim) / Complex64::new(dim as f64, 0.0);
    let mut prev_residual = f64::INFINITY;
    for _ in 0..200 {
        // linear inversion of S = Σ (C/R)·Π via the per-party dual frame
        let mut s = CMatrix::zeros(dim, dim);
        for (v, &c) in projectors.iter().zip(&counts) {
            let w = c / rate;
            if w != 0.0 {
                let wc = Complex64::new(w, 0.0);
                for i in 0..dim {
                    let vi = v[i] * wc;
                    for j in 0..dim {
                        s[(i, j)] += vi * v[j].conj();
                    }
                }
            }
        }
        let inverted = dual_frame_invert(&dual_frame_invert(&s, d, Party::Alice), d, Party::Bob);
        rho = project_to_density(&inverted);

        // refit R by least squares, then measure the residual
        let q: Vec<f64> = projectors.iter().map(|v| expectation(&rho, v)).collect();
        let qq: f64 = q.iter().map(|x| x * x).sum();
        if qq > 0.0 {
            let cq: f64 = counts.iter().zip(&q).map(|(c, x)| c * x).sum();
            rate = cq / qq;
        }
        let residual: f64 = counts
            .iter()
            .zip(&q)
            .map(|(c, x)| (c - rate * x).powi(2))
            .sum();
        if (prev_residual - residual).abs() <= 1e-8 * residual.max(1e-12) {
            break;
        }
        prev_residual = residual;
    }

    BipartiteState::new(d, DensityMatrix::new(rho)?)
}

enum Party {
    Alice,
    Bob,
}

/// Invert the single-party MUB frame map `Φ(X) = X + Tr_party(X)` on one
/// tensor factor: `Φ⁻¹(X) = X − I ⊗ Tr_party(X)/(d+1)`.
fn dual_frame_invert(x: &CMatrix, d: usize, party: Party) -> CMatrix {
    let dim = d * d;
    let mut out = x.clone();
    match party {
        Party::Alice => {
            // partial trace over Alice, correction I_A ⊗ tr_A(X)
            let tr = CMatrix::from_fn(d, d, |ib, jb| {
                (0..d).map(|ia| x[(ia * d + ib, ia * d + jb)]).sum()
            });
            for row in 0..dim {
                for col in 0..dim {
                    if row / d == col / d {
                        out[(row, col)] -=
                            tr[(row % d, col % d)] / Complex64::new((d + 1) as f64, 0.0);
                    }
                }
            }
        }
        Party::Bob => {
            let tr = CMatrix::from_fn(d, d, |ia, ja| {
                (0..d).map(|ib| x[(ia * d + ib, ja * d + ib)]).sum()
            });
            for row in 0..dim {
                for col in 0..dim {
                    if row % d == col % d {
                        out[(row, col)] -=
                            tr[(row / d, col / d)] / Complex64::new((d + 1) as f64, 0.0);
                    }
                }
            }
        }
    }
    out
}

/// Frobenius projection onto the density-matrix cone: Hermitize, then
/// project the eigenvalues onto the probability simplex.
fn project_to_density(m: &CMatrix) -> CMatrix {
    let dim = m.nrows();
    let herm = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eigen = SymmetricEigen::new(herm);
    let mut lambda: Vec<(usize, f64)> = eigen.eigenvalues.iter().cloned().enumerate().collect();
    lambda.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    // water-filling threshold for the simplex projection
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    let mut support = 0;
    for (k, &(_, l)) in lambda.iter().enumerate() {
        cumulative += l;
        let t = (cumulative - 1.0) / (k + 1) as f64;
        if l - t > 0.0 {
            theta = t;
            support = k + 1;
        } else {
            break;
        }
    }
    let mut out = CMatrix::zeros(dim, dim);
    for &(idx, l) in lambda.iter().take(support) {
        let w = (l - theta).max(0.0);
        if w == 0.0 {
            continue;
        }
        let v = eigen.eigenvectors.column(idx);
        let wc = Complex64::new(w, 0.0);
        for i in 0..dim {
            let vi = v[i] * wc;
            for j in 0..dim {
                out[(i, j)] += vi * v[j].conj();
            }
        }
    }
    out
}

/// Certified entanglement dimensionality from fidelity to `|Φ⁺⟩`:
/// the largest k with `F > (k−1)/d` (Schmidt-rank-(k−1) states satisfy
/// `F ≤ (k−1)/d`), and at least 1.
pub fn witness_dimension(fidelity_to_phi_plus: f64, d: usize) -> Result<usize> {
    if d == 0 {
        return Err(Error::InvalidDimension("witness in dimension 0".into()));
    }
    if !(-1e-9..=1.0 + 1e-9).contains(&fidelity_to_phi_plus) {
        return Err(Error::Domain(format!(
            "fidelity {fidelity_to_phi_plus} outside [0, 1]"
        )));
    }
    let mut certified = 1;
    for k in 2..=d {
        if fidelity_to_phi_plus > (k - 1) as f64 / d as f64 {
            certified = k;
        }
    }
    Ok(certified)
}

/// Lower bound on the fidelity to `|Φ⁺⟩` from the matched basis pairs
/// (μ,ν) = (0,0) and (1,1) alone.
///
/// The Fourier-pair correlations recover the coherence sum up to cross
/// terms, each bounded by the geometric mean of computational-basis
/// populations in the same index class.
pub fn two_basis_fidelity_bound(table: &CoincidenceTable) -> Result<f64> {
    let d = table.local_dim();
    let n0 = table
        .pair_total(0, 0)
        .ok_or_else(|| Error::Underdetermined("missing (0,0) basis pair".into()))?;
    let n1 = table
        .pair_total(1, 1)
        .ok_or_else(|| Error::Underdetermined("missing (1,1) basis pair".into()))?;
    if n0 <= 0.0 || n1 <= 0.0 {
        return Err(Error::Underdetermined("empty basis-pair totals".into()));
    }
    let p0 = |a: usize, b: usize| table.get(0, 0, a, b).unwrap() / n0;
    let p1 = |a: usize, b: usize| table.get(1, 1, a, b).unwrap() / n1;

    let diag1: f64 = (0..d).map(|j| p1(j, j)).sum();
    let off0: f64 = (0..d)
        .flat_map(|m| (0..d).map(move |n| (m, n)))
        .filter(|&(m, n)| m != n)
        .map(|(m, n)| p0(m, n))
        .sum();
    // cross terms within each residue class c = m − n (mod d), c ≠ 0
    let mut cross = 0.0;
    for c in 1..d {
        for i in 0..d {
            for j in 0..d {
                if i == j {
                    continue;
                }
                let (m, n) = (i, (i + d - c) % d);
                let (mp, np) = (j, (j + d - c) % d);
                cross += (p0(m, n) * p0(mp, np)).sqrt();
            }
        }
    }
    Ok(diag1 - (off0 + cross) / d as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{random_ports, LayeredCircuit};
    use crate::gates::{build_gate, GateKind};
    use crate::linalg::{sample_haar_unitary, PhasePlane};
    use crate::metrics::{pure_fidelity, uhlmann_fidelity};
    use crate::wfm::{run_wfm, WfmConfig};

    #[test]
    fn mub_d2_bases() {
        let b0 = mub_basis(2, 0).unwrap();
        assert!((b0.state(0)[0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(b0.state(0)[1].norm() < 1e-15);
        let b1 = mub_basis(2, 1).unwrap();
        let s = 1.0 / 2f64.sqrt();
        assert!((b1.state(1)[0] - Complex64::new(s, 0.0)).norm() < 1e-15);
        assert!((b1.state(1)[1] - Complex64::new(-s, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn mub_d3_all_pairs_unbiased() {
        // exhaustive 36-pair check by direct inner products
        let family = mub_family(3).unwrap();
        for i in 0..family.len() {
            for j in 0..family.len() {
                if i == j {
                    continue;
                }
                for a in 0..3 {
                    for b in 0..3 {
                        let ip = family[i].state(a).dotc(&family[j].state(b)).norm_sqr();
                        assert!(
                            (ip - 1.0 / 3.0).abs() < 1e-10,
                            "bases {i},{j} overlap {ip}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn mub_families_for_paper_dimensions() {
        for d in [2usize, 3, 5, 7] {
            let family = mub_family(d).unwrap();
            assert_eq!(family.len(), d + 1);
            for basis in &family {
                // orthonormal columns
                let gram = basis.states().ad_mul(basis.states());
                for i in 0..d {
                    for j in 0..d {
                        let expected = if i == j { 1.0 } else { 0.0 };
                        assert!((gram[(i, j)] - Complex64::new(expected, 0.0)).norm() < 1e-10);
                    }
                }
            }
            for i in 0..family.len() {
                for j in (i + 1)..family.len() {
                    for a in 0..d {
                        for b in 0..d {
                            let ip = family[i].state(a).dotc(&family[j].state(b)).norm_sqr();
                            assert!((ip - 1.0 / d as f64).abs() < 1e-10);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn mub_rejects_composite_dimensions() {
        for d in [0usize, 1, 4, 6, 8, 9, 15] {
            assert!(matches!(
                mub_basis(d, 0),
                Err(Error::UnsupportedDimension(_))
            ));
        }
        assert!(mub_basis(3, 4).is_err());
    }

    #[test]
    fn phi_plus_properties() {
        let state = maximally_entangled(2).unwrap();
        assert!((state.density().purity() - 1.0).abs() < 1e-12);
        // partial traces are maximally mixed
        let red = state.reduced_alice().unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let expected = if i == j { 0.5 } else { 0.0 };
                assert!((red.matrix()[(i, j)] - Complex64::new(expected, 0.0)).norm() < 1e-12);
            }
        }
        let red_b = state.reduced_bob().unwrap();
        assert!((red_b.matrix()[(0, 0)].re - 0.5).abs() < 1e-12);

        let five = maximally_entangled(5).unwrap();
        let f = uhlmann_fidelity(five.density(), five.density()).unwrap();
        assert!((f - 1.0).abs() < 5e-9);

        assert!(maximally_entangled(1).is_err());
    }

    #[test]
    fn local_unitary_preserves_norm_and_purity() {
        let state = maximally_entangled(3).unwrap();
        let u = sample_haar_unitary(3, RngSeed(44)).unwrap();
        let (out, norm) = apply_local_gate(&state, u.matrix()).unwrap();
        assert!((norm - 1.0).abs() < 1e-12);
        assert!((out.density().purity() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn scaled_gate_halves_norm() {
        let state = maximally_entangled(3).unwrap();
        let t = build_gate(GateKind::Fourier, 3).unwrap();
        let scaled = t.matrix() * Complex64::new(1.0 / 2f64.sqrt(), 0.0);
        let (out, norm) = apply_local_gate(&state, &scaled).unwrap();
        assert!((norm - 0.5).abs() < 1e-12);
        let (ideal, _) = apply_local_gate(&state, t.matrix()).unwrap();
        let f = uhlmann_fidelity(out.density(), ideal.density()).unwrap();
        assert!((f - 1.0).abs() < 1e-8, "fidelity {f}");
    }

    #[test]
    fn annihilating_gate_errors() {
        let state = maximally_entangled(2).unwrap();
        let zero = CMatrix::zeros(2, 2);
        assert!(matches!(
            apply_local_gate(&state, &zero),
            Err(Error::InvalidState(_))
        ));
    }

    #[test]
    fn channel_state_duality_on_synthesized_circuit() {
        // output-state fidelity to the ideal equals the channel fidelity
        let d = 3;
        let n = 64;
        let target = build_gate(GateKind::Fourier, d).unwrap();
        let u = sample_haar_unitary(n, RngSeed(500)).unwrap();
        let circuit = LayeredCircuit::new(
            vec![u; 3],
            vec![PhasePlane::zeros(n); 2],
            random_ports(n, d, RngSeed(501)).unwrap(),
            random_ports(n, d, RngSeed(502)).unwrap(),
        )
        .unwrap();
        let (solved, _) = run_wfm(&circuit, &target, &WfmConfig::default()).unwrap();
        let t_eff = solved.effective_transform();

        let input = maximally_entangled(d).unwrap();
        let (output, _) = apply_local_gate(&input, &t_eff).unwrap();
        let (ideal, _) = apply_local_gate(&input, target.matrix()).unwrap();
        let state_fid = uhlmann_fidelity(output.density(), ideal.density()).unwrap();
        let channel_fid = pure_fidelity(&t_eff, &target).unwrap();
        assert!(
            (state_fid - channel_fid).abs() < 1e-6,
            "duality gap: {state_fid} vs {channel_fid}"
        );
    }

    #[test]
    fn coincidences_phi_plus_computational() {
        let state = maximally_entangled(2).unwrap();
        let family = mub_family(2).unwrap();
        let table = simulate_coincidences(
            &state,
            &family,
            &family,
            &SimulationOptions::exact(1000.0),
        )
        .unwrap();
        assert!((table.get(0, 0, 0, 0).unwrap() - 500.0).abs() < 1e-9);
        assert!((table.get(0, 0, 1, 1).unwrap() - 500.0).abs() < 1e-9);
        assert!(table.get(0, 0, 0, 1).unwrap() < 1e-9);
        assert!(table.get(0, 0, 1, 0).unwrap() < 1e-9);
    }

    #[test]
    fn coincidences_matched_pairs_fully_correlated() {
        // Φ⁺ with conjugated Bob bases: Σ_a C_aa = total in every matched pair
        for d in [3usize, 5] {
            let state = maximally_entangled(d).unwrap();
            let family = mub_family(d).unwrap();
            let table = simulate_coincidences(
                &state,
                &family,
                &family,
                &SimulationOptions::exact(1.0),
            )
            .unwrap();
            for mu in 0..=d {
                let diag: f64 = (0..d).map(|a| table.get(mu, mu, a, a).unwrap()).sum();
                let total = table.pair_total(mu, mu).unwrap();
                assert!(
                    (diag - total).abs() < 1e-9,
                    "d={d} basis {mu}: diagonal {diag} vs total {total}"
                );
                assert!((total - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn coincidences_maximally_mixed_flat() {
        let d = 3;
        let state = maximally_mixed_bipartite(d).unwrap();
        let family = mub_family(d).unwrap();
        let rate = 900.0;
        let table =
            simulate_coincidences(&state, &family, &family, &SimulationOptions::exact(rate))
                .unwrap();
        for r in table.records() {
            assert!((r.count - rate / (d * d) as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn coincidences_poisson_deterministic() {
        let state = maximally_entangled(2).unwrap();
        let family = mub_family(2).unwrap();
        let opts = SimulationOptions::poisson(5000.0, RngSeed(9));
        let t1 = simulate_coincidences(&state, &family, &family, &opts).unwrap();
        let t2 = simulate_coincidences(&state, &family, &family, &opts).unwrap();
        assert_eq!(t1, t2);
        // counts are integers under Poisson sampling
        for r in t1.records() {
            assert_eq!(r.count.fract(), 0.0);
        }
    }

    #[test]
    fn efficiency_scales_expected_counts() {
        let state = maximally_entangled(2).unwrap();
        let family = mub_family(2).unwrap();
        let mut opts = SimulationOptions::exact(1000.0);
        opts.alice_efficiency = Some(vec![vec![0.5, 1.0], vec![1.0, 1.0], vec![1.0, 1.0]]);
        let table = simulate_coincidences(&state, &family, &family, &opts).unwrap();
        assert!((table.get(0, 0, 0, 0).unwrap() - 250.0).abs() < 1e-9);
        assert!((table.get(0, 0, 1, 1).unwrap() - 500.0).abs() < 1e-9);
    }

    #[test]
    fn csv_round_trip() {
        let state = maximally_entangled(2).unwrap();
        let family = mub_family(2).unwrap();
        let table = simulate_coincidences(
            &state,
            &family,
            &family,
            &SimulationOptions::exact(100.0),
        )
        .unwrap();
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("mu,nu,a,b,count\n"));
        let back = CoincidenceTable::read_csv(std::io::BufReader::new(buf.as_slice())).unwrap();
        assert_eq!(table, back);
    }

    #[test]
    fn tomography_noiseless_round_trips() {
        // |Φ⁺⟩ in d = 2
        let state = maximally_entangled(2).unwrap();
        let family = mub_family(2).unwrap();
        let table = simulate_coincidences(
            &state,
            &family,
            &family,
            &SimulationOptions::exact(1e4),
        )
        .unwrap();
        let recon = tomography(&table, &family, &family).unwrap();
        let f = uhlmann_fidelity(recon.density(), state.density()).unwrap();
        assert!(f >= 0.999, "d=2 round-trip fidelity {f}");

        // a random pure product state in d = 3
        let d = 3;
        let ua = sample_haar_unitary(d, RngSeed(71)).unwrap();
        let ub = sample_haar_unitary(d, RngSeed(72)).unwrap();
        let a = ua.matrix().column(0).into_owned();
        let b = ub.matrix().column(0).into_owned();
        let product = BipartiteState::new(
            d,
            DensityMatrix::from_pure(&kron_vec(&a, &b)).unwrap(),
        )
        .unwrap();
        let family = mub_family(d).unwrap();
        let table = simulate_coincidences(
            &product,
            &family,
            &family,
            &SimulationOptions::exact(1e4),
        )
        .unwrap();
        let recon = tomography(&table, &family, &family).unwrap();
        let f = uhlmann_fidelity(recon.density(), product.density()).unwrap();
        assert!(f >= 0.999, "d=3 product-state round-trip fidelity {f}");
    }

    #[test]
    fn tomography_poisson_noise_short() {
        let state = maximally_entangled(2).unwrap();
        let family = mub_family(2).unwrap();
        let mut total = 0.0;
        let seeds = 5;
        for s in 0..seeds {
            let table = simulate_coincidences(
                &state,
                &family,
                &family,
                &SimulationOptions::poisson(1e4, RngSeed(6000 + s)),
            )
            .unwrap();
            let recon = tomography(&table, &family, &family).unwrap();
            total += uhlmann_fidelity(recon.density(), state.density()).unwrap();
        }
        let mean = total / seeds as f64;
        assert!(mean >= 0.98, "mean Poisson round-trip fidelity {mean}");
    }

    #[test]
    fn tomography_incomplete_grid_is_underdetermined() {
        let state = maximally_entangled(2).unwrap();
        let family = mub_family(2).unwrap();
        let two = &family[0..2];
        let table = simulate_coincidences(
            &state,
            two,
            two,
            &SimulationOptions::exact(100.0),
        )
        .unwrap();
        assert!(matches!(
            tomography(&table, two, two),
            Err(Error::Underdetermined(_))
        ));
    }

    #[test]
    fn witness_dimension_paper_values() {
        assert_eq!(witness_dimension(0.689, 5).unwrap(), 4);
        assert_eq!(witness_dimension(0.838, 5).unwrap(), 5);
        // separable bound: strict inequality fails at k = 2
        assert_eq!(witness_dimension(0.2, 5).unwrap(), 1);
        assert_eq!(witness_dimension(0.0, 5).unwrap(), 1);
        assert_eq!(witness_dimension(1.0, 3).unwrap(), 3);
        assert!(witness_dimension(1.5, 3).is_err());
    }

    #[test]
    fn two_basis_bound_tight_on_phi_plus() {
        for d in [3usize, 5] {
            let state = maximally_entangled(d).unwrap();
            let family = mub_family(d).unwrap();
            let two = &family[0..2];
            let table = simulate_coincidences(
                &state,
                two,
                two,
                &SimulationOptions::exact(1e4),
            )
            .unwrap();
            let bound = two_basis_fidelity_bound(&table).unwrap();
            assert!((bound - 1.0).abs() < 1e-9, "d={d} bound {bound}");
        }
    }

    #[test]
    fn two_basis_bound_is_a_lower_bound_on_noisy_states() {
        // Werner-like state: λ Φ⁺ + (1−λ) I/d²
        let d = 5;
        let lambda = 0.85;
        let phi = maximally_entangled(d).unwrap();
        let mixed = maximally_mixed_bipartite(d).unwrap();
        let rho = phi.density().matrix() * Complex64::new(lambda, 0.0)
            + mixed.density().matrix() * Complex64::new(1.0 - lambda, 0.0);
        let state = BipartiteState::new(d, DensityMatrix::new(rho).unwrap()).unwrap();
        let family = mub_family(d).unwrap();
        let two = &family[0..2];
        let table = simulate_coincidences(
            &state,
            two,
            two,
            &SimulationOptions::exact(1e4),
        )
        .unwrap();
        let bound = two_basis_fidelity_bound(&table).unwrap();
        let truth = lambda + (1.0 - lambda) / (d * d) as f64; // ⟨Φ⁺|ρ|Φ⁺⟩
        assert!(bound <= truth + 1e-9, "bound {bound} exceeds true {truth}");
        // still certifies 4-dimensional entanglement at these settings
        assert_eq!(witness_dimension(bound, d).unwrap(), 4);
    }
}
