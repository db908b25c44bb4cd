//! Chain parameters, computational basis conventions and the system-side
//! operators of the collision model.
//!
//! Basis states are integers in `0..2^L`; site 0 is the most significant
//! bit. Outcome strings of the ancilla register use the same packing.

use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{hermiticity_defect, CMat};

/// Hard cap on the chain length.
pub const DEFAULT_SIZE_CAP: usize = 8;

/// Physical and numerical parameters. Energies are in units of the Rabi
/// frequency and times in units of its inverse.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelParams {
    pub sites: usize,
    #[cfg_attr(feature = "serde", serde(default = "default_omega"))]
    pub omega: f64,
    pub v: f64,
    pub gamma: f64,
    pub dt: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub delta: f64,
    #[cfg_attr(feature = "serde", serde(default = "default_pbc"))]
    pub pbc: bool,
}

#[cfg(feature = "serde")]
fn default_omega() -> f64 {
    1.0
}

#[cfg(feature = "serde")]
fn default_pbc() -> bool {
    true
}

impl ModelParams {
    pub fn new(sites: usize, v: f64, gamma: f64, dt: f64) -> Self {
        Self { sites, omega: 1.0, v, gamma, dt, delta: 0.0, pbc: true }
    }

    /// `dt = 1.25`, `V = 5.875`, `gamma = 3`: the working point used for
    /// trajectories and order parameters throughout.
    pub fn reference(sites: usize) -> Self {
        Self::new(sites, 5.875, 3.0, 1.25)
    }

    pub fn with_v(mut self, v: f64) -> Self {
        self.v = v;
        self
    }

    pub fn with_omega(mut self, omega: f64) -> Self {
        self.omega = omega;
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn open_chain(mut self) -> Self {
        self.pbc = false;
        self
    }

    pub fn dim(&self) -> usize {
        1 << self.sites
    }

    /// Ancilla coupling strength `sqrt(gamma / dt)`.
    pub fn coupling(&self) -> f64 {
        libm::sqrt(self.gamma / self.dt)
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_with_cap(DEFAULT_SIZE_CAP)
    }

    pub fn validate_with_cap(&self, cap: usize) -> Result<()> {
        if self.sites == 0 {
            return Err(Error::InvalidParams("need at least one site".into()));
        }
        let finite = [self.omega, self.v, self.gamma, self.dt, self.delta];
        if finite.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParams("parameters must be finite".into()));
        }
        if !(self.dt > 0.0) {
            return Err(Error::InvalidParams(format!("collision time must be positive, got {}", self.dt)));
        }
        if self.gamma < 0.0 {
            return Err(Error::InvalidParams(format!("dephasing rate must be non-negative, got {}", self.gamma)));
        }
        if self.sites > cap {
            return Err(Error::SizeCap { sites: self.sites, cap });
        }
        Ok(())
    }
}

/// Occupation `n_i` of basis state `state` on `site`.
#[inline]
pub fn bit(state: usize, site: usize, sites: usize) -> usize {
    (state >> (sites - 1 - site)) & 1
}

#[inline]
pub fn site_mask(site: usize, sites: usize) -> usize {
    1 << (sites - 1 - site)
}

/// Nearest-neighbour bonds entering the interaction sum. Under periodic
/// boundaries every site `i` pairs with `i + 1 mod L`, so a two-site ring
/// carries its single bond twice; a single site has no bond at all.
pub fn bonds(sites: usize, pbc: bool) -> Vec<(usize, usize)> {
    if sites < 2 {
        return Vec::new();
    }
    let count = if pbc { sites } else { sites - 1 };
    (0..count).map(|i| (i, (i + 1) % sites)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorLabel {
    SystemHamiltonian,
    /// `P_i = |0><0|` on site `i`.
    GroundProjector(usize),
    Occupation(usize),
    SigmaX(usize),
    /// Collision block for the sign string packed in the mask (bit set means
    /// the ancilla sits in the `-1` eigenstate of `tau^x`).
    CollisionBlock(u64),
    PxpHamiltonian,
    PxpProjector,
}

/// A dense operator on the `2^L`-dimensional system space.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemOperator {
    pub label: OperatorLabel,
    pub data: CMat,
}

impl SystemOperator {
    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.data)
    }
}

fn diagonal_operator(label: OperatorLabel, sites: usize, f: impl Fn(usize) -> f64) -> SystemOperator {
    let d = 1 << sites;
    let mut data = CMat::zeros(d, d);
    for b in 0..d {
        data[(b, b)] = Complex64::new(f(b), 0.0);
    }
    SystemOperator { label, data }
}

pub fn ground_projector(site: usize, sites: usize) -> SystemOperator {
    diagonal_operator(OperatorLabel::GroundProjector(site), sites, |b| (1 - bit(b, site, sites)) as f64)
}

pub fn occupation(site: usize, sites: usize) -> SystemOperator {
    diagonal_operator(OperatorLabel::Occupation(site), sites, |b| bit(b, site, sites) as f64)
}

pub fn sigma_x(site: usize, sites: usize) -> SystemOperator {
    let d = 1 << sites;
    let mask = site_mask(site, sites);
    let mut data = CMat::zeros(d, d);
    for b in 0..d {
        data[(b ^ mask, b)] = Complex64::new(1.0, 0.0);
    }
    SystemOperator { label: OperatorLabel::SigmaX(site), data }
}

fn system_diagonal(params: &ModelParams, b: usize) -> f64 {
    let l = params.sites;
    let interaction: usize = bonds(l, params.pbc).iter().map(|&(i, j)| bit(b, i, l) * bit(b, j, l)).sum();
    let excitations = b.count_ones() as f64;
    params.v * interaction as f64 + params.delta * excitations
}

/// `H_S = Omega sum_i sigma^x_i + V sum_i n_i n_{i+1} + Delta sum_i n_i`.
pub fn build_system_hamiltonian(params: &ModelParams) -> Result<SystemOperator> {
    params.validate()?;
    let l = params.sites;
    let d = params.dim();
    let mut data = CMat::zeros(d, d);
    for b in 0..d {
        data[(b, b)] = Complex64::new(system_diagonal(params, b), 0.0);
        for site in 0..l {
            data[(b ^ site_mask(site, l), b)] += Complex64::new(params.omega, 0.0);
        }
    }
    Ok(SystemOperator { label: OperatorLabel::SystemHamiltonian, data })
}

/// `H_m = H_S + sqrt(gamma/dt) sum_i m_i P_i`, the block of the collision
/// Hamiltonian on the ancilla sign string `m`.
pub fn build_collision_block(params: &ModelParams, signs: u64) -> Result<SystemOperator> {
    let mut op = build_system_hamiltonian(params)?;
    add_coupling_diagonal(&mut op.data, params, signs);
    op.label = OperatorLabel::CollisionBlock(signs);
    Ok(op)
}

pub(crate) fn add_coupling_diagonal(h: &mut CMat, params: &ModelParams, signs: u64) {
    let l = params.sites;
    let g = params.coupling();
    for b in 0..params.dim() {
        let mut shift = 0.0;
        for site in 0..l {
            if bit(b, site, l) == 0 {
                shift += if bit(signs as usize, site, l) == 0 { g } else { -g };
            }
        }
        h[(b, b)] += Complex64::new(shift, 0.0);
    }
}

/// Whether `b` has no two adjacent excitations (wrapping under `pbc`).
pub fn blockade_allowed(b: usize, sites: usize, pbc: bool) -> bool {
    bonds(sites, pbc).iter().all(|&(i, j)| bit(b, i, sites) * bit(b, j, sites) == 0)
}

pub fn build_pxp_projector(sites: usize, pbc: bool) -> Result<SystemOperator> {
    if sites < 2 {
        return Err(Error::InvalidParams("the blockade projector needs at least two sites".into()));
    }
    if sites > DEFAULT_SIZE_CAP {
        return Err(Error::SizeCap { sites, cap: DEFAULT_SIZE_CAP });
    }
    Ok(diagonal_operator(OperatorLabel::PxpProjector, sites, |b| {
        if blockade_allowed(b, sites, pbc) {
            1.0
        } else {
            0.0
        }
    }))
}

/// `sum_i P_{i-1} sigma^x_i P_{i+1}`; open chains drop the missing
/// neighbour's constraint at the edges.
pub fn build_pxp_hamiltonian(sites: usize, pbc: bool) -> Result<SystemOperator> {
    if sites < 2 {
        return Err(Error::InvalidParams("the constrained Hamiltonian needs at least two sites".into()));
    }
    if sites > DEFAULT_SIZE_CAP {
        return Err(Error::SizeCap { sites, cap: DEFAULT_SIZE_CAP });
    }
    let d = 1 << sites;
    let mut data = CMat::zeros(d, d);
    for b in 0..d {
        for i in 0..sites {
            let left = if i > 0 { Some(i - 1) } else if pbc { Some(sites - 1) } else { None };
            let right = if i + 1 < sites { Some(i + 1) } else if pbc { Some(0) } else { None };
            let free = [left, right].iter().flatten().all(|&j| bit(b, j, sites) == 0);
            if free {
                data[(b ^ site_mask(i, sites), b)] += Complex64::new(1.0, 0.0);
            }
        }
    }
    Ok(SystemOperator { label: OperatorLabel::PxpHamiltonian, data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{matmul, max_abs_diff};

    fn re(m: &CMat, i: usize, j: usize) -> f64 {
        m[(i, j)].re
    }

    #[test]
    fn single_site_has_no_interaction() {
        let h = build_system_hamiltonian(&ModelParams::new(1, 7.0, 3.0, 1.25)).unwrap();
        assert_eq!(h.data, sigma_x(0, 1).data);
    }

    #[test]
    fn two_site_ring_counts_the_bond_twice() {
        let p = ModelParams::new(2, 1.0, 0.0, 1.0).with_omega(0.0);
        let h = build_system_hamiltonian(&p).unwrap();
        for b in 0..4 {
            let want = if b == 3 { 2.0 } else { 0.0 };
            assert_eq!(re(&h.data, b, b), want);
        }
        assert_eq!(max_abs_diff(&h.data, &CMat::from_diagonal(&h.data.diagonal())), 0.0);
    }

    #[test]
    fn six_site_diagonal_counts_adjacent_pairs() {
        let p = ModelParams::reference(6);
        let h = build_system_hamiltonian(&p).unwrap();
        assert!(h.hermiticity_defect() <= 1e-12);
        for b in 0..64usize {
            let rotated = ((b << 1) | (b >> 5)) & 63;
            let pairs = (b & rotated).count_ones() as f64;
            assert_eq!(re(&h.data, b, b), 5.875 * pairs);
        }
    }

    #[test]
    fn detuning_adds_excitation_count() {
        let p = ModelParams::new(3, 0.0, 1.0, 1.0).with_delta(0.5);
        let h = build_system_hamiltonian(&p).unwrap();
        assert_eq!(re(&h.data, 0b111, 0b111), 1.5);
        assert_eq!(re(&h.data, 0b010, 0b010), 0.5);
    }

    #[test]
    fn spin_flip_symmetry_without_diagonal_terms() {
        let p = ModelParams::new(4, 0.0, 1.0, 1.0);
        let h = build_system_hamiltonian(&p).unwrap().data;
        let mut flip = CMat::identity(1, 1);
        for _ in 0..4 {
            flip = flip.kronecker(&sigma_x(0, 1).data);
        }
        assert_eq!(matmul(&h, &flip), matmul(&flip, &h));
    }

    #[test]
    fn collision_block_reduces_to_system_hamiltonian_without_dephasing() {
        let p = ModelParams::reference(3).with_gamma(0.0);
        let hs = build_system_hamiltonian(&p).unwrap();
        for m in 0..8 {
            assert_eq!(build_collision_block(&p, m).unwrap().data, hs.data);
        }
    }

    #[test]
    fn single_site_block_is_projector_times_coupling() {
        let p = ModelParams::new(1, 0.0, 3.0, 1.25).with_omega(0.0);
        let h = build_collision_block(&p, 0).unwrap();
        let g = (3.0f64 / 1.25).sqrt();
        assert!((re(&h.data, 0, 0) - g).abs() < 1e-15);
        assert_eq!(re(&h.data, 1, 1), 0.0);
    }

    #[test]
    fn opposite_sign_strings_differ_only_in_coupling_sign() {
        let p = ModelParams::reference(3);
        let hs = build_system_hamiltonian(&p).unwrap().data;
        let plus = build_collision_block(&p, 0).unwrap().data - &hs;
        let minus = build_collision_block(&p, 0b111).unwrap().data - &hs;
        assert!(max_abs_diff(&plus, &(-minus)) < 1e-15);
    }

    fn lucas(n: usize) -> usize {
        let (mut a, mut b) = (2usize, 1usize);
        for _ in 0..n {
            let c = a + b;
            a = b;
            b = c;
        }
        a
    }

    fn fibonacci(n: usize) -> usize {
        let (mut a, mut b) = (0usize, 1usize);
        for _ in 0..n {
            let c = a + b;
            a = b;
            b = c;
        }
        a
    }

    #[test]
    fn blockade_projector_rank_matches_combinatorics() {
        for l in 2..=8 {
            let ring = build_pxp_projector(l, true).unwrap();
            let chain = build_pxp_projector(l, false).unwrap();
            let rank = |m: &CMat| (0..m.nrows()).filter(|&i| m[(i, i)].re == 1.0).count();
            assert_eq!(rank(&ring.data), lucas(l), "ring L={l}");
            assert_eq!(rank(&chain.data), fibonacci(l + 2), "chain L={l}");
            assert_eq!(matmul(&ring.data, &ring.data), ring.data);
        }
        assert_eq!(lucas(6), 18);
    }

    #[test]
    fn two_site_projector_keeps_three_states() {
        let p = build_pxp_projector(2, true).unwrap().data;
        let kept: Vec<usize> = (0..4).filter(|&b| p[(b, b)].re == 1.0).collect();
        assert_eq!(kept, [0b00, 0b01, 0b10]);
        for l in 2..=8 {
            let d = 1 << l;
            assert_eq!(build_pxp_projector(l, true).unwrap().data[(d - 1, d - 1)].re, 0.0);
        }
    }

    #[test]
    fn pxp_hamiltonian_structure() {
        let h = build_pxp_hamiltonian(3, true).unwrap().data;
        let p = build_pxp_projector(3, true).unwrap().data;
        assert_eq!(hermiticity_defect(&h), 0.0);
        assert!(max_abs_diff(&matmul(&h, &p), &matmul(&p, &h)) <= 1e-12);
        assert_eq!(re(&h, 0b000, 0b100), 1.0);
        for i in 0..8 {
            for j in 0..8 {
                if h[(i, j)].norm() > 0.0 {
                    assert_eq!((i ^ j).count_ones(), 1);
                    assert!(blockade_allowed(i, 3, true) && blockade_allowed(j, 3, true));
                }
            }
        }
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(ModelParams::new(0, 1.0, 1.0, 1.0).validate().is_err());
        assert!(ModelParams::new(2, 1.0, 1.0, 0.0).validate().is_err());
        assert!(ModelParams::new(2, 1.0, -1.0, 1.0).validate().is_err());
        assert!(ModelParams::new(2, f64::NAN, 1.0, 1.0).validate().is_err());
        assert_eq!(
            build_system_hamiltonian(&ModelParams::reference(9)).unwrap_err(),
            Error::SizeCap { sites: 9, cap: 8 }
        );
        assert!(ModelParams::reference(9).validate_with_cap(10).is_ok());
    }
}
