// Copyright 2026 The wsdrive Authors
// SPDX-License-Identifier: Apache-2.0

//! Lowest-ladder Wannier-Stark basis of the undriven washboard Hamiltonian.
//!
//! The Hamiltonian is discretized with fourth-order central differences on
//! the interior samples of a hard-wall box, giving a real symmetric
//! pentadiagonal matrix. Eigenpairs in an energy window around the interior
//! wells are classified by well (density centroid) and ladder (intra-well
//! energy after removing `n omega_B`); the lowest-ladder state of the origin
//! well becomes the reference state `phi_0`, and every other ladder state is
//! represented as its translate `phi_n(x) = phi_0(x - n)`.

use std::f64::consts::PI;

use crate::eigen::{EigenPair, SymmetricBand};
use crate::error::{Error, Result};
use crate::lattice::{AxisLattice, GridSpec};

/// Default highest coupling order kept in the moment table.
pub const DEFAULT_P_MAX: usize = 3;

/// A state spreading over more wells than this (participation ratio) is
/// treated as delocalized.
pub const MAX_PARTICIPATION: f64 = 3.0;

/// States whose well lies this close to a wall are boundary-contaminated.
pub const EDGE_MARGIN_WELLS: i64 = 4;

/// Relative tolerance (in units of `omega_B`) for two reduced energies to
/// belong to the same ladder.
pub const LADDER_TOLERANCE: f64 = 1e-4;

/// Two ladders closer than this (in units of `omega_B`) inside one well
/// cannot be told apart.
pub const ENTANGLEMENT_GAP: f64 = 1e-2;

/// Relative amplitude bounding the core of `phi_0`. Further downhill the
/// state carries a flat tunneling tail of order `1e-7` that reaches the wall.
pub const CORE_SUPPORT_TOLERANCE: f64 = 1e-6;

/// Fourth-order stencil for `-d^2/dx^2`: `(c0, c1, c2) / h^2`.
pub const FD4_STENCIL: [f64; 3] = [30.0 / 12.0, -16.0 / 12.0, 1.0 / 12.0];

/// Symbol of the fourth-order stencil at `theta = k h`, divided by `1/h^2`.
pub fn fd4_symbol(theta: f64) -> f64 {
    (30.0 - 32.0 * theta.cos() + 2.0 * (2.0 * theta).cos()) / 12.0
}

/// Band matrix of `H = -1/(2m*) d^2/dx^2 + V cos(2 pi x) + F x` on the
/// interior samples `1..grid.len()` (sample 0 and sample `len` are walls).
pub fn hamiltonian_band(lattice: &AxisLattice, grid: &GridSpec) -> SymmetricBand {
    let n = grid.len() - 1;
    let h = grid.spacing();
    let kin = 1.0 / (PI * PI) / (h * h);
    let diag = (1..=n)
        .map(|i| kin * FD4_STENCIL[0] + lattice.potential(grid.x(i)))
        .collect();
    let off1 = vec![kin * FD4_STENCIL[1]; n - 1];
    let off2 = vec![kin * FD4_STENCIL[2]; n - 2];
    SymmetricBand::new(vec![diag, off1, off2])
}

/// Symmetric coupling-moment table `M_p = <phi_0| cos(2 pi x) |phi_p>`.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingMoments {
    values: Vec<f64>,
    p_max: usize,
}

impl CouplingMoments {
    /// Table from `M_{-p_max}, ..., M_{p_max}`.
    pub fn from_values(values: Vec<f64>) -> Self {
        assert!(values.len() % 2 == 1, "moment table needs odd length");
        let p_max = values.len() / 2;
        CouplingMoments { values, p_max }
    }

    pub fn p_max(&self) -> usize {
        self.p_max
    }

    pub fn get(&self, p: i64) -> f64 {
        let idx = p + self.p_max as i64;
        assert!(
            idx >= 0 && (idx as usize) < self.values.len(),
            "moment order {p} outside table"
        );
        self.values[idx as usize]
    }

    /// `(p, M_p)` for `p = -p_max..=p_max`.
    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        let pm = self.p_max as i64;
        self.values
            .iter()
            .enumerate()
            .map(move |(i, &v)| (i as i64 - pm, v))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StateClass {
    Ladder { ladder: usize, well: i64 },
    Delocalized { well: i64 },
    Edge { well: i64 },
}

#[derive(Clone, Debug)]
pub struct ClassifiedState {
    pub energy: f64,
    pub centroid: f64,
    pub participation: f64,
    pub well: i64,
    /// `energy - well * omega_B`.
    pub reduced_energy: f64,
    pub class: StateClass,
}

impl ClassifiedState {
    pub fn is_localized(&self) -> bool {
        matches!(self.class, StateClass::Ladder { .. })
    }
}

/// Assigns every eigenstate a well and, if it is localized away from the
/// walls, a ladder index (rank of its reduced-energy cluster).
///
/// Eigenvectors are expected on the interior samples, as produced from
/// [`hamiltonian_band`].
pub fn ladder_classification(
    pairs: &[EigenPair],
    lattice: &AxisLattice,
    grid: &GridSpec,
) -> Result<Vec<ClassifiedState>> {
    let omega = lattice.bloch_frequency()?;
    let ppp = grid.points_per_period;
    let (box_lo, box_hi) = grid.well_range();
    let mut states: Vec<ClassifiedState> = pairs
        .iter()
        .map(|pair| {
            let norm: f64 = pair.vector.iter().map(|v| v * v).sum();
            let mut well_weights = vec![0.0; grid.wells_count];
            let mut centroid = 0.0;
            for (k, v) in pair.vector.iter().enumerate() {
                let i = k + 1;
                let p = v * v / norm;
                centroid += p * grid.x(i);
                well_weights[i / ppp] += p;
            }
            let participation = 1.0 / well_weights.iter().map(|w| w * w).sum::<f64>();
            let well = (centroid - 0.5).round() as i64;
            let reduced_energy = pair.value - well as f64 * omega;
            let class = if well < box_lo + EDGE_MARGIN_WELLS || well > box_hi - EDGE_MARGIN_WELLS {
                StateClass::Edge { well }
            } else if participation > MAX_PARTICIPATION {
                StateClass::Delocalized { well }
            } else {
                StateClass::Ladder { ladder: 0, well }
            };
            ClassifiedState {
                energy: pair.value,
                centroid,
                participation,
                well,
                reduced_energy,
                class,
            }
        })
        .collect();

    let mut order: Vec<usize> = (0..states.len())
        .filter(|&i| states[i].is_localized())
        .collect();
    order.sort_by(|&a, &b| {
        states[a]
            .reduced_energy
            .total_cmp(&states[b].reduced_energy)
    });
    let tol = LADDER_TOLERANCE * omega;
    let mut rank = 0;
    let mut prev: Option<f64> = None;
    for i in order {
        let e = states[i].reduced_energy;
        if let Some(p) = prev {
            if e - p > tol {
                rank += 1;
            }
        }
        prev = Some(e);
        let well = states[i].well;
        states[i].class = StateClass::Ladder { ladder: rank, well };
    }
    Ok(states)
}

#[derive(Clone, Debug)]
pub struct BasisDiagnostics {
    /// `(well, raw energy)` of the selected lowest-ladder state in each interior well.
    pub ladder: Vec<(i64, f64)>,
    pub spacing_mean: f64,
    pub spacing_std: f64,
    pub spacing_max_deviation: f64,
    /// `||H phi_0 - E_0 phi_0||` in the discrete L2 norm.
    pub eigen_residual: f64,
    /// Largest `||phi_n - phi_0(x - n)||` over the inner half of the interior.
    pub max_translation_error: f64,
    /// Intra-well energy of the next ladder above the lowest one.
    pub first_excited_offset: Option<f64>,
    pub states_in_window: usize,
}

#[derive(Clone, Debug)]
pub struct WannierStarkBasis {
    lattice: AxisLattice,
    grid: GridSpec,
    phi0: Vec<f64>,
    energy0: f64,
    bloch_freq: f64,
    moments: CouplingMoments,
    mean_offset: f64,
    support: (i64, i64),
    diagnostics: BasisDiagnostics,
}

/// Solves the undriven problem and extracts the lowest Wannier-Stark ladder.
pub fn solve_ws_basis(lattice: AxisLattice, grid: GridSpec) -> Result<WannierStarkBasis> {
    grid.validate()?;
    let omega = lattice.bloch_frequency()?;
    let (i_lo, i_hi) = grid.interior_range();
    let h = grid.spacing();

    let band = hamiltonian_band(&lattice, &grid);
    let e_lo = -lattice.depth + omega * (i_lo as f64 - 3.0);
    let e_hi = lattice.depth.max(1.0) + 0.5 + omega * (i_hi as f64 + 3.0);
    let pairs = band.eigenpairs_in(e_lo, e_hi);
    let states = ladder_classification(&pairs, &lattice, &grid)?;

    let mut chosen: Vec<(i64, usize)> = Vec::new();
    for well in i_lo..=i_hi {
        let mut candidates: Vec<usize> = (0..states.len())
            .filter(|&i| states[i].is_localized() && states[i].well == well)
            .collect();
        candidates.sort_by(|&a, &b| {
            states[a]
                .reduced_energy
                .total_cmp(&states[b].reduced_energy)
        });
        let Some(&best) = candidates.first() else {
            return Err(Error::LadderIdentification(format!(
                "no localized eigenstate found in interior well {well}"
            )));
        };
        if let Some(&next) = candidates.get(1) {
            let gap = states[next].reduced_energy - states[best].reduced_energy;
            if gap < ENTANGLEMENT_GAP * omega {
                return Err(Error::LaddersEntangled { well, gap });
            }
        }
        chosen.push((well, best));
    }

    let origin = chosen
        .iter()
        .find(|(w, _)| *w == 0)
        .map(|&(_, i)| i)
        .ok_or_else(|| Error::LadderIdentification("origin well is not interior".into()))?;
    let eps0 = states[origin].reduced_energy;
    for &(well, i) in &chosen {
        let dev = (states[i].reduced_energy - eps0).abs();
        if dev > LADDER_TOLERANCE * omega {
            return Err(Error::LadderIdentification(format!(
                "well {well} departs from uniform spacing by {dev:.3e} (> {:.1e} omega_B)",
                LADDER_TOLERANCE
            )));
        }
    }

    let full_vector = |pair: &EigenPair| -> Vec<f64> {
        let mut v = Vec::with_capacity(grid.len());
        v.push(0.0);
        v.extend(pair.vector.iter().map(|x| x / h.sqrt()));
        v
    };
    let center_sample =
        grid.well_start(0).expect("origin well inside box") + grid.points_per_period / 2;
    let mut phi0 = full_vector(&pairs[origin]);
    if phi0[center_sample] < 0.0 {
        phi0.iter_mut().for_each(|v| *v = -*v);
    }
    let energy0 = pairs[origin].value;

    let ladder: Vec<(i64, f64)> = chosen.iter().map(|&(w, i)| (w, states[i].energy)).collect();
    let gaps: Vec<f64> = ladder.windows(2).map(|w| w[1].1 - w[0].1).collect();
    let spacing_mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    let spacing_std =
        (gaps.iter().map(|g| (g - spacing_mean).powi(2)).sum::<f64>() / gaps.len() as f64).sqrt();
    let spacing_max_deviation = gaps.iter().map(|g| (g - omega).abs()).fold(0.0, f64::max);

    let mut hphi = vec![0.0; grid.len() - 1];
    band.matvec(&phi0[1..], &mut hphi);
    let eigen_residual = (hphi
        .iter()
        .zip(&phi0[1..])
        .map(|(a, p)| (a - energy0 * p).powi(2))
        .sum::<f64>()
        * h)
        .sqrt();

    let ppp = grid.points_per_period as i64;
    let quarter = (i_hi - i_lo) / 4;
    let mut max_translation_error: f64 = 0.0;
    for &(well, i) in chosen.iter().filter(|(w, _)| w.abs() <= quarter) {
        let mut phin = full_vector(&pairs[i]);
        let shift = well * ppp;
        let aligned: f64 = (0..grid.len())
            .map(|k| phin[k] * shifted(&phi0, k as i64 - shift))
            .sum();
        if aligned < 0.0 {
            phin.iter_mut().for_each(|v| *v = -*v);
        }
        let err = ((0..grid.len())
            .map(|k| (phin[k] - shifted(&phi0, k as i64 - shift)).powi(2))
            .sum::<f64>()
            * h)
            .sqrt();
        max_translation_error = max_translation_error.max(err);
    }

    let first_excited_offset = states
        .iter()
        .filter(|s| !matches!(s.class, StateClass::Edge { .. }))
        .filter(|s| (i_lo..=i_hi).contains(&s.well))
        .map(|s| s.reduced_energy - eps0)
        .filter(|&d| d > ENTANGLEMENT_GAP * omega)
        .min_by(f64::total_cmp);

    let peak = phi0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let significant = |v: &f64| v.abs() > CORE_SUPPORT_TOLERANCE * peak;
    let first = phi0.iter().position(significant).unwrap_or(0);
    let last = phi0.iter().rposition(significant).unwrap_or(0);
    let support = (grid.well_of(grid.x(first)), grid.well_of(grid.x(last)));
    let mean_offset = phi0
        .iter()
        .enumerate()
        .map(|(i, v)| v * v * grid.x(i))
        .sum::<f64>()
        * h;

    let mut basis = WannierStarkBasis {
        lattice,
        grid,
        phi0,
        energy0,
        bloch_freq: omega,
        moments: CouplingMoments {
            values: Vec::new(),
            p_max: 0,
        },
        mean_offset,
        support,
        diagnostics: BasisDiagnostics {
            ladder,
            spacing_mean,
            spacing_std,
            spacing_max_deviation,
            eigen_residual,
            max_translation_error,
            first_excited_offset,
            states_in_window: pairs.len(),
        },
    };
    basis.moments = coupling_moments(&basis, DEFAULT_P_MAX)?;
    Ok(basis)
}

fn shifted(phi: &[f64], k: i64) -> f64 {
    if k < 0 || k as usize >= phi.len() {
        0.0
    } else {
        phi[k as usize]
    }
}

/// `M_p` for `|p| <= p_max` by quadrature of `phi_0(x) cos(2 pi x) phi_0(x - p)`.
pub fn coupling_moments(basis: &WannierStarkBasis, p_max: usize) -> Result<CouplingMoments> {
    let margin = basis.grid.wells_count / 4;
    if p_max == 0 || p_max > margin {
        return Err(Error::MomentRange { p_max, margin });
    }
    let grid = &basis.grid;
    let ppp = grid.points_per_period as i64;
    let h = grid.spacing();
    let cosines: Vec<f64> = (0..grid.len())
        .map(|i| (2.0 * PI * grid.x(i)).cos())
        .collect();
    let values = (-(p_max as i64)..=p_max as i64)
        .map(|p| {
            basis
                .phi0
                .iter()
                .zip(&cosines)
                .enumerate()
                .map(|(i, (a, c))| a * c * shifted(&basis.phi0, i as i64 - p * ppp))
                .sum::<f64>()
                * h
        })
        .collect();
    Ok(CouplingMoments { values, p_max })
}

impl WannierStarkBasis {
    pub fn lattice(&self) -> &AxisLattice {
        &self.lattice
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Samples of `phi_0` on the full grid (sample 0 is the wall, always 0).
    pub fn phi0(&self) -> &[f64] {
        &self.phi0
    }

    /// `phi_n(x_i) = phi_0(x_i - n)`.
    pub fn phi(&self, n: i64, i: usize) -> f64 {
        shifted(
            &self.phi0,
            i as i64 - n * self.grid.points_per_period as i64,
        )
    }

    /// Raw eigenvalue of `phi_0`; the ladder reads `E_n = E_0 + n omega_B`.
    pub fn energy0(&self) -> f64 {
        self.energy0
    }

    /// Ladder energy measured from `E_0`.
    pub fn ladder_energy(&self, n: i64) -> f64 {
        n as f64 * self.bloch_freq
    }

    pub fn bloch_frequency(&self) -> f64 {
        self.bloch_freq
    }

    pub fn bloch_period(&self) -> f64 {
        2.0 * PI / self.bloch_freq
    }

    pub fn moments(&self) -> &CouplingMoments {
        &self.moments
    }

    pub fn m0(&self) -> f64 {
        self.moments.get(0)
    }

    pub fn m1(&self) -> f64 {
        self.moments.get(1)
    }

    /// `<phi_0| x |phi_0>`: grid coordinate of well 0 as seen by position observables.
    pub fn mean_offset(&self) -> f64 {
        self.mean_offset
    }

    /// Wells (relative to the state's own well) spanned by the core of `phi_0`.
    pub fn support(&self) -> (i64, i64) {
        self.support
    }

    /// Well labels `n` for which the core of `phi_n` fits inside the box.
    pub fn synthesis_range(&self) -> (i64, i64) {
        let (lo, hi) = self.grid.well_range();
        (lo - self.support.0 + 1, hi - self.support.1 - 1)
    }

    pub fn diagnostics(&self) -> &BasisDiagnostics {
        &self.diagnostics
    }

    pub fn with_moments(mut self, p_max: usize) -> Result<Self> {
        self.moments = coupling_moments(&self, p_max)?;
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::EigenPair;
    use crate::lattice::{Axis, LatticeParams};

    fn lattice(v: f64, f: f64) -> AxisLattice {
        LatticeParams::isotropic(v, f).unwrap().axis(Axis::X)
    }

    fn small_grid() -> GridSpec {
        GridSpec::centered(33, 16).unwrap()
    }

    #[test]
    fn fd4_symbol_matches_k_squared_at_small_theta() {
        for &t in &[1e-3, 1e-2, 0.1] {
            assert!((fd4_symbol(t) - t * t).abs() < t.powi(6) / 50.0 + 1e-16);
        }
    }

    #[test]
    fn small_box_ladder() {
        let basis = solve_ws_basis(lattice(2.5, 0.2), small_grid()).unwrap();
        let d = basis.diagnostics();
        assert!(d.spacing_max_deviation < 1e-6, "{d:?}");
        assert!(d.eigen_residual < 1e-8);
        let norm: f64 = basis.phi0().iter().map(|v| v * v).sum::<f64>() * small_grid().spacing();
        assert!((norm - 1.0).abs() < 1e-12);
        let m = basis.moments();
        for p in 1..=3 {
            assert!((m.get(p) - m.get(-p)).abs() < 1e-10);
        }
        assert!(basis.m0() < 0.0 && basis.m1() > 0.0);
    }

    #[test]
    fn zero_force_is_rejected() {
        let flat = AxisLattice {
            axis: Axis::X,
            depth: 2.5,
            force: 0.0,
        };
        assert!(matches!(
            solve_ws_basis(flat, small_grid()),
            Err(Error::NoLadder { .. })
        ));
    }

    #[test]
    fn moment_range_is_checked() {
        let basis = solve_ws_basis(lattice(2.5, 0.2), small_grid()).unwrap();
        assert!(coupling_moments(&basis, 0).is_err());
        assert!(matches!(
            coupling_moments(&basis, 9),
            Err(Error::MomentRange { .. })
        ));
        assert_eq!(coupling_moments(&basis, 8).unwrap().p_max(), 8);
    }

    #[test]
    fn classification_of_synthetic_states() {
        let grid = small_grid();
        let lat = lattice(2.5, 0.2);
        let n = grid.len() - 1;
        let ppp = grid.points_per_period;
        // a state sitting in one well at E0 + 7 omega and one stuck at the wall
        let bump = |well: i64| {
            let start = grid.well_start(well).unwrap();
            let mut v = vec![0.0; n];
            for k in 0..ppp {
                let s = (PI * k as f64 / ppp as f64).sin();
                if start + k >= 1 {
                    v[start + k - 1] = s;
                }
            }
            v
        };
        let e0 = -0.45;
        let pairs = vec![
            EigenPair {
                value: e0,
                vector: bump(0),
            },
            EigenPair {
                value: e0 + 7.0 * 0.2 + 5e-6,
                vector: bump(7),
            },
            EigenPair {
                value: e0 - 15.0 * 0.2,
                vector: bump(-15),
            },
            EigenPair {
                value: e0 + 3.5,
                vector: vec![1.0; n],
            },
        ];
        let states = ladder_classification(&pairs, &lat, &grid).unwrap();
        assert_eq!(states[1].class, StateClass::Ladder { ladder: 0, well: 7 });
        assert_eq!(states[0].class, StateClass::Ladder { ladder: 0, well: 0 });
        assert!(matches!(states[2].class, StateClass::Edge { well: -15 }));
        assert!(matches!(states[3].class, StateClass::Delocalized { .. }));
    }
}
