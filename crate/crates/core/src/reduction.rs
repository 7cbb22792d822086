//! Strain-mode selection and reduced beam models.
//!
//! A selection splits each node strain into allowed components (kept as unknowns)
//! and constrained components (frozen at their rest values).

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::actuation::{actuation_wrench, CableLayout, Loads};
use crate::dynamics::{assemble, AssembledOde};
use crate::error::{Error, Result};
use crate::kinematics::{interpolation_matrix, project_density, strain_at};
use crate::rod::Rod;
use crate::se3::Wrench;

/// Named beam theories plus arbitrary masks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Full,
    /// Bending curvatures only.
    EulerBernoulli,
    /// Torsion, bending and extension.
    ExtensibleKirchhoff,
    /// Bending and both shears.
    Timoshenko,
    /// `true` marks an allowed strain component, ordered (K_x, K_y, K_z, Q_x, Q_y, Q_z).
    Custom([bool; 6]),
}

impl Mode {
    pub fn mask(&self) -> [bool; 6] {
        match self {
            Mode::Full => [true; 6],
            Mode::EulerBernoulli => [false, true, true, false, false, false],
            Mode::ExtensibleKirchhoff => [true, true, true, true, false, false],
            Mode::Timoshenko => [false, true, true, false, true, true],
            Mode::Custom(m) => *m,
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    /// Accepts `full`, `euler_bernoulli`, `extensible_kirchhoff`, `timoshenko`,
    /// or a 6-character 0/1 mask such as `011000`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Mode::Full),
            "euler_bernoulli" => Ok(Mode::EulerBernoulli),
            "extensible_kirchhoff" => Ok(Mode::ExtensibleKirchhoff),
            "timoshenko" => Ok(Mode::Timoshenko),
            _ if s.len() == 6 && s.chars().all(|c| c == '0' || c == '1') => {
                let mut m = [false; 6];
                for (slot, c) in m.iter_mut().zip(s.chars()) {
                    *slot = c == '1';
                }
                Ok(Mode::Custom(m))
            }
            _ => Err(Error::InvalidModel(format!("unknown strain mode `{s}`"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Full => f.write_str("full"),
            Mode::EulerBernoulli => f.write_str("euler_bernoulli"),
            Mode::ExtensibleKirchhoff => f.write_str("extensible_kirchhoff"),
            Mode::Timoshenko => f.write_str("timoshenko"),
            Mode::Custom(m) => m.iter().try_for_each(|&b| f.write_str(if b { "1" } else { "0" })),
        }
    }
}

/// Allowed/constrained split of the six strain components, applied to every node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModeSelection {
    mode: Mode,
    allowed: Vec<usize>,
    constrained: Vec<usize>,
}

impl Default for ModeSelection {
    fn default() -> Self {
        Self::full()
    }
}

/// Builds the selection for `mode`. Fails for a mask that allows nothing.
pub fn make_selection(mode: Mode) -> Result<ModeSelection> {
    let mask = mode.mask();
    let allowed: Vec<usize> = (0..6).filter(|&i| mask[i]).collect();
    if allowed.is_empty() {
        return Err(Error::InvalidModel("a mode selection must allow at least one strain".into()));
    }
    let constrained = (0..6).filter(|&i| !mask[i]).collect();
    Ok(ModeSelection { mode, allowed, constrained })
}

impl ModeSelection {
    pub fn full() -> Self {
        Self { mode: Mode::Full, allowed: (0..6).collect(), constrained: Vec::new() }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Indices of the allowed strain components, increasing.
    pub fn allowed(&self) -> &[usize] {
        &self.allowed
    }

    pub fn constrained(&self) -> &[usize] {
        &self.constrained
    }

    /// Allowed components per node.
    pub fn per_node(&self) -> usize {
        self.allowed.len()
    }

    pub fn is_full(&self) -> bool {
        self.constrained.is_empty()
    }

    /// B_a, 6 × n_i.
    pub fn allowed_matrix(&self) -> DMatrix<f64> {
        selector(&self.allowed)
    }

    /// B_c, 6 × (6 − n_i).
    pub fn constrained_matrix(&self) -> DMatrix<f64> {
        selector(&self.constrained)
    }

    /// B̄_a = I_{nodes} ⊗ B_a.
    pub fn stacked_allowed_matrix(&self, nodes: usize) -> DMatrix<f64> {
        let n = self.per_node();
        let mut m = DMatrix::zeros(6 * nodes, n * nodes);
        for node in 0..nodes {
            for (j, &row) in self.allowed.iter().enumerate() {
                m[(6 * node + row, n * node + j)] = 1.0;
            }
        }
        m
    }

    /// B̄_aᵀ v for a stacked node vector.
    pub fn project(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        if !v.len().is_multiple_of(6) {
            return Err(Error::Dimension {
                what: "stacked node vector",
                expected: 6 * (v.len() / 6 + 1),
                found: v.len(),
            });
        }
        let nodes = v.len() / 6;
        Ok(DVector::from_iterator(
            self.per_node() * nodes,
            (0..nodes).flat_map(|node| self.allowed.iter().map(move |&c| v[6 * node + c])),
        ))
    }

    /// B̄_aᵀ M B̄_a for a square stacked matrix.
    pub fn project_square(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let idx = self.stacked_indices(m.nrows() / 6);
        DMatrix::from_fn(idx.len(), idx.len(), |i, j| m[(idx[i], idx[j])])
    }

    /// Positions inside a stacked node vector that hold allowed components.
    pub fn stacked_indices(&self, nodes: usize) -> Vec<usize> {
        (0..nodes).flat_map(|node| self.allowed.iter().map(move |&c| 6 * node + c)).collect()
    }

    /// q = B̄_a q̄ + B̄_c q̲, with q̲ taken from `rest`.
    pub fn lift(&self, reduced: &DVector<f64>, rest: &DVector<f64>) -> Result<DVector<f64>> {
        let nodes = rest.len() / 6;
        let expected = self.per_node() * nodes;
        if reduced.len() != expected || !rest.len().is_multiple_of(6) {
            return Err(Error::Dimension { what: "reduced state", expected, found: reduced.len() });
        }
        let mut q = rest.clone();
        for (k, idx) in self.stacked_indices(nodes).into_iter().enumerate() {
            q[idx] = reduced[k];
        }
        Ok(q)
    }
}

fn selector(rows: &[usize]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(6, rows.len());
    for (j, &r) in rows.iter().enumerate() {
        m[(r, j)] = 1.0;
    }
    m
}

/// B̄_aᵀ Φ(X)ᵀ B_c, which vanishes identically for any selection.
pub fn constraint_coupling(rod: &Rod, selection: &ModeSelection, x: f64) -> Result<DMatrix<f64>> {
    let phi = interpolation_matrix(rod, x)?;
    let bar = selection.stacked_allowed_matrix(rod.nodes());
    Ok(bar.transpose() * phi.transpose() * selection.constrained_matrix())
}

/// Constrained wrench at the tip, λ(L) = B_cᵀ(−Λ(L)T + F_tip).
pub fn constrained_wrench_profile(
    rod: &Rod,
    layout: &CableLayout,
    selection: &ModeSelection,
    loads: &Loads,
    q: &DVector<f64>,
) -> Result<DVector<f64>> {
    let wrench = tip_constraint_wrench(rod, layout, loads, q)?;
    Ok(DVector::from_iterator(selection.constrained.len(), selection.constrained.iter().map(|&c| wrench[c])))
}

/// Reduced dynamic system for allowed strains `reduced` and their rates.
///
/// Every block of the full stacked system is restricted to the allowed rows and
/// columns, and the constrained tip wrench enters the interior forcing as
/// `F̄_λ = B̄_aᵀ 𝒫ᵀ J(L)ᵀ B_c B_cᵀ(−Λ(L)T + F_tip)`.
pub fn reduced_dynamics(
    rod: &Rod,
    layout: &CableLayout,
    selection: &ModeSelection,
    loads: &Loads,
    reduced: &DVector<f64>,
    reduced_rates: &DVector<f64>,
) -> Result<AssembledOde> {
    let rest = rod.rest_state();
    let q = selection.lift(reduced, &rest)?;
    let qdot = selection.lift(reduced_rates, &DVector::zeros(rest.len()))?;
    let full = assemble(rod, layout, loads, &q, &qdot)?;
    let idx = selection.stacked_indices(rod.nodes());
    let rows = |m: &DMatrix<f64>| DMatrix::from_fn(idx.len(), m.ncols(), |i, j| m[(idx[i], j)]);
    let mut forcing = DVector::from_fn(idx.len(), |i, _| full.forcing[idx[i]]);
    if !selection.is_full() {
        let w = tip_constraint_wrench(rod, layout, loads, &q)?;
        let mut constrained = Wrench::zeros();
        for &c in selection.constrained() {
            constrained[c] = w[c];
        }
        let mut lambda = project_density(rod, &q, |_| Ok(Wrench::zeros()), &constrained)?;
        lambda.rows_mut(6 * rod.sections(), 6).fill(0.0);
        forcing += selection.project(&lambda)?;
    }
    Ok(AssembledOde {
        mass: selection.project_square(&full.mass),
        damping: selection.project_square(&full.damping),
        forcing,
        input: rows(&full.input),
        input_rate: rows(&full.input_rate),
    })
}

/// −Λ(L)T + F_tip, the wrench that the constrained strains must carry at the tip.
pub(crate) fn tip_constraint_wrench(
    rod: &Rod,
    layout: &CableLayout,
    loads: &Loads,
    q: &DVector<f64>,
) -> Result<crate::se3::Wrench> {
    let length = rod.length();
    let actuation = if loads.has_cable_load() {
        actuation_wrench(layout, &strain_at(rod, q, length)?, length, &loads.tensions)?
    } else {
        crate::se3::Wrench::zeros()
    };
    Ok(loads.tip - actuation)
}
