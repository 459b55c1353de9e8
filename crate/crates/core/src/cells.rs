//! Activation signatures, cell identifiers and incidence sets.

use std::hash::{Hash, Hasher};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm, solve_spd, symmetric_eigenvalues, Matrix};
use crate::lp::LinearProgram;
use crate::multilinear::{entry_gradient, frozen_from_signs};
use crate::network::{NetworkShape, Params};
use crate::scalar::Scalar;

pub const DEFAULT_TAU: f64 = 1e-9;
pub const DEFAULT_MAX_ZEROS: usize = 20;

/// Position of a signature entry.
///
/// `point` and `neuron` are 0-based; `layer` runs over `1..=L+1`, with `L+1`
/// the loss layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntryCoord {
    pub point: usize,
    pub layer: usize,
    pub neuron: usize,
}

/// Ternary activation pattern ordered by point, then layer, then neuron.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Signature {
    entries: Vec<i8>,
    layer_dims: Vec<usize>,
}

impl Signature {
    pub fn entries(&self) -> &[i8] {
        &self.entries
    }

    pub fn per_point(&self) -> usize {
        self.layer_dims.iter().sum()
    }

    pub fn num_points(&self) -> usize {
        self.entries.len() / self.per_point()
    }

    pub fn coord(&self, idx: usize) -> EntryCoord {
        let per = self.per_point();
        let point = idx / per;
        let mut rest = idx % per;
        let mut layer = 1;
        for &d in &self.layer_dims {
            if rest < d {
                break;
            }
            rest -= d;
            layer += 1;
        }
        EntryCoord {
            point,
            layer,
            neuron: rest,
        }
    }

    pub fn index(&self, c: EntryCoord) -> usize {
        c.point * self.per_point() + self.layer_dims[..c.layer - 1].iter().sum::<usize>() + c.neuron
    }

    pub fn zero_indices(&self) -> Vec<usize> {
        (0..self.entries.len()).filter(|&j| self.entries[j] == 0).collect()
    }

    pub fn zero_count(&self) -> usize {
        self.entries.iter().filter(|&&s| s == 0).count()
    }

    pub fn is_smooth(&self) -> bool {
        self.zero_count() == 0
    }

    /// Pattern with every zero replaced by `fill`.
    pub fn resolved(&self, fill: i8) -> Vec<i8> {
        self.entries.iter().map(|&s| if s == 0 { fill } else { s }).collect()
    }
}

/// Identifier of an open cell: a ±1 pattern and its 64-bit FNV-1a content hash.
#[derive(Clone, Debug)]
pub struct CellId {
    entries: Vec<i8>,
    hash: u64,
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: impl IntoIterator<Item = u8>, mut h: u64) -> u64 {
    for b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// FNV-1a over the little-endian entry count followed by the pattern packed one
/// bit per entry (bit set for `+1`, least significant bit first).
pub fn cell_hash(entries: &[i8]) -> u64 {
    let h = fnv1a((entries.len() as u64).to_le_bytes(), FNV_OFFSET);
    let packed = entries.chunks(8).map(|c| {
        c.iter()
            .enumerate()
            .fold(0u8, |acc, (b, &s)| if s > 0 { acc | (1 << b) } else { acc })
    });
    fnv1a(packed, h)
}

impl CellId {
    pub fn new(entries: Vec<i8>) -> Result<Self> {
        if entries.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidInput("cell pattern must be ±1".into()));
        }
        let hash = cell_hash(&entries);
        Ok(Self { entries, hash })
    }

    pub fn entries(&self) -> &[i8] {
        &self.entries
    }

    pub fn hash_u64(&self) -> u64 {
        self.hash
    }

    pub fn hex(&self) -> String {
        format!("{:016x}", self.hash)
    }
}

impl PartialEq for CellId {
    fn eq(&self, other: &Self) -> bool {
        self.hash == other.hash && self.entries == other.entries
    }
}

impl Eq for CellId {}

impl Hash for CellId {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.hash);
    }
}

/// Zero entries of a signature on the non-differentiable set.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryReport {
    pub signature: Signature,
    pub zeros: Vec<EntryCoord>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum CellLocation {
    Cell(CellId),
    Boundary(BoundaryReport),
}

impl CellLocation {
    pub fn cell(&self) -> Option<&CellId> {
        match self {
            CellLocation::Cell(u) => Some(u),
            CellLocation::Boundary(_) => None,
        }
    }
}

fn layer_dims(shape: &NetworkShape) -> Vec<usize> {
    shape.dims[1..].to_vec()
}

/// Raw signed quantities behind the signature: hidden pre-activations and, for the
/// loss layer, the hinge arguments (`1 − yŷ`, or `1 + ŷ_r − ŷ_{r0}`).
pub fn signature_values<T: Scalar>(params: &Params<T>, data: &Dataset<T>) -> Result<Vec<T>> {
    if params.shape.input_dim() != data.dim() || params.shape.output_dim() != data.num_outputs() {
        return Err(Error::Shape("network does not match the dataset".into()));
    }
    let mut out = Vec::with_capacity(data.len() * params.shape.total_neurons());
    for i in 0..data.len() {
        let f = params.forward_unchecked(data.point(i));
        for a in &f.preactivations {
            out.extend_from_slice(a);
        }
        match data.label(i) {
            Some(y) => out.push(T::one() - T::lit(f64::from(y)) * f.output[0]),
            None => {
                let r0 = data.class_index(i);
                let top = f.output[r0];
                out.extend(f.output.iter().map(|&v| T::one() + v - top));
            }
        }
    }
    Ok(out)
}

fn ternary<T: Scalar>(a: T, tau: T) -> i8 {
    if a.abs() <= tau {
        0
    } else if a > T::zero() {
        1
    } else {
        -1
    }
}

pub fn signature<T: Scalar>(params: &Params<T>, data: &Dataset<T>, tau: f64) -> Result<Signature> {
    let tau = T::lit(tau);
    let entries = signature_values(params, data)?
        .into_iter()
        .map(|a| ternary(a, tau))
        .collect();
    Ok(Signature {
        entries,
        layer_dims: layer_dims(&params.shape),
    })
}

pub fn cell_of<T: Scalar>(params: &Params<T>, data: &Dataset<T>, tau: f64) -> Result<CellLocation> {
    let sig = signature(params, data, tau)?;
    Ok(location(sig))
}

pub(crate) fn location(sig: Signature) -> CellLocation {
    if sig.is_smooth() {
        let id = CellId::new(sig.entries).expect("pattern is ±1");
        CellLocation::Cell(id)
    } else {
        let zeros = sig.zero_indices().into_iter().map(|j| sig.coord(j)).collect();
        CellLocation::Boundary(BoundaryReport {
            signature: sig,
            zeros,
        })
    }
}

/// A cell whose closure contains the query point.
#[derive(Clone, Debug, PartialEq)]
pub struct AdjacentCell {
    pub id: CellId,
    /// Perturbation direction entering the cell to first order, when one was found.
    pub direction: Option<Vec<f64>>,
    /// True when the cell was only confirmed by random probing.
    pub via_probe: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Incidence {
    pub cells: Vec<AdjacentCell>,
    /// Zero entries whose linearized functional vanished (below 1e-12) for some completion.
    pub degenerate: Vec<EntryCoord>,
    pub zero_count: usize,
}

impl Incidence {
    pub fn ids(&self) -> Vec<CellId> {
        self.cells.iter().map(|c| c.id.clone()).collect()
    }
}

const PROBES: usize = 64;
const DEGENERATE_NORM: f64 = 1e-12;

fn params_seed(params: &Params<f64>) -> u64 {
    let bytes = params.to_flat().into_iter().flat_map(|x| x.to_bits().to_le_bytes());
    fnv1a(bytes, FNV_OFFSET)
}

/// Direction `d` with `g_j · d = σ_j` for all rows when the rows are independent.
fn min_norm_direction(rows: &[Vec<f64>], signs: &[f64]) -> Option<Vec<f64>> {
    let z = rows.len();
    let mut gram = Matrix::zeros(z, z);
    for a in 0..z {
        for b in 0..=a {
            let v = dot(&rows[a], &rows[b]);
            gram[(a, b)] = v;
            gram[(b, a)] = v;
        }
    }
    let ev = symmetric_eigenvalues(&gram);
    let top = *ev.last()?;
    if top <= 0.0 || ev[0] <= 1e-10 * top {
        return None;
    }
    let coef = solve_spd(&gram, signs)?;
    let n = rows[0].len();
    let mut d = vec![0.0; n];
    for (c, r) in coef.iter().zip(rows) {
        for (di, &ri) in d.iter_mut().zip(r) {
            *di += c * ri;
        }
    }
    let ok = rows
        .iter()
        .zip(signs)
        .all(|(r, &s)| s * dot(r, &d) > 0.5);
    ok.then_some(d)
}

/// Maximizes a shared slack `s` with `σ_j (g_j · d) ≥ s`, `d ∈ [−1,1]^P`, `s ≤ 1`.
fn lp_direction(rows: &[Vec<f64>], signs: &[f64]) -> Result<Option<Vec<f64>>> {
    let n = rows[0].len();
    let scale = rows.iter().map(|r| norm(r)).fold(0.0, f64::max);
    let mut lp = LinearProgram::maximize();
    let d: Vec<usize> = (0..n).map(|_| lp.var(0.0, -1.0, 1.0)).collect();
    let s = lp.var(1.0, f64::NEG_INFINITY, 1.0);
    for (r, &sg) in rows.iter().zip(signs) {
        let mut terms: Vec<(usize, f64)> = d.iter().zip(r).map(|(&v, &g)| (v, sg * g)).collect();
        terms.push((s, -1.0));
        lp.ge(&terms, 0.0);
    }
    match lp.solve()? {
        Some((slack, x)) if slack > 1e-12 * (1.0 + scale) => Ok(Some(x[..n].to_vec())),
        _ => Ok(None),
    }
}

fn probe_completion(
    params: &Params<f64>,
    data: &Dataset<f64>,
    target: &[i8],
    seed: u64,
) -> Result<bool> {
    let base = params.to_flat();
    let radius = 1e-6 * (1.0 + norm(&base));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = params.clone();
    for _ in 0..PROBES {
        let dir: Vec<f64> = (0..base.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
        let s = radius / norm(&dir).max(1e-300);
        let x: Vec<f64> = base.iter().zip(&dir).map(|(b, d)| b + s * d).collect();
        p.set_flat(&x);
        if signature(&p, data, 0.0)?.entries() == target {
            return Ok(true);
        }
    }
    Ok(false)
}

/// All cells whose closure contains `params`.
///
/// Every sign completion of the zero entries is tested for first-order
/// feasibility: a direct solve when the entry gradients are independent, a
/// slack-maximizing linear program otherwise, and finally random probing.
pub fn incidence_set(
    params: &Params<f64>,
    data: &Dataset<f64>,
    tau: f64,
    max_zeros: usize,
) -> Result<Incidence> {
    let sig = signature(params, data, tau)?;
    let zeros = sig.zero_indices();
    let z = zeros.len();
    if z == 0 {
        let id = CellId::new(sig.entries().to_vec())?;
        return Ok(Incidence {
            cells: vec![AdjacentCell {
                id,
                direction: None,
                via_probe: false,
            }],
            degenerate: Vec::new(),
            zero_count: 0,
        });
    }
    if z > max_zeros {
        return Err(Error::TooManyZeros {
            count: z,
            limit: max_zeros,
        });
    }
    let coords: Vec<EntryCoord> = zeros.iter().map(|&j| sig.coord(j)).collect();
    let seed = params_seed(params);
    type Outcome = (Option<AdjacentCell>, Vec<EntryCoord>);
    let outcomes: Vec<Result<Outcome>> = (0..1u64 << z)
        .into_par_iter()
        .map(|mask| {
            let mut entries = sig.entries().to_vec();
            for (b, &j) in zeros.iter().enumerate() {
                entries[j] = if mask >> b & 1 == 1 { 1 } else { -1 };
            }
            let frozen = frozen_from_signs::<f64>(&entries, &params.shape)?;
            let rows: Vec<Vec<f64>> = coords
                .iter()
                .map(|&c| entry_gradient(params, &frozen, data, c))
                .collect();
            let degenerate = coords
                .iter()
                .zip(&rows)
                .filter(|(_, r)| norm(r) < DEGENERATE_NORM)
                .map(|(&c, _)| c)
                .collect();
            let signs: Vec<f64> = zeros.iter().map(|&j| f64::from(entries[j])).collect();
            let mut direction = min_norm_direction(&rows, &signs);
            if direction.is_none() {
                direction = lp_direction(&rows, &signs)?;
            }
            let mut via_probe = false;
            if direction.is_none() {
                via_probe = probe_completion(params, data, &entries, seed ^ mask.wrapping_mul(FNV_PRIME))?;
                if !via_probe {
                    return Ok((None, degenerate));
                }
            }
            let id = CellId::new(entries)?;
            Ok((
                Some(AdjacentCell {
                    id,
                    direction,
                    via_probe,
                }),
                degenerate,
            ))
        })
        .collect();
    let mut cells = Vec::new();
    let mut degenerate = Vec::new();
    for o in outcomes {
        let (cell, deg) = o?;
        cells.extend(cell);
        degenerate.extend(deg);
    }
    degenerate.sort();
    degenerate.dedup();
    Ok(Incidence {
        cells,
        degenerate,
        zero_count: z,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Targets;

    fn one_neuron(w: f64, b: f64) -> (Params<f64>, Dataset<f64>) {
        let shape = NetworkShape::new(vec![1, 1, 1], 0.5).unwrap();
        let p = Params::from_flat(&shape, &[w, b, 3.0, 0.1]).unwrap();
        let d = Dataset::uniform(vec![vec![1.0]], Targets::Binary(vec![1])).unwrap();
        (p, d)
    }

    #[test]
    fn hidden_entry_signs() {
        let (p, d) = one_neuron(1.0, 0.5);
        assert_eq!(signature(&p, &d, 0.0).unwrap().entries()[0], 1);
        let (p, d) = one_neuron(1.0, -1.0);
        let sig = signature(&p, &d, 0.0).unwrap();
        assert_eq!(sig.entries()[0], 0);
        match location(sig) {
            CellLocation::Boundary(r) => assert_eq!(
                r.zeros,
                vec![EntryCoord { point: 0, layer: 1, neuron: 0 }]
            ),
            CellLocation::Cell(_) => panic!("expected a boundary point"),
        }
    }

    #[test]
    fn coord_round_trip() {
        let sig = Signature {
            entries: vec![1; 12],
            layer_dims: vec![2, 3, 1],
        };
        for j in 0..12 {
            assert_eq!(sig.index(sig.coord(j)), j);
        }
        assert_eq!(sig.coord(8), EntryCoord { point: 1, layer: 2, neuron: 0 });
    }

    #[test]
    fn hash_depends_on_pattern_and_length() {
        let a = CellId::new(vec![1, -1, 1]).unwrap();
        let b = CellId::new(vec![1, -1, -1]).unwrap();
        let c = CellId::new(vec![1, -1, 1, -1]).unwrap();
        assert_ne!(a.hash_u64(), b.hash_u64());
        assert_ne!(a.hash_u64(), c.hash_u64());
        assert_eq!(a.hash_u64(), CellId::new(vec![1, -1, 1]).unwrap().hash_u64());
        assert!(CellId::new(vec![0]).is_err());
    }

    #[test]
    fn single_zero_gives_two_cells() {
        let (p, d) = one_neuron(1.0, -1.0);
        let inc = incidence_set(&p, &d, 1e-9, 20).unwrap();
        assert_eq!(inc.zero_count, 1);
        assert_eq!(inc.cells.len(), 2);
        assert!(inc.degenerate.is_empty());
    }

    #[test]
    fn too_many_zeros() {
        let (p, d) = one_neuron(1.0, -1.0);
        assert_eq!(
            incidence_set(&p, &d, 1e-9, 0).unwrap_err(),
            Error::TooManyZeros { count: 1, limit: 0 }
        );
    }
}
