//! Existence and uniqueness diagnostics for the estimate.
//!
//! A sample `P` has a unique estimate iff every proper subspace `V ≠ 0`
//! satisfies `∫ dim(U ∩ V) dP(U) < (r/m) dim V`. A single `V` violating this
//! is therefore a certificate of non-uniqueness, and [`Witness`] stores one.
//!
//! Deciding the condition over all `V` has no general algorithm. This module
//! is exact on `Gr(m, 1)` ([`check_r1`]) and on pairwise-skew samples in
//! `Gr(4, 2)` ([`check_gr42`]); elsewhere [`witness_search`] either finds a
//! certificate or reports `Undecided`. The counting machinery
//! ([`enumerate_b`], [`lp_vertex_max`], [`sample_size_bound`]) gives the
//! sample sizes beyond which almost every sample has a unique estimate.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_rational::Ratio;
use rand::seq::index::sample as sample_indices;
use rand::Rng;

use crate::error::{Error, Result};
use crate::grassmann::{intersection_dim, numerical_rank, subspace_from_matrix, Subspace, DEFAULT_RANK_TOLERANCE};
use crate::likelihood::{degenerate_directions, EmpiricalMeasure, DEFAULT_DEGENERACY_TOLERANCE};
use crate::scalar::{Field, ScalarField};
use crate::solver::FitReport;
use crate::summation::CompensatedSum;

/// [`check_r1`] refuses to enumerate more candidate spans than this.
pub const MAX_R1_SUBSETS: u128 = 1 << 20;

/// `enumerate_b` refuses ambient dimensions above this.
pub const MAX_ENUMERATION_DIM: usize = 8;

/// Relative threshold on the discriminant below which four lines have a
/// single (tangent) common transversal.
pub const TANGENCY_THRESHOLD: f64 = 1e-10;

/// Relative singular-value threshold below which the four meeting conditions
/// are treated as dependent.
pub const PLUCKER_RANK_THRESHOLD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerdictStatus {
    Unique,
    NotUnique,
    Undecided,
}

impl VerdictStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            VerdictStatus::Unique => "unique",
            VerdictStatus::NotUnique => "not-unique",
            VerdictStatus::Undecided => "undecided",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerdictMethod {
    R1Exact,
    Gr42Exact,
    WitnessSearch,
    LPBoundGeneric,
    SolverDiagnostic,
}

impl VerdictMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            VerdictMethod::R1Exact => "r1-exact",
            VerdictMethod::Gr42Exact => "gr42-exact",
            VerdictMethod::WitnessSearch => "witness-search",
            VerdictMethod::LPBoundGeneric => "lp-bound-generic",
            VerdictMethod::SolverDiagnostic => "solver-diagnostic",
        }
    }
}

/// A subspace `V` with `d_k = dim(U_k ∩ V)` and `Σ w_k d_k − (r/m) dim V`.
#[derive(Debug, Clone)]
pub struct Witness<S: Field> {
    pub subspace: Subspace<S>,
    pub intersection_dims: Vec<usize>,
    pub value: f64,
}

impl<S: Field> Witness<S> {
    pub fn dim(&self) -> usize {
        self.subspace.dim()
    }

    /// Whether `V` violates the uniqueness condition.
    pub fn violates(&self) -> bool {
        self.value >= 0.0
    }
}

#[derive(Debug, Clone)]
pub struct UniquenessVerdict<S: Field> {
    pub status: VerdictStatus,
    pub witness: Option<Witness<S>>,
    pub method: VerdictMethod,
    pub notes: String,
}

impl<S: Field> UniquenessVerdict<S> {
    fn unique(method: VerdictMethod, notes: impl Into<String>) -> Self {
        Self {
            status: VerdictStatus::Unique,
            witness: None,
            method,
            notes: notes.into(),
        }
    }

    fn not_unique(method: VerdictMethod, witness: Witness<S>, notes: impl Into<String>) -> Self {
        debug_assert!(witness.violates());
        Self {
            status: VerdictStatus::NotUnique,
            witness: Some(witness),
            method,
            notes: notes.into(),
        }
    }

    fn undecided(method: VerdictMethod, witness: Option<Witness<S>>, notes: impl Into<String>) -> Self {
        Self {
            status: VerdictStatus::Undecided,
            witness,
            method,
            notes: notes.into(),
        }
    }
}

/// Evaluates `V` against the sample. For uniform weights the value is
/// `(m Σ d_k − n r s) / (n m)`, whose sign is exact.
pub fn evaluate_witness<S: Field>(p: &EmpiricalMeasure<S>, v: &Subspace<S>, tol: f64) -> Result<Witness<S>> {
    if v.ambient_dim() != p.ambient_dim() {
        return Err(Error::DimensionMismatch(format!(
            "subspace of F^{} against a sample in F^{}",
            v.ambient_dim(),
            p.ambient_dim()
        )));
    }
    let dims = p
        .atoms()
        .iter()
        .map(|u| intersection_dim(u, v, tol))
        .collect::<Result<Vec<_>>>()?;
    let (m, r, s) = (p.ambient_dim(), p.subspace_dim(), v.dim());
    let value = if p.is_uniform() {
        let n = p.len() as i64;
        let numerator = m as i64 * dims.iter().sum::<usize>() as i64 - n * (r * s) as i64;
        numerator as f64 / (n * m as i64) as f64
    } else {
        let mut acc = CompensatedSum::default();
        for (w, &d) in p.weights().iter().zip(&dims) {
            acc.add(w * d as f64);
        }
        acc.add(-((r * s) as f64) / m as f64);
        acc.value()
    };
    Ok(Witness {
        subspace: v.clone(),
        intersection_dims: dims,
        value,
    })
}

/// `Σ w_k dim(U_k ∩ V) − (r/m) dim V`; the sample has no unique estimate iff
/// this is `≥ 0` for some `V`.
pub fn condition_value<S: Field>(p: &EmpiricalMeasure<S>, v: &Subspace<S>) -> Result<f64> {
    Ok(evaluate_witness(p, v, DEFAULT_RANK_TOLERANCE)?.value)
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc.saturating_mul((n - i) as u128) / (i as u128 + 1))
}

/// Visits the `k`-subsets of `0..n` in lexicographic order until `f` returns `Some`.
fn first_subset<T>(n: usize, k: usize, mut f: impl FnMut(&[usize]) -> Option<T>) -> Option<T> {
    if k > n {
        return None;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        if let Some(t) = f(&idx) {
            return Some(t);
        }
        let pos = (0..k).rev().find(|&i| idx[i] < n - k + i)?;
        idx[pos] += 1;
        for j in pos + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn stack_frames<S: Field>(atoms: &[Subspace<S>], indices: &[usize]) -> DMatrix<S> {
    let cols: Vec<DVector<S>> = indices
        .iter()
        .flat_map(|&i| atoms[i].frame().column_iter().map(|c| c.into_owned()).collect::<Vec<_>>())
        .collect();
    DMatrix::from_columns(&cols)
}

/// Exact verdict on `Gr(m, 1)`.
///
/// Extremal `V` are spans of the sample points they contain, and such a span
/// of dimension `s < m` is spanned by `s` of the points, so it suffices to
/// try the spans of all subsets of at most `m − 1` points.
pub fn check_r1<S: Field>(p: &EmpiricalMeasure<S>) -> Result<UniquenessVerdict<S>> {
    let (m, n) = (p.ambient_dim(), p.len());
    if p.subspace_dim() != 1 {
        return Err(Error::DimensionMismatch(format!(
            "check_r1 needs a sample of lines, got r = {}",
            p.subspace_dim()
        )));
    }
    let subsets: u128 = (1..m).map(|k| binomial(n, k)).fold(0u128, u128::saturating_add);
    if subsets > MAX_R1_SUBSETS {
        return Err(Error::SampleTooLarge { subsets });
    }
    for k in 1..m.min(n + 1) {
        let found = first_subset(n, k, |idx| {
            let x = stack_frames(p.atoms(), idx);
            if numerical_rank(&x, DEFAULT_RANK_TOLERANCE) < k {
                return None;
            }
            let v = subspace_from_matrix(&x, DEFAULT_RANK_TOLERANCE).ok()?;
            let w = evaluate_witness(p, &v, DEFAULT_RANK_TOLERANCE).ok()?;
            w.violates().then_some(w)
        });
        if let Some(w) = found {
            let notes = format!(
                "{} of {} points lie in a subspace of dimension {}",
                w.intersection_dims.iter().sum::<usize>(),
                n,
                w.dim()
            );
            return Ok(UniquenessVerdict::not_unique(VerdictMethod::R1Exact, w, notes));
        }
    }
    Ok(UniquenessVerdict::unique(
        VerdictMethod::R1Exact,
        format!("every span of at most {} points holds fewer than n s/m points", m - 1),
    ))
}

/// Number of common transversals of four pairwise skew lines in `P³`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransversalCount {
    Two,
    One,
    Zero,
    Infinite,
}

impl TransversalCount {
    pub fn as_str(self) -> &'static str {
        match self {
            TransversalCount::Two => "two",
            TransversalCount::One => "one",
            TransversalCount::Zero => "zero",
            TransversalCount::Infinite => "infinite",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Transversals<S: Field> {
    pub count: TransversalCount,
    /// The transversal lines for `Two` and `One`; empty otherwise.
    pub lines: Vec<Subspace<S>>,
    pub discriminant: f64,
}

/// Plücker coordinates `(p12, p13, p14, p23, p24, p34)` of the line spanned by `a`, `b`.
fn plucker<S: Field>(frame: &DMatrix<S>) -> [S; 6] {
    let (a, b) = (frame.column(0), frame.column(1));
    let p = |i: usize, j: usize| a[i] * b[j] - a[j] * b[i];
    [p(0, 1), p(0, 2), p(0, 3), p(1, 2), p(1, 3), p(2, 3)]
}

/// Coefficients of `q ↦ ω(p, q)`, where `ω(p, q) = 0` iff the lines meet.
fn meeting_row<S: Field>(p: &[S; 6]) -> [S; 6] {
    [p[5], -p[4], p[3], p[2], -p[1], p[0]]
}

/// `½ ω(p, q)`, the polarization of the Klein quadric `p12p34 − p13p24 + p14p23`.
fn klein_form<S: Field>(p: &[S], q: &[S]) -> S {
    let half = S::from_real(0.5);
    (p[0] * q[5] + p[5] * q[0] - p[1] * q[4] - p[4] * q[1] + p[2] * q[3] + p[3] * q[2]) * half
}

/// The line with Plücker vector `l`: the range of its antisymmetric matrix.
fn line_from_plucker<S: Field>(l: &[S]) -> Result<Subspace<S>> {
    let mut mat = DMatrix::<S>::zeros(4, 4);
    let pairs = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
    for (k, &(i, j)) in pairs.iter().enumerate() {
        mat[(i, j)] = l[k];
        mat[(j, i)] = -l[k];
    }
    let svd = mat.svd(true, false);
    let u = svd.u.expect("requested left singular vectors");
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let x = DMatrix::from_columns(&[u.column(order[0]).into_owned(), u.column(order[1]).into_owned()]);
    subspace_from_matrix(&x, DEFAULT_RANK_TOLERANCE)
}

/// Lines of `F⁴` meeting each of four pairwise skew 2-planes.
///
/// Each condition "V meets U_k" is linear in the Plücker vector of `V`; the
/// four conditions cut out a pencil `λa + μb`, which meets the Klein quadric
/// where `Q(a)λ² + 2Bλμ + Q(b)μ² = 0`. The discriminant `B² − Q(a)Q(b)`
/// decides between two, one and (over the reals) zero transversals. A rank
/// drop in the conditions means the four lines lie on one quadric surface.
pub fn common_transversals<S: Field>(lines: &[Subspace<S>; 4]) -> Result<Transversals<S>> {
    for u in lines {
        if u.ambient_dim() != 4 || u.dim() != 2 {
            return Err(Error::DimensionMismatch(format!(
                "common_transversals needs lines in Gr(4, 2), got Gr({}, {})",
                u.ambient_dim(),
                u.dim()
            )));
        }
    }
    for i in 0..4 {
        for j in i + 1..4 {
            if intersection_dim(&lines[i], &lines[j], DEFAULT_RANK_TOLERANCE)? > 0 {
                return Err(Error::DegenerateConfiguration(format!("lines {i} and {j} meet")));
            }
        }
    }
    let mut system = DMatrix::<S>::zeros(4, 6);
    for (k, u) in lines.iter().enumerate() {
        let row = meeting_row(&plucker(u.frame()));
        let norm = row.iter().map(|z| z.modulus_squared()).sum::<f64>().sqrt();
        for (c, z) in row.iter().enumerate() {
            system[(k, c)] = z.unscale(norm);
        }
    }
    let mut padded = DMatrix::<S>::zeros(6, 6);
    padded.rows_mut(0, 4).copy_from(&system);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let mut order: Vec<usize> = (0..6).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let sv: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    if sv[3] < PLUCKER_RANK_THRESHOLD * sv[0] {
        return Ok(Transversals {
            count: TransversalCount::Infinite,
            lines: Vec::new(),
            discriminant: 0.0,
        });
    }
    // v_t rows are conjugated null vectors; conjugate back.
    let a: Vec<S> = v_t.row(order[4]).iter().map(|z| z.conjugate()).collect();
    let b: Vec<S> = v_t.row(order[5]).iter().map(|z| z.conjugate()).collect();
    let qa = klein_form(&a, &a);
    let qb = klein_form(&b, &b);
    let bb = klein_form(&a, &b);
    let disc = bb * bb - qa * qb;
    let scale = qa.modulus().max(qb.modulus()).max(bb.modulus());
    let tangent = disc.modulus() < TANGENCY_THRESHOLD * scale * scale;

    let real_disc = match S::FIELD {
        ScalarField::Real => disc.real(),
        ScalarField::Complex => disc.modulus(),
    };
    if !tangent && S::FIELD == ScalarField::Real && disc.real() < 0.0 {
        return Ok(Transversals {
            count: TransversalCount::Zero,
            lines: Vec::new(),
            discriminant: real_disc,
        });
    }

    // Roots of the binary form, with the larger end coefficient as leading one.
    let (lead, trail, first, second) = if qa.modulus() >= qb.modulus() {
        (qa, qb, &a, &b)
    } else {
        (qb, qa, &b, &a)
    };
    let combine = |t: S| -> Vec<S> { first.iter().zip(second).map(|(&x, &y)| x * t + y).collect() };
    let mut roots = Vec::new();
    if tangent {
        roots.push(-bb / lead);
    } else {
        let sq = disc.sqrt();
        let q = if (bb + sq).modulus() >= (bb - sq).modulus() {
            -(bb + sq)
        } else {
            -(bb - sq)
        };
        roots.push(q / lead);
        roots.push(trail / q);
    }
    let found = roots
        .into_iter()
        .map(|t| line_from_plucker(&combine(t)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Transversals {
        count: if tangent {
            TransversalCount::One
        } else {
            TransversalCount::Two
        },
        lines: found,
        discriminant: if tangent { 0.0 } else { real_disc },
    })
}

fn meets_all<S: Field>(v: &Subspace<S>, atoms: &[Subspace<S>]) -> Result<bool> {
    for u in atoms {
        if intersection_dim(u, v, DEFAULT_RANK_TOLERANCE)? == 0 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The line through the first basis vector of `u1` meeting `u2` and `u3`:
/// `span(p, U2) ∩ span(p, U3)`.
fn transversal_of_three<S: Field>(u1: &Subspace<S>, u2: &Subspace<S>, u3: &Subspace<S>) -> Result<Option<Subspace<S>>> {
    let point = subspace_from_matrix(&u1.frame().columns(0, 1).into_owned(), DEFAULT_RANK_TOLERANCE)?;
    let (Some(a), Some(b)) = (
        point.sum(u2, DEFAULT_RANK_TOLERANCE)?,
        point.sum(u3, DEFAULT_RANK_TOLERANCE)?,
    ) else {
        return Ok(None);
    };
    Ok(a.intersection(&b, DEFAULT_RANK_TOLERANCE)?.filter(|v| v.dim() == 2))
}

/// Exact verdict for pairwise skew samples on `Gr(4, 2)` with uniform weights.
///
/// For `n ≥ 3` points and hyperplanes can never violate the condition (a
/// point lies on at most one skew line, a hyperplane contains at most one),
/// so the estimate is unique iff no line meets every sample line.
pub fn check_gr42<S: Field>(p: &EmpiricalMeasure<S>) -> Result<UniquenessVerdict<S>> {
    if p.ambient_dim() != 4 || p.subspace_dim() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "check_gr42 needs a sample on Gr(4, 2), got Gr({}, {})",
            p.ambient_dim(),
            p.subspace_dim()
        )));
    }
    let method = VerdictMethod::Gr42Exact;
    if !p.is_uniform() {
        return Ok(UniquenessVerdict::undecided(method, None, "weighted sample; only uniform weights are decided"));
    }
    let atoms = p.atoms();
    let n = atoms.len();
    for i in 0..n {
        for j in i + 1..n {
            if intersection_dim(&atoms[i], &atoms[j], DEFAULT_RANK_TOLERANCE)? > 0 {
                return Ok(UniquenessVerdict::undecided(
                    method,
                    None,
                    format!("atoms {i} and {j} are not skew; try witness_search"),
                ));
            }
        }
    }
    if n <= 2 {
        let w = evaluate_witness(p, &atoms[0], DEFAULT_RANK_TOLERANCE)?;
        return Ok(UniquenessVerdict::not_unique(method, w, "a sample line holds half the mass"));
    }
    if n == 3 {
        return Ok(match transversal_of_three(&atoms[0], &atoms[1], &atoms[2])? {
            Some(v) => {
                let w = evaluate_witness(p, &v, DEFAULT_RANK_TOLERANCE)?;
                if w.violates() {
                    UniquenessVerdict::not_unique(method, w, "three skew lines always have a transversal")
                } else {
                    UniquenessVerdict::undecided(method, Some(w), "transversal construction lost precision")
                }
            }
            None => UniquenessVerdict::undecided(method, None, "transversal construction failed"),
        });
    }

    let mut all_infinite = true;
    let mut verdict = None;
    first_subset(n, 4, |idx| {
        let quad = [
            atoms[idx[0]].clone(),
            atoms[idx[1]].clone(),
            atoms[idx[2]].clone(),
            atoms[idx[3]].clone(),
        ];
        let t = match common_transversals(&quad) {
            Ok(t) => t,
            Err(e) => {
                verdict = Some(Err(e));
                return Some(());
            }
        };
        if t.count == TransversalCount::Infinite {
            return None;
        }
        all_infinite = false;
        for line in t.lines {
            match meets_all(&line, atoms) {
                Ok(true) => {
                    verdict = Some(evaluate_witness(p, &line, DEFAULT_RANK_TOLERANCE).map(|w| {
                        if w.violates() {
                            UniquenessVerdict::not_unique(method, w, format!("a line meets all {n} sample lines"))
                        } else {
                            UniquenessVerdict::undecided(method, Some(w), "transversal lost precision")
                        }
                    }));
                    return Some(());
                }
                Ok(false) => {}
                Err(e) => {
                    verdict = Some(Err(e));
                    return Some(());
                }
            }
        }
        let notes = match t.count {
            TransversalCount::Zero => format!("lines {idx:?} have no common real transversal"),
            _ => format!("no transversal of lines {idx:?} meets all {n} lines"),
        };
        verdict = Some(Ok(UniquenessVerdict::unique(method, notes)));
        Some(())
    });
    if let Some(v) = verdict {
        return v;
    }
    debug_assert!(all_infinite);
    // Every four lines lie on a common quadric: the whole sample is in one regulus.
    Ok(match transversal_of_three(&atoms[0], &atoms[1], &atoms[2])? {
        Some(v) if meets_all(&v, atoms)? => {
            let w = evaluate_witness(p, &v, DEFAULT_RANK_TOLERANCE)?;
            UniquenessVerdict::not_unique(method, w, "all sample lines lie in one regulus")
        }
        _ => UniquenessVerdict::undecided(method, None, "sample lines lie in one regulus but no transversal was found"),
    })
}

/// Heuristic search for a violating subspace among atoms, their sums and
/// their intersections. Any hit is a certificate; a miss is inconclusive.
pub fn witness_search<S: Field, R: Rng + ?Sized>(
    p: &EmpiricalMeasure<S>,
    iterations: usize,
    rng: &mut R,
) -> Result<UniquenessVerdict<S>> {
    let atoms = p.atoms();
    let n = atoms.len();
    let tol = DEFAULT_RANK_TOLERANCE;
    let mut best: Option<Witness<S>> = None;
    let consider = |v: &Subspace<S>, best: &mut Option<Witness<S>>| -> Result<bool> {
        let w = evaluate_witness(p, v, tol)?;
        let hit = w.violates();
        if best.as_ref().is_none_or(|b| w.value > b.value) {
            *best = Some(w);
        }
        Ok(hit)
    };

    let mut candidates: Vec<Subspace<S>> = atoms.to_vec();
    for i in 0..n.min(64) {
        for j in i + 1..n.min(64) {
            if let Some(v) = atoms[i].sum(&atoms[j], tol)? {
                candidates.push(v);
            }
            if let Some(v) = atoms[i].intersection(&atoms[j], tol)? {
                candidates.push(v);
            }
        }
    }
    for v in &candidates {
        if consider(v, &mut best)? {
            break;
        }
    }
    if !best.as_ref().is_some_and(Witness::violates) {
        for _ in 0..iterations {
            // Grow a random sum of atoms while it stays proper.
            let order = sample_indices(rng, n, n);
            let mut current: Option<Subspace<S>> = None;
            for i in order.iter() {
                let next = match &current {
                    None => Some(atoms[i].clone()),
                    Some(c) => c.sum(&atoms[i], tol)?,
                };
                match next {
                    Some(v) => {
                        let hit = consider(&v, &mut best)?;
                        current = Some(v);
                        if hit {
                            break;
                        }
                    }
                    None => break,
                }
            }
            if best.as_ref().is_some_and(Witness::violates) {
                break;
            }
            // Intersect a random atom with a random proper sum.
            if let (Some(c), true) = (&current, n > 0) {
                let k = rng.random_range(0..n);
                if let Some(v) = c.intersection(&atoms[k], tol)? {
                    if consider(&v, &mut best)? {
                        break;
                    }
                }
            }
        }
    }
    let method = VerdictMethod::WitnessSearch;
    Ok(match best {
        Some(w) if w.violates() => {
            let notes = format!("found V of dimension {} with value {:.6}", w.dim(), w.value);
            UniquenessVerdict::not_unique(method, w, notes)
        }
        Some(w) => {
            let notes = format!("best value {:.6} < 0; inconclusive", w.value);
            UniquenessVerdict::undecided(method, Some(w), notes)
        }
        None => UniquenessVerdict::undecided(method, None, "no candidate subspaces"),
    })
}

/// Almost-sure answer from the counting bound: samples of size outside
/// `B(m, r)` are generically unique. Never conclusive for a given sample.
pub fn lp_generic_verdict<S: Field>(m: usize, r: usize, n: usize) -> Result<UniquenessVerdict<S>> {
    let bound = sample_size_bound(m, r)?;
    let outside = if m <= MAX_ENUMERATION_DIM {
        !enumerate_b(m, r)?.contains(n as u64)
    } else {
        Ratio::from_integer(n as u64) > bound
    };
    let notes = if outside {
        format!("n = {n} is outside B({m}, {r}): almost every sample of this size has a unique estimate")
    } else {
        format!("n = {n} lies in B({m}, {r}): no generic conclusion")
    };
    Ok(UniquenessVerdict::undecided(VerdictMethod::LPBoundGeneric, None, notes))
}

/// Summarizes what a fit says about the sample. Numerical evidence only.
pub fn solver_diagnostic<S: Field>(p: &EmpiricalMeasure<S>, fit: &FitReport<S>) -> UniquenessVerdict<S> {
    let notes = if fit.converged {
        let kernel = degenerate_directions(p, &fit.estimate, DEFAULT_DEGENERACY_TOLERANCE).len();
        if kernel == 0 {
            format!("converged in {} iterations; Hessian nonsingular at the estimate", fit.iterations)
        } else {
            format!(
                "converged in {} iterations; Hessian has a {kernel}-dimensional kernel, estimate not unique",
                fit.iterations
            )
        }
    } else {
        format!(
            "no convergence ({}), residual {:.3e}",
            fit.divergence.as_str(),
            fit.final_residual
        )
    };
    UniquenessVerdict::undecided(VerdictMethod::SolverDiagnostic, None, notes)
}

fn check_dims(m: usize, r: usize, s: usize) -> Result<()> {
    if !(0 < r && r < m) || !(0 < s && s < m) {
        return Err(Error::OutOfRange(format!(
            "need 0 < r < m and 0 < s < m, got m = {m}, r = {r}, s = {s}"
        )));
    }
    Ok(())
}

/// Range `[max(0, r+s−m), min(r, s)]` of `dim(U ∩ V)`.
pub fn intersection_range(m: usize, r: usize, s: usize) -> (usize, usize) {
    ((r + s).saturating_sub(m), r.min(s))
}

/// Codimension `d(m + d − r − s)` of `{U : dim(U ∩ V) ≥ d}` in `Gr(m, r)`.
pub fn schubert_codim(m: usize, r: usize, s: usize, d: usize) -> Result<i64> {
    let (lo, hi) = intersection_range(m, r, s);
    if d < lo || d > hi {
        return Err(Error::OutOfRange(format!("d = {d} outside [{lo}, {hi}]")));
    }
    Ok(d as i64 * (m as i64 + d as i64 - r as i64 - s as i64))
}

/// Necessary conditions for a generic sample to admit `V` of dimension `s`
/// with `dim(U_k ∩ V) = d_k`: box bounds and `Σ codim ≤ dim Gr(m, s)`.
pub fn feasible_profile(m: usize, r: usize, s: usize, dims: &[usize]) -> bool {
    let (lo, hi) = intersection_range(m, r, s);
    if dims.iter().any(|&d| d < lo || d > hi) {
        return false;
    }
    let total: i64 = dims
        .iter()
        .map(|&d| d as i64 * (m as i64 + d as i64 - r as i64 - s as i64))
        .sum();
    total <= (s * (m - s)) as i64
}

/// Occurrence counts `n_i` of each intersection dimension `i ∈ [i0, i1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LPInstance {
    pub m: usize,
    pub r: usize,
    pub s: usize,
    pub i0: usize,
    pub i1: usize,
    /// `counts[k]` is `n_{i0 + k}`.
    pub counts: Vec<u64>,
}

impl LPInstance {
    pub fn new(m: usize, r: usize, s: usize, counts: Vec<u64>) -> Result<Self> {
        check_dims(m, r, s)?;
        let (i0, i1) = intersection_range(m, r, s);
        if counts.len() != i1 - i0 + 1 {
            return Err(Error::DimensionMismatch(format!(
                "expected {} counts, got {}",
                i1 - i0 + 1,
                counts.len()
            )));
        }
        Ok(Self { m, r, s, i0, i1, counts })
    }

    pub fn n(&self) -> u64 {
        self.counts.iter().sum()
    }

    fn coefficients(&self, i: usize) -> (i64, i64) {
        let (m, r, s, i) = (self.m as i64, self.r as i64, self.s as i64, i as i64);
        (i * (m + i - r - s), r * s - m * i)
    }

    /// `Σ i(m+i−r−s) n_i ≤ s(m−s)` and `Σ (rs − mi) n_i ≤ 0`.
    pub fn is_feasible(&self) -> bool {
        let (mut lhs1, mut lhs2) = (0i64, 0i64);
        for (k, &c) in self.counts.iter().enumerate() {
            let (a, b) = self.coefficients(self.i0 + k);
            lhs1 += a * c as i64;
            lhs2 += b * c as i64;
        }
        lhs1 <= (self.s * (self.m - self.s)) as i64 && lhs2 <= 0
    }

    /// The profile `d_1 ≥ d_2 ≥ …` with these counts.
    pub fn profile(&self) -> Vec<usize> {
        let mut dims = Vec::new();
        for (k, &c) in self.counts.iter().enumerate().rev() {
            dims.extend(std::iter::repeat_n(self.i0 + k, c as usize));
        }
        dims
    }
}

/// `B(m, r) = ⋃_s B(m, r, s)` with one certifying count vector per element.
#[derive(Debug, Clone)]
pub struct SampleSizeSet {
    pub m: usize,
    pub r: usize,
    /// For each `s = 1..m−1`, the elements of `B(m, r, s)` with certificates.
    pub per_s: Vec<(usize, BTreeMap<u64, LPInstance>)>,
}

impl SampleSizeSet {
    pub fn values(&self) -> Vec<u64> {
        let mut all: Vec<u64> = self.per_s.iter().flat_map(|(_, b)| b.keys().copied()).collect();
        all.sort_unstable();
        all.dedup();
        all
    }

    pub fn contains(&self, n: u64) -> bool {
        self.per_s.iter().any(|(_, b)| b.contains_key(&n))
    }

    pub fn max(&self) -> Option<u64> {
        self.per_s.iter().filter_map(|(_, b)| b.keys().next_back().copied()).max()
    }

    pub fn max_for(&self, s: usize) -> Option<u64> {
        self.per_s
            .iter()
            .find(|(t, _)| *t == s)
            .and_then(|(_, b)| b.keys().next_back().copied())
    }
}

/// Enumerates `B(m, r, s)` for every `s` by depth-first search over count vectors.
///
/// Counts `n_i` with `i > i0` are bounded by the first inequality; given
/// those, the second inequality bounds `n_{i0}`, whose coefficient
/// `rs − m i0` is always positive.
pub fn enumerate_b(m: usize, r: usize) -> Result<SampleSizeSet> {
    if m > MAX_ENUMERATION_DIM {
        return Err(Error::TooLarge(format!("enumeration is limited to m ≤ {MAX_ENUMERATION_DIM}, got {m}")));
    }
    if !(0 < r && r < m) {
        return Err(Error::OutOfRange(format!("need 0 < r < m, got m = {m}, r = {r}")));
    }
    let mut per_s = Vec::new();
    for s in 1..m {
        let (i0, i1) = intersection_range(m, r, s);
        let width = i1 - i0 + 1;
        let mut found = BTreeMap::new();
        let mut counts = vec![0u64; width];
        enumerate_rec(m, r, s, i0, i1, i1, (s * (m - s)) as i64, &mut counts, &mut found);
        per_s.push((s, found));
    }
    Ok(SampleSizeSet { m, r, per_s })
}

#[allow(clippy::too_many_arguments)]
fn enumerate_rec(
    m: usize,
    r: usize,
    s: usize,
    i0: usize,
    i1: usize,
    i: usize,
    budget: i64,
    counts: &mut Vec<u64>,
    found: &mut BTreeMap<u64, LPInstance>,
) {
    let (mi, ri, si) = (m as i64, r as i64, s as i64);
    if i == i0 {
        let slack: i64 = (i0 + 1..=i1)
            .map(|j| (mi * j as i64 - ri * si) * counts[j - i0] as i64)
            .sum();
        if slack < 0 {
            return;
        }
        let lowest = (ri * si - mi * i0 as i64) as u64;
        let higher: u64 = counts[1..].iter().sum();
        for extra in 0..=(slack as u64 / lowest) {
            let n = higher + extra;
            if n >= 1 {
                found.entry(n).or_insert_with(|| {
                    let mut c = counts.clone();
                    c[0] = extra;
                    LPInstance {
                        m,
                        r,
                        s,
                        i0,
                        i1,
                        counts: c,
                    }
                });
            }
        }
        return;
    }
    let cost = i as i64 * (mi + i as i64 - ri - si);
    let most = budget / cost;
    for c in 0..=most {
        counts[i - i0] = c as u64;
        enumerate_rec(m, r, s, i0, i1, i - 1, budget - c * cost, counts, found);
    }
    counts[i - i0] = 0;
}

/// Largest `Σ n_i` over the two vertex families of the relaxed program, at
/// `i = ⌈rs/m⌉` and at `(i, j) = (⌈rs/m⌉ − 1, ⌈rs/m⌉)`.
pub fn lp_vertex_max(m: usize, r: usize, s: usize) -> Result<f64> {
    check_dims(m, r, s)?;
    let (i0, _) = intersection_range(m, r, s);
    let (mf, rf, sf) = (m as f64, r as f64, s as f64);
    let budget = sf * (mf - sf);
    let a = |i: usize| i as f64 * (mf + i as f64 - rf - sf);
    let b = |i: usize| rf * sf - mf * i as f64;
    let j = (r * s).div_ceil(m);
    let mut best = budget / a(j);
    if j > i0 {
        let i = j - 1;
        let det = a(i) * b(j) - a(j) * b(i);
        if det != 0.0 {
            let ni = budget * b(j) / det;
            let nj = -budget * b(i) / det;
            if ni >= 0.0 && nj >= 0.0 {
                best = best.max(ni + nj);
            }
        }
    }
    Ok(best)
}

/// `m² / (r(m − r))`: samples strictly larger almost surely have a unique estimate.
pub fn sample_size_bound(m: usize, r: usize) -> Result<Ratio<u64>> {
    if !(0 < r && r < m) {
        return Err(Error::OutOfRange(format!("need 0 < r < m, got m = {m}, r = {r}")));
    }
    Ok(Ratio::new((m * m) as u64, (r * (m - r)) as u64))
}
