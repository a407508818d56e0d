use super::LlnError;
use crate::ensembles::{mean_semigroup, Atom, EnsembleError, GeneratorEnsemble, MeanMode};
use crate::lp_core::{matexp, operator_to_json, LinalgError, TruncOperator};

/// Largest `n` accepted by [`f_term`].
pub const BRACKET_MAX_N: usize = 6;
/// Largest `n` accepted by the variance oracle (`atoms^n` tuples).
pub const ORACLE_MAX_N: usize = 3;
/// Max entry difference allowed between the two variance computations.
pub const ORACLE_TOLERANCE: f64 = 1e-10;

fn product(factors: impl IntoIterator<Item = TruncOperator>, dim: usize) -> Result<TruncOperator, LinalgError> {
    let mut acc: Option<TruncOperator> = None;
    for f in factors {
        acc = Some(match acc {
            None => f,
            Some(a) => a.compose(&f)?,
        });
    }
    Ok(acc.unwrap_or_else(|| TruncOperator::identity(dim)))
}

/// `W_n(t) = exp(A_1 t/n) ... exp(A_n t/n)`, multiplied left to right.
pub fn composition_w_n(generators: &[TruncOperator], t: f64, tol: f64) -> Result<TruncOperator, LlnError> {
    let first = generators
        .first()
        .ok_or_else(|| LlnError::InvalidArgument("no generators".into()))?;
    let dim = first.dim();
    if let Some(bad) = generators.iter().find(|a| a.dim() != dim) {
        return Err(LinalgError::DimensionMismatch { left: dim, right: bad.dim() }.into());
    }
    let s = t / generators.len() as f64;
    let factors = generators
        .iter()
        .map(|a| matexp(a, s, tol))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(product(factors, dim)?)
}

/// `Delta(t) = exp(A t) - E exp(A t)` for one sample `a`.
pub fn delta_term(
    e: &dyn GeneratorEnsemble,
    a: &TruncOperator,
    t: f64,
    mode: MeanMode,
    tol: f64,
) -> Result<TruncOperator, LlnError> {
    let f = mean_semigroup(e, t, mode, tol)?;
    Ok(matexp(a, t, tol)?.sub(&f)?)
}

/// All strictly increasing `k`-subsets of `0..n`.
pub fn bracket_positions(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k <= n {
        rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    }
    out
}

fn check_positions(positions: &[usize], n: usize) -> Result<(), LlnError> {
    if positions.windows(2).any(|w| w[1] <= w[0]) {
        return Err(LlnError::InvalidArgument(format!("positions {positions:?} are not increasing")));
    }
    if positions.iter().any(|&a| a >= n) {
        return Err(LlnError::InvalidArgument(format!("positions {positions:?} outside 0..{n}")));
    }
    Ok(())
}

/// Product over `i in 0..n` of `delta(i)` when `i` is in `positions` and `mean` otherwise.
fn bracket(
    mean: &TruncOperator,
    n: usize,
    positions: &[usize],
    mut delta: impl FnMut(usize) -> TruncOperator,
) -> Result<TruncOperator, LinalgError> {
    let mut factors = Vec::with_capacity(n);
    let mut next = positions.iter().peekable();
    for i in 0..n {
        if next.peek() == Some(&&i) {
            next.next();
            factors.push(delta(i));
        } else {
            factors.push(mean.clone());
        }
    }
    product(factors, mean.dim())
}

/// The bracket with `Delta_a(s)` (from `samples[a]`) at the given 0-based
/// positions and `F(s) = E exp(A s)` elsewhere, `n = samples.len()`. Summed
/// over all position sets at `s = t/n` it reproduces `W_n(t)`.
pub fn f_term(
    e: &dyn GeneratorEnsemble,
    samples: &[TruncOperator],
    s: f64,
    positions: &[usize],
    mode: MeanMode,
    tol: f64,
) -> Result<TruncOperator, LlnError> {
    let n = samples.len();
    if n == 0 || n > BRACKET_MAX_N {
        return Err(LlnError::InvalidArgument(format!("bracket length {n} outside 1..={BRACKET_MAX_N}")));
    }
    check_positions(positions, n)?;
    let f = mean_semigroup(e, s, mode, tol)?;
    let deltas = positions
        .iter()
        .map(|&a| Ok(matexp(&samples[a], s, tol)?.sub(&f)?))
        .collect::<Result<Vec<_>, LlnError>>()?;
    let mut it = deltas.into_iter();
    Ok(bracket(&f, n, positions, |_| it.next().expect("one delta per position"))?)
}

fn gram(u: &TruncOperator) -> Result<TruncOperator, LinalgError> {
    u.adjoint().compose(u)
}

/// Iterate over all index tuples in `0..base` of length `len`.
fn for_each_tuple(base: usize, len: usize, mut f: impl FnMut(&[usize]) -> Result<(), LlnError>) -> Result<(), LlnError> {
    let mut idx = vec![0usize; len];
    loop {
        f(&idx)?;
        let mut i = 0;
        loop {
            if i == len {
                return Ok(());
            }
            idx[i] += 1;
            if idx[i] < base {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

/// `var W_n(t)` computed (i) by enumerating all atom tuples and (ii) as the
/// sum of `E F^* F` over nonempty brackets.
pub fn variance_w_n_pair(
    e: &dyn GeneratorEnsemble,
    t: f64,
    n: usize,
    tol: f64,
) -> Result<(TruncOperator, TruncOperator), LlnError> {
    let atoms: &[Atom] = e.atoms().ok_or(EnsembleError::NotEnumerable(e.kind()))?;
    if n == 0 || n > ORACLE_MAX_N {
        return Err(LlnError::InvalidArgument(format!("oracle length {n} outside 1..={ORACLE_MAX_N}")));
    }
    let dim = e.dim();
    let s = t / n as f64;
    let exps = atoms
        .iter()
        .map(|a| matexp(&a.operator, s, tol))
        .collect::<Result<Vec<_>, _>>()?;
    let zero = TruncOperator::zeros(dim, e.field());

    let mut mean_w = zero.clone();
    let mut second = zero.clone();
    for_each_tuple(atoms.len(), n, |tuple| {
        let prob: f64 = tuple.iter().map(|&i| atoms[i].probability).product();
        let w = product(tuple.iter().map(|&i| exps[i].clone()), dim)?;
        mean_w = mean_w.add(&w.scale_real(prob))?;
        second = second.add(&gram(&w)?.scale_real(prob))?;
        Ok(())
    })?;
    let enumeration = second.sub(&gram(&mean_w)?)?;

    let mut f = zero.clone();
    for (a, ea) in atoms.iter().zip(&exps) {
        f = f.add(&ea.scale_real(a.probability))?;
    }
    let deltas = exps.iter().map(|ea| ea.sub(&f)).collect::<Result<Vec<_>, _>>()?;
    let mut bracket_sum = zero;
    for k in 1..=n {
        for positions in bracket_positions(n, k) {
            for_each_tuple(atoms.len(), k, |choice| {
                let prob: f64 = choice.iter().map(|&i| atoms[i].probability).product();
                let mut slot = 0;
                let b = bracket(&f, n, &positions, |_| {
                    let d = deltas[choice[slot]].clone();
                    slot += 1;
                    d
                })?;
                bracket_sum = bracket_sum.add(&gram(&b)?.scale_real(prob))?;
                Ok(())
            })?;
        }
    }
    Ok((enumeration, bracket_sum))
}

/// Enumerated `var W_n(t)`, checked against the bracket sum to [`ORACLE_TOLERANCE`].
pub fn variance_w_n_oracle(e: &dyn GeneratorEnsemble, t: f64, n: usize, tol: f64) -> Result<TruncOperator, LlnError> {
    let (enumeration, bracket_sum) = variance_w_n_pair(e, t, n, tol)?;
    let max_diff = enumeration.max_abs_diff(&bracket_sum);
    if !(max_diff <= ORACLE_TOLERANCE) {
        return Err(LlnError::OracleMismatch {
            max_diff,
            enumeration: operator_to_json(&enumeration),
            bracket_sum: operator_to_json(&bracket_sum),
        });
    }
    Ok(enumeration)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::DiscreteAtoms;

    #[test]
    fn subsets() {
        assert_eq!(bracket_positions(3, 0), vec![Vec::<usize>::new()]);
        assert_eq!(bracket_positions(3, 2), vec![vec![0, 1], vec![0, 2], vec![1, 2]]);
        assert_eq!(bracket_positions(4, 4).len(), 1);
        assert!(bracket_positions(2, 3).is_empty());
    }

    #[test]
    fn zero_generators_compose_to_identity() {
        let z = TruncOperator::zeros(3, crate::lp_core::Field::Real);
        let w = composition_w_n(&[z.clone(), z.clone(), z], 2.0, 1e-12).unwrap();
        assert_eq!(w.max_abs_diff(&TruncOperator::identity(3)), 0.0);
    }

    #[test]
    fn rank_one_composition_is_affine() {
        let gens = [
            TruncOperator::ket_bra(5, 0, 1).unwrap(),
            TruncOperator::ket_bra(5, 0, 3).unwrap(),
            TruncOperator::ket_bra(5, 0, 1).unwrap(),
        ];
        let t = 1.5;
        let w = composition_w_n(&gens, t, 1e-12).unwrap();
        let mut expected = TruncOperator::identity(5);
        for a in &gens {
            expected = expected.add(&a.scale_real(t / 3.0)).unwrap();
        }
        assert!(w.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn degenerate_brackets() {
        let a = TruncOperator::diagonal_real(&[1.0, 0.0]);
        let b = TruncOperator::diagonal_real(&[0.0, 1.0]);
        let e = DiscreteAtoms::uniform(vec![a.clone(), b.clone()]).unwrap();
        let samples = [a.clone(), b.clone(), a];
        let f = mean_semigroup(&e, 0.4, MeanMode::ClosedForm, 1e-12).unwrap();
        let k0 = f_term(&e, &samples, 0.4, &[], MeanMode::ClosedForm, 1e-12).unwrap();
        assert!(k0.max_abs_diff(&f.power(3)) < 1e-14);
        let all = f_term(&e, &samples, 0.4, &[0, 1, 2], MeanMode::ClosedForm, 1e-12).unwrap();
        let mut expected = TruncOperator::identity(2);
        for s in &samples {
            expected = expected.compose(&delta_term(&e, s, 0.4, MeanMode::ClosedForm, 1e-12).unwrap()).unwrap();
        }
        assert!(all.max_abs_diff(&expected) < 1e-14);
        assert!(f_term(&e, &samples, 0.4, &[1, 1], MeanMode::ClosedForm, 1e-12).is_err());
        assert!(f_term(&e, &samples, 0.4, &[3], MeanMode::ClosedForm, 1e-12).is_err());
    }

    #[test]
    fn two_atom_diagonal_oracle() {
        let e = DiscreteAtoms::uniform(vec![
            TruncOperator::diagonal_real(&[1.0, 0.0]),
            TruncOperator::diagonal_real(&[0.0, 1.0]),
        ])
        .unwrap();
        let (i, ii) = variance_w_n_pair(&e, 1.0, 2, 1e-12).unwrap();
        assert!(i.max_abs_diff(&ii) < 1e-10);
        assert!(i.max_abs() > 0.0);
        assert!(variance_w_n_oracle(&e, 1.0, 2, 1e-12).is_ok());
    }

    #[test]
    fn deterministic_oracle_is_zero() {
        let a = TruncOperator::ket_bra(3, 0, 1).unwrap().add(&TruncOperator::identity(3)).unwrap();
        let e = DiscreteAtoms::uniform(vec![a]).unwrap();
        for n in 1..=3 {
            let (i, ii) = variance_w_n_pair(&e, 0.7, n, 1e-12).unwrap();
            assert!(i.max_abs() < 1e-12 && ii.max_abs() < 1e-12);
        }
    }
}
