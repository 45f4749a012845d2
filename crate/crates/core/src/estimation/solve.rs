use super::model::MeasurementModel;
use crate::functions::AcState;
use crate::network::PowerSystem;
use crate::sparse::{CscMatrix, LuFactorization, LuOptions, Ordering, PatternMap, QrFactorization, SparseError, SparseVec};

/// Jacobian rows of one block restricted to its columns, and residuals.
#[derive(Debug, Clone)]
pub(crate) struct LocalBlock {
    /// Row-major `rows × columns` values.
    pub jacobian: Vec<f64>,
    pub residual: [f64; 2],
}

/// Linearization of a model at a state: per-block local Jacobians (`None`
/// for out-of-service blocks) plus predicted row values.
#[derive(Debug, Clone)]
pub(crate) struct Linearization {
    pub blocks: Vec<Option<LocalBlock>>,
    pub predicted: Vec<f64>,
}

pub(crate) fn linearize(model: &MeasurementModel, sys: &PowerSystem, x: &[f64]) -> Linearization {
    let state: Option<AcState> = matches!(model.layout.kind, super::ModelKind::Ac).then(|| model.layout.ac_state(x));
    let mut predicted = vec![0.0; model.rows.len()];
    let mut blocks = Vec::with_capacity(model.blocks.len());
    for b in &model.blocks {
        let nc = b.columns.len();
        let mut jacobian = vec![0.0; b.rows.len() * nc];
        let mut residual = [0.0; 2];
        for (slot, &r) in b.rows.iter().enumerate() {
            let (h, grad) = model.evaluate_row(sys, state.as_ref(), x, r);
            predicted[r] = h;
            residual[slot] = model.residual(r, h);
            for (c, d) in grad {
                let p = b.columns.binary_search(&c).expect("column in block support");
                jacobian[slot * nc + p] += d;
            }
        }
        blocks.push(b.active.then_some(LocalBlock { jacobian, residual }));
    }
    Linearization { blocks, predicted }
}

/// Weighted local rows `S·J` and residuals `S·r` of an active block.
pub(crate) fn weighted(model: &MeasurementModel, b: usize, local: &LocalBlock) -> (Vec<f64>, [f64; 2]) {
    let blk = &model.blocks[b];
    let nc = blk.columns.len();
    let mut a = local.jacobian.clone();
    if blk.rows.len() == 1 {
        let s = blk.sqrt_weight[0][0];
        a.iter_mut().for_each(|v| *v *= s);
    } else {
        for c in 0..nc {
            let w = blk.weigh([local.jacobian[c], local.jacobian[nc + c]]);
            a[c] = w[0];
            a[nc + c] = w[1];
        }
    }
    (a, blk.weigh(local.residual))
}

/// Gain matrix `JᵀΣ⁻¹J` on a pattern fixed at construction, with its
/// symmetric factorization.
#[derive(Debug, Clone)]
pub(crate) struct Gain {
    map: PatternMap,
    offsets: Vec<usize>,
    pub matrix: CscMatrix<f64>,
    pub factor: Option<LuFactorization>,
    pub symbolic_analyses: usize,
    pub refactorizations: usize,
}

impl Gain {
    pub fn new(model: &MeasurementModel) -> Result<Self, SparseError> {
        let m = model.layout.dim();
        let mut coords = Vec::new();
        let mut offsets = Vec::with_capacity(model.blocks.len());
        for b in &model.blocks {
            offsets.push(coords.len());
            for &p in &b.columns {
                for &q in &b.columns {
                    coords.push((p, q));
                }
            }
        }
        // Keep the diagonal present so an unmeasured state shows up as a
        // zero pivot rather than a structural gap.
        for j in 0..m {
            coords.push((j, j));
        }
        let (map, matrix) = PatternMap::build(m, m, &coords)?;
        Ok(Self {
            map,
            offsets,
            matrix,
            factor: None,
            symbolic_analyses: 0,
            refactorizations: 0,
        })
    }

    /// Fills the gain values and returns `JᵀΣ⁻¹r`.
    pub fn assemble(&mut self, model: &MeasurementModel, lin: &Linearization) -> Vec<f64> {
        let mut rhs = vec![0.0; model.layout.dim()];
        self.matrix.clear_values();
        for (b, local) in lin.blocks.iter().enumerate() {
            let Some(local) = local else { continue };
            let (a, rho) = weighted(model, b, local);
            let cols = &model.blocks[b].columns;
            let nc = cols.len();
            let nr = model.blocks[b].rows.len();
            let base = self.offsets[b];
            let values = self.matrix.values_mut();
            for p in 0..nc {
                for q in 0..nc {
                    let mut s = 0.0;
                    for r in 0..nr {
                        s += a[r * nc + p] * a[r * nc + q];
                    }
                    values[self.map.slot(base + p * nc + q)] += s;
                }
                for r in 0..nr {
                    rhs[cols[p]] += a[r * nc + p] * rho[r];
                }
            }
        }
        rhs
    }

    pub fn factorize(&mut self) -> Result<(), SparseError> {
        if let Some(f) = &mut self.factor {
            if f.refactor(&self.matrix).is_ok() {
                self.refactorizations += 1;
                return Ok(());
            }
        }
        self.factor = None;
        let f = LuFactorization::factor_with(&self.matrix, LuOptions::symmetric())?;
        self.symbolic_analyses += 1;
        self.factor = Some(f);
        Ok(())
    }

    /// First state column whose pivot is negligible, if any.
    pub fn deficient_columns(&self) -> Vec<usize> {
        let Some(f) = &self.factor else { return Vec::new() };
        let d = f.diagonal();
        let max = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        d.iter()
            .enumerate()
            .filter(|(_, v)| v.abs() <= 1e-12 * max || !v.is_finite())
            .map(|(k, _)| f.column_order()[k])
            .collect()
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        self.factor.as_ref().expect("factorized gain").solve(rhs)
    }
}

/// Weighted rectangular system `S·J` (active rows only) and `S·r`.
pub(crate) fn weighted_system(model: &MeasurementModel, lin: &Linearization) -> Result<(CscMatrix<f64>, Vec<f64>), SparseError> {
    let mut trip = Vec::new();
    let mut b = Vec::new();
    for (k, local) in lin.blocks.iter().enumerate() {
        let Some(local) = local else { continue };
        let (a, rho) = weighted(model, k, local);
        let cols = &model.blocks[k].columns;
        let nc = cols.len();
        for r in 0..model.blocks[k].rows.len() {
            let row = b.len();
            for (p, &c) in cols.iter().enumerate() {
                let v = a[r * nc + p];
                if v != 0.0 {
                    trip.push((row, c, v));
                }
            }
            b.push(rho[r]);
        }
    }
    let a = CscMatrix::from_triplets(b.len(), model.layout.dim(), &trip)?;
    Ok((a, b))
}

/// Least squares through Householder QR of the weighted Jacobian.
pub(crate) fn solve_orthogonal(a: &CscMatrix<f64>, b: &[f64]) -> Result<Vec<f64>, SparseError> {
    let qr = QrFactorization::factor_with(a, Ordering::MinimumDegree)?;
    qr.solve_least_squares(b)
}

/// Least squares through `P A Q = L U`: solve `LᵀL w = Lᵀ P b`, then
/// `U y = w` and `x = Q y`.
pub(crate) fn solve_peters_wilkinson(a: &CscMatrix<f64>, b: &[f64]) -> Result<Vec<f64>, SparseError> {
    let lu = LuFactorization::factor_with(a, LuOptions::default())?;
    let l = lu.unit_lower();
    let mut pb = vec![0.0; b.len()];
    for (i, &p) in lu.row_position().iter().enumerate() {
        pb[p] = b[i];
    }
    let rhs = l.tr_mul_vec(&pb);
    let ltl = LuFactorization::factor_with(&l.gram(), LuOptions::symmetric())?;
    let mut w = ltl.solve(&rhs);
    let d = lu.diagonal();
    let max = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if let Some(k) = d.iter().position(|v| v.abs() <= 1e-13 * max) {
        return Err(SparseError::RankDeficient {
            column: lu.column_order()[k],
            pivot: d[k].abs(),
        });
    }
    lu.solve_upper(&mut w);
    let mut x = vec![0.0; w.len()];
    for (k, &c) in lu.column_order().iter().enumerate() {
        x[c] = w[k];
    }
    Ok(x)
}

/// Unweighted Jacobian rows of every active row, keyed by row index.
pub(crate) fn jacobian_rows(model: &MeasurementModel, lin: &Linearization) -> Vec<(usize, SparseVec)> {
    let mut out = Vec::new();
    for (k, local) in lin.blocks.iter().enumerate() {
        let Some(local) = local else { continue };
        let blk = &model.blocks[k];
        let nc = blk.columns.len();
        for (slot, &r) in blk.rows.iter().enumerate() {
            let mut v = SparseVec::new();
            for (p, &c) in blk.columns.iter().enumerate() {
                let d = local.jacobian[slot * nc + p];
                if d != 0.0 {
                    v.push(c, d);
                }
            }
            out.push((r, v));
        }
    }
    out
}
