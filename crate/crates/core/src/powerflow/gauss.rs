use super::{
    finish_report, initial_state, max_mismatch, power_mismatch, BusSets, DivergenceGuard, Method, PowerFlowError,
    PowerFlowOptions, PowerFlowReport, ReuseEvents, Start,
};
use crate::functions::AcState;
use crate::network::PowerSystem;
use crate::sparse::CscMatrix;
use num_complex::Complex64;

/// Gauss-Seidel power flow on the complex bus voltages.
pub struct GaussSeidel {
    pub options: PowerFlowOptions,
    /// Transposed admittance matrix (row access) and the revisions it matches.
    rows: Option<((u64, u64), CscMatrix<Complex64>)>,
    previous: Option<AcState>,
}

impl Default for GaussSeidel {
    fn default() -> Self {
        Self::new(PowerFlowOptions::gauss_seidel())
    }
}

fn row_product(rows: &CscMatrix<Complex64>, k: usize, v: &[Complex64]) -> Complex64 {
    let (idx, vals) = rows.col(k);
    idx.iter().zip(vals).map(|(&j, &y)| y * v[j]).sum()
}

impl GaussSeidel {
    pub fn new(options: PowerFlowOptions) -> Self {
        Self {
            options,
            rows: None,
            previous: None,
        }
    }

    pub fn reset(&mut self) {
        self.rows = None;
        self.previous = None;
    }

    pub fn solve(&mut self, sys: &PowerSystem, start: Start) -> Result<PowerFlowReport, PowerFlowError> {
        let revs = sys.revisions();
        let key = (revs.ac_pattern, revs.ac_values);
        let mut reuse = ReuseEvents::default();
        match &self.rows {
            Some((k, _)) if *k == key => reuse.factor_reused = true,
            _ => self.rows = Some((key, sys.ac().ybus().transpose())),
        }
        let rows = &self.rows.as_ref().expect("set above").1;
        let sets = BusSets::classify(sys)?;
        let (state, warm) = initial_state(sys, &sets, start, self.previous.as_ref());
        reuse.warm_start = warm;
        let (p_spec, q_spec) = sys.scheduled_injections();
        let target_mag = state.magnitude.clone();
        let mut v: Vec<Complex64> = state.phasors().to_vec();
        let mut s_spec: Vec<Complex64> = p_spec.iter().zip(&q_spec).map(|(&p, &q)| Complex64::new(p, q)).collect();
        let pv: Vec<usize> = sets.pvpq.iter().copied().filter(|&i| sets.voltage_controlled[i]).collect();

        let mut trace = Vec::new();
        let mut guard = DivergenceGuard::new(self.options.divergence_window);
        let mut iterations = 0;
        let mut state = state;
        loop {
            let (dp, dq) = power_mismatch(sys, &state, &p_spec, &q_spec);
            let mismatch = max_mismatch(&sets, &dp, &dq);
            trace.push(mismatch);
            if mismatch < self.options.tolerance {
                break;
            }
            if guard.diverged(mismatch) {
                return Err(PowerFlowError::Diverged { iterations, mismatch });
            }
            if iterations >= self.options.max_iterations {
                return Err(PowerFlowError::MaxIterations { iterations, mismatch });
            }
            for &k in &sets.pq {
                let ykk = rows.get(k, k);
                let step = ((s_spec[k] / v[k]).conj() - row_product(rows, k, &v)) / ykk;
                v[k] += step;
            }
            for &k in &pv {
                s_spec[k].im = (v[k] * row_product(rows, k, &v).conj()).im;
                let ykk = rows.get(k, k);
                let step = ((s_spec[k] / v[k]).conj() - row_product(rows, k, &v)) / ykk;
                v[k] += step;
                v[k] = v[k] / v[k].norm() * target_mag[k];
            }
            if v.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
                return Err(PowerFlowError::Singular("non-finite Gauss-Seidel iterate".into()));
            }
            state = AcState::from_phasors(&v);
            iterations += 1;
        }
        self.previous = Some(state.clone());
        Ok(finish_report(sys, Method::GaussSeidel, state, iterations, trace, reuse))
    }
}
