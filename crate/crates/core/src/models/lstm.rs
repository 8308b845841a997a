//! Single-layer LSTM with a peephole connection on the output gate.
//!
//! ```text
//! f_t  = σ(W_f x_t + U_f h_{t-1} + b_f)
//! C̃_t  = tanh(W_c x_t + U_c h_{t-1} + b_c)
//! i_t  = σ(W_i x_t + U_i h_{t-1} + b_i)
//! C_t  = i_t ⊙ C̃_t + f_t ⊙ C_{t-1}
//! o_t  = σ(W_o x_t + U_o h_{t-1} + V_o C_t + b_o)
//! h_t  = o_t ⊙ tanh(C_t)
//! ```
//!
//! The step output handed to downstream layers is the output gate `o_t`.

use super::head::add_into;
use super::TensorRef;
use crate::error::{Error, Result};
use crate::numerics::{sigmoid, Matrix, Rng, Vector};

#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub w_f: Matrix,
    pub u_f: Matrix,
    pub b_f: Vector,
    pub w_c: Matrix,
    pub u_c: Matrix,
    pub b_c: Vector,
    pub w_i: Matrix,
    pub u_i: Matrix,
    pub b_i: Vector,
    pub w_o: Matrix,
    pub u_o: Matrix,
    pub v_o: Matrix,
    pub b_o: Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub cell: Vector,
    pub hidden: Vector,
}

impl LstmState {
    pub fn zeros(d: usize) -> Self {
        LstmState {
            cell: vec![0.0; d],
            hidden: vec![0.0; d],
        }
    }
}

/// Everything one step computed, for back-propagation through time.
#[derive(Debug, Clone)]
pub(crate) struct StepCache {
    prev: LstmState,
    forget: Vector,
    candidate: Vector,
    input: Vector,
    cell: Vector,
    pub(crate) output: Vector,
    tanh_cell: Vector,
}

impl LstmParams {
    pub fn zeros(input_dim: usize, d: usize) -> Self {
        let w = || Matrix::zeros(d, input_dim);
        let u = || Matrix::zeros(d, d);
        LstmParams {
            w_f: w(),
            u_f: u(),
            b_f: vec![0.0; d],
            w_c: w(),
            u_c: u(),
            b_c: vec![0.0; d],
            w_i: w(),
            u_i: u(),
            b_i: vec![0.0; d],
            w_o: w(),
            u_o: u(),
            v_o: u(),
            b_o: vec![0.0; d],
        }
    }

    pub fn random(input_dim: usize, d: usize, rng: &mut Rng) -> Self {
        let mut w = || Matrix::random_fan_in(d, input_dim, rng);
        let (w_f, w_c, w_i, w_o) = (w(), w(), w(), w());
        let mut u = || Matrix::random_fan_in(d, d, rng);
        let (u_f, u_c, u_i, u_o, v_o) = (u(), u(), u(), u(), u());
        LstmParams {
            w_f,
            u_f,
            b_f: vec![0.0; d],
            w_c,
            u_c,
            b_c: vec![0.0; d],
            w_i,
            u_i,
            b_i: vec![0.0; d],
            w_o,
            u_o,
            v_o,
            b_o: vec![0.0; d],
        }
    }

    pub fn hidden(&self) -> usize {
        self.b_f.len()
    }

    pub fn input_dim(&self) -> usize {
        self.w_f.cols()
    }

    fn gate(&self, w: &Matrix, u: &Matrix, b: &[f64], x: &[f64], h: &[f64]) -> Vector {
        let mut a = b.to_vec();
        w.matvec_acc(x, &mut a);
        u.matvec_acc(h, &mut a);
        a
    }

    pub(crate) fn step_cached(&self, x: &[f64], prev: &LstmState) -> Result<StepCache> {
        let d = self.hidden();
        if x.len() != self.input_dim() {
            return Err(Error::shape("LSTM input", self.input_dim(), x.len()));
        }
        if prev.cell.len() != d || prev.hidden.len() != d {
            return Err(Error::shape(
                "LSTM state",
                d,
                format!("cell {} / hidden {}", prev.cell.len(), prev.hidden.len()),
            ));
        }
        let h = &prev.hidden;
        let forget: Vector = self
            .gate(&self.w_f, &self.u_f, &self.b_f, x, h)
            .into_iter()
            .map(sigmoid)
            .collect();
        let candidate: Vector = self
            .gate(&self.w_c, &self.u_c, &self.b_c, x, h)
            .into_iter()
            .map(f64::tanh)
            .collect();
        let input: Vector = self
            .gate(&self.w_i, &self.u_i, &self.b_i, x, h)
            .into_iter()
            .map(sigmoid)
            .collect();
        let cell: Vector = (0..d)
            .map(|j| input[j] * candidate[j] + forget[j] * prev.cell[j])
            .collect();
        let mut pre_o = self.gate(&self.w_o, &self.u_o, &self.b_o, x, h);
        self.v_o.matvec_acc(&cell, &mut pre_o);
        let output: Vector = pre_o.into_iter().map(sigmoid).collect();
        let tanh_cell: Vector = cell.iter().map(|c| c.tanh()).collect();
        Ok(StepCache {
            prev: prev.clone(),
            forget,
            candidate,
            input,
            cell,
            output,
            tanh_cell,
        })
    }

    /// Runs the cell over `xs` from the zero state.
    pub(crate) fn run(&self, xs: &[&[f64]]) -> Result<Vec<StepCache>> {
        let mut state = LstmState::zeros(self.hidden());
        let mut caches = Vec::with_capacity(xs.len());
        for x in xs {
            let c = self.step_cached(x, &state)?;
            state = c.state();
            caches.push(c);
        }
        Ok(caches)
    }

    /// Back-propagation through time. `d_outputs[t]` is the loss gradient
    /// with respect to the step output `o_t`; parameter gradients are added
    /// into `grad`.
    pub(crate) fn backward(
        &self,
        xs: &[&[f64]],
        caches: &[StepCache],
        d_outputs: &[Vector],
        grad: &mut LstmParams,
    ) {
        let d = self.hidden();
        let mut d_hidden_next = vec![0.0; d];
        let mut d_cell_next = vec![0.0; d];
        for t in (0..caches.len()).rev() {
            let c = &caches[t];
            let x = xs[t];
            let mut d_out = d_outputs[t].clone();
            let mut d_cell = d_cell_next.clone();
            for j in 0..d {
                let dh = d_hidden_next[j];
                d_out[j] += dh * c.tanh_cell[j];
                d_cell[j] += dh * c.output[j] * (1.0 - c.tanh_cell[j] * c.tanh_cell[j]);
            }
            let d_pre_o: Vector = (0..d)
                .map(|j| d_out[j] * c.output[j] * (1.0 - c.output[j]))
                .collect();
            // peephole: o_t reads C_t
            self.v_o.matvec_t_acc(&d_pre_o, &mut d_cell);

            let mut d_pre_f = vec![0.0; d];
            let mut d_pre_c = vec![0.0; d];
            let mut d_pre_i = vec![0.0; d];
            for j in 0..d {
                let dc = d_cell[j];
                d_pre_c[j] = dc * c.input[j] * (1.0 - c.candidate[j] * c.candidate[j]);
                d_pre_i[j] = dc * c.candidate[j] * c.input[j] * (1.0 - c.input[j]);
                d_pre_f[j] = dc * c.prev.cell[j] * c.forget[j] * (1.0 - c.forget[j]);
                d_cell_next[j] = dc * c.forget[j];
            }

            let h_prev = &c.prev.hidden;
            for (da, w, u, b) in [
                (&d_pre_f, &mut grad.w_f, &mut grad.u_f, &mut grad.b_f),
                (&d_pre_c, &mut grad.w_c, &mut grad.u_c, &mut grad.b_c),
                (&d_pre_i, &mut grad.w_i, &mut grad.u_i, &mut grad.b_i),
                (&d_pre_o, &mut grad.w_o, &mut grad.u_o, &mut grad.b_o),
            ] {
                w.add_outer(da, x);
                u.add_outer(da, h_prev);
                add_into(b, da);
            }
            grad.v_o.add_outer(&d_pre_o, &c.cell);

            d_hidden_next.iter_mut().for_each(|v| *v = 0.0);
            self.u_f.matvec_t_acc(&d_pre_f, &mut d_hidden_next);
            self.u_c.matvec_t_acc(&d_pre_c, &mut d_hidden_next);
            self.u_i.matvec_t_acc(&d_pre_i, &mut d_hidden_next);
            self.u_o.matvec_t_acc(&d_pre_o, &mut d_hidden_next);
        }
    }

    pub(crate) fn tensors(&self) -> [TensorRef<'_>; 13] {
        let m = TensorRef::matrix;
        [
            m("W_f", &self.w_f),
            m("U_f", &self.u_f),
            TensorRef::vector("b_f", &self.b_f),
            m("W_c", &self.w_c),
            m("U_c", &self.u_c),
            TensorRef::vector("b_c", &self.b_c),
            m("W_i", &self.w_i),
            m("U_i", &self.u_i),
            TensorRef::vector("b_i", &self.b_i),
            m("W_o", &self.w_o),
            m("U_o", &self.u_o),
            m("V_o", &self.v_o),
            TensorRef::vector("b_o", &self.b_o),
        ]
    }

    pub(crate) fn tensors_mut(&mut self) -> [&mut [f64]; 13] {
        [
            self.w_f.data_mut(),
            self.u_f.data_mut(),
            &mut self.b_f,
            self.w_c.data_mut(),
            self.u_c.data_mut(),
            &mut self.b_c,
            self.w_i.data_mut(),
            self.u_i.data_mut(),
            &mut self.b_i,
            self.w_o.data_mut(),
            self.u_o.data_mut(),
            self.v_o.data_mut(),
            &mut self.b_o,
        ]
    }
}

impl StepCache {
    pub(crate) fn state(&self) -> LstmState {
        LstmState {
            cell: self.cell.clone(),
            hidden: self
                .output
                .iter()
                .zip(&self.tanh_cell)
                .map(|(o, t)| o * t)
                .collect(),
        }
    }
}

/// One LSTM update. Returns the new state and the step output `o_t`.
pub fn lstm_step(p: &LstmParams, x: &[f64], prev: &LstmState) -> Result<(LstmState, Vector)> {
    let c = p.step_cached(x, prev)?;
    Ok((c.state(), c.output))
}
