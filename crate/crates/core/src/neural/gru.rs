use rand::Rng;

use crate::error::{Error, Result};

use super::tape::{Tape, Tensor, Var};

/// Weights of one GRU layer. Input weights are `input_dim x hidden`,
/// recurrent weights `hidden x hidden`, biases `hidden`.
///
/// ```text
/// z  = σ(x·W_z + h·U_z + b_z)
/// r  = σ(x·W_r + h·U_r + b_r)
/// h~ = tanh(x·W_h + (r ⊙ h)·U_h + b_h)
/// h' = (1 - z) ⊙ h + z ⊙ h~
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct GruParams {
    pub w_z: Tensor,
    pub u_z: Tensor,
    pub b_z: Tensor,
    pub w_r: Tensor,
    pub u_r: Tensor,
    pub b_r: Tensor,
    pub w_h: Tensor,
    pub u_h: Tensor,
    pub b_h: Tensor,
}

pub(crate) const GRU_PARAM_NAMES: [&str; 9] = ["w_z", "u_z", "b_z", "w_r", "u_r", "b_r", "w_h", "u_h", "b_h"];

impl GruParams {
    /// Uniform in `±1/sqrt(hidden)`.
    pub fn init(input_dim: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        let mut input = || Tensor::uniform(vec![input_dim, hidden], bound, rng);
        let (w_z, w_r, w_h) = (input(), input(), input());
        let mut rest = |shape: Vec<usize>| Tensor::uniform(shape, bound, rng);
        Self {
            w_z,
            u_z: rest(vec![hidden, hidden]),
            b_z: rest(vec![hidden]),
            w_r,
            u_r: rest(vec![hidden, hidden]),
            b_r: rest(vec![hidden]),
            w_h,
            u_h: rest(vec![hidden, hidden]),
            b_h: rest(vec![hidden]),
        }
    }

    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        let w = || Tensor::zeros(vec![input_dim, hidden]);
        let u = || Tensor::zeros(vec![hidden, hidden]);
        let b = || Tensor::zeros(vec![hidden]);
        Self {
            w_z: w(),
            u_z: u(),
            b_z: b(),
            w_r: w(),
            u_r: u(),
            b_r: b(),
            w_h: w(),
            u_h: u(),
            b_h: b(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_z.rows()
    }

    pub fn hidden(&self) -> usize {
        self.u_z.rows()
    }

    pub fn tensors(&self) -> [&Tensor; 9] {
        [&self.w_z, &self.u_z, &self.b_z, &self.w_r, &self.u_r, &self.b_r, &self.w_h, &self.u_h, &self.b_h]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor; 9] {
        [
            &mut self.w_z,
            &mut self.u_z,
            &mut self.b_z,
            &mut self.w_r,
            &mut self.u_r,
            &mut self.b_r,
            &mut self.w_h,
            &mut self.u_h,
            &mut self.b_h,
        ]
    }

    pub fn bind(&self, tape: &mut Tape, requires_grad: bool) -> GruVars {
        let [w_z, u_z, b_z, w_r, u_r, b_r, w_h, u_h, b_h] =
            self.tensors().map(|t| tape.leaf(t.clone(), requires_grad));
        GruVars {
            w_z,
            u_z,
            b_z,
            w_r,
            u_r,
            b_r,
            w_h,
            u_h,
            b_h,
        }
    }
}

/// A [`GruParams`] bound to a tape.
#[derive(Debug, Clone, Copy)]
pub struct GruVars {
    pub w_z: Var,
    pub u_z: Var,
    pub b_z: Var,
    pub w_r: Var,
    pub u_r: Var,
    pub b_r: Var,
    pub w_h: Var,
    pub u_h: Var,
    pub b_h: Var,
}

impl GruVars {
    pub fn all(&self) -> [Var; 9] {
        [self.w_z, self.u_z, self.b_z, self.w_r, self.u_r, self.b_r, self.w_h, self.u_h, self.b_h]
    }

    fn gate(&self, tape: &mut Tape, x: Var, h: Var, w: Var, u: Var, b: Var) -> Var {
        let xw = tape.vecmat(x, w);
        let hu = tape.vecmat(h, u);
        let s = tape.add(xw, hu);
        tape.add(s, b)
    }

    pub fn step(&self, tape: &mut Tape, x: Var, h: Var) -> Var {
        let z_pre = self.gate(tape, x, h, self.w_z, self.u_z, self.b_z);
        let z = tape.sigmoid(z_pre);
        let r_pre = self.gate(tape, x, h, self.w_r, self.u_r, self.b_r);
        let r = tape.sigmoid(r_pre);
        let rh = tape.mul(r, h);
        let cand_pre = self.gate(tape, x, rh, self.w_h, self.u_h, self.b_h);
        let cand = tape.tanh(cand_pre);
        let keep = tape.one_minus(z);
        let old = tape.mul(keep, h);
        let new = tape.mul(z, cand);
        tape.add(old, new)
    }
}

/// One GRU update of `h_prev` given input `x`.
pub fn gru_step(params: &GruParams, x: &[f64], h_prev: &[f64]) -> Result<Vec<f64>> {
    if x.len() != params.input_dim() || h_prev.len() != params.hidden() {
        return Err(Error::ShapeMismatch {
            op: "gru_step",
            expected: format!("x[{}], h[{}]", params.input_dim(), params.hidden()),
            found: format!("x[{}], h[{}]", x.len(), h_prev.len()),
        });
    }
    let mut tape = Tape::new();
    let vars = params.bind(&mut tape, false);
    let xv = tape.constant(Tensor::vector(x.to_vec()));
    let hv = tape.constant(Tensor::vector(h_prev.to_vec()));
    let out = vars.step(&mut tape, xv, hv);
    tape.check()?;
    Ok(tape.value(out).data().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_params_halve_the_state() {
        let p = GruParams::zeros(3, 2);
        let h = gru_step(&p, &[1.0, -2.0, 0.5], &[0.8, -0.4]).unwrap();
        assert_eq!(h, vec![0.4, -0.2]);
        let h = gru_step(&p, &[1.0, -2.0, 0.5], &[0.0, 0.0]).unwrap();
        assert_eq!(h, vec![0.0, 0.0]);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let p = GruParams::zeros(3, 2);
        assert!(gru_step(&p, &[1.0, 2.0], &[0.0, 0.0]).is_err());
        assert!(gru_step(&p, &[1.0, 2.0, 3.0], &[0.0]).is_err());
    }

    /// Straight-line scalar evaluation of the gate equations.
    fn scalar_gru(p: &GruParams, x: &[f64], h: &[f64]) -> Vec<f64> {
        let hdim = h.len();
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let affine = |w: &Tensor, u: &Tensor, b: &Tensor, x: &[f64], h: &[f64], k: usize| {
            let mut s = b.data()[k];
            for (i, xi) in x.iter().enumerate() {
                s += xi * w.data()[i * hdim + k];
            }
            for (i, hi) in h.iter().enumerate() {
                s += hi * u.data()[i * hdim + k];
            }
            s
        };
        let z: Vec<f64> = (0..hdim).map(|k| sig(affine(&p.w_z, &p.u_z, &p.b_z, x, h, k))).collect();
        let r: Vec<f64> = (0..hdim).map(|k| sig(affine(&p.w_r, &p.u_r, &p.b_r, x, h, k))).collect();
        let rh: Vec<f64> = r.iter().zip(h).map(|(a, b)| a * b).collect();
        (0..hdim)
            .map(|k| {
                let cand = affine(&p.w_h, &p.u_h, &p.b_h, x, &rh, k).tanh();
                (1.0 - z[k]) * h[k] + z[k] * cand
            })
            .collect()
    }

    #[test]
    fn matches_scalar_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let d = rng.gen_range(1..6);
            let hdim = rng.gen_range(1..6);
            let p = GruParams::init(d, hdim, &mut rng);
            let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let h: Vec<f64> = (0..hdim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let got = gru_step(&p, &x, &h).unwrap();
            let want = scalar_gru(&p, &x, &h);
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        use crate::neural::gradcheck::{assert_close, numeric_grad};
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let d = rng.gen_range(1..=6);
            let hdim = rng.gen_range(2..=6);
            let p = GruParams::init(d, hdim, &mut rng);
            let target = rng.gen_range(0..hdim);
            let mut inputs: Vec<Tensor> = p.tensors().into_iter().cloned().collect();
            inputs.push(Tensor::uniform(vec![d], 1.0, &mut rng));
            inputs.push(Tensor::uniform(vec![hdim], 1.0, &mut rng));
            let eval = |vals: &[Tensor], grads: bool| {
                let mut t = Tape::new();
                let v: Vec<Var> = vals.iter().map(|x| t.leaf(x.clone(), true)).collect();
                let gv = GruVars {
                    w_z: v[0],
                    u_z: v[1],
                    b_z: v[2],
                    w_r: v[3],
                    u_r: v[4],
                    b_r: v[5],
                    w_h: v[6],
                    u_h: v[7],
                    b_h: v[8],
                };
                let h1 = gv.step(&mut t, v[9], v[10]);
                // a second step so the recurrent path is exercised twice
                let h2 = gv.step(&mut t, v[9], h1);
                let loss = t.cross_entropy(h2, target);
                let value = t.value(loss).data()[0];
                let g = grads.then(|| {
                    let g = t.backward(loss);
                    v.iter().map(|&x| g.get(x).unwrap().to_vec()).collect::<Vec<_>>()
                });
                (value, g)
            };
            let grads = eval(&inputs, true).1.unwrap();
            for k in 0..inputs.len() {
                let numeric = numeric_grad(&inputs[k], &|perturbed| {
                    let mut vals = inputs.clone();
                    vals[k] = perturbed.clone();
                    eval(&vals, false).0
                });
                assert_close(&grads[k], &numeric);
            }
        }
    }
}
