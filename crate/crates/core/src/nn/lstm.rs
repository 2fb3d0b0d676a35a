use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::params::{ParamId, ParamStore};
use super::tape::{Tape, Var};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Lstm {
    pub w: ParamId,
    pub b: ParamId,
    pub input: usize,
    pub hidden: usize,
}

impl Lstm {
    /// Gates are ordered `[input, forget, cell, output]`; forget bias starts at 1.
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        hidden: usize,
        scale: f64,
        rng: &mut R,
    ) -> Lstm {
        let w = store.add_uniform(&format!("{name}.w"), 4 * hidden, input + hidden, scale, rng);
        let b = store.add_zeros(&format!("{name}.b"), 1, 4 * hidden);
        store.get_mut(b).data[hidden..2 * hidden].fill(1.0);
        Lstm {
            w,
            b,
            input,
            hidden,
        }
    }

    pub fn zero_state(&self, t: &mut Tape) -> (Var, Var) {
        (t.zeros(self.hidden), t.zeros(self.hidden))
    }

    pub fn step(&self, t: &mut Tape, x: Var, state: (Var, Var)) -> (Var, Var) {
        let xh = t.concat(&[x, state.0]);
        let gates = t.affine(self.w, Some(self.b), xh);
        t.lstm_cell(gates, state.1)
    }
}

/// Bidirectional encoder; outputs are `[forward; backward]` per position.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BiLstm {
    pub fwd: Lstm,
    pub bwd: Lstm,
}

pub struct Encoded {
    pub states: Vec<Var>,
    /// `[last forward h; first backward h]`.
    pub last_h: Var,
    /// Cell states matching `last_h`.
    pub last_c: Var,
}

impl BiLstm {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        hidden: usize,
        scale: f64,
        rng: &mut R,
    ) -> BiLstm {
        BiLstm {
            fwd: Lstm::new(store, &format!("{name}.fwd"), input, hidden, scale, rng),
            bwd: Lstm::new(store, &format!("{name}.bwd"), input, hidden, scale, rng),
        }
    }

    pub fn out_dim(&self) -> usize {
        self.fwd.hidden + self.bwd.hidden
    }

    pub fn encode(&self, t: &mut Tape, xs: &[Var], drop: &mut Dropout) -> Encoded {
        let n = xs.len();
        let mut fh = Vec::with_capacity(n);
        let mut s = self.fwd.zero_state(t);
        for &x in xs {
            s = self.fwd.step(t, x, s);
            fh.push(s);
        }
        let mut bh = vec![None; n];
        let mut r = self.bwd.zero_state(t);
        for (i, &x) in xs.iter().enumerate().rev() {
            r = self.bwd.step(t, x, r);
            bh[i] = Some(r);
        }
        let states = (0..n)
            .map(|i| {
                let c = t.concat(&[fh[i].0, bh[i].expect("filled").0]);
                drop.apply(t, c)
            })
            .collect();
        let (last_h, last_c) = if n == 0 {
            (t.zeros(self.out_dim()), t.zeros(self.out_dim()))
        } else {
            let b0 = bh[0].expect("filled");
            (
                t.concat(&[fh[n - 1].0, b0.0]),
                t.concat(&[fh[n - 1].1, b0.1]),
            )
        };
        Encoded {
            states,
            last_h,
            last_c,
        }
    }
}

/// Inverted dropout driven by a private RNG; a no-op when disabled.
pub struct Dropout {
    rate: f64,
    rng: Option<ChaCha8Rng>,
}

impl Dropout {
    pub fn off() -> Dropout {
        Dropout {
            rate: 0.0,
            rng: None,
        }
    }

    pub fn new(rate: f64, rng: ChaCha8Rng) -> Dropout {
        Dropout {
            rate,
            rng: Some(rng),
        }
    }

    pub fn apply(&mut self, t: &mut Tape, x: Var) -> Var {
        let Some(rng) = self.rng.as_mut() else {
            return x;
        };
        if self.rate <= 0.0 {
            return x;
        }
        let keep = 1.0 - self.rate;
        let mask: Vec<f64> = (0..t.len(x))
            .map(|_| {
                if rng.gen::<f64>() < keep {
                    1.0 / keep
                } else {
                    0.0
                }
            })
            .collect();
        let m = t.input(mask);
        t.mul(x, m)
    }
}
