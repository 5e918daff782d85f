//! Classical fixed-step fourth-order Runge–Kutta.

/// Scratch buffers for [`Rk4::step`], sized once per system.
#[derive(Debug, Clone)]
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(dim: usize) -> Self {
        Self {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }

    /// Advances `y` from `t` to `t + h` in place. `f(t, y, dy)` writes the
    /// derivative into `dy`; an error from any stage aborts the step and
    /// leaves `y` untouched.
    pub fn step<E, F>(&mut self, t: f64, y: &mut [f64], h: f64, mut f: F) -> Result<(), E>
    where
        F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), E>,
    {
        let half = 0.5 * h;
        f(t, y, &mut self.k1)?;
        for i in 0..y.len() {
            self.tmp[i] = y[i] + half * self.k1[i];
        }
        f(t + half, &self.tmp, &mut self.k2)?;
        for i in 0..y.len() {
            self.tmp[i] = y[i] + half * self.k2[i];
        }
        f(t + half, &self.tmp, &mut self.k3)?;
        for i in 0..y.len() {
            self.tmp[i] = y[i] + h * self.k3[i];
        }
        f(t + h, &self.tmp, &mut self.k4)?;
        let sixth = h / 6.0;
        for i in 0..y.len() {
            y[i] += sixth * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
        Ok(())
    }
}
