use gazefusion_model::Network;

/// Adam over a fixed subset of a network's parameter tensors.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: i32,
    /// Indices into `Network::params_mut()` order.
    active: Vec<usize>,
    m: Vec<Vec<f32>>,
    v: Vec<Vec<f32>>,
}

impl Adam {
    pub fn new(net: &Network<f32>, active: Vec<usize>, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        let params = net.params();
        let m = active.iter().map(|&i| vec![0.0; params[i].param.len()]).collect::<Vec<_>>();
        Adam { lr, beta1, beta2, eps, step: 0, v: m.clone(), m, active }
    }

    pub fn steps(&self) -> i32 {
        self.step
    }

    /// One update. Entries where `frozen` returns true for
    /// `(tensor index, element)` are left untouched, moments included.
    pub fn update(&mut self, net: &mut Network<f32>, grads: &Network<f32>, frozen: &dyn Fn(usize, usize) -> bool) {
        self.step += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.step);
        let c2 = 1.0 - b2.powi(self.step);
        let g = grads.params();
        let mut p = net.params_mut();
        for (slot, &i) in self.active.iter().enumerate() {
            let data = &mut p[i].param.data;
            let grad = &g[i].param.data;
            let (m, v) = (&mut self.m[slot], &mut self.v[slot]);
            for j in 0..data.len() {
                if frozen(i, j) {
                    continue;
                }
                let gj = grad[j] as f64;
                let mj = b1 * m[j] as f64 + (1.0 - b1) * gj;
                let vj = b2 * v[j] as f64 + (1.0 - b2) * gj * gj;
                m[j] = mj as f32;
                v[j] = vj as f32;
                let update = self.lr * (mj / c1) / ((vj / c2).sqrt() + self.eps);
                data[j] = (data[j] as f64 - update) as f32;
            }
        }
    }
}
