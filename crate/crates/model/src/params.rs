//! Named enumeration of learnable tensors and normalization buffers.

use crate::layers::{Backbone, Conv2d, ConvStage, Head, Linear, Lstm, LstmLayer, Mmtm, Param};

/// Visit every learnable tensor under a dotted name prefix, in a fixed order.
pub trait Visit<F> {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Param<F>));
    fn visit_mut<'a>(&'a mut self, prefix: &str, f: &mut dyn FnMut(String, &'a mut Param<F>));
}

fn join(prefix: &str, name: &str) -> String {
    format!("{prefix}.{name}")
}

impl<F> Visit<F> for Conv2d<F> {
    fn visit<'a>(&'a self, p: &str, f: &mut dyn FnMut(String, &'a Param<F>)) {
        f(join(p, "weight"), &self.weight);
        if let Some(b) = &self.bias {
            f(join(p, "bias"), b);
        }
    }

    fn visit_mut<'a>(&'a mut self, p: &str, f: &mut dyn FnMut(String, &'a mut Param<F>)) {
        let Conv2d { weight, bias, .. } = self;
        f(join(p, "weight"), weight);
        if let Some(b) = bias {
            f(join(p, "bias"), b);
        }
    }
}

impl<F> Visit<F> for ConvStage<F> {
    fn visit<'a>(&'a self, p: &str, f: &mut dyn FnMut(String, &'a Param<F>)) {
        self.conv.visit(&join(p, "conv"), f);
        f(join(p, "bn.gamma"), &self.bn.gamma);
        f(join(p, "bn.beta"), &self.bn.beta);
    }

    fn visit_mut<'a>(&'a mut self, p: &str, f: &mut dyn FnMut(String, &'a mut Param<F>)) {
        let ConvStage { conv, bn } = self;
        conv.visit_mut(&join(p, "conv"), f);
        f(join(p, "bn.gamma"), &mut bn.gamma);
        f(join(p, "bn.beta"), &mut bn.beta);
    }
}

impl<F> Visit<F> for Backbone<F> {
    fn visit<'a>(&'a self, p: &str, f: &mut dyn FnMut(String, &'a Param<F>)) {
        for (i, s) in self.stages.iter().enumerate() {
            s.visit(&join(p, &format!("stage{i}")), f);
        }
    }

    fn visit_mut<'a>(&'a mut self, p: &str, f: &mut dyn FnMut(String, &'a mut Param<F>)) {
        for (i, s) in self.stages.iter_mut().enumerate() {
            s.visit_mut(&join(p, &format!("stage{i}")), f);
        }
    }
}

impl<F> Visit<F> for Linear<F> {
    fn visit<'a>(&'a self, p: &str, f: &mut dyn FnMut(String, &'a Param<F>)) {
        f(join(p, "weight"), &self.weight);
        f(join(p, "bias"), &self.bias);
    }

    fn visit_mut<'a>(&'a mut self, p: &str, f: &mut dyn FnMut(String, &'a mut Param<F>)) {
        let Linear { weight, bias, .. } = self;
        f(join(p, "weight"), weight);
        f(join(p, "bias"), bias);
    }
}

impl<F> Visit<F> for LstmLayer<F> {
    fn visit<'a>(&'a self, p: &str, f: &mut dyn FnMut(String, &'a Param<F>)) {
        f(join(p, "w_ih"), &self.w_ih);
        f(join(p, "w_hh"), &self.w_hh);
        f(join(p, "bias"), &self.bias);
    }

    fn visit_mut<'a>(&'a mut self, p: &str, f: &mut dyn FnMut(String, &'a mut Param<F>)) {
        let LstmLayer { w_ih, w_hh, bias, .. } = self;
        f(join(p, "w_ih"), w_ih);
        f(join(p, "w_hh"), w_hh);
        f(join(p, "bias"), bias);
    }
}

impl<F> Visit<F> for Lstm<F> {
    fn visit<'a>(&'a self, p: &str, f: &mut dyn FnMut(String, &'a Param<F>)) {
        for (i, l) in self.layers.iter().enumerate() {
            l.visit(&join(p, &format!("layer{i}")), f);
        }
    }

    fn visit_mut<'a>(&'a mut self, p: &str, f: &mut dyn FnMut(String, &'a mut Param<F>)) {
        for (i, l) in self.layers.iter_mut().enumerate() {
            l.visit_mut(&join(p, &format!("layer{i}")), f);
        }
    }
}

impl<F> Visit<F> for Mmtm<F> {
    fn visit<'a>(&'a self, p: &str, f: &mut dyn FnMut(String, &'a Param<F>)) {
        self.squeeze.visit(&join(p, "squeeze"), f);
        self.gate_a.visit(&join(p, "gate_video"), f);
        self.gate_b.visit(&join(p, "gate_attention"), f);
    }

    fn visit_mut<'a>(&'a mut self, p: &str, f: &mut dyn FnMut(String, &'a mut Param<F>)) {
        let Mmtm { squeeze, gate_a, gate_b } = self;
        squeeze.visit_mut(&join(p, "squeeze"), f);
        gate_a.visit_mut(&join(p, "gate_video"), f);
        gate_b.visit_mut(&join(p, "gate_attention"), f);
    }
}

impl<F> Visit<F> for Head<F> {
    fn visit<'a>(&'a self, p: &str, f: &mut dyn FnMut(String, &'a Param<F>)) {
        self.fc1.visit(&join(p, "fc1"), f);
        self.fc2.visit(&join(p, "fc2"), f);
    }

    fn visit_mut<'a>(&'a mut self, p: &str, f: &mut dyn FnMut(String, &'a mut Param<F>)) {
        let Head { fc1, fc2 } = self;
        fc1.visit_mut(&join(p, "fc1"), f);
        fc2.visit_mut(&join(p, "fc2"), f);
    }
}

/// Running statistics of every batch-norm layer in a backbone.
pub fn backbone_buffers<'a, F>(b: &'a Backbone<F>, p: &str, out: &mut Vec<(String, &'a Vec<F>)>) {
    for (i, s) in b.stages.iter().enumerate() {
        out.push((format!("{p}.stage{i}.bn.running_mean"), &s.bn.running_mean));
        out.push((format!("{p}.stage{i}.bn.running_var"), &s.bn.running_var));
    }
}

pub fn backbone_buffers_mut<'a, F>(b: &'a mut Backbone<F>, p: &str, out: &mut Vec<(String, &'a mut Vec<F>)>) {
    for (i, s) in b.stages.iter_mut().enumerate() {
        let bn = &mut s.bn;
        out.push((format!("{p}.stage{i}.bn.running_mean"), &mut bn.running_mean));
        out.push((format!("{p}.stage{i}.bn.running_var"), &mut bn.running_var));
    }
}
