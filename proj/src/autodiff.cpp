#include "cura/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "cura/errors.hpp"

namespace cura::ad {

const Tensor& Var::value() const {
    if (!tape) throw UsageError("variable is not attached to a tape");
    return tape->value(id);
}

const Tensor& Gradients::operator[](Var v) const {
    if (v.tape != tape_ || v.id >= grads_.size()) throw UsageError("variable does not belong to this gradient set");
    return grads_[v.id];
}

Var Tape::leaf(Tensor value, bool requires_grad) {
    nodes_.push_back(Node{std::move(value), {}, {}, requires_grad});
    return Var{this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::vector<std::size_t> parents, BackwardFn fn) {
    if (consumed_) throw UsageError("tape already differentiated; start a new trace");
    bool needs = false;
    for (auto p : parents) needs = needs || nodes_.at(p).requires_grad;
    nodes_.push_back(Node{std::move(value), std::move(parents), needs ? std::move(fn) : BackwardFn{}, needs});
    return Var{this, nodes_.size() - 1};
}

void Tape::accumulate(std::size_t id, const Tensor& contribution) {
    if (!nodes_[id].requires_grad) return;
    Tensor& g = grads_[id];
    if (g.empty()) {
        g = contribution;
        return;
    }
    if (g.shape() != contribution.shape())
        throw ShapeError("gradient contribution " + shape_string(contribution.shape()) + " does not match node " +
                         shape_string(g.shape()));
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += contribution[i];
}

void Tape::accumulate(std::size_t id, Tensor&& contribution) {
    if (!nodes_[id].requires_grad) return;
    if (grads_[id].empty()) {
        grads_[id] = std::move(contribution);
        return;
    }
    accumulate(id, static_cast<const Tensor&>(contribution));
}

Gradients Tape::backward(Var loss) {
    if (loss.tape != this) throw UsageError("loss was not recorded on this tape");
    if (consumed_) throw UsageError("backward already ran on this tape");
    const Tensor& lv = value(loss.id);
    if (lv.size() != 1) throw ShapeError("backward needs a scalar loss, got " + shape_string(lv.shape()));
    consumed_ = true;

    grads_.assign(nodes_.size(), Tensor{});
    grads_[loss.id] = Tensor(lv.shape(), 1.0);
    for (std::size_t id = loss.id + 1; id-- > 0;) {
        Node& n = nodes_[id];
        if (!n.backward || grads_[id].empty()) continue;
        // Parents have smaller ids, so callbacks never write this slot.
        n.backward(*this, grads_[id]);
    }
    for (std::size_t id = 0; id < nodes_.size(); ++id)
        if (grads_[id].empty()) grads_[id] = Tensor::zeros(nodes_[id].value.shape());
    return Gradients(this, std::move(grads_));
}

namespace {

Tape& same_tape(Var a, Var b) {
    if (!a.tape || a.tape != b.tape) throw UsageError("operands live on different tapes");
    return *a.tape;
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shapes " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()) + " differ");
}

}  // namespace

Var matmul(Var a, Var b) {
    Tape& t = same_tape(a, b);
    Tensor out = cura::matmul(a.value(), b.value());
    return t.record(std::move(out), {a.id, b.id}, [a, b](Tape& tape, const Tensor& g) {
        const Tensor& av = tape.value(a.id);
        const Tensor& bv = tape.value(b.id);
        const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
        if (tape.requires_grad(a.id)) {
            Tensor ga(av.shape());
            kernels::matmul_nt(g.data(), bv.data(), ga.data(), m, k, n);
            tape.accumulate(a.id, std::move(ga));
        }
        if (tape.requires_grad(b.id)) {
            Tensor gb(bv.shape());
            kernels::matmul_tn(av.data(), g.data(), gb.data(), m, k, n);
            tape.accumulate(b.id, std::move(gb));
        }
    });
}

Var add(Var a, Var b) {
    Tape& t = same_tape(a, b);
    require_same_shape("add", a.value(), b.value());
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
    return t.record(std::move(out), {a.id, b.id}, [a, b](Tape& tape, const Tensor& g) {
        tape.accumulate(a.id, g);
        tape.accumulate(b.id, g);
    });
}

Var sub(Var a, Var b) {
    Tape& t = same_tape(a, b);
    require_same_shape("sub", a.value(), b.value());
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
    return t.record(std::move(out), {a.id, b.id}, [a, b](Tape& tape, const Tensor& g) {
        tape.accumulate(a.id, g);
        Tensor neg = g;
        for (std::size_t i = 0; i < neg.size(); ++i) neg[i] = -neg[i];
        tape.accumulate(b.id, std::move(neg));
    });
}

Var hadamard(Var a, Var b) {
    Tape& t = same_tape(a, b);
    Tensor out = cura::hadamard(a.value(), b.value());
    return t.record(std::move(out), {a.id, b.id}, [a, b](Tape& tape, const Tensor& g) {
        tape.accumulate(a.id, cura::hadamard(g, tape.value(b.id)));
        tape.accumulate(b.id, cura::hadamard(g, tape.value(a.id)));
    });
}

Var add_row_bias(Var a, Var bias) {
    Tape& t = same_tape(a, bias);
    const Tensor& av = a.value();
    const Tensor& bv = bias.value();
    if (av.rank() != 2 || bv.size() != av.cols())
        throw ShapeError("add_row_bias: bias " + shape_string(bv.shape()) + " does not match rows of " +
                         shape_string(av.shape()));
    Tensor out = av;
    const std::size_t m = av.rows(), n = av.cols();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] += bv[j];
    return t.record(std::move(out), {a.id, bias.id}, [a, bias, m, n](Tape& tape, const Tensor& g) {
        tape.accumulate(a.id, g);
        if (tape.requires_grad(bias.id)) {
            Tensor gb(tape.value(bias.id).shape());
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
            tape.accumulate(bias.id, std::move(gb));
        }
    });
}

Var scale(Var a, double factor) {
    Tensor out = a.value();
    for (auto& v : out.data()) v *= factor;
    return a.tape->record(std::move(out), {a.id}, [a, factor](Tape& tape, const Tensor& g) {
        Tensor ga = g;
        for (auto& v : ga.data()) v *= factor;
        tape.accumulate(a.id, std::move(ga));
    });
}

Var add_scalar(Var a, double c) {
    Tensor out = a.value();
    for (auto& v : out.data()) v += c;
    return a.tape->record(std::move(out), {a.id}, [a](Tape& tape, const Tensor& g) { tape.accumulate(a.id, g); });
}

Var activation(Activation kind, Var x) {
    Tensor out = cura::apply_activation(kind, x.value());
    return x.tape->record(std::move(out), {x.id}, [x, kind](Tape& tape, const Tensor& g) {
        const Tensor& xv = tape.value(x.id);
        Tensor gx(xv.shape());
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] = g[i] * activate_grad(kind, xv[i]);
        tape.accumulate(x.id, std::move(gx));
    });
}

Var conv1d(Var x, Var kernel, Var bias, ConvMode mode) {
    Tape& t = same_tape(x, kernel);
    same_tape(x, bias);
    const auto s = conv_shape(x.value(), kernel.value(), bias.value(), mode);
    Tensor out(Shape{s.length, s.out_channels});
    kernels::conv1d(x.value().data(), kernel.value().data(), bias.value().data(), out.data(), s);
    return t.record(std::move(out), {x.id, kernel.id, bias.id}, [x, kernel, bias, s](Tape& tape, const Tensor& g) {
        if (tape.requires_grad(x.id)) {
            Tensor gx(tape.value(x.id).shape());
            kernels::conv1d_grad_input(g.data(), tape.value(kernel.id).data(), gx.data(), s);
            tape.accumulate(x.id, std::move(gx));
        }
        if (tape.requires_grad(kernel.id) || tape.requires_grad(bias.id)) {
            Tensor gk(tape.value(kernel.id).shape());
            Tensor gb(tape.value(bias.id).shape());
            kernels::conv1d_grad_kernel(tape.value(x.id).data(), g.data(), gk.data(), gb.data(), s);
            tape.accumulate(kernel.id, std::move(gk));
            tape.accumulate(bias.id, std::move(gb));
        }
    });
}

Var mean_rows(Var a) {
    const Tensor& av = a.value();
    const std::size_t m = av.rows(), n = av.cols();
    Tensor out(Shape{1, n});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j] += av[i * n + j];
    for (std::size_t j = 0; j < n; ++j) out[j] /= static_cast<double>(m);
    return a.tape->record(std::move(out), {a.id}, [a, m, n](Tape& tape, const Tensor& g) {
        Tensor ga(Shape{m, n});
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) ga[i * n + j] = g[j] / static_cast<double>(m);
        tape.accumulate(a.id, std::move(ga));
    });
}

Var last_row(Var a) {
    const Tensor& av = a.value();
    const std::size_t m = av.rows(), n = av.cols();
    Tensor out(Shape{1, n});
    std::copy_n(av.data().begin() + static_cast<std::ptrdiff_t>((m - 1) * n), n, out.data().begin());
    return a.tape->record(std::move(out), {a.id}, [a, m, n](Tape& tape, const Tensor& g) {
        Tensor ga(Shape{m, n});
        std::copy_n(g.data().begin(), n, ga.data().begin() + static_cast<std::ptrdiff_t>((m - 1) * n));
        tape.accumulate(a.id, std::move(ga));
    });
}

Var reshape(Var a, Shape shape) {
    Tensor out = a.value().reshaped(std::move(shape));
    return a.tape->record(std::move(out), {a.id}, [a](Tape& tape, const Tensor& g) {
        tape.accumulate(a.id, g.reshaped(tape.value(a.id).shape()));
    });
}

Var sum(Var a) {
    double s = 0.0;
    for (double v : a.value().data()) s += v;
    return a.tape->record(Tensor::scalar(s), {a.id}, [a](Tape& tape, const Tensor& g) {
        tape.accumulate(a.id, Tensor(tape.value(a.id).shape(), g[0]));
    });
}

Var mse_loss(Var pred, const Tensor& target) {
    const Tensor& p = pred.value();
    if (p.size() != target.size())
        throw ShapeError("mse_loss: prediction " + shape_string(p.shape()) + " vs target " +
                         shape_string(target.shape()));
    const double n = static_cast<double>(p.size());
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double d = p[i] - target[i];
        s += d * d;
    }
    return pred.tape->record(Tensor::scalar(s / n), {pred.id}, [pred, target, n](Tape& tape, const Tensor& g) {
        const Tensor& pv = tape.value(pred.id);
        Tensor gp(pv.shape());
        for (std::size_t i = 0; i < gp.size(); ++i) gp[i] = g[0] * 2.0 * (pv[i] - target[i]) / n;
        tape.accumulate(pred.id, std::move(gp));
    });
}

Var cross_entropy(Var logits, std::size_t true_class) {
    const Tensor& z = logits.value();
    const std::size_t k = z.size();
    if (k < 2) throw ShapeError("cross_entropy needs at least 2 logits, got " + std::to_string(k));
    if (true_class >= k)
        throw UsageError("cross_entropy: class " + std::to_string(true_class) + " out of range for " +
                         std::to_string(k) + " logits");
    const double zmax = *std::max_element(z.data().begin(), z.data().end());
    double denom = 0.0;
    for (double v : z.data()) denom += std::exp(v - zmax);
    const double loss = std::log(denom) - (z[true_class] - zmax);
    return logits.tape->record(
        Tensor::scalar(loss), {logits.id}, [logits, true_class, zmax, denom](Tape& tape, const Tensor& g) {
            const Tensor& zv = tape.value(logits.id);
            Tensor gz(zv.shape());
            for (std::size_t i = 0; i < gz.size(); ++i) {
                const double p = std::exp(zv[i] - zmax) / denom;
                gz[i] = g[0] * (p - (i == true_class ? 1.0 : 0.0));
            }
            tape.accumulate(logits.id, std::move(gz));
        });
}

}  // namespace cura::ad
