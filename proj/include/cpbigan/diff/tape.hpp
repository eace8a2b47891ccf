#pragma once

#include <functional>
#include <map>
#include <utility>
#include <vector>

#include "cpbigan/diff/params.hpp"
#include "cpbigan/diff/tensor.hpp"

namespace cpbigan::diff {

struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

/// Reverse-mode tape. Nodes are appended in evaluation order; backward()
/// walks them in reverse and only visits nodes that require a gradient.
template <class T>
class Tape {
  public:
    using BackFn = std::function<void(Tape&)>;

    Var constant(Tensor<T> v) { return push(std::move(v), false, {}); }
    Var variable(Tensor<T> v) { return push(std::move(v), true, {}); }

    /// Binds a parameter; repeated binds of the same tensor share one node.
    Var param(ParamSet<T>& ps, const std::string& name, bool trainable = true) {
        const std::size_t idx = ps.index(name);
        const auto key = std::make_pair(static_cast<const void*>(&ps), idx);
        if (auto it = bound_.find(key); it != bound_.end()) return Var{it->second};
        Var v = push(ps.entries()[idx].value, trainable, {});
        bound_[key] = v.id;
        return v;
    }

    Var push(Tensor<T> value, bool requires_grad, BackFn fn) {
        nodes_.push_back(Node{std::move(value), {}, requires_grad, std::move(fn)});
        return Var{static_cast<int>(nodes_.size()) - 1};
    }

    const Tensor<T>& value(Var v) const { return nodes_.at(static_cast<std::size_t>(v.id)).value; }
    const Shape& shape(Var v) const { return value(v).shape; }
    bool requires_grad(Var v) const { return nodes_.at(static_cast<std::size_t>(v.id)).requires_grad; }
    double scalar(Var v) const { return static_cast<double>(value(v).data.at(0)); }

    /// Gradient buffer of a node, zero-initialised on first access.
    std::vector<T>& grad(Var v) {
        auto& n = nodes_.at(static_cast<std::size_t>(v.id));
        if (n.grad.empty()) n.grad.assign(n.value.size(), T(0));
        return n.grad;
    }
    bool has_grad(Var v) const { return !nodes_.at(static_cast<std::size_t>(v.id)).grad.empty(); }

    void backward(Var loss) {
        if (value(loss).size() != 1) throw TrainingError("backward: loss must be a scalar");
        grad(loss)[0] = T(1);
        for (int i = loss.id; i >= 0; --i) {
            auto& n = nodes_[static_cast<std::size_t>(i)];
            if (!n.requires_grad || !n.backward || n.grad.empty()) continue;
            n.backward(*this);
        }
    }

    /// Gradients aligned with ps.entries(); zeros for unbound or frozen tensors.
    std::vector<Tensor<T>> gradients(const ParamSet<T>& ps) const {
        std::vector<Tensor<T>> out;
        out.reserve(ps.size());
        for (std::size_t k = 0; k < ps.size(); ++k) {
            Tensor<T> g(ps.entries()[k].value.shape);
            auto it = bound_.find(std::make_pair(static_cast<const void*>(&ps), k));
            if (it != bound_.end()) {
                const auto& n = nodes_[static_cast<std::size_t>(it->second)];
                if (n.requires_grad && !n.grad.empty()) g.data = n.grad;
            }
            out.push_back(std::move(g));
        }
        return out;
    }

    std::size_t size() const { return nodes_.size(); }

  private:
    struct Node {
        Tensor<T> value;
        std::vector<T> grad;
        bool requires_grad;
        BackFn backward;
    };
    std::vector<Node> nodes_;
    std::map<std::pair<const void*, std::size_t>, int> bound_;
};

} // namespace cpbigan::diff
