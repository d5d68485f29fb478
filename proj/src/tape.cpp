#include "tbn/tape.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

namespace tbn {

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        os << (i ? "," : "") << shape[i];
    }
    os << ']';
    return os.str();
}

namespace {

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
}

}  // namespace

template <typename T>
typename Tape<T>::Node& Tape<T>::node(Var v) {
    if (v.id >= nodes_.size()) throw InvalidArgument("Var does not belong to this tape");
    return nodes_[v.id];
}

template <typename T>
const typename Tape<T>::Node& Tape<T>::node(Var v) const {
    if (v.id >= nodes_.size()) throw InvalidArgument("Var does not belong to this tape");
    return nodes_[v.id];
}

template <typename T>
Var Tape<T>::push(Tensor<T> value, BackwardFn backward, Parameter<T>* param) {
    Node n;
    n.grad = Tensor<T>::zeros_like(value);
    n.value = std::move(value);
    n.param = param;
    n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
}

template <typename T>
Var Tape<T>::input(Tensor<T> value) {
    return push(std::move(value), nullptr);
}

template <typename T>
Var Tape<T>::param(Parameter<T>& p) {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (nodes_[i].param == &p) return Var{i};
    }
    return push(p.value, nullptr, &p);
}

template <typename T>
Var Tape<T>::custom(Tensor<T> value, BackwardFn backward) {
    return push(std::move(value), std::move(backward));
}

template <typename T>
Var Tape<T>::affine(Var x, Var w, Var b) {
    const Tensor<T>& xv = value(x);
    const Tensor<T>& wv = value(w);
    const Tensor<T>& bv = value(b);
    if (xv.rank() != 2 || wv.rank() != 2 || xv.dim(1) != wv.dim(0) || bv.size() != wv.dim(1)) {
        throw ShapeError("affine: x " + shape_str(xv.shape()) + ", W " + shape_str(wv.shape()) +
                         ", b " + shape_str(bv.shape()));
    }
    const std::size_t n = xv.dim(0), din = wv.dim(0), dout = wv.dim(1);
    Tensor<T> y({n, dout});
    for (std::size_t r = 0; r < n; ++r) {
        T* yr = &y[r * dout];
        std::copy(bv.values().begin(), bv.values().end(), yr);
        const T* xr = &xv[r * din];
        for (std::size_t k = 0; k < din; ++k) {
            const T xk = xr[k];
            if (xk == T{0}) continue;
            const T* wk = &wv[k * dout];
            for (std::size_t c = 0; c < dout; ++c) yr[c] += xk * wk[c];
        }
    }
    return push(std::move(y), [x, w, b, n, din, dout](Tape& t, std::size_t self) {
        const Tensor<T>& dy = t.nodes_[self].grad;
        const Tensor<T>& xv = t.nodes_[x.id].value;
        const Tensor<T>& wv = t.nodes_[w.id].value;
        Tensor<T>& dx = t.nodes_[x.id].grad;
        Tensor<T>& dw = t.nodes_[w.id].grad;
        Tensor<T>& db = t.nodes_[b.id].grad;
        for (std::size_t r = 0; r < n; ++r) {
            const T* dyr = &dy[r * dout];
            const T* xr = &xv[r * din];
            T* dxr = &dx[r * din];
            for (std::size_t c = 0; c < dout; ++c) db[c] += dyr[c];
            for (std::size_t k = 0; k < din; ++k) {
                const T* wk = &wv[k * dout];
                T* dwk = &dw[k * dout];
                const T xk = xr[k];
                T acc{0};
                for (std::size_t c = 0; c < dout; ++c) {
                    acc += dyr[c] * wk[c];
                    dwk[c] += xk * dyr[c];
                }
                dxr[k] += acc;
            }
        }
    });
}

template <typename T>
Var Tape<T>::relu(Var x) {
    Tensor<T> y = value(x);
    for (auto& v : y.values()) v = v > T{0} ? v : T{0};
    return push(std::move(y), [x](Tape& t, std::size_t self) {
        const Tensor<T>& dy = t.nodes_[self].grad;
        const Tensor<T>& xv = t.nodes_[x.id].value;
        Tensor<T>& dx = t.nodes_[x.id].grad;
        for (std::size_t i = 0; i < dy.size(); ++i) {
            if (xv[i] > T{0}) dx[i] += dy[i];
        }
    });
}

template <typename T>
Var Tape<T>::sigmoid(Var x) {
    Tensor<T> y = value(x);
    for (auto& v : y.values()) {
        v = v >= T{0} ? T{1} / (T{1} + std::exp(-v)) : std::exp(v) / (T{1} + std::exp(v));
    }
    return push(std::move(y), [x](Tape& t, std::size_t self) {
        const Tensor<T>& dy = t.nodes_[self].grad;
        const Tensor<T>& yv = t.nodes_[self].value;
        Tensor<T>& dx = t.nodes_[x.id].grad;
        for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i] * yv[i] * (T{1} - yv[i]);
    });
}

template <typename T>
Var Tape<T>::mul(Var a, Var b) {
    require_same_shape(value(a), value(b), "mul");
    Tensor<T> y = value(a);
    const Tensor<T>& bv = value(b);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bv[i];
    return push(std::move(y), [a, b](Tape& t, std::size_t self) {
        const Tensor<T>& dy = t.nodes_[self].grad;
        const Tensor<T>& av = t.nodes_[a.id].value;
        const Tensor<T>& bv = t.nodes_[b.id].value;
        for (std::size_t i = 0; i < dy.size(); ++i) {
            t.nodes_[a.id].grad[i] += dy[i] * bv[i];
            t.nodes_[b.id].grad[i] += dy[i] * av[i];
        }
    });
}

template <typename T>
Var Tape<T>::add(Var a, Var b) {
    require_same_shape(value(a), value(b), "add");
    Tensor<T> y = value(a);
    const Tensor<T>& bv = value(b);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
    return push(std::move(y), [a, b](Tape& t, std::size_t self) {
        const Tensor<T>& dy = t.nodes_[self].grad;
        for (std::size_t i = 0; i < dy.size(); ++i) {
            t.nodes_[a.id].grad[i] += dy[i];
            t.nodes_[b.id].grad[i] += dy[i];
        }
    });
}

template <typename T>
Var Tape<T>::concat(std::span<const Var> xs) {
    if (xs.empty()) throw InvalidArgument("concat: no inputs");
    const std::size_t rows = value(xs[0]).rows();
    std::size_t total = 0;
    std::vector<std::size_t> widths;
    for (Var v : xs) {
        const Tensor<T>& xv = value(v);
        if (xv.rows() != rows) {
            throw ShapeError("concat: row count mismatch " + shape_str(value(xs[0]).shape()) + " vs " +
                             shape_str(xv.shape()));
        }
        widths.push_back(xv.cols());
        total += xv.cols();
    }
    Tensor<T> y({rows, total});
    for (std::size_t r = 0; r < rows; ++r) {
        std::size_t off = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            auto src = value(xs[i]).row(r);
            std::copy(src.begin(), src.end(), &y[r * total + off]);
            off += widths[i];
        }
    }
    std::vector<Var> inputs(xs.begin(), xs.end());
    return push(std::move(y), [inputs, widths, rows, total](Tape& t, std::size_t self) {
        const Tensor<T>& dy = t.nodes_[self].grad;
        for (std::size_t r = 0; r < rows; ++r) {
            std::size_t off = 0;
            for (std::size_t i = 0; i < inputs.size(); ++i) {
                auto dst = t.nodes_[inputs[i].id].grad.row(r);
                for (std::size_t c = 0; c < widths[i]; ++c) dst[c] += dy[r * total + off + c];
                off += widths[i];
            }
        }
    });
}

template <typename T>
Var Tape<T>::dropout(Var x, double p, bool training, Rng& rng) {
    if (!(p >= 0.0 && p < 1.0)) {
        throw InvalidArgument("dropout: p must lie in [0, 1), got " + std::to_string(p));
    }
    if (!training || p == 0.0) return x;
    const T scale = static_cast<T>(1.0 / (1.0 - p));
    Tensor<T> mask = Tensor<T>::zeros_like(value(x));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& m : mask.values()) m = u(rng) < p ? T{0} : scale;
    Tensor<T> y = value(x);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] *= mask[i];
    return push(std::move(y), [x, mask = std::move(mask)](Tape& t, std::size_t self) {
        const Tensor<T>& dy = t.nodes_[self].grad;
        Tensor<T>& dx = t.nodes_[x.id].grad;
        for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i] * mask[i];
    });
}

template <typename T>
Var Tape<T>::group_mean(Var x, std::size_t group) {
    const Tensor<T>& xv = value(x);
    if (group == 0 || xv.rows() % group != 0) {
        throw ShapeError("group_mean: " + std::to_string(xv.rows()) + " rows not divisible by " +
                         std::to_string(group));
    }
    const std::size_t n = xv.rows() / group, c = xv.cols();
    Tensor<T> y({n, c});
    const T inv = T{1} / static_cast<T>(group);
    // Each group is summed in ascending order so the mean is bit-identical under row permutations.
    std::vector<T> buf(group);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < c; ++k) {
            for (std::size_t g = 0; g < group; ++g) buf[g] = xv[(i * group + g) * c + k];
            std::sort(buf.begin(), buf.end());
            T acc{0};
            for (T v : buf) acc += v;
            y[i * c + k] = acc * inv;
        }
    }
    return push(std::move(y), [x, group, n, c, inv](Tape& t, std::size_t self) {
        const Tensor<T>& dy = t.nodes_[self].grad;
        Tensor<T>& dx = t.nodes_[x.id].grad;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t g = 0; g < group; ++g) {
                for (std::size_t k = 0; k < c; ++k) dx[(i * group + g) * c + k] += dy[i * c + k] * inv;
            }
        }
    });
}

template <typename T>
Var Tape<T>::mean_over(Var x, std::size_t axis) {
    const Tensor<T>& xv = value(x);
    const std::size_t rows = xv.rows(), cols = xv.cols();
    if (axis == 0) return group_mean(x, rows);
    if (axis != 1) throw InvalidArgument("mean_over: axis must be 0 or 1");
    Tensor<T> y({rows, 1});
    for (std::size_t r = 0; r < rows; ++r) {
        T acc{0};
        for (T v : xv.row(r)) acc += v;
        y[r] = acc / static_cast<T>(cols);
    }
    return push(std::move(y), [x, rows, cols](Tape& t, std::size_t self) {
        const Tensor<T>& dy = t.nodes_[self].grad;
        Tensor<T>& dx = t.nodes_[x.id].grad;
        for (std::size_t r = 0; r < rows; ++r) {
            const T g = dy[r] / static_cast<T>(cols);
            for (std::size_t c = 0; c < cols; ++c) dx[r * cols + c] += g;
        }
    });
}

template <typename T>
Var Tape<T>::avg_pool(Var x, std::size_t height, std::size_t width, std::size_t k) {
    const Tensor<T>& xv = value(x);
    if (k == 0 || height % k != 0 || width % k != 0 || xv.cols() != height * width) {
        throw ShapeError("avg_pool: row width " + std::to_string(xv.cols()) + " is not a " +
                         std::to_string(height) + "x" + std::to_string(width) + " image divisible by " +
                         std::to_string(k));
    }
    const std::size_t rows = xv.rows(), oh = height / k, ow = width / k;
    const T inv = T{1} / static_cast<T>(k * k);
    Tensor<T> y({rows, oh * ow});
    for (std::size_t r = 0; r < rows; ++r) {
        const T* src = &xv[r * height * width];
        T* dst = &y[r * oh * ow];
        for (std::size_t i = 0; i < height; ++i) {
            for (std::size_t j = 0; j < width; ++j) dst[(i / k) * ow + j / k] += src[i * width + j];
        }
        for (std::size_t i = 0; i < oh * ow; ++i) dst[i] *= inv;
    }
    return push(std::move(y), [x, rows, height, width, k, oh, ow, inv](Tape& t, std::size_t self) {
        const Tensor<T>& dy = t.nodes_[self].grad;
        Tensor<T>& dx = t.nodes_[x.id].grad;
        for (std::size_t r = 0; r < rows; ++r) {
            const T* g = &dy[r * oh * ow];
            T* dst = &dx[r * height * width];
            for (std::size_t i = 0; i < height; ++i) {
                for (std::size_t j = 0; j < width; ++j) dst[i * width + j] += g[(i / k) * ow + j / k] * inv;
            }
        }
    });
}

template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& logits) {
    Tensor<T> p = logits;
    const std::size_t cols = p.cols();
    for (std::size_t r = 0; r < p.rows(); ++r) {
        auto row = p.row(r);
        const T mx = *std::max_element(row.begin(), row.end());
        T sum{0};
        for (auto& v : row) {
            v = std::exp(v - mx);
            sum += v;
        }
        for (auto& v : row) v /= sum;
        (void)cols;
    }
    return p;
}

template <typename T>
Var Tape<T>::softmax_xent(Var logits, std::span<const int> targets) {
    const Tensor<T>& lv = value(logits);
    const std::size_t n = lv.rows(), c = lv.cols();
    if (targets.size() != n) {
        throw ShapeError("softmax_xent: " + std::to_string(targets.size()) + " targets for " +
                         std::to_string(n) + " rows");
    }
    for (int y : targets) {
        if (y < 0 || static_cast<std::size_t>(y) >= c) {
            throw InvalidArgument("softmax_xent: target " + std::to_string(y) + " outside [0, " +
                                  std::to_string(c) + ")");
        }
    }
    Tensor<T> probs = softmax_rows(lv);
    T loss{0};
    for (std::size_t r = 0; r < n; ++r) {
        auto row = lv.row(r);
        const T mx = *std::max_element(row.begin(), row.end());
        T sum{0};
        for (T v : row) sum += std::exp(v - mx);
        loss += (mx + std::log(sum)) - row[static_cast<std::size_t>(targets[r])];
    }
    loss /= static_cast<T>(n);
    std::vector<int> tg(targets.begin(), targets.end());
    return push(Tensor<T>({1}, std::vector<T>{loss}),
                [logits, probs = std::move(probs), tg = std::move(tg), n, c](Tape& t, std::size_t self) {
                    const T g = t.nodes_[self].grad[0] / static_cast<T>(n);
                    Tensor<T>& dl = t.nodes_[logits.id].grad;
                    for (std::size_t r = 0; r < n; ++r) {
                        for (std::size_t k = 0; k < c; ++k) {
                            const T onehot = static_cast<std::size_t>(tg[r]) == k ? T{1} : T{0};
                            dl[r * c + k] += g * (probs[r * c + k] - onehot);
                        }
                    }
                });
}

template <typename T>
void Tape<T>::backward(Var loss) {
    if (consumed_) throw InvalidArgument("backward: tape already consumed");
    Node& l = node(loss);
    if (l.value.size() != 1) {
        throw ShapeError("backward: loss must be a scalar, got " + shape_str(l.value.shape()));
    }
    consumed_ = true;
    l.grad[0] = T{1};
    for (std::size_t i = loss.id + 1; i-- > 0;) {
        if (nodes_[i].backward) nodes_[i].backward(*this, i);
    }
    for (Node& n : nodes_) {
        if (n.param == nullptr) continue;
        auto& g = n.param->grad;
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
    }
}

template class Tape<float>;
template class Tape<double>;
template Tensor<float> softmax_rows(const Tensor<float>&);
template Tensor<double> softmax_rows(const Tensor<double>&);

}  // namespace tbn
