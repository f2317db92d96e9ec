#include "dmmv/autodiff.hpp"

#include "dmmv/errors.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace dmmv::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;
using Eigen::Index;

MapMat as_mat(Tensor& t, std::size_t rows, std::size_t cols) {
    return MapMat(t.data.data(), static_cast<Index>(rows), static_cast<Index>(cols));
}

CMapMat as_mat(const Tensor& t, std::size_t rows, std::size_t cols) {
    return CMapMat(t.data.data(), static_cast<Index>(rows), static_cast<Index>(cols));
}

[[noreturn]] void mismatch(const char* op, const Var& a, const Var& b) {
    throw ShapeMismatch(std::string(op) + ": " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

void require_2d(const char* op, const Var& a) {
    if (a.shape().size() != 2) {
        throw ShapeMismatch(std::string(op) + " expects a 2-D tensor, got " + shape_str(a.shape()));
    }
}

bool wants_grad(std::initializer_list<const Var*> inputs) {
    if (!grad_enabled()) return false;
    for (const Var* v : inputs) {
        if (v->requires_grad()) return true;
    }
    return false;
}

template <class Fn>
Var make_result(Tensor value, std::initializer_list<const Var*> inputs, Fn&& fn) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    if (wants_grad(inputs)) {
        node->requires_grad = true;
        node->inputs.reserve(inputs.size());
        for (const Var* v : inputs) node->inputs.push_back(v->shared());
        node->backward_fn = std::forward<Fn>(fn);
    }
    return Var(std::move(node));
}

bool needs(const Node& n, std::size_t i) { return n.inputs[i]->requires_grad; }

} // namespace

Var matmul(const Var& a, const Var& b) {
    require_2d("matmul", a);
    require_2d("matmul", b);
    const auto m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    if (b.shape()[0] != k) mismatch("matmul", a, b);
    Tensor out({m, n});
    as_mat(out, m, n).noalias() = as_mat(a.value(), m, k) * as_mat(b.value(), k, n);
    return make_result(std::move(out), {&a, &b}, [m, k, n](Node& self) {
        const auto dy = as_mat(self.grad, m, n);
        if (needs(self, 0)) {
            as_mat(self.input_grad(0), m, k).noalias() += dy * as_mat(self.inputs[1]->value, k, n).transpose();
        }
        if (needs(self, 1)) {
            as_mat(self.input_grad(1), k, n).noalias() += as_mat(self.inputs[0]->value, m, k).transpose() * dy;
        }
    });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
    require_2d("linear", x);
    require_2d("linear", weight);
    const auto m = x.shape()[0], in = x.shape()[1], out_dim = weight.shape()[0];
    if (weight.shape()[1] != in) mismatch("linear", x, weight);
    const bool has_bias = bias.defined();
    if (has_bias && bias.numel() != out_dim) mismatch("linear(bias)", weight, bias);

    Tensor out({m, out_dim});
    auto y = as_mat(out, m, out_dim);
    y.noalias() = as_mat(x.value(), m, in) * as_mat(weight.value(), out_dim, in).transpose();
    if (has_bias) {
        const auto b = as_mat(bias.value(), 1, out_dim);
        y.rowwise() += b.row(0);
    }
    auto fn = [m, in, out_dim, has_bias](Node& self) {
        const auto dy = as_mat(self.grad, m, out_dim);
        if (needs(self, 0)) {
            as_mat(self.input_grad(0), m, in).noalias() += dy * as_mat(self.inputs[1]->value, out_dim, in);
        }
        if (needs(self, 1)) {
            as_mat(self.input_grad(1), out_dim, in).noalias() += dy.transpose() * as_mat(self.inputs[0]->value, m, in);
        }
        if (has_bias && needs(self, 2)) {
            as_mat(self.input_grad(2), 1, out_dim) += dy.colwise().sum();
        }
    };
    if (has_bias) return make_result(std::move(out), {&x, &weight, &bias}, std::move(fn));
    return make_result(std::move(out), {&x, &weight}, std::move(fn));
}

Var linear(const Var& x, const Var& weight) { return linear(x, weight, Var()); }

Var add(const Var& a, const Var& b) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    Tensor out = av;
    if (bv.numel() == av.numel()) {
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] += bv[i];
        return make_result(std::move(out), {&a, &b}, [](Node& self) {
            for (std::size_t j = 0; j < 2; ++j) {
                if (!needs(self, j)) continue;
                auto& g = self.input_grad(j);
                for (std::size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i];
            }
        });
    }
    if (bv.numel() == 1) {
        const double s = bv[0];
        for (auto& v : out.data) v += s;
        return make_result(std::move(out), {&a, &b}, [](Node& self) {
            if (needs(self, 0)) {
                auto& g = self.input_grad(0);
                for (std::size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i];
            }
            if (needs(self, 1)) {
                double acc = 0.0;
                for (double v : self.grad.data) acc += v;
                self.input_grad(1)[0] += acc;
            }
        });
    }
    if (av.rank() == 2 && bv.numel() == av.cols()) {
        const auto rows = av.rows(), cols = av.cols();
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] += bv[c];
        }
        return make_result(std::move(out), {&a, &b}, [rows, cols](Node& self) {
            if (needs(self, 0)) {
                auto& g = self.input_grad(0);
                for (std::size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i];
            }
            if (needs(self, 1)) {
                auto& g = self.input_grad(1);
                for (std::size_t r = 0; r < rows; ++r) {
                    for (std::size_t c = 0; c < cols; ++c) g[c] += self.grad[r * cols + c];
                }
            }
        });
    }
    mismatch("add", a, b);
}

Var sub(const Var& a, const Var& b) {
    if (a.numel() != b.numel()) mismatch("sub", a, b);
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= b.value()[i];
    return make_result(std::move(out), {&a, &b}, [](Node& self) {
        if (needs(self, 0)) {
            auto& g = self.input_grad(0);
            for (std::size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i];
        }
        if (needs(self, 1)) {
            auto& g = self.input_grad(1);
            for (std::size_t i = 0; i < g.numel(); ++i) g[i] -= self.grad[i];
        }
    });
}

Var mul(const Var& a, const Var& b) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    Tensor out = av;
    if (bv.numel() == av.numel()) {
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= bv[i];
        return make_result(std::move(out), {&a, &b}, [](Node& self) {
            const auto& x = self.inputs[0]->value;
            const auto& y = self.inputs[1]->value;
            if (needs(self, 0)) {
                auto& g = self.input_grad(0);
                for (std::size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i] * y[i];
            }
            if (needs(self, 1)) {
                auto& g = self.input_grad(1);
                for (std::size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i] * x[i];
            }
        });
    }
    if (bv.numel() == 1) {
        const double s = bv[0];
        for (auto& v : out.data) v *= s;
        return make_result(std::move(out), {&a, &b}, [](Node& self) {
            const auto& x = self.inputs[0]->value;
            const double s = self.inputs[1]->value[0];
            if (needs(self, 0)) {
                auto& g = self.input_grad(0);
                for (std::size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i] * s;
            }
            if (needs(self, 1)) {
                double acc = 0.0;
                for (std::size_t i = 0; i < x.numel(); ++i) acc += self.grad[i] * x[i];
                self.input_grad(1)[0] += acc;
            }
        });
    }
    mismatch("mul", a, b);
}

Var scale(const Var& a, double s) {
    Tensor out = a.value();
    for (auto& v : out.data) v *= s;
    return make_result(std::move(out), {&a}, [s](Node& self) {
        auto& g = self.input_grad(0);
        for (std::size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i] * s;
    });
}

Var add_scalar(const Var& a, double s) {
    Tensor out = a.value();
    for (auto& v : out.data) v += s;
    return make_result(std::move(out), {&a}, [](Node& self) {
        auto& g = self.input_grad(0);
        for (std::size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i];
    });
}

Var transpose(const Var& a) {
    require_2d("transpose", a);
    const auto r = a.shape()[0], c = a.shape()[1];
    Tensor out({c, r});
    as_mat(out, c, r) = as_mat(a.value(), r, c).transpose();
    return make_result(std::move(out), {&a}, [r, c](Node& self) {
        as_mat(self.input_grad(0), r, c) += as_mat(self.grad, c, r).transpose();
    });
}

Var reshape(const Var& a, Shape shape) {
    if (shape_numel(shape) != a.numel()) {
        throw ShapeMismatch("reshape: " + shape_str(a.shape()) + " -> " + shape_str(shape));
    }
    Tensor out(std::move(shape), a.value().data);
    return make_result(std::move(out), {&a}, [](Node& self) {
        auto& g = self.input_grad(0);
        for (std::size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i];
    });
}

Var slice_rows(const Var& a, std::size_t begin, std::size_t end) {
    require_2d("slice_rows", a);
    const auto rows = a.shape()[0], cols = a.shape()[1];
    if (begin >= end || end > rows) {
        throw ShapeMismatch("slice_rows [" + std::to_string(begin) + "," + std::to_string(end) + ") of " +
                            shape_str(a.shape()));
    }
    Tensor out({end - begin, cols});
    std::copy(a.value().data.begin() + static_cast<std::ptrdiff_t>(begin * cols),
              a.value().data.begin() + static_cast<std::ptrdiff_t>(end * cols), out.data.begin());
    return make_result(std::move(out), {&a}, [begin, cols](Node& self) {
        auto& g = self.input_grad(0);
        for (std::size_t i = 0; i < self.grad.numel(); ++i) g[begin * cols + i] += self.grad[i];
    });
}

Var slice_cols(const Var& a, std::size_t begin, std::size_t end) {
    require_2d("slice_cols", a);
    const auto rows = a.shape()[0], cols = a.shape()[1];
    if (begin >= end || end > cols) {
        throw ShapeMismatch("slice_cols [" + std::to_string(begin) + "," + std::to_string(end) + ") of " +
                            shape_str(a.shape()));
    }
    const auto w = end - begin;
    Tensor out({rows, w});
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < w; ++c) out[r * w + c] = a.value()[r * cols + begin + c];
    }
    return make_result(std::move(out), {&a}, [rows, cols, begin, w](Node& self) {
        auto& g = self.input_grad(0);
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < w; ++c) g[r * cols + begin + c] += self.grad[r * w + c];
        }
    });
}

namespace {

Var concat_impl(std::span<const Var> parts, bool along_rows) {
    if (parts.empty()) throw ShapeMismatch("concat of zero tensors");
    for (const auto& p : parts) require_2d("concat", p);
    const auto rows0 = parts[0].shape()[0], cols0 = parts[0].shape()[1];
    std::size_t total = 0;
    for (const auto& p : parts) {
        if (along_rows ? p.shape()[1] != cols0 : p.shape()[0] != rows0) mismatch("concat", parts[0], p);
        total += along_rows ? p.shape()[0] : p.shape()[1];
    }
    const Shape shape = along_rows ? Shape{total, cols0} : Shape{rows0, total};
    Tensor out(shape);
    std::size_t offset = 0;
    for (const auto& p : parts) {
        const auto r = p.shape()[0], c = p.shape()[1];
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < c; ++j) {
                if (along_rows) out[(offset + i) * cols0 + j] = p.value()[i * c + j];
                else out[i * total + offset + j] = p.value()[i * c + j];
            }
        }
        offset += along_rows ? r : c;
    }

    auto node = std::make_shared<Node>();
    node->value = std::move(out);
    bool any = false;
    for (const auto& p : parts) any = any || p.requires_grad();
    if (grad_enabled() && any) {
        node->requires_grad = true;
        for (const auto& p : parts) node->inputs.push_back(p.shared());
        node->backward_fn = [along_rows, total, cols0](Node& self) {
            std::size_t offset = 0;
            for (std::size_t k = 0; k < self.inputs.size(); ++k) {
                const auto r = self.inputs[k]->value.shape[0], c = self.inputs[k]->value.shape[1];
                if (self.inputs[k]->requires_grad) {
                    auto& g = self.input_grad(k);
                    for (std::size_t i = 0; i < r; ++i) {
                        for (std::size_t j = 0; j < c; ++j) {
                            g[i * c + j] += along_rows ? self.grad[(offset + i) * cols0 + j]
                                                       : self.grad[i * total + offset + j];
                        }
                    }
                }
                offset += along_rows ? r : c;
            }
        };
    }
    return Var(std::move(node));
}

} // namespace

Var concat_rows(std::span<const Var> parts) { return concat_impl(parts, true); }

Var concat_cols(std::span<const Var> parts) { return concat_impl(parts, false); }

Var gather(const Var& a, std::shared_ptr<const std::vector<std::size_t>> index, Shape out_shape) {
    if (shape_numel(out_shape) != index->size()) throw ShapeMismatch("gather: index/shape size mismatch");
    Tensor out(std::move(out_shape));
    const auto n = a.numel();
    for (std::size_t i = 0; i < index->size(); ++i) {
        const auto src = (*index)[i];
        if (src >= n) throw ShapeMismatch("gather: index out of range");
        out[i] = a.value()[src];
    }
    return make_result(std::move(out), {&a}, [index](Node& self) {
        auto& g = self.input_grad(0);
        for (std::size_t i = 0; i < index->size(); ++i) g[(*index)[i]] += self.grad[i];
    });
}

Var gather_rows(const Var& a, std::span<const std::size_t> rows) {
    require_2d("gather_rows", a);
    const auto n = a.shape()[0], cols = a.shape()[1];
    std::vector<std::size_t> idx(rows.begin(), rows.end());
    Tensor out({idx.size(), cols});
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= n) throw ShapeMismatch("gather_rows: row out of range");
        std::copy_n(a.value().data.begin() + static_cast<std::ptrdiff_t>(idx[i] * cols), cols,
                    out.data.begin() + static_cast<std::ptrdiff_t>(i * cols));
    }
    return make_result(std::move(out), {&a}, [idx = std::move(idx), cols](Node& self) {
        auto& g = self.input_grad(0);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            for (std::size_t c = 0; c < cols; ++c) g[idx[i] * cols + c] += self.grad[i * cols + c];
        }
    });
}

Var overwrite_rows(const Var& base, const Var& values, std::span<const std::size_t> rows) {
    require_2d("overwrite_rows", base);
    require_2d("overwrite_rows", values);
    const auto n = base.shape()[0], cols = base.shape()[1];
    if (values.shape()[1] != cols || values.shape()[0] != rows.size()) mismatch("overwrite_rows", base, values);
    std::vector<std::size_t> idx(rows.begin(), rows.end());
    Tensor out = base.value();
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= n) throw ShapeMismatch("overwrite_rows: row out of range");
        std::copy_n(values.value().data.begin() + static_cast<std::ptrdiff_t>(i * cols), cols,
                    out.data.begin() + static_cast<std::ptrdiff_t>(idx[i] * cols));
    }
    return make_result(std::move(out), {&base, &values}, [idx = std::move(idx), n, cols](Node& self) {
        if (needs(self, 0)) {
            std::vector<std::uint8_t> replaced(n, 0);
            for (auto r : idx) replaced[r] = 1;
            auto& g = self.input_grad(0);
            for (std::size_t r = 0; r < n; ++r) {
                if (replaced[r]) continue;
                for (std::size_t c = 0; c < cols; ++c) g[r * cols + c] += self.grad[r * cols + c];
            }
        }
        if (needs(self, 1)) {
            auto& g = self.input_grad(1);
            for (std::size_t i = 0; i < idx.size(); ++i) {
                for (std::size_t c = 0; c < cols; ++c) g[i * cols + c] += self.grad[idx[i] * cols + c];
            }
        }
    });
}

Var repeat_rows(const Var& row, std::size_t count) {
    const auto cols = row.numel();
    Tensor out({count, cols});
    for (std::size_t r = 0; r < count; ++r) {
        std::copy(row.value().data.begin(), row.value().data.end(),
                  out.data.begin() + static_cast<std::ptrdiff_t>(r * cols));
    }
    return make_result(std::move(out), {&row}, [count, cols](Node& self) {
        auto& g = self.input_grad(0);
        for (std::size_t r = 0; r < count; ++r) {
            for (std::size_t c = 0; c < cols; ++c) g[c] += self.grad[r * cols + c];
        }
    });
}

Var select(const Var& a, const Var& b, std::shared_ptr<const std::vector<std::uint8_t>> take_b) {
    if (a.numel() != b.numel() || take_b->size() != a.numel()) mismatch("select", a, b);
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.numel(); ++i) {
        if ((*take_b)[i]) out[i] = b.value()[i];
    }
    return make_result(std::move(out), {&a, &b}, [take_b](Node& self) {
        for (std::size_t j = 0; j < 2; ++j) {
            if (!needs(self, j)) continue;
            auto& g = self.input_grad(j);
            const std::uint8_t want = j == 1 ? 1 : 0;
            for (std::size_t i = 0; i < g.numel(); ++i) {
                if (((*take_b)[i] != 0) == (want != 0)) g[i] += self.grad[i];
            }
        }
    });
}

Var sum(const Var& a) {
    double acc = 0.0;
    for (double v : a.value().data) acc += v;
    return make_result(Tensor::scalar(acc), {&a}, [](Node& self) {
        auto& g = self.input_grad(0);
        const double d = self.grad[0];
        for (auto& v : g.data) v += d;
    });
}

Var mean(const Var& a) {
    if (a.numel() == 0) throw ShapeMismatch("mean of an empty tensor");
    return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Var softmax(const Var& a) {
    const auto cols = a.value().cols();
    const auto rows = a.numel() / cols;
    Tensor out = a.value();
    for (std::size_t r = 0; r < rows; ++r) {
        double* x = out.data.data() + r * cols;
        const double mx = *std::max_element(x, x + cols);
        double total = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            x[c] = std::exp(x[c] - mx);
            total += x[c];
        }
        for (std::size_t c = 0; c < cols; ++c) x[c] /= total;
    }
    return make_result(std::move(out), {&a}, [rows, cols](Node& self) {
        auto& g = self.input_grad(0);
        const auto& y = self.value;
        for (std::size_t r = 0; r < rows; ++r) {
            double dot = 0.0;
            for (std::size_t c = 0; c < cols; ++c) dot += self.grad[r * cols + c] * y[r * cols + c];
            for (std::size_t c = 0; c < cols; ++c) {
                g[r * cols + c] += y[r * cols + c] * (self.grad[r * cols + c] - dot);
            }
        }
    });
}

Var gelu(const Var& a) {
    Tensor out = a.value();
    for (auto& v : out.data) v = 0.5 * v * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
    return make_result(std::move(out), {&a}, [](Node& self) {
        auto& g = self.input_grad(0);
        const auto& x = self.inputs[0]->value;
        constexpr double inv_sqrt_2pi = 0.3989422804014327;
        for (std::size_t i = 0; i < g.numel(); ++i) {
            const double cdf = 0.5 * (1.0 + std::erf(x[i] * std::numbers::sqrt2 / 2.0));
            const double pdf = inv_sqrt_2pi * std::exp(-0.5 * x[i] * x[i]);
            g[i] += self.grad[i] * (cdf + x[i] * pdf);
        }
    });
}

Var sigmoid(const Var& a) {
    Tensor out = a.value();
    for (auto& v : out.data) {
        if (v >= 0) {
            v = 1.0 / (1.0 + std::exp(-v));
        } else {
            const double e = std::exp(v);
            v = e / (1.0 + e);
        }
    }
    return make_result(std::move(out), {&a}, [](Node& self) {
        auto& g = self.input_grad(0);
        for (std::size_t i = 0; i < g.numel(); ++i) {
            const double y = self.value[i];
            g[i] += self.grad[i] * y * (1.0 - y);
        }
    });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
    const auto cols = x.value().cols();
    const auto rows = x.numel() / cols;
    if (gamma.numel() != cols || beta.numel() != cols) mismatch("layer_norm", x, gamma);

    Tensor out(x.shape());
    std::vector<double> xhat(x.numel());
    std::vector<double> rstd(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* in = x.value().data.data() + r * cols;
        double mu = 0.0;
        for (std::size_t c = 0; c < cols; ++c) mu += in[c];
        mu /= static_cast<double>(cols);
        double var = 0.0;
        for (std::size_t c = 0; c < cols; ++c) var += (in[c] - mu) * (in[c] - mu);
        var /= static_cast<double>(cols);
        rstd[r] = 1.0 / std::sqrt(var + eps);
        for (std::size_t c = 0; c < cols; ++c) {
            const double h = (in[c] - mu) * rstd[r];
            xhat[r * cols + c] = h;
            out[r * cols + c] = h * gamma.value()[c] + beta.value()[c];
        }
    }
    return make_result(std::move(out), {&x, &gamma, &beta},
                       [rows, cols, xhat = std::move(xhat), rstd = std::move(rstd)](Node& self) {
        const auto& gm = self.inputs[1]->value;
        if (needs(self, 1)) {
            auto& g = self.input_grad(1);
            for (std::size_t i = 0; i < rows * cols; ++i) g[i % cols] += self.grad[i] * xhat[i];
        }
        if (needs(self, 2)) {
            auto& g = self.input_grad(2);
            for (std::size_t i = 0; i < rows * cols; ++i) g[i % cols] += self.grad[i];
        }
        if (needs(self, 0)) {
            auto& g = self.input_grad(0);
            const double n = static_cast<double>(cols);
            for (std::size_t r = 0; r < rows; ++r) {
                double mean_d = 0.0, mean_dx = 0.0;
                for (std::size_t c = 0; c < cols; ++c) {
                    const double d = self.grad[r * cols + c] * gm[c];
                    mean_d += d;
                    mean_dx += d * xhat[r * cols + c];
                }
                mean_d /= n;
                mean_dx /= n;
                for (std::size_t c = 0; c < cols; ++c) {
                    const double d = self.grad[r * cols + c] * gm[c];
                    g[r * cols + c] += rstd[r] * (d - mean_d - xhat[r * cols + c] * mean_dx);
                }
            }
        }
    });
}

Var mse(const Var& pred, const Var& target) {
    if (pred.numel() != target.numel()) mismatch("mse", pred, target);
    const auto n = pred.numel();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = pred.value()[i] - target.value()[i];
        acc += d * d;
    }
    return make_result(Tensor::scalar(acc / static_cast<double>(n)), {&pred, &target}, [n](Node& self) {
        const auto& p = self.inputs[0]->value;
        const auto& t = self.inputs[1]->value;
        const double k = 2.0 * self.grad[0] / static_cast<double>(n);
        if (needs(self, 0)) {
            auto& g = self.input_grad(0);
            for (std::size_t i = 0; i < n; ++i) g[i] += k * (p[i] - t[i]);
        }
        if (needs(self, 1)) {
            auto& g = self.input_grad(1);
            for (std::size_t i = 0; i < n; ++i) g[i] -= k * (p[i] - t[i]);
        }
    });
}

} // namespace dmmv::ad
