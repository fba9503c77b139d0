// SPDX-License-Identifier: Apache-2.0
#include "ctg/ad/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

namespace ctg::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

struct Broadcast {
  std::size_t rows, cols;
  std::size_t ar, ac, br, bc;
  Shape shape;

  std::size_t ia(std::size_t r, std::size_t c) const { return (ar == 1 ? 0 : r) * ac + (ac == 1 ? 0 : c); }
  std::size_t ib(std::size_t r, std::size_t c) const { return (br == 1 ? 0 : r) * bc + (bc == 1 ? 0 : c); }
};

Broadcast broadcast(const Tensor& a, const Tensor& b, const char* op) {
  Broadcast bc{};
  bc.ar = a.rows();
  bc.ac = a.cols();
  bc.br = b.rows();
  bc.bc = b.cols();
  bc.rows = std::max(bc.ar, bc.br);
  bc.cols = std::max(bc.ac, bc.bc);
  auto ok = [](std::size_t x, std::size_t n) { return x == 1 || x == n; };
  if (!ok(bc.ar, bc.rows) || !ok(bc.br, bc.rows) || !ok(bc.ac, bc.cols) || !ok(bc.bc, bc.cols)) {
    throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  }
  if (bc.ar == bc.rows && bc.ac == bc.cols) {
    bc.shape = a.shape();
  } else if (bc.br == bc.rows && bc.bc == bc.cols) {
    bc.shape = b.shape();
  } else {
    bc.shape = {bc.rows, bc.cols};
  }
  return bc;
}

template <class Fwd, class DA, class DB>
Tensor binary(const Tensor& a, const Tensor& b, const char* name, Fwd fwd, DA da, DB db) {
  const Broadcast bc = broadcast(a, b, name);
  std::vector<double> out(bc.rows * bc.cols);
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t r = 0; r < bc.rows; ++r) {
    for (std::size_t c = 0; c < bc.cols; ++c) out[r * bc.cols + c] = fwd(av[bc.ia(r, c)], bv[bc.ib(r, c)]);
  }
  auto an = a.node_ptr();
  auto bn = b.node_ptr();
  return make_result(bc.shape, std::move(out), {a, b}, [bc, an, bn, da, db](Node& self) {
    const auto& g = self.grad;
    const auto& av = an->value;
    const auto& bv = bn->value;
    if (an->requires_grad) {
      auto& ga = an->grad_buffer();
      for (std::size_t r = 0; r < bc.rows; ++r) {
        for (std::size_t c = 0; c < bc.cols; ++c) {
          const std::size_t i = bc.ia(r, c), j = bc.ib(r, c);
          ga[i] += da(g[r * bc.cols + c], av[i], bv[j]);
        }
      }
    }
    if (bn->requires_grad) {
      auto& gb = bn->grad_buffer();
      for (std::size_t r = 0; r < bc.rows; ++r) {
        for (std::size_t c = 0; c < bc.cols; ++c) {
          const std::size_t i = bc.ia(r, c), j = bc.ib(r, c);
          gb[j] += db(g[r * bc.cols + c], av[i], bv[j]);
        }
      }
    }
  });
}

// `dfn(x, y)` is dy/dx given input x and output y.
template <class Fwd, class Dfn>
Tensor unary(const Tensor& a, Fwd fwd, Dfn dfn) {
  const auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
  auto an = a.node_ptr();
  auto result = make_result(a.shape(), std::move(out), {a}, {});
  if (result.requires_grad()) {
    result.node()->backward_fn = [an, dfn](Node& self) {
      auto& ga = an->grad_buffer();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i] * dfn(an->value[i], self.value[i]);
    };
  }
  return result;
}

void check_tau(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    std::ostringstream os;
    os << "softmax temperature must be positive and finite, got " << tau;
    throw std::invalid_argument(os.str());
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "add", [](double x, double y) { return x + y; }, [](double g, double, double) { return g; },
      [](double g, double, double) { return g; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "sub", [](double x, double y) { return x - y; }, [](double g, double, double) { return g; },
      [](double g, double, double) { return -g; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "mul", [](double x, double y) { return x * y; }, [](double g, double, double y) { return g * y; },
      [](double g, double x, double) { return g * x; });
}

Tensor scale(const Tensor& a, double s) {
  return unary(a, [s](double x) { return x * s; }, [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(m * n);
  Map(out.data(), m, n).noalias() = ConstMap(a.values().data(), m, k) * ConstMap(b.values().data(), k, n);
  auto an = a.node_ptr();
  auto bn = b.node_ptr();
  return make_result({m, n}, std::move(out), {a, b}, [an, bn, m, k, n](Node& self) {
    ConstMap g(self.grad.data(), m, n);
    if (an->requires_grad) {
      Map(an->grad_buffer().data(), m, k).noalias() += g * ConstMap(bn->value.data(), k, n).transpose();
    }
    if (bn->requires_grad) {
      Map(bn->grad_buffer().data(), k, n).noalias() += ConstMap(an->value.data(), m, k).transpose() * g;
    }
  });
}

Tensor tanh(const Tensor& a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor exp(const Tensor& a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  const auto av = a.values();
  for (std::size_t i = 0; i < av.size(); ++i) {
    if (!(av[i] > 0.0)) {
      std::ostringstream os;
      os << "log of nonpositive value " << av[i] << " at index " << i << " of shape " << shape_str(a.shape());
      throw std::domain_error(os.str());
    }
  }
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor softmax(const Tensor& a, double tau) {
  check_tau(tau);
  const double inv = 1.0 / tau;
  const std::size_t R = a.rows(), C = a.cols();
  const auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t r = 0; r < R; ++r) {
    const double* x = av.data() + r * C;
    double* y = out.data() + r * C;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < C; ++c) mx = std::max(mx, x[c] * inv);
    double z = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      y[c] = std::exp(x[c] * inv - mx);
      z += y[c];
    }
    for (std::size_t c = 0; c < C; ++c) y[c] /= z;
  }
  auto an = a.node_ptr();
  return make_result(a.shape(), std::move(out), {a}, [an, R, C, inv](Node& self) {
    auto& ga = an->grad_buffer();
    for (std::size_t r = 0; r < R; ++r) {
      const double* y = self.value.data() + r * C;
      const double* g = self.grad.data() + r * C;
      double dot = 0.0;
      for (std::size_t c = 0; c < C; ++c) dot += g[c] * y[c];
      for (std::size_t c = 0; c < C; ++c) ga[r * C + c] += y[c] * (g[c] - dot) * inv;
    }
  });
}

Tensor log_softmax(const Tensor& a, double tau) {
  check_tau(tau);
  const double inv = 1.0 / tau;
  const std::size_t R = a.rows(), C = a.cols();
  const auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t r = 0; r < R; ++r) {
    const double* x = av.data() + r * C;
    double* y = out.data() + r * C;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < C; ++c) mx = std::max(mx, x[c] * inv);
    double z = 0.0;
    for (std::size_t c = 0; c < C; ++c) z += std::exp(x[c] * inv - mx);
    const double lz = std::log(z);
    for (std::size_t c = 0; c < C; ++c) y[c] = x[c] * inv - mx - lz;
  }
  auto an = a.node_ptr();
  return make_result(a.shape(), std::move(out), {a}, [an, R, C, inv](Node& self) {
    auto& ga = an->grad_buffer();
    for (std::size_t r = 0; r < R; ++r) {
      const double* y = self.value.data() + r * C;
      const double* g = self.grad.data() + r * C;
      double gs = 0.0;
      for (std::size_t c = 0; c < C; ++c) gs += g[c];
      for (std::size_t c = 0; c < C; ++c) ga[r * C + c] += (g[c] - std::exp(y[c]) * gs) * inv;
    }
  });
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  if (axis == 0) {
    const std::size_t C = parts[0].cols();
    std::size_t R = 0;
    for (const auto& p : parts) {
      if (p.cols() != C) {
        throw ShapeError("concat(axis 0): column mismatch " + shape_str(parts[0].shape()) + " vs " +
                         shape_str(p.shape()));
      }
      R += p.rows();
    }
    std::vector<double> out;
    out.reserve(R * C);
    for (const auto& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
    std::vector<std::shared_ptr<Node>> nodes;
    for (const auto& p : parts) nodes.push_back(p.node_ptr());
    return make_result({R, C}, std::move(out), parts, [nodes](Node& self) {
      std::size_t off = 0;
      for (const auto& n : nodes) {
        const std::size_t sz = n->value.size();
        if (n->requires_grad) {
          auto& g = n->grad_buffer();
          for (std::size_t i = 0; i < sz; ++i) g[i] += self.grad[off + i];
        }
        off += sz;
      }
    });
  }
  if (axis != 1 && axis != -1) throw ShapeError("concat: axis must be 0, 1 or -1");
  const std::size_t R = parts[0].rows();
  std::size_t C = 0;
  for (const auto& p : parts) {
    if (p.rows() != R) {
      throw ShapeError("concat(axis 1): row mismatch " + shape_str(parts[0].shape()) + " vs " +
                       shape_str(p.shape()));
    }
    C += p.cols();
  }
  std::vector<double> out(R * C);
  std::size_t coff = 0;
  for (const auto& p : parts) {
    const std::size_t pc = p.cols();
    const auto pv = p.values();
    for (std::size_t r = 0; r < R; ++r) std::copy_n(pv.data() + r * pc, pc, out.data() + r * C + coff);
    coff += pc;
  }
  std::vector<std::shared_ptr<Node>> nodes;
  for (const auto& p : parts) nodes.push_back(p.node_ptr());
  return make_result({R, C}, std::move(out), parts, [nodes, R, C](Node& self) {
    std::size_t coff = 0;
    for (const auto& n : nodes) {
      const std::size_t pc = n->shape.empty() ? 1 : n->shape.back();
      if (n->requires_grad) {
        auto& g = n->grad_buffer();
        for (std::size_t r = 0; r < R; ++r) {
          for (std::size_t c = 0; c < pc; ++c) g[r * pc + c] += self.grad[r * C + coff + c];
        }
      }
      coff += pc;
    }
  });
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end) {
  const std::size_t R = a.rows(), C = a.cols();
  if (begin >= end || end > R) {
    throw ShapeError("slice_rows: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") invalid for shape " + shape_str(a.shape()));
  }
  std::vector<double> out(a.values().begin() + begin * C, a.values().begin() + end * C);
  auto an = a.node_ptr();
  return make_result({end - begin, C}, std::move(out), {a}, [an, begin, C](Node& self) {
    auto& g = an->grad_buffer();
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[begin * C + i] += self.grad[i];
  });
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end) {
  const std::size_t R = a.rows(), C = a.cols();
  if (begin >= end || end > C) {
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") invalid for shape " + shape_str(a.shape()));
  }
  const std::size_t W = end - begin;
  std::vector<double> out(R * W);
  const auto av = a.values();
  for (std::size_t r = 0; r < R; ++r) std::copy_n(av.data() + r * C + begin, W, out.data() + r * W);
  auto an = a.node_ptr();
  return make_result({R, W}, std::move(out), {a}, [an, begin, R, C, W](Node& self) {
    auto& g = an->grad_buffer();
    for (std::size_t r = 0; r < R; ++r) {
      for (std::size_t c = 0; c < W; ++c) g[r * C + begin + c] += self.grad[r * W + c];
    }
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.size()) {
    throw ShapeError("reshape: " + shape_str(a.shape()) + " to " + shape_str(shape));
  }
  std::vector<double> out(a.values().begin(), a.values().end());
  auto an = a.node_ptr();
  return make_result(std::move(shape), std::move(out), {a}, [an](Node& self) {
    auto& g = an->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  auto an = a.node_ptr();
  return make_result({}, {s}, {a}, [an](Node& self) {
    auto& g = an->grad_buffer();
    for (auto& x : g) x += self.grad[0];
  });
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.size())); }

Tensor sum_cols(const Tensor& a) {
  const std::size_t R = a.rows(), C = a.cols();
  std::vector<double> out(R, 0.0);
  const auto av = a.values();
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t c = 0; c < C; ++c) out[r] += av[r * C + c];
  }
  auto an = a.node_ptr();
  return make_result({R, 1}, std::move(out), {a}, [an, R, C](Node& self) {
    auto& g = an->grad_buffer();
    for (std::size_t r = 0; r < R; ++r) {
      for (std::size_t c = 0; c < C; ++c) g[r * C + c] += self.grad[r];
    }
  });
}

Tensor row_gather(const Tensor& table, std::span<const int> ids) {
  if (table.rank() != 2) throw ShapeError("row_gather: table must be 2-D, got " + shape_str(table.shape()));
  if (ids.empty()) throw ShapeError("row_gather: no ids");
  const std::size_t V = table.rows(), E = table.cols();
  std::vector<double> out(ids.size() * E);
  const auto tv = table.values();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= V) {
      throw std::out_of_range("row_gather: id " + std::to_string(ids[i]) + " outside table of " +
                              std::to_string(V) + " rows");
    }
    std::copy_n(tv.data() + static_cast<std::size_t>(ids[i]) * E, E, out.data() + i * E);
  }
  auto tn = table.node_ptr();
  std::vector<int> idv(ids.begin(), ids.end());
  return make_result({ids.size(), E}, std::move(out), {table}, [tn, idv = std::move(idv), E](Node& self) {
    auto& g = tn->grad_buffer();
    for (std::size_t i = 0; i < idv.size(); ++i) {
      double* dst = g.data() + static_cast<std::size_t>(idv[i]) * E;
      for (std::size_t e = 0; e < E; ++e) dst[e] += self.grad[i * E + e];
    }
  });
}

Tensor unfold_windows(const Tensor& x, std::size_t steps, std::size_t batch, std::size_t window,
                      std::span<const std::size_t> lengths) {
  if (x.rows() != steps * batch || lengths.size() != batch || window == 0) {
    throw ShapeError("unfold_windows: shape " + shape_str(x.shape()) + " does not hold " + std::to_string(steps) +
                     " steps of batch " + std::to_string(batch));
  }
  const std::size_t E = x.cols();
  const std::size_t W = window * E;
  std::vector<double> out(steps * batch * W, 0.0);
  const auto xv = x.values();
  for (std::size_t p = 0; p < steps; ++p) {
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t len = std::min(lengths[b], steps);
      for (std::size_t k = 0; k < window && p + k < len; ++k) {
        std::copy_n(xv.data() + ((p + k) * batch + b) * E, E, out.data() + (p * batch + b) * W + k * E);
      }
    }
  }
  auto xn = x.node_ptr();
  std::vector<std::size_t> lens(lengths.begin(), lengths.end());
  return make_result({steps * batch, W}, std::move(out), {x},
                     [xn, lens = std::move(lens), steps, batch, window, E, W](Node& self) {
                       auto& g = xn->grad_buffer();
                       for (std::size_t p = 0; p < steps; ++p) {
                         for (std::size_t b = 0; b < batch; ++b) {
                           const std::size_t len = std::min(lens[b], steps);
                           for (std::size_t k = 0; k < window && p + k < len; ++k) {
                             double* dst = g.data() + ((p + k) * batch + b) * E;
                             const double* src = self.grad.data() + (p * batch + b) * W + k * E;
                             for (std::size_t e = 0; e < E; ++e) dst[e] += src[e];
                           }
                         }
                       }
                     });
}

Tensor masked_max_over_time(const Tensor& x, std::size_t steps, std::size_t batch,
                            std::span<const std::size_t> lengths) {
  if (x.rows() != steps * batch || lengths.size() != batch) {
    throw ShapeError("masked_max_over_time: shape " + shape_str(x.shape()) + " does not hold " +
                     std::to_string(steps) + " steps of batch " + std::to_string(batch));
  }
  const std::size_t F = x.cols();
  std::vector<double> out(batch * F);
  std::vector<std::size_t> arg(batch * F);
  const auto xv = x.values();
  for (std::size_t b = 0; b < batch; ++b) {
    const std::size_t len = std::min(lengths[b], steps);
    if (len == 0) throw ShapeError("masked_max_over_time: sequence " + std::to_string(b) + " is empty");
    for (std::size_t f = 0; f < F; ++f) {
      std::size_t best = b * F + f;  // row p=0
      double bv = xv[best];
      for (std::size_t p = 1; p < len; ++p) {
        const std::size_t i = (p * batch + b) * F + f;
        if (xv[i] > bv) {
          bv = xv[i];
          best = i;
        }
      }
      out[b * F + f] = bv;
      arg[b * F + f] = best;
    }
  }
  auto xn = x.node_ptr();
  return make_result({batch, F}, std::move(out), {x}, [xn, arg = std::move(arg)](Node& self) {
    auto& g = xn->grad_buffer();
    for (std::size_t i = 0; i < arg.size(); ++i) g[arg[i]] += self.grad[i];
  });
}

Tensor one_hot(std::span<const int> ids, std::size_t depth) {
  std::vector<double> out(ids.size() * depth, 0.0);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= depth) {
      throw std::out_of_range("one_hot: id " + std::to_string(ids[i]) + " outside depth " + std::to_string(depth));
    }
    out[i * depth + static_cast<std::size_t>(ids[i])] = 1.0;
  }
  return Tensor::from({ids.size(), depth}, std::move(out));
}

}  // namespace ctg::ad
