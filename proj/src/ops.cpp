#include "lut/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

#include "lut/error.hpp"

namespace lut::ops {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

using StoragePtr = std::shared_ptr<TensorStorage>;

bool wants_grad(std::initializer_list<const Tensor*> inputs) {
  if (active_tape() == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

// Marks `out` as taped and records `fn`, which runs only if a gradient
// reached `out`.
template <class Fn>
void record(Tensor& out, Fn fn) {
  out.set_requires_grad(true);
  StoragePtr o = out.shared();
  active_tape()->record([o, fn = std::move(fn)]() {
    if (o->grad.empty()) return;
    fn(o->grad);
  });
}

void require_matrix(const Tensor& a, const char* op) {
  if (a.ndim() != 2) {
    throw DimensionError(std::string(op) + " expects a matrix, got " +
                         shape_string(a.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + " shape mismatch: " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));
  }
}

ConstMatMap cmap(const std::vector<double>& v, std::size_t r, std::size_t c) {
  return ConstMatMap(v.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

MatMap mmap(std::vector<double>& v, std::size_t r, std::size_t c) {
  return MatMap(v.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

std::size_t resolve_axis(const Tensor& a, int axis) {
  const int nd = static_cast<int>(a.ndim());
  const int resolved = axis < 0 ? axis + nd : axis;
  if (resolved < 0 || resolved >= nd) {
    throw DimensionError("axis " + std::to_string(axis) + " invalid for shape " +
                         shape_string(a.shape()));
  }
  return static_cast<std::size_t>(resolved);
}

struct AxisLayout {
  std::size_t outer = 1, len = 1, inner = 1;
};

AxisLayout layout_for(const Tensor& a, std::size_t axis) {
  AxisLayout l;
  for (std::size_t i = 0; i < axis; ++i) l.outer *= a.shape()[i];
  l.len = a.shape()[axis];
  for (std::size_t i = axis + 1; i < a.ndim(); ++i) l.inner *= a.shape()[i];
  return l;
}

// Shared forward for softmax/log_softmax. Returns softmax values in `prob` and
// the per-slice log normalizer in `log_z`.
void softmax_forward(const Tensor& a, const AxisLayout& l, std::vector<double>& prob,
                     std::vector<double>& log_z) {
  const auto& x = a.data();
  prob.assign(x.size(), 0.0);
  log_z.assign(l.outer * l.inner, 0.0);
  for (std::size_t o = 0; o < l.outer; ++o) {
    for (std::size_t in = 0; in < l.inner; ++in) {
      const std::size_t base = o * l.len * l.inner + in;
      double mx = kNegInf;
      for (std::size_t i = 0; i < l.len; ++i) {
        const double v = x[base + i * l.inner];
        if (std::isnan(v) || v == std::numeric_limits<double>::infinity()) {
          throw NumericError("softmax input contains NaN or +inf");
        }
        mx = std::max(mx, v);
      }
      if (mx == kNegInf) throw NumericError("softmax slice has no finite entry");
      double total = 0.0;
      for (std::size_t i = 0; i < l.len; ++i) {
        const double e = std::exp(x[base + i * l.inner] - mx);
        prob[base + i * l.inner] = e;
        total += e;
      }
      for (std::size_t i = 0; i < l.len; ++i) prob[base + i * l.inner] /= total;
      log_z[o * l.inner + in] = mx + std::log(total);
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw DimensionError("matmul inner dimensions differ: " + shape_string(a.shape()) +
                         " x " + shape_string(b.shape()));
  }
  Tensor out(Shape{m, n});
  mmap(out.storage().value, m, n).noalias() = cmap(a.data(), m, k) * cmap(b.data(), k, n);
  if (wants_grad({&a, &b})) {
    StoragePtr pa = a.shared(), pb = b.shared();
    record(out, [pa, pb, m, k, n](const std::vector<double>& g) {
      auto gm = cmap(g, m, n);
      if (pa->requires_grad) {
        mmap(accumulate_into(*pa), m, k).noalias() += gm * cmap(pb->value, k, n).transpose();
      }
      if (pb->requires_grad) {
        mmap(accumulate_into(*pb), k, n).noalias() += cmap(pa->value, m, k).transpose() * gm;
      }
    });
  }
  return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_nt");
  require_matrix(b, "matmul_nt");
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  if (b.cols() != k) {
    throw DimensionError("matmul_nt inner dimensions differ: " + shape_string(a.shape()) +
                         " x " + shape_string(b.shape()) + "^T");
  }
  Tensor out(Shape{m, n});
  mmap(out.storage().value, m, n).noalias() =
      cmap(a.data(), m, k) * cmap(b.data(), n, k).transpose();
  if (wants_grad({&a, &b})) {
    StoragePtr pa = a.shared(), pb = b.shared();
    record(out, [pa, pb, m, k, n](const std::vector<double>& g) {
      auto gm = cmap(g, m, n);
      if (pa->requires_grad) {
        mmap(accumulate_into(*pa), m, k).noalias() += gm * cmap(pb->value, n, k);
      }
      if (pb->requires_grad) {
        mmap(accumulate_into(*pb), n, k).noalias() += gm.transpose() * cmap(pa->value, m, k);
      }
    });
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  require_matrix(a, "transpose");
  const std::size_t m = a.rows(), n = a.cols();
  Tensor out(Shape{n, m});
  mmap(out.storage().value, n, m) = cmap(a.data(), m, n).transpose();
  if (wants_grad({&a})) {
    StoragePtr pa = a.shared();
    record(out, [pa, m, n](const std::vector<double>& g) {
      mmap(accumulate_into(*pa), m, n) += cmap(g, n, m).transpose();
    });
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out(a.shape());
  auto& o = out.storage().value;
  const auto& x = a.data();
  const auto& y = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] + y[i];
  if (wants_grad({&a, &b})) {
    StoragePtr pa = a.shared(), pb = b.shared();
    record(out, [pa, pb](const std::vector<double>& g) {
      for (StoragePtr p : {pa, pb}) {
        if (!p->requires_grad) continue;
        auto& d = accumulate_into(*p);
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
      }
    });
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor out(a.shape());
  auto& o = out.storage().value;
  const auto& x = a.data();
  const auto& y = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] - y[i];
  if (wants_grad({&a, &b})) {
    StoragePtr pa = a.shared(), pb = b.shared();
    record(out, [pa, pb](const std::vector<double>& g) {
      if (pa->requires_grad) {
        auto& d = accumulate_into(*pa);
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
      }
      if (pb->requires_grad) {
        auto& d = accumulate_into(*pb);
        for (std::size_t i = 0; i < g.size(); ++i) d[i] -= g[i];
      }
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor out(a.shape());
  auto& o = out.storage().value;
  const auto& x = a.data();
  const auto& y = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * y[i];
  if (wants_grad({&a, &b})) {
    StoragePtr pa = a.shared(), pb = b.shared();
    record(out, [pa, pb](const std::vector<double>& g) {
      if (pa->requires_grad) {
        auto& d = accumulate_into(*pa);
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * pb->value[i];
      }
      if (pb->requires_grad) {
        auto& d = accumulate_into(*pb);
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * pa->value[i];
      }
    });
  }
  return out;
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor scale(const Tensor& a, double s) {
  Tensor out(a.shape());
  auto& o = out.storage().value;
  const auto& x = a.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * s;
  if (wants_grad({&a})) {
    StoragePtr pa = a.shared();
    record(out, [pa, s](const std::vector<double>& g) {
      auto& d = accumulate_into(*pa);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * s;
    });
  }
  return out;
}

Tensor add_scalar(const Tensor& a, double s) {
  Tensor out(a.shape());
  auto& o = out.storage().value;
  const auto& x = a.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] + s;
  if (wants_grad({&a})) {
    StoragePtr pa = a.shared();
    record(out, [pa](const std::vector<double>& g) {
      auto& d = accumulate_into(*pa);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
    });
  }
  return out;
}

Tensor add_row_vector(const Tensor& a, const Tensor& row) {
  require_matrix(a, "add_row_vector");
  const std::size_t m = a.rows(), n = a.cols();
  if (row.size() != n) {
    throw DimensionError("add_row_vector: matrix " + shape_string(a.shape()) +
                         " with row " + shape_string(row.shape()));
  }
  Tensor out(a.shape());
  auto& o = out.storage().value;
  const auto& x = a.data();
  const auto& r = row.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) o[i * n + j] = x[i * n + j] + r[j];
  }
  if (wants_grad({&a, &row})) {
    StoragePtr pa = a.shared(), pr = row.shared();
    record(out, [pa, pr, m, n](const std::vector<double>& g) {
      if (pa->requires_grad) {
        auto& d = accumulate_into(*pa);
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
      }
      if (pr->requires_grad) {
        auto& d = accumulate_into(*pr);
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < n; ++j) d[j] += g[i * n + j];
        }
      }
    });
  }
  return out;
}

Tensor relu(const Tensor& a) {
  Tensor out(a.shape());
  auto& o = out.storage().value;
  const auto& x = a.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] > 0.0 ? x[i] : 0.0;
  if (wants_grad({&a})) {
    StoragePtr pa = a.shared();
    record(out, [pa](const std::vector<double>& g) {
      auto& d = accumulate_into(*pa);
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (pa->value[i] > 0.0) d[i] += g[i];
      }
    });
  }
  return out;
}

Tensor logaddexp(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "logaddexp");
  Tensor out(a.shape());
  auto& o = out.storage().value;
  const auto& x = a.data();
  const auto& y = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) {
    const double mx = std::max(x[i], y[i]);
    if (mx == kNegInf) {
      o[i] = kNegInf;
    } else {
      o[i] = mx + std::log(std::exp(x[i] - mx) + std::exp(y[i] - mx));
    }
  }
  if (wants_grad({&a, &b})) {
    StoragePtr pa = a.shared(), pb = b.shared(), po = out.shared();
    record(out, [pa, pb, po](const std::vector<double>& g) {
      const auto& ov = po->value;
      for (const StoragePtr& p : {pa, pb}) {
        if (!p->requires_grad) continue;
        auto& d = accumulate_into(*p);
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (ov[i] == kNegInf) continue;
          d[i] += g[i] * std::exp(p->value[i] - ov[i]);
        }
      }
    });
  }
  return out;
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.data()) total += v;
  Tensor out = Tensor::scalar(total);
  if (wants_grad({&a})) {
    StoragePtr pa = a.shared();
    record(out, [pa](const std::vector<double>& g) {
      auto& d = accumulate_into(*pa);
      for (double& v : d) v += g[0];
    });
  }
  return out;
}

Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw DimensionError("mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor mean_rows(const Tensor& a) {
  require_matrix(a, "mean_rows");
  const std::size_t m = a.rows(), n = a.cols();
  if (m == 0) throw DimensionError("mean_rows of a matrix with no rows");
  Tensor out(Shape{n});
  auto& o = out.storage().value;
  const auto& x = a.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) o[j] += x[i * n + j];
  }
  const double inv = 1.0 / static_cast<double>(m);
  for (double& v : o) v *= inv;
  if (wants_grad({&a})) {
    StoragePtr pa = a.shared();
    record(out, [pa, m, n, inv](const std::vector<double>& g) {
      auto& d = accumulate_into(*pa);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) d[i * n + j] += g[j] * inv;
      }
    });
  }
  return out;
}

Tensor mse(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mse");
  if (a.size() == 0) throw DimensionError("mse of empty tensors");
  const std::size_t n = a.size();
  const auto& x = a.data();
  const auto& y = b.data();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = x[i] - y[i];
    total += d * d;
  }
  Tensor out = Tensor::scalar(total / static_cast<double>(n));
  if (wants_grad({&a, &b})) {
    StoragePtr pa = a.shared(), pb = b.shared();
    record(out, [pa, pb, n](const std::vector<double>& g) {
      const double c = 2.0 * g[0] / static_cast<double>(n);
      if (pa->requires_grad) {
        auto& d = accumulate_into(*pa);
        for (std::size_t i = 0; i < n; ++i) d[i] += c * (pa->value[i] - pb->value[i]);
      }
      if (pb->requires_grad) {
        auto& d = accumulate_into(*pb);
        for (std::size_t i = 0; i < n; ++i) d[i] -= c * (pa->value[i] - pb->value[i]);
      }
    });
  }
  return out;
}

Tensor softmax(const Tensor& a, int axis) {
  const AxisLayout l = layout_for(a, resolve_axis(a, axis));
  std::vector<double> prob, log_z;
  softmax_forward(a, l, prob, log_z);
  Tensor out(a.shape(), std::move(prob));
  if (wants_grad({&a})) {
    StoragePtr pa = a.shared(), po = out.shared();
    record(out, [pa, po, l](const std::vector<double>& g) {
      auto& d = accumulate_into(*pa);
      const auto& y = po->value;
      for (std::size_t o = 0; o < l.outer; ++o) {
        for (std::size_t in = 0; in < l.inner; ++in) {
          const std::size_t base = o * l.len * l.inner + in;
          double dot = 0.0;
          for (std::size_t i = 0; i < l.len; ++i) {
            const std::size_t k = base + i * l.inner;
            dot += g[k] * y[k];
          }
          for (std::size_t i = 0; i < l.len; ++i) {
            const std::size_t k = base + i * l.inner;
            d[k] += y[k] * (g[k] - dot);
          }
        }
      }
    });
  }
  return out;
}

Tensor log_softmax(const Tensor& a, int axis) {
  const AxisLayout l = layout_for(a, resolve_axis(a, axis));
  std::vector<double> prob, log_z;
  softmax_forward(a, l, prob, log_z);
  Tensor out(a.shape());
  auto& o = out.storage().value;
  const auto& x = a.data();
  for (std::size_t oo = 0; oo < l.outer; ++oo) {
    for (std::size_t in = 0; in < l.inner; ++in) {
      const std::size_t base = oo * l.len * l.inner + in;
      const double lz = log_z[oo * l.inner + in];
      for (std::size_t i = 0; i < l.len; ++i) {
        o[base + i * l.inner] = x[base + i * l.inner] - lz;
      }
    }
  }
  if (wants_grad({&a})) {
    StoragePtr pa = a.shared();
    record(out, [pa, l, prob = std::move(prob)](const std::vector<double>& g) {
      auto& d = accumulate_into(*pa);
      for (std::size_t oo = 0; oo < l.outer; ++oo) {
        for (std::size_t in = 0; in < l.inner; ++in) {
          const std::size_t base = oo * l.len * l.inner + in;
          double total = 0.0;
          for (std::size_t i = 0; i < l.len; ++i) total += g[base + i * l.inner];
          for (std::size_t i = 0; i < l.len; ++i) {
            const std::size_t k = base + i * l.inner;
            d[k] += g[k] - prob[k] * total;
          }
        }
      }
    });
  }
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const std::size_t n = x.cols();
  const std::size_t m = x.size() / std::max<std::size_t>(n, 1);
  if (gain.size() != n || bias.size() != n) {
    throw DimensionError("layer_norm: input " + shape_string(x.shape()) + " with gain " +
                         shape_string(gain.shape()) + " and bias " +
                         shape_string(bias.shape()));
  }
  std::vector<double> xhat(x.size());
  std::vector<double> inv_std(m);
  Tensor out(x.shape());
  auto& o = out.storage().value;
  const auto& xv = x.data();
  const auto& gv = gain.data();
  const auto& bv = bias.data();
  for (std::size_t i = 0; i < m; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += xv[i * n + j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double c = xv[i * n + j] - mu;
      var += c * c;
    }
    var /= static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t k = i * n + j;
      xhat[k] = (xv[k] - mu) * inv_std[i];
      o[k] = xhat[k] * gv[j] + bv[j];
    }
  }
  if (wants_grad({&x, &gain, &bias})) {
    StoragePtr px = x.shared(), pg = gain.shared(), pb = bias.shared();
    record(out, [px, pg, pb, m, n, xhat = std::move(xhat),
                 inv_std = std::move(inv_std)](const std::vector<double>& g) {
      if (pg->requires_grad) {
        auto& d = accumulate_into(*pg);
        for (std::size_t k = 0; k < g.size(); ++k) d[k % n] += g[k] * xhat[k];
      }
      if (pb->requires_grad) {
        auto& d = accumulate_into(*pb);
        for (std::size_t k = 0; k < g.size(); ++k) d[k % n] += g[k];
      }
      if (px->requires_grad) {
        auto& d = accumulate_into(*px);
        const auto& gv = pg->value;
        const double inv_n = 1.0 / static_cast<double>(n);
        for (std::size_t i = 0; i < m; ++i) {
          double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            const std::size_t k = i * n + j;
            const double dxh = g[k] * gv[j];
            mean_dxhat += dxh;
            mean_dxhat_xhat += dxh * xhat[k];
          }
          mean_dxhat *= inv_n;
          mean_dxhat_xhat *= inv_n;
          for (std::size_t j = 0; j < n; ++j) {
            const std::size_t k = i * n + j;
            const double dxh = g[k] * gv[j];
            d[k] += inv_std[i] * (dxh - mean_dxhat - xhat[k] * mean_dxhat_xhat);
          }
        }
      }
    });
  }
  return out;
}

Tensor embedding(const Tensor& table, std::span<const int> ids) {
  require_matrix(table, "embedding");
  const std::size_t v = table.rows(), d = table.cols();
  std::vector<int> idx(ids.begin(), ids.end());
  Tensor out(Shape{idx.size(), d});
  auto& o = out.storage().value;
  const auto& t = table.data();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || static_cast<std::size_t>(idx[i]) >= v) {
      throw DimensionError("embedding id " + std::to_string(idx[i]) + " outside table of " +
                           std::to_string(v) + " rows");
    }
    std::copy_n(t.begin() + static_cast<std::ptrdiff_t>(idx[i] * d), d,
                o.begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  if (wants_grad({&table})) {
    StoragePtr pt = table.shared();
    record(out, [pt, d, idx = std::move(idx)](const std::vector<double>& g) {
      auto& dt = accumulate_into(*pt);
      for (std::size_t i = 0; i < idx.size(); ++i) {
        const std::size_t row = static_cast<std::size_t>(idx[i]);
        for (std::size_t j = 0; j < d; ++j) dt[row * d + j] += g[i * d + j];
      }
    });
  }
  return out;
}

Tensor gather(const Tensor& a, std::span<const int> index) {
  std::vector<int> idx(index.begin(), index.end());
  Tensor out(Shape{idx.size()});
  auto& o = out.storage().value;
  const auto& x = a.data();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || static_cast<std::size_t>(idx[i]) >= x.size()) {
      throw DimensionError("gather index " + std::to_string(idx[i]) + " outside " +
                           shape_string(a.shape()));
    }
    o[i] = x[static_cast<std::size_t>(idx[i])];
  }
  if (wants_grad({&a})) {
    StoragePtr pa = a.shared();
    record(out, [pa, idx = std::move(idx)](const std::vector<double>& g) {
      auto& d = accumulate_into(*pa);
      for (std::size_t i = 0; i < idx.size(); ++i) d[static_cast<std::size_t>(idx[i])] += g[i];
    });
  }
  return out;
}

Tensor pick(const Tensor& a, std::span<const int> index) {
  require_matrix(a, "pick");
  const std::size_t m = a.rows(), n = a.cols();
  if (index.size() != m) {
    throw DimensionError("pick: " + std::to_string(index.size()) + " indices for " +
                         shape_string(a.shape()));
  }
  std::vector<std::size_t> flat(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (index[i] < 0 || static_cast<std::size_t>(index[i]) >= n) {
      throw DimensionError("pick index " + std::to_string(index[i]) + " outside " +
                           shape_string(a.shape()));
    }
    flat[i] = i * n + static_cast<std::size_t>(index[i]);
  }
  Tensor out(Shape{m});
  auto& o = out.storage().value;
  for (std::size_t i = 0; i < m; ++i) o[i] = a.data()[flat[i]];
  if (wants_grad({&a})) {
    StoragePtr pa = a.shared();
    record(out, [pa, flat = std::move(flat)](const std::vector<double>& g) {
      auto& d = accumulate_into(*pa);
      for (std::size_t i = 0; i < flat.size(); ++i) d[flat[i]] += g[i];
    });
  }
  return out;
}

Tensor select_row(const Tensor& a, std::size_t row) {
  require_matrix(a, "select_row");
  if (row >= a.rows()) {
    throw DimensionError("row " + std::to_string(row) + " outside " + shape_string(a.shape()));
  }
  return reshape(slice_rows(a, row, 1), Shape{a.cols()});
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t count) {
  require_matrix(a, "slice_rows");
  const std::size_t n = a.cols();
  if (begin + count > a.rows()) {
    throw DimensionError("slice_rows [" + std::to_string(begin) + ", +" +
                         std::to_string(count) + ") outside " + shape_string(a.shape()));
  }
  std::vector<double> v(a.data().begin() + static_cast<std::ptrdiff_t>(begin * n),
                        a.data().begin() + static_cast<std::ptrdiff_t>((begin + count) * n));
  Tensor out(Shape{count, n}, std::move(v));
  if (wants_grad({&a})) {
    StoragePtr pa = a.shared();
    record(out, [pa, begin, n](const std::vector<double>& g) {
      auto& d = accumulate_into(*pa);
      for (std::size_t i = 0; i < g.size(); ++i) d[begin * n + i] += g[i];
    });
  }
  return out;
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t count) {
  require_matrix(a, "slice_cols");
  const std::size_t m = a.rows(), n = a.cols();
  if (begin + count > n) {
    throw DimensionError("slice_cols [" + std::to_string(begin) + ", +" +
                         std::to_string(count) + ") outside " + shape_string(a.shape()));
  }
  Tensor out(Shape{m, count});
  auto& o = out.storage().value;
  const auto& x = a.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < count; ++j) o[i * count + j] = x[i * n + begin + j];
  }
  if (wants_grad({&a})) {
    StoragePtr pa = a.shared();
    record(out, [pa, m, n, begin, count](const std::vector<double>& g) {
      auto& d = accumulate_into(*pa);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < count; ++j) d[i * n + begin + j] += g[i * count + j];
      }
    });
  }
  return out;
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_rows of nothing");
  const std::size_t n = parts[0].cols();
  std::size_t m = 0;
  for (const auto& p : parts) {
    require_matrix(p, "concat_rows");
    if (p.cols() != n) {
      throw DimensionError("concat_rows width mismatch: " + shape_string(parts[0].shape()) +
                           " vs " + shape_string(p.shape()));
    }
    m += p.rows();
  }
  Tensor out(Shape{m, n});
  auto& o = out.storage().value;
  std::size_t offset = 0;
  std::vector<StoragePtr> sources;
  bool grad = false;
  for (const auto& p : parts) {
    std::copy(p.data().begin(), p.data().end(), o.begin() + static_cast<std::ptrdiff_t>(offset));
    offset += p.size();
    sources.push_back(p.shared());
    grad = grad || p.requires_grad();
  }
  if (grad && active_tape() != nullptr) {
    record(out, [sources = std::move(sources)](const std::vector<double>& g) {
      std::size_t off = 0;
      for (const auto& s : sources) {
        if (s->requires_grad) {
          auto& d = accumulate_into(*s);
          for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[off + i];
        }
        off += s->value.size();
      }
    });
  }
  return out;
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_cols of nothing");
  const std::size_t m = parts[0].rows();
  std::size_t n = 0;
  for (const auto& p : parts) {
    require_matrix(p, "concat_cols");
    if (p.rows() != m) {
      throw DimensionError("concat_cols height mismatch: " + shape_string(parts[0].shape()) +
                           " vs " + shape_string(p.shape()));
    }
    n += p.cols();
  }
  Tensor out(Shape{m, n});
  auto& o = out.storage().value;
  std::vector<StoragePtr> sources;
  std::vector<std::size_t> widths;
  bool grad = false;
  std::size_t col = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.cols();
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < w; ++j) o[i * n + col + j] = p.data()[i * w + j];
    }
    col += w;
    sources.push_back(p.shared());
    widths.push_back(w);
    grad = grad || p.requires_grad();
  }
  if (grad && active_tape() != nullptr) {
    record(out, [sources = std::move(sources), widths = std::move(widths), m,
                 n](const std::vector<double>& g) {
      std::size_t c = 0;
      for (std::size_t s = 0; s < sources.size(); ++s) {
        const std::size_t w = widths[s];
        if (sources[s]->requires_grad) {
          auto& d = accumulate_into(*sources[s]);
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < w; ++j) d[i * w + j] += g[i * n + c + j];
          }
        }
        c += w;
      }
    });
  }
  return out;
}

Tensor shift(const Tensor& a, std::size_t k, double fill) {
  const std::size_t n = a.size();
  Tensor out(Shape{n}, fill);
  auto& o = out.storage().value;
  for (std::size_t i = k; i < n; ++i) o[i] = a.data()[i - k];
  if (wants_grad({&a})) {
    StoragePtr pa = a.shared();
    record(out, [pa, k, n](const std::vector<double>& g) {
      auto& d = accumulate_into(*pa);
      for (std::size_t i = k; i < n; ++i) d[i - k] += g[i];
    });
  }
  return out;
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_size(shape) != a.size()) {
    throw DimensionError("reshape " + shape_string(a.shape()) + " to " + shape_string(shape));
  }
  Tensor out(std::move(shape), a.data());
  if (wants_grad({&a})) {
    StoragePtr pa = a.shared();
    record(out, [pa](const std::vector<double>& g) {
      auto& d = accumulate_into(*pa);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
    });
  }
  return out;
}

Tensor dropout(const Tensor& a, double rate, std::mt19937_64& rng) {
  if (rate <= 0.0) return a;
  if (rate >= 1.0) throw ConfigError("dropout rate must be < 1");
  std::bernoulli_distribution keep(1.0 - rate);
  const double inv = 1.0 / (1.0 - rate);
  std::vector<double> mask(a.size());
  for (double& m : mask) m = keep(rng) ? inv : 0.0;
  return mul(a, Tensor(a.shape(), std::move(mask)));
}

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias,
              const ConvGeometry& geo) {
  require_matrix(x, "conv2d");
  if (weight.ndim() != 3) {
    throw DimensionError("conv2d weight must be [channels x kt x kf], got " +
                         shape_string(weight.shape()));
  }
  const std::size_t channels = weight.shape()[0], kt = weight.shape()[1],
                    kf = weight.shape()[2];
  if (bias.size() != channels) {
    throw DimensionError("conv2d bias " + shape_string(bias.shape()) + " for " +
                         std::to_string(channels) + " channels");
  }
  const std::size_t T = x.rows(), D = x.cols();
  if (T + 2 * geo.pad_time < kt || D + 2 * geo.pad_feature < kf || geo.stride_time == 0 ||
      geo.stride_feature == 0) {
    throw DimensionError("conv2d kernel does not fit input " + shape_string(x.shape()));
  }
  const std::size_t t_out = (T + 2 * geo.pad_time - kt) / geo.stride_time + 1;
  const std::size_t f_out = (D + 2 * geo.pad_feature - kf) / geo.stride_feature + 1;
  const std::size_t width = channels * f_out;
  Tensor out(Shape{t_out, width});
  auto& o = out.storage().value;
  const auto& xv = x.data();
  const auto& wv = weight.data();
  // Visits every (output cell, kernel tap, input cell) triple inside bounds.
  auto for_each_tap = [=](auto&& fn) {
    for (std::size_t c = 0; c < channels; ++c) {
      for (std::size_t t = 0; t < t_out; ++t) {
        for (std::size_t f = 0; f < f_out; ++f) {
          const std::size_t oi = t * width + c * f_out + f;
          for (std::size_t i = 0; i < kt; ++i) {
            const std::ptrdiff_t ti = static_cast<std::ptrdiff_t>(t * geo.stride_time + i) -
                                      static_cast<std::ptrdiff_t>(geo.pad_time);
            if (ti < 0 || ti >= static_cast<std::ptrdiff_t>(T)) continue;
            for (std::size_t j = 0; j < kf; ++j) {
              const std::ptrdiff_t fj =
                  static_cast<std::ptrdiff_t>(f * geo.stride_feature + j) -
                  static_cast<std::ptrdiff_t>(geo.pad_feature);
              if (fj < 0 || fj >= static_cast<std::ptrdiff_t>(D)) continue;
              fn(oi, (c * kt + i) * kf + j,
                 static_cast<std::size_t>(ti) * D + static_cast<std::size_t>(fj));
            }
          }
        }
      }
    }
  };
  for (std::size_t t = 0; t < t_out; ++t) {
    for (std::size_t c = 0; c < channels; ++c) {
      for (std::size_t f = 0; f < f_out; ++f) o[t * width + c * f_out + f] = bias.data()[c];
    }
  }
  for_each_tap([&](std::size_t oi, std::size_t wi, std::size_t xi) { o[oi] += wv[wi] * xv[xi]; });
  if (wants_grad({&x, &weight, &bias})) {
    StoragePtr px = x.shared(), pw = weight.shared(), pb = bias.shared();
    record(out, [px, pw, pb, for_each_tap, t_out, f_out, channels,
                 width](const std::vector<double>& g) {
      if (pb->requires_grad) {
        auto& d = accumulate_into(*pb);
        for (std::size_t t = 0; t < t_out; ++t) {
          for (std::size_t c = 0; c < channels; ++c) {
            for (std::size_t f = 0; f < f_out; ++f) d[c] += g[t * width + c * f_out + f];
          }
        }
      }
      if (pw->requires_grad) {
        auto& d = accumulate_into(*pw);
        const auto& xv2 = px->value;
        for_each_tap([&](std::size_t oi, std::size_t wi, std::size_t xi) {
          d[wi] += g[oi] * xv2[xi];
        });
      }
      if (px->requires_grad) {
        auto& d = accumulate_into(*px);
        const auto& wv2 = pw->value;
        for_each_tap([&](std::size_t oi, std::size_t wi, std::size_t xi) {
          d[xi] += g[oi] * wv2[wi];
        });
      }
    });
  }
  return out;
}

}  // namespace lut::ops
