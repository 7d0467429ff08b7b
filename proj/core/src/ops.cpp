#include "tabkit/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tabkit::ad {

namespace {

thread_local KinkProbe* g_kink_probe = nullptr;

void observe_margin(double margin) {
  if (g_kink_probe != nullptr && margin < g_kink_probe->min_margin) {
    g_kink_probe->min_margin = margin;
  }
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeMismatch(std::string(op) + ": operand shapes differ");
  }
}

std::vector<double>& pflow(detail::Node& self, std::size_t i) {
  return self.parents[i]->flow;
}

const std::vector<double>& pdata(detail::Node& self, std::size_t i) {
  return self.parents[i]->data;
}

Tensor elementwise_binary(const Tensor& a, const Tensor& b, const char* name,
                          double (*fwd)(double, double),
                          void (*bwd)(double fa, double xa, double xb,
                                      double& da, double& db)) {
  check_same_shape(a, b, name);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = fwd(a.data()[i], b.data()[i]);
  }
  return make_op(a.shape(), std::move(out), {a, b},
                 [bwd](detail::Node& self) {
                   auto& da = pflow(self, 0);
                   auto& db = pflow(self, 1);
                   const auto& xa = pdata(self, 0);
                   const auto& xb = pdata(self, 1);
                   for (std::size_t i = 0; i < self.size(); ++i) {
                     bwd(self.flow[i], xa[i], xb[i], da[i], db[i]);
                   }
                 });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return elementwise_binary(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double f, double, double, double& da, double& db) {
        da += f;
        db += f;
      });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return elementwise_binary(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double f, double, double, double& da, double& db) {
        da += f;
        db -= f;
      });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return elementwise_binary(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double f, double xa, double xb, double& da, double& db) {
        da += f * xb;
        db += f * xa;
      });
}

Tensor neg(const Tensor& x) { return scale(x, -1.0); }

Tensor scale(const Tensor& x, double c) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * x.data()[i];
  return make_op(x.shape(), std::move(out), {x}, [c](detail::Node& self) {
    auto& dx = pflow(self, 0);
    for (std::size_t i = 0; i < self.size(); ++i) dx[i] += c * self.flow[i];
  });
}

Tensor add_scalar(const Tensor& x, double c) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] + c;
  return make_op(x.shape(), std::move(out), {x}, [](detail::Node& self) {
    auto& dx = pflow(self, 0);
    for (std::size_t i = 0; i < self.size(); ++i) dx[i] += self.flow[i];
  });
}

Tensor rsub_scalar(double c, const Tensor& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c - x.data()[i];
  return make_op(x.shape(), std::move(out), {x}, [](detail::Node& self) {
    auto& dx = pflow(self, 0);
    for (std::size_t i = 0; i < self.size(); ++i) dx[i] -= self.flow[i];
  });
}

Tensor exp_elem(const Tensor& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(x.data()[i]);
  return make_op(x.shape(), std::move(out), {x}, [](detail::Node& self) {
    auto& dx = pflow(self, 0);
    for (std::size_t i = 0; i < self.size(); ++i) {
      dx[i] += self.flow[i] * self.data[i];
    }
  });
}

Tensor log_elem(const Tensor& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(x.data()[i]);
  return make_op(x.shape(), std::move(out), {x}, [](detail::Node& self) {
    auto& dx = pflow(self, 0);
    const auto& xv = pdata(self, 0);
    for (std::size_t i = 0; i < self.size(); ++i) {
      dx[i] += self.flow[i] / xv[i];
    }
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.rows(), n = a.cols(), p = b.cols();
  if (b.rows() != n) {
    throw ShapeMismatch("matmul: inner dimensions " + std::to_string(n) +
                        " vs " + std::to_string(b.rows()));
  }
  std::vector<double> out(m * p, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      const double aik = a.data()[i * n + k];
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < p; ++j) {
        out[i * p + j] += aik * b.data()[k * p + j];
      }
    }
  }
  return make_op({m, p}, std::move(out), {a, b},
                 [m, n, p](detail::Node& self) {
                   auto& da = pflow(self, 0);
                   auto& db = pflow(self, 1);
                   const auto& av = pdata(self, 0);
                   const auto& bv = pdata(self, 1);
                   // dA = f·Bᵀ, dB = Aᵀ·f
                   for (std::size_t i = 0; i < m; ++i) {
                     for (std::size_t j = 0; j < p; ++j) {
                       const double f = self.flow[i * p + j];
                       if (f == 0.0) continue;
                       for (std::size_t k = 0; k < n; ++k) {
                         da[i * n + k] += f * bv[k * p + j];
                         db[k * p + j] += f * av[i * n + k];
                       }
                     }
                   }
                 });
}

Tensor transpose(const Tensor& x) {
  const std::size_t m = x.rows(), n = x.cols();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = x.data()[i * n + j];
  }
  return make_op({n, m}, std::move(out), {x}, [m, n](detail::Node& self) {
    auto& dx = pflow(self, 0);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        dx[i * n + j] += self.flow[j * m + i];
      }
    }
  });
}

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) {
  const std::size_t m = x.rows(), n = x.cols(), p = w.cols();
  if (w.rows() != n) {
    throw ShapeMismatch("affine: x cols " + std::to_string(n) + " vs w rows " +
                        std::to_string(w.rows()));
  }
  if (b.rank() != 1 || b.size() != p) {
    throw ShapeMismatch("affine: bias must have length " + std::to_string(p));
  }
  std::vector<double> out(m * p);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < p; ++j) out[i * p + j] = b.data()[j];
    for (std::size_t k = 0; k < n; ++k) {
      const double xik = x.data()[i * n + k];
      if (xik == 0.0) continue;
      for (std::size_t j = 0; j < p; ++j) {
        out[i * p + j] += xik * w.data()[k * p + j];
      }
    }
  }
  return make_op({m, p}, std::move(out), {x, w, b},
                 [m, n, p](detail::Node& self) {
                   auto& dx = pflow(self, 0);
                   auto& dw = pflow(self, 1);
                   auto& db = pflow(self, 2);
                   const auto& xv = pdata(self, 0);
                   const auto& wv = pdata(self, 1);
                   for (std::size_t i = 0; i < m; ++i) {
                     for (std::size_t j = 0; j < p; ++j) {
                       const double f = self.flow[i * p + j];
                       if (f == 0.0) continue;
                       db[j] += f;
                       for (std::size_t k = 0; k < n; ++k) {
                         dx[i * n + k] += f * wv[k * p + j];
                         dw[k * p + j] += f * xv[i * n + k];
                       }
                     }
                   }
                 });
}

Tensor grouped_matmul(const Tensor& x, const Tensor& w, std::size_t groups) {
  const std::size_t m = x.rows();
  if (groups == 0 || x.cols() % groups != 0 || w.rows() % groups != 0 ||
      x.cols() / groups != w.rows() / groups) {
    throw ShapeMismatch("grouped_matmul: blocks do not tile operands");
  }
  const std::size_t k = x.cols() / groups;
  const std::size_t p = w.cols();
  std::vector<double> out(m * groups * p, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t t = 0; t < groups; ++t) {
      for (std::size_t kk = 0; kk < k; ++kk) {
        const double xv = x.data()[i * groups * k + t * k + kk];
        if (xv == 0.0) continue;
        for (std::size_t j = 0; j < p; ++j) {
          out[i * groups * p + t * p + j] += xv * w.data()[(t * k + kk) * p + j];
        }
      }
    }
  }
  return make_op(
      {m, groups * p}, std::move(out), {x, w},
      [m, k, p, groups](detail::Node& self) {
        auto& dx = pflow(self, 0);
        auto& dw = pflow(self, 1);
        const auto& xv = pdata(self, 0);
        const auto& wv = pdata(self, 1);
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t t = 0; t < groups; ++t) {
            for (std::size_t j = 0; j < p; ++j) {
              const double f = self.flow[i * groups * p + t * p + j];
              if (f == 0.0) continue;
              for (std::size_t kk = 0; kk < k; ++kk) {
                dx[i * groups * k + t * k + kk] += f * wv[(t * k + kk) * p + j];
                dw[(t * k + kk) * p + j] += f * xv[i * groups * k + t * k + kk];
              }
            }
          }
        }
      });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeMismatch("concat_cols: no operands");
  const std::size_t m = parts.front().rows();
  std::size_t total = 0;
  std::vector<std::size_t> widths;
  for (const Tensor& t : parts) {
    if (t.rows() != m) throw ShapeMismatch("concat_cols: row counts differ");
    widths.push_back(t.cols());
    total += t.cols();
  }
  std::vector<double> out(m * total);
  std::size_t offset = 0;
  for (std::size_t pi = 0; pi < parts.size(); ++pi) {
    const std::size_t w = widths[pi];
    for (std::size_t i = 0; i < m; ++i) {
      std::copy_n(parts[pi].data().begin() + i * w, w,
                  out.begin() + i * total + offset);
    }
    offset += w;
  }
  return make_op({m, total}, std::move(out), parts,
                 [m, total, widths](detail::Node& self) {
                   std::size_t offset = 0;
                   for (std::size_t pi = 0; pi < widths.size(); ++pi) {
                     auto& dp = pflow(self, pi);
                     const std::size_t w = widths[pi];
                     for (std::size_t i = 0; i < m; ++i) {
                       for (std::size_t j = 0; j < w; ++j) {
                         dp[i * w + j] += self.flow[i * total + offset + j];
                       }
                     }
                     offset += w;
                   }
                 });
}

Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t count) {
  const std::size_t m = x.rows(), n = x.cols();
  if (start + count > n) throw ShapeMismatch("slice_cols: window out of range");
  std::vector<double> out(m * count);
  for (std::size_t i = 0; i < m; ++i) {
    std::copy_n(x.data().begin() + i * n + start, count,
                out.begin() + i * count);
  }
  return make_op({m, count}, std::move(out), {x},
                 [m, n, start, count](detail::Node& self) {
                   auto& dx = pflow(self, 0);
                   for (std::size_t i = 0; i < m; ++i) {
                     for (std::size_t j = 0; j < count; ++j) {
                       dx[i * n + start + j] += self.flow[i * count + j];
                     }
                   }
                 });
}

Tensor sum_all(const Tensor& x) {
  double s = std::accumulate(x.data().begin(), x.data().end(), 0.0);
  return make_op({1}, {s}, {x}, [](detail::Node& self) {
    auto& dx = pflow(self, 0);
    for (double& d : dx) d += self.flow[0];
  });
}

Tensor mean_all(const Tensor& x) {
  const double inv = 1.0 / static_cast<double>(x.size());
  double s = std::accumulate(x.data().begin(), x.data().end(), 0.0) * inv;
  return make_op({1}, {s}, {x}, [inv](detail::Node& self) {
    auto& dx = pflow(self, 0);
    for (double& d : dx) d += self.flow[0] * inv;
  });
}

Tensor rowwise_sum(const Tensor& x) {
  const std::size_t m = x.rows(), n = x.cols();
  std::vector<double> out(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i] += x.data()[i * n + j];
  }
  return make_op({m, 1}, std::move(out), {x}, [m, n](detail::Node& self) {
    auto& dx = pflow(self, 0);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) dx[i * n + j] += self.flow[i];
    }
  });
}

namespace {

Tensor rowvec_op(const Tensor& x, const Tensor& v, const char* name, int kind) {
  const std::size_t m = x.rows(), n = x.cols();
  if (v.rank() != 1 || v.size() != n) {
    throw ShapeMismatch(std::string(name) + ": vector must have length " +
                        std::to_string(n));
  }
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double a = x.data()[i * n + j], b = v.data()[j];
      out[i * n + j] = kind == 0 ? a + b : kind == 1 ? a - b : a * b;
    }
  }
  return make_op({m, n}, std::move(out), {x, v},
                 [m, n, kind](detail::Node& self) {
                   auto& dx = pflow(self, 0);
                   auto& dv = pflow(self, 1);
                   const auto& xv = pdata(self, 0);
                   const auto& vv = pdata(self, 1);
                   for (std::size_t i = 0; i < m; ++i) {
                     for (std::size_t j = 0; j < n; ++j) {
                       const double f = self.flow[i * n + j];
                       if (kind == 2) {
                         dx[i * n + j] += f * vv[j];
                         dv[j] += f * xv[i * n + j];
                       } else {
                         dx[i * n + j] += f;
                         dv[j] += kind == 0 ? f : -f;
                       }
                     }
                   }
                 });
}

}  // namespace

Tensor add_rowvec(const Tensor& x, const Tensor& v) {
  return rowvec_op(x, v, "add_rowvec", 0);
}
Tensor sub_rowvec(const Tensor& x, const Tensor& v) {
  return rowvec_op(x, v, "sub_rowvec", 1);
}
Tensor mul_rowvec(const Tensor& x, const Tensor& v) {
  return rowvec_op(x, v, "mul_rowvec", 2);
}

Tensor mul_colvec(const Tensor& x, const Tensor& c) {
  const std::size_t m = x.rows(), n = x.cols();
  const bool ok = (c.rank() == 1 && c.size() == m) ||
                  (c.rank() == 2 && c.rows() == m && c.cols() == 1);
  if (!ok) throw ShapeMismatch("mul_colvec: per-row scalar must have length m");
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      out[i * n + j] = x.data()[i * n + j] * c.data()[i];
    }
  }
  return make_op({m, n}, std::move(out), {x, c}, [m, n](detail::Node& self) {
    auto& dx = pflow(self, 0);
    auto& dc = pflow(self, 1);
    const auto& xv = pdata(self, 0);
    const auto& cv = pdata(self, 1);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const double f = self.flow[i * n + j];
        dx[i * n + j] += f * cv[i];
        dc[i] += f * xv[i * n + j];
      }
    }
  });
}

void set_kink_probe(KinkProbe* probe) { g_kink_probe = probe; }

Tensor relu(const Tensor& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    observe_margin(std::abs(x.data()[i]));
    out[i] = x.data()[i] > 0.0 ? x.data()[i] : 0.0;
  }
  return make_op(x.shape(), std::move(out), {x}, [](detail::Node& self) {
    auto& dx = pflow(self, 0);
    const auto& xv = pdata(self, 0);
    for (std::size_t i = 0; i < self.size(); ++i) {
      if (xv[i] > 0.0) dx[i] += self.flow[i];
    }
  });
}

Tensor sigmoid(const Tensor& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = 1.0 / (1.0 + std::exp(-x.data()[i]));
  }
  return make_op(x.shape(), std::move(out), {x}, [](detail::Node& self) {
    auto& dx = pflow(self, 0);
    for (std::size_t i = 0; i < self.size(); ++i) {
      const double s = self.data[i];
      dx[i] += self.flow[i] * s * (1.0 - s);
    }
  });
}

Tensor glu(const Tensor& x) {
  const std::size_t m = x.rows(), n = x.cols();
  if (n % 2 != 0) throw ShapeMismatch("glu: final dimension must be even");
  const std::size_t k = n / 2;
  std::vector<double> out(m * k);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const double a = x.data()[i * n + j];
      const double g = x.data()[i * n + k + j];
      out[i * k + j] = a / (1.0 + std::exp(-g));
    }
  }
  return make_op({m, k}, std::move(out), {x}, [m, n, k](detail::Node& self) {
    auto& dx = pflow(self, 0);
    const auto& xv = pdata(self, 0);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        const double f = self.flow[i * k + j];
        const double a = xv[i * n + j];
        const double s = 1.0 / (1.0 + std::exp(-xv[i * n + k + j]));
        dx[i * n + j] += f * s;
        dx[i * n + k + j] += f * a * s * (1.0 - s);
      }
    }
  });
}

Tensor softmax_rows(const Tensor& z) {
  const std::size_t m = z.rows(), n = z.cols();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = z.data().data() + i * n;
    const double zmax = *std::max_element(row, row + n);
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      out[i * n + j] = std::exp(row[j] - zmax);
      sum += out[i * n + j];
    }
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= sum;
  }
  return make_op({m, n}, std::move(out), {z}, [m, n](detail::Node& self) {
    auto& dz = pflow(self, 0);
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        dot += self.flow[i * n + j] * self.data[i * n + j];
      }
      for (std::size_t j = 0; j < n; ++j) {
        dz[i * n + j] += self.data[i * n + j] * (self.flow[i * n + j] - dot);
      }
    }
  });
}

Tensor sparsemax_rows(const Tensor& z) {
  const std::size_t m = z.rows(), n = z.cols();
  std::vector<double> out(m * n);
  std::vector<double> sorted(n);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = z.data().data() + i * n;
    std::copy_n(row, n, sorted.begin());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    // The support condition holds exactly for k = 1..k*, so the last
    // satisfying k fixes τ.
    double cumsum = 0.0, tau = 0.0;
    for (std::size_t k = 1; k <= n; ++k) {
      cumsum += sorted[k - 1];
      if (1.0 + static_cast<double>(k) * sorted[k - 1] > cumsum) {
        tau = (cumsum - 1.0) / static_cast<double>(k);
      }
    }
    for (std::size_t j = 0; j < n; ++j) {
      observe_margin(std::abs(row[j] - tau));
      out[i * n + j] = std::max(row[j] - tau, 0.0);
    }
  }
  return make_op({m, n}, std::move(out), {z}, [m, n](detail::Node& self) {
    auto& dz = pflow(self, 0);
    for (std::size_t i = 0; i < m; ++i) {
      double fsum = 0.0;
      std::size_t count = 0;
      for (std::size_t j = 0; j < n; ++j) {
        if (self.data[i * n + j] > 0.0) {
          fsum += self.flow[i * n + j];
          ++count;
        }
      }
      if (count == 0) continue;
      const double mean = fsum / static_cast<double>(count);
      for (std::size_t j = 0; j < n; ++j) {
        if (self.data[i * n + j] > 0.0) {
          dz[i * n + j] += self.flow[i * n + j] - mean;
        }
      }
    }
  });
}

namespace {

// Σ_i max(0, (z_i − τ)/2)² for one row of shifted scores.
double entmax15_mass(const double* z, std::size_t n, double tau) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = (z[i] - tau) * 0.5;
    if (v > 0.0) s += v * v;
  }
  return s;
}

}  // namespace

Tensor entmax15_rows(const Tensor& z) {
  const std::size_t m = z.rows(), n = z.cols();
  std::vector<double> out(m * n);
  std::vector<double> shifted(n);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = z.data().data() + i * n;
    const double zmax = *std::max_element(row, row + n);
    for (std::size_t j = 0; j < n; ++j) shifted[j] = row[j] - zmax;
    // Mass is 1 at τ = −2 if only the max survives, 0 at τ = 0; bisect.
    double lo = -2.0, hi = 0.0;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (entmax15_mass(shifted.data(), n, mid) >= 1.0) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    const double tau = 0.5 * (lo + hi);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      observe_margin(std::abs(shifted[j] - tau));
      const double v = (shifted[j] - tau) * 0.5;
      out[i * n + j] = v > 0.0 ? v * v : 0.0;
      total += out[i * n + j];
    }
    if (std::abs(total - 1.0) > 1e-9) throw BisectionNonConvergence();
  }
  return make_op({m, n}, std::move(out), {z}, [m, n](detail::Node& self) {
    auto& dz = pflow(self, 0);
    for (std::size_t i = 0; i < m; ++i) {
      double qsum = 0.0, qf = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double q = std::sqrt(self.data[i * n + j]);
        qsum += q;
        qf += q * self.flow[i * n + j];
      }
      if (qsum == 0.0) continue;
      const double ratio = qf / qsum;
      for (std::size_t j = 0; j < n; ++j) {
        const double q = std::sqrt(self.data[i * n + j]);
        if (q > 0.0) dz[i * n + j] += q * (self.flow[i * n + j] - ratio);
      }
    }
  });
}

Tensor entmoid15(const Tensor& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double u = x.data()[i];
    observe_margin(std::abs(2.0 - std::abs(u)));
    if (u >= 2.0) {
      out[i] = 1.0;
    } else if (u <= -2.0) {
      out[i] = 0.0;
    } else {
      // Two-class entmax15 closed form: τ solves ((u−τ)/2)² + (τ/2)² = 1.
      const double tau = 0.5 * (u - std::sqrt(8.0 - u * u));
      const double v = 0.5 * (u - tau);
      out[i] = v * v;
    }
  }
  return make_op(x.shape(), std::move(out), {x}, [](detail::Node& self) {
    auto& dx = pflow(self, 0);
    for (std::size_t i = 0; i < self.size(); ++i) {
      const double p = self.data[i];
      if (p <= 0.0 || p >= 1.0) continue;
      const double q1 = std::sqrt(p), q2 = std::sqrt(1.0 - p);
      dx[i] += self.flow[i] * q1 * q2 / (q1 + q2);
    }
  });
}

Tensor embedding_lookup(const Tensor& table,
                        std::span<const std::size_t> indices) {
  const std::size_t v = table.rows(), d = table.cols();
  const std::size_t m = indices.size();
  std::vector<double> out(m * d);
  for (std::size_t i = 0; i < m; ++i) {
    if (indices[i] >= v) throw IndexOutOfRange(i, indices[i], v);
    std::copy_n(table.data().begin() + indices[i] * d, d, out.begin() + i * d);
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return make_op({m, d}, std::move(out), {table},
                 [d, idx = std::move(idx)](detail::Node& self) {
                   auto& dt = pflow(self, 0);
                   for (std::size_t i = 0; i < idx.size(); ++i) {
                     for (std::size_t j = 0; j < d; ++j) {
                       dt[idx[i] * d + j] += self.flow[i * d + j];
                     }
                   }
                 });
}

Tensor dropout(const Tensor& x, double p, bool training, Rng& rng) {
  if (p < 0.0 || p >= 1.0) {
    throw InvalidValue("dropout.p", "must lie in [0, 1)");
  }
  if (!training || p == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - p);
  std::vector<double> mask(x.size());
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    mask[i] = rng.uniform() < p ? 0.0 : keep_scale;
    out[i] = x.data()[i] * mask[i];
  }
  return make_op(x.shape(), std::move(out), {x},
                 [mask = std::move(mask)](detail::Node& self) {
                   auto& dx = pflow(self, 0);
                   for (std::size_t i = 0; i < self.size(); ++i) {
                     dx[i] += self.flow[i] * mask[i];
                   }
                 });
}

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  Tensor& running_mean, Tensor& running_var, bool training,
                  double momentum, double eps) {
  const std::size_t m = x.rows(), n = x.cols();
  if (gamma.size() != n || beta.size() != n || running_mean.size() != n ||
      running_var.size() != n) {
    throw ShapeMismatch("batch_norm: per-column vectors must have length " +
                        std::to_string(n));
  }
  std::vector<double> mean(n, 0.0), inv_std(n), xhat(m * n), out(m * n);
  if (training) {
    if (m < 2) throw DegenerateBatch(m);
    std::vector<double> var(n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) mean[j] += x.data()[i * n + j];
    }
    for (std::size_t j = 0; j < n; ++j) mean[j] /= static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const double d = x.data()[i * n + j] - mean[j];
        var[j] += d * d;
      }
    }
    for (std::size_t j = 0; j < n; ++j) {
      var[j] /= static_cast<double>(m);
      inv_std[j] = 1.0 / std::sqrt(var[j] + eps);
      running_mean.data()[j] =
          (1.0 - momentum) * running_mean.data()[j] + momentum * mean[j];
      running_var.data()[j] =
          (1.0 - momentum) * running_var.data()[j] + momentum * var[j];
    }
  } else {
    for (std::size_t j = 0; j < n; ++j) {
      mean[j] = running_mean.data()[j];
      inv_std[j] = 1.0 / std::sqrt(running_var.data()[j] + eps);
    }
  }
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      xhat[i * n + j] = (x.data()[i * n + j] - mean[j]) * inv_std[j];
      out[i * n + j] = gamma.data()[j] * xhat[i * n + j] + beta.data()[j];
    }
  }
  return make_op(
      {m, n}, std::move(out), {x, gamma, beta},
      [m, n, training, inv_std = std::move(inv_std),
       xhat = std::move(xhat)](detail::Node& self) {
        auto& dx = pflow(self, 0);
        auto& dgamma = pflow(self, 1);
        auto& dbeta = pflow(self, 2);
        const auto& gv = pdata(self, 1);
        for (std::size_t j = 0; j < n; ++j) {
          double sum_f = 0.0, sum_fx = 0.0;
          for (std::size_t i = 0; i < m; ++i) {
            const double f = self.flow[i * n + j];
            sum_f += f;
            sum_fx += f * xhat[i * n + j];
          }
          dgamma[j] += sum_fx;
          dbeta[j] += sum_f;
          if (training) {
            const double scale = gv[j] * inv_std[j] / static_cast<double>(m);
            for (std::size_t i = 0; i < m; ++i) {
              const double f = self.flow[i * n + j];
              dx[i * n + j] += scale * (static_cast<double>(m) * f - sum_f -
                                        xhat[i * n + j] * sum_fx);
            }
          } else {
            for (std::size_t i = 0; i < m; ++i) {
              dx[i * n + j] += self.flow[i * n + j] * gv[j] * inv_std[j];
            }
          }
        }
      });
}

Tensor oblivious_leaf_weights(const Tensor& gates, std::size_t trees,
                              std::size_t depth) {
  const std::size_t m = gates.rows();
  if (gates.cols() != trees * depth) {
    throw ShapeMismatch("oblivious_leaf_weights: gates must be trees*depth wide");
  }
  const std::size_t leaves = std::size_t{1} << depth;
  std::vector<double> out(m * trees * leaves);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t t = 0; t < trees; ++t) {
      for (std::size_t l = 0; l < leaves; ++l) {
        double w = 1.0;
        for (std::size_t j = 0; j < depth; ++j) {
          const double c = gates.data()[i * trees * depth + t * depth + j];
          w *= (l >> j) & 1 ? c : 1.0 - c;
        }
        out[i * trees * leaves + t * leaves + l] = w;
      }
    }
  }
  return make_op(
      {m, trees * leaves}, std::move(out), {gates},
      [m, trees, depth, leaves](detail::Node& self) {
        auto& dg = pflow(self, 0);
        const auto& gv = pdata(self, 0);
        std::vector<double> factor(depth), prefix(depth + 1), suffix(depth + 1);
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t t = 0; t < trees; ++t) {
            const double* g = gv.data() + i * trees * depth + t * depth;
            double* d = dg.data() + i * trees * depth + t * depth;
            for (std::size_t l = 0; l < leaves; ++l) {
              const double f = self.flow[i * trees * leaves + t * leaves + l];
              if (f == 0.0) continue;
              for (std::size_t j = 0; j < depth; ++j) {
                factor[j] = (l >> j) & 1 ? g[j] : 1.0 - g[j];
              }
              prefix[0] = 1.0;
              for (std::size_t j = 0; j < depth; ++j) {
                prefix[j + 1] = prefix[j] * factor[j];
              }
              suffix[depth] = 1.0;
              for (std::size_t j = depth; j-- > 0;) {
                suffix[j] = suffix[j + 1] * factor[j];
              }
              for (std::size_t j = 0; j < depth; ++j) {
                const double others = prefix[j] * suffix[j + 1];
                d[j] += f * ((l >> j) & 1 ? others : -others);
              }
            }
          }
        }
      });
}

Tensor cross_entropy_logits(const Tensor& logits,
                            std::span<const std::size_t> targets) {
  const std::size_t m = logits.rows(), c = logits.cols();
  if (targets.size() != m) {
    throw ShapeMismatch("cross_entropy_logits: need one target per row");
  }
  std::vector<double> probs(m * c);
  double loss = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (targets[i] >= c) throw IndexOutOfRange(i, targets[i], c);
    const double* row = logits.data().data() + i * c;
    const double zmax = *std::max_element(row, row + c);
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      probs[i * c + j] = std::exp(row[j] - zmax);
      sum += probs[i * c + j];
    }
    for (std::size_t j = 0; j < c; ++j) probs[i * c + j] /= sum;
    loss += zmax + std::log(sum) - row[targets[i]];
  }
  loss /= static_cast<double>(m);
  std::vector<std::size_t> tgt(targets.begin(), targets.end());
  return make_op({1}, {loss}, {logits},
                 [m, c, probs = std::move(probs),
                  tgt = std::move(tgt)](detail::Node& self) {
                   auto& dz = pflow(self, 0);
                   const double f = self.flow[0] / static_cast<double>(m);
                   for (std::size_t i = 0; i < m; ++i) {
                     for (std::size_t j = 0; j < c; ++j) {
                       const double onehot = j == tgt[i] ? 1.0 : 0.0;
                       dz[i * c + j] += f * (probs[i * c + j] - onehot);
                     }
                   }
                 });
}

Tensor mse(const Tensor& pred, const Tensor& target) {
  check_same_shape(pred, target, "mse");
  const std::size_t n = pred.size();
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = pred.data()[i] - target.data()[i];
    loss += d * d;
  }
  loss /= static_cast<double>(n);
  return make_op({1}, {loss}, {pred, target}, [n](detail::Node& self) {
    auto& dp = pflow(self, 0);
    auto& dt = pflow(self, 1);
    const auto& pv = pdata(self, 0);
    const auto& tv = pdata(self, 1);
    const double f = 2.0 * self.flow[0] / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double d = f * (pv[i] - tv[i]);
      dp[i] += d;
      dt[i] -= d;
    }
  });
}

}  // namespace tabkit::ad
