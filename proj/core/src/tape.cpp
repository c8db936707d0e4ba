#include "intermode/tape.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace intermode {

namespace {

using MatrixRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<MatrixRM>;
using MapCM = Eigen::Map<const MatrixRM>;

MapCM as_matrix(const Array& a) {
  return MapCM(a.data.data(), static_cast<Eigen::Index>(a.rows()),
               static_cast<Eigen::Index>(a.cols()));
}

MapM as_matrix(Array& a) {
  return MapM(a.data.data(), static_cast<Eigen::Index>(a.rows()),
              static_cast<Eigen::Index>(a.cols()));
}

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

double clamp_prob(double p) {
  return std::clamp(p, kProbEps, 1.0 - kProbEps);
}

}  // namespace

Var Tape::push(Array value, std::function<void(Tape&, std::int32_t)> back) {
  nodes_.push_back(Node{std::move(value), Array{}, std::move(back)});
  return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

Var Tape::leaf(Array value) { return push(std::move(value), nullptr); }

Var Tape::linear(Var x, Var w, Var b) {
  const Array& xv = value(x);
  const Array& wv = value(w);
  const Array& bv = value(b);
  require(xv.cols() == wv.rows(), "linear: inner dimensions disagree");
  require(bv.size() == wv.cols(), "linear: bias length disagrees");
  Array out = Array::zeros({xv.rows(), wv.cols()});
  as_matrix(out).noalias() = as_matrix(xv) * as_matrix(wv);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (std::size_t c = 0; c < out.cols(); ++c) out.at(r, c) += bv.at(c);
  }
  return push(std::move(out), [x, w, b](Tape& t, std::int32_t self) {
    const Array& g = t.nodes_[self].grad;
    const Array& xv = t.value(x);
    const Array& wv = t.value(w);
    as_matrix(t.grad_mut(x)).noalias() += as_matrix(g) * as_matrix(wv).transpose();
    as_matrix(t.grad_mut(w)).noalias() += as_matrix(xv).transpose() * as_matrix(g);
    Array& gb = t.grad_mut(b);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      for (std::size_t c = 0; c < g.cols(); ++c) gb.at(c) += g.at(r, c);
    }
  });
}

Var Tape::matmul(Var a, Var b) {
  const Array& av = value(a);
  const Array& bv = value(b);
  require(av.cols() == bv.rows(), "matmul: inner dimensions disagree");
  Array out = Array::zeros({av.rows(), bv.cols()});
  as_matrix(out).noalias() = as_matrix(av) * as_matrix(bv);
  return push(std::move(out), [a, b](Tape& t, std::int32_t self) {
    const Array& g = t.nodes_[self].grad;
    as_matrix(t.grad_mut(a)).noalias() += as_matrix(g) * as_matrix(t.value(b)).transpose();
    as_matrix(t.grad_mut(b)).noalias() += as_matrix(t.value(a)).transpose() * as_matrix(g);
  });
}

Var Tape::tanh(Var x) {
  Array out = value(x);
  for (double& v : out.data) v = std::tanh(v);
  return push(std::move(out), [x](Tape& t, std::int32_t self) {
    const Array& g = t.nodes_[self].grad;
    const Array& y = t.nodes_[self].value;
    Array& gx = t.grad_mut(x);
    for (std::size_t i = 0; i < g.size(); ++i) {
      gx.data[i] += g.data[i] * (1.0 - y.data[i] * y.data[i]);
    }
  });
}

Var Tape::relu(Var x) {
  Array out = value(x);
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  return push(std::move(out), [x](Tape& t, std::int32_t self) {
    const Array& g = t.nodes_[self].grad;
    const Array& xv = t.value(x);
    Array& gx = t.grad_mut(x);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (xv.data[i] > 0.0) gx.data[i] += g.data[i];
    }
  });
}

Var Tape::softmax(Var x) {
  Array out = value(x);
  const std::size_t n = out.cols();
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    double m = row[0];
    for (double v : row) m = std::max(m, v);
    double sum = 0.0;
    for (double& v : row) {
      v = std::exp(v - m);
      sum += v;
    }
    for (double& v : row) v /= sum;
  }
  (void)n;
  return push(std::move(out), [x](Tape& t, std::int32_t self) {
    const Array& g = t.nodes_[self].grad;
    const Array& y = t.nodes_[self].value;
    Array& gx = t.grad_mut(x);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < g.cols(); ++c) dot += g.at(r, c) * y.at(r, c);
      for (std::size_t c = 0; c < g.cols(); ++c) {
        gx.at(r, c) += y.at(r, c) * (g.at(r, c) - dot);
      }
    }
  });
}

Var Tape::log_softmax(Var x) {
  Array out = value(x);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    double m = row[0];
    for (double v : row) m = std::max(m, v);
    double sum = 0.0;
    for (double v : row) sum += std::exp(v - m);
    const double lse = m + std::log(sum);
    for (double& v : row) v -= lse;
  }
  return push(std::move(out), [x](Tape& t, std::int32_t self) {
    const Array& g = t.nodes_[self].grad;
    const Array& y = t.nodes_[self].value;  // log-probabilities
    Array& gx = t.grad_mut(x);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      double gsum = 0.0;
      for (std::size_t c = 0; c < g.cols(); ++c) gsum += g.at(r, c);
      for (std::size_t c = 0; c < g.cols(); ++c) {
        gx.at(r, c) += g.at(r, c) - std::exp(y.at(r, c)) * gsum;
      }
    }
  });
}

Var Tape::add(Var a, Var b) {
  require(value(a).same_shape(value(b)), "add: shape mismatch");
  Array out = value(a);
  const Array& bv = value(b);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += bv.data[i];
  return push(std::move(out), [a, b](Tape& t, std::int32_t self) {
    const Array& g = t.nodes_[self].grad;
    Array& ga = t.grad_mut(a);
    Array& gb = t.grad_mut(b);
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga.data[i] += g.data[i];
      gb.data[i] += g.data[i];
    }
  });
}

Var Tape::sub(Var a, Var b) {
  require(value(a).same_shape(value(b)), "sub: shape mismatch");
  Array out = value(a);
  const Array& bv = value(b);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] -= bv.data[i];
  return push(std::move(out), [a, b](Tape& t, std::int32_t self) {
    const Array& g = t.nodes_[self].grad;
    Array& ga = t.grad_mut(a);
    Array& gb = t.grad_mut(b);
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga.data[i] += g.data[i];
      gb.data[i] -= g.data[i];
    }
  });
}

Var Tape::mul(Var a, Var b) {
  require(value(a).same_shape(value(b)), "mul: shape mismatch");
  Array out = value(a);
  const Array& bv = value(b);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= bv.data[i];
  return push(std::move(out), [a, b](Tape& t, std::int32_t self) {
    const Array& g = t.nodes_[self].grad;
    const Array& av = t.value(a);
    const Array& bv = t.value(b);
    Array& ga = t.grad_mut(a);
    Array& gb = t.grad_mut(b);
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga.data[i] += g.data[i] * bv.data[i];
      gb.data[i] += g.data[i] * av.data[i];
    }
  });
}

Var Tape::affine(Var x, double k, double c) {
  Array out = value(x);
  for (double& v : out.data) v = k * v + c;
  return push(std::move(out), [x, k](Tape& t, std::int32_t self) {
    const Array& g = t.nodes_[self].grad;
    Array& gx = t.grad_mut(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx.data[i] += k * g.data[i];
  });
}

Var Tape::exp(Var x) {
  Array out = value(x);
  for (double& v : out.data) v = std::exp(v);
  return push(std::move(out), [x](Tape& t, std::int32_t self) {
    const Array& g = t.nodes_[self].grad;
    const Array& y = t.nodes_[self].value;
    Array& gx = t.grad_mut(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx.data[i] += g.data[i] * y.data[i];
  });
}

Var Tape::log(Var x) {
  Array out = value(x);
  for (double& v : out.data) v = std::log(std::max(v, kProbEps));
  return push(std::move(out), [x](Tape& t, std::int32_t self) {
    const Array& g = t.nodes_[self].grad;
    const Array& xv = t.value(x);
    Array& gx = t.grad_mut(x);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (xv.data[i] > kProbEps) gx.data[i] += g.data[i] / xv.data[i];
    }
  });
}

Var Tape::reduce_sum(Var x) {
  double s = 0.0;
  for (double v : value(x).data) s += v;
  return push(Array::scalar(s), [x](Tape& t, std::int32_t self) {
    const double g = t.nodes_[self].grad.data[0];
    Array& gx = t.grad_mut(x);
    for (double& v : gx.data) v += g;
  });
}

Var Tape::reduce_mean(Var x) {
  const std::size_t n = value(x).size();
  require(n > 0, "reduce_mean: empty input");
  double s = 0.0;
  for (double v : value(x).data) s += v;
  return push(Array::scalar(s / static_cast<double>(n)),
              [x, n](Tape& t, std::int32_t self) {
                const double g = t.nodes_[self].grad.data[0] / static_cast<double>(n);
                Array& gx = t.grad_mut(x);
                for (double& v : gx.data) v += g;
              });
}

Var Tape::row_sum(Var x) {
  const Array& xv = value(x);
  Array out = Array::zeros({xv.rows()});
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < xv.cols(); ++c) s += xv.at(r, c);
    out.at(r) = s;
  }
  return push(std::move(out), [x](Tape& t, std::int32_t self) {
    const Array& g = t.nodes_[self].grad;
    Array& gx = t.grad_mut(x);
    for (std::size_t r = 0; r < gx.rows(); ++r) {
      for (std::size_t c = 0; c < gx.cols(); ++c) gx.at(r, c) += g.at(r);
    }
  });
}

Var Tape::concat_cols(Var a, Var b) {
  const Array& av = value(a);
  const Array& bv = value(b);
  require(av.rows() == bv.rows(), "concat_cols: row counts disagree");
  Array out = Array::zeros({av.rows(), av.cols() + bv.cols()});
  for (std::size_t r = 0; r < av.rows(); ++r) {
    for (std::size_t c = 0; c < av.cols(); ++c) out.at(r, c) = av.at(r, c);
    for (std::size_t c = 0; c < bv.cols(); ++c) out.at(r, av.cols() + c) = bv.at(r, c);
  }
  return push(std::move(out), [a, b](Tape& t, std::int32_t self) {
    const Array& g = t.nodes_[self].grad;
    Array& ga = t.grad_mut(a);
    Array& gb = t.grad_mut(b);
    const std::size_t na = ga.cols();
    for (std::size_t r = 0; r < ga.rows(); ++r) {
      for (std::size_t c = 0; c < ga.cols(); ++c) ga.at(r, c) += g.at(r, c);
      for (std::size_t c = 0; c < gb.cols(); ++c) gb.at(r, c) += g.at(r, na + c);
    }
  });
}

Var Tape::reshape(Var x, std::vector<std::size_t> shape) {
  require(shape_size(shape) == value(x).size(), "reshape: element count changes");
  Array out(std::move(shape), value(x).data);
  return push(std::move(out), [x](Tape& t, std::int32_t self) {
    const Array& g = t.nodes_[self].grad;
    Array& gx = t.grad_mut(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx.data[i] += g.data[i];
  });
}

Var Tape::column(Var x, std::size_t j) {
  const Array& xv = value(x);
  require(j < xv.cols(), "column: index out of range");
  Array out = Array::zeros({xv.rows()});
  for (std::size_t r = 0; r < xv.rows(); ++r) out.at(r) = xv.at(r, j);
  return push(std::move(out), [x, j](Tape& t, std::int32_t self) {
    const Array& g = t.nodes_[self].grad;
    Array& gx = t.grad_mut(x);
    for (std::size_t r = 0; r < gx.rows(); ++r) gx.at(r, j) += g.at(r);
  });
}

Var Tape::pick(Var x, std::vector<std::size_t> cols) {
  const Array& xv = value(x);
  require(cols.size() == xv.rows(), "pick: one column index per row required");
  Array out = Array::zeros({xv.rows()});
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    require(cols[r] < xv.cols(), "pick: column index out of range");
    out.at(r) = xv.at(r, cols[r]);
  }
  return push(std::move(out), [x, cols = std::move(cols)](Tape& t, std::int32_t self) {
    const Array& g = t.nodes_[self].grad;
    Array& gx = t.grad_mut(x);
    for (std::size_t r = 0; r < gx.rows(); ++r) gx.at(r, cols[r]) += g.at(r);
  });
}

Var Tape::bce_rows(Var pred, Var target) {
  const Array& pv = value(pred);
  const Array& tv = value(target);
  require(pv.same_shape(tv), "bce_rows: shape mismatch");
  Array out = Array::zeros({pv.rows()});
  for (std::size_t r = 0; r < pv.rows(); ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < pv.cols(); ++c) {
      const double p = clamp_prob(pv.at(r, c));
      const double tt = tv.at(r, c);
      s -= tt * std::log(p) + (1.0 - tt) * std::log(1.0 - p);
    }
    out.at(r) = s;
  }
  return push(std::move(out), [pred, target](Tape& t, std::int32_t self) {
    const Array& g = t.nodes_[self].grad;
    const Array& pv = t.value(pred);
    const Array& tv = t.value(target);
    Array& gp = t.grad_mut(pred);
    Array& gt = t.grad_mut(target);
    for (std::size_t r = 0; r < pv.rows(); ++r) {
      const double gr = g.at(r);
      for (std::size_t c = 0; c < pv.cols(); ++c) {
        const double praw = pv.at(r, c);
        const double p = clamp_prob(praw);
        const double tt = tv.at(r, c);
        if (praw > kProbEps && praw < 1.0 - kProbEps) {
          gp.at(r, c) += gr * (-tt / p + (1.0 - tt) / (1.0 - p));
        }
        gt.at(r, c) += gr * (std::log(1.0 - p) - std::log(p));
      }
    }
  });
}

Var Tape::kl_rows(Var q, Var p) {
  const Array& qv = value(q);
  const Array& pv = value(p);
  require(qv.same_shape(pv), "kl_rows: shape mismatch");
  Array out = Array::zeros({qv.rows()});
  for (std::size_t r = 0; r < qv.rows(); ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < qv.cols(); ++c) {
      const double qq = qv.at(r, c);
      if (qq <= 0.0) continue;  // 0 log 0 := 0
      const double pp = std::max(pv.at(r, c), kProbEps);
      s += qq * std::log(qq / pp);
    }
    out.at(r) = s;
  }
  return push(std::move(out), [q, p](Tape& t, std::int32_t self) {
    const Array& g = t.nodes_[self].grad;
    const Array& qv = t.value(q);
    const Array& pv = t.value(p);
    Array& gq = t.grad_mut(q);
    Array& gp = t.grad_mut(p);
    for (std::size_t r = 0; r < qv.rows(); ++r) {
      const double gr = g.at(r);
      for (std::size_t c = 0; c < qv.cols(); ++c) {
        const double qq = std::max(qv.at(r, c), kProbEps);
        const double praw = pv.at(r, c);
        const double pp = std::max(praw, kProbEps);
        gq.at(r, c) += gr * (std::log(qq / pp) + 1.0);
        if (praw > kProbEps) gp.at(r, c) += gr * (-qq / pp);
      }
    }
  });
}

void Tape::backward(Var loss) {
  require(loss.valid() && static_cast<std::size_t>(loss.id) < nodes_.size(),
          "backward: invalid loss var");
  require(value(loss).size() == 1, "backward: loss must be scalar");
  for (Node& n : nodes_) {
    n.grad = Array::zeros(n.value.shape);
  }
  nodes_[loss.id].grad.data[0] = 1.0;
  for (std::int32_t i = loss.id; i >= 0; --i) {
    if (nodes_[i].back) nodes_[i].back(*this, i);
  }
}

}  // namespace intermode
