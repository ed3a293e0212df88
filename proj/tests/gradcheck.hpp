#pragma once

// Central finite-difference gradient checks shared by the unit and
// acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "seqdispatch/adam.hpp"
#include "seqdispatch/matrix.hpp"
#include "seqdispatch/tape.hpp"

namespace gradcheck {

using seqdispatch::Matrix;
using seqdispatch::Tape;
using seqdispatch::Var;

struct Result {
  double max_rel = 0.0;
  std::size_t checked = 0;
  std::string worst;
};

// Relative error with a floor on the denominator: below ~1e-6 the gradient
// is compared on absolute error, which is all a double FD can resolve there.
inline double rel_error(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline void note(Result& r, double analytic, double numeric, const std::string& where) {
  const double e = rel_error(analytic, numeric);
  ++r.checked;
  if (e > r.max_rel || r.worst.empty()) {
    r.max_rel = std::max(r.max_rel, e);
    r.worst = where + " (analytic " + fmt(analytic) + ", numeric " + fmt(numeric) + ")";
  }
}

// Five-point central stencil: O(h^4) truncation, so h can stay large enough
// that rounding in the loss does not swamp small partials.
template <typename F>
double central_difference(double x, double h, F&& f) {
  return (8.0 * (f(x + h) - f(x - h)) - (f(x + 2 * h) - f(x - 2 * h))) / (12.0 * h);
}

// `build(tape, vars)` records a scalar loss from parameter vars bound to
// `params` (in order).
using Builder = std::function<Var(Tape&, const std::vector<Var>&)>;

inline Result check_vars(std::vector<Matrix>& params, const Builder& build, double h = 1e-4) {
  std::vector<Matrix> grads;
  for (const auto& p : params) grads.emplace_back(p.rows(), p.cols());
  Tape tape;
  std::vector<Var> vars;
  for (std::size_t i = 0; i < params.size(); ++i) vars.push_back(tape.parameter(params[i], &grads[i]));
  tape.backward(build(tape, vars));

  const auto eval = [&] {
    Tape t;
    std::vector<Var> v;
    for (auto& p : params) v.push_back(t.parameter(p, nullptr));
    return t.scalar(build(t, v));
  };
  Result r;
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (std::size_t j = 0; j < params[i].size(); ++j) {
      const double keep = params[i][j];
      const double d = central_difference(keep, h, [&](double x) {
        params[i][j] = x;
        return eval();
      });
      params[i][j] = keep;
      note(r, grads[i][j], d, "param " + std::to_string(i) + "[" + std::to_string(j) + "]");
    }
  }
  return r;
}

// For visitable parameter structs. `loss(tape, p, grads)` records the loss;
// grads may be null.
template <typename P, typename Loss>
Result check_struct(P& p, Loss&& loss, double h = 1e-4) {
  P grads = seqdispatch::zeros_like(p);
  {
    Tape tape;
    tape.backward(loss(tape, p, &grads));
  }
  const auto eval = [&] {
    Tape t;
    return t.scalar(loss(t, p, nullptr));
  };
  Result r;
  std::vector<std::pair<std::string, Matrix*>> named;
  P::visit(p, "", [&](const std::string& n, Matrix& m) { named.emplace_back(n, &m); });
  std::vector<Matrix*> g = seqdispatch::param_list(grads);
  for (std::size_t i = 0; i < named.size(); ++i) {
    Matrix& m = *named[i].second;
    for (std::size_t j = 0; j < m.size(); ++j) {
      const double keep = m[j];
      const double d = central_difference(keep, h, [&](double x) {
        m[j] = x;
        return eval();
      });
      m[j] = keep;
      note(r, (*g[i])[j], d, named[i].first + "[" + std::to_string(j) + "]");
    }
  }
  return r;
}

}  // namespace gradcheck
