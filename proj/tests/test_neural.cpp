#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "gradcheck.hpp"
#include "seqdispatch/adam.hpp"
#include "seqdispatch/checkpoint.hpp"
#include "seqdispatch/error.hpp"
#include "seqdispatch/lstm.hpp"
#include "seqdispatch/rng.hpp"
#include "seqdispatch/tape.hpp"

using namespace seqdispatch;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  Matrix m(r, c);
  for (auto& v : m.values()) v = rng.uniform(-scale, scale);
  return m;
}

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Plain loops over the cell equations.
void reference_cell(const LstmCellParams& p, const std::vector<double>& x, std::vector<double>& h,
                    std::vector<double>& c) {
  const std::size_t H = p.hidden_dim, I = p.input_dim;
  std::vector<double> nh(H), nc(H);
  for (std::size_t j = 0; j < H; ++j) {
    double zi = p.b_i(j, 0), zf = p.b_f(j, 0), zo = p.b_o(j, 0), zg = p.b_g(j, 0);
    for (std::size_t k = 0; k < I; ++k) {
      zi += p.w_i(j, k) * x[k];
      zf += p.w_f(j, k) * x[k];
      zo += p.w_o(j, k) * x[k];
      zg += p.w_g(j, k) * x[k];
    }
    for (std::size_t k = 0; k < H; ++k) {
      zi += p.u_i(j, k) * h[k];
      zf += p.u_f(j, k) * h[k];
      zo += p.u_o(j, k) * h[k];
      zg += p.u_g(j, k) * h[k];
    }
    nc[j] = sig(zf) * c[j] + sig(zi) * std::tanh(zg);
    nh[j] = sig(zo) * std::tanh(nc[j]);
  }
  h = nh;
  c = nc;
}

}  // namespace

TEST_CASE("lstm cell matches the scalar reference") {
  Rng rng(5);
  const auto p = LstmCellParams::init(3, 4, rng);
  std::vector<double> h(4, 0.0), c(4, 0.0);
  Matrix hm(4, 1), cm(4, 1);
  for (int t = 0; t < 6; ++t) {
    Matrix x = random_matrix(3, 1, rng);
    reference_cell(p, {x[0], x[1], x[2]}, h, c);
    const LstmState s = lstm_cell_step(p, x, hm, cm);
    hm = s.h;
    cm = s.c;
    for (std::size_t j = 0; j < 4; ++j) {
      CHECK(hm[j] == doctest::Approx(h[j]).epsilon(1e-14));
      CHECK(cm[j] == doctest::Approx(c[j]).epsilon(1e-14));
    }
  }
}

TEST_CASE("tape lstm matches value lstm") {
  Rng rng(6);
  const auto p = LstmCellParams::init(2, 3, rng);
  const Matrix seq = random_matrix(7, 2, rng);
  const auto v = lstm_forward(p, seq, Matrix(3, 1), Matrix(3, 1));
  Tape tape;
  const LstmVars pv = tape.bind(p, nullptr);
  std::vector<Var> xs;
  for (std::size_t t = 0; t < 7; ++t) xs.push_back(tape.constant(Matrix::column(seq.row(t))));
  const auto out = lstm_forward(tape, pv, xs, tape.constant(Matrix(3, 1)), tape.constant(Matrix(3, 1)));
  CHECK(tape.value(out.final.h) == v.final.h);
  CHECK(tape.value(out.final.c) == v.final.c);
  CHECK(tape.value(out.hidden[3]) == Matrix::column(v.hidden.row(3)));
}

TEST_CASE("bilstm summary concatenates both final states") {
  Rng rng(7);
  const auto p = BiLstmParams::init(2, 3, rng);
  const Matrix seq = random_matrix(5, 2, rng);
  const auto out = bilstm_forward(p, seq);
  REQUIRE(out.summary.rows() == 6);
  Matrix rev(5, 2);
  for (std::size_t t = 0; t < 5; ++t) {
    rev(t, 0) = seq(4 - t, 0);
    rev(t, 1) = seq(4 - t, 1);
  }
  const auto b = lstm_forward(p.backward, rev, Matrix(3, 1), Matrix(3, 1));
  for (std::size_t j = 0; j < 3; ++j) CHECK(out.summary[3 + j] == b.final.h[j]);
  CHECK_THROWS_AS(bilstm_forward(p, Matrix(0, 2)), Error);
}

TEST_CASE("dimension errors") {
  Rng rng(1);
  const auto p = LstmCellParams::init(3, 4, rng);
  CHECK_THROWS_AS(lstm_cell_step(p, Matrix(2, 1), Matrix(4, 1), Matrix(4, 1)), Error);
  Tape t;
  const Var a = t.constant(Matrix(2, 1));
  const Var b = t.constant(Matrix(3, 1));
  CHECK_THROWS_AS(t.add(a, b), Error);
  CHECK_THROWS_AS(t.backward(a), Error);
}

TEST_CASE("finite-difference checks per tape op") {
  Rng rng(11);
  using gradcheck::check_vars;
  std::vector<Matrix> ps{random_matrix(3, 4, rng), random_matrix(4, 1, rng), random_matrix(3, 1, rng),
                         random_matrix(3, 1, rng)};
  const auto r = check_vars(ps, [](Tape& t, const std::vector<Var>& v) {
    const Var z = t.affine(v[0], v[1], v[2]);
    const Var s = t.add(t.mul(t.sigmoid(z), t.tanh(v[3])), t.scale(z, 0.3));
    const Var cat = t.concat(s, t.affine(v[0], v[1]));
    return t.sum_squares(t.slice(cat, 1, 4));
  });
  CHECK(r.max_rel < 1e-6);

  std::vector<Matrix> emb{random_matrix(7, 3, rng), random_matrix(5, 1, rng)};
  const Matrix target = random_matrix(3, 1, rng);
  const auto r2 = check_vars(emb, [&](Tape& t, const std::vector<Var>& v) {
    const Var row = t.row(v[0], 4);
    std::vector<Var> seq{row, t.scale(row, -2.0), t.tanh(row)};
    const Var g = t.gather(seq, 1);
    const Var a = t.squared_error(g, target, 0.7);
    const Var b = t.softmax_cross_entropy(v[1], 2, 1.3);
    const std::vector<Var> parts{a, b};
    return t.sum(parts);
  });
  CHECK(r2.max_rel < 1e-6);
}

TEST_CASE("finite-difference check of an unrolled lstm layer") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    Rng rng(seed);
    auto p = LstmCellParams::init(2, 3, rng);
    const Matrix seq = random_matrix(5, 2, rng);
    const auto r = gradcheck::check_struct(p, [&](Tape& t, const LstmCellParams& q, LstmCellParams* g) {
      const LstmVars v = t.bind(q, g);
      std::vector<Var> xs;
      for (std::size_t i = 0; i < seq.rows(); ++i) xs.push_back(t.constant(Matrix::column(seq.row(i))));
      const auto out = lstm_forward(t, v, xs, t.constant(Matrix(3, 1, 0.1)), t.constant(Matrix(3, 1, -0.2)));
      const std::vector<Var> parts{t.sum_squares(out.final.h), t.sum_squares(out.final.c)};
      return t.sum(parts);
    });
    CHECK(r.max_rel < 1e-4);
  }
}

TEST_CASE("adam first step and clipping") {
  Matrix w(1, 2, 0.0), g(1, 2);
  g[0] = 0.5;
  g[1] = -2.0;
  AdamState adam(AdamConfig{0.1, 0.9, 0.999, 1e-8});
  Matrix* ps[] = {&w};
  const Matrix* gs[] = {&g};
  adam.step(ps, gs);
  // bias-corrected first step is -lr * sign(g) up to eps
  CHECK(w[0] == doctest::Approx(-0.1).epsilon(1e-6));
  CHECK(w[1] == doctest::Approx(0.1).epsilon(1e-6));
  Matrix* gm[] = {&g};
  const double before = clip_global_norm(gm, 1.0);
  CHECK(before == doctest::Approx(std::sqrt(4.25)));
  CHECK(global_norm(gs) == doctest::Approx(1.0));
}

TEST_CASE("checkpoint round trip and shape errors") {
  Rng rng(3);
  BiLstmParams p = BiLstmParams::init(2, 3, rng);
  const auto path = std::filesystem::temp_directory_path() / "seqdispatch_ckpt.bin";
  save_checkpoint(path, to_tensors(p));
  BiLstmParams q = BiLstmParams::zeros(2, 3);
  from_tensors(q, load_checkpoint(path));
  CHECK(q.forward.w_i == p.forward.w_i);
  CHECK(q.backward.b_g == p.backward.b_g);
  BiLstmParams wrong = BiLstmParams::zeros(2, 4);
  CHECK_THROWS_AS(from_tensors(wrong, load_checkpoint(path)), Error);
}
