#include <cmath>
#include <limits>
#include <memory>
#include <vector>

#include "doctest.h"
#include "gnninject/core/errors.hpp"
#include "gnninject/core/rng.hpp"
#include "gnninject/graph/graph.hpp"
#include "gnninject/tensor/checkpoint.hpp"
#include "gnninject/tensor/ops.hpp"
#include "support/tempdir.hpp"

using namespace gnninject;
using namespace gnninject::ad;

TEST_CASE("identity matmul and shape laws") {
  Tensor a(2, 2, {1, 2, 3, 4});
  Tensor i(2, 2, {1, 0, 0, 1});
  const auto p = matmul(a, i);
  CHECK(std::vector<double>(p.values().begin(), p.values().end()) == std::vector<double>{1, 2, 3, 4});
  Tensor x(1, 5), y(1, 5);
  const auto c = concat_rows(x, y);
  CHECK(c.rows() == 1);
  CHECK(c.cols() == 10);
  CHECK(stack_rows(Tensor(2, 3), Tensor(1, 3)).rows() == 3);
}

TEST_CASE("shape mismatch names both shapes") {
  try {
    matmul(Tensor(2, 3), Tensor(2, 3));
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("2x3") != std::string::npos);
  }
  CHECK_THROWS_AS(add(Tensor(1, 2), Tensor(2, 1)), DimensionError);
  CHECK_THROWS_AS(concat_rows(Tensor(1, 2), Tensor(2, 2)), DimensionError);
}

TEST_CASE("spmm with identity and a normalized two-node graph") {
  auto id = std::make_shared<const SparseMatrix>(SparseMatrix::identity(3));
  Tensor d(3, 2, {1, 2, 3, 4, 5, 6});
  const auto r = spmm(id, d);
  CHECK(r(2, 1) == 6.0);
  const std::vector<std::pair<NodeId, NodeId>> e = {{0, 1}};
  const auto g = Graph::build(2, 1, 1, e, {{}, {}}, {0, 0});
  auto adj = std::make_shared<const SparseMatrix>(normalized_adjacency(g));
  Tensor x(2, 2, {2, 0, 4, 6});
  const auto h = spmm(adj, x);
  CHECK(h(0, 0) == doctest::Approx(3.0));
  CHECK(h(0, 1) == doctest::Approx(3.0));
  CHECK_THROWS_AS(spmm(adj, Tensor(3, 1)), DimensionError);
}

TEST_CASE("activations") {
  const auto s = softmax_rows(Tensor(1, 2, {0, 0}));
  CHECK(s(0, 0) == 0.5);
  CHECK(s(0, 1) == 0.5);
  Tensor z(1, 1, {0.0}, true);
  const auto t = tanh(z);
  CHECK(t.item() == 0.0);
  backward(t);
  CHECK(z.grad()[0] == 1.0);
  CHECK_THROWS_AS(log(Tensor(1, 2, {1.0, 0.0})), DomainError);
  CHECK_THROWS_AS(log(Tensor(1, 1, std::vector<double>{-1.0})), DomainError);
}

TEST_CASE("softmax rows are normalized and non-negative") {
  Rng rng(3);
  for (int t = 0; t < 100; ++t) {
    Tensor a(4, 9);
    for (auto& v : a.mutable_values()) v = 30.0 * standard_normal(rng);
    const auto s = softmax_rows(a);
    for (std::size_t i = 0; i < 4; ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < 9; ++j) {
        CHECK(s(i, j) >= 0.0);
        sum += s(i, j);
      }
      CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("masked log-softmax puts -inf on masked entries") {
  Tensor l(1, 4, {1, 1, 5, 1});
  const std::vector<std::uint8_t> m = {1, 1, 0, 0};
  const auto lp = masked_log_softmax_rows(l, m);
  CHECK(std::exp(lp(0, 0)) == doctest::Approx(0.5));
  CHECK(lp(0, 2) == -std::numeric_limits<double>::infinity());
  const std::vector<std::uint8_t> none = {0, 0, 0, 0};
  CHECK_THROWS_AS(masked_log_softmax_rows(l, none), DomainError);
}

TEST_CASE("backward basics") {
  Tensor w(2, 3, {1, -2, 3, 0.5, 4, -1}, true);
  backward(sum(w));
  for (double g : w.grad()) CHECK(g == 1.0);
  w.zero_grad();
  backward(scale(sum(square(w)), 0.5));
  for (std::size_t i = 0; i < 6; ++i) CHECK(w.grad()[i] == doctest::Approx(w.values()[i]));
  CHECK_THROWS_AS(backward(w), UsageError);
}

TEST_CASE("backward is linear in the loss") {
  Rng rng(12);
  Tensor w(3, 3, true);
  for (auto& v : w.mutable_values()) v = standard_normal(rng);
  Tensor x(2, 3);
  for (auto& v : x.mutable_values()) v = standard_normal(rng);
  auto l1 = [&] { return sum(tanh(matmul(x, w))); };
  auto l2 = [&] { return sum(square(w)); };
  backward(l1());
  std::vector<double> g1(w.grad().begin(), w.grad().end());
  w.zero_grad();
  backward(l2());
  std::vector<double> g2(w.grad().begin(), w.grad().end());
  w.zero_grad();
  backward(add(scale(l1(), 2.5), scale(l2(), -0.75)));
  for (std::size_t i = 0; i < 9; ++i) CHECK(w.grad()[i] == doctest::Approx(2.5 * g1[i] - 0.75 * g2[i]).epsilon(1e-12));
}

TEST_CASE("ops without tracked inputs record no tape") {
  Tensor a(2, 2, {1, 2, 3, 4});
  const auto b = tanh(matmul(a, a));
  CHECK(!b.requires_grad());
  CHECK(b.node()->parents.empty());
}

TEST_CASE("clip, minimum and huber branch values") {
  const auto c = clip(Tensor(1, 3, {1.3, 0.5, 1.0}), 0.9, 1.1);
  CHECK(c(0, 0) == 1.1);
  CHECK(c(0, 1) == 0.9);
  CHECK(c(0, 2) == 1.0);
  const auto h = huber(Tensor(1, 4, {0.5, -0.5, 2.0, -2.0}));
  CHECK(h(0, 0) == 0.125);
  CHECK(h(0, 1) == 0.125);
  CHECK(h(0, 2) == 1.5);
  CHECK(h(0, 3) == 1.5);
  const auto m = minimum(Tensor(1, 2, {1, 5}), Tensor(1, 2, {2, 3}));
  CHECK(m(0, 0) == 1.0);
  CHECK(m(0, 1) == 3.0);
}

TEST_CASE("checkpoint round trip") {
  testutil::TempDir t;
  Checkpoint ck;
  ck.meta["arch"] = "gcn";
  ck.meta["F"] = "12";
  ck.add("W1", Tensor(2, 3, {1, 2, 3, 4, 5, -6.25}));
  ck.add("b", Tensor(1, 1, std::vector<double>{std::nextafter(1.0, 2.0)}));
  ck.save(t.path() / "m.ckpt");
  const auto r = Checkpoint::load(t.path() / "m.ckpt");
  CHECK(r.meta_value("arch") == "gcn");
  CHECK(r.get("W1")(1, 2) == -6.25);
  CHECK(r.get("b").item() == std::nextafter(1.0, 2.0));
  CHECK(r.tensors[0].first == "W1");
  CHECK_THROWS_AS(r.get("W9"), ValidationError);
  testutil::write_file(t.path() / "bad.ckpt", "GNNICKPT\x01");
  CHECK_THROWS_AS(Checkpoint::load(t.path() / "bad.ckpt"), ParseError);
  testutil::write_file(t.path() / "foreign.ckpt", "hello world, not a checkpoint");
  CHECK_THROWS_AS(Checkpoint::load(t.path() / "foreign.ckpt"), ParseError);
  const auto bytes = testutil::read_file(t.path() / "m.ckpt");
  CHECK(bytes.substr(0, 8) == "GNNICKPT");
  CHECK(bytes[8] == 1);
  CHECK(bytes[9] == 0);
}

TEST_CASE("NoGradGuard suppresses the tape") {
  Tensor w(2, 2, {1, 2, 3, 4}, true);
  {
    NoGradGuard g;
    const auto y = matmul(w, w);
    CHECK(!y.requires_grad());
    {
      NoGradGuard inner;
    }
    CHECK(!NoGradGuard::grad_enabled());
  }
  CHECK(NoGradGuard::grad_enabled());
  CHECK(matmul(w, w).requires_grad());
}
