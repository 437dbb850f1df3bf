#include "doctest.h"
#include "smgan/errors.hpp"
#include "smgan/tensor.hpp"

using namespace smgan;

TEST_CASE("tensor shape bookkeeping") {
  Tensor t({2, 3});
  CHECK(t.size() == 6);
  CHECK(t.rank() == 2);
  for (std::size_t i = 0; i < t.size(); ++i) CHECK(t[i] == 0.0);

  Tensor r = Tensor::from_rows({{1, 2}, {3, 4}});
  CHECK(r.at({1, 0}) == 3.0);
  CHECK(r.shape_string() == "[2x2]");
}

TEST_CASE("tensor data/shape mismatch is rejected") {
  CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0}), ShapeError);
  CHECK_THROWS_AS(Tensor({0, 3}), ArgumentError);
  CHECK_THROWS_AS(Tensor::from_rows({{1, 2}, {3}}), ShapeError);
}

TEST_CASE("finiteness and scalar access") {
  Tensor t = Tensor::scalar(4.5);
  CHECK(t.item() == 4.5);
  CHECK(t.all_finite());
  t[0] = 1.0 / 0.0;
  CHECK_FALSE(t.all_finite());
  Tensor m({2, 2});
  CHECK_THROWS_AS(m.item(), ContractError);
}
