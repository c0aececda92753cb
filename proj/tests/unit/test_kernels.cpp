#include <doctest.h>

#include <cstring>

#include "rtls/kernels.hpp"
#include "support.hpp"

using namespace rtls;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("gemv kernels agree bitwise") {
  Rng rng(3);
  for (auto [rows, cols] : {std::pair{1, 1}, {7, 3}, {300, 257}, {513, 129}}) {
    const auto a = random_vec(static_cast<std::size_t>(rows) * cols, rng);
    const auto x = random_vec(cols, rng);
    const auto xt = random_vec(rows, rng);
    auto y_s = random_vec(rows, rng);
    auto y_p = y_s;
    kernels::serial::gemv_acc({a, rows, cols}, x, y_s);
    kernels::parallel::gemv_acc({a, rows, cols}, x, y_p);
    CHECK(bitwise_equal(y_s, y_p));

    auto z_s = random_vec(cols, rng);
    auto z_p = z_s;
    kernels::serial::gemv_t_acc({a, rows, cols}, xt, z_s);
    kernels::parallel::gemv_t_acc({a, rows, cols}, xt, z_p);
    CHECK(bitwise_equal(z_s, z_p));

    auto m_s = a;
    auto m_p = a;
    kernels::serial::ger_acc(m_s, rows, cols, xt, x);
    kernels::parallel::ger_acc(m_p, rows, cols, xt, x);
    CHECK(bitwise_equal(m_s, m_p));
  }
}

TEST_CASE("gemv computes the product") {
  const std::vector<double> a{1, 2, 3, 4, 5, 6};  // 2x3
  const std::vector<double> x{1, 0, -1};
  std::vector<double> y{10, 20};
  kernels::gemv_acc({a, 2, 3}, x, y);
  CHECK(y == std::vector<double>{8, 18});
  std::vector<double> z{0, 0, 0};
  const std::vector<double> u{1, 1};
  kernels::gemv_t_acc({a, 2, 3}, u, z);
  CHECK(z == std::vector<double>{5, 7, 9});
}

TEST_CASE("all-pairs hop kernels agree") {
  Rng rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const auto g = test::random_graph(rng.uniform_int(1, 60), 0.08, rng);
    std::vector<std::vector<int>> adj;
    for (int z = 0; z < g.zone_count(); ++z) adj.push_back(g.neighbors(z));
    CHECK(kernels::serial::all_pairs_hops(adj, -7) == kernels::parallel::all_pairs_hops(adj, -7));
  }
}
